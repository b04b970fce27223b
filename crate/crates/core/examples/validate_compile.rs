//! Build a workflow in code, validate it and compile it into a system prompt.
//!
//! ```text
//! cargo run -p flowbench --example validate_compile
//! ```

use flowbench::compiler::{compile, PromptBundle, Section};
use flowbench::workflow::{
    serialize, validate, EdgeCondition, Node, NodeSpec, UiActionsDisplay, WorkflowGraph,
};

fn main() {
    let display = UiActionsDisplay {
        show_action_name: true,
        show_description: true,
        show_reasoning: false,
        page_preview: false,
    };
    let graph = WorkflowGraph::new("checkout-guard", "Confirm before paying")
        .with_node(Node::new("start", NodeSpec::Start))
        .with_node(Node::new("plan", NodeSpec::Plan))
        .with_node(Node::new("ui", NodeSpec::UiActions(display)))
        .with_node(Node::new("confirm", NodeSpec::Confirmation))
        .with_node(Node::new("end", NodeSpec::End))
        .connect("start", "plan", EdgeCondition::Always)
        .connect("plan", "ui", EdgeCondition::Always)
        .connect("ui", "confirm", EdgeCondition::Risk)
        .connect("confirm", "end", EdgeCondition::Always);

    let report = validate(&graph);
    println!("executable: {}", report.is_executable());

    let bundle = PromptBundle {
        user_info_prompt: "The user prefers oat milk.".into(),
        ..PromptBundle::default()
    };
    let compiled = compile(&graph, &bundle, None).expect("valid graph compiles");
    println!("--- workflow section ---\n{}", compiled.system_prompt.section(Section::Workflow).unwrap_or(""));
    println!("--- full prompt ({} bytes) ---\n{}", compiled.system_prompt.text.len(), compiled.system_prompt.text);

    println!("--- document ---\n{}", serialize(&graph));

    let broken = graph.connect("end", "start", EdgeCondition::Always);
    print!("--- broken graph ---\n{}", validate(&broken).render());
}
