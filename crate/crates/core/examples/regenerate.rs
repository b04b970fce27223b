//! Regenerate a workflow from an edited prompt with a scripted model and
//! diff the result against the original.
//!
//! ```text
//! cargo run -p flowbench --example regenerate
//! ```

use flowbench::compiler::{compile, generate_workflow_from_prompt, PromptBundle};
use flowbench::fixtures;
use flowbench::gateway::{ScriptEntry, ScriptedBackend};
use flowbench::workflow::{serialize, structural_diff, EdgeCondition, Node, NodeSpec};

fn main() {
    let current = fixtures::prototype_1();
    let compiled = compile(&current, &PromptBundle::default(), None).unwrap();
    let edited = format!("{}\nAlways send a message after adding to the cart.", compiled.workflow_prompt);

    let mut target = current.clone().with_node(Node::new("note", NodeSpec::Message));
    target.edges.retain(|e| !(e.from == "confirm" && e.to == "end"));
    let target = target
        .connect("confirm", "note", EdgeCondition::Always)
        .connect("note", "end", EdgeCondition::Always);

    let mut backend = ScriptedBackend::new(vec![ScriptEntry::text(&serialize(&target))]);
    let updated = generate_workflow_from_prompt(&edited, &current, &mut backend).expect("regeneration succeeds");
    println!("revision {} -> {}", current.revision, updated.revision);

    let diff = structural_diff(&current, &updated);
    println!("{} changes", diff.len());
    println!("{}", serde_json::to_string_pretty(&diff).unwrap());

    let mut garbage = ScriptedBackend::new(vec![ScriptEntry::text("not a workflow")]);
    let err = generate_workflow_from_prompt(&edited, &current, &mut garbage).unwrap_err();
    println!("garbage reply: {err}");
}
