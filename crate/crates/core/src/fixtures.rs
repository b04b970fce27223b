//! Bundled golden workflows and the coffee-shop site.
//!
//! The prototype graphs are the reference agent experiences for ordering a
//! coffee from an ambiguous request. Their canonical documents also live
//! under `fixtures/workflows/` and are checked against these builders.

use crate::sim::{load_fixture, SimSite};
use crate::workflow::{
    EdgeCondition, InteractConfig, InteractMode, Node, NodeSpec, UiActionsDisplay, WorkflowGraph,
};

pub const COFFEE_SHOP_FIXTURE: &str = include_str!("../fixtures/sites/coffee_shop.json");

pub fn coffee_shop() -> SimSite {
    load_fixture(COFFEE_SHOP_FIXTURE).expect("bundled fixture is valid")
}

fn ui(show_action_name: bool, show_description: bool, show_reasoning: bool, page_preview: bool) -> NodeSpec {
    NodeSpec::UiActions(UiActionsDisplay {
        show_action_name,
        show_description,
        show_reasoning,
        page_preview,
    })
}

fn interact(mode: InteractMode) -> NodeSpec {
    NodeSpec::Interact(InteractConfig { mode })
}

fn custom(text: &str) -> EdgeCondition {
    EdgeCondition::custom(text)
}

/// Start -> End.
pub fn start_end() -> WorkflowGraph {
    WorkflowGraph::new("start-end", "Start to End")
        .with_node(Node::new("start", NodeSpec::Start))
        .with_node(Node::new("end", NodeSpec::End))
        .connect("start", "end", EdgeCondition::Always)
}

/// Interactive agent: clarifies the order, acts, confirms before adding to
/// the cart. UI actions show name and description.
pub fn prototype_1() -> WorkflowGraph {
    WorkflowGraph::new("prototype-1", "Prototype 1: clarify and confirm")
        .with_node(Node::new("start", NodeSpec::Start))
        .with_node(Node::new("interact", interact(InteractMode::OptionsDropdown)))
        .with_node(Node::new("ui", ui(true, true, false, false)))
        .with_node(Node::new("confirm", NodeSpec::Confirmation))
        .with_node(Node::new("end", NodeSpec::End))
        .connect("start", "interact", EdgeCondition::Always)
        .connect("interact", "ui", EdgeCondition::Always)
        .connect("ui", "confirm", custom("if_add_cart"))
        .connect("confirm", "end", EdgeCondition::Always)
}

/// Autonomous agent: shows a plan, messages after major steps, shows only
/// action names.
pub fn prototype_2() -> WorkflowGraph {
    WorkflowGraph::new("prototype-2", "Prototype 2: plan and report")
        .with_node(Node::new("start", NodeSpec::Start))
        .with_node(Node::new("plan", NodeSpec::Plan))
        .with_node(Node::new("ui", ui(true, false, false, false)))
        .with_node(Node::new("message", NodeSpec::Message))
        .with_node(Node::new("end", NodeSpec::End))
        .connect("start", "plan", EdgeCondition::Always)
        .connect("plan", "ui", EdgeCondition::Always)
        .connect("ui", "message", custom("if_step_done"))
        .connect("message", "end", EdgeCondition::Always)
}

/// Conversational agent: welcome message, clarification, order summary,
/// confirmation. UI actions are not shown at all.
pub fn prototype_3() -> WorkflowGraph {
    WorkflowGraph::new("prototype-3", "Prototype 3: friendly and interactive")
        .with_node(Node::new("start", NodeSpec::Start))
        .with_node(Node::new("welcome", NodeSpec::Message).with_label("Welcome"))
        .with_node(Node::new("interact", interact(InteractMode::OptionsDropdown)))
        .with_node(Node::new("summary", NodeSpec::Message).with_label("Order summary"))
        .with_node(Node::new("ui", ui(false, false, false, false)))
        .with_node(Node::new("confirm", NodeSpec::Confirmation))
        .with_node(Node::new("end", NodeSpec::End))
        .connect("start", "welcome", custom("welcome_message"))
        .connect("welcome", "interact", EdgeCondition::Always)
        .connect("interact", "summary", custom("summarize_order"))
        .connect("summary", "ui", EdgeCondition::Always)
        .connect("ui", "confirm", custom("if_add_cart"))
        .connect("confirm", "end", EdgeCondition::Always)
}

/// Error-handling agent: on an agent error it shows a plan and confirms the
/// next step; a declined confirmation leads to an open question.
pub fn prototype_4() -> WorkflowGraph {
    WorkflowGraph::new("prototype-4", "Prototype 4: recover from errors")
        .with_node(Node::new("start", NodeSpec::Start))
        .with_node(Node::new("ui", ui(false, true, true, false)))
        .with_node(Node::new("plan", NodeSpec::Plan))
        .with_node(Node::new("confirm", NodeSpec::Confirmation))
        .with_node(Node::new("interact", interact(InteractMode::FreeText)))
        .with_node(Node::new("end", NodeSpec::End))
        .connect("start", "ui", EdgeCondition::Always)
        .connect("ui", "plan", custom("agent_error"))
        .connect("plan", "confirm", EdgeCondition::Always)
        .connect("confirm", "interact", custom("confirmation_declined"))
        .connect("interact", "end", EdgeCondition::Always)
        .connect("ui", "end", EdgeCondition::Always)
}

/// Silent agent: no information about UI actions, one confirmation before a
/// risky action.
pub fn silent_risk() -> WorkflowGraph {
    WorkflowGraph::new("silent-risk", "Silent agent with risk confirmation")
        .with_node(Node::new("start", NodeSpec::Start))
        .with_node(Node::new("ui", ui(false, false, false, false)))
        .with_node(Node::new("confirm", NodeSpec::Confirmation))
        .with_node(Node::new("end", NodeSpec::End))
        .connect("start", "ui", EdgeCondition::Always)
        .connect("ui", "confirm", custom("high_risk_action"))
        .connect("confirm", "end", EdgeCondition::Always)
}

/// Every bundled golden workflow, in a fixed order.
pub fn golden_workflows() -> Vec<WorkflowGraph> {
    vec![
        start_end(),
        prototype_1(),
        prototype_2(),
        prototype_3(),
        prototype_4(),
        silent_risk(),
    ]
}

/// File name of a golden workflow under `fixtures/workflows/`.
pub fn workflow_file_name(graph: &WorkflowGraph) -> String {
    format!("{}.json", graph.id.replace('-', "_"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workflow::{serialize, validate};

    #[test]
    fn golden_files_match_builders() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/workflows");
        for g in golden_workflows() {
            assert!(validate(&g).is_empty(), "{}", g.id);
            let path = dir.join(workflow_file_name(&g));
            let text = serialize(&g);
            if std::env::var_os("FLOWBENCH_BLESS").is_some() {
                std::fs::write(&path, &text).unwrap();
            }
            assert_eq!(std::fs::read_to_string(&path).unwrap(), text, "{}", path.display());
        }
    }
}
