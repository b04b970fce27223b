use serde_json::{json, Map, Value};

use crate::events::{Channel, ChatEvent, EventKind};
use crate::gateway::ToolCall;
use crate::trace::{debug_projection, StepAction, StepRecord};
use crate::workflow::UiActionsDisplay;

/// Events a step produces, before sequencing.
///
/// Environment actions give a `user_visible` `action_notice` holding only the
/// enabled parts (none enabled: no notice) and, with `page_preview`, an
/// `env_highlight`. Interaction calls are always `user_visible`. The debug
/// channel always gets a full `action_notice` for environment actions plus
/// the [`debug_projection`] pair.
pub fn project_visible(record: &StepRecord, config: &UiActionsDisplay) -> Vec<ChatEvent> {
    let step = Some(record.step_index);
    let mut out = Vec::new();
    let visible = |kind: EventKind, payload: Value| ChatEvent::draft(Channel::UserVisible, kind, payload, step);

    if let StepAction::Action {
        call,
        reasoning,
        description,
    } = &record.parsed_action
    {
        match call {
            ToolCall::ShowPlan { steps } => out.push(visible(EventKind::Plan, json!({ "steps": steps }))),
            ToolCall::SendMessage { text } => out.push(visible(EventKind::AgentMessage, json!({ "text": text }))),
            ToolCall::AskOptions { question, options } => out.push(visible(
                EventKind::Ask,
                json!({ "mode": "options", "question": question, "options": options }),
            )),
            ToolCall::AskFreeText { question } => out.push(visible(
                EventKind::Ask,
                json!({ "mode": "free_text", "question": question }),
            )),
            ToolCall::Confirm { question } => {
                out.push(visible(EventKind::ConfirmRequest, json!({ "question": question })))
            }
            ToolCall::Finish { summary } => {
                if !summary.is_empty() {
                    out.push(visible(EventKind::AgentMessage, json!({ "text": summary, "final": true })));
                }
            }
            env => {
                let mut parts = Map::new();
                if config.show_action_name {
                    parts.insert("action".into(), json!(env.name()));
                }
                if config.show_description {
                    parts.insert("description".into(), json!(description));
                }
                if config.show_reasoning {
                    parts.insert("reasoning".into(), json!(reasoning));
                }
                if !parts.is_empty() {
                    out.push(visible(EventKind::ActionNotice, Value::Object(parts)));
                }
                if config.page_preview {
                    let action = env.env_action().expect("environment call");
                    out.push(visible(EventKind::EnvHighlight, serde_json::to_value(&action).expect("serializable")));
                }
                out.push(ChatEvent::draft(
                    Channel::Debug,
                    EventKind::ActionNotice,
                    json!({
                        "action": env.name(),
                        "args": env.arguments(),
                        "description": description,
                        "reasoning": reasoning,
                        "result": record.env_result,
                    }),
                    step,
                ));
            }
        }
    }
    out.extend(debug_projection(record));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::to_compact;
    use crate::fixtures;
    use crate::gateway::{Message, ModelOutput};
    use crate::sim::{observe, ScrollDirection, Viewport};
    use crate::trace::context_digest;

    fn step(call: ToolCall) -> StepRecord {
        let ctx = vec![Message::system("s")];
        StepRecord {
            step_index: 0,
            observation: observe(&fixtures::coffee_shop(), &Viewport::default()),
            context_digest: context_digest(&ctx),
            input_context: ctx,
            output: Some(ModelOutput::call(&call, "REASON-TEXT")),
            parsed_action: StepAction::Action {
                call,
                reasoning: "REASON-TEXT".into(),
                description: "DESCRIPTION-TEXT".into(),
            },
            env_result: None,
            events_emitted: vec![],
            wall_time: 0,
        }
    }

    fn visible(events: &[ChatEvent]) -> Vec<&ChatEvent> {
        events.iter().filter(|e| e.channel == Channel::UserVisible).collect()
    }

    #[test]
    fn silent_config_hides_everything_but_debug() {
        let ev = project_visible(&step(ToolCall::Click { element: "menu-link".into() }), &UiActionsDisplay::SILENT);
        assert!(visible(&ev).is_empty());
        let debug: Vec<_> = ev.iter().filter(|e| e.channel == Channel::Debug).collect();
        assert_eq!(debug.len(), 3);
        assert!(to_compact(&debug[0].payload).contains("REASON-TEXT"));
    }

    #[test]
    fn name_only_scroll_notice() {
        let cfg = UiActionsDisplay {
            show_action_name: true,
            ..UiActionsDisplay::SILENT
        };
        let ev = project_visible(
            &step(ToolCall::Scroll {
                direction: ScrollDirection::Down,
                amount: 5,
            }),
            &cfg,
        );
        let vis = visible(&ev);
        assert_eq!(vis.len(), 1);
        assert_eq!(vis[0].payload, json!({"action": "scroll"}));
    }

    #[test]
    fn every_part_when_all_enabled() {
        let cfg = UiActionsDisplay {
            show_action_name: true,
            show_description: true,
            show_reasoning: true,
            page_preview: true,
        };
        let ev = project_visible(&step(ToolCall::Click { element: "menu-link".into() }), &cfg);
        let vis = visible(&ev);
        assert_eq!(vis.len(), 2);
        assert_eq!(
            vis[0].payload,
            json!({"action": "click", "description": "DESCRIPTION-TEXT", "reasoning": "REASON-TEXT"})
        );
        assert_eq!(vis[1].kind, EventKind::EnvHighlight);
    }

    #[test]
    fn interaction_events_ignore_config() {
        let ev = project_visible(
            &step(ToolCall::AskOptions {
                question: "Which?".into(),
                options: vec!["Latte".into()],
            }),
            &UiActionsDisplay::SILENT,
        );
        assert_eq!(visible(&ev).len(), 1);
        assert_eq!(visible(&ev)[0].kind, EventKind::Ask);
    }

    #[test]
    fn hidden_reasoning_never_visible() {
        for cfg in UiActionsDisplay::all_combinations() {
            let ev = project_visible(&step(ToolCall::Click { element: "menu-link".into() }), &cfg);
            let leaked = visible(&ev).iter().any(|e| to_compact(&e.payload).contains("REASON-TEXT"));
            assert_eq!(leaked, cfg.show_reasoning, "{cfg:?}");
            assert!(ev.iter().any(|e| e.channel == Channel::Debug && to_compact(&e.payload).contains("REASON-TEXT")));
        }
    }
}
