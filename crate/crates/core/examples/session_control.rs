//! Step a session by hand: answer a question, pause, act as the user,
//! resume, then cancel.
//!
//! ```text
//! cargo run -p flowbench --example session_control
//! ```

use flowbench::fixtures;
use flowbench::gateway::{ScriptEntry, ScriptedBackend, ToolCall};
use flowbench::runtime::{Session, SessionInit, UserResponse};
use flowbench::sim::{EnvAction, ScrollDirection};

fn main() {
    let script = vec![
        ScriptEntry::call(
            ToolCall::AskOptions {
                question: "Which coffee?".into(),
                options: vec!["Latte".into(), "Mocha".into()],
            },
            "The order is ambiguous.",
        ),
        ScriptEntry::call(ToolCall::Click { element: "menu-link".into() }, "Find the menu.").described("Open the menu"),
        ScriptEntry::call(ToolCall::Click { element: "mocha-link".into() }, "Open the mocha.").described("Open Mocha"),
        ScriptEntry::call(ToolCall::Finish { summary: "Done".into() }, ""),
    ];
    let init = SessionInit::new(
        fixtures::prototype_1(),
        fixtures::coffee_shop(),
        Box::new(ScriptedBackend::new(script)),
        "Get me a coffee",
    );
    let mut session = Session::start(init).expect("valid workflow");

    println!("state: {:?}", session.run_until_blocked().unwrap());
    if let Some(q) = session.pending_question() {
        println!("asked: {} {:?}", q.question, q.options);
    }
    session.submit_user_response(UserResponse::Option("Mocha".into())).unwrap();
    session.step().unwrap();
    println!("after one step: {} at {}", session.state().name(), session.site().current_url);

    session.pause().unwrap();
    let result = session
        .record_user_env_action(&EnvAction::Scroll { direction: ScrollDirection::Down, amount: 3 })
        .unwrap();
    println!("user action while paused: {}", result.feedback());
    println!("resumed: {:?}", session.resume().unwrap());
    session.step().unwrap();

    println!("cancel: {:?}", session.cancel().unwrap());
    println!("cancel again: {}", session.cancel().unwrap_err());
    println!("steps: {}, events: {}", session.step_count(), session.events().len());
    for e in session.events().since(0, &[]) {
        println!("  #{} {:?} {}", e.seq, e.kind, e.payload);
    }
}
