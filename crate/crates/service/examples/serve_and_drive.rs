//! Start the service on an ephemeral port, upload a workflow and the
//! coffee-shop site, run a scripted session over HTTP and read its event
//! stream and trace.
//!
//! ```text
//! cargo run -p flowbench-service --example serve_and_drive
//! ```

use std::io::Read;
use std::time::Duration;

use serde_json::{json, Value};

use flowbench::fixtures;
use flowbench::gateway::{ScriptEntry, ToolCall};
use flowbench::workflow::serialize;
use flowbench_service::{BackgroundServer, ServiceConfig};

struct Client {
    base: String,
    agent: ureq::Agent,
}

impl Client {
    fn send(&self, method: &str, path: &str, body: Option<&str>) -> (u16, String) {
        let url = format!("{}{path}", self.base);
        let resp = match (method, body) {
            ("GET", _) => self.agent.get(&url).call(),
            (_, Some(b)) => self.agent.post(&url).header("content-type", "application/json").send(b),
            _ => self.agent.post(&url).send_empty(),
        }
        .expect("request completes");
        let status = resp.status().as_u16();
        (status, resp.into_body().read_to_string().unwrap_or_default())
    }

    fn json(&self, method: &str, path: &str, body: Option<&Value>) -> Value {
        let (status, text) = self.send(method, path, body.map(|b| b.to_string()).as_deref());
        println!("{method} {path} -> {status}");
        serde_json::from_str(&text).unwrap_or(Value::Null)
    }

    fn settle(&self, id: &str) -> Value {
        loop {
            let info = self.json("GET", &format!("/sessions/{id}"), None);
            if info["state"]["state"] != "running" {
                return info;
            }
            std::thread::sleep(Duration::from_millis(5));
        }
    }
}

fn main() {
    let store = tempfile::tempdir().expect("temp dir");
    let server = BackgroundServer::start(ServiceConfig {
        listen: "127.0.0.1:0".into(),
        store_dir: store.path().to_path_buf(),
        ..ServiceConfig::default()
    })
    .expect("server starts");
    println!("listening at {}", server.url(""));

    let client = Client {
        base: server.url(""),
        agent: ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(10)))
            .build()
            .into(),
    };

    let graph = fixtures::prototype_1();
    client.json("POST", "/workflows", Some(&serde_json::from_str(&serialize(&graph)).unwrap()));
    let fixture: Value = serde_json::from_str(fixtures::COFFEE_SHOP_FIXTURE).unwrap();
    let fixture_id = client.json("POST", "/fixtures", Some(&fixture))["id"].clone();

    let compiled = client.json("POST", &format!("/workflows/{}/compile", graph.id), Some(&json!({})));
    println!("{}", compiled["path_text"].as_str().unwrap_or_default());

    let script = vec![
        ScriptEntry::call(
            ToolCall::AskOptions {
                question: "Which coffee?".into(),
                options: vec!["Latte".into(), "Mocha".into()],
            },
            "The order is ambiguous.",
        ),
        ScriptEntry::call(ToolCall::Click { element: "menu-link".into() }, "Find the menu.").described("Open the menu"),
        ScriptEntry::call(ToolCall::Click { element: "latte-link".into() }, "Open the latte.").described("Open Latte"),
        ScriptEntry::call(ToolCall::Confirm { question: "Add a latte to your cart?".into() }, "Needs approval."),
        ScriptEntry::call(ToolCall::Click { element: "add-to-cart".into() }, "Approved.").described("Add to cart"),
        ScriptEntry::call(ToolCall::Finish { summary: "A latte is in your cart.".into() }, ""),
    ];
    let info = client.json(
        "POST",
        "/sessions",
        Some(&json!({
            "workflow_id": graph.id,
            "fixture_id": fixture_id,
            "user_query": "Order me a coffee please!",
            "gateway": {"kind": "scripted", "script": script},
        })),
    );
    let id = info["id"].as_str().expect("session id").to_string();

    for answer in [json!({"type": "option", "value": "Latte"}), json!({"type": "confirm", "value": true})] {
        let info = client.settle(&id);
        println!("  state {}", info["state"]);
        client.json("POST", &format!("/sessions/{id}/response"), Some(&answer));
    }
    let info = client.settle(&id);
    println!("final state {} after {} steps", info["state"], info["step_count"]);

    let resp = client
        .agent
        .get(format!("{}/sessions/{id}/events?channels=user_visible&from_seq=0", client.base))
        .call()
        .expect("stream opens");
    let mut stream = String::new();
    resp.into_body().into_reader().read_to_string(&mut stream).unwrap();
    println!("--- user-visible events ---");
    for line in stream.lines().filter(|l| l.starts_with("data:")) {
        println!("{line}");
    }

    let (_, trace) = client.send("GET", &format!("/sessions/{id}/trace"), None);
    println!("trace: {} lines", trace.lines().count());
    let step = client.json("GET", &format!("/sessions/{id}/trace/2"), None);
    println!("step 2 description: {}", step["parsed_action"]["description"]);

    server.stop();
}
