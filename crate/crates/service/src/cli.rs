//! Command-line front end.
//!
//! ```text
//! flowbench validate <workflow-file>
//! flowbench compile <workflow-file> [--bundle <file>] [--out <file>]
//! flowbench run <scenario-file> [--trace-out <file>]
//! flowbench replay <trace-file> [--step N] [--debug]
//! flowbench conformance <trace-file> <workflow-file>
//! flowbench serve [--config <file>]
//! ```
//!
//! Exit codes: 0 success, 1 validation or conformance findings, 2 usage
//! error (bad arguments, unreadable or unparseable input), 3 engine failure.
//! Diagnostics go to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use flowbench::compiler::{compile, PromptBundle};
use flowbench::events::ChatEvent;
use flowbench::runtime::{conformance_check, run_scenario_file, SessionState};
use flowbench::trace::{debug_projection, import, StepAction, StepRecord, Trace, TraceErrorCode};
use flowbench::workflow::{deserialize, validate, WorkflowGraph};

use crate::config::ServiceConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ENGINE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "flowbench", version, about = "Prototype interface-agent experiences headlessly")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the validation report of a workflow document.
    Validate { workflow: PathBuf },
    /// Compile a workflow into its system prompt.
    Compile {
        workflow: PathBuf,
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario with its scripted gateway and write the trace.
    Run {
        scenario: PathBuf,
        /// Defaults to `<scenario stem>.trace.jsonl` in the working directory.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Print the step records of a trace file.
    Replay {
        trace: PathBuf,
        #[arg(long)]
        step: Option<usize>,
        /// Also print the tool-call and reasoning debug events.
        #[arg(long)]
        debug: bool,
    },
    /// Compare a trace with the workflow it ran under.
    Conformance { trace: PathBuf, workflow: PathBuf },
    /// Start the HTTP service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

/// Failure carrying its exit code and message.
struct Exit(i32, String);

type CliResult = Result<i32, Exit>;

fn usage(msg: impl Into<String>) -> Exit {
    Exit(EXIT_USAGE, msg.into())
}

fn read(path: &Path) -> Result<String, Exit> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Exit> {
    std::fs::write(path, text).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn load_workflow(path: &Path) -> Result<WorkflowGraph, Exit> {
    deserialize(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_trace(path: &Path) -> Result<Trace, Exit> {
    import(&read(path)?).map_err(|e| {
        let code = match e.code {
            TraceErrorCode::TamperedRecord | TraceErrorCode::IndexGap => EXIT_FINDINGS,
            _ => EXIT_USAGE,
        };
        Exit(code, format!("{}: {e}", path.display()))
    })
}

/// Entry point for the binary.
pub fn main(args: impl IntoIterator<Item = OsString>) -> i32 {
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    run(args, &mut out, &mut err)
}

/// Runs one invocation against the given streams and returns the exit code.
pub fn run(args: impl IntoIterator<Item = OsString>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    let result = match cli.command {
        Command::Validate { workflow } => cmd_validate(&workflow, out),
        Command::Compile { workflow, bundle, out: path } => {
            cmd_compile(&workflow, bundle.as_deref(), path.as_deref(), out, err)
        }
        Command::Run { scenario, trace_out } => cmd_run(&scenario, trace_out, out),
        Command::Replay { trace, step, debug } => cmd_replay(&trace, step, debug, out),
        Command::Conformance { trace, workflow } => cmd_conformance(&trace, &workflow, out),
        Command::Serve { config } => cmd_serve(config.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(Exit(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Exit> {
    out.write_all(text.as_bytes()).map_err(|e| Exit(EXIT_ENGINE, e.to_string()))
}

fn cmd_validate(path: &Path, out: &mut dyn Write) -> CliResult {
    let report = validate(&load_workflow(path)?);
    emit(out, &report.render())?;
    Ok(if report.is_executable() { EXIT_OK } else { EXIT_FINDINGS })
}

fn cmd_compile(
    path: &Path,
    bundle: Option<&Path>,
    target: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult {
    let graph = load_workflow(path)?;
    let report = validate(&graph);
    if !report.is_executable() {
        let _ = err.write_all(report.render().as_bytes());
        return Ok(EXIT_FINDINGS);
    }
    let bundle: PromptBundle = match bundle {
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => PromptBundle::default(),
    };
    let compiled = compile(&graph, &bundle, None).map_err(|e| Exit(EXIT_ENGINE, e.to_string()))?;
    match target {
        Some(p) => write_file(p, &compiled.system_prompt.text)?,
        None => emit(out, &compiled.system_prompt.text)?,
    }
    Ok(EXIT_OK)
}

fn cmd_run(scenario: &Path, trace_out: Option<PathBuf>, out: &mut dyn Write) -> CliResult {
    let run = run_scenario_file(scenario).map_err(|e| {
        let code = if e.is_input_error() { EXIT_USAGE } else { EXIT_ENGINE };
        Exit(code, e.to_string())
    })?;
    let trace_path = trace_out.unwrap_or_else(|| {
        let stem = scenario.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
        PathBuf::from(format!("{stem}.trace.jsonl"))
    });
    write_file(&trace_path, &run.session.trace().export())?;
    emit(
        out,
        &format!(
            "state: {}\nsteps: {}\ngateway calls: {}\ntrace: {}\n",
            state_label(run.state()),
            run.session.step_count(),
            run.gateway_calls,
            trace_path.display()
        ),
    )?;
    if let Some(e) = run.error {
        return Err(Exit(EXIT_ENGINE, e.to_string()));
    }
    Ok(match run.state() {
        SessionState::Failed(_) => EXIT_ENGINE,
        _ => EXIT_OK,
    })
}

fn state_label(state: &SessionState) -> String {
    match state {
        SessionState::Failed(reason) => format!("failed ({reason})"),
        SessionState::AwaitingUser(k) => {
            format!("awaiting_user ({})", serde_json::to_value(k).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
        }
        other => other.name().to_string(),
    }
}

fn compact(v: &impl serde::Serialize) -> String {
    flowbench::canonical::to_compact(&serde_json::to_value(v).expect("serializable"))
}

/// Human-readable block for one step.
pub fn render_step(record: &StepRecord, debug: bool) -> String {
    let obs = &record.observation;
    let mut s = format!(
        "step {} [{} v{} rows {}..{}]\n",
        record.step_index,
        obs.url,
        obs.version,
        obs.viewport.offset,
        obs.viewport.offset + obs.viewport.height
    );
    match &record.parsed_action {
        StepAction::Action { call, description, .. } => {
            s.push_str(&format!("  action: {} {}\n", call.name(), compact(&call.arguments())));
            if !description.is_empty() {
                s.push_str(&format!("  description: {description}\n"));
            }
        }
        StepAction::ParseFailure { failure } => {
            s.push_str(&format!("  parse failure: {}: {}\n", failure.code.as_str(), failure.message));
        }
        StepAction::GatewayFailure { error } => {
            s.push_str(&format!("  gateway failure: {}: {}\n", error.code.as_str(), error.message));
        }
    }
    if let Some(r) = &record.env_result {
        s.push_str(&format!("  result: {}\n", r.feedback()));
    }
    s.push_str(&format!("  context: {} messages, digest {}\n", record.input_context.len(), record.context_digest));
    if debug {
        for e in debug_projection(record) {
            s.push_str(&format!("  {}: {}\n", kind_name(&e), compact(&e.payload)));
        }
    }
    s
}

fn kind_name(e: &ChatEvent) -> String {
    serde_json::to_value(e.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn cmd_replay(path: &Path, step: Option<usize>, debug: bool, out: &mut dyn Write) -> CliResult {
    let trace = load_trace(path)?;
    if let Some(n) = step {
        let record = trace.records.get(n).ok_or_else(|| {
            usage(format!("OUT_OF_RANGE: step {n} out of range for trace of length {}", trace.records.len()))
        })?;
        emit(out, &render_step(record, debug))?;
        return Ok(EXIT_OK);
    }
    let h = &trace.header;
    let final_state = h.final_state.as_ref().map(compact).unwrap_or_else(|| "null".into());
    let mut text = format!(
        "trace {} workflow {} fixture {} steps {} final {}\n",
        h.session,
        h.workflow,
        h.fixture,
        trace.records.len(),
        final_state
    );
    for (k, record) in trace.records.iter().enumerate() {
        text.push_str(&render_step(record, debug));
        for i in trace.interventions.iter().filter(|i| i.after_step == k + 1) {
            text.push_str(&format!("user action: {}\n", i.result.feedback()));
        }
    }
    emit(out, &text)?;
    Ok(EXIT_OK)
}

fn cmd_conformance(trace: &Path, workflow: &Path, out: &mut dyn Write) -> CliResult {
    let trace = load_trace(trace)?;
    let graph = load_workflow(workflow)?;
    let report = conformance_check(&trace, &graph);
    emit(out, &report.render())?;
    Ok(if report.is_clean() { EXIT_OK } else { EXIT_FINDINGS })
}

fn cmd_serve(config: Option<&Path>) -> CliResult {
    let config = ServiceConfig::load(config).map_err(|e| usage(e.to_string()))?;
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .try_init();
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Exit(EXIT_ENGINE, e.to_string()))?;
    runtime
        .block_on(crate::server::serve(config))
        .map_err(|e| Exit(EXIT_ENGINE, e.to_string()))?;
    Ok(EXIT_OK)
}
