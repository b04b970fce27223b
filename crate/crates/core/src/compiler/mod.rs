//! Workflow graph to system prompt, and edited prompt back to graph.
//!
//! The pipeline is: [`enumerate_paths`] → [`render_workflow_text`] →
//! [`expand_workflow_prompt`] (model or template) → [`assemble_system_prompt`].
//! [`generate_workflow_from_prompt`] goes the other way through the model.

mod paths;
mod render;

use serde::{Deserialize, Serialize};

use crate::gateway::{
    complete, schemas_for_graph, CompletionRequest, GatewayError, InvalidGraph, Message, ModelBackend, Purpose,
    SlotType, TemplateBackend, CURRENT_DOCUMENT_MARKER,
};
use crate::workflow::{self, NodeKind, WorkflowGraph};

pub use paths::{enumerate_paths, Path, PathSet, MAX_PATHS};
pub use render::{condition_phrase, node_phrase, render_workflow_text, step_tag};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error(transparent)]
    InvalidGraph(#[from] InvalidGraph),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("MALFORMED_REGENERATION: {0}")]
    MalformedRegeneration(String),
}

impl CompileError {
    pub fn code(&self) -> &'static str {
        match self {
            CompileError::InvalidGraph(_) => "INVALID_GRAPH",
            CompileError::Gateway(e) => e.code.as_str(),
            CompileError::MalformedRegeneration(_) => "MALFORMED_REGENERATION",
        }
    }
}

/// The four prompt sections authored next to the workflow.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptBundle {
    pub workflow_prompt: String,
    pub capabilities_prompt: String,
    pub user_info_prompt: String,
    pub other_instructions: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Workflow,
    Capabilities,
    UserInfo,
    OtherInstructions,
}

impl Section {
    pub const ORDER: [Section; 4] = [
        Section::Workflow,
        Section::Capabilities,
        Section::UserInfo,
        Section::OtherInstructions,
    ];

    pub fn heading(self) -> &'static str {
        match self {
            Section::Workflow => "## Workflow",
            Section::Capabilities => "## Agent Capabilities",
            Section::UserInfo => "## User Information",
            Section::OtherInstructions => "## Other Instructions",
        }
    }

    fn content(self, bundle: &PromptBundle) -> &str {
        match self {
            Section::Workflow => &bundle.workflow_prompt,
            Section::Capabilities => &bundle.capabilities_prompt,
            Section::UserInfo => &bundle.user_info_prompt,
            Section::OtherInstructions => &bundle.other_instructions,
        }
    }
}

/// Byte range of one section's content inside [`SystemPrompt::text`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionSpan {
    pub section: Section,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemPrompt {
    pub text: String,
    pub section_spans: Vec<SectionSpan>,
}

impl SystemPrompt {
    pub fn section(&self, section: Section) -> Option<&str> {
        self.section_spans
            .iter()
            .find(|s| s.section == section)
            .map(|s| &self.text[s.start..s.end])
    }
}

pub const ROLE_PREAMBLE: &str = "You are an interface agent that operates a web page on the user's behalf. \
You see the page as an accessibility tree of the elements currently in view and act by calling one tool per turn.";

fn tool_usage_footer(graph: &WorkflowGraph) -> String {
    let mut out = String::from(
        "## Tool Usage\n\
Reply with exactly one JSON object per turn:\n\
{\"tool\": \"<tool name>\", \"args\": {<arguments>}, \"reasoning\": \"<why you chose this action>\", \"description\": \"<short description of the action for the user>\"}\n\
Available tools:\n",
    );
    for tool in schemas_for_graph(graph) {
        let params: Vec<String> = tool
            .parameters
            .iter()
            .map(|p| {
                let ty = match &p.ty {
                    SlotType::Text => "text".to_string(),
                    SlotType::Integer => "integer".to_string(),
                    SlotType::ElementRef => "element id".to_string(),
                    SlotType::TextList => "list of text".to_string(),
                    SlotType::Enum(v) => v.join("|"),
                };
                let opt = if p.required { "" } else { "?" };
                format!("{}{opt}: {ty}", p.name)
            })
            .collect();
        out.push_str(&format!("- {}({}): {}\n", tool.name, params.join(", "), tool.description));
    }
    out
}

/// Concatenates preamble, the non-empty sections in fixed order, and the
/// tool-usage footer. Sections are separated by blank lines.
pub fn assemble_system_prompt(bundle: &PromptBundle, graph: &WorkflowGraph) -> SystemPrompt {
    let mut text = String::from(ROLE_PREAMBLE);
    text.push_str("\n\n");
    let mut section_spans = Vec::new();
    for section in Section::ORDER {
        let content = section.content(bundle);
        if content.is_empty() {
            continue;
        }
        text.push_str(section.heading());
        text.push('\n');
        let start = text.len();
        text.push_str(content);
        section_spans.push(SectionSpan {
            section,
            start,
            end: text.len(),
        });
        text.push_str("\n\n");
    }
    text.push_str(&tool_usage_footer(graph));
    SystemPrompt { text, section_spans }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CompileWarning {
    StructureLost,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expansion {
    pub text: String,
    pub warning: Option<CompileWarning>,
}

pub const EXPAND_INSTRUCTION: &str = "Rewrite the numbered workflow below as a detailed description an interface agent can follow. \
Keep every step, its number and its bracketed tag.";

/// The distinct `[Kind]` step tags found in `text`, in kind order.
pub fn step_headings(text: &str) -> Vec<String> {
    NodeKind::ALL
        .iter()
        .map(|k| step_tag(*k))
        .filter(|t| text.contains(t.as_str()))
        .collect()
}

/// Expands `path_text` through the backend. An expansion that drops any
/// step heading falls back to `path_text` with [`CompileWarning::StructureLost`].
pub fn expand_workflow_prompt(path_text: &str, backend: &mut dyn ModelBackend) -> Result<Expansion, GatewayError> {
    let messages = [Message::system(EXPAND_INSTRUCTION), Message::user(path_text)];
    let out = complete(
        backend,
        &CompletionRequest {
            purpose: Purpose::ExpandWorkflow,
            messages: &messages,
            tools: &[],
        },
    )?;
    let lost = out.raw.trim().is_empty() || step_headings(path_text).iter().any(|h| !out.raw.contains(h.as_str()));
    Ok(if lost {
        Expansion {
            text: path_text.to_string(),
            warning: Some(CompileWarning::StructureLost),
        }
    } else {
        Expansion {
            text: out.raw,
            warning: None,
        }
    })
}

/// Everything the compile step produces for one workflow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Compiled {
    pub path_text: String,
    pub workflow_prompt: String,
    pub system_prompt: SystemPrompt,
    pub truncated: bool,
    pub warnings: Vec<CompileWarning>,
}

/// Full pipeline. An empty `bundle.workflow_prompt` is generated from the
/// graph with `backend`, or with the template backend when `None`.
pub fn compile(
    graph: &WorkflowGraph,
    bundle: &PromptBundle,
    backend: Option<&mut dyn ModelBackend>,
) -> Result<Compiled, CompileError> {
    let paths = enumerate_paths(graph)?;
    let path_text = render_workflow_text(&paths, graph);
    let mut bundle = bundle.clone();
    let mut warnings = Vec::new();
    if bundle.workflow_prompt.is_empty() {
        let expansion = match backend {
            Some(b) => expand_workflow_prompt(&path_text, b)?,
            None => expand_workflow_prompt(&path_text, &mut TemplateBackend)?,
        };
        warnings.extend(expansion.warning);
        bundle.workflow_prompt = expansion.text;
    }
    let system_prompt = assemble_system_prompt(&bundle, graph);
    Ok(Compiled {
        path_text,
        workflow_prompt: bundle.workflow_prompt,
        system_prompt,
        truncated: paths.truncated,
        warnings,
    })
}

pub const REGENERATE_INSTRUCTION: &str = "You maintain an agent workflow stored as a JSON document. \
Update the document so it matches the edited workflow prompt and reply with the complete JSON document only.";

fn extract_document(raw: &str) -> &str {
    let t = raw.trim();
    match (t.find('{'), t.rfind('}')) {
        (Some(a), Some(b)) if a < b => &t[a..=b],
        _ => t,
    }
}

/// Asks the backend to update `current` to match `edited_prompt`.
///
/// On success the result keeps `current`'s id and has revision + 1. On any
/// failure `current` is untouched (it is only borrowed).
pub fn generate_workflow_from_prompt(
    edited_prompt: &str,
    current: &WorkflowGraph,
    backend: &mut dyn ModelBackend,
) -> Result<WorkflowGraph, CompileError> {
    InvalidGraph::check(current)?;
    let messages = [
        Message::system(REGENERATE_INSTRUCTION),
        Message::user(format!("Edited workflow prompt:\n{edited_prompt}")),
        Message::user(format!("{CURRENT_DOCUMENT_MARKER}{}", workflow::serialize(current))),
    ];
    let out = complete(
        backend,
        &CompletionRequest {
            purpose: Purpose::RegenerateWorkflow,
            messages: &messages,
            tools: &[],
        },
    )?;
    let mut graph = workflow::deserialize(extract_document(&out.raw))
        .map_err(|e| CompileError::MalformedRegeneration(e.to_string()))?;
    let report = workflow::validate(&graph);
    if !report.is_executable() {
        return Err(CompileError::MalformedRegeneration(report.render()));
    }
    graph.id = current.id.clone();
    graph.revision = current.revision + 1;
    Ok(graph)
}
