//! File-backed store.
//!
//! ```text
//! <store_dir>/workflows/<id>.json    canonical workflow documents
//! <store_dir>/fixtures/<id>.json     site fixtures
//! <store_dir>/traces/<session>.jsonl sealed traces
//! ```

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use flowbench::fixtures::COFFEE_SHOP_FIXTURE;
use flowbench::sim::{load_fixture, SimSite};
use flowbench::workflow::{deserialize, serialize, WorkflowGraph};

use crate::error::ApiError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WorkflowSummary {
    pub id: String,
    pub name: String,
    pub revision: u64,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

fn io_err(e: io::Error) -> ApiError {
    ApiError::internal(e.to_string())
}

/// Ids become file names, so they are restricted to `[A-Za-z0-9_-]`.
pub fn check_id(id: &str) -> Result<(), ApiError> {
    if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        return Err(ApiError::new("INVALID_ID", format!("id {id:?} must match [A-Za-z0-9_-]+")));
    }
    Ok(())
}

/// Writes via a temporary file so readers never see a partial document.
fn write_atomic(path: &Path, text: &str) -> Result<(), ApiError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

fn ids_in(dir: &Path, ext: &str) -> Result<Vec<String>, ApiError> {
    let mut ids: Vec<String> = fs::read_dir(dir)
        .map_err(io_err)?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let p = e.path();
            (p.extension()? == ext).then(|| p.file_stem()?.to_str().map(String::from))?
        })
        .collect();
    ids.sort();
    Ok(ids)
}

impl Store {
    /// Opens (creating if needed) a store and seeds the coffee-shop fixture.
    pub fn open(root: impl Into<PathBuf>) -> Result<Store, ApiError> {
        let store = Store { root: root.into() };
        for sub in ["workflows", "fixtures", "traces"] {
            fs::create_dir_all(store.root.join(sub)).map_err(io_err)?;
        }
        let seeded = store.fixture_path("coffee-shop");
        if !seeded.exists() {
            write_atomic(&seeded, COFFEE_SHOP_FIXTURE)?;
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn workflow_path(&self, id: &str) -> PathBuf {
        self.root.join("workflows").join(format!("{id}.json"))
    }

    fn fixture_path(&self, id: &str) -> PathBuf {
        self.root.join("fixtures").join(format!("{id}.json"))
    }

    fn trace_path(&self, session: &str) -> PathBuf {
        self.root.join("traces").join(format!("{session}.jsonl"))
    }

    pub fn list_workflows(&self) -> Result<Vec<WorkflowSummary>, ApiError> {
        ids_in(&self.root.join("workflows"), "json")?
            .into_iter()
            .map(|id| {
                let g = self.get_workflow(&id)?;
                Ok(WorkflowSummary {
                    id: g.id,
                    name: g.name,
                    revision: g.revision,
                })
            })
            .collect()
    }

    pub fn get_workflow(&self, id: &str) -> Result<WorkflowGraph, ApiError> {
        check_id(id)?;
        let text = fs::read_to_string(self.workflow_path(id)).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => ApiError::new("WORKFLOW_NOT_FOUND", format!("no workflow {id:?}")),
            _ => io_err(e),
        })?;
        Ok(deserialize(&text)?)
    }

    pub fn create_workflow(&self, graph: &WorkflowGraph) -> Result<(), ApiError> {
        check_id(&graph.id)?;
        let path = self.workflow_path(&graph.id);
        if path.exists() {
            return Err(ApiError::new("WORKFLOW_EXISTS", format!("workflow {:?} already exists", graph.id)));
        }
        write_atomic(&path, &serialize(graph))
    }

    /// Replaces the stored document when `graph.revision` equals the stored
    /// revision. The stored copy gets the next revision, which is returned.
    pub fn update_workflow(&self, id: &str, graph: &WorkflowGraph) -> Result<WorkflowGraph, ApiError> {
        let current = self.get_workflow(id)?;
        if graph.revision != current.revision {
            return Err(ApiError::new(
                "REVISION_CONFLICT",
                format!("workflow {id:?} is at revision {}, not {}", current.revision, graph.revision),
            ));
        }
        let mut next = graph.clone();
        next.id = id.to_string();
        next.revision = current.revision + 1;
        write_atomic(&self.workflow_path(id), &serialize(&next))?;
        Ok(next)
    }

    /// Stores a regenerated revision, which must directly follow the stored one.
    pub fn put_next_revision(&self, graph: &WorkflowGraph) -> Result<(), ApiError> {
        let current = self.get_workflow(&graph.id)?;
        if graph.revision != current.revision + 1 {
            return Err(ApiError::new(
                "REVISION_CONFLICT",
                format!("workflow {:?} moved to revision {}", graph.id, current.revision),
            ));
        }
        write_atomic(&self.workflow_path(&graph.id), &serialize(graph))
    }

    pub fn list_fixtures(&self) -> Result<Vec<String>, ApiError> {
        ids_in(&self.root.join("fixtures"), "json")
    }

    pub fn fixture_text(&self, id: &str) -> Result<String, ApiError> {
        check_id(id)?;
        fs::read_to_string(self.fixture_path(id)).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => ApiError::new("FIXTURE_NOT_FOUND", format!("no fixture {id:?}")),
            _ => io_err(e),
        })
    }

    pub fn get_fixture(&self, id: &str) -> Result<SimSite, ApiError> {
        Ok(load_fixture(&self.fixture_text(id)?)?)
    }

    /// Validates and stores a fixture under its own id.
    pub fn put_fixture(&self, text: &str) -> Result<SimSite, ApiError> {
        let site = load_fixture(text)?;
        check_id(&site.id)?;
        write_atomic(&self.fixture_path(&site.id), text)?;
        Ok(site)
    }

    pub fn save_trace(&self, session: &str, text: &str) -> Result<(), ApiError> {
        write_atomic(&self.trace_path(session), text)
    }

    pub fn load_trace(&self, session: &str) -> Result<Option<String>, ApiError> {
        check_id(session)?;
        match fs::read_to_string(self.trace_path(session)) {
            Ok(t) => Ok(Some(t)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(e)),
        }
    }

    pub fn list_traces(&self) -> Result<Vec<String>, ApiError> {
        ids_in(&self.root.join("traces"), "jsonl")
    }
}
