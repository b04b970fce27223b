//! Workflow-to-prompt compiler, scripted agent runtime and simulated web
//! environment for prototyping interface-agent experiences.

pub mod canonical;
pub mod compiler;
pub mod events;
pub mod fixtures;
pub mod gateway;
pub mod runtime;
pub mod sim;
pub mod trace;
pub mod workflow;
