//! Malicious-package detection for npm: rule-based prescreening and a
//! three-stage LLM analysis workflow with record/replay and evaluation.
//!
//! The usual path is [`corpus`] to load packages, [`workflow::run_pipeline`]
//! to analyze them through an [`llmclient::LlmClient`], and
//! [`evalharness`] to score the resulting run. See `examples/`.

pub mod cli;
pub mod corpus;
pub mod evalharness;
pub mod llmclient;
pub mod money;
pub mod prescreen;
pub mod prompts;
pub mod reportjson;
pub mod tokens;
pub mod workflow;
