//! Deterministic FaaS/DAG scheduling simulator, a sandboxed policy language,
//! and an LLM-driven generate-and-verify loop for discovering scheduling policies.

pub mod discovery;
pub mod llm;
pub mod policy;
pub mod sim;
pub mod workload;
