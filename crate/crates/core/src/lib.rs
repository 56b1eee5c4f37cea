//! Verified prompt programming for router configurations.
//!
//! A language model drafts configurations; syntax checks, a semantic differ,
//! local policy search and a BGP simulator find mistakes; a humanizer turns
//! each mistake into a corrective prompt; an orchestrator loops until the
//! verifiers are satisfied or a human has to step in.

pub mod diff;
pub mod finding;
pub mod frontends;
pub mod humanize;
pub mod ir;
pub mod llm;
pub mod orchestrator;
pub mod policy;
pub mod sim;
pub mod topology;
