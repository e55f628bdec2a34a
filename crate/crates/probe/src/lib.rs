//! IO side of the bias probe: model gateway, Prolog subprocess harness,
//! dataset files, the generation pipeline, evaluation and reports.

pub mod config;
pub mod dataset;
pub mod evaluator;
pub mod gateway;
pub mod manifest;
pub mod pipeline;
pub mod prolog;
pub mod report;

pub use probe_core as core;
