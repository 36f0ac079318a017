//! Core engine for an IRT-driven conversational tutor.

pub mod gateway;
pub mod irt;
pub mod item_bank;
pub mod orchestrator;
pub mod prompt;
pub mod sim;
pub mod student_model;
