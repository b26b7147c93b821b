//! GUI task automation driven by a language model.
//!
//! The pipeline: a [`device::Device`] yields [`ui::UiState`] snapshots, the
//! [`prompt`] module renders them into natural-language prompts, an
//! [`llm::LlmBackend`] answers, [`parse`] turns replies into decisions, and
//! [`agent`] closes the loop while recording a replayable trace. [`bench`]
//! scores predicted traces against reference action sequences.

pub mod agent;
pub mod bench;
pub mod cli;
pub mod device;
pub mod digest;
pub mod llm;
pub mod parse;
pub mod prompt;
pub mod ui;
