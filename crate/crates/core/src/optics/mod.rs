//! Protocol states, the four-detector Bell analyzer and the three heralded
//! pipelines built on the Fock engine.

mod bsm;
mod pipeline;
mod states;

pub use bsm::{accept_probability, apply_bsm, classify, BsmBranch, BsmNetwork, BsmOutcome, DetectionPattern};
pub use pipeline::{
    corrected_fidelity, link_pipeline, local_entanglement_pipeline, local_entanglement_pipeline_with_dark_counts,
    swap_pipeline, Correction, PatternReport, PipelineReport, PipelineSummary,
};
pub use states::{
    ensemble_mode, input_photon_state, pme_state, retrieve_s_to_photon, retrieve_t_to_s, store_to_memory,
    stored_memory_state, PhaseSetting, Route, INPUT_D, INPUT_U,
};

use thiserror::Error;

use crate::fock::FockError;
use crate::params::ValidationError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticsError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("malformed input state: {0}")]
    MalformedInput(String),
    #[error("dark-count probability {0} outside [0, 1)")]
    InvalidDarkCount(f64),
    #[error(transparent)]
    InvalidParams(#[from] ValidationError),
    #[error("no correction exists for a rejected pattern")]
    Rejected,
}
