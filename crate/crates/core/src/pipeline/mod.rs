//! Simulated problems, baseline reconstructions and consensus runs.

mod problem;
mod recon;

pub use problem::{Acquisition, ProblemKind, ProblemSpec, Simulation};
pub use recon::{
    complete_data, reconstruct, zero_fill_inversion, ImagePrior, InitKind, PipelineKind,
    ReconOutput, ReconParams, StageTiming,
};
