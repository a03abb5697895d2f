//! Small-signal and post-hoc analysis of the plant and its trajectories.

mod eigen;
mod linearize;
mod metrics;
mod spectrum;

pub use eigen::{eigenmodes, relative_distance, EigenReport};
pub use linearize::{jacobian_blocks, linearize, residual, JacobianBlocks, DEFAULT_PERTURBATION, EQUILIBRIUM_TOLERANCE};
pub use metrics::{trajectory_metrics, AreaMetrics, GeneratorMetrics, MetricsReport, RelayTimes};
pub use spectrum::{fft_spectrum, fft_spectrum_series, Spectrum, MIN_SAMPLES};

use nalgebra::DMatrix;

use crate::error::Result;
use crate::model::NetworkCase;
use crate::sim::{SimConfig, Simulator};

/// State matrix of `case` at its power-flow equilibrium.
pub fn linearize_case(case: &NetworkCase, eps: f64) -> Result<DMatrix<f64>> {
    let sim = Simulator::new(case, SimConfig::default())?;
    let state = sim.initial_state();
    linearize(sim.plant(), &state.x, &state.algebraic(), eps)
}

/// Eigenmodes of `case` at its equilibrium with the default perturbation.
pub fn case_eigenmodes(case: &NetworkCase) -> Result<EigenReport> {
    eigenmodes(&linearize_case(case, DEFAULT_PERTURBATION)?)
}
