//! Simulate → bin → reconstruct, in one call.

use crate::error::{Error, Result};
use crate::estimation::{em_reconstruct, linear_baseline, BinCounts, EmConfig, LinearEstimate, ReconstructionResult};
use crate::quadrature::ResponseMatrix;
use crate::sim::{bin_events, sample_fock_route_with, sample_gaussian_route, FockSampler, Histogram, SamplerRoute};
use crate::states::{PhotonDistribution, StateKind};

/// Tail mass allowed for the ground truth handed to the samplers and to comparisons.
pub const TRUTH_TAIL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub state: StateKind,
    pub mean_photon: f64,
    pub eta: f64,
    pub n_events: usize,
    pub route: SamplerRoute,
    pub em: EmConfig,
    pub baseline: bool,
}

impl ExperimentConfig {
    /// Mean photon number 1, η = 0.85, 10⁵ events, 8000 EM iterations from uniform on n ≤ 20.
    pub fn benchmark(state: StateKind) -> Self {
        ExperimentConfig {
            state,
            mean_photon: 1.0,
            eta: 0.85,
            n_events: 100_000,
            route: SamplerRoute::Gaussian,
            em: EmConfig::default(),
            baseline: true,
        }
    }

    /// Exact distribution, truncated where its tail drops below [`TRUTH_TAIL`].
    pub fn truth(&self) -> Result<PhotonDistribution> {
        let n_max = self.state.min_cutoff(self.mean_photon, TRUTH_TAIL)?;
        self.state.distribution(self.mean_photon, n_max)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub truth: PhotonDistribution,
    pub histogram: Histogram,
    pub result: ReconstructionResult,
    pub baseline: Option<LinearEstimate>,
}

/// Runs one seeded experiment against a prebuilt response matrix.
///
/// `sampler` is only consulted on the Fock route and must cover the truth's cutoff.
pub fn run_experiment(
    config: &ExperimentConfig,
    response: &ResponseMatrix,
    sampler: Option<&FockSampler>,
    seed: u64,
) -> Result<ExperimentOutcome> {
    if (response.eta() - config.eta).abs() > 0.0 {
        return Err(Error::validation(format!(
            "response matrix built for eta = {} but the experiment uses {}",
            response.eta(),
            config.eta
        )));
    }
    let truth = config.truth()?;
    let batch = match config.route {
        SamplerRoute::Gaussian => {
            sample_gaussian_route(config.state, config.mean_photon, config.eta, config.n_events, seed)?
        }
        SamplerRoute::Fock => {
            let owned;
            let sampler = match sampler {
                Some(s) => s,
                None => {
                    owned = FockSampler::new(truth.n_max());
                    &owned
                }
            };
            sample_fock_route_with(sampler, &truth, config.eta, config.n_events, seed, config.state.name())?
        }
    };
    let histogram = bin_events(&batch, response.grid());
    let data = BinCounts::from_histogram(&histogram);
    let result = em_reconstruct(&data, response, &config.em)?;
    let baseline = if config.baseline { Some(linear_baseline(&data, response)?) } else { None };
    Ok(ExperimentOutcome { truth, histogram, result, baseline })
}
