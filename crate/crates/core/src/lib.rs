//! Photon-number reconstruction from random-phase homodyne statistics.
//!
//! The crate covers the whole chain: exact Fock-state quadrature densities and
//! the binned detector response ([`quadrature`]), benchmark photon-number
//! distributions ([`states`]), Monte Carlo event generation and binning
//! ([`sim`]), and maximum-likelihood reconstruction by EM iteration with a
//! least-squares baseline ([`estimation`]). [`files`] holds the JSON and CSV
//! artifacts exchanged by the command-line tool.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimation;
pub mod files;
pub mod pipeline;
pub mod quadrature;
pub mod sim;
pub mod states;
pub mod stats;

pub use error::{Error, Result};
pub use estimation::{
    bootstrap_errors, em_reconstruct, em_step, forward_probabilities, kkt_residual, likelihood_gradient,
    linear_baseline, log_likelihood, BinCounts, EmConfig, EmInit, ReconstructionResult,
};
pub use quadrature::{
    bernoulli_loss_matrix, fock_density, fock_loss_density, fock_wavefunction, response_matrix,
    response_matrix_convolution_oracle, BinGrid, OverflowMode, ResponseMatrix,
};
pub use sim::{bin_events, sample_fock_route, sample_gaussian_route, EventBatch, Histogram, SamplerRoute};
pub use states::{
    coherent_distribution, distribution_from_file, mean_photon_number, squeezed_vacuum_distribution,
    PhotonDistribution, StateKind,
};
