//! Maximum-likelihood reconstruction of the photon distribution.
//!
//! With bin counts `k_ν`, `N = Σ k_ν` and forward probabilities
//! `p_ν = Σ_n A_νn ρ_n`, the objective is
//!
//! ```text
//! L(ρ) = Σ_ν k_ν ln p_ν − N Σ_n ρ_n
//! ```
//!
//! where the second term is the Lagrange term for the normalisation. The EM
//! update `ρ_m ← ρ_m Σ_ν (k_ν/N) A_νm / p_ν` keeps every iterate on the
//! probability simplex and never decreases `L`. Bins without events drop out
//! of every sum (`0 · ln p = 0`).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{OverflowMode, ResponseMatrix};
use crate::sim::{rng_from_seed, Histogram, SimRng};
use crate::states::PhotonDistribution;

/// Relative slack allowed when checking that the likelihood never decreases.
pub const MONOTONE_SLACK: f64 = 1e-9;

/// Consecutive small changes required before early stopping.
const STOP_STREAK: usize = 10;

/// Smallest singular value below which the least-squares baseline refuses to solve.
pub const RANK_THRESHOLD: f64 = 1e-8;

/// Event counts aligned with the rows of a response matrix.
///
/// Counts are real-valued so exact-data fixtures (`k = N·p`) can be expressed.
#[derive(Debug, Clone, PartialEq)]
pub struct BinCounts {
    counts: Vec<f64>,
    total: f64,
}

impl BinCounts {
    pub fn new(counts: Vec<f64>) -> Result<Self> {
        if let Some((i, k)) = counts.iter().enumerate().find(|(_, k)| !(**k >= 0.0) || !k.is_finite()) {
            return Err(Error::validation(format!("count {k} in bin {i} is not a nonnegative number")));
        }
        let total = counts.iter().sum();
        Ok(BinCounts { counts, total })
    }

    pub fn from_histogram(h: &Histogram) -> Self {
        let counts: Vec<f64> = h.model_counts().into_iter().map(|k| k as f64).collect();
        let total = counts.iter().sum();
        BinCounts { counts, total }
    }

    /// Noise-free data `k_ν = N·p_ν(ρ)`.
    pub fn expected(a: &ResponseMatrix, rho: &[f64], n_events: f64) -> Result<Self> {
        let p = forward_probabilities(a, rho)?;
        BinCounts::new(p.into_iter().map(|p| n_events * p).collect())
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn scaled(&self, factor: f64) -> Self {
        BinCounts { counts: self.counts.iter().map(|k| k * factor).collect(), total: self.total * factor }
    }
}

impl From<&Histogram> for BinCounts {
    fn from(h: &Histogram) -> Self {
        BinCounts::from_histogram(h)
    }
}

fn check_rho(a: &ResponseMatrix, rho: &[f64]) -> Result<()> {
    if rho.len() != a.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "distribution has {} entries but the response matrix has {} columns (n_max = {})",
            rho.len(),
            a.n_cols(),
            a.n_max()
        )));
    }
    Ok(())
}

fn check_data(data: &BinCounts, a: &ResponseMatrix) -> Result<()> {
    if data.counts.len() != a.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "data has {} bins but the response matrix has {} rows",
            data.counts.len(),
            a.n_rows()
        )));
    }
    Ok(())
}

/// `p_ν = Σ_n A_νn ρ_n`.
pub fn forward_probabilities(a: &ResponseMatrix, rho: &[f64]) -> Result<Vec<f64>> {
    check_rho(a, rho)?;
    Ok(forward_unchecked(a, rho))
}

fn forward_unchecked(a: &ResponseMatrix, rho: &[f64]) -> Vec<f64> {
    (0..a.n_rows()).map(|r| a.row(r).iter().zip(rho).map(|(x, y)| x * y).sum()).collect()
}

/// Rejects bins that hold events the model cannot produce.
fn check_feasible(data: &BinCounts, p: &[f64]) -> Result<()> {
    match data.counts.iter().zip(p).position(|(&k, &p)| k > 0.0 && !(p > 0.0)) {
        Some(bin) => Err(Error::Infeasible { bin, count: data.counts[bin] }),
        None => Ok(()),
    }
}

fn loglik_from(data: &BinCounts, p: &[f64], rho: &[f64]) -> f64 {
    let fit: f64 = data.counts.iter().zip(p).filter(|(&k, _)| k > 0.0).map(|(&k, &p)| k * p.ln()).sum();
    fit - data.total * rho.iter().sum::<f64>()
}

/// `Σ_ν k_ν A_νm / p_ν` for every `m`, skipping empty bins.
fn backprojection(data: &BinCounts, a: &ResponseMatrix, p: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.n_cols()];
    for (r, (&k, &p)) in data.counts.iter().zip(p).enumerate() {
        if k > 0.0 {
            let weight = k / p;
            for (o, x) in out.iter_mut().zip(a.row(r)) {
                *o += weight * x;
            }
        }
    }
    out
}

/// Log-likelihood with the Lagrange term. `rho` may be sub-normalised for diagnostics.
pub fn log_likelihood(data: &BinCounts, a: &ResponseMatrix, rho: &[f64]) -> Result<f64> {
    check_data(data, a)?;
    let p = forward_probabilities(a, rho)?;
    check_feasible(data, &p)?;
    Ok(loglik_from(data, &p, rho))
}

/// `∂L/∂ρ_m = Σ_ν k_ν A_νm / p_ν − N`.
pub fn likelihood_gradient(data: &BinCounts, a: &ResponseMatrix, rho: &[f64]) -> Result<Vec<f64>> {
    check_data(data, a)?;
    let p = forward_probabilities(a, rho)?;
    check_feasible(data, &p)?;
    Ok(backprojection(data, a, &p).into_iter().map(|g| g - data.total).collect())
}

/// Scale-free violation of the complementary-slackness condition,
/// `max_m |ρ_m (Σ_ν k_ν A_νm / p_ν − N)| / N`.
pub fn kkt_residual(data: &BinCounts, a: &ResponseMatrix, rho: &[f64]) -> Result<f64> {
    let grad = likelihood_gradient(data, a, rho)?;
    if !(data.total > 0.0) {
        return Err(Error::validation("stationarity residual needs at least one event"));
    }
    Ok(rho.iter().zip(&grad).map(|(r, g)| if *r == 0.0 { 0.0 } else { (r * g).abs() }).fold(0.0, f64::max) / data.total)
}

/// One EM update.
#[derive(Debug, Clone, PartialEq)]
pub struct EmStep {
    pub estimate: PhotonDistribution,
    /// Sum of the raw update before rescaling to one.
    pub renormalization: f64,
}

fn em_update(data: &BinCounts, a: &ResponseMatrix, rho: &[f64], p: &[f64]) -> Vec<f64> {
    let back = backprojection(data, a, p);
    rho.iter().zip(back).map(|(r, b)| r * b / data.total).collect()
}

pub fn em_step(data: &BinCounts, a: &ResponseMatrix, rho: &PhotonDistribution) -> Result<EmStep> {
    check_data(data, a)?;
    let p = forward_probabilities(a, rho.probs())?;
    check_feasible(data, &p)?;
    if !(data.total > 0.0) {
        return Err(Error::validation("EM needs at least one event"));
    }
    let next = em_update(data, a, rho.probs(), &p);
    finish_step(next, a.grid().overflow_mode())
}

fn finish_step(next: Vec<f64>, mode: OverflowMode) -> Result<EmStep> {
    let sum: f64 = next.iter().sum();
    let estimate = match mode {
        OverflowMode::Discard => PhotonDistribution::from_normalized(next)?,
        OverflowMode::Include => PhotonDistribution::new(next, 0.0)
            .map_err(|e| Error::Numerical(format!("EM iterate left the simplex: {e}")))?,
    };
    Ok(EmStep { estimate, renormalization: sum })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EmInit {
    /// `1/(n_max+1)` on every photon number.
    #[default]
    Uniform,
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub n_max: usize,
    pub max_iterations: usize,
    pub init: EmInit,
    /// Relative log-likelihood change for early stopping; 0 runs all iterations.
    pub stop_tol: f64,
    pub record_trace: bool,
}

impl Default for EmConfig {
    /// 8000 iterations from a uniform start on `0 ≤ n ≤ 20`, no early stopping.
    fn default() -> Self {
        EmConfig { n_max: 20, max_iterations: 8000, init: EmInit::Uniform, stop_tol: 0.0, record_trace: false }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::validation("max_iterations must be at least 1"));
        }
        if !(self.stop_tol >= 0.0) || !self.stop_tol.is_finite() {
            return Err(Error::validation(format!("stop_tol must be >= 0, got {}", self.stop_tol)));
        }
        if let EmInit::Custom(init) = &self.init {
            if init.len() != self.n_max + 1 {
                return Err(Error::DimensionMismatch(format!(
                    "custom initial distribution has {} entries, expected {}",
                    init.len(),
                    self.n_max + 1
                )));
            }
        }
        Ok(())
    }

    fn initial(&self) -> Result<PhotonDistribution> {
        match &self.init {
            EmInit::Uniform => Ok(PhotonDistribution::uniform(self.n_max)),
            EmInit::Custom(v) => {
                let tail = (1.0 - v.iter().sum::<f64>()).max(0.0);
                PhotonDistribution::new(v.clone(), tail)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub estimate: PhotonDistribution,
    /// `L` at the initial point and after every step, when recorded.
    pub loglik_trace: Option<Vec<f64>>,
    pub loglik_final: f64,
    pub iterations_run: usize,
    pub kkt_residual: f64,
    /// Largest `|sum − 1|` of a raw update (nonzero only through rounding).
    pub max_renormalization_deviation: f64,
    pub config: EmConfig,
}

/// Iterates [`em_step`] until `max_iterations` or until the relative change of `L`
/// stays below `stop_tol` for ten consecutive steps.
pub fn em_reconstruct(data: &BinCounts, a: &ResponseMatrix, config: &EmConfig) -> Result<ReconstructionResult> {
    config.validate()?;
    check_data(data, a)?;
    if config.n_max != a.n_max() {
        return Err(Error::DimensionMismatch(format!(
            "configured cutoff {} differs from the response matrix cutoff {}",
            config.n_max,
            a.n_max()
        )));
    }
    if !(data.total > 0.0) {
        return Err(Error::validation("EM needs at least one event"));
    }

    let mode = a.grid().overflow_mode();
    let mut rho = config.initial()?.into_probs();
    let mut trace = config.record_trace.then(|| Vec::with_capacity(config.max_iterations + 1));
    let mut prev: Option<f64> = None;
    let mut streak = 0;
    let mut iterations = 0;
    let mut max_dev: f64 = 0.0;

    let loglik = loop {
        let p = forward_unchecked(a, &rho);
        check_feasible(data, &p)?;
        let l = loglik_from(data, &p, &rho);
        if let Some(trace) = trace.as_mut() {
            trace.push(l);
        }
        if let Some(prev) = prev {
            if l < prev - MONOTONE_SLACK * prev.abs() {
                return Err(Error::Numerical(format!(
                    "log-likelihood decreased from {prev} to {l} at iteration {iterations}"
                )));
            }
            if config.stop_tol > 0.0 {
                let rel = (l - prev).abs() / prev.abs().max(f64::MIN_POSITIVE);
                streak = if rel < config.stop_tol { streak + 1 } else { 0 };
            }
        }
        if iterations == config.max_iterations || (config.stop_tol > 0.0 && streak >= STOP_STREAK) {
            break l;
        }
        prev = Some(l);

        let next = em_update(data, a, &rho, &p);
        let sum: f64 = next.iter().sum();
        max_dev = max_dev.max((sum - 1.0).abs());
        rho = match mode {
            OverflowMode::Discard => next.into_iter().map(|r| r / sum).collect(),
            OverflowMode::Include => next,
        };
        iterations += 1;
    };

    let estimate = finish_step(rho, mode)?.estimate;
    let kkt = kkt_residual(data, a, estimate.probs())?;
    Ok(ReconstructionResult {
        estimate,
        loglik_trace: trace,
        loglik_final: loglik,
        iterations_run: iterations,
        kkt_residual: kkt,
        max_renormalization_deviation: max_dev,
        config: config.clone(),
    })
}

/// Unconstrained least-squares solution of `A ρ ≈ k/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEstimate {
    pub values: Vec<f64>,
    /// Standard errors from propagating the multinomial covariance of `k/N`.
    pub std_errors: Vec<f64>,
    /// Whether every component lies in [0, 1].
    pub simplex_valid: bool,
    pub smallest_singular_value: f64,
}

pub fn linear_baseline(data: &BinCounts, a: &ResponseMatrix) -> Result<LinearEstimate> {
    check_data(data, a)?;
    if !(data.total > 0.0) {
        return Err(Error::validation("least-squares baseline needs at least one event"));
    }
    let (rows, cols) = (a.n_rows(), a.n_cols());
    let m = DMatrix::from_fn(rows, cols, |r, c| a.get(r, c));
    let freq = DVector::from_iterator(rows, data.counts.iter().map(|k| k / data.total));

    let svd = m.svd(true, true);
    let smallest = svd.singular_values.min();
    if !(smallest > RANK_THRESHOLD) || cols > rows {
        return Err(Error::RankDeficient { smallest_singular_value: smallest });
    }
    let pinv = svd.pseudo_inverse(0.0).map_err(|e| Error::Numerical(format!("pseudo-inverse failed: {e}")))?;
    let values = &pinv * &freq;

    // Var(x_m) = (Σ_ν P_mν² f_ν − (Σ_ν P_mν f_ν)²) / N for multinomial frequencies f.
    let std_errors = (0..cols)
        .map(|c| {
            let row = pinv.row(c);
            let second: f64 = row.iter().zip(freq.iter()).map(|(p, f)| p * p * f).sum();
            let first: f64 = row.iter().zip(freq.iter()).map(|(p, f)| p * f).sum();
            ((second - first * first).max(0.0) / data.total).sqrt()
        })
        .collect();

    let values: Vec<f64> = values.iter().copied().collect();
    let simplex_valid = values.iter().all(|v| (0.0..=1.0).contains(v));
    Ok(LinearEstimate { values, std_errors, simplex_valid, smallest_singular_value: smallest })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSummary {
    /// Per-component standard deviation across successful replicas.
    pub std_devs: Vec<f64>,
    pub replicas_ok: usize,
    pub replicas_failed: usize,
}

/// Multinomial draw of `n` events over `probs`, by sequential conditional binomials.
fn multinomial(probs: &[f64], n: u64, rng: &mut SimRng) -> Vec<f64> {
    let mut remaining_n = n;
    let mut remaining_p = 1.0;
    let mut out = vec![0.0; probs.len()];
    for (o, &p) in out.iter_mut().zip(probs) {
        if remaining_n == 0 {
            break;
        }
        let share = if remaining_p > 0.0 { (p / remaining_p).clamp(0.0, 1.0) } else { 1.0 };
        let k = if share >= 1.0 {
            remaining_n
        } else if share <= 0.0 {
            0
        } else {
            Binomial::new(remaining_n, share).map(|b| b.sample(rng)).unwrap_or(0)
        };
        *o = k as f64;
        remaining_n -= k;
        remaining_p -= p;
    }
    out
}

/// Per-component spread of the EM estimate over multinomial resamples of the data.
///
/// Replicas run in parallel; each has its own seed drawn from `seed`, so the
/// output does not depend on scheduling.
pub fn bootstrap_errors(
    data: &BinCounts,
    a: &ResponseMatrix,
    config: &EmConfig,
    n_resamples: usize,
    seed: u64,
) -> Result<BootstrapSummary> {
    if n_resamples < 10 {
        return Err(Error::validation(format!("bootstrap needs at least 10 resamples, got {n_resamples}")));
    }
    check_data(data, a)?;
    if !(data.total > 0.0) {
        return Err(Error::validation("bootstrap needs at least one event"));
    }
    let n_events = data.total.round() as u64;
    let freq: Vec<f64> = data.counts.iter().map(|k| k / data.total).collect();
    let mut master = rng_from_seed(seed);
    let seeds: Vec<u64> = (0..n_resamples).map(|_| master.random()).collect();
    let replica_config = EmConfig { record_trace: false, ..config.clone() };

    let replicas: Vec<Result<Vec<f64>>> = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = SimRng::seed_from_u64(s);
            let resampled = BinCounts::new(multinomial(&freq, n_events, &mut rng))?;
            em_reconstruct(&resampled, a, &replica_config).map(|r| r.estimate.into_probs())
        })
        .collect();

    let ok: Vec<&Vec<f64>> = replicas.iter().filter_map(|r| r.as_ref().ok()).collect();
    let failed = replicas.len() - ok.len();
    if ok.is_empty() {
        let first = replicas.into_iter().find_map(|r| r.err()).expect("all replicas failed");
        return Err(first);
    }
    let dim = a.n_cols();
    let count = ok.len() as f64;
    let std_devs = (0..dim)
        .map(|m| {
            if ok.len() < 2 {
                return 0.0;
            }
            // Shifted by the first replica: identical replicas give exactly zero.
            let shift = ok[0][m];
            let sum: f64 = ok.iter().map(|r| r[m] - shift).sum();
            let sum_sq: f64 = ok.iter().map(|r| (r[m] - shift).powi(2)).sum();
            ((sum_sq - sum * sum / count).max(0.0) / (count - 1.0)).sqrt()
        })
        .collect();
    Ok(BootstrapSummary { std_devs, replicas_ok: ok.len(), replicas_failed: failed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::BinGrid;
    use approx::assert_abs_diff_eq;

    /// Three bins, two photon numbers; columns sum to one.
    pub(crate) fn tiny_matrix() -> ResponseMatrix {
        let grid = BinGrid::new(-1.0, 1.0, 1, OverflowMode::Include).unwrap();
        ResponseMatrix::from_rows(grid, 1.0, vec![vec![0.7, 0.2], vec![0.2, 0.3], vec![0.1, 0.5]]).unwrap()
    }

    #[test]
    fn forward_probabilities_examples() {
        let a = tiny_matrix();
        assert_eq!(forward_probabilities(&a, &[1.0, 0.0]).unwrap(), a.column(0));
        let p = forward_probabilities(&a, &[0.5, 0.5]).unwrap();
        for (r, pr) in p.iter().enumerate() {
            assert_abs_diff_eq!(*pr, (a.get(r, 0) + a.get(r, 1)) / 2.0, epsilon = 1e-16);
        }
        assert!(forward_probabilities(&a, &[1.0]).is_err());
    }

    #[test]
    fn likelihood_of_a_certain_outcome() {
        let grid = BinGrid::new(-1.0, 1.0, 1, OverflowMode::Include).unwrap();
        let a = ResponseMatrix::from_rows(grid, 1.0, vec![vec![0.0], vec![1.0], vec![0.0]]).unwrap();
        let data = BinCounts::new(vec![0.0, 250.0, 0.0]).unwrap();
        assert_eq!(log_likelihood(&data, &a, &[1.0]).unwrap(), -250.0);
    }

    #[test]
    fn likelihood_is_linear_in_counts() {
        let a = tiny_matrix();
        let data = BinCounts::new(vec![50.0, 30.0, 20.0]).unwrap();
        let l1 = log_likelihood(&data, &a, &[0.3, 0.7]).unwrap();
        let l2 = log_likelihood(&data.scaled(2.0), &a, &[0.3, 0.7]).unwrap();
        assert_eq!(l2, 2.0 * l1);
    }

    #[test]
    fn infeasible_bin_is_named() {
        let grid = BinGrid::new(-1.0, 1.0, 1, OverflowMode::Include).unwrap();
        let a = ResponseMatrix::from_rows(grid, 1.0, vec![vec![0.5, 0.0], vec![0.5, 0.5], vec![0.0, 0.5]]).unwrap();
        let data = BinCounts::new(vec![3.0, 4.0, 5.0]).unwrap();
        let err = log_likelihood(&data, &a, &[1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Infeasible { bin: 2, .. }), "{err}");
        // Empty bins never matter, even at p = 0.
        let data = BinCounts::new(vec![3.0, 4.0, 0.0]).unwrap();
        assert!(log_likelihood(&data, &a, &[1.0, 0.0]).is_ok());
    }

    #[test]
    fn single_em_step_matches_hand_arithmetic() {
        // ρ¹ = (122/225, 103/225), exact rational arithmetic.
        let a = tiny_matrix();
        let data = BinCounts::new(vec![50.0, 30.0, 20.0]).unwrap();
        let step = em_step(&data, &a, &PhotonDistribution::uniform(1)).unwrap();
        assert_abs_diff_eq!(step.estimate.probs()[0], 122.0 / 225.0, epsilon = 1e-15);
        assert_abs_diff_eq!(step.estimate.probs()[1], 103.0 / 225.0, epsilon = 1e-15);
    }

    #[test]
    fn exact_data_is_a_fixed_point() {
        let a = tiny_matrix();
        // p(0.5, 0.5) = (0.45, 0.25, 0.30) so N = 100 gives integer counts.
        let data = BinCounts::new(vec![45.0, 25.0, 30.0]).unwrap();
        let rho = PhotonDistribution::uniform(1);
        let step = em_step(&data, &a, &rho).unwrap();
        for (x, y) in step.estimate.probs().iter().zip(rho.probs()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-15);
        }
        assert!(kkt_residual(&data, &a, rho.probs()).unwrap() < 1e-10);
        for g in likelihood_gradient(&data, &a, rho.probs()).unwrap() {
            assert!(g.abs() < 1e-8 * 100.0);
        }
    }

    #[test]
    fn zero_components_stay_zero() {
        let a = tiny_matrix();
        let data = BinCounts::new(vec![50.0, 30.0, 20.0]).unwrap();
        let config = EmConfig {
            n_max: 1,
            max_iterations: 50,
            init: EmInit::Custom(vec![1.0, 0.0]),
            stop_tol: 0.0,
            record_trace: false,
        };
        let r = em_reconstruct(&data, &a, &config).unwrap();
        assert_eq!(r.estimate.probs(), &[1.0, 0.0]);
        // A zero component contributes nothing to the residual whatever its gradient.
        let grad = likelihood_gradient(&data, &a, &[1.0, 0.0]).unwrap();
        assert!(grad[1].abs() > 0.0);
        let kkt = kkt_residual(&data, &a, &[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(kkt, grad[0].abs() / 100.0, epsilon = 1e-15);
    }

    #[test]
    fn gradient_is_minus_n_without_support() {
        let grid = BinGrid::new(-1.0, 1.0, 1, OverflowMode::Include).unwrap();
        let a = ResponseMatrix::from_rows(grid, 1.0, vec![vec![0.5, 0.0], vec![0.5, 0.0], vec![0.0, 1.0]]).unwrap();
        let data = BinCounts::new(vec![3.0, 4.0, 0.0]).unwrap();
        let g = likelihood_gradient(&data, &a, &[0.5, 0.5]).unwrap();
        assert_eq!(g[1], -7.0);
    }

    #[test]
    fn config_validation() {
        let a = tiny_matrix();
        let data = BinCounts::new(vec![1.0, 1.0, 1.0]).unwrap();
        let bad = EmConfig { n_max: 1, max_iterations: 0, ..EmConfig::default() };
        assert!(em_reconstruct(&data, &a, &bad).is_err());
        let bad = EmConfig { n_max: 1, stop_tol: -1.0, ..EmConfig::default() };
        assert!(em_reconstruct(&data, &a, &bad).is_err());
        let wrong_cutoff = EmConfig { n_max: 3, ..EmConfig::default() };
        assert!(matches!(em_reconstruct(&data, &a, &wrong_cutoff), Err(Error::DimensionMismatch(_))));
        let empty = BinCounts::new(vec![0.0; 3]).unwrap();
        assert!(em_reconstruct(&empty, &a, &EmConfig { n_max: 1, ..EmConfig::default() }).is_err());
    }

    #[test]
    fn early_stopping_halts_before_the_cap() {
        let a = tiny_matrix();
        let data = BinCounts::new(vec![50.0, 30.0, 20.0]).unwrap();
        let config =
            EmConfig { n_max: 1, max_iterations: 100_000, stop_tol: 1e-14, record_trace: true, ..EmConfig::default() };
        let r = em_reconstruct(&data, &a, &config).unwrap();
        assert!(r.iterations_run < 100_000);
        assert_eq!(r.loglik_trace.unwrap().len(), r.iterations_run + 1);
    }

    #[test]
    fn stop_tol_zero_runs_every_iteration() {
        let a = tiny_matrix();
        let data = BinCounts::new(vec![45.0, 25.0, 30.0]).unwrap();
        let r = em_reconstruct(&data, &a, &EmConfig { n_max: 1, max_iterations: 37, ..EmConfig::default() }).unwrap();
        assert_eq!(r.iterations_run, 37);
    }

    #[test]
    fn least_squares_recovers_exact_data() {
        let a = tiny_matrix();
        let data = BinCounts::expected(&a, &[0.2, 0.8], 1.0).unwrap();
        let est = linear_baseline(&data, &a).unwrap();
        assert_abs_diff_eq!(est.values[0], 0.2, epsilon = 1e-8);
        assert_abs_diff_eq!(est.values[1], 0.8, epsilon = 1e-8);
        assert!(est.simplex_valid);
    }

    #[test]
    fn least_squares_rejects_rank_deficiency() {
        let grid = BinGrid::new(-1.0, 1.0, 1, OverflowMode::Include).unwrap();
        let a = ResponseMatrix::from_rows(grid, 1.0, vec![vec![0.5, 0.5], vec![0.25, 0.25], vec![0.25, 0.25]]).unwrap();
        let data = BinCounts::new(vec![2.0, 1.0, 1.0]).unwrap();
        assert!(matches!(linear_baseline(&data, &a), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn multinomial_conserves_events() {
        let mut rng = rng_from_seed(4);
        let draw = multinomial(&[0.2, 0.0, 0.5, 0.3], 1000, &mut rng);
        assert_eq!(draw.iter().sum::<f64>(), 1000.0);
        assert_eq!(draw[1], 0.0);
    }

    #[test]
    fn bootstrap_with_one_occupied_bin_has_no_spread() {
        let a = tiny_matrix();
        let data = BinCounts::new(vec![0.0, 80.0, 0.0]).unwrap();
        let config = EmConfig { n_max: 1, max_iterations: 200, ..EmConfig::default() };
        let s = bootstrap_errors(&data, &a, &config, 12, 3).unwrap();
        assert_eq!(s.std_devs, vec![0.0, 0.0]);
        assert_eq!(s.replicas_ok, 12);
        assert!(bootstrap_errors(&data, &a, &config, 5, 3).is_err());
    }
}
