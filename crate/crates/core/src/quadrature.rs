//! Fock-state quadrature densities and the binned detector response.
//!
//! Conventions: the vacuum quadrature variance is 1/2, so the ground state is
//! `ψ₀(q) = π^(-1/4) exp(-q²/2)`. Detector inefficiency is modelled as
//! Bernoulli photon loss ahead of an ideal homodyne measurement, which for
//! Fock-diagonal states turns the density of `|n⟩` into a binomial mixture of
//! the ideal densities of `|0⟩ … |n⟩`.
//!
//! The response matrix `A[ν][n]` is the probability that a measurement on
//! `|n⟩` lands in bin `ν`. Interior bins are integrated with a fixed 16-node
//! Gauss–Legendre rule per bin. In [`OverflowMode::Include`] two extra rows
//! hold the mass below `q_min` and above `q_max`, so every column sums to one.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes per bin in the Gauss–Legendre rule used for the response matrix.
pub const GAUSS_LEGENDRE_ORDER: usize = 16;

/// Column sums above `1 + this` indicate a broken quadrature.
const COLUMN_SUM_SLACK: f64 = 1e-8;

/// Step of the fine grid used by the convolution oracle.
const ORACLE_STEP: f64 = 1e-3;
const ORACLE_HALF_RANGE: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OverflowMode {
    /// Two extra bins collect events below `q_min` and at or above `q_max`.
    #[default]
    Include,
    /// Out-of-range events are dropped.
    Discard,
}

impl std::str::FromStr for OverflowMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "include" => Ok(OverflowMode::Include),
            "discard" => Ok(OverflowMode::Discard),
            other => Err(Error::validation(format!("unknown overflow mode {other:?} (expected include or discard)"))),
        }
    }
}

impl std::fmt::Display for OverflowMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OverflowMode::Include => "include",
            OverflowMode::Discard => "discard",
        })
    }
}

/// Where a quadrature value falls on a [`BinGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinSlot {
    Underflow,
    /// Zero-based interior bin.
    Interior(usize),
    Overflow,
}

/// Uniform partition of `[q_min, q_max)` into half-open interior bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct BinGrid {
    q_min: f64,
    q_max: f64,
    n_bins: usize,
    overflow_mode: OverflowMode,
}

#[derive(Deserialize)]
struct RawGrid {
    q_min: f64,
    q_max: f64,
    n_bins: usize,
    overflow_mode: OverflowMode,
}

impl TryFrom<RawGrid> for BinGrid {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        BinGrid::new(raw.q_min, raw.q_max, raw.n_bins, raw.overflow_mode)
    }
}

impl BinGrid {
    pub fn new(q_min: f64, q_max: f64, n_bins: usize, overflow_mode: OverflowMode) -> Result<Self> {
        if !q_min.is_finite() || !q_max.is_finite() {
            return Err(Error::validation("grid bounds must be finite"));
        }
        if q_min >= q_max {
            return Err(Error::validation(format!("grid requires q_min < q_max, got [{q_min}, {q_max}]")));
        }
        if n_bins == 0 {
            return Err(Error::validation("grid requires at least one bin"));
        }
        Ok(BinGrid { q_min, q_max, n_bins, overflow_mode })
    }

    /// The 100-bin grid on [-5, 5].
    pub fn standard() -> Self {
        BinGrid { q_min: -5.0, q_max: 5.0, n_bins: 100, overflow_mode: OverflowMode::Include }
    }

    pub fn q_min(&self) -> f64 {
        self.q_min
    }

    pub fn q_max(&self) -> f64 {
        self.q_max
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn overflow_mode(&self) -> OverflowMode {
        self.overflow_mode
    }

    pub fn with_overflow_mode(mut self, mode: OverflowMode) -> Self {
        self.overflow_mode = mode;
        self
    }

    pub fn bin_width(&self) -> f64 {
        (self.q_max - self.q_min) / self.n_bins as f64
    }

    /// Edge `i` of the interior partition, `i = 0..=n_bins`. The last edge is `q_max` exactly.
    pub fn edge(&self, i: usize) -> f64 {
        if i >= self.n_bins {
            self.q_max
        } else {
            self.q_min + i as f64 * self.bin_width()
        }
    }

    pub fn is_symmetric(&self) -> bool {
        (self.q_min + self.q_max).abs() <= 1e-12 * self.q_max.abs().max(self.q_min.abs())
    }

    pub fn locate(&self, q: f64) -> BinSlot {
        if q < self.q_min {
            return BinSlot::Underflow;
        }
        if q >= self.q_max {
            return BinSlot::Overflow;
        }
        let guess = ((q - self.q_min) / self.bin_width()).floor() as usize;
        let mut i = guess.min(self.n_bins - 1);
        // floor() can land one bin off near an edge; settle against the exact edges.
        while i > 0 && q < self.edge(i) {
            i -= 1;
        }
        while i + 1 < self.n_bins && q >= self.edge(i + 1) {
            i += 1;
        }
        BinSlot::Interior(i)
    }

    /// Number of rows of a response matrix (and entries of model-aligned counts) on this grid.
    pub fn model_rows(&self) -> usize {
        match self.overflow_mode {
            OverflowMode::Include => self.n_bins + 2,
            OverflowMode::Discard => self.n_bins,
        }
    }

    /// Model row for a slot; `None` for out-of-range slots in discard mode.
    pub fn row_of(&self, slot: BinSlot) -> Option<usize> {
        match (self.overflow_mode, slot) {
            (OverflowMode::Include, BinSlot::Underflow) => Some(0),
            (OverflowMode::Include, BinSlot::Interior(i)) => Some(i + 1),
            (OverflowMode::Include, BinSlot::Overflow) => Some(self.n_bins + 1),
            (OverflowMode::Discard, BinSlot::Interior(i)) => Some(i),
            (OverflowMode::Discard, _) => None,
        }
    }

    /// Row of interior bin `i` in the model layout.
    pub fn interior_row(&self, i: usize) -> usize {
        match self.overflow_mode {
            OverflowMode::Include => i + 1,
            OverflowMode::Discard => i,
        }
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain(format!("efficiency must lie in (0, 1], got {eta}")));
    }
    Ok(())
}

fn check_q(q: f64) -> Result<()> {
    if !q.is_finite() {
        return Err(Error::domain(format!("quadrature value must be finite, got {q}")));
    }
    Ok(())
}

/// Fills `out[k] = ψ_k(q)` for `k = 0..out.len()`.
///
/// The recurrence runs on an unnormalised sequence with a separately tracked
/// log-scale, so neither the Gaussian factor nor the polynomial growth can
/// overflow or underflow prematurely.
pub(crate) fn fock_amplitudes(q: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    const RESCALE_AT: f64 = 1e150;
    const RESCALE_BY: f64 = 1e-150;
    let ln_rescale = RESCALE_AT.ln();

    let mut log_scale = -0.5 * q * q;
    let mut factor = log_scale.exp();
    let emit = |v: f64, log_scale: f64, factor: f64| -> f64 {
        if factor > 1e-300 {
            v * factor
        } else if v == 0.0 {
            0.0
        } else {
            v.signum() * (v.abs().ln() + log_scale).exp()
        }
    };

    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    out[0] = emit(cur, log_scale, factor);
    for n in 0..out.len() - 1 {
        let nf = n as f64;
        let next = q * (2.0 / (nf + 1.0)).sqrt() * cur - (nf / (nf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE_AT {
            cur *= RESCALE_BY;
            prev *= RESCALE_BY;
            log_scale += ln_rescale;
            factor = log_scale.exp();
        }
        out[n + 1] = emit(cur, log_scale, factor);
    }
}

/// Normalised harmonic-oscillator eigenfunction `ψ_n(q)`.
pub fn fock_wavefunction(n: usize, q: f64) -> Result<f64> {
    check_q(q)?;
    let mut buf = vec![0.0; n + 1];
    fock_amplitudes(q, &mut buf);
    Ok(buf[n])
}

/// Ideal quadrature density `ψ_n(q)²` of the Fock state `|n⟩`.
pub fn fock_density(n: usize, q: f64) -> Result<f64> {
    fock_wavefunction(n, q).map(|a| a * a)
}

/// Binomial loss kernel: `B[n][k]` is the probability that `k` of `n` photons survive.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMatrix {
    n_max: usize,
    eta: f64,
    entries: Vec<f64>,
}

impl LossMatrix {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn get(&self, n: usize, k: usize) -> f64 {
        self.entries[n * (self.n_max + 1) + k]
    }

    pub fn row(&self, n: usize) -> &[f64] {
        let dim = self.n_max + 1;
        &self.entries[n * dim..(n + 1) * dim]
    }
}

pub fn bernoulli_loss_matrix(n_max: usize, eta: f64) -> Result<LossMatrix> {
    check_eta(eta)?;
    let dim = n_max + 1;
    let mut entries = vec![0.0; dim * dim];
    entries[0] = 1.0;
    // Pascal-style recurrence: each row is a convex combination of the previous one.
    for n in 1..dim {
        for k in 0..=n {
            let survive = if k > 0 { eta * entries[(n - 1) * dim + k - 1] } else { 0.0 };
            let lose = if k < n { (1.0 - eta) * entries[(n - 1) * dim + k] } else { 0.0 };
            entries[n * dim + k] = survive + lose;
        }
    }
    Ok(LossMatrix { n_max, eta, entries })
}

/// Quadrature density of `|n⟩` seen through a detector of efficiency `eta`.
pub fn fock_loss_density(n: usize, eta: f64, q: f64) -> Result<f64> {
    check_q(q)?;
    let loss = bernoulli_loss_matrix(n, eta)?;
    let mut amps = vec![0.0; n + 1];
    fock_amplitudes(q, &mut amps);
    Ok(loss.row(n).iter().zip(&amps).map(|(b, a)| b * a * a).sum())
}

/// Nodes and weights of the Gauss–Legendre rule on [-1, 1].
fn gauss_legendre() -> &'static [(f64, f64); GAUSS_LEGENDRE_ORDER] {
    static RULE: OnceLock<[(f64, f64); GAUSS_LEGENDRE_ORDER]> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GAUSS_LEGENDRE_ORDER;
        let mut rule = [(0.0, 0.0); GAUSS_LEGENDRE_ORDER];
        for i in 0..n / 2 {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for j in 2..=n {
                    let jf = j as f64;
                    let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            rule[i] = (-x, w);
            rule[n - 1 - i] = (x, w);
        }
        rule
    })
}

/// Integrals `∫_lo^hi ψ_k(q)² dq` for `k = 0..out.len()`, accumulated into `out`.
fn accumulate_bin_integrals(lo: f64, hi: f64, amps: &mut [f64], out: &mut [f64]) {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    for &(x, w) in gauss_legendre() {
        fock_amplitudes(mid + half * x, amps);
        for (o, a) in out.iter_mut().zip(amps.iter()) {
            *o += half * w * a * a;
        }
    }
}

/// Integrates `ψ_k²` over `[lo, hi]` split into pieces no wider than `max_step`.
fn interval_integrals(lo: f64, hi: f64, max_step: f64, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    if hi <= lo {
        return out;
    }
    let pieces = ((hi - lo) / max_step).ceil().max(1.0) as usize;
    let step = (hi - lo) / pieces as f64;
    let mut amps = vec![0.0; dim];
    for i in 0..pieces {
        let a = lo + i as f64 * step;
        let b = if i + 1 == pieces { hi } else { a + step };
        accumulate_bin_integrals(a, b, &mut amps, &mut out);
    }
    out
}

/// Binned response `A[ν][n]`, row-major over the model rows of its grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    grid: BinGrid,
    n_max: usize,
    eta: f64,
    entries: Vec<f64>,
}

impl ResponseMatrix {
    /// Builds a matrix from explicit entries. Used for hand-made instances and deserialisation.
    pub fn from_rows(grid: BinGrid, eta: f64, rows: Vec<Vec<f64>>) -> Result<Self> {
        check_eta(eta)?;
        if rows.len() != grid.model_rows() {
            return Err(Error::DimensionMismatch(format!(
                "grid has {} model rows but {} rows were supplied",
                grid.model_rows(),
                rows.len()
            )));
        }
        let n_cols = rows.first().map_or(0, Vec::len);
        if n_cols == 0 {
            return Err(Error::validation("response matrix needs at least one column"));
        }
        let mut entries = Vec::with_capacity(rows.len() * n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch(format!("row {i} has {} entries, expected {n_cols}", row.len())));
            }
            for &v in row {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::validation(format!("response entry {v} in row {i} is not a probability")));
                }
            }
            entries.extend_from_slice(row);
        }
        Ok(ResponseMatrix { grid, n_max: n_cols - 1, eta, entries })
    }

    pub fn grid(&self) -> &BinGrid {
        &self.grid
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn n_rows(&self) -> usize {
        self.grid.model_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.n_max + 1
    }

    pub fn get(&self, row: usize, n: usize) -> f64 {
        self.entries[row * self.n_cols() + n]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.n_cols();
        &self.entries[row * c..(row + 1) * c]
    }

    pub fn column(&self, n: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|r| self.get(r, n)).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_cols()];
        for r in 0..self.n_rows() {
            for (s, v) in sums.iter_mut().zip(self.row(r)) {
                *s += v;
            }
        }
        sums
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows()).map(|r| self.row(r).to_vec()).collect()
    }

    /// Largest entrywise difference to another matrix of the same shape.
    pub fn max_abs_difference(&self, other: &ResponseMatrix) -> Result<f64> {
        if self.n_rows() != other.n_rows() || self.n_cols() != other.n_cols() {
            return Err(Error::DimensionMismatch("response matrices differ in shape".into()));
        }
        Ok(self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }
}

/// Binned response matrix from the exact binomial-mixture loss model.
pub fn response_matrix(grid: &BinGrid, n_max: usize, eta: f64) -> Result<ResponseMatrix> {
    check_eta(eta)?;
    let dim = n_max + 1;
    let loss = bernoulli_loss_matrix(n_max, eta)?;

    // Ideal-density integrals per interior bin, then mix with the loss kernel.
    let mut amps = vec![0.0; dim];
    let mut ideal = vec![vec![0.0; dim]; grid.n_bins()];
    for (i, bin) in ideal.iter_mut().enumerate() {
        accumulate_bin_integrals(grid.edge(i), grid.edge(i + 1), &mut amps, bin);
    }
    let mix = |ideal_row: &[f64]| -> Vec<f64> {
        (0..dim).map(|n| loss.row(n)[..=n].iter().zip(ideal_row).map(|(b, v)| b * v).sum::<f64>()).collect()
    };

    let interior: Vec<Vec<f64>> = ideal.iter().map(|r| mix(r)).collect();
    let mut interior_sums = vec![0.0; dim];
    for row in &interior {
        for (s, v) in interior_sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    if let Some((n, s)) = interior_sums.iter().enumerate().find(|(_, &s)| s > 1.0 + COLUMN_SUM_SLACK) {
        return Err(Error::Numerical(format!("quadrature did not converge: interior mass of column {n} is {s}")));
    }

    let mut rows = Vec::with_capacity(grid.model_rows());
    match grid.overflow_mode() {
        OverflowMode::Discard => rows.extend(interior.into_iter().map(clamp_row)),
        OverflowMode::Include => {
            let (under, over) = if grid.is_symmetric() {
                let half: Vec<f64> = interior_sums.iter().map(|s| (0.5 * (1.0 - s)).max(0.0)).collect();
                (half.clone(), half)
            } else {
                let reach = (2.0 * n_max as f64 + 1.0).sqrt() + 6.0;
                let step = grid.bin_width().min(0.1);
                let under_ideal = interval_integrals(-reach, grid.q_min(), step, dim);
                let over_ideal = interval_integrals(grid.q_max(), reach, step, dim);
                (mix(&under_ideal), mix(&over_ideal))
            };
            rows.push(clamp_row(under));
            rows.extend(interior.into_iter().map(clamp_row));
            rows.push(clamp_row(over));
        }
    }
    ResponseMatrix::from_rows(*grid, eta, rows)
}

fn clamp_row(row: Vec<f64>) -> Vec<f64> {
    row.into_iter().map(|v| v.clamp(0.0, 1.0)).collect()
}

/// Independent construction of the response matrix.
///
/// Each column is the binned law of `√η·q_n + √(1-η)·q_vac`, where `q_n` has
/// the ideal density of `|n⟩` and `q_vac` is the vacuum Gaussian of variance
/// 1/2. The ideal density is tabulated on a fine grid over [-12, 12]; the
/// Gaussian is integrated analytically over each bin through its CDF, and the
/// remaining integral over `q_n` is done with the trapezoidal rule.
pub fn response_matrix_convolution_oracle(grid: &BinGrid, n_max: usize, eta: f64) -> Result<ResponseMatrix> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::domain(format!(
            "convolution oracle requires 0 < eta < 1, got {eta}; use response_matrix for eta = 1"
        )));
    }
    let dim = n_max + 1;
    let points = (2.0 * ORACLE_HALF_RANGE / ORACLE_STEP).round() as usize + 1;
    let step = 2.0 * ORACLE_HALF_RANGE / (points - 1) as f64;
    let xs: Vec<f64> = (0..points).map(|j| -ORACLE_HALF_RANGE + j as f64 * step).collect();

    // densities[n][j] = ψ_n(x_j)², weighted by the trapezoid weight.
    let mut densities = vec![vec![0.0; points]; dim];
    let mut amps = vec![0.0; dim];
    for (j, &x) in xs.iter().enumerate() {
        fock_amplitudes(x, &mut amps);
        let w = if j == 0 || j + 1 == points { 0.5 * step } else { step };
        for (n, a) in amps.iter().enumerate() {
            densities[n][j] = w * a * a;
        }
    }

    let scale = eta.sqrt();
    let sigma = ((1.0 - eta) / 2.0).sqrt();
    // P(√η x + noise < edge) for every grid point.
    let cdf_at = |edge: f64| -> Vec<f64> {
        xs.iter()
            .map(|&x| {
                let z = (edge - scale * x) / (sigma * std::f64::consts::SQRT_2);
                0.5 * statrs::function::erf::erfc(-z)
            })
            .collect()
    };
    let edges: Vec<Vec<f64>> = (0..=grid.n_bins()).map(|i| cdf_at(grid.edge(i))).collect();

    let integrate = |weights: &dyn Fn(usize) -> f64| -> Vec<f64> {
        densities.iter().map(|d| d.iter().enumerate().map(|(j, v)| v * weights(j)).sum::<f64>()).collect()
    };

    let mut rows = Vec::with_capacity(grid.model_rows());
    if grid.overflow_mode() == OverflowMode::Include {
        rows.push(integrate(&|j| edges[0][j]));
    }
    for i in 0..grid.n_bins() {
        let (lo, hi) = (&edges[i], &edges[i + 1]);
        rows.push(integrate(&|j| hi[j] - lo[j]));
    }
    if grid.overflow_mode() == OverflowMode::Include {
        let top = &edges[grid.n_bins()];
        rows.push(integrate(&|j| 1.0 - top[j]));
    }
    ResponseMatrix::from_rows(*grid, eta, rows.into_iter().map(clamp_row).collect())
}
