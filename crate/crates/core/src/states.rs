//! Fock-diagonal photon-number distributions.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σρ + tail = 1`.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// File sums within this distance of one are renormalised; larger deviations are rejected.
const FILE_RENORMALIZE_LIMIT: f64 = 1e-6;

/// Occupation probabilities `ρ_0 … ρ_{n_max}` plus the mass beyond the cutoff.
///
/// The truncated tail is recorded, not folded back into the retained entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhotonDistribution {
    probs: Vec<f64>,
    tail_mass: f64,
}

impl PhotonDistribution {
    pub fn new(probs: Vec<f64>, tail_mass: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::validation("distribution needs at least one entry"));
        }
        if let Some((n, v)) = probs.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::validation(format!("probability rho_{n} = {v} is not a nonnegative number")));
        }
        if !(tail_mass >= 0.0) || !tail_mass.is_finite() {
            return Err(Error::validation(format!("tail mass {tail_mass} is not a nonnegative number")));
        }
        let total = probs.iter().sum::<f64>() + tail_mass;
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::validation(format!("probabilities plus tail sum to {total}, not 1")));
        }
        Ok(PhotonDistribution { probs, tail_mass })
    }

    /// A distribution with no tail, rescaled onto the simplex.
    ///
    /// Only for inputs that already sum to one up to rounding, such as EM iterates.
    pub(crate) fn from_normalized(mut probs: Vec<f64>) -> Result<Self> {
        let total: f64 = probs.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Numerical(format!("cannot normalise a distribution with sum {total}")));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        PhotonDistribution::new(probs, 0.0)
    }

    pub fn uniform(n_max: usize) -> Self {
        let dim = n_max + 1;
        PhotonDistribution { probs: vec![1.0 / dim as f64; dim], tail_mass: 0.0 }
    }

    pub fn fock(n: usize, n_max: usize) -> Result<Self> {
        if n > n_max {
            return Err(Error::validation(format!("Fock index {n} exceeds cutoff {n_max}")));
        }
        let mut probs = vec![0.0; n_max + 1];
        probs[n] = 1.0;
        Ok(PhotonDistribution { probs, tail_mass: 0.0 })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    /// Total variation distance over the common support, ignoring tails.
    pub fn total_variation(&self, other: &[f64]) -> f64 {
        total_variation(&self.probs, other)
    }

    /// One entry per line, `#` header with the tail mass.
    pub fn to_file_string(&self) -> String {
        let mut out =
            format!("# photon number distribution\n# n_max: {}\n# tail_mass: {:e}\n", self.n_max(), self.tail_mass);
        for p in &self.probs {
            out.push_str(&format!("{p:e}\n"));
        }
        out
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_file_string())?;
        Ok(())
    }
}

impl AsRef<[f64]> for PhotonDistribution {
    fn as_ref(&self) -> &[f64] {
        &self.probs
    }
}

/// Half the L1 distance over `min(a.len(), b.len())` entries.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Benchmark Gaussian states parameterised by their mean photon number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateKind {
    Coherent,
    SqueezedVacuum,
}

impl StateKind {
    pub fn distribution(self, mean_photon: f64, n_max: usize) -> Result<PhotonDistribution> {
        match self {
            StateKind::Coherent => coherent_distribution(mean_photon, n_max),
            StateKind::SqueezedVacuum => squeezed_vacuum_distribution(mean_photon, n_max),
        }
    }

    /// Smallest cutoff whose truncated tail is at most `max_tail`.
    pub fn min_cutoff(self, mean_photon: f64, max_tail: f64) -> Result<usize> {
        // Grow geometrically, then bisect; both tails are monotone in the cutoff.
        let mut hi = 1;
        while self.distribution(mean_photon, hi)?.tail_mass() > max_tail {
            hi *= 2;
            if hi > 1 << 16 {
                return Err(Error::domain(format!("no cutoff below {hi} reaches tail mass {max_tail:e}")));
            }
        }
        let mut lo = 0;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.distribution(mean_photon, mid)?.tail_mass() > max_tail {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    pub fn name(self) -> &'static str {
        match self {
            StateKind::Coherent => "coherent",
            StateKind::SqueezedVacuum => "squeezed-vacuum",
        }
    }
}

impl std::str::FromStr for StateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coherent" => Ok(StateKind::Coherent),
            "squeezed-vacuum" | "squeezed_vacuum" => Ok(StateKind::SqueezedVacuum),
            other => Err(Error::validation(format!("unknown state {other:?}"))),
        }
    }
}

fn check_mean(mean_photon: f64) -> Result<()> {
    if !(mean_photon >= 0.0) || !mean_photon.is_finite() {
        return Err(Error::domain(format!("mean photon number must be finite and >= 0, got {mean_photon}")));
    }
    Ok(())
}

/// Sums a tail series term by term until it stops contributing.
fn tail_sum(mut term: impl FnMut(usize) -> f64, start: usize) -> f64 {
    let mut total = 0.0;
    let mut n = start;
    let mut small_run = 0;
    loop {
        let t = term(n);
        total += t;
        // Terms of both benchmark series are eventually monotone; stop after a run of negligible ones.
        if t <= total * 1e-18 || t == 0.0 {
            small_run += 1;
            if small_run >= 8 {
                break;
            }
        } else {
            small_run = 0;
        }
        n += 1;
        if n > start + 1_000_000 {
            break;
        }
    }
    total
}

/// Poisson statistics `e^{-μ} μⁿ / n!`.
pub fn coherent_distribution(mean_photon: f64, n_max: usize) -> Result<PhotonDistribution> {
    check_mean(mean_photon)?;
    let ln_mu = mean_photon.ln();
    let pmf = |n: usize| -> f64 {
        if mean_photon == 0.0 {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        (-mean_photon + n as f64 * ln_mu - statrs::function::gamma::ln_gamma(n as f64 + 1.0)).exp()
    };
    let probs: Vec<f64> = (0..=n_max).map(pmf).collect();
    let tail = if mean_photon == 0.0 { 0.0 } else { tail_sum(pmf, n_max + 1) };
    PhotonDistribution::new(probs, tail)
}

/// Squeezing parameter `r` with `sinh² r = mean_photon`.
pub fn squeezing_parameter(mean_photon: f64) -> Result<f64> {
    check_mean(mean_photon)?;
    Ok(mean_photon.sqrt().asinh())
}

/// Squeezed-vacuum statistics: only even photon numbers,
/// `ρ_{2m} = (2m)!/(2^m m!)² · tanh^{2m} r / cosh r`.
pub fn squeezed_vacuum_distribution(mean_photon: f64, n_max: usize) -> Result<PhotonDistribution> {
    check_mean(mean_photon)?;
    // sinh² r = μ gives cosh² r = 1 + μ and tanh² r = μ / (1 + μ).
    let tanh2 = mean_photon / (1.0 + mean_photon);
    let ln_tanh2 = tanh2.ln();
    let ln_cosh = 0.5 * (1.0 + mean_photon).ln();
    let even = |m: usize| -> f64 {
        if mean_photon == 0.0 {
            return if m == 0 { 1.0 } else { 0.0 };
        }
        let mf = m as f64;
        // (2m)! / (4^m (m!)²) via log-gamma.
        let ln_central = statrs::function::gamma::ln_gamma(2.0 * mf + 1.0)
            - 2.0 * statrs::function::gamma::ln_gamma(mf + 1.0)
            - mf * 4f64.ln();
        (ln_central + mf * ln_tanh2 - ln_cosh).exp()
    };
    let probs: Vec<f64> = (0..=n_max).map(|n| if n % 2 == 0 { even(n / 2) } else { 0.0 }).collect();
    let tail = if mean_photon == 0.0 { 0.0 } else { tail_sum(even, n_max / 2 + 1) };
    PhotonDistribution::new(probs, tail)
}

/// `Σ n ρ_n` over the retained entries; the truncated tail does not contribute.
pub fn mean_photon_number(d: &PhotonDistribution) -> f64 {
    d.probs().iter().enumerate().map(|(n, p)| n as f64 * p).sum()
}

/// Parses a distribution file: whitespace-separated nonnegative reals, `#` comments.
pub fn parse_distribution(text: &str) -> Result<PhotonDistribution> {
    let mut probs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("");
        for token in content.split_whitespace() {
            let v: f64 = token
                .parse()
                .map_err(|_| Error::Parse { line: i + 1, message: format!("cannot parse {token:?} as a number") })?;
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::validation(format!("line {}: probability {v} is negative or not finite", i + 1)));
            }
            probs.push(v);
        }
    }
    if probs.is_empty() {
        return Err(Error::validation("distribution file holds no values"));
    }
    let total: f64 = probs.iter().sum();
    let deviation = (total - 1.0).abs();
    if deviation >= FILE_RENORMALIZE_LIMIT {
        return Err(Error::validation(format!("distribution sums to {total}, not 1")));
    }
    if deviation > SIMPLEX_TOLERANCE {
        probs.iter_mut().for_each(|p| *p /= total);
    }
    let total: f64 = probs.iter().sum();
    // Whatever rounding residue remains below the tolerance is reported as tail.
    let tail = (1.0 - total).max(0.0);
    PhotonDistribution::new(probs, tail)
}

pub fn distribution_from_file(path: impl AsRef<Path>) -> Result<PhotonDistribution> {
    let text = std::fs::read_to_string(path)?;
    parse_distribution(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn coherent_examples() {
        let vac = coherent_distribution(0.0, 5).unwrap();
        assert_eq!(vac.probs(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let d = coherent_distribution(1.0, 20).unwrap();
        let e_inv = (-1.0f64).exp();
        assert_abs_diff_eq!(d.probs()[0], e_inv, epsilon = 1e-15);
        assert_abs_diff_eq!(d.probs()[1], e_inv, epsilon = 1e-15);
        assert!(d.tail_mass() < 1e-18);
        assert!(d.tail_mass() > 0.0);
        assert_abs_diff_eq!(mean_photon_number(&d), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn squeezed_examples() {
        assert_abs_diff_eq!(squeezing_parameter(1.0).unwrap(), (1.0 + 2f64.sqrt()).ln(), epsilon = 1e-15);
        let d = squeezed_vacuum_distribution(1.0, 20).unwrap();
        assert_abs_diff_eq!(d.probs()[0], 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(d.probs()[2], 1.0 / (4.0 * 2f64.sqrt()), epsilon = 1e-15);
        assert_eq!(d.probs()[1], 0.0);
        assert_eq!(d.probs()[3], 0.0);
        // Truncated at 20 the mean falls short by the tail's contribution (mpmath: 0.99733315158).
        assert_abs_diff_eq!(mean_photon_number(&d), 0.9973331515829143, epsilon = 1e-12);
        assert_abs_diff_eq!(d.tail_mass(), 1.117773856317671e-4, epsilon = 1e-15);
        let wide = squeezed_vacuum_distribution(1.0, 50).unwrap();
        assert_abs_diff_eq!(mean_photon_number(&wide), 1.0, epsilon = 1e-6);
        let vac = squeezed_vacuum_distribution(0.0, 5).unwrap();
        assert_eq!(vac.probs()[0], 1.0);
        assert_eq!(vac.tail_mass(), 0.0);
    }

    #[test]
    fn negative_mean_is_a_domain_error() {
        assert!(matches!(coherent_distribution(-0.1, 4), Err(Error::Domain(_))));
        assert!(matches!(squeezed_vacuum_distribution(-1.0, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn min_cutoff_finds_tail_bound() {
        let n = StateKind::SqueezedVacuum.min_cutoff(1.0, 1e-6).unwrap();
        assert!(squeezed_vacuum_distribution(1.0, n).unwrap().tail_mass() <= 1e-6);
        assert!(squeezed_vacuum_distribution(1.0, n - 1).unwrap().tail_mass() > 1e-6);
        assert_eq!(StateKind::Coherent.min_cutoff(0.0, 1e-12).unwrap(), 0);
    }

    #[test]
    fn distribution_files() {
        let vac = parse_distribution("1.0\n").unwrap();
        assert_eq!(vac.probs(), &[1.0]);
        let two = parse_distribution("# comment\n0.5\n0.5 # trailing\n").unwrap();
        assert_eq!(two.probs(), &[0.5, 0.5]);
        assert!(matches!(parse_distribution("0.3\n0.3\n0.3\n"), Err(Error::Validation(_))));
        assert!(matches!(parse_distribution("0.5\n-0.1\n0.6\n"), Err(Error::Validation(_))));
        assert!(matches!(parse_distribution("# nothing\n\n"), Err(Error::Validation(_))));
        assert!(matches!(parse_distribution("0.5\nabc\n"), Err(Error::Parse { line: 2, .. })));
        let nudged = parse_distribution("0.5000001\n0.5\n").unwrap();
        assert_abs_diff_eq!(nudged.probs().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn file_round_trip() {
        let d = coherent_distribution(2.0, 40).unwrap();
        let back = parse_distribution(&d.to_file_string()).unwrap();
        assert_eq!(back.probs(), d.probs());
    }

    #[test]
    fn constructor_rejects_off_simplex() {
        assert!(PhotonDistribution::new(vec![0.5, 0.4], 0.0).is_err());
        assert!(PhotonDistribution::new(vec![0.5, 0.4], 0.1).is_ok());
        assert!(PhotonDistribution::new(vec![1.1, -0.1], 0.0).is_err());
        assert!(PhotonDistribution::new(vec![], 1.0).is_err());
    }
}
