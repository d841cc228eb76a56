//! On-disk artifacts: response matrices and reconstruction results as JSON,
//! comparison and density tables as CSV.
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces the in-memory values bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{BootstrapSummary, EmConfig, LinearEstimate, ReconstructionResult};
use crate::quadrature::{fock_loss_density, BinGrid, ResponseMatrix};
use crate::states::total_variation;

pub const RESPONSE_FORMAT_VERSION: u32 = 1;
pub const RESULT_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ResponseFile {
    format_version: u32,
    eta: f64,
    n_max: usize,
    grid: BinGrid,
    /// Row-major `[ν][n]`.
    entries: Vec<Vec<f64>>,
}

impl ResponseMatrix {
    pub fn to_json(&self) -> Result<String> {
        let file = ResponseFile {
            format_version: RESPONSE_FORMAT_VERSION,
            eta: self.eta(),
            n_max: self.n_max(),
            grid: *self.grid(),
            entries: self.rows(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ResponseFile = serde_json::from_str(text)?;
        if file.format_version != RESPONSE_FORMAT_VERSION {
            return Err(Error::validation(format!(
                "unsupported response matrix format version {}",
                file.format_version
            )));
        }
        let m = ResponseMatrix::from_rows(file.grid, file.eta, file.entries)?;
        if m.n_max() != file.n_max {
            return Err(Error::validation(format!(
                "response file declares n_max = {} but holds {} columns",
                file.n_max,
                m.n_cols()
            )));
        }
        Ok(m)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        ResponseMatrix::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Serialized reconstruction, optionally with baseline and bootstrap errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub format_version: u32,
    pub rho: Vec<f64>,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub loglik_final: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loglik_trace: Option<Vec<f64>>,
    pub config: EmConfig,
    pub eta: f64,
    pub grid: BinGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_std_errors: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_simplex_valid: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub errors: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap_failures: Option<usize>,
}

impl ResultFile {
    pub fn new(
        result: &ReconstructionResult,
        response: &ResponseMatrix,
        baseline: Option<&LinearEstimate>,
        bootstrap: Option<&BootstrapSummary>,
    ) -> Self {
        ResultFile {
            format_version: RESULT_FORMAT_VERSION,
            rho: result.estimate.probs().to_vec(),
            iterations: result.iterations_run,
            kkt_residual: result.kkt_residual,
            loglik_final: result.loglik_final,
            loglik_trace: result.loglik_trace.clone(),
            config: result.config.clone(),
            eta: response.eta(),
            grid: *response.grid(),
            baseline: baseline.map(|b| b.values.clone()),
            baseline_std_errors: baseline.map(|b| b.std_errors.clone()),
            baseline_simplex_valid: baseline.map(|b| b.simplex_valid),
            errors: bootstrap.map(|b| b.std_devs.clone()),
            bootstrap_failures: bootstrap.map(|b| b.replicas_failed),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ResultFile = serde_json::from_str(text)?;
        if file.format_version != RESULT_FORMAT_VERSION {
            return Err(Error::validation(format!("unsupported result format version {}", file.format_version)));
        }
        Ok(file)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        ResultFile::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Side-by-side table of truth, EM estimate and optional baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub csv: String,
    pub tv_em: f64,
    pub tv_baseline: Option<f64>,
    /// Set when inputs had different cutoffs and were aligned on the shorter one.
    pub warnings: Vec<String>,
}

pub fn compare(truth: &[f64], em: &[f64], baseline: Option<&[f64]>) -> Comparison {
    let mut len = truth.len().min(em.len());
    let mut warnings = Vec::new();
    if truth.len() != em.len() {
        warnings.push(format!(
            "truth has {} entries and the estimate {}; comparing the first {len}",
            truth.len(),
            em.len()
        ));
    }
    if let Some(b) = baseline {
        if b.len() < len {
            warnings.push(format!("baseline has only {} entries; comparing the first {}", b.len(), b.len()));
            len = b.len();
        }
    }
    let truth = &truth[..len];
    let em = &em[..len];
    let baseline = baseline.map(|b| &b[..len]);

    let mut csv = String::from("n,truth,em,baseline,abs_error_em,abs_error_baseline\n");
    for n in 0..len {
        let (b, eb) = match baseline {
            Some(b) => (format!("{:?}", b[n]), format!("{:?}", (b[n] - truth[n]).abs())),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(csv, "{n},{:?},{:?},{b},{:?},{eb}", truth[n], em[n], (em[n] - truth[n]).abs());
    }
    let tv_em = total_variation(truth, em);
    let tv_baseline = baseline.map(|b| total_variation(truth, b));
    let _ = writeln!(csv, "# total_variation_em: {tv_em:?}");
    if let Some(tv) = tv_baseline {
        let _ = writeln!(csv, "# total_variation_baseline: {tv:?}");
    }
    Comparison { csv, tv_em, tv_baseline, warnings }
}

/// CSV of `q` and the lossy Fock densities for each requested `n`.
pub fn density_table(ns: &[usize], eta: f64, q_min: f64, q_max: f64, points: usize) -> Result<String> {
    if points < 2 {
        return Err(Error::validation("density grid needs at least two points"));
    }
    let mut csv = String::from("q");
    for n in ns {
        let _ = write!(csv, ",n{n}");
    }
    csv.push('\n');
    for i in 0..points {
        let q = if i + 1 == points { q_max } else { q_min + (q_max - q_min) * i as f64 / (points - 1) as f64 };
        let _ = write!(csv, "{q:?}");
        for &n in ns {
            let _ = write!(csv, ",{:?}", fock_loss_density(n, eta, q)?);
        }
        csv.push('\n');
    }
    Ok(csv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::response_matrix;

    #[test]
    fn response_json_round_trip_is_exact() {
        let a = response_matrix(&BinGrid::standard(), 6, 0.85).unwrap();
        let back = ResponseMatrix::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn response_json_rejects_other_versions() {
        let a = response_matrix(&BinGrid::standard(), 2, 1.0).unwrap();
        let text = a.to_json().unwrap().replace("\"format_version\":1", "\"format_version\":2");
        assert!(ResponseMatrix::from_json(&text).is_err());
    }

    #[test]
    fn compare_truth_with_itself() {
        let t = [0.5, 0.25, 0.25];
        let c = compare(&t, &t, Some(&t));
        assert_eq!(c.tv_em, 0.0);
        assert_eq!(c.tv_baseline, Some(0.0));
        assert!(c.warnings.is_empty());
        assert_eq!(c.csv.lines().nth(1).unwrap(), "0,0.5,0.5,0.5,0.0,0.0");
    }

    #[test]
    fn compare_aligns_on_shorter_support() {
        let c = compare(&[0.5, 0.5, 0.0, 0.0], &[0.4, 0.6], None);
        assert_eq!(c.warnings.len(), 1);
        assert!((c.tv_em - 0.1).abs() < 1e-15);
        assert_eq!(c.csv.lines().count(), 1 + 2 + 1);
    }
}
