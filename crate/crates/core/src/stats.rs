//! Goodness-of-fit helpers for comparing simulated samples.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Minimum pooled count per cell; sparse neighbouring bins are merged until they reach it.
const MIN_CELL_COUNT: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Two-sample chi-square homogeneity test on histograms with matching bins.
///
/// Adjacent bins are pooled left to right until every cell holds at least ten
/// events from both samples combined; a short remainder joins the last cell.
pub fn two_sample_chi_square(a: &[u64], b: &[u64]) -> ChiSquareTest {
    assert_eq!(a.len(), b.len(), "histograms must share their bins");
    let mut cells: Vec<(u64, u64)> = Vec::new();
    let mut acc = (0, 0);
    for (&x, &y) in a.iter().zip(b) {
        acc = (acc.0 + x, acc.1 + y);
        if acc.0 + acc.1 >= MIN_CELL_COUNT {
            cells.push(acc);
            acc = (0, 0);
        }
    }
    if acc.0 + acc.1 > 0 {
        match cells.last_mut() {
            Some(last) => *last = (last.0 + acc.0, last.1 + acc.1),
            None => cells.push(acc),
        }
    }

    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let statistic: f64 = cells
        .iter()
        .map(|&(x, y)| {
            let (x, y) = (x as f64, y as f64);
            (ka * x - kb * y).powi(2) / (x + y)
        })
        .sum();
    let dof = cells.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let chi = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
        chi.sf(statistic)
    };
    ChiSquareTest { statistic, degrees_of_freedom: dof, p_value }
}

/// Kolmogorov–Smirnov statistic `sup |F_n − F|` of a sample against a continuous CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value `c(α)/√n` for significance `alpha`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt() / (n as f64).sqrt()
}
