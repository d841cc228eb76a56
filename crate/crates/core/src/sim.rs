//! Monte Carlo random-phase homodyne events and their histograms.
//!
//! Two independent samplers produce the same phase-averaged law:
//!
//! * the Gaussian route draws a local-oscillator phase and then a normal
//!   quadrature value, which is exact for coherent and squeezed-vacuum light;
//! * the Fock route draws a photon number, thins it binomially with the
//!   detector efficiency and samples the ideal density of the surviving Fock
//!   state by inverse-CDF lookup.
//!
//! All randomness comes from one explicitly passed seed.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{fock_amplitudes, BinGrid, BinSlot, OverflowMode};
use crate::states::{squeezing_parameter, PhotonDistribution, StateKind};

pub const EVENT_FORMAT: &str = "photon-recon-events/1";
pub const HISTOGRAM_FORMAT_VERSION: u32 = 1;

/// Largest truncated tail the Fock route accepts.
pub const MAX_SAMPLER_TAIL: f64 = 1e-6;

/// Points per inverse-CDF table.
const TABLE_POINTS: usize = 20_000;

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerRoute {
    Gaussian,
    Fock,
}

impl std::fmt::Display for SamplerRoute {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SamplerRoute::Gaussian => "gaussian",
            SamplerRoute::Fock => "fock",
        })
    }
}

impl std::str::FromStr for SamplerRoute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(SamplerRoute::Gaussian),
            "fock" => Ok(SamplerRoute::Fock),
            other => Err(Error::validation(format!("unknown sampler route {other:?}"))),
        }
    }
}

/// Origin of an [`EventBatch`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMeta {
    /// `coherent`, `squeezed-vacuum` or `file:PATH`.
    pub state: String,
    pub mean_photon: Option<f64>,
    pub eta: f64,
    pub route: SamplerRoute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventBatch {
    pub values: Vec<f64>,
    pub seed: u64,
    pub meta: EventMeta,
}

fn check_sim_params(mean_photon: f64, eta: f64, n_events: usize) -> Result<()> {
    if !(mean_photon >= 0.0) || !mean_photon.is_finite() {
        return Err(Error::domain(format!("mean photon number must be >= 0, got {mean_photon}")));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain(format!("efficiency must lie in (0, 1], got {eta}")));
    }
    if n_events == 0 {
        return Err(Error::domain("at least one event must be simulated"));
    }
    Ok(())
}

/// Exact sampler for the Gaussian benchmark states.
pub fn sample_gaussian_route(
    kind: StateKind,
    mean_photon: f64,
    eta: f64,
    n_events: usize,
    seed: u64,
) -> Result<EventBatch> {
    check_sim_params(mean_photon, eta, n_events)?;
    let mut rng = rng_from_seed(seed);
    let r = squeezing_parameter(mean_photon)?;
    let (stretch, squash) = ((2.0 * r).exp(), (-2.0 * r).exp());
    let amplitude = (2.0 * eta * mean_photon).sqrt();

    let values = (0..n_events)
        .map(|_| {
            let theta: f64 = rng.random_range(0.0..2.0 * PI);
            let z: f64 = rng.sample(StandardNormal);
            match kind {
                StateKind::Coherent => amplitude * theta.cos() + z * 0.5f64.sqrt(),
                StateKind::SqueezedVacuum => {
                    let (s, c) = theta.sin_cos();
                    let var = eta * (stretch * c * c + squash * s * s) / 2.0 + (1.0 - eta) / 2.0;
                    z * var.sqrt()
                }
            }
        })
        .collect();
    Ok(EventBatch {
        values,
        seed,
        meta: EventMeta {
            state: kind.name().to_string(),
            mean_photon: Some(mean_photon),
            eta,
            route: SamplerRoute::Gaussian,
        },
    })
}

/// Inverse CDF of `ψ_k²` tabulated on `[-Q_k, Q_k]`, `Q_k = √(2k+1) + 5`.
#[derive(Debug, Clone)]
struct InverseCdfTable {
    lo: f64,
    step: f64,
    cdf: Vec<f64>,
}

impl InverseCdfTable {
    fn new(k: usize) -> Self {
        let reach = (2.0 * k as f64 + 1.0).sqrt() + 5.0;
        let step = 2.0 * reach / (TABLE_POINTS - 1) as f64;
        let mut amps = vec![0.0; k + 1];
        let density: Vec<f64> = (0..TABLE_POINTS)
            .map(|j| {
                fock_amplitudes(-reach + j as f64 * step, &mut amps);
                amps[k] * amps[k]
            })
            .collect();
        let mut cdf = Vec::with_capacity(TABLE_POINTS);
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in density.windows(2) {
            acc += 0.5 * step * (w[0] + w[1]);
            cdf.push(acc);
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        InverseCdfTable { lo: -reach, step, cdf }
    }

    fn invert(&self, u: f64) -> f64 {
        // First index with cdf > u; the segment below it brackets u.
        let hi = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[hi - 1], self.cdf[hi]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        self.lo + (hi as f64 - 1.0 + frac) * self.step
    }
}

/// Samplers for the ideal densities of `|0⟩ … |n_max⟩`.
#[derive(Debug, Clone)]
pub struct FockSampler {
    tables: Vec<InverseCdfTable>,
}

impl FockSampler {
    pub fn new(n_max: usize) -> Self {
        FockSampler { tables: (0..=n_max).map(InverseCdfTable::new).collect() }
    }

    pub fn n_max(&self) -> usize {
        self.tables.len() - 1
    }

    /// Quadrature value distributed with density `ψ_k²`.
    pub fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.tables[k].invert(u)
    }
}

/// Cutoff suggested when a distribution's tail is too heavy, from the decay of its last entries.
fn suggest_cutoff(d: &PhotonDistribution) -> Option<usize> {
    let nonzero: Vec<(usize, f64)> = d.probs().iter().copied().enumerate().filter(|(_, p)| *p > 0.0).collect();
    let &[.., (n0, p0), (n1, p1)] = nonzero.as_slice() else {
        return None;
    };
    let ratio = (p1 / p0).powf(1.0 / (n1 - n0) as f64);
    if !(ratio < 1.0) || ratio <= 0.0 {
        return None;
    }
    let extra = ((MAX_SAMPLER_TAIL / d.tail_mass()).ln() / ratio.ln()).ceil();
    Some(d.n_max() + extra.max(1.0) as usize)
}

/// Generic Fock-diagonal sampler: photon number, binomial loss, then `ψ_k²`.
pub fn sample_fock_route(d: &PhotonDistribution, eta: f64, n_events: usize, seed: u64) -> Result<EventBatch> {
    let sampler = FockSampler::new(d.n_max());
    sample_fock_route_with(&sampler, d, eta, n_events, seed, "custom")
}

/// [`sample_fock_route`] with prebuilt tables and an explicit state label.
pub fn sample_fock_route_with(
    sampler: &FockSampler,
    d: &PhotonDistribution,
    eta: f64,
    n_events: usize,
    seed: u64,
    state_label: &str,
) -> Result<EventBatch> {
    check_sim_params(0.0, eta, n_events)?;
    if d.tail_mass() > MAX_SAMPLER_TAIL {
        let hint = match suggest_cutoff(d) {
            Some(n) => format!("; rebuild the state with n_max >= {n}"),
            None => String::new(),
        };
        return Err(Error::validation(format!(
            "truncated tail mass {:e} exceeds {MAX_SAMPLER_TAIL:e} at n_max = {}{hint}",
            d.tail_mass(),
            d.n_max()
        )));
    }
    if sampler.n_max() < d.n_max() {
        return Err(Error::DimensionMismatch(format!(
            "sampler tables reach n = {} but the state extends to {}",
            sampler.n_max(),
            d.n_max()
        )));
    }

    let mut cumulative: Vec<f64> = d
        .probs()
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let total = *cumulative.last().unwrap();
    cumulative.iter_mut().for_each(|c| *c /= total);
    let last_occupied = d.probs().iter().rposition(|p| *p > 0.0).unwrap_or(0);

    let mut rng = rng_from_seed(seed);
    let mut values = Vec::with_capacity(n_events);
    for _ in 0..n_events {
        let u: f64 = rng.random();
        let n = cumulative.partition_point(|&c| c <= u).min(last_occupied);
        let k = if eta < 1.0 && n > 0 {
            Binomial::new(n as u64, eta).map_err(|e| Error::Numerical(format!("binomial draw: {e}")))?.sample(&mut rng)
                as usize
        } else {
            n
        };
        values.push(sampler.sample(k, &mut rng));
    }
    Ok(EventBatch {
        values,
        seed,
        meta: EventMeta { state: state_label.to_string(), mean_photon: None, eta, route: SamplerRoute::Fock },
    })
}

/// Event counts per bin on a [`BinGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub grid: BinGrid,
    /// Interior bins only.
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
    /// Out-of-range events dropped in discard mode.
    pub discarded: u64,
    /// Number of events binned, including discarded ones.
    pub total: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<EventMeta>,
}

impl Histogram {
    pub fn empty(grid: BinGrid) -> Self {
        Histogram {
            grid,
            counts: vec![0; grid.n_bins()],
            underflow: 0,
            overflow: 0,
            discarded: 0,
            total: 0,
            source: None,
        }
    }

    /// Counts aligned with the response-matrix rows of the grid.
    pub fn model_counts(&self) -> Vec<u64> {
        match self.grid.overflow_mode() {
            OverflowMode::Include => std::iter::once(self.underflow)
                .chain(self.counts.iter().copied())
                .chain(std::iter::once(self.overflow))
                .collect(),
            OverflowMode::Discard => self.counts.clone(),
        }
    }

    /// Events entering the likelihood: everything except discarded ones.
    pub fn model_total(&self) -> u64 {
        self.total - self.discarded
    }

    pub fn validate(&self) -> Result<()> {
        if self.counts.len() != self.grid.n_bins() {
            return Err(Error::DimensionMismatch(format!(
                "histogram has {} counts for {} bins",
                self.counts.len(),
                self.grid.n_bins()
            )));
        }
        if self.grid.overflow_mode() == OverflowMode::Discard && (self.underflow > 0 || self.overflow > 0) {
            return Err(Error::validation("discard-mode histogram carries overflow counts"));
        }
        if self.grid.overflow_mode() == OverflowMode::Include && self.discarded > 0 {
            return Err(Error::validation("include-mode histogram carries discarded events"));
        }
        let sum: u64 = self.counts.iter().sum::<u64>() + self.underflow + self.overflow + self.discarded;
        if sum != self.total {
            return Err(Error::validation(format!("histogram counts sum to {sum} but total is {}", self.total)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = HistogramFile { format_version: HISTOGRAM_FORMAT_VERSION, histogram: self.clone() };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: HistogramFile = serde_json::from_str(text)?;
        if file.format_version != HISTOGRAM_FORMAT_VERSION {
            return Err(Error::validation(format!("unsupported histogram format version {}", file.format_version)));
        }
        file.histogram.validate()?;
        Ok(file.histogram)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Histogram::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct HistogramFile {
    format_version: u32,
    #[serde(flatten)]
    histogram: Histogram,
}

pub fn bin_events(batch: &EventBatch, grid: &BinGrid) -> Histogram {
    let mut hist = bin_values(&batch.values, grid);
    hist.source = Some(batch.meta.clone());
    hist
}

pub fn bin_values(values: &[f64], grid: &BinGrid) -> Histogram {
    let mut hist = Histogram::empty(*grid);
    for &q in values {
        let slot = grid.locate(q);
        match (grid.overflow_mode(), slot) {
            (_, BinSlot::Interior(i)) => hist.counts[i] += 1,
            (OverflowMode::Include, BinSlot::Underflow) => hist.underflow += 1,
            (OverflowMode::Include, BinSlot::Overflow) => hist.overflow += 1,
            (OverflowMode::Discard, _) => hist.discarded += 1,
        }
    }
    hist.total = values.len() as u64;
    hist
}

impl EventBatch {
    /// Plain text: `# key: value` header lines, then one value per line.
    pub fn to_file_string(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 24 + 200);
        let _ = writeln!(out, "# format: {EVENT_FORMAT}");
        let _ = writeln!(out, "# state: {}", self.meta.state);
        if let Some(mu) = self.meta.mean_photon {
            let _ = writeln!(out, "# mean_photon: {mu:?}");
        }
        let _ = writeln!(out, "# eta: {:?}", self.meta.eta);
        let _ = writeln!(out, "# seed: {}", self.seed);
        let _ = writeln!(out, "# route: {}", self.meta.route);
        let _ = writeln!(out, "# events: {}", self.values.len());
        for v in &self.values {
            let _ = writeln!(out, "{v:?}");
        }
        out
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_file_string())?;
        Ok(())
    }
}

/// Parsed event file. Header fields are optional so hand-written files can be binned.
#[derive(Debug, Clone, PartialEq)]
pub struct EventFile {
    pub values: Vec<f64>,
    pub meta: Option<EventMeta>,
    pub seed: Option<u64>,
}

pub fn parse_event_file(text: &str) -> Result<EventFile> {
    let mut values = Vec::new();
    let mut header = std::collections::HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once(':') {
                header.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let v: f64 = trimmed.parse().map_err(|_| Error::Parse {
            line: i + 1,
            message: format!("cannot parse {trimmed:?} as a quadrature value"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse { line: i + 1, message: format!("non-finite value {trimmed}") });
        }
        values.push(v);
    }
    if let Some(format) = header.get("format") {
        if format != EVENT_FORMAT {
            return Err(Error::validation(format!("unsupported event file format {format:?}")));
        }
    }
    let parse_header = |key: &str| -> Result<Option<f64>> {
        header
            .get(key)
            .map(|v| v.parse::<f64>().map_err(|_| Error::validation(format!("bad header {key}: {v}"))))
            .transpose()
    };
    let eta = parse_header("eta")?;
    let meta = match (header.get("state"), eta, header.get("route")) {
        (Some(state), Some(eta), Some(route)) => Some(EventMeta {
            state: state.clone(),
            mean_photon: parse_header("mean_photon")?,
            eta,
            route: route.parse()?,
        }),
        _ => None,
    };
    let seed = header
        .get("seed")
        .map(|s| s.parse::<u64>().map_err(|_| Error::validation(format!("bad header seed: {s}"))))
        .transpose()?;
    if let Some(declared) = header.get("events") {
        let declared: usize =
            declared.parse().map_err(|_| Error::validation(format!("bad header events: {declared}")))?;
        if declared != values.len() {
            return Err(Error::validation(format!(
                "header declares {declared} events but the file holds {}",
                values.len()
            )));
        }
    }
    Ok(EventFile { values, meta, seed })
}
