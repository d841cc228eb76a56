//! `photon-recon` command-line tool.
//!
//! Exit codes: 0 success, 1 domain or validation failure, 2 usage error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use photon_recon::estimation::{bootstrap_errors, em_reconstruct, linear_baseline, BinCounts, EmConfig, EmInit};
use photon_recon::files::{compare, density_table, ResultFile};
use photon_recon::pipeline::TRUTH_TAIL;
use photon_recon::quadrature::{response_matrix, BinGrid, OverflowMode, ResponseMatrix};
use photon_recon::sim::{
    bin_values, parse_event_file, sample_fock_route_with, sample_gaussian_route, EventBatch, FockSampler, Histogram,
    SamplerRoute, MAX_SAMPLER_TAIL,
};
use photon_recon::states::{distribution_from_file, PhotonDistribution, StateKind};

#[derive(Parser)]
#[command(name = "photon-recon", version, about = "Photon-number reconstruction from random-phase homodyne data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate homodyne events into an event file.
    #[command(allow_negative_numbers = true)]
    Simulate(SimulateArgs),
    /// Bin an event file into a histogram.
    #[command(allow_negative_numbers = true)]
    Histogram(HistogramArgs),
    /// Build the response matrix, optionally with a table of lossy Fock densities.
    #[command(allow_negative_numbers = true)]
    Response(ResponseArgs),
    /// Reconstruct the photon distribution by EM iteration.
    Reconstruct(ReconstructArgs),
    /// Tabulate a reconstruction against the true distribution.
    Compare(CompareArgs),
    /// Run simulate → histogram → response → reconstruct → compare into one directory.
    #[command(allow_negative_numbers = true)]
    Pipeline(PipelineArgs),
}

#[derive(Clone, Debug)]
enum StateArg {
    Kind(StateKind),
    File(PathBuf),
}

fn parse_state(s: &str) -> Result<StateArg, String> {
    match s.strip_prefix("file:") {
        Some(path) if !path.is_empty() => Ok(StateArg::File(PathBuf::from(path))),
        Some(_) => Err("file: needs a path".into()),
        None => s.parse::<StateKind>().map(StateArg::Kind).map_err(|e| e.to_string()),
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RouteArg {
    Gaussian,
    Fock,
}

impl From<RouteArg> for SamplerRoute {
    fn from(r: RouteArg) -> Self {
        match r {
            RouteArg::Gaussian => SamplerRoute::Gaussian,
            RouteArg::Fock => SamplerRoute::Fock,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OverflowArg {
    Include,
    Discard,
}

impl From<OverflowArg> for OverflowMode {
    fn from(o: OverflowArg) -> Self {
        match o {
            OverflowArg::Include => OverflowMode::Include,
            OverflowArg::Discard => OverflowMode::Discard,
        }
    }
}

#[derive(Args, Clone)]
struct SimulateArgs {
    /// coherent, squeezed-vacuum or file:PATH
    #[arg(long, value_parser = parse_state)]
    state: StateArg,
    #[arg(long, default_value_t = 1.0)]
    mean_photon: f64,
    #[arg(long, default_value_t = 0.85)]
    eta: f64,
    #[arg(long, default_value_t = 100_000)]
    events: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "gaussian")]
    route: RouteArg,
    #[arg(long)]
    out: PathBuf,
    /// Also write the exact photon distribution of the simulated state.
    #[arg(long)]
    truth_out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct GridArgs {
    #[arg(long, default_value_t = -5.0)]
    q_min: f64,
    #[arg(long, default_value_t = 5.0)]
    q_max: f64,
    #[arg(long, default_value_t = 100)]
    bins: usize,
    #[arg(long, value_enum, default_value = "include")]
    overflow: OverflowArg,
}

impl GridArgs {
    fn grid(&self) -> anyhow::Result<BinGrid> {
        Ok(BinGrid::new(self.q_min, self.q_max, self.bins, self.overflow.into())?)
    }
}

#[derive(Args, Clone)]
struct HistogramArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct ResponseArgs {
    #[arg(long, default_value_t = 20)]
    n_max: usize,
    #[arg(long, default_value_t = 0.85)]
    eta: f64,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: PathBuf,
    /// CSV of q and the lossy Fock densities.
    #[arg(long)]
    emit_densities: Option<PathBuf>,
    /// Comma-separated photon numbers for --emit-densities.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5")]
    density_ns: Vec<usize>,
    /// Number of q points for --emit-densities.
    #[arg(long, default_value_t = 1001)]
    density_grid: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TraceArg {
    None,
    Full,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BaselineArg {
    None,
    Ls,
}

#[derive(Args, Clone)]
struct ReconstructArgs {
    #[arg(long)]
    hist: PathBuf,
    #[arg(long)]
    response: PathBuf,
    #[arg(long, default_value_t = 8000)]
    iters: usize,
    /// uniform or file:PATH
    #[arg(long, default_value = "uniform")]
    init: String,
    #[arg(long, default_value_t = 0.0)]
    stop_tol: f64,
    #[arg(long, value_enum, default_value = "none")]
    trace: TraceArg,
    #[arg(long, value_enum, default_value = "none")]
    baseline: BaselineArg,
    /// Number of bootstrap resamples; 0 disables.
    #[arg(long, default_value_t = 0)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct CompareArgs {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    result: PathBuf,
    /// Second reconstruction shown in the baseline column.
    #[arg(long)]
    result2: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct PipelineArgs {
    #[arg(long, value_parser = parse_state)]
    state: StateArg,
    #[arg(long, default_value_t = 1.0)]
    mean_photon: f64,
    #[arg(long, default_value_t = 0.85)]
    eta: f64,
    #[arg(long, default_value_t = 100_000)]
    events: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "gaussian")]
    route: RouteArg,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 20)]
    n_max: usize,
    #[arg(long, default_value_t = 8000)]
    iters: usize,
    #[arg(long, value_enum, default_value = "ls")]
    baseline: BaselineArg,
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Simulate(args) => simulate(&args),
        Command::Histogram(args) => histogram(&args),
        Command::Response(args) => response(&args),
        Command::Reconstruct(args) => reconstruct(&args),
        Command::Compare(args) => compare_cmd(&args),
        Command::Pipeline(args) => pipeline(&args),
    }
}

/// Ground truth for a state argument, with a tail small enough for sampling.
fn truth_for(state: &StateArg, mean_photon: f64) -> anyhow::Result<(PhotonDistribution, String)> {
    match state {
        StateArg::Kind(kind) => {
            let n_max = kind.min_cutoff(mean_photon, TRUTH_TAIL)?;
            Ok((kind.distribution(mean_photon, n_max)?, kind.name().to_string()))
        }
        StateArg::File(path) => {
            let d = distribution_from_file(path).with_context(|| format!("reading distribution {}", path.display()))?;
            if d.tail_mass() > MAX_SAMPLER_TAIL {
                eprintln!("warning: distribution in {} leaves tail mass {:e}", path.display(), d.tail_mass());
            }
            Ok((d, format!("file:{}", path.display())))
        }
    }
}

fn simulate_batch(
    state: &StateArg,
    mean_photon: f64,
    eta: f64,
    events: usize,
    seed: u64,
    route: SamplerRoute,
) -> anyhow::Result<(EventBatch, PhotonDistribution)> {
    let (truth, label) = truth_for(state, mean_photon)?;
    let batch = match (route, state) {
        (SamplerRoute::Gaussian, StateArg::Kind(kind)) => sample_gaussian_route(*kind, mean_photon, eta, events, seed)?,
        (SamplerRoute::Gaussian, StateArg::File(_)) => {
            bail!("the gaussian route needs --state coherent or squeezed-vacuum; use --route fock for file states")
        }
        (SamplerRoute::Fock, _) => {
            let sampler = FockSampler::new(truth.n_max());
            let mut batch = sample_fock_route_with(&sampler, &truth, eta, events, seed, &label)?;
            if let StateArg::Kind(_) = state {
                batch.meta.mean_photon = Some(mean_photon);
            }
            batch
        }
    };
    Ok((batch, truth))
}

fn simulate(args: &SimulateArgs) -> anyhow::Result<()> {
    let (batch, truth) =
        simulate_batch(&args.state, args.mean_photon, args.eta, args.events, args.seed, args.route.into())?;
    batch.write_file(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(path) = &args.truth_out {
        truth.write_file(path).with_context(|| format!("writing {}", path.display()))?;
    }
    eprintln!("wrote {} events to {}", batch.values.len(), args.out.display());
    Ok(())
}

fn histogram_from_events(path: &Path, grid: &BinGrid) -> anyhow::Result<Histogram> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let events = parse_event_file(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut hist = bin_values(&events.values, grid);
    hist.source = events.meta;
    Ok(hist)
}

fn histogram(args: &HistogramArgs) -> anyhow::Result<()> {
    let hist = histogram_from_events(&args.input, &args.grid.grid()?)?;
    hist.write_file(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!(
        "binned {} events: {} underflow, {} overflow, {} discarded",
        hist.total, hist.underflow, hist.overflow, hist.discarded
    );
    Ok(())
}

fn audit_columns(a: &ResponseMatrix) {
    for (n, s) in a.column_sums().iter().enumerate() {
        eprintln!("column {n}: {s:.9}");
    }
}

fn response(args: &ResponseArgs) -> anyhow::Result<()> {
    let grid = args.grid.grid()?;
    let a = response_matrix(&grid, args.n_max, args.eta)?;
    a.write_file(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    audit_columns(&a);
    if let Some(path) = &args.emit_densities {
        let csv = density_table(&args.density_ns, args.eta, grid.q_min(), grid.q_max(), args.density_grid)?;
        std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn check_compatible(hist: &Histogram, hist_path: &Path, a: &ResponseMatrix, a_path: &Path) -> anyhow::Result<()> {
    if hist.grid != *a.grid() {
        bail!(
            "grid mismatch: histogram {} uses {:?} but response {} uses {:?}",
            hist_path.display(),
            hist.grid,
            a_path.display(),
            a.grid()
        );
    }
    if let Some(meta) = &hist.source {
        if meta.eta != a.eta() {
            bail!(
                "efficiency mismatch: histogram {} was simulated at eta = {} but response {} uses eta = {}",
                hist_path.display(),
                meta.eta,
                a_path.display(),
                a.eta()
            );
        }
    }
    Ok(())
}

fn parse_init(init: &str, n_max: usize) -> anyhow::Result<EmInit> {
    if init == "uniform" {
        return Ok(EmInit::Uniform);
    }
    let path = init.strip_prefix("file:").ok_or_else(|| anyhow!("--init must be uniform or file:PATH"))?;
    let d = distribution_from_file(path).with_context(|| format!("reading initial distribution {path}"))?;
    if d.n_max() != n_max {
        bail!("initial distribution {path} has cutoff {} but the response matrix has {n_max}", d.n_max());
    }
    Ok(EmInit::Custom(d.into_probs()))
}

struct ReconstructRequest<'a> {
    iters: usize,
    init: EmInit,
    stop_tol: f64,
    trace: bool,
    baseline: bool,
    bootstrap: usize,
    seed: u64,
    out: &'a Path,
}

fn reconstruct_into(hist: &Histogram, a: &ResponseMatrix, req: ReconstructRequest<'_>) -> anyhow::Result<ResultFile> {
    let data = BinCounts::from_histogram(hist);
    let config = EmConfig {
        n_max: a.n_max(),
        max_iterations: req.iters,
        init: req.init,
        stop_tol: req.stop_tol,
        record_trace: req.trace,
    };
    let result = em_reconstruct(&data, a, &config)?;
    let baseline = if req.baseline { Some(linear_baseline(&data, a)?) } else { None };
    let boot =
        if req.bootstrap > 0 { Some(bootstrap_errors(&data, a, &config, req.bootstrap, req.seed)?) } else { None };
    if let Some(b) = &boot {
        if b.replicas_failed > 0 {
            eprintln!("warning: {} of {} bootstrap replicas failed", b.replicas_failed, req.bootstrap);
        }
    }
    let file = ResultFile::new(&result, a, baseline.as_ref(), boot.as_ref());
    file.write_file(req.out).with_context(|| format!("writing {}", req.out.display()))?;
    eprintln!(
        "{} iterations, log-likelihood {:.6}, stationarity residual {:.3e}",
        result.iterations_run, result.loglik_final, result.kkt_residual
    );
    Ok(file)
}

fn reconstruct(args: &ReconstructArgs) -> anyhow::Result<()> {
    let hist =
        Histogram::read_file(&args.hist).with_context(|| format!("reading histogram {}", args.hist.display()))?;
    let a = ResponseMatrix::read_file(&args.response)
        .with_context(|| format!("reading response matrix {}", args.response.display()))?;
    check_compatible(&hist, &args.hist, &a, &args.response)?;
    let request = ReconstructRequest {
        iters: args.iters,
        init: parse_init(&args.init, a.n_max())?,
        stop_tol: args.stop_tol,
        trace: matches!(args.trace, TraceArg::Full),
        baseline: matches!(args.baseline, BaselineArg::Ls),
        bootstrap: args.bootstrap,
        seed: args.seed,
        out: &args.out,
    };
    reconstruct_into(&hist, &a, request)?;
    Ok(())
}

fn write_comparison(
    truth: &[f64],
    result: &ResultFile,
    result2: Option<&ResultFile>,
    out: &Path,
) -> anyhow::Result<()> {
    let baseline = result2.map(|r| r.rho.as_slice()).or(result.baseline.as_deref());
    let cmp = compare(truth, &result.rho, baseline);
    for w in &cmp.warnings {
        eprintln!("warning: {w}");
    }
    std::fs::write(out, &cmp.csv).with_context(|| format!("writing {}", out.display()))?;
    eprintln!("total variation (em): {:.6}", cmp.tv_em);
    if let Some(tv) = cmp.tv_baseline {
        eprintln!("total variation (baseline): {tv:.6}");
    }
    Ok(())
}

fn compare_cmd(args: &CompareArgs) -> anyhow::Result<()> {
    let truth =
        distribution_from_file(&args.truth).with_context(|| format!("reading truth {}", args.truth.display()))?;
    let result =
        ResultFile::read_file(&args.result).with_context(|| format!("reading result {}", args.result.display()))?;
    let result2 = args
        .result2
        .as_ref()
        .map(|p| ResultFile::read_file(p).with_context(|| format!("reading result {}", p.display())))
        .transpose()?;
    write_comparison(truth.probs(), &result, result2.as_ref(), &args.out)
}

fn pipeline(args: &PipelineArgs) -> anyhow::Result<()> {
    std::fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let path = |name: &str| args.out_dir.join(name);

    let (batch, truth) =
        simulate_batch(&args.state, args.mean_photon, args.eta, args.events, args.seed, args.route.into())?;
    batch.write_file(path("events.txt"))?;
    truth.write_file(path("truth.txt"))?;

    let grid = args.grid.grid()?;
    let hist = histogram_from_events(&path("events.txt"), &grid)?;
    hist.write_file(path("histogram.json"))?;

    let a = response_matrix(&grid, args.n_max, args.eta)?;
    a.write_file(path("response.json"))?;

    let request = ReconstructRequest {
        iters: args.iters,
        init: EmInit::Uniform,
        stop_tol: 0.0,
        trace: false,
        baseline: matches!(args.baseline, BaselineArg::Ls),
        bootstrap: 0,
        seed: args.seed,
        out: &path("result.json"),
    };
    let result = reconstruct_into(&hist, &a, request)?;
    write_comparison(truth.probs(), &result, None, &path("comparison.csv"))
}
