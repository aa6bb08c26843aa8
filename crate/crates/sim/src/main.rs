use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qpe_core::adaptive::{run_configured, AdaptiveError, Subroutine};
use qpe_core::analysis::{bin_and_fit, limits_report, FitError};
use qpe_core::pencil::{pencil_from_values, RTOL_NOISELESS, RTOL_NOISY};
use qpe_core::qeep::{conservative_extract, estimate_bins, sample_signal, shot_plan, BumpBasis};
use qpe_core::{GEstimate, PhaseOracle, SimulatedOracle, Spectrum};
use qpe_sim::scenario::{phase_rng, random_spectrum, run_sweep_at, sweep_eps, trial_rng};
use qpe_sim::trace::{load_spectrum, RunTrace};
use qpe_sim::{read_rows, rows, write_rows, ScenarioConfig, ScenarioError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "qpe", version, about = "Adaptive multi-phase estimation on a simulated oracle")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and print its JSON trace.
    Run(RunArgs),
    /// Run a scenario sweep and write the per-phase CSV.
    Sweep(SweepArgs),
    /// Fit RMS error against RMS cost from a sweep CSV.
    Fit(FitArgs),
    /// Fisher information and error bounds for three query strategies.
    Limits(LimitsArgs),
    /// Run the matrix pencil on a spectrum file.
    Pencil(PencilArgs),
    /// Estimate bump-basis bin weights for a spectrum file.
    QeepBins(QeepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SubroutineArg {
    Qeep,
    Pencil,
}

impl From<SubroutineArg> for Subroutine {
    fn from(s: SubroutineArg) -> Self {
        match s {
            SubroutineArg::Qeep => Subroutine::Qeep,
            SubroutineArg::Pencil => Subroutine::Pencil,
        }
    }
}

#[derive(Args)]
struct ScenarioArgs {
    /// JSON scenario file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    subroutine: Option<SubroutineArg>,
    /// Use the guaranteed precisions.
    #[arg(long)]
    strict_eps: bool,
    #[arg(long)]
    nphi: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    delta_c: Option<Vec<f64>>,
    /// Fixed relaxed precision (skips calibration).
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    kappa_max: Option<f64>,
}

impl ScenarioArgs {
    fn scenario(&self) -> Result<ScenarioConfig, Failure> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))
                    .map_err(Failure::config)?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", p.display()))
                    .map_err(Failure::config)?
            }
            None => ScenarioConfig::default(),
        };
        if let Some(s) = self.subroutine {
            cfg.subroutine = s.into();
        }
        if self.strict_eps {
            cfg.strict_eps = true;
        }
        if let Some(n) = self.nphi {
            cfg.n_phi = n;
        }
        if let Some(d) = &self.delta_c {
            cfg.delta_c = d.clone();
        }
        if self.eps.is_some() {
            cfg.eps = self.eps;
        }
        if self.kappa_max.is_some() {
            cfg.kappa_max = self.kappa_max;
        }
        cfg.validate().map_err(Failure::scenario)?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Trial index within the scenario; selects the phases and the sampling stream.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Spectrum file to use instead of random phases.
    #[arg(long)]
    spectrum: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Phase sets per target precision.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Sweep CSV.
    input: PathBuf,
    #[arg(long, default_value_t = 8)]
    bins: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LimitsArgs {
    /// Largest query length `K`.
    #[arg(long, default_value_t = 100)]
    k: u64,
    /// Shots per basis per query.
    #[arg(long, default_value_t = 100)]
    m: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PencilArgs {
    #[arg(long)]
    spectrum: PathBuf,
    /// Signal length `K`; samples at `k_d·k` for `k = 0..=K`.
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    kd: f64,
    /// Shots per basis; exact values when omitted.
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long, default_value_t = 0.0)]
    a_bound: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Writes the samples as `k,re,im`.
    #[arg(long)]
    dump: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct QeepArgs {
    #[arg(long)]
    spectrum: PathBuf,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0.9)]
    confidence: f64,
    #[arg(long, default_value_t = 1.0)]
    kd: f64,
    /// Amplitude bound for the extracted phases.
    #[arg(long)]
    a_bound: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bin weights as `l,b` (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Error with its process exit code.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl Failure {
    fn config(err: anyhow::Error) -> Self {
        Failure { code: 2, err }
    }

    fn scenario(err: ScenarioError) -> Self {
        let code = match err {
            ScenarioError::Run(AdaptiveError::Oracle(_) | AdaptiveError::Subroutine(_)) => 1,
            _ => 2,
        };
        Failure { code, err: err.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        Failure { code: 1, err }
    }
}

fn output(path: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: serde::Serialize>(path: &Option<PathBuf>, value: &T) -> anyhow::Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn spectrum_arg(path: &Path) -> Result<Spectrum, Failure> {
    load_spectrum(path).map_err(Failure::config)
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let cfg = args.scenario.scenario()?;
    let spec = match &args.spectrum {
        Some(p) => spectrum_arg(p)?,
        None => random_spectrum(cfg.n_phi, &mut phase_rng(cfg.master_seed, args.seed)),
    };
    let delta_c = cfg.delta_c[0];
    let eps = sweep_eps(&cfg).map_err(Failure::scenario)?;
    let acfg = cfg.adaptive(delta_c, eps);
    let mut oracle = SimulatedOracle::new(spec.clone());
    let mut rng = trial_rng(cfg.master_seed, args.seed, delta_c);
    let out = run_configured(&acfg, &mut oracle, &mut rng).map_err(|e| Failure::scenario(e.into()))?;
    write_json(&args.out, &RunTrace::new(&acfg, &spec, &out))?;
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let mut cfg = args.scenario.scenario()?;
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(n) = args.seeds {
        cfg.seeds = n;
    }
    let eps = sweep_eps(&cfg).map_err(Failure::scenario)?;
    eprintln!("eps = {eps}");
    let records = run_sweep_at(&cfg, eps).map_err(Failure::scenario)?;
    let mut out = output(&args.out)?;
    write_rows(&mut out, &rows(&records)).context("writing CSV")?;
    out.flush().context("writing CSV")?;
    Ok(())
}

fn fit(args: FitArgs) -> Result<(), Failure> {
    let file = File::open(&args.input)
        .with_context(|| format!("opening {}", args.input.display()))
        .map_err(Failure::config)?;
    let data = read_rows(file)
        .with_context(|| format!("parsing {}", args.input.display()))
        .map_err(Failure::config)?;
    match bin_and_fit(&qpe_sim::records::error_samples(&data), args.bins) {
        Ok(result) => Ok(write_json(&args.out, &result)?),
        Err(e @ FitError::InsufficientData(_)) => Err(Failure { code: 3, err: e.into() }),
        Err(e) => Err(Failure::config(e.into())),
    }
}

fn limits(args: LimitsArgs) -> Result<(), Failure> {
    if args.k == 0 || args.m == 0 {
        return Err(Failure::config(anyhow!("K and M must be at least 1")));
    }
    let mut out = output(&args.out)?;
    let mut w = csv::Writer::from_writer(&mut out);
    w.write_record(["strategy", "fisher", "cost", "bound", "asymptotic"]).map_err(anyhow::Error::from)?;
    for row in limits_report(args.k, args.m) {
        let name = serde_json::to_value(row.strategy).map_err(anyhow::Error::from)?;
        w.write_record([
            name.as_str().unwrap_or_default().to_string(),
            row.fisher.to_string(),
            row.cost.to_string(),
            row.bound.to_string(),
            row.asymptotic.to_string(),
        ])
        .map_err(anyhow::Error::from)?;
    }
    w.flush().map_err(anyhow::Error::from)?;
    drop(w);
    out.flush().map_err(anyhow::Error::from)?;
    Ok(())
}

fn dump_samples(path: &Path, samples: &[GEstimate]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "re", "im"])?;
    for s in samples {
        w.write_record([s.k.to_string(), s.re.to_string(), s.im.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn pencil(args: PencilArgs) -> Result<(), Failure> {
    let spec = spectrum_arg(&args.spectrum)?;
    if args.k < 1 {
        return Err(Failure::config(anyhow!("--k must be at least 1")));
    }
    let (mut oracle, shots, rtol) = match args.shots {
        Some(m) => (SimulatedOracle::new(spec), m, RTOL_NOISY),
        None => (SimulatedOracle::noiseless(spec), 1, RTOL_NOISELESS),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let samples = sample_signal(&mut oracle, args.kd, args.k, shots, &mut rng).map_err(|e| Failure::config(e.into()))?;
    if let Some(p) = &args.dump {
        dump_samples(p, &samples)?;
    }
    let g: Vec<_> = samples.iter().map(GEstimate::value).collect();
    let est = pencil_from_values(&g, rtol).map_err(|e| anyhow!(e))?;
    let lines: Vec<_> = est
        .thetas
        .iter()
        .zip(&est.amps)
        .filter(|(_, a)| **a >= args.a_bound)
        .map(|(t, a)| serde_json::json!({ "phase": t.value(), "amplitude": a }))
        .collect();
    let doc = serde_json::json!({
        "k_d": args.kd,
        "K": args.k,
        "shots": args.shots,
        "cost": oracle.ledger().total(),
        "imag_residue": est.imag_residue,
        "lines": lines,
    });
    write_json(&args.out, &doc)?;
    Ok(())
}

fn qeep_bins(args: QeepArgs) -> Result<(), Failure> {
    let spec = spectrum_arg(&args.spectrum)?;
    let plan = shot_plan(args.eps, args.confidence).map_err(|e| Failure::config(e.into()))?;
    let basis = BumpBasis::new(args.eps, plan.k_max).map_err(|e| Failure::config(e.into()))?;
    let mut oracle = SimulatedOracle::new(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let bins = estimate_bins(&mut oracle, args.kd, &basis, plan.shots, &mut rng).map_err(|e| anyhow!(e))?;
    let mut out = output(&args.out)?;
    let mut w = csv::Writer::from_writer(&mut out);
    w.write_record(["l", "b"]).map_err(anyhow::Error::from)?;
    for (l, b) in bins.b.iter().enumerate() {
        w.write_record([l.to_string(), b.to_string()]).map_err(anyhow::Error::from)?;
    }
    w.flush().map_err(anyhow::Error::from)?;
    drop(w);
    out.flush().map_err(anyhow::Error::from)?;
    let phases = match args.a_bound {
        Some(a) => conservative_extract(&bins, a).map(|v| v.iter().map(|p| p.value()).collect::<Vec<_>>()).ok(),
        None => None,
    };
    eprintln!(
        "L = {}, K = {}, M = {}, cost = {}, estimates = {:?}",
        plan.bins,
        plan.k_max,
        plan.shots,
        oracle.ledger().total(),
        phases
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Fit(a) => fit(a),
        Command::Limits(a) => limits(a),
        Command::Pencil(a) => pencil(a),
        Command::QeepBins(a) => qeep_bins(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
