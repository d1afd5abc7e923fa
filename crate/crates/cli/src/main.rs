//! `multiport`: simulate, measure and reconstruct 3×3 linear-optical
//! multiports from the command line.
//!
//! Exit codes: 0 success, 1 other failure, 2 usage, 3 file I/O or
//! malformed input, 4 shape mismatch, 5 non-convergence under `--strict`.

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use multiport::fixtures;
use multiport::interference::COHERENCE_LENGTH_UM;
use multiport::io::{self, AmplitudeJson, CountTableJson, ReconstructionJson, VisibilityJson};
use multiport::matrix::parse_phase;
use multiport::uncertainty::SigmaMatrix;
use multiport::{
    amplitude_distribution, compare_up_to_gauge, compose_biased, compose_general, compose_unbiased,
    estimate_uncertainty, fidelity, fringe, ideal_tritter, normalize_counts, real_border,
    reconstruct_composed, reconstruct_direct, similarity, synth_counts, visibility_matrix,
    AmplitudeDistribution, Error, FringeModel, OptimizerConfig, PhaseShifts, PortPair, Stage,
    TransferMatrix, VisibilityMatrix, Weighting,
};

use report::Recorder;

#[derive(Debug)]
struct CliError {
    code: u8,
    msg: String,
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        Self {
            code: 2,
            msg: msg.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } | Error::Json(_) | Error::InvalidData(_) => 3,
            Error::DimensionMismatch { .. } => 4,
            Error::InvalidParameter(_) | Error::EqualIndices(_) | Error::IndexOutOfRange { .. } => {
                2
            }
            Error::TooManyFailures { .. } => 5,
            _ => 1,
        };
        Self {
            code,
            msg: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "multiport",
    version,
    about = "3×3 linear-optical multiport toolkit"
)]
struct Cli {
    /// Write a JSON run report (inputs, digests, metrics, timing) here.
    #[arg(long, global = true)]
    report: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compose a multiport transfer matrix from a tritter and mirror phases.
    Simulate(SimulateArgs),
    /// Visibility matrix and amplitude distribution of a transfer matrix.
    Visibility(VisibilityArgs),
    /// Recover a transfer matrix (or mirror phases) from measured data.
    Reconstruct(ReconstructArgs),
    /// Fidelity or similarity between two files.
    Compare(CompareArgs),
    /// Coincidence rate against delay for one input/output pair.
    Fringe(FringeArgs),
    /// Synthetic detector counts for a transfer matrix.
    Synth(SynthArgs),
    /// Bundled measurement tables.
    #[command(subcommand)]
    Fixtures(FixturesCommand),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Biased,
    Unbiased,
    General,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "unbiased")]
    mode: Mode,
    /// `ideal` for the symmetric tritter, or a matrix file.
    #[arg(long, default_value = "ideal")]
    tritter: String,
    /// Backward tritter matrix for `--mode general`.
    #[arg(long)]
    ub: Option<PathBuf>,
    /// Mirror phase, radians or a literal such as `0.383pi`.
    #[arg(long, default_value = "0", allow_hyphen_values = true, value_parser = phase_arg)]
    phi1: f64,
    #[arg(long, default_value = "0", allow_hyphen_values = true, value_parser = phase_arg)]
    phi2: f64,
    /// Bring the result to real-bordered form.
    #[arg(long)]
    real_border: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VisibilityArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// Visibility matrix output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Amplitude distribution output.
    #[arg(long)]
    amp_out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum WeightingArg {
    Uniform,
    InverseVariance,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum StageArg {
    PhasesOnly,
    Full,
    Both,
}

#[derive(Args, Debug)]
struct SolverArgs {
    #[arg(long, default_value_t = 64)]
    restarts: usize,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-10)]
    ftol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "uniform")]
    weighting: WeightingArg,
    #[arg(long, value_enum, default_value = "both")]
    stage: StageArg,
    /// Weight of the amplitude residuals in the all-parameter stage.
    #[arg(long, default_value_t = multiport::reconstruction::DEFAULT_AMPLITUDE_WEIGHT)]
    amplitude_weight: f64,
}

impl SolverArgs {
    fn config(&self) -> OptimizerConfig {
        OptimizerConfig {
            restarts: self.restarts,
            max_iters: self.max_iters,
            ftol: self.ftol,
            seed: self.seed,
            stage: match self.stage {
                StageArg::PhasesOnly => Stage::PhasesOnly,
                StageArg::Full => Stage::Full,
                StageArg::Both => Stage::Both,
            },
            weighting: match self.weighting {
                WeightingArg::Uniform => Weighting::Uniform,
                WeightingArg::InverseVariance => Weighting::InverseVariance,
            },
            amplitude_weight: self.amplitude_weight,
        }
    }
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    #[arg(long)]
    vis: PathBuf,
    /// Amplitude distribution; required for direct reconstruction.
    #[arg(long)]
    amp: Option<PathBuf>,
    /// Forward tritter; with `--ub` switches to composed reconstruction.
    #[arg(long, requires = "ub")]
    uf: Option<PathBuf>,
    #[arg(long, requires = "uf")]
    ub: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Monte-Carlo samples for entrywise σ (direct mode, needs σ in inputs).
    #[arg(long)]
    uncertainty: Option<usize>,
    /// Compare the result against this matrix and record the branch.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Exit with code 5 if the solver does not converge.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    transpose_vis: bool,
    #[arg(long)]
    transpose_amp: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Metric {
    Fidelity,
    Similarity,
    Both,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    metric: Metric,
    /// Real-border both matrices and allow the conjugate branch.
    #[arg(long)]
    gauge_aware: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FringeArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// Input and output pairs as `ij:kl`, e.g. `01:12`.
    #[arg(long, value_parser = pair_arg)]
    pair: (PortPair, PortPair),
    /// Delays span [−range, range] μm.
    #[arg(long, default_value_t = 1000.0)]
    range: f64,
    #[arg(long, default_value_t = 201)]
    points: usize,
    /// Gaussian width of the dip in μm; defaults to the 440 μm coherence
    /// length taken as FWHM.
    #[arg(long)]
    sigma: Option<f64>,
    /// Coincidence rate for fully distinguishable photons at unit probability.
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// Events per input configuration.
    #[arg(long)]
    totals: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Poisson-sample the counts instead of rounding the means.
    #[arg(long)]
    poisson: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Visibility matrix estimated from the counts.
    #[arg(long)]
    vis_out: Option<PathBuf>,
    /// Amplitude distribution estimated from the counts.
    #[arg(long)]
    amp_out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum FixturesCommand {
    /// Name, file and description of every bundled table.
    List,
    /// Write the bundled tables into a directory.
    Export {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn phase_arg(s: &str) -> std::result::Result<f64, String> {
    parse_phase(s).map_err(|e| e.to_string())
}

fn pair_arg(s: &str) -> std::result::Result<(PortPair, PortPair), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected `ij:kl`, got {s:?}"))?;
    let inputs = PortPair::parse(a).map_err(|e| e.to_string())?;
    let outputs = PortPair::parse(b).map_err(|e| e.to_string())?;
    Ok((inputs, outputs))
}

/// Writes `text` to `out`, or stdout when no path is given.
fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => io::write_text(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_matrix(rec: &mut Recorder, path: &Path) -> CliResult<TransferMatrix> {
    let text = rec.input(path)?;
    Ok(io::parse_matrix(&text)?)
}

fn load_visibility(
    rec: &mut Recorder,
    path: &Path,
    transpose: bool,
) -> CliResult<VisibilityMatrix> {
    let text = rec.input(path)?;
    let v = serde_json::from_str::<VisibilityJson>(&text)
        .map_err(Error::from)?
        .to_matrix()?;
    Ok(if transpose { v.transposed() } else { v })
}

fn load_amplitude(
    rec: &mut Recorder,
    path: &Path,
    transpose: bool,
) -> CliResult<AmplitudeDistribution> {
    let text = rec.input(path)?;
    let a = serde_json::from_str::<AmplitudeJson>(&text)
        .map_err(Error::from)?
        .to_distribution()?;
    Ok(if transpose { a.transposed() } else { a })
}

fn simulate(args: &SimulateArgs, rec: &mut Recorder) -> CliResult<()> {
    let uf = if args.tritter == "ideal" {
        ideal_tritter()
    } else {
        load_matrix(rec, Path::new(&args.tritter))?
    };
    let ph = PhaseShifts::new(args.phi1, args.phi2);
    rec.param("mode", format!("{:?}", args.mode).to_lowercase());
    rec.param("tritter", &args.tritter);
    rec.param("phi1", args.phi1);
    rec.param("phi2", args.phi2);
    rec.param("real_border", args.real_border);

    let mut u = match args.mode {
        Mode::Biased => compose_biased(&uf, ph)?,
        Mode::Unbiased => compose_unbiased(&uf, ph)?,
        Mode::General => {
            let ub_path = args
                .ub
                .as_deref()
                .ok_or_else(|| CliError::usage("--mode general needs --ub"))?;
            let ub = load_matrix(rec, ub_path)?;
            compose_general(&ub, ph, &uf)?
        }
    };
    if args.real_border {
        u = real_border(&u)?.0;
    }
    let dev = u.unitarity_deviation();
    eprintln!("unitarity deviation: {dev:.3e}");
    rec.metric("unitarity_deviation", dev);
    emit(
        args.out.as_deref(),
        &io::to_json_string(&io::MatrixJson::from_matrix(&u))?,
    )
}

fn visibility(args: &VisibilityArgs, rec: &mut Recorder) -> CliResult<()> {
    let u = load_matrix(rec, &args.matrix)?;
    let v = visibility_matrix(&u)?;
    let a = amplitude_distribution(&u);
    rec.metric("undefined_entries", 9 - v.defined_count());
    if v.defined_count() < 9 {
        eprintln!(
            "{} visibility entries undefined (zero coincidence probability)",
            9 - v.defined_count()
        );
    }
    emit(
        args.out.as_deref(),
        &io::to_json_string(&VisibilityJson::from_matrix(&v))?,
    )?;
    if let Some(p) = &args.amp_out {
        io::write_json(p, &AmplitudeJson::from_distribution(&a))?;
    }
    Ok(())
}

fn reconstruct(args: &ReconstructArgs, rec: &mut Recorder) -> CliResult<()> {
    let cfg = args.solver.config();
    cfg.validate()?;
    rec.seed(cfg.seed);
    rec.param("config", cfg);
    let target = load_visibility(rec, &args.vis, args.transpose_vis)?;

    let (mut result, phases) = match (&args.uf, &args.ub) {
        (Some(uf), Some(ub)) => {
            let uf = load_matrix(rec, uf)?;
            let ub = load_matrix(rec, ub)?;
            let (ph, _, res) = reconstruct_composed(&uf, &ub, &target, &cfg)?;
            let (a, b) = ph.in_pi();
            eprintln!("phases: [{a:.4}π, {b:.4}π]");
            rec.metric("phases", ph);
            (res, Some(ph))
        }
        _ => {
            let amp_path = args
                .amp
                .as_deref()
                .ok_or_else(|| CliError::usage("direct reconstruction needs --amp"))?;
            let amp = load_amplitude(rec, amp_path, args.transpose_amp)?;
            let mut res = reconstruct_direct(&target, &amp, &cfg)?;
            if let Some(n) = args.uncertainty {
                let s: SigmaMatrix = estimate_uncertainty(&target, &amp, &cfg, n)?;
                res.sigma = Some(s);
            }
            (res, None)
        }
    };

    if let Some(p) = &args.reference {
        let reference = load_matrix(rec, p)?;
        let (f, conj) = compare_up_to_gauge(&reference, &result.matrix)?;
        result.conjugated = Some(conj);
        rec.metric("reference_fidelity", f);
        eprintln!(
            "fidelity to reference: {f:.4}{}",
            if conj { " (conjugate branch)" } else { "" }
        );
    }

    rec.metric("objective", result.objective);
    rec.metric("similarity", result.similarity);
    rec.metric("converged", result.converged);
    rec.metric("best_hits", result.best_hits);
    eprintln!(
        "objective {:.6}, similarity {:.4}, converged {}",
        result.objective, result.similarity, result.converged
    );
    let doc = ReconstructionJson::from_result(&result, phases);
    emit(args.out.as_deref(), &io::to_json_string(&doc)?)?;
    if args.strict && !result.converged {
        return Err(CliError {
            code: 5,
            msg: "reconstruction did not converge".into(),
        });
    }
    Ok(())
}

enum Loaded {
    Matrix(TransferMatrix),
    Visibility(VisibilityMatrix),
}

fn load_any(rec: &mut Recorder, path: &Path) -> CliResult<Loaded> {
    let text = rec.input(path)?;
    let value: Value = serde_json::from_str(&text).map_err(Error::from)?;
    if value.get("vals").is_some() {
        let v: VisibilityJson = serde_json::from_value(value).map_err(Error::from)?;
        Ok(Loaded::Visibility(v.to_matrix()?))
    } else {
        Ok(Loaded::Matrix(io::parse_matrix(&text)?))
    }
}

fn compare(args: &CompareArgs, rec: &mut Recorder) -> CliResult<()> {
    let a = load_any(rec, &args.a)?;
    let b = load_any(rec, &args.b)?;
    rec.param("metric", format!("{:?}", args.metric).to_lowercase());
    rec.param("gauge_aware", args.gauge_aware);
    let mut metrics = serde_json::Map::new();
    let want_fid = args.metric != Metric::Similarity;
    let want_sim = args.metric != Metric::Fidelity;

    match (&a, &b) {
        (Loaded::Matrix(a), Loaded::Matrix(b)) => {
            if want_fid {
                if args.gauge_aware {
                    let (f, conj) = compare_up_to_gauge(a, b)?;
                    metrics.insert("fidelity".into(), f.into());
                    metrics.insert("conjugated".into(), conj.into());
                } else {
                    metrics.insert("fidelity".into(), fidelity(a, b)?.into());
                }
            }
            if want_sim {
                let s = similarity(&visibility_matrix(a)?, &visibility_matrix(b)?);
                metrics.insert("similarity".into(), s.into());
            }
        }
        _ => {
            let vis = |l: &Loaded| -> CliResult<VisibilityMatrix> {
                match l {
                    Loaded::Matrix(m) => Ok(visibility_matrix(m)?),
                    Loaded::Visibility(v) => Ok(v.clone()),
                }
            };
            if args.metric == Metric::Fidelity {
                return Err(CliError::usage("fidelity needs two transfer matrices"));
            }
            metrics.insert("similarity".into(), similarity(&vis(&a)?, &vis(&b)?).into());
        }
    }
    for (k, v) in &metrics {
        eprintln!("{k}: {v}");
        rec.metric(k, v);
    }
    emit(args.out.as_deref(), &io::to_json_string(&metrics)?)
}

fn fringe_cmd(args: &FringeArgs, rec: &mut Recorder) -> CliResult<()> {
    if args.points == 0 {
        return Err(CliError::usage("--points must be >= 1"));
    }
    if !(args.range.is_finite() && args.range >= 0.0) {
        return Err(CliError::usage("--range must be >= 0"));
    }
    let u = load_matrix(rec, &args.matrix)?;
    let sigma = args
        .sigma
        .unwrap_or_else(|| FringeModel::sigma_from_fwhm(COHERENCE_LENGTH_UM));
    let fm = FringeModel::new(sigma, args.rate)?;
    let delays: Vec<f64> = if args.points == 1 {
        vec![0.0]
    } else {
        let step = 2.0 * args.range / (args.points - 1) as f64;
        (0..args.points)
            .map(|n| -args.range + step * n as f64)
            .collect()
    };
    let (inp, outp) = args.pair;
    let points = fringe(&u, inp.lo, inp.hi, outp.lo, outp.hi, &delays, &fm)?;
    let counts = multiport::interference::sample_fringe_counts(&points, args.seed);
    rec.seed(args.seed);
    rec.param("pair", format!("{}:{}", inp.label(), outp.label()));
    rec.param("sigma_um", sigma);
    rec.param("rate", args.rate);
    rec.param("points", args.points);
    rec.param("range_um", args.range);
    emit(args.out.as_deref(), &io::fringe_csv(&points, &counts))
}

fn synth(args: &SynthArgs, rec: &mut Recorder) -> CliResult<()> {
    let u = load_matrix(rec, &args.matrix)?;
    let table = synth_counts(&u, args.totals, args.seed, args.poisson)?;
    rec.seed(args.seed);
    rec.param("totals", args.totals);
    rec.param("poisson", args.poisson);
    emit(
        args.out.as_deref(),
        &io::to_json_string(&CountTableJson::from_table(&table))?,
    )?;
    if let Some(p) = &args.vis_out {
        io::write_visibility(p, &table.visibility_matrix()?)?;
    }
    if let Some(p) = &args.amp_out {
        io::write_amplitude(p, &normalize_counts(&table)?)?;
    }
    Ok(())
}

fn fixtures_cmd(cmd: &FixturesCommand, rec: &mut Recorder) -> CliResult<()> {
    match cmd {
        FixturesCommand::List => {
            for f in fixtures::FILES {
                println!("{:<8} {:<12} {}", f.name, f.file, f.description);
            }
        }
        FixturesCommand::Export { dir } => {
            let written = fixtures::export(dir)?;
            for p in &written {
                println!("{p}");
            }
            rec.metric("written", written);
        }
    }
    Ok(())
}

fn run(cli: &Cli, rec: &mut Recorder) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(a, rec),
        Command::Visibility(a) => visibility(a, rec),
        Command::Reconstruct(a) => reconstruct(a, rec),
        Command::Compare(a) => compare(a, rec),
        Command::Fringe(a) => fringe_cmd(a, rec),
        Command::Synth(a) => synth(a, rec),
        Command::Fixtures(c) => fixtures_cmd(c, rec),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut rec = Recorder::new(std::env::args().collect());
    let outcome = run(&cli, &mut rec);
    // the report is written even when the command fails
    let written = rec.finish(cli.report.as_deref()).map_err(CliError::from);
    match outcome.and(written) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}
