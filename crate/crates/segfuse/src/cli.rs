//! The `segfuse` command line.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segfuse_core::kmeans::{band_ensemble_with, segment_with};
use segfuse_core::{
    fuse, ConstraintSet, Ensemble, FusionConfig, FusionMode, FusionOutcome, KMeansConfig, LambdaRule, Segmentation,
    WeightVector,
};

use crate::config::expand_config;
use crate::error::{read_text, write_file, Error, Result};
use crate::harness::{self, RunSettings, BETA_GRID, CLASS_GRID};
use crate::raster::read_manifest;
use crate::{
    constraints_from_ground_truth, generate_synthetic, read_constraints, read_image, read_label_map, write_constraints,
    write_image, write_label_map, DatasetSplit, SplitSpec, SynthSpec,
};

#[derive(Debug, Parser)]
#[command(name = "segfuse", version, about = "Segmentation ensembles and their fusion")]
pub struct Cli {
    /// More log output on standard error; repeat for more.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run k-means on an image, one member per band or one on all bands.
    #[command(args_override_self = true)]
    Segment(SegmentArgs),
    /// Fuse member label maps into one consensus map.
    #[command(args_override_self = true)]
    Fuse(FuseArgs),
    /// Score label maps against a ground truth (RI, ARI, AMI).
    #[command(args_override_self = true)]
    Evaluate(EvaluateArgs),
    /// Grid search over label budgets and decay values on training data.
    #[command(args_override_self = true)]
    ParamSearch(ParamSearchArgs),
    /// Generate a synthetic multi-band image with ground truth.
    #[command(args_override_self = true)]
    Synth(SynthArgs),
    /// Sample must-link and cannot-link pairs from a ground truth.
    #[command(args_override_self = true)]
    Constraints(ConstraintsArgs),
    /// Train/test run: learn weights on one part, apply them to the other.
    #[command(args_override_self = true)]
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Usf,
    Sssf,
}

impl From<Mode> for FusionMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Usf => FusionMode::Usf,
            Mode::Sssf => FusionMode::Sssf,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct KMeansArgs {
    /// Lloyd iterations per k-means run.
    #[arg(long, default_value_t = 100)]
    pub kmeans_iter: usize,
    /// k-means seedings per member; the lowest-inertia run is kept.
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    /// Standardise bands before clustering.
    #[arg(long)]
    pub zscore: bool,
}

#[derive(Debug, Clone, Args)]
pub struct FusionArgs {
    /// Decay of stale member terms, in [0, 1].
    #[arg(long, default_value_t = 0.9)]
    pub beta: f64,
    /// Outer iteration budget.
    #[arg(long = "T", visible_alias = "iterations", default_value_t = 1000)]
    pub t: usize,
    /// `auto` (half the largest member distance) or a fixed L1 weight.
    #[arg(long, default_value = "auto", value_parser = parse_lambda)]
    pub lambda: LambdaRule,
    /// With `--lambda auto`, use half of this value instead.
    #[arg(long)]
    pub lambda_max: Option<f64>,
}

impl FusionArgs {
    fn lambda_rule(&self) -> LambdaRule {
        match (self.lambda, self.lambda_max) {
            (LambdaRule::Auto, Some(max)) => LambdaRule::HalfOf(max),
            (rule, _) => rule,
        }
    }

    fn config(&self, mode: Mode, seed: u64) -> FusionConfig {
        FusionConfig {
            mode: mode.into(),
            beta: self.beta,
            max_iter: self.t,
            seed,
            lambda: self.lambda_rule(),
            ..FusionConfig::default()
        }
    }
}

fn parse_lambda(s: &str) -> std::result::Result<LambdaRule, String> {
    if s == "auto" {
        return Ok(LambdaRule::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(LambdaRule::Fixed(v)),
        _ => Err(format!("expected `auto` or a non-negative number, got {s:?}")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct SegmentArgs {
    /// Image manifest.
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub k: usize,
    /// One member per band instead of one on the stacked bands.
    #[arg(long)]
    pub per_band: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub kmeans: KMeansArgs,
    /// Receives `member_XX.pgm`, `members.txt` and `provenance.csv`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct FuseArgs {
    #[arg(long, value_enum, default_value_t = Mode::Usf)]
    pub mode: Mode,
    /// Member label maps.
    #[arg(long, num_args = 1.., required_unless_present = "member_list")]
    pub members: Vec<PathBuf>,
    /// Text file listing member label maps, one per line.
    #[arg(long, conflicts_with = "members")]
    pub member_list: Option<PathBuf>,
    /// Must-link / cannot-link file (semi-supervised mode).
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    /// Consensus label budget; defaults to the largest member label count.
    #[arg(long)]
    pub classes: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub fusion: FusionArgs,
    /// Starting weights, a weights CSV as written by this command.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Keep the starting weights fixed instead of learning them.
    #[arg(long)]
    pub frozen: bool,
    /// Consensus label map (`.pgm` or `.csv`).
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to `<out stem>.weights.csv` (semi-supervised mode only).
    #[arg(long)]
    pub weights_out: Option<PathBuf>,
    /// Defaults to `<out stem>.log.csv`.
    #[arg(long)]
    pub log_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Ground-truth label map.
    #[arg(long)]
    pub truth: PathBuf,
    /// Label maps to score; each becomes a column.
    #[arg(long, num_args = 1.., required = true)]
    pub outputs: Vec<PathBuf>,
    /// Column names; file stems by default.
    #[arg(long, num_args = 1..)]
    pub names: Vec<String>,
    /// Write the table here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ParamSearchArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Semi-supervised runs sample their constraints from `--truth`, and
    /// constraint repair may exceed the label budget.
    #[arg(long, value_enum, default_value_t = Mode::Usf)]
    pub mode: Mode,
    /// Candidate label budgets; 2 to 10 by default.
    #[arg(long, num_args = 1..)]
    pub classes: Vec<usize>,
    /// Candidate decay values; 0.1 to 0.9 and 0.99 by default.
    #[arg(long, num_args = 1..)]
    pub betas: Vec<f64>,
    #[arg(long = "T", visible_alias = "iterations", default_value_t = 1000)]
    pub t: usize,
    /// Fraction of all pixel pairs sampled as constraints.
    #[arg(long, default_value_t = 0.05)]
    pub constraint_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; the report does not depend on this.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub kmeans: KMeansArgs,
    /// Full grid as CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 6)]
    pub classes: usize,
    #[arg(long, default_value_t = 7)]
    pub bands: usize,
    /// Standard deviation of the additive noise.
    #[arg(long, default_value_t = 30.0)]
    pub sigma: f64,
    /// Range of the gap between neighbouring class means, in noise units.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [3.0, 6.0])]
    pub separation: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Receives the band graymaps, `manifest.txt` and `truth.pgm`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ConstraintsArgs {
    #[arg(long)]
    pub truth: PathBuf,
    /// Fraction of all pixel pairs to sample.
    #[arg(long, default_value_t = 0.05)]
    pub fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// k for the members and the consensus label budget.
    #[arg(long)]
    pub classes: usize,
    /// Training rows as `start:end`; top half by default.
    #[arg(long, requires = "test_rows", conflicts_with = "mask")]
    pub train_rows: Option<String>,
    #[arg(long, requires = "train_rows")]
    pub test_rows: Option<String>,
    /// Label map whose non-zero pixels train and zero pixels test.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub constraint_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub fusion: FusionArgs,
    #[command(flatten)]
    pub kmeans: KMeansArgs,
    /// Receives `report.csv`, `weights.csv` and the test outputs.
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Parses `argv` (config files expanded), runs the command and maps the
/// outcome to an exit code.
pub fn main_with(argv: Vec<OsString>) -> ExitCode {
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => return fail(&e),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "error",
        (false, 0) => "warn",
        (false, 1) => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("segfuse: {e}");
    ExitCode::from(e.exit_code() as u8)
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Segment(a) => segment(&a),
        Command::Fuse(a) => fuse_cmd(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::ParamSearch(a) => param_search(&a),
        Command::Synth(a) => synth(&a),
        Command::Constraints(a) => constraints(&a),
        Command::Experiment(a) => experiment(&a),
    }
}

fn kmeans_config(k: usize, seed: u64, a: &KMeansArgs) -> KMeansConfig {
    KMeansConfig { k, seed, max_iter: a.kmeans_iter, zscore: a.zscore, restarts: a.restarts }
}

fn run_settings(fusion: FusionConfig, kmeans: &KMeansArgs, constraint_fraction: f64) -> RunSettings {
    RunSettings {
        fusion,
        kmeans_max_iter: kmeans.kmeans_iter,
        kmeans_restarts: kmeans.restarts,
        zscore: kmeans.zscore,
        constraint_fraction,
    }
}

fn segment(a: &SegmentArgs) -> Result<()> {
    let img = read_image(&a.image)?;
    let ens = if a.per_band {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        let seeds: Vec<u64> = (0..img.num_bands()).map(|_| rng.gen()).collect();
        band_ensemble_with(&img, &kmeans_config(a.k, 0, &a.kmeans), &seeds)?
    } else {
        let cfg = kmeans_config(a.k, a.seed, &a.kmeans);
        let desc = format!(
            "kmeans bands=all k={} seed={} max_iter={} restarts={} zscore={}",
            a.k, a.seed, cfg.max_iter, cfg.restarts, cfg.zscore
        );
        Ensemble::new(vec![segment_with(&img, &cfg)?], vec![desc])?
    };
    let mut list = String::new();
    let mut provenance = String::from("file,description\n");
    for (i, (m, desc)) in ens.members().iter().zip(ens.provenance()).enumerate() {
        let name = format!("member_{i:02}.pgm");
        write_label_map(&a.out_dir.join(&name), m, None)?;
        writeln!(list, "{name}").expect("writing to a string");
        writeln!(provenance, "{name},{desc}").expect("writing to a string");
    }
    write_file(&a.out_dir.join("members.txt"), list.as_bytes())?;
    write_file(&a.out_dir.join("provenance.csv"), provenance.as_bytes())?;
    info!("wrote {} members to {}", ens.len(), a.out_dir.display());
    Ok(())
}

/// `dir/stem.pgm` with `suffix` in place of the extension.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}{suffix}"))
}

/// The `weight` column of a weights CSV.
fn read_weights(path: &Path) -> Result<WeightVector> {
    let text = read_text(path)?;
    let mut w = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let v = line
            .split(',')
            .nth(1)
            .and_then(|f| f.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::parse(path, i + 1, "expected `member,weight[,sparse]`"))?;
        w.push(v);
    }
    Ok(WeightVector::new(w)?)
}

fn log_csv(out: &FusionOutcome) -> String {
    let mut s = String::from("t,member,objective,best_entry,pixel,from,to\n");
    for r in &out.log {
        write!(s, "{},{},{},{}", r.t, r.member, r.objective, r.best_entry).expect("writing to a string");
        match &r.accepted {
            Some(m) => writeln!(s, ",{},{},{}", m.pixel, m.from, m.to),
            None => writeln!(s, ",,,"),
        }
        .expect("writing to a string");
    }
    s
}

fn fuse_cmd(a: &FuseArgs) -> Result<()> {
    let paths = match &a.member_list {
        Some(list) => read_manifest(list)?,
        None => a.members.clone(),
    };
    let members = paths.iter().map(|p| read_label_map(p).map(|(s, _)| s)).collect::<Result<Vec<Segmentation>>>()?;
    let provenance = paths.iter().map(|p| p.display().to_string()).collect();
    let ens = Ensemble::new(members, provenance)?;
    let cons = match (&a.constraints, a.mode) {
        (Some(p), Mode::Sssf) => read_constraints(p)?,
        (Some(_), Mode::Usf) => return Err(Error::Usage("--constraints needs --mode sssf".into())),
        (None, _) => ConstraintSet::empty(),
    };
    let mut cfg = a.fusion.config(a.mode, a.seed);
    cfg.label_budget = a.classes;
    cfg.learn_weights = !a.frozen;
    cfg.initial_weights = a.weights.as_deref().map(read_weights).transpose()?;
    let out = fuse(&ens, &cons, &cfg)?;
    info!(
        "{} steps, {} moves accepted, early stop: {}, repaired pixels: {}",
        out.log.len(),
        out.accepted_moves(),
        out.terminated_early,
        out.repaired_pixels
    );
    if out.solver_warnings > 0 {
        log::warn!("{} weight solves hit the iteration cap", out.solver_warnings);
    }
    write_label_map(&a.out, &out.segmentation, None)?;
    let log_path = a.log_out.clone().unwrap_or_else(|| sibling(&a.out, ".log.csv"));
    write_file(&log_path, log_csv(&out).as_bytes())?;
    if a.mode == Mode::Sssf {
        let path = a.weights_out.clone().unwrap_or_else(|| sibling(&a.out, ".weights.csv"));
        write_file(&path, harness::weights_csv(&out.weights, &out.sparse_weights).as_bytes())?;
    }
    Ok(())
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    if !a.names.is_empty() && a.names.len() != a.outputs.len() {
        return Err(Error::Usage(format!("{} names for {} outputs", a.names.len(), a.outputs.len())));
    }
    let (truth, _) = read_label_map(&a.truth)?;
    let mut outputs = Vec::with_capacity(a.outputs.len());
    for (i, p) in a.outputs.iter().enumerate() {
        let (s, _) = read_label_map(p)?;
        if !s.same_grid(&truth) {
            return Err(Error::format(
                p,
                format!("{}x{} map against a {}x{} truth", s.width(), s.height(), truth.width(), truth.height()),
            ));
        }
        let name = match a.names.get(i) {
            Some(n) => n.clone(),
            None => p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned()),
        };
        outputs.push((name, s));
    }
    let table = harness::evaluate(&outputs, &truth)?.to_csv();
    match &a.out {
        Some(p) => write_file(p, table.as_bytes()),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}

fn param_search(a: &ParamSearchArgs) -> Result<()> {
    let img = read_image(&a.image)?;
    let (truth, _) = read_label_map(&a.truth)?;
    let classes = if a.classes.is_empty() { CLASS_GRID.to_vec() } else { a.classes.clone() };
    let betas = if a.betas.is_empty() { BETA_GRID.to_vec() } else { a.betas.clone() };
    let fusion = FusionConfig { mode: a.mode.into(), max_iter: a.t, ..FusionConfig::default() };
    let settings = run_settings(fusion, &a.kmeans, a.constraint_fraction);
    let report = harness::param_search(&img, &truth, &classes, &betas, &settings, a.seed, a.jobs)?;
    write_file(&a.out, report.to_csv().as_bytes())?;
    let b = report.best;
    println!("classes,beta,ri,ari,ami");
    println!("{},{},{},{},{}", b.classes, b.beta, b.scores.ri, b.scores.ari, b.scores.ami);
    Ok(())
}

fn synth(a: &SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        separation: (a.separation[0], a.separation[1]),
        ..SynthSpec::new(a.width, a.height, a.classes, a.bands, a.sigma, a.seed)
    };
    let (img, truth) = generate_synthetic(&spec)?;
    let manifest = write_image(&a.out_dir, &img)?;
    write_label_map(&a.out_dir.join("truth.pgm"), &truth, None)?;
    info!("wrote {}", manifest.display());
    Ok(())
}

fn constraints(a: &ConstraintsArgs) -> Result<()> {
    let (truth, _) = read_label_map(&a.truth)?;
    let cons = constraints_from_ground_truth(&truth, a.fraction, a.seed)?;
    info!("{} must-link and {} cannot-link pairs", cons.declared_must_link().len(), cons.cannot_link().len());
    write_constraints(&a.out, &cons)
}

fn experiment(a: &ExperimentArgs) -> Result<()> {
    let img = read_image(&a.image)?;
    let (truth, _) = read_label_map(&a.truth)?;
    let spec = match (&a.train_rows, &a.test_rows, &a.mask) {
        (Some(tr), Some(te), None) => {
            SplitSpec::Rows { train: SplitSpec::parse_rows(tr)?, test: SplitSpec::parse_rows(te)? }
        }
        (None, None, Some(m)) => SplitSpec::read_mask(m)?,
        _ => SplitSpec::halves(img.height()),
    };
    info!("{}", spec.describe());
    let split = DatasetSplit::new(&img, &truth, spec)?;
    let settings = run_settings(a.fusion.config(Mode::Sssf, 0), &a.kmeans, a.constraint_fraction);
    let report = harness::run_protocol(&split, a.classes, &settings, a.seed)?;
    info!("{} must-link and {} cannot-link pairs, lambda {}", report.must_link, report.cannot_link, report.lambda);
    let csv = report.to_csv();
    write_file(&a.out_dir.join("report.csv"), csv.as_bytes())?;
    write_file(&a.out_dir.join("weights.csv"), report.weights_csv().as_bytes())?;
    write_label_map(&a.out_dir.join("test_usf.pgm"), &report.test.usf_output, None)?;
    write_label_map(&a.out_dir.join("test_sssf.pgm"), &report.test.sssf_output, None)?;
    print!("{csv}");
    Ok(())
}
