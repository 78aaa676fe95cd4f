//! Subcommands behind the `betagan` binary. Each one is a plain function so
//! tests can drive runs without spawning processes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{sidecar_path, DataSidecar, DataSource, ExperimentConfig, MAX_SAMPLE_DUMP};
use crate::diagnostics::{
    self, ModeCoverageReport, UniformityReport, WireframeReport, COVERAGE_RADIUS_SIGMAS, COVERAGE_THRESHOLD,
    WIREFRAME_TOLERANCE_NOISES,
};
use crate::error::{Error, Result};
use crate::nn::{build_mlp, LatentPrior, Mlp};
use crate::synth::{CubesSpec, MixtureSpec};
use crate::target::{read_points_csv, write_points_csv, AffineMap, Dataset, InverseTemperature};
use crate::tensor::Tensor;
use crate::trainer::{Mode, PretrainOutcome, Trainer, TrainingTrace};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_TRAINING: i32 = 4;

pub const TRACE_FILE: &str = "trace.csv";
pub const STAGES_FILE: &str = "stages.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const DATA_FILE: &str = "data.csv";

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } | Error::Parse { .. } => EXIT_IO,
        Error::TrainingFault { .. } => EXIT_TRAINING,
        _ => EXIT_CONFIG,
    }
}

#[derive(Parser, Debug)]
#[command(name = "betagan", version, about = "Annealed GAN training on toy datasets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic dataset and its sidecar spec.
    Synth(SynthArgs),
    /// Pretrain, anneal and finish one run (or a vanilla baseline).
    Train(TrainArgs),
    /// Score a sample file against a dataset sidecar.
    Eval(EvalArgs),
    /// Train several seeds, each in its own subdirectory.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
pub struct RunFlags {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// mog5, mog10 or cubes; overrides the config source.
    #[arg(long)]
    pub source: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV; the sidecar goes next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Generated samples, one point per row.
    #[arg(long)]
    pub samples: PathBuf,
    /// Dataset sidecar (`*.spec.toml`).
    #[arg(long)]
    pub spec: PathBuf,
    /// Report path; a per-mode CSV is written beside it.
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunFlags,
    /// Seeds as `a..b` (exclusive) or a comma list.
    #[arg(long, default_value = "0..10")]
    pub seeds: String,
    /// Concurrent runs.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("cannot read seed list `{s}`"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a >= b {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => {
            let mut cfg = load_config(a.config.as_deref())?;
            if let Some(src) = &a.source {
                cfg.data.source = synthetic_source(src)?;
            }
            let n = a.n.unwrap_or(cfg.data.n);
            let seed = a.seed.unwrap_or(cfg.data.seed);
            cmd_synth(&cfg.data.source, n, seed, &a.out)?;
            log::info!("wrote {n} points to {}", a.out.display());
        }
        Command::Train(a) => {
            let cfg = resolve(&a.run)?;
            let s = cmd_train(&cfg)?;
            log::info!("run finished: tau {} in {}", s.tau, cfg.out_dir.display());
        }
        Command::Eval(a) => {
            let r = cmd_eval(&a.samples, &a.spec, &a.report)?;
            print!("{}", r.to_text());
        }
        Command::Sweep(a) => {
            let cfg = resolve(&a.run)?;
            let seeds = parse_seeds(&a.seeds)?;
            cmd_sweep(&cfg, &seeds, a.jobs)?;
        }
    }
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::from_file(p),
        None => ExperimentConfig::parse(""),
    }
}

fn resolve(flags: &RunFlags) -> Result<ExperimentConfig> {
    let mut cfg = load_config(flags.config.as_deref())?;
    if let Some(seed) = flags.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &flags.out {
        cfg.out_dir = out.clone();
    }
    if let Some(mode) = flags.mode {
        cfg.set_mode(mode);
    }
    Ok(cfg)
}

fn synthetic_source(name: &str) -> Result<DataSource> {
    match name {
        "mog5" => Ok(DataSource::Mixture(MixtureSpec::mog5())),
        "mog10" => Ok(DataSource::Mixture(MixtureSpec::mog10())),
        "cubes" => Ok(DataSource::Cubes(CubesSpec::default())),
        other => Err(Error::Config(format!("unknown synthetic source `{other}`"))),
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Sample `n` raw points and write them with a sidecar describing the source.
pub fn cmd_synth(source: &DataSource, n: usize, seed: u64, out: &Path) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("synth needs at least one point".into()));
    }
    let points = source.sample(n, seed)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_points_csv(out, &points)?;
    let side = DataSidecar {
        source: source.clone(),
        domain: crate::target::BoxDomain::symmetric(source.dim())?,
        transform: AffineMap::identity(source.dim()),
    };
    side.save(&sidecar_path(out))
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub pretrain: Option<PretrainOutcome>,
    pub tau: u64,
    pub trace_path: PathBuf,
    /// Sample dumps in stage order, in raw data coordinates.
    pub sample_files: Vec<PathBuf>,
}

/// Run one experiment into `cfg.out_dir`: manifest, data, trace, stage
/// boundaries, per-stage checkpoints and sample dumps. A training fault
/// still leaves the partial trace on disk.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let out = &cfg.out_dir;
    create_dir(out)?;
    create_dir(&out.join("samples"))?;
    create_dir(&out.join("checkpoints"))?;
    write_text(&out.join(MANIFEST_FILE), &cfg.to_manifest())?;

    let data = cfg.load_dataset()?;
    write_points_csv(&out.join(DATA_FILE), &data.transform().inverse_rows(data.points()))?;
    DataSidecar {
        source: cfg.data.source.clone(),
        domain: *data.domain(),
        transform: data.transform().clone(),
    }
    .save(&sidecar_path(&out.join(DATA_FILE)))?;

    let mut g = build_mlp(cfg.generator.clone(), cfg.generator_seed())?;
    let mut d = build_mlp(cfg.discriminator.clone(), cfg.discriminator_seed())?;
    let prior = LatentPrior::new(cfg.generator.input_dim)?;
    let mut trainer = Trainer::new(cfg.trainer.clone(), prior)?;
    let mut dumper = Dumper {
        dir: out.clone(),
        rng: ChaCha8Rng::seed_from_u64(cfg.seed() ^ 0x5eed_d0e5),
        prior,
        rows: cfg.sample_dump.min(MAX_SAMPLE_DUMP),
        transform: data.transform().clone(),
        files: Vec::new(),
    };

    let result = train_inner(cfg, &mut trainer, &mut g, &mut d, &data, &mut dumper);
    let trace_path = out.join(TRACE_FILE);
    match result {
        Ok(pretrain) => {
            write_trace(out, trainer.trace())?;
            Ok(TrainSummary {
                pretrain,
                tau: trainer.tau(),
                trace_path,
                sample_files: dumper.files,
            })
        }
        Err(Error::TrainingFault { message, trace }) => {
            if let Some(t) = &trace {
                write_trace(out, t)?;
            }
            Err(Error::TrainingFault { message, trace })
        }
        Err(e) => Err(e),
    }
}

fn train_inner(
    cfg: &ExperimentConfig,
    trainer: &mut Trainer,
    g: &mut Mlp,
    d: &mut Mlp,
    data: &Dataset,
    dumper: &mut Dumper,
) -> Result<Option<PretrainOutcome>> {
    match cfg.trainer.mode {
        Mode::BetaGan => {
            let schedule = cfg.schedule()?;
            let outcome = trainer.pretrain_uniform(g, d, data.domain())?;
            if !outcome.passed {
                log::warn!(
                    "pretraining stopped at its budget of {} steps without meeting the uniformity criteria",
                    outcome.steps
                );
            }
            dumper.stage(0, InverseTemperature::Uniform, g, d)?;
            trainer.run_annealed(g, d, data, &schedule, &mut |end, g, d| {
                dumper.stage(end.boundary.stage, end.boundary.beta, g, d)
            })?;
            Ok(Some(outcome))
        }
        Mode::Vanilla => {
            trainer.run_vanilla(g, d, data, cfg.vanilla_budget())?;
            dumper.stage(1, InverseTemperature::Infinity, g, d)?;
            Ok(None)
        }
    }
}

fn write_trace(out: &Path, trace: &TrainingTrace) -> Result<()> {
    trace.write_csv(&out.join(TRACE_FILE))?;
    let mut s = String::from("stage,beta,end_step,tau\n");
    for b in trace.boundaries() {
        let _ = writeln!(s, "{},{},{},{}", b.stage, b.beta, b.end_step, b.tau);
    }
    write_text(&out.join(STAGES_FILE), &s)
}

struct Dumper {
    dir: PathBuf,
    rng: ChaCha8Rng,
    prior: LatentPrior,
    rows: usize,
    transform: AffineMap,
    files: Vec<PathBuf>,
}

impl Dumper {
    fn stage(&mut self, stage: usize, beta: InverseTemperature, g: &Mlp, d: &Mlp) -> Result<()> {
        let tag = format!("stage_{stage:02}_beta_{beta}");
        g.save_checkpoint(&self.dir.join("checkpoints").join(format!("{tag}.g")))?;
        d.save_checkpoint(&self.dir.join("checkpoints").join(format!("{tag}.d")))?;
        let z = self.prior.sample(self.rows, &mut self.rng);
        let x = self.transform.inverse_rows(&g.forward(&z)?);
        let path = self.dir.join("samples").join(format!("{tag}.csv"));
        write_points_csv(&path, &x)?;
        self.files.push(path);
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct EvalReport {
    pub samples: usize,
    pub coverage: Option<ModeCoverageReport>,
    pub wireframe: Option<WireframeReport>,
    pub uniformity: Option<UniformityReport>,
    pub frozen_noise: f64,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "samples = {}", self.samples);
        if let Some(c) = &self.coverage {
            let _ = writeln!(s, "modes_covered = {}", c.covered_count);
            let _ = writeln!(s, "modes_total = {}", c.total_modes);
            let _ = writeln!(s, "coverage_threshold = {}", c.threshold);
            let _ = writeln!(s, "unassigned_fraction = {}", c.unassigned_fraction());
        }
        if let Some(w) = &self.wireframe {
            let _ = writeln!(s, "wireframe_tolerance = {}", w.tolerance);
            let _ = writeln!(s, "wireframe_near_fraction = {}", w.near_fraction);
            let _ = writeln!(s, "outer_cube_fraction = {}", w.cube_fractions[0]);
            let _ = writeln!(s, "inner_cube_fraction = {}", w.cube_fractions[1]);
        }
        if let Some(u) = &self.uniformity {
            let ks: Vec<String> = u.ks.iter().map(|k| k.to_string()).collect();
            let _ = writeln!(s, "ks = [{}]", ks.join(", "));
            let _ = writeln!(s, "max_abs_correlation = {}", u.max_abs_correlation);
        }
        let _ = writeln!(s, "frozen_noise_score = {}", self.frozen_noise);
        s
    }
}

/// Score raw-coordinate samples against a dataset sidecar. Coverage and
/// wireframe distance are measured in raw coordinates; uniformity and the
/// frozen-noise score in the box.
pub fn cmd_eval(samples_path: &Path, spec_path: &Path, report_path: &Path) -> Result<EvalReport> {
    let side = DataSidecar::load(spec_path)?;
    let raw = read_points_csv(samples_path)?;
    let dim = side.source.dim();
    if raw.cols() != dim {
        return Err(Error::dim("sample columns", &[raw.cols()], &[dim]));
    }
    let boxed = forward_rows(&side.transform, &raw);

    let mut per_mode = None;
    let coverage = match &side.source {
        DataSource::Mixture(m) => {
            let r = diagnostics::mode_coverage(&raw, &m.centers, COVERAGE_RADIUS_SIGMAS * m.sigma, COVERAGE_THRESHOLD)?;
            per_mode = Some((m.centers.clone(), r.fractions.clone()));
            Some(r)
        }
        _ => None,
    };
    let wireframe = match &side.source {
        DataSource::Cubes(c) => Some(diagnostics::wireframe_report(
            &raw,
            c,
            WIREFRAME_TOLERANCE_NOISES * c.edge_noise,
        )?),
        _ => None,
    };
    let uniformity = if boxed.rows() >= 100 {
        Some(diagnostics::uniformity_score(&boxed, &side.domain)?)
    } else {
        None
    };
    let frozen_noise = diagnostics::frozen_noise_score(&boxed, &side.domain)?;
    let report = EvalReport {
        samples: raw.rows(),
        coverage,
        wireframe,
        uniformity,
        frozen_noise,
    };

    if let Some(dir) = report_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_text(report_path, &report.to_text())?;
    if let Some((centers, fractions)) = per_mode {
        let mut s = String::from("mode,");
        s += &(0..dim).map(|j| format!("c{j}")).collect::<Vec<_>>().join(",");
        s += ",fraction,covered\n";
        for (i, (c, f)) in centers.iter().zip(&fractions).enumerate() {
            let cs: Vec<String> = c.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{i},{},{f},{}", cs.join(","), *f >= COVERAGE_THRESHOLD);
        }
        write_text(&report_path.with_extension("modes.csv"), &s)?;
    }
    Ok(report)
}

fn forward_rows(map: &AffineMap, raw: &Tensor) -> Tensor {
    let data = raw.row_iter().flat_map(|r| map.forward(r)).collect();
    Tensor::matrix(raw.rows(), raw.cols(), data).expect("shape preserved")
}

/// One run per seed under `out/seed_<s>`, `jobs` at a time, then a
/// `sweep.csv` summary.
pub fn cmd_sweep(cfg: &ExperimentConfig, seeds: &[u64], jobs: usize) -> Result<Vec<TrainSummary>> {
    if seeds.is_empty() || jobs == 0 {
        return Err(Error::Config("sweep needs at least one seed and one job".into()));
    }
    create_dir(&cfg.out_dir)?;
    let configs: Vec<ExperimentConfig> = seeds
        .iter()
        .map(|&s| {
            let mut c = cfg.clone();
            c.set_seed(s);
            c.out_dir = cfg.out_dir.join(format!("seed_{s}"));
            c
        })
        .collect();
    let mut results: Vec<Option<Result<TrainSummary>>> = (0..configs.len()).map(|_| None).collect();
    for (chunk_cfgs, chunk_out) in configs.chunks(jobs).zip(results.chunks_mut(jobs)) {
        std::thread::scope(|scope| {
            let handles: Vec<_> = chunk_cfgs.iter().map(|c| scope.spawn(move || cmd_train(c))).collect();
            for (slot, h) in chunk_out.iter_mut().zip(handles) {
                *slot = Some(h.join().unwrap_or_else(|_| Err(Error::Contract("sweep worker panicked".into()))));
            }
        });
    }

    let mut summaries = Vec::new();
    let mut csv = String::from("seed,tau,pretrain_steps,pretrain_passed,status\n");
    let mut first_err = None;
    for (seed, r) in seeds.iter().zip(results) {
        match r.expect("every seed ran") {
            Ok(s) => {
                let (steps, passed) = s
                    .pretrain
                    .as_ref()
                    .map(|p| (p.steps.to_string(), p.passed.to_string()))
                    .unwrap_or_default();
                let _ = writeln!(csv, "{seed},{},{steps},{passed},ok", s.tau);
                summaries.push(s);
            }
            Err(e) => {
                log::error!("seed {seed}: {e}");
                let _ = writeln!(csv, "{seed},,,,failed");
                first_err.get_or_insert(e);
            }
        }
    }
    write_text(&cfg.out_dir.join("sweep.csv"), &csv)?;
    match first_err {
        Some(e) => Err(e),
        None => Ok(summaries),
    }
}
