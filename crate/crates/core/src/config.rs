//! Experiment configuration: flat `section.key = value` files, the resolved
//! manifest written next to every run, and the dataset sidecar.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use toml::Value;

use crate::error::{Error, Result};
use crate::nn::{LatentPrior, MlpSpec, Role};
use crate::schedule::AnnealingSchedule;
use crate::synth::{sample_mog, sample_nested_cubes, CubesSpec, MixtureSpec};
use crate::target::{rescale_dataset, AffineMap, BoxDomain, Dataset};
use crate::trainer::{Mode, TrainerConfig, UniformityCriteria};

pub const DEFAULT_DISCRIMINATOR: &str = "tanh:128,tanh:128,tanh:128,sigmoid:1";
pub const MAX_SAMPLE_DUMP: usize = 10_000;

/// Where training data comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Mixture(MixtureSpec),
    Cubes(CubesSpec),
    Csv { path: PathBuf, dim: usize, rescale: bool },
}

impl DataSource {
    pub fn dim(&self) -> usize {
        match self {
            DataSource::Mixture(m) => m.dim(),
            DataSource::Cubes(_) => 3,
            DataSource::Csv { dim, .. } => *dim,
        }
    }

    pub fn is_synthetic(&self) -> bool {
        !matches!(self, DataSource::Csv { .. })
    }

    /// Draw `n` raw points from a synthetic source.
    pub fn sample(&self, n: usize, seed: u64) -> Result<crate::tensor::Tensor> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match self {
            DataSource::Mixture(m) => sample_mog(m, n, &mut rng),
            DataSource::Cubes(c) => sample_nested_cubes(c, n, &mut rng),
            DataSource::Csv { path, .. } => Err(Error::Contract(format!(
                "{} is a file source and cannot be sampled",
                path.display()
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub source: DataSource,
    /// Synthetic dataset size.
    pub n: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub domain: BoxDomain,
    pub generator: MlpSpec,
    pub discriminator: MlpSpec,
    generator_seed: Option<u64>,
    discriminator_seed: Option<u64>,
    pub beta_1: f64,
    pub beta_k: f64,
    pub stages: usize,
    pub trainer: TrainerConfig,
    pub out_dir: PathBuf,
    /// Iteration budget of a vanilla run; defaults to the full annealed budget.
    pub vanilla_iterations: Option<usize>,
    pub sample_dump: usize,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        if cfg.data.source_is_relative_csv() {
            if let (Some(dir), DataSource::Csv { path: p, .. }) = (path.parent(), &mut cfg.data.source) {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut keys = Keys::parse(text)?;
        let cfg = Self::from_keys(&mut keys)?;
        keys.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_keys(k: &mut Keys) -> Result<Self> {
        let seed = k.u64("seed")?.unwrap_or(0);
        let mode = match k.string("mode")? {
            Some(s) => s.parse()?,
            None => Mode::BetaGan,
        };
        let out_dir = PathBuf::from(k.string("out")?.unwrap_or_else(|| "runs/default".into()));
        let source = parse_source(k)?;
        let data = DataConfig {
            n: k.usize("data.n")?.unwrap_or(2000),
            seed: k.u64("data.seed")?.unwrap_or(7),
            source,
        };
        let domain = BoxDomain::new(
            k.f64("box.low")?.unwrap_or(-1.0),
            k.f64("box.high")?.unwrap_or(1.0),
            data.source.dim(),
        )?;
        let dim = domain.dim();

        let latent = k.usize("generator.latent_dim")?.unwrap_or(dim);
        let g_layers = k
            .string("generator.layers")?
            .unwrap_or_else(|| format!("relu:128,relu:128,linear:{dim}"));
        let mut generator = MlpSpec {
            input_dim: latent,
            layers: MlpSpec::parse_layers(&g_layers)?,
            role: Role::Generator,
            allow_smooth_hidden: false,
        };
        if k.bool("generator.allow_smooth_hidden")?.unwrap_or(false) {
            generator = generator.with_smooth_override();
        }
        let d_layers = k
            .string("discriminator.layers")?
            .unwrap_or_else(|| DEFAULT_DISCRIMINATOR.into());
        let discriminator = MlpSpec {
            input_dim: dim,
            layers: MlpSpec::parse_layers(&d_layers)?,
            role: Role::Discriminator,
            allow_smooth_hidden: false,
        };

        let base = TrainerConfig::default();
        let crit = UniformityCriteria::default();
        let final_steps = k.usize("train.final_steps")?;
        let mut trainer = TrainerConfig {
            batch_size: k.usize("train.batch_size")?.unwrap_or(base.batch_size),
            steps_per_stage: k.usize("train.steps_per_stage")?.unwrap_or(base.steps_per_stage),
            pretrain_steps: k.usize("train.pretrain_steps")?.unwrap_or(base.pretrain_steps),
            final_steps: 0,
            lr_d: k.f64("train.lr_d")?.unwrap_or(base.lr_d),
            lr_g: k.f64("train.lr_g")?.unwrap_or(base.lr_g),
            momentum: k.f64("train.momentum")?.unwrap_or(base.momentum),
            d_steps: k.usize("train.d_steps")?.unwrap_or(base.d_steps),
            g_steps: k.usize("train.g_steps")?.unwrap_or(base.g_steps),
            pretrain_check_every: k
                .usize("train.pretrain_check_every")?
                .unwrap_or(base.pretrain_check_every),
            criteria: UniformityCriteria {
                ks_limit: k.f64("criteria.ks_limit")?.unwrap_or(crit.ks_limit),
                correlation_limit: k.f64("criteria.correlation_limit")?.unwrap_or(crit.correlation_limit),
                frozen_noise_min: k.f64("criteria.frozen_noise_min")?.unwrap_or(crit.frozen_noise_min),
                samples: k.usize("criteria.samples")?.unwrap_or(crit.samples),
            },
            seed,
            mode,
        };
        // n_final falls back to n.
        trainer.final_steps = final_steps.unwrap_or(trainer.steps_per_stage);

        Ok(Self {
            data,
            domain,
            generator,
            discriminator,
            generator_seed: k.u64("generator.seed")?,
            discriminator_seed: k.u64("discriminator.seed")?,
            beta_1: k.f64("schedule.beta_1")?.unwrap_or(0.1),
            beta_k: k.f64("schedule.beta_k")?.unwrap_or(10.0),
            stages: k.usize("schedule.stages")?.unwrap_or(20),
            trainer,
            out_dir,
            vanilla_iterations: k.usize("vanilla.iterations")?,
            sample_dump: k.usize("output.sample_dump")?.unwrap_or(MAX_SAMPLE_DUMP),
        })
    }

    /// Cross-field checks: network specs, pairing with the box, schedule
    /// preconditions, trainer limits.
    pub fn validate(&self) -> Result<()> {
        self.trainer.validate()?;
        self.generator.validate()?;
        self.discriminator.validate()?;
        let prior = LatentPrior::new(self.generator.input_dim)?;
        if prior.dim < self.domain.dim() {
            return Err(Error::Constraint(format!(
                "latent dimension {} is smaller than the data dimension {}",
                prior.dim,
                self.domain.dim()
            )));
        }
        if self.generator.output_dim() != self.domain.dim() {
            return Err(Error::dim(
                "generator output vs box",
                &[self.generator.output_dim()],
                &[self.domain.dim()],
            ));
        }
        self.schedule()?;
        if self.data.n == 0 {
            return Err(Error::Config("data.n must be at least 1".into()));
        }
        if self.sample_dump == 0 || self.sample_dump > MAX_SAMPLE_DUMP {
            return Err(Error::Config(format!(
                "output.sample_dump must be in 1..={MAX_SAMPLE_DUMP}"
            )));
        }
        if self.vanilla_iterations == Some(0) {
            return Err(Error::Config("vanilla.iterations must be at least 1".into()));
        }
        match &self.data.source {
            DataSource::Mixture(m) => m.validate(),
            DataSource::Cubes(c) => c.validate(),
            DataSource::Csv { .. } => Ok(()),
        }
    }

    pub fn schedule(&self) -> Result<AnnealingSchedule> {
        AnnealingSchedule::new(self.beta_1, self.beta_k, self.stages)
    }

    pub fn seed(&self) -> u64 {
        self.trainer.seed
    }

    /// Replace the run seed. Unpinned network seeds follow it.
    pub fn set_seed(&mut self, seed: u64) {
        self.trainer.seed = seed;
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.trainer.mode = mode;
    }

    pub fn generator_seed(&self) -> u64 {
        self.generator_seed.unwrap_or(2 * self.seed() + 1000)
    }

    pub fn discriminator_seed(&self) -> u64 {
        self.discriminator_seed.unwrap_or(2 * self.seed() + 1001)
    }

    pub fn vanilla_budget(&self) -> usize {
        self.vanilla_iterations
            .unwrap_or_else(|| self.trainer.annealed_iterations(self.stages))
    }

    /// Build the training set: synthetic sources are sampled then rescaled
    /// into the box; files are loaded and rescaled if asked.
    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.data.source {
            DataSource::Csv { path, dim, rescale } => {
                let ds = Dataset::load_csv(path, self.domain, *rescale)?;
                if ds.dim() != *dim {
                    return Err(Error::dim("dataset columns", &[ds.dim()], &[*dim]));
                }
                Ok(ds)
            }
            src => rescale_dataset(&src.sample(self.data.n, self.data.seed)?, self.domain),
        }
    }

    /// The resolved configuration, defaults included, in the input format.
    pub fn to_manifest(&self) -> String {
        let t = &self.trainer;
        let mut w = Writer::default();
        w.int("seed", t.seed);
        w.put("mode", t.mode.to_string());
        w.put("out", self.out_dir.display().to_string());
        w.int("data.n", self.data.n as u64);
        w.int("data.seed", self.data.seed);
        write_source(&mut w, &self.data.source);
        w.put("box.low", self.domain.low());
        w.put("box.high", self.domain.high());
        w.int("generator.latent_dim", self.generator.input_dim as u64);
        w.put("generator.layers", self.generator.layers_string());
        w.put("generator.allow_smooth_hidden", self.generator.allow_smooth_hidden);
        w.int("generator.seed", self.generator_seed());
        w.put("discriminator.layers", self.discriminator.layers_string());
        w.int("discriminator.seed", self.discriminator_seed());
        w.put("schedule.beta_1", self.beta_1);
        w.put("schedule.beta_k", self.beta_k);
        w.int("schedule.stages", self.stages as u64);
        w.int("train.batch_size", t.batch_size as u64);
        w.int("train.steps_per_stage", t.steps_per_stage as u64);
        w.int("train.pretrain_steps", t.pretrain_steps as u64);
        w.int("train.final_steps", t.final_steps as u64);
        w.put("train.lr_d", t.lr_d);
        w.put("train.lr_g", t.lr_g);
        w.put("train.momentum", t.momentum);
        w.int("train.d_steps", t.d_steps as u64);
        w.int("train.g_steps", t.g_steps as u64);
        w.int("train.pretrain_check_every", t.pretrain_check_every as u64);
        w.put("criteria.ks_limit", t.criteria.ks_limit);
        w.put("criteria.correlation_limit", t.criteria.correlation_limit);
        w.put("criteria.frozen_noise_min", t.criteria.frozen_noise_min);
        w.int("criteria.samples", t.criteria.samples as u64);
        w.int("vanilla.iterations", self.vanilla_budget() as u64);
        w.int("output.sample_dump", self.sample_dump as u64);
        w.0
    }
}

impl DataConfig {
    fn source_is_relative_csv(&self) -> bool {
        matches!(&self.source, DataSource::Csv { path, .. } if path.is_relative())
    }
}

fn parse_source(k: &mut Keys) -> Result<DataSource> {
    let kind = k.string("data.source")?.unwrap_or_else(|| "mog5".into());
    let sigma = k.f64("mixture.sigma")?;
    let src = match kind.as_str() {
        "mog5" | "mog10" => {
            let mut m = if kind == "mog5" { MixtureSpec::mog5() } else { MixtureSpec::mog10() };
            if let Some(s) = sigma {
                m.sigma = s;
            }
            DataSource::Mixture(m)
        }
        "mixture" => {
            let centers = k
                .matrix("mixture.centers")?
                .ok_or_else(|| Error::Config("mixture source needs mixture.centers".into()))?;
            let sigma = sigma.ok_or_else(|| Error::Config("mixture source needs mixture.sigma".into()))?;
            let m = match k.vector("mixture.weights")? {
                Some(w) => MixtureSpec::new(centers, sigma, w)?,
                None => MixtureSpec::equal_weights(centers, sigma)?,
            };
            DataSource::Mixture(m)
        }
        "cubes" => {
            let d = CubesSpec::default();
            DataSource::Cubes(CubesSpec {
                outer_half_width: k.f64("cubes.outer_half_width")?.unwrap_or(d.outer_half_width),
                inner_half_width: k.f64("cubes.inner_half_width")?.unwrap_or(d.inner_half_width),
                edge_noise: k.f64("cubes.edge_noise")?.unwrap_or(d.edge_noise),
            })
        }
        "csv" => DataSource::Csv {
            path: PathBuf::from(
                k.string("data.path")?
                    .ok_or_else(|| Error::Config("csv source needs data.path".into()))?,
            ),
            dim: k
                .usize("data.dim")?
                .ok_or_else(|| Error::Config("csv source needs data.dim".into()))?,
            rescale: k.bool("data.rescale")?.unwrap_or(true),
        },
        other => {
            return Err(Error::Config(format!(
                "unknown data.source `{other}` (expected mog5, mog10, mixture, cubes or csv)"
            )))
        }
    };
    Ok(src)
}

fn write_source(w: &mut Writer, src: &DataSource) {
    match src {
        DataSource::Mixture(m) => {
            w.put("data.source", "mixture");
            w.put_matrix("mixture.centers", &m.centers);
            w.put("mixture.sigma", m.sigma);
            w.put_vector("mixture.weights", &m.weights);
        }
        DataSource::Cubes(c) => {
            w.put("data.source", "cubes");
            w.put("cubes.outer_half_width", c.outer_half_width);
            w.put("cubes.inner_half_width", c.inner_half_width);
            w.put("cubes.edge_noise", c.edge_noise);
        }
        DataSource::Csv { path, dim, rescale } => {
            w.put("data.source", "csv");
            w.put("data.path", path.display().to_string());
            w.int("data.dim", *dim as u64);
            w.put("data.rescale", *rescale);
        }
    }
}

/// Everything `eval` needs to know about a dataset: its generating spec (if
/// synthetic), the box, and the map from raw to box coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct DataSidecar {
    pub source: DataSource,
    pub domain: BoxDomain,
    pub transform: AffineMap,
}

impl DataSidecar {
    pub fn to_text(&self) -> String {
        let mut w = Writer::default();
        write_source(&mut w, &self.source);
        w.put("box.low", self.domain.low());
        w.put("box.high", self.domain.high());
        if !self.transform.is_identity() {
            w.put_vector("transform.scale", &self.transform.scale);
            w.put_vector("transform.offset", &self.transform.offset);
            w.put_vector("transform.raw_constant", &self.transform.raw_constant);
        }
        w.0
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut k = Keys::parse(text)?;
        let source = parse_source(&mut k)?;
        let dim = source.dim();
        let domain = BoxDomain::new(
            k.f64("box.low")?.unwrap_or(-1.0),
            k.f64("box.high")?.unwrap_or(1.0),
            dim,
        )?;
        let transform = match k.vector("transform.scale")? {
            None => AffineMap::identity(dim),
            Some(scale) => {
                let offset = k
                    .vector("transform.offset")?
                    .ok_or_else(|| Error::Config("transform.scale without transform.offset".into()))?;
                let raw_constant = k.vector("transform.raw_constant")?.unwrap_or_else(|| vec![0.0; dim]);
                if scale.len() != dim || offset.len() != dim || raw_constant.len() != dim {
                    return Err(Error::Config(format!("transform vectors must have {dim} entries")));
                }
                AffineMap {
                    scale,
                    offset,
                    raw_constant,
                }
            }
        };
        k.finish()?;
        Ok(Self {
            source,
            domain,
            transform,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Sidecar path for a dataset file: `points.csv` → `points.spec.toml`.
pub fn sidecar_path(data_path: &Path) -> PathBuf {
    data_path.with_extension("spec.toml")
}

#[derive(Default)]
struct Writer(String);

impl Writer {
    fn put(&mut self, key: &str, v: impl Into<Value>) {
        let _ = writeln!(self.0, "{key} = {}", v.into());
    }

    fn int(&mut self, key: &str, v: u64) {
        self.put(key, Value::Integer(v as i64));
    }

    fn put_vector(&mut self, key: &str, v: &[f64]) {
        self.put(key, Value::Array(v.iter().map(|&x| Value::Float(x)).collect()));
    }

    fn put_matrix(&mut self, key: &str, m: &[Vec<f64>]) {
        let rows = m
            .iter()
            .map(|r| Value::Array(r.iter().map(|&x| Value::Float(x)).collect()))
            .collect();
        self.put(key, Value::Array(rows));
    }
}

/// Flattened `a.b.c` keys; every lookup consumes its key so leftovers can be
/// reported as typos.
struct Keys(BTreeMap<String, Value>);

impl Keys {
    fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string().trim_end().to_string()))?;
        let mut out = BTreeMap::new();
        flatten("", table, &mut out);
        Ok(Self(out))
    }

    fn finish(self) -> Result<()> {
        match self.0.keys().next() {
            None => Ok(()),
            Some(_) => Err(Error::Config(format!(
                "unknown key(s): {}",
                self.0.keys().cloned().collect::<Vec<_>>().join(", ")
            ))),
        }
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        self.0.remove(key)
    }

    fn bad(key: &str, want: &str, v: &Value) -> Error {
        Error::Config(format!("{key} must be {want}, got {v}"))
    }

    fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(Self::bad(key, "a string", &v)),
        }
    }

    fn bool(&mut self, key: &str) -> Result<Option<bool>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(b)),
            Some(v) => Err(Self::bad(key, "true or false", &v)),
        }
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => as_f64(&v).map(Some).ok_or_else(|| Self::bad(key, "a number", &v)),
        }
    }

    fn u64(&mut self, key: &str) -> Result<Option<u64>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if i >= 0 => Ok(Some(i as u64)),
            Some(v) => Err(Self::bad(key, "a non-negative integer", &v)),
        }
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>> {
        Ok(self.u64(key)?.map(|v| v as usize))
    }

    fn vector(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => as_vector(&v).map(Some).ok_or_else(|| Self::bad(key, "an array of numbers", &v)),
        }
    }

    fn matrix(&mut self, key: &str) -> Result<Option<Vec<Vec<f64>>>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Array(rows)) => rows
                .iter()
                .map(|r| as_vector(r).ok_or_else(|| Self::bad(key, "an array of number arrays", r)))
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(v) => Err(Self::bad(key, "an array of number arrays", &v)),
        }
    }
}

fn flatten(prefix: &str, table: toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            v => {
                out.insert(key, v);
            }
        }
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn as_vector(v: &Value) -> Option<Vec<f64>> {
    match v {
        Value::Array(a) => a.iter().map(as_f64).collect(),
        _ => None,
    }
}
