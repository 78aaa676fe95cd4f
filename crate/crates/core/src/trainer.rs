//! Alternating minimax training: uniform pretraining, the annealed loop over
//! the cooling schedule, the final empirical epochs, and the vanilla
//! baseline.

use std::fmt;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tape;
use crate::diagnostics::{self, UniformityReport};
use crate::error::{Error, Result};
use crate::nn::{validate_pairing, LatentPrior, Mlp, Role};
use crate::schedule::AnnealingSchedule;
use crate::target::{sample_heated, sample_uniform, BoxDomain, Dataset, InverseTemperature};
use crate::tensor::{sgd_step, Direction, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    BetaGan,
    Vanilla,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::BetaGan => "beta_gan",
            Mode::Vanilla => "vanilla",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "beta_gan" => Ok(Mode::BetaGan),
            "vanilla" => Ok(Mode::Vanilla),
            other => Err(Error::Config(format!("unknown mode `{other}` (beta_gan|vanilla)"))),
        }
    }
}

/// Generator objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorLoss {
    /// Descend `mean log(1 - D(G(z)))`.
    Saturating,
    /// Descend `-mean log D(G(z))`; used only by the vanilla baseline.
    NonSaturating,
}

impl Mode {
    pub fn generator_loss(self) -> GeneratorLoss {
        match self {
            Mode::BetaGan => GeneratorLoss::Saturating,
            Mode::Vanilla => GeneratorLoss::NonSaturating,
        }
    }
}

/// Pretraining passes when every marginal KS distance, the largest
/// coordinate correlation, and the frozen-noise score clear these limits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformityCriteria {
    pub ks_limit: f64,
    pub correlation_limit: f64,
    pub frozen_noise_min: f64,
    pub samples: usize,
}

impl Default for UniformityCriteria {
    fn default() -> Self {
        Self {
            ks_limit: 0.05,
            correlation_limit: 0.1,
            frozen_noise_min: 0.5,
            samples: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainerConfig {
    /// Minibatch size `m`.
    pub batch_size: usize,
    /// Iterations per cooling stage `n`.
    pub steps_per_stage: usize,
    /// Upper bound on uniform-pretraining iterations.
    pub pretrain_steps: usize,
    /// Iterations on the empirical distribution after the last stage.
    pub final_steps: usize,
    pub lr_d: f64,
    pub lr_g: f64,
    pub momentum: f64,
    /// Discriminator and generator updates per iteration.
    pub d_steps: usize,
    pub g_steps: usize,
    /// Iterations between pretraining convergence checks.
    pub pretrain_check_every: usize,
    pub criteria: UniformityCriteria,
    pub seed: u64,
    pub mode: Mode,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            steps_per_stage: 200,
            pretrain_steps: 20_000,
            final_steps: 200,
            lr_d: 0.1,
            lr_g: 0.02,
            momentum: 0.0,
            d_steps: 1,
            g_steps: 1,
            pretrain_check_every: 100,
            criteria: UniformityCriteria::default(),
            seed: 0,
            mode: Mode::BetaGan,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("batch_size", self.batch_size),
            ("steps_per_stage", self.steps_per_stage),
            ("pretrain_steps", self.pretrain_steps),
            ("final_steps", self.final_steps),
            ("d_steps", self.d_steps),
            ("g_steps", self.g_steps),
            ("pretrain_check_every", self.pretrain_check_every),
            ("criteria.samples", self.criteria.samples),
        ];
        for (name, v) in counts {
            if v < 1 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        for (name, v) in [("lr_d", self.lr_d), ("lr_g", self.lr_g)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must be in [0, 1), got {}", self.momentum)));
        }
        Ok(())
    }

    /// Iterations of a whole annealed run when pretraining uses its full budget.
    pub fn annealed_iterations(&self, stages: usize) -> usize {
        self.pretrain_steps + stages * self.steps_per_stage + self.final_steps
    }
}

/// Plain or momentum SGD with a fixed learning rate.
#[derive(Clone, Debug)]
pub struct Sgd {
    lr: f64,
    momentum: f64,
    velocity: Vec<Tensor>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64) -> Self {
        Self {
            lr,
            momentum,
            velocity: Vec::new(),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor], direction: Direction) -> Result<()> {
        if self.momentum == 0.0 {
            return sgd_step(params, grads, self.lr, direction);
        }
        if self.velocity.is_empty() {
            self.velocity = grads.iter().map(|g| Tensor::zeros(g.shape())).collect();
        }
        for (v, g) in self.velocity.iter_mut().zip(grads) {
            if v.shape() != g.shape() {
                return Err(Error::dim("sgd momentum", v.shape(), g.shape()));
            }
            for (vi, gi) in v.data_mut().iter_mut().zip(g.data()) {
                *vi = self.momentum * *vi + gi;
            }
        }
        sgd_step(params, &self.velocity, self.lr, direction)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscriminatorStats {
    /// `mean log D(x) + mean log(1 - D(G(z)))` before the update.
    pub objective: f64,
    pub d_real: f64,
    pub d_fake: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorStats {
    pub loss: f64,
    pub d_fake: f64,
}

fn fault(message: String) -> Error {
    Error::TrainingFault {
        message,
        trace: None,
    }
}

fn take_grads(grads: &mut crate::autodiff::Gradients, vars: &[crate::autodiff::Var]) -> Vec<Tensor> {
    vars.iter()
        .map(|&v| grads.take(v).expect("parameter leaf has a gradient"))
        .collect()
}

/// One ascent step of the discriminator on
/// `mean log D(x) + mean log(1 - D(G(z)))`. The generator is only evaluated.
pub fn discriminator_step(
    d_net: &mut Mlp,
    g_net: &Mlp,
    real_batch: &Tensor,
    z_batch: &Tensor,
    opt: &mut Sgd,
) -> Result<DiscriminatorStats> {
    if real_batch.rows() != z_batch.rows() {
        return Err(Error::dim("discriminator_step batches", real_batch.shape(), z_batch.shape()));
    }
    let fake = g_net.forward(z_batch)?;
    let mut tape = Tape::new();
    let vars = d_net.register(&mut tape, true);
    let xr = tape.constant(real_batch.clone());
    let xf = tape.constant(fake);
    let lr = d_net.trace_with(&mut tape, xr, &vars, true)?;
    let lf = d_net.trace_with(&mut tape, xf, &vars, true)?;
    let d_real = tape.value(lr).data().iter().map(|&l| crate::tensor::sigmoid(l)).sum::<f64>()
        / real_batch.rows() as f64;
    let d_fake = tape.value(lf).data().iter().map(|&l| crate::tensor::sigmoid(l)).sum::<f64>()
        / z_batch.rows() as f64;
    let log_real = tape.log_sigmoid(lr);
    let neg_lf = tape.neg(lf);
    let log_fake = tape.log_sigmoid(neg_lf);
    let term_real = tape.mean(log_real);
    let term_fake = tape.mean(log_fake);
    let objective = tape.add(term_real, term_fake)?;
    let value = tape.value(objective).data()[0];
    if !value.is_finite() {
        return Err(fault(format!("non-finite discriminator objective {value}")));
    }
    let mut grads = tape.backward(objective)?;
    let grads = take_grads(&mut grads, &vars);
    opt.step(d_net.params_mut(), &grads, Direction::Ascend)?;
    Ok(DiscriminatorStats {
        objective: value,
        d_real,
        d_fake,
    })
}

/// One descent step of the generator through a frozen discriminator.
pub fn generator_step(
    d_net: &Mlp,
    g_net: &mut Mlp,
    z_batch: &Tensor,
    opt: &mut Sgd,
    loss_kind: GeneratorLoss,
) -> Result<GeneratorStats> {
    let mut tape = Tape::new();
    let g_vars = g_net.register(&mut tape, true);
    let d_vars = d_net.register(&mut tape, false);
    let z = tape.constant(z_batch.clone());
    let x = g_net.trace_with(&mut tape, z, &g_vars, false)?;
    let logits = d_net.trace_with(&mut tape, x, &d_vars, true)?;
    let d_fake = tape.value(logits).data().iter().map(|&l| crate::tensor::sigmoid(l)).sum::<f64>()
        / z_batch.rows() as f64;
    let loss = match loss_kind {
        GeneratorLoss::Saturating => {
            let neg = tape.neg(logits);
            let log_one_minus_d = tape.log_sigmoid(neg);
            tape.mean(log_one_minus_d)
        }
        GeneratorLoss::NonSaturating => {
            let log_d = tape.log_sigmoid(logits);
            let mean = tape.mean(log_d);
            tape.neg(mean)
        }
    };
    let value = tape.value(loss).data()[0];
    if !value.is_finite() {
        return Err(fault(format!("non-finite generator loss {value}")));
    }
    let mut grads = tape.backward(loss)?;
    let grads = take_grads(&mut grads, &g_vars);
    opt.step(g_net.params_mut(), &grads, Direction::Descend)?;
    Ok(GeneratorStats { loss: value, d_fake })
}

/// Training phase a record belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Pretrain,
    Anneal,
    Final,
    Vanilla,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainingRecord {
    pub step: usize,
    pub phase: Phase,
    pub beta: InverseTemperature,
    pub loss_d: f64,
    pub loss_g: f64,
    pub d_real: f64,
    pub d_fake: f64,
    /// Cumulative gradient evaluations, one per network update.
    pub tau: u64,
}

/// Where a stage ended: the last step index of the stage and its β.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageBoundary {
    pub stage: usize,
    pub beta: InverseTemperature,
    pub end_step: usize,
    pub tau: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingTrace {
    records: Vec<TrainingRecord>,
    boundaries: Vec<StageBoundary>,
    generator_loss: GeneratorLoss,
    pretrain_steps: usize,
    pretrain_passed: Option<bool>,
}

pub const TRACE_CSV_HEADER: &str = "step,beta,loss_d,loss_g,d_real,d_fake,tau";

impl TrainingTrace {
    pub fn new(generator_loss: GeneratorLoss) -> Self {
        Self {
            records: Vec::new(),
            boundaries: Vec::new(),
            generator_loss,
            pretrain_steps: 0,
            pretrain_passed: None,
        }
    }

    pub fn records(&self) -> &[TrainingRecord] {
        &self.records
    }

    pub fn boundaries(&self) -> &[StageBoundary] {
        &self.boundaries
    }

    /// Which generator objective produced this trace.
    pub fn generator_loss(&self) -> GeneratorLoss {
        self.generator_loss
    }

    pub fn pretrain_steps(&self) -> usize {
        self.pretrain_steps
    }

    pub fn pretrain_passed(&self) -> Option<bool> {
        self.pretrain_passed
    }

    pub fn final_tau(&self) -> u64 {
        self.records.last().map_or(0, |r| r.tau)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::with_capacity(64 * (self.records.len() + 1));
        s.push_str(TRACE_CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.step, r.beta, r.loss_d, r.loss_g, r.d_real, r.d_fake, r.tau
            ));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(self.to_csv_string().as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PretrainOutcome {
    pub passed: bool,
    /// Update iterations taken before passing or exhausting the budget.
    pub steps: usize,
    pub uniformity: UniformityReport,
    pub frozen_noise: f64,
}

/// What the observer sees when a stage finishes.
#[derive(Clone, Copy, Debug)]
pub struct StageEnd {
    pub boundary: StageBoundary,
    pub phase: Phase,
}

/// Owns the optimizer state, RNG stream and trace of one training run.
#[derive(Clone, Debug)]
pub struct Trainer {
    config: TrainerConfig,
    prior: LatentPrior,
    rng: ChaCha8Rng,
    eval_rng: ChaCha8Rng,
    d_opt: Sgd,
    g_opt: Sgd,
    trace: TrainingTrace,
    step: usize,
    tau: u64,
}

impl Trainer {
    pub fn new(config: TrainerConfig, prior: LatentPrior) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            eval_rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_e7a1_0000_0001),
            d_opt: Sgd::new(config.lr_d, config.momentum),
            g_opt: Sgd::new(config.lr_g, config.momentum),
            trace: TrainingTrace::new(config.mode.generator_loss()),
            config,
            prior,
            step: 0,
            tau: 0,
        })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn trace(&self) -> &TrainingTrace {
        &self.trace
    }

    pub fn into_trace(self) -> TrainingTrace {
        self.trace
    }

    pub fn tau(&self) -> u64 {
        self.tau
    }

    /// Draws `m` generator samples using the evaluation RNG stream, which
    /// leaves the training stream untouched.
    pub fn generate(&mut self, g_net: &Mlp, m: usize) -> Result<Tensor> {
        let z = self.prior.sample(m, &mut self.eval_rng);
        g_net.forward(&z)
    }

    fn attach_trace(&self, err: Error) -> Error {
        match err {
            Error::TrainingFault { message, trace: None } => Error::TrainingFault {
                message,
                trace: Some(Box::new(self.trace.clone())),
            },
            other => other,
        }
    }

    /// One alternating iteration against `target` (`Uniform` draws from the box).
    fn iterate(
        &mut self,
        g_net: &mut Mlp,
        d_net: &mut Mlp,
        phase: Phase,
        beta: InverseTemperature,
        domain: &BoxDomain,
        data: Option<&Dataset>,
    ) -> Result<()> {
        let m = self.config.batch_size;
        let mut d_stats = None;
        for _ in 0..self.config.d_steps {
            let z = self.prior.sample(m, &mut self.rng);
            let real = match (beta, data) {
                (InverseTemperature::Uniform, _) => sample_uniform(domain, m, &mut self.rng)?,
                (_, Some(ds)) => sample_heated(ds, beta, m, &mut self.rng)?,
                (_, None) => return Err(Error::Contract("annealed stage without a dataset".into())),
            };
            d_stats = Some(discriminator_step(d_net, g_net, &real, &z, &mut self.d_opt)?);
            self.tau += 1;
        }
        let mut g_stats = None;
        for _ in 0..self.config.g_steps {
            let z = self.prior.sample(m, &mut self.rng);
            g_stats = Some(generator_step(
                d_net,
                g_net,
                &z,
                &mut self.g_opt,
                self.config.mode.generator_loss(),
            )?);
            self.tau += 1;
        }
        let (d, g) = (d_stats.expect("d_steps ≥ 1"), g_stats.expect("g_steps ≥ 1"));
        self.trace.records.push(TrainingRecord {
            step: self.step,
            phase,
            beta,
            loss_d: -d.objective,
            loss_g: g.loss,
            d_real: d.d_real,
            d_fake: d.d_fake,
            tau: self.tau,
        });
        self.step += 1;
        Ok(())
    }

    fn close_stage(&mut self, stage: usize, beta: InverseTemperature) -> StageBoundary {
        let b = StageBoundary {
            stage,
            beta,
            end_step: self.step,
            tau: self.tau,
        };
        self.trace.boundaries.push(b);
        b
    }

    /// Checks the generator against the uniformity criteria on fresh samples.
    pub fn check_uniformity(&mut self, g_net: &Mlp, domain: &BoxDomain) -> Result<(bool, UniformityReport, f64)> {
        let crit = self.config.criteria;
        let samples = self.generate(g_net, crit.samples)?;
        if !samples.all_finite() {
            return Err(fault("generator produced non-finite samples".into()));
        }
        let report = diagnostics::uniformity_score(&samples, domain)?;
        // The pairwise statistic is quadratic; skip it when KS already fails.
        let frozen = if report.passes(crit.ks_limit, crit.correlation_limit) {
            diagnostics::frozen_noise_score(&samples, domain)?
        } else {
            f64::NAN
        };
        let passed = report.passes(crit.ks_limit, crit.correlation_limit) && frozen > crit.frozen_noise_min;
        Ok((passed, report, frozen))
    }

    /// Trains against the uniform distribution on `domain` until the
    /// uniformity criteria pass or the pretraining budget runs out. Running
    /// out is reported in the outcome, not as an error.
    pub fn pretrain_uniform(
        &mut self,
        g_net: &mut Mlp,
        d_net: &mut Mlp,
        domain: &BoxDomain,
    ) -> Result<PretrainOutcome> {
        self.pretrain_inner(g_net, d_net, domain)
            .map_err(|e| self.attach_trace(e))
    }

    fn pretrain_inner(&mut self, g_net: &mut Mlp, d_net: &mut Mlp, domain: &BoxDomain) -> Result<PretrainOutcome> {
        check_roles(g_net, d_net)?;
        validate_pairing(g_net, &self.prior, domain)?;
        let budget = self.config.pretrain_steps;
        let every = self.config.pretrain_check_every;
        let mut steps = 0;
        let outcome = loop {
            if steps % every == 0 || steps == budget {
                let (passed, uniformity, frozen_noise) = self.check_uniformity(g_net, domain)?;
                log::debug!(
                    "pretrain step {steps}: ks {:.4} corr {:.4} frozen {:.3}",
                    uniformity.max_ks(),
                    uniformity.max_abs_correlation,
                    frozen_noise
                );
                if passed || steps == budget {
                    let frozen_noise = if frozen_noise.is_nan() {
                        let samples = self.generate(g_net, self.config.criteria.samples)?;
                        diagnostics::frozen_noise_score(&samples, domain)?
                    } else {
                        frozen_noise
                    };
                    break PretrainOutcome {
                        passed,
                        steps,
                        uniformity,
                        frozen_noise,
                    };
                }
            }
            self.iterate(g_net, d_net, Phase::Pretrain, InverseTemperature::Uniform, domain, None)?;
            steps += 1;
        };
        self.trace.pretrain_steps = outcome.steps;
        self.trace.pretrain_passed = Some(outcome.passed);
        if outcome.steps > 0 {
            self.close_stage(0, InverseTemperature::Uniform);
        }
        Ok(outcome)
    }

    /// The annealed loop: `n` iterations at every finite stage of
    /// `schedule`, then the final iterations on the empirical distribution.
    /// `observer` runs after each stage.
    pub fn run_annealed(
        &mut self,
        g_net: &mut Mlp,
        d_net: &mut Mlp,
        data: &Dataset,
        schedule: &AnnealingSchedule,
        observer: &mut dyn FnMut(&StageEnd, &Mlp, &Mlp) -> Result<()>,
    ) -> Result<()> {
        self.anneal_inner(g_net, d_net, data, schedule, observer)
            .map_err(|e| self.attach_trace(e))
    }

    fn anneal_inner(
        &mut self,
        g_net: &mut Mlp,
        d_net: &mut Mlp,
        data: &Dataset,
        schedule: &AnnealingSchedule,
        observer: &mut dyn FnMut(&StageEnd, &Mlp, &Mlp) -> Result<()>,
    ) -> Result<()> {
        check_roles(g_net, d_net)?;
        validate_pairing(g_net, &self.prior, data.domain())?;
        let domain = *data.domain();
        for (k, beta) in schedule.all_stages().enumerate() {
            let (phase, steps) = match beta {
                InverseTemperature::Infinity => (Phase::Final, self.config.final_steps),
                _ => (Phase::Anneal, self.config.steps_per_stage),
            };
            for _ in 0..steps {
                self.iterate(g_net, d_net, phase, beta, &domain, Some(data))?;
            }
            let boundary = self.close_stage(k + 1, beta);
            log::info!(
                "stage {} beta {} done at step {} (tau {})",
                k + 1,
                beta,
                boundary.end_step,
                boundary.tau
            );
            observer(&StageEnd { boundary, phase }, g_net, d_net)?;
        }
        Ok(())
    }

    /// Vanilla baseline: `iterations` iterations directly on the empirical
    /// distribution. The mode must be `Vanilla`.
    pub fn run_vanilla(
        &mut self,
        g_net: &mut Mlp,
        d_net: &mut Mlp,
        data: &Dataset,
        iterations: usize,
    ) -> Result<()> {
        if self.config.mode != Mode::Vanilla {
            return Err(Error::Contract("vanilla baseline requires mode = vanilla".into()));
        }
        self.vanilla_inner(g_net, d_net, data, iterations)
            .map_err(|e| self.attach_trace(e))
    }

    fn vanilla_inner(&mut self, g_net: &mut Mlp, d_net: &mut Mlp, data: &Dataset, iterations: usize) -> Result<()> {
        check_roles(g_net, d_net)?;
        validate_pairing(g_net, &self.prior, data.domain())?;
        let domain = *data.domain();
        for _ in 0..iterations {
            self.iterate(g_net, d_net, Phase::Vanilla, InverseTemperature::Infinity, &domain, Some(data))?;
        }
        self.close_stage(1, InverseTemperature::Infinity);
        Ok(())
    }
}

fn check_roles(g_net: &Mlp, d_net: &Mlp) -> Result<()> {
    if g_net.spec().role != Role::Generator || d_net.spec().role != Role::Discriminator {
        return Err(Error::Contract("expected a generator and a discriminator".into()));
    }
    if g_net.output_dim() != d_net.input_dim() {
        return Err(Error::dim(
            "generator output vs discriminator input",
            &[g_net.output_dim()],
            &[d_net.input_dim()],
        ));
    }
    Ok(())
}

/// Pretraining for a fresh run; returns the outcome and the trace so far.
pub fn pretrain_uniform(
    g_net: &mut Mlp,
    d_net: &mut Mlp,
    domain: &BoxDomain,
    config: &TrainerConfig,
) -> Result<(PretrainOutcome, TrainingTrace)> {
    let mut trainer = Trainer::new(config.clone(), LatentPrior::new(g_net.input_dim())?)?;
    let outcome = trainer.pretrain_uniform(g_net, d_net, domain)?;
    Ok((outcome, trainer.into_trace()))
}

/// Full annealed run: uniform pretraining, the cooling stages, and the final
/// empirical epochs.
pub fn run_annealed(
    g_net: &mut Mlp,
    d_net: &mut Mlp,
    data: &Dataset,
    schedule: &AnnealingSchedule,
    config: &TrainerConfig,
) -> Result<(PretrainOutcome, TrainingTrace)> {
    let mut trainer = Trainer::new(config.clone(), LatentPrior::new(g_net.input_dim())?)?;
    let outcome = trainer.pretrain_uniform(g_net, d_net, data.domain())?;
    trainer.run_annealed(g_net, d_net, data, schedule, &mut |_, _, _| Ok(()))?;
    Ok((outcome, trainer.into_trace()))
}

/// Vanilla baseline with the non-saturating generator loss for `iterations`
/// iterations (`2 · iterations` gradient evaluations).
pub fn run_vanilla_baseline(
    g_net: &mut Mlp,
    d_net: &mut Mlp,
    data: &Dataset,
    config: &TrainerConfig,
    iterations: usize,
) -> Result<TrainingTrace> {
    let mut trainer = Trainer::new(config.clone(), LatentPrior::new(g_net.input_dim())?)?;
    trainer.run_vanilla(g_net, d_net, data, iterations)?;
    Ok(trainer.into_trace())
}
