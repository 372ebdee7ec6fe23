//! Post-specialization: learning a global map from original to specialized
//! vectors.
//!
//! The generator `G` is trained on aligned pairs `(x, x')` of original and
//! initially specialized seen-word vectors with
//!
//! ```text
//! J = (1/n) Σ ‖G(x) − x'‖² + alpha · L_G
//! ```
//!
//! where `L_G` is the generator loss of the configured adversarial game:
//!
//! * `Gan`: `L_G = −Σ log σ(D(G(x))) − Σ log(1 − σ(D(x')))` and
//!   `L_D = −Σ log(1 − σ(D(G(x)))) − Σ log σ(D(x'))`, with the logistic
//!   applied to the critic's scalar output.
//! * `Wgan`/`WganGp`: `L_G = −mean D(G(x))` and
//!   `L_D = mean D(x') − mean D(G(x))`. The critic ascends `L_D` (clipping
//!   its parameters in `Wgan`, adding `λ·mean (‖∇D(x̂)‖ − 1)²` on random
//!   interpolates in `WganGp`).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::{sigmoid, squared_distance, Matrix};
use crate::nn::{penalty_param_grads, Activation, Grads, Mlp, MlpSpec, OptimizerKind, OptimizerState};
use crate::space::{SeenVocab, VectorSpace};
use crate::{Error, Result};

/// Lower clamp for probabilities inside logarithms.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdversarialMode {
    Gan,
    Wgan,
    WganGp,
}

impl AdversarialMode {
    pub fn name(self) -> &'static str {
        match self {
            AdversarialMode::Gan => "gan",
            AdversarialMode::Wgan => "wgan",
            AdversarialMode::WganGp => "wgan_gp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapPolicy {
    /// Map unseen words; seen words keep their initially specialized vectors.
    UnseenOnly,
    /// Map every word.
    AllWords,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostSpecConfig {
    pub mode: AdversarialMode,
    /// weight of the adversarial term against the L2 mapping loss
    pub alpha: f64,
    pub lambda_gp: f64,
    pub clip_c: f64,
    pub n_critic: usize,
    /// generated-side batch size `n`
    pub batch_size: usize,
    /// real-side batch size `m`; `None` means `m = n`
    pub real_batch_size: Option<usize>,
    pub epochs: usize,
    /// stop after this many generator updates, if set
    pub max_generator_steps: Option<usize>,
    pub generator_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub generator_activation: Activation,
    /// must be piecewise linear when the gradient penalty is used
    pub critic_activation: Activation,
    /// `None` picks the per-mode default
    pub generator_optimizer: Option<OptimizerKind>,
    pub critic_optimizer: Option<OptimizerKind>,
    pub map_policy: MapPolicy,
    pub seed: u64,
}

impl Default for PostSpecConfig {
    fn default() -> Self {
        PostSpecConfig {
            mode: AdversarialMode::WganGp,
            alpha: 1.0,
            lambda_gp: 10.0,
            clip_c: 0.01,
            n_critic: 5,
            batch_size: 128,
            real_batch_size: None,
            epochs: 10,
            max_generator_steps: None,
            generator_hidden: vec![512, 512],
            critic_hidden: vec![512, 512],
            generator_activation: Activation::LeakyRelu(0.2),
            critic_activation: Activation::LeakyRelu(0.2),
            generator_optimizer: None,
            critic_optimizer: None,
            map_policy: MapPolicy::UnseenOnly,
            seed: 0,
        }
    }
}

impl PostSpecConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return bad("alpha must be finite and non-negative");
        }
        if !(self.lambda_gp >= 0.0) || !self.lambda_gp.is_finite() {
            return bad("lambda_gp must be finite and non-negative");
        }
        if self.mode == AdversarialMode::Wgan && !(self.clip_c > 0.0) {
            return bad("clip_c must be positive in wgan mode");
        }
        if self.n_critic == 0 {
            return bad("n_critic must be at least 1");
        }
        if self.batch_size == 0 || self.real_batch_size == Some(0) {
            return bad("batch sizes must be at least 1");
        }
        if !self.critic_activation.is_piecewise_linear() && self.mode == AdversarialMode::WganGp {
            return bad("the gradient penalty needs a piecewise-linear critic");
        }
        Ok(())
    }

    /// SGD for the vanilla GAN, RMSProp for WGAN, Adam for WGAN-GP.
    pub fn generator_optimizer(&self) -> OptimizerKind {
        self.generator_optimizer.unwrap_or(match self.mode {
            AdversarialMode::Gan => OptimizerKind::sgd(0.05),
            AdversarialMode::Wgan => OptimizerKind::rmsprop(1e-3),
            AdversarialMode::WganGp => OptimizerKind::Adam {
                lr: 1e-3,
                beta1: 0.5,
                beta2: 0.9,
                eps: 1e-8,
            },
        })
    }

    pub fn critic_optimizer(&self) -> OptimizerKind {
        self.critic_optimizer.unwrap_or(match self.mode {
            AdversarialMode::Gan => OptimizerKind::sgd(0.05),
            AdversarialMode::Wgan => OptimizerKind::rmsprop(5e-5),
            AdversarialMode::WganGp => OptimizerKind::Adam {
                lr: 1e-3,
                beta1: 0.5,
                beta2: 0.9,
                eps: 1e-8,
            },
        })
    }

    pub fn generator_spec(&self, dim: usize) -> MlpSpec {
        MlpSpec::new(dim, &self.generator_hidden, self.generator_activation, dim, Activation::Identity)
    }

    pub fn critic_spec(&self, dim: usize) -> MlpSpec {
        MlpSpec::new(dim, &self.critic_hidden, self.critic_activation, 1, Activation::Identity)
    }
}

/// Aligned rows of original (`inputs`) and initially specialized (`targets`)
/// vectors of the seen words.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingPairs {
    tokens: Vec<String>,
    inputs: Matrix,
    targets: Matrix,
}

impl MappingPairs {
    pub fn new(tokens: Vec<String>, inputs: Matrix, targets: Matrix) -> Result<Self> {
        if inputs.rows() == 0 {
            return Err(Error::Empty("no mapping pairs"));
        }
        if inputs.rows() != targets.rows() || inputs.rows() != tokens.len() {
            return Err(Error::Shape(format!(
                "{} tokens, {} inputs, {} targets",
                tokens.len(),
                inputs.rows(),
                targets.rows()
            )));
        }
        if inputs.cols() != targets.cols() {
            return Err(Error::Shape(format!(
                "inputs have width {}, targets {}",
                inputs.cols(),
                targets.cols()
            )));
        }
        Ok(MappingPairs {
            tokens,
            inputs,
            targets,
        })
    }

    /// Pairs every word of `specialized` with its vector in `original`.
    pub fn from_spaces(original: &VectorSpace, specialized: &VectorSpace) -> Result<Self> {
        let inputs = original.restrict(specialized.words().iter().map(String::as_str))?;
        MappingPairs::new(
            specialized.words().to_vec(),
            inputs.matrix().clone(),
            specialized.matrix().clone(),
        )
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn targets(&self) -> &Matrix {
        &self.targets
    }

    /// Rows `[..split)` and `[split..)`.
    pub fn split_at(&self, split: usize) -> Result<(MappingPairs, MappingPairs)> {
        let head: Vec<usize> = (0..split.min(self.len())).collect();
        let tail: Vec<usize> = (split.min(self.len())..self.len()).collect();
        let part = |idx: &[usize]| {
            MappingPairs::new(
                idx.iter().map(|&i| self.tokens[i].clone()).collect(),
                self.inputs.select_rows(idx),
                self.targets.select_rows(idx),
            )
        };
        Ok((part(&head)?, part(&tail)?))
    }
}

/// Critic scores of a batch, one per row.
fn scores(d: &Mlp, x: &Matrix) -> Result<Vec<f64>> {
    if d.out_dim() != 1 {
        return Err(Error::Shape(format!("critic must have one output, has {}", d.out_dim())));
    }
    Ok(d.predict(x)?.into_vec())
}

/// `−log σ(s)` with the probability clamped below by [`LOG_CLAMP`], and its
/// derivative in `s`.
fn neg_log_sigmoid(s: f64) -> (f64, f64) {
    let p = sigmoid(s);
    if p < LOG_CLAMP {
        (-libm::log(LOG_CLAMP), 0.0)
    } else {
        (-libm::log(p), -sigmoid(-s))
    }
}

/// `−log(1 − σ(s)) = −log σ(−s)` and its derivative in `s`.
fn neg_log_one_minus_sigmoid(s: f64) -> (f64, f64) {
    let (v, d) = neg_log_sigmoid(-s);
    (v, -d)
}

fn nonempty(batch: &Matrix, what: &'static str) -> Result<()> {
    if batch.rows() == 0 {
        Err(Error::Empty(what))
    } else {
        Ok(())
    }
}

/// `(L_G, L_D)` of the vanilla GAN game from critic logits.
pub fn gan_losses_from_scores(fake: &[f64], real: &[f64]) -> (f64, f64) {
    let mut lg = 0.0;
    let mut ld = 0.0;
    for &s in fake {
        lg += neg_log_sigmoid(s).0;
        ld += neg_log_one_minus_sigmoid(s).0;
    }
    for &s in real {
        lg += neg_log_one_minus_sigmoid(s).0;
        ld += neg_log_sigmoid(s).0;
    }
    (lg, ld)
}

/// `(L_G, L_D)` of the Wasserstein game from raw critic scores.
pub fn wgan_losses_from_scores(fake: &[f64], real: &[f64]) -> (f64, f64) {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let fake_mean = mean(fake);
    (-fake_mean, mean(real) - fake_mean)
}

/// Vanilla GAN losses `(L_G, L_D)` for the critic `d`.
pub fn gan_losses(d: &Mlp, generated: &Matrix, real: &Matrix) -> Result<(f64, f64)> {
    nonempty(generated, "generated batch is empty")?;
    nonempty(real, "real batch is empty")?;
    Ok(gan_losses_from_scores(&scores(d, generated)?, &scores(d, real)?))
}

/// Wasserstein losses `(L_G, L_D)` for the critic `d`.
pub fn wgan_losses(d: &Mlp, generated: &Matrix, real: &Matrix) -> Result<(f64, f64)> {
    nonempty(generated, "generated batch is empty")?;
    nonempty(real, "real batch is empty")?;
    Ok(wgan_losses_from_scores(&scores(d, generated)?, &scores(d, real)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyTerm {
    /// `λ · mean (‖∇ₓD(x̂)‖₂ − 1)²`
    pub value: f64,
    /// gradient of `value` with respect to the critic parameters
    pub grads: Grads,
}

/// Gradient penalty on random interpolates `ε·real + (1 − ε)·fake`, one
/// `ε ~ U(0, 1)` per row. Rows are paired by position; with unequal batch
/// sizes only the first `min(n, m)` rows take part.
pub fn gradient_penalty_term<R: Rng + ?Sized>(
    d: &Mlp,
    real: &Matrix,
    generated: &Matrix,
    lambda_gp: f64,
    rng: &mut R,
) -> Result<PenaltyTerm> {
    if real.cols() != generated.cols() {
        return Err(Error::Shape(format!(
            "real width {} differs from generated width {}",
            real.cols(),
            generated.cols()
        )));
    }
    let rows = real.rows().min(generated.rows());
    if rows == 0 {
        return Err(Error::Empty("gradient penalty needs at least one row"));
    }
    let mut x_hat = Matrix::zeros(rows, real.cols());
    for r in 0..rows {
        let eps: f64 = rng.random();
        for ((h, a), b) in x_hat.row_mut(r).iter_mut().zip(real.row(r)).zip(generated.row(r)) {
            *h = eps * a + (1.0 - eps) * b;
        }
    }
    let (values, mut grads) = penalty_param_grads(d, &x_hat)?;
    let scale = lambda_gp / rows as f64;
    grads.scale(scale);
    Ok(PenaltyTerm {
        value: scale * values.iter().sum::<f64>(),
        grads,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GeneratorObjective {
    pub total: f64,
    pub mapping_l2: f64,
    /// `L_G` before weighting by alpha; zero when alpha is zero
    pub adversarial: f64,
}

/// `J = (1/n) Σ ‖G(x) − x'‖² + alpha · L_G` and its gradient with respect to
/// the generator parameters. The adversarial gradient reaches `G` through the
/// critic's input gradient.
pub fn generator_objective(
    g: &Mlp,
    d: &Mlp,
    inputs: &Matrix,
    targets: &Matrix,
    config: &PostSpecConfig,
) -> Result<(GeneratorObjective, Grads)> {
    if inputs.rows() != targets.rows() {
        return Err(Error::Shape(format!(
            "{} inputs but {} targets",
            inputs.rows(),
            targets.rows()
        )));
    }
    nonempty(inputs, "generator batch is empty")?;
    let n = inputs.rows() as f64;
    let (out, cache) = g.forward(inputs)?;
    if out.cols() != targets.cols() {
        return Err(Error::Shape(format!(
            "generator produces width {}, targets have {}",
            out.cols(),
            targets.cols()
        )));
    }
    let mut upstream = Matrix::zeros(out.rows(), out.cols());
    let mut mapping_l2 = 0.0;
    for r in 0..out.rows() {
        mapping_l2 += squared_distance(out.row(r), targets.row(r));
        for ((u, o), t) in upstream.row_mut(r).iter_mut().zip(out.row(r)).zip(targets.row(r)) {
            *u = 2.0 * (o - t) / n;
        }
    }
    mapping_l2 /= n;

    let mut adversarial = 0.0;
    if config.alpha != 0.0 {
        let (fake_scores, d_cache) = d.forward(&out)?;
        let fake_scores = fake_scores.into_vec();
        let mut d_up = Matrix::zeros(out.rows(), 1);
        match config.mode {
            AdversarialMode::Gan => {
                let real_scores = scores(d, targets)?;
                adversarial = gan_losses_from_scores(&fake_scores, &real_scores).0;
                for (r, &s) in fake_scores.iter().enumerate() {
                    d_up[(r, 0)] = neg_log_sigmoid(s).1;
                }
            }
            AdversarialMode::Wgan | AdversarialMode::WganGp => {
                adversarial = -fake_scores.iter().sum::<f64>() / n;
                for r in 0..out.rows() {
                    d_up[(r, 0)] = -1.0 / n;
                }
            }
        }
        let (_, d_input) = d.backward(&d_cache, &d_up)?;
        for (u, v) in upstream.as_mut_slice().iter_mut().zip(d_input.as_slice()) {
            *u += config.alpha * v;
        }
    }
    let (grads, _) = g.backward(&cache, &upstream)?;
    Ok((
        GeneratorObjective {
            total: mapping_l2 + config.alpha * adversarial,
            mapping_l2,
            adversarial,
        },
        grads,
    ))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CriticObjective {
    /// the quantity minimized by the critic update
    pub minimized: f64,
    /// `L_D` as defined for the mode (for Wasserstein modes this is the
    /// separation `mean D(x') − mean D(G(x))` that the critic ascends)
    pub l_d: f64,
    /// gradient penalty included in `minimized` (zero outside `WganGp`)
    pub penalty: f64,
}

/// The critic's training objective on one batch and its parameter gradient.
///
/// * `Gan`: minimize `L_D`.
/// * `Wgan`: minimize `−L_D`.
/// * `WganGp`: minimize `−L_D + λ·penalty`.
pub fn critic_objective<R: Rng + ?Sized>(
    d: &Mlp,
    generated: &Matrix,
    real: &Matrix,
    config: &PostSpecConfig,
    rng: &mut R,
) -> Result<(CriticObjective, Grads)> {
    nonempty(generated, "generated batch is empty")?;
    nonempty(real, "real batch is empty")?;
    let (fake_s, fake_cache) = d.forward(generated)?;
    let (real_s, real_cache) = d.forward(real)?;
    if fake_s.cols() != 1 {
        return Err(Error::Shape(format!("critic must have one output, has {}", fake_s.cols())));
    }
    let n = generated.rows() as f64;
    let m = real.rows() as f64;
    let mut fake_up = Matrix::zeros(generated.rows(), 1);
    let mut real_up = Matrix::zeros(real.rows(), 1);
    let mut out = CriticObjective::default();
    match config.mode {
        AdversarialMode::Gan => {
            let (_, ld) = gan_losses_from_scores(fake_s.as_slice(), real_s.as_slice());
            out.l_d = ld;
            out.minimized = ld;
            for (u, &s) in fake_up.as_mut_slice().iter_mut().zip(fake_s.as_slice()) {
                *u = neg_log_one_minus_sigmoid(s).1;
            }
            for (u, &s) in real_up.as_mut_slice().iter_mut().zip(real_s.as_slice()) {
                *u = neg_log_sigmoid(s).1;
            }
        }
        AdversarialMode::Wgan | AdversarialMode::WganGp => {
            let (_, ld) = wgan_losses_from_scores(fake_s.as_slice(), real_s.as_slice());
            out.l_d = ld;
            out.minimized = -ld;
            fake_up.as_mut_slice().iter_mut().for_each(|u| *u = 1.0 / n);
            real_up.as_mut_slice().iter_mut().for_each(|u| *u = -1.0 / m);
        }
    }
    let (mut grads, _) = d.backward(&fake_cache, &fake_up)?;
    let (real_grads, _) = d.backward(&real_cache, &real_up)?;
    grads.add_scaled(1.0, &real_grads);
    if config.mode == AdversarialMode::WganGp && config.lambda_gp > 0.0 {
        let term = gradient_penalty_term(d, real, generated, config.lambda_gp, rng)?;
        out.penalty = term.value;
        out.minimized += term.value;
        grads.add_scaled(1.0, &term.grads);
    }
    Ok((out, grads))
}

/// Averages over the generator updates of one epoch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PostSpecEpoch {
    pub epoch: usize,
    pub generator_steps: usize,
    pub l_g: f64,
    pub l_d: f64,
    pub penalty: f64,
    pub mapping_l2: f64,
}

/// Step-wise trainer; [`train_post_specializer`] drives it to completion.
pub struct PostSpecTrainer<'a> {
    pairs: &'a MappingPairs,
    config: PostSpecConfig,
    generator: Mlp,
    critic: Mlp,
    gen_opt: OptimizerState,
    critic_opt: OptimizerState,
    rng: ChaCha8Rng,
    epoch: usize,
    generator_steps: usize,
}

fn guard(value: f64, epoch: usize, step: usize, quantity: &'static str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence {
            epoch,
            step,
            quantity,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CycleStats {
    pub critic: CriticObjective,
    pub generator: GeneratorObjective,
}

impl<'a> PostSpecTrainer<'a> {
    pub fn new(pairs: &'a MappingPairs, config: &PostSpecConfig) -> Result<Self> {
        config.validate()?;
        if pairs.is_empty() {
            return Err(Error::Empty("no mapping pairs"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let generator = Mlp::init(&config.generator_spec(pairs.dim()), &mut rng)?;
        let mut critic = Mlp::init(&config.critic_spec(pairs.dim()), &mut rng)?;
        if config.mode == AdversarialMode::Wgan {
            critic.clip_params(config.clip_c);
        }
        Ok(PostSpecTrainer {
            pairs,
            gen_opt: OptimizerState::new(config.generator_optimizer(), &generator),
            critic_opt: OptimizerState::new(config.critic_optimizer(), &critic),
            config: config.clone(),
            generator,
            critic,
            rng,
            epoch: 0,
            generator_steps: 0,
        })
    }

    pub fn generator(&self) -> &Mlp {
        &self.generator
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn generator_steps(&self) -> usize {
        self.generator_steps
    }

    pub fn into_generator(self) -> Mlp {
        self.generator
    }

    fn sample(&mut self, size: usize) -> Vec<usize> {
        let n = self.pairs.len();
        index::sample(&mut self.rng, n, size.min(n)).into_vec()
    }

    /// One critic update on independently drawn generated and real batches.
    pub fn critic_step(&mut self) -> Result<CriticObjective> {
        let gen_idx = self.sample(self.config.batch_size);
        let real_idx = self.sample(self.config.real_batch_size.unwrap_or(self.config.batch_size));
        let fake = self.generator.predict(&self.pairs.inputs.select_rows(&gen_idx))?;
        let real = self.pairs.targets.select_rows(&real_idx);
        let (obj, grads) = critic_objective(&self.critic, &fake, &real, &self.config, &mut self.rng)?;
        let step = self.generator_steps;
        guard(obj.minimized, self.epoch, step, "critic loss")?;
        if !grads.is_finite() {
            return Err(Error::Divergence {
                epoch: self.epoch,
                step,
                quantity: "critic gradient",
            });
        }
        self.critic_opt.step(&mut self.critic, &grads)?;
        if self.config.mode == AdversarialMode::Wgan {
            self.critic.clip_params(self.config.clip_c);
        }
        Ok(obj)
    }

    /// One generator update on the aligned rows `batch`.
    pub fn generator_step(&mut self, batch: &[usize]) -> Result<GeneratorObjective> {
        let x = self.pairs.inputs.select_rows(batch);
        let t = self.pairs.targets.select_rows(batch);
        let (obj, grads) = generator_objective(&self.generator, &self.critic, &x, &t, &self.config)?;
        let step = self.generator_steps;
        guard(obj.total, self.epoch, step, "generator loss")?;
        if !grads.is_finite() {
            return Err(Error::Divergence {
                epoch: self.epoch,
                step,
                quantity: "generator gradient",
            });
        }
        self.gen_opt.step(&mut self.generator, &grads)?;
        if !self.generator.is_finite() {
            return Err(Error::Divergence {
                epoch: self.epoch,
                step,
                quantity: "generator parameters",
            });
        }
        self.generator_steps += 1;
        Ok(obj)
    }

    /// `n_critic` critic updates followed by one generator update. With
    /// `alpha = 0` the critic cannot influence the generator and is skipped.
    pub fn cycle(&mut self, batch: &[usize]) -> Result<CycleStats> {
        let mut stats = CycleStats::default();
        if self.config.alpha != 0.0 {
            for _ in 0..self.config.n_critic {
                stats.critic = self.critic_step()?;
            }
        }
        stats.generator = self.generator_step(batch)?;
        Ok(stats)
    }

    fn budget_left(&self) -> bool {
        self.config
            .max_generator_steps
            .is_none_or(|max| self.generator_steps < max)
    }

    /// One shuffled pass over the pairs in generator batches.
    pub fn run_epoch(&mut self) -> Result<PostSpecEpoch> {
        let mut order: Vec<usize> = (0..self.pairs.len()).collect();
        order.shuffle(&mut self.rng);
        let mut report = PostSpecEpoch {
            epoch: self.epoch,
            ..PostSpecEpoch::default()
        };
        for chunk in order.chunks(self.config.batch_size) {
            if !self.budget_left() {
                break;
            }
            let s = self.cycle(chunk)?;
            report.generator_steps += 1;
            report.l_g += s.generator.adversarial;
            report.l_d += s.critic.l_d;
            report.penalty += s.critic.penalty;
            report.mapping_l2 += s.generator.mapping_l2;
        }
        if report.generator_steps > 0 {
            let k = report.generator_steps as f64;
            report.l_g /= k;
            report.l_d /= k;
            report.penalty /= k;
            report.mapping_l2 /= k;
        }
        self.epoch += 1;
        Ok(report)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostSpecOutcome {
    pub generator: Mlp,
    pub critic: Mlp,
    pub history: Vec<PostSpecEpoch>,
}

/// Trains the mapping for `config.epochs` epochs (or until
/// `max_generator_steps`), returning the final generator.
pub fn train_post_specializer(pairs: &MappingPairs, config: &PostSpecConfig) -> Result<PostSpecOutcome> {
    let mut trainer = PostSpecTrainer::new(pairs, config)?;
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        if !trainer.budget_left() {
            break;
        }
        history.push(trainer.run_epoch()?);
    }
    Ok(PostSpecOutcome {
        critic: trainer.critic.clone(),
        generator: trainer.generator,
        history,
    })
}

/// Mean of `‖G(x) − x'‖²` over the pairs.
pub fn mapping_error(g: &Mlp, pairs: &MappingPairs) -> Result<f64> {
    let out = g.predict(pairs.inputs())?;
    let total: f64 = (0..out.rows())
        .map(|r| squared_distance(out.row(r), pairs.targets().row(r)))
        .sum();
    Ok(total / out.rows() as f64)
}

/// Mean cosine between `G(x)` and `x'` over the pairs.
pub fn mapping_cosine(g: &Mlp, pairs: &MappingPairs) -> Result<f64> {
    let out = g.predict(pairs.inputs())?;
    let mut total = 0.0;
    for r in 0..out.rows() {
        total += crate::space::cosine(out.row(r), pairs.targets().row(r))?;
    }
    Ok(total / out.rows() as f64)
}

const MAP_CHUNK: usize = 1024;

/// Specializes the full vocabulary of `space` with the generator.
///
/// Under [`MapPolicy::UnseenOnly`] seen words take their rows from
/// `specialized_seen` and only the rest go through `g`; under
/// [`MapPolicy::AllWords`] every row is `G(x)`. The vocabulary and its order
/// are those of `space`.
pub fn apply_global_mapping(
    space: &VectorSpace,
    g: &Mlp,
    seen: &SeenVocab,
    specialized_seen: &VectorSpace,
    policy: MapPolicy,
) -> Result<VectorSpace> {
    if g.in_dim() != space.dim() || g.out_dim() != space.dim() {
        return Err(Error::Shape(format!(
            "generator maps {} → {}, space has dimension {}",
            g.in_dim(),
            g.out_dim(),
            space.dim()
        )));
    }
    let to_map: Vec<usize> = match policy {
        MapPolicy::AllWords => (0..space.len()).collect(),
        MapPolicy::UnseenOnly => (0..space.len())
            .filter(|&i| !seen.contains(&space.words()[i]))
            .collect(),
    };
    let mut matrix = space.matrix().clone();
    if policy == MapPolicy::UnseenOnly {
        if specialized_seen.dim() != space.dim() {
            return Err(Error::Shape("specialized space has a different dimension".into()));
        }
        for tok in seen.iter() {
            let v = specialized_seen
                .vector(tok)
                .ok_or_else(|| Error::UnknownToken(tok.into()))?;
            let i = space.index_of(tok).ok_or_else(|| Error::UnknownToken(tok.into()))?;
            matrix.row_mut(i).copy_from_slice(v);
        }
    }
    for chunk in to_map.chunks(MAP_CHUNK) {
        let mapped = g.predict(&space.matrix().select_rows(chunk))?;
        for (k, &i) in chunk.iter().enumerate() {
            matrix.row_mut(i).copy_from_slice(mapped.row(k));
        }
    }
    space.with_matrix(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Dense;

    fn linear_critic(w: &[f64], b: f64) -> Mlp {
        Mlp::from_layers(vec![Dense {
            weights: Matrix::from_vec(1, w.len(), w.to_vec()).unwrap(),
            bias: vec![b],
            activation: Activation::Identity,
        }])
        .unwrap()
    }

    #[test]
    fn gan_losses_at_zero_logits() {
        let d = linear_critic(&[0.0, 0.0], 0.0);
        let x = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let (lg, ld) = gan_losses(&d, &x, &x).unwrap();
        assert!((lg - 1.386294).abs() < 1e-6);
        assert!((ld - 1.386294).abs() < 1e-6);
    }

    #[test]
    fn gan_losses_perfect_discriminator() {
        let (lg, ld) = gan_losses_from_scores(&[-20.0], &[20.0]);
        assert!(ld < 1e-8);
        assert!(lg > 39.0);
        let (lg2, ld2) = gan_losses_from_scores(&[20.0], &[-20.0]);
        assert!((lg2 - ld).abs() < 1e-12 && (ld2 - lg).abs() < 1e-12);
    }

    #[test]
    fn wgan_losses_cases() {
        let d = linear_critic(&[0.0, 0.0], 0.7);
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let (lg, ld) = wgan_losses(&d, &x, &x).unwrap();
        assert_eq!(ld, 0.0);
        assert!((lg + 0.7).abs() < 1e-15);

        let d = linear_critic(&[1.0, 0.0], 0.0);
        let real = Matrix::from_rows(&[[0.4, 9.0], [0.6, -1.0]]).unwrap();
        let fake = Matrix::from_rows(&[[0.1, 3.0], [0.1, 0.0]]).unwrap();
        let (lg, ld) = wgan_losses(&d, &fake, &real).unwrap();
        assert!((ld - 0.4).abs() < 1e-12);
        assert!((lg + 0.1).abs() < 1e-12);

        let d2 = linear_critic(&[2.0, 0.0], 0.0);
        let (lg2, ld2) = wgan_losses(&d2, &fake, &real).unwrap();
        assert!((lg2 - 2.0 * lg).abs() < 1e-12 && (ld2 - 2.0 * ld).abs() < 1e-12);

        assert!(wgan_losses(&d, &Matrix::zeros(0, 2), &real).is_err());
    }

    #[test]
    fn penalty_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let real = Matrix::from_rows(&[[1.0, 2.0], [0.0, -1.0]]).unwrap();
        let fake = Matrix::from_rows(&[[-1.0, 0.5], [3.0, 3.0]]).unwrap();
        let unit = linear_critic(&[0.6, 0.8], 0.0);
        let t = gradient_penalty_term(&unit, &real, &fake, 10.0, &mut rng).unwrap();
        assert!(t.value.abs() < 1e-28);
        let double = linear_critic(&[2.0, 0.0], 0.0);
        let t = gradient_penalty_term(&double, &real, &fake, 10.0, &mut rng).unwrap();
        assert!((t.value - 10.0).abs() < 1e-12);
    }

    #[test]
    fn generator_objective_degenerate_mixes() {
        let x = Matrix::from_rows(&[[0.6, 0.8], [1.0, 0.0]]).unwrap();
        let g = Mlp::identity(2);
        let zero_critic = linear_critic(&[0.0, 0.0], 0.0);
        let cfg = PostSpecConfig {
            alpha: 0.0,
            ..PostSpecConfig::default()
        };
        let (obj, grads) = generator_objective(&g, &zero_critic, &x, &x, &cfg).unwrap();
        assert_eq!(obj.total, 0.0);
        assert!(grads.flatten().iter().all(|&v| v == 0.0));

        let cfg = PostSpecConfig {
            alpha: 1.0,
            mode: AdversarialMode::Wgan,
            ..PostSpecConfig::default()
        };
        let t = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let (obj, _) = generator_objective(&g, &zero_critic, &x, &t, &cfg).unwrap();
        assert!((obj.total - obj.mapping_l2).abs() < 1e-15);
        assert!(obj.adversarial == 0.0);

        assert!(generator_objective(&g, &zero_critic, &x, &t.select_rows(&[0]), &cfg).is_err());
    }

    #[test]
    fn mapping_policies() {
        let space = VectorSpace::from_records(vec![
            ("a".into(), vec![1.0, 0.0]),
            ("b".into(), vec![0.0, 1.0]),
            ("c".into(), vec![1.0, 1.0]),
        ])
        .unwrap()
        .0;
        let g = Mlp::identity(2);
        let all = apply_global_mapping(&space, &g, &SeenVocab::default(), &space, MapPolicy::AllWords).unwrap();
        assert_eq!(all, space);

        let spec = space.with_matrix(Matrix::from_rows(&[[5.0, 5.0], [6.0, 6.0], [7.0, 7.0]]).unwrap()).unwrap();
        let seen = SeenVocab::new(space.words().iter().cloned().collect(), &space).unwrap();
        let out = apply_global_mapping(&space, &g, &seen, &spec, MapPolicy::UnseenOnly).unwrap();
        assert_eq!(out, spec);

        let partial = spec.restrict(["a"]).unwrap();
        assert!(apply_global_mapping(&space, &g, &seen, &partial, MapPolicy::UnseenOnly).is_err());
        assert!(apply_global_mapping(&space, &Mlp::identity(3), &seen, &spec, MapPolicy::AllWords).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = PostSpecConfig::default();
        assert!(c.validate().is_ok());
        c.n_critic = 0;
        assert!(c.validate().is_err());
        let c = PostSpecConfig {
            mode: AdversarialMode::Wgan,
            clip_c: 0.0,
            ..PostSpecConfig::default()
        };
        assert!(c.validate().is_err());
        let c = PostSpecConfig {
            alpha: -1.0,
            ..PostSpecConfig::default()
        };
        assert!(c.validate().is_err());
        let tanh_g = PostSpecConfig {
            generator_activation: Activation::Tanh,
            ..PostSpecConfig::default()
        };
        assert!(tanh_g.validate().is_ok());
        let tanh_d = PostSpecConfig {
            critic_activation: Activation::Tanh,
            ..PostSpecConfig::default()
        };
        assert!(tanh_d.validate().is_err());
    }
}
