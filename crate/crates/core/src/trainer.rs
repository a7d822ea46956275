//! Conditional GAN training for every discriminator variant.
//!
//! The loop is variant-agnostic: a [`Variant`] only decides the
//! discriminator head width, how targets are built and how the per-sample
//! losses are composed. Losses are averaged over the batch; the
//! discriminator objective is `mean(real) + mean(fake)`.

use crate::error::{Error, Result};
use crate::inr::{InrGenerator, InrHead};
use crate::labels::{
    build_imacgan_class_target, build_omni_target, build_oneside_target, LabelScheme, Role,
};
use crate::loss::{
    hinge_gan_loss, multi_hinge_loss, omni_loss_into, softmax_ce_loss, HingeRole, ScoreVector,
};
use crate::net::{
    Discriminator, DiscriminatorConfig, DiscriminatorHead, Generator, GeneratorConfig,
    GeneratorHead, Module, SampleGenerator,
};
use crate::optim::{normal_latents, AdamConfig, AdamState, DecayMode, DecayPreset};
use crate::tensor::Tensor;
use crate::toydata::{
    make_gaussian_ring, make_pattern_images, mode_coverage, ImageShape, QualityMetrics, ToyDataset,
};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Omni,
    OneSided,
    #[serde(rename = "imacgan")]
    ImAcGan,
    #[serde(rename = "acgan")]
    AcGan,
    MultiHinge,
    Projection,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Omni,
        Variant::OneSided,
        Variant::ImAcGan,
        Variant::AcGan,
        Variant::MultiHinge,
        Variant::Projection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Omni => "omni",
            Variant::OneSided => "one_sided",
            Variant::ImAcGan => "imacgan",
            Variant::AcGan => "acgan",
            Variant::MultiHinge => "multi_hinge",
            Variant::Projection => "projection",
        }
    }

    /// Head for `num_classes` classes.
    ///
    /// Classifier variants with a separate GAN logit put it last:
    /// ImAC-GAN emits `C + 1` class logits then one GAN logit, AC-GAN `C`
    /// class logits then one GAN logit.
    pub fn head(self, num_classes: usize) -> DiscriminatorHead {
        let c = num_classes;
        match self {
            Variant::Omni | Variant::OneSided => DiscriminatorHead::Vector { out_dim: c + 2 },
            Variant::ImAcGan => DiscriminatorHead::Vector { out_dim: c + 2 },
            Variant::AcGan | Variant::MultiHinge => DiscriminatorHead::Vector { out_dim: c + 1 },
            Variant::Projection => DiscriminatorHead::Projection { num_classes: c },
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s || v.name().replace('_', "-") == s)
            .ok_or_else(|| Error::param(format!("unknown variant {s:?}")))
    }
}

/// Loss of one batch of discriminator outputs and its gradient.
#[derive(Debug, Clone)]
pub struct BatchLoss {
    pub value: f64,
    pub grad: Tensor,
}

fn scores_row(scores: &Tensor, r: usize) -> Result<ScoreVector> {
    ScoreVector::new(scores.row(r).to_vec())
}

fn add_hinge(grad: &mut [f64], idx: usize, score: f64, role: HingeRole) -> Result<f64> {
    let h = hinge_gan_loss(score, role)?;
    grad[idx] += h.grad;
    Ok(h.value)
}

/// Per-sample loss of `variant` for one head output row; writes the
/// gradient into `grad` (zeroed) and returns the loss.
fn sample_loss(
    variant: Variant,
    num_classes: usize,
    row: &[f64],
    role: Role,
    grad: &mut [f64],
) -> Result<f64> {
    let c = num_classes;
    let s = ScoreVector::new(row.to_vec())?;
    match variant {
        Variant::Omni | Variant::OneSided => {
            let y = if variant == Variant::Omni {
                build_omni_target(&LabelScheme::omni(c)?, role)?
            } else {
                build_oneside_target(&LabelScheme::one_sided(c)?, role)?
            };
            if y.len() != row.len() {
                return Err(Error::LengthMismatch {
                    context: "omni head width",
                    left: y.len(),
                    right: row.len(),
                });
            }
            Ok(omni_loss_into(s.values(), y.labels(), grad))
        }
        Variant::ImAcGan | Variant::AcGan => {
            let n_cls = if variant == Variant::ImAcGan {
                c + 1
            } else {
                c
            };
            let target = match (variant, role) {
                (Variant::ImAcGan, r) => build_imacgan_class_target(c, r)?,
                (_, Role::Real(k) | Role::Gen(k) | Role::Fake(Some(k))) => k,
                (_, Role::Fake(None)) => {
                    return Err(Error::param(
                        "AC-GAN fake targets need the conditioning class",
                    ))
                }
            };
            let cls = ScoreVector::new(row[..n_cls].to_vec())?;
            let ce = softmax_ce_loss(&cls, target)?;
            grad[..n_cls].copy_from_slice(&ce.grad);
            let hinge_role = match role {
                Role::Real(_) => HingeRole::DReal,
                Role::Fake(_) => HingeRole::DFake,
                Role::Gen(_) => HingeRole::Generator,
            };
            Ok(ce.value + add_hinge(grad, n_cls, row[n_cls], hinge_role)?)
        }
        Variant::MultiHinge => {
            let target = build_imacgan_class_target(c, role)?;
            let mh = multi_hinge_loss(&s, target)?;
            grad.copy_from_slice(&mh.grad);
            Ok(mh.value)
        }
        Variant::Projection => {
            let hinge_role = match role {
                Role::Real(_) => HingeRole::DReal,
                Role::Fake(_) => HingeRole::DFake,
                Role::Gen(_) => HingeRole::Generator,
            };
            add_hinge(grad, 0, row[0], hinge_role)
        }
    }
}

/// Mean per-sample loss over the rows of `scores` with one role per row.
/// The gradient is scaled by `1/batch`.
pub fn batch_loss(
    variant: Variant,
    num_classes: usize,
    scores: &Tensor,
    roles: &[Role],
) -> Result<BatchLoss> {
    if roles.len() != scores.rows() {
        return Err(Error::LengthMismatch {
            context: "batch_loss roles",
            left: scores.rows(),
            right: roles.len(),
        });
    }
    let mut grad = Tensor::zeros(scores.shape());
    let mut total = 0.0;
    let scale = 1.0 / roles.len().max(1) as f64;
    for (r, &role) in roles.iter().enumerate() {
        let row = scores_row(scores, r)?;
        let g = grad.row_mut(r);
        total += sample_loss(variant, num_classes, row.values(), role, g)?;
        g.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(BatchLoss {
        value: total * scale,
        grad,
    })
}

/// A generator/discriminator pair with their optimizers.
#[derive(Debug, Clone)]
pub struct Gan<G> {
    pub generator: G,
    pub discriminator: Discriminator,
    pub g_opt: AdamState,
    pub d_opt: AdamState,
    pub variant: Variant,
    pub num_classes: usize,
}

impl<G: SampleGenerator> Gan<G> {
    fn d_scores(&mut self, x: &Tensor, classes: &[usize]) -> Result<Tensor> {
        match self.variant {
            Variant::Projection => self.discriminator.projection_score(x, classes),
            _ => self.discriminator.forward(x),
        }
    }

    /// One discriminator update on a real batch and a detached fake batch.
    ///
    /// Returns the discriminator loss `mean(real) + mean(fake)`.
    pub fn d_step(
        &mut self,
        real: &Tensor,
        real_classes: &[usize],
        z: &Tensor,
        fake_classes: &[usize],
    ) -> Result<f64> {
        let fake = self.generator.generate(z, fake_classes)?;
        let x = Tensor::concat_rows(&[real, &fake])?;
        let classes: Vec<usize> = real_classes.iter().chain(fake_classes).copied().collect();
        let scores = self.d_scores(&x, &classes)?;
        let nr = real.rows();
        let real_roles: Vec<Role> = real_classes.iter().map(|&c| Role::Real(c)).collect();
        let fake_roles: Vec<Role> = fake_classes.iter().map(|&c| Role::Fake(Some(c))).collect();
        let lr = batch_loss(
            self.variant,
            self.num_classes,
            &scores.slice_rows(0, nr),
            &real_roles,
        )?;
        let lf = batch_loss(
            self.variant,
            self.num_classes,
            &scores.slice_rows(nr, x.rows()),
            &fake_roles,
        )?;
        let value = lr.value + lf.value;
        if !value.is_finite() {
            return Err(Error::NonFinite("discriminator loss".into()));
        }
        let grad = Tensor::concat_rows(&[&lr.grad, &lf.grad])?;
        self.discriminator.zero_grad();
        self.discriminator.backward(&grad)?;
        self.d_opt.step(self.discriminator.params_mut())?;
        Ok(value)
    }

    /// One generator update through the (frozen) discriminator.
    pub fn g_step(&mut self, z: &Tensor, classes: &[usize]) -> Result<f64> {
        let fake = self.generator.generate(z, classes)?;
        let scores = self.d_scores(&fake, classes)?;
        let roles: Vec<Role> = classes.iter().map(|&c| Role::Gen(c)).collect();
        let loss = batch_loss(self.variant, self.num_classes, &scores, &roles)?;
        if !loss.value.is_finite() {
            return Err(Error::NonFinite("generator loss".into()));
        }
        let gx = self.discriminator.backward(&loss.grad)?;
        self.discriminator.zero_grad();
        self.generator.zero_grad();
        self.generator.backward(&gx)?;
        self.g_opt.step(self.generator.params_mut())?;
        Ok(loss.value)
    }
}

/// Collapse thresholds for [`detect_collapse`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseConfig {
    pub drop_fraction: f64,
    pub window: usize,
}

impl Default for CollapseConfig {
    fn default() -> Self {
        CollapseConfig {
            drop_fraction: 0.5,
            window: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseReport {
    pub collapsed: bool,
    /// Index into the metric sequence of the first crossing.
    pub index: Option<usize>,
    /// Training step of the first crossing, when known.
    pub step: Option<u64>,
    pub peak: f64,
    pub trough: f64,
}

/// Flags a collapse when the trailing `window`-average of `metric` falls
/// below `(1 − drop_fraction)` times its running peak.
///
/// The first `window − 1` averages use however many values exist so far.
/// `trough` is the lowest average at or after the overall peak.
pub fn detect_collapse(
    metric: &[f64],
    drop_fraction: f64,
    window: usize,
) -> Result<CollapseReport> {
    if metric.is_empty() {
        return Err(Error::param(
            "collapse detection needs a non-empty sequence",
        ));
    }
    if !(drop_fraction > 0.0 && drop_fraction < 1.0) || window == 0 {
        return Err(Error::param(format!(
            "drop fraction must lie in (0, 1) and window be positive, got {drop_fraction} and {window}"
        )));
    }
    let avg: Vec<f64> = (0..metric.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            metric[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect();
    let mut running_peak = f64::NEG_INFINITY;
    let mut index = None;
    for (i, &a) in avg.iter().enumerate() {
        if running_peak > 0.0 && a < (1.0 - drop_fraction) * running_peak {
            index = Some(i);
            break;
        }
        running_peak = running_peak.max(a);
    }
    let (peak_idx, peak) =
        avg.iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, a)| if a > acc.1 { (i, a) } else { acc },
            );
    let trough = avg[peak_idx..]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(CollapseReport {
        collapsed: index.is_some(),
        index,
        step: None,
        peak,
        trough,
    })
}

/// One evaluation record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    pub d_loss: f64,
    pub g_loss: f64,
    pub mode_coverage: f64,
    pub class_fidelity: f64,
    pub high_quality_fraction: f64,
}

impl MetricsRow {
    pub const CSV_HEADER: &'static str =
        "step,d_loss,g_loss,mode_coverage,class_fidelity,high_quality_fraction";
}

/// Which synthetic dataset a run trains on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// 2-D Gaussian rings with a direct generator head.
    Rings,
    /// Procedural RGB images with a feature-grid generator and INR head.
    Images,
}

impl std::str::FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rings" => Ok(Task::Rings),
            "images" => Ok(Task::Images),
            _ => Err(Error::param(format!("unknown task {s:?}"))),
        }
    }
}

/// Everything that defines a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub task: Task,
    pub variant: Variant,
    pub num_classes: usize,
    pub modes_per_class: usize,
    pub mode_std: f64,
    pub dataset_size: usize,
    pub noise_dim: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub g_layers: usize,
    pub d_layers: usize,
    pub batch_size: usize,
    pub d_steps_per_g: usize,
    pub total_steps: u64,
    pub eval_interval: u64,
    pub eval_samples: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub decay_g: f64,
    pub decay_d: f64,
    pub decay_mode: DecayMode,
    pub exclude_bias_and_embedding: bool,
    pub radius_mult: f64,
    pub collapse: CollapseConfig,
    pub seed: u64,
    /// Side of the square training images.
    pub image_size: usize,
    /// Side of the generator's square feature grid.
    pub grid_size: usize,
    pub grid_channels: usize,
    pub inr_hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            task: Task::Rings,
            variant: Variant::Omni,
            num_classes: 8,
            modes_per_class: 1,
            mode_std: 0.05,
            dataset_size: 512,
            noise_dim: 16,
            embed_dim: 16,
            hidden: 64,
            g_layers: 2,
            d_layers: 2,
            batch_size: 64,
            d_steps_per_g: 1,
            total_steps: 20_000,
            eval_interval: 250,
            eval_samples: 512,
            lr_g: 1e-4,
            lr_d: 4e-4,
            beta1: 0.0,
            beta2: 0.999,
            decay_g: 0.0,
            decay_d: 0.0,
            decay_mode: DecayMode::Decoupled,
            exclude_bias_and_embedding: false,
            radius_mult: 3.0,
            collapse: CollapseConfig::default(),
            seed: 0,
            image_size: 8,
            grid_size: 4,
            grid_channels: 8,
            inr_hidden: 32,
        }
    }
}

impl TrainConfig {
    /// Defaults for the procedural-image task. The quality radius is
    /// widened because in 192 dimensions a clean sample already lies about
    /// `σ·√192 ≈ 14σ` from its mode.
    pub fn image_defaults() -> Self {
        TrainConfig {
            task: Task::Images,
            num_classes: 4,
            mode_std: 0.1,
            dataset_size: 256,
            embed_dim: 8,
            batch_size: 16,
            total_steps: 1500,
            eval_interval: 250,
            eval_samples: 64,
            radius_mult: 20.0,
            ..TrainConfig::default()
        }
    }

    pub fn with_preset(mut self, preset: DecayPreset) -> Self {
        let (d, g) = preset.values();
        self.decay_d = d;
        self.decay_g = g;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            self.num_classes,
            self.modes_per_class,
            self.dataset_size,
            self.noise_dim,
            self.hidden,
            self.g_layers,
            self.d_layers,
            self.batch_size,
            self.d_steps_per_g,
            self.eval_samples,
        ];
        if counts.contains(&0) || self.eval_interval == 0 {
            return Err(Error::param("training counts must be positive"));
        }
        if !(self.mode_std > 0.0) || !(self.radius_mult > 0.0) {
            return Err(Error::param(
                "mode std and radius multiplier must be positive",
            ));
        }
        self.adam(self.lr_g, self.decay_g).validate()?;
        self.adam(self.lr_d, self.decay_d).validate()
    }

    fn adam(&self, lr: f64, decay: f64) -> AdamConfig {
        AdamConfig {
            lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: 1e-8,
            weight_decay: decay,
            decay_mode: self.decay_mode,
            exclude_bias_and_embedding: self.exclude_bias_and_embedding,
        }
    }

    pub fn generator_config(&self, head: GeneratorHead) -> GeneratorConfig {
        GeneratorConfig {
            noise_dim: self.noise_dim,
            num_classes: self.num_classes,
            embed_dim: self.embed_dim,
            hidden: vec![self.hidden; self.g_layers],
            head,
        }
    }

    pub fn discriminator_config(&self, input_dim: usize) -> DiscriminatorConfig {
        DiscriminatorConfig {
            input_dim,
            hidden: vec![self.hidden; self.d_layers],
            head: self.variant.head(self.num_classes),
        }
    }

    /// Output scale of the ring generator: the outermost ring radius plus one.
    pub fn ring_output_scale(&self) -> f64 {
        self.num_classes as f64 + 1.0
    }

    pub fn ring_dataset(&self) -> Result<ToyDataset> {
        make_gaussian_ring(
            self.num_classes,
            self.modes_per_class,
            self.mode_std,
            self.dataset_size,
            self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xD1B5,
        )
    }

    /// Generator, discriminator and optimizers initialised from the seed.
    pub fn build_gan<G: SampleGenerator>(
        &self,
        make_generator: impl FnOnce(&mut crate::Rng) -> Result<G>,
    ) -> Result<Gan<G>> {
        self.validate()?;
        let mut rng = crate::rng_from_seed(self.seed ^ 0x6A09_E667);
        let generator = make_generator(&mut rng)?;
        let discriminator =
            Discriminator::new(&mut rng, self.discriminator_config(generator.sample_dim()))?;
        Ok(Gan {
            generator,
            discriminator,
            g_opt: AdamState::new(self.adam(self.lr_g, self.decay_g))?,
            d_opt: AdamState::new(self.adam(self.lr_d, self.decay_d))?,
            variant: self.variant,
            num_classes: self.num_classes,
        })
    }

    pub fn image_shape(&self) -> ImageShape {
        ImageShape {
            height: self.image_size,
            width: self.image_size,
        }
    }

    pub fn image_dataset(&self) -> Result<ToyDataset> {
        make_pattern_images(
            self.num_classes,
            self.modes_per_class,
            self.mode_std,
            self.dataset_size,
            self.image_shape(),
            self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0x1A6E,
        )
    }

    pub fn build_image_gan(&self) -> Result<Gan<InrGenerator>> {
        if self.image_size == 0
            || self.grid_size == 0
            || self.grid_channels == 0
            || self.inr_hidden == 0
        {
            return Err(Error::param("image task sizes must be positive"));
        }
        let head = GeneratorHead::FeatureGrid {
            channels: self.grid_channels,
            height: self.grid_size,
            width: self.grid_size,
        };
        let cfg = self.generator_config(head);
        self.build_gan(|rng| {
            let backbone = Generator::new(rng, cfg)?;
            let head = InrHead::new(rng, self.grid_channels, self.inr_hidden)?;
            InrGenerator::new(backbone, head, self.image_size, self.image_size)
        })
    }

    pub fn build_ring_gan(&self) -> Result<Gan<Generator>> {
        let head = GeneratorHead::Direct {
            out_dim: 2,
            scale: self.ring_output_scale(),
        };
        let cfg = self.generator_config(head);
        self.build_gan(|rng| Generator::new(rng, cfg))
    }
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome<G> {
    pub rows: Vec<MetricsRow>,
    pub collapse: CollapseReport,
    pub gan: Gan<G>,
    /// Set when a non-finite loss stopped training early.
    pub aborted: Option<String>,
}

/// Fixed latents and round-robin classes used at every evaluation.
pub fn evaluation_set(
    seed: u64,
    samples: usize,
    noise_dim: usize,
    num_classes: usize,
) -> (Tensor, Vec<usize>) {
    let mut rng = crate::rng_from_seed(seed ^ 0xE7A1_5E70);
    let z = normal_latents(&mut rng, samples, noise_dim);
    let classes = (0..samples).map(|i| i % num_classes).collect();
    (z, classes)
}

/// Trains `gan` on `dataset` following `config`'s schedule and returns the
/// metric rows. Evaluation happens every `eval_interval` steps on a fixed
/// latent set; losses in a row are averages since the previous row.
pub fn run_training<G: SampleGenerator>(
    mut gan: Gan<G>,
    dataset: &ToyDataset,
    config: &TrainConfig,
    mut on_row: impl FnMut(&MetricsRow),
) -> Result<TrainOutcome<G>> {
    let c = config.num_classes;
    let dz = gan.generator.noise_dim();
    let mut rng = crate::rng_from_seed(config.seed ^ 0x3C6E_F372);
    let (eval_z, eval_classes) = evaluation_set(config.seed, config.eval_samples, dz, c);
    let mut rows = Vec::new();
    let (mut d_sum, mut g_sum, mut d_n, mut g_n) = (0.0, 0.0, 0usize, 0usize);
    let mut aborted = None;
    let b = config.batch_size;
    for step in 1..=config.total_steps {
        let mut result = Ok(());
        for _ in 0..config.d_steps_per_g {
            let (real, real_classes) = dataset.sample_batch(&mut rng, b);
            let z = normal_latents(&mut rng, b, dz);
            let fake_classes: Vec<usize> = (0..b).map(|_| rng.gen_range(0..c)).collect();
            match gan.d_step(&real, &real_classes, &z, &fake_classes) {
                Ok(v) => {
                    d_sum += v;
                    d_n += 1;
                }
                Err(e) => {
                    result = Err(e);
                    break;
                }
            }
        }
        if result.is_ok() {
            let z = normal_latents(&mut rng, b, dz);
            let classes: Vec<usize> = (0..b).map(|_| rng.gen_range(0..c)).collect();
            match gan.g_step(&z, &classes) {
                Ok(v) => {
                    g_sum += v;
                    g_n += 1;
                }
                Err(e) => result = Err(e),
            }
        }
        let failed = result.is_err();
        if let Err(e) = result {
            match e {
                Error::NonFinite(msg) => aborted = Some(format!("step {step}: non-finite {msg}")),
                other => return Err(other),
            }
        }
        if failed || step % config.eval_interval == 0 || step == config.total_steps {
            let generated = gan.generator.generate(&eval_z, &eval_classes)?;
            let q = if generated.is_finite() {
                mode_coverage(&generated, &eval_classes, dataset, config.radius_mult)?
            } else {
                QualityMetrics {
                    mode_coverage: 0.0,
                    class_fidelity: 0.0,
                    high_quality_fraction: 0.0,
                }
            };
            let row = MetricsRow {
                step,
                d_loss: if failed {
                    f64::NAN
                } else {
                    d_sum / d_n.max(1) as f64
                },
                g_loss: if failed {
                    f64::NAN
                } else {
                    g_sum / g_n.max(1) as f64
                },
                mode_coverage: q.mode_coverage,
                class_fidelity: q.class_fidelity,
                high_quality_fraction: q.high_quality_fraction,
            };
            on_row(&row);
            rows.push(row);
            (d_sum, g_sum, d_n, g_n) = (0.0, 0.0, 0, 0);
        }
        if failed {
            break;
        }
    }
    let hq: Vec<f64> = rows.iter().map(|r| r.high_quality_fraction).collect();
    let mut collapse = detect_collapse(&hq, config.collapse.drop_fraction, config.collapse.window)?;
    collapse.step = collapse.index.map(|i| rows[i].step);
    Ok(TrainOutcome {
        rows,
        collapse,
        gan,
        aborted,
    })
}

/// Trains the configured variant on the 2-D ring task.
pub fn train(config: &TrainConfig) -> Result<TrainOutcome<Generator>> {
    if config.task != Task::Rings {
        return Err(Error::param(
            "train runs the ring task; use train_images for images",
        ));
    }
    let dataset = config.ring_dataset()?;
    let gan = config.build_ring_gan()?;
    run_training(gan, &dataset, config, |_| {})
}

/// Trains the configured variant on procedural images with an INR
/// generator.
pub fn train_images(config: &TrainConfig) -> Result<TrainOutcome<InrGenerator>> {
    if config.task != Task::Images {
        return Err(Error::param("train_images needs the image task"));
    }
    let dataset = config.image_dataset()?;
    let gan = config.build_image_gan()?;
    run_training(gan, &dataset, config, |_| {})
}
