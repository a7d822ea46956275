//! Adam with weight decay, a central-difference gradient checker and
//! truncated latent sampling.

use crate::error::{Error, Result};
use crate::net::{Param, ParamKind};
use crate::tensor::Tensor;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// How weight decay enters the Adam update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecayMode {
    /// `θ ← θ_adam − lr·λ·θ` after the moment update.
    #[default]
    Decoupled,
    /// `g ← g + λ·θ` before the moment update (L2 penalty).
    Coupled,
}

impl std::str::FromStr for DecayMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "decoupled" => Ok(DecayMode::Decoupled),
            "coupled" => Ok(DecayMode::Coupled),
            other => Err(Error::param(format!("unknown decay mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub decay_mode: DecayMode,
    /// Skip decay for biases and embeddings.
    pub exclude_bias_and_embedding: bool,
}

impl AdamConfig {
    /// Generator defaults of the large-scale setup: lr 1e-4, betas (0, 0.999).
    pub fn generator_default() -> Self {
        AdamConfig {
            lr: 1e-4,
            ..Self::default()
        }
    }

    /// Discriminator defaults of the large-scale setup: lr 4e-4, betas (0, 0.999).
    pub fn discriminator_default() -> Self {
        AdamConfig {
            lr: 4e-4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0
            && self.weight_decay.is_finite();
        if !ok {
            return Err(Error::param(format!("invalid Adam configuration {self:?}")));
        }
        Ok(())
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.0,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            decay_mode: DecayMode::Decoupled,
            exclude_bias_and_embedding: false,
        }
    }
}

/// Weight-decay presets keyed to dataset size (per-class sample count
/// shrinking from large to small calls for stronger decay).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayPreset {
    NoDecay,
    SmallDecay,
    MediumDecay,
    LargeDecay,
}

impl DecayPreset {
    /// `(λ_D, λ_G)`.
    pub fn values(self) -> (f64, f64) {
        match self {
            DecayPreset::NoDecay => (0.0, 0.0),
            DecayPreset::SmallDecay => (5e-4, 1e-3),
            DecayPreset::MediumDecay => (1e-4, 1e-3),
            DecayPreset::LargeDecay => (1e-5, 1e-3),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DecayPreset::NoDecay => "no-decay",
            DecayPreset::SmallDecay => "small-decay",
            DecayPreset::MediumDecay => "medium-decay",
            DecayPreset::LargeDecay => "large-decay",
        }
    }
}

impl std::str::FromStr for DecayPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no-decay" => Ok(DecayPreset::NoDecay),
            "small-decay" => Ok(DecayPreset::SmallDecay),
            "medium-decay" => Ok(DecayPreset::MediumDecay),
            "large-decay" => Ok(DecayPreset::LargeDecay),
            other => Err(Error::param(format!("unknown decay preset {other:?}"))),
        }
    }
}

/// Adam moments for one parameter list.
#[derive(Debug, Clone)]
pub struct AdamState {
    config: AdamConfig,
    names: Vec<String>,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(AdamState {
            config,
            names: Vec::new(),
            m: Vec::new(),
            v: Vec::new(),
            step: 0,
        })
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update of every parameter from its accumulated `grad`.
    ///
    /// Moments are created on the first call; later calls must pass the
    /// same parameters in the same order.
    pub fn step(&mut self, mut params: Vec<&mut Param>) -> Result<()> {
        if self.step == 0 && self.m.is_empty() {
            self.names = params.iter().map(|p| p.name.clone()).collect();
            self.m = params
                .iter()
                .map(|p| Tensor::zeros(p.value.shape()))
                .collect();
            self.v = self.m.clone();
        }
        if params.len() != self.m.len() {
            return Err(Error::LengthMismatch {
                context: "AdamState::step parameter count",
                left: self.m.len(),
                right: params.len(),
            });
        }
        for (p, m) in params.iter().zip(&self.m) {
            p.value.expect_shape(m.shape(), "AdamState::step")?;
            p.grad.expect_shape(m.shape(), "AdamState::step gradient")?;
            if !p.grad.is_finite() {
                return Err(Error::NonFinite(format!(
                    "gradient of parameter {}",
                    p.name
                )));
            }
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let decay = if c.exclude_bias_and_embedding && p.kind != ParamKind::Weight {
                0.0
            } else {
                c.weight_decay
            };
            let Param { value, grad, .. } = &mut **p;
            for (((theta, &g), m), v) in value
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                let g = match c.decay_mode {
                    DecayMode::Coupled => g + decay * *theta,
                    DecayMode::Decoupled => g,
                };
                *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                let old = *theta;
                *theta -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
                if c.decay_mode == DecayMode::Decoupled {
                    *theta -= c.lr * decay * old;
                }
            }
        }
        Ok(())
    }
}

/// Result of a finite-difference comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
}

/// Relative error `|a − b| / max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Compares `analytic` against central differences
/// `(f(x + h·e_i) − f(x − h·e_i)) / 2h` at `point`.
pub fn grad_check(
    mut f: impl FnMut(&[f64]) -> f64,
    analytic: &[f64],
    point: &[f64],
    step: f64,
) -> GradCheckReport {
    assert_eq!(
        analytic.len(),
        point.len(),
        "gradient and point lengths differ"
    );
    let mut x = point.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
    };
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + step;
        let fp = f(&x);
        x[i] = orig - step;
        let fm = f(&x);
        x[i] = orig;
        let numeric = (fp - fm) / (2.0 * step);
        let err = relative_error(analytic[i], numeric);
        if err > report.max_rel_error || err.is_nan() {
            report = GradCheckReport {
                max_rel_error: if err.is_nan() { f64::INFINITY } else { err },
                worst_index: i,
            };
        }
    }
    report
}

/// Truncation threshold for latent sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationConfig {
    sigma: f64,
}

impl TruncationConfig {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::param(format!(
                "truncation threshold must be positive, got {sigma}"
            )));
        }
        Ok(TruncationConfig { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Standard-normal components, each redrawn until `|z_i| ≤ σ`.
pub fn truncated_sample(
    rng: &mut crate::Rng,
    dim: usize,
    truncation: TruncationConfig,
) -> Vec<f64> {
    let sigma = truncation.sigma();
    (0..dim)
        .map(|_| loop {
            let v: f64 = StandardNormal.sample(rng);
            if v.abs() <= sigma {
                break v;
            }
        })
        .collect()
}

/// Untruncated standard-normal latents, `[rows, dim]`.
pub fn normal_latents(rng: &mut crate::Rng, rows: usize, dim: usize) -> Tensor {
    crate::net::normal_tensor(rng, &[rows, dim], 1.0)
}
