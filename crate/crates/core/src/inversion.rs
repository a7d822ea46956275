//! Latent-space inversion against a discriminator-feature distance.
//!
//! Given a degraded observation `x̂ = φ(x)`, plain gradient descent on the
//! latent (and optionally the generator parameters) minimizes the L1
//! distance between discriminator trunk activations of `x̂` and of
//! `φ(G(z))`. The discriminator consumes full-size images, so degraded
//! images are lifted back before scoring: downsampled images by nearest
//! replication, grayscale by copying the gray channel to every channel.
//!
//! Images are `[H, W, C]` tensors, row-major.

use crate::error::{Error, Result};
use crate::inr::{bilinear_sample, make_coord_grid, FeatureGrid};
use crate::net::{Discriminator, Module, SampleGenerator};
use crate::optim::normal_latents;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

/// PSNR reported for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Degradation {
    Identity,
    Downsample { factor: usize },
    Grayscale,
}

impl std::str::FromStr for Degradation {
    type Err = Error;
    /// `identity`, `grayscale` or `downsample:<factor>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Degradation::Identity),
            "grayscale" => Ok(Degradation::Grayscale),
            _ => {
                let factor = s
                    .strip_prefix("downsample:")
                    .and_then(|f| f.parse::<usize>().ok())
                    .filter(|&f| f >= 1)
                    .ok_or_else(|| Error::param(format!("unknown degradation {s:?}")))?;
                Ok(Degradation::Downsample { factor })
            }
        }
    }
}

fn image_dims(x: &Tensor) -> Result<(usize, usize, usize)> {
    match *x.shape() {
        [h, w, c] => Ok((h, w, c)),
        _ => Err(Error::ShapeMismatch {
            context: "image tensor",
            expected: vec![0, 0, 0],
            actual: x.shape().to_vec(),
        }),
    }
}

/// Shape of `φ(x)` for an `[H, W, C]` input.
pub fn degraded_shape(shape: [usize; 3], d: Degradation) -> Result<[usize; 3]> {
    let [h, w, c] = shape;
    match d {
        Degradation::Identity => Ok(shape),
        Degradation::Grayscale => Ok([h, w, 1]),
        Degradation::Downsample { factor } => {
            if factor == 0 || h % factor != 0 || w % factor != 0 {
                return Err(Error::param(format!(
                    "image {h}×{w} is not divisible by downsample factor {factor}"
                )));
            }
            Ok([h / factor, w / factor, c])
        }
    }
}

/// Applies `φ`: identity copy, channel mean, or non-overlapping mean pooling.
pub fn degrade(x: &Tensor, d: Degradation) -> Result<Tensor> {
    let (h, w, c) = image_dims(x)?;
    let [oh, ow, oc] = degraded_shape([h, w, c], d)?;
    let src = x.data();
    let mut out = Tensor::zeros(&[oh, ow, oc]);
    match d {
        Degradation::Identity => return Ok(x.clone()),
        Degradation::Grayscale => {
            for (p, o) in out.data_mut().iter_mut().enumerate() {
                *o = src[p * c..(p + 1) * c].iter().sum::<f64>() / c as f64;
            }
        }
        Degradation::Downsample { factor } => {
            let scale = 1.0 / (factor * factor) as f64;
            let dst = out.data_mut();
            for i in 0..h {
                for j in 0..w {
                    let o = ((i / factor) * ow + j / factor) * c;
                    for k in 0..c {
                        dst[o + k] += src[(i * w + j) * c + k];
                    }
                }
            }
            dst.iter_mut().for_each(|v| *v *= scale);
        }
    }
    Ok(out)
}

/// Adjoint of [`degrade`] at an input of `shape`.
pub fn degrade_adjoint(grad: &Tensor, shape: [usize; 3], d: Degradation) -> Result<Tensor> {
    let [h, w, c] = shape;
    let [oh, ow, oc] = degraded_shape(shape, d)?;
    grad.expect_shape(&[oh, ow, oc], "degrade_adjoint")?;
    let g = grad.data();
    let mut out = Tensor::zeros(&[h, w, c]);
    let dst = out.data_mut();
    match d {
        Degradation::Identity => dst.copy_from_slice(g),
        Degradation::Grayscale => {
            for (i, v) in dst.iter_mut().enumerate() {
                *v = g[i / c] / c as f64;
            }
        }
        Degradation::Downsample { factor } => {
            let scale = 1.0 / (factor * factor) as f64;
            for i in 0..h {
                for j in 0..w {
                    let o = ((i / factor) * ow + j / factor) * c;
                    for k in 0..c {
                        dst[(i * w + j) * c + k] = g[o + k] * scale;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Maps a degraded observation back to the discriminator's `[H, W, C]`
/// input size.
pub fn lift(obs: &Tensor, shape: [usize; 3], d: Degradation) -> Result<Tensor> {
    let [h, w, c] = shape;
    let [oh, ow, oc] = degraded_shape(shape, d)?;
    obs.expect_shape(&[oh, ow, oc], "lift")?;
    let src = obs.data();
    let mut out = Tensor::zeros(&[h, w, c]);
    let dst = out.data_mut();
    match d {
        Degradation::Identity => dst.copy_from_slice(src),
        Degradation::Grayscale => {
            for (i, v) in dst.iter_mut().enumerate() {
                *v = src[i / c];
            }
        }
        Degradation::Downsample { factor } => {
            for i in 0..h {
                for j in 0..w {
                    let o = ((i / factor) * ow + j / factor) * c;
                    dst[(i * w + j) * c..(i * w + j + 1) * c].copy_from_slice(&src[o..o + c]);
                }
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`lift`].
pub fn lift_adjoint(grad: &Tensor, shape: [usize; 3], d: Degradation) -> Result<Tensor> {
    let [h, w, c] = shape;
    grad.expect_shape(&shape, "lift_adjoint")?;
    let [oh, ow, oc] = degraded_shape(shape, d)?;
    let g = grad.data();
    let mut out = Tensor::zeros(&[oh, ow, oc]);
    let dst = out.data_mut();
    match d {
        Degradation::Identity => dst.copy_from_slice(g),
        Degradation::Grayscale => {
            for (i, v) in g.iter().enumerate() {
                dst[i / c] += v;
            }
        }
        Degradation::Downsample { factor } => {
            for i in 0..h {
                for j in 0..w {
                    let o = ((i / factor) * ow + j / factor) * c;
                    for k in 0..c {
                        dst[o + k] += g[(i * w + j) * c + k];
                    }
                }
            }
        }
    }
    Ok(out)
}

fn check_layers(d: &Discriminator, layers: &[usize]) -> Result<()> {
    if layers.is_empty() {
        return Err(Error::param("feature layer set must be non-empty"));
    }
    if let Some(&bad) = layers.iter().find(|&&i| i >= d.trunk_depth()) {
        return Err(Error::IndexOutOfRange {
            context: "discriminator feature layer",
            index: bad,
            size: d.trunk_depth(),
        });
    }
    Ok(())
}

fn as_batch(x: &Tensor) -> Result<Tensor> {
    x.clone().reshape(&[1, x.len()])
}

/// `Σ_{i ∈ layers} mean |D_i(x1) − D_i(x2)|` over trunk activations.
pub fn feature_distance(
    d: &mut Discriminator,
    x1: &Tensor,
    x2: &Tensor,
    layers: &[usize],
) -> Result<f64> {
    Ok(feature_distance_grad(d, x1, x2, layers)?.0)
}

/// Distance and its gradient with respect to `x1` (shaped like `x1`).
///
/// The subgradient of `|·|` at zero is taken as zero. Discriminator
/// parameter gradients are left untouched.
pub fn feature_distance_grad(
    d: &mut Discriminator,
    x1: &Tensor,
    x2: &Tensor,
    layers: &[usize],
) -> Result<(f64, Tensor)> {
    check_layers(d, layers)?;
    x2.expect_shape(x1.shape(), "feature_distance")?;
    let f2 = d.features(&as_batch(x2)?)?;
    let f1 = d.features(&as_batch(x1)?)?;
    let mut value = 0.0;
    let mut taps = Vec::with_capacity(layers.len());
    for &i in layers {
        let (a, b) = (&f1[i], &f2[i]);
        let n = a.len() as f64;
        let mut g = Tensor::zeros(a.shape());
        for ((gv, &av), &bv) in g.data_mut().iter_mut().zip(a.data()).zip(b.data()) {
            let diff = av - bv;
            value += diff.abs() / n;
            *gv = if diff > 0.0 {
                1.0 / n
            } else if diff < 0.0 {
                -1.0 / n
            } else {
                0.0
            };
        }
        taps.push((i, g));
    }
    let saved: Vec<Tensor> = d.gradients();
    let gx = d.features_backward(&taps)?;
    for (p, g) in d.params_mut().into_iter().zip(saved) {
        p.grad = g;
    }
    Ok((value, gx.reshape(x1.shape())?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitStrategy {
    Zero,
    Random {
        seed: u64,
    },
    /// Lowest-objective of `k` random draws.
    BestOfK {
        k: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig {
    pub steps: usize,
    pub lr_z: f64,
    /// Learning rate for joint generator finetuning, when enabled.
    pub finetune_lr: Option<f64>,
    pub layers: Vec<usize>,
    pub init: InitStrategy,
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig {
            steps: 300,
            lr_z: 0.05,
            finetune_lr: None,
            layers: vec![0, 1],
            init: InitStrategy::Random { seed: 0 },
        }
    }
}

#[derive(Debug, Clone)]
pub struct InversionResult {
    pub z: Vec<f64>,
    /// Generator parameters after finetuning, in `params()` order.
    pub params: Option<Vec<f64>>,
    /// Generator output for `z` at its native size, `[H, W, C]`.
    pub restored: Tensor,
    /// Objective before each step, then the final value.
    pub trace: Vec<f64>,
}

struct Problem<'a, G> {
    g: &'a mut G,
    d: &'a mut Discriminator,
    class: usize,
    shape: [usize; 3],
    degradation: Degradation,
    layers: &'a [usize],
    target: Tensor,
}

impl<G: SampleGenerator> Problem<'_, G> {
    fn objective(&mut self, z: &[f64]) -> Result<f64> {
        Ok(self.evaluate(z, false)?.0)
    }

    /// Objective and, when `grad` is set, its gradient with respect to `z`
    /// (generator parameter gradients are accumulated as a side effect).
    fn evaluate(&mut self, z: &[f64], grad: bool) -> Result<(f64, Option<Vec<f64>>, Tensor)> {
        let zt = Tensor::from_vec(&[1, z.len()], z.to_vec())?;
        let x = self.g.generate(&zt, &[self.class])?.reshape(&self.shape)?;
        let lifted = lift(
            &degrade(&x, self.degradation)?,
            self.shape,
            self.degradation,
        )?;
        let (value, gl) = feature_distance_grad(self.d, &lifted, &self.target, self.layers)?;
        if !value.is_finite() {
            return Err(Error::NonFinite(format!(
                "inversion objective (|z|∞ = {:.3e})",
                z.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            )));
        }
        if !grad {
            return Ok((value, None, x));
        }
        let gobs = lift_adjoint(&gl, self.shape, self.degradation)?;
        let gx = degrade_adjoint(&gobs, self.shape, self.degradation)?;
        let gz = self.g.backward(&gx.reshape(&[1, x.len()])?)?;
        Ok((value, Some(gz.into_data()), x))
    }
}

/// Gradient descent on `z` (and the generator's parameters when
/// `finetune_lr` is set) minimizing the feature distance between the
/// lifted observation and the lifted `φ(G(z))`.
///
/// `shape` is the generator's native `[H, W, C]` output shape.
#[allow(clippy::too_many_arguments)]
pub fn invert<G: SampleGenerator>(
    g: &mut G,
    d: &mut Discriminator,
    observation: &Tensor,
    class: usize,
    shape: [usize; 3],
    degradation: Degradation,
    config: &InversionConfig,
) -> Result<InversionResult> {
    check_layers(d, &config.layers)?;
    if !(config.lr_z > 0.0) || config.finetune_lr.is_some_and(|lr| !(lr > 0.0)) {
        return Err(Error::param("inversion learning rates must be positive"));
    }
    if shape.iter().product::<usize>() != g.sample_dim() {
        return Err(Error::param(format!(
            "generator emits {} values, not an image of shape {shape:?}",
            g.sample_dim()
        )));
    }
    let target = lift(observation, shape, degradation)?;
    let dz = g.noise_dim();
    let mut problem = Problem {
        g,
        d,
        class,
        shape,
        degradation,
        layers: &config.layers,
        target,
    };
    let mut z = match config.init {
        InitStrategy::Zero => vec![0.0; dz],
        InitStrategy::Random { seed } => {
            normal_latents(&mut crate::rng_from_seed(seed), 1, dz).into_data()
        }
        InitStrategy::BestOfK { k, seed } => {
            if k == 0 {
                return Err(Error::param("best-of-k initialisation needs k ≥ 1"));
            }
            let candidates = normal_latents(&mut crate::rng_from_seed(seed), k, dz);
            let mut best = (f64::INFINITY, 0);
            for r in 0..k {
                let v = problem.objective(candidates.row(r))?;
                if v < best.0 {
                    best = (v, r);
                }
            }
            candidates.row(best.1).to_vec()
        }
    };
    let mut trace = Vec::with_capacity(config.steps + 1);
    for _ in 0..config.steps {
        problem.g.zero_grad();
        let (value, gz, _) = problem.evaluate(&z, true)?;
        trace.push(value);
        for (zv, gv) in z.iter_mut().zip(gz.expect("gradient requested")) {
            *zv -= config.lr_z * gv;
        }
        if let Some(lr) = config.finetune_lr {
            for p in problem.g.params_mut() {
                let grad = p.grad.data().to_vec();
                for (v, gv) in p.value.data_mut().iter_mut().zip(grad) {
                    *v -= lr * gv;
                }
            }
        }
    }
    problem.g.zero_grad();
    let (value, _, restored) = problem.evaluate(&z, false)?;
    trace.push(value);
    Ok(InversionResult {
        z,
        params: config.finetune_lr.map(|_| problem.g.flat_params()),
        restored,
        trace,
    })
}

/// `10·log10(peak² / MSE)`, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &Tensor, b: &Tensor, peak: f64) -> Result<f64> {
    b.expect_shape(a.shape(), "psnr")?;
    if !(peak > 0.0) {
        return Err(Error::param("PSNR peak must be positive"));
    }
    let mse = mse(a, b)?;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

pub fn mse(a: &Tensor, b: &Tensor) -> Result<f64> {
    b.expect_shape(a.shape(), "mse")?;
    let n = a.len().max(1) as f64;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n)
}

/// Bilinear resize of an `[h, w, C]` image to `[height, width, C]` using
/// cell-center coordinates, clamped at the borders.
pub fn upsample_bilinear(img: &Tensor, height: usize, width: usize) -> Result<Tensor> {
    let (h, w, c) = image_dims(img)?;
    let mut planar = vec![0.0; h * w * c];
    for p in 0..h * w {
        for k in 0..c {
            planar[k * h * w + p] = img.data()[p * c + k];
        }
    }
    let grid = FeatureGrid::new(c, h, w, planar)?;
    bilinear_sample(&grid, &make_coord_grid(height, width)?).reshape(&[height, width, c])
}
