//! Synthetic class-conditional datasets and desk-scale quality metrics.
//!
//! Both datasets are Gaussian mixtures: every sample is a mode center plus
//! isotropic noise of standard deviation `mode_std`. All randomness comes
//! from [`crate::Rng`] seeded with the dataset seed.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyDataset {
    samples: Tensor,
    labels: Vec<usize>,
    /// `[classes, modes_per_class, dim]`.
    mode_centers: Tensor,
    mode_std: f64,
}

impl ToyDataset {
    fn generate(mode_centers: Tensor, mode_std: f64, n: usize, seed: u64) -> Self {
        let (c, m, d) = (
            mode_centers.shape()[0],
            mode_centers.shape()[1],
            mode_centers.shape()[2],
        );
        let mut rng = crate::rng_from_seed(seed);
        let mut samples = Tensor::zeros(&[n, d]);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let k = i % (c * m);
            let center = &mode_centers.data()[k * d..(k + 1) * d];
            for (x, &mu) in samples.row_mut(i).iter_mut().zip(center) {
                let e: f64 = StandardNormal.sample(&mut rng);
                *x = mu + mode_std * e;
            }
            labels.push(k / m);
        }
        ToyDataset {
            samples,
            labels,
            mode_centers,
            mode_std,
        }
    }

    pub fn samples(&self) -> &Tensor {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn mode_centers(&self) -> &Tensor {
        &self.mode_centers
    }

    pub fn mode_std(&self) -> f64 {
        self.mode_std
    }

    pub fn num_classes(&self) -> usize {
        self.mode_centers.shape()[0]
    }

    pub fn modes_per_class(&self) -> usize {
        self.mode_centers.shape()[1]
    }

    pub fn dim(&self) -> usize {
        self.mode_centers.shape()[2]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn center(&self, class: usize, mode: usize) -> &[f64] {
        let (m, d) = (self.modes_per_class(), self.dim());
        let k = class * m + mode;
        &self.mode_centers.data()[k * d..(k + 1) * d]
    }

    /// A batch drawn uniformly with replacement.
    pub fn sample_batch(&self, rng: &mut crate::Rng, batch: usize) -> (Tensor, Vec<usize>) {
        let d = self.dim();
        let mut x = Tensor::zeros(&[batch, d]);
        let mut y = Vec::with_capacity(batch);
        for r in 0..batch {
            let i = rng.gen_range(0..self.len());
            x.row_mut(r).copy_from_slice(self.samples.row(i));
            y.push(self.labels[i]);
        }
        (x, y)
    }
}

fn check_counts(classes: usize, modes: usize, n: usize, std: f64) -> Result<()> {
    if classes == 0 || modes == 0 || n == 0 {
        return Err(Error::param("dataset counts must be positive"));
    }
    if !(std > 0.0) || !std.is_finite() {
        return Err(Error::param(format!(
            "mode std must be positive, got {std}"
        )));
    }
    Ok(())
}

/// 2-D rings: class `c` places its modes on the circle of radius `1 + c`
/// at angles `2π(m + c/C)/modes`. Samples cycle through (class, mode).
pub fn make_gaussian_ring(
    classes: usize,
    modes_per_class: usize,
    mode_std: f64,
    n: usize,
    seed: u64,
) -> Result<ToyDataset> {
    check_counts(classes, modes_per_class, n, mode_std)?;
    let mut centers = Vec::with_capacity(classes * modes_per_class * 2);
    for c in 0..classes {
        let radius = 1.0 + c as f64;
        for m in 0..modes_per_class {
            let angle = 2.0 * PI * (m as f64 + c as f64 / classes as f64) / modes_per_class as f64;
            centers.push(radius * angle.cos());
            centers.push(radius * angle.sin());
        }
    }
    let centers = Tensor::from_vec(&[classes, modes_per_class, 2], centers)?;
    Ok(ToyDataset::generate(centers, mode_std, n, seed))
}

/// Geometry of the procedural image dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageShape {
    pub height: usize,
    pub width: usize,
}

impl ImageShape {
    pub fn dim(&self) -> usize {
        self.height * self.width * 3
    }
}

/// Procedural `H×W×3` images laid out row-major `(row, col, channel)`.
///
/// Class `c` is a plane wave at angle `πc/C` tinted with a class colour;
/// mode `m` shifts its phase by `2πm/modes`. Values stay within `±0.8`
/// before noise.
pub fn make_pattern_images(
    classes: usize,
    modes_per_class: usize,
    mode_std: f64,
    n: usize,
    shape: ImageShape,
    seed: u64,
) -> Result<ToyDataset> {
    check_counts(classes, modes_per_class, n, mode_std)?;
    if shape.height == 0 || shape.width == 0 {
        return Err(Error::param("image dimensions must be positive"));
    }
    let d = shape.dim();
    let mut centers = Vec::with_capacity(classes * modes_per_class * d);
    for c in 0..classes {
        let theta = PI * c as f64 / classes as f64;
        let hue = 2.0 * PI * c as f64 / classes as f64;
        let tint = [
            0.6 + 0.4 * hue.cos(),
            0.6 + 0.4 * (hue - 2.0 * PI / 3.0).cos(),
            0.6 + 0.4 * (hue + 2.0 * PI / 3.0).cos(),
        ];
        for m in 0..modes_per_class {
            let phase = 2.0 * PI * m as f64 / modes_per_class as f64;
            for i in 0..shape.height {
                let v = -1.0 + (2 * i + 1) as f64 / shape.height as f64;
                for j in 0..shape.width {
                    let u = -1.0 + (2 * j + 1) as f64 / shape.width as f64;
                    let wave = (PI * 1.5 * (u * theta.cos() + v * theta.sin()) + phase).sin();
                    for t in tint {
                        centers.push(0.8 * wave * t);
                    }
                }
            }
        }
    }
    let centers = Tensor::from_vec(&[classes, modes_per_class, d], centers)?;
    Ok(ToyDataset::generate(centers, mode_std, n, seed))
}

/// Desk-scale quality metrics of a generated batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityMetrics {
    pub mode_coverage: f64,
    pub class_fidelity: f64,
    pub high_quality_fraction: f64,
}

/// Assigns each generated sample to its nearest mode center.
///
/// A sample is high quality when that distance is at most
/// `radius_mult · mode_std`. Class fidelity is the fraction of high-quality
/// samples whose nearest center belongs to the intended class; coverage is
/// the fraction of modes hit by at least one high-quality, correctly
/// classed sample.
pub fn mode_coverage(
    generated: &Tensor,
    intended: &[usize],
    dataset: &ToyDataset,
    radius_mult: f64,
) -> Result<QualityMetrics> {
    if !(radius_mult > 0.0) {
        return Err(Error::param("radius multiplier must be positive"));
    }
    let d = dataset.dim();
    if generated.shape().len() != 2 || generated.cols() != d {
        return Err(Error::ShapeMismatch {
            context: "mode_coverage samples",
            expected: vec![generated.rows(), d],
            actual: generated.shape().to_vec(),
        });
    }
    if intended.len() != generated.rows() {
        return Err(Error::LengthMismatch {
            context: "mode_coverage intended classes",
            left: generated.rows(),
            right: intended.len(),
        });
    }
    let (c, m) = (dataset.num_classes(), dataset.modes_per_class());
    let threshold = radius_mult * dataset.mode_std();
    let centers = dataset.mode_centers().data();
    let mut hit = vec![false; c * m];
    let mut hq = 0usize;
    let mut faithful = 0usize;
    for (r, &want) in intended.iter().enumerate() {
        let x = generated.row(r);
        let (best, dist2) = (0..c * m)
            .map(|k| {
                let ctr = &centers[k * d..(k + 1) * d];
                let d2: f64 = x.iter().zip(ctr).map(|(a, b)| (a - b) * (a - b)).sum();
                (k, d2)
            })
            .fold(
                (0, f64::INFINITY),
                |acc, cur| if cur.1 < acc.1 { cur } else { acc },
            );
        if dist2.sqrt() <= threshold {
            hq += 1;
            if best / m == want {
                faithful += 1;
                hit[best] = true;
            }
        }
    }
    let n = intended.len().max(1) as f64;
    Ok(QualityMetrics {
        mode_coverage: hit.iter().filter(|&&h| h).count() as f64 / (c * m) as f64,
        class_fidelity: if hq == 0 {
            0.0
        } else {
            faithful as f64 / hq as f64
        },
        high_quality_fraction: hq as f64 / n,
    })
}
