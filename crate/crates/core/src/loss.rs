//! Loss functions with exact gradients with respect to the raw scores.
//!
//! Every exponential sum is evaluated as a log-sum-exp shifted by its
//! largest exponent, so scores of magnitude `1e4` and beyond stay finite.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Raw discriminator scores (logits). Entries are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("score vector entry {i}")));
        }
        Ok(ScoreVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<&[f64]> for ScoreVector {
    type Error = Error;
    fn try_from(v: &[f64]) -> Result<Self> {
        ScoreVector::new(v.to_vec())
    }
}

/// Multi-label target: `+1` positive, `-1` negative, `0` ignored.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OmniTarget(Vec<i8>);

impl OmniTarget {
    pub fn new(labels: Vec<i8>) -> Result<Self> {
        if let Some((index, &value)) = labels
            .iter()
            .enumerate()
            .find(|(_, v)| !(-1..=1).contains(*v))
        {
            return Err(Error::InvalidLabel { index, value });
        }
        Ok(OmniTarget(labels))
    }

    pub fn labels(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn positives(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(|(i, _)| i)
    }

    pub fn negatives(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == -1)
            .map(|(i, _)| i)
    }
}

/// Loss value together with `d loss / d score` for every score.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// Loss of a single scalar score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarLoss {
    pub value: f64,
    pub grad: f64,
}

/// `log(1 + Σ e^{x_i})`, computed with the largest exponent factored out.
pub fn log1p_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(0.0_f64, f64::max);
    if m == 0.0 {
        xs.iter().map(|x| x.exp()).sum::<f64>().ln_1p()
    } else {
        let s: f64 = (-m).exp() + xs.iter().map(|x| (x - m).exp()).sum::<f64>();
        m + s.ln()
    }
}

/// `log Σ e^{x_i}` for a non-empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn check_len(context: &'static str, left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch {
            context,
            left,
            right,
        });
    }
    Ok(())
}

/// Omni-loss on raw slices; writes the gradient into `grad` (which must be
/// zeroed by the caller for ignored entries to stay exactly zero).
pub(crate) fn omni_loss_into(s: &[f64], y: &[i8], grad: &mut [f64]) -> f64 {
    let mut neg = Vec::new();
    let mut pos = Vec::new();
    for (i, (&si, &yi)) in s.iter().zip(y).enumerate() {
        match yi {
            -1 => neg.push((i, si)),
            1 => pos.push((i, -si)),
            _ => {}
        }
    }
    let mut value = 0.0;
    for (terms, sign) in [(&neg, 1.0), (&pos, -1.0)] {
        if terms.is_empty() {
            continue;
        }
        let exps: Vec<f64> = terms.iter().map(|t| t.1).collect();
        let lse = log1p_sum_exp(&exps);
        value += lse;
        for &(i, e) in terms.iter() {
            grad[i] = sign * (e - lse).exp();
        }
    }
    value
}

/// `log(1 + Σ_{y_i=-1} e^{s_i}) + log(1 + Σ_{y_j=+1} e^{-s_j})`.
///
/// Ignored entries (`y_i = 0`) contribute nothing and get a gradient of
/// exactly `0.0`.
pub fn omni_loss(s: &ScoreVector, y: &OmniTarget) -> Result<LossResult> {
    check_len("omni_loss", s.len(), y.len())?;
    let mut grad = vec![0.0; s.len()];
    let value = omni_loss_into(s.values(), y.labels(), &mut grad);
    Ok(LossResult { value, grad })
}

/// Gradients of the pairwise unified loss.
#[derive(Debug, Clone, PartialEq)]
pub struct UnifiedLossResult {
    pub value: f64,
    pub grad_pos: Vec<f64>,
    pub grad_neg: Vec<f64>,
}

/// `log[1 + Σ_n Σ_p e^{γ(s_n - s_p + m)}]` over every negative/positive pair.
pub fn unified_loss(
    s_pos: &[f64],
    s_neg: &[f64],
    gamma: f64,
    margin: f64,
) -> Result<UnifiedLossResult> {
    if !(gamma > 0.0) {
        return Err(Error::param(format!(
            "unified loss scale must be positive, got {gamma}"
        )));
    }
    if s_pos.iter().chain(s_neg).any(|v| !v.is_finite()) || !margin.is_finite() {
        return Err(Error::NonFinite("unified_loss input".into()));
    }
    let np = s_pos.len();
    let mut z = Vec::with_capacity(np * s_neg.len());
    for &sn in s_neg {
        for &sp in s_pos {
            z.push(gamma * (sn - sp + margin));
        }
    }
    let mut grad_pos = vec![0.0; np];
    let mut grad_neg = vec![0.0; s_neg.len()];
    if z.is_empty() {
        return Ok(UnifiedLossResult {
            value: 0.0,
            grad_pos,
            grad_neg,
        });
    }
    let value = log1p_sum_exp(&z);
    for (n, gn) in grad_neg.iter_mut().enumerate() {
        for (p, gp) in grad_pos.iter_mut().enumerate() {
            let w = gamma * (z[n * np + p] - value).exp();
            *gn += w;
            *gp -= w;
        }
    }
    Ok(UnifiedLossResult {
        value,
        grad_pos,
        grad_neg,
    })
}

/// Evaluates the omni-loss two ways: as the sum of two unified losses
/// (`{0}` against the negatives, the positives against `{0}`, `γ = 1`,
/// `m = 0`) and directly. Returns `(via_unified, direct)`.
pub fn omni_from_unified_identity(s: &ScoreVector, y: &OmniTarget) -> Result<(f64, f64)> {
    let direct = omni_loss(s, y)?.value;
    let neg: Vec<f64> = y.negatives().map(|i| s.values()[i]).collect();
    let pos: Vec<f64> = y.positives().map(|i| s.values()[i]).collect();
    let neg_term = unified_loss(&[0.0], &neg, 1.0, 0.0)?.value;
    let pos_term = unified_loss(&pos, &[0.0], 1.0, 0.0)?.value;
    Ok((neg_term + pos_term, direct))
}

fn check_class(context: &'static str, index: usize, size: usize) -> Result<()> {
    if index >= size {
        return Err(Error::IndexOutOfRange {
            context,
            index,
            size,
        });
    }
    Ok(())
}

/// Multi-class hinge in sum form: `Σ_{k≠t} max(0, 1 + l_k - l_t)`.
/// The subgradient at a margin of exactly zero is taken as zero.
pub fn multi_hinge_loss(logits: &ScoreVector, target: usize) -> Result<LossResult> {
    check_class("multi_hinge_loss", target, logits.len())?;
    let l = logits.values();
    let mut grad = vec![0.0; l.len()];
    let mut value = 0.0;
    for k in 0..l.len() {
        if k == target {
            continue;
        }
        let margin = 1.0 + l[k] - l[target];
        if margin > 0.0 {
            value += margin;
            grad[k] += 1.0;
            grad[target] -= 1.0;
        }
    }
    Ok(LossResult { value, grad })
}

/// `-log softmax(l)_t`; gradient `softmax(l) - onehot(t)`.
pub fn softmax_ce_loss(logits: &ScoreVector, target: usize) -> Result<LossResult> {
    check_class("softmax_ce_loss", target, logits.len())?;
    let l = logits.values();
    let lse = log_sum_exp(l);
    let mut grad: Vec<f64> = l.iter().map(|v| (v - lse).exp()).collect();
    grad[target] -= 1.0;
    Ok(LossResult {
        value: lse - l[target],
        grad,
    })
}

/// Which side of the hinge GAN objective a score belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HingeRole {
    DReal,
    DFake,
    Generator,
}

/// Hinge GAN term: `max(0, 1 - s)` for real, `max(0, 1 + s)` for fake,
/// `-s` for the generator.
pub fn hinge_gan_loss(score: f64, role: HingeRole) -> Result<ScalarLoss> {
    if !score.is_finite() {
        return Err(Error::NonFinite("hinge_gan_loss score".into()));
    }
    Ok(match role {
        HingeRole::DReal => {
            let m = 1.0 - score;
            if m > 0.0 {
                ScalarLoss {
                    value: m,
                    grad: -1.0,
                }
            } else {
                ScalarLoss {
                    value: 0.0,
                    grad: 0.0,
                }
            }
        }
        HingeRole::DFake => {
            let m = 1.0 + score;
            if m > 0.0 {
                ScalarLoss {
                    value: m,
                    grad: 1.0,
                }
            } else {
                ScalarLoss {
                    value: 0.0,
                    grad: 0.0,
                }
            }
        }
        HingeRole::Generator => ScalarLoss {
            value: -score,
            grad: -1.0,
        },
    })
}

/// Per-location multi-label targets laid out `[channels, height, width]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OmniTargetMap {
    shape: [usize; 3],
    labels: Vec<i8>,
}

impl OmniTargetMap {
    pub fn new(shape: [usize; 3], labels: Vec<i8>) -> Result<Self> {
        let n = shape.iter().product::<usize>();
        check_len("OmniTargetMap::new", n, labels.len())?;
        OmniTarget::new(labels.clone())?;
        Ok(OmniTargetMap { shape, labels })
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    /// The channel vector at location `(i, j)`.
    pub fn at(&self, i: usize, j: usize) -> OmniTarget {
        let [c, h, w] = self.shape;
        OmniTarget((0..c).map(|k| self.labels[k * h * w + i * w + j]).collect())
    }
}

/// Mean over the `H×W` locations of the omni-loss of each channel vector.
///
/// `score_map` has shape `[channels, H, W]`; the returned gradient is
/// flattened in the same layout.
pub fn perpixel_omni_loss(score_map: &Tensor, target_map: &OmniTargetMap) -> Result<LossResult> {
    let shape = target_map.shape();
    score_map.expect_shape(&shape, "perpixel_omni_loss")?;
    if !score_map.is_finite() {
        return Err(Error::NonFinite("perpixel_omni_loss score map".into()));
    }
    let [c, h, w] = shape;
    let plane = h * w;
    let mut grad = vec![0.0; c * plane];
    if plane == 0 {
        return Ok(LossResult { value: 0.0, grad });
    }
    let scale = 1.0 / plane as f64;
    let mut s = vec![0.0; c];
    let mut y = vec![0i8; c];
    let mut g = vec![0.0; c];
    let mut total = 0.0;
    for p in 0..plane {
        for k in 0..c {
            s[k] = score_map.data()[k * plane + p];
            y[k] = target_map.labels[k * plane + p];
            g[k] = 0.0;
        }
        total += omni_loss_into(&s, &y, &mut g);
        for k in 0..c {
            grad[k * plane + p] = g[k] * scale;
        }
    }
    Ok(LossResult {
        value: total * scale,
        grad,
    })
}
