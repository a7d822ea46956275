//! A small manually differentiated network library.
//!
//! Layers cache what their backward pass needs during `forward`; `backward`
//! accumulates parameter gradients into [`Param::grad`] and returns the
//! gradient with respect to the layer input. A network instance is therefore
//! stateful and must not be shared between threads while in use.

mod dense;
mod discriminator;
mod generator;
mod mlp;

pub use dense::Dense;
pub use discriminator::{Discriminator, DiscriminatorConfig, DiscriminatorHead};
pub use generator::{Generator, GeneratorConfig, GeneratorHead};
pub use mlp::{Activation, Mlp};

use crate::error::Result;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

/// Leaky-rectifier slope used in every trunk.
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamKind {
    Weight,
    Bias,
    Embedding,
}

/// A learned tensor and its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(name: impl Into<String>, kind: ParamKind, value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param {
            name: name.into(),
            kind,
            value,
            grad,
        }
    }
}

/// Anything holding learned parameters.
pub trait Module {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.grad.fill(0.0);
        }
    }

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    /// Snapshot of the accumulated gradients, in `params()` order.
    fn gradients(&self) -> Vec<Tensor> {
        self.params().iter().map(|p| p.grad.clone()).collect()
    }

    /// Flat copy of every parameter value, in `params()` order.
    fn flat_params(&self) -> Vec<f64> {
        self.params()
            .iter()
            .flat_map(|p| p.value.data().iter().copied())
            .collect()
    }

    fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        let total = self.num_params();
        if flat.len() != total {
            return Err(crate::Error::LengthMismatch {
                context: "Module::set_flat_params",
                left: total,
                right: flat.len(),
            });
        }
        let mut offset = 0;
        for p in self.params_mut() {
            let n = p.value.len();
            p.value
                .data_mut()
                .copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    fn flat_grads(&self) -> Vec<f64> {
        self.params()
            .iter()
            .flat_map(|p| p.grad.data().iter().copied())
            .collect()
    }
}

/// A conditional sample generator that can be trained by backpropagation.
pub trait SampleGenerator: Module {
    fn noise_dim(&self) -> usize;
    fn num_classes(&self) -> usize;
    /// Width of one flattened generated sample.
    fn sample_dim(&self) -> usize;
    /// `z` is `[batch, noise_dim]`; returns `[batch, sample_dim]`.
    fn generate(&mut self, z: &Tensor, classes: &[usize]) -> Result<Tensor>;
    /// Gradient with respect to `z`; parameter gradients are accumulated.
    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor>;
}

pub(crate) fn normal_tensor(rng: &mut crate::Rng, shape: &[usize], std: f64) -> Tensor {
    use rand_distr::{Distribution, StandardNormal};
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let v: f64 = StandardNormal.sample(rng);
            v * std
        })
        .collect();
    Tensor::from_vec(shape, data).expect("shape product matches length")
}
