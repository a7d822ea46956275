use super::{normal_tensor, Module, Param, ParamKind};
use crate::error::{Error, Result};
use crate::tensor::{gemm, Tensor};

/// Fully connected layer `y = x Wᵀ + b` over a `[batch, in]` input.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: Param,
    pub bias: Param,
    input: Option<Tensor>,
}

impl Dense {
    /// Weights drawn from `N(0, 1/in)`, zero bias.
    pub fn new(rng: &mut crate::Rng, in_dim: usize, out_dim: usize) -> Self {
        let std = 1.0 / (in_dim.max(1) as f64).sqrt();
        Self::from_parts(
            normal_tensor(rng, &[out_dim, in_dim], std),
            Tensor::zeros(&[out_dim]),
        )
        .expect("consistent shapes")
    }

    /// `weight` is `[out, in]`, `bias` is `[out]`.
    pub fn from_parts(weight: Tensor, bias: Tensor) -> Result<Self> {
        if weight.shape().len() != 2 || bias.shape() != [weight.shape()[0]] {
            return Err(Error::ShapeMismatch {
                context: "Dense::from_parts",
                expected: vec![weight.shape()[0]],
                actual: bias.shape().to_vec(),
            });
        }
        Ok(Dense {
            weight: Param::new("weight", ParamKind::Weight, weight),
            bias: Param::new("bias", ParamKind::Bias, bias),
            input: None,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.value.shape()[0]
    }

    /// Input cached by the last `forward`.
    pub fn input(&self) -> Option<&Tensor> {
        self.input.as_ref()
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = self.apply(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    /// Forward without caching (inference only).
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let (in_dim, out_dim) = (self.in_dim(), self.out_dim());
        if x.shape().len() != 2 || x.cols() != in_dim {
            return Err(Error::ShapeMismatch {
                context: "Dense::forward",
                expected: vec![x.rows(), in_dim],
                actual: x.shape().to_vec(),
            });
        }
        let batch = x.rows();
        let mut y = Tensor::zeros(&[batch, out_dim]);
        let b = self.bias.value.data();
        for r in 0..batch {
            y.row_mut(r).copy_from_slice(b);
        }
        gemm(
            batch,
            in_dim,
            out_dim,
            1.0,
            x.data(),
            false,
            self.weight.value.data(),
            true,
            1.0,
            y.data_mut(),
        );
        Ok(y)
    }

    /// Accumulates `dW += gᵀx`, `db += Σ g` and returns `g W`.
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let input = self
            .input
            .as_ref()
            .ok_or(Error::BackwardBeforeForward("Dense"))?;
        let (in_dim, out_dim) = (self.in_dim(), self.out_dim());
        let batch = input.rows();
        grad_out.expect_shape(&[batch, out_dim], "Dense::backward")?;
        gemm(
            out_dim,
            batch,
            in_dim,
            1.0,
            grad_out.data(),
            true,
            input.data(),
            false,
            1.0,
            self.weight.grad.data_mut(),
        );
        let gb = self.bias.grad.data_mut();
        for r in 0..batch {
            for (g, v) in gb.iter_mut().zip(grad_out.row(r)) {
                *g += v;
            }
        }
        let mut grad_in = Tensor::zeros(&[batch, in_dim]);
        gemm(
            batch,
            out_dim,
            in_dim,
            1.0,
            grad_out.data(),
            false,
            self.weight.value.data(),
            false,
            0.0,
            grad_in.data_mut(),
        );
        Ok(grad_in)
    }

    /// Names the parameters `<prefix>.weight` and `<prefix>.bias`.
    pub fn set_prefix(&mut self, prefix: &str) {
        self.weight.name = format!("{prefix}.weight");
        self.bias.name = format!("{prefix}.bias");
    }

    pub fn clear_cache(&mut self) {
        self.input = None;
    }
}

impl Module for Dense {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}
