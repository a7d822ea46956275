use super::{Dense, Module, Param, LEAKY_SLOPE};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
    Tanh,
}

impl Activation {
    pub fn leaky() -> Self {
        Activation::LeakyRelu(LEAKY_SLOPE)
    }

    fn apply(self, v: &mut [f64]) {
        match self {
            Activation::Identity => {}
            Activation::Relu => v.iter_mut().for_each(|x| *x = x.max(0.0)),
            Activation::LeakyRelu(a) => v.iter_mut().for_each(|x| {
                if *x < 0.0 {
                    *x *= a
                }
            }),
            Activation::Tanh => v.iter_mut().for_each(|x| *x = x.tanh()),
        }
    }

    /// Multiplies `grad` in place by the derivative, expressed through the
    /// activation output `y`.
    fn backward(self, y: &[f64], grad: &mut [f64]) {
        match self {
            Activation::Identity => {}
            Activation::Relu => grad.iter_mut().zip(y).for_each(|(g, &y)| {
                if y <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::LeakyRelu(a) => grad.iter_mut().zip(y).for_each(|(g, &y)| {
                if y < 0.0 {
                    *g *= a
                }
            }),
            Activation::Tanh => grad.iter_mut().zip(y).for_each(|(g, &y)| *g *= 1.0 - y * y),
        }
    }
}

/// A stack of dense layers, each followed by its activation.
///
/// Post-activation outputs of every layer are cached; they double as
/// feature taps for the discriminator-feature distance.
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Dense>,
    activations: Vec<Activation>,
    outputs: Vec<Tensor>,
}

impl Mlp {
    /// `dims = [in, h1, …, out]`; `activations` has one entry per layer.
    pub fn new(rng: &mut crate::Rng, dims: &[usize], activations: &[Activation]) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(Error::param(format!(
                "an MLP needs n+1 dims for n activations, got {} dims and {} activations",
                dims.len(),
                activations.len()
            )));
        }
        let layers = dims
            .windows(2)
            .map(|w| Dense::new(rng, w[0], w[1]))
            .collect();
        Ok(Mlp {
            layers,
            activations: activations.to_vec(),
            outputs: Vec::new(),
        })
    }

    pub fn from_layers(layers: Vec<Dense>, activations: Vec<Activation>) -> Result<Self> {
        if layers.len() != activations.len() || layers.is_empty() {
            return Err(Error::param("one activation per layer required"));
        }
        for w in layers.windows(2) {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::param("consecutive layer widths do not chain"));
            }
        }
        Ok(Mlp {
            layers,
            activations,
            outputs: Vec::new(),
        })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, Dense::out_dim)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        self.outputs.clear();
        let mut h = x.clone();
        for (layer, act) in self.layers.iter_mut().zip(&self.activations) {
            h = layer.forward(&h)?;
            act.apply(h.data_mut());
            debug_assert!(h.is_finite(), "non-finite activation");
            self.outputs.push(h.clone());
        }
        Ok(h)
    }

    /// Inference-only forward; leaves caches untouched.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for (layer, act) in self.layers.iter().zip(&self.activations) {
            h = layer.apply(&h)?;
            act.apply(h.data_mut());
        }
        Ok(h)
    }

    /// Post-activation output of layer `i` from the last `forward`.
    pub fn output(&self, i: usize) -> Option<&Tensor> {
        self.outputs.get(i)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        self.backward_with_taps(Some(grad_out), &[])
    }

    /// Backward pass with extra gradients injected at intermediate layer
    /// outputs. `taps` pairs a layer index with `d loss / d output_i`.
    pub fn backward_with_taps(
        &mut self,
        grad_out: Option<&Tensor>,
        taps: &[(usize, Tensor)],
    ) -> Result<Tensor> {
        let n = self.layers.len();
        if self.outputs.len() != n {
            return Err(Error::BackwardBeforeForward("Mlp"));
        }
        let mut grad: Option<Tensor> = grad_out.cloned();
        for i in (0..n).rev() {
            for (_, t) in taps.iter().filter(|(k, _)| *k == i) {
                match grad.as_mut() {
                    Some(g) => g.add_assign(t)?,
                    None => grad = Some(t.clone()),
                }
            }
            let Some(mut g) = grad.take() else {
                continue;
            };
            g.expect_shape(self.outputs[i].shape(), "Mlp::backward")?;
            self.activations[i].backward(self.outputs[i].data(), g.data_mut());
            grad = Some(self.layers[i].backward(&g)?);
        }
        Ok(grad.unwrap_or_else(|| Tensor::zeros(&[self.outputs[0].rows(), self.in_dim()])))
    }
}

impl Module for Mlp {
    fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.params_mut())
            .collect()
    }
}

impl Mlp {
    /// Names every parameter `<prefix>.<layer>.<weight|bias>`.
    pub fn with_prefix(mut self, prefix: &str) -> Self {
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.set_prefix(&format!("{prefix}.{i}"));
        }
        self
    }
}
