use super::{normal_tensor, Activation, Dense, Mlp, Module, Param, ParamKind};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiscriminatorHead {
    /// Linear head emitting `out_dim` logits (omni, classifier heads).
    Vector { out_dim: usize },
    /// `⟨V_y, f₁(x)⟩ + f₂(f₁(x))` with a class embedding matrix `V`.
    Projection { num_classes: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub head: DiscriminatorHead,
}

#[derive(Debug, Clone)]
enum Cached {
    Vector,
    Projection {
        classes: Vec<usize>,
        features: Tensor,
    },
}

/// Leaky-rectifier MLP trunk `f₁` followed by either head.
#[derive(Debug, Clone)]
pub struct Discriminator {
    config: DiscriminatorConfig,
    trunk: Mlp,
    head: Dense,
    embedding: Option<Param>,
    cached: Option<Cached>,
}

impl Discriminator {
    pub fn new(rng: &mut crate::Rng, config: DiscriminatorConfig) -> Result<Self> {
        if config.hidden.is_empty() || config.input_dim == 0 {
            return Err(Error::param(
                "a discriminator needs an input and at least one hidden layer",
            ));
        }
        let mut dims = vec![config.input_dim];
        dims.extend(&config.hidden);
        let acts = vec![Activation::leaky(); config.hidden.len()];
        let trunk = Mlp::new(rng, &dims, &acts)?.with_prefix("disc.trunk");
        let feat = *config.hidden.last().expect("non-empty");
        let (head_out, embedding) = match config.head {
            DiscriminatorHead::Vector { out_dim } => (out_dim, None),
            DiscriminatorHead::Projection { num_classes } => {
                let std = 1.0 / (feat as f64).sqrt();
                let v = Param::new(
                    "disc.embed",
                    ParamKind::Embedding,
                    normal_tensor(rng, &[num_classes, feat], std),
                );
                (1, Some(v))
            }
        };
        if head_out == 0 {
            return Err(Error::param("discriminator head needs at least one output"));
        }
        let mut head = Dense::new(rng, feat, head_out);
        head.set_prefix("disc.head");
        Ok(Discriminator {
            config,
            trunk,
            head,
            embedding,
            cached: None,
        })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.config
    }

    pub fn trunk(&self) -> &Mlp {
        &self.trunk
    }

    pub fn trunk_mut(&mut self) -> &mut Mlp {
        &mut self.trunk
    }

    pub fn head_mut(&mut self) -> &mut Dense {
        &mut self.head
    }

    pub fn embedding_mut(&mut self) -> Option<&mut Param> {
        self.embedding.as_mut()
    }

    pub fn trunk_depth(&self) -> usize {
        self.trunk.depth()
    }

    pub fn feature_dim(&self) -> usize {
        self.trunk.out_dim()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape().len() != 2 || x.cols() != self.config.input_dim {
            return Err(Error::ShapeMismatch {
                context: "Discriminator input",
                expected: vec![x.rows(), self.config.input_dim],
                actual: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Logit vector for every row of `x` (vector head only).
    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        if !matches!(self.config.head, DiscriminatorHead::Vector { .. }) {
            return Err(Error::param(
                "projection discriminators need classes; use projection_score",
            ));
        }
        self.check_input(x)?;
        let f = self.trunk.forward(x)?;
        let s = self.head.forward(&f)?;
        self.cached = Some(Cached::Vector);
        Ok(s)
    }

    /// `[batch, 1]` projection scores `⟨V_c, f₁(x)⟩ + f₂(f₁(x))`.
    pub fn projection_score(&mut self, x: &Tensor, classes: &[usize]) -> Result<Tensor> {
        let DiscriminatorHead::Projection { num_classes } = self.config.head else {
            return Err(Error::param("projection_score needs a projection head"));
        };
        self.check_input(x)?;
        if classes.len() != x.rows() {
            return Err(Error::LengthMismatch {
                context: "projection_score classes",
                left: x.rows(),
                right: classes.len(),
            });
        }
        if let Some(&c) = classes.iter().find(|&&c| c >= num_classes) {
            return Err(Error::IndexOutOfRange {
                context: "projection class",
                index: c,
                size: num_classes,
            });
        }
        let f = self.trunk.forward(x)?;
        let mut s = self.head.forward(&f)?;
        let v = &self
            .embedding
            .as_ref()
            .expect("projection head has an embedding")
            .value;
        for (r, &c) in classes.iter().enumerate() {
            let dot: f64 = v.row(c).iter().zip(f.row(r)).map(|(a, b)| a * b).sum();
            s.data_mut()[r] += dot;
        }
        self.cached = Some(Cached::Projection {
            classes: classes.to_vec(),
            features: f,
        });
        Ok(s)
    }

    /// Runs the trunk only and returns every layer's activations.
    pub fn features(&mut self, x: &Tensor) -> Result<Vec<Tensor>> {
        self.check_input(x)?;
        self.trunk.forward(x)?;
        self.cached = None;
        Ok((0..self.trunk.depth())
            .map(|i| self.trunk.output(i).expect("cached").clone())
            .collect())
    }

    /// Gradient of the input given gradients at trunk layer outputs; used
    /// after [`Discriminator::features`].
    pub fn features_backward(&mut self, taps: &[(usize, Tensor)]) -> Result<Tensor> {
        self.trunk.backward_with_taps(None, taps)
    }

    /// Backward from the head output of the last `forward` or
    /// `projection_score`; returns the input gradient.
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let cached = self
            .cached
            .take()
            .ok_or(Error::BackwardBeforeForward("Discriminator"))?;
        let mut gf = self.head.backward(grad_out)?;
        if let Cached::Projection { classes, features } = &cached {
            let emb = self
                .embedding
                .as_mut()
                .expect("projection head has an embedding");
            for (r, &c) in classes.iter().enumerate() {
                let g = grad_out.data()[r];
                for ((gv, gfr), (&vc, &fr)) in emb
                    .grad
                    .row_mut(c)
                    .iter_mut()
                    .zip(gf.row_mut(r))
                    .zip(emb.value.row(c).iter().zip(features.row(r)))
                {
                    *gv += g * fr;
                    *gfr += g * vc;
                }
            }
        }
        let gx = self.trunk.backward(&gf)?;
        self.cached = Some(cached);
        Ok(gx)
    }
}

impl Module for Discriminator {
    fn params(&self) -> Vec<&Param> {
        let mut v = self.trunk.params();
        v.extend(self.head.params());
        if let Some(e) = &self.embedding {
            v.push(e);
        }
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.trunk.params_mut();
        v.extend(self.head.params_mut());
        if let Some(e) = &mut self.embedding {
            v.push(e);
        }
        v
    }
}
