use super::{normal_tensor, Activation, Mlp, Module, Param, ParamKind, SampleGenerator};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorHead {
    /// `scale · tanh(·)` over `out_dim` sample coordinates.
    Direct { out_dim: usize, scale: f64 },
    /// A `channels × height × width` feature grid for the INR head.
    FeatureGrid {
        channels: usize,
        height: usize,
        width: usize,
    },
}

impl GeneratorHead {
    pub fn out_dim(&self) -> usize {
        match *self {
            GeneratorHead::Direct { out_dim, .. } => out_dim,
            GeneratorHead::FeatureGrid {
                channels,
                height,
                width,
            } => channels * height * width,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub noise_dim: usize,
    pub num_classes: usize,
    pub embed_dim: usize,
    pub hidden: Vec<usize>,
    pub head: GeneratorHead,
}

/// Class-conditional MLP generator. The class enters by concatenating its
/// embedding row to the noise vector.
#[derive(Debug, Clone)]
pub struct Generator {
    config: GeneratorConfig,
    embedding: Param,
    trunk: Mlp,
    classes: Option<Vec<usize>>,
}

impl Generator {
    pub fn new(rng: &mut crate::Rng, config: GeneratorConfig) -> Result<Self> {
        if config.noise_dim == 0 || config.num_classes == 0 || config.head.out_dim() == 0 {
            return Err(Error::param("generator dimensions must be positive"));
        }
        let embedding = Param::new(
            "gen.embed",
            ParamKind::Embedding,
            normal_tensor(rng, &[config.num_classes, config.embed_dim], 1.0),
        );
        let mut dims = vec![config.noise_dim + config.embed_dim];
        dims.extend(&config.hidden);
        dims.push(config.head.out_dim());
        let mut acts = vec![Activation::leaky(); config.hidden.len()];
        acts.push(match config.head {
            GeneratorHead::Direct { .. } => Activation::Tanh,
            GeneratorHead::FeatureGrid { .. } => Activation::Identity,
        });
        let trunk = Mlp::new(rng, &dims, &acts)?.with_prefix("gen.layer");
        Ok(Generator {
            config,
            embedding,
            trunk,
            classes: None,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn embedding(&self) -> &Param {
        &self.embedding
    }

    pub fn embedding_mut(&mut self) -> &mut Param {
        &mut self.embedding
    }

    pub fn trunk_mut(&mut self) -> &mut Mlp {
        &mut self.trunk
    }

    fn input(&self, z: &Tensor, classes: &[usize]) -> Result<Tensor> {
        let (dz, de, nc) = (
            self.config.noise_dim,
            self.config.embed_dim,
            self.config.num_classes,
        );
        if z.shape().len() != 2 || z.cols() != dz {
            return Err(Error::ShapeMismatch {
                context: "Generator::forward noise",
                expected: vec![z.rows(), dz],
                actual: z.shape().to_vec(),
            });
        }
        if classes.len() != z.rows() {
            return Err(Error::LengthMismatch {
                context: "Generator::forward classes",
                left: z.rows(),
                right: classes.len(),
            });
        }
        let mut x = Tensor::zeros(&[z.rows(), dz + de]);
        for (r, &c) in classes.iter().enumerate() {
            if c >= nc {
                return Err(Error::IndexOutOfRange {
                    context: "generator class",
                    index: c,
                    size: nc,
                });
            }
            let row = x.row_mut(r);
            row[..dz].copy_from_slice(z.row(r));
            row[dz..].copy_from_slice(self.embedding.value.row(c));
        }
        Ok(x)
    }

    /// `z` is `[batch, noise_dim]`, one class per row.
    pub fn forward(&mut self, z: &Tensor, classes: &[usize]) -> Result<Tensor> {
        let x = self.input(z, classes)?;
        let mut y = self.trunk.forward(&x)?;
        if let GeneratorHead::Direct { scale, .. } = self.config.head {
            y.scale(scale);
        }
        self.classes = Some(classes.to_vec());
        Ok(y)
    }

    /// Inference-only forward.
    pub fn apply(&self, z: &Tensor, classes: &[usize]) -> Result<Tensor> {
        let x = self.input(z, classes)?;
        let mut y = self.trunk.apply(&x)?;
        if let GeneratorHead::Direct { scale, .. } = self.config.head {
            y.scale(scale);
        }
        Ok(y)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let classes = self
            .classes
            .clone()
            .ok_or(Error::BackwardBeforeForward("Generator"))?;
        let mut g = grad_out.clone();
        if let GeneratorHead::Direct { scale, .. } = self.config.head {
            g.scale(scale);
        }
        let gx = self.trunk.backward(&g)?;
        let (dz, de) = (self.config.noise_dim, self.config.embed_dim);
        let mut gz = Tensor::zeros(&[classes.len(), dz]);
        for (r, &c) in classes.iter().enumerate() {
            let row = gx.row(r);
            gz.row_mut(r).copy_from_slice(&row[..dz]);
            for (e, v) in self
                .embedding
                .grad
                .row_mut(c)
                .iter_mut()
                .zip(&row[dz..dz + de])
            {
                *e += v;
            }
        }
        Ok(gz)
    }
}

impl Module for Generator {
    fn params(&self) -> Vec<&Param> {
        let mut v = vec![&self.embedding];
        v.extend(self.trunk.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = vec![&mut self.embedding];
        v.extend(self.trunk.params_mut());
        v
    }
}

impl SampleGenerator for Generator {
    fn noise_dim(&self) -> usize {
        self.config.noise_dim
    }

    fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    fn sample_dim(&self) -> usize {
        self.config.head.out_dim()
    }

    fn generate(&mut self, z: &Tensor, classes: &[usize]) -> Result<Tensor> {
        self.forward(z, classes)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        Generator::backward(self, grad_out)
    }
}
