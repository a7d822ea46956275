//! Implicit-neural-representation output head.
//!
//! A generator emits a small feature grid; the head maps
//! `(unfolded features at (x, y), x, y)` to RGB for any set of continuous
//! coordinates, so one latent can be rendered at any resolution.
//!
//! Coordinates live in `[-1, 1]²` with cell centers at
//! `-1 + (2j + 1)/W`. Queries outside the square are clamped to the border
//! cells; unfolding pads with zeros.

use crate::error::{Error, Result};
use crate::net::{Activation, Generator, GeneratorHead, Mlp, Module, Param, SampleGenerator};
use crate::tensor::Tensor;

/// Snapping tolerance, in cells, for queries that should land on a center.
const CENTER_SNAP: f64 = 1e-9;

/// `channels × height × width` features, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::param("feature grid dimensions must be positive"));
        }
        if data.len() != channels * height * width {
            return Err(Error::LengthMismatch {
                context: "FeatureGrid::new",
                left: channels * height * width,
                right: data.len(),
            });
        }
        Ok(FeatureGrid {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        FeatureGrid::new(
            channels,
            height,
            width,
            vec![0.0; channels * height * width],
        )
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, c: usize, i: usize, j: usize) -> f64 {
        self.data[(c * self.height + i) * self.width + j]
    }

    /// Channel vector of cell `(i, j)`.
    pub fn cell(&self, i: usize, j: usize) -> Vec<f64> {
        (0..self.channels).map(|c| self.get(c, i, j)).collect()
    }
}

/// Query coordinates `(x, y)`; `x` runs along the width.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordGrid {
    coords: Vec<(f64, f64)>,
}

impl CoordGrid {
    pub fn new(coords: Vec<(f64, f64)>) -> Result<Self> {
        if coords.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::NonFinite("query coordinate".into()));
        }
        Ok(CoordGrid { coords })
    }

    pub fn coords(&self) -> &[(f64, f64)] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// Center of cell `index` out of `size` along one axis.
pub fn cell_center(index: usize, size: usize) -> f64 {
    -1.0 + (2 * index + 1) as f64 / size as f64
}

/// Row-major cell-center coordinates of an `height × width` image.
pub fn make_coord_grid(height: usize, width: usize) -> Result<CoordGrid> {
    if height == 0 || width == 0 {
        return Err(Error::param("coordinate grid dimensions must be positive"));
    }
    let coords = (0..height)
        .flat_map(|i| (0..width).map(move |j| (cell_center(j, width), cell_center(i, height))))
        .collect();
    Ok(CoordGrid { coords })
}

/// Each cell's features become its zero-padded 3×3 neighborhood, blocks
/// ordered row-major over `(di, dj) ∈ {-1, 0, 1}²`.
pub fn unfold3x3(grid: &FeatureGrid) -> FeatureGrid {
    let (c, h, w) = (grid.channels, grid.height, grid.width);
    let mut out = vec![0.0; 9 * c * h * w];
    for (block, (di, dj)) in neighborhood().enumerate() {
        for ch in 0..c {
            let dst = (block * c + ch) * h * w;
            for i in 0..h {
                for j in 0..w {
                    if let Some((si, sj)) = shifted(i, j, di, dj, h, w) {
                        out[dst + i * w + j] = grid.get(ch, si, sj);
                    }
                }
            }
        }
    }
    FeatureGrid {
        channels: 9 * c,
        height: h,
        width: w,
        data: out,
    }
}

/// Adjoint of [`unfold3x3`]: folds gradients on the unfolded grid back to
/// the original cells.
pub fn unfold3x3_adjoint(grad: &FeatureGrid) -> Result<FeatureGrid> {
    if grad.channels % 9 != 0 {
        return Err(Error::param(
            "unfolded channel count must be a multiple of 9",
        ));
    }
    let (c, h, w) = (grad.channels / 9, grad.height, grad.width);
    let mut out = vec![0.0; c * h * w];
    for (block, (di, dj)) in neighborhood().enumerate() {
        for ch in 0..c {
            let src = (block * c + ch) * h * w;
            for i in 0..h {
                for j in 0..w {
                    if let Some((si, sj)) = shifted(i, j, di, dj, h, w) {
                        out[(ch * h + si) * w + sj] += grad.data[src + i * w + j];
                    }
                }
            }
        }
    }
    FeatureGrid::new(c, h, w, out)
}

fn neighborhood() -> impl Iterator<Item = (isize, isize)> {
    (-1..=1).flat_map(|di| (-1..=1).map(move |dj| (di, dj)))
}

fn shifted(i: usize, j: usize, di: isize, dj: isize, h: usize, w: usize) -> Option<(usize, usize)> {
    let si = i.checked_add_signed(di).filter(|&v| v < h)?;
    let sj = j.checked_add_signed(dj).filter(|&v| v < w)?;
    Some((si, sj))
}

/// Interpolation stencil along one axis: `(lo, hi, weight of hi)`.
fn axis_stencil(coord: f64, size: usize) -> (usize, usize, f64) {
    let u = ((coord + 1.0) * size as f64 - 1.0) / 2.0;
    let u = u.clamp(0.0, (size - 1) as f64);
    let r = u.round();
    if (u - r).abs() <= CENTER_SNAP {
        let k = r as usize;
        return (k, k, 0.0);
    }
    let lo = u.floor() as usize;
    (lo, lo + 1, u - lo as f64)
}

/// One query's four taps `(cell index i·W + j, weight)`. Taps with zero
/// weight are dropped, so exact-center queries are a pure gather.
fn stencil(x: f64, y: f64, h: usize, w: usize) -> Vec<(usize, f64)> {
    let (j0, j1, fx) = axis_stencil(x, w);
    let (i0, i1, fy) = axis_stencil(y, h);
    let mut taps = Vec::with_capacity(4);
    for (i, wy) in [(i0, 1.0 - fy), (i1, fy)] {
        for (j, wx) in [(j0, 1.0 - fx), (j1, fx)] {
            let weight = wy * wx;
            if weight != 0.0 {
                taps.push((i * w + j, weight));
            }
        }
    }
    taps
}

/// Bilinear interpolation of cell-center features; returns `[queries, C]`.
pub fn bilinear_sample(grid: &FeatureGrid, coords: &CoordGrid) -> Tensor {
    let (c, h, w) = (grid.channels, grid.height, grid.width);
    let mut out = Tensor::zeros(&[coords.len(), c]);
    for (q, &(x, y)) in coords.coords.iter().enumerate() {
        let taps = stencil(x, y, h, w);
        let row = out.row_mut(q);
        if let [(cell, weight)] = taps[..] {
            debug_assert_eq!(weight, 1.0);
            for (ch, v) in row.iter_mut().enumerate() {
                *v = grid.data[ch * h * w + cell];
            }
            continue;
        }
        for (cell, weight) in taps {
            for (ch, v) in row.iter_mut().enumerate() {
                *v += weight * grid.data[ch * h * w + cell];
            }
        }
    }
    out
}

/// Adjoint of [`bilinear_sample`] with respect to the grid features.
pub fn bilinear_backward(
    grad: &Tensor,
    coords: &CoordGrid,
    channels: usize,
    height: usize,
    width: usize,
) -> Result<FeatureGrid> {
    grad.expect_shape(&[coords.len(), channels], "bilinear_backward")?;
    let mut out = FeatureGrid::zeros(channels, height, width)?;
    let hw = height * width;
    for (q, &(x, y)) in coords.coords.iter().enumerate() {
        let g = grad.row(q);
        for (cell, weight) in stencil(x, y, height, width) {
            for (ch, gv) in g.iter().enumerate() {
                out.data[ch * hw + cell] += weight * gv;
            }
        }
    }
    Ok(out)
}

/// The coordinate MLP `(9·C_f + 2) → h → h → 3` with ReLU between layers
/// and tanh on the output.
#[derive(Debug, Clone)]
pub struct InrHead {
    feature_channels: usize,
    mlp: Mlp,
    cache: Option<HeadCache>,
}

#[derive(Debug, Clone)]
struct HeadCache {
    coords: CoordGrid,
    grids: usize,
    height: usize,
    width: usize,
}

impl InrHead {
    pub fn new(rng: &mut crate::Rng, feature_channels: usize, hidden: usize) -> Result<Self> {
        if feature_channels == 0 || hidden == 0 {
            return Err(Error::param("INR head dimensions must be positive"));
        }
        let mlp = Mlp::new(
            rng,
            &[9 * feature_channels + 2, hidden, hidden, 3],
            &[Activation::Relu, Activation::Relu, Activation::Tanh],
        )?
        .with_prefix("inr");
        Ok(InrHead {
            feature_channels,
            mlp,
            cache: None,
        })
    }

    pub fn from_mlp(feature_channels: usize, mlp: Mlp) -> Result<Self> {
        if mlp.in_dim() != 9 * feature_channels + 2 || mlp.out_dim() != 3 {
            return Err(Error::ShapeMismatch {
                context: "InrHead::from_mlp",
                expected: vec![9 * feature_channels + 2, 3],
                actual: vec![mlp.in_dim(), mlp.out_dim()],
            });
        }
        Ok(InrHead {
            feature_channels,
            mlp,
            cache: None,
        })
    }

    pub fn feature_channels(&self) -> usize {
        self.feature_channels
    }

    pub fn input_dim(&self) -> usize {
        9 * self.feature_channels + 2
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    fn check_grid(&self, grid: &FeatureGrid) -> Result<()> {
        if grid.channels != self.feature_channels {
            return Err(Error::LengthMismatch {
                context: "INR head feature channels",
                left: self.feature_channels,
                right: grid.channels,
            });
        }
        Ok(())
    }

    /// Head inputs for every grid and query, grid-major: `[G·Q, 9C + 2]`.
    fn inputs(&self, grids: &[FeatureGrid], coords: &CoordGrid) -> Result<Tensor> {
        let q = coords.len();
        let width = self.input_dim();
        let mut x = Tensor::zeros(&[grids.len() * q, width]);
        for (g, grid) in grids.iter().enumerate() {
            self.check_grid(grid)?;
            let sampled = bilinear_sample(&unfold3x3(grid), coords);
            for (k, &(cx, cy)) in coords.coords.iter().enumerate() {
                let row = x.row_mut(g * q + k);
                row[..width - 2].copy_from_slice(sampled.row(k));
                row[width - 2] = cx;
                row[width - 1] = cy;
            }
        }
        Ok(x)
    }

    /// RGB `[G·Q, 3]` for each grid at each query, caching for backward.
    pub fn forward(&mut self, grids: &[FeatureGrid], coords: &CoordGrid) -> Result<Tensor> {
        let x = self.inputs(grids, coords)?;
        let out = self.mlp.forward(&x)?;
        let (height, width) = grids.first().map_or((1, 1), |g| (g.height, g.width));
        if grids.iter().any(|g| g.height != height || g.width != width) {
            return Err(Error::param(
                "all feature grids in a batch must share a size",
            ));
        }
        self.cache = Some(HeadCache {
            coords: coords.clone(),
            grids: grids.len(),
            height,
            width,
        });
        Ok(out)
    }

    /// Inference-only forward.
    pub fn apply(&self, grids: &[FeatureGrid], coords: &CoordGrid) -> Result<Tensor> {
        self.mlp.apply(&self.inputs(grids, coords)?)
    }

    /// Accumulates head gradients and returns one feature-grid gradient per
    /// input grid.
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Vec<FeatureGrid>> {
        let cache = self
            .cache
            .clone()
            .ok_or(Error::BackwardBeforeForward("InrHead"))?;
        let gx = self.mlp.backward(grad_out)?;
        let q = cache.coords.len();
        let width = self.input_dim();
        (0..cache.grids)
            .map(|g| {
                let mut gs = Tensor::zeros(&[q, width - 2]);
                for k in 0..q {
                    gs.row_mut(k)
                        .copy_from_slice(&gx.row(g * q + k)[..width - 2]);
                }
                let unfolded = bilinear_backward(
                    &gs,
                    &cache.coords,
                    9 * self.feature_channels,
                    cache.height,
                    cache.width,
                )?;
                unfold3x3_adjoint(&unfolded)
            })
            .collect()
    }
}

impl Module for InrHead {
    fn params(&self) -> Vec<&Param> {
        self.mlp.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.mlp.params_mut()
    }
}

/// RGB at every query for a single grid; `[Q, 3]`.
pub fn inr_forward(head: &InrHead, grid: &FeatureGrid, coords: &CoordGrid) -> Result<Tensor> {
    head.apply(std::slice::from_ref(grid), coords)
}

/// Generator with a feature-grid head followed by an INR head, rendering at
/// a fixed training resolution. Samples are flattened `(row, col, rgb)`.
#[derive(Debug, Clone)]
pub struct InrGenerator {
    pub backbone: Generator,
    pub head: InrHead,
    height: usize,
    width: usize,
    coords: CoordGrid,
    grid_shape: (usize, usize, usize),
    batch: Option<usize>,
}

impl InrGenerator {
    pub fn new(backbone: Generator, head: InrHead, height: usize, width: usize) -> Result<Self> {
        let GeneratorHead::FeatureGrid {
            channels,
            height: hf,
            width: wf,
        } = backbone.config().head
        else {
            return Err(Error::param("INR generator needs a feature-grid backbone"));
        };
        if channels != head.feature_channels() {
            return Err(Error::LengthMismatch {
                context: "INR generator channels",
                left: channels,
                right: head.feature_channels(),
            });
        }
        Ok(InrGenerator {
            backbone,
            head,
            height,
            width,
            coords: make_coord_grid(height, width)?,
            grid_shape: (channels, hf, wf),
            batch: None,
        })
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn grid_shape(&self) -> (usize, usize, usize) {
        self.grid_shape
    }

    fn to_grids(&self, flat: &Tensor) -> Result<Vec<FeatureGrid>> {
        let (c, h, w) = self.grid_shape;
        (0..flat.rows())
            .map(|r| FeatureGrid::new(c, h, w, flat.row(r).to_vec()))
            .collect()
    }

    /// Feature grids for `z` and `classes` without caching.
    pub fn feature_grids(&self, z: &Tensor, classes: &[usize]) -> Result<Vec<FeatureGrid>> {
        self.to_grids(&self.backbone.apply(z, classes)?)
    }

    /// Renders one latent at any `height × width`; returns `[H, W, 3]`.
    pub fn synthesize(
        &self,
        z: &[f64],
        class: usize,
        height: usize,
        width: usize,
    ) -> Result<Tensor> {
        let coords = make_coord_grid(height, width)?;
        self.render(z, class, &coords)?.reshape(&[height, width, 3])
    }

    /// RGB `[Q, 3]` for one latent at arbitrary coordinates.
    pub fn render(&self, z: &[f64], class: usize, coords: &CoordGrid) -> Result<Tensor> {
        let z = Tensor::from_vec(&[1, z.len()], z.to_vec())?;
        let grids = self.feature_grids(&z, &[class])?;
        inr_forward(&self.head, &grids[0], coords)
    }
}

impl Module for InrGenerator {
    fn params(&self) -> Vec<&Param> {
        let mut v = self.backbone.params();
        v.extend(self.head.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.backbone.params_mut();
        v.extend(self.head.params_mut());
        v
    }
}

impl SampleGenerator for InrGenerator {
    fn noise_dim(&self) -> usize {
        self.backbone.noise_dim()
    }

    fn num_classes(&self) -> usize {
        self.backbone.num_classes()
    }

    fn sample_dim(&self) -> usize {
        self.height * self.width * 3
    }

    fn generate(&mut self, z: &Tensor, classes: &[usize]) -> Result<Tensor> {
        let flat = self.backbone.forward(z, classes)?;
        let grids = self.to_grids(&flat)?;
        let rgb = self.head.forward(&grids, &self.coords)?;
        self.batch = Some(grids.len());
        rgb.reshape(&[grids.len(), self.sample_dim()])
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let b = self
            .batch
            .ok_or(Error::BackwardBeforeForward("InrGenerator"))?;
        grad_out.expect_shape(&[b, self.sample_dim()], "InrGenerator::backward")?;
        let g = grad_out
            .clone()
            .reshape(&[b * self.height * self.width, 3])?;
        let grid_grads = self.head.backward(&g)?;
        let (c, h, w) = self.grid_shape;
        let mut flat = Tensor::zeros(&[b, c * h * w]);
        for (r, gg) in grid_grads.iter().enumerate() {
            flat.row_mut(r).copy_from_slice(gg.data());
        }
        self.backbone.backward(&flat)
    }
}
