//! Finite-difference checks of every loss and network composition.

use omnigan::inr::{make_coord_grid, CoordGrid, FeatureGrid, InrHead};
use omnigan::labels::{build_omni_target, LabelScheme, Role};
use omnigan::loss::{
    hinge_gan_loss, multi_hinge_loss, omni_loss, perpixel_omni_loss, softmax_ce_loss, unified_loss,
    HingeRole, OmniTarget, OmniTargetMap, ScoreVector,
};
use omnigan::net::{
    Discriminator, DiscriminatorConfig, DiscriminatorHead, Generator, GeneratorConfig,
    GeneratorHead, Mlp, Module,
};
use omnigan::optim::{grad_check, normal_latents};
use omnigan::{Result, Rng, Tensor};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

/// Central-difference step.
pub const STEP: f64 = 1e-6;

/// Network instances are redrawn until every ReLU-family pre-activation
/// is at least this far from zero, so the stencil never straddles a kink.
const KINK_MARGIN: f64 = 1e-2;

/// Worst relative error of one operation over its random instances.
#[derive(Debug, Clone, PartialEq)]
pub struct OpReport {
    pub name: &'static str,
    pub instances: usize,
    pub worst: f64,
}

fn normals(rng: &mut Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v: f64 = StandardNormal.sample(rng);
            v * scale
        })
        .collect()
}

fn labels(rng: &mut Rng, n: usize) -> Vec<i8> {
    (0..n).map(|_| rng.gen_range(-1i8..=1)).collect()
}

/// Offsets freshly initialised parameters so zero biases do not park
/// dead ReLU rows exactly on a kink.
fn jittered(rng: &mut Rng, params: Vec<f64>) -> Vec<f64> {
    let noise = normals(rng, params.len(), 0.1);
    params.iter().zip(noise).map(|(p, e)| p + e).collect()
}

/// Keeps piecewise-linear losses away from their kinks.
fn clear_of(values: &[f64], kinks: impl Fn(f64) -> bool) -> bool {
    values.iter().all(|&v| !kinks(v))
}

fn check_omni(rng: &mut Rng) -> Result<f64> {
    let n = rng.gen_range(1..=16);
    let s = normals(rng, n, 1.0);
    let y = OmniTarget::new(labels(rng, n))?;
    let analytic = omni_loss(&ScoreVector::new(s.clone())?, &y)?.grad;
    Ok(grad_check(
        |x| {
            omni_loss(&ScoreVector::new(x.to_vec()).unwrap(), &y)
                .unwrap()
                .value
        },
        &analytic,
        &s,
        STEP,
    )
    .max_rel_error)
}

fn check_unified(rng: &mut Rng) -> Result<f64> {
    let (np, nn) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
    let x = normals(rng, np + nn, 1.0);
    let gamma = rng.gen_range(0.5..2.0);
    let margin = rng.gen_range(-0.5..0.5);
    let r = unified_loss(&x[..np], &x[np..], gamma, margin)?;
    let analytic: Vec<f64> = r.grad_pos.iter().chain(&r.grad_neg).copied().collect();
    Ok(grad_check(
        |v| {
            unified_loss(&v[..np], &v[np..], gamma, margin)
                .unwrap()
                .value
        },
        &analytic,
        &x,
        STEP,
    )
    .max_rel_error)
}

fn check_multi_hinge(rng: &mut Rng) -> Result<f64> {
    let n = rng.gen_range(2..=12);
    let t = rng.gen_range(0..n);
    let l = loop {
        let l = normals(rng, n, 1.5);
        let margins: Vec<f64> = (0..n)
            .filter(|&k| k != t)
            .map(|k| 1.0 + l[k] - l[t])
            .collect();
        if clear_of(&margins, |m| m.abs() < 1e-3) {
            break l;
        }
    };
    let analytic = multi_hinge_loss(&ScoreVector::new(l.clone())?, t)?.grad;
    Ok(grad_check(
        |x| {
            multi_hinge_loss(&ScoreVector::new(x.to_vec()).unwrap(), t)
                .unwrap()
                .value
        },
        &analytic,
        &l,
        STEP,
    )
    .max_rel_error)
}

fn check_softmax_ce(rng: &mut Rng) -> Result<f64> {
    let n = rng.gen_range(2..=16);
    let t = rng.gen_range(0..n);
    let l = normals(rng, n, 1.0);
    let analytic = softmax_ce_loss(&ScoreVector::new(l.clone())?, t)?.grad;
    Ok(grad_check(
        |x| {
            softmax_ce_loss(&ScoreVector::new(x.to_vec()).unwrap(), t)
                .unwrap()
                .value
        },
        &analytic,
        &l,
        STEP,
    )
    .max_rel_error)
}

fn check_hinge(rng: &mut Rng, instance: usize) -> Result<f64> {
    let role = [HingeRole::DReal, HingeRole::DFake, HingeRole::Generator][instance % 3];
    let s = loop {
        let s = normals(rng, 1, 2.0)[0];
        if (1.0 - s).abs() > 1e-3 && (1.0 + s).abs() > 1e-3 {
            break s;
        }
    };
    let analytic = hinge_gan_loss(s, role)?.grad;
    Ok(grad_check(
        |x| hinge_gan_loss(x[0], role).unwrap().value,
        &[analytic],
        &[s],
        STEP,
    )
    .max_rel_error)
}

fn check_perpixel(rng: &mut Rng) -> Result<f64> {
    let shape = [
        rng.gen_range(1..=6),
        rng.gen_range(1..=4),
        rng.gen_range(1..=4),
    ];
    let n: usize = shape.iter().product();
    let map = OmniTargetMap::new(shape, labels(rng, n))?;
    let s = normals(rng, n, 1.0);
    let analytic = perpixel_omni_loss(&Tensor::from_vec(&shape, s.clone())?, &map)?.grad;
    Ok(grad_check(
        |x| {
            perpixel_omni_loss(&Tensor::from_vec(&shape, x.to_vec()).unwrap(), &map)
                .unwrap()
                .value
        },
        &analytic,
        &s,
        STEP,
    )
    .max_rel_error)
}

/// Loss of the generator → discriminator → omni-loss chain for a
/// flattened `[G params, D params, z]` vector.
struct Composition {
    g: Generator,
    d: Discriminator,
    classes: Vec<usize>,
    targets: Vec<OmniTarget>,
    z_len: usize,
}

impl Composition {
    fn set(&mut self, x: &[f64]) -> Tensor {
        let (ng, nd) = (self.g.num_params(), self.d.num_params());
        self.g.set_flat_params(&x[..ng]).unwrap();
        self.d.set_flat_params(&x[ng..ng + nd]).unwrap();
        Tensor::from_vec(
            &[self.classes.len(), self.z_len / self.classes.len()],
            x[ng + nd..].to_vec(),
        )
        .unwrap()
    }

    fn loss_and_grad(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let z = self.set(x);
        self.g.zero_grad();
        self.d.zero_grad();
        let fake = self.g.forward(&z, &self.classes)?;
        let scores = self.d.forward(&fake)?;
        let mut value = 0.0;
        let mut grad = Tensor::zeros(scores.shape());
        for (r, y) in self.targets.iter().enumerate() {
            let l = omni_loss(&ScoreVector::new(scores.row(r).to_vec())?, y)?;
            value += l.value;
            grad.row_mut(r).copy_from_slice(&l.grad);
        }
        let gx = self.d.backward(&grad)?;
        let gz = self.g.backward(&gx)?;
        let mut out = self.g.flat_grads();
        out.extend(self.d.flat_grads());
        out.extend(gz.into_data());
        Ok((value, out))
    }
}

/// Smallest `|pre-activation|` over the first `layers` layers of `mlp`
/// since its last forward.
fn kink_margin(mlp: &Mlp, layers: usize) -> f64 {
    mlp.layers()[..layers]
        .iter()
        .filter_map(|l| l.input().map(|x| l.apply(x).unwrap()))
        .flat_map(|pre| pre.into_data())
        .fold(f64::INFINITY, |m, v| m.min(v.abs()))
}

fn check_composition(rng: &mut Rng) -> Result<f64> {
    let c = 3;
    let (dz, batch) = (4, 2);
    let (x, mut comp) = loop {
        let g = Generator::new(
            rng,
            GeneratorConfig {
                noise_dim: dz,
                num_classes: c,
                embed_dim: 3,
                hidden: vec![6],
                head: GeneratorHead::Direct {
                    out_dim: 4,
                    scale: 2.0,
                },
            },
        )?;
        let d = Discriminator::new(
            rng,
            DiscriminatorConfig {
                input_dim: 4,
                hidden: vec![6],
                head: DiscriminatorHead::Vector { out_dim: c + 2 },
            },
        )?;
        let classes: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..c)).collect();
        let scheme = LabelScheme::omni(c)?;
        let targets = classes
            .iter()
            .map(|&k| build_omni_target(&scheme, Role::Gen(k)))
            .collect::<Result<Vec<_>>>()?;
        let mut x = jittered(rng, g.flat_params());
        x.extend(jittered(rng, d.flat_params()));
        x.extend(normal_latents(rng, batch, dz).into_data());
        let mut comp = Composition {
            g,
            d,
            classes,
            targets,
            z_len: batch * dz,
        };
        comp.loss_and_grad(&x)?;
        let g_trunk = comp.g.trunk_mut();
        let g_margin = kink_margin(g_trunk, g_trunk.depth() - 1);
        let d_margin = kink_margin(comp.d.trunk(), comp.d.trunk_depth());
        if g_margin.min(d_margin) > KINK_MARGIN {
            break (x, comp);
        }
    };
    let (_, analytic) = comp.loss_and_grad(&x)?;
    Ok(grad_check(|v| comp.loss_and_grad(v).unwrap().0, &analytic, &x, STEP).max_rel_error)
}

fn check_inr(rng: &mut Rng) -> Result<f64> {
    let (c, h, w) = (2, 3, 3);
    let coords: CoordGrid = make_coord_grid(4, 5)?;
    let (mut head, x, weights) = loop {
        let mut head = InrHead::new(rng, c, 5)?;
        let weights = normals(rng, coords.len() * 3, 1.0);
        let mut x = jittered(rng, head.flat_params());
        x.extend(normals(rng, c * h * w, 1.0));
        head.set_flat_params(&x[..head.num_params()])?;
        let grid = FeatureGrid::new(c, h, w, x[head.num_params()..].to_vec())?;
        head.forward(std::slice::from_ref(&grid), &coords)?;
        if kink_margin(head.mlp(), head.mlp().depth() - 1) > KINK_MARGIN {
            break (head, x, weights);
        }
    };
    let n_head = head.num_params();
    let mut eval = |v: &[f64], grad: bool| -> (f64, Vec<f64>) {
        head.set_flat_params(&v[..n_head]).unwrap();
        head.zero_grad();
        let grid = FeatureGrid::new(c, h, w, v[n_head..].to_vec()).unwrap();
        let out = head.forward(std::slice::from_ref(&grid), &coords).unwrap();
        let value: f64 = out.data().iter().zip(&weights).map(|(a, b)| a * b).sum();
        if !grad {
            return (value, Vec::new());
        }
        let gg = head
            .backward(&Tensor::from_vec(out.shape(), weights.clone()).unwrap())
            .unwrap();
        let mut g = head.flat_grads();
        g.extend_from_slice(gg[0].data());
        (value, g)
    };
    let (_, analytic) = eval(&x, true);
    Ok(grad_check(|v| eval(v, false).0, &analytic, &x, STEP).max_rel_error)
}

/// Runs `trials` random instances of every check.
pub fn run_suite(trials: usize, seed: u64) -> Result<Vec<OpReport>> {
    let mut rng = omnigan::rng_from_seed(seed);
    let mut reports = Vec::new();
    let mut run =
        |name: &'static str, check: &mut dyn FnMut(&mut Rng, usize) -> Result<f64>| -> Result<()> {
            let mut worst: f64 = 0.0;
            for i in 0..trials {
                worst = worst.max(check(&mut rng, i)?);
            }
            reports.push(OpReport {
                name,
                instances: trials,
                worst,
            });
            Ok(())
        };
    run("omni_loss", &mut |r, _| check_omni(r))?;
    run("unified_loss", &mut |r, _| check_unified(r))?;
    run("multi_hinge_loss", &mut |r, _| check_multi_hinge(r))?;
    run("softmax_ce_loss", &mut |r, _| check_softmax_ce(r))?;
    run("hinge_gan_loss", &mut check_hinge)?;
    run("perpixel_omni_loss", &mut |r, _| check_perpixel(r))?;
    run("generator_discriminator_omni", &mut |r, _| {
        check_composition(r)
    })?;
    run("inr_head", &mut |r, _| check_inr(r))?;
    Ok(reports)
}
