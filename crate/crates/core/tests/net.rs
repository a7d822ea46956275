use omnigan::net::{
    Activation, Dense, Discriminator, DiscriminatorConfig, DiscriminatorHead, Generator,
    GeneratorConfig, GeneratorHead, Mlp, Module,
};
use omnigan::optim::{grad_check, normal_latents};
use omnigan::{rng_from_seed, Tensor};

fn generator(seed: u64) -> Generator {
    Generator::new(
        &mut rng_from_seed(seed),
        GeneratorConfig {
            noise_dim: 3,
            num_classes: 4,
            embed_dim: 2,
            hidden: vec![8],
            head: GeneratorHead::Direct {
                out_dim: 2,
                scale: 3.0,
            },
        },
    )
    .unwrap()
}

fn projection_disc(seed: u64, feat: usize) -> Discriminator {
    Discriminator::new(
        &mut rng_from_seed(seed),
        DiscriminatorConfig {
            input_dim: 2,
            hidden: vec![5, feat],
            head: DiscriminatorHead::Projection { num_classes: 3 },
        },
    )
    .unwrap()
}

fn weighted_sum(y: &Tensor, w: &[f64]) -> f64 {
    y.data().iter().zip(w).map(|(a, b)| a * b).sum()
}

#[test]
fn random_dense_layer_matches_finite_differences() {
    let mut rng = rng_from_seed(11);
    for _ in 0..20 {
        let mut layer = Dense::new(&mut rng, 4, 3);
        let mut x = normal_latents(&mut rng, 5, 4).into_data();
        let w = normal_latents(&mut rng, 5, 3).into_data();
        x.extend(layer.flat_params());
        let n_in = 20;
        let mut eval = |v: &[f64], grad: bool| {
            layer.set_flat_params(&v[n_in..]).unwrap();
            layer.zero_grad();
            let input = Tensor::from_vec(&[5, 4], v[..n_in].to_vec()).unwrap();
            let y = layer.forward(&input).unwrap();
            let value = weighted_sum(&y, &w);
            if !grad {
                return (value, vec![]);
            }
            let mut g = layer
                .backward(&Tensor::from_vec(&[5, 3], w.clone()).unwrap())
                .unwrap()
                .into_data();
            g.extend(layer.flat_grads());
            (value, g)
        };
        let (_, analytic) = eval(&x, true);
        let report = grad_check(|v| eval(v, false).0, &analytic, &x, 1e-6);
        assert!(report.max_rel_error <= 1e-5, "{report:?}");
    }
}

#[test]
fn two_layer_composition_matches_finite_differences() {
    let mut rng = rng_from_seed(5);
    let mut mlp = Mlp::new(
        &mut rng,
        &[3, 6, 2],
        &[Activation::leaky(), Activation::Tanh],
    )
    .unwrap();
    let input = normal_latents(&mut rng, 4, 3);
    let w = normal_latents(&mut rng, 4, 2).into_data();
    let x = mlp.flat_params();
    let mut eval = |v: &[f64], grad: bool| {
        mlp.set_flat_params(v).unwrap();
        mlp.zero_grad();
        let y = mlp.forward(&input).unwrap();
        if grad {
            mlp.backward(&Tensor::from_vec(&[4, 2], w.clone()).unwrap())
                .unwrap();
        }
        (weighted_sum(&y, &w), mlp.flat_grads())
    };
    let (_, analytic) = eval(&x, true);
    let report = grad_check(|v| eval(v, false).0, &analytic, &x, 1e-6);
    assert!(report.max_rel_error <= 1e-5, "{report:?}");
}

#[test]
fn zero_upstream_gives_zero_gradients() {
    let mut g = generator(1);
    let z = normal_latents(&mut rng_from_seed(2), 3, 3);
    g.forward(&z, &[0, 1, 3]).unwrap();
    let gz = g.backward(&Tensor::zeros(&[3, 2])).unwrap();
    assert!(gz.data().iter().all(|&v| v == 0.0));
    assert!(g.flat_grads().iter().all(|&v| v == 0.0));
}

#[test]
fn generator_is_deterministic_and_class_sensitive() {
    let mut g = generator(3);
    let z = normal_latents(&mut rng_from_seed(4), 1, 3);
    let a = g.forward(&z, &[1]).unwrap();
    let b = g.forward(&z, &[1]).unwrap();
    assert_eq!(a, b);
    assert_eq!(generator(3).apply(&z, &[1]).unwrap(), a);
    let other = g.apply(&z, &[2]).unwrap();
    assert_ne!(a, other);
    assert!(g.apply(&z, &[4]).is_err());
}

#[test]
fn zero_weight_generator_outputs_its_bias_path() {
    let mut g = generator(6);
    for layer in g.trunk_mut().layers_mut() {
        layer.weight.value.fill(0.0);
        layer
            .bias
            .value
            .data_mut()
            .iter_mut()
            .enumerate()
            .for_each(|(i, b)| *b = 0.1 * i as f64);
    }
    let z = normal_latents(&mut rng_from_seed(7), 2, 3);
    let y = g.apply(&z, &[0, 3]).unwrap();
    for r in 0..2 {
        assert_eq!(y.row(r), &[3.0 * 0.0f64.tanh(), 3.0 * 0.1f64.tanh()]);
    }
}

#[test]
fn omni_head_width_matches_scheme() {
    let mut d = Discriminator::new(
        &mut rng_from_seed(0),
        DiscriminatorConfig {
            input_dim: 2,
            hidden: vec![4],
            head: DiscriminatorHead::Vector { out_dim: 10 },
        },
    )
    .unwrap();
    let s = d.forward(&Tensor::zeros(&[3, 2])).unwrap();
    assert_eq!(s.shape(), &[3, 10]);
}

fn features(d: &mut Discriminator, x: &Tensor) -> Tensor {
    d.features(x).unwrap().pop().unwrap()
}

#[test]
fn projection_with_zero_embedding_ignores_class() {
    let mut d = projection_disc(2, 4);
    d.embedding_mut().unwrap().value.fill(0.0);
    let x = normal_latents(&mut rng_from_seed(3), 2, 2);
    let a = d.projection_score(&x, &[0, 0]).unwrap();
    let b = d.projection_score(&x, &[2, 1]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn projection_with_zero_f2_is_embedding_dot_features() {
    let mut d = projection_disc(4, 2);
    d.head_mut().weight.value.fill(0.0);
    d.head_mut().bias.value.fill(0.0);
    let x = normal_latents(&mut rng_from_seed(5), 3, 2);
    let f = features(&mut d, &x);
    let classes = [2, 0, 1];
    let s = d.projection_score(&x, &classes).unwrap();
    let v = d.embedding_mut().unwrap().value.clone();
    for (r, &c) in classes.iter().enumerate() {
        let dot = v.row(c)[0] * f.row(r)[0] + v.row(c)[1] * f.row(r)[1];
        assert!((s.data()[r] - dot).abs() < 1e-15);
    }
}

#[test]
fn projection_gradient_wrt_embedding_row_is_features() {
    let mut d = projection_disc(8, 3);
    let x = normal_latents(&mut rng_from_seed(9), 1, 2);
    let f = features(&mut d, &x);
    d.zero_grad();
    d.projection_score(&x, &[1]).unwrap();
    d.backward(&Tensor::full(&[1, 1], 1.0)).unwrap();
    let grad = d.embedding_mut().unwrap().grad.clone();
    assert_eq!(grad.row(1), f.row(0));
    assert!(grad.row(0).iter().chain(grad.row(2)).all(|&v| v == 0.0));
}

#[test]
fn shifting_embedding_rows_keeps_class_ranking() {
    let mut d = projection_disc(12, 3);
    let x = normal_latents(&mut rng_from_seed(13), 1, 2);
    let f = features(&mut d, &x);
    let before: Vec<f64> = (0..3)
        .map(|c| d.projection_score(&x, &[c]).unwrap().data()[0])
        .collect();
    let shift = [0.7, -1.3, 0.4];
    let emb = d.embedding_mut().unwrap();
    for c in 0..3 {
        for (v, s) in emb.value.row_mut(c).iter_mut().zip(shift) {
            *v += s;
        }
    }
    let after: Vec<f64> = (0..3)
        .map(|c| d.projection_score(&x, &[c]).unwrap().data()[0])
        .collect();
    let offset: f64 = shift.iter().zip(f.row(0)).map(|(a, b)| a * b).sum();
    let argmax = |v: &[f64]| (0..3).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
    for c in 0..3 {
        assert!((after[c] - before[c] - offset).abs() < 1e-12);
    }
    assert_eq!(argmax(&before), argmax(&after));
}

#[test]
fn end_to_end_gradient_within_1e4() {
    use omnigan::labels::{build_omni_target, LabelScheme, Role};
    use omnigan::loss::{omni_loss, ScoreVector};
    let mut rng = rng_from_seed(21);
    let mut g = generator(20);
    let mut d = Discriminator::new(
        &mut rng,
        DiscriminatorConfig {
            input_dim: 2,
            hidden: vec![6],
            head: DiscriminatorHead::Vector { out_dim: 6 },
        },
    )
    .unwrap();
    let z = normal_latents(&mut rng, 3, 3);
    let classes = [0, 2, 3];
    let scheme = LabelScheme::omni(4).unwrap();
    let ng = g.num_params();
    let mut x = g.flat_params();
    x.extend(d.flat_params());
    let mut eval = |v: &[f64]| {
        g.set_flat_params(&v[..ng]).unwrap();
        d.set_flat_params(&v[ng..]).unwrap();
        g.zero_grad();
        d.zero_grad();
        let fake = g.forward(&z, &classes).unwrap();
        let s = d.forward(&fake).unwrap();
        let mut grad = Tensor::zeros(s.shape());
        let mut value = 0.0;
        for (r, &c) in classes.iter().enumerate() {
            let y = build_omni_target(&scheme, Role::Gen(c)).unwrap();
            let l = omni_loss(&ScoreVector::new(s.row(r).to_vec()).unwrap(), &y).unwrap();
            value += l.value;
            grad.row_mut(r).copy_from_slice(&l.grad);
        }
        let gx = d.backward(&grad).unwrap();
        g.backward(&gx).unwrap();
        let mut all = g.flat_grads();
        all.extend(d.flat_grads());
        (value, all)
    };
    let (_, analytic) = eval(&x);
    let report = grad_check(|v| eval(v).0, &analytic, &x, 1e-6);
    assert!(report.max_rel_error <= 1e-4, "{report:?}");
}

#[test]
fn stale_caches_are_errors() {
    let mut g = generator(0);
    assert!(g.backward(&Tensor::zeros(&[1, 2])).is_err());
    let mut d = projection_disc(0, 2);
    assert!(d.backward(&Tensor::zeros(&[1, 1])).is_err());
    assert!(d.forward(&Tensor::zeros(&[1, 2])).is_err());
}
