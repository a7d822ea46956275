use omnigan::inr::InrGenerator;
use omnigan::inversion::{
    feature_distance, feature_distance_grad, invert, Degradation, InitStrategy, InversionConfig,
};
use omnigan::net::{Discriminator, SampleGenerator};
use omnigan::optim::{grad_check, normal_latents};
use omnigan::trainer::{Gan, TrainConfig};
use omnigan::{rng_from_seed, Tensor};

fn image_gan() -> Gan<InrGenerator> {
    TrainConfig {
        image_size: 6,
        grid_size: 3,
        grid_channels: 4,
        inr_hidden: 8,
        hidden: 16,
        noise_dim: 4,
        ..TrainConfig::image_defaults()
    }
    .build_image_gan()
    .unwrap()
}

fn image(seed: u64) -> Tensor {
    normal_latents(&mut rng_from_seed(seed), 1, 6 * 6 * 3)
        .reshape(&[6, 6, 3])
        .unwrap()
}

fn disc() -> Discriminator {
    image_gan().discriminator
}

#[test]
fn distance_is_zero_on_identical_inputs_and_symmetric() {
    let mut d = disc();
    let (a, b) = (image(1), image(2));
    assert_eq!(feature_distance(&mut d, &a, &a, &[0, 1]).unwrap(), 0.0);
    let ab = feature_distance(&mut d, &a, &b, &[0, 1]).unwrap();
    let ba = feature_distance(&mut d, &b, &a, &[0, 1]).unwrap();
    assert!(ab > 0.0);
    assert!((ab - ba).abs() < 1e-12);
}

#[test]
fn distance_gradient_matches_finite_differences() {
    let mut d = disc();
    let target = image(3);
    let x = image(4);
    let (_, g) = feature_distance_grad(&mut d, &x, &target, &[0, 1]).unwrap();
    let report = grad_check(
        |v| {
            let xt = Tensor::from_vec(&[6, 6, 3], v.to_vec()).unwrap();
            feature_distance(&mut d, &xt, &target, &[0, 1]).unwrap()
        },
        g.data(),
        x.data(),
        1e-6,
    );
    assert!(report.max_rel_error <= 1e-4, "{report:?}");
}

#[test]
fn bad_layer_index_is_an_error() {
    let mut d = disc();
    let a = image(5);
    assert!(feature_distance(&mut d, &a, &a, &[7]).is_err());
}

fn run(
    gan: &mut Gan<InrGenerator>,
    obs: &Tensor,
    config: &InversionConfig,
) -> omnigan::inversion::InversionResult {
    invert(
        &mut gan.generator,
        &mut gan.discriminator,
        obs,
        1,
        [6, 6, 3],
        Degradation::Identity,
        config,
    )
    .unwrap()
}

#[test]
fn zero_steps_returns_the_initial_latent() {
    let mut gan = image_gan();
    let obs = image(6);
    let config = InversionConfig {
        steps: 0,
        init: InitStrategy::Random { seed: 9 },
        ..InversionConfig::default()
    };
    let r = run(&mut gan, &obs, &config);
    assert_eq!(r.z, normal_latents(&mut rng_from_seed(9), 1, 4).into_data());
    assert_eq!(r.trace.len(), 1);
    let zt = Tensor::from_vec(&[1, 4], r.z.clone()).unwrap();
    let direct = gan.generator.generate(&zt, &[1]).unwrap();
    assert_eq!(r.restored.data(), direct.data());
}

#[test]
fn best_of_k_start_is_no_worse_than_its_first_draw() {
    let gan = image_gan();
    let obs = image(7);
    let start = |init| {
        run(
            &mut gan.clone(),
            &obs,
            &InversionConfig {
                steps: 0,
                init,
                ..InversionConfig::default()
            },
        )
        .trace[0]
    };
    let best = start(InitStrategy::BestOfK { k: 8, seed: 3 });
    let first = start(InitStrategy::Random { seed: 3 });
    assert!(best <= first);
}

#[test]
fn descent_lowers_the_objective() {
    let mut gan = image_gan();
    // An observation the generator can reach exactly.
    let z_true = normal_latents(&mut rng_from_seed(11), 1, 4);
    let obs = gan
        .generator
        .generate(&z_true, &[1])
        .unwrap()
        .reshape(&[6, 6, 3])
        .unwrap();
    let config = InversionConfig {
        steps: 60,
        lr_z: 0.05,
        ..InversionConfig::default()
    };
    let r = run(&mut gan, &obs, &config);
    assert!(
        r.trace.last().unwrap() < r.trace.first().unwrap(),
        "{:?}",
        r.trace
    );
}

#[test]
fn nonpositive_learning_rate_is_rejected() {
    let mut gan = image_gan();
    let obs = image(12);
    let config = InversionConfig {
        lr_z: 0.0,
        ..InversionConfig::default()
    };
    assert!(invert(
        &mut gan.generator,
        &mut gan.discriminator,
        &obs,
        0,
        [6, 6, 3],
        Degradation::Identity,
        &config
    )
    .is_err());
}
