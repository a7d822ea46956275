use omnigan::loss::{
    hinge_gan_loss, log_sum_exp, multi_hinge_loss, omni_from_unified_identity, omni_loss,
    perpixel_omni_loss, softmax_ce_loss, unified_loss, HingeRole, OmniTarget, OmniTargetMap,
    ScoreVector,
};
use omnigan::Tensor;
use proptest::prelude::*;

fn scores(max_len: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-scale..scale, 1..=max_len)
}

fn scores_and_labels(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<i8>)> {
    (1..=max_len).prop_flat_map(|n| {
        (
            prop::collection::vec(-8.0..8.0, n),
            prop::collection::vec(-1i8..=1, n),
        )
    })
}

/// Unshifted textbook formula; safe for |s| ≤ 8.
fn naive_omni(s: &[f64], y: &[i8]) -> f64 {
    let neg: f64 = s
        .iter()
        .zip(y)
        .filter(|(_, &l)| l == -1)
        .map(|(v, _)| v.exp())
        .sum();
    let pos: f64 = s
        .iter()
        .zip(y)
        .filter(|(_, &l)| l == 1)
        .map(|(v, _)| (-v).exp())
        .sum();
    (1.0 + neg).ln() + (1.0 + pos).ln()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

#[test]
fn softmax_ce_closed_form() {
    let r = softmax_ce_loss(&ScoreVector::new(vec![10.0, 0.0, 0.0]).unwrap(), 0).unwrap();
    let expected = (1.0 + 2.0 * (-10f64).exp()).ln();
    assert!((r.value - expected).abs() < 1e-15);
    assert!((r.value - 9.08e-5).abs() < 1e-7);
}

#[test]
fn hinge_examples() {
    assert_eq!(hinge_gan_loss(2.0, HingeRole::DReal).unwrap().value, 0.0);
    let fake = hinge_gan_loss(0.0, HingeRole::DFake).unwrap();
    assert_eq!((fake.value, fake.grad), (1.0, 1.0));
    let g = hinge_gan_loss(0.3, HingeRole::Generator).unwrap();
    assert_eq!((g.value, g.grad), (-0.3, -1.0));
}

#[test]
fn identity_at_probe_point() {
    let s = ScoreVector::new(vec![4.0, 0.0]).unwrap();
    let y = OmniTarget::new(vec![-1, 1]).unwrap();
    let (a, b) = omni_from_unified_identity(&s, &y).unwrap();
    assert!(rel(a, b) < 1e-12);
}

#[test]
fn out_of_range_classes_are_errors() {
    let l = ScoreVector::new(vec![0.0, 1.0]).unwrap();
    assert!(multi_hinge_loss(&l, 2).is_err());
    assert!(softmax_ce_loss(&l, 5).is_err());
}

#[test]
fn perpixel_matches_location_loop_on_4x4() {
    let shape = [5, 4, 4];
    let n = 80;
    let s: Vec<f64> = (0..n).map(|i| ((i * 37 % 17) as f64 - 8.0) / 3.0).collect();
    let labels: Vec<i8> = (0..n).map(|i| (i * 7 % 3) as i8 - 1).collect();
    let map = OmniTargetMap::new(shape, labels).unwrap();
    let got = perpixel_omni_loss(&Tensor::from_vec(&shape, s.clone()).unwrap(), &map).unwrap();
    let mut total = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let v: Vec<f64> = (0..5).map(|k| s[k * 16 + i * 4 + j]).collect();
            total += omni_loss(&ScoreVector::new(v).unwrap(), &map.at(i, j))
                .unwrap()
                .value;
        }
    }
    assert_eq!(got.value, total / 16.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn identity_holds_to_1e12((s, y) in scores_and_labels(16)) {
        let (via_unified, direct) =
            omni_from_unified_identity(&ScoreVector::new(s).unwrap(), &OmniTarget::new(y).unwrap()).unwrap();
        prop_assert!(rel(via_unified, direct) <= 1e-12 || via_unified == direct);
    }

    #[test]
    fn ignored_entries_get_bitwise_zero_gradient((s, y) in scores_and_labels(32)) {
        let r = omni_loss(&ScoreVector::new(s).unwrap(), &OmniTarget::new(y.clone()).unwrap()).unwrap();
        for (g, l) in r.grad.iter().zip(&y) {
            if *l == 0 {
                prop_assert_eq!(g.to_bits(), 0u64);
            }
        }
    }
}

proptest! {
    #[test]
    fn omni_matches_naive_formula((s, y) in scores_and_labels(16)) {
        let r = omni_loss(&ScoreVector::new(s.clone()).unwrap(), &OmniTarget::new(y.clone()).unwrap()).unwrap();
        prop_assert!((r.value - naive_omni(&s, &y)).abs() <= 1e-12 * (1.0 + r.value));
    }

    #[test]
    fn value_is_nonnegative_and_zero_only_when_all_ignored((s, y) in scores_and_labels(16)) {
        let r = omni_loss(&ScoreVector::new(s).unwrap(), &OmniTarget::new(y.clone()).unwrap()).unwrap();
        prop_assert!(r.value >= 0.0);
        prop_assert_eq!(r.value == 0.0, y.iter().all(|&l| l == 0));
    }

    #[test]
    fn positive_gradients_ignore_negative_scores((s, y) in scores_and_labels(16)) {
        let y_t = OmniTarget::new(y.clone()).unwrap();
        let base = omni_loss(&ScoreVector::new(s.clone()).unwrap(), &y_t).unwrap();
        let shifted: Vec<f64> = s.iter().zip(&y).map(|(&v, &l)| if l == -1 { v + 10.0 } else { v }).collect();
        let moved = omni_loss(&ScoreVector::new(shifted).unwrap(), &y_t).unwrap();
        for (j, &l) in y.iter().enumerate() {
            if l == 1 {
                prop_assert_eq!(base.grad[j], moved.grad[j]);
            }
        }
    }

    #[test]
    fn gradients_are_automatically_balanced((s, y) in scores_and_labels(16)) {
        let r = omni_loss(&ScoreVector::new(s.clone()).unwrap(), &OmniTarget::new(y.clone()).unwrap()).unwrap();
        for a in 0..s.len() {
            for b in 0..s.len() {
                if y[a] == y[b] && y[a] != 0 && s[a] < s[b] - 1e-9 {
                    if y[a] == 1 {
                        prop_assert!(r.grad[a].abs() > r.grad[b].abs());
                    } else {
                        prop_assert!(r.grad[a].abs() < r.grad[b].abs());
                    }
                }
            }
        }
    }

    #[test]
    fn log_sum_exp_brackets_the_max(x in scores(32, 50.0)) {
        let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = log_sum_exp(&x);
        prop_assert!(m <= lse + 1e-12);
        prop_assert!(lse <= m + (x.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn multi_hinge_matches_brute_force(l in scores(12, 3.0), t in 0usize..12) {
        let t = t % l.len();
        let r = multi_hinge_loss(&ScoreVector::new(l.clone()).unwrap(), t).unwrap();
        let mut value = 0.0;
        let mut grad = vec![0.0; l.len()];
        for k in 0..l.len() {
            let m = 1.0 + l[k] - l[t];
            if k != t && m > 0.0 {
                value += m;
                grad[k] += 1.0;
                grad[t] -= 1.0;
            }
        }
        prop_assert!((r.value - value).abs() <= 1e-12 * (1.0 + value));
        prop_assert_eq!(r.grad, grad);
    }

    #[test]
    fn softmax_ce_gradient_is_softmax_minus_onehot(l in scores(16, 5.0), t in 0usize..16) {
        let t = t % l.len();
        let r = softmax_ce_loss(&ScoreVector::new(l.clone()).unwrap(), t).unwrap();
        let z: f64 = l.iter().map(|v| v.exp()).sum();
        for (k, g) in r.grad.iter().enumerate() {
            let expected = l[k].exp() / z - if k == t { 1.0 } else { 0.0 };
            prop_assert!((g - expected).abs() < 1e-12);
        }
        prop_assert!((r.value - (z.ln() - l[t])).abs() < 1e-12 * (1.0 + r.value));
    }

    #[test]
    fn unified_matches_pair_enumeration(
        pos in scores(6, 3.0),
        neg in scores(6, 3.0),
        gamma in 0.5f64..2.0,
        margin in -0.5f64..0.5,
    ) {
        let r = unified_loss(&pos, &neg, gamma, margin).unwrap();
        let sum: f64 = neg
            .iter()
            .flat_map(|n| pos.iter().map(move |p| (gamma * (n - p + margin)).exp()))
            .sum();
        prop_assert!((r.value - sum.ln_1p()).abs() <= 1e-12 * (1.0 + r.value));
    }
}

#[test]
fn perpixel_matches_location_loop_on_random_8x8_maps() {
    use rand::Rng;
    let mut rng = omnigan::rng_from_seed(8);
    let shape = [7, 8, 8];
    for _ in 0..50 {
        let s: Vec<f64> = (0..7 * 64).map(|_| rng.gen_range(-6.0..6.0)).collect();
        let labels: Vec<i8> = (0..7 * 64).map(|_| rng.gen_range(-1i8..=1)).collect();
        let map = OmniTargetMap::new(shape, labels).unwrap();
        let got = perpixel_omni_loss(&Tensor::from_vec(&shape, s.clone()).unwrap(), &map).unwrap();
        let mut total = 0.0;
        for i in 0..8 {
            for j in 0..8 {
                let v: Vec<f64> = (0..7).map(|k| s[k * 64 + i * 8 + j]).collect();
                let y: Vec<i8> = (0..7).map(|k| map.labels()[k * 64 + i * 8 + j]).collect();
                total += naive_omni(&v, &y);
            }
        }
        assert!(rel(got.value, total / 64.0) <= 1e-12);
    }
}
