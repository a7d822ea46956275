//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use omnigan::inr::{bilinear_sample, cell_center, make_coord_grid, CoordGrid, FeatureGrid};
use omnigan::inversion::{
    degrade, invert, psnr, upsample_bilinear, Degradation, InitStrategy, InversionConfig,
};
use omnigan::io::{Checkpoint, LoadedGenerator};
use omnigan::labels::{
    build_oneside_target, build_perpixel_targets, LabelMap, LabelScheme, MapRole, Role,
};
use omnigan::loss::{
    omni_from_unified_identity, omni_loss, perpixel_omni_loss, OmniTarget, ScoreVector,
};
use omnigan::net::SampleGenerator;
use omnigan::optim::{normal_latents, DecayPreset};
use omnigan::trainer::{train, TrainConfig, Variant};
use omnigan::{rng_from_seed, Tensor};
use rand::Rng;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn omnigan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_omnigan"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn within(limit: Duration, start: Instant, mut o: Outcome) -> Outcome {
    let took = start.elapsed();
    o.detail.push_str(&format!(
        " [{:.1}s, limit {}s]",
        took.as_secs_f64(),
        limit.as_secs()
    ));
    o.pass &= took <= limit;
    o
}

fn gradient_table() -> Outcome {
    let start = Instant::now();
    let out = omnigan(&["paper-table"]);
    let text = String::from_utf8_lossy(&out.stdout);
    let expected = [
        "0.98 / 0.50",
        "0.50 / 0.50",
        "0.02 / 0.50",
        "0.79 / 0.11",
        "0.33 / 0.33",
        "0.11 / 0.79",
    ];
    let rows: Vec<&str> = text.lines().skip(1).collect();
    let got: Vec<String> = rows
        .iter()
        .map(|r| r.rsplit("   ").next().unwrap_or("").trim().to_string())
        .collect();
    let pass = out.status.success() && got == expected;
    within(
        Duration::from_secs(1),
        start,
        outcome(pass, format!("{got:?}")),
    )
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let out = omnigan(&["grad-check", "--trials", "100", "--tol", "1e-5"]);
    let text = String::from_utf8_lossy(&out.stdout);
    let failing: Vec<String> = text
        .lines()
        .filter(|l| l.ends_with("FAIL"))
        .map(|l| l.split_whitespace().take(3).collect::<Vec<_>>().join(" "))
        .collect();
    let detail = if failing.is_empty() {
        "all ops within 1e-5".to_string()
    } else {
        format!("above 1e-5: {}", failing.join("; "))
    };
    within(
        Duration::from_secs(30),
        start,
        outcome(out.status.success(), detail),
    )
}

fn random_instance(rng: &mut omnigan::Rng, max_len: usize) -> (Vec<f64>, Vec<i8>) {
    let n = rng.gen_range(1..=max_len);
    let s = (0..n).map(|_| rng.gen_range(-8.0..8.0)).collect();
    let y = (0..n).map(|_| rng.gen_range(-1i8..=1)).collect();
    (s, y)
}

fn derivation_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_seed(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (s, y) = random_instance(&mut rng, 16);
        let (a, b) =
            omni_from_unified_identity(&ScoreVector::new(s).unwrap(), &OmniTarget::new(y).unwrap())
                .unwrap();
        if a != b {
            worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
        }
    }
    within(
        Duration::from_secs(5),
        start,
        outcome(worst <= 1e-12, format!("worst relative gap {worst:.2e}")),
    )
}

fn masking_exactness() -> Outcome {
    let mut rng = rng_from_seed(4);
    let mut nonzero = 0;
    for _ in 0..1000 {
        let c = rng.gen_range(1..=12);
        let scheme = LabelScheme::one_sided(c).unwrap();
        let k = rng.gen_range(0..c);
        let role = match rng.gen_range(0..3) {
            0 => Role::Real(k),
            1 => Role::Fake(Some(k)),
            _ => Role::Gen(k),
        };
        let y = build_oneside_target(&scheme, role).unwrap();
        let s: Vec<f64> = (0..y.len()).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let r = omni_loss(&ScoreVector::new(s).unwrap(), &y).unwrap();
        nonzero += r
            .grad
            .iter()
            .zip(y.labels())
            .filter(|(g, &l)| l == 0 && g.to_bits() != 0)
            .count();
    }
    outcome(
        nonzero == 0,
        format!("{nonzero} nonzero gradients at ignored positions"),
    )
}

fn ring_runs(variant: Variant, preset: DecayPreset) -> Vec<(bool, f64)> {
    (0..5)
        .map(|seed| {
            let cfg = TrainConfig {
                variant,
                seed,
                ..TrainConfig::default()
            }
            .with_preset(preset);
            let out = train(&cfg).unwrap();
            (
                out.collapse.collapsed,
                out.rows.last().unwrap().class_fidelity,
            )
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn collapse_and_supervision() -> (Outcome, Outcome) {
    let start = Instant::now();
    let plain = ring_runs(Variant::Omni, DecayPreset::NoDecay);
    let decayed = ring_runs(Variant::Omni, DecayPreset::SmallDecay);
    let collapsed = |runs: &[(bool, f64)]| runs.iter().filter(|r| r.0).count();
    let (np, nd) = (collapsed(&plain), collapsed(&decayed));
    let collapse = within(
        Duration::from_secs(600),
        start,
        outcome(
            np >= 3 && nd <= 1,
            format!("collapsed without decay {np}/5, with small decay {nd}/5"),
        ),
    );

    let projection = ring_runs(Variant::Projection, DecayPreset::SmallDecay);
    let omni_fid = median(decayed.iter().map(|r| r.1).collect());
    let proj_fid = median(projection.iter().map(|r| r.1).collect());
    let margin = omni_fid - proj_fid;
    let supervision = if margin >= 0.05 {
        outcome(
            true,
            format!("median fidelity omni {omni_fid:.3} vs projection {proj_fid:.3}"),
        )
    } else if margin >= -0.05 {
        outcome(
            true,
            format!("WARNING margin {margin:+.3} below 0.05 (omni {omni_fid:.3}, projection {proj_fid:.3})"),
        )
    } else {
        outcome(
            false,
            format!("omni {omni_fid:.3} worse than projection {proj_fid:.3}"),
        )
    };
    (collapse, supervision)
}

fn inr_consistency() -> Outcome {
    let start = Instant::now();
    let cfg = TrainConfig {
        image_size: 8,
        grid_size: 4,
        ..TrainConfig::image_defaults()
    };
    let g = cfg.build_image_gan().unwrap().generator;
    let z = normal_latents(&mut rng_from_seed(7), 1, cfg.noise_dim).into_data();
    let (h, w) = (4, 4);
    let mut pass = true;

    // Rendering is pointwise: each pixel of the native and the 2x image
    // equals the same coordinate rendered inside one joint batch.
    let native = make_coord_grid(h, w).unwrap();
    let double = make_coord_grid(2 * h, 2 * w).unwrap();
    let joint: Vec<(f64, f64)> = native
        .coords()
        .iter()
        .chain(double.coords())
        .copied()
        .collect();
    let all = g.render(&z, 1, &CoordGrid::new(joint).unwrap()).unwrap();
    let a = g.synthesize(&z, 1, h, w).unwrap();
    let b = g.synthesize(&z, 1, 2 * h, 2 * w).unwrap();
    pass &= all.data()[..a.len()] == *a.data() && all.data()[a.len()..] == *b.data();

    // The 3x grid contains the native cell centres; values there are equal.
    let c = g.synthesize(&z, 1, 3 * h, 3 * w).unwrap();
    for i in 0..h {
        for j in 0..w {
            pass &= cell_center(i, h).to_bits() == cell_center(3 * i + 1, 3 * h).to_bits();
            pass &= a.data()[(i * w + j) * 3..][..3]
                == c.data()[((3 * i + 1) * 3 * w + 3 * j + 1) * 3..][..3];
        }
    }

    let mut rng = rng_from_seed(8);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (gh, gw, ch) = (
            rng.gen_range(1..9),
            rng.gen_range(1..9),
            rng.gen_range(1..6),
        );
        let grid = FeatureGrid::new(
            ch,
            gh,
            gw,
            normal_latents(&mut rng, 1, ch * gh * gw).into_data(),
        )
        .unwrap();
        let s = bilinear_sample(&grid, &make_coord_grid(gh, gw).unwrap());
        for i in 0..gh {
            for j in 0..gw {
                for (x, y) in s.row(i * gw + j).iter().zip(grid.cell(i, j)) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
    }
    pass &= worst <= 1e-12;
    within(
        Duration::from_secs(5),
        start,
        outcome(
            pass,
            format!(
                "2x rendered pointwise, 3x shared centres bitwise equal, gather error {worst:.1e}"
            ),
        ),
    )
}

fn perpixel_oracle() -> Outcome {
    let mut rng = rng_from_seed(9);
    let c = 5;
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let classes: Vec<usize> = (0..64).map(|_| rng.gen_range(0..c)).collect();
        let map = LabelMap::new(8, 8, classes).unwrap();
        let role = [MapRole::Real, MapRole::Gen, MapRole::Fake][trial % 3];
        let targets = build_perpixel_targets(&map, c, role).unwrap();
        let [ch, h, w] = targets.shape();
        let s: Vec<f64> = (0..ch * h * w).map(|_| rng.gen_range(-6.0..6.0)).collect();
        let got = perpixel_omni_loss(&Tensor::from_vec(&[ch, h, w], s.clone()).unwrap(), &targets)
            .unwrap()
            .value;
        let mut total = 0.0;
        for i in 0..h {
            for j in 0..w {
                let v: Vec<f64> = (0..ch).map(|k| s[k * h * w + i * w + j]).collect();
                total += omni_loss(&ScoreVector::new(v).unwrap(), &targets.at(i, j))
                    .unwrap()
                    .value;
            }
        }
        let expected = total / (h * w) as f64;
        worst = worst.max((got - expected).abs() / expected.abs());
    }
    outcome(worst <= 1e-12, format!("worst relative gap {worst:.2e}"))
}

fn self_inversion(dir: &Path) -> Outcome {
    let start = Instant::now();
    let run = dir.join("images");
    let out = omnigan(&[
        "train",
        "--task",
        "images",
        "--seed",
        "0",
        "--out",
        run.to_str().unwrap(),
    ]);
    if !out.status.success() {
        return outcome(
            false,
            format!("training failed: {}", String::from_utf8_lossy(&out.stderr)),
        );
    }
    let ck = Checkpoint::load(&run.join("checkpoint.toml")).unwrap();
    let LoadedGenerator::Inr(trained) = ck.generator().unwrap() else {
        return outcome(false, "checkpoint has no INR generator");
    };
    let disc = ck.discriminator().unwrap();
    let (h, w) = trained.resolution();
    let shape = [h, w, 3];
    let (mut reduced, mut sharper) = (0, 0);
    let mut ratios = Vec::new();
    for seed in 0..5u64 {
        let class = seed as usize % ck.generator.num_classes;
        let z = normal_latents(&mut rng_from_seed(1000 + seed), 1, trained.noise_dim());
        let truth = trained
            .clone()
            .generate(&z, &[class])
            .unwrap()
            .reshape(&shape)
            .unwrap();
        let config = InversionConfig {
            steps: 3000,
            lr_z: 0.3,
            init: InitStrategy::BestOfK { k: 8, seed },
            ..InversionConfig::default()
        };
        let (mut g, mut d) = (trained.clone(), disc.clone());
        let r = invert(
            &mut g,
            &mut d,
            &truth,
            class,
            shape,
            Degradation::Identity,
            &config,
        )
        .unwrap();
        let ratio = r.trace.last().unwrap() / r.trace[0];
        ratios.push(format!("{ratio:.3}"));
        reduced += (ratio <= 0.1) as usize;

        let down = Degradation::Downsample { factor: 4 };
        let obs = degrade(&truth, down).unwrap();
        let (mut g, mut d) = (trained.clone(), disc.clone());
        let r = invert(&mut g, &mut d, &obs, class, shape, down, &config).unwrap();
        let ours = psnr(&r.restored, &truth, 2.0).unwrap();
        let bilinear = psnr(&upsample_bilinear(&obs, h, w).unwrap(), &truth, 2.0).unwrap();
        sharper += (ours > bilinear) as usize;
    }
    within(
        Duration::from_secs(300),
        start,
        outcome(
            reduced >= 3 && sharper >= 3,
            format!(
                "objective ratio <= 0.1 in {reduced}/5 {ratios:?}; beats bilinear PSNR in {sharper}/5"
            ),
        ),
    )
}

fn determinism(dir: &Path) -> Outcome {
    let mut mismatched = Vec::new();
    for (name, extra) in [
        ("rings", vec!["--steps", "300", "--set", "eval_interval=50"]),
        (
            "images",
            vec![
                "--task",
                "images",
                "--steps",
                "60",
                "--set",
                "eval_interval=20",
            ],
        ),
    ] {
        let files: Vec<Vec<u8>> = (0..2)
            .map(|k| {
                let out = dir.join(format!("det-{name}-{k}"));
                let mut args = vec!["train", "--seed", "11", "--out", out.to_str().unwrap()];
                args.extend(&extra);
                omnigan(&args);
                std::fs::read(out.join("metrics.csv")).unwrap_or_default()
            })
            .collect();
        if files[0].is_empty() || files[0] != files[1] {
            mismatched.push(format!("train {name}"));
        }
    }
    let ckpt = dir.join("det-images-0").join("checkpoint.toml");
    let samples: Vec<Vec<u8>> = (0..2)
        .map(|k| {
            let out = dir.join(format!("det-sample-{k}.ppm"));
            omnigan(&[
                "sample",
                "--checkpoint",
                ckpt.to_str().unwrap(),
                "--seed",
                "2",
                "--out",
                out.to_str().unwrap(),
            ]);
            std::fs::read(out).unwrap_or_default()
        })
        .collect();
    if samples[0].is_empty() || samples[0] != samples[1] {
        mismatched.push("sample".into());
    }
    let target = dir.join("det-sample-0.ppm");
    let traces: Vec<Vec<u8>> = (0..2)
        .map(|k| {
            let out = dir.join(format!("det-invert-{k}"));
            omnigan(&[
                "invert",
                "--checkpoint",
                ckpt.to_str().unwrap(),
                "--target",
                target.to_str().unwrap(),
                "--steps",
                "50",
                "--out",
                out.to_str().unwrap(),
            ]);
            std::fs::read(out.join("trace.csv")).unwrap_or_default()
        })
        .collect();
    if traces[0].is_empty() || traces[0] != traces[1] {
        mismatched.push("invert".into());
    }
    outcome(
        mismatched.is_empty(),
        format!("differing outputs: {mismatched:?}"),
    )
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n: usize, name: &'static str, o: Outcome| {
        println!(
            "criterion {n:>2} {:<24} {}  {}",
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((n, name, o));
    };
    report(1, "gradient table", gradient_table());
    report(2, "gradient correctness", gradient_correctness());
    report(3, "derivation identity", derivation_identity());
    report(4, "masking exactness", masking_exactness());
    let (collapse, supervision) = collapse_and_supervision();
    report(5, "collapse phenomenon", collapse);
    report(6, "supervision benefit", supervision);
    report(7, "inr consistency", inr_consistency());
    report(8, "per-pixel oracle", perpixel_oracle());
    report(9, "self-inversion", self_inversion(dir.path()));
    report(10, "determinism", determinism(dir.path()));
    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "{} of {} criteria pass",
        results.len() - failed.len(),
        results.len()
    );
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
