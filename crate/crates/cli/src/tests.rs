use super::*;

fn omnigan(args: &[&str]) -> i32 {
    run(std::iter::once("omnigan").chain(args.iter().copied()))
}

fn train_small(dir: &Path, extra: &[&str]) -> i32 {
    let mut args = vec![
        "train",
        "--out",
        dir.to_str().unwrap(),
        "--steps",
        "40",
        "--set",
        "eval_interval=10",
        "--set",
        "hidden=8",
        "--set",
        "batch_size=8",
        "--set",
        "eval_samples=16",
    ];
    args.extend_from_slice(extra);
    omnigan(&args)
}

#[test]
fn paper_table_exits_zero() {
    assert_eq!(omnigan(&["paper-table"]), 0);
    assert_eq!(gradient_table().unwrap().len(), 6);
}

#[test]
fn grad_check_single_trial_runs() {
    assert_eq!(
        omnigan(&["grad-check", "--trials", "1", "--tol", "1e-3"]),
        0
    );
}

#[test]
fn impossible_tolerance_is_a_failed_check() {
    assert_eq!(
        omnigan(&["grad-check", "--trials", "2", "--tol", "1e-12"]),
        1
    );
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(omnigan(&["no-such-command"]), 2);
    assert_eq!(omnigan(&["grad-check", "--trials", "0"]), 2);
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.toml");
    let out = dir.path().join("x.ppm");
    assert_eq!(
        omnigan(&[
            "sample",
            "--checkpoint",
            missing.to_str().unwrap(),
            "--out",
            out.to_str().unwrap()
        ]),
        2
    );
    assert_eq!(train_small(dir.path(), &["--set", "no_such_key=1"]), 2);
}

#[test]
fn training_writes_every_artifact_and_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(
        train_small(a.path(), &["--seed", "5", "--export-dataset"]),
        0
    );
    assert_eq!(
        train_small(b.path(), &["--seed", "5", "--export-dataset"]),
        0
    );
    for name in [
        "metrics.csv",
        "collapse.txt",
        "checkpoint.toml",
        "dataset.csv",
    ] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let manifest = std::fs::read_to_string(a.path().join("manifest.toml")).unwrap();
    assert!(manifest.contains("xoshiro256**"));
    assert!(manifest.contains("seed = 5"));
    let c = tempfile::tempdir().unwrap();
    assert_eq!(train_small(c.path(), &["--seed", "6"]), 0);
    assert_ne!(
        std::fs::read(a.path().join("metrics.csv")).unwrap(),
        std::fs::read(c.path().join("metrics.csv")).unwrap()
    );
}

#[test]
fn image_checkpoint_samples_at_any_size_and_inverts() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let set = [
        "--set",
        "hidden=16",
        "--set",
        "inr_hidden=8",
        "--set",
        "eval_samples=8",
    ];
    let mut args = vec![
        "train",
        "--task",
        "images",
        "--steps",
        "20",
        "--out",
        run.to_str().unwrap(),
    ];
    args.extend(set);
    assert_eq!(omnigan(&args), 0);
    let ckpt = run.join("checkpoint.toml");
    let img = dir.path().join("odd.ppm");
    let out = omnigan(&[
        "sample",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--height",
        "7",
        "--width",
        "13",
        "--class",
        "2",
        "--out",
        img.to_str().unwrap(),
    ]);
    assert_eq!(out, 0);
    assert!(std::fs::read(&img).unwrap().starts_with(b"P6\n13 7\n255\n"));
    let target = dir.path().join("target.ppm");
    omnigan(&[
        "sample",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--out",
        target.to_str().unwrap(),
    ]);
    let inv = dir.path().join("inv");
    let out = omnigan(&[
        "invert",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--target",
        target.to_str().unwrap(),
        "--degrade",
        "downsample:4",
        "--steps",
        "5",
        "--out",
        inv.to_str().unwrap(),
    ]);
    assert_eq!(out, 0);
    let report = std::fs::read_to_string(inv.join("psnr.txt")).unwrap();
    assert!(report.contains("bilinear_psnr_db"));
    assert!(inv.join("restored.ppm").exists() && inv.join("trace.csv").exists());
    // A target of the wrong size is rejected.
    assert_eq!(
        omnigan(&[
            "invert",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--target",
            img.to_str().unwrap(),
            "--out",
            inv.to_str().unwrap(),
        ]),
        2
    );
}

#[test]
fn ring_checkpoint_cannot_render_images() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(train_small(dir.path(), &[]), 0);
    let img = dir.path().join("x.ppm");
    let ckpt = dir.path().join("checkpoint.toml");
    let out = omnigan(&[
        "sample",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--height",
        "4",
        "--width",
        "4",
        "--out",
        img.to_str().unwrap(),
    ]);
    assert_eq!(out, 2);
}
