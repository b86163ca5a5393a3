use std::path::Path;
use std::process::{Command, Output};

use nsegment::dataset::{load_image, load_mask, save_image, save_mask};
use nsegment::fixtures::synthetic_pair;
use nsegment::pipeline::{epoch_dir, Provenance, SIDECAR_NAME};

fn nseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsegment"))
        .args(args)
        .env_remove("NSEG_SEED")
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn corpus(dir: &Path, n: usize) {
    for i in 0..n {
        let pair = synthetic_pair(48, 40, 4, i as u64);
        save_image(&dir.join("images").join(format!("p{i}.png")), &pair.image).unwrap();
        save_mask(&dir.join("masks").join(format!("p{i}.png")), &pair.mask).unwrap();
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn augment_records_flags_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 4);
    let (images, masks) = (dir.path().join("images"), dir.path().join("masks"));
    let run = |out: &Path, workers: &str| {
        ok(&nseg(&[
            "augment", "--images", s(&images), "--masks", s(&masks), "--out", s(out),
            "--p", "1", "--omega", "30,50x3,5", "--seed", "17", "--epochs", "2", "--workers", workers,
        ]))
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let msg = run(&a, "1");
    assert!(msg.contains("8 deformed"), "{msg}");
    run(&b, "4");
    let prov = Provenance::read(&a.join(SIDECAR_NAME)).unwrap();
    assert_eq!(prov.seed, 17);
    assert_eq!(prov.epochs, 2);
    assert_eq!(prov.omega, "30,50x3,5");
    for e in 0..2 {
        for i in 0..4 {
            let rel = format!("masks/p{i}.png");
            assert_eq!(
                std::fs::read(epoch_dir(&a, e).join(&rel)).unwrap(),
                std::fs::read(epoch_dir(&b, e).join(&rel)).unwrap()
            );
        }
    }
    // label mode leaves images untouched, so none are written
    assert!(!epoch_dir(&a, 0).join("images").exists());
}

#[test]
fn seed_comes_from_env_and_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 2);
    let (images, masks) = (dir.path().join("images"), dir.path().join("masks"));
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "p = 0.0\nseed = 5\n[omega]\nalphas = [15]\nsigmas = [3]\n").unwrap();
    let out = dir.path().join("o");
    let args = [
        "augment", "--config", s(&cfg), "--images", s(&images),
        "--masks", s(&masks), "--out", s(&out), "--p", "1",
    ];
    ok(&nseg(&args));
    let prov = Provenance::read(&out.join(SIDECAR_NAME)).unwrap();
    assert_eq!(prov.p, 1.0);
    assert_eq!(prov.seed, 5);
    assert_eq!(prov.omega, "15x3");

    let out2 = dir.path().join("o2");
    let st = Command::new(env!("CARGO_BIN_EXE_nsegment"))
        .args(["augment", "--images", s(&images), "--masks", s(&masks), "--out", s(&out2)])
        .env("NSEG_SEED", "99")
        .output()
        .unwrap();
    ok(&st);
    assert_eq!(Provenance::read(&out2.join(SIDECAR_NAME)).unwrap().seed, 99);
}

#[test]
fn replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 3);
    let (images, masks) = (dir.path().join("images"), dir.path().join("masks"));
    let a = dir.path().join("a");
    ok(&nseg(&[
        "augment", "--images", s(&images), "--masks", s(&masks),
        "--out", s(&a), "--p", "1", "--mode", "identical", "--hflip-p", "0.5", "--resize", "0.5:1.5", "--seed", "3",
    ]));
    let b = dir.path().join("b");
    ok(&nseg(&["augment", "--replay", s(&a.join(SIDECAR_NAME)), "--out", s(&b)]));
    for sub in ["images", "masks"] {
        for i in 0..3 {
            let rel = format!("{sub}/p{i}.png");
            assert_eq!(
                std::fs::read(epoch_dir(&a, 0).join(&rel)).unwrap(),
                std::fs::read(epoch_dir(&b, 0).join(&rel)).unwrap(),
                "{rel}"
            );
        }
    }
}

#[test]
fn invalid_values_fail_with_message() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 1);
    let (images, masks) = (dir.path().join("images"), dir.path().join("masks"));
    let base = ["augment", "--images", s(&images), "--masks", s(&masks)];
    let out = dir.path().join("o");
    for bad in [["--p", "1.5"], ["--omega", "abc"], ["--mode", "both"], ["--fill", "zero"]] {
        let mut args = base.to_vec();
        args.extend(["--out", s(&out)]);
        args.extend(bad);
        let r = nseg(&args);
        assert!(!r.status.success(), "{bad:?} accepted");
        assert!(String::from_utf8_lossy(&r.stderr).starts_with("error:"));
    }
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "alpha = 3\n").unwrap();
    let mut args = base.to_vec();
    args.extend(["--out", s(&out), "--config", s(&cfg)]);
    assert!(!nseg(&args).status.success());
}

#[test]
fn tile_writes_patches_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let pair = synthetic_pair(1000, 600, 3, 1);
    save_image(&dir.path().join("images/big.png"), &pair.image).unwrap();
    save_mask(&dir.path().join("masks/big.png"), &pair.mask).unwrap();
    let (images, masks) = (dir.path().join("images"), dir.path().join("masks"));
    let out = dir.path().join("tiles");
    let t2 = dir.path().join("t2");
    let msg = ok(&nseg(&[
        "tile", "--images", s(&images), "--masks", s(&masks),
        "--out", s(&out), "--tile", "512", "--stride", "256",
    ]));
    assert!(msg.contains("6 patches"), "{msg}");
    let last = load_mask(&out.join("masks/big_x488_y88.png"), None, None).unwrap();
    assert_eq!((last.width(), last.height()), (512, 512));
    assert_eq!(last.get(0, 0), pair.mask.get(488, 88));
    assert!(out.join("manifest.tsv").exists());

    let r = nseg(&[
        "tile", "--images", s(&images), "--masks", s(&masks),
        "--out", s(&t2), "--tile", "512", "--stride", "256", "--edge", "drop",
    ]);
    assert!(ok(&r).contains("2 patches"));
}

#[test]
fn stats_prints_tiny_fraction_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let masks = dir.path().join("masks");
    // one 5-pixel and one 100-pixel component of class 1 on background 0
    let mut values = vec![0u8; 40 * 40];
    for x in 0..5 {
        values[x] = 1;
    }
    for y in 20..30 {
        for x in 20..30 {
            values[y * 40 + x] = 1;
        }
    }
    let mask = nsegment::LabelMask::new(40, 40, 2, values).unwrap();
    save_mask(&masks.join("m.png"), &mask).unwrap();
    let report = dir.path().join("rep/area");
    let msg = ok(&nseg(&["stats", "--masks", s(&masks), "--split", "test", "--report", s(&report)]));
    // background is one component too
    assert!(msg.starts_with("test: tiny_fraction=0.3333"), "{msg}");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("rep/area.json")).unwrap()).unwrap();
    assert_eq!(json["total_components"], 3);
    assert_eq!(json["tiny_components"], 1);
    let csv = std::fs::read_to_string(dir.path().join("rep/area.csv")).unwrap();
    assert!(csv.starts_with("class,bin,lower,upper,count,proportion"));
}

#[test]
fn preview_writes_grid_panel() {
    let dir = tempfile::tempdir().unwrap();
    let pair = synthetic_pair(32, 32, 3, 4);
    save_image(&dir.path().join("i.png"), &pair.image).unwrap();
    save_mask(&dir.path().join("m.png"), &pair.mask).unwrap();
    let (img, msk) = (dir.path().join("i.png"), dir.path().join("m.png"));
    let out = dir.path().join("preview.png");
    let msg = ok(&nseg(&[
        "preview", "--image", s(&img), "--mask", s(&msk),
        "--grid", "1,100x3,10", "--seed", "1", "--out", s(&out),
    ]));
    assert!(msg.starts_with("5 panels"), "{msg}");
    let panel = load_image(&out).unwrap();
    assert!(panel.width() >= 2 * 32 && panel.height() >= 3 * 32);
}
