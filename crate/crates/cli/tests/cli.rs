use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nukes_core::hsicube::load_cube;

fn nukesctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nukesctl")).args(args).output().unwrap()
}

fn hsic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsic")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const TINY: &str = r#"{"steps": 3, "data": {"hsi_scenes": 2, "rgb_scenes": 2, "val_scenes": 1, "width": 16, "height": 16, "bands": 6}, "dcpm": {"n_patches": 16, "n_negatives": 7}}"#;

#[test]
fn synth_and_rnd_write_consistent_cubes() {
    let d = tempfile::tempdir().unwrap();
    let cube = d.path().join("a.hsc");
    let srf = d.path().join("srf.csv");
    let o = hsic(&["synth", "--seed", "3", "--bands", "8", "--size", "12x8", "-o", p(&cube), "--srf-out", p(&srf)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let x = load_cube(&cube).unwrap();
    assert_eq!((x.width(), x.height(), x.bands()), (12, 8, 8));

    let before = fs::read(&cube).unwrap();
    let (r, n) = (d.path().join("r.hsc"), d.path().join("n.hsc"));
    let o = nukesctl(&["rnd", "--srf", p(&srf), "--in", p(&cube), "--range", p(&r), "--null", p(&n)]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(&cube).unwrap(), before, "input untouched");
    let (r, n) = (load_cube(&r).unwrap(), load_cube(&n).unwrap());
    for i in 0..x.data().len() {
        // files hold f32
        assert!((r.data()[i] + n.data()[i] - x.data()[i]).abs() < 1e-5);
    }
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&nukesctl(&[])), 1);
    assert_eq!(code(&nukesctl(&["synth", "--size", "8x8"])), 1, "missing --seed");
    assert_eq!(code(&nukesctl(&["synth", "--seed", "1", "--size", "8by8", "-o", "x.hsc"])), 1);
    assert_eq!(code(&nukesctl(&["--help"])), 0);
    let missing = d.path().join("none.hsc");
    let json = d.path().join("r.json");
    assert_eq!(code(&nukesctl(&["metrics", "--ref", p(&missing), "--rec", p(&missing), "--json", p(&json)])), 2);

    let bad = d.path().join("bad.json");
    fs::write(&bad, r#"{"stepz": 3}"#).unwrap();
    assert_eq!(code(&nukesctl(&["train", "--config", p(&bad), "--out", p(d.path())])), 2);

    let o = Command::new(env!("CARGO_BIN_EXE_nukesctl"))
        .args(["spline", "--eval", "-"])
        .env("NUKES_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn metrics_report_and_error_map() {
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (d.path().join("a.hsc"), d.path().join("b.hsc"));
    for (path, seed) in [(&a, "1"), (&b, "2")] {
        assert_eq!(code(&hsic(&["synth", "--seed", seed, "--bands", "5", "--size", "6x4", "-o", p(path)])), 0);
    }
    let (json, pgm) = (d.path().join("r.json"), d.path().join("e.pgm"));
    let o = nukesctl(&["metrics", "--ref", p(&a), "--rec", p(&b), "--json", p(&json), "--sam-mode", "pixel", "--errmap", p(&pgm)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    for k in ["rmse", "mrae", "psnr_db", "ssim_mean", "sam_deg"] {
        assert!(v[k].is_number(), "{k}");
    }
    assert_eq!(v["sam_mode"], "pixel");
    assert_eq!(v["per_band"]["rmse"].as_array().unwrap().len(), 5);
    let map = fs::read(&pgm).unwrap();
    assert!(map.starts_with(b"P5\n6 4\n255\n"));
    assert_eq!(map.len(), b"P5\n6 4\n255\n".len() + 24);
}

#[test]
fn train_then_infer_reads_only_the_rgb_to_hsi_generator() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("cfg.json");
    fs::write(&cfg, TINY).unwrap();
    let run = d.path().join("run");
    let o = nukesctl(&["train", "--config", p(&cfg), "--out", p(&run), "--log-every", "0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(run.join("losses.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "step,L_cyc,L_nde,L_adv_g,L_adv_d,L_spec,L_geo,total");
    assert_eq!(csv.lines().count(), 4);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("run.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["steps"], 3);

    let (scene, rgb, out) = (d.path().join("s.hsc"), d.path().join("rgb.hsc"), d.path().join("pred.hsc"));
    let o = hsic(&["synth", "--seed", "77", "--bands", "6", "--size", "16x16", "-o", p(&scene), "--rgb", p(&rgb)]);
    assert_eq!(code(&o), 0);
    let o = nukesctl(&["infer", "--ckpt", p(&run.join("ckpt")), "--in", p(&rgb), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("loaded groups [g_rh] from [g_rh.bin]"));
    let y = load_cube(&out).unwrap();
    assert_eq!((y.width(), y.height(), y.bands()), (16, 16, 6));

    // a non-RGB input is a data error
    let o = nukesctl(&["infer", "--ckpt", p(&run.join("ckpt")), "--in", p(&scene), "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    // so is a damaged generator blob
    let blob = run.join("ckpt").join("g_rh.bin");
    let mut bytes = fs::read(&blob).unwrap();
    bytes.truncate(bytes.len() - 4);
    fs::write(&blob, bytes).unwrap();
    let o = nukesctl(&["infer", "--ckpt", p(&run.join("ckpt")), "--in", p(&rgb), "--out", p(&out)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn identical_runs_write_identical_artifacts() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("cfg.json");
    fs::write(&cfg, TINY).unwrap();
    let runs: Vec<_> = ["r1", "r2"].iter().map(|r| d.path().join(r)).collect();
    for r in &runs {
        assert_eq!(code(&nukesctl(&["train", "--config", p(&cfg), "--out", p(r), "--log-every", "0"])), 0);
    }
    let mut files = vec!["losses.csv".to_string(), "run.json".to_string()];
    for e in fs::read_dir(runs[0].join("ckpt")).unwrap() {
        files.push(format!("ckpt/{}", e.unwrap().file_name().to_str().unwrap()));
    }
    assert_eq!(files.len(), 2 + 9);
    for f in &files {
        assert_eq!(fs::read(runs[0].join(f)).unwrap(), fs::read(runs[1].join(f)).unwrap(), "{f}");
    }
}

#[test]
fn gradcheck_lists_registry_and_passes_a_subset() {
    let o = nukesctl(&["gradcheck", "--list"]);
    assert_eq!(code(&o), 0);
    let listed = String::from_utf8_lossy(&o.stdout).lines().count();
    assert_eq!(listed, nukes_cli::gradsuite::registry().len());

    let o = nukesctl(&["gradcheck", "--filter", "spec"]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8_lossy(&o.stdout).to_string();
    assert!(out.contains("PASS primitive spec_conv"));
    assert!(out.contains("spectral_msa"));
    assert_eq!(code(&nukesctl(&["gradcheck", "--filter", "nothing-matches"])), 2);
}

#[test]
fn dumps_for_inspection() {
    let d = tempfile::tempdir().unwrap();
    let g = d.path().join("g.csv");
    assert_eq!(code(&nukesctl(&["gabor-bank", "--dump", p(&g), "--kernels", "3", "--size", "5"])), 0);
    assert_eq!(fs::read_to_string(&g).unwrap().lines().count(), 1 + 15);
    let s = d.path().join("s.csv");
    let o = nukesctl(&["spline", "--eval", p(&s), "--knots", "0,0,0,0.3,1,1,1", "--degree", "2", "--samples", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&s).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x,B0,B1,B2,B3,sum");
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn ablation_table_schema() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("cfg.json");
    fs::write(&cfg, TINY).unwrap();
    let out = d.path().join("abl.csv");
    let o = nukesctl(&["ablate", "--config", p(&cfg), "--steps", "1", "--seeds", "0", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    let cols = lines[0].split(',').count();
    assert!(lines.iter().all(|l| l.split(',').count() == cols));
    assert_eq!(code(&nukesctl(&["ablate", "--variants", "no-such", "--out", p(&out)])), 1);
}
