use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use d3g::relations::read_relation_matrix;
use serde_json::Value;

fn d3g(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_d3g")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = d3g(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    d3g(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, kind: &str, seed: &str) -> PathBuf {
    let out = dir.join(format!("{kind}-{seed}"));
    ok(&["gen", "--kind", kind, "--seed", seed, "--out", s(&out), "--rows", "4", "--cols", "4"]);
    out
}

fn report(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap()
}

fn lines(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn gen_dg15_counts_and_reproducibility() {
    let tmp = tempfile::tempdir().unwrap();
    let a = gen(tmp.path(), "dg15", "4");
    assert_eq!(lines(&a.join("data.csv")), 1501);
    assert_eq!(lines(&a.join("meta.csv")), 16);
    let b = tmp.path().join("again");
    ok(&["gen", "--kind", "dg15", "--seed", "4", "--out", s(&b)]);
    for f in ["data.csv", "meta.csv", "splits.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = gen(tmp.path(), "dg15", "5");
    assert_ne!(std::fs::read(a.join("data.csv")).unwrap(), std::fs::read(c.join("data.csv")).unwrap());
}

#[test]
fn gen_spatial_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = gen(tmp.path(), "spatial", "0");
    assert_eq!(lines(&dir.join("meta.csv")), 17);
    let edges = std::fs::read_to_string(dir.join("adjacency.txt"))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .count();
    assert_eq!(edges, 24);
}

#[test]
fn exit_codes_distinguish_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gen(tmp.path(), "spatial", "0");
    let out = tmp.path().join("out");

    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["train", "--data", s(&data), "--lambda=-1", "--out", s(&out)]), 2);
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[train]\nlearning_rate = 0.1\n").unwrap();
    assert_eq!(code(&["train", "--data", s(&data), "--config", s(&cfg), "--out", s(&out)]), 2);

    let broken = tmp.path().join("broken");
    std::fs::create_dir_all(&broken).unwrap();
    for f in ["data.csv", "splits.csv"] {
        std::fs::copy(data.join(f), broken.join(f)).unwrap();
    }
    let missing_meta = code(&["train", "--data", s(&broken), "--out", s(&out)]);

    std::fs::write(broken.join("meta.csv"), "domain_id,lat\n0,1\n").unwrap();
    assert_eq!(code(&["train", "--data", s(&broken), "--out", s(&out)]), 3);

    let diverged = code(&["train", "--data", s(&data), "--seed", "0", "--lr", "1e8", "--epochs", "5", "--out", s(&out)]);
    assert_eq!(diverged, 4);
    assert_ne!(missing_meta, 0);
    assert_ne!(missing_meta, diverged);
}

#[test]
fn erm_reports_mean_valid_accuracy_over_three_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gen(tmp.path(), "dg15", "0");
    let out = tmp.path().join("erm");
    let stdout = ok(&["train", "--data", s(&data), "--method", "erm", "--epochs", "3", "--out", s(&out)]).stdout;
    assert!(String::from_utf8(stdout).unwrap().contains("erm valid mean"));
    let r = report(&out);
    assert_eq!(r["body"]["runs"].as_array().unwrap().len(), 3);
    let valid = r["body"]["summary"].as_array().unwrap().iter().find(|a| a["label"] == "erm valid mean").unwrap();
    let mean: f64 = r["body"]["runs"].as_array().unwrap().iter().map(|run| run["valid"]["mean"].as_f64().unwrap()).sum::<f64>() / 3.0;
    assert!((valid["mean"].as_f64().unwrap() - mean).abs() < 1e-12);
    assert!(std::fs::read_to_string(out.join("summary.txt")).unwrap().contains("erm valid mean"));
    assert!(out.join("checkpoint-seed2.json").exists());
}

#[test]
fn report_aggregates_recompute_from_domains() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gen(tmp.path(), "dg15", "0");
    let out = tmp.path().join("run");
    ok(&["train", "--data", s(&data), "--seed", "1", "--epochs", "4", "--out", s(&out)]);
    let r = report(&out);
    assert_eq!(r["library_version"], env!("CARGO_PKG_VERSION"));
    assert!(r["wall_clock_secs"].as_f64().unwrap() >= 0.0);
    assert_eq!(r["config"]["train"]["epochs"], 4);
    let test = &r["body"]["runs"][0]["test"];
    let per: Vec<f64> = test["per_domain"].as_array().unwrap().iter().map(|d| d["value"].as_f64().unwrap()).collect();
    assert_eq!(per.len(), 5);
    let mean = per.iter().sum::<f64>() / per.len() as f64;
    assert!((test["mean"].as_f64().unwrap() - mean).abs() < 1e-12);
    assert_eq!(test["worst"].as_f64().unwrap(), per.iter().copied().fold(f64::INFINITY, f64::min));
}

#[test]
fn resume_with_zero_epochs_keeps_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gen(tmp.path(), "dg15", "0");
    let first = tmp.path().join("first");
    ok(&["train", "--data", s(&data), "--seed", "2", "--epochs", "6", "--out", s(&first)]);
    let second = tmp.path().join("second");
    let ckpt = first.join("checkpoint-seed2.json");
    ok(&["train", "--data", s(&data), "--resume", s(&ckpt), "--epochs", "0", "--out", s(&second)]);
    let (a, b) = (report(&first), report(&second));
    for split in ["valid", "test"] {
        assert_eq!(a["body"]["runs"][0][split], b["body"]["runs"][0][split], "{split}");
    }
    assert_eq!(std::fs::read(&ckpt).unwrap(), std::fs::read(second.join("checkpoint-seed2.json")).unwrap());

    let third = tmp.path().join("third");
    ok(&["train", "--data", s(&data), "--resume", s(&ckpt), "--epochs", "2", "--out", s(&third)]);
    assert_eq!(report(&third)["body"]["runs"][0]["history"].as_array().unwrap().len(), 8);
}

#[test]
fn eval_covers_every_test_domain_and_uniform_variant() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gen(tmp.path(), "dg15", "0");
    let out = tmp.path().join("run");
    ok(&["train", "--data", s(&data), "--seed", "0", "--epochs", "5", "--lr", "1e-3", "--out", s(&out)]);
    let ckpt = out.join("checkpoint-seed0.json");

    let fused = tmp.path().join("fused");
    ok(&["eval", "--checkpoint", s(&ckpt), "--data", s(&data), "--out", s(&fused)]);
    let fused = report(&fused);
    let fused_test = &fused["body"]["runs"][0]["test"];
    let ids: Vec<u64> = fused_test["per_domain"].as_array().unwrap().iter().map(|d| d["domain"].as_u64().unwrap()).collect();
    let splits = std::fs::read_to_string(data.join("splits.csv")).unwrap();
    let expected: Vec<u64> = splits
        .lines()
        .skip(1)
        .filter(|l| l.ends_with("test"))
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(ids, expected);
    assert_eq!(fused_test, &report(&out)["body"]["runs"][0]["test"]);

    let uniform = tmp.path().join("uniform");
    ok(&["eval", "--checkpoint", s(&ckpt), "--data", s(&data), "--relations", "uniform", "--out", s(&uniform)]);
    let uniform = report(&uniform);
    assert_eq!(uniform["body"]["runs"][0]["method"], "uniform");
    assert_ne!(uniform["body"]["runs"][0]["test"]["mean"], fused_test["mean"]);

    let train_split = tmp.path().join("train-split");
    ok(&["eval", "--checkpoint", s(&ckpt), "--data", s(&data), "--split", "train", "--out", s(&train_split)]);

    let spatial = gen(tmp.path(), "spatial", "0");
    assert_eq!(code(&["eval", "--checkpoint", s(&ckpt), "--data", s(&spatial)]), 3);
}

#[test]
fn ablate_writes_four_relation_and_two_consistency_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gen(tmp.path(), "dg15", "0");
    let out = tmp.path().join("ablate");
    ok(&["ablate", "--data", s(&data), "--seeds", "2", "--epochs", "3", "--out", s(&out)]);
    let r = report(&out);
    let rows = r["body"]["rows"].as_array().unwrap();
    let group = |g: &str| rows.iter().filter(|r| r["group"] == g).count();
    assert_eq!((group("relations"), group("consistency")), (4, 2));
    let loss = |v: &str| rows.iter().find(|r| r["variant"] == v).unwrap()["final_loss"].clone();
    assert_ne!(loss("with"), loss("without"));
    assert_eq!(lines(&out.join("ablation.csv")), 7);
}

#[test]
fn theory_is_reproducible_and_reports_oracle_target() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("theory.toml");
    std::fs::write(&cfg, "averaging_samples = 20000\nselect_c0 = false\n[scaling]\nr = 2\nlipschitz = 2.0\nn = 50\nsigma = 0.1\ngrid = [8, 16, 32]\nseeds = [0, 1, 2]\nc0 = 3.0\nn_eval = 2000\n").unwrap();
    let run = |name: &str| {
        let out = tmp.path().join(name);
        ok(&["theory", "--config", s(&cfg), "--out", s(&out)]);
        out
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(std::fs::read(a.join("scaling.csv")).unwrap(), std::fs::read(b.join("scaling.csv")).unwrap());
    assert_eq!(lines(&a.join("scaling.csv")), 4);
    let r = report(&a);
    assert_eq!(r["body"]["averaging"]["target"].as_f64().unwrap(), 1.0 / 12.0);
    assert_eq!(r["body"]["scaling"].as_array().unwrap().len(), 3);
    assert!(std::fs::read_to_string(a.join("summary.txt")).unwrap().contains("target 0.08333"));
}

fn matrix(path: &Path) -> Vec<Vec<f64>> {
    read_relation_matrix(path).unwrap().1
}

#[test]
fn export_beta_one_without_checkpoint_is_the_fixed_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gen(tmp.path(), "dg15", "0");
    let out = tmp.path().join("rel.csv");
    ok(&["export-relations", "--meta", s(&data.join("meta.csv")), "--beta", "1", "--out", s(&out)]);
    let fused = matrix(&out);
    assert_eq!(fused, matrix(&tmp.path().join("rel.fixed.csv")));
    let meta = std::fs::read_to_string(data.join("meta.csv")).unwrap();
    let angles: Vec<f64> = meta.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    for (i, row) in fused.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            assert_eq!(*v, fused[j][i]);
            let d = (angles[i] - angles[j]).abs();
            let d = d.min(2.0 * std::f64::consts::PI - d);
            let expected = if i == j { 1.0 } else { d.cos().max(0.0) };
            assert!((v - expected).abs() < 1e-12, "{i},{j}: {v}");
        }
    }
}

#[test]
fn exported_fused_matrix_recomputes_from_parts() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gen(tmp.path(), "spatial", "1");
    let run = tmp.path().join("run");
    ok(&["train", "--data", s(&data), "--seed", "0", "--epochs", "3", "--lr", "1e-3", "--out", s(&run)]);
    let out = tmp.path().join("rel.csv");
    ok(&[
        "export-relations",
        "--meta",
        s(&data.join("meta.csv")),
        "--adjacency",
        s(&data.join("adjacency.txt")),
        "--checkpoint",
        s(&run.join("checkpoint-seed0.json")),
        "--beta",
        "0.6",
        "--out",
        s(&out),
    ]);
    let (fused, fixed, learned) = (matrix(&out), matrix(&tmp.path().join("rel.fixed.csv")), matrix(&tmp.path().join("rel.learned.csv")));
    assert_eq!(fused.len(), 16);
    for i in 0..16 {
        for j in 0..16 {
            let expected = if i == j { 1.0 } else { (0.6 * fixed[i][j] + 0.4 * learned[i][j]).max(0.0) };
            assert!((fused[i][j] - expected).abs() < 1e-12, "{i},{j}");
            assert_eq!(fused[i][j], fused[j][i]);
            assert!(fixed[i][j] == 0.0 || fixed[i][j] == 1.0);
        }
    }
}
