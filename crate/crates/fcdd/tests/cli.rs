use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fcdd::checkpoint;
use fcdd::config::{HarnessConfig, LossArg, SupervisionArg};
use fcdd::harness::{self, compare_records, EvalRequest, MetricArg};
use fcdd::records::{self, RunRecord};
use fcdd_core::model::init;
use fcdd_core::Rng;
use sha2::{Digest, Sha256};

fn fcdd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fcdd")).args(args).env_remove("FCDD_OUT").output().expect("spawn fcdd")
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tree_hash(root: &Path) -> String {
    fn walk(dir: &Path, root: &Path, files: &mut BTreeMap<String, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p, root, files);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                files.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    let mut files = BTreeMap::new();
    walk(root, root, &mut files);
    let mut h = Sha256::new();
    for (name, bytes) in files {
        h.update(name.as_bytes());
        h.update([0]);
        h.update(&bytes);
    }
    hex::encode(h.finalize())
}

const SMALL: [&str; 4] = ["--train-images", "3", "--test-images", "4"];

#[test]
fn gen_data_is_reproducible_and_guarded() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let mut args = vec!["gen-data", "--categories", "2", "--dataset", s(dir)];
        args.extend(SMALL);
        ok(fcdd(&args));
    }
    let mut dirs: Vec<String> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    dirs.sort();
    assert_eq!(dirs.len(), 2, "{dirs:?}");
    assert!(a.join("manifest.json").is_file());
    let first = tree_hash(&a);
    assert_eq!(first, tree_hash(&b));

    let mut again = vec!["gen-data", "--categories", "2", "--dataset", s(&a)];
    again.extend(SMALL);
    let refused = fcdd(&again);
    assert_eq!(refused.status.code(), Some(1));
    again.push("--force");
    ok(fcdd(&again));
    assert_eq!(tree_hash(&a), first);
}

#[test]
fn force_refuses_directories_without_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("keep.txt"), "x").unwrap();
    let out = fcdd(&["gen-data", "--categories", "1", "--dataset", s(tmp.path()), "--force"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(tmp.path().join("keep.txt").is_file());
}

#[test]
fn train_eval_and_skip() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let mut gen = vec!["--out", s(out), "gen-data", "--categories", "1"];
    gen.extend(SMALL);
    ok(fcdd(&gen));
    let mut train = vec!["--out", s(out), "train", "--categories", "1", "--seeds", "0", "--epochs", "1"];
    train.extend(SMALL);
    ok(fcdd(&train));
    let results = harness::results_path(out);
    let recs = records::read(&results).unwrap();
    assert_eq!(recs.len(), 2);
    let variants: Vec<LossArg> = recs.iter().map(|r| r.loss_variant).collect();
    assert!(variants.contains(&LossArg::Baseline) && variants.contains(&LossArg::Proposed));
    for r in &recs {
        assert!(r.pixel_auroc > 0.0 && r.pixel_auroc < 1.0);
        assert!(harness::log_path(out, &r.run_id).is_file());
    }

    let stdout = ok(fcdd(&train));
    assert!(stdout.contains("0 runs trained, 2 already present"), "{stdout}");
    assert_eq!(records::read(&results).unwrap().len(), 2);

    let data = out.join("data");
    for r in &recs {
        let ckpt = harness::checkpoint_path(out, &r.run_id);
        let ev = harness::cmd_eval(&EvalRequest {
            checkpoint: &ckpt,
            dataset: &data,
            category: 0,
            supervision: SupervisionArg::Unsup,
            seed: 0,
            dump_heatmaps: None,
        })
        .unwrap();
        assert!((ev.auroc - r.pixel_auroc).abs() <= 1e-12);
        assert!((ev.ap - r.pixel_ap).abs() <= 1e-12);
    }

    let heat = out.join("heat");
    let ckpt = harness::checkpoint_path(out, &recs[0].run_id);
    let printed =
        ok(fcdd(&["--out", s(out), "eval", "--checkpoint", s(&ckpt), "--category", "0", "--dump-heatmaps", s(&heat)]));
    assert!(printed.contains(&format!("pixel_auroc {:.6}", recs[0].pixel_auroc)), "{printed}");
    let pgms = fs::read_dir(&heat)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "pgm"))
        .count();
    assert_eq!(pgms, 4);
}

#[test]
fn mismatched_dataset_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let mut gen = vec!["--out", s(out), "gen-data", "--categories", "1"];
    gen.extend(SMALL);
    ok(fcdd(&gen));
    let train = fcdd(&["--out", s(out), "train", "--categories", "1", "--seeds", "0", "--epochs", "1"]);
    assert_eq!(train.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&train.stderr).contains("rerun gen-data"));
}

/// AUROCs of ten untrained networks on the default category, frozen.
const RANDOM_INIT_AUROC: [f64; 10] = [
    0.4327182722448996,
    0.5305842785584414,
    0.36357096663816946,
    0.5797875225268616,
    0.462236237542495,
    0.6106705704865,
    0.4151011124958358,
    0.3947982014633931,
    0.36854321946481394,
    0.5912173084564534,
];

#[test]
fn random_weights_score_near_chance() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = HarnessConfig { output_dir: tmp.path().to_path_buf(), categories: vec![0], ..HarnessConfig::default() };
    harness::cmd_gen_data(&cfg, false).unwrap();
    let mut got = Vec::new();
    for k in 0..10u64 {
        let ckpt = tmp.path().join(format!("init{k}.ckpt"));
        checkpoint::save(&ckpt, &init(&Rng::new(k))).unwrap();
        let ev = harness::cmd_eval(&EvalRequest {
            checkpoint: &ckpt,
            dataset: &cfg.dataset_root(),
            category: 0,
            supervision: SupervisionArg::Unsup,
            seed: 0,
            dump_heatmaps: None,
        })
        .unwrap();
        got.push(ev.auroc);
    }
    for (g, want) in got.iter().zip(RANDOM_INIT_AUROC) {
        assert!((g - want).abs() < 1e-9, "{got:?}");
        assert!((g - 0.5).abs() <= 0.15, "{got:?}");
    }
}

#[test]
fn non_finite_checkpoint_exits_numerical() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let mut gen = vec!["--out", s(out), "gen-data", "--categories", "1"];
    gen.extend(SMALL);
    ok(fcdd(&gen));
    let mut params = init(&Rng::new(0));
    for t in params.tensors_mut() {
        t.data_mut().iter_mut().for_each(|v| *v = f64::NAN);
    }
    let ckpt = out.join("nan.ckpt");
    checkpoint::save(&ckpt, &params).unwrap();
    let res = fcdd(&["--out", s(out), "eval", "--checkpoint", s(&ckpt), "--category", "0"]);
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn validation_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(fcdd(&["train", "--loss", "other"]).status.code(), Some(1));
    assert_eq!(fcdd(&["frobnicate"]).status.code(), Some(1));
    let missing = fcdd(&["--out", s(tmp.path()), "train", "--categories", "1", "--epochs", "1"]);
    assert_eq!(missing.status.code(), Some(1));
    let bad_ckpt = tmp.path().join("bad.ckpt");
    fs::write(&bad_ckpt, b"not a checkpoint").unwrap();
    let res = fcdd(&["--out", s(tmp.path()), "eval", "--checkpoint", s(&bad_ckpt), "--category", "0"]);
    assert_eq!(res.status.code(), Some(1));
    assert_eq!(fcdd(&["--help"]).status.code(), Some(0));
}

#[test]
fn out_env_sets_default_root() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_fcdd"))
        .args(["gen-data", "--categories", "1"])
        .args(SMALL)
        .env("FCDD_OUT", &root)
        .output()
        .unwrap();
    ok(out);
    assert!(root.join("data").join("manifest.json").is_file());
}

#[test]
fn loss_check_passes() {
    let stdout = ok(fcdd(&["loss-check", "--cases", "3"]));
    assert_eq!(stdout.lines().filter(|l| l.ends_with("ok")).count(), 6, "{stdout}");
}

fn record(method: LossArg, category: &str, seed: u64, auroc: f64, ap: f64) -> RunRecord {
    RunRecord {
        run_id: format!("{method:?}-{category}-{seed}"),
        category: category.to_string(),
        seed,
        loss_variant: method,
        supervision: SupervisionArg::Unsup,
        epochs: 50,
        pixel_auroc: auroc,
        pixel_ap: ap,
        wall_time_s: 1.0,
        config_digest: "00".into(),
        created_at: "2024-01-01T00:00:00.000Z".into(),
    }
}

fn write_results(path: &Path, recs: &[RunRecord]) {
    for r in recs {
        records::append(path, r).unwrap();
    }
}

#[test]
fn compare_detects_a_consistent_winner() {
    let mut recs = Vec::new();
    for c in 0..10 {
        let cat = format!("c{c:02}");
        let base = 0.6 + 0.02 * c as f64;
        recs.push(record(LossArg::Proposed, &cat, 0, base + 0.01 * (c + 1) as f64, base));
        recs.push(record(LossArg::Baseline, &cat, 0, base, base + 0.001));
    }
    let cmp = compare_records(&recs, MetricArg::Auroc, 0.1).unwrap();
    let prop = cmp.methods.iter().position(|m| m == "proposed-unsup").unwrap();
    let base = cmp.methods.iter().position(|m| m == "baseline-unsup").unwrap();
    assert_eq!(cmp.model.avg_ranks[prop], 1.0);
    assert_eq!(cmp.model.avg_ranks[base], 2.0);
    assert_eq!(cmp.model.pairs[0].test.p, 2.0 / 1024.0);
    assert!(cmp.model.cliques.is_empty());

    let ap = compare_records(&recs, MetricArg::Ap, 0.1).unwrap();
    assert_eq!(ap.model.avg_ranks[base], 1.0);
}

#[test]
fn compare_rejects_identical_methods() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("results.jsonl");
    let mut recs = Vec::new();
    for c in 0..4 {
        let cat = format!("c{c}");
        recs.push(record(LossArg::Proposed, &cat, 0, 0.8, 0.3));
        recs.push(record(LossArg::Baseline, &cat, 0, 0.8, 0.3));
    }
    write_results(&path, &recs);
    let out = fcdd(&["--out", s(tmp.path()), "compare", "--results", s(&path)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("methods identical"));
}

#[test]
fn compare_rejects_disjoint_categories() {
    let mut recs = Vec::new();
    for c in 0..3 {
        recs.push(record(LossArg::Proposed, &format!("p{c}"), 0, 0.8, 0.3));
        recs.push(record(LossArg::Baseline, &format!("b{c}"), 0, 0.7, 0.2));
    }
    let err = compare_records(&recs, MetricArg::Auroc, 0.1).unwrap_err();
    assert!(err.to_string().contains("category sets differ"), "{err}");
}

#[test]
fn compare_csv_matches_golden() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("results.jsonl");
    let mut recs = Vec::new();
    for (c, cat) in ["alpha", "beta", "gamma"].iter().enumerate() {
        for seed in 0..2u64 {
            let jitter = 0.01 * seed as f64;
            recs.push(record(LossArg::Proposed, cat, seed, 0.9 - 0.05 * c as f64 + jitter, 0.4 + jitter));
            recs.push(record(LossArg::Baseline, cat, seed, 0.85 - 0.05 * c as f64 - jitter, 0.35 + 0.1 * c as f64));
        }
    }
    write_results(&path, &recs);
    let stdout = ok(fcdd(&["--out", s(tmp.path()), "compare", "--results", s(&path), "--metric", "auroc"]));
    assert!(stdout.contains("proposed-unsup"), "{stdout}");
    let csv = fs::read_to_string(tmp.path().join("compare_auroc.csv")).unwrap();
    let golden: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "fixtures", "compare_auroc.csv"].iter().collect();
    assert_eq!(csv, fs::read_to_string(golden).unwrap());
    assert!(tmp.path().join("cd_auroc.svg").is_file());
    assert!(!tmp.path().join("compare_ap.csv").exists());
}
