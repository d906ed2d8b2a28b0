//! The five CLI commands as library functions.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use fcdd_core::gradcheck::{self, GradCheckConfig, OpReport};
use fcdd_core::model::{evaluate, train_run_with, Evaluation, ProxyImage, TrainConfig, TrainSet};
use fcdd_core::stats::{render_cd_svg, CdModel, ScoreMatrix};
use fcdd_core::synth::{pick_semi_proxies, CategoryData, TestSample};
use fcdd_core::{math, Rng, Tensor};

use crate::checkpoint;
use crate::config::{HarnessConfig, SupervisionArg};
use crate::dataset::{self, Counts, Manifest};
use crate::error::{Error, Result};
use crate::pnm;
use crate::records::{self, RunRecord, RunSpec};

pub const RESULTS_FILE: &str = "results.jsonl";

pub fn results_path(out: &Path) -> PathBuf {
    out.join(RESULTS_FILE)
}

pub fn checkpoint_path(out: &Path, run_id: &str) -> PathBuf {
    out.join("checkpoints").join(format!("{run_id}.ckpt"))
}

pub fn log_path(out: &Path, run_id: &str) -> PathBuf {
    out.join("logs").join(format!("{run_id}.jsonl"))
}

pub fn cmd_gen_data(cfg: &HarnessConfig, force: bool) -> Result<Manifest> {
    cfg.validate()?;
    let counts = Counts { train: cfg.train_images, test: cfg.test_images };
    dataset::write_dataset(&cfg.dataset_root(), &cfg.categories, cfg.data_seed, &counts, cfg.image_size, force)
}

fn check_dataset(cfg: &HarnessConfig, m: &Manifest) -> Result<()> {
    let expected = (cfg.data_seed, cfg.train_images, cfg.test_images, cfg.image_size);
    let found = (m.seed, m.counts.train, m.counts.test, m.image_size);
    if expected != found {
        return Err(Error::Invalid(format!(
            "dataset at {} has (seed, train, test, size) = {:?} but the config asks for {:?}; rerun gen-data",
            cfg.dataset_root().display(),
            found,
            expected
        )));
    }
    Ok(())
}

/// Test images used for evaluation and the proxies moved into training.
pub fn split_for_run(
    data: &CategoryData,
    supervision: SupervisionArg,
    seed: u64,
) -> Result<(Vec<ProxyImage>, Vec<TestSample>)> {
    match supervision {
        SupervisionArg::Unsup => Ok((Vec::new(), data.test.clone())),
        SupervisionArg::Semi => {
            let picks = pick_semi_proxies(&data.test, &Rng::new(seed), data.spec.category_id)?;
            let proxies = picks
                .iter()
                .map(|&j| ProxyImage {
                    image: data.test[j].image.clone(),
                    mask: data.test[j].mask.clone(),
                    kind: data.test[j].kind.expect("proxies are anomalous"),
                })
                .collect();
            let rest = (0..data.test.len()).filter(|j| !picks.contains(j)).map(|j| data.test[j].clone()).collect();
            Ok((proxies, rest))
        }
    }
}

pub struct Job {
    pub spec: RunSpec,
    pub seed: u64,
    pub run_id: String,
}

pub fn run_matrix(cfg: &HarnessConfig) -> Vec<Job> {
    let mut jobs = Vec::new();
    for &category in &cfg.categories {
        for &seed in &cfg.seeds {
            for &loss_variant in &cfg.loss_variants {
                let spec = RunSpec {
                    category,
                    loss_variant,
                    supervision: cfg.supervision,
                    epochs: cfg.epochs,
                    batch_size: cfg.batch_size,
                    data_seed: cfg.data_seed,
                    train_images: cfg.train_images,
                    test_images: cfg.test_images,
                    image_size: cfg.image_size,
                };
                let run_id = spec.run_id(seed);
                jobs.push(Job { spec, seed, run_id });
            }
        }
    }
    jobs
}

fn run_one(job: &Job, data: &CategoryData, out: &Path) -> Result<RunRecord> {
    let start = Instant::now();
    let (proxies, test) = split_for_run(data, job.spec.supervision, job.seed)?;
    let set = TrainSet { category: job.spec.category, normals: data.train.clone(), proxies };
    let mut tc = TrainConfig::new(job.spec.loss_variant.into(), job.spec.supervision.into());
    tc.epochs = job.spec.epochs;
    tc.batch_size = job.spec.batch_size;
    let mut log = String::new();
    let (params, _) = train_run_with(&set, &tc, job.seed, |e| {
        let _ = writeln!(log, r#"{{"epoch":{},"mean_loss":{},"lr":{}}}"#, e.epoch, e.mean_loss, e.lr);
    })?;
    let ev = evaluate(&params, &test, data.spec.image_size)?;
    checkpoint::save(&checkpoint_path(out, &job.run_id), &params)?;
    let lp = log_path(out, &job.run_id);
    fs::write(&lp, log).map_err(Error::io(&lp))?;
    Ok(RunRecord {
        run_id: job.run_id.clone(),
        category: data.spec.name(),
        seed: job.seed,
        loss_variant: job.spec.loss_variant,
        supervision: job.spec.supervision,
        epochs: job.spec.epochs,
        pixel_auroc: ev.auroc,
        pixel_ap: ev.ap,
        wall_time_s: start.elapsed().as_secs_f64(),
        config_digest: job.spec.digest(),
        created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
    })
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct TrainSummary {
    pub trained: Vec<RunRecord>,
    pub skipped: Vec<String>,
}

/// Runs the full matrix, appending one record per finished run. Runs whose
/// id is already in the results file are skipped unless `force`.
pub fn cmd_train(cfg: &HarnessConfig, force: bool, mut progress: impl FnMut(&str) + Send) -> Result<TrainSummary> {
    cfg.validate()?;
    let root = cfg.dataset_root();
    let manifest = dataset::read_manifest(&root)?;
    check_dataset(cfg, &manifest)?;
    let out = &cfg.output_dir;
    for sub in ["checkpoints", "logs"] {
        let d = out.join(sub);
        fs::create_dir_all(&d).map_err(Error::io(&d))?;
    }
    let results = results_path(out);
    let done: Vec<String> = records::read(&results)?.into_iter().map(|r| r.run_id).collect();
    let mut data = BTreeMap::new();
    for &c in &cfg.categories {
        data.insert(c, dataset::load_category(&root, &manifest, c)?);
    }
    let mut summary = TrainSummary::default();
    let mut pending = Vec::new();
    for job in run_matrix(cfg) {
        if !force && done.contains(&job.run_id) {
            summary.skipped.push(job.run_id);
        } else {
            pending.push(job);
        }
    }
    let next = AtomicUsize::new(0);
    let finished = Mutex::new(Vec::new());
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let progress = Mutex::new(&mut progress);
    std::thread::scope(|s| {
        for _ in 0..cfg.jobs.min(pending.len().max(1)) {
            s.spawn(|| loop {
                if failure.lock().unwrap().is_some() {
                    return;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = pending.get(i) else { return };
                let res = run_one(job, &data[&job.spec.category], out)
                    .and_then(|rec| records::append(&results, &rec).map(|_| rec));
                match res {
                    Ok(rec) => {
                        (progress.lock().unwrap())(&format!(
                            "{} seed {} {}: auroc {:.4} ap {:.4} ({:.1}s)",
                            rec.category,
                            rec.seed,
                            rec.method(),
                            rec.pixel_auroc,
                            rec.pixel_ap,
                            rec.wall_time_s
                        ));
                        finished.lock().unwrap().push((i, rec));
                    }
                    Err(e) => {
                        failure.lock().unwrap().get_or_insert(e);
                        return;
                    }
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let mut finished = finished.into_inner().unwrap();
    finished.sort_by_key(|(i, _)| *i);
    summary.trained = finished.into_iter().map(|(_, r)| r).collect();
    Ok(summary)
}

pub struct EvalRequest<'a> {
    pub checkpoint: &'a Path,
    pub dataset: &'a Path,
    pub category: u32,
    pub supervision: SupervisionArg,
    pub seed: u64,
    pub dump_heatmaps: Option<&'a Path>,
}

/// Re-scores a category test set with a saved checkpoint.
pub fn cmd_eval(req: &EvalRequest) -> Result<Evaluation> {
    let params = checkpoint::load(req.checkpoint)?;
    let manifest = dataset::read_manifest(req.dataset)?;
    let data = dataset::load_category(req.dataset, &manifest, req.category)?;
    let (_, test) = split_for_run(&data, req.supervision, req.seed)?;
    let ev = evaluate(&params, &test, data.spec.image_size)?;
    if let Some(dir) = req.dump_heatmaps {
        dump_heatmaps(dir, &ev)?;
    }
    Ok(ev)
}

/// One PGM per test image, all scaled by the largest score of the set.
pub fn dump_heatmaps(dir: &Path, ev: &Evaluation) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let scores = ev.scores.scores();
    let max = scores.max();
    let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
    let [n, _, h, w] = *scores.shape() else { unreachable!() };
    for i in 0..n {
        let map = Tensor::new(&[1, h, w], scores.item(i).iter().map(|v| v * scale).collect())?;
        pnm::write_pgm(&dir.join(format!("{i:04}_heatmap.pgm")), &map)?;
    }
    Ok(())
}

pub fn cmd_loss_check(cfg: &GradCheckConfig) -> Result<Vec<OpReport>> {
    Ok(gradcheck::run_suite(cfg)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MetricArg {
    Auroc,
    Ap,
}

impl MetricArg {
    pub fn name(&self) -> &'static str {
        match self {
            MetricArg::Auroc => "auroc",
            MetricArg::Ap => "ap",
        }
    }

    fn of(&self, r: &RunRecord) -> f64 {
        match self {
            MetricArg::Auroc => r.pixel_auroc,
            MetricArg::Ap => r.pixel_ap,
        }
    }
}

/// Seed mean and sample standard deviation of one method on one category.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStat {
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub metric: MetricArg,
    pub methods: Vec<String>,
    pub categories: Vec<String>,
    /// `cells[method][category]`.
    pub cells: Vec<Vec<CellStat>>,
    pub model: CdModel,
    pub table: String,
    pub csv: String,
    pub svg: String,
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = math::mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Seed-averages records per method and category, then runs the paired
/// tests and builds the CD model.
pub fn compare_records(records: &[RunRecord], metric: MetricArg, alpha: f64) -> Result<Comparison> {
    let mut grouped: BTreeMap<String, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for r in records {
        grouped.entry(r.method()).or_default().entry(r.category.clone()).or_default().push(metric.of(r));
    }
    if grouped.len() < 2 {
        return Err(Error::Invalid(format!("need at least 2 methods to compare, found {}", grouped.len())));
    }
    let methods: Vec<String> = grouped.keys().cloned().collect();
    let categories: Vec<String> = grouped[&methods[0]].keys().cloned().collect();
    for m in &methods[1..] {
        let cats: Vec<String> = grouped[m].keys().cloned().collect();
        if cats != categories {
            let only_a: Vec<_> = categories.iter().filter(|c| !cats.contains(c)).collect();
            let only_b: Vec<_> = cats.iter().filter(|c| !categories.contains(c)).collect();
            return Err(Error::Invalid(format!(
                "category sets differ: only {} has {:?}, only {} has {:?}",
                methods[0], only_a, m, only_b
            )));
        }
    }
    let cells: Vec<Vec<CellStat>> = methods
        .iter()
        .map(|m| {
            categories
                .iter()
                .map(|c| {
                    let xs = &grouped[m][c];
                    CellStat { mean: math::mean(xs), std: sample_std(xs), runs: xs.len() }
                })
                .collect()
        })
        .collect();
    let values = cells.iter().map(|row| row.iter().map(|c| c.mean).collect()).collect();
    let matrix = ScoreMatrix::new(methods.clone(), categories.clone(), values)?;
    let model = CdModel::from_scores(&matrix, alpha)?;
    let table = render_table(metric, &methods, &categories, &cells, &model);
    let mut csv = String::from("method,category,mean_metric,std_metric\n");
    for (m, row) in methods.iter().zip(&cells) {
        for (c, cell) in categories.iter().zip(row) {
            let _ = writeln!(csv, "{m},{c},{:.6},{:.6}", cell.mean, cell.std);
        }
    }
    let svg = render_cd_svg(&model);
    Ok(Comparison { metric, methods, categories, cells, model, table, csv, svg })
}

fn render_table(
    metric: MetricArg,
    methods: &[String],
    categories: &[String],
    cells: &[Vec<CellStat>],
    model: &CdModel,
) -> String {
    let col = methods.iter().map(|m| m.len()).max().unwrap_or(0).max(17);
    let first = categories.iter().map(|c| c.len()).max().unwrap_or(0).max(8);
    let mut t = String::new();
    let _ = writeln!(
        t,
        "pixel-wise {} (mean over seeds, seed std in parentheses; mean row: std across categories)",
        metric.name().to_uppercase()
    );
    let _ = write!(t, "{:<first$}", "category");
    for m in methods {
        let _ = write!(t, "  {m:>col$}");
    }
    t.push('\n');
    for (j, c) in categories.iter().enumerate() {
        let _ = write!(t, "{c:<first$}");
        for row in cells {
            let _ = write!(t, "  {:>col$}", format!("{:.4} ({:.4})", row[j].mean, row[j].std));
        }
        t.push('\n');
    }
    let _ = write!(t, "{:<first$}", "mean");
    for row in cells {
        let means: Vec<f64> = row.iter().map(|c| c.mean).collect();
        let _ = write!(t, "  {:>col$}", format!("{:.4} ({:.4})", math::mean(&means), sample_std(&means)));
    }
    t.push('\n');
    let _ = write!(t, "{:<first$}", "avg rank");
    for r in &model.avg_ranks {
        let _ = write!(t, "  {:>col$}", format!("{r:.3}"));
    }
    t.push('\n');
    let _ = writeln!(t, "\npairwise Wilcoxon signed-rank (two-sided), Holm-adjusted, alpha = {}", model.alpha);
    for p in &model.pairs {
        let _ = writeln!(
            t,
            "{} vs {}: W = {} (n = {}, {}), p = {:.6}, p_holm = {:.6}{}",
            methods[p.a],
            methods[p.b],
            p.test.statistic,
            p.test.n,
            if p.test.exact { "exact" } else { "normal approx." },
            p.test.p,
            p.p_adjusted,
            if p.p_adjusted < model.alpha { ", significant" } else { "" }
        );
    }
    if model.cliques.is_empty() {
        let _ = writeln!(t, "cliques: none");
    }
    for c in &model.cliques {
        let names: Vec<&str> = c.iter().map(|&i| methods[i].as_str()).collect();
        let _ = writeln!(t, "clique: {}", names.join(", "));
    }
    t
}

/// Compares records from one or more results files and writes
/// `compare_<metric>.csv` and `cd_<metric>.svg` into `out`.
pub fn cmd_compare(results: &[PathBuf], metric: MetricArg, alpha: f64, out: &Path) -> Result<Comparison> {
    let mut all = Vec::new();
    for p in results {
        if !p.is_file() {
            return Err(Error::Invalid(format!("results file {} not found", p.display())));
        }
        all.extend(records::read(p)?);
    }
    let cmp = compare_records(&records::latest_per_run(all), metric, alpha)?;
    fs::create_dir_all(out).map_err(Error::io(out))?;
    let csv = out.join(format!("compare_{}.csv", metric.name()));
    fs::write(&csv, &cmp.csv).map_err(Error::io(&csv))?;
    let svg = out.join(format!("cd_{}.svg", metric.name()));
    fs::write(&svg, &cmp.svg).map_err(Error::io(&svg))?;
    Ok(cmp)
}
