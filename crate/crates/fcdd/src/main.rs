use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fcdd::config::{default_out_dir, HarnessConfig, LossArg, SupervisionArg};
use fcdd::error::{Error, Result, EXIT_NUMERICAL, EXIT_VALIDATION};
use fcdd::harness::{self, EvalRequest, MetricArg};
use fcdd_core::gradcheck::{GradCheckConfig, REL_TOL};

#[derive(Parser)]
#[command(name = "fcdd", version, about = "Pixel-wise one-class anomaly segmentation experiments")]
struct Cli {
    /// Output root [default: $FCDD_OUT or ./fcdd-out]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Common {
    /// JSON harness config; command-line flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the first N categories
    #[arg(long)]
    categories: Option<u32>,
    /// Dataset directory [default: <out>/data]
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Dataset seed
    #[arg(long)]
    data_seed: Option<u64>,
    /// Training images per category
    #[arg(long)]
    train_images: Option<usize>,
    /// Test images per category
    #[arg(long)]
    test_images: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset
    GenData {
        #[command(flatten)]
        common: Common,
        /// Dataset seed (same as --data-seed)
        #[arg(long, conflicts_with = "data_seed")]
        seed: Option<u64>,
        /// Replace an existing dataset
        #[arg(long)]
        force: bool,
    },
    /// Train and evaluate every (category, seed, loss) run
    Train {
        #[command(flatten)]
        common: Common,
        /// Comma-separated run seeds
        #[arg(long, alias = "seed", value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        epochs: Option<u32>,
        /// Loss variant; repeat for several
        #[arg(long = "loss", value_enum)]
        losses: Vec<LossArg>,
        #[arg(long, value_enum)]
        supervision: Option<SupervisionArg>,
        /// Concurrent runs
        #[arg(long)]
        jobs: Option<usize>,
        /// Retrain runs already present in the results file
        #[arg(long)]
        force: bool,
    },
    /// Score a category test set with a checkpoint
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        category: u32,
        /// Exclude the proxies a semi-supervised run with --seed trained on
        #[arg(long, value_enum, default_value = "unsup")]
        supervision: SupervisionArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write one heatmap PGM per test image into this directory
        #[arg(long)]
        dump_heatmaps: Option<PathBuf>,
    },
    /// Compare methods across categories from results files
    Compare {
        /// Results files [default: <out>/results.jsonl]
        #[arg(long = "results")]
        results: Vec<PathBuf>,
        /// Metric to compare [default: both]
        #[arg(long, value_enum)]
        metric: Option<MetricArg>,
        #[arg(long, default_value_t = 0.10)]
        alpha: f64,
    },
    /// Check every analytic gradient against finite differences
    LossCheck {
        #[arg(long, default_value_t = 50)]
        cases: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

fn base_config(out: &Option<PathBuf>, common: &Common) -> Result<HarnessConfig> {
    let mut cfg = match &common.config {
        Some(p) => HarnessConfig::load(p)?,
        None => HarnessConfig::default(),
    };
    if let Some(o) = out {
        cfg.output_dir = o.clone();
    }
    if let Some(n) = common.categories {
        cfg.categories = (0..n).collect();
    }
    if let Some(d) = &common.dataset {
        cfg.dataset_root = Some(d.clone());
    }
    if let Some(s) = common.data_seed {
        cfg.data_seed = s;
    }
    if let Some(n) = common.train_images {
        cfg.train_images = n;
    }
    if let Some(n) = common.test_images {
        cfg.test_images = n;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let out_dir = cli.out.clone().unwrap_or_else(default_out_dir);
    match cli.command {
        Command::GenData { common, seed, force } => {
            let mut cfg = base_config(&cli.out, &common)?;
            if let Some(s) = seed {
                cfg.data_seed = s;
            }
            let m = harness::cmd_gen_data(&cfg, force)?;
            println!(
                "wrote {} categories, {} images to {}",
                m.categories.len(),
                m.entries.len(),
                cfg.dataset_root().display()
            );
        }
        Command::Train { common, seeds, epochs, losses, supervision, jobs, force } => {
            let mut cfg = base_config(&cli.out, &common)?;
            if let Some(s) = seeds {
                cfg.seeds = s;
            }
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            if !losses.is_empty() {
                cfg.loss_variants = losses;
            }
            if let Some(s) = supervision {
                cfg.supervision = s;
            }
            if let Some(j) = jobs {
                cfg.jobs = j;
            }
            let summary = harness::cmd_train(&cfg, force, |line| println!("{line}"))?;
            println!(
                "{} runs trained, {} already present; results in {}",
                summary.trained.len(),
                summary.skipped.len(),
                harness::results_path(&cfg.output_dir).display()
            );
        }
        Command::Eval { checkpoint, dataset, category, supervision, seed, dump_heatmaps } => {
            let dataset = dataset.unwrap_or_else(|| out_dir.join("data"));
            let ev = harness::cmd_eval(&EvalRequest {
                checkpoint: &checkpoint,
                dataset: &dataset,
                category,
                supervision,
                seed,
                dump_heatmaps: dump_heatmaps.as_deref(),
            })?;
            println!("pixel_auroc {:.6}\npixel_ap {:.6}", ev.auroc, ev.ap);
        }
        Command::Compare { results, metric, alpha } => {
            let results = if results.is_empty() { vec![harness::results_path(&out_dir)] } else { results };
            let metrics = match metric {
                Some(m) => vec![m],
                None => vec![MetricArg::Auroc, MetricArg::Ap],
            };
            for m in metrics {
                let cmp = harness::cmd_compare(&results, m, alpha, &out_dir)?;
                println!("{}", cmp.table);
            }
        }
        Command::LossCheck { cases, seed } => {
            let cfg = GradCheckConfig { cases_per_op: cases, seed, ..Default::default() };
            let reports = harness::cmd_loss_check(&cfg)?;
            let mut ok = true;
            for r in &reports {
                println!(
                    "{:<9} {} cases, {} probes ({} skipped at kinks), max rel err {:.3e}  {}",
                    r.op,
                    r.cases,
                    r.checked,
                    r.skipped,
                    r.max_rel_err,
                    if r.passed() { "ok" } else { "FAIL" }
                );
                ok &= r.passed();
            }
            if !ok {
                return Err(Error::Numerical(format!("gradient check failed (tolerance {REL_TOL:e})")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_VALIDATION as u8) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            debug_assert!(code == EXIT_VALIDATION || code == EXIT_NUMERICAL);
            ExitCode::from(code as u8)
        }
    }
}
