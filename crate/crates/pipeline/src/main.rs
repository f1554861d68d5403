use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hrrp_neural::gradcheck::{run_suite, Precision};
use hrrp_pipeline::attention::export_attention;
use hrrp_pipeline::config::Config;
use hrrp_pipeline::sweep::sweep_sjr;
use hrrp_pipeline::train::{evaluate, train, TrainOptions};
use hrrp_pipeline::{generate, Dataset, Mode, PipelineError, Result};

/// Anti-jamming HRRP recognition: datasets, training, evaluation, sweeps.
#[derive(Parser)]
#[command(name = "hrrp", version)]
struct Cli {
    /// Worker threads for per-sample parallel work (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate jammed spectra for every class and SJR shard.
    GenDataset {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one front end + classifier on a dataset shard.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        mode: Mode,
        #[arg(long)]
        epochs: usize,
        #[arg(long)]
        batch: usize,
        #[arg(long)]
        seed: u64,
        /// Checkpoint path; the sidecar goes to `<out>.json`.
        #[arg(long)]
        out: PathBuf,
        /// Shard to train on (required when the dataset has several).
        #[arg(long, allow_hyphen_values = true)]
        sjr: Option<f64>,
        /// Config whose `training` section supplies optimizer and network settings.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Accuracy and confusion matrix of a checkpoint on the test split.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Shard to evaluate on (default: the one the model was trained on).
        #[arg(long, allow_hyphen_values = true)]
        sjr: Option<f64>,
        /// Fail unless the checkpoint was trained in this mode.
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// Generate all shards and train every configured mode at every SJR.
    SweepSjr {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-sample CFA weights as CSV plus an SVG overlay on the jamming PSD.
    ExportAttention {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        sjr: Option<f64>,
    },
    /// Finite-difference check of every layer and the full network.
    Gradcheck {
        /// Run the core in 64-bit mode (tolerance 1e-6 instead of 1e-3).
        #[arg(long)]
        f64: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let quiet = cli.quiet;
    let log = move |msg: &str| {
        if !quiet {
            eprintln!("{msg}");
        }
    };
    match run(cli.command, &log) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command, log: &dyn Fn(&str)) -> Result<()> {
    match command {
        Command::GenDataset { config, seed, out } => {
            let config = Config::load(&config)?;
            let m = generate(&config, seed, &out, log)?;
            log(&format!("dataset with {} shard(s) in {}", m.shards.len(), out.display()));
        }
        Command::Train { dataset, mode, epochs, batch, seed, out, sjr, config } => {
            let mut training = match config {
                Some(path) => Config::load(&path)?.training,
                None => Config::default().training,
            };
            training.epochs = epochs;
            training.batch = batch;
            training.seed = seed;
            if epochs == 0 || batch < 2 {
                return Err(PipelineError::Config("--epochs must be >= 1 and --batch >= 2".into()));
            }
            let ds = Dataset::open(&dataset)?;
            let state = train(&ds, &TrainOptions { mode, sjr_db: sjr, training }, &out, log)?;
            log(&format!(
                "best test accuracy {:.4} at epoch {}, final {:.4}; checkpoint {}",
                state.best_test_accuracy,
                state.best_epoch,
                state.final_test_accuracy,
                out.display()
            ));
        }
        Command::Eval { ckpt, dataset, report, sjr, mode } => {
            let ds = Dataset::open(&dataset)?;
            let (metrics, state) = evaluate(&ckpt, &ds, sjr, mode)?;
            let extra = serde_json::json!({
                "mode": state.mode,
                "sjr_db": sjr.unwrap_or(state.sjr_db),
                "best_epoch": state.best_epoch,
                "best_test_accuracy": state.best_test_accuracy,
                "final_test_accuracy": state.final_test_accuracy,
            });
            metrics.write_report(&report, extra)?;
            log(&format!(
                "accuracy {:.4} over {} test samples; report in {}",
                metrics.accuracy,
                metrics.total(),
                report.display()
            ));
        }
        Command::SweepSjr { config, out } => {
            let config = Config::load(&config)?;
            let rows = sweep_sjr(&config, &out, log)?;
            log(&format!("{} sweep rows written to {}", rows.len(), out.join("sweep.csv").display()));
        }
        Command::ExportAttention { ckpt, dataset, out, sjr } => {
            let ds = Dataset::open(&dataset)?;
            let export = export_attention(&ckpt, &ds, sjr, &out)?;
            let s = &export.summary;
            log(&format!(
                "{} samples: mean weight jammed {:.4} vs clean {:.4}; jammed below clean in {:.1}%",
                s.samples,
                s.mean_jammed_weight,
                s.mean_clean_weight,
                100.0 * s.fraction_jammed_below_clean
            ));
        }
        Command::Gradcheck { f64 } => gradcheck(if f64 { Precision::F64 } else { Precision::F32 }, log)?,
    }
    Ok(())
}

fn gradcheck(precision: Precision, log: &dyn Fn(&str)) -> Result<()> {
    let reports = run_suite(precision)?;
    let mut failed = Vec::new();
    for r in &reports {
        let ok = r.passes(precision);
        log(&format!(
            "{} {:<24} max rel err {:.3e} over {} checks",
            if ok { "ok  " } else { "FAIL" },
            r.name,
            r.max_rel_err,
            r.checked
        ));
        if !ok {
            failed.push(format!("{} ({:.3e} at {})", r.name, r.max_rel_err, r.worst));
        }
    }
    if failed.is_empty() {
        log(&format!("all {} checks within {:e}", reports.len(), precision.tolerance()));
        Ok(())
    } else {
        Err(PipelineError::Numerical(format!("gradient check failed: {}", failed.join(", "))))
    }
}
