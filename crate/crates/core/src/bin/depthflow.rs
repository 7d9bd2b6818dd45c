//! Command-line front end. On failure a single JSON line
//! `{"error": <kind>, "message": <text>}` goes to stderr and the exit code is
//! nonzero.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use depthflow::config::GenConfig;
use depthflow::generate::{augment_dataset, run_generation};
use depthflow::io::{self, FlowFormat};
use depthflow::lateral::AugLabel;
use depthflow::manifest::DatasetManifest;
use depthflow::metrics::evaluate_directories;
use depthflow::{classifier, selftest, Error};

#[derive(Parser)]
#[command(
    name = "depthflow",
    version,
    about = "Optical-flow tuple synthesis from depth and stereo"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalFormat {
    Flo,
    Kitti,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset from a manifest.
    Generate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory; falls back to `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `global_seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Apply one lateral augmentation to every tuple of a generated dataset.
    Augment {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the augmentation-class posterior of a flow file.
    Classify {
        #[arg(long)]
        flow: PathBuf,
    },
    /// Pool EPE and F1-all over matching flow files in two directories.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, value_enum)]
        format: EvalFormat,
    },
    /// Render a flow file with the standard color wheel.
    Inspect {
        #[arg(long)]
        flow: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

fn load_config(path: Option<&PathBuf>, seed: Option<u64>) -> Result<GenConfig, Error> {
    let mut cfg = match path {
        Some(p) => GenConfig::load(p)?,
        None => GenConfig::default(),
    };
    if let Some(s) = seed {
        cfg.global_seed = s;
    }
    Ok(cfg)
}

fn print_json(value: &serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string(value).expect("json values serialize")
    );
}

/// Returns `Ok(false)` when the command ran but reported failure.
fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Generate {
            manifest,
            config,
            out,
            seed,
            workers,
        } => {
            let cfg = load_config(config.as_ref(), seed)?;
            let out = out.or_else(|| cfg.output_dir.clone()).ok_or_else(|| {
                Error::Config("no output directory: pass --out or set output_dir".into())
            })?;
            let manifest = DatasetManifest::load(&manifest)?;
            let report = run_generation(&manifest, &cfg, &out, workers)?;
            print_json(&json!({
                "tuples": report.tuple_count(),
                "samples_ok": report.samples_ok,
                "samples_total": report.samples_total,
                "per_kind": report.per_kind,
                "events": report.events.len(),
            }));
        }
        Command::Augment {
            input,
            out,
            config,
            seed,
        } => {
            let cfg = load_config(config.as_ref(), seed)?;
            let report = augment_dataset(&input, &out, &cfg)?;
            print_json(&json!({
                "tuples": report.tuple_count(),
                "events": report.events.len(),
            }));
        }
        Command::Classify { flow } => {
            let posterior = classifier::classify(&io::read_flow(&flow)?)?;
            let probs: serde_json::Map<String, serde_json::Value> = AugLabel::ALL
                .iter()
                .map(|l| (l.name().to_owned(), json!(posterior.probability(*l))))
                .collect();
            print_json(&json!({
                "predicted": posterior.predicted().name(),
                "posterior": probs,
            }));
        }
        Command::Eval { pred, gt, format } => {
            let format = match format {
                EvalFormat::Flo => FlowFormat::Flo,
                EvalFormat::Kitti => FlowFormat::KittiPng,
            };
            let r = evaluate_directories(&pred, &gt, format)?;
            print_json(&json!({
                "epe": r.totals.epe,
                "f1_all": r.totals.f1_all,
                "files": r.files,
                "n_valid": r.totals.n_valid,
                "n_missing": r.totals.n_missing,
                "missing_files": r.missing_files,
            }));
        }
        Command::Inspect { flow, out } => {
            io::write_flow_png(&out, &io::read_flow(&flow)?)?;
        }
        Command::Selftest => {
            let checks = selftest::run()?;
            let mut ok = true;
            for c in &checks {
                ok &= c.passed;
                println!(
                    "{} {:<32} value={:.3e} bound={:.3e}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.bound
                );
            }
            if !ok {
                let failed: Vec<_> = checks
                    .iter()
                    .filter(|c| !c.passed)
                    .map(|c| c.name)
                    .collect();
                eprintln!(
                    "{}",
                    json!({"error": "selftest_failed", "message": failed.join(", ")})
                );
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("{}", json!({"error": e.kind(), "message": e.to_string()}));
            ExitCode::FAILURE
        }
    }
}
