use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use qids_core::bench::{fit_model, prepare, run_bench, ExperimentConfig, ModelDescriptor, RunReport};
use qids_core::dataio::{ingest_csv, ColumnMap};
use qids_core::evalkit::evaluate;
use qids_core::flowfeat::features_to_csv;
use qids_core::{sha256_hex, write_atomic};

/// Quantum and classical intrusion-detection models on UAV-swarm flow data.
#[derive(Parser)]
#[command(name = "qids", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Experiment config (JSON). Built-in defaults when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config field by dot path, e.g. `--set train.epochs=50`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p, &self.overrides).with_context(|| format!("loading {}", p.display()))?,
            None => ExperimentConfig::from_json_with_overrides(&ExperimentConfig::default().to_json()?, &self.overrides)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate (or ingest) the dataset: dataset.csv + dataset.provenance.json.
    Gen(ConfigArgs),
    /// Extract, log-transform and standardize features for both splits.
    Features {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Canonical dataset CSV (as written by `gen`) instead of the config's source.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Train one model: checkpoint JSON (+ trace CSV for variational models).
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Model tag: SVM, QKERNEL, QKERNEL-RIDGE, QNN-<L>L, HYBRID-<L>L, QTNN-<h>-<L>.
        #[arg(long, short)]
        model: ModelDescriptor,
    },
    /// Run the model grid: report.json + report.csv. Exit code 1 if any model failed.
    Bench {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Print the resolved config (defaults + file + overrides) and exit.
        #[arg(long)]
        dry_run: bool,
    },
    /// Print a stored report.
    Report {
        /// report.json written by `bench`.
        path: PathBuf,
        /// Print the raw CSV table instead of the aligned view.
        #[arg(long)]
        csv: bool,
    },
}

fn init_workers() -> Result<()> {
    if let Ok(v) = std::env::var("QIDS_WORKERS") {
        let n: usize = v.parse().with_context(|| format!("QIDS_WORKERS={v} is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn write(path: &Path, contents: &str) -> Result<()> {
    write_atomic(path, contents.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn cmd_gen(args: &ConfigArgs) -> Result<()> {
    let cfg = args.load()?;
    let dir = args.out_dir(&cfg)?;
    let ds = cfg.load_dataset()?;
    write(&dir.join("dataset.csv"), &ds.to_csv()?)?;
    write(&dir.join("dataset.provenance.json"), &ds.provenance_json()?)?;
    println!("wrote {} flows to {}", ds.len(), dir.join("dataset.csv").display());
    for (class, n) in ds.class_counts() {
        println!("  {:<10} {n}", class.name());
    }
    Ok(())
}

fn cmd_features(args: &ConfigArgs, dataset: Option<&Path>) -> Result<()> {
    let cfg = args.load()?;
    let dir = args.out_dir(&cfg)?;
    let ds = match dataset {
        Some(p) => ingest_csv(p, &ColumnMap::default()).with_context(|| format!("reading {}", p.display()))?.0,
        None => cfg.load_dataset()?,
    };
    let p = prepare(&cfg, &ds)?;
    let standardizer = serde_json::to_string_pretty(&p.standardizer)?;
    write(&dir.join("features_train.csv"), &features_to_csv(&p.train_features, &p.train_classes)?)?;
    write(&dir.join("features_test.csv"), &features_to_csv(&p.test_features, &p.test_classes)?)?;
    write(&dir.join("standardizer.json"), &standardizer)?;
    let manifest = json!({
        "config_hash": cfg.hash(),
        "standardizer_sha256": sha256_hex(standardizer.as_bytes()),
        "data": p.summary,
    });
    write(&dir.join("features.json"), &serde_json::to_string_pretty(&manifest)?)?;
    println!(
        "train {} rows ({} attack), test {} rows ({} attack, prevalence {:.3}) -> {}",
        p.summary.train_size,
        p.summary.train_positives,
        p.summary.test_size,
        p.summary.test_positives,
        p.summary.test_prevalence,
        dir.display()
    );
    Ok(())
}

fn cmd_train(args: &ConfigArgs, model: &ModelDescriptor) -> Result<()> {
    let cfg = args.load()?;
    let dir = args.out_dir(&cfg)?;
    let p = prepare(&cfg, &cfg.load_dataset()?)?;
    let seed = cfg.model_seed(model);
    let (trained, trace) = fit_model(&cfg, model, &p.train_x, &p.train_y).with_context(|| format!("training {model}"))?;
    let scored = trained.score(&p.test_x, seed).with_context(|| format!("scoring {model}"))?;
    let scores: Vec<f64> = scored.iter().map(|s| s.0).collect();
    let preds: Vec<i8> = scored.iter().map(|s| s.1).collect();
    let mut metrics = evaluate(&preds, Some(&scores), &p.test_y)?;
    metrics.footprint = trained.footprint();

    let stem = model.to_string().to_ascii_lowercase();
    let checkpoint = json!({
        "model": model,
        "seed": seed,
        "config_hash": cfg.hash(),
        "footprint": trained.footprint(),
        "train": cfg.effective_train(),
        "test_metrics": metrics,
        "fitted": trained,
    });
    write(&dir.join(format!("{stem}.checkpoint.json")), &serde_json::to_string_pretty(&checkpoint)?)?;
    if let Some(t) = &trace {
        write(&dir.join(format!("{stem}.trace.csv")), &t.to_csv())?;
    }
    let f = metrics.footprint;
    println!(
        "{model}: qubits {} layers {} classical {} quantum {} | acc {:.3} f1 {:.3} spec {:.3} sens {:.3} mcc {:.3}",
        f.qubits, f.layers, f.classical_params, f.quantum_params, metrics.accuracy, metrics.f1, metrics.specificity, metrics.sensitivity, metrics.mcc
    );
    Ok(())
}

fn print_table(report: &RunReport) {
    println!(
        "{:<14} {:>6} {:>6} {:>7} {:>7} {:>8} {:>8} {:>8} {:>8} {:>8}  status",
        "model", "qubits", "layers", "class.", "quant.", "acc", "f1", "spec", "sens", "mcc"
    );
    for r in &report.rows {
        match &r.metrics {
            Some(m) => {
                let f = m.footprint;
                println!(
                    "{:<14} {:>6} {:>6} {:>7} {:>7} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3}  {}",
                    r.model, f.qubits, f.layers, f.classical_params, f.quantum_params, m.accuracy, m.f1, m.specificity, m.sensitivity, m.mcc, r.status
                );
            }
            None => println!("{:<14} {}: {}", r.model, r.status, r.error.as_deref().unwrap_or("")),
        }
    }
    println!(
        "test prevalence {:.3} over {} flows; {} circuits, {} shots; config {}",
        report.data.test_prevalence,
        report.data.test_size,
        report.simulator.circuits_run,
        report.simulator.shots_drawn,
        &report.config_hash[..12.min(report.config_hash.len())]
    );
}

fn cmd_bench(args: &ConfigArgs) -> Result<bool> {
    let cfg = args.load()?;
    let dir = args.out_dir(&cfg)?;
    let report = run_bench(&cfg)?;
    let (json_path, _) = report.write(&dir)?;
    print_table(&report);
    println!("report written to {}", json_path.display());
    for r in report.rows.iter().filter(|r| r.status != "ok") {
        eprintln!("failed: {}", r.error.as_deref().unwrap_or(&r.model));
    }
    Ok(report.all_ok())
}

fn cmd_report(path: &Path, csv: bool) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let report = RunReport::from_json(&text)?;
    if csv {
        print!("{}", report.table_csv());
    } else {
        print_table(&report);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    init_workers()?;
    match &cli.command {
        Command::Gen(a) => cmd_gen(a)?,
        Command::Features { cfg, dataset } => cmd_features(cfg, dataset.as_deref())?,
        Command::Train { cfg, model } => cmd_train(cfg, model)?,
        Command::Bench { cfg, dry_run: true } => println!("{}", cfg.load()?.to_json()?),
        Command::Bench { cfg, dry_run: false } => return cmd_bench(cfg),
        Command::Report { path, csv } => {
            if !path.exists() {
                bail!("no report at {}", path.display());
            }
            cmd_report(path, *csv)?
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
