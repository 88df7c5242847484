use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use osaas_core::dataset::TensorDataset;
use osaas_core::metrics::EvalReport;
use osaas_core::pipeline::{self, ModelKind, Profile, ReproduceOptions};
use osaas_core::scenarios::{read_corpus, Composition};
use osaas_core::seed::{derive_seed, stream};
use osaas_core::topology::{default_config, NetworkConfig};
use osaas_core::train::{Checkpoint, DEFAULT_EPOCHS};

#[derive(Parser)]
#[command(name = "osaas", version, about = "Impairment attribution on a shared optical line system")]
struct Cli {
    /// Network config JSON replacing the built-in layout.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for default output paths.
    #[arg(long, global = true, env = "OSAAS_OUT_DIR", default_value = "osaas-out")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled telemetry corpus (JSON Lines).
    Simulate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Composition JSON; defaults to 184 per (user, kind) pair plus 1816 clean.
        #[arg(long)]
        composition: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split a corpus 3:1 per class and write normalised tensors.
    Dataset {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
        /// Only 3:1 is supported.
        #[arg(long, default_value = "3:1")]
        ratio: String,
        #[arg(long)]
        out_train: Option<PathBuf>,
        #[arg(long)]
        out_test: Option<PathBuf>,
        /// Also write CSV copies next to the JSON files.
        #[arg(long)]
        csv: bool,
    },
    /// Train the CNN or the MLP baseline.
    Train {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long, default_value_t = DEFAULT_EPOCHS)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        checkpoint_out: Option<PathBuf>,
    },
    /// Score a checkpoint on a test set.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        report: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Baseline vs CNN precision/recall table and confusion matrices from two JSON reports.
    Report {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        cnn: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run every stage from one master seed and write a hash manifest.
    Reproduce {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ProfileArg::Default)]
        profile: ProfileArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Cnn,
    Mlp,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Default,
    Smoke,
}

fn load_config(path: Option<&Path>) -> anyhow::Result<NetworkConfig> {
    match path {
        Some(p) => NetworkConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(default_config()),
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let config = load_config(cli.config.as_deref())?;
    let out_dir = cli.out_dir.clone();
    match cli.command {
        Command::Simulate { seed, composition, out } => {
            let composition = match composition {
                Some(p) => Composition::load(&p)?,
                None => Composition::default(),
            };
            let corpus = pipeline::simulate(&config.checked()?, &composition, derive_seed(seed, stream::CORPUS))?;
            let out = out.unwrap_or_else(|| out_dir.join(pipeline::CORPUS_FILE));
            pipeline::write_atomic(&out, &pipeline::corpus_bytes(&corpus)?)?;
            for (kind, n) in pipeline::kind_counts(&corpus) {
                println!("{kind}: {n}");
            }
            println!("wrote {} snapshots to {}", corpus.len(), out.display());
        }
        Command::Dataset { corpus, split_seed, ratio, out_train, out_test, csv } => {
            if ratio.replace(' ', "") != "3:1" {
                bail!("unsupported split ratio {ratio}, only 3:1 is implemented");
            }
            let corpus = read_corpus(&pipeline::read_text(&corpus)?)?;
            let (split, train, test) = pipeline::make_datasets(&corpus, split_seed)?;
            let out_train = out_train.unwrap_or_else(|| out_dir.join(pipeline::TRAIN_FILE));
            let out_test = out_test.unwrap_or_else(|| out_dir.join(pipeline::TEST_FILE));
            for (path, ds) in [(&out_train, &train), (&out_test, &test)] {
                pipeline::write_atomic(path, serde_json::to_string(ds)?.as_bytes())?;
                if csv {
                    pipeline::write_atomic(&path.with_extension("csv"), ds.to_csv().as_bytes())?;
                }
            }
            println!(
                "split {}: {} train, {} test -> {}, {}",
                split.fingerprint(),
                split.train.len(),
                split.test.len(),
                out_train.display(),
                out_test.display()
            );
        }
        Command::Train { model, epochs, seed, train, checkpoint_out } => {
            let data = TensorDataset::from_json_str(&pipeline::read_text(&train)?)?;
            let kind = match model {
                ModelArg::Cnn => ModelKind::Cnn,
                ModelArg::Mlp => ModelKind::Mlp,
            };
            let started = Instant::now();
            let ckpt = pipeline::train_model(kind, &data, epochs, seed)?;
            let default_name = match kind {
                ModelKind::Cnn => pipeline::CNN_CHECKPOINT_FILE,
                ModelKind::Mlp => pipeline::MLP_CHECKPOINT_FILE,
            };
            let out = checkpoint_out.unwrap_or_else(|| out_dir.join(default_name));
            pipeline::write_atomic(&out, ckpt.to_json_string()?.as_bytes())?;
            println!(
                "{} trained {epochs} epochs in {:.1?}, final loss {:.5}, checkpoint {}",
                ckpt.model.name(),
                started.elapsed(),
                ckpt.loss_trace.last().copied().unwrap_or(f64::NAN),
                out.display()
            );
        }
        Command::Evaluate { checkpoint, test, report, out } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let test = TensorDataset::from_json_str(&pipeline::read_text(&test)?)?;
            let result = pipeline::evaluate(&ckpt, &test)?;
            let text = match report {
                Format::Json => serde_json::to_string_pretty(&result)?,
                Format::Csv => result.to_csv(),
                Format::Text => result.render_text(),
            };
            match out {
                Some(p) => pipeline::write_atomic(&p, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
        Command::Report { base, cnn, format } => {
            let load = |p: &Path| -> anyhow::Result<EvalReport> {
                Ok(serde_json::from_str(&pipeline::read_text(p)?).with_context(|| format!("parsing {}", p.display()))?)
            };
            let (base, cnn) = (load(&base)?, load(&cnn)?);
            let table = pipeline::report(&base, &cnn)?;
            match format {
                Format::Csv => print!("{}\n{}\n{}", table.to_csv(), base.confusion_csv(), cnn.confusion_csv()),
                Format::Json => println!("{}", serde_json::to_string_pretty(&table)?),
                Format::Text => print!("{}", pipeline::render_comparison(&base, &cnn, &table)),
            }
        }
        Command::Reproduce { seed, profile } => {
            let profile = match profile {
                ProfileArg::Default => Profile::Default,
                ProfileArg::Smoke => Profile::Smoke,
            };
            let started = Instant::now();
            let outcome = pipeline::reproduce(&ReproduceOptions {
                master_seed: seed,
                profile,
                config,
                config_path: cli.config.clone(),
                composition: None,
                epochs: None,
                out_dir: out_dir.clone(),
            })?;
            print!("{}", outcome.table.render_text());
            for check in &outcome.manifest.checks {
                println!("[{}] {}: {}", if check.passed { "PASS" } else { "FAIL" }, check.name, check.detail);
            }
            println!("artifacts in {} ({:.1?})", out_dir.display(), started.elapsed());
            return Ok(outcome.manifest.all_passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
