//! `graspbench`: synthetic data generation, fold planning, training,
//! evaluation, cross-validation and timing from the command line.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use graspnet::bench::{
    emit_report, evaluate, fit, gen_synthetic, load_trained, run_crossval, save_trained, time_inference,
    write_cornell_layout, write_outcomes_csv, BenchError, DataSource, OUTCOMES_CSV, REPORT_JSON,
};
use graspnet::config::{RunConfig, TimingConfig};
use graspnet::cornell::make_splits;
use graspnet::predictor::{PredictError, Variant};
use graspnet::{DataError, RgbdSample, SplitMode};
use serde_json::json;

const EXIT_OTHER: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_ABORT: u8 = 4;

#[derive(Parser)]
#[command(name = "graspbench", version, about = "Grasp predictor training and cross-validation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Uni,
    Multi,
    Graspability,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::Uni => Variant::UniModal,
            VariantArg::Multi => Variant::MultiModal,
            VariantArg::Graspability => Variant::Graspability,
        }
    }
}

/// Either a config file or a built-in preset.
#[derive(clap::Args)]
struct ConfigArgs {
    /// Run configuration (JSON). Without it the desk preset for `--variant` is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "uni", conflicts_with = "config")]
    variant: VariantArg,
    #[arg(long, default_value_t = 0, conflicts_with = "config")]
    seed: u64,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig, BenchError> {
        let cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::desk(self.variant.into(), self.seed),
        };
        Ok(cfg.resolved()?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic scenes in the Cornell directory layout.
    Gen {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the five-fold assignment of a dataset as JSON.
    Split {
        #[arg(long, default_value = "image-wise")]
        mode: SplitMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dataset directory, or `synthetic`.
        #[arg(long)]
        data: String,
    },
    /// Train on every usable sample and save the model.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        data: String,
        /// Output directory for weights.bin and model.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a saved model on a dataset.
    Eval {
        /// Overrides the metric settings saved with the model.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        data: String,
        /// Output directory for eval.json and outcomes.csv.
        #[arg(long)]
        report: PathBuf,
    },
    /// Five-fold cross-validation with report files.
    Crossval {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        data: String,
        /// Output directory for report.json, outcomes.csv and fold_accuracy.csv.
        #[arg(long)]
        report: PathBuf,
    },
    /// Time single-threaded inference of a saved model.
    Bench {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value_t = 100)]
        repeats: usize,
        #[arg(long, default_value_t = 10)]
        warmup: usize,
        /// Samples to predict on; defaults to scenes generated from the saved config.
        #[arg(long, default_value = "synthetic")]
        data: String,
    },
    /// Print the desk preset as a config file.
    Config {
        #[arg(long, value_enum, default_value = "uni")]
        variant: VariantArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_data(arg: &str, cfg: &RunConfig) -> Result<Vec<RgbdSample>, BenchError> {
    let samples = DataSource::parse(arg).load(cfg)?;
    if samples.is_empty() {
        return Err(DataError::NoSamples(PathBuf::from(arg)).into());
    }
    Ok(samples)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen { n, size, seed, out } => {
            let scenes = gen_synthetic(n, size, seed)?;
            write_cornell_layout(&scenes, &out)?;
            eprintln!("wrote {} scenes to {}", scenes.len(), out.display());
        }
        Command::Split { mode, seed, data } => {
            let samples = load_data(&data, &RunConfig::desk(Variant::UniModal, seed))?;
            let plan = make_splits(&samples, mode, seed).map_err(BenchError::from)?;
            plan.check(&samples).map_err(|e| BenchError::from(DataError::Split(e)))?;
            println!("{}", serde_json::to_string_pretty(&plan)?);
        }
        Command::Train { config, data, out } => {
            let cfg = config.resolve()?;
            let samples = load_data(&data, &cfg)?;
            let refs: Vec<&RgbdSample> = samples.iter().collect();
            let fitted = fit(&cfg, &refs, cfg.seed)?;
            save_trained(&out, &cfg, &fitted.trained)?;
            let last = fitted.history.losses().last();
            eprintln!(
                "trained on {} samples ({} skipped), final loss {last:?}, saved to {}",
                samples.len() - fitted.skipped,
                fitted.skipped,
                out.display()
            );
        }
        Command::Eval { config, weights, data, report } => {
            let (mut cfg, trained) = load_trained(&weights)?;
            if let Some(path) = config {
                cfg.metric = RunConfig::load(&path).map_err(BenchError::from)?.metric;
            }
            let samples = load_data(&data, &cfg)?;
            let refs: Vec<&RgbdSample> = samples.iter().collect();
            let eval = evaluate(&cfg, &trained, &refs, 0)?;
            fs::create_dir_all(&report).with_context(|| report.display().to_string())?;
            write_outcomes_csv(&eval.outcomes, &report.join(OUTCOMES_CSV))?;
            let summary = json!({
                "weights": weights,
                "source": data,
                "accuracy": eval.accuracy,
                "n": eval.outcomes.len(),
                "clamped": eval.outcomes.iter().filter(|o| o.clamped).count(),
                "outcomes_csv_path": OUTCOMES_CSV,
            });
            write_json(&report.join("eval.json"), &summary)?;
            println!("accuracy {:.4} over {} samples", eval.accuracy, eval.outcomes.len());
        }
        Command::Crossval { config, data, report } => {
            let cfg = config.resolve()?;
            let source = DataSource::parse(&data);
            let samples = load_data(&data, &cfg)?;
            let run = run_crossval(&cfg, &samples, &source.describe())?;
            emit_report(&run.report, &run.outcomes, &report)?;
            for f in &run.report.folds {
                println!("fold {} accuracy {:.4} (n = {})", f.index, f.accuracy, f.n);
            }
            println!(
                "mean {:.4} +- {:.4}, {:.1} fps; report in {}",
                run.report.mean_accuracy,
                run.report.std_accuracy,
                run.report.fps.mean,
                report.join(REPORT_JSON).display()
            );
        }
        Command::Bench { weights, repeats, warmup, data } => {
            let (cfg, trained) = load_trained(&weights)?;
            let samples = load_data(&data, &cfg)?;
            let refs: Vec<&RgbdSample> = samples.iter().collect();
            let fps = time_inference(&trained, &refs, &TimingConfig { warmup, repeats })?;
            println!("{}", serde_json::to_string_pretty(&fps)?);
        }
        Command::Config { variant, seed } => {
            println!("{}", RunConfig::desk(variant.into(), seed).to_json());
        }
    }
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> anyhow::Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| path.display().to_string())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<BenchError>() {
        return match e {
            _ if e.is_config() => EXIT_CONFIG,
            _ if e.is_training_abort() => EXIT_ABORT,
            BenchError::Data(_) => EXIT_DATA,
            _ => EXIT_OTHER,
        };
    }
    match err.downcast_ref::<PredictError>() {
        Some(PredictError::Spec(_)) => EXIT_CONFIG,
        Some(PredictError::TrainingAborted { .. }) => EXIT_ABORT,
        _ => EXIT_OTHER,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
