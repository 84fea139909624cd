use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cepsonar::eval::MethodSummary;
use cepsonar::pipeline::{self, ExperimentConfig, Layout, Variant};
use cepsonar::{Error, Result};

#[derive(Parser)]
#[command(name = "cepsonar", version, about = "Passive sonar detection and ranging from cepstrogram features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (`key = value` lines). Defaults to the config saved
    /// by `simulate` in the output directory, else built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Restricts featurize/train/eval to one input width; both when omitted.
    #[arg(long, global = true)]
    variant: Option<Width>,
    /// Restricts featurize/train/eval to one augmentation setting; both when omitted.
    #[arg(long, global = true)]
    augment: Option<Switch>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize transit and background recordings with range ground truth.
    Simulate,
    /// Cut, balance and featurize examples into per-split datasets.
    Featurize,
    /// Train the network variants with the two-phase schedule.
    Train,
    /// Predict the test and generalization splits with trained variants.
    Eval,
    /// Range the test and generalization splits with cepstral peak picking.
    Baseline,
    /// Far-field error against test SNR for every trained variant and the baseline.
    Sweep,
    /// Write AP table, error-by-range, SNR sweep, tracks and summary.
    Report,
    /// Every stage above in order.
    Run,
}

#[derive(Clone, Copy, ValueEnum)]
enum Width {
    N1,
    N8,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Cli {
    fn config(&self) -> Result<ExperimentConfig> {
        let saved = Layout::new(&self.out).config();
        let mut cfg = match (&self.config, saved.exists()) {
            (Some(path), _) => ExperimentConfig::load(path),
            (None, true) if !matches!(self.command, Command::Simulate | Command::Run) => ExperimentConfig::load(&saved),
            _ => Ok(ExperimentConfig::default()),
        }?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn variants(&self) -> Vec<Variant> {
        Variant::ALL
            .into_iter()
            .filter(|v| match self.variant {
                Some(Width::N1) => v.n == 1,
                Some(Width::N8) => v.n == 8,
                None => true,
            })
            .filter(|v| match self.augment {
                Some(Switch::On) => v.augment,
                Some(Switch::Off) => !v.augment,
                None => true,
            })
            .collect()
    }
}

fn print_summaries(summaries: &[MethodSummary]) {
    let fmt = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
    println!("{:<20} {:>8} {:>8} {:>10} {:>10}", "method", "examples", "AP", "near_err", "far_err");
    for s in summaries {
        println!(
            "{:<20} {:>8} {:>8} {:>10} {:>10}",
            s.method_tag,
            s.examples,
            fmt(s.average_precision),
            fmt(s.near_field.mean_abs_relative_error),
            fmt(s.far_field.mean_abs_relative_error)
        );
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.config()?;
    let out: &Path = &cli.out;
    match cli.command {
        Command::Simulate => {
            let m = pipeline::cmd_simulate(&cfg, out)?;
            eprintln!("wrote {} recordings to {}", m.recordings.len(), Layout::new(out).corpus().display());
        }
        Command::Featurize => {
            for v in cli.variants() {
                for (split, d) in pipeline::cmd_featurize(&cfg, out, v)? {
                    eprintln!("{} {}: {} examples ({} present)", v.tag(), split.name(), d.examples.len(), d.present_count());
                }
            }
        }
        Command::Train => {
            for v in cli.variants() {
                let log = pipeline::cmd_train(&cfg, out, v)?;
                eprintln!("{}: trained {} epochs", v.tag(), log.epochs.len());
            }
        }
        Command::Eval => {
            for v in cli.variants() {
                let records = pipeline::cmd_eval(&cfg, out, v)?;
                eprintln!("{}: {} prediction records", v.tag(), records.len());
            }
        }
        Command::Baseline => {
            let records = pipeline::cmd_baseline(&cfg, out)?;
            eprintln!("baseline: {} prediction records", records.len());
        }
        Command::Sweep => {
            let rows = pipeline::cmd_sweep(&cfg, out)?;
            eprintln!("sweep: {} rows", rows.len());
        }
        Command::Report => print_summaries(&pipeline::cmd_report(&cfg, out)?),
        Command::Run => {
            if cli.variant.is_some() || cli.augment.is_some() {
                return Err(Error::InvalidConfig("run trains every variant; drop --variant/--augment".into()));
            }
            print_summaries(&pipeline::run_experiment(&cfg, out)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cepsonar: {e}");
            ExitCode::FAILURE
        }
    }
}
