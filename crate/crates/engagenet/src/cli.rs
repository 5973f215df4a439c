//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use engagenet_core::data::SynthConfig;
use engagenet_core::model::Head;
use engagenet_core::train::SamplerKind;

use crate::error::{Error, Result};
use crate::experiment::{ExperimentConfig, WeightSource};
use crate::manifest::Split;
use crate::{runner, synth_io};

#[derive(Parser, Debug)]
#[command(name = "engagenet", version, about = "Train and evaluate ResNet+TCN engagement classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic motion dataset (FSEQ clips plus manifest.csv).
    SynthGen(SynthArgs),
    /// Train a model on the train and validation splits of a manifest.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split and write its confusion matrix.
    Eval(EvalArgs),
    /// Compare analytic gradients with central differences.
    Gradcheck(GradcheckArgs),
    /// Describe a checkpoint, tensor, clip or manifest file.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Named configuration: desk or paper.
    #[arg(long, default_value = "desk")]
    preset: String,
    /// key=value file applied on top of the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Inverse-frequency loss weights: none, train or train+val (the bare
    /// flag means train+val).
    #[arg(long, num_args = 0..=1, default_missing_value = "train+val", value_parser = parse_weights)]
    class_weights: Option<WeightSource>,
    /// uniform or stratified.
    #[arg(long, value_parser = parse_sampler)]
    sampler: Option<SamplerKind>,
    /// Record every file read to access_log.txt.
    #[arg(long)]
    deterministic: bool,
    /// tcn or meanpool.
    #[arg(long, value_parser = parse_head)]
    head: Option<Head>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value = "desk")]
    preset: String,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training clips per class, comma separated.
    #[arg(long, value_parser = parse_counts)]
    counts: Counts,
    #[arg(long, value_parser = parse_counts)]
    val_counts: Option<Counts>,
    #[arg(long, value_parser = parse_counts)]
    test_counts: Option<Counts>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Continue from a checkpoint until --epochs epochs are complete.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "test", value_parser = parse_split)]
    split: Split,
    /// Report directory; defaults to the checkpoint's directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    /// Check every op in the suite.
    #[arg(long)]
    all: bool,
    /// Op to check; repeatable.
    #[arg(long = "op")]
    ops: Vec<String>,
    /// Random shapes per op.
    #[arg(long, default_value_t = 20)]
    cases: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
}

#[derive(Args, Debug)]
struct InspectArgs {
    path: PathBuf,
}

/// Comma-separated clips per class.
#[derive(Debug, Clone)]
struct Counts(Vec<usize>);

fn parse_counts(s: &str) -> std::result::Result<Counts, String> {
    s.split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| format!("`{p}` is not a clip count")))
        .collect::<std::result::Result<_, _>>()
        .map(Counts)
}

fn parse_weights(s: &str) -> std::result::Result<WeightSource, String> {
    WeightSource::parse(s).ok_or_else(|| format!("`{s}`: expected none, train or train+val"))
}

fn parse_sampler(s: &str) -> std::result::Result<SamplerKind, String> {
    SamplerKind::parse(s).ok_or_else(|| format!("`{s}`: expected uniform or stratified"))
}

fn parse_head(s: &str) -> std::result::Result<Head, String> {
    Head::parse(s).ok_or_else(|| format!("`{s}`: expected tcn or meanpool"))
}

fn parse_split(s: &str) -> std::result::Result<Split, String> {
    Split::parse(s).ok_or_else(|| format!("`{s}`: expected train, validation or test"))
}

fn base_config(preset: &str, config: Option<&Path>) -> Result<ExperimentConfig> {
    let base = ExperimentConfig::preset(preset)?;
    match config {
        Some(path) => ExperimentConfig::read(path, base),
        None => Ok(base),
    }
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = base_config(&self.preset, self.config.as_deref())?;
        if let Some(v) = self.seed {
            c.train.seed = v;
        }
        if let Some(v) = self.epochs {
            c.train.epochs = v;
        }
        if let Some(v) = self.lr {
            c.train.lr = v;
        }
        if let Some(v) = self.batch_size {
            c.train.batch_size = v;
        }
        if let Some(v) = self.class_weights {
            c.class_weights = v;
        }
        if let Some(v) = self.sampler {
            c.train.sampler = v;
        }
        if self.deterministic {
            c.train.deterministic = true;
        }
        if let Some(v) = self.head {
            c.model.head = v;
        }
        c.validate()?;
        Ok(c)
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::SynthGen(a) => {
            let experiment = base_config(&a.preset, a.config.as_deref())?;
            let k = experiment.model.num_classes;
            let mut splits = vec![(Split::Train, a.counts.0)];
            splits.extend(a.val_counts.map(|c| (Split::Validation, c.0)));
            splits.extend(a.test_counts.map(|c| (Split::Test, c.0)));
            for (split, counts) in &splits {
                if counts.len() != k {
                    return Err(Error::Usage(format!("{split} counts list {} classes, the model has {k}", counts.len())));
                }
            }
            let base = SynthConfig::for_model(&experiment.model, Vec::new(), a.seed);
            let manifest = synth_io::generate(&a.out, &base, &splits)?;
            let _ = writeln!(out, "wrote {} clips and {}", manifest.entries.len(), a.out.join("manifest.csv").display());
            Ok(())
        }
        Command::Train(a) => {
            let experiment = a.experiment.resolve()?;
            runner::train(&experiment, &a.manifest, &a.out, a.resume.as_deref(), out).map(|_| ())
        }
        Command::Eval(a) => {
            let dir = match &a.out {
                Some(d) => d.clone(),
                None => a.checkpoint.parent().map(Path::to_path_buf).unwrap_or_default(),
            };
            runner::eval(&a.checkpoint, &a.manifest, a.split, Some(&dir), out).map(|_| ())
        }
        Command::Gradcheck(a) => {
            if a.all == !a.ops.is_empty() {
                return Err(Error::Usage("pass either --all or one or more --op".into()));
            }
            if a.cases == 0 || a.eps.is_nan() || a.eps <= 0.0 {
                return Err(Error::Usage("--cases and --eps must be positive".into()));
            }
            runner::gradcheck(&a.ops, a.cases, a.seed, a.eps, out).map(|_| ())
        }
        Command::Inspect(a) => runner::inspect(&a.path, out),
    }
}

/// Parses `args` (program name first), runs the command with its report on
/// `out` and returns the process exit code. Errors go to stderr.
pub fn run<I, S>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 1,
                _ => 1,
            };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
