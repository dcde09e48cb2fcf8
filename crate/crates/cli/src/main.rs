//! `icclass`: feature extraction, classification, training, crowd-label
//! aggregation, evaluation and benchmarking of EEG independent components.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use icclass::crowdlabel::{Dataset, GibbsConfig, MIN_VOTES};
use icclass::io::{self, write_json, ExtractionParams, FeatureBundle, Provenance};
use icclass::metrics::{render_svg, MergeScheme};
use icclass::network::{load_weights, save_weights, NetworkWeights, TrainConfig};
use icclass::pipeline::{self, AggregateOptions, ClassifyOptions, LabelReport};
use icclass::{Error, ErrorKind, Execution, LabelVector};

#[derive(Parser)]
#[command(name = "icclass", version, about = "Classify ICA components of EEG recordings")]
struct Cli {
    /// Run batch work on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute normalised features for every component of a recording bundle.
    Extract {
        /// Recording bundle directory.
        bundle: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Label components from a feature file.
    Classify(ClassifyArgs),
    /// Train network weights on labelled features.
    Train(TrainArgs),
    /// Aggregate crowd votes into labels and labeler confusion estimates.
    Aggregate(AggregateArgs),
    /// Compare predicted labels against reference labels.
    Evaluate {
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Number of classes after merging: 7, 5 or 2.
        #[arg(long, default_value_t = 7)]
        classes: usize,
        /// JSON report; printed to stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// ROC/SOC plot.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Time extraction plus classification per component.
    Bench {
        #[arg(long)]
        weights: PathBuf,
        /// Recording bundle directories.
        #[arg(required = true)]
        bundles: Vec<PathBuf>,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
        #[arg(long)]
        no_tta: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write synthetic inputs for trying out the other commands.
    #[command(subcommand)]
    Synth(Synth),
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    features: PathBuf,
    /// Average over mirrored and negated topographies (default).
    #[arg(long, overrides_with = "no_tta")]
    tta: bool,
    #[arg(long, overrides_with = "tta")]
    no_tta: bool,
    /// Number of classes after merging: 7, 5 or 2.
    #[arg(long, default_value_t = 7)]
    merge: usize,
    /// Threshold JSON for multi-label detection.
    #[arg(long)]
    thresholds: Option<PathBuf>,
    /// JSON report; printed to stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Label CSV; with 7 classes it is a valid label file for `evaluate`.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, requires = "validation_labels", conflicts_with = "holdout")]
    validation_features: Option<PathBuf>,
    #[arg(long, requires = "validation_features")]
    validation_labels: Option<PathBuf>,
    /// Number of labelled examples held out for validation
    /// [default: min(400, n/5)].
    #[arg(long)]
    holdout: Option<usize>,
    /// key = value training configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configuration seed; also seeds the holdout split.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_batches: Option<u64>,
    #[arg(short, long)]
    output: PathBuf,
    /// Training log; defaults to the output path with a .log extension.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetArg {
    Training,
    Test,
}

#[derive(Args)]
struct AggregateArgs {
    #[arg(long)]
    votes: PathBuf,
    /// Selects the class prior and the expert labeler prior.
    #[arg(long, value_enum, default_value = "training")]
    dataset: DatasetArg,
    #[arg(long, default_value_t = 200)]
    burn_in: usize,
    #[arg(long, default_value_t = 800)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent chains, seeded seed, seed+1, ... and reported separately.
    #[arg(long, default_value_t = 1)]
    chains: usize,
    #[arg(long, default_value_t = MIN_VOTES)]
    min_votes: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Synth {
    /// Recording bundle with ICA components.
    Recording {
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 32)]
        channels: usize,
        #[arg(long, default_value_t = 20)]
        components: usize,
        #[arg(long, default_value_t = 60.0)]
        seconds: f64,
        #[arg(long, default_value_t = 128.0)]
        rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Separable three-category feature file with labels.
    Toy {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 250)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Crowd votes with planted true categories.
    Votes {
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 60)]
        components: usize,
        #[arg(long, default_value_t = 5)]
        labelers: usize,
        #[arg(long, default_value_t = 0.8)]
        accuracy: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Randomly initialised network weights.
    Weights {
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Usage(String),
    Core(Error),
    File(PathBuf, Error),
}

/// Names the input file in errors that do not already carry it.
fn on<T>(path: &Path, r: icclass::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| match e {
        Error::Csv { .. } => Failure::Core(e),
        e => Failure::File(path.to_path_buf(), e),
    })
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Core(e) => write!(f, "{e}"),
            Failure::File(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(match &f {
                Failure::Usage(_) => 1,
                Failure::Core(e) | Failure::File(_, e) => match e.kind() {
                    ErrorKind::Data => 2,
                    ErrorKind::Numeric => 3,
                },
            })
        }
    }
}

fn run(cli: Cli) -> CliResult {
    let execution = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    match cli.command {
        Command::Extract { bundle, output } => extract(&bundle, &output, execution),
        Command::Classify(args) => classify(args, execution),
        Command::Train(args) => train(args, execution),
        Command::Aggregate(args) => aggregate(args, execution),
        Command::Evaluate {
            targets,
            predictions,
            classes,
            output,
            svg,
        } => {
            let scheme = merge_scheme(classes)?;
            let targets = on(&targets, io::read_labels(&targets))?;
            let predictions = on(&predictions, io::read_labels(&predictions))?;
            let report = pipeline::evaluate_labels(&targets, &predictions, scheme)?;
            if let Some(svg) = svg {
                let text = render_svg(&report);
                io::atomic_write(&svg, |w| Ok(w.write_all(text.as_bytes())?))?;
            }
            emit(output.as_deref(), &report)
        }
        Command::Bench {
            weights,
            bundles,
            repetitions,
            no_tta,
            output,
        } => {
            let weights = on(&weights, load_weights(&weights))?;
            let recordings = bundles
                .iter()
                .map(|b| on(b, io::read_recording_bundle(b)))
                .collect::<Result<Vec<_>, _>>()?;
            let options = ClassifyOptions {
                tta: !no_tta,
                execution,
                ..Default::default()
            };
            let report = pipeline::bench(&recordings, &weights, repetitions, &options)?;
            eprintln!(
                "median {:.1} ms per component (reference {:.0} ms), range {:.1} to {:.1} ms",
                report.per_component.median * 1e3,
                report.reference_median_seconds * 1e3,
                report.per_component.min * 1e3,
                report.per_component.max * 1e3
            );
            emit(output.as_deref(), &report)
        }
        Command::Synth(s) => synth(s),
    }
}

fn merge_scheme(k: usize) -> Result<MergeScheme, Failure> {
    MergeScheme::from_count(k).ok_or_else(|| Failure::Usage(format!("class count must be 7, 5 or 2, got {k}")))
}

/// Writes pretty JSON to `path`, or to stdout.
fn emit<T: serde::Serialize>(path: Option<&Path>, value: &T) -> CliResult {
    match path {
        Some(p) => write_json(p, value)?,
        None => {
            let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{text}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                r => r?,
            }
        }
    }
    Ok(())
}

fn extract(bundle: &Path, output: &Path, execution: Execution) -> CliResult {
    let recording = on(bundle, io::read_recording_bundle(bundle))?;
    let out = pipeline::extract(&recording, execution)?;
    io::write_feature_file(output, &out.bundle)?;
    eprintln!("{} components extracted to {}", out.bundle.components.len(), output.display());
    let mut failures = out.failures.into_iter();
    match failures.next() {
        None => Ok(()),
        Some(first) => {
            for e in failures {
                eprintln!("error: {}", Failure::Core(e));
            }
            Err(first.into())
        }
    }
}

fn classify(args: ClassifyArgs, execution: Execution) -> CliResult {
    let options = ClassifyOptions {
        tta: !args.no_tta,
        merge: merge_scheme(args.merge)?,
        thresholds: args.thresholds.as_deref().map(|p| on(p, io::read_thresholds(p))).transpose()?,
        execution,
    };
    let weights = on(&args.weights, load_weights(&args.weights))?;
    let features = on(&args.features, io::read_feature_file(&args.features))?;
    let report = pipeline::classify(&weights, &features, &options)?;
    if let Some(csv) = &args.csv {
        write_report_csv(csv, &report)?;
    }
    emit(args.output.as_deref(), &report)
}

fn write_report_csv(path: &Path, report: &LabelReport) -> CliResult {
    let mut header = vec!["component_id".to_string()];
    header.extend(report.classes.iter().map(|c| c.to_lowercase().replace(' ', "_")));
    header.extend(["argmax".to_string(), "confidence".to_string()]);
    if report.thresholds.is_some() {
        header.push("detections".into());
    }
    let rows: Vec<Vec<String>> = report
        .components
        .iter()
        .map(|c| {
            let mut row = vec![c.component_id.clone()];
            row.extend(c.probabilities.iter().map(|p| p.to_string()));
            row.push(c.argmax.clone());
            row.push(c.confidence.to_string());
            if let Some(d) = &c.detections {
                row.push(d.join(";"));
            }
            row
        })
        .collect();
    io::write_table(path, &header, &rows)?;
    Ok(())
}

fn train(args: TrainArgs, execution: Execution) -> CliResult {
    let mut config = match &args.config {
        Some(p) => on(p, io::read_train_config(p))?,
        None => TrainConfig::default(),
    };
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if args.max_batches.is_some() {
        config.max_batches = args.max_batches;
    }
    if execution == Execution::Sequential {
        config.execution = Execution::Sequential;
    }
    config.validate()?;

    let labels = on(&args.labels, io::read_labels(&args.labels))?;
    let features = on(&args.features, io::read_feature_file(&args.features))?;
    let examples = pipeline::join_labels(&features, &labels)?;
    let (train_set, validation_set) = match (&args.validation_features, &args.validation_labels) {
        (Some(vf), Some(vl)) => {
            let vlabels = on(vl, io::read_labels(vl))?;
            let vfeatures = on(vf, io::read_feature_file(vf))?;
            (examples, pipeline::join_labels(&vfeatures, &vlabels)?)
        }
        _ => {
            let count = args.holdout.unwrap_or_else(|| pipeline::default_holdout(examples.len()));
            pipeline::split_holdout(&examples, count, config.seed)?
        }
    };
    eprintln!(
        "training on {} examples, validating on {}",
        train_set.len(),
        validation_set.len()
    );
    let outcome = pipeline::train(&train_set, &validation_set, &config, |c| {
        log::info!("{}", c.record);
    })?;
    save_weights(&outcome.weights, &args.output)?;
    let log_path = args.log.clone().unwrap_or_else(|| args.output.with_extension("log"));
    io::atomic_write(&log_path, |w| {
        writeln!(w, "batch train_loss validation_loss")?;
        for r in &outcome.log {
            writeln!(w, "{r}")?;
        }
        Ok(())
    })?;
    println!(
        "stop: {:?} after {} batches; best validation loss {:.9} at batch {}",
        outcome.stop_reason, outcome.batches_run, outcome.best_validation_loss + 0.0, outcome.best_batch
    );
    Ok(())
}

fn aggregate(args: AggregateArgs, execution: Execution) -> CliResult {
    let options = AggregateOptions {
        dataset: match args.dataset {
            DatasetArg::Training => Dataset::Training,
            DatasetArg::Test => Dataset::Test,
        },
        gibbs: GibbsConfig {
            burn_in: args.burn_in,
            sampling_epochs: args.epochs,
            seed: args.seed,
        },
        chains: args.chains,
        min_votes: args.min_votes,
        execution,
    };
    let submissions = on(&args.votes, io::read_votes(&args.votes))?;
    let results = pipeline::aggregate(&submissions, &options)?;
    if results.len() == 1 {
        emit(args.output.as_deref(), &results[0])
    } else {
        emit(args.output.as_deref(), &results)
    }
}

fn synth(s: Synth) -> CliResult {
    match s {
        Synth::Recording {
            output,
            channels,
            components,
            seconds,
            rate,
            seed,
        } => {
            let id = output
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "synthetic".into());
            let bundle = pipeline::synthetic_bundle(&id, channels, components, seconds, rate, seed)?;
            fs::create_dir_all(&output)?;
            io::write_recording_bundle(&output, &bundle)?;
        }
        Synth::Toy {
            features,
            labels,
            n,
            seed,
        } => {
            let toy = icclass::synthetic::separable_toy(n, seed);
            let ids: Vec<String> = (1..=n).map(|i| format!("ic{i}")).collect();
            let bundle = FeatureBundle {
                provenance: Provenance {
                    recording_id: format!("toy-{seed}"),
                    sample_rate: None,
                    extraction: ExtractionParams::default(),
                },
                components: ids.iter().cloned().zip(toy.iter().map(|(f, _)| f.clone())).collect(),
            };
            io::write_feature_file(&features, &bundle)?;
            let rows: Vec<(String, LabelVector)> = ids.into_iter().zip(toy.iter().map(|(_, l)| *l)).collect();
            io::write_labels(&labels, &rows)?;
        }
        Synth::Votes {
            output,
            components,
            labelers,
            accuracy,
            seed,
        } => {
            if !(0.0..=1.0).contains(&accuracy) {
                return Err(Failure::Usage(format!("accuracy must be within [0, 1], got {accuracy}")));
            }
            let (subs, _) = icclass::synthetic::planted_submissions(components, labelers, accuracy, seed);
            io::write_votes(&output, &subs)?;
        }
        Synth::Weights { output, seed } => {
            let w = NetworkWeights::<f32>::init(&mut ChaCha8Rng::seed_from_u64(seed));
            save_weights(&w, &output)?;
        }
    }
    Ok(())
}
