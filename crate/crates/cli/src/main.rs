use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sleepfc::analysis::analyze_dir;
use sleepfc::classifiers::ClassifierKind;
use sleepfc::config::{ChannelSelection, ExperimentConfig, Method};
use sleepfc::dataset::LabelMode;
use sleepfc::dwt::Boundary;
use sleepfc::experiment::{extract_to_csv, run_experiment, write_synth, ExtractOptions};
use sleepfc::features::FeatureOptions;
use sleepfc::signal::{EventKind, ShortEventPolicy, SynthConfig};
use sleepfc::{Error, ErrorKind, Result};

#[derive(Parser)]
#[command(name = "sleepfc", version, about = "EEG sleep-event detection with GP feature construction")]
struct Cli {
    /// Log more (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Spindle,
    Kcomplex,
}

#[derive(Clone, Copy, ValueEnum)]
enum Labels {
    Both,
    Either,
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    /// Classifier on all raw attributes.
    Full75,
    /// Classifier on principal components.
    Pca,
    /// GP restricted to the central channel.
    Central,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic recording and two expert annotation files.
    Synth {
        /// TOML file with synthetic recording settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        events: Option<usize>,
        #[arg(long, value_enum)]
        kind: Option<Kind>,
    },
    /// Turn an EDF recording and two annotation files into a feature CSV.
    Extract {
        #[arg(long)]
        edf: PathBuf,
        #[arg(long, num_args = 2, value_names = ["EXPERT1", "EXPERT2"], required = true)]
        annotations: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// all, central, fp1 or o1.
        #[arg(long, default_value = "all")]
        channel: String,
        #[arg(long, value_enum, default_value_t = Labels::Both)]
        label_mode: Labels,
        #[arg(long, default_value_t = 0)]
        header_lines: usize,
        /// Drop (with a warning) events shorter than this many seconds.
        #[arg(long)]
        min_event_s: Option<f64>,
        #[arg(long, default_value = "db4")]
        wavelet: String,
        #[arg(long, default_value_t = 2.0)]
        window: f64,
        #[arg(long)]
        symmetric: bool,
    },
    /// Run the repeated train/test experiment.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// knn, gaussian_nb, decision_tree or mlp.
        #[arg(long)]
        classifier: Option<String>,
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
        /// all, central, fp1 or o1.
        #[arg(long)]
        channel: Option<String>,
        #[arg(long)]
        reps: Option<usize>,
        /// Override the number of generations.
        #[arg(long)]
        generations: Option<usize>,
        /// Override the population size.
        #[arg(long)]
        pop_size: Option<usize>,
    },
    /// Summarise the run artifacts in a directory.
    Analyze {
        dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Count each attribute at most once per tree.
        #[arg(long)]
        presence: bool,
    },
}

fn synth(config: Option<&Path>, seed: u64, out: &Path, duration: Option<f64>, events: Option<usize>, kind: Option<Kind>) -> Result<()> {
    let mut cfg = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            SynthConfig::from_toml(&text)?
        }
        None => SynthConfig::default(),
    };
    if let Some(d) = duration {
        cfg.duration_s = d;
    }
    if let Some(n) = events {
        cfg.n_events = n;
    }
    if let Some(k) = kind {
        cfg.kind = match k {
            Kind::Spindle => EventKind::Spindle,
            Kind::Kcomplex => EventKind::Kcomplex,
        };
    }
    for p in write_synth(&cfg, seed, out)? {
        println!("{}", p.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn extract(
    edf: &Path,
    annotations: &[PathBuf],
    out: &Path,
    channel: &str,
    label_mode: Labels,
    header_lines: usize,
    min_event_s: Option<f64>,
    wavelet: &str,
    window: f64,
    symmetric: bool,
) -> Result<()> {
    let mut opts = ExtractOptions {
        features: FeatureOptions {
            window_s: window,
            wavelet: wavelet.to_string(),
            boundary: if symmetric { Boundary::Symmetric } else { Boundary::Periodic },
            ..FeatureOptions::default()
        },
        channel: ChannelSelection::parse(channel)?,
        label_mode: match label_mode {
            Labels::Both => LabelMode::Both,
            Labels::Either => LabelMode::Either,
        },
        ..ExtractOptions::default()
    };
    opts.labels.header_lines = header_lines;
    if min_event_s.is_some() {
        opts.labels.min_event_duration_s = min_event_s;
        opts.labels.short_events = ShortEventPolicy::Warn;
    }
    let pair = [annotations[0].clone(), annotations[1].clone()];
    let fm = extract_to_csv(edf, &pair, out, &opts)?;
    eprintln!("{} windows x {} attributes -> {}", fm.n_rows(), fm.n_cols(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run(
    config: Option<&Path>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    classifier: Option<&str>,
    baseline: Option<Baseline>,
    channel: Option<&str>,
    reps: Option<usize>,
    generations: Option<usize>,
    pop_size: Option<usize>,
) -> Result<()> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(c) = classifier {
        cfg.classifier.kind = ClassifierKind::parse(c)?;
    }
    match baseline {
        Some(Baseline::Full75) => cfg.method = Method::Full75,
        Some(Baseline::Pca) => cfg.method = Method::Pca,
        Some(Baseline::Central) => cfg.channel = ChannelSelection::Central,
        None => {}
    }
    if let Some(c) = channel {
        cfg.channel = ChannelSelection::parse(c)?;
    }
    if let Some(r) = reps {
        cfg.repetitions = r;
    }
    if let Some(g) = generations {
        cfg.gp.generations = g;
    }
    if let Some(p) = pop_size {
        cfg.gp.pop_size = p;
    }
    let out = out.unwrap_or_else(|| cfg.out_dir.clone());
    let report = run_experiment(&cfg, &out)?;
    if let Some(auc) = report.auc {
        println!(
            "{} runs: AUC mean {:.4} sd {:.4} median {:.4}; median features {}",
            report.runs.len(),
            auc.mean,
            auc.sd,
            auc.median,
            report.n_features_median
        );
    }
    println!("results in {}", out.display());
    Ok(())
}

fn analyze(dir: &Path, out: Option<&Path>, presence: bool) -> Result<()> {
    let out = out.unwrap_or(dir);
    let r = analyze_dir(dir, out, presence)?;
    println!(
        "{} artifacts; median features {}; channel usage {:?}",
        r.n_artifacts, r.dimensions.median, r.per_channel
    );
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Runtime => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Synth {
            config,
            seed,
            out,
            duration,
            events,
            kind,
        } => synth(config.as_deref(), *seed, out, *duration, *events, *kind),
        Command::Extract {
            edf,
            annotations,
            out,
            channel,
            label_mode,
            header_lines,
            min_event_s,
            wavelet,
            window,
            symmetric,
        } => extract(
            edf,
            annotations,
            out,
            channel,
            *label_mode,
            *header_lines,
            *min_event_s,
            wavelet,
            *window,
            *symmetric,
        ),
        Command::Run {
            config,
            seed,
            out,
            classifier,
            baseline,
            channel,
            reps,
            generations,
            pop_size,
        } => run(
            config.as_deref(),
            *seed,
            out.clone(),
            classifier.as_deref(),
            *baseline,
            channel.as_deref(),
            *reps,
            *generations,
            *pop_size,
        ),
        Command::Analyze { dir, out, presence } => analyze(dir, out.as_deref(), *presence),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
