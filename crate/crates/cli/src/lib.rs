//! `pathgan` command-line harness: dataset synthesis, training, planning,
//! evaluation studies, rendering and manual rating.
//!
//! Every run writes below `<out>/seed-<seed>/`:
//!
//! ```text
//! data/paths/class<k>_<n>.csv   synthesized path frames
//! data/labels.csv               file,class manifest
//! data/fingerprints.csv         b1..b13,x,y
//! models/gan.ck                 generator + discriminator checkpoint
//! models/gan_log.csv            step,d_loss,g_loss,d_acc
//! models/classifier.ck          path classifier checkpoint
//! models/classifier_log.csv     epoch,loss
//! models/classifier_eval.csv    batch_size,train_samples,test_samples,test_error
//! models/localizer_*.csv        fingerprint split and evaluation
//! plans/class<k>_req<r>.*       planned frame, metadata sidecar, waypoints
//! eval/<study>.csv              evaluation studies
//! ```

pub mod commands;
pub mod config;
pub mod eval;

use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use pathgan::classifier::ClassifierError;
use pathgan::gan::GanError;
use pathgan::gridworld::GridError;
use pathgan::localization::LocalizationError;
use pathgan::neuralcore::CheckpointError;
use pathgan::planner::PlanError;

pub use config::{Precision, RunConfig};

pub const OUT_ENV: &str = "PATHGAN_OUT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Domain(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Domain(_) | CliError::Io { .. } => 3,
        }
    }
}

macro_rules! domain_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Domain(e.to_string())
            }
        }
    )*};
}
domain_error!(
    GridError,
    GanError,
    ClassifierError,
    LocalizationError,
    CheckpointError
);

impl From<PlanError> for CliError {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::InvalidRequest(m) => CliError::Usage(m),
            other => CliError::Domain(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "pathgan",
    version,
    about = "GAN path planning on indoor occupancy grids"
)]
pub struct Cli {
    /// Flat key = value config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run seed (required by every command that trains or samples).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output root; overrides the config file and PATHGAN_OUT.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Override any config key.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic path frames, the labels manifest and fingerprints.
    SynthData,
    /// Train a model on the synthesized data.
    Train {
        #[command(subcommand)]
        target: TrainTarget,
    },
    /// Generate a path for a class or a source/destination pair.
    Plan(PlanArgs),
    /// Run an evaluation study.
    Eval {
        #[arg(value_enum)]
        study: Study,
    },
    /// Print a map, optionally with a frame and class endpoints.
    Render(RenderArgs),
    /// Record a manual 1-5 rating for a frame.
    Rate(RateArgs),
}

#[derive(Debug, Subcommand)]
pub enum TrainTarget {
    Gan {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        epochs: Option<u64>,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        batch_size: Option<u64>,
    },
    Classifier {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        epochs: Option<u64>,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        batch_size: Option<u64>,
    },
    Localizer {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        k: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Study {
    DeviationVsEpochs,
    ErrorVsBatchsize,
    LocalizationCdf,
    Timing,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub class: Option<usize>,
    /// Source cell as `i,j`.
    #[arg(long, value_parser = parse_cell)]
    pub source: Option<(usize, usize)>,
    /// Destination cell as `i,j`.
    #[arg(long, value_parser = parse_cell)]
    pub destination: Option<(usize, usize)>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_attempts: Option<u64>,
    /// Keep only the largest connected public component.
    #[arg(long)]
    pub denoise: bool,
    /// Print the planned frame.
    #[arg(long)]
    pub render: bool,
    /// Seed for the generator noise; defaults to the run seed.
    #[arg(long)]
    pub request_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Path frame CSV.
    #[arg(long)]
    pub frame: Option<PathBuf>,
    /// Mark this class's endpoints.
    #[arg(long)]
    pub class: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[arg(long)]
    pub frame: PathBuf,
    #[arg(long)]
    pub class: Option<usize>,
    /// Score 1-5; read from stdin when omitted.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    pub score: Option<u8>,
    #[arg(long, default_value = "anonymous")]
    pub rater: String,
}

pub fn parse_cell(s: &str) -> Result<(usize, usize), String> {
    let (i, j) = s
        .split_once(',')
        .ok_or_else(|| format!("expected i,j, got {s:?}"))?;
    let p = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| format!("bad coordinate {v:?}"))
    };
    Ok((p(i)?, p(j)?))
}

/// Resolve the configuration: defaults, then the config file, then
/// `PATHGAN_OUT`, then `--set` overrides, then dedicated flags.
pub fn resolve_config(cli: &Cli, env_out: Option<PathBuf>) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = env_out {
        cfg.out = out;
    }
    cfg.apply_overrides(cli.set.iter().map(String::as_str))?;
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    cfg.check_paths()?;
    Ok(cfg)
}

/// Execute a parsed command line. Human-readable output goes to `stdout`.
pub fn run(cli: Cli, stdin: &mut dyn BufRead, stdout: &mut dyn Write) -> Result<(), CliError> {
    let env_out = std::env::var_os(OUT_ENV).map(PathBuf::from);
    let mut cfg = resolve_config(&cli, env_out)?;
    let out = |stdout: &mut dyn Write, text: &str| -> Result<(), CliError> {
        stdout
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io {
                path: PathBuf::from("<stdout>"),
                source,
            })
    };
    match cli.command {
        Command::SynthData => {
            let s = commands::synth_data(&cfg)?;
            out(
                stdout,
                &format!(
                    "wrote {} path frames and {} fingerprints to {}\n",
                    s.path_files,
                    s.fingerprints,
                    s.dir.display()
                ),
            )
        }
        Command::Train { target } => match target {
            TrainTarget::Gan { epochs, batch_size } => {
                if let Some(e) = epochs {
                    cfg.gan_epochs = e as usize;
                }
                if let Some(b) = batch_size {
                    cfg.gan_batch_size = b as usize;
                }
                let path = commands::train_gan(&cfg)?;
                out(stdout, &format!("wrote {}\n", path.display()))
            }
            TrainTarget::Classifier { epochs, batch_size } => {
                if let Some(e) = epochs {
                    cfg.classifier_epochs = e as usize;
                }
                if let Some(b) = batch_size {
                    cfg.classifier_batch_size = b as usize;
                }
                let err = commands::train_classifier(&cfg)?;
                out(stdout, &format!("classifier test error {err:.6}\n"))
            }
            TrainTarget::Localizer { k } => {
                if let Some(k) = k {
                    cfg.k = k as usize;
                }
                let cdf = commands::train_localizer(&cfg)?;
                out(
                    stdout,
                    &format!(
                        "localizer mean error {:.4}, median {:.4}\n",
                        cdf.mean,
                        cdf.median()
                    ),
                )
            }
        },
        Command::Plan(args) => {
            if let Some(m) = args.max_attempts {
                cfg.max_attempts = m as usize;
            }
            let endpoints = match (args.source, args.destination) {
                (Some(s), Some(d)) => Some((s, d)),
                (None, None) => None,
                _ => {
                    return Err(CliError::Usage(
                        "--source and --destination go together".into(),
                    ))
                }
            };
            let outcome =
                commands::plan(&cfg, args.class, endpoints, args.denoise, args.request_seed)?;
            let r = &outcome.result;
            let mut text = format!(
                "class {} after {} attempt(s), confidence {:.4}, deviation {:.6}\nwrote {}\n",
                r.class_id,
                r.attempts_used,
                r.classifier_confidence,
                r.deviation,
                outcome.frame_path.display()
            );
            if args.render {
                text.push_str(&outcome.render);
            }
            out(stdout, &text)
        }
        Command::Eval { study } => {
            let paths = match study {
                Study::DeviationVsEpochs => commands::eval_deviation(&cfg)?,
                Study::ErrorVsBatchsize => commands::eval_batch_size(&cfg)?,
                Study::LocalizationCdf => commands::eval_localization(&cfg)?,
                Study::Timing => commands::eval_timing(&cfg)?,
            };
            let mut text = String::new();
            for p in paths {
                text.push_str(&format!("wrote {}\n", p.display()));
            }
            out(stdout, &text)
        }
        Command::Render(args) => {
            let text = commands::render_frame(&cfg, args.frame.as_deref(), args.class)?;
            out(stdout, &text)
        }
        Command::Rate(args) => {
            let text = commands::render_frame(&cfg, Some(&args.frame), args.class)?;
            out(stdout, &text)?;
            let score = match args.score {
                Some(s) => s,
                None => {
                    out(stdout, "score (1-5): ")?;
                    stdout.flush().ok();
                    let mut line = String::new();
                    stdin.read_line(&mut line).map_err(|source| CliError::Io {
                        path: PathBuf::from("<stdin>"),
                        source,
                    })?;
                    match line.trim().parse::<u8>() {
                        Ok(s @ 1..=5) => s,
                        _ => {
                            return Err(CliError::Usage(format!(
                                "score must be 1-5, got {:?}",
                                line.trim()
                            )))
                        }
                    }
                }
            };
            let path = commands::record_rating(&cfg, &args.frame, args.class, &args.rater, score)?;
            out(
                stdout,
                &format!("recorded score {score} in {}\n", path.display()),
            )
        }
    }
}
