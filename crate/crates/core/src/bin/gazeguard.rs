use std::io::{stdout, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gazeguard::attacks::{run_threat_scenario_with, Scenario, ThreatOptions, ThreatRow};
use gazeguard::identify::{evaluate_identification, evaluate_streams, EmbedderSpec};
use gazeguard::io::{
    read_stream_csv, write_results, write_results_csv, write_stream_csv, ColumnMapping, ResultsCsv,
};
use gazeguard::mechanisms::{bench_mechanism, privatize_all, MechanismKind, Preset};
use gazeguard::sweep::{default_strengths, run_sweep, SweepSpec};
use gazeguard::synth::{generate_dataset, SyntheticDatasetSpec};
use gazeguard::utility::{aoi_retention_pooled, validation_error, Scene, ValidationSchedule};
use gazeguard::{Error, GazeStream, MechanismConfig, Result};

#[derive(Parser)]
#[command(name = "gazeguard", version, about = "Privacy mechanisms and re-identification tools for gaze streams")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct MechanismArgs {
    /// none, gaussian, temporal, spatial or smoothing.
    #[arg(long, default_value = "none")]
    mechanism: MechanismKind,
    /// Gaussian noise deviation in degrees.
    #[arg(long)]
    sigma: Option<f64>,
    /// Temporal downsampling factor.
    #[arg(long)]
    k: Option<usize>,
    /// Spatial grid parameter.
    #[arg(long)]
    l: Option<usize>,
    /// Smoothing window length.
    #[arg(long)]
    b: Option<usize>,
    /// Fill the smoothing window with the first sample instead of zeros.
    #[arg(long)]
    warm_start: bool,
    /// Use the low or high preset strength for the mechanism.
    #[arg(long)]
    preset: Option<Preset>,
}

impl MechanismArgs {
    fn config(&self) -> Result<MechanismConfig> {
        if let Some(p) = self.preset {
            return MechanismConfig::preset(self.mechanism, p);
        }
        let missing = |flag: &str| {
            Error::InvalidParameter(format!("{} needs --{flag} or --preset", self.mechanism))
        };
        let config = match self.mechanism {
            MechanismKind::None => MechanismConfig::None,
            MechanismKind::Gaussian => MechanismConfig::Gaussian {
                sigma_deg: self.sigma.ok_or_else(|| missing("sigma"))?,
            },
            MechanismKind::Temporal => MechanismConfig::Temporal {
                k: self.k.ok_or_else(|| missing("k"))?,
            },
            MechanismKind::Spatial => MechanismConfig::Spatial {
                l: self.l.ok_or_else(|| missing("l"))?,
            },
            MechanismKind::Smoothing => MechanismConfig::Smoothing {
                b: self.b.ok_or_else(|| missing("b"))?,
                warm_start: self.warm_start,
            },
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct InputArgs {
    /// Gaze CSV.
    #[arg(long)]
    input: PathBuf,
    /// JSON column mapping for non-canonical CSV headers.
    #[arg(long)]
    mapping: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Apply a privacy mechanism to every stream of a gaze CSV.
    Privatize {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        mechanism: MechanismArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Rank-1 identification of query trials against reference trials.
    Identify {
        /// Not needed with an imported embedder.
        #[arg(long)]
        query: Option<PathBuf>,
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        mapping: Option<PathBuf>,
        /// `stat` or `imported:<embeddings.csv>`.
        #[arg(long, default_value = "stat")]
        embedder: EmbedderSpec,
        /// Privatize the queries before matching.
        #[command(flatten)]
        mechanism: MechanismArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-pair results CSV; stdout shows the mean accuracy only.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Identification accuracy (and AOI F1) across mechanism strengths.
    Sweep {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        mechanism: MechanismKind,
        /// Comma-separated, strictly increasing. Defaults to the standard list.
        #[arg(long, value_delimiter = ',')]
        strengths: Option<Vec<f64>>,
        /// AOI scene JSON; enables the aoi_f1 column.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, default_value = "stat")]
        embedder: EmbedderSpec,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// AOI label retention of privatized streams.
    Aoi {
        #[arg(long)]
        original: PathBuf,
        #[arg(long)]
        privatized: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Accuracy before and after a re-identification attack.
    Attack {
        #[arg(long)]
        scenario: Scenario,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        mechanism: MechanismArgs,
        #[arg(long, default_value = "stat")]
        embedder: EmbedderSpec,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Training epochs for the exemplars regressor.
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic gaze dataset.
    Synth {
        #[arg(long, default_value_t = 10)]
        users: usize,
        #[arg(long, default_value_t = 4)]
        trials: usize,
        /// Trial length in seconds.
        #[arg(long, default_value_t = 90.0)]
        duration: f64,
        #[arg(long, default_value_t = 72.0)]
        rate: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Angular error of a target-grid validation recording.
    Validate {
        #[arg(long)]
        recording: PathBuf,
        /// Schedule JSON; defaults to the 3×3 grid in index order.
        #[arg(long)]
        schedule: Option<PathBuf>,
        #[arg(long)]
        mapping: Option<PathBuf>,
    },
    /// Single-threaded mechanism throughput.
    Bench {
        /// A mechanism kind or `all`.
        #[arg(long, default_value = "all")]
        mechanism: String,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
    },
}

fn mapping(path: Option<&Path>) -> Result<ColumnMapping> {
    path.map_or_else(|| Ok(ColumnMapping::default()), ColumnMapping::load)
}

fn load(path: &Path, mapping_path: Option<&Path>) -> Result<Vec<GazeStream>> {
    let streams = read_stream_csv(path, &mapping(mapping_path)?)?;
    if streams.is_empty() {
        return Err(Error::InsufficientData(format!("{} holds no gaze rows", path.display())));
    }
    Ok(streams)
}

fn emit<R: ResultsCsv + ?Sized>(report: &R, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_results_csv(report, path),
        None => write_results(stdout().lock(), report),
    }
}

fn bench_configs(which: &str) -> Result<Vec<MechanismConfig>> {
    if which == "all" {
        return Ok(vec![
            MechanismConfig::Gaussian { sigma_deg: 3.0 },
            MechanismConfig::Temporal { k: 30 },
            MechanismConfig::Spatial { l: 144 },
            MechanismConfig::Smoothing { b: 150, warm_start: false },
            MechanismConfig::Smoothing { b: 300, warm_start: false },
        ]);
    }
    let kind: MechanismKind = which.parse()?;
    Ok(match kind {
        MechanismKind::None => vec![MechanismConfig::None],
        MechanismKind::Temporal => vec![MechanismConfig::Temporal { k: 30 }],
        _ => vec![MechanismConfig::preset(kind, Preset::High)?],
    })
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("--jobs: {e}")))?;
    }
    let mut out = stdout().lock();
    let print = |out: &mut std::io::StdoutLock, line: String| {
        writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
    };
    match cli.command {
        Command::Privatize {
            input,
            mechanism,
            seed,
            output,
        } => {
            let streams = load(&input.input, input.mapping.as_deref())?;
            let config = mechanism.config()?;
            write_stream_csv(&privatize_all(&streams, &config, seed)?, &output)?;
            log::info!("{} streams privatized with {config}", streams.len());
        }
        Command::Identify {
            query,
            reference,
            mapping,
            embedder,
            mechanism,
            seed,
            out: report_path,
        } => {
            let config = mechanism.config()?;
            let report = match (&embedder, query, reference) {
                (EmbedderSpec::Imported { .. }, _, _) => {
                    evaluate_identification(&[], &embedder, &config, seed)?
                }
                (_, Some(q), Some(r)) => {
                    let queries = load(&q, mapping.as_deref())?;
                    let references = load(&r, mapping.as_deref())?;
                    let queries = privatize_all(&queries, &config, seed)?;
                    evaluate_streams(&queries, &references, &embedder, None)?
                }
                _ => {
                    return Err(Error::InvalidParameter(
                        "--query and --reference are required".into(),
                    ))
                }
            };
            if let Some(path) = report_path {
                write_results_csv(&report, path)?;
            }
            print(
                &mut out,
                format!(
                    "mean accuracy {:.6} over {} trial pairs",
                    report.mean_accuracy,
                    report.pair_count()
                ),
            )?;
        }
        Command::Sweep {
            input,
            mechanism,
            strengths,
            scene,
            embedder,
            seed,
            out: path,
        } => {
            let strengths = match strengths {
                Some(s) => s,
                None => default_strengths(mechanism)?,
            };
            let mut spec = SweepSpec::new(mechanism, strengths)?;
            if let Some(scene) = scene {
                spec = spec.with_scene(Scene::load(scene)?);
            }
            let streams = load(&input.input, input.mapping.as_deref())?;
            let rows = run_sweep(&streams, &spec, &embedder, seed)?;
            drop(out);
            emit(rows.as_slice(), path.as_deref())?;
        }
        Command::Aoi {
            original,
            privatized,
            scene,
            mapping,
            out: path,
        } => {
            let original = load(&original, mapping.as_deref())?;
            let privatized = load(&privatized, mapping.as_deref())?;
            if original.len() != privatized.len() {
                return Err(Error::StreamMismatch(format!(
                    "{} original streams, {} privatized",
                    original.len(),
                    privatized.len()
                )));
            }
            let pairs: Vec<_> = original.iter().zip(&privatized).collect();
            if let Some((o, p)) = pairs
                .iter()
                .find(|(o, p)| o.user_id != p.user_id || o.trial_id != p.trial_id)
            {
                return Err(Error::StreamMismatch(format!(
                    "user {} trial {} paired with user {} trial {}",
                    o.user_id, o.trial_id, p.user_id, p.trial_id
                )));
            }
            let report = aoi_retention_pooled(&pairs, &Scene::load(scene)?)?;
            drop(out);
            emit(&report, path.as_deref())?;
        }
        Command::Attack {
            scenario,
            input,
            mechanism,
            embedder,
            seed,
            epochs,
            out: path,
        } => {
            let streams = load(&input.input, input.mapping.as_deref())?;
            let config = mechanism.config()?;
            let mut options = ThreatOptions::default();
            if let Some(e) = epochs {
                options.regressor.epochs = e;
            }
            let report = run_threat_scenario_with(scenario, &streams, &config, &embedder, seed, &options)?;
            print(
                &mut out,
                format!(
                    "{scenario} {}: before {:.6} after {:.6}",
                    report.mechanism, report.accuracy_before, report.accuracy_after
                ),
            )?;
            if let Some(path) = path {
                write_results_csv([ThreatRow::from_reports(&[report])?].as_slice(), path)?;
            }
        }
        Command::Synth {
            users,
            trials,
            duration,
            rate,
            seed,
            out: path,
        } => {
            let spec = SyntheticDatasetSpec {
                n_users: users,
                trials_per_user: trials,
                trial_duration_s: duration,
                rate_hz: rate,
                master_seed: seed,
            };
            write_stream_csv(&generate_dataset(&spec)?, path)?;
        }
        Command::Validate {
            recording,
            schedule,
            mapping,
        } => {
            let schedule = match schedule {
                Some(p) => ValidationSchedule::load(p)?,
                None => ValidationSchedule::default(),
            };
            for s in load(&recording, mapping.as_deref())? {
                let r = validation_error(&s, &schedule)?;
                print(
                    &mut out,
                    format!(
                        "user {} trial {}: mean {:.4} deg, std {:.4} deg, {} samples",
                        s.user_id, s.trial_id, r.mean_deg, r.std_deg, r.samples
                    ),
                )?;
            }
        }
        Command::Bench { mechanism, samples } => {
            for config in bench_configs(&mechanism)? {
                let r = bench_mechanism(&config, samples)?;
                print(
                    &mut out,
                    format!(
                        "{:<22} {:>10.1} ns/sample {:>14.0} samples/s",
                        r.mechanism, r.ns_per_sample, r.samples_per_second
                    ),
                )?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            ExitCode::FAILURE
        }
    }
}
