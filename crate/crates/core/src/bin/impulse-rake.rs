use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use impulse_rake::channel::taps_csv;
use impulse_rake::sim::{
    ber_sweep_csv, parse_config, random_streams, records_csv, run_ber_sweep,
    run_collision_analysis, run_e2e_trial, ExperimentConfig, Link,
};
use impulse_rake::snn::{decode_weights, SnnNetwork};
use impulse_rake::tx::{gen_th_code, modulate_ook, modulate_ppm, PulseTrain};
use impulse_rake::Error;

#[derive(Parser)]
#[command(
    name = "impulse-rake",
    version,
    about = "Impulse-radio UWB event-frame link simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// BER versus SNR with the analytic overlay, as CSV.
    BerSweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Frame-to-label accuracy of the configured scheme.
    E2e {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Empirical versus analytic pulse-collision rate.
    Collisions {
        #[arg(long)]
        config: PathBuf,
    },
    /// Channel taps of every user (or the pulse train with --pulses).
    ChannelDump {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Dump the transmitted pulses of random bits instead of the taps.
        #[arg(long)]
        pulses: bool,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Validation(_) | Error::Parse { .. } => {
                Failure::Config(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_config(&text)?)
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::BerSweep { config, out } => {
            let cfg = load_config(&config)?;
            let records = run_ber_sweep(&cfg)?;
            emit(
                &ber_sweep_csv(&cfg, &records),
                out.as_deref().or(cfg.output.as_deref()),
            )
        }
        Command::E2e {
            config,
            weights,
            out,
        } => {
            let cfg = load_config(&config)?;
            let blob = std::fs::read(&weights).map_err(|e| {
                Failure::Config(format!("cannot read weights {}: {e}", weights.display()))
            })?;
            let layers = decode_weights(&blob).map_err(|e| Failure::Config(e.to_string()))?;
            let net = SnnNetwork::new(layers, cfg.snn.beta, cfg.snn.threshold)?;
            let records = run_e2e_trial(&cfg, &net)?;
            emit(
                &records_csv(&cfg, "e2e", &records),
                out.as_deref().or(cfg.output.as_deref()),
            )
        }
        Command::Collisions { config } => {
            let cfg = load_config(&config)?;
            let r = run_collision_analysis(&cfg)?;
            emit(
                &records_csv(&cfg, "collisions", &[r]),
                cfg.output.as_deref(),
            )
        }
        Command::ChannelDump {
            config,
            seed,
            pulses,
        } => {
            let cfg = load_config(&config)?;
            let link = Link {
                cfg: cfg.link.clone(),
                channel: cfg.channel_params()?,
                scheme: cfg.scheme,
                level: cfg.level,
                noise: cfg.detector.noise,
            };
            if !pulses {
                return emit(&taps_csv(&link.channels(seed)?), None);
            }
            let streams =
                random_streams(cfg.link.users, cfg.source.bits, cfg.source.activation, seed);
            let mut all = PulseTrain::default();
            for (k, s) in streams.iter().enumerate() {
                let code = gen_th_code(seed, k, &cfg.link, s.len())?;
                let train = if cfg.scheme.is_ppm() {
                    modulate_ppm(s, &code, &cfg.link)?
                } else {
                    modulate_ook(s, &code, &cfg.link)?
                };
                all.pulses.extend(train.pulses);
            }
            emit(&all.to_csv(), None)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
