use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vecsim_core::learn::{AgentArrangement, Maddpg};

use vecsim::{checkpoint, compare, config_io, fixtures, runner};

#[derive(Parser)]
#[command(name = "vecsim", version, about = "Vehicular edge computing offloading experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a policy over a seed range, training first if needed.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// AL, AV, RD, EDG, DDPG or MADDPG.
        #[arg(long)]
        policy: String,
        /// Single seed or inclusive range a..b.
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        out: PathBuf,
        /// Pre-trained model; skips training for learned policies.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Evaluation episodes per seed.
        #[arg(long, default_value_t = 10)]
        episodes: u64,
    },
    /// Train a learned policy on one seed and save a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "MADDPG")]
        policy: String,
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the configured training episode count.
        #[arg(long)]
        episodes: Option<u64>,
    },
    /// Evaluate a checkpoint over a seed range.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: u64,
    },
    /// Align metrics files and report paired seed differences.
    Compare {
        files: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate exhaustively solved micro-instance fixtures.
    Fixtures {
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_CHECKPOINT: u8 = 3;
const EXIT_SCHEMA: u8 = 4;

fn fail(code: u8, err: anyhow::Error) -> ExitCode {
    eprintln!("error: {err:#}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run { config, policy, seeds, out, checkpoint: ck, episodes } => {
            let cfg = match config_io::load_config(&config) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            let (policy, seeds) =
                match runner::parse_policy(&policy).and_then(|p| Ok((p, runner::parse_seeds(&seeds)?))) {
                    Ok(v) => v,
                    Err(e) => return fail(EXIT_CONFIG, e),
                };
            let pretrained = match ck {
                Some(path) => match checkpoint::load(&path) {
                    Ok(pair) => Some(pair),
                    Err(e) => return fail(EXIT_CHECKPOINT, e),
                },
                None => None,
            };
            match runner::run_experiment(&cfg, policy, &seeds, &out, pretrained.as_ref(), episodes)
            {
                Ok(path) => {
                    println!("wrote {}", path.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(1, e),
            }
        }
        Cmd::Train { config, policy, seeds, out, episodes } => {
            let mut cfg = match config_io::load_config(&config) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            if let Some(episodes) = episodes {
                cfg.learn.episodes = episodes;
            }
            let (policy, seeds) =
                match runner::parse_policy(&policy).and_then(|p| Ok((p, runner::parse_seeds(&seeds)?))) {
                    Ok(v) => v,
                    Err(e) => return fail(EXIT_CONFIG, e),
                };
            if !policy.is_learned() {
                return fail(EXIT_CONFIG, anyhow::anyhow!("train expects DDPG or MADDPG"));
            }
            match runner::run_experiment(&cfg, policy, &seeds, &out, None, 1) {
                Ok(_) => {
                    println!("wrote checkpoints under {}", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(1, e),
            }
        }
        Cmd::Eval { config, checkpoint: ck, seeds, out, episodes } => {
            let cfg = match config_io::load_config(&config) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            let seeds = match runner::parse_seeds(&seeds) {
                Ok(s) => s,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            let pretrained: (Maddpg, AgentArrangement) = match checkpoint::load(&ck) {
                Ok(pair) => pair,
                Err(e) => return fail(EXIT_CHECKPOINT, e),
            };
            let kind = match pretrained.1 {
                AgentArrangement::SingleAgent => vecsim_core::baselines::PolicyKind::Ddpg,
                AgentArrangement::PerVehicle => vecsim_core::baselines::PolicyKind::Maddpg,
            };
            match runner::run_experiment(&cfg, kind, &seeds, &out, Some(&pretrained), episodes) {
                Ok(path) => {
                    println!("wrote {}", path.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(1, e),
            }
        }
        Cmd::Compare { files, out } => match compare::compare(&files, out.as_deref()) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(EXIT_SCHEMA, e),
        },
        Cmd::Fixtures { count, seed, out } => match fixtures::make_fixtures(count, seed, &out) {
            Ok(paths) => {
                println!("wrote {} fixtures under {}", paths.len(), out.display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(1, e),
        },
    }
}
