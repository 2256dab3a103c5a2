use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use socdesign::harness::{plot_data, Experiment, RunConfig, RunOptions};
use socdesign::stackelberg::{
    brute_force_stackelberg, load_game, verify_ssmne, EquilibriumTolerance, ProfileFixture,
};
use socdesign::Result;

#[derive(Parser)]
#[command(name = "socdesign", version, about = "Voting, tax design and learning agents in a harvest commons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train followers and the principal for the configured number of rounds.
    Run {
        #[arg(long, required_unless_present = "resume")]
        config: Option<PathBuf>,
        /// Overrides `run.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `run.out_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the grid after every round.
        #[arg(long)]
        render: bool,
        /// Continue from a checkpoint; its embedded config and seed are used.
        #[arg(long, conflicts_with_all = ["config", "seed"])]
        resume: Option<PathBuf>,
        /// Write every move, collection and regrowth as JSON lines.
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Roll out frozen policies from a checkpoint without learning.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 1)]
        episodes: u64,
    },
    /// Check a profile of a finite game for an (epsilon, delta) strong
    /// Stackelberg equilibrium.
    VerifyEquilibrium {
        #[arg(long)]
        game: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        /// Leader action to check; with `--profile`, overrides the file's solution.
        #[arg(long, requires = "profile")]
        leader: Option<usize>,
        #[arg(long, value_delimiter = ',', requires = "leader")]
        profile: Option<Vec<usize>>,
    },
    /// Write long-format plot_data.csv next to a run's rounds.csv.
    PlotData {
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and validate a config file.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            render,
            resume,
            events,
            quiet,
        } => {
            let exp = match (resume, config) {
                (Some(ckpt), _) => Experiment::resume(&ckpt)?,
                (None, Some(path)) => {
                    let cfg = RunConfig::load(&path)?;
                    let seed = seed.unwrap_or(cfg.run.seed);
                    Experiment::new(cfg, seed)?
                }
                (None, None) => unreachable!("clap requires --config without --resume"),
            };
            let out = out.unwrap_or_else(|| exp.config().run.out_dir.clone());
            let opts = RunOptions {
                render,
                events,
                keep_periods: false,
                quiet,
            };
            let outcome = exp.run(&out, &opts)?;
            let s = &outcome.summary;
            println!("rounds: {} (from {})", s.rounds, s.first_round);
            println!("env-steps: {}", s.env_steps);
            println!("env-steps/sec: {:.1}", s.env_steps_per_sec);
            println!("gini: {:.6}", s.gini);
            println!("outputs: {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { checkpoint, episodes } => {
            let exp = Experiment::resume(&checkpoint)?;
            let report = exp.evaluate(episodes)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyEquilibrium {
            game,
            epsilon,
            delta,
            leader,
            profile,
        } => {
            let (g, fixture) = load_game(&game)?;
            let tol = EquilibriumTolerance::new(epsilon, delta)?;
            let fixture = match (leader, profile, fixture) {
                (Some(leader), Some(profile), _) => ProfileFixture { leader, profile },
                (_, _, Some(f)) => f,
                _ => {
                    let s = brute_force_stackelberg(&g, delta)?;
                    println!("solved: leader {} profile {:?} value {}", s.leader, s.profile, s.value);
                    ProfileFixture {
                        leader: s.leader,
                        profile: s.profile,
                    }
                }
            };
            let verdict = verify_ssmne(&g, fixture.leader, &fixture.profile, tol)?;
            println!("SSMNE: {}", verdict.holds);
            if let Some(w) = &verdict.witness {
                println!("witness: {w}");
            }
            Ok(if verdict.holds { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::PlotData { out } => {
            let path = plot_data(&out)?;
            println!("{}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::ValidateConfig { config } => {
            let cfg = RunConfig::load(&config)?;
            println!(
                "ok: {} agents, {}-step rounds, {} rounds",
                cfg.env.n_agents,
                cfg.round_steps(),
                cfg.run.rounds
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
