use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use socnav::config::load_config;
use socnav::heatmap::{compute, to_pgm, to_text};
use socnav::runner::{
    bench, load_log, make_env, replay_record, run_episode, save_log, BatchOptions, Policy,
    PolicySpec,
};
use socnav::scorer::{load_scorer, read_params, serve_scorer};
use socnav::serve::serve;
use socnav::{run_batch, RunError};
use socnav_core::config::RewardKind;
use socnav_core::metrics::{heatmap_with_scorer, HeatmapField};
use socnav_core::reward::{RewardParams, SurrogateParams};
use socnav_core::scenario::generate;
use socnav_core::ScenarioConfig;

#[derive(Parser)]
#[command(
    name = "socnav",
    version,
    about = "Headless social-navigation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RewardArg {
    Dsrnn,
    Sngnn,
}

#[derive(Args)]
struct ConfigArgs {
    /// Scenario config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's reward function.
    #[arg(long, value_enum)]
    reward: Option<RewardArg>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ScenarioConfig, RunError> {
        let mut cfg = load_config(&self.config)?;
        if let Some(r) = self.reward {
            cfg.reward.function = match r {
                RewardArg::Dsrnn => RewardKind::Dsrnn,
                RewardArg::Sngnn => RewardKind::Sngnn,
            };
        }
        Ok(cfg)
    }

    fn base_dir(&self) -> Option<PathBuf> {
        self.config.parent().map(Path::to_path_buf)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of episodes and print the aggregate metrics.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// random, straight-to-goal or replay:<log>
        #[arg(long, default_value = "random")]
        policy: PolicySpec,
        /// Directory for per-episode logs and aggregate.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure random-policy stepping throughput.
    Bench {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 100_000)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Export a discomfort heatmap of a generated scene.
    Heatmap {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Grid size N.
        #[arg(long = "heatmap", default_value_t = 100, value_parser = clap::value_parser!(u32).range(2..))]
        n: u32,
        /// Output prefix; `.txt` and `.pgm` are appended.
        #[arg(long, default_value = "heatmap")]
        out: PathBuf,
    },
    /// Record one episode to a log.
    Record {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "random")]
        policy: PolicySpec,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-simulate a log and check every step.
    Replay { log: PathBuf },
    /// Host the teleop websocket endpoint.
    Serve {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 8765)]
        serve_port: u16,
        /// Directory for recordings made during sessions.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Answer scorer requests on stdin/stdout with the analytic scorer.
    #[command(hide = true)]
    Scorer {
        #[arg(long)]
        params: Option<PathBuf>,
    },
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("reports serialize")
    );
}

fn execute(command: Command) -> Result<(), RunError> {
    match command {
        Command::Run {
            config,
            episodes,
            seed,
            policy,
            out,
        } => {
            let cfg = config.load()?;
            let opts = BatchOptions {
                episodes,
                seed,
                policy,
                out,
                base_dir: config.base_dir(),
            };
            let (report, _) = run_batch(&cfg, &opts)?;
            print_json(&report.aggregate);
        }
        Command::Bench {
            config,
            steps,
            seed,
        } => {
            print_json(&bench(&config.load()?, steps, seed)?);
        }
        Command::Heatmap {
            config,
            seed,
            n,
            out,
        } => {
            let cfg = config.load()?.with_seed(seed);
            let world = generate(&cfg)?;
            let params = RewardParams::from(&cfg);
            let n = n as usize;
            let scorer = cfg.reward.scorer.as_str();
            let map = match cfg.reward.function {
                RewardKind::Sngnn if scorer == "surrogate" => compute(
                    &world,
                    &HeatmapField::Surrogate(SurrogateParams::default()),
                    &params,
                    n,
                ),
                RewardKind::Sngnn if scorer.starts_with("file:") => {
                    let base = config.base_dir();
                    let path = base.map_or(PathBuf::from(&scorer[5..]), |b| b.join(&scorer[5..]));
                    compute(
                        &world,
                        &HeatmapField::Surrogate(read_params(&path)?),
                        &params,
                        n,
                    )
                }
                RewardKind::Sngnn => {
                    let mut s = load_scorer(scorer, config.base_dir().as_deref())?;
                    heatmap_with_scorer(&world, s.as_mut(), n)?
                }
                _ => compute(&world, &HeatmapField::Dsrnn, &params, n),
            };
            let txt = out.with_extension("txt");
            let pgm = out.with_extension("pgm");
            std::fs::write(&txt, to_text(&map))
                .map_err(RunError::io(format!("cannot write {}", txt.display())))?;
            std::fs::write(&pgm, to_pgm(&map))
                .map_err(RunError::io(format!("cannot write {}", pgm.display())))?;
            println!("{}\n{}", txt.display(), pgm.display());
        }
        Command::Record {
            config,
            seed,
            policy,
            out,
        } => {
            let cfg = config.load()?;
            let replay = match &policy {
                PolicySpec::Replay(p) => socnav::runner::logged_actions(&load_log(p)?.0),
                _ => Vec::new(),
            };
            let mut env = make_env(cfg, config.base_dir().as_deref())?;
            let mut pol = Policy::new(&policy, seed, &replay);
            let (record, summary) = run_episode(&mut env, &mut pol, seed)?;
            save_log(&out, &record, Some(&summary))?;
            print_json(&summary);
        }
        Command::Replay { log } => {
            let (record, _) = load_log(&log)?;
            let report = replay_record(&record, log.parent())?;
            print_json(&report);
            if let Some(step) = report.first_divergence {
                return Err(RunError::Diverged {
                    step,
                    checked: record.steps.len(),
                });
            }
        }
        Command::Serve {
            config,
            serve_port,
            out,
        } => {
            let cfg = config.load()?;
            let listener = TcpListener::bind(("127.0.0.1", serve_port))
                .map_err(RunError::io(format!("cannot listen on port {serve_port}")))?;
            eprintln!("listening on ws://127.0.0.1:{serve_port}");
            serve(listener, cfg, config.base_dir(), out)?;
        }
        Command::Scorer { params } => {
            let params = match params {
                Some(p) => read_params(&p)?,
                None => SurrogateParams::default(),
            };
            let stdin = std::io::stdin().lock();
            serve_scorer(params, stdin, std::io::stdout().lock())
                .map_err(RunError::io("scorer"))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = std::io::stdout().flush();
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
