use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use evorl::agent::{load_agent, save_agent, write_json, Checkpoint, LearnerState};
use evorl::compare::{compare_summaries, mean_curve, render_svg, render_table, Metric};
use evorl::config::{Algo, RunConfig};
use evorl::error::{io_err, LabError, Result};
use evorl::exec::Pool;
use evorl::experiment::{run_experiment, ExperimentSpec, ExperimentSummary};
use evorl::posteval::{default_grid, post_evaluate, posteval_seeds};
use evorl::train::{continue_es, CurveWriter};
use evorl_core::env::{EnvId, EnvSpec};
use evorl_core::stats::Heatmap;

#[derive(Parser)]
#[command(
    name = "evorl",
    version,
    about = "Train, post-evaluate and compare ES and RL agents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Train replicated runs and post-evaluate their best agents.
    Train {
        #[arg(long, value_parser = parse_algo)]
        algo: Option<Algo>,
        #[arg(long, value_parser = parse_env)]
        env: Option<EnvId>,
        #[arg(long, value_enum, default_value = "on")]
        incentive: Switch,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Environment steps per replication.
        #[arg(long)]
        budget: u64,
        /// `key = value` overrides on top of the per-environment defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (0 = all cores); overrides the config file.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        replications: Option<usize>,
        /// Sample actions during post-evaluation instead of acting greedily.
        #[arg(long)]
        posteval_stochastic: bool,
        /// Continue an ES `state.json` up to `--budget` instead of starting fresh.
        #[arg(long, conflicts_with_all = ["algo", "env", "config", "replications"])]
        resume: Option<PathBuf>,
    },
    /// Post-evaluate a saved agent on fresh episodes.
    Posteval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 5)]
        episodes: usize,
        #[arg(long)]
        stochastic: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Evaluate on another registered environment (must fit the agent).
        #[arg(long, value_parser = parse_env)]
        env: Option<EnvId>,
        /// Write the full report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two experiment directories on one metric.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, value_parser = parse_metric)]
        metric: Metric,
        /// Directory for comparison.json and comparison.svg.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Positional occupancy of a saved agent.
    Heatmap {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 5)]
        episodes: usize,
        #[arg(long)]
        stochastic: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_algo(s: &str) -> Result<Algo, String> {
    s.parse().map_err(|e: LabError| e.to_string())
}

fn parse_env(s: &str) -> Result<EnvId, String> {
    s.parse().map_err(|e: evorl_core::Error| e.to_string())
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse().map_err(|e: LabError| e.to_string())
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train {
            algo,
            env,
            incentive,
            seed,
            budget,
            config,
            out,
            workers,
            replications,
            posteval_stochastic,
            resume,
        } => {
            if let Some(state) = resume {
                return resume_es(&state, budget, &out, workers.unwrap_or(1));
            }
            let (Some(algo), Some(env)) = (algo, env) else {
                return Err(LabError::Invalid(
                    "train needs --algo and --env (or --resume)".into(),
                ));
            };
            let mut run_config = RunConfig::for_env(env);
            if let Some(path) = &config {
                let text = fs::read_to_string(path).map_err(io_err(path))?;
                run_config.apply(&text)?;
            }
            if let Some(w) = workers {
                run_config.workers = w;
            }
            if let Some(r) = replications {
                run_config.replications = r;
            }
            run_config.posteval_stochastic |= posteval_stochastic;
            run_config.validate()?;
            let spec = ExperimentSpec {
                algo,
                env: run_config.env_spec(env, matches!(incentive, Switch::On)),
                config: run_config,
                master_seed: seed,
                budget,
                out: Some(out.clone()),
            };
            let pool = Pool::new(spec.config.workers)?;
            let result = run_experiment(&spec, &pool)?;
            for f in &result.summary.failures {
                eprintln!(
                    "replication {} (seed {}) failed: {}",
                    f.index, f.seed, f.message
                );
            }
            for a in &result.summary.agents {
                println!(
                    "rep {:02}  picked at {:>6}  mean return {:>10.4}  mean displacement {:>10.4}  entropy {:.4}",
                    a.replication, a.picked_at, a.mean_return, a.mean_displacement, a.entropy
                );
            }
            println!("wrote {}", out.display());
            if result.summary.agents.is_empty() {
                return Err(LabError::Invalid("every replication failed".into()));
            }
            Ok(())
        }
        Command::Posteval {
            checkpoint,
            episodes,
            stochastic,
            seed,
            env,
            out,
        } => {
            let agent = load_agent(&checkpoint)?;
            let env = env.map_or(agent.env, |id| EnvSpec { id, ..agent.env });
            let seeds = posteval_seeds(&env, seed, episodes);
            let report = post_evaluate(&agent, &env, &seeds, stochastic)?;
            for (i, (r, d)) in report.returns.iter().zip(&report.displacements).enumerate() {
                println!(
                    "episode {i}  return {r:>10.4}  displacement {d:>10.4}  steps {}",
                    report.steps[i]
                );
            }
            println!(
                "mean return {:.4}  median return {:.4}  mean displacement {:.4}  median displacement {:.4}",
                report.mean_return, report.median_return, report.mean_displacement, report.median_displacement
            );
            if let Some(path) = out {
                write_json(&path, &report)?;
            }
            Ok(())
        }
        Command::Compare { a, b, metric, out } => {
            let sa = ExperimentSummary::load(&a)?;
            let sb = ExperimentSummary::load(&b)?;
            let report = compare_summaries(metric, &label(&a, &sa), &sa, &label(&b, &sb), &sb)?;
            print!("{}", render_table(&report));
            if let Some(dir) = out {
                fs::create_dir_all(&dir).map_err(io_err(&dir))?;
                write_json(&dir.join("comparison.json"), &report)?;
                let (ca, cb) = (mean_curve(&a)?, mean_curve(&b)?);
                let svg = render_svg(&report, Some((&ca, &cb)));
                let path = dir.join("comparison.svg");
                fs::write(&path, svg).map_err(io_err(&path))?;
            }
            Ok(())
        }
        Command::Heatmap {
            checkpoint,
            episodes,
            stochastic,
            seed,
            out,
        } => {
            let agent = load_agent(&checkpoint)?;
            let seeds = posteval_seeds(&agent.env, seed, episodes);
            let report = post_evaluate(&agent, &agent.env, &seeds, stochastic)?;
            print!("{}", ascii_heatmap(&report.heatmap));
            let (cols, rows) = default_grid(agent.env.id);
            println!(
                "{cols}x{rows} cells, {} steps, positional entropy {:.4}",
                report.heatmap.total(),
                report.entropy
            );
            if let Some(path) = out {
                write_json(&path, &report.heatmap)?;
            }
            Ok(())
        }
    }
}

fn label(dir: &Path, summary: &ExperimentSummary) -> String {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    format!("{name} ({} {})", summary.algo, summary.env.id)
}

fn resume_es(state_path: &Path, budget: u64, out: &Path, workers: usize) -> Result<()> {
    let checkpoint = Checkpoint::<LearnerState>::load(state_path)?;
    if !matches!(checkpoint.payload, LearnerState::Es { .. }) {
        return Err(LabError::Invalid(
            "only ES state files can be resumed".into(),
        ));
    }
    fs::create_dir_all(out).map_err(io_err(out))?;
    let path = out.join("curve.csv");
    let file = File::create(&path).map_err(io_err(&path))?;
    let mut writer = CurveWriter::new(BufWriter::new(file))?;
    let pool = Pool::new(workers)?;
    let outcome = continue_es(
        checkpoint.algo,
        &checkpoint.env,
        checkpoint.payload,
        budget,
        1,
        &pool,
        |row| writer.write(row),
    )?;
    save_agent(&out.join("best.json"), &outcome.best)?;
    Checkpoint::new(checkpoint.algo, checkpoint.env, &outcome.learner)
        .save(&out.join("state.json"))?;
    println!(
        "continued for {} generations; wrote {}",
        outcome.rows.len(),
        out.display()
    );
    Ok(())
}

/// Occupancy rendered with density characters, top row first.
fn ascii_heatmap(h: &Heatmap) -> String {
    const SHADES: &[u8] = b" .:-=+*#%@";
    let occ = h.occupancy();
    let peak = occ.iter().copied().fold(0.0, f64::max);
    let mut s = String::new();
    for r in (0..h.rows).rev() {
        for c in 0..h.cols {
            let p = occ[r * h.cols + c];
            let k = if peak > 0.0 && p > 0.0 {
                1 + ((p / peak) * (SHADES.len() - 2) as f64).round() as usize
            } else {
                0
            };
            s.push(SHADES[k.min(SHADES.len() - 1)] as char);
        }
        s.push('\n');
    }
    s
}
