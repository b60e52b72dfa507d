//! Replicated experiments: independent seeded runs, incremental output,
//! best-agent selection and post-evaluation.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use evorl_core::env::EnvSpec;
use evorl_core::exec::Executor;
use evorl_core::rng;
use serde::{Deserialize, Serialize};

use crate::agent::{save_agent, write_json, Agent, Checkpoint};
use crate::config::{Algo, BestSelection, RunConfig};
use crate::error::{io_err, LabError, Result};
use crate::posteval::{post_evaluate, posteval_seeds, PostEvalReport};
use crate::train::{train, CurveRow, CurveWriter, TrainSpec};

/// Tag separating replication seeds from every other derived stream.
const REPLICATION_TAG: u64 = 0x5e9_11ca;

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub algo: Algo,
    pub env: EnvSpec,
    /// Replication count, selection rule and all learner settings.
    pub config: RunConfig,
    pub master_seed: u64,
    /// Per-replication environment step budget.
    pub budget: u64,
    /// Output directory; `None` keeps everything in memory.
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn replication_seeds(&self) -> Vec<u64> {
        (0..self.config.replications as u64)
            .map(|r| rng::derive(&[self.master_seed, REPLICATION_TAG, r]))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let mut seeds = self.replication_seeds();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(LabError::Invalid("replication seeds collide".into()));
        }
        Ok(())
    }

    pub fn replication_dir(&self, index: usize) -> Option<PathBuf> {
        self.out.as_ref().map(|o| o.join(format!("rep_{index:02}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub index: usize,
    pub seed: u64,
    pub rows: Vec<CurveRow>,
    pub best: Agent,
    /// Post-evaluation of `best`.
    pub posteval: PostEvalReport,
    /// Top agents kept for global selection, best first.
    pub candidates: Vec<Agent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub index: usize,
    pub seed: u64,
    pub message: String,
}

/// One post-evaluated agent in the experiment summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedAgent {
    pub replication: usize,
    pub seed: u64,
    pub picked_at: u64,
    pub score: Option<f64>,
    pub mean_return: f64,
    pub median_return: f64,
    pub mean_displacement: f64,
    pub median_displacement: f64,
    pub entropy: f64,
}

impl SelectedAgent {
    fn new(replication: usize, seed: u64, agent: &Agent, report: &PostEvalReport) -> Self {
        Self {
            replication,
            seed,
            picked_at: agent.picked_at,
            score: agent.score,
            mean_return: report.mean_return,
            median_return: report.median_return,
            mean_displacement: report.mean_displacement,
            median_displacement: report.median_displacement,
            entropy: report.entropy,
        }
    }
}

/// Machine-readable record of an experiment, written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub algo: Algo,
    pub env: EnvSpec,
    pub master_seed: u64,
    pub budget: u64,
    pub selection: BestSelection,
    pub posteval_episodes: usize,
    pub posteval_stochastic: bool,
    pub agents: Vec<SelectedAgent>,
    pub failures: Vec<ReplicationFailure>,
}

impl ExperimentSummary {
    pub fn load(dir: &Path) -> Result<Self> {
        crate::agent::read_json(&dir.join(SUMMARY_FILE))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    /// Per-replication outcomes in replication order.
    pub replications: Vec<std::result::Result<ReplicationResult, ReplicationFailure>>,
    pub summary: ExperimentSummary,
}

impl ExperimentResult {
    pub fn successes(&self) -> impl Iterator<Item = &ReplicationResult> {
        self.replications.iter().filter_map(|r| r.as_ref().ok())
    }
}

/// Run every replication (concurrently through `exec`), post-evaluate the
/// selected agents and write the summary. A failing replication is recorded
/// and the others continue.
pub fn run_experiment<X: Executor + Sync>(
    spec: &ExperimentSpec,
    exec: &X,
) -> Result<ExperimentResult> {
    spec.validate()?;
    if let Some(out) = &spec.out {
        fs::create_dir_all(out).map_err(io_err(out))?;
    }
    let jobs: Vec<(usize, u64)> = spec.replication_seeds().into_iter().enumerate().collect();
    let replications = exec.map(&jobs, |&(index, seed)| {
        run_replication(spec, index, seed, exec).map_err(|e| {
            let failure = ReplicationFailure {
                index,
                seed,
                message: e.to_string(),
            };
            if let Some(dir) = spec.replication_dir(index) {
                let _ = fs::write(dir.join("error.txt"), format!("{}\n", failure.message));
            }
            failure
        })
    });
    let agents = select(spec, &replications)?;
    let summary = ExperimentSummary {
        algo: spec.algo,
        env: spec.env,
        master_seed: spec.master_seed,
        budget: spec.budget,
        selection: spec.config.selection,
        posteval_episodes: spec.config.posteval_episodes,
        posteval_stochastic: spec.config.posteval_stochastic,
        agents,
        failures: replications
            .iter()
            .filter_map(|r| r.as_ref().err().cloned())
            .collect(),
    };
    if let Some(out) = &spec.out {
        write_json(&out.join(SUMMARY_FILE), &summary)?;
    }
    Ok(ExperimentResult {
        replications,
        summary,
    })
}

fn run_replication<X: Executor>(
    spec: &ExperimentSpec,
    index: usize,
    seed: u64,
    exec: &X,
) -> Result<ReplicationResult> {
    let train_spec = TrainSpec {
        algo: spec.algo,
        env: spec.env,
        config: spec.config.clone(),
        seed,
        budget: spec.budget,
    };
    let dir = spec.replication_dir(index);
    let mut writer = match &dir {
        Some(d) => {
            fs::create_dir_all(d).map_err(io_err(d))?;
            let path = d.join("curve.csv");
            let file = File::create(&path).map_err(io_err(&path))?;
            Some(CurveWriter::new(BufWriter::new(file))?)
        }
        None => None,
    };
    let outcome = train(&train_spec, exec, |row| match writer.as_mut() {
        Some(w) => w.write(row),
        None => Ok(()),
    })?;
    let seeds = posteval_seeds(&spec.env, seed, spec.config.posteval_episodes);
    let posteval = post_evaluate(
        &outcome.best,
        &spec.env,
        &seeds,
        spec.config.posteval_stochastic,
    )?;
    if let Some(d) = &dir {
        save_agent(&d.join("best.json"), &outcome.best)?;
        Checkpoint::new(spec.algo, spec.env, &outcome.learner).save(&d.join("state.json"))?;
        write_json(&d.join("posteval.json"), &posteval)?;
    }
    Ok(ReplicationResult {
        index,
        seed,
        rows: outcome.rows,
        best: outcome.best,
        posteval,
        candidates: outcome.candidates,
    })
}

fn select(
    spec: &ExperimentSpec,
    replications: &[std::result::Result<ReplicationResult, ReplicationFailure>],
) -> Result<Vec<SelectedAgent>> {
    let done = replications.iter().filter_map(|r| r.as_ref().ok());
    match spec.config.selection {
        BestSelection::PerReplication => Ok(done
            .map(|r| SelectedAgent::new(r.index, r.seed, &r.best, &r.posteval))
            .collect()),
        BestSelection::GlobalTop => {
            let mut pool: Vec<(&ReplicationResult, &Agent)> = done
                .flat_map(|r| {
                    // An untrained run has no scored candidates; its initial policy stands in.
                    let own: Vec<&Agent> = if r.candidates.is_empty() {
                        vec![&r.best]
                    } else {
                        r.candidates.iter().collect()
                    };
                    own.into_iter().map(move |a| (r, a))
                })
                .collect();
            // Stable sort keeps replication order among equal scores.
            pool.sort_by(|a, b| {
                let score = |x: &Agent| x.score.unwrap_or(f64::NEG_INFINITY);
                score(b.1).total_cmp(&score(a.1))
            });
            pool.truncate(spec.config.replications);
            pool.into_iter()
                .map(|(r, agent)| {
                    let seeds = posteval_seeds(&spec.env, r.seed, spec.config.posteval_episodes);
                    let report =
                        post_evaluate(agent, &spec.env, &seeds, spec.config.posteval_stochastic)?;
                    Ok(SelectedAgent::new(r.index, r.seed, agent, &report))
                })
                .collect()
        }
    }
}
