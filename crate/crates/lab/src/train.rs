//! One training run: dispatch to the learner, stream learning-curve rows,
//! and hand back the best agent plus the final learner state.

use std::io::Write;

use evorl_core::env::EnvSpec;
use evorl_core::es::{
    step_generation, EnvFitness, EsConfig, EsState, Fitness, GenerationReport, SeedMode,
};
use evorl_core::exec::Executor;
use evorl_core::nn::{
    init_mlp, ActionMode, ActionSpace, Activation, MlpSpec, ObsNormalizer, ParamVector,
};
use evorl_core::offpolicy::{train_sac, train_td3};
use evorl_core::policy::PolicyHead;
use evorl_core::ppo::train_ppo;
use evorl_core::rl::TrainReport;
use evorl_core::rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, LearnerState};
use crate::config::{Algo, BestSelection, RunConfig};
use crate::error::{LabError, Result};

pub const CURVE_HEADER: [&str; 5] = [
    "eval_steps",
    "generation_or_update",
    "mean_return",
    "best_return",
    "center_or_eval_return",
];

/// One learning-curve row, shared by every algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub eval_steps: u64,
    pub generation_or_update: u64,
    pub mean_return: f64,
    pub best_return: f64,
    pub center_or_eval_return: f64,
}

impl From<&GenerationReport> for CurveRow {
    fn from(r: &GenerationReport) -> Self {
        Self {
            eval_steps: r.eval_steps,
            generation_or_update: r.generation,
            mean_return: r.mean_fitness,
            best_return: r.best_fitness,
            center_or_eval_return: r.center_fitness,
        }
    }
}

impl From<&TrainReport> for CurveRow {
    fn from(r: &TrainReport) -> Self {
        Self {
            eval_steps: r.steps,
            generation_or_update: r.update,
            mean_return: r.mean_return,
            best_return: r.best_return,
            center_or_eval_return: r.eval_return,
        }
    }
}

/// Streams rows to a CSV sink, flushing after each one.
pub struct CurveWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> CurveWriter<W> {
    pub fn new(sink: W) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(sink);
        inner.write_record(CURVE_HEADER)?;
        inner.flush().map_err(csv::Error::from)?;
        Ok(Self { inner })
    }

    /// Continue an existing file without repeating the header.
    pub fn append(sink: W) -> Self {
        Self {
            inner: csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(sink),
        }
    }

    pub fn write(&mut self, row: &CurveRow) -> Result<()> {
        self.inner.serialize(row)?;
        self.inner.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

pub fn read_curve(text: &str) -> Result<Vec<CurveRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    Ok(reader
        .deserialize()
        .collect::<std::result::Result<_, _>>()?)
}

/// What to train.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSpec {
    pub algo: Algo,
    pub env: EnvSpec,
    pub config: RunConfig,
    pub seed: u64,
    /// Environment steps (offspring evaluation steps for ES).
    pub budget: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub rows: Vec<CurveRow>,
    /// Best agent seen, or the untrained policy when no training happened.
    pub best: Agent,
    /// Top agents by training-time score, best first (a single entry
    /// unless global selection is configured).
    pub candidates: Vec<Agent>,
    pub learner: LearnerState,
}

/// Policy network used by ES: tanh outputs for continuous control, raw
/// logits for discrete actions, plus a log-σ head in parametric mode.
pub fn es_policy_spec(
    obs_dim: usize,
    space: ActionSpace,
    hidden: &[usize],
    mode: ActionMode,
) -> Result<MlpSpec> {
    let activation = if space.is_discrete() {
        Activation::Identity
    } else {
        Activation::Tanh
    };
    let spec = MlpSpec::build(obs_dim, hidden, space.output_dim(), activation)?;
    Ok(if mode.is_parametric() {
        spec.with_log_std_head()
    } else {
        spec
    })
}

/// Fresh ES learner for `spec`.
pub fn es_start(spec: &TrainSpec) -> Result<LearnerState> {
    let probe = spec.env.build();
    let mode = spec.config.es_action;
    let policy = es_policy_spec(
        probe.observation_dim(),
        probe.action_space(),
        &spec.config.es_hidden,
        mode,
    )?;
    let mut init = init_mlp(&policy, rng::derive(&[spec.seed, 0x1417]));
    if let ActionMode::ParametricGaussian { initial_sigma } = mode {
        init.set_log_std(initial_sigma.ln());
    }
    let config = es_config(spec.algo, &spec.config.es);
    let state = EsState::new(
        init.into_values(),
        probe.observation_dim(),
        spec.seed,
        &config,
    );
    Ok(LearnerState::Es {
        config,
        mode,
        policy,
        state,
    })
}

fn es_config(algo: Algo, base: &EsConfig) -> EsConfig {
    let mut config = base.clone();
    if algo == Algo::EsSuperSym {
        config.seed_mode = SeedMode::SuperSymmetric;
    }
    config
}

/// Run `spec` from scratch, passing every row to `on_row` as it appears.
pub fn train<X, C>(spec: &TrainSpec, exec: &X, mut on_row: C) -> Result<TrainOutcome>
where
    X: Executor,
    C: FnMut(&CurveRow) -> Result<()>,
{
    spec.config.validate()?;
    let cfg = &spec.config;
    let keep = candidates_kept(cfg);
    let agent = |head, mode| AgentTemplate {
        algo: spec.algo,
        env: spec.env,
        head,
        mode,
    };
    match spec.algo {
        Algo::Es | Algo::EsSuperSym => {
            let learner = es_start(spec)?;
            continue_es(
                spec.algo,
                &spec.env,
                learner,
                spec.budget,
                keep,
                exec,
                on_row,
            )
        }
        Algo::Ppo => {
            let template = agent(
                PolicyHead::Plain,
                ActionMode::ParametricGaussian {
                    initial_sigma: cfg.ppo.initial_log_std.exp(),
                },
            );
            let mut rl = RlSink::new(template, keep, &mut on_row);
            let run = train_ppo(
                &cfg.ppo,
                &spec.env,
                spec.seed,
                spec.budget,
                cfg.eval,
                |r, s| rl.push(r, &s.actor, &s.normalizer),
            );
            let run = rl.finish(run)?;
            Ok(rl.outcome(
                &run.state.actor,
                &run.state.normalizer,
                LearnerState::Ppo(run.state.clone()),
            ))
        }
        Algo::Td3 => {
            let template = agent(
                PolicyHead::Plain,
                ActionMode::FixedNoise {
                    sigma: cfg.offpolicy.exploration_noise.max(f64::MIN_POSITIVE),
                },
            );
            let mut rl = RlSink::new(template, keep, &mut on_row);
            let run = train_td3(
                &cfg.offpolicy,
                &spec.env,
                spec.seed,
                spec.budget,
                cfg.eval,
                |r, s| rl.push(r, &s.actor, &s.normalizer),
            );
            let run = rl.finish(run)?;
            Ok(rl.outcome(
                &run.state.actor,
                &run.state.normalizer,
                LearnerState::Td3(run.state.clone()),
            ))
        }
        Algo::Sac => {
            let template = agent(
                PolicyHead::Squashed,
                ActionMode::ParametricGaussian { initial_sigma: 1.0 },
            );
            let mut rl = RlSink::new(template, keep, &mut on_row);
            let run = train_sac(
                &cfg.offpolicy,
                &spec.env,
                spec.seed,
                spec.budget,
                cfg.eval,
                |r, s| rl.push(r, &s.actor, &s.normalizer),
            );
            let run = rl.finish(run)?;
            Ok(rl.outcome(
                &run.state.actor,
                &run.state.normalizer,
                LearnerState::Sac(run.state.clone()),
            ))
        }
    }
}

/// How many top agents a run keeps: one, or enough to fill a global top list.
pub fn candidates_kept(config: &RunConfig) -> usize {
    match config.selection {
        BestSelection::PerReplication => 1,
        BestSelection::GlobalTop => config.replications,
    }
}

/// Keep evolving an ES learner until `budget` offspring evaluation steps,
/// keeping the `keep` best-scoring centers. Continuing a saved learner
/// reproduces an uninterrupted run bit-for-bit.
pub fn continue_es<X, C>(
    algo: Algo,
    env: &EnvSpec,
    learner: LearnerState,
    budget: u64,
    keep: usize,
    exec: &X,
    mut on_row: C,
) -> Result<TrainOutcome>
where
    X: Executor,
    C: FnMut(&CurveRow) -> Result<()>,
{
    let LearnerState::Es {
        config,
        mode,
        policy,
        mut state,
    } = learner
    else {
        return Err(LabError::Invalid(
            "only ES learners can be continued".into(),
        ));
    };
    config.validate()?;
    let fitness = EnvFitness::new(*env, policy.clone(), mode, config.episodes_per_eval)?;
    if state.dim() != fitness.dim() {
        return Err(LabError::Invalid(format!(
            "ES center has {} parameters, the policy needs {}",
            state.dim(),
            fitness.dim()
        )));
    }
    let template = AgentTemplate {
        algo,
        env: *env,
        head: PolicyHead::Plain,
        mode,
    };
    let mut top = TopAgents::new(keep);
    if let Some(b) = &state.best {
        top.offer(b.fitness, || {
            template.make(&policy, b.center.clone(), &b.normalizer, b.generation)
        })?;
    }
    // A generation only starts if its worst-case cost still fits.
    let cost = 2 * config.pop_pairs as u64 * fitness.max_steps();
    let mut rows = Vec::new();
    while state.eval_steps.saturating_add(cost) <= budget {
        let center = state.center.clone();
        let normalizer = state.normalizer.clone();
        let report = step_generation(&config, &fitness, &mut state, exec)?;
        top.offer(report.center_fitness, || {
            template.make(&policy, center, &normalizer, report.generation)
        })?;
        let row = CurveRow::from(&report);
        on_row(&row)?;
        rows.push(row);
    }
    let fallback = template.make(
        &policy,
        state.center.clone(),
        &state.normalizer,
        state.generation,
    )?;
    Ok(TrainOutcome {
        rows,
        best: top.best_or(fallback),
        candidates: top.agents,
        learner: LearnerState::Es {
            config,
            mode,
            policy,
            state,
        },
    })
}

/// Everything about an agent except its parameters.
#[derive(Clone, Copy)]
struct AgentTemplate {
    algo: Algo,
    env: EnvSpec,
    head: PolicyHead,
    mode: ActionMode,
}

impl AgentTemplate {
    fn make(
        &self,
        spec: &MlpSpec,
        values: Vec<f64>,
        normalizer: &ObsNormalizer,
        picked_at: u64,
    ) -> Result<Agent> {
        Ok(self.agent_with(
            ParamVector::from_values(spec.clone(), values)?,
            normalizer,
            picked_at,
        ))
    }

    fn agent_with(
        &self,
        policy: ParamVector,
        normalizer: &ObsNormalizer,
        picked_at: u64,
    ) -> Agent {
        Agent {
            algo: self.algo,
            env: self.env,
            policy,
            normalizer: normalizer.clone(),
            head: self.head,
            training_mode: self.mode,
            picked_at,
            score: None,
        }
    }
}

/// Highest-scoring agents in descending score order; on ties the earlier
/// agent ranks first.
struct TopAgents {
    keep: usize,
    agents: Vec<Agent>,
}

impl TopAgents {
    fn new(keep: usize) -> Self {
        Self {
            keep: keep.max(1),
            agents: Vec::new(),
        }
    }

    fn score(agent: &Agent) -> f64 {
        agent.score.unwrap_or(f64::NEG_INFINITY)
    }

    fn offer(&mut self, score: f64, make: impl FnOnce() -> Result<Agent>) -> Result<()> {
        if !score.is_finite() {
            return Ok(());
        }
        if self.agents.len() == self.keep
            && self.agents.last().is_some_and(|a| score <= Self::score(a))
        {
            return Ok(());
        }
        let mut agent = make()?;
        agent.score = Some(score);
        let at = self.agents.partition_point(|a| Self::score(a) >= score);
        self.agents.insert(at, agent);
        self.agents.truncate(self.keep);
        Ok(())
    }

    fn best_or(&self, fallback: Agent) -> Agent {
        self.agents.first().cloned().unwrap_or(fallback)
    }
}

/// Row forwarding plus candidate tracking for the gradient-based learners.
/// A failing row callback aborts training and its error wins over the one
/// the learner reports.
struct RlSink<'c, C> {
    template: AgentTemplate,
    top: TopAgents,
    on_row: &'c mut C,
    rows: Vec<CurveRow>,
    failure: Option<LabError>,
}

impl<'c, C: FnMut(&CurveRow) -> Result<()>> RlSink<'c, C> {
    fn new(template: AgentTemplate, keep: usize, on_row: &'c mut C) -> Self {
        Self {
            template,
            top: TopAgents::new(keep),
            on_row,
            rows: Vec::new(),
            failure: None,
        }
    }

    fn push(
        &mut self,
        report: &TrainReport,
        actor: &ParamVector,
        normalizer: &ObsNormalizer,
    ) -> evorl_core::Result<()> {
        let template = self.template;
        let _ = self.top.offer(report.eval_return, || {
            Ok(template.agent_with(actor.clone(), normalizer, report.update))
        });
        let row = CurveRow::from(report);
        if let Err(e) = (self.on_row)(&row) {
            let message = e.to_string();
            self.failure = Some(e);
            return Err(evorl_core::Error::InvalidConfig(format!(
                "output failed: {message}"
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    fn finish<T>(&mut self, run: evorl_core::Result<T>) -> Result<T> {
        match (run, self.failure.take()) {
            (_, Some(e)) => Err(e),
            (run, None) => Ok(run?),
        }
    }

    fn outcome(
        self,
        actor: &ParamVector,
        normalizer: &ObsNormalizer,
        learner: LearnerState,
    ) -> TrainOutcome {
        let fallback = self.template.agent_with(actor.clone(), normalizer, 0);
        TrainOutcome {
            rows: self.rows,
            best: self.top.best_or(fallback),
            candidates: self.top.agents,
            learner,
        }
    }
}
