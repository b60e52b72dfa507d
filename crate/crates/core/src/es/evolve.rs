use alloc::format;
use alloc::vec::Vec;

use super::{
    assign_seeds, es_step, estimate_gradient, sample_perturbations, seed_stream, shape_fitness,
    BestCenter, EsConfig, EsState, EvalRequest, Evaluation, Fitness, GenerationReport,
};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::math;
use crate::rng::{self, tag};

/// When to stop evolving.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvolveLimits {
    /// Offspring evaluation steps. A generation only starts if its worst-case
    /// cost still fits.
    pub eval_steps: u64,
    pub generations: Option<u64>,
}

impl EvolveLimits {
    pub fn steps(eval_steps: u64) -> Self {
        Self {
            eval_steps,
            generations: None,
        }
    }

    pub fn generations(generations: u64) -> Self {
        Self {
            eval_steps: u64::MAX,
            generations: Some(generations),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsRun {
    pub state: EsState,
    pub reports: Vec<GenerationReport>,
}

#[derive(Clone, Copy)]
enum Job {
    Offspring { pair: usize, sign: f64, seed: u64 },
    Center,
}

/// Run one full generation: sample, evaluate (through `exec`), shape,
/// estimate the gradient, step, then refresh the normalizer.
pub fn step_generation<F, X>(
    config: &EsConfig,
    fitness: &F,
    state: &mut EsState,
    exec: &X,
) -> Result<GenerationReport>
where
    F: Fitness,
    X: Executor,
{
    config.validate()?;
    let generation = state.generation;
    let with_context = |e: Error| match e {
        Error::Generation { .. } => e,
        other => Error::Generation {
            generation,
            message: format!("{other}"),
        },
    };
    let dim = state.dim();
    let mut pairs = sample_perturbations(state, config);
    assign_seeds(&mut pairs, config.seed_mode, &mut seed_stream(state));

    let mut jobs = Vec::with_capacity(2 * pairs.len() + 1);
    for (i, p) in pairs.iter().enumerate() {
        jobs.push(Job::Offspring {
            pair: i,
            sign: 1.0,
            seed: p.eval_seed_plus,
        });
        jobs.push(Job::Offspring {
            pair: i,
            sign: -1.0,
            seed: p.eval_seed_minus,
        });
    }
    if config.center_eval_episodes > 0 {
        jobs.push(Job::Center);
    }

    let center_seed = rng::derive(&[state.master_seed, tag::CENTER_EVAL, generation]);
    let snapshot: &EsState = state;
    let results: Vec<Result<Evaluation>> = exec.map(&jobs, |job| match *job {
        Job::Offspring { pair, sign, seed } => {
            let eps = pairs[pair].noise(dim);
            let params: Vec<f64> = snapshot
                .center
                .iter()
                .zip(&eps)
                .map(|(c, e)| c + sign * config.sigma * e)
                .collect();
            let request = EvalRequest {
                seed,
                key: rng::derive(&[pairs[pair].noise_seed, sign.to_bits()]),
                subsample: config.obs_subsample,
            };
            fitness.evaluate(&params, &snapshot.normalizer, &request)
        }
        Job::Center => center_evaluation(config, fitness, snapshot, center_seed),
    });

    let mut raw = Vec::with_capacity(2 * pairs.len());
    let mut steps = 0;
    let mut observations: Vec<Vec<f64>> = Vec::new();
    let mut center_fitness = f64::NAN;
    for (job, result) in jobs.iter().zip(results) {
        let eval = result.map_err(with_context)?;
        match job {
            Job::Offspring { pair, sign, .. } => {
                if *sign > 0.0 {
                    pairs[*pair].fitness_plus = eval.fitness;
                } else {
                    pairs[*pair].fitness_minus = eval.fitness;
                }
                raw.push(eval.fitness);
                steps += eval.steps;
                observations.extend(eval.observations);
            }
            Job::Center => center_fitness = eval.fitness,
        }
    }

    let utilities = shape_fitness(&raw, config.fitness_mode).map_err(with_context)?;
    let gradient =
        estimate_gradient(&pairs, &utilities, config.sigma, dim).map_err(with_context)?;

    if center_fitness.is_finite()
        && state
            .best
            .as_ref()
            .is_none_or(|b| center_fitness > b.fitness)
    {
        state.best = Some(BestCenter {
            generation,
            fitness: center_fitness,
            center: state.center.clone(),
            normalizer: state.normalizer.clone(),
        });
    }

    es_step(state, &gradient, config).map_err(with_context)?;
    state
        .normalizer
        .update(observations.iter().map(Vec::as_slice));
    state.eval_steps += steps;
    state.offspring_evaluations += raw.len() as u64;

    Ok(GenerationReport {
        generation,
        best_fitness: raw.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_fitness: math::mean(&raw),
        center_fitness,
        gradient_norm: math::norm(&gradient),
        eval_steps: state.eval_steps,
        offspring_evaluations: state.offspring_evaluations,
    })
}

fn center_evaluation<F: Fitness>(
    config: &EsConfig,
    fitness: &F,
    state: &EsState,
    seed: u64,
) -> Result<Evaluation> {
    let mut total = 0.0;
    let mut steps = 0;
    for i in 0..config.center_eval_episodes as u64 {
        let request = EvalRequest {
            seed: rng::derive(&[seed, i]),
            key: rng::derive(&[seed, i, tag::ACTION]),
            subsample: 0.0,
        };
        let eval = fitness.evaluate(&state.center, &state.normalizer, &request)?;
        total += eval.fitness;
        steps += eval.steps;
    }
    Ok(Evaluation {
        fitness: total / config.center_eval_episodes as f64,
        steps,
        observations: Vec::new(),
    })
}

/// Worst-case offspring steps of one generation.
pub(crate) fn generation_cost<F: Fitness>(config: &EsConfig, fitness: &F) -> u64 {
    2 * config.pop_pairs as u64 * fitness.max_steps()
}

/// Evolve from `state` until the limits are reached. `on_report` runs after
/// every generation with the updated state.
pub fn evolve<F, X, C>(
    config: &EsConfig,
    fitness: &F,
    mut state: EsState,
    limits: EvolveLimits,
    exec: &X,
    mut on_report: C,
) -> Result<EsRun>
where
    F: Fitness,
    X: Executor,
    C: FnMut(&GenerationReport, &EsState) -> Result<()>,
{
    config.validate()?;
    if state.dim() != fitness.dim() {
        return Err(Error::DimensionMismatch {
            context: "es center",
            expected: fitness.dim(),
            got: state.dim(),
        });
    }
    let cost = generation_cost(config, fitness);
    let mut reports = Vec::new();
    loop {
        if limits.generations.is_some_and(|g| state.generation >= g) {
            break;
        }
        if state.eval_steps.saturating_add(cost) > limits.eval_steps {
            break;
        }
        let report = step_generation(config, fitness, &mut state, exec)?;
        on_report(&report, &state)?;
        reports.push(report);
    }
    Ok(EsRun { state, reports })
}
