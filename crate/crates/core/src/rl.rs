//! Pieces shared by the gradient-based learners: progress reports, periodic
//! deterministic evaluation and best-policy tracking.

use alloc::vec::Vec;

use crate::env::{independent_seeds, EnvSpec};
use crate::error::Result;
use crate::math;
use crate::nn::{ActionMode, ObsNormalizer, ParamVector};
use crate::policy::{evaluate_policy, PolicyHead, PolicyRunner};
use crate::rng::{self, tag};

/// One learning-curve row of a gradient-based learner.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainReport {
    pub update: u64,
    /// Environment steps consumed by training so far.
    pub steps: u64,
    /// Mean return of training episodes finished since the previous report
    /// (NaN if none finished).
    pub mean_return: f64,
    pub best_return: f64,
    /// Deterministic evaluation return (NaN when not evaluated this update).
    pub eval_return: f64,
}

/// Periodic deterministic evaluation settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalProtocol {
    pub episodes: usize,
    /// Evaluate every this many updates (and after the last one).
    pub interval: u64,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            episodes: 1,
            interval: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BestPolicy {
    pub update: u64,
    pub eval_return: f64,
    pub actor: ParamVector,
    pub normalizer: ObsNormalizer,
}

/// Mean deterministic return of `actor` over evaluation episodes keyed by
/// `(seed, update)`.
pub fn deterministic_return(
    env: &EnvSpec,
    actor: &ParamVector,
    head: PolicyHead,
    normalizer: &ObsNormalizer,
    episodes: usize,
    seed: u64,
    update: u64,
) -> Result<f64> {
    let mut instance = env.build();
    let mut runner = PolicyRunner::with_head(
        actor.spec(),
        actor.values(),
        instance.action_space(),
        normalizer,
        head,
    )?;
    let seeds = independent_seeds(rng::derive(&[seed, tag::CENTER_EVAL, update]), episodes);
    let stats = evaluate_policy(
        &mut *instance,
        &mut runner,
        ActionMode::Deterministic,
        &seeds,
        |_, _, _| {},
    )?;
    let returns: Vec<f64> = stats.iter().map(|s| s.total_reward).collect();
    Ok(math::mean(&returns))
}

/// Folds finished-episode returns into report statistics.
#[derive(Debug, Clone, Default)]
pub(crate) struct EpisodeLog {
    returns: Vec<f64>,
}

impl EpisodeLog {
    pub(crate) fn push(&mut self, total: f64) {
        self.returns.push(total);
    }

    /// (mean, best) of the logged returns, then clears the log.
    pub(crate) fn drain(&mut self) -> (f64, f64) {
        if self.returns.is_empty() {
            return (f64::NAN, f64::NAN);
        }
        let mean = math::mean(&self.returns);
        let best = self
            .returns
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        self.returns.clear();
        (mean, best)
    }
}

/// Keeps the highest-scoring policy seen.
pub(crate) fn offer_best(
    best: &mut Option<BestPolicy>,
    update: u64,
    eval_return: f64,
    actor: &ParamVector,
    normalizer: &ObsNormalizer,
) {
    if eval_return.is_finite() && best.as_ref().is_none_or(|b| eval_return > b.eval_return) {
        *best = Some(BestPolicy {
            update,
            eval_return,
            actor: actor.clone(),
            normalizer: normalizer.clone(),
        });
    }
}
