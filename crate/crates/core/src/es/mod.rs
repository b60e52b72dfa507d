//! OpenAI-style evolution strategies with antithetic sampling, seed pairing
//! modes, fitness shaping and Adam.

mod evolve;
mod fitness;

pub use evolve::{evolve, step_generation, EsRun, EvolveLimits};
pub use fitness::{EnvFitness, EvalRequest, Evaluation, Fitness, Sphere};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use crate::error::{check_len, Error, Result};
use crate::nn::ObsNormalizer;
use crate::optim::Adam;
use crate::rng::{self, tag};

/// How evaluation seeds are shared inside an antithetic pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SeedMode {
    /// Every offspring gets its own episode seed.
    Independent,
    /// Both members of a pair are evaluated under the same episode seed.
    SuperSymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FitnessMode {
    CenteredRank,
    RawPairedDifference,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EsConfig {
    pub sigma: f64,
    pub step_size: f64,
    /// Number of antithetic pairs; the population is twice this.
    pub pop_pairs: usize,
    pub episodes_per_eval: usize,
    pub weight_decay: f64,
    pub seed_mode: SeedMode,
    pub fitness_mode: FitnessMode,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    /// Fraction of offspring observations fed to the normalizer.
    pub obs_subsample: f64,
    /// Episodes used to score the center each generation (0 disables).
    pub center_eval_episodes: usize,
}

impl Default for EsConfig {
    fn default() -> Self {
        Self {
            sigma: 0.02,
            step_size: 0.01,
            pop_pairs: 20,
            episodes_per_eval: 1,
            weight_decay: 0.005,
            seed_mode: SeedMode::Independent,
            fitness_mode: FitnessMode::CenteredRank,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            obs_subsample: 0.01,
            center_eval_episodes: 1,
        }
    }
}

impl EsConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(format!("es: {msg}")));
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return fail("sigma must be positive");
        }
        if !(self.step_size > 0.0) {
            return fail("step_size must be positive");
        }
        if self.pop_pairs == 0 {
            return fail("pop_pairs must be at least 1");
        }
        if self.episodes_per_eval == 0 {
            return fail("episodes_per_eval must be at least 1");
        }
        if !(0.0..1.0).contains(&self.weight_decay) {
            return fail("weight_decay must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.obs_subsample) {
            return fail("obs_subsample must lie in [0, 1]");
        }
        Ok(())
    }
}

/// The best center seen so far together with the normalizer it was scored under.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BestCenter {
    pub generation: u64,
    pub fitness: f64,
    pub center: Vec<f64>,
    pub normalizer: ObsNormalizer,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EsState {
    pub center: Vec<f64>,
    pub adam: Adam,
    pub generation: u64,
    pub normalizer: ObsNormalizer,
    pub master_seed: u64,
    /// Environment steps consumed by offspring evaluations so far.
    pub eval_steps: u64,
    pub offspring_evaluations: u64,
    pub best: Option<BestCenter>,
}

impl EsState {
    pub fn new(center: Vec<f64>, obs_dim: usize, master_seed: u64, config: &EsConfig) -> Self {
        let mut adam = Adam::new(center.len());
        adam.beta1 = config.beta1;
        adam.beta2 = config.beta2;
        adam.epsilon = config.adam_epsilon;
        Self {
            center,
            adam,
            generation: 0,
            normalizer: ObsNormalizer::new(obs_dim),
            master_seed,
            eval_steps: 0,
            offspring_evaluations: 0,
            best: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

/// One antithetic couple: `center + σε` and `center − σε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationPair {
    pub pair_index: u32,
    pub noise_seed: u64,
    pub eval_seed_plus: u64,
    pub eval_seed_minus: u64,
    pub fitness_plus: f64,
    pub fitness_minus: f64,
}

impl PerturbationPair {
    /// Regenerate ε from the pair's noise seed.
    pub fn noise(&self, dim: usize) -> Vec<f64> {
        let mut eps = vec![0.0; dim];
        rng::fill_gaussian(&mut rng::stream(&[self.noise_seed]), &mut eps);
        eps
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GenerationReport {
    pub generation: u64,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    /// NaN when center evaluation is disabled.
    pub center_fitness: f64,
    pub gradient_norm: f64,
    /// Cumulative offspring environment steps after this generation.
    pub eval_steps: u64,
    /// Cumulative number of offspring evaluations after this generation.
    pub offspring_evaluations: u64,
}

/// N pairs for the current generation; ε is keyed by (master seed,
/// generation, pair index). Evaluation seeds are left at zero.
pub fn sample_perturbations(state: &EsState, config: &EsConfig) -> Vec<PerturbationPair> {
    (0..config.pop_pairs as u32)
        .map(|i| PerturbationPair {
            pair_index: i,
            noise_seed: rng::derive(&[state.master_seed, tag::NOISE, state.generation, i as u64]),
            eval_seed_plus: 0,
            eval_seed_minus: 0,
            fitness_plus: f64::NAN,
            fitness_minus: f64::NAN,
        })
        .collect()
}

pub fn assign_seeds<R: RngCore + ?Sized>(
    pairs: &mut [PerturbationPair],
    mode: SeedMode,
    rng: &mut R,
) {
    for pair in pairs {
        match mode {
            SeedMode::Independent => {
                pair.eval_seed_plus = rng.next_u64();
                pair.eval_seed_minus = rng.next_u64();
            }
            SeedMode::SuperSymmetric => {
                let seed = rng.next_u64();
                pair.eval_seed_plus = seed;
                pair.eval_seed_minus = seed;
            }
        }
    }
}

/// Stream that draws the evaluation seeds of one generation.
pub fn seed_stream(state: &EsState) -> rng::Stream {
    rng::stream(&[state.master_seed, tag::EVAL_SEEDS, state.generation])
}

/// Centered ranks: `rank/(n − 1) − 0.5` with ties sharing their average rank.
pub fn centered_ranks(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.iter().any(|f| !f.is_finite()) {
        return Err(Error::NonFinite("fitness"));
    }
    let n = raw.len();
    if n < 2 {
        return Ok(vec![0.0; n]);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && raw[order[j]] == raw[order[i]] {
            j += 1;
        }
        let avg = (i + j - 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    let denom = (n - 1) as f64;
    Ok(ranks.into_iter().map(|r| r / denom - 0.5).collect())
}

/// Utilities for the flattened `[f⁺₀, f⁻₀, f⁺₁, f⁻₁, …]` fitness list.
pub fn shape_fitness(raw: &[f64], mode: FitnessMode) -> Result<Vec<f64>> {
    match mode {
        FitnessMode::CenteredRank => centered_ranks(raw),
        FitnessMode::RawPairedDifference => {
            if raw.iter().any(|f| !f.is_finite()) {
                return Err(Error::NonFinite("fitness"));
            }
            Ok(raw.to_vec())
        }
    }
}

/// `g = 1/(2Nσ) Σ_pairs (u⁺ − u⁻) ε` for explicit noise vectors; `utilities`
/// is flattened as `[u⁺₀, u⁻₀, …]`.
pub fn gradient_from_noise(noise: &[Vec<f64>], utilities: &[f64], sigma: f64) -> Result<Vec<f64>> {
    check_len("utilities", 2 * noise.len(), utilities.len())?;
    let dim = noise.first().map_or(0, Vec::len);
    let mut grad = vec![0.0; dim];
    for (eps, u) in noise.iter().zip(utilities.chunks_exact(2)) {
        check_len("noise", dim, eps.len())?;
        accumulate(&mut grad, eps, u[0] - u[1]);
    }
    scale_gradient(&mut grad, noise.len(), sigma);
    Ok(grad)
}

/// Same estimator with ε regenerated from each pair's seed. Pairs are reduced
/// in `pair_index` order, so the result does not depend on how `pairs` (and
/// the aligned `utilities`) were ordered.
pub fn estimate_gradient(
    pairs: &[PerturbationPair],
    utilities: &[f64],
    sigma: f64,
    dim: usize,
) -> Result<Vec<f64>> {
    check_len("utilities", 2 * pairs.len(), utilities.len())?;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by_key(|&i| pairs[i].pair_index);
    let mut grad = vec![0.0; dim];
    for i in order {
        let eps = pairs[i].noise(dim);
        accumulate(&mut grad, &eps, utilities[2 * i] - utilities[2 * i + 1]);
    }
    scale_gradient(&mut grad, pairs.len(), sigma);
    Ok(grad)
}

fn accumulate(grad: &mut [f64], eps: &[f64], weight: f64) {
    for (g, e) in grad.iter_mut().zip(eps) {
        *g += weight * e;
    }
}

fn scale_gradient(grad: &mut [f64], pairs: usize, sigma: f64) {
    let scale = 1.0 / (2.0 * pairs as f64 * sigma);
    for g in grad.iter_mut() {
        *g *= scale;
    }
}

/// Adam ascent on the center, then multiplicative weight decay.
pub fn es_step(state: &mut EsState, gradient: &[f64], config: &EsConfig) -> Result<()> {
    check_len("es gradient", state.dim(), gradient.len())?;
    if gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("es gradient"));
    }
    state
        .adam
        .ascend(&mut state.center, gradient, config.step_size)?;
    let keep = 1.0 - config.weight_decay;
    for c in state.center.iter_mut() {
        *c *= keep;
    }
    state.generation += 1;
    Ok(())
}
