use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::*;
use crate::math;
use crate::nn::{gaussian_entropy, init_mlp};
use crate::rng;

fn transition(r: &mut impl Rng, obs_dim: usize, act_dim: usize) -> Transition {
    Transition {
        obs: (0..obs_dim).map(|_| r.random_range(-1.0..1.0)).collect(),
        action: (0..act_dim).map(|_| r.random_range(-1.0..1.0)).collect(),
        reward: r.random_range(-1.0..1.0),
        next_obs: (0..obs_dim).map(|_| r.random_range(-1.0..1.0)).collect(),
        done: r.random::<f64>() < 0.2,
    }
}

fn batch(n: usize, obs_dim: usize, act_dim: usize, seed: u64) -> Vec<Transition> {
    let mut r = rng::stream(&[seed, 77]);
    (0..n)
        .map(|_| transition(&mut r, obs_dim, act_dim))
        .collect()
}

/// Spread every parameter so tiny networks are far from the near-zero init.
fn jitter(p: &mut ParamVector, seed: u64, scale: f64) {
    let mut r = rng::stream(&[seed, 5]);
    for v in p.values_mut() {
        *v += scale * rng::gaussian(&mut r);
    }
}

fn small_config() -> RlCommonConfig {
    RlCommonConfig {
        hidden: vec![5, 4],
        ..RlCommonConfig::default()
    }
}

fn numeric_grad(params: &ParamVector, f: impl Fn(&ParamVector) -> f64) -> Vec<f64> {
    let h = 1e-6;
    (0..params.len())
        .map(|i| {
            let mut p = params.clone();
            p.values_mut()[i] += h;
            let up = f(&p);
            p.values_mut()[i] -= 2.0 * h;
            let down = f(&p);
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn assert_close_grads(analytic: &[f64], numeric: &[f64]) {
    assert_eq!(analytic.len(), numeric.len());
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        let rel = (a - n).abs() / (a.abs() + n.abs()).max(1e-4);
        assert!(rel < 1e-4, "param {i}: analytic {a} numeric {n}");
    }
}

#[test]
fn replay_buffer_is_fifo_after_wrap() {
    let mut buf = ReplayBuffer::new(3);
    let mk = |k: usize| Transition {
        obs: vec![k as f64],
        action: vec![0.0],
        reward: k as f64,
        next_obs: vec![0.0],
        done: false,
    };
    for k in 0..5 {
        buf.push(mk(k));
        assert!(buf.len() <= buf.capacity());
    }
    let mut stored: Vec<f64> = buf.iter().map(|t| t.reward).collect();
    stored.sort_by(f64::total_cmp);
    assert_eq!(stored, vec![2.0, 3.0, 4.0]);

    let mut r = rng::stream(&[1]);
    for t in buf.sample(1000, &mut r).unwrap() {
        assert!(t.reward >= 2.0);
    }
    assert_eq!(
        ReplayBuffer::new(4).sample(1, &mut r).unwrap_err(),
        Error::EmptySample
    );
}

#[test]
fn target_examples() {
    assert_eq!(clipped_double_q_target(1.0, true, 100.0, -7.0, 0.99), 1.0);
    assert!((clipped_double_q_target(0.0, false, 2.0, 3.0, 0.99) - 1.98).abs() < 1e-12);
    let q = 0.7;
    assert_eq!(
        clipped_double_q_target(0.25, false, q, q, 0.9),
        0.25 + 0.9 * q
    );
}

#[test]
fn min_critic_target_is_pessimistic() {
    let mut r = rng::stream(&[9]);
    for _ in 0..10_000 {
        let reward = r.random_range(-5.0..5.0);
        let q1 = r.random_range(-10.0..10.0);
        let q2 = r.random_range(-10.0..10.0);
        let y = clipped_double_q_target(reward, false, q1, q2, 0.99);
        assert!(y <= reward + 0.99 * q1 && y <= reward + 0.99 * q2);
    }
}

#[test]
fn polyak_edge_cases() {
    let source = [1.0, -2.0, 3.5];
    let mut target = [0.0, 0.0, 0.0];
    polyak_update(&mut target, &source, 1.0);
    assert_eq!(target, source);

    let mut target = [0.3, 0.1, -0.4];
    polyak_update(&mut target, &source, 0.0);
    assert_eq!(target, [0.3, 0.1, -0.4]);

    let mut t = [0.0];
    polyak_update(&mut t, &[1.0], 0.005);
    assert!((t[0] - 0.005).abs() < 1e-15);
}

#[test]
fn config_rejects_bad_tau() {
    for tau in [0.0, -0.1, 1.5] {
        let c = RlCommonConfig {
            tau,
            ..RlCommonConfig::default()
        };
        assert!(c.validate().is_err());
    }
    assert!(RlCommonConfig::default().validate().is_ok());
}

#[test]
fn critic_loss_matches_hand_computation() {
    let spec = critic_spec(2, 1, &[3]).unwrap();
    let mut critic = init_mlp(&spec, 4);
    jitter(&mut critic, 4, 0.5);
    let data = batch(2, 2, 1, 8);
    let refs: Vec<&Transition> = data.iter().collect();
    let targets = [0.4, -1.1];
    let (loss, _) = critic_loss(&critic, &refs, &targets).unwrap();
    let q0 = q_value(&critic, &data[0].obs, &data[0].action).unwrap();
    let q1 = q_value(&critic, &data[1].obs, &data[1].action).unwrap();
    let hand = ((q0 - 0.4) * (q0 - 0.4) + (q1 + 1.1) * (q1 + 1.1)) / 2.0;
    assert!((loss - hand).abs() < 1e-12);

    // Perfect fit: targets equal predictions.
    let (loss, grad) = critic_loss(&critic, &refs, &[q0, q1]).unwrap();
    assert_eq!(loss, 0.0);
    assert!(grad.iter().all(|g| *g == 0.0));
}

#[test]
fn critic_gradient_matches_finite_differences() {
    let spec = critic_spec(3, 2, &[4, 3]).unwrap();
    let mut critic = init_mlp(&spec, 2);
    jitter(&mut critic, 2, 0.4);
    let data = batch(6, 3, 2, 3);
    let refs: Vec<&Transition> = data.iter().collect();
    let targets: Vec<f64> = (0..6).map(|k| 0.3 * k as f64 - 0.8).collect();
    let (_, grad) = critic_loss(&critic, &refs, &targets).unwrap();
    let numeric = numeric_grad(&critic, |p| critic_loss(p, &refs, &targets).unwrap().0);
    assert_close_grads(&grad, &numeric);
}

#[test]
fn critics_receive_independent_gradients() {
    let config = small_config();
    let mut state = Td3State::new(3, 2, &config, 6).unwrap();
    jitter(&mut state.critics[0], 1, 0.3);
    jitter(&mut state.critics[1], 2, 0.3);
    let data = batch(8, 3, 2, 4);
    let refs: Vec<&Transition> = data.iter().collect();
    let targets = vec![0.5; 8];
    let (_, before) = critic_loss(&state.critics[0], &refs, &targets).unwrap();
    jitter(&mut state.critics[1], 3, 1.0);
    let (_, after) = critic_loss(&state.critics[0], &refs, &targets).unwrap();
    assert_eq!(before, after);

    // A joint update moves each critic by its own Adam step only.
    let mut s1 = state.clone();
    let mut s2 = state.clone();
    jitter(&mut s2.critics[1], 11, 1.0);
    let [a, b] = &mut s1.critics;
    let [x, y] = &mut s1.critic_adams;
    critic_update([a, b], [x, y], &refs, &targets, 1e-3).unwrap();
    let [a, b] = &mut s2.critics;
    let [x, y] = &mut s2.critic_adams;
    critic_update([a, b], [x, y], &refs, &targets, 1e-3).unwrap();
    assert_eq!(s1.critics[0], s2.critics[0]);
}

#[test]
fn td3_actor_gradient_matches_finite_differences() {
    let config = small_config();
    let mut state = Td3State::new(3, 2, &config, 12).unwrap();
    jitter(&mut state.actor, 7, 0.4);
    jitter(&mut state.critics[0], 8, 0.4);
    let data = batch(5, 3, 2, 13);
    let refs: Vec<&Transition> = data.iter().collect();
    let (_, grad) = td3_actor_gradient(&state, &refs).unwrap();
    let numeric = numeric_grad(&state.actor, |p| {
        let mut s = state.clone();
        s.actor = p.clone();
        -td3_actor_gradient(&s, &refs).unwrap().0
    });
    assert_close_grads(&grad, &numeric);
}

#[test]
fn td3_actor_update_raises_q1() {
    let config = small_config();
    let mut state = Td3State::new(3, 2, &config, 21).unwrap();
    jitter(&mut state.critics[0], 22, 0.5);
    let data = batch(32, 3, 2, 23);
    let refs: Vec<&Transition> = data.iter().collect();
    let first = td3_actor_update(&mut state, &refs, 1e-2).unwrap();
    let mut last = first;
    for _ in 0..50 {
        last = td3_actor_update(&mut state, &refs, 1e-2).unwrap();
    }
    assert!(last > first, "Q1 {first} -> {last}");
}

#[test]
fn td3_target_noise_free_uses_target_actor() {
    let config = small_config();
    let mut state = Td3State::new(3, 2, &config, 31).unwrap();
    jitter(&mut state.target_actor, 32, 0.5);
    let data = batch(4, 3, 2, 33);
    let refs: Vec<&Transition> = data.iter().collect();
    let mut r = rng::stream(&[0]);
    let y = td3_targets(&state, &refs, 0.99, 0.0, 0.5, &mut r).unwrap();
    for (t, y) in data.iter().zip(&y) {
        let a = crate::nn::forward(&state.target_actor, &t.next_obs).unwrap();
        let q1 = q_value(&state.target_critics[0], &t.next_obs, &a).unwrap();
        let q2 = q_value(&state.target_critics[1], &t.next_obs, &a).unwrap();
        assert_eq!(*y, clipped_double_q_target(t.reward, t.done, q1, q2, 0.99));
    }
}

#[test]
fn sac_with_zero_alpha_matches_noise_free_td3_targets() {
    let config = RlCommonConfig {
        alpha: 0.0,
        ..small_config()
    };
    let (obs_dim, act_dim) = (3, 2);
    let mut sac = SacState::new(obs_dim, act_dim, &config, 41).unwrap();
    jitter(&mut sac.actor, 42, 0.5);
    jitter(&mut sac.target_critics[0], 43, 0.3);
    jitter(&mut sac.target_critics[1], 44, 0.3);

    // TD3 actor sharing the hidden layers and the mean rows of the SAC head.
    let mut td3 = Td3State::new(obs_dim, act_dim, &config, 45).unwrap();
    let sizes = sac.actor.spec().layer_sizes().to_vec();
    let last_in = sizes[sizes.len() - 2];
    let hidden_len = sac.actor.spec().weight_count() - (last_in + 1) * 2 * act_dim;
    let src = sac.actor.values().to_vec();
    let dst = td3.target_actor.values_mut();
    dst[..hidden_len].copy_from_slice(&src[..hidden_len]);
    let w_len = last_in * act_dim;
    dst[hidden_len..hidden_len + w_len].copy_from_slice(&src[hidden_len..hidden_len + w_len]);
    let sac_bias = hidden_len + last_in * 2 * act_dim;
    dst[hidden_len + w_len..hidden_len + w_len + act_dim]
        .copy_from_slice(&src[sac_bias..sac_bias + act_dim]);
    td3.target_critics = sac.target_critics.clone();

    let data = batch(16, obs_dim, act_dim, 46);
    let refs: Vec<&Transition> = data.iter().collect();
    let zeros = vec![vec![0.0; act_dim]; refs.len()];
    let y_sac = sac_targets(&sac, &refs, 0.99, &zeros).unwrap();
    let mut r = rng::stream(&[0]);
    let y_td3 = td3_targets(&td3, &refs, 0.99, 0.0, 0.5, &mut r).unwrap();
    for (a, b) in y_sac.iter().zip(&y_td3) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn unit_gaussian_entropy_per_dimension() {
    let h = gaussian_entropy(&[0.0, 0.0, 0.0]);
    assert!((h / 3.0 - 1.4189385332).abs() < 1e-9);
}

#[test]
fn squashed_log_prob_matches_quadrature() {
    // Density of a = tanh(u), u ~ N(m, s²), integrated over a ∈ (−1, 1) and
    // compared pointwise against the analytic log-density.
    let (m, log_s) = (0.3, -0.2);
    let s = math::exp(log_s);
    let n = 200_000;
    let mut mass = 0.0;
    for k in 0..n {
        let a = -1.0 + (k as f64 + 0.5) * 2.0 / n as f64;
        let u = 0.5 * math::ln((1.0 + a) / (1.0 - a));
        let xi = (u - m) / s;
        let (act, lp) = squashed_log_prob(&[m], &[log_s], &[xi]);
        assert!((act[0] - a).abs() < 1e-9);
        mass += math::exp(lp) * 2.0 / n as f64;
    }
    assert!((mass - 1.0).abs() < 1e-3, "mass {mass}");

    // Probability of a ∈ (0, 0.5) against the Gaussian CDF of atanh bounds.
    let hi = 0.5 * math::ln(3.0);
    let exact = math::normal_cdf((hi - m) / s) - math::normal_cdf(-m / s);
    let mut part = 0.0;
    let steps = 20_000;
    for k in 0..steps {
        let a = (k as f64 + 0.5) * 0.5 / steps as f64;
        let u = 0.5 * math::ln((1.0 + a) / (1.0 - a));
        let (_, lp) = squashed_log_prob(&[m], &[log_s], &[(u - m) / s]);
        part += math::exp(lp) * 0.5 / steps as f64;
    }
    assert!((part - exact).abs() < 1e-3);
}

#[test]
fn squashed_log_prob_is_stable_for_large_pre_activations() {
    let (a, lp) = squashed_log_prob(&[30.0], &[0.0], &[0.0]);
    assert_eq!(a[0], 1.0);
    assert!(lp.is_finite());
}

#[test]
fn sac_actor_gradient_matches_finite_differences() {
    let config = RlCommonConfig {
        alpha: 0.3,
        ..small_config()
    };
    let mut state = SacState::new(3, 2, &config, 51).unwrap();
    jitter(&mut state.actor, 52, 0.4);
    jitter(&mut state.critics[0], 53, 0.4);
    jitter(&mut state.critics[1], 54, 0.4);
    let data = batch(5, 3, 2, 55);
    let refs: Vec<&Transition> = data.iter().collect();
    let mut r = rng::stream(&[56]);
    let xi: Vec<Vec<f64>> = (0..5)
        .map(|_| vec![rng::gaussian(&mut r), rng::gaussian(&mut r)])
        .collect();
    let (_, grad) = sac_actor_loss(&state, &refs, &xi).unwrap();
    let numeric = numeric_grad(&state.actor, |p| {
        let mut s = state.clone();
        s.actor = p.clone();
        sac_actor_loss(&s, &refs, &xi).unwrap().0
    });
    assert_close_grads(&grad, &numeric);
}

#[test]
fn sac_update_is_deterministic_and_finite() {
    let config = small_config();
    let data = batch(64, 3, 2, 61);
    let refs: Vec<&Transition> = data.iter().collect();
    let run = || {
        let mut state = SacState::new(3, 2, &config, 62).unwrap();
        let mut r = rng::stream(&[63]);
        for _ in 0..5 {
            sac_update(&mut state, &refs, &config, &mut r).unwrap();
        }
        state
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert!(a.actor.is_finite() && a.critics[0].is_finite());
    assert_eq!(a.updates, 5);
}
