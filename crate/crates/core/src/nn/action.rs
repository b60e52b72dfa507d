use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ActionSpace {
    /// Box with identical bounds on every dimension.
    Continuous {
        dim: usize,
        low: f64,
        high: f64,
    },
    Discrete {
        n: usize,
    },
}

impl ActionSpace {
    /// Width of the network output that parametrizes this space.
    pub fn output_dim(&self) -> usize {
        match *self {
            ActionSpace::Continuous { dim, .. } => dim,
            ActionSpace::Discrete { n } => n,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, ActionSpace::Discrete { .. })
    }
}

/// How a policy turns distribution parameters into actions.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ActionMode {
    Deterministic,
    /// Gaussian noise with fixed std added to every action component.
    FixedNoise {
        sigma: f64,
    },
    /// Diagonal Gaussian with learnable log-σ (initialized to ln `initial_sigma`).
    ParametricGaussian {
        initial_sigma: f64,
    },
}

impl ActionMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ActionMode::FixedNoise { sigma } if !(sigma > 0.0) => Err(Error::InvalidConfig(
                alloc::format!("fixed-noise sigma must be positive, got {sigma}"),
            )),
            ActionMode::ParametricGaussian { initial_sigma } if !(initial_sigma > 0.0) => {
                Err(Error::InvalidConfig(alloc::format!(
                    "parametric initial sigma must be positive, got {initial_sigma}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn is_parametric(&self) -> bool {
        matches!(self, ActionMode::ParametricGaussian { .. })
    }
}

/// Draw a continuous action from `mean` (plus `log_std` for the parametric
/// mode) and clamp it to `[low, high]`.
pub fn sample_action<R: Rng + ?Sized>(
    mean: &[f64],
    log_std: &[f64],
    mode: ActionMode,
    bounds: Option<(f64, f64)>,
    rng: &mut R,
    out: &mut Vec<f64>,
) {
    out.clear();
    match mode {
        ActionMode::Deterministic => out.extend_from_slice(mean),
        ActionMode::FixedNoise { sigma } => {
            out.extend(mean.iter().map(|m| m + sigma * rng::gaussian(rng)));
        }
        ActionMode::ParametricGaussian { .. } => {
            out.extend(
                mean.iter()
                    .zip(log_std)
                    .map(|(m, s)| m + math::exp(*s) * rng::gaussian(rng)),
            );
        }
    }
    if let Some((low, high)) = bounds {
        for a in out.iter_mut() {
            *a = a.clamp(low, high);
        }
    }
}

/// Choose a discrete action from logits. Deterministic takes the argmax,
/// fixed noise perturbs the logits before the argmax, parametric samples the
/// softmax.
pub fn select_discrete<R: Rng + ?Sized>(logits: &[f64], mode: ActionMode, rng: &mut R) -> usize {
    match mode {
        ActionMode::Deterministic => argmax(logits),
        ActionMode::FixedNoise { sigma } => {
            let noisy: Vec<f64> = logits
                .iter()
                .map(|l| l + sigma * rng::gaussian(rng))
                .collect();
            argmax(&noisy)
        }
        ActionMode::ParametricGaussian { .. } => sample_categorical(logits, rng),
    }
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub fn sample_categorical<R: Rng + ?Sized>(logits: &[f64], rng: &mut R) -> usize {
    let probs = softmax(logits);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + math::ln(xs.iter().map(|x| math::exp(x - max)).sum::<f64>())
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|l| math::exp(l - lse)).collect()
}

/// Log-density of a diagonal Gaussian.
pub fn gaussian_log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    action
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((a, m), s)| {
            let z = (a - m) / math::exp(*s);
            -0.5 * z * z - s - 0.5 * math::LN_2PI
        })
        .sum()
}

/// Differential entropy of a diagonal Gaussian: Σ (log σ + ½ ln 2πe).
pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|s| s + 0.5 * (math::LN_2PI + 1.0)).sum()
}

pub fn categorical_log_prob(logits: &[f64], action: usize) -> f64 {
    logits[action] - log_sum_exp(logits)
}

pub fn categorical_entropy(logits: &[f64]) -> f64 {
    let lse = log_sum_exp(logits);
    -logits
        .iter()
        .map(|l| {
            let lp = l - lse;
            math::exp(lp) * lp
        })
        .sum::<f64>()
}
