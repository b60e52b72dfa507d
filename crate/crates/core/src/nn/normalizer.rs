use alloc::vec;
use alloc::vec::Vec;

use crate::math;

const VAR_EPS: f64 = 1e-8;

/// Running per-dimension observation mean and variance.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObsNormalizer {
    count: u64,
    mean: Vec<f64>,
    var: Vec<f64>,
    clip: f64,
}

impl ObsNormalizer {
    pub const DEFAULT_CLIP: f64 = 5.0;

    pub fn new(dim: usize) -> Self {
        Self::with_clip(dim, Self::DEFAULT_CLIP)
    }

    pub fn with_clip(dim: usize, clip: f64) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            var: vec![0.0; dim],
            clip,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn var(&self) -> &[f64] {
        &self.var
    }

    pub fn clip(&self) -> f64 {
        self.clip
    }

    /// `clip((obs − mean)/√(var + 1e-8))`; identity while empty.
    pub fn normalize_into(&self, obs: &[f64], out: &mut [f64]) {
        if self.count == 0 {
            out.copy_from_slice(obs);
            return;
        }
        for (((o, &x), &m), &v) in out.iter_mut().zip(obs).zip(&self.mean).zip(&self.var) {
            *o = ((x - m) / math::sqrt(v + VAR_EPS)).clamp(-self.clip, self.clip);
        }
    }

    pub fn normalize(&self, obs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; obs.len()];
        self.normalize_into(obs, &mut out);
        out
    }

    /// Merge a batch using the pairwise (Chan et al.) update.
    pub fn update<'a, I>(&mut self, batch: I)
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let dim = self.dim();
        let mut n = 0u64;
        let mut mean = vec![0.0; dim];
        let mut m2 = vec![0.0; dim];
        for obs in batch {
            n += 1;
            for d in 0..dim {
                let delta = obs[d] - mean[d];
                mean[d] += delta / n as f64;
                m2[d] += delta * (obs[d] - mean[d]);
            }
        }
        if n == 0 {
            return;
        }
        let total = self.count + n;
        let (na, nb, nt) = (self.count as f64, n as f64, total as f64);
        for d in 0..dim {
            let delta = mean[d] - self.mean[d];
            let m2_total = self.var[d] * na + m2[d] + delta * delta * na * nb / nt;
            self.mean[d] += delta * nb / nt;
            self.var[d] = (m2_total / nt).max(0.0);
        }
        self.count = total;
    }
}
