use alloc::vec::Vec;

use super::spec::MlpSpec;
use crate::error::{check_len, Error, Result};
use crate::math;
use crate::rng;

/// Flat parameter vector θ tied to the architecture it parametrizes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamVector {
    spec: MlpSpec,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn from_values(spec: MlpSpec, values: Vec<f64>) -> Result<Self> {
        check_len("parameter vector", spec.param_count(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter vector"));
        }
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: MlpSpec) -> Self {
        let values = alloc::vec![0.0; spec.param_count()];
        Self { spec, values }
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.values[..self.spec.weight_count()]
    }

    pub fn log_std(&self) -> &[f64] {
        &self.values[self.spec.weight_count()..]
    }

    pub fn log_std_mut(&mut self) -> &mut [f64] {
        let n = self.spec.weight_count();
        &mut self.values[n..]
    }

    pub fn set_log_std(&mut self, value: f64) {
        for v in self.log_std_mut() {
            *v = value;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Gain applied to the output layer so fresh policies act close to zero.
pub const OUTPUT_GAIN: f64 = 0.1;

/// Fan-in scaled Gaussian weights, zero biases, log-σ entries at 0 (σ = 1).
pub fn init_mlp(spec: &MlpSpec, seed: u64) -> ParamVector {
    let mut rng = rng::stream(&[seed, rng::tag::INIT]);
    let mut values = alloc::vec![0.0; spec.param_count()];
    let layers = spec.num_layers();
    for (layer, (start, n_in, n_out)) in spec.layer_offsets().enumerate() {
        let mut scale = 1.0 / math::sqrt(n_in as f64);
        if layer + 1 == layers {
            scale *= OUTPUT_GAIN;
        }
        for w in &mut values[start..start + n_in * n_out] {
            *w = scale * rng::gaussian(&mut rng);
        }
    }
    ParamVector {
        spec: spec.clone(),
        values,
    }
}
