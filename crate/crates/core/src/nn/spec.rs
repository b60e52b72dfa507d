use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Activation {
    Identity,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => crate::math::tanh(x),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Feedforward architecture: tanh hidden layers, configurable output
/// activation, and an optional state-independent log-σ head with one entry
/// per output.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MlpSpec {
    layer_sizes: Vec<usize>,
    output_activation: Activation,
    log_std_head: bool,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, output_activation: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidSpec(
                "at least input and output layers are required",
            ));
        }
        if layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::InvalidSpec("layer sizes must be positive"));
        }
        Ok(Self {
            layer_sizes,
            output_activation,
            log_std_head: false,
        })
    }

    /// Input size, hidden sizes, output size in one call.
    pub fn build(
        input: usize,
        hidden: &[usize],
        output: usize,
        output_activation: Activation,
    ) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Self::new(sizes, output_activation)
    }

    pub fn with_log_std_head(mut self) -> Self {
        self.log_std_head = true;
        self
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn has_log_std_head(&self) -> bool {
        self.log_std_head
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated non-empty")
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.num_layers() {
            self.output_activation
        } else {
            Activation::Tanh
        }
    }

    /// Parameters of the feedforward part: Σ (n_in + 1)·n_out.
    pub fn weight_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    pub fn log_std_count(&self) -> usize {
        if self.log_std_head {
            self.output_dim()
        } else {
            0
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.log_std_count()
    }

    /// Length of the flat forward output: means followed by log-σ entries.
    pub fn forward_len(&self) -> usize {
        self.output_dim() + self.log_std_count()
    }

    /// Offsets of each layer's weight block inside the flat vector. Each block
    /// is `n_out × n_in` row-major weights followed by `n_out` biases.
    pub(crate) fn layer_offsets(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.layer_sizes.windows(2).map(move |w| {
            let start = offset;
            offset += (w[0] + 1) * w[1];
            (start, w[0], w[1])
        })
    }
}
