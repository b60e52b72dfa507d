use alloc::vec;
use alloc::vec::Vec;

use super::params::ParamVector;
use super::spec::MlpSpec;
use crate::error::{check_len, Error, Result};

/// Reusable activation and delta buffers for one sample.
#[derive(Debug, Clone)]
pub struct Trace {
    offsets: Vec<(usize, usize, usize)>,
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Trace {
    pub fn new(spec: &MlpSpec) -> Self {
        let sizes = spec.layer_sizes();
        Self {
            offsets: spec.layer_offsets().collect(),
            acts: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            deltas: sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn input(&self) -> &[f64] {
        &self.acts[0]
    }

    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("at least two layers")
    }
}

/// Unchecked forward pass over the feedforward part of `weights`.
pub fn forward_into(spec: &MlpSpec, weights: &[f64], obs: &[f64], trace: &mut Trace) {
    trace.acts[0].copy_from_slice(obs);
    for (layer, &(start, n_in, n_out)) in trace.offsets.iter().enumerate() {
        let act = spec.activation(layer);
        let (head, tail) = trace.acts.split_at_mut(layer + 1);
        let input = &head[layer];
        let output = &mut tail[0];
        let w = &weights[start..start + n_in * n_out];
        let b = &weights[start + n_in * n_out..start + (n_in + 1) * n_out];
        for o in 0..n_out {
            let row = &w[o * n_in..(o + 1) * n_in];
            let mut z = b[o];
            for (wi, xi) in row.iter().zip(input) {
                z += wi * xi;
            }
            output[o] = act.apply(z);
        }
    }
}

/// Accumulates `∂(upstream · output)/∂weights` into `grad` (feedforward part
/// only) using the activations stored by the preceding `forward_into`.
/// Writes the gradient with respect to the input into `input_grad` if given.
pub fn backward_into(
    spec: &MlpSpec,
    weights: &[f64],
    trace: &mut Trace,
    upstream: &[f64],
    grad: &mut [f64],
    input_grad: Option<&mut [f64]>,
) {
    let layers = trace.offsets.len();
    {
        let out = &trace.acts[layers];
        let act = spec.activation(layers - 1);
        for ((d, &u), &y) in trace.deltas[layers - 1].iter_mut().zip(upstream).zip(out) {
            *d = u * act.derivative_from_output(y);
        }
    }
    let mut input_grad = input_grad;
    for layer in (0..layers).rev() {
        let (start, n_in, n_out) = trace.offsets[layer];
        let w = &weights[start..start + n_in * n_out];
        let input = &trace.acts[layer];
        let (lower, upper) = trace.deltas.split_at_mut(layer);
        let delta = &upper[0];
        {
            let (gw, gb) = grad[start..start + (n_in + 1) * n_out].split_at_mut(n_in * n_out);
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                for (g, x) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(input) {
                    *g += d * x;
                }
            }
        }
        let target: Option<&mut [f64]> = if layer > 0 {
            Some(&mut lower[layer - 1][..])
        } else {
            input_grad.as_deref_mut()
        };
        if let Some(prev) = target {
            prev.iter_mut().for_each(|p| *p = 0.0);
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for (p, wi) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *p += wi * d;
                }
            }
            if layer > 0 {
                let act = spec.activation(layer - 1);
                for (p, &y) in prev.iter_mut().zip(input) {
                    *p *= act.derivative_from_output(y);
                }
            }
        }
    }
}

/// Distribution parameters: action means (or logits) followed by log-σ
/// entries when the spec carries a log-σ head.
pub fn forward(params: &ParamVector, obs: &[f64]) -> Result<Vec<f64>> {
    let spec = params.spec();
    check_len("observation", spec.input_dim(), obs.len())?;
    let mut trace = Trace::new(spec);
    forward_into(spec, params.weights(), obs, &mut trace);
    let mut out = trace.output().to_vec();
    out.extend_from_slice(params.log_std());
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("forward output"));
    }
    Ok(out)
}

/// Inputs paired with upstream gradients on the flat forward output.
#[derive(Debug, Clone, Default)]
pub struct GradBatch {
    pub inputs: Vec<Vec<f64>>,
    pub upstream: Vec<Vec<f64>>,
}

impl GradBatch {
    pub fn push(&mut self, input: Vec<f64>, upstream: Vec<f64>) {
        self.inputs.push(input);
        self.upstream.push(upstream);
    }
}

/// `∂(Σ_samples upstream · forward(params, input)) / ∂params`.
pub fn backward(params: &ParamVector, batch: &GradBatch) -> Result<Vec<f64>> {
    let spec = params.spec();
    check_len("gradient batch", batch.inputs.len(), batch.upstream.len())?;
    let mut grad = vec![0.0; params.len()];
    let mut trace = Trace::new(spec);
    let n_out = spec.output_dim();
    let weight_count = spec.weight_count();
    for (input, upstream) in batch.inputs.iter().zip(&batch.upstream) {
        check_len("observation", spec.input_dim(), input.len())?;
        check_len("upstream gradient", spec.forward_len(), upstream.len())?;
        forward_into(spec, params.weights(), input, &mut trace);
        backward_into(
            spec,
            params.weights(),
            &mut trace,
            &upstream[..n_out],
            &mut grad[..weight_count],
            None,
        );
        for (g, u) in grad[weight_count..].iter_mut().zip(&upstream[n_out..]) {
            *g += u;
        }
    }
    Ok(grad)
}
