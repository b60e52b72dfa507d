//! Small feedforward networks: forward pass, reverse-mode gradients,
//! observation normalization and action sampling.

mod action;
mod mlp;
mod normalizer;
mod params;
mod spec;

pub use action::{
    argmax, categorical_entropy, categorical_log_prob, gaussian_entropy, gaussian_log_prob,
    log_sum_exp, sample_action, sample_categorical, select_discrete, softmax, ActionMode,
    ActionSpace,
};
pub use mlp::{backward, backward_into, forward, forward_into, GradBatch, Trace};
pub use normalizer::ObsNormalizer;
pub use params::{init_mlp, ParamVector, OUTPUT_GAIN};
pub use spec::{Activation, MlpSpec};
