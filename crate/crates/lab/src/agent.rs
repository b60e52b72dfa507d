//! Trained agents and learner checkpoints as versioned JSON files.

use std::fs;
use std::path::Path;

use evorl_core::env::EnvSpec;
use evorl_core::es::{EsConfig, EsState};
use evorl_core::nn::{ActionMode, ObsNormalizer, ParamVector};
use evorl_core::offpolicy::{SacState, Td3State};
use evorl_core::policy::{PolicyHead, PolicyRunner};
use evorl_core::ppo::PpoState;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::Algo;
use crate::error::{io_err, LabError, Result};

pub const FORMAT_VERSION: u32 = 1;

/// A policy ready for post-evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub algo: Algo,
    pub env: EnvSpec,
    pub policy: ParamVector,
    pub normalizer: ObsNormalizer,
    pub head: PolicyHead,
    /// Behavior (sampling) mode used while training. Post-evaluation acts
    /// deterministically unless asked to sample with this mode.
    pub training_mode: ActionMode,
    /// Generation or update the agent was picked at.
    pub picked_at: u64,
    /// Score that made it the best agent of its run; `None` for an
    /// untrained policy.
    pub score: Option<f64>,
}

impl Agent {
    pub fn runner(&self) -> Result<PolicyRunner<'_>> {
        let space = self.env.build().action_space();
        Ok(PolicyRunner::with_head(
            self.policy.spec(),
            self.policy.values(),
            space,
            &self.normalizer,
            self.head,
        )?)
    }

    /// Fail unless the agent's network fits `env`.
    pub fn check_env(&self, env: &EnvSpec) -> Result<()> {
        let probe = env.build();
        let spec = self.policy.spec();
        if spec.input_dim() != probe.observation_dim()
            || self.normalizer.dim() != probe.observation_dim()
        {
            return Err(LabError::Invalid(format!(
                "agent expects {} observations, {} provides {}",
                spec.input_dim(),
                env.id,
                probe.observation_dim()
            )));
        }
        let space = probe.action_space();
        PolicyRunner::with_head(
            spec,
            self.policy.values(),
            space,
            &self.normalizer,
            self.head,
        )
        .map_err(|e| LabError::Invalid(format!("agent does not fit {}: {e}", env.id)))?;
        Ok(())
    }
}

/// Full learner state at the end of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LearnerState {
    Es {
        config: EsConfig,
        mode: ActionMode,
        policy: evorl_core::nn::MlpSpec,
        state: EsState,
    },
    Ppo(PpoState),
    Td3(Td3State),
    Sac(SacState),
}

/// On-disk wrapper carrying the format version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<T> {
    pub version: u32,
    pub algo: Algo,
    pub env: EnvSpec,
    pub payload: T,
}

impl<T: Serialize> Checkpoint<T> {
    pub fn new(algo: Algo, env: EnvSpec, payload: T) -> Self {
        Self {
            version: FORMAT_VERSION,
            algo,
            env,
            payload,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

impl<T: DeserializeOwned> Checkpoint<T> {
    pub fn load(path: &Path) -> Result<Self> {
        let checkpoint: Self = read_json(path)?;
        if checkpoint.version != FORMAT_VERSION {
            return Err(LabError::Invalid(format!(
                "{}: format version {} is not supported (expected {FORMAT_VERSION})",
                path.display(),
                checkpoint.version
            )));
        }
        Ok(checkpoint)
    }
}

pub fn save_agent(path: &Path, agent: &Agent) -> Result<()> {
    Checkpoint::new(agent.algo, agent.env, agent.clone()).save(path)
}

pub fn load_agent(path: &Path) -> Result<Agent> {
    Ok(Checkpoint::<Agent>::load(path)?.payload)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| LabError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| LabError::Json {
        path: path.to_path_buf(),
        source,
    })
}
