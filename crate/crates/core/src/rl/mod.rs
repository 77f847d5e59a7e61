//! Deep Q-learning: network, replay pool, agent, training loop and
//! checkpoints.

pub mod checkpoint;
pub mod dqn;
pub mod network;
pub mod replay;
pub mod trainer;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use dqn::DqnAgent;
pub use network::{argmax, Experience, Gradients, QNetwork};
pub use replay::{FlushPolicy, ReplayBuffer};
pub use trainer::{compute_upper_bound, evaluate, write_curve_csv, EpochMetrics, Trainer, CURVE_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarmStart {
    Off,
    /// Pre-fill the pool with episodes driven by the request-basics rule
    /// policy.
    #[default]
    RuleFill,
}

impl fmt::Display for WarmStart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WarmStart::Off => "off",
            WarmStart::RuleFill => "rule-fill",
        })
    }
}

impl FromStr for WarmStart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" | "0" => Ok(WarmStart::Off),
            "rule-fill" | "rule" | "1" => Ok(WarmStart::RuleFill),
            other => Err(Error::Config(format!("unknown warm start mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub gamma: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub num_batches: usize,
    /// Dialogues simulated per epoch (N).
    pub simulation_epoch_size: usize,
    pub epochs: usize,
    pub success_rate_threshold: f64,
    pub buffer_capacity: usize,
    pub learning_rate: f64,
    pub hidden_width: usize,
    /// Gradient-norm clip; zero disables clipping.
    pub grad_clip: f64,
    pub warm_start: WarmStart,
    /// Upper limit on warm-start episodes when the pool fills slowly.
    pub warm_start_episodes: usize,
    pub eval_episodes: usize,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            epsilon: 0.1,
            batch_size: 16,
            num_batches: 100,
            simulation_epoch_size: 100,
            epochs: 100,
            success_rate_threshold: 0.30,
            buffer_capacity: 1000,
            learning_rate: 0.001,
            hidden_width: 80,
            grad_clip: 1.0,
            warm_start: WarmStart::RuleFill,
            warm_start_episodes: 120,
            eval_episodes: 50,
            seed: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(0.0..1.0).contains(&self.gamma) {
            return fail("gamma must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return fail("epsilon must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.success_rate_threshold) {
            return fail("success_rate_threshold must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.num_batches == 0 {
            return fail("batch_size and num_batches must be positive");
        }
        if self.buffer_capacity == 0 || self.hidden_width == 0 || self.eval_episodes == 0 {
            return fail("buffer_capacity, hidden_width and eval_episodes must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail("learning_rate must be a positive number");
        }
        if !(self.grad_clip.is_finite() && self.grad_clip >= 0.0) {
            return fail("grad_clip must be non-negative");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainerConfig::default().validate().unwrap();
        let bad = TrainerConfig {
            gamma: 1.0,
            ..TrainerConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainerConfig {
            learning_rate: 0.0,
            ..TrainerConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn warm_start_parses() {
        assert_eq!("rule-fill".parse::<WarmStart>().unwrap(), WarmStart::RuleFill);
        assert_eq!("off".parse::<WarmStart>().unwrap(), WarmStart::Off);
        assert!("maybe".parse::<WarmStart>().is_err());
        let json = serde_json::to_string(&WarmStart::RuleFill).unwrap();
        assert_eq!(json, "\"rule-fill\"");
    }
}
