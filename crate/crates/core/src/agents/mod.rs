//! Off-policy agents: a twin-critic deterministic-policy-gradient baseline,
//! its recurrent-context variant, and a Lagrangian-penalty variant, sharing a
//! replay buffer that stores context windows alongside transitions.

pub mod lagrangian;
pub mod replay;
pub mod td3;
pub mod trainer;

pub use lagrangian::{lagrangian_step, LagrangianTd3};
pub use replay::{ContextWindow, ReplayBuffer, ReplayRecord};
pub use td3::{Td3Agent, TrainReport};
pub use trainer::{
    eval_episode, train, write_curves_csv, write_losses_csv, EvalRow, Learner, LossRow,
    TrainOptions, TrainOutcome,
};

use crate::Real;

/// Hyper-parameters shared by every agent variant.
#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub gamma: Real,
    pub tau: Real,
    pub policy_delay: u64,
    /// Std-dev of the Gaussian exploration noise added to actions.
    pub expl_noise: Real,
    /// Std-dev of the target-policy smoothing noise.
    pub target_noise: Real,
    /// Clip bound for the target-policy smoothing noise.
    pub noise_clip: Real,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Hidden widths of the actor and critic networks.
    pub hidden: Vec<usize>,
    /// Recurrent context width; 0 disables the context path entirely,
    /// recovering the plain twin-critic agent.
    pub context_hidden: usize,
    /// Number of (state, action, reward) triples in the context window.
    pub context_len: usize,
    pub lr_actor: Real,
    pub lr_critic: Real,
    pub lr_context: Real,
    /// Termination reward added to the base reward on costly steps.
    pub r_e: Real,
    /// Global-norm gradient clip per network.
    pub grad_clip: Real,
    /// Per-episode multiplier learning rate for the Lagrangian variant.
    pub lr_lambda: Real,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            policy_delay: 2,
            expl_noise: 0.1,
            target_noise: 0.2,
            noise_clip: 0.5,
            batch_size: 256,
            buffer_capacity: 1_000_000,
            hidden: vec![256, 256, 256],
            context_hidden: 30,
            context_len: 3,
            lr_actor: 3e-4,
            lr_critic: 3e-4,
            lr_context: 3e-4,
            r_e: -10.0,
            grad_clip: 10.0,
            lr_lambda: 0.01,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) {
        assert!(self.gamma >= 0.0 && self.gamma <= 1.0, "gamma in [0, 1]");
        assert!(self.tau > 0.0 && self.tau <= 1.0, "tau in (0, 1]");
        assert!(self.policy_delay >= 1, "policy delay must be >= 1");
        assert!(self.batch_size > 0 && self.buffer_capacity >= self.batch_size);
        assert!(self.context_len >= 1, "context window needs at least 1 slot");
        assert!(!self.hidden.is_empty(), "need at least one hidden layer");
        assert!(
            self.expl_noise >= 0.0
                && self.target_noise >= 0.0
                && self.noise_clip >= 0.0
                && self.lr_actor > 0.0
                && self.lr_critic > 0.0
                && self.lr_context > 0.0
                && self.grad_clip > 0.0
                && self.lr_lambda >= 0.0
        );
    }

    /// Plain twin-critic agent: identical except the context path is disabled.
    pub fn without_context(mut self) -> Self {
        self.context_hidden = 0;
        self
    }
}
