//! Core constrained-MDP abstractions: the environment behavioral contract,
//! trajectories, rollouts, and return/cost accounting.
//!
//! Accounting is undiscounted and finite-horizon: an episode is a sequence of
//! at most `H` steps, its return is the plain sum of rewards and its cost the
//! plain sum of (non-negative) per-step costs. Agents are free to discount
//! internally for bootstrapping; the evaluation metric never does.

use std::io::Write;

use thiserror::Error;

use crate::Real;

/// Static description of a constrained MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct CmdpSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    /// Episode horizon `H` in steps.
    pub horizon: usize,
    /// Cumulative cost budget `C`.
    pub budget: Real,
    /// Range `(r_min, r_max)` containing every reward the environment emits.
    pub reward_range: (Real, Real),
    pub deterministic: bool,
}

impl CmdpSpec {
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        horizon: usize,
        budget: Real,
        reward_range: (Real, Real),
        deterministic: bool,
    ) -> Self {
        assert!(state_dim > 0, "state_dim must be positive");
        assert!(action_dim > 0, "action_dim must be positive");
        assert!(budget >= 0.0, "budget must be non-negative, got {budget}");
        assert!(
            reward_range.0 <= reward_range.1,
            "reward range must satisfy r_min <= r_max, got {reward_range:?}"
        );
        Self {
            state_dim,
            action_dim,
            horizon,
            budget,
            reward_range,
            deterministic,
        }
    }
}

/// Result of a single environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: Vec<Real>,
    pub reward: Real,
    /// Non-negative per-step cost.
    pub cost: Real,
    pub done: bool,
    /// True iff this step's cost pushed the episode over its permitted budget.
    pub violated: bool,
}

/// Behavioral contract shared by every environment in the crate.
///
/// `reset(seed)` starts a new episode from the initial-state distribution and
/// returns the first observation. Stochastic environments draw from an
/// internally-owned generator seeded by `reset`, so parallel instances never
/// share random state.
pub trait Env {
    fn spec(&self) -> &CmdpSpec;
    /// Dimension of the observation vector. Equals `spec().state_dim` unless a
    /// wrapper extends the state.
    fn obs_dim(&self) -> usize {
        self.spec().state_dim
    }
    fn action_dim(&self) -> usize {
        self.spec().action_dim
    }
    fn horizon(&self) -> usize {
        self.spec().horizon
    }
    fn reset(&mut self, seed: u64) -> Vec<Real>;
    fn step(&mut self, action: &[Real]) -> StepResult;
}

/// A policy maps observations to actions in `[-1, 1]^action_dim`.
pub trait Policy {
    fn action(&mut self, obs: &[Real]) -> Vec<Real>;
}

impl<F: FnMut(&[Real]) -> Vec<Real>> Policy for F {
    fn action(&mut self, obs: &[Real]) -> Vec<Real> {
        self(obs)
    }
}

/// One recorded environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajStep {
    pub state: Vec<Real>,
    pub action: Vec<Real>,
    pub reward: Real,
    pub cost: Real,
}

/// An episode: at most `H` recorded steps plus a terminal flag.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<TrajStep>,
    pub terminal: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn episodic_return(&self) -> Real {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn episodic_cost(&self) -> Real {
        self.steps.iter().map(|s| s.cost).sum()
    }

    /// Export as comma-separated values with header `t,state...,action...,reward,cost`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let (sd, ad) = self
            .steps
            .first()
            .map(|s| (s.state.len(), s.action.len()))
            .unwrap_or((0, 0));
        write!(w, "t")?;
        for i in 0..sd {
            write!(w, ",state{i}")?;
        }
        for i in 0..ad {
            write!(w, ",action{i}")?;
        }
        writeln!(w, ",reward,cost")?;
        for (t, s) in self.steps.iter().enumerate() {
            write!(w, "{t}")?;
            for v in &s.state {
                write!(w, ",{v}")?;
            }
            for v in &s.action {
                write!(w, ",{v}")?;
            }
            writeln!(w, ",{},{}", s.reward, s.cost)?;
        }
        Ok(())
    }
}

/// `(return, cost, length)` of a trajectory.
pub fn episodic_stats(traj: &Trajectory) -> (Real, Real, usize) {
    (traj.episodic_return(), traj.episodic_cost(), traj.len())
}

/// Affine observation rescaling `obs * scale + offset`, applied elementwise.
///
/// Function approximators condition far better on observations of unit
/// magnitude than on raw arena coordinates, so training wraps environments in
/// this before anything else. Rewards, costs, and actions are untouched.
pub struct ScaledObs<E: Env> {
    base: E,
    scale: Real,
    offset: Real,
}

impl<E: Env> ScaledObs<E> {
    pub fn new(base: E, scale: Real, offset: Real) -> Self {
        assert!(scale != 0.0 && scale.is_finite() && offset.is_finite());
        Self {
            base,
            scale,
            offset,
        }
    }

    pub fn base(&self) -> &E {
        &self.base
    }

    fn map(&self, obs: &mut [Real]) {
        for x in obs {
            *x = *x * self.scale + self.offset;
        }
    }
}

impl<E: Env> Env for ScaledObs<E> {
    fn spec(&self) -> &CmdpSpec {
        self.base.spec()
    }

    fn obs_dim(&self) -> usize {
        self.base.obs_dim()
    }

    fn reset(&mut self, seed: u64) -> Vec<Real> {
        let mut obs = self.base.reset(seed);
        self.map(&mut obs);
        obs
    }

    fn step(&mut self, action: &[Real]) -> StepResult {
        let mut res = self.base.step(action);
        self.map(&mut res.next_state);
        res
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RolloutError {
    #[error("policy emitted a non-finite action at step {step}: {action:?}")]
    NonFiniteAction { step: usize, action: Vec<Real> },
    #[error("max_steps {max_steps} exceeds environment horizon {horizon}")]
    HorizonExceeded { max_steps: usize, horizon: usize },
}

/// Run `policy` in `env` for up to `max_steps` steps after `reset(rng_seed)`.
///
/// Identical seeds produce identical trajectories on deterministic
/// environments with deterministic policies.
pub fn rollout<E: Env, P: Policy>(
    policy: &mut P,
    env: &mut E,
    max_steps: usize,
    rng_seed: u64,
) -> Result<Trajectory, RolloutError> {
    if max_steps > env.horizon() {
        return Err(RolloutError::HorizonExceeded {
            max_steps,
            horizon: env.horizon(),
        });
    }
    let mut traj = Trajectory::default();
    let mut obs = env.reset(rng_seed);
    for step in 0..max_steps {
        let action = policy.action(&obs);
        if action.iter().any(|a| !a.is_finite()) {
            return Err(RolloutError::NonFiniteAction { step, action });
        }
        let res = env.step(&action);
        traj.steps.push(TrajStep {
            state: obs,
            action,
            reward: res.reward,
            cost: res.cost,
        });
        obs = res.next_state;
        if res.done {
            traj.terminal = true;
            break;
        }
    }
    Ok(traj)
}
