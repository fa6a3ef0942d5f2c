//! The early-terminated wrapper: turns any constrained environment into an
//! unconstrained one by ending the episode as soon as the cumulative cost
//! exceeds the permitted budget, paying a termination reward `r_e` and
//! absorbing into a terminal state `s_e` from then on.
//!
//! Three modes are supported. `Binary` and `Tightened` both use an effective
//! budget of zero (the latter is the budget-task-as-binary-task
//! approximation), while `BudgetExtended` keeps the base budget and extends
//! the observation with the normalized remaining budget and remaining time.

use crate::cmdp::{CmdpSpec, Env, StepResult};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtMode {
    /// Constraint "never incur any cost": effective budget 0, plain state.
    Binary,
    /// Keep the base budget; observation is extended with budget/time left.
    BudgetExtended,
    /// Treat a budget task as a binary one: effective budget 0 regardless of
    /// the base budget.
    Tightened,
}

/// How the violating step's reward is formed.
///
/// `Replace` emits `r_e` alone on the violating step, matching the wrapped
/// reward definition `r' = r·1(b <= C) + r_e·1(b > C)` with the post-step
/// cumulative cost. `Additive` emits `r + r_e`, matching the training-loop
/// rule "r <- r + r_e if c > 0". Both absorb with reward 0 afterwards, so the
/// penalty is never double-counted by fixed-length rollouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationReward {
    Replace,
    Additive,
}

/// State extension used in `BudgetExtended` mode, normalized to `[0, 1]`
/// (with the convention `0/0 = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedState {
    pub budget_left: Real,
    pub time_left: Real,
}

impl ExtendedState {
    pub fn new(budget: Real, spent: Real, horizon: usize, t: usize) -> Self {
        let norm = |num: Real, den: Real| if den == 0.0 { 0.0 } else { num / den };
        Self {
            budget_left: norm((budget - spent).max(0.0), budget),
            time_left: norm((horizon - t.min(horizon)) as Real, horizon as Real),
        }
    }
}

/// Early-terminated wrapper around a base environment.
pub struct EtEnv<E: Env> {
    base: E,
    pub mode: EtMode,
    pub r_e: Real,
    pub violation: ViolationReward,
    /// Running cumulative cost within the current episode.
    spent: Real,
    t: usize,
    absorbing: bool,
}

/// Wrap `base_env` with termination reward `r_e` (replace semantics).
pub fn wrap<E: Env>(base_env: E, mode: EtMode, r_e: Real) -> EtEnv<E> {
    EtEnv::new(base_env, mode, r_e, ViolationReward::Replace)
}

impl<E: Env> EtEnv<E> {
    pub fn new(base: E, mode: EtMode, r_e: Real, violation: ViolationReward) -> Self {
        assert!(r_e.is_finite(), "termination reward must be finite");
        Self {
            base,
            mode,
            r_e,
            violation,
            spent: 0.0,
            t: 0,
            absorbing: false,
        }
    }

    pub fn base(&self) -> &E {
        &self.base
    }

    pub fn base_mut(&mut self) -> &mut E {
        &mut self.base
    }

    /// Effective budget: 0 in `Binary`/`Tightened`, base `C` otherwise.
    pub fn effective_budget(&self) -> Real {
        match self.mode {
            EtMode::Binary | EtMode::Tightened => 0.0,
            EtMode::BudgetExtended => self.base.spec().budget,
        }
    }

    pub fn cumulative_cost(&self) -> Real {
        self.spent
    }

    pub fn is_absorbing(&self) -> bool {
        self.absorbing
    }

    fn observe(&self, base_state: Vec<Real>) -> Vec<Real> {
        match self.mode {
            EtMode::Binary | EtMode::Tightened => base_state,
            EtMode::BudgetExtended => {
                let ext = ExtendedState::new(
                    self.effective_budget(),
                    self.spent,
                    self.base.horizon(),
                    self.t,
                );
                let mut obs = base_state;
                obs.push(ext.budget_left);
                obs.push(ext.time_left);
                obs
            }
        }
    }

    /// The absorbing state `s_e`, represented as the all-zero observation.
    fn absorbing_state(&self) -> Vec<Real> {
        vec![0.0; self.obs_dim()]
    }
}

impl<E: Env> Env for EtEnv<E> {
    fn spec(&self) -> &CmdpSpec {
        self.base.spec()
    }

    fn obs_dim(&self) -> usize {
        match self.mode {
            EtMode::Binary | EtMode::Tightened => self.base.obs_dim(),
            EtMode::BudgetExtended => self.base.obs_dim() + 2,
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<Real> {
        self.spent = 0.0;
        self.t = 0;
        self.absorbing = false;
        let s = self.base.reset(seed);
        self.observe(s)
    }

    fn step(&mut self, action: &[Real]) -> StepResult {
        if self.absorbing {
            // Stepping past termination is not an error: fixed-length rollout
            // drivers rely on the absorbing self-loop.
            return StepResult {
                next_state: self.absorbing_state(),
                reward: 0.0,
                cost: 0.0,
                done: true,
                violated: false,
            };
        }
        let res = self.base.step(action);
        self.t += 1;
        self.spent += res.cost;
        // Violation check uses the post-step cumulative cost; b == C exactly
        // is still within budget.
        if self.spent > self.effective_budget() {
            self.absorbing = true;
            let reward = match self.violation {
                ViolationReward::Replace => self.r_e,
                ViolationReward::Additive => res.reward + self.r_e,
            };
            StepResult {
                next_state: self.absorbing_state(),
                reward,
                cost: res.cost,
                done: true,
                violated: true,
            }
        } else {
            StepResult {
                next_state: self.observe(res.next_state),
                violated: false,
                ..res
            }
        }
    }
}

/// Termination reward guaranteeing that the ET-MDP optimum coincides with the
/// constrained optimum: any `r_e <= H·(r_min - r_max) - 1` makes every
/// violating trajectory's total return strictly worse than every feasible one.
pub fn safe_re_threshold(spec: &CmdpSpec) -> Real {
    spec.horizon as Real * (spec.reward_range.0 - spec.reward_range.1) - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmdp::rollout;
    use crate::envs::gather::GatherEnv;
    use crate::envs::maze::MazeEnv;

    #[test]
    fn threshold_formula() {
        let spec = CmdpSpec::new(2, 2, 32, 0.0, (-0.1, 30.0), true);
        assert!((safe_re_threshold(&spec) - (32.0 * (-30.1) - 1.0)).abs() < 1e-12);
        assert!((safe_re_threshold(&spec) - (-964.2)).abs() < 1e-9);
        let degenerate = CmdpSpec::new(1, 1, 1, 0.0, (0.0, 0.0), true);
        assert_eq!(safe_re_threshold(&degenerate), -1.0);
    }

    #[test]
    #[should_panic(expected = "finite")]
    fn non_finite_re_rejected() {
        let _ = wrap(MazeEnv::level(1), EtMode::Binary, Real::NAN);
    }

    #[test]
    fn wrap_observation_dims() {
        let binary = wrap(MazeEnv::level(1), EtMode::Binary, -10.0);
        assert_eq!(binary.obs_dim(), 2);
        let tight = wrap(MazeEnv::level(1), EtMode::Tightened, -10.0);
        assert_eq!(tight.obs_dim(), 2);
        let ext = wrap(MazeEnv::level(1), EtMode::BudgetExtended, -10.0);
        assert_eq!(ext.obs_dim(), 4);
    }

    #[test]
    fn lava_step_replaces_reward_and_terminates() {
        // Level-3 ring: walking straight up from the center crosses lava.
        let mut env = wrap(MazeEnv::level(3), EtMode::Binary, -10.0);
        let mut obs = env.reset(0);
        for _ in 0..8 {
            let res = env.step(&[0.0, 1.0]);
            if res.violated {
                assert_eq!(res.reward, -10.0);
                assert!(res.done);
                assert_eq!(res.next_state, vec![0.0, 0.0]);
                return;
            }
            obs = res.next_state;
        }
        panic!("never crossed lava from {obs:?}");
    }

    #[test]
    fn additive_mode_adds_to_base_reward() {
        let mut env = EtEnv::new(
            MazeEnv::level(3),
            EtMode::Binary,
            -10.0,
            ViolationReward::Additive,
        );
        env.reset(0);
        for _ in 0..8 {
            let res = env.step(&[0.0, 1.0]);
            if res.violated {
                assert!((res.reward - (-0.1 - 10.0)).abs() < 1e-12);
                return;
            }
        }
        panic!("never crossed lava");
    }

    #[test]
    fn absorbing_steps_pay_zero() {
        let mut env = wrap(MazeEnv::level(3), EtMode::Binary, -10.0);
        env.reset(0);
        while !env.step(&[0.0, 1.0]).violated {}
        for _ in 0..5 {
            let res = env.step(&[0.3, -0.2]);
            assert_eq!(res.reward, 0.0);
            assert_eq!(res.cost, 0.0);
            assert!(res.done);
            assert!(!res.violated);
            assert_eq!(res.next_state, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn cost_free_trajectory_matches_base() {
        // Walking straight right in level 1 stays in the corridor.
        let mut base = MazeEnv::level(1);
        let mut wrapped = wrap(MazeEnv::level(1), EtMode::Binary, -10.0);
        let mut p1 = |_: &[Real]| vec![1.0, 0.0];
        let mut p2 = |_: &[Real]| vec![1.0, 0.0];
        let a = rollout(&mut p1, &mut base, 32, 0).unwrap();
        let b = rollout(&mut p2, &mut wrapped, 32, 0).unwrap();
        assert_eq!(a.episodic_cost(), 0.0);
        assert_eq!(a, b);
    }

    #[test]
    fn budget_boundary_is_inclusive() {
        // Gather env with budget 1: the first bomb contact (cost 1 == C) must
        // not terminate, the second must.
        let mut env = wrap(GatherEnv::new(1.0), EtMode::BudgetExtended, -1.0);
        env.reset(3);
        let mut contacts = 0;
        let mut rng_dir = [1.0, 0.0];
        for step in 0..640 {
            // sweep back and forth to hit bombs eventually
            if step % 64 == 0 {
                rng_dir = [[1.0, 0.3], [-1.0, -0.3], [0.6, -1.0], [-0.6, 1.0]][(step / 64) % 4];
            }
            let res = env.step(&rng_dir);
            if res.cost > 0.0 {
                contacts += 1;
                if contacts == 1 {
                    assert!(!res.done, "cost exactly at budget must not terminate");
                } else {
                    assert!(res.violated && res.done);
                    return;
                }
            }
            if res.done {
                env.reset(3);
                contacts = 0; // the spent budget resets with the episode
            }
        }
        // Not all sweeps hit two bombs; that's fine as long as the first
        // contact check above ran.
        assert!(contacts <= 1);
    }

    #[test]
    fn tightened_terminates_on_first_cost() {
        let mut env = wrap(GatherEnv::new(1.0), EtMode::Tightened, -1.0);
        env.reset(3);
        for step in 0..640 {
            let dir = [[1.0, 0.3], [-1.0, -0.3], [0.6, -1.0], [-0.6, 1.0]][(step / 64) % 4];
            let res = env.step(&dir);
            if res.cost > 0.0 {
                assert!(res.violated && res.done);
                return;
            }
            if res.done {
                env.reset(3);
            }
        }
        panic!("sweep never touched a bomb");
    }

    #[test]
    fn extended_state_normalization() {
        let ext = ExtendedState::new(25.0, 5.0, 100, 40);
        assert!((ext.budget_left - 0.8).abs() < 1e-12);
        assert!((ext.time_left - 0.6).abs() < 1e-12);
        let zero = ExtendedState::new(0.0, 0.0, 0, 0);
        assert_eq!(zero.budget_left, 0.0);
        assert_eq!(zero.time_left, 0.0);
    }
}
