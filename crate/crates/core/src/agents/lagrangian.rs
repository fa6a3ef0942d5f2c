//! Lagrangian-penalty baseline: trains the same twin-critic agent on the
//! shaped reward `r - lambda * c`, with a per-episode dual update of the
//! multiplier from the episodic cost.

use super::td3::Td3Agent;
use crate::Real;

/// Dual ascent on the multiplier: `lambda' = max(0, lambda + lr * (J_c - C))`.
pub fn lagrangian_step(lambda: Real, episodic_cost: Real, budget: Real, lr: Real) -> Real {
    (lambda + lr * (episodic_cost - budget)).max(0.0)
}

pub struct LagrangianTd3 {
    pub agent: Td3Agent,
    pub lambda: Real,
    /// Cost budget `C` the dual update steers the episodic cost toward.
    pub budget: Real,
}

impl LagrangianTd3 {
    pub fn new(agent: Td3Agent, budget: Real) -> Self {
        Self {
            agent,
            lambda: 0.0,
            budget,
        }
    }

    /// Store a transition with the shaped reward `r - lambda * c` under the
    /// current multiplier. No termination reward is applied: the baseline
    /// runs on the unwrapped environment.
    pub fn observe_shaped(
        &mut self,
        state: &[Real],
        action: &[Real],
        reward: Real,
        cost: Real,
        next_state: &[Real],
        done: bool,
    ) {
        let shaped = reward - self.lambda * cost;
        self.agent.observe(state, action, shaped, 0.0, next_state, done);
    }

    pub fn end_episode(&mut self, episodic_cost: Real) {
        self.lambda = lagrangian_step(
            self.lambda,
            episodic_cost,
            self.budget,
            self.agent.cfg.lr_lambda,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_at_budget_leaves_lambda_unchanged() {
        assert_eq!(lagrangian_step(0.3, 2.0, 2.0, 0.01), 0.3);
    }

    #[test]
    fn cost_over_budget_raises_lambda_and_never_goes_negative() {
        assert!(lagrangian_step(0.3, 3.0, 2.0, 0.01) > 0.3);
        assert_eq!(lagrangian_step(0.0, 0.0, 5.0, 0.01), 0.0);
    }

    #[test]
    fn one_step_two_action_saddle_point() {
        // Action A: r = 1, c = 1. Action B: r = 0.5, c = 0. Budget C = 0.
        // Greedy on the shaped reward picks A while lambda < 0.5 (incurring
        // cost and pushing lambda up) and B afterwards, so the dual iterates
        // cross 0.5 and then stay fixed at a feasible policy.
        let mut lambda: Real = 0.0;
        let lr = 0.01;
        let mut last_picked_b = false;
        for _ in 0..200 {
            let shaped_a = 1.0 - lambda * 1.0;
            let shaped_b = 0.5;
            last_picked_b = shaped_b > shaped_a;
            let episodic_cost = if last_picked_b { 0.0 } else { 1.0 };
            lambda = lagrangian_step(lambda, episodic_cost, 0.0, lr);
        }
        assert!(lambda > 0.5, "lambda = {lambda}");
        assert!(last_picked_b);
    }
}
