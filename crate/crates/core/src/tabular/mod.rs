//! Exact oracles for small deterministic tabular CMDPs.
//!
//! Costs follow the invalid-state special case: `c(s, a) = 1` iff the
//! transition enters the absorbing invalid class. The constrained and
//! early-terminated optima are computed by finite-horizon dynamic programming
//! over the product of state and spent budget, which is exact for integer
//! costs.

pub mod learner;

pub use learner::{optimistic_learner, sample_savings, LearnerView, RegretCurve, RegretPoint};

use rand::Rng;

use crate::et::ViolationReward;
use crate::Real;

/// A deterministic finite MDP with an absorbing invalid class.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// `transition[s][a]` is the successor state.
    pub transition: Vec<Vec<usize>>,
    /// `reward[s][a]`.
    pub reward: Vec<Vec<Real>>,
    /// Membership in the invalid class `S_c`.
    pub invalid: Vec<bool>,
    pub horizon: usize,
}

impl TabularMdp {
    /// Cost rule of the special case: 1 iff the step enters `S_c`.
    pub fn cost(&self, s: usize, a: usize) -> usize {
        usize::from(self.invalid[self.transition[s][a]])
    }

    pub fn n_invalid(&self) -> usize {
        self.invalid.iter().filter(|v| **v).count()
    }

    pub fn reward_range(&self) -> (Real, Real) {
        let mut lo = Real::INFINITY;
        let mut hi = Real::NEG_INFINITY;
        for row in &self.reward {
            for &r in row {
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        (lo, hi)
    }

    /// `r_e` below which every violating trajectory is strictly dominated.
    pub fn safe_re_threshold(&self) -> Real {
        let (lo, hi) = self.reward_range();
        self.horizon as Real * (lo - hi) - 1.0
    }

    /// Panics if tables are out of range or `S_c` is not absorbing.
    pub fn validate(&self) {
        assert_eq!(self.transition.len(), self.n_states);
        assert_eq!(self.reward.len(), self.n_states);
        assert_eq!(self.invalid.len(), self.n_states);
        for s in 0..self.n_states {
            assert_eq!(self.transition[s].len(), self.n_actions);
            assert_eq!(self.reward[s].len(), self.n_actions);
            for a in 0..self.n_actions {
                let t = self.transition[s][a];
                assert!(t < self.n_states, "transition out of range at ({s}, {a})");
                if self.invalid[s] {
                    assert!(self.invalid[t], "invalid class must be absorbing: ({s}, {a}) -> {t}");
                }
            }
        }
    }

    /// Random instance: state 0 is the start, the last `n_invalid` states form
    /// the absorbing invalid class, and action 0 from every valid state stays
    /// valid so a feasible trajectory always exists. Rewards are uniform in
    /// `[0, 1]`; when `explorable_rewards` is set, steps entering or inside
    /// `S_c` pay 0, which makes violation strictly dominated.
    pub fn random<R: Rng>(
        rng: &mut R,
        n_states: usize,
        n_actions: usize,
        horizon: usize,
        n_invalid: usize,
        explorable_rewards: bool,
    ) -> Self {
        assert!(n_invalid < n_states);
        let n_valid = n_states - n_invalid;
        let mut transition = vec![vec![0usize; n_actions]; n_states];
        let mut reward = vec![vec![0.0; n_actions]; n_states];
        let invalid: Vec<bool> = (0..n_states).map(|s| s >= n_valid).collect();
        for s in 0..n_states {
            for a in 0..n_actions {
                let t = if invalid[s] {
                    n_valid + rng.gen_range(0..n_invalid.max(1))
                } else if a == 0 {
                    rng.gen_range(0..n_valid)
                } else {
                    rng.gen_range(0..n_states)
                };
                transition[s][a] = t;
                let suppress = explorable_rewards && (invalid[s] || invalid[t]);
                reward[s][a] = if suppress { 0.0 } else { rng.gen_range(0.0..1.0) };
            }
        }
        let mdp = Self {
            n_states,
            n_actions,
            transition,
            reward,
            invalid,
            horizon,
        };
        mdp.validate();
        mdp
    }
}

/// Finite-horizon value iteration: `V[t][s]` with `V[H][s] = 0` and the greedy
/// policy with ties broken towards the lowest action index.
pub fn value_iteration(mdp: &TabularMdp, horizon: usize) -> (Vec<Vec<Real>>, Vec<Vec<usize>>) {
    let mut values = vec![vec![0.0; mdp.n_states]; horizon + 1];
    let mut policy = vec![vec![0usize; mdp.n_states]; horizon];
    for t in (0..horizon).rev() {
        for s in 0..mdp.n_states {
            let mut best = Real::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..mdp.n_actions {
                let q = mdp.reward[s][a] + values[t + 1][mdp.transition[s][a]];
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            values[t][s] = best;
            policy[t][s] = best_a;
        }
    }
    (values, policy)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstrainedSolution {
    pub value: Real,
    /// False when no trajectory from the start satisfies the budget; `value`
    /// then reports the best return truncated at the forced violation.
    pub feasible: bool,
}

/// Exact constrained optimum `V*_c` by DP over `(state, spent budget)`.
pub fn constrained_optimum(
    mdp: &TabularMdp,
    start: usize,
    budget: usize,
    horizon: usize,
) -> ConstrainedSolution {
    // values[t][s][b]: best return from (s, b) at time t among continuations
    // that never exceed the budget; None when no such continuation exists.
    let mut next: Vec<Vec<Option<Real>>> = vec![vec![Some(0.0); budget + 1]; mdp.n_states];
    for _ in 0..horizon {
        let mut cur: Vec<Vec<Option<Real>>> = vec![vec![None; budget + 1]; mdp.n_states];
        for s in 0..mdp.n_states {
            for b in 0..=budget {
                let mut best: Option<Real> = None;
                for a in 0..mdp.n_actions {
                    let nb = b + mdp.cost(s, a);
                    if nb > budget {
                        continue;
                    }
                    if let Some(v) = next[mdp.transition[s][a]][nb] {
                        let q = mdp.reward[s][a] + v;
                        if best.is_none() || q > best.unwrap() {
                            best = Some(q);
                        }
                    }
                }
                cur[s][b] = best;
            }
        }
        next = cur;
    }
    match next[start][0] {
        Some(value) => ConstrainedSolution {
            value,
            feasible: true,
        },
        None => ConstrainedSolution {
            value: et_optimum(mdp, start, budget, 0.0, ViolationReward::Additive, horizon),
            feasible: false,
        },
    }
}

/// Optimal value of the early-terminated MDP: DP over `(state, spent budget)`
/// where exceeding the budget pays the termination reward and absorbs.
pub fn et_optimum(
    mdp: &TabularMdp,
    start: usize,
    budget: usize,
    r_e: Real,
    violation: ViolationReward,
    horizon: usize,
) -> Real {
    et_plan(mdp, budget, r_e, violation, horizon).values[0][start][0]
}

pub struct EtPlan {
    /// `values[t][s][b]`.
    pub values: Vec<Vec<Vec<Real>>>,
    /// Greedy action per `(t, s, b)`, lowest index on ties.
    pub policy: Vec<Vec<Vec<usize>>>,
}

pub fn et_plan(
    mdp: &TabularMdp,
    budget: usize,
    r_e: Real,
    violation: ViolationReward,
    horizon: usize,
) -> EtPlan {
    let mut values = vec![vec![vec![0.0; budget + 1]; mdp.n_states]; horizon + 1];
    let mut policy = vec![vec![vec![0usize; budget + 1]; mdp.n_states]; horizon];
    for t in (0..horizon).rev() {
        for s in 0..mdp.n_states {
            for b in 0..=budget {
                let mut best = Real::NEG_INFINITY;
                let mut best_a = 0;
                for a in 0..mdp.n_actions {
                    let nb = b + mdp.cost(s, a);
                    let q = if nb > budget {
                        match violation {
                            ViolationReward::Additive => mdp.reward[s][a] + r_e,
                            ViolationReward::Replace => r_e,
                        }
                    } else {
                        mdp.reward[s][a] + values[t + 1][mdp.transition[s][a]][nb]
                    };
                    if q > best {
                        best = q;
                        best_a = a;
                    }
                }
                values[t][s][b] = best;
                policy[t][s][b] = best_a;
            }
        }
    }
    EtPlan { values, policy }
}

/// Roll the greedy ET-optimal policy out from `start`; returns its ET value
/// and its episodic cost (number of unit costs incurred, counting the
/// violating step).
pub fn et_policy_rollout(
    mdp: &TabularMdp,
    start: usize,
    budget: usize,
    r_e: Real,
    violation: ViolationReward,
    horizon: usize,
) -> (Real, usize) {
    let plan = et_plan(mdp, budget, r_e, violation, horizon);
    let mut s = start;
    let mut b = 0usize;
    let mut value = 0.0;
    let mut cost = 0usize;
    for t in 0..horizon {
        let a = plan.policy[t][s][b];
        let c = mdp.cost(s, a);
        cost += c;
        b += c;
        if b > budget {
            value += match violation {
                ViolationReward::Additive => mdp.reward[s][a] + r_e,
                ViolationReward::Replace => r_e,
            };
            break;
        }
        value += mdp.reward[s][a];
        s = mdp.transition[s][a];
    }
    (value, cost)
}

/// Analytic worst-case regret ratio `|S| / (|S| - |S_c| + 1)`.
pub fn corollary_ratio(n_states: usize, n_invalid: usize) -> Real {
    assert!(n_invalid < n_states);
    n_states as Real / (n_states - n_invalid + 1) as Real
}
