//! The training loop: warmup with uniform actions, per-step agent updates,
//! periodic greedy evaluation on a fixed step grid, and CSV export of loss
//! and evaluation curves.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lagrangian::LagrangianTd3;
use super::replay::ContextWindow;
use super::td3::{Td3Agent, TrainReport};
use crate::cmdp::{Env, TrajStep, Trajectory};
use crate::Real;

/// Anything the training loop can drive.
pub trait Learner {
    fn act(&mut self, obs: &[Real], explore: bool) -> Vec<Real>;
    #[allow(clippy::too_many_arguments)]
    fn observe(
        &mut self,
        state: &[Real],
        action: &[Real],
        reward: Real,
        cost: Real,
        violated: bool,
        next_state: &[Real],
        done: bool,
    );
    /// Maintain the context window across an evaluation step without storing.
    fn update_context_only(
        &mut self,
        state: &[Real],
        action: &[Real],
        reward: Real,
        violated: bool,
        done: bool,
    );
    fn train_step(&mut self) -> Option<TrainReport>;
    fn end_episode(&mut self, episodic_cost: Real);
    fn context_state(&self) -> (ContextWindow, Option<Vec<Real>>);
    fn set_context_state(&mut self, window: ContextWindow, expected: Option<Vec<Real>>);
    fn reset_context(&mut self);
    fn lambda(&self) -> Real {
        0.0
    }
}

impl Learner for Td3Agent {
    fn act(&mut self, obs: &[Real], explore: bool) -> Vec<Real> {
        self.select_action(obs, explore)
    }

    fn observe(
        &mut self,
        state: &[Real],
        action: &[Real],
        reward: Real,
        _cost: Real,
        violated: bool,
        next_state: &[Real],
        done: bool,
    ) {
        Td3Agent::observe(
            self,
            state,
            action,
            reward,
            if violated { 1.0 } else { 0.0 },
            next_state,
            done,
        );
    }

    fn update_context_only(
        &mut self,
        state: &[Real],
        action: &[Real],
        reward: Real,
        violated: bool,
        done: bool,
    ) {
        Td3Agent::update_context_only(
            self,
            state,
            action,
            reward,
            if violated { 1.0 } else { 0.0 },
            done,
        );
    }

    fn train_step(&mut self) -> Option<TrainReport> {
        Td3Agent::train_step(self)
    }

    fn end_episode(&mut self, _episodic_cost: Real) {}

    fn context_state(&self) -> (ContextWindow, Option<Vec<Real>>) {
        Td3Agent::context_state(self)
    }

    fn set_context_state(&mut self, window: ContextWindow, expected: Option<Vec<Real>>) {
        Td3Agent::set_context_state(self, window, expected)
    }

    fn reset_context(&mut self) {
        Td3Agent::reset_context(self)
    }
}

impl Learner for LagrangianTd3 {
    fn act(&mut self, obs: &[Real], explore: bool) -> Vec<Real> {
        self.agent.select_action(obs, explore)
    }

    fn observe(
        &mut self,
        state: &[Real],
        action: &[Real],
        reward: Real,
        cost: Real,
        _violated: bool,
        next_state: &[Real],
        done: bool,
    ) {
        self.observe_shaped(state, action, reward, cost, next_state, done);
    }

    fn update_context_only(
        &mut self,
        state: &[Real],
        action: &[Real],
        reward: Real,
        _violated: bool,
        done: bool,
    ) {
        self.agent.update_context_only(state, action, reward, 0.0, done);
    }

    fn train_step(&mut self) -> Option<TrainReport> {
        self.agent.train_step()
    }

    fn end_episode(&mut self, episodic_cost: Real) {
        LagrangianTd3::end_episode(self, episodic_cost)
    }

    fn context_state(&self) -> (ContextWindow, Option<Vec<Real>>) {
        self.agent.context_state()
    }

    fn set_context_state(&mut self, window: ContextWindow, expected: Option<Vec<Real>>) {
        self.agent.set_context_state(window, expected)
    }

    fn reset_context(&mut self) {
        self.agent.reset_context()
    }

    fn lambda(&self) -> Real {
        self.lambda
    }
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub total_steps: usize,
    /// Steps driven by uniform random actions before training starts.
    pub warmup_steps: usize,
    /// Evaluation every this many environment steps (shared grid across seeds).
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub step: usize,
    pub mean_return: Real,
    pub mean_cost: Real,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossRow {
    pub step: usize,
    pub critic1_loss: Real,
    pub critic2_loss: Real,
    /// Most recent actor loss (0 before the first delayed update).
    pub actor_loss: Real,
    pub lambda: Real,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub eval: Vec<EvalRow>,
    pub losses: Vec<LossRow>,
    pub episodes: usize,
    pub env_steps: usize,
}

/// splitmix64, used to derive independent seeds for episodes and evaluation.
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn episode_seed(run_seed: u64, episode: usize) -> u64 {
    mix(run_seed ^ mix(episode as u64))
}

fn eval_seed(run_seed: u64, step: usize, episode: usize) -> u64 {
    mix(run_seed ^ 0x5EED_0EAA ^ mix(step as u64) ^ mix(0x1000 + episode as u64))
}

/// Run one greedy evaluation episode, preserving the learner's training-time
/// context across the call.
pub fn eval_episode<L: Learner, E: Env>(learner: &mut L, env: &mut E, seed: u64) -> Trajectory {
    let saved = learner.context_state();
    learner.reset_context();
    let mut traj = Trajectory::default();
    let mut obs = env.reset(seed);
    for _ in 0..env.horizon() {
        let action = learner.act(&obs, false);
        let res = env.step(&action);
        learner.update_context_only(&obs, &action, res.reward, res.violated, res.done);
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
    let (window, expected) = saved;
    learner.set_context_state(window, expected);
    traj
}

/// Train `learner` in `env` for `total_steps` environment steps, evaluating
/// greedily in `eval_env` every `eval_interval` steps.
pub fn train<L: Learner, E: Env>(
    learner: &mut L,
    env: &mut E,
    eval_env: &mut E,
    opts: &TrainOptions,
) -> TrainOutcome {
    assert!(opts.eval_interval > 0, "eval interval must be positive");
    let mut warmup_rng = ChaCha8Rng::seed_from_u64(mix(opts.seed ^ 0xAAAA));
    let action_dim = env.action_dim();
    let mut eval = Vec::new();
    let mut losses = Vec::new();
    let mut episode = 0usize;
    let mut obs = env.reset(episode_seed(opts.seed, episode));
    let mut ep_cost = 0.0;
    let mut last_actor_loss = 0.0;
    for step in 1..=opts.total_steps {
        let action = if step <= opts.warmup_steps {
            (0..action_dim)
                .map(|_| warmup_rng.gen_range(-1.0..1.0))
                .collect()
        } else {
            learner.act(&obs, true)
        };
        let res = env.step(&action);
        learner.observe(
            &obs,
            &action,
            res.reward,
            res.cost,
            res.violated,
            &res.next_state,
            res.done,
        );
        ep_cost += res.cost;
        obs = res.next_state;
        if step > opts.warmup_steps {
            if let Some(report) = learner.train_step() {
                if let Some(a) = report.actor_loss {
                    last_actor_loss = a;
                }
                losses.push(LossRow {
                    step,
                    critic1_loss: report.critic1_loss,
                    critic2_loss: report.critic2_loss,
                    actor_loss: last_actor_loss,
                    lambda: learner.lambda(),
                });
            }
        }
        if res.done {
            learner.end_episode(ep_cost);
            episode += 1;
            ep_cost = 0.0;
            obs = env.reset(episode_seed(opts.seed, episode));
        }
        if step % opts.eval_interval == 0 {
            let mut ret_sum = 0.0;
            let mut cost_sum = 0.0;
            for e in 0..opts.eval_episodes {
                let traj = eval_episode(learner, eval_env, eval_seed(opts.seed, step, e));
                ret_sum += traj.episodic_return();
                cost_sum += traj.episodic_cost();
            }
            let n = opts.eval_episodes.max(1) as Real;
            eval.push(EvalRow {
                step,
                mean_return: ret_sum / n,
                mean_cost: cost_sum / n,
            });
        }
    }
    TrainOutcome {
        eval,
        losses,
        episodes: episode,
        env_steps: opts.total_steps,
    }
}

/// Evaluation curve rows as `step,seed,return,cost`.
pub fn write_curves_csv<W: Write>(rows: &[EvalRow], seed: u64, mut w: W) -> std::io::Result<()> {
    writeln!(w, "step,seed,return,cost")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.step, seed, r.mean_return, r.mean_cost)?;
    }
    Ok(())
}

/// Per-train-step losses as `step,critic1_loss,critic2_loss,actor_loss,lambda`.
pub fn write_losses_csv<W: Write>(rows: &[LossRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "step,critic1_loss,critic2_loss,actor_loss,lambda")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.step, r.critic1_loss, r.critic2_loss, r.actor_loss, r.lambda
        )?;
    }
    Ok(())
}
