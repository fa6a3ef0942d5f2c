//! Twin-critic deterministic-policy-gradient agent with an optional recurrent
//! context path.
//!
//! With `context_hidden > 0` the agent conditions its actor and critics on
//! recurrent embeddings of the last `L` (state, action, reward) triples,
//! with separate encoders for the actor and the critics. The actor encoder
//! receives gradient only on (delayed) actor updates, the critic encoder only
//! on critic updates, each through the respective objective's chain rule.
//! With `context_hidden = 0` the context path disappears entirely and the
//! agent reduces to the plain twin-critic baseline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::replay::{ContextWindow, ReplayBuffer, ReplayRecord};
use super::AgentConfig;
use crate::nn::{clip_global_norm, soft_update, Activation, Adam, GruCell, Mlp, Param};
use crate::Real;

/// Per-batch losses; `actor_loss` is present only on delayed actor updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    pub critic1_loss: Real,
    pub critic2_loss: Real,
    pub actor_loss: Option<Real>,
}

pub struct Td3Agent {
    pub cfg: AgentConfig,
    obs_dim: usize,
    action_dim: usize,
    pub(crate) actor: Mlp<Real>,
    pub(crate) critic1: Mlp<Real>,
    pub(crate) critic2: Mlp<Real>,
    pub(crate) target_actor: Mlp<Real>,
    pub(crate) target_critic1: Mlp<Real>,
    pub(crate) target_critic2: Mlp<Real>,
    pub(crate) ctx_actor: Option<GruCell<Real>>,
    pub(crate) ctx_critic: Option<GruCell<Real>>,
    opt_actor: Adam<Real>,
    opt_critic1: Adam<Real>,
    opt_critic2: Adam<Real>,
    opt_ctx_actor: Adam<Real>,
    opt_ctx_critic: Adam<Real>,
    pub buffer: ReplayBuffer,
    /// Current episode's context window (the window "before" the next step).
    pub window: ContextWindow,
    expected_next: Option<Vec<Real>>,
    train_calls: u64,
    actor_updates: u64,
    skipped_steps: u64,
    rng: ChaCha8Rng,
}

fn concat2(a: &[Real], b: &[Real]) -> Vec<Real> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}

fn concat3(a: &[Real], b: &[Real], c: &[Real]) -> Vec<Real> {
    let mut v = Vec::with_capacity(a.len() + b.len() + c.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v.extend_from_slice(c);
    v
}

/// Context embedding of a window; empty when the context path is disabled.
fn embed(cell: Option<&GruCell<Real>>, window: &ContextWindow) -> Vec<Real> {
    match cell {
        None => Vec::new(),
        Some(c) => c.forward_seq(&window.as_inputs(), &vec![0.0; c.hidden()]),
    }
}

impl Td3Agent {
    pub fn new(obs_dim: usize, action_dim: usize, cfg: AgentConfig, seed: u64) -> Self {
        cfg.validate();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = cfg.context_hidden;
        let mut actor_dims = vec![obs_dim + k];
        actor_dims.extend_from_slice(&cfg.hidden);
        actor_dims.push(action_dim);
        let mut critic_dims = vec![obs_dim + action_dim + k];
        critic_dims.extend_from_slice(&cfg.hidden);
        critic_dims.push(1);
        let actor = Mlp::new(&actor_dims, Activation::Relu, Activation::Tanh, &mut rng);
        let critic1 = Mlp::new(&critic_dims, Activation::Relu, Activation::Identity, &mut rng);
        let critic2 = Mlp::new(&critic_dims, Activation::Relu, Activation::Identity, &mut rng);
        let slot = obs_dim + action_dim + 1;
        let (ctx_actor, ctx_critic) = if k > 0 {
            (
                Some(GruCell::new(slot, k, &mut rng)),
                Some(GruCell::new(slot, k, &mut rng)),
            )
        } else {
            (None, None)
        };
        Self {
            target_actor: actor.clone(),
            target_critic1: critic1.clone(),
            target_critic2: critic2.clone(),
            opt_actor: Adam::new(cfg.lr_actor),
            opt_critic1: Adam::new(cfg.lr_critic),
            opt_critic2: Adam::new(cfg.lr_critic),
            opt_ctx_actor: Adam::new(cfg.lr_context),
            opt_ctx_critic: Adam::new(cfg.lr_context),
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            window: ContextWindow::new(cfg.context_len, obs_dim, action_dim),
            expected_next: None,
            train_calls: 0,
            actor_updates: 0,
            skipped_steps: 0,
            actor,
            critic1,
            critic2,
            ctx_actor,
            ctx_critic,
            obs_dim,
            action_dim,
            cfg,
            rng,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn actor_updates(&self) -> u64 {
        self.actor_updates
    }

    pub fn skipped_steps(&self) -> u64 {
        self.skipped_steps
    }

    fn gauss(&mut self, sigma: Real) -> Real {
        if sigma == 0.0 {
            0.0
        } else {
            Normal::new(0.0, sigma).unwrap().sample(&mut self.rng)
        }
    }

    /// Deterministic actor output with optional exploration noise, clamped to
    /// `[-1, 1]` per coordinate. The context embedding of the current window
    /// conditions the actor when the context path is enabled.
    pub fn select_action(&mut self, obs: &[Real], explore: bool) -> Vec<Real> {
        let z = embed(self.ctx_actor.as_ref(), &self.window);
        let mut a = self.actor.forward(&concat2(obs, &z));
        assert!(
            a.iter().all(|v| v.is_finite()),
            "actor produced a non-finite action: {a:?}"
        );
        for v in a.iter_mut() {
            if explore {
                *v += self.rng.sample(Normal::new(0.0, self.cfg.expl_noise.max(1e-12)).unwrap());
            }
            *v = v.clamp(-1.0, 1.0);
        }
        a
    }

    /// Record one environment step.
    ///
    /// `violation > 0` marks a step that broke the constraint: the stored
    /// reward becomes `r + r_e`, the transition is stored as a true terminal,
    /// and the context window resets for the next episode. The window also
    /// resets on `done` (horizon), but a horizon timeout is stored with
    /// `done = false` so bootstrapping is not masked.
    pub fn observe(
        &mut self,
        state: &[Real],
        action: &[Real],
        reward: Real,
        violation: Real,
        next_state: &[Real],
        done: bool,
    ) {
        self.observe_impl(state, action, reward, violation, next_state, done, true);
    }

    /// Maintain the context window across a step without storing a replay
    /// record (used by evaluation episodes).
    pub fn update_context_only(
        &mut self,
        state: &[Real],
        action: &[Real],
        reward: Real,
        violation: Real,
        done: bool,
    ) {
        self.observe_impl(state, action, reward, violation, &[], done, false);
    }

    fn observe_impl(
        &mut self,
        state: &[Real],
        action: &[Real],
        reward: Real,
        violation: Real,
        next_state: &[Real],
        done: bool,
        store: bool,
    ) {
        if let Some(expected) = &self.expected_next {
            debug_assert_eq!(
                state,
                expected.as_slice(),
                "observe called out of order: state differs from the previous next_state"
            );
        }
        let violated = violation > 0.0;
        let r_stored = if violated { reward + self.cfg.r_e } else { reward };
        let window_before = self.window.clone();
        self.window.push(state, action, r_stored);
        if store {
            let window_after = self.window.clone();
            self.buffer.push(ReplayRecord {
                state: state.to_vec(),
                action: action.to_vec(),
                reward: r_stored,
                next_state: next_state.to_vec(),
                done: violated,
                window_before,
                window_after,
            });
        }
        if violated || done {
            self.window.reset();
            self.expected_next = None;
        } else if store {
            self.expected_next = Some(next_state.to_vec());
        }
    }

    pub fn reset_context(&mut self) {
        self.window.reset();
        self.expected_next = None;
    }

    pub fn context_state(&self) -> (ContextWindow, Option<Vec<Real>>) {
        (self.window.clone(), self.expected_next.clone())
    }

    pub fn set_context_state(&mut self, window: ContextWindow, expected: Option<Vec<Real>>) {
        self.window = window;
        self.expected_next = expected;
    }

    /// Bootstrap target for one record: `y = r + gamma * (1 - done) *
    /// min(Q'_1, Q'_2)(s', a~, z'_c)` with target-policy smoothing noise on
    /// `a~`. The whole path is gradient-free.
    fn td_target(&mut self, rec: &ReplayRecord) -> Real {
        if rec.done {
            return rec.reward;
        }
        let za2 = embed(self.ctx_actor.as_ref(), &rec.window_after);
        let mut atilde = self.target_actor.forward(&concat2(&rec.next_state, &za2));
        let clip = self.cfg.noise_clip;
        for v in atilde.iter_mut() {
            let noise = self.gauss(self.cfg.target_noise).clamp(-clip, clip);
            *v = (*v + noise).clamp(-1.0, 1.0);
        }
        let zc2 = embed(self.ctx_critic.as_ref(), &rec.window_after);
        let x = concat3(&rec.next_state, &atilde, &zc2);
        let q1 = self.target_critic1.forward(&x)[0];
        let q2 = self.target_critic2.forward(&x)[0];
        rec.reward + self.cfg.gamma * q1.min(q2)
    }

    fn zero_critic_grads(&mut self) {
        self.critic1.zero_grad();
        self.critic2.zero_grad();
        if let Some(c) = &mut self.ctx_critic {
            c.zero_grad();
        }
    }

    fn zero_actor_grads(&mut self) {
        self.actor.zero_grad();
        if let Some(c) = &mut self.ctx_actor {
            c.zero_grad();
        }
    }

    /// One training step over a sampled mini-batch. Returns `None` until the
    /// buffer holds a full batch.
    pub fn train_step(&mut self) -> Option<TrainReport> {
        let batch = self.cfg.batch_size;
        if self.buffer.len() < batch {
            return None;
        }
        self.train_calls += 1;
        let idx = self.buffer.sample_indices(batch, &mut self.rng);
        let records: Vec<ReplayRecord> = idx.iter().map(|&i| self.buffer.get(i).clone()).collect();
        let inv = 1.0 / batch as Real;
        let k = self.cfg.context_hidden;

        // Critic update: both critics regress on the shared bootstrap target;
        // the critic context encoder receives the summed chain from both TD
        // losses.
        self.zero_critic_grads();
        let mut loss1 = 0.0;
        let mut loss2 = 0.0;
        for rec in &records {
            let y = self.td_target(rec);
            let (zc, cache_c) = match &self.ctx_critic {
                None => (Vec::new(), None),
                Some(c) => {
                    let (z, cache) = c.forward_seq_cache(&rec.window_before.as_inputs(), &vec![0.0; k]);
                    (z, Some(cache))
                }
            };
            let x = concat3(&rec.state, &rec.action, &zc);
            let (q1, cache1) = self.critic1.forward_cache(&x);
            let (q2, cache2) = self.critic2.forward_cache(&x);
            let d1 = q1[0] - y;
            let d2 = q2[0] - y;
            loss1 += d1 * d1 * inv;
            loss2 += d2 * d2 * inv;
            let dx1 = self.critic1.backward(&cache1, &[2.0 * d1 * inv]);
            let dx2 = self.critic2.backward(&cache2, &[2.0 * d2 * inv]);
            if let (Some(ctx), Some(cache)) = (&mut self.ctx_critic, cache_c) {
                let off = x.len() - k;
                let dz: Vec<Real> = (0..k).map(|i| dx1[off + i] + dx2[off + i]).collect();
                ctx.backward_seq(&cache, &dz);
            }
        }
        if !(loss1.is_finite() && loss2.is_finite()) {
            self.zero_critic_grads();
            self.skipped_steps += 1;
            return Some(TrainReport {
                critic1_loss: loss1,
                critic2_loss: loss2,
                actor_loss: None,
            });
        }
        let clip = self.cfg.grad_clip;
        clip_global_norm(&mut self.critic1.params_mut(), clip);
        clip_global_norm(&mut self.critic2.params_mut(), clip);
        self.opt_critic1.step(&mut self.critic1.params_mut());
        self.opt_critic2.step(&mut self.critic2.params_mut());
        if let Some(c) = &mut self.ctx_critic {
            clip_global_norm(&mut c.params_mut(), clip);
            self.opt_ctx_critic.step(&mut c.params_mut());
        }

        // Delayed actor update: maximize Q_1(s, pi(s, z_a), z_c) through the
        // actor and its context encoder; the critic path only transports
        // gradient and is re-zeroed afterwards.
        let mut actor_loss = None;
        if self.train_calls % self.cfg.policy_delay == 0 {
            self.zero_actor_grads();
            let mut loss_a = 0.0;
            for rec in &records {
                let (za, cache_a) = match &self.ctx_actor {
                    None => (Vec::new(), None),
                    Some(c) => {
                        let (z, cache) =
                            c.forward_seq_cache(&rec.window_before.as_inputs(), &vec![0.0; k]);
                        (z, Some(cache))
                    }
                };
                let ain = concat2(&rec.state, &za);
                let (a, cache_act) = self.actor.forward_cache(&ain);
                let zc = embed(self.ctx_critic.as_ref(), &rec.window_before);
                let qin = concat3(&rec.state, &a, &zc);
                let (q, cache_q) = self.critic1.forward_cache(&qin);
                loss_a -= q[0] * inv;
                let dq = self.critic1.backward(&cache_q, &[-inv]);
                let da = &dq[self.obs_dim..self.obs_dim + self.action_dim];
                let dain = self.actor.backward(&cache_act, da);
                if let (Some(ctx), Some(cache)) = (&mut self.ctx_actor, cache_a) {
                    ctx.backward_seq(&cache, &dain[self.obs_dim..]);
                }
            }
            // discard the gradient that leaked into the critic path
            self.critic1.zero_grad();
            if let Some(c) = &mut self.ctx_critic {
                c.zero_grad();
            }
            if loss_a.is_finite() {
                clip_global_norm(&mut self.actor.params_mut(), clip);
                self.opt_actor.step(&mut self.actor.params_mut());
                if let Some(c) = &mut self.ctx_actor {
                    clip_global_norm(&mut c.params_mut(), clip);
                    self.opt_ctx_actor.step(&mut c.params_mut());
                }
                self.actor_updates += 1;
                actor_loss = Some(loss_a);
            } else {
                self.zero_actor_grads();
                self.skipped_steps += 1;
            }

            let tau = self.cfg.tau;
            soft_update(&mut self.target_actor.params_mut(), &self.actor.params(), tau);
            soft_update(
                &mut self.target_critic1.params_mut(),
                &self.critic1.params(),
                tau,
            );
            soft_update(
                &mut self.target_critic2.params_mut(),
                &self.critic2.params(),
                tau,
            );
        }

        Some(TrainReport {
            critic1_loss: loss1,
            critic2_loss: loss2,
            actor_loss,
        })
    }

    fn named_params(&self) -> Vec<(String, &Param<Real>)> {
        let mut out = Vec::new();
        let mlps = [
            ("actor", &self.actor),
            ("critic1", &self.critic1),
            ("critic2", &self.critic2),
            ("target_actor", &self.target_actor),
            ("target_critic1", &self.target_critic1),
            ("target_critic2", &self.target_critic2),
        ];
        for (prefix, mlp) in mlps {
            for (i, layer) in mlp.layers.iter().enumerate() {
                out.push((format!("{prefix}.l{i}.w"), &layer.w));
                out.push((format!("{prefix}.l{i}.b"), &layer.b));
            }
        }
        const GRU_NAMES: [&str; 9] = ["wz", "uz", "bz", "wr", "ur", "br", "wh", "uh", "bh"];
        for (prefix, cell) in [("ctx_actor", &self.ctx_actor), ("ctx_critic", &self.ctx_critic)] {
            if let Some(c) = cell {
                for (name, p) in GRU_NAMES.iter().zip(c.params()) {
                    out.push((format!("{prefix}.{name}"), p));
                }
            }
        }
        out
    }

    fn named_params_mut(&mut self) -> Vec<(String, &mut Param<Real>)> {
        let mut out: Vec<(String, &mut Param<Real>)> = Vec::new();
        let mlps = [
            ("actor", &mut self.actor),
            ("critic1", &mut self.critic1),
            ("critic2", &mut self.critic2),
            ("target_actor", &mut self.target_actor),
            ("target_critic1", &mut self.target_critic1),
            ("target_critic2", &mut self.target_critic2),
        ];
        for (prefix, mlp) in mlps {
            for (i, layer) in mlp.layers.iter_mut().enumerate() {
                out.push((format!("{prefix}.l{i}.w"), &mut layer.w));
                out.push((format!("{prefix}.l{i}.b"), &mut layer.b));
            }
        }
        const GRU_NAMES: [&str; 9] = ["wz", "uz", "bz", "wr", "ur", "br", "wh", "uh", "bh"];
        for (prefix, cell) in [
            ("ctx_actor", &mut self.ctx_actor),
            ("ctx_critic", &mut self.ctx_critic),
        ] {
            if let Some(c) = cell {
                for (name, p) in GRU_NAMES.iter().zip(c.params_mut()) {
                    out.push((format!("{prefix}.{name}"), p));
                }
            }
        }
        out
    }

    pub fn save_checkpoint(&self, stem: &std::path::Path) -> Result<(), crate::nn::checkpoint::CheckpointError> {
        let named = self.named_params();
        let refs: Vec<(&str, &Param<Real>)> = named.iter().map(|(n, p)| (n.as_str(), *p)).collect();
        crate::nn::checkpoint::save(stem, &refs)
    }

    /// Restore parameters saved by [`Self::save_checkpoint`] into an agent of
    /// identical architecture.
    pub fn load_checkpoint(&mut self, stem: &std::path::Path) -> Result<(), crate::nn::checkpoint::CheckpointError> {
        let mut named = self.named_params_mut();
        let mut refs: Vec<(&str, &mut Param<Real>)> = Vec::with_capacity(named.len());
        // split the (String, &mut Param) pairs without cloning the borrows
        for (n, p) in named.iter_mut() {
            refs.push((n.as_str(), &mut **p));
        }
        crate::nn::checkpoint::load(stem, &mut refs)
    }

    /// Worst relative error of the analytic actor-objective gradient (through
    /// the actor and its context encoder jointly) against central finite
    /// differences, for one state/window pair. Diagnostic used by the test
    /// suite; requires the context path.
    pub fn actor_chain_gradient_error(
        &mut self,
        state: &[Real],
        window: &ContextWindow,
        samples_per_param: usize,
        rng: &mut ChaCha8Rng,
    ) -> Real {
        assert!(self.cfg.context_hidden > 0, "chain check needs a context path");
        let k = self.cfg.context_hidden;
        let obs_dim = self.obs_dim;
        let action_dim = self.action_dim;
        let zc = embed(self.ctx_critic.as_ref(), window);
        let state = state.to_vec();
        let window = window.clone();
        crate::nn::gradcheck::check_gradients(
            self,
            |ag| {
                let za = embed(ag.ctx_actor.as_ref(), &window);
                let a = ag.actor.forward(&concat2(&state, &za));
                -ag.critic1.forward(&concat3(&state, &a, &zc))[0]
            },
            |ag| {
                ag.zero_actor_grads();
                ag.critic1.zero_grad();
                let ctx = ag.ctx_actor.as_ref().unwrap();
                let (za, cache_a) = ctx.forward_seq_cache(&window.as_inputs(), &vec![0.0; k]);
                let ain = concat2(&state, &za);
                let (a, cache_act) = ag.actor.forward_cache(&ain);
                let (_, cache_q) = ag.critic1.forward_cache(&concat3(&state, &a, &zc));
                let dq = ag.critic1.backward(&cache_q, &[-1.0]);
                let da = &dq[obs_dim..obs_dim + action_dim];
                let dain = ag.actor.backward(&cache_act, da);
                ag.ctx_actor
                    .as_mut()
                    .unwrap()
                    .backward_seq(&cache_a, &dain[obs_dim..]);
            },
            |ag| {
                let mut params: Vec<&mut Param<Real>> = ag.actor.params_mut();
                params.extend(ag.ctx_actor.as_mut().unwrap().params_mut());
                params
            },
            samples_per_param,
            rng,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(context: usize) -> AgentConfig {
        AgentConfig {
            batch_size: 8,
            buffer_capacity: 1000,
            hidden: vec![16, 16],
            context_hidden: context,
            target_noise: 0.0,
            ..AgentConfig::default()
        }
    }

    fn seeded_record(agent: &mut Td3Agent, s: Real, r: Real, done: bool) {
        let s2 = s + 1.0;
        agent.observe(&[s, -s], &[0.5, -0.5], r, 0.0, &[s2, -s2], done);
    }

    #[test]
    fn greedy_action_is_deterministic_and_in_range() {
        let mut agent = Td3Agent::new(2, 2, small_cfg(4), 0);
        let a1 = agent.select_action(&[0.3, -0.3], false);
        let a2 = agent.select_action(&[0.3, -0.3], false);
        assert_eq!(a1, a2);
        assert!(a1.iter().all(|v| (-1.0..=1.0).contains(v)));
        // exploration noise stays clamped
        for _ in 0..100 {
            let a = agent.select_action(&[0.3, -0.3], true);
            assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn context_changes_the_action() {
        let mut agent = Td3Agent::new(2, 2, small_cfg(8), 1);
        let base = agent.select_action(&[0.3, -0.3], false);
        agent.window.push(&[1.0, 1.0], &[0.2, 0.2], 5.0);
        let shifted = agent.select_action(&[0.3, -0.3], false);
        assert_ne!(base, shifted);
        // plain agent ignores the window entirely
        let mut plain = Td3Agent::new(2, 2, small_cfg(0), 1);
        let b1 = plain.select_action(&[0.3, -0.3], false);
        plain.window.push(&[1.0, 1.0], &[0.2, 0.2], 5.0);
        let b2 = plain.select_action(&[0.3, -0.3], false);
        assert_eq!(b1, b2);
    }

    #[test]
    fn first_record_has_all_zero_window_before() {
        let mut agent = Td3Agent::new(2, 2, small_cfg(4), 0);
        seeded_record(&mut agent, 1.0, 0.1, false);
        let rec = agent.buffer.get(0);
        assert_eq!(
            rec.window_before.as_inputs(),
            vec![vec![0.0; 5]; agent.cfg.context_len]
        );
        assert!(rec.windows_consistent());
    }

    #[test]
    fn violation_adds_re_marks_terminal_and_resets_window() {
        let mut agent = Td3Agent::new(2, 2, small_cfg(4), 0);
        agent.cfg.r_e = -10.0;
        seeded_record(&mut agent, 1.0, 0.1, false);
        agent.observe(&[2.0, -2.0], &[0.0, 0.0], 0.4, 1.0, &[3.0, -3.0], false);
        let rec = agent.buffer.get(1);
        assert!((rec.reward - (0.4 - 10.0)).abs() < 1e-12);
        assert!(rec.done);
        assert_eq!(
            agent.window.as_inputs(),
            vec![vec![0.0; 5]; agent.cfg.context_len]
        );
    }

    #[test]
    fn third_record_window_holds_steps_one_and_two() {
        let mut agent = Td3Agent::new(2, 2, small_cfg(4), 0);
        seeded_record(&mut agent, 1.0, 0.1, false);
        seeded_record(&mut agent, 2.0, 0.2, false);
        seeded_record(&mut agent, 3.0, 0.3, false);
        let rec = agent.buffer.get(2);
        let inputs = rec.window_before.as_inputs();
        assert_eq!(inputs[0], vec![0.0; 5]); // one zero slot left
        assert_eq!(inputs[1], vec![1.0, -1.0, 0.5, -0.5, 0.1]);
        assert_eq!(inputs[2], vec![2.0, -2.0, 0.5, -0.5, 0.2]);
    }

    #[test]
    #[should_panic(expected = "out of order")]
    #[cfg(debug_assertions)]
    fn out_of_order_observe_is_rejected_in_debug() {
        let mut agent = Td3Agent::new(2, 2, small_cfg(4), 0);
        seeded_record(&mut agent, 1.0, 0.1, false);
        // previous next_state was (2, -2); feeding (9, 9) is out of order
        agent.observe(&[9.0, 9.0], &[0.0, 0.0], 0.0, 0.0, &[9.0, 9.0], false);
    }

    #[test]
    fn gamma_zero_target_is_the_reward() {
        let mut agent = Td3Agent::new(2, 2, small_cfg(4), 0);
        agent.cfg.gamma = 0.0;
        seeded_record(&mut agent, 1.0, 0.7, false);
        let rec = agent.buffer.get(0).clone();
        assert!((agent.td_target(&rec) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn target_uses_the_smaller_critic() {
        let mut agent = Td3Agent::new(2, 2, small_cfg(0), 0);
        agent.cfg.gamma = 1.0;
        for p in agent.target_critic1.params_mut() {
            p.value.fill(0.0);
        }
        for p in agent.target_critic2.params_mut() {
            p.value.fill(0.0);
        }
        agent.target_critic1.layers.last_mut().unwrap().b.value.fill(2.0);
        agent.target_critic2.layers.last_mut().unwrap().b.value.fill(3.0);
        seeded_record(&mut agent, 1.0, 0.0, false);
        let rec = agent.buffer.get(0).clone();
        assert!((agent.td_target(&rec) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn terminal_record_does_not_bootstrap() {
        let mut agent = Td3Agent::new(2, 2, small_cfg(0), 0);
        agent.cfg.gamma = 0.99;
        agent.observe(&[1.0, 1.0], &[0.0, 0.0], 0.3, 1.0, &[2.0, 2.0], false);
        let rec = agent.buffer.get(0).clone();
        assert!((agent.td_target(&rec) - (0.3 + agent.cfg.r_e)).abs() < 1e-12);
    }

    #[test]
    fn single_record_overfit_drives_mse_below_1e6th() {
        let mut cfg = small_cfg(4);
        cfg.batch_size = 4;
        cfg.lr_critic = 1e-2;
        cfg.lr_context = 1e-2;
        cfg.gamma = 0.0;
        let mut agent = Td3Agent::new(2, 2, cfg, 3);
        for _ in 0..4 {
            seeded_record(&mut agent, 1.0, 0.5, false);
            agent.reset_context();
        }
        let mut last = TrainReport {
            critic1_loss: Real::INFINITY,
            critic2_loss: Real::INFINITY,
            actor_loss: None,
        };
        for _ in 0..2000 {
            last = agent.train_step().unwrap();
        }
        assert!(
            last.critic1_loss < 1e-6 && last.critic2_loss < 1e-6,
            "losses {last:?}"
        );
    }

    #[test]
    fn actor_and_its_context_update_only_on_delayed_steps() {
        let mut cfg = small_cfg(4);
        cfg.batch_size = 4;
        let mut agent = Td3Agent::new(2, 2, cfg, 7);
        for i in 0..4 {
            seeded_record(&mut agent, i as Real, 0.1, false);
            agent.reset_context();
        }
        let actor_before: Vec<Real> = agent.actor.params().iter().flat_map(|p| p.value.data.clone()).collect();
        let ctx_before: Vec<Real> = agent.ctx_actor.as_ref().unwrap().params().iter().flat_map(|p| p.value.data.clone()).collect();
        let critic_before: Vec<Real> = agent.critic1.params().iter().flat_map(|p| p.value.data.clone()).collect();
        let rep = agent.train_step().unwrap();
        assert!(rep.actor_loss.is_none());
        assert_eq!(agent.actor_updates(), 0);
        let actor_mid: Vec<Real> = agent.actor.params().iter().flat_map(|p| p.value.data.clone()).collect();
        let ctx_mid: Vec<Real> = agent.ctx_actor.as_ref().unwrap().params().iter().flat_map(|p| p.value.data.clone()).collect();
        let critic_mid: Vec<Real> = agent.critic1.params().iter().flat_map(|p| p.value.data.clone()).collect();
        assert_eq!(actor_before, actor_mid);
        assert_eq!(ctx_before, ctx_mid);
        assert_ne!(critic_before, critic_mid);
        let rep = agent.train_step().unwrap();
        assert!(rep.actor_loss.is_some());
        assert_eq!(agent.actor_updates(), 1);
        let actor_after: Vec<Real> = agent.actor.params().iter().flat_map(|p| p.value.data.clone()).collect();
        let ctx_after: Vec<Real> = agent.ctx_actor.as_ref().unwrap().params().iter().flat_map(|p| p.value.data.clone()).collect();
        assert_ne!(actor_mid, actor_after);
        assert_ne!(ctx_mid, ctx_after);
    }

    #[test]
    fn targets_lag_by_convex_combination() {
        let mut cfg = small_cfg(0);
        cfg.batch_size = 4;
        cfg.policy_delay = 1;
        let mut agent = Td3Agent::new(2, 2, cfg, 11);
        for i in 0..4 {
            seeded_record(&mut agent, i as Real, 0.1, false);
            agent.reset_context();
        }
        let t_before: Vec<Real> = agent.target_critic1.params().iter().flat_map(|p| p.value.data.clone()).collect();
        agent.train_step().unwrap();
        let online: Vec<Real> = agent.critic1.params().iter().flat_map(|p| p.value.data.clone()).collect();
        let t_after: Vec<Real> = agent.target_critic1.params().iter().flat_map(|p| p.value.data.clone()).collect();
        let tau = agent.cfg.tau;
        for ((tb, ta), on) in t_before.iter().zip(&t_after).zip(&online) {
            assert!((ta - (tau * on + (1.0 - tau) * tb)).abs() < 1e-12);
        }
    }

    #[test]
    fn checkpoint_round_trip_restores_the_policy() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("agent");
        let mut a = Td3Agent::new(2, 2, small_cfg(4), 21);
        a.save_checkpoint(&stem).unwrap();
        let mut b = Td3Agent::new(2, 2, small_cfg(4), 99);
        assert_ne!(
            a.select_action(&[0.2, 0.4], false),
            b.select_action(&[0.2, 0.4], false)
        );
        b.load_checkpoint(&stem).unwrap();
        assert_eq!(
            a.select_action(&[0.2, 0.4], false),
            b.select_action(&[0.2, 0.4], false)
        );
    }

    #[test]
    fn actor_through_context_chain_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut cfg = small_cfg(4);
        cfg.hidden = vec![8, 8];
        let mut agent = Td3Agent::new(3, 2, cfg, 13);
        let mut window = ContextWindow::new(3, 3, 2);
        window.push(&[0.1, -0.2, 0.3], &[0.5, -0.5], 0.7);
        window.push(&[0.4, 0.2, -0.3], &[-0.1, 0.9], -0.2);
        let err = agent.actor_chain_gradient_error(&[0.3, -0.6, 0.2], &window, 4, &mut rng);
        assert!(err < crate::nn::gradcheck::REL_TOL, "max rel error {err}");
    }
}
