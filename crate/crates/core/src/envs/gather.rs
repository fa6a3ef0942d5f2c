//! Simplified point-gather budget task: a mass point collects apples (+10,
//! consumed) while avoiding bombs (cost 1 per contact step, persistent) in a
//! square arena. Item positions are drawn from the reset seed with disjoint
//! spawns, so a given seed always produces the same layout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cmdp::{CmdpSpec, Env, StepResult};
use crate::Real;

pub const ARENA_HALF_WIDTH: Real = 8.0;
pub const N_APPLES: usize = 8;
pub const N_BOMBS: usize = 8;
pub const CONTACT_RADIUS: Real = 0.6;
pub const APPLE_REWARD: Real = 10.0;
pub const BOMB_COST: Real = 1.0;
pub const GATHER_HORIZON: usize = 64;
/// Nearest items reported in the observation, per kind.
const OBS_ITEMS: usize = 4;

#[derive(Debug, Clone)]
pub struct GatherSpec {
    pub half_width: Real,
    pub n_apples: usize,
    pub n_bombs: usize,
    pub contact_radius: Real,
    pub horizon: usize,
}

impl Default for GatherSpec {
    fn default() -> Self {
        Self {
            half_width: ARENA_HALF_WIDTH,
            n_apples: N_APPLES,
            n_bombs: N_BOMBS,
            contact_radius: CONTACT_RADIUS,
            horizon: GATHER_HORIZON,
        }
    }
}

pub struct GatherEnv {
    pub gather: GatherSpec,
    cmdp: CmdpSpec,
    pos: (Real, Real),
    apples: Vec<(Real, Real)>,
    bombs: Vec<(Real, Real)>,
    t: usize,
}

impl GatherEnv {
    /// Observation: agent position plus relative vectors to the nearest four
    /// apples and four bombs, zero-padded when fewer remain.
    pub const OBS_DIM: usize = 2 + 4 * OBS_ITEMS;

    pub fn new(budget: Real) -> Self {
        Self::with_spec(GatherSpec::default(), budget)
    }

    pub fn with_spec(gather: GatherSpec, budget: Real) -> Self {
        let cmdp = CmdpSpec::new(
            Self::OBS_DIM,
            2,
            gather.horizon,
            budget,
            (0.0, APPLE_REWARD),
            true,
        );
        Self {
            gather,
            cmdp,
            pos: (0.0, 0.0),
            apples: Vec::new(),
            bombs: Vec::new(),
            t: 0,
        }
    }

    pub fn apples_left(&self) -> usize {
        self.apples.len()
    }

    pub fn position(&self) -> (Real, Real) {
        self.pos
    }

    fn spawn(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let min_sep = 2.0 * self.gather.contact_radius;
        let hw = self.gather.half_width;
        let mut placed: Vec<(Real, Real)> = Vec::new();
        while placed.len() < self.gather.n_apples + self.gather.n_bombs {
            let cand = (rng.gen_range(-hw..hw), rng.gen_range(-hw..hw));
            let clear = placed
                .iter()
                .chain(std::iter::once(&(0.0, 0.0)))
                .all(|p| dist(*p, cand) > min_sep);
            if clear {
                placed.push(cand);
            }
        }
        self.bombs = placed.split_off(self.gather.n_apples);
        self.apples = placed;
    }

    fn observation(&self) -> Vec<Real> {
        let mut obs = vec![self.pos.0, self.pos.1];
        for items in [&self.apples, &self.bombs] {
            let mut rel: Vec<(Real, Real)> = items
                .iter()
                .map(|p| (p.0 - self.pos.0, p.1 - self.pos.1))
                .collect();
            rel.sort_by(|a, b| norm(*a).total_cmp(&norm(*b)));
            for i in 0..OBS_ITEMS {
                let (dx, dy) = rel.get(i).copied().unwrap_or((0.0, 0.0));
                obs.push(dx);
                obs.push(dy);
            }
        }
        obs
    }
}

fn dist(a: (Real, Real), b: (Real, Real)) -> Real {
    norm((a.0 - b.0, a.1 - b.1))
}

fn norm(v: (Real, Real)) -> Real {
    (v.0 * v.0 + v.1 * v.1).sqrt()
}

impl Env for GatherEnv {
    fn spec(&self) -> &CmdpSpec {
        &self.cmdp
    }

    fn reset(&mut self, seed: u64) -> Vec<Real> {
        self.t = 0;
        self.pos = (0.0, 0.0);
        self.spawn(seed);
        self.observation()
    }

    fn step(&mut self, action: &[Real]) -> StepResult {
        assert_eq!(action.len(), 2, "gather action must be 2-dimensional");
        let hw = self.gather.half_width;
        self.pos = (
            (self.pos.0 + action[0].clamp(-1.0, 1.0)).clamp(-hw, hw),
            (self.pos.1 + action[1].clamp(-1.0, 1.0)).clamp(-hw, hw),
        );
        self.t += 1;
        let radius = self.gather.contact_radius;
        let mut reward = 0.0;
        // Spawn separation exceeds twice the contact radius, so at most one
        // apple can be in contact at a time.
        if let Some(idx) = self
            .apples
            .iter()
            .position(|p| dist(*p, self.pos) <= radius)
        {
            self.apples.swap_remove(idx);
            reward += APPLE_REWARD;
        }
        let cost = if self.bombs.iter().any(|p| dist(*p, self.pos) <= radius) {
            BOMB_COST
        } else {
            0.0
        };
        StepResult {
            next_state: self.observation(),
            reward,
            cost,
            done: self.t >= self.gather.horizon,
            violated: false,
        }
    }
}
