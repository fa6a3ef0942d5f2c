//! The diagnostic lava maze: a 16x16 continuous arena, 32-step episodes,
//! a goal disc at the middle of the right edge, and per-level lava layouts
//! loaded from plain-text data files.
//!
//! Stepping across a lava segment costs 1. Reaching the goal disc pays +30 on
//! every step spent inside it; every other step pays -0.1. The episode always
//! runs to the 32-step horizon unless a wrapper terminates it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::geometry::{segments_intersect, Segment};
use crate::cmdp::{CmdpSpec, Env, StepResult};
use crate::Real;

pub const MAZE_SIZE: Real = 16.0;
pub const MAZE_EPISODE_LEN: usize = 32;
pub const MAZE_START: (Real, Real) = (8.0, 8.0);
pub const MAZE_GOAL: (Real, Real) = (15.5, 8.0);
pub const MAZE_GOAL_RADIUS: Real = 0.75;
pub const MAZE_STEP_PENALTY: Real = -0.1;
pub const MAZE_GOAL_REWARD: Real = 30.0;

const LAYOUTS: [&str; 4] = [
    include_str!("../../data/mazes/level1.txt"),
    include_str!("../../data/mazes/level2.txt"),
    include_str!("../../data/mazes/level3.txt"),
    include_str!("../../data/mazes/level4.txt"),
];
const COUNTEREXAMPLE_LAYOUT: &str = include_str!("../../data/mazes/counterexample.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Every episode starts at the arena center.
    Fixed,
    /// The start position is drawn uniformly over the arena.
    RandomUniform,
}

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("line {line}: expected `x1 y1 x2 y2`, got {text:?}")]
    Malformed { line: usize, text: String },
    #[error("line {line}: endpoint ({x}, {y}) outside [0, {size}]^2")]
    OutOfBounds { line: usize, x: Real, y: Real, size: Real },
}

/// Parse a lava layout: one segment per line as `x1 y1 x2 y2`, `#` comments,
/// endpoints validated against the arena bounds.
pub fn parse_layout(text: &str) -> Result<Vec<Segment<Real>>, LayoutError> {
    let mut segments = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let nums: Vec<Real> = body
            .split_whitespace()
            .map(|tok| tok.parse::<Real>())
            .collect::<Result<_, _>>()
            .map_err(|_| LayoutError::Malformed {
                line,
                text: raw.to_string(),
            })?;
        if nums.len() != 4 {
            return Err(LayoutError::Malformed {
                line,
                text: raw.to_string(),
            });
        }
        for pair in [(nums[0], nums[1]), (nums[2], nums[3])] {
            if !(0.0..=MAZE_SIZE).contains(&pair.0) || !(0.0..=MAZE_SIZE).contains(&pair.1) {
                return Err(LayoutError::OutOfBounds {
                    line,
                    x: pair.0,
                    y: pair.1,
                    size: MAZE_SIZE,
                });
            }
        }
        segments.push(Segment::new(nums[0], nums[1], nums[2], nums[3]));
    }
    Ok(segments)
}

#[derive(Debug, Clone)]
pub struct MazeSpec {
    pub size: Real,
    pub episode_len: usize,
    pub start: (Real, Real),
    pub goal_center: (Real, Real),
    pub goal_radius: Real,
    pub lava: Vec<Segment<Real>>,
    pub level: usize,
    pub init_mode: InitMode,
}

impl MazeSpec {
    pub fn level(level: usize) -> Self {
        assert!((1..=4).contains(&level), "maze level must be 1..=4");
        Self::with_lava(parse_layout(LAYOUTS[level - 1]).expect("bundled layout"), level)
    }

    pub fn with_lava(lava: Vec<Segment<Real>>, level: usize) -> Self {
        Self {
            size: MAZE_SIZE,
            episode_len: MAZE_EPISODE_LEN,
            start: MAZE_START,
            goal_center: MAZE_GOAL,
            goal_radius: MAZE_GOAL_RADIUS,
            lava,
            level,
            init_mode: InitMode::Fixed,
        }
    }

    /// Axis-aligned region guaranteed to contain every reachable state when
    /// the level-4 maze is run with termination on first lava contact.
    pub fn enclosure_rect(&self) -> Option<(Real, Real, Real, Real)> {
        (self.level == 4).then_some((3.0, 5.0, 11.0, 11.0))
    }
}

pub struct MazeEnv {
    pub maze: MazeSpec,
    cmdp: CmdpSpec,
    state: (Real, Real),
    t: usize,
    rng: ChaCha8Rng,
}

impl MazeEnv {
    pub fn new(maze: MazeSpec, budget: Real) -> Self {
        let deterministic = maze.init_mode == InitMode::Fixed;
        let cmdp = CmdpSpec::new(
            2,
            2,
            maze.episode_len,
            budget,
            (MAZE_STEP_PENALTY, MAZE_GOAL_REWARD),
            deterministic,
        );
        let start = maze.start;
        Self {
            maze,
            cmdp,
            state: start,
            t: 0,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    pub fn level(level: usize) -> Self {
        Self::new(MazeSpec::level(level), 0.0)
    }

    pub fn with_init(level: usize, init_mode: InitMode) -> Self {
        let mut spec = MazeSpec::level(level);
        spec.init_mode = init_mode;
        Self::new(spec, 0.0)
    }

    pub fn state(&self) -> (Real, Real) {
        self.state
    }

    fn goal_reached(&self, p: (Real, Real)) -> bool {
        let dx = p.0 - self.maze.goal_center.0;
        let dy = p.1 - self.maze.goal_center.1;
        (dx * dx + dy * dy).sqrt() <= self.maze.goal_radius
    }

    fn crosses_lava(&self, from: (Real, Real), to: (Real, Real)) -> bool {
        let motion = Segment::new(from.0, from.1, to.0, to.1);
        self.maze.lava.iter().any(|seg| segments_intersect(&motion, seg))
    }
}

impl Env for MazeEnv {
    fn spec(&self) -> &CmdpSpec {
        &self.cmdp
    }

    fn reset(&mut self, seed: u64) -> Vec<Real> {
        self.t = 0;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.state = match self.maze.init_mode {
            InitMode::Fixed => self.maze.start,
            InitMode::RandomUniform => (
                self.rng.gen_range(0.0..self.maze.size),
                self.rng.gen_range(0.0..self.maze.size),
            ),
        };
        vec![self.state.0, self.state.1]
    }

    fn step(&mut self, action: &[Real]) -> StepResult {
        assert_eq!(action.len(), 2, "maze action must be 2-dimensional");
        let ax = action[0].clamp(-1.0, 1.0);
        let ay = action[1].clamp(-1.0, 1.0);
        let next = (
            (self.state.0 + ax).clamp(0.0, self.maze.size),
            (self.state.1 + ay).clamp(0.0, self.maze.size),
        );
        let cost = if self.crosses_lava(self.state, next) {
            1.0
        } else {
            0.0
        };
        let reward = if self.goal_reached(next) {
            MAZE_GOAL_REWARD
        } else {
            MAZE_STEP_PENALTY
        };
        self.state = next;
        self.t += 1;
        StepResult {
            next_state: vec![next.0, next.1],
            reward,
            cost,
            done: self.t >= self.maze.episode_len,
            violated: false,
        }
    }
}

/// The budget counterexample: a closed lava rectangle around the start with
/// cost budget 1, so the goal is reachable only by spending the budget on
/// exactly one crossing. Treating it as a binary task makes it unsolvable.
pub fn counterexample_env() -> MazeEnv {
    let lava = parse_layout(COUNTEREXAMPLE_LAYOUT).expect("bundled layout");
    MazeEnv::new(MazeSpec::with_lava(lava, 0), 1.0)
}
