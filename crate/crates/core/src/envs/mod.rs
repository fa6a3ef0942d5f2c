//! Diagnostic environments: the lava maze levels, the budget counterexample,
//! and the simplified point-gather task.

pub mod gather;
pub mod geometry;
pub mod maze;

pub use gather::GatherEnv;
pub use maze::{counterexample_env, InitMode, MazeEnv, MazeSpec};
