//! A laboratory for solving constrained MDPs through early termination.
//!
//! The crate is organized around a small behavioral contract for constrained
//! environments ([`cmdp`]), a wrapper that turns any such environment into its
//! early-terminated counterpart ([`et`]), diagnostic environments ([`envs`]),
//! exact dynamic-programming oracles for small tabular instances ([`tabular`]),
//! a minimal manually-differentiated neural toolkit ([`nn`]), off-policy agents
//! ([`agents`]), result aggregation ([`analysis`]), and the experiment CLI
//! ([`cli`]).

pub mod agents;
pub mod analysis;
pub mod cli;
pub mod cmdp;
pub mod config;
pub mod envs;
pub mod et;
pub mod nn;
pub mod tabular;

/// Scalar type used by the concrete environments, agents, and experiment
/// drivers. The numeric kernels in [`nn`] are generic over the float type;
/// everything in this crate instantiates them at `Real`.
pub type Real = f64;
