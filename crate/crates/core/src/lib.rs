//! Desk-scale object-goal navigation with fused soft-target policy training.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure: the
//! gridworld simulator, the shortest-path expert, the recurrent behavior
//! cloning policy and its BPTT trainer, the fused-target builder, the action
//! distribution text grammar, the student policy and the evaluation metrics.
//! File formats, HTTP and the command line live in the `navfuse` crate.
#![no_std]

extern crate alloc;

pub mod backend;
pub mod eval;
pub mod expert;
pub mod fusion;
pub mod gridworld;
pub mod histpolicy;
pub mod math;
pub mod optim;
pub mod promptfmt;
pub mod rng;
pub mod student;
pub mod tensor;

pub use gridworld::{
    Action, ActionDistribution, ActionSet, Cell, Episode, GoalCategory, Observation,
    OccupancyGrid, Pose, StepOutcome,
};
