//! Volumetric privacy of a private state behind released public-state boxes.
//!
//! An adversary who knows a linear model runs a set-membership recursion on released
//! boxes of the public state and narrows down the private state. This crate implements
//! that attack (interval and constrained-zonotope backends), a privacy filter that picks
//! each released box by linear programming to minimize what the attack learns, two
//! baseline mechanisms, and seeded experiment drivers that write CSV.

pub mod ccg;
mod csvfmt;
pub mod error;
pub mod filter;
pub mod harness;
pub mod inference;
pub mod interval;
pub mod lp;
pub mod system;

pub use ccg::{Ccg, GeneratorBlock, SparseRows, VolumeEstimate};
pub use error::{Error, Result};
pub use harness::{Backend, ExperimentConfig, Mechanism};
pub use inference::{Adversary, AdversaryBelief, InferenceModel, StepReport};
pub use interval::{Interval, PsiMatrix, SignedBounds};
pub use system::{case_study_preset, LinearSystem, RngStream, Trajectory};
