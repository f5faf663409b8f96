//! Exact lasso sign-recovery criteria for two-level supersaturated designs,
//! and constructions that optimize them.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod design;
pub mod construct;
pub mod error;
pub mod lasso;
pub mod mvn;
pub mod optimize;
pub mod par;
pub mod recovery;
pub mod rng;
pub mod symmetric;

pub use design::{Design, HeuristicSummary, StandardizedDesign};
pub use error::{Error, Result};
pub use mvn::{box_probability, GaussianRegion, Method, ProbabilityEstimate, QmcConfig};
pub use recovery::{CriterionValue, PhiCriterion, Scenario, SignVectorSet, Summary, SupportSet};
pub use symmetric::{SymEvaluator, SymMethod, SymScenario, SymSigns};
