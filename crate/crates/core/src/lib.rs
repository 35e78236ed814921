//! # linermoo
//!
//! Bi-objective planning for liner shipping networks. A solution fixes, for
//! every service route, the vessel class and fleet size, the sailing speed on
//! each leg, the weekly schedule, and how each origin-destination demand is
//! routed through the network (possibly with transshipments at shared ports).
//!
//! The two objectives are the weekly operating cost (fixed, berth, handling,
//! holding, fuel and emission terms) and the total round-trip time.
//!
//! Solvers:
//! - [`nsga2`]: elitist nondominated sorting GA.
//! - [`ocea`]: online clustering-based EA with a hypervolume-pruned archive.
//! - [`oracle`]: exhaustive grid enumeration for small instances.
//!
//! [`milp`] exports the linearized mixed-integer formulation in LP format and
//! checks assignments against the nonlinear evaluator.

pub mod catalog;
pub mod cli;
pub mod evaluation;
pub mod genotype;
pub mod instance;
pub mod metrics;
pub mod milp;
pub mod nsga2;
pub mod ocea;
pub mod operators;
pub mod oracle;
pub mod paths;
pub mod problem;
pub mod rng;

pub use evaluation::{ConstraintReport, CostBreakdown, Solution};
pub use genotype::Genotype;
pub use instance::{Instance, InstanceError, TransshipmentQuad};
pub use problem::Problem;
