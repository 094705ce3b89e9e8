//! Influence diagram engine.
//!
//! Diagrams of chance, decision and value nodes are validated, then solved
//! by value-preserving reductions: conditional expectation (chance node
//! removal), expected-utility maximization (decision node removal) and
//! Bayes' theorem (arc reversal). Every intermediate product is itself a
//! valid [`Diagram`].
//!
//! ```
//! use idg_core::{fixtures, solve::solve};
//!
//! let solution = solve(&fixtures::bet_pass(0.0)).unwrap();
//! assert!((solution.optimal_value - 10.0).abs() < 1e-12);
//! ```

pub mod fixtures;
pub mod gen;
pub mod io;
pub mod lottery;
pub mod model;
pub mod report;
pub mod solve;
pub mod transforms;

#[cfg(feature = "cli")]
pub mod cli;
#[cfg(feature = "server")]
pub mod service;

pub use lottery::{statistics, value_lottery, Lottery, Statistics};
pub use model::{complete_no_forgetting, validate, Diagram, Node, NodeId, ValidationReport};
pub use solve::{
    alternative_statistics, brute_force_solve, certain_equivalent, solve, value_of_information,
    Policy, RiskProfile, Solution,
};
