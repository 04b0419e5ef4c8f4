//! Planning and learning for Markov decision processes with an ω-regular
//! objective and an ω-regular constraint.
//!
//! The pipeline is: [`model::build_product`] → [`graph::decompose`] →
//! [`lp::build_lp`] / [`lp::solve`] / [`lp::decompose`] →
//! [`synthesis::synthesize`] → [`eval::evaluate_mixture`]. [`learn`] wraps it
//! in a model-based learning loop, [`rm`] translates the problem into a pair
//! of reward machines and [`lagrange`] handles almost-sure constraints.

pub mod error;
pub mod eval;
pub mod fixtures;
pub mod graph;
pub mod lagrange;
pub mod learn;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod rational;
pub mod rm;
pub mod synthesis;

pub use error::{Error, Result};
pub use eval::{evaluate_mixture, evaluate_stationary, EvaluationReport};
pub use graph::{decompose, EndComponent, MecDecomposition};
pub use lp::{ConstrainedLp, LpSolution};
pub use model::{build_product, LabeledMdp, Letter, ProductMdp, ProductState, RabinAutomaton};
pub use rational::{fmt_rat, parse_rat, Rat};
pub use synthesis::{MixturePolicy, StationaryPolicy};

/// The two specifications of a constrained problem.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
pub enum Side {
    Objective,
    Constraint,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Objective => Side::Constraint,
            Side::Constraint => Side::Objective,
        }
    }
}
