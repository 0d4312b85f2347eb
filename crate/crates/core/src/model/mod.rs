//! Cashflow models: time grids, scenario lattices, path ensembles and the
//! history tree of the natural filtration.

pub mod builders;
mod grid;
pub mod io;
mod lattice;
mod paths;

pub use builders::{binary_example, binomial, constant, BinomialSpec, DriftKind, StepRule, DEFAULT_P_EXPONENT};
pub use grid::TimeGrid;
pub use lattice::{Node, ScenarioLattice, Transition, PROB_TOL};
pub use paths::{HistoryNode, HistoryTree, PathEnsemble, DEFAULT_EXHAUSTIVE_BOUND};
