//! Exact envy-free rent division for budget-constrained quasi-linear
//! preferences.
//!
//! An agent's utility for room `a` at rent `r` is
//! `v_a - r - rho * max(0, r - b)`. The [`solver`] computes maxmin-utility
//! envy-free allocations (and the affine rent/utility variants) by first
//! solving at a rent high enough that every budget is exceeded and then
//! rebating down to the true rent, with every intermediate step carried out
//! in exact rational arithmetic. [`oracle`] is an independent
//! branch-and-bound used to cross-check results; [`incentives`] probes the
//! manipulation behaviour of the resulting mechanism.

pub mod assignment;
pub mod doc;
pub mod error;
pub mod gen;
pub mod incentives;
pub mod instances;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod polytope;
pub mod props;
pub mod rational;
pub mod solver;

pub use error::{Error, Result};
pub use model::{Allocation, Economy, Objective, ObjectiveKind, Preference};
pub use rational::Rational;
