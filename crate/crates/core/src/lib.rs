//! Model-free price bounds for path-dependent options on lattices of
//! cadlag step paths.
//!
//! The crate discretizes paths by exit times of small balls, shifts the exit
//! times onto admissible duration grids, projects values onto dyadic grids,
//! and prices payoffs by linear programming over martingale weights on the
//! resulting finite path lattice. Dual prices lift back to explicit
//! semi-static hedging portfolios on the original path space, and every
//! numerical claim is certified by an independent check: exhaustive oracles
//! for the Skorokhod metric and small programs, recomputed residuals for the
//! solver, and pathwise verification for hedges.

pub mod discretization;
pub mod grid;
pub mod paths;
pub mod payoffs;
pub mod hedging;
pub mod lattice;
pub mod lp;
pub mod measures;
pub mod mot;
pub mod oracle;
pub mod sampling;
pub mod tree;
