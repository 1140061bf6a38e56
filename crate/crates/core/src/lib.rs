//! First eigenvalues of a nonlinear operator `F` relative to a second
//! nonlinear operator `G`, computed as infima of generalized Rayleigh
//! quotients on finite-difference Dirichlet meshes.
//!
//! Modules, bottom-up:
//! - [`grid`]: meshes, staggered gradient/divergence, quadrature, norms
//! - [`operators`]: the operator catalog, pairings, homogeneity degrees
//! - [`quotient`]: the quotient and its minimization on a sphere
//! - [`scaling`]: ray scans and matched/unmatched degree classification
//! - [`relations`]: numerical checks of eigenvalue identities and bounds
//! - [`solver`]: solvability of `F(u) - lambda G(u) = h` below the first
//!   eigenvalue, and the fixed-point reformulation

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod descent;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod operators;
pub mod probes;
pub mod quotient;
pub mod relations;
pub mod scaling;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{CellField, GridFunction, Mesh};
pub use operators::{HomogeneityDegree, LinearTag, OperatorKind, OperatorSpec};
pub use quotient::{EigenResult, InitKind, MinimizeConfig, QuotientProblem};
pub use relations::{Relation, RelationReport, Suite, SuiteParams};
pub use scaling::{PairClass, ScalingReport};
pub use solver::{Rhs, SolveConfig, SolveReport, SweepTable};
