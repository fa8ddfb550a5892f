//! Numerical toolkit for the tangent-space structure of metric spaces at a
//! base point.
//!
//! Given a metric space X, a point a, and a normalizing sequence r_n -> 0,
//! sequences converging to a are compared through the scaled distance
//! d(x_n, y_n) / r_n. Families in which every pair has a finite limit carry
//! a pseudometric; its metric identification is a quotient space describing
//! the infinitesimal geometry of X at a. This crate estimates those limits
//! numerically, builds the quotients, differentiates maps between spaces at
//! the level of quotients, and decides when two subspaces through a common
//! point are infinitesimally interchangeable via sup-inf profiles.
//!
//! Modules:
//! - [`space`]: metric space handles (Euclidean, finite matrix) and points.
//! - [`chart`]: parametrized subspaces (curves, surfaces, solids, point
//!   sets) with sphere-shell and ball samplers.
//! - [`limits`]: probe schedules and tail-limit classification.
//! - [`sequences`]: point sequences, normalizing sequences, selectors.
//! - [`pretangent`]: stable families, quotients, subsequence probes, and
//!   normalizing-pair classification.
//! - [`derivative`]: quotient-level derivatives of pointed maps.
//! - [`tangency`]: directed sup-inf comparison of subspaces and the
//!   strong-tangency decision procedure.
//! - [`gallery`]: worked geometric scenarios and embeddability checks.
//! - [`cli`]: JSON/CSV config and report plumbing for the binary.

// Validation guards negate float comparisons on purpose: NaN must fail the
// guard, which a `<=` rewrite would silently accept. Matrix loops index on
// both sides of the diagonal; iterator rewrites obscure that symmetry.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod chart;
pub mod cli;
pub mod derivative;
pub mod error;
pub mod gallery;
pub mod limits;
pub mod numerics;
pub mod pretangent;
pub mod sequences;
pub mod space;
pub mod tangency;

pub use error::{Error, Result};
