//! Sub-Riemannian optimal transport and congested traffic equilibria on the
//! Heisenberg group ℍⁿ.
//!
//! The crate is organized around five layers:
//!
//! - [`hgroup`]: exact group arithmetic in canonical coordinates of the first
//!   kind (composition, inverse, dilations, the left-invariant horizontal
//!   frame).
//! - [`geodesy`]: closed-form minimizing geodesics, the Carnot-Carathéodory
//!   distance, a canonical geodesic selection, finite-difference Jacobians of
//!   the contraction maps and a Monte Carlo check of the measure contraction
//!   inequality.
//! - [`otcore`]: discrete Monge-Kantorovich solvers for CC costs — an exact
//!   transportation simplex with dual potentials, a lexicographic secondary
//!   solver, and cyclical-monotonicity certification.
//! - [`density`]: transport densities spread along geodesics, displacement
//!   interpolation, L^p norms, and the quantitative interpolation bounds.
//! - [`congestion`]: a horizontal lattice discretization carrying weighted
//!   shortest-path metrics and a Frank-Wolfe solver for congested transport
//!   with Wardrop equilibrium certificates.
//!
//! The `examples/` directory contains one runnable example per capability;
//! the `hcot` binary runs JSON-configured scenarios (see [`scenario`]).

pub mod congestion;
pub mod density;
pub mod error;
pub mod geodesy;
pub mod otcore;
pub mod hgroup;

pub use error::{Error, Result};
