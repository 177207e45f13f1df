//! Viscosity solutions of evolutionary Hamilton-Jacobi equations
//!
//! ```text
//! u_t + H(x, u, u_x) = 0,    u(x, 0) = phi(x)
//! ```
//!
//! on the circle of circumference one, for Hamiltonians that may depend on
//! the unknown `u` without being monotone or Lipschitz in it.
//!
//! The solution is computed as the smallest terminal value `U(t)` over all
//! characteristics `(X, U, P)` that start on the graph of `phi` and reach
//! the query point, and is cross-checked against a monotone Lax-Friedrichs
//! scheme and the exact Hopf-Lax formula for `H = p^2/2`.
//!
//! Module map:
//!
//! * [`models`] - Hamiltonian catalog, Legendre transform, assumption checks,
//!   `u`-truncation.
//! * [`charflow`] - adaptive integration of the characteristic system.
//! * [`fundamental`] - two-point shooting for the fundamental solution
//!   `h_{x0,u0}(x,t)`.
//! * [`field`] - global solution by forward characteristic flooding and by
//!   per-query shooting.
//! * [`oracle`] - Lax-Friedrichs scheme, Hopf-Lax evaluator, field comparison.
//! * [`analysis`] - truncation, bound, semiconcavity, triangle and
//!   sensitivity experiments.
//! * [`cli`] - key=value configuration and deterministic CSV/JSON output.

pub mod analysis;
pub mod charflow;
pub mod cli;
pub mod error;
pub mod field;
pub mod fundamental;
pub mod models;
pub mod numerics;
pub mod oracle;
pub mod output;

pub use charflow::{char_rhs, flow, flow_roundtrip_error, PhasePoint, Trajectory};
pub use error::{Error, Result};

pub use field::{solve_forward_flood, solve_via_shooting, GridSpec, InitialData, SeedSpec, SolutionField};
pub use fundamental::{fundamental_solution, solve_bvp, FundamentalValue, ShootingConfig};
pub use models::{Hamiltonian, HamiltonianModel, ModelKind, TruncatedModel};
