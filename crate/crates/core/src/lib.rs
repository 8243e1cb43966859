//! Risk-sensitive control of jump diffusions through principal eigenvalues.
//!
//! The long-run risk-sensitive value `lim (1/T) log E exp(∫₀ᵀ c(X_s, ζ_s) ds)`
//! of a controlled jump diffusion is computed as the principal eigenvalue of a
//! monotone finite-difference discretization of the generator plus the cost,
//! optimized over Markov controls by policy iteration and extrapolated along
//! an expanding ladder of bounded domains. Monte Carlo estimators provide an
//! independent check.
//!
//! ```
//! use riskeig::{principal_eigenpair, assemble_operator, GridDomain, MarkovPolicy, ModelSpec};
//!
//! let model = ModelSpec::builder(1).build().unwrap();
//! let grid = GridDomain::new(&[(-1.0, 1.0)], &[100]).unwrap();
//! let op = assemble_operator(&model, &grid, &MarkovPolicy::constant(&grid, 0), true).unwrap();
//! let pair = principal_eigenpair(&op, 1e-10, 10_000).unwrap();
//! assert!((pair.lambda + std::f64::consts::PI.powi(2) / 8.0).abs() < 1e-3);
//! ```

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose, and stencil
// loops index several parallel arrays by axis.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod discretize;
pub mod eigen;
pub mod error;
pub mod exitrate;
pub mod maxproblem;
pub mod model;
pub mod simulate;
pub mod stats;

pub use discretize::{assemble_operator, GridDomain, MarkovPolicy, SparseOperator};
pub use eigen::{
    expanding_domain_limit, hjb_policy_iteration, principal_eigenpair, EigenPair, ExpandingDomainReport, HjbSolution, Stability,
};
pub use error::{Error, ErrorKind, Result};
pub use exitrate::{exit_rate_problem, ExitRateSolution};
pub use maxproblem::{max_value_problem, MaxProblemReport};
pub use model::catalog::CatalogModel;
pub use model::{check_lyapunov_drift, Action, ActionSet, Atom, JumpKernel, LyapunovSpec, ModelSpec, Sense};
pub use simulate::{estimate_exit_survival, estimate_risk_value, simulate_path, Control, SimConfig};
