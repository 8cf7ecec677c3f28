//! Numerical kernels used by the solvers.

pub mod ellipsoid;
pub mod lambert;
pub mod simplex;

pub use ellipsoid::{ellipsoid_maximize, ellipsoid_maximize_until, Ellipsoid, EllipsoidOptions, EllipsoidOutcome, OracleAnswer};
pub use lambert::{lambert_w0, tilde_f};
pub use simplex::{simplex_solve, LinearProgram, LpSolution, LpStatus};
