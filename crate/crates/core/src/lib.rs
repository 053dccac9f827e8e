//! Resonances of the periodically driven delta potential
//!
//! i psi_t = -psi_xx -+ 2 delta(x) (1 + 2 r cos(omega t)) psi
//!
//! located as zeros of a discrete Wronskian on chosen sheets of the Laplace
//! variable, with residues, parameter sweeps, a contour-deformed
//! reconstruction of psi(x, t) and a Crank–Nicolson cross-check.

pub mod barriermap;
pub mod branchcut;
pub mod cli;
pub mod error;
pub mod forcing;
pub mod modesolver;
pub mod quadrature;
pub mod resonances;
pub mod selftest;
pub mod tdseoracle;
pub mod timedomain;
pub mod tridiag;
pub mod wronskian;

pub use branchcut::{ModelParams, PotentialKind, Sheet, SheetConfig};
pub use error::{FloquetError, Result};
pub use forcing::InitialWavefunction;
pub use num_complex::Complex64;
