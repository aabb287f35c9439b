//! Singular vertex couplings on star quantum graphs.
//!
//! The crate covers four layers that build on each other:
//!
//! * [`coupling`]: self-adjoint vertex conditions `A Ψ(0) + B Ψ'(0) = 0`, their
//!   unitary form `U`, and the named parameter families (δ, δ′_s, δ′,
//!   permutation-symmetric, the 2n-parameter family, separated, `D + S`).
//! * [`chain`]: exact transport of boundary data through δ interactions on
//!   halflines, effective boundary conditions and δ-chain approximation
//!   schedules.
//! * [`kernels`]: closed-form resolvent kernels (Krein's formula) of the limit
//!   operators and of the two-δ-per-edge approximating operators.
//! * [`convergence`] and [`augmented`]: Hilbert–Schmidt norms of kernel
//!   differences, rate fitting, and the star graph with added V-shaped edges.

pub mod augmented;
pub mod chain;
pub mod convergence;
pub mod coupling;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod serde_complex;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Default relative tolerance for validation and rank decisions.
pub const DEFAULT_TOL: f64 = 1e-10;
