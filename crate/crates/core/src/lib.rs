//! Low-storage commutator-free Lie group Runge-Kutta integrators.
//!
//! The crate integrates `dY/dt = A(t, Y) Y` where `A` maps into a matrix Lie
//! algebra, with the 2N-storage commutator-free format
//!
//! ```text
//! dY <- A_k dY + h A(t + C_k h, Y)
//! Y  <- exp(B_k dY) Y              k = 1..s
//! ```
//!
//! alongside classical, Williamson 2N, Munthe-Kaas and general
//! commutator-free reference integrators, the benchmark problems used to
//! study them, and a convergence harness.

pub mod elliptic;
pub mod harness;
pub mod integrators;
pub mod problems;
pub mod smallmat;
pub mod tableau;

pub use num_complex::Complex64;
