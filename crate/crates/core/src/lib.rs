//! Discrete Poisson Malliavin calculus and SPDE discretization benchmarks.
//!
//! The library has two halves that share a common representation of point
//! configurations and spectral coefficient vectors:
//!
//! * **Point-process calculus** — finite point configurations standing in for a
//!   Poisson random measure on a truncated intensity window, the add/remove-one-atom
//!   operators, the difference operator `D_x F = F(N + δ_x) − F(N)`, the pathwise
//!   Kabanov–Skorohod integral `δ(Φ)`, and Monte-Carlo / exact-pathwise verifiers
//!   for the classical identities (Mecke, chain/product rule, duality, commutation,
//!   isometry, adaptedness).
//! * **SPDE discretization** — spectral Galerkin / implicit Euler schemes for the
//!   linear stochastic heat equation on (0,1) driven by α-stable Lévy noise
//!   (subordinated Q-Wiener or impulsive cylindrical), a jump-exact reference
//!   solution coupled to the scheme through a shared event stream, and a harness
//!   measuring strong and weak convergence rates with log-log slope fits.
//!
//! Everything is deterministic given a master seed: per-path RNG streams are
//! derived by counter-based splitting, parallel reductions are index-ordered, and
//! reports serialize to stable JSON/CSV.

pub mod fit;
pub mod harness;
pub mod levy;
pub mod malliavin;
pub mod measure;
pub mod report;
pub mod rng;
pub mod spde;
pub mod svg;
pub mod vector;

pub use harness::{RateReport, TestFunctional, TimeMeasure};
pub use measure::{IntensityWindow, PointConfiguration, Rect};
pub use report::{CheckMode, IdentityReport};
pub use spde::{CoeffVector, SchemeGrid, SpectralOperator};
