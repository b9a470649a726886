//! Numerical laboratory for mean curvature flow of cylindrical graphs through
//! neckpinch formation, in adaptively rescaled (blow-up) variables.
//!
//! The crate simulates the quasilinear graph flow, performs the 7-mode
//! "optimal coordinate" decomposition of the evolving neck, and measures the
//! universal asymptotics and estimate margins that drive the analysis:
//!
//! * [`profile`] — closed-form neck profiles, coefficient functions, weights.
//! * [`field`] — sampled graph fields, derivative stencils, serialization.
//! * [`surface`] — cylindrical frames, rigid motions, graph resampling.
//! * [`solver`] — the physical and rescaled flow with its modulation clock.
//! * [`decomp`] — orthogonal decomposition, optimal refits, gauge fields.
//! * [`spectral`] — oscillator spectra, projections and the propagator.
//! * [`diagnostics`] — Lyapunov functionals, condition margins, law fits.
//! * [`initial`] — parametric initial surfaces and assumption checking.
//! * [`config`] / [`report`] / [`cli`] — batch orchestration and output.

pub mod cli;
pub mod config;
pub mod decomp;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod initial;
pub mod profile;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod solver;
pub mod spectral;
pub mod surface;

/// Concrete scalar used by the discretized pipeline.
///
/// The closed-form layer in [`profile`] is generic over [`scalar::Real`];
/// everything that touches grids, quadrature or Newton solves is instantiated
/// at this type.
pub type Scalar = f64;

pub use error::{Error, Result};
pub use field::GraphField;
pub use profile::{BetaClock, FormalProfile, StepProfile, WeightedMeasure};
