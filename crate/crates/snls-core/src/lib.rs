//! Numerical laboratory for the weakly damped stochastic nonlinear
//! Schrodinger equation
//!
//!     du = i (Lap u + lambda |u|^{2 sigma} u) dt - a u dt + i u . dW
//!
//! on a periodic box [-L, L)^d with linear multiplicative noise in the
//! Stratonovich sense. The crate provides the spectral field algebra, a
//! Strang split-step integrator whose substeps are exact flows, the
//! conserved/monotone functionals of the equation (charge, energy, variance,
//! variance momentum), Gagliardo-Nirenberg ground-state machinery, blow-up
//! certificates, and seeded Monte Carlo ensembles over noise realisations.
//!
//! Everything downstream of a master seed is deterministic, including the
//! parallel ensemble path, so artifacts reproduce bit for bit.

pub mod blowup;
pub mod config;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod field;
pub mod grid;
pub mod groundstate;
pub mod integrator;
pub mod montecarlo;
pub mod noise;
pub mod observables;
pub mod spectral;

pub use error::{Error, Result};
