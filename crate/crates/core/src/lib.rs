//! Numerical laboratory for hitting probabilities of fractional Brownian
//! motion with drift.
//!
//! The crate is organised bottom-up:
//!
//! * [`svf`] slowly/regularly varying families, the spectral-density to
//!   increment-variance quadrature and the drift modulus;
//! * [`metric`] time/state/product metrics, covering and packing numbers,
//!   box-counting dimension;
//! * [`sets`] Cantor-type constructions with their mass-distribution
//!   measures, graph clouds and Ahlfors-David certification;
//! * [`potential`] radial kernels, energies, discrete capacities
//!   (Frank-Wolfe with away steps), Hausdorff upper estimates and Frostman
//!   integrals;
//! * [`gauss`] fBm, the stationary-increment process `B^δ` and the mixed
//!   process, plus statistical validation;
//! * [`hitlab`] Monte Carlo hitting experiments built on everything above.
//!
//! Data-parallel inner loops go through [`exec`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iterators otherwise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod gauss;
pub mod hitlab;
pub mod metric;
pub mod potential;
pub mod quad;
pub mod rng;
pub mod sets;
pub mod svf;

pub use error::{Error, Result};

/// Crate version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
