//! Numerical analysis of three-dimensional Filippov systems `Z = (X, Y)` with
//! switching surface `Σ = {f = 0}`.
//!
//! The pipeline is bottom-up: [`fields`] (closed-form fields with exact Lie
//! derivatives) → [`manifold`] (projection, region labels, mesh) →
//! [`tangency`] (fold/cusp curves and fold-fold points) → [`sliding`]
//! (normalized sliding field, pseudo-equilibria, separatrices, winding index)
//! → [`blocks`] (Σ-blocks) → [`flow`] (piecewise integration, involutions,
//! return maps) → [`stability`] (three-valued condition checks and the
//! aggregate verdict).

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod blocks;
pub mod config;
pub mod fields;
pub mod flow;
pub mod linalg;
pub mod manifold;
pub mod ode;
pub mod sliding;
pub mod stability;
pub mod tangency;
pub mod verdict;

pub type Point3 = nalgebra::Vector3<f64>;

pub use config::{ConfigError, Effort, Resolution, Tolerances};
pub use fields::{DomainBox, PwsSystem, Side};
pub use verdict::{Status, Verdict, Witness};
