//! Bregman-geometric tools on `R^d` and a cyclic Halpern-type solver for
//! common solutions of equilibrium problems and fixed-point problems of
//! quasi-Bregman nonexpansive maps.
//!
//! Layers, bottom-up:
//! - [`geometry`]: Legendre functions, Bregman distances, the V-function, dual averaging;
//! - [`sets`] and [`projection`]: closed convex sets and Bregman projections;
//! - [`equilibrium`]: monotone bifunctions and their resolvents;
//! - [`operators`]: quasi-Bregman nonexpansive self-maps;
//! - [`solver`]: the main recursion and the Mann-type baseline;
//! - [`harness`]: built-in instances, experiment specs, traces and verification sweeps.

pub mod equilibrium;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod operators;
pub mod projection;
pub mod sets;
pub mod solver;
pub mod tol;

pub use error::{Error, Result};
pub use geometry::{DualPoint, LegendreFunction, Point};
pub use sets::ConvexSet;
