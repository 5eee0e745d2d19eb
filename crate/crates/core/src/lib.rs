//! Numerical laboratory for the α-curve shortening flow of convex curves,
//! written in terms of support functions.

pub mod cli;
pub mod entropy;
pub mod error;
pub mod flow;
pub mod fourier;
pub mod geometry;
pub mod io;
pub mod modes;
pub mod ode;
pub mod roots;
pub mod shrinker;
pub mod spectral;

pub use error::{Error, Result};
pub use geometry::{AngularGrid, SupportFunction};
