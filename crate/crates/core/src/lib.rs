//! Curvelet sparse regularization (CSR) and its angular-range adapted
//! variant (A-CSR) for limited-angle tomography.

pub mod cli;
pub mod curvelet;
pub mod error;
pub mod experiments;
mod fft;
pub mod geometry;
pub mod io;
pub mod radon;
pub mod solver;
pub mod visibility;
pub mod windows;

pub use curvelet::{CoeffSet, CurveletSystem};
pub use error::{Error, Result};
pub use geometry::{AngularRange, CurveletIndex, Image, Sinogram};
pub use radon::{FbpFilter, FilterKind, RadonGeometry};
pub use solver::{ForwardOperator, SolverConfig, ThresholdMode};
pub use visibility::VisibilityPartition;
