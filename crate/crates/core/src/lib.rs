//! Coded-aperture camera simulation, classical depth-from-defocus, RGB-D
//! odometry and trajectory evaluation.

pub mod depth;
pub mod error;
pub mod eval;
pub mod fft;
pub mod geometry;
pub mod grid;
pub mod intrinsics;
pub mod io;
pub mod optics;
pub mod par;
pub mod pipeline;
pub mod render;
pub mod synth;
pub mod vo;

pub use error::{Error, Result};
pub use grid::{Plane, RgbImage};
pub use intrinsics::Intrinsics;
