//! Pixel-grid fields and discrete calculus for chromaticity–brightness image
//! processing.
//!
//! A color image `u` is split multiplicatively into a brightness part
//! `b = |u|` (Euclidean norm over the three channels, clamped to a working
//! range `[alpha, beta]`) and a chromaticity part `c = u / |u|` living on the
//! unit sphere. This crate provides the field containers for those quantities,
//! forward-difference gradients with their exact negative-adjoint divergences,
//! image and raw-field I/O, and seeded noise models used by the desk-scale
//! experiments.

pub mod decompose;
pub mod dump;
pub mod grid;
pub mod io;
pub mod noise;
pub mod ops;
pub mod synthetic;
pub mod vec3;

mod error;

pub use decompose::{decompose, recompose, DecomposeOptions};
pub use dump::{read_cbf1, write_cbf1, Cbf1};
pub use error::Error;
pub use grid::{
    BrightnessField, ChromaticityField, ColorImage, Field, MatrixField, ScalarField, Vec3Field,
    VectorField2,
};
pub use io::{load_image, save_image, SaveReport};
pub use noise::{add_noise, NoiseModel};
pub use ops::{div_mat, div_vec, dot_scalar, grad_scalar, grad_vec3};

/// Default lower brightness bound.
pub const DEFAULT_ALPHA: f64 = 0.05;
/// Default upper brightness bound.
pub const DEFAULT_BETA: f64 = 2.0;

pub type Result<T> = std::result::Result<T, Error>;
