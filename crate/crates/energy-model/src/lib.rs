//! Energy densities and integral functionals for chromaticity–brightness
//! denoising.
//!
//! The model couples a total-variation regularizer acting on a brightness
//! field `b` in `[alpha, beta]` and a sphere-valued chromaticity field `c`
//! with a weak-norm fidelity. The pointwise regularizer density is
//!
//! ```text
//! f(r, s, xi, eta) = |xi| + g(|xi|) |eta| + |r eta + s (x) xi|
//! ```
//!
//! with `xi` a brightness gradient (2-vector), `eta` a chromaticity Jacobian
//! (3x2 matrix, Frobenius norms throughout), `s (x) xi` the outer product and
//! `g` a decreasing edge-stopping weight. Alongside `f` this crate provides
//! its strong-recession density (positively 1-homogeneous limit), the
//! tangential projection onto the sphere's tangent planes, a globally defined
//! cut-off extension of `f` used by cell-problem solvers, the discrete
//! integral functionals (regularizer and fidelity), and the relaxed bulk+jump
//! energy of piecewise-constant states.

pub mod breakdown;
pub mod density;
pub mod functional;
pub mod pcf;
pub mod tangent;

mod error;

pub use breakdown::{EnergyBreakdown, FidelityWeights};
pub use density::{
    density_f, density_f_inf, density_f_tilde, edge_stop_eval, frob, s_outer_xi,
    tangential_project, DensityQuery, EdgeStop,
};
pub use error::Error;
pub use functional::{
    energy_fid, energy_fid_eps, energy_reg, energy_total, fidelity_parts, FidelityParts, RegParts,
};
pub use pcf::{energy_relaxed_pc, PhaseState, PiecewiseConstantField};
pub use tangent::{arc_angle, slerp, tangent_basis};

pub type Result<T> = std::result::Result<T, Error>;
