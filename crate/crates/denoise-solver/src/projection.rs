//! Sphere feasibility: radial normalization with a base-point projection
//! fallback for near-zero vectors.
//!
//! `project_pi_y(y, s)` sends `s` to the intersection of the ray from `y`
//! through `s` with the unit sphere. For `|y| < 1/2` this is defined for
//! every `s != y`, fixes the sphere pointwise, and is smooth near it, which
//! makes it a robust rescue for chromaticity vectors that a gradient step
//! has dragged close to the origin (where plain normalization is unstable).

use crate::{Error, Result};
use field_core::vec3;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn check_base(y: [f64; 3]) -> Result<()> {
    if vec3::norm(y) >= 0.5 {
        return Err(Error::InvalidParams(format!(
            "projection base point must satisfy |y| < 1/2 (got |y| = {})",
            vec3::norm(y)
        )));
    }
    Ok(())
}

/// Projects `s` onto the unit sphere along the ray from `y` through `s`.
///
/// Requires `|y| < 1/2` and `s != y`; the output has unit norm to rounding,
/// and points already on the sphere are fixed exactly.
pub fn project_pi_y(y: [f64; 3], s: [f64; 3]) -> Result<[f64; 3]> {
    check_base(y)?;
    let d = vec3::sub(s, y);
    let q2 = vec3::dot(d, d);
    if q2 < 1e-300 {
        return Err(Error::DegenerateProjection);
    }
    let p = vec3::dot(y, d);
    let disc = p * p + q2 * (1.0 - vec3::dot(y, y));
    let t = (-p + disc.sqrt()) / q2;
    Ok(vec3::add(y, vec3::scale(d, t)))
}

/// Jacobian of [`project_pi_y`] in the ambient space, closed form at points
/// `s` of the unit sphere.
pub fn grad_pi_y(y: [f64; 3], s: [f64; 3]) -> Result<[[f64; 3]; 3]> {
    check_base(y)?;
    let d = vec3::sub(s, y);
    let q2 = vec3::dot(d, d);
    if q2 < 1e-300 {
        return Err(Error::DegenerateProjection);
    }
    let p = vec3::dot(y, d);
    // On the sphere the ray parameter is 1 and the square root collapses to
    // 1 - y.s, which stays >= 1/2 for |y| < 1/2.
    let mu = 1.0 - vec3::dot(y, s);
    let coef_y = (p / mu - 1.0) / q2;
    let coef_d = ((1.0 - vec3::dot(y, y)) / mu - 2.0) / q2;
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let kron = if i == j { 1.0 } else { 0.0 };
            m[i][j] = kron + d[i] * (coef_y * y[j] + coef_d * d[j]);
        }
    }
    Ok(m)
}

/// Deterministic point of the open ball of radius `radius`, from a seed.
pub fn sample_ball(seed: u64, radius: f64) -> [f64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v = [
            rng.random_range(-radius..radius),
            rng.random_range(-radius..radius),
            rng.random_range(-radius..radius),
        ];
        let n = vec3::norm(v);
        if n < radius * 0.99 && n > radius * 0.01 {
            return v;
        }
    }
}

/// Returns `c / |c|` when `|c| >= eta_min`; otherwise rescues the direction
/// through the base-point projection with `y` drawn from the seed inside the
/// ball of radius 1/2.
pub fn project_sphere(c: [f64; 3], eta_min: f64, seed: u64) -> [f64; 3] {
    let n = vec3::norm(c);
    if n >= eta_min {
        return vec3::scale(c, 1.0 / n);
    }
    let mut bump = 0;
    loop {
        let y = sample_ball(seed.wrapping_add(bump), 0.5);
        if let Ok(s) = project_pi_y(y, c) {
            return s;
        }
        bump += 1;
    }
}

/// Same rescue with a fixed, caller-managed base point (the solver draws one
/// per run so per-pixel projections stay allocation- and RNG-free).
#[inline]
pub(crate) fn project_sphere_with(c: [f64; 3], eta_min: f64, y: [f64; 3]) -> [f64; 3] {
    let n = vec3::norm(c);
    if n >= eta_min {
        return vec3::scale(c, 1.0 / n);
    }
    project_pi_y(y, c).unwrap_or([0.0, 0.0, 1.0])
}
