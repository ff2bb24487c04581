//! Seeded noise models for synthetic experiments.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::grid::ColorImage;
use crate::vec3;

/// Noise models; every model is deterministic for a fixed seed.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseModel {
    /// Independent per-channel Gaussian noise, output clamped to `[0, inf)`.
    GaussianRgb { sigma: f64 },
    /// Rotates each pixel's chromaticity by an angle `~N(0, sigma_theta^2)`
    /// about a uniformly random axis; brightness is preserved exactly.
    ChromaRotation { sigma_theta: f64 },
    /// Adds a deterministic zero-mean oscillation of `k` periods per axis and
    /// amplitude `amp` to every channel.
    Texture { k: u32, amp: f64 },
}

/// Applies `model` to `img` with the given seed.
pub fn add_noise(img: &ColorImage, model: &NoiseModel, seed: u64) -> ColorImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, cols) = (img.rows(), img.cols());
    match *model {
        NoiseModel::GaussianRgb { sigma } => {
            let mut out = img.clone();
            for px in out.data_mut() {
                for v in px.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = (*v + sigma * z).max(0.0);
                }
            }
            out
        }
        NoiseModel::ChromaRotation { sigma_theta } => {
            let mut out = img.clone();
            for px in out.data_mut() {
                let r = vec3::norm(*px);
                // Consume the same number of samples per pixel regardless of
                // the branch so near-black pixels do not shift the stream.
                let axis: [f64; 3] = rand_distr::UnitSphere.sample(&mut rng);
                let z: f64 = rng.sample(StandardNormal);
                if r < 1e-12 {
                    continue;
                }
                let c = vec3::scale(*px, 1.0 / r);
                let rotated = vec3::rotate_about(c, axis, sigma_theta * z);
                *px = vec3::scale(rotated, r);
            }
            out
        }
        NoiseModel::Texture { k, amp } => {
            // Half-pixel-shifted cosine products sum to zero exactly along
            // each axis whenever k is not a multiple of the side length.
            let two_pi = std::f64::consts::TAU;
            ColorImage::from_fn(rows, cols, |i, j| {
                let tx = (two_pi * k as f64 * (j as f64 + 0.5) / cols as f64).cos();
                let ty = (two_pi * k as f64 * (i as f64 + 0.5) / rows as f64).cos();
                let t = amp * tx * ty;
                let px = img.get(i, j);
                [px[0] + t, px[1] + t, px[2] + t]
            })
        }
    }
}
