//! Seeded synthetic test images used by the solver benchmarks and probes.

use crate::grid::ColorImage;
use crate::noise::{add_noise, NoiseModel};
use crate::vec3;

/// Two-phase image split vertically at `cols / 2`; both colors have
/// brightness well inside the default working range so decomposition is
/// lossless.
pub fn two_phase(rows: usize, cols: usize) -> ColorImage {
    let left = [0.85, 0.25, 0.1];
    let right = [0.1, 0.35, 0.8];
    ColorImage::from_fn(rows, cols, |_, j| if j < cols / 2 { left } else { right })
}

/// Standard desk-scale benchmark: a two-phase image corrupted by seeded
/// chromaticity rotation. Returns `(clean, noisy)`; brightness is untouched
/// by the noise, so the corruption lives entirely on the sphere.
pub fn benchmark_pair(n: usize, seed: u64) -> (ColorImage, ColorImage) {
    let clean = two_phase(n, n);
    let noisy = add_noise(&clean, &NoiseModel::ChromaRotation { sigma_theta: 0.35 }, seed);
    (clean, noisy)
}

/// Peak signal-to-noise ratio in dB with peak value 1.0, averaged over the
/// three channels.
pub fn psnr(reference: &ColorImage, candidate: &ColorImage) -> f64 {
    assert!(reference.same_shape(candidate), "shape mismatch");
    let mut mse = 0.0;
    for (a, b) in reference.data().iter().zip(candidate.data()) {
        let d = vec3::sub(*a, *b);
        mse += vec3::dot(d, d);
    }
    mse /= (reference.data().len() * 3) as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}
