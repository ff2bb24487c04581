//! Multiplicative brightness/chromaticity decomposition and its inverse.

use crate::grid::{BrightnessField, ChromaticityField, ColorImage, ScalarField, Vec3Field};
use crate::vec3;
use crate::{Error, Result, DEFAULT_ALPHA, DEFAULT_BETA};

/// Options for [`decompose`].
#[derive(Clone, Debug)]
pub struct DecomposeOptions {
    /// Lower brightness bound (must be positive).
    pub alpha: f64,
    /// Upper brightness bound.
    pub beta: f64,
    /// In strict mode a pixel with `|u| < zero_tol` is an error; the default
    /// lenient mode substitutes `fallback` for the chromaticity there.
    pub strict: bool,
    pub zero_tol: f64,
    /// Unit vector used for near-black pixels in lenient mode.
    pub fallback: [f64; 3],
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        let t = 1.0 / 3f64.sqrt();
        DecomposeOptions {
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            strict: false,
            zero_tol: 1e-12,
            fallback: [t, t, t],
        }
    }
}

/// Splits `u` into brightness `clamp(|u|, alpha, beta)` and unit chromaticity
/// `u / |u|`.
///
/// Near-black pixels (`|u| < zero_tol`) take the configured fallback direction
/// in lenient mode and raise [`Error::ZeroBrightness`] in strict mode.
pub fn decompose(
    img: &ColorImage,
    opts: &DecomposeOptions,
) -> Result<(BrightnessField, ChromaticityField)> {
    assert!(
        0.0 < opts.alpha && opts.alpha < opts.beta,
        "need 0 < alpha < beta"
    );
    let (rows, cols) = (img.rows(), img.cols());
    let mut b = ScalarField::zeros(rows, cols);
    let mut c = Vec3Field::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let u = img.get(i, j);
            let r = vec3::norm(u);
            if r < opts.zero_tol {
                if opts.strict {
                    return Err(Error::ZeroBrightness { row: i, col: j });
                }
                b.set(i, j, opts.alpha);
                c.set(i, j, opts.fallback);
            } else {
                b.set(i, j, r.clamp(opts.alpha, opts.beta));
                c.set(i, j, vec3::scale(u, 1.0 / r));
            }
        }
    }
    Ok((
        BrightnessField::new(b, opts.alpha, opts.beta),
        ChromaticityField::new(c),
    ))
}

/// Pointwise product `b * c`; the inverse of [`decompose`] wherever the
/// original brightness lay inside `[alpha, beta]`.
pub fn recompose(b: &BrightnessField, c: &ChromaticityField) -> ColorImage {
    assert!(
        b.values().same_shape(c.values()),
        "brightness/chromaticity shape mismatch"
    );
    ColorImage::from_fn(b.rows(), b.cols(), |i, j| {
        vec3::scale(c.values().get(i, j), b.values().get(i, j))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn black_pixel_lenient_takes_fallback() {
        let mut img = ColorImage::zeros(2, 2);
        img.set(0, 1, [0.3, 0.4, 0.0]);
        let opts = DecomposeOptions::default();
        let (b, c) = decompose(&img, &opts).unwrap();
        assert_eq!(b.values().get(0, 0), opts.alpha);
        let t = 1.0 / 3f64.sqrt();
        assert_eq!(c.values().get(0, 0), [t, t, t]);
        // The non-black pixel decomposes exactly.
        assert!((b.values().get(0, 1) - 0.5).abs() < 1e-15);
        let cc = c.values().get(0, 1);
        assert!((cc[0] - 0.6).abs() < 1e-15 && (cc[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn black_pixel_strict_errors() {
        let img = ColorImage::zeros(2, 2);
        let opts = DecomposeOptions {
            strict: true,
            ..Default::default()
        };
        match decompose(&img, &opts) {
            Err(Error::ZeroBrightness { row: 0, col: 0 }) => {}
            other => panic!("expected ZeroBrightness, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_brightness_clamps() {
        let img = ColorImage::filled(1, 1, [2.0, 2.0, 2.0]); // |u| = 2*sqrt(3) > beta
        let opts = DecomposeOptions::default();
        let (b, _) = decompose(&img, &opts).unwrap();
        assert_eq!(b.values().get(0, 0), opts.beta);
    }

    proptest! {
        #[test]
        fn roundtrip_where_in_range(seed in any::<u64>()) {
            let mut state = seed | 1;
            let mut next = move || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64
            };
            let img = ColorImage::from_fn(3, 3, |_, _| [next(), next(), next()]);
            let opts = DecomposeOptions::default();
            let (b, c) = decompose(&img, &opts).unwrap();
            let back = recompose(&b, &c);
            for (orig, rt) in img.data().iter().zip(back.data()) {
                let r = crate::vec3::norm(*orig);
                if r >= opts.alpha && r <= opts.beta {
                    for k in 0..3 {
                        prop_assert!((orig[k] - rt[k]).abs() <= 1e-12);
                    }
                }
            }
        }
    }
}
