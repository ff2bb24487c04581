//! Discrete integral functionals: the coupled regularizer and the weak-norm
//! fidelity with mean penalties.

use crate::breakdown::{EnergyBreakdown, FidelityWeights};
use crate::density::{frob, EdgeStop};
use crate::{Error, Result};
use field_core::{
    grad_scalar, grad_vec3, recompose, BrightnessField, ChromaticityField, ColorImage,
    ScalarField,
};
use gnorm::{gnorm, GNormConfig, GNormResult};

/// The three regularizer terms, itemized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegParts {
    /// `h^2 sum |grad b|`.
    pub tv_brightness: f64,
    /// `h^2 sum g(|grad b|) |grad c|`.
    pub weighted_chroma: f64,
    /// `h^2 sum |grad (b c)|`.
    pub tv_product: f64,
}

impl RegParts {
    pub fn sum(&self) -> f64 {
        self.tv_brightness + self.weighted_chroma + self.tv_product
    }
}

/// Discrete regularizer: brightness TV, edge-weighted chromaticity variation
/// and TV of the recomposed color field, all with forward differences.
pub fn energy_reg(b: &BrightnessField, c: &ChromaticityField, g: &EdgeStop) -> RegParts {
    assert!(
        b.values().same_shape(c.values()),
        "brightness and chromaticity shapes differ"
    );
    let gb = grad_scalar(b.values());
    let gc = grad_vec3(c.values());
    let gu = grad_vec3(&recompose(b, c));
    let h = b.h();
    let cell = h * h;
    let mut tv_b = 0.0;
    let mut weighted = 0.0;
    let mut tv_u = 0.0;
    for k in 0..gb.data().len() {
        let xi = gb.data()[k];
        let xi_n = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
        tv_b += xi_n;
        weighted += g.eval(xi_n) * frob(&gc.data()[k]);
        tv_u += frob(&gu.data()[k]);
    }
    RegParts {
        tv_brightness: cell * tv_b,
        weighted_chroma: cell * weighted,
        tv_product: cell * tv_u,
    }
}

/// Fidelity terms at one iterate, including the dual-norm certificates.
#[derive(Clone, Debug)]
pub struct FidelityParts {
    /// Dual norm of the mean-centered color residual `u0 - b c`.
    pub gnorm_color: f64,
    /// Dual norm of the mean-centered brightness residual `b0 - b`.
    pub gnorm_brightness: f64,
    /// `|integral of (u0 - b c)| / eps` (Euclidean norm of the 3-vector).
    pub mean_penalty_color: f64,
    /// `|integral of (b0 - b)| / eps`.
    pub mean_penalty_brightness: f64,
    /// `h^2 sum |c - c0|^2`.
    pub l2_chroma: f64,
    /// Weighted sum of the five terms above.
    pub fidelity: f64,
    /// Certificate for the color residual (flux + dual witness).
    pub color: GNormResult,
    /// Certificate for the brightness residual.
    pub brightness: GNormResult,
    /// Per-channel integral of the raw color residual.
    pub color_integral: [f64; 3],
    /// Integral of the raw brightness residual.
    pub brightness_integral: f64,
}

fn residual_channels(
    b: &BrightnessField,
    c: &ChromaticityField,
    datum_image: &ColorImage,
    datum_b: &BrightnessField,
) -> (Vec<ScalarField>, ScalarField) {
    let rows = b.rows();
    let cols = b.cols();
    let mut color: Vec<ScalarField> = (0..3).map(|_| ScalarField::zeros(rows, cols)).collect();
    for i in 0..rows {
        for j in 0..cols {
            let u0 = datum_image.get(i, j);
            let bv = b.values().get(i, j);
            let cv = c.values().get(i, j);
            for (k, ch) in color.iter_mut().enumerate() {
                ch.set(i, j, u0[k] - bv * cv[k]);
            }
        }
    }
    let bright = ScalarField::from_fn(rows, cols, |i, j| {
        datum_b.values().get(i, j) - b.values().get(i, j)
    });
    (color, bright)
}

fn centered(v: &ScalarField) -> ScalarField {
    let m = v.mean();
    ScalarField::from_fn(v.rows(), v.cols(), |i, j| v.get(i, j) - m)
}

fn l2_chroma(c: &ChromaticityField, datum_c: &ChromaticityField) -> f64 {
    let h = c.h();
    let mut acc = 0.0;
    for (a, b) in c.values().data().iter().zip(datum_c.values().data()) {
        let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
        acc += d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    }
    h * h * acc
}

/// Evaluates every fidelity term at `(b, c)` against the observed image and
/// its split `(b0, c0)`.
///
/// The dual-norm terms see mean-centered residuals, so they are always
/// well-posed; the removed means are charged through the `1/eps` penalties.
/// `eps` may be `f64::INFINITY`, which drops the penalties.
pub fn fidelity_parts(
    b: &BrightnessField,
    c: &ChromaticityField,
    datum_image: &ColorImage,
    datum_b: &BrightnessField,
    datum_c: &ChromaticityField,
    eps: f64,
    weights: &FidelityWeights,
    cfg: &GNormConfig,
) -> Result<FidelityParts> {
    if !(eps > 0.0) {
        return Err(Error::InvalidQuery(format!(
            "eps must be positive (got {eps})"
        )));
    }
    assert!(
        b.values().same_shape(c.values())
            && b.values().same_shape(datum_image)
            && b.values().same_shape(datum_b.values())
            && b.values().same_shape(datum_c.values()),
        "field shapes differ"
    );
    let (color_res, bright_res) = residual_channels(b, c, datum_image, datum_b);
    let color_integral = [
        color_res[0].integral(),
        color_res[1].integral(),
        color_res[2].integral(),
    ];
    let brightness_integral = bright_res.integral();

    let color_centered: Vec<ScalarField> = color_res.iter().map(centered).collect();
    let color_result = gnorm(&color_centered, cfg)?;
    let bright_result = gnorm(&[centered(&bright_res)], cfg)?;

    let mean_penalty_color = (color_integral[0] * color_integral[0]
        + color_integral[1] * color_integral[1]
        + color_integral[2] * color_integral[2])
        .sqrt()
        / eps;
    let mean_penalty_brightness = brightness_integral.abs() / eps;
    let l2 = l2_chroma(c, datum_c);

    let fidelity = weights.lambda_v * color_result.value
        + weights.lambda_b * bright_result.value
        + mean_penalty_color
        + mean_penalty_brightness
        + weights.lambda_c * l2;

    Ok(FidelityParts {
        gnorm_color: color_result.value,
        gnorm_brightness: bright_result.value,
        mean_penalty_color,
        mean_penalty_brightness,
        l2_chroma: l2,
        fidelity,
        color: color_result,
        brightness: bright_result,
        color_integral,
        brightness_integral,
    })
}

/// Weighted fidelity with mean penalties at scale `eps`.
pub fn energy_fid_eps(
    b: &BrightnessField,
    c: &ChromaticityField,
    datum_image: &ColorImage,
    datum_b: &BrightnessField,
    datum_c: &ChromaticityField,
    eps: f64,
    weights: &FidelityWeights,
    cfg: &GNormConfig,
) -> Result<f64> {
    Ok(fidelity_parts(b, c, datum_image, datum_b, datum_c, eps, weights, cfg)?.fidelity)
}

/// Strict fidelity: residuals enter the dual norm uncentered, so a residual
/// whose integral exceeds the zero-mean tolerance is rejected with an error
/// rather than penalized.
pub fn energy_fid(
    b: &BrightnessField,
    c: &ChromaticityField,
    datum_image: &ColorImage,
    datum_b: &BrightnessField,
    datum_c: &ChromaticityField,
    weights: &FidelityWeights,
    cfg: &GNormConfig,
) -> Result<f64> {
    let (color_res, bright_res) = residual_channels(b, c, datum_image, datum_b);
    let color_result = gnorm(&color_res, cfg)?;
    let bright_result = gnorm(&[bright_res], cfg)?;
    Ok(weights.lambda_v * color_result.value
        + weights.lambda_b * bright_result.value
        + weights.lambda_c * l2_chroma(c, datum_c))
}

/// Full objective at `(b, c)`: regularizer plus `eps`-penalized fidelity,
/// itemized.
#[allow(clippy::too_many_arguments)]
pub fn energy_total(
    b: &BrightnessField,
    c: &ChromaticityField,
    datum_image: &ColorImage,
    datum_b: &BrightnessField,
    datum_c: &ChromaticityField,
    g: &EdgeStop,
    eps: f64,
    weights: &FidelityWeights,
    cfg: &GNormConfig,
) -> Result<EnergyBreakdown> {
    let reg = energy_reg(b, c, g);
    let fid = fidelity_parts(b, c, datum_image, datum_b, datum_c, eps, weights, cfg)?;
    Ok(EnergyBreakdown {
        tv_brightness: reg.tv_brightness,
        weighted_chroma: reg.weighted_chroma,
        tv_product: reg.tv_product,
        regularizer: reg.sum(),
        gnorm_color: fid.gnorm_color,
        gnorm_brightness: fid.gnorm_brightness,
        mean_penalty_color: fid.mean_penalty_color,
        mean_penalty_brightness: fid.mean_penalty_brightness,
        l2_chroma: fid.l2_chroma,
        fidelity: fid.fidelity,
        total: reg.sum() + fid.fidelity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use field_core::{decompose, ColorImage, DecomposeOptions};

    fn split_image(left: [f64; 3], right: [f64; 3], n: usize) -> ColorImage {
        ColorImage::from_fn(n, n, |_, j| if j < n / 2 { left } else { right })
    }

    fn decompose_default(img: &ColorImage) -> (BrightnessField, ChromaticityField) {
        decompose(img, &DecomposeOptions::default()).unwrap()
    }

    #[test]
    fn regularizer_matches_hand_sum_on_orthogonal_phases() {
        // Unit-brightness phases along e1 and e3: the brightness term
        // vanishes and both chroma terms integrate the jump column.
        let img = split_image([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], 4);
        let (b, c) = decompose_default(&img);
        let reg = energy_reg(&b, &c, &EdgeStop::default());
        let sqrt2 = 2.0f64.sqrt();
        assert!(reg.tv_brightness.abs() < 1e-15);
        // Four rows, jump difference norm sqrt(2)/h, cell weight h^2, 4h = 1.
        assert!((reg.weighted_chroma - sqrt2).abs() < 1e-12);
        assert!((reg.tv_product - sqrt2).abs() < 1e-12);
    }

    #[test]
    fn regularizer_matches_hand_sum_on_unequal_brightness() {
        let left = [0.85, 0.25, 0.1];
        let right = [0.1, 0.35, 0.8];
        let n = 4;
        let img = split_image(left, right, n);
        let (b, c) = decompose_default(&img);
        let g = EdgeStop::Rational { a: 1.0 };
        let reg = energy_reg(&b, &c, &g);

        // Hand evaluation: a single jump column, four rows, h = 1/4.
        let nl = (left[0] * left[0] + left[1] * left[1] + left[2] * left[2]).sqrt();
        let nr = (right[0] * right[0] + right[1] * right[1] + right[2] * right[2]).sqrt();
        let db = nr - nl;
        let dc = [
            right[0] / nr - left[0] / nl,
            right[1] / nr - left[1] / nl,
            right[2] / nr - left[2] / nl,
        ];
        let dc_n = (dc[0] * dc[0] + dc[1] * dc[1] + dc[2] * dc[2]).sqrt();
        let du = [right[0] - left[0], right[1] - left[1], right[2] - left[2]];
        let du_n = (du[0] * du[0] + du[1] * du[1] + du[2] * du[2]).sqrt();
        let h = 1.0 / n as f64;
        // n rows contribute h^2 * |jump|/h each: total = |jump| since n h = 1.
        let expect_tv_b = db.abs();
        let expect_weighted = g.eval(db.abs() / h) * dc_n;
        let expect_tv_u = du_n;
        assert!((reg.tv_brightness - expect_tv_b).abs() < 1e-12);
        assert!((reg.weighted_chroma - expect_weighted).abs() < 1e-12);
        assert!((reg.tv_product - expect_tv_u).abs() < 1e-12);
    }

    #[test]
    fn fidelity_vanishes_at_the_datum() {
        let img = split_image([0.85, 0.25, 0.1], [0.1, 0.35, 0.8], 4);
        let (b, c) = decompose_default(&img);
        let parts = fidelity_parts(
            &b,
            &c,
            &img,
            &b,
            &c,
            1.0,
            &FidelityWeights::default(),
            &GNormConfig::default(),
        )
        .unwrap();
        assert!(parts.fidelity.abs() < 1e-12);
        assert!(parts.gnorm_color.abs() < 1e-12);
        assert!(parts.gnorm_brightness.abs() < 1e-12);
        assert!(parts.mean_penalty_color.abs() < 1e-12);
        assert!(parts.l2_chroma.abs() < 1e-15);
    }

    #[test]
    fn constant_brightness_shift_is_charged_through_the_penalty() {
        // Datum with unit brightness everywhere; shifting b by delta leaves
        // only constant residuals, so the dual-norm terms stay zero and the
        // penalties see delta * |domain| / eps exactly.
        let img = ColorImage::filled(4, 4, [0.6, 0.48, 0.64]);
        let (b0, c0) = decompose_default(&img);
        let delta = 0.3;
        let eps = 0.01;
        let mut b = b0.clone();
        for v in b.values_mut().data_mut() {
            *v += delta;
        }
        let parts = fidelity_parts(
            &b,
            &c0,
            &img,
            &b0,
            &c0,
            eps,
            &FidelityWeights::default(),
            &GNormConfig::default(),
        )
        .unwrap();
        // |u0| = 1, so the color residual is -delta * c0 with |c0| = 1 and the
        // domain has unit area: both penalties equal delta / eps = 30.
        assert!((parts.mean_penalty_brightness - delta / eps).abs() < 1e-9);
        assert!((parts.mean_penalty_color - delta / eps).abs() < 1e-9);
        assert!(parts.gnorm_color.abs() < 1e-9);
        assert!(parts.gnorm_brightness.abs() < 1e-9);
        assert!((parts.fidelity - 2.0 * delta / eps).abs() < 1e-7);
        // The limit eps -> infinity drops the penalties.
        let free = fidelity_parts(
            &b,
            &c0,
            &img,
            &b0,
            &c0,
            f64::INFINITY,
            &FidelityWeights::default(),
            &GNormConfig::default(),
        )
        .unwrap();
        assert_eq!(free.mean_penalty_brightness, 0.0);
        assert_eq!(free.mean_penalty_color, 0.0);
    }

    #[test]
    fn strict_fidelity_rejects_nonzero_mean_residuals() {
        let img = ColorImage::filled(4, 4, [0.6, 0.48, 0.64]);
        let (b0, c0) = decompose_default(&img);
        let mut b = b0.clone();
        for v in b.values_mut().data_mut() {
            *v += 0.25;
        }
        let err = energy_fid(
            &b,
            &c0,
            &img,
            &b0,
            &c0,
            &FidelityWeights::default(),
            &GNormConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::GNorm(gnorm::Error::NonZeroMean { .. })));
        // At the datum itself the strict fidelity is zero.
        let ok = energy_fid(
            &b0,
            &c0,
            &img,
            &b0,
            &c0,
            &FidelityWeights::default(),
            &GNormConfig::default(),
        )
        .unwrap();
        assert!(ok.abs() < 1e-12);
    }

    #[test]
    fn total_is_the_sum_of_its_parts() {
        let img = split_image([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], 4);
        let (b0, c0) = decompose_default(&img);
        // Perturb brightness in a zero-mean pattern so every term is active.
        let mut b = b0.clone();
        for (k, v) in b.values_mut().data_mut().iter_mut().enumerate() {
            *v += if k % 2 == 0 { 0.05 } else { -0.05 };
        }
        let g = EdgeStop::default();
        let w = FidelityWeights {
            lambda_v: 2.0,
            lambda_b: 0.5,
            lambda_c: 3.0,
        };
        let cfg = GNormConfig::default();
        let bd = energy_total(&b, &c0, &img, &b0, &c0, &g, 0.1, &w, &cfg).unwrap();
        let reg = energy_reg(&b, &c0, &g);
        let fid = fidelity_parts(&b, &c0, &img, &b0, &c0, 0.1, &w, &cfg).unwrap();
        assert_eq!(bd.regularizer, reg.sum());
        assert_eq!(bd.fidelity, fid.fidelity);
        assert_eq!(bd.total, reg.sum() + fid.fidelity);
        let recombined = w.lambda_v * bd.gnorm_color
            + w.lambda_b * bd.gnorm_brightness
            + bd.mean_penalty_color
            + bd.mean_penalty_brightness
            + w.lambda_c * bd.l2_chroma;
        assert!((bd.fidelity - recombined).abs() < 1e-12 * (1.0 + bd.fidelity));
        assert!(bd.gnorm_brightness > 0.0);
    }
}
