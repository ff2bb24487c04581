//! Pointwise densities: the coupled TV integrand, its recession limit and the
//! cut-off extension off the constraint manifold.

use crate::{Error, Result};
use field_core::vec3;

/// Decreasing edge-stopping weight with `g(0) = 1`.
///
/// Both families are smooth functions of `t^2`, so `t -> g(|xi|)` is
/// differentiable in `xi` even at zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EdgeStop {
    /// `1 / (1 + (t/a)^2)`.
    Rational { a: f64 },
    /// `exp(-(t/a)^2)`.
    Gaussian { a: f64 },
}

impl Default for EdgeStop {
    fn default() -> Self {
        EdgeStop::Rational { a: 1.0 }
    }
}

impl EdgeStop {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            EdgeStop::Rational { a } => 1.0 / (1.0 + (t / a) * (t / a)),
            EdgeStop::Gaussian { a } => (-(t / a) * (t / a)).exp(),
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match *self {
            EdgeStop::Rational { a } => {
                let q = 1.0 + (t / a) * (t / a);
                -2.0 * t / (a * a * q * q)
            }
            EdgeStop::Gaussian { a } => -2.0 * t / (a * a) * (-(t / a) * (t / a)).exp(),
        }
    }
}

/// Evaluates the edge-stopping weight at `t >= 0`.
pub fn edge_stop_eval(g: &EdgeStop, t: f64) -> f64 {
    g.eval(t)
}

/// A point query for the densities: brightness value `r`, unit chromaticity
/// `s`, brightness gradient `xi` and chromaticity Jacobian `eta` (rows are
/// ambient components, columns the two grid directions).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityQuery {
    pub r: f64,
    pub s: [f64; 3],
    pub xi: [f64; 2],
    pub eta: [[f64; 2]; 3],
}

impl DensityQuery {
    /// Validates `|s| = 1` within `1e-12`.
    pub fn new(r: f64, s: [f64; 3], xi: [f64; 2], eta: [[f64; 2]; 3]) -> Result<Self> {
        let n = vec3::norm(s);
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidQuery(format!(
                "|s| = {n} is not 1 within 1e-12"
            )));
        }
        Ok(DensityQuery { r, s, xi, eta })
    }

    /// Largest `|s . eta_col|` over the two columns; zero for tangent `eta`.
    pub fn tangency_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for d in 0..2 {
            let dot = self.s[0] * self.eta[0][d]
                + self.s[1] * self.eta[1][d]
                + self.s[2] * self.eta[2][d];
            worst = worst.max(dot.abs());
        }
        worst
    }

    /// Errors unless both columns of `eta` are tangent to the sphere at `s`
    /// within `1e-10`.
    pub fn require_tangent(&self) -> Result<()> {
        let v = self.tangency_violation();
        if v > 1e-10 {
            return Err(Error::InvalidQuery(format!(
                "eta is not tangent at s: |s . eta| = {v:.3e} exceeds 1e-10"
            )));
        }
        Ok(())
    }
}

/// Frobenius norm of a 3x2 matrix.
#[inline]
pub fn frob(m: &[[f64; 2]; 3]) -> f64 {
    let mut s = 0.0;
    for row in m {
        s += row[0] * row[0] + row[1] * row[1];
    }
    s.sqrt()
}

/// Outer product `s (x) xi` as a 3x2 matrix.
#[inline]
pub fn s_outer_xi(s: [f64; 3], xi: [f64; 2]) -> [[f64; 2]; 3] {
    [
        [s[0] * xi[0], s[0] * xi[1]],
        [s[1] * xi[0], s[1] * xi[1]],
        [s[2] * xi[0], s[2] * xi[1]],
    ]
}

#[inline]
fn norm2(xi: [f64; 2]) -> f64 {
    (xi[0] * xi[0] + xi[1] * xi[1]).sqrt()
}

/// Coupled density `|xi| + g(|xi|)|eta| + |r eta + s (x) xi|`.
pub fn density_f(q: &DensityQuery, g: &EdgeStop) -> f64 {
    let xi_n = norm2(q.xi);
    let mut coupled = s_outer_xi(q.s, q.xi);
    for (row, erow) in coupled.iter_mut().zip(&q.eta) {
        row[0] += q.r * erow[0];
        row[1] += q.r * erow[1];
    }
    xi_n + g.eval(xi_n) * frob(&q.eta) + frob(&coupled)
}

/// Strong recession density: the positively 1-homogeneous limit of `f`.
///
/// The edge-stopping factor collapses to the indicator of `xi = 0`: the
/// middle term `|eta|` is charged only at exactly vanishing `xi` (the
/// comparison is exact; thresholded variants live in the jump solvers). As a
/// result the density is discontinuous at `xi = 0` whenever `eta != 0`.
pub fn density_f_inf(q: &DensityQuery) -> f64 {
    let xi_n = norm2(q.xi);
    let chi = if xi_n == 0.0 { 1.0 } else { 0.0 };
    let mut coupled = s_outer_xi(q.s, q.xi);
    for (row, erow) in coupled.iter_mut().zip(&q.eta) {
        row[0] += q.r * erow[0];
        row[1] += q.r * erow[1];
    }
    xi_n + chi * frob(&q.eta) + frob(&coupled)
}

/// Tangential projection `P_s eta = (I - s s^T) eta`, column-wise.
pub fn tangential_project(s: [f64; 3], eta: &[[f64; 2]; 3]) -> [[f64; 2]; 3] {
    let mut out = [[0.0; 2]; 3];
    for d in 0..2 {
        let dot = s[0] * eta[0][d] + s[1] * eta[1][d] + s[2] * eta[2][d];
        for k in 0..3 {
            out[k][d] = eta[k][d] - s[k] * dot;
        }
    }
    out
}

/// C^1 cut-off: 0 below 3/4, 1 above 1, cubic smoothstep between.
fn cutoff(t: f64) -> f64 {
    if t <= 0.75 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let x = (t - 0.75) * 4.0;
        x * x * (3.0 - 2.0 * x)
    }
}

/// Globally defined extension of `f`: clamps `r` to `[alpha, beta]`,
/// normalizes `s`, projects `eta` tangentially and fades to zero as `|s|`
/// drops below 1. Coincides with `f` for `r` in range, unit `s` and tangent
/// `eta`.
pub fn density_f_tilde(
    r: f64,
    s: [f64; 3],
    xi: [f64; 2],
    eta: &[[f64; 2]; 3],
    g: &EdgeStop,
    alpha: f64,
    beta: f64,
) -> f64 {
    let n = vec3::norm(s);
    let w = cutoff(n);
    if w == 0.0 {
        return 0.0;
    }
    let s_unit = vec3::scale(s, 1.0 / n);
    let r_cl = r.clamp(alpha, beta);
    let p_eta = tangential_project(s_unit, eta);
    let q = DensityQuery {
        r: r_cl,
        s: s_unit,
        xi,
        eta: p_eta,
    };
    w * density_f(&q, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(v: [f64; 3]) -> [f64; 3] {
        vec3::scale(v, 1.0 / vec3::norm(v))
    }

    #[test]
    fn edge_stop_basics() {
        for g in [EdgeStop::Rational { a: 1.0 }, EdgeStop::Gaussian { a: 0.7 }] {
            assert_eq!(g.eval(0.0), 1.0);
            let mut prev = 1.0;
            for k in 1..50 {
                let v = g.eval(k as f64 * 0.2);
                assert!(v <= prev && v > 0.0);
                prev = v;
            }
            // Derivative against central differences; zero slope at zero.
            assert_eq!(g.deriv(0.0), 0.0);
            for &t in &[0.3, 1.0, 4.0] {
                let e = 1e-6;
                let fd = (g.eval(t + e) - g.eval(t - e)) / (2.0 * e);
                assert!((g.deriv(t) - fd).abs() < 1e-6, "t={t}");
            }
        }
    }

    #[test]
    fn recession_discontinuity_at_zero_xi() {
        // With eta tangent and |eta| = 1, the limit along xi -> 0, xi != 0 is
        // r |eta|, while the value at xi = 0 is (1 + r)|eta|.
        let s = [0.0, 0.0, 1.0];
        let eta = [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]];
        let r = 1.0;
        let mut t = 1e-3;
        for _ in 0..4 {
            let q = DensityQuery::new(r, s, [t, 0.0], eta).unwrap();
            let v = density_f_inf(&q);
            // |xi| + |r eta + s x xi| -> r|eta| = 1
            assert!((v - (t + (r * r + t * t).sqrt())).abs() < 1e-12);
            t *= 1e-2;
        }
        let at_zero = density_f_inf(&DensityQuery::new(r, s, [0.0, 0.0], eta).unwrap());
        assert!((at_zero - 2.0).abs() < 1e-12);
    }

    #[test]
    fn tilde_cutoff_region() {
        let g = EdgeStop::default();
        let eta = [[0.4, 0.1], [0.0, -0.2], [0.3, 0.0]];
        // Below 3/4 the extension vanishes identically.
        assert_eq!(
            density_f_tilde(1.0, [0.4, 0.0, 0.0], [1.0, 2.0], &eta, &g, 0.05, 2.0),
            0.0
        );
        assert_eq!(
            density_f_tilde(1.0, [0.0, 0.0, 0.0], [1.0, 2.0], &eta, &g, 0.05, 2.0),
            0.0
        );
        // Above norm 1 the value matches f at the normalized point.
        let s = unit([0.3, -0.5, 0.8]);
        let scaled = vec3::scale(s, 1.7);
        let p_eta = tangential_project(s, &eta);
        let q = DensityQuery::new(0.9, s, [0.2, -0.1], p_eta).unwrap();
        let direct = density_f(&q, &g);
        let via_tilde = density_f_tilde(0.9, scaled, [0.2, -0.1], &eta, &g, 0.05, 2.0);
        assert!((direct - via_tilde).abs() <= 1e-12 * direct);
    }

    #[test]
    fn tilde_clamps_out_of_range_brightness() {
        let g = EdgeStop::default();
        let s = unit([0.0, 1.0, 1.0]);
        let eta = tangential_project(s, &[[0.5, 0.0], [0.0, 0.5], [0.1, 0.1]]);
        let lo = density_f_tilde(-3.0, s, [1.0, 0.0], &eta, &g, 0.05, 2.0);
        let q_lo = DensityQuery::new(0.05, s, [1.0, 0.0], eta).unwrap();
        assert!((lo - density_f(&q_lo, &g)).abs() < 1e-14);
        let hi = density_f_tilde(99.0, s, [1.0, 0.0], &eta, &g, 0.05, 2.0);
        let q_hi = DensityQuery::new(2.0, s, [1.0, 0.0], eta).unwrap();
        assert!((hi - density_f(&q_hi, &g)).abs() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn sandwich_bounds(
            r in 0.0f64..2.0,
            sv in prop::array::uniform3(-1.0f64..1.0),
            xi in prop::array::uniform2(-3.0f64..3.0),
            eta_flat in prop::array::uniform6(-3.0f64..3.0),
        ) {
            prop_assume!(vec3::norm(sv) > 1e-3);
            let s = unit(sv);
            let eta = [
                [eta_flat[0], eta_flat[1]],
                [eta_flat[2], eta_flat[3]],
                [eta_flat[4], eta_flat[5]],
            ];
            let q = DensityQuery::new(r, s, xi, eta).unwrap();
            let v = density_f(&q, &EdgeStop::default());
            let xi_n = (xi[0]*xi[0] + xi[1]*xi[1]).sqrt();
            let eta_n = frob(&eta);
            let lower = 0.5 * xi_n + 0.5 * r * eta_n;
            let upper = 2.0 * xi_n + (1.0 + r) * eta_n;
            let slack = 1e-12 * (1.0 + v.abs());
            prop_assert!(v >= lower - slack, "f={v} < lower={lower}");
            prop_assert!(v <= upper + slack, "f={v} > upper={upper}");
        }

        #[test]
        fn recession_is_positively_homogeneous(
            r in 0.0f64..2.0,
            sv in prop::array::uniform3(-1.0f64..1.0),
            xi in prop::array::uniform2(-2.0f64..2.0),
            eta_flat in prop::array::uniform6(-2.0f64..2.0),
            t in 1e-3f64..1e4,
        ) {
            prop_assume!(vec3::norm(sv) > 1e-3);
            let s = unit(sv);
            let eta = [
                [eta_flat[0], eta_flat[1]],
                [eta_flat[2], eta_flat[3]],
                [eta_flat[4], eta_flat[5]],
            ];
            let q = DensityQuery::new(r, s, xi, eta).unwrap();
            let scaled = DensityQuery::new(
                r,
                s,
                [t * xi[0], t * xi[1]],
                [
                    [t * eta[0][0], t * eta[0][1]],
                    [t * eta[1][0], t * eta[1][1]],
                    [t * eta[2][0], t * eta[2][1]],
                ],
            ).unwrap();
            let a = density_f_inf(&scaled);
            let b = t * density_f_inf(&q);
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs())));
        }

        #[test]
        fn projection_properties(
            sv in prop::array::uniform3(-1.0f64..1.0),
            eta_flat in prop::array::uniform6(-2.0f64..2.0),
        ) {
            prop_assume!(vec3::norm(sv) > 1e-3);
            let s = unit(sv);
            let eta = [
                [eta_flat[0], eta_flat[1]],
                [eta_flat[2], eta_flat[3]],
                [eta_flat[4], eta_flat[5]],
            ];
            let p = tangential_project(s, &eta);
            let pp = tangential_project(s, &p);
            // Idempotent and tangent.
            for k in 0..3 {
                for d in 0..2 {
                    prop_assert!((p[k][d] - pp[k][d]).abs() < 1e-12);
                }
            }
            for d in 0..2 {
                let dot = s[0]*p[0][d] + s[1]*p[1][d] + s[2]*p[2][d];
                prop_assert!(dot.abs() < 1e-12);
            }
            // Contraction up to the tangent-space factor sqrt(2).
            prop_assert!(frob(&p) <= 2.0f64.sqrt() * frob(&eta) + 1e-12);
        }

        #[test]
        fn tilde_equals_f_on_manifold(
            r in 0.05f64..2.0,
            sv in prop::array::uniform3(-1.0f64..1.0),
            xi in prop::array::uniform2(-3.0f64..3.0),
            eta_flat in prop::array::uniform6(-3.0f64..3.0),
        ) {
            prop_assume!(vec3::norm(sv) > 1e-3);
            let s = unit(sv);
            let eta_raw = [
                [eta_flat[0], eta_flat[1]],
                [eta_flat[2], eta_flat[3]],
                [eta_flat[4], eta_flat[5]],
            ];
            let eta = tangential_project(s, &eta_raw);
            let g = EdgeStop::default();
            let q = DensityQuery::new(r, s, xi, eta).unwrap();
            q.require_tangent().unwrap();
            let a = density_f(&q, &g);
            let b = density_f_tilde(r, s, xi, &eta, &g, 0.05, 2.0);
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
        }
    }
}
