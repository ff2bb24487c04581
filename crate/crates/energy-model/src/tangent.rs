//! Sphere geometry helpers: tangent frames, arc angles and geodesic
//! interpolation.

use field_core::vec3;

/// Orthonormal basis `(t1, t2)` of the tangent plane at unit `s`, built from
/// the coordinate axis least aligned with `s` for numerical stability.
pub fn tangent_basis(s: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let abs = [s[0].abs(), s[1].abs(), s[2].abs()];
    let k = if abs[0] <= abs[1] && abs[0] <= abs[2] {
        0
    } else if abs[1] <= abs[2] {
        1
    } else {
        2
    };
    let mut axis = [0.0; 3];
    axis[k] = 1.0;
    let t1 = vec3::normalize_or(vec3::cross(s, axis), 1e-300, [1.0, 0.0, 0.0]);
    let t2 = vec3::cross(s, t1);
    (t1, t2)
}

/// Angle between two unit vectors, clamped for safety near +-1.
pub fn arc_angle(a: [f64; 3], b: [f64; 3]) -> f64 {
    vec3::dot(a, b).clamp(-1.0, 1.0).acos()
}

/// Geodesic interpolation on the sphere: `slerp(a, b, 0) = a`,
/// `slerp(a, b, 1) = b`. Falls back to a rotation through an arbitrary
/// orthogonal axis when `a` and `b` are antipodal, and to plain
/// renormalization when they coincide.
pub fn slerp(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    let theta = arc_angle(a, b);
    if theta < 1e-14 {
        return vec3::normalize_or(a, 1e-300, [0.0, 0.0, 1.0]);
    }
    if (std::f64::consts::PI - theta) < 1e-10 {
        // Antipodal: rotate `a` about any axis orthogonal to it.
        let (t1, _) = tangent_basis(a);
        return vec3::rotate_about(a, t1, t * theta);
    }
    let sin_theta = theta.sin();
    let wa = ((1.0 - t) * theta).sin() / sin_theta;
    let wb = (t * theta).sin() / sin_theta;
    vec3::normalize_or(vec3::add(vec3::scale(a, wa), vec3::scale(b, wb)), 1e-300, a)
}
