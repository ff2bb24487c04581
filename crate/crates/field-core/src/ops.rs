//! Forward-difference gradient and its exact negative-adjoint divergence.
//!
//! Conventions: component 0 differences along columns (axis `x`), component 1
//! along rows (axis `y`). The forward difference replicates the last
//! row/column (the final difference is zero), and `div` is defined so that
//! `<grad f, xi> = -<f, div xi>` holds to rounding for the plain unweighted
//! sums below. Both operators carry the `1/h` grid scaling. With this stencil
//! the flux components normal to the boundary never enter `div`, which is the
//! discrete form of the zero normal-trace condition, and the divergence of any
//! flux sums to zero over the grid.

use crate::grid::{MatrixField, ScalarField, Vec3Field, VectorField2};

/// Forward-difference gradient of a scalar field, `1/h` scaled.
pub fn grad_scalar(f: &ScalarField) -> VectorField2 {
    let (rows, cols) = (f.rows(), f.cols());
    let inv_h = 1.0 / f.h();
    let d = f.data();
    VectorField2::from_fn(rows, cols, |i, j| {
        let k = i * cols + j;
        let gx = if j + 1 < cols {
            (d[k + 1] - d[k]) * inv_h
        } else {
            0.0
        };
        let gy = if i + 1 < rows {
            (d[k + cols] - d[k]) * inv_h
        } else {
            0.0
        };
        [gx, gy]
    })
}

/// Component-wise forward-difference gradient of a 3-vector field.
pub fn grad_vec3(u: &Vec3Field) -> MatrixField {
    let (rows, cols) = (u.rows(), u.cols());
    let inv_h = 1.0 / u.h();
    let d = u.data();
    MatrixField::from_fn(rows, cols, |i, j| {
        let k = i * cols + j;
        let mut m = [[0.0; 2]; 3];
        if j + 1 < cols {
            for c in 0..3 {
                m[c][0] = (d[k + 1][c] - d[k][c]) * inv_h;
            }
        }
        if i + 1 < rows {
            for c in 0..3 {
                m[c][1] = (d[k + cols][c] - d[k][c]) * inv_h;
            }
        }
        m
    })
}

/// Divergence of a flux field: the exact negative adjoint of [`grad_scalar`].
///
/// The last column of the `x` component and the last row of the `y` component
/// are ignored (structurally zero normal flux).
pub fn div_vec(xi: &VectorField2) -> ScalarField {
    let (rows, cols) = (xi.rows(), xi.cols());
    let inv_h = 1.0 / xi.h();
    let d = xi.data();
    ScalarField::from_fn(rows, cols, |i, j| {
        let k = i * cols + j;
        let dx = {
            let right = if j + 1 < cols { d[k][0] } else { 0.0 };
            let left = if j > 0 { d[k - 1][0] } else { 0.0 };
            right - left
        };
        let dy = {
            let below = if i + 1 < rows { d[k][1] } else { 0.0 };
            let above = if i > 0 { d[k - cols][1] } else { 0.0 };
            below - above
        };
        (dx + dy) * inv_h
    })
}

/// Component-wise divergence of a 3x2 matrix field: negative adjoint of
/// [`grad_vec3`].
pub fn div_mat(w: &MatrixField) -> Vec3Field {
    let (rows, cols) = (w.rows(), w.cols());
    let inv_h = 1.0 / w.h();
    let d = w.data();
    Vec3Field::from_fn(rows, cols, |i, j| {
        let k = i * cols + j;
        let mut out = [0.0; 3];
        for c in 0..3 {
            let right = if j + 1 < cols { d[k][c][0] } else { 0.0 };
            let left = if j > 0 { d[k - 1][c][0] } else { 0.0 };
            let below = if i + 1 < rows { d[k][c][1] } else { 0.0 };
            let above = if i > 0 { d[k - cols][c][1] } else { 0.0 };
            out[c] = (right - left + below - above) * inv_h;
        }
        out
    })
}

/// Plain unweighted sum `sum_p f(p) g(p)` used in the adjointness identity.
pub fn dot_scalar(f: &ScalarField, g: &ScalarField) -> f64 {
    assert!(f.same_shape(g), "shape mismatch");
    f.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
}

/// Plain unweighted sum over pixels and components.
pub fn dot_vec2(a: &VectorField2, b: &VectorField2) -> f64 {
    assert!(a.same_shape(b), "shape mismatch");
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| x[0] * y[0] + x[1] * y[1])
        .sum()
}
