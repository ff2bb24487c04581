//! Rectangular pixel-grid containers.
//!
//! All fields live on an `rows x cols` grid with spacing `h = 1 / max(rows,
//! cols)`, so the longer image side always spans a unit interval and energies
//! computed with the `h^2` pixel measure are resolution-comparable.

use crate::vec3;

/// Dense row-major grid of per-pixel values.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// Scalar field (brightness values, residual channels, dual multipliers).
pub type ScalarField = Field<f64>;
/// Per-pixel 2-vector: gradients of scalar fields and flux certificates.
pub type VectorField2 = Field<[f64; 2]>;
/// Per-pixel 3-vector with no unit constraint.
pub type Vec3Field = Field<[f64; 3]>;
/// Color image; channels nominally in `[0, 1]` (noise may exceed the range).
pub type ColorImage = Vec3Field;
/// Per-pixel 3x2 matrix, `m[k][d]` = derivative of component `k` along axis `d`.
pub type MatrixField = Field<[[f64; 2]; 3]>;

impl<T: Copy> Field<T> {
    /// Field with every pixel set to `fill`. Grids must be at least 1x1.
    pub fn filled(rows: usize, cols: usize, fill: T) -> Self {
        assert!(rows >= 1 && cols >= 1, "grid must be at least 1x1");
        Field {
            rows,
            cols,
            data: vec![fill; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(rows >= 1 && cols >= 1, "grid must be at least 1x1");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Field { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must match grid size");
        assert!(rows >= 1 && cols >= 1, "grid must be at least 1x1");
        Field { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Grid spacing: the longer side spans a unit interval.
    #[inline]
    pub fn h(&self) -> f64 {
        1.0 / self.rows.max(self.cols) as f64
    }

    /// Domain area `rows * cols * h^2`.
    #[inline]
    pub fn area(&self) -> f64 {
        let h = self.h();
        (self.rows * self.cols) as f64 * h * h
    }

    #[inline]
    pub fn same_shape<U>(&self, other: &Field<U>) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.rows && j < self.cols);
        i * self.cols + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
}

impl Field<f64> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    /// `h^2 * sum` — the discrete integral over the domain.
    pub fn integral(&self) -> f64 {
        let h2 = self.h() * self.h();
        self.data.iter().sum::<f64>() * h2
    }

    pub fn mean(&self) -> f64 {
        self.integral() / self.area()
    }
}

impl Field<[f64; 2]> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, [0.0; 2])
    }
}

impl Field<[f64; 3]> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, [0.0; 3])
    }

    /// Component-wise discrete integral `h^2 * sum` as a 3-vector.
    pub fn integral(&self) -> [f64; 3] {
        let h2 = self.h() * self.h();
        let mut s = [0.0; 3];
        for v in &self.data {
            s[0] += v[0];
            s[1] += v[1];
            s[2] += v[2];
        }
        [s[0] * h2, s[1] * h2, s[2] * h2]
    }
}

impl Field<[[f64; 2]; 3]> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, [[0.0; 2]; 3])
    }
}

/// Brightness values clamped to a working range `[alpha, beta]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BrightnessField {
    values: ScalarField,
    alpha: f64,
    beta: f64,
}

impl BrightnessField {
    /// Wraps a scalar field, asserting every value lies in `[alpha, beta]`.
    pub fn new(values: ScalarField, alpha: f64, beta: f64) -> Self {
        assert!(
            0.0 < alpha && alpha < beta,
            "brightness bounds must satisfy 0 < alpha < beta"
        );
        debug_assert!(
            values.data().iter().all(|&v| v >= alpha && v <= beta),
            "brightness values outside [alpha, beta]"
        );
        BrightnessField {
            values,
            alpha,
            beta,
        }
    }

    #[inline]
    pub fn values(&self) -> &ScalarField {
        &self.values
    }

    /// Mutable access for solvers; callers must re-clamp to `[alpha, beta]`.
    #[inline]
    pub fn values_mut(&mut self) -> &mut ScalarField {
        &mut self.values
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn beta(&self) -> f64 {
        self.beta
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.values.h()
    }

    pub fn clamp_in_place(&mut self) {
        let (a, b) = (self.alpha, self.beta);
        for v in self.values.data_mut() {
            *v = v.clamp(a, b);
        }
    }
}

/// Unit 3-vectors per pixel (points on the sphere).
#[derive(Clone, Debug, PartialEq)]
pub struct ChromaticityField {
    values: Vec3Field,
}

impl ChromaticityField {
    /// Wraps a vector field, debug-asserting unit norm per pixel.
    pub fn new(values: Vec3Field) -> Self {
        debug_assert!(
            values
                .data()
                .iter()
                .all(|v| (vec3::norm(*v) - 1.0).abs() < 1e-9),
            "chromaticity entries must be unit vectors"
        );
        ChromaticityField { values }
    }

    #[inline]
    pub fn values(&self) -> &Vec3Field {
        &self.values
    }

    /// Mutable access for solvers; callers must re-project to the sphere.
    #[inline]
    pub fn values_mut(&mut self) -> &mut Vec3Field {
        &mut self.values
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.values.h()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_uses_longer_side() {
        let f = ScalarField::zeros(2, 8);
        assert_eq!(f.h(), 1.0 / 8.0);
        assert_eq!(f.area(), 16.0 / 64.0);
    }

    #[test]
    fn integral_and_mean() {
        let f = ScalarField::filled(4, 4, 3.0);
        // |Omega| = 1 for a square grid, so the integral equals the value.
        assert!((f.integral() - 3.0).abs() < 1e-15);
        assert!((f.mean() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn row_major_indexing() {
        let f = ScalarField::from_fn(3, 4, |i, j| (i * 10 + j) as f64);
        assert_eq!(f.get(2, 3), 23.0);
        assert_eq!(f.data()[f.idx(1, 0)], 10.0);
    }

    #[test]
    #[should_panic(expected = "grid must be at least 1x1")]
    fn rejects_empty_grid() {
        let _ = ScalarField::zeros(0, 3);
    }
}
