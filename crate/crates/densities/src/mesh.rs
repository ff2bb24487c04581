//! Piecewise-affine machinery on the unit cell: a uniform grid of squares,
//! each split along the same diagonal into two triangles. Gradients are
//! constant per triangle, so integrals of the nonsmooth densities over
//! piecewise-affine competitors are evaluated exactly.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Uniform triangulation of `(0,1)^2`: `n x n` cells, nodes at
/// `(j/n, i/n)`, diagonals from cell corner `(i, j)` to `(i+1, j+1)`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct P1Grid {
    pub n: usize,
}

/// One triangle as a chain of three node indices. The two in-plane slopes of
/// a nodal field `z` are the scaled chain differences; `swap` records which
/// difference is the x-slope.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Tri {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub swap: bool,
}

impl P1Grid {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        P1Grid { n }
    }

    pub fn nodes(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    pub fn hc(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Area of one triangle.
    pub fn tri_area(&self) -> f64 {
        0.5 * self.hc() * self.hc()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.n + 1) + j
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let i = node / (self.n + 1);
        let j = node % (self.n + 1);
        i == 0 || j == 0 || i == self.n || j == self.n
    }

    /// Visits the two triangles of every cell.
    pub fn for_each_tri(&self, mut f: impl FnMut(Tri)) {
        for i in 0..self.n {
            for j in 0..self.n {
                let v00 = self.idx(i, j);
                let v01 = self.idx(i, j + 1);
                let v10 = self.idx(i + 1, j);
                let v11 = self.idx(i + 1, j + 1);
                // Below the diagonal: x-difference first, then y.
                f(Tri {
                    a: v00,
                    b: v01,
                    c: v11,
                    swap: false,
                });
                // Above the diagonal: y-difference first, then x.
                f(Tri {
                    a: v00,
                    b: v10,
                    c: v11,
                    swap: true,
                });
            }
        }
    }

    /// Constant gradient `(d/dx, d/dy)` of the nodal field `z` on `tri`.
    #[inline]
    pub fn grad(&self, z: &[f64], tri: Tri) -> [f64; 2] {
        let inv = self.n as f64;
        let d1 = (z[tri.b] - z[tri.a]) * inv;
        let d2 = (z[tri.c] - z[tri.b]) * inv;
        if tri.swap {
            [d2, d1]
        } else {
            [d1, d2]
        }
    }

    /// Accumulates the chain rule of a per-triangle gradient derivative
    /// `w = dW/d(gx, gy)` (already weighted by the triangle area) into the
    /// nodal gradient.
    #[inline]
    pub fn accumulate(&self, grad: &mut [f64], tri: Tri, w: [f64; 2]) {
        let inv = self.n as f64;
        let (w1, w2) = if tri.swap { (w[1], w[0]) } else { (w[0], w[1]) };
        grad[tri.a] -= w1 * inv;
        grad[tri.b] += (w1 - w2) * inv;
        grad[tri.c] += w2 * inv;
    }

    /// Zeroes the entries of `grad` on boundary nodes so descent never moves
    /// them.
    pub fn mask_boundary(&self, grad: &mut [f64]) {
        for (node, gv) in grad.iter_mut().enumerate() {
            if self.is_boundary(node) {
                *gv = 0.0;
            }
        }
    }

    /// Interpolates a nodal field onto the doubled grid. Fine nodes on
    /// coarse edges average the edge endpoints; fine nodes at cell centers
    /// lie on the coarse diagonal and average its endpoints, so the
    /// piecewise-affine function — and therefore its exact energy — is
    /// unchanged.
    pub fn prolong(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        let fine = P1Grid::new(2 * n);
        let mut out = vec![0.0; fine.nodes()];
        for fi in 0..=2 * n {
            for fj in 0..=2 * n {
                let v = match (fi % 2, fj % 2) {
                    (0, 0) => z[self.idx(fi / 2, fj / 2)],
                    (0, 1) => {
                        0.5 * (z[self.idx(fi / 2, fj / 2)] + z[self.idx(fi / 2, fj / 2 + 1)])
                    }
                    (1, 0) => {
                        0.5 * (z[self.idx(fi / 2, fj / 2)] + z[self.idx(fi / 2 + 1, fj / 2)])
                    }
                    _ => {
                        0.5 * (z[self.idx(fi / 2, fj / 2)] + z[self.idx(fi / 2 + 1, fj / 2 + 1)])
                    }
                };
                out[fine.idx(fi, fj)] = v;
            }
        }
        out
    }

    /// Zig-zag profile of slope `+-c` along one axis (peaks on odd lines),
    /// cut off to zero on the boundary.
    pub fn sawtooth(&self, c: f64, along_x: bool) -> Vec<f64> {
        let n = self.n;
        let amp = c * self.hc();
        let mut z = vec![0.0; self.nodes()];
        for i in 1..n {
            for j in 1..n {
                let osc = if along_x { j } else { i };
                if osc % 2 == 1 {
                    z[self.idx(i, j)] = amp;
                }
            }
        }
        z
    }

    /// Small seeded random interior perturbation with gradients of order
    /// `scale`.
    pub fn random_field(&self, scale: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amp = scale * self.hc();
        let n = self.n;
        let mut z = vec![0.0; self.nodes()];
        for i in 1..n {
            for j in 1..n {
                z[self.idx(i, j)] = rng.random_range(-amp..amp);
            }
        }
        z
    }
}

/// Backtracking descent with a Barzilai-Borwein initial step on a smoothed
/// objective, reporting every accepted iterate to `on_accept` so the caller
/// can track the best exact (unsmoothed) energy.
pub(crate) fn descend(
    z: &mut Vec<f64>,
    max_iters: usize,
    mut energy_grad: impl FnMut(&[f64], &mut [f64]) -> f64,
    mut project: impl FnMut(&mut [f64]),
    mut on_accept: impl FnMut(&[f64]),
) {
    let dim = z.len();
    let mut grad = vec![0.0; dim];
    let mut e = energy_grad(z, &mut grad);
    let mut step = 1e-2;
    let mut prev_z = vec![0.0; dim];
    let mut prev_grad = vec![0.0; dim];
    let mut have_prev = false;
    let mut cand = vec![0.0; dim];
    let mut cand_grad = vec![0.0; dim];
    for _ in 0..max_iters {
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2 <= 1e-24 * (1.0 + e * e) {
            break;
        }
        // Barzilai-Borwein step from the previous accepted move.
        if have_prev {
            let mut sy = 0.0;
            let mut ss = 0.0;
            for k in 0..dim {
                let s = z[k] - prev_z[k];
                let y = grad[k] - prev_grad[k];
                sy += s * y;
                ss += s * s;
            }
            if sy > 1e-300 {
                step = (ss / sy).clamp(1e-10, 1e4);
            }
        }
        let mut accepted = false;
        let mut tau = step;
        for _ in 0..40 {
            for k in 0..dim {
                cand[k] = z[k] - tau * grad[k];
            }
            project(&mut cand);
            let ce = energy_grad(&cand, &mut cand_grad);
            if ce <= e - 1e-4 * tau * gnorm2 || ce < e * (1.0 - 1e-12) {
                std::mem::swap(&mut prev_z, z);
                std::mem::swap(&mut prev_grad, &mut grad);
                std::mem::swap(z, &mut cand);
                std::mem::swap(&mut grad, &mut cand_grad);
                have_prev = true;
                e = ce;
                accepted = true;
                break;
            }
            tau *= 0.5;
        }
        if !accepted {
            break;
        }
        on_accept(z);
    }
}
