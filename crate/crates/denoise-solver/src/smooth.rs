//! Smoothed surrogate of the total objective used inside the blocks.
//!
//! Every `|.|` of the regularizer is replaced by `sqrt(|.|^2 + delta^2)`,
//! and the two dual-norm fidelity terms are replaced by their frozen linear
//! models `<psi, residual>` with the dual witness `psi` of the previous exact
//! evaluation. The mean penalties and the chroma L2 term are kept exact
//! (their subgradients are cheap). The surrogate exists only to propose
//! steps; acceptance is always decided on the exact energy by the caller.

use energy_model::{EdgeStop, FidelityWeights};
use field_core::{ColorImage, ScalarField, Vec3Field};

pub(crate) struct BlockModel<'a> {
    pub u0: &'a ColorImage,
    pub b0: &'a ScalarField,
    pub c0: &'a Vec3Field,
    pub g: &'a EdgeStop,
    pub weights: FidelityWeights,
    /// Centered dual witnesses for the color residual, one per channel;
    /// zero fields disable the linear terms.
    pub psi_color: [Vec<f64>; 3],
    /// Centered dual witness for the brightness residual.
    pub psi_bright: Vec<f64>,
    pub eps: f64,
    pub delta: f64,
}

impl BlockModel<'_> {
    /// Surrogate value at `(b, c)`; fills the requested gradients
    /// (brightness gradient per pixel, chroma gradient as 3 entries per
    /// pixel).
    pub fn eval(
        &self,
        b: &ScalarField,
        c: &Vec3Field,
        mut grad_b: Option<&mut [f64]>,
        mut grad_c: Option<&mut [f64]>,
    ) -> f64 {
        let (rows, cols) = (b.rows(), b.cols());
        let n = rows * cols;
        let h = b.h();
        let cell = h * h;
        let inv_h = 1.0 / h;
        let d2 = self.delta * self.delta;
        let bd = b.data();
        let cd = c.data();
        let ud = self.u0.data();
        let b0d = self.b0.data();
        let c0d = self.c0.data();
        if let Some(gb) = grad_b.as_deref_mut() {
            gb.fill(0.0);
        }
        if let Some(gc) = grad_c.as_deref_mut() {
            gc.fill(0.0);
        }

        // Residual integrals first: the mean penalties need them before any
        // per-pixel gradient can be accumulated.
        let mut int_color = [0.0; 3];
        let mut int_bright = 0.0;
        for k in 0..n {
            for ch in 0..3 {
                int_color[ch] += bd[k] * cd[k][ch] - ud[k][ch];
            }
            int_bright += bd[k] - b0d[k];
        }
        for v in &mut int_color {
            *v *= cell;
        }
        int_bright *= cell;
        let color_gap =
            (int_color[0] * int_color[0] + int_color[1] * int_color[1] + int_color[2] * int_color[2])
                .sqrt();
        let inv_eps = if self.eps.is_finite() { 1.0 / self.eps } else { 0.0 };
        // Subgradient directions of the penalties (zero at an exact zero).
        let pen_color_dir = if color_gap > 0.0 {
            [
                int_color[0] / color_gap,
                int_color[1] / color_gap,
                int_color[2] / color_gap,
            ]
        } else {
            [0.0; 3]
        };
        let pen_bright_dir = if int_bright > 0.0 {
            1.0
        } else if int_bright < 0.0 {
            -1.0
        } else {
            0.0
        };

        let mut value = (color_gap + int_bright.abs()) * inv_eps;

        // Adjoint buffers for the product term: gradients with respect to
        // the product field are pushed here, then split into the brightness
        // and chroma gradients by the product rule.
        let needs_grad = grad_b.is_some() || grad_c.is_some();
        let mut ap: Vec<[f64; 3]> = if needs_grad { vec![[0.0; 3]; n] } else { Vec::new() };

        let lv = self.weights.lambda_v;
        let lb = self.weights.lambda_b;
        let lc = self.weights.lambda_c;

        for i in 0..rows {
            for j in 0..cols {
                let k = i * cols + j;
                let has_x = j + 1 < cols;
                let has_y = i + 1 < rows;
                let kx = k + 1;
                let ky = k + cols;

                // Brightness slopes.
                let gbx = if has_x { (bd[kx] - bd[k]) * inv_h } else { 0.0 };
                let gby = if has_y { (bd[ky] - bd[k]) * inv_h } else { 0.0 };
                let nb = (gbx * gbx + gby * gby + d2).sqrt();

                // Chroma and product slopes.
                let mut gc_mat = [[0.0; 2]; 3];
                let mut gp_mat = [[0.0; 2]; 3];
                for ch in 0..3 {
                    if has_x {
                        gc_mat[ch][0] = (cd[kx][ch] - cd[k][ch]) * inv_h;
                        gp_mat[ch][0] = (bd[kx] * cd[kx][ch] - bd[k] * cd[k][ch]) * inv_h;
                    }
                    if has_y {
                        gc_mat[ch][1] = (cd[ky][ch] - cd[k][ch]) * inv_h;
                        gp_mat[ch][1] = (bd[ky] * cd[ky][ch] - bd[k] * cd[k][ch]) * inv_h;
                    }
                }
                let mut nc2 = d2;
                let mut np2 = d2;
                for ch in 0..3 {
                    nc2 += gc_mat[ch][0] * gc_mat[ch][0] + gc_mat[ch][1] * gc_mat[ch][1];
                    np2 += gp_mat[ch][0] * gp_mat[ch][0] + gp_mat[ch][1] * gp_mat[ch][1];
                }
                let nc = nc2.sqrt();
                let np = np2.sqrt();
                let gval = self.g.eval(nb);

                value += cell * (nb + gval * nc + np);

                // Pointwise fidelity pieces. The dual witnesses pair in the
                // plain pixel sum (the dual-norm module's convention); the L2
                // term carries the cell area like every integral.
                let mut dual_color = 0.0;
                for ch in 0..3 {
                    let res = bd[k] * cd[k][ch] - ud[k][ch];
                    dual_color += self.psi_color[ch][k] * res;
                    let dc = cd[k][ch] - c0d[k][ch];
                    value += cell * lc * dc * dc;
                }
                value += lv * dual_color + lb * self.psi_bright[k] * (bd[k] - b0d[k]);

                if !needs_grad {
                    continue;
                }

                // Product-term adjoint (per channel).
                for ch in 0..3 {
                    if has_x {
                        let w = cell * gp_mat[ch][0] / np * inv_h;
                        ap[k][ch] -= w;
                        ap[kx][ch] += w;
                    }
                    if has_y {
                        let w = cell * gp_mat[ch][1] / np * inv_h;
                        ap[k][ch] -= w;
                        ap[ky][ch] += w;
                    }
                }

                if let Some(gb) = grad_b.as_deref_mut() {
                    // d/d(gb) of nb + g(nb) nc = (gb/nb) (1 + g'(nb) nc).
                    let coef = 1.0 + self.g.deriv(nb) * nc;
                    if has_x {
                        let w = cell * gbx / nb * coef * inv_h;
                        gb[k] -= w;
                        gb[kx] += w;
                    }
                    if has_y {
                        let w = cell * gby / nb * coef * inv_h;
                        gb[k] -= w;
                        gb[ky] += w;
                    }
                    // Dual linear models (plain sum) and mean penalties
                    // (cell-weighted integrals).
                    let mut dir_plain = lb * self.psi_bright[k];
                    let mut dir_cell = pen_bright_dir * inv_eps;
                    for ch in 0..3 {
                        dir_plain += lv * self.psi_color[ch][k] * cd[k][ch];
                        dir_cell += pen_color_dir[ch] * inv_eps * cd[k][ch];
                    }
                    gb[k] += dir_plain + cell * dir_cell;
                }

                if let Some(gc) = grad_c.as_deref_mut() {
                    for ch in 0..3 {
                        // Edge-weighted chroma slopes.
                        if has_x {
                            let w = cell * gval * gc_mat[ch][0] / nc * inv_h;
                            gc[3 * k + ch] -= w;
                            gc[3 * kx + ch] += w;
                        }
                        if has_y {
                            let w = cell * gval * gc_mat[ch][1] / nc * inv_h;
                            gc[3 * k + ch] -= w;
                            gc[3 * ky + ch] += w;
                        }
                        // Dual linear model, mean penalty, L2 pull.
                        gc[3 * k + ch] += lv * self.psi_color[ch][k] * bd[k]
                            + cell
                                * (pen_color_dir[ch] * inv_eps * bd[k]
                                    + 2.0 * lc * (cd[k][ch] - c0d[k][ch]));
                    }
                }
            }
        }

        if needs_grad {
            // Split the product adjoint with the product rule.
            if let Some(gb) = grad_b.as_deref_mut() {
                for k in 0..n {
                    gb[k] += ap[k][0] * cd[k][0] + ap[k][1] * cd[k][1] + ap[k][2] * cd[k][2];
                }
            }
            if let Some(gc) = grad_c.as_deref_mut() {
                for k in 0..n {
                    for ch in 0..3 {
                        gc[3 * k + ch] += ap[k][ch] * bd[k];
                    }
                }
            }
        }
        value
    }

    pub fn zero_duals(n: usize) -> ([Vec<f64>; 3], Vec<f64>) {
        (
            [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            vec![0.0; n],
        )
    }
}
