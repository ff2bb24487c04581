//! Cell problems for the tangential quasiconvex envelope: minimize the exact
//! cell average of the coupled density over piecewise-affine perturbations
//! vanishing on the cell boundary.

use crate::mesh::{descend, P1Grid, Tri};
use crate::{CellProblemConfig, DensityEstimate, Diagnostics, Error, Formulation, Result};
use energy_model::{density_f, density_f_tilde, tangent_basis, DensityQuery, EdgeStop};

/// Nodal state: `phi` plus the chromaticity perturbation fields, stored as
/// concatenated scalar fields. The tangent formulation uses two coefficient
/// fields in an orthonormal tangent basis; the cut-off formulation uses three
/// free ambient components fed through the extension, whose projection makes
/// the normal direction energetically invisible.
struct CellEnergy<'a> {
    grid: P1Grid,
    q: &'a DensityQuery,
    g: &'a EdgeStop,
    formulation: Formulation,
    t1: [f64; 3],
    t2: [f64; 3],
    alpha: f64,
    beta: f64,
}

impl CellEnergy<'_> {
    fn n_fields(&self) -> usize {
        match self.formulation {
            Formulation::Tangent => 3,
            Formulation::Tilde => 4,
        }
    }

    fn dim(&self) -> usize {
        self.n_fields() * self.grid.nodes()
    }

    /// Per-triangle competitor gradients `(X, E_raw)` where `X` is the
    /// perturbed brightness slope and `E_raw` the perturbed (not yet
    /// projected) chromaticity Jacobian.
    #[inline]
    fn tri_arguments(&self, z: &[f64], tri: Tri) -> ([f64; 2], [[f64; 2]; 3]) {
        let nodes = self.grid.nodes();
        let gphi = self.grid.grad(&z[..nodes], tri);
        let x = [self.q.xi[0] + gphi[0], self.q.xi[1] + gphi[1]];
        let mut e = self.q.eta;
        match self.formulation {
            Formulation::Tangent => {
                let ga = self.grid.grad(&z[nodes..2 * nodes], tri);
                let gb = self.grid.grad(&z[2 * nodes..3 * nodes], tri);
                for k in 0..3 {
                    for d in 0..2 {
                        e[k][d] += self.t1[k] * ga[d] + self.t2[k] * gb[d];
                    }
                }
            }
            Formulation::Tilde => {
                for k in 0..3 {
                    let gk = self.grid.grad(&z[(1 + k) * nodes..(2 + k) * nodes], tri);
                    e[k][0] += gk[0];
                    e[k][1] += gk[1];
                }
            }
        }
        (x, e)
    }

    /// Smoothed cell energy and its nodal gradient.
    fn smooth(&self, z: &[f64], delta: f64, grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let nodes = self.grid.nodes();
        let area = self.grid.tri_area();
        let s = self.q.s;
        let r = self.q.r;
        let d2 = delta * delta;
        let mut energy = 0.0;
        self.grid.for_each_tri(|tri| {
            let (x, e_raw) = self.tri_arguments(z, tri);
            // Project when the chromaticity perturbation is ambient.
            let e = match self.formulation {
                Formulation::Tangent => e_raw,
                Formulation::Tilde => project_columns(s, &e_raw),
            };
            let nx = (x[0] * x[0] + x[1] * x[1] + d2).sqrt();
            let mut ee = d2;
            for row in &e {
                ee += row[0] * row[0] + row[1] * row[1];
            }
            let ne = ee.sqrt();
            let mut c = [[0.0; 2]; 3];
            let mut cc = d2;
            for k in 0..3 {
                for d in 0..2 {
                    c[k][d] = r * e[k][d] + s[k] * x[d];
                    cc += c[k][d] * c[k][d];
                }
            }
            let nc = cc.sqrt();
            let gv = self.g.eval(nx);
            let gd = self.g.deriv(nx);
            energy += area * (nx + gv * ne + nc);

            let mut dx = [0.0; 2];
            for d in 0..2 {
                let s_dot_c = s[0] * c[0][d] + s[1] * c[1][d] + s[2] * c[2][d];
                dx[d] = area * (x[d] / nx * (1.0 + gd * ne) + s_dot_c / nc);
            }
            let mut de = [[0.0; 2]; 3];
            for k in 0..3 {
                for d in 0..2 {
                    de[k][d] = area * (gv * e[k][d] / ne + r * c[k][d] / nc);
                }
            }
            self.grid.accumulate(&mut grad[..nodes], tri, dx);
            match self.formulation {
                Formulation::Tangent => {
                    let mut da = [0.0; 2];
                    let mut db = [0.0; 2];
                    for d in 0..2 {
                        for k in 0..3 {
                            da[d] += self.t1[k] * de[k][d];
                            db[d] += self.t2[k] * de[k][d];
                        }
                    }
                    self.grid.accumulate(&mut grad[nodes..2 * nodes], tri, da);
                    self.grid.accumulate(&mut grad[2 * nodes..3 * nodes], tri, db);
                }
                Formulation::Tilde => {
                    // Chain rule through the (self-adjoint) projection.
                    let dm = project_columns(s, &de);
                    for k in 0..3 {
                        self.grid.accumulate(
                            &mut grad[(1 + k) * nodes..(2 + k) * nodes],
                            tri,
                            dm[k],
                        );
                    }
                }
            }
        });
        for f in 0..self.n_fields() {
            self.grid.mask_boundary(&mut grad[f * nodes..(f + 1) * nodes]);
        }
        energy
    }

    /// Exact (nonsmooth) cell energy of the competitor: the integrand is
    /// piecewise constant, so the sum over triangles is the integral.
    fn exact(&self, z: &[f64]) -> f64 {
        let area = self.grid.tri_area();
        let mut energy = 0.0;
        self.grid.for_each_tri(|tri| {
            let (x, e_raw) = self.tri_arguments(z, tri);
            let value = match self.formulation {
                Formulation::Tangent => {
                    let q = DensityQuery {
                        r: self.q.r,
                        s: self.q.s,
                        xi: x,
                        eta: e_raw,
                    };
                    density_f(&q, self.g)
                }
                Formulation::Tilde => density_f_tilde(
                    self.q.r, self.q.s, x, &e_raw, self.g, self.alpha, self.beta,
                ),
            };
            energy += area * value;
        });
        energy
    }
}

#[inline]
fn project_columns(s: [f64; 3], m: &[[f64; 2]; 3]) -> [[f64; 2]; 3] {
    let mut out = *m;
    for d in 0..2 {
        let dot = s[0] * m[0][d] + s[1] * m[1][d] + s[2] * m[2][d];
        for k in 0..3 {
            out[k][d] -= s[k] * dot;
        }
    }
    out
}

fn mix_seed(seed: u64, level: usize, idx: usize) -> u64 {
    seed ^ (level as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ (idx as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9)
}

/// Grid levels solved in order: the finest requested resolution preceded by
/// its halvings down to 4, so each level can be warm-started from the
/// previous one by exact interpolation.
fn levels(grid_n: usize) -> Vec<usize> {
    let mut ls = vec![grid_n];
    let mut l = grid_n;
    while l % 2 == 0 && l / 2 >= 4 {
        l /= 2;
        ls.push(l);
    }
    ls.reverse();
    ls
}

/// Builds the restart list for one level: structured oscillations in the
/// brightness and chromaticity perturbations plus seeded random fields.
fn restart_fields(
    grid: &P1Grid,
    energy: &CellEnergy<'_>,
    cfg: &CellProblemConfig,
    level: usize,
) -> Vec<Vec<f64>> {
    let nodes = grid.nodes();
    let nf = energy.n_fields();
    let dim = energy.dim();
    let eta_scale = {
        let mut ee = 0.0;
        for row in &energy.q.eta {
            ee += row[0] * row[0] + row[1] * row[1];
        }
        ee.sqrt().max(1.0)
    };
    let mut out = Vec::new();
    let with_phi = |phi: Vec<f64>| {
        let mut z = vec![0.0; dim];
        z[..nodes].copy_from_slice(&phi);
        z
    };
    // Zero competitor: exact energy equals the unrelaxed density.
    out.push(vec![0.0; dim]);
    for kappa in [0.1, 0.25, 0.5, 1.0] {
        out.push(with_phi(grid.sawtooth(kappa * eta_scale, true)));
    }
    out.push(with_phi(grid.sawtooth(0.25 * eta_scale, false)));
    {
        // Oscillation in the first chromaticity perturbation field.
        let mut z = vec![0.0; dim];
        z[nodes..2 * nodes].copy_from_slice(&grid.sawtooth(0.25 * eta_scale, true));
        out.push(z);
    }
    let mut idx = out.len();
    while out.len() < cfg.restarts.max(1) {
        let mut z = vec![0.0; dim];
        for f in 0..nf {
            let scale = 0.3 * eta_scale;
            z[f * nodes..(f + 1) * nodes]
                .copy_from_slice(&grid.random_field(scale, mix_seed(cfg.seed, level, idx + f)));
        }
        out.push(z);
        idx += 1;
    }
    out.truncate(cfg.restarts.max(1));
    out
}

/// Upper-bound estimate of the tangential quasiconvex envelope at `q`.
///
/// Multi-start smoothed descent over nested grids; every accepted iterate is
/// re-evaluated with the exact nonsmooth integrand and the best exact value
/// wins, so the result is the true energy of an admissible competitor.
pub fn qtf(q: &DensityQuery, g: &EdgeStop, cfg: &CellProblemConfig) -> Result<DensityEstimate> {
    cfg.validate()?;
    if cfg.formulation == Formulation::Tangent {
        let v = q.tangency_violation();
        if v > 1e-10 {
            return Err(Error::InvalidSpec(format!(
                "tangent formulation requires tangent eta (violation {v:.3e})"
            )));
        }
    }
    let (t1, t2) = tangent_basis(q.s);
    let mut best_val = f64::INFINITY;
    let mut carry: Option<Vec<Vec<f64>>> = None; // per-field best nodal values
    let mut per_grid = Vec::new();
    for &level in &levels(cfg.grid_n) {
        let grid = P1Grid::new(level);
        let energy = CellEnergy {
            grid,
            q,
            g,
            formulation: cfg.formulation,
            t1,
            t2,
            alpha: cfg.alpha,
            beta: cfg.beta,
        };
        let nodes = grid.nodes();
        let nf = energy.n_fields();
        let mut starts = Vec::new();
        if let Some(prev) = carry.take() {
            // Exact interpolation of the best coarse competitor: identical
            // function, identical exact energy, so finer levels never lose
            // ground.
            let coarse = P1Grid::new(level / 2);
            let mut z = vec![0.0; nf * nodes];
            for (f, field) in prev.iter().enumerate() {
                z[f * nodes..(f + 1) * nodes].copy_from_slice(&coarse.prolong(field));
            }
            starts.push(z);
        }
        starts.extend(restart_fields(&grid, &energy, cfg, level));

        let mut level_best = f64::INFINITY;
        let mut level_fields: Option<Vec<f64>> = None;
        for mut z in starts {
            let e0 = energy.exact(&z);
            if e0 < level_best {
                level_best = e0;
                level_fields = Some(z.clone());
            }
            for &delta in &cfg.huber_schedule {
                descend(
                    &mut z,
                    cfg.max_inner_iters,
                    |zz, gr| energy.smooth(zz, delta, gr),
                    |_| {},
                    |zz| {
                        let e = energy.exact(zz);
                        if e < level_best {
                            level_best = e;
                            level_fields = Some(zz.to_vec());
                        }
                    },
                );
            }
        }
        best_val = best_val.min(level_best);
        per_grid.push((level, level_best));
        carry = level_fields.map(|z| {
            (0..nf)
                .map(|f| z[f * nodes..(f + 1) * nodes].to_vec())
                .collect()
        });
    }
    Ok(DensityEstimate {
        value: best_val,
        is_upper_bound: true,
        diagnostics: Diagnostics {
            restarts: cfg.restarts,
            final_huber_delta: *cfg.huber_schedule.last().unwrap(),
            grid_n: cfg.grid_n,
            per_grid,
            ..Diagnostics::default()
        },
    })
}

/// Default scales for the recession estimator.
pub const RECESSION_SCALES: [f64; 3] = [1e2, 1e3, 1e4];

/// Estimates the recession density along the ray through `(xi, eta)` by the
/// largest scaling quotient `qtf(t xi, t eta) / t` over `t_list`.
///
/// The quotients are honest upper bounds of the envelope at each finite
/// scale, but the limit superior defining the recession density may exceed
/// every finite quotient, so the estimate is not flagged as an upper bound.
pub fn qtf_recession(
    q: &DensityQuery,
    g: &EdgeStop,
    cfg: &CellProblemConfig,
    t_list: &[f64],
) -> Result<DensityEstimate> {
    cfg.validate()?;
    if t_list.is_empty() || t_list.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidConfig(
            "t_list must be non-empty and positive".into(),
        ));
    }
    let mut per_scale = Vec::new();
    let mut value = 0.0f64;
    for &t in t_list {
        let scaled = DensityQuery {
            r: q.r,
            s: q.s,
            xi: [t * q.xi[0], t * q.xi[1]],
            eta: [
                [t * q.eta[0][0], t * q.eta[0][1]],
                [t * q.eta[1][0], t * q.eta[1][1]],
                [t * q.eta[2][0], t * q.eta[2][1]],
            ],
        };
        let est = qtf(&scaled, g, cfg)?;
        let quotient = est.value / t;
        per_scale.push((t, quotient));
        value = value.max(quotient);
    }
    let monotone = per_scale.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-9);
    Ok(DensityEstimate {
        value,
        is_upper_bound: false,
        diagnostics: Diagnostics {
            restarts: cfg.restarts,
            final_huber_delta: *cfg.huber_schedule.last().unwrap(),
            grid_n: cfg.grid_n,
            per_scale,
            quotients_monotone: Some(monotone),
            ..Diagnostics::default()
        },
    })
}
