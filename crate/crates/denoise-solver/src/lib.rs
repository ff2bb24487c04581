//! Restoration of color images in brightness–chromaticity form.
//!
//! The solver minimizes the sum of the edge-weighted regularizer from
//! `energy-model` and the texture-norm fidelity with mean penalties, over a
//! brightness field confined to `[alpha, beta]` and a chromaticity field
//! confined to the unit sphere, by alternating projected descent:
//!
//! * the chromaticity block takes smoothed gradient steps on every term that
//!   depends on the color direction and re-projects each pixel to the sphere;
//! * the brightness block does the same for the intensity and clamps to the
//!   box — the clamp is exact, so the constraints hold at every iterate;
//! * the dual-norm fidelity terms enter each block through a dual witness
//!   frozen at the current iterate (a linear model with the witness's
//!   subgradient direction), and every outer iteration is accepted only if
//!   the exact, unsmoothed total energy did not increase.
//!
//! A decreasing `epsilon` schedule tightens the penalties on the residual
//! means; [`gamma_probe`] reports how the mean gaps close as `epsilon`
//! shrinks. All randomness flows from a single seed, so identical inputs
//! produce bit-identical results.

mod projection;
mod smooth;
mod solver;

pub use projection::{grad_pi_y, project_pi_y, project_sphere, sample_ball};
pub use solver::{
    benchmark_pair, denoise, energy_trace_export, gamma_probe, psnr, two_phase_min_freg,
    DenoiseResult, GammaProbeReport, GammaProbeRow, TraceRow,
};

use energy_model::FidelityWeights;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default accepted relative suboptimality per stage.
pub const DEFAULT_DELTA_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),
    #[error("projection is undefined at its base point")]
    DegenerateProjection,
    #[error(transparent)]
    Field(#[from] field_core::Error),
    #[error(transparent)]
    Energy(#[from] energy_model::Error),
    #[error(transparent)]
    GNorm(#[from] gnorm::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Everything the solver needs besides the image and the edge-stopping
/// function. Field names double as config-file keys in the CLI.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverParams {
    /// Weight of the color dual-norm fidelity term.
    pub lambda_v: f64,
    /// Weight of the brightness dual-norm fidelity term.
    pub lambda_b: f64,
    /// Weight of the chromaticity L2 fidelity term.
    pub lambda_c: f64,
    /// Strictly decreasing, positive penalty scales; the mean penalties are
    /// `|integral| / epsilon`.
    pub epsilon_schedule: Vec<f64>,
    /// Outer iterations per `epsilon` stage (each one chroma + one
    /// brightness block, accepted only on exact descent).
    pub outer_iters: usize,
    /// Smoothed gradient steps per block.
    pub inner_iters: usize,
    /// Initial step size for the brightness block.
    pub step_b: f64,
    /// Initial step size for the chromaticity block.
    pub step_c: f64,
    /// Step reduction factor used by the line search and by outer-level
    /// retries, in (0, 1).
    pub backtrack: f64,
    /// Smoothing width for the non-smooth terms inside the blocks; the
    /// recorded energy is always the exact value.
    pub huber_delta: f64,
    /// Accepted suboptimality per stage: a stage counts as converged once an
    /// outer iteration improves the total by at most this (relative to scale).
    pub delta_tolerance: f64,
    /// Brightness box lower bound.
    pub alpha: f64,
    /// Brightness box upper bound.
    pub beta: f64,
    /// Below this norm the sphere projection falls back to a seeded base
    /// point.
    pub eta_min: f64,
    /// Iteration cap for each dual-norm evaluation.
    pub gnorm_max_iters: usize,
    /// Relative duality-gap target for each dual-norm evaluation.
    pub gnorm_tol: f64,
    pub seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            lambda_v: 1.0,
            lambda_b: 1.0,
            lambda_c: 1.0,
            epsilon_schedule: vec![1.0, 0.1, 0.01, 0.001],
            outer_iters: 30,
            inner_iters: 8,
            step_b: 0.05,
            step_c: 0.05,
            backtrack: 0.5,
            huber_delta: 1e-3,
            delta_tolerance: DEFAULT_DELTA_TOLERANCE,
            alpha: field_core::DEFAULT_ALPHA,
            beta: field_core::DEFAULT_BETA,
            eta_min: 1e-6,
            gnorm_max_iters: 4000,
            gnorm_tol: 1e-3,
            seed: 0,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.epsilon_schedule.is_empty() {
            return bad("epsilon_schedule must be non-empty".into());
        }
        for pair in self.epsilon_schedule.windows(2) {
            if !(pair[1] < pair[0]) {
                return bad(format!(
                    "epsilon_schedule must be strictly decreasing (got {} then {})",
                    pair[0], pair[1]
                ));
            }
        }
        if !self.epsilon_schedule.iter().all(|&e| e > 0.0) {
            return bad("epsilon_schedule entries must be positive".into());
        }
        if !(self.delta_tolerance >= 0.0) {
            return bad(format!(
                "delta_tolerance must be >= 0 (got {})",
                self.delta_tolerance
            ));
        }
        if !(0.0 < self.alpha && self.alpha < self.beta) {
            return bad(format!(
                "need 0 < alpha < beta (got {}, {})",
                self.alpha, self.beta
            ));
        }
        if self.outer_iters == 0 || self.inner_iters == 0 {
            return bad("outer_iters and inner_iters must be positive".into());
        }
        if !(self.step_b > 0.0 && self.step_c > 0.0) {
            return bad("step sizes must be positive".into());
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad(format!(
                "backtrack factor must lie in (0, 1) (got {})",
                self.backtrack
            ));
        }
        if !(self.huber_delta > 0.0) {
            return bad("huber_delta must be positive".into());
        }
        if !(self.eta_min > 0.0) {
            return bad("eta_min must be positive".into());
        }
        if !(self.lambda_v >= 0.0 && self.lambda_b >= 0.0 && self.lambda_c >= 0.0) {
            return bad("fidelity weights must be non-negative".into());
        }
        if self.gnorm_max_iters == 0 || !(self.gnorm_tol > 0.0) {
            return bad("dual-norm iteration parameters must be positive".into());
        }
        Ok(())
    }

    pub(crate) fn weights(&self) -> FidelityWeights {
        FidelityWeights {
            lambda_v: self.lambda_v,
            lambda_b: self.lambda_b,
            lambda_c: self.lambda_c,
        }
    }

    pub(crate) fn gnorm_config(&self) -> gnorm::GNormConfig {
        gnorm::GNormConfig {
            max_iters: self.gnorm_max_iters,
            tol_gap: self.gnorm_tol,
            check_every: 25,
            ..gnorm::GNormConfig::default()
        }
    }
}
