//! Command-line surface: one struct per subcommand plus shared flag groups.
//!
//! Solver flags mirror the `SolverParams` field names exactly, and the same
//! names work as keys in a `--config` file, so a run is reproducible from
//! either source; flags win over the file.

use crate::util::{domain, io_err, parse_f64_list, usage, Failure};
use clap::{Args, Parser, Subcommand, ValueEnum};
use densities::{CellProblemConfig, Formulation};
use energy_model::EdgeStop;
use std::path::PathBuf;

pub const VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (build ",
    env!("BUILD_HASH"),
    ")"
);

#[derive(Parser)]
#[command(
    name = "cbden",
    version = VERSION,
    about = "Chromaticity-brightness image restoration and relaxed-density calculators"
)]
pub struct Cli {
    /// Emit machine-readable JSON on stdout instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Restore a color image by the alternating projected-descent solver.
    Denoise(DenoiseArgs),
    /// Split an image into brightness and unit-chromaticity dumps.
    Decompose(DecomposeArgs),
    /// Rebuild a color image from brightness and chromaticity dumps.
    Recompose(RecomposeArgs),
    /// Dual (texture) norm of an image's channels.
    Gnorm(GnormArgs),
    /// Full energy breakdown of a candidate pair against a datum image.
    Energy(EnergyArgs),
    /// Upper bound on the tangentially relaxed bulk density at one query.
    Qtf(QtfArgs),
    /// Jump energy between two constant states across a flat interface.
    Jumpk(JumpkArgs),
    /// Mean-gap behavior across the penalty schedule, as CSV.
    GammaProbe(GammaProbeArgs),
    /// Degrade an image with a seeded noise model.
    Noise(NoiseArgs),
}

/// Where the working image comes from: a file or the built-in two-phase
/// benchmark.
#[derive(Args)]
pub struct SourceArgs {
    /// Input image (PPM P3/P6 or PNG).
    #[arg(long, conflicts_with = "synthetic")]
    pub input: Option<PathBuf>,
    /// Use the noisy half of the built-in benchmark at this side length.
    #[arg(long, value_name = "N")]
    pub synthetic: Option<usize>,
    /// Noise level of the synthetic benchmark.
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EdgeKind {
    /// 1 / (1 + (t/a)^2)
    Rational,
    /// exp(-(t/a)^2)
    Gaussian,
}

#[derive(Args)]
pub struct EdgeArgs {
    /// Edge-stopping profile applied to the brightness gradient.
    #[arg(long, value_enum, default_value_t = EdgeKind::Rational)]
    pub edge: EdgeKind,
    /// Scale `a` of the edge-stopping profile.
    #[arg(long, default_value_t = 1.0)]
    pub edge_scale: f64,
}

impl EdgeArgs {
    pub fn build(&self) -> Result<EdgeStop, Failure> {
        if !(self.edge_scale > 0.0) {
            return Err(domain(format!(
                "--edge-scale must be positive (got {})",
                self.edge_scale
            )));
        }
        Ok(match self.edge {
            EdgeKind::Rational => EdgeStop::Rational { a: self.edge_scale },
            EdgeKind::Gaussian => EdgeStop::Gaussian { a: self.edge_scale },
        })
    }
}

/// Optional overrides for every `SolverParams` field, plus a key=value
/// config file. Defaults, then file, then flags.
#[derive(Args)]
pub struct SolverArgs {
    /// Flat key=value parameter file; `#` starts a comment. Keys are the
    /// `SolverParams` field names.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Weight of the color dual-norm fidelity term.
    #[arg(long)]
    pub lambda_v: Option<f64>,
    /// Weight of the brightness dual-norm fidelity term.
    #[arg(long)]
    pub lambda_b: Option<f64>,
    /// Weight of the chromaticity L2 fidelity term.
    #[arg(long)]
    pub lambda_c: Option<f64>,
    /// Comma-separated, strictly decreasing, positive penalty scales.
    #[arg(long, visible_alias = "eps", allow_hyphen_values = true)]
    pub epsilon_schedule: Option<String>,
    /// Outer iterations per schedule stage.
    #[arg(long)]
    pub outer_iters: Option<usize>,
    /// Smoothed gradient steps per block.
    #[arg(long)]
    pub inner_iters: Option<usize>,
    /// Initial brightness step size.
    #[arg(long)]
    pub step_b: Option<f64>,
    /// Initial chromaticity step size.
    #[arg(long)]
    pub step_c: Option<f64>,
    /// Step reduction factor in (0, 1).
    #[arg(long)]
    pub backtrack: Option<f64>,
    /// Smoothing width inside the blocks.
    #[arg(long)]
    pub huber_delta: Option<f64>,
    /// Accepted relative suboptimality per stage.
    #[arg(long)]
    pub delta_tolerance: Option<f64>,
    /// Brightness box lower bound.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Brightness box upper bound.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Sphere-projection fallback threshold.
    #[arg(long)]
    pub eta_min: Option<f64>,
    /// Iteration cap per dual-norm evaluation.
    #[arg(long)]
    pub gnorm_max_iters: Option<usize>,
    /// Relative duality-gap target per dual-norm evaluation.
    #[arg(long)]
    pub gnorm_tol: Option<f64>,
    /// Seed for all randomness (including the synthetic benchmark).
    #[arg(long)]
    pub seed: Option<u64>,
}

impl SolverArgs {
    /// Defaults, overlaid by the config file, overlaid by explicit flags;
    /// validated before use.
    pub fn resolve(&self) -> Result<denoise_solver::SolverParams, Failure> {
        let mut p = denoise_solver::SolverParams::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| io_err(format!("{}: {e}", path.display())))?;
            apply_config(&mut p, &text)?;
        }
        macro_rules! overlay {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { p.$field = v; })*
            };
        }
        overlay!(
            lambda_v,
            lambda_b,
            lambda_c,
            outer_iters,
            inner_iters,
            step_b,
            step_c,
            backtrack,
            huber_delta,
            delta_tolerance,
            alpha,
            beta,
            eta_min,
            gnorm_max_iters,
            gnorm_tol,
            seed
        );
        if let Some(raw) = &self.epsilon_schedule {
            p.epsilon_schedule = parse_f64_list(raw, "--epsilon-schedule")?;
        }
        p.validate().map_err(|e| domain(e.to_string()))?;
        Ok(p)
    }
}

/// Applies `key = value` lines to `p`. Keys are exactly the `SolverParams`
/// field names; unknown keys and unparsable values are usage errors.
pub fn apply_config(p: &mut denoise_solver::SolverParams, text: &str) -> Result<(), Failure> {
    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(usage(format!(
                "config line {}: expected `key = value`, got `{line}`",
                idx + 1
            )));
        };
        set_param(p, key.trim(), value.trim())
            .map_err(|f| usage(format!("config line {}: {}", idx + 1, f.msg)))?;
    }
    Ok(())
}

fn set_param(p: &mut denoise_solver::SolverParams, key: &str, value: &str) -> Result<(), Failure> {
    fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, Failure> {
        value
            .parse::<T>()
            .map_err(|_| usage(format!("{key}: `{value}` is not a valid value")))
    }
    match key {
        "lambda_v" => p.lambda_v = num(key, value)?,
        "lambda_b" => p.lambda_b = num(key, value)?,
        "lambda_c" => p.lambda_c = num(key, value)?,
        "epsilon_schedule" => p.epsilon_schedule = parse_f64_list(value, key)?,
        "outer_iters" => p.outer_iters = num(key, value)?,
        "inner_iters" => p.inner_iters = num(key, value)?,
        "step_b" => p.step_b = num(key, value)?,
        "step_c" => p.step_c = num(key, value)?,
        "backtrack" => p.backtrack = num(key, value)?,
        "huber_delta" => p.huber_delta = num(key, value)?,
        "delta_tolerance" => p.delta_tolerance = num(key, value)?,
        "alpha" => p.alpha = num(key, value)?,
        "beta" => p.beta = num(key, value)?,
        "eta_min" => p.eta_min = num(key, value)?,
        "gnorm_max_iters" => p.gnorm_max_iters = num(key, value)?,
        "gnorm_tol" => p.gnorm_tol = num(key, value)?,
        "seed" => p.seed = num(key, value)?,
        _ => return Err(usage(format!("unknown parameter `{key}`"))),
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormulationKind {
    /// Two scalar fields in a tangent-plane basis.
    Tangent,
    /// Free 3-component field through the cut-off extension.
    Tilde,
}

/// Overrides for the cell-problem and transition-layer optimizers.
#[derive(Args)]
pub struct CellArgs {
    /// Finest cell resolution.
    #[arg(long)]
    pub grid_n: Option<usize>,
    /// Descent starts per level.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Descent iterations per smoothing stage.
    #[arg(long)]
    pub max_inner_iters: Option<usize>,
    /// Comma-separated smoothing widths, largest first.
    #[arg(long, allow_hyphen_values = true)]
    pub huber_schedule: Option<String>,
    /// Segments in the one-dimensional transition profile.
    #[arg(long)]
    pub profile_n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Brightness box lower bound.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Brightness box upper bound.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Cell-problem formulation.
    #[arg(long, value_enum)]
    pub formulation: Option<FormulationKind>,
    /// Also run the planar transition-layer descent as a diagnostic.
    #[arg(long)]
    pub jump_2d: bool,
}

impl CellArgs {
    pub fn resolve(&self) -> Result<CellProblemConfig, Failure> {
        let mut cfg = CellProblemConfig::default();
        macro_rules! overlay {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        overlay!(grid_n, restarts, max_inner_iters, profile_n, seed, alpha, beta);
        if let Some(raw) = &self.huber_schedule {
            cfg.huber_schedule = parse_f64_list(raw, "--huber-schedule")?;
        }
        if let Some(kind) = self.formulation {
            cfg.formulation = match kind {
                FormulationKind::Tangent => Formulation::Tangent,
                FormulationKind::Tilde => Formulation::Tilde,
            };
        }
        cfg.jump_2d = self.jump_2d;
        cfg.validate().map_err(|e| domain(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args)]
pub struct DenoiseArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Where to write the restored image (PNG or PPM by extension).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Per-iteration energy trace (CSV).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Restored brightness field as a CBF1 dump.
    #[arg(long)]
    pub brightness_out: Option<PathBuf>,
    /// Restored chromaticity field as a CBF1 dump.
    #[arg(long)]
    pub chromaticity_out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub edge: EdgeArgs,
}

#[derive(Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Brightness output (CBF1).
    #[arg(long)]
    pub brightness_out: PathBuf,
    /// Chromaticity output (CBF1).
    #[arg(long)]
    pub chromaticity_out: PathBuf,
    /// Brightness box lower bound.
    #[arg(long, default_value_t = field_core::DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Brightness box upper bound.
    #[arg(long, default_value_t = field_core::DEFAULT_BETA)]
    pub beta: f64,
    /// Seed (only used when the source is synthetic).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct RecomposeArgs {
    /// Brightness dump (CBF1, 1 channel).
    #[arg(long)]
    pub brightness: PathBuf,
    /// Chromaticity dump (CBF1, 3 channels, unit pixels).
    #[arg(long)]
    pub chromaticity: PathBuf,
    /// Where to write the rebuilt image.
    #[arg(long)]
    pub output: PathBuf,
    /// Brightness box lower bound.
    #[arg(long, default_value_t = field_core::DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Brightness box upper bound.
    #[arg(long, default_value_t = field_core::DEFAULT_BETA)]
    pub beta: f64,
}

#[derive(Args)]
pub struct GnormArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Subtract each channel's mean first (the norm is only defined for
    /// zero-mean fields).
    #[arg(long)]
    pub center: bool,
    /// Iteration cap.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Relative duality-gap target.
    #[arg(long)]
    pub tol_gap: Option<f64>,
    /// Seed (only used when the source is synthetic).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct EnergyArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Candidate brightness (CBF1); defaults to the datum's own.
    #[arg(long)]
    pub brightness: Option<PathBuf>,
    /// Candidate chromaticity (CBF1); defaults to the datum's own.
    #[arg(long)]
    pub chromaticity: Option<PathBuf>,
    /// Penalty scale for the residual means.
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_v: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_b: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_c: f64,
    /// Brightness box lower bound.
    #[arg(long, default_value_t = field_core::DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Brightness box upper bound.
    #[arg(long, default_value_t = field_core::DEFAULT_BETA)]
    pub beta: f64,
    /// Iteration cap per dual-norm evaluation.
    #[arg(long)]
    pub gnorm_max_iters: Option<usize>,
    /// Relative duality-gap target per dual-norm evaluation.
    #[arg(long)]
    pub gnorm_tol: Option<f64>,
    /// Seed (only used when the source is synthetic).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub edge: EdgeArgs,
}

#[derive(Args)]
pub struct QtfArgs {
    /// Brightness value of the base state.
    #[arg(long)]
    pub r: f64,
    /// Unit chromaticity, comma-separated (e.g. 0,0,1).
    #[arg(long, allow_hyphen_values = true)]
    pub s: String,
    /// Brightness gradient, comma-separated (2 components).
    #[arg(long, allow_hyphen_values = true)]
    pub xi: String,
    /// Chromaticity gradient, row-major (6 components:
    /// e11,e12,e21,e22,e31,e32).
    #[arg(long, allow_hyphen_values = true, conflicts_with = "eta_zero")]
    pub eta: Option<String>,
    /// Shorthand for a zero chromaticity gradient.
    #[arg(long)]
    pub eta_zero: bool,
    #[command(flatten)]
    pub cell: CellArgs,
    #[command(flatten)]
    pub edge: EdgeArgs,
}

#[derive(Args)]
pub struct JumpkArgs {
    /// Brightness of state a.
    #[arg(long)]
    pub ra: f64,
    /// Unit chromaticity of state a, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pub sa: String,
    /// Brightness of state b.
    #[arg(long)]
    pub rb: f64,
    /// Unit chromaticity of state b, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pub sb: String,
    /// Unit interface normal.
    #[arg(long, default_value = "1,0", allow_hyphen_values = true)]
    pub nu: String,
    #[command(flatten)]
    pub cell: CellArgs,
    #[command(flatten)]
    pub edge: EdgeArgs,
}

#[derive(Args)]
pub struct GammaProbeArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Where to write the CSV; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub edge: EdgeArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum NoiseKind {
    /// Independent per-channel Gaussian noise.
    GaussianRgb,
    /// Random rotation of each pixel's chromaticity; brightness untouched.
    ChromaRotation,
    /// Deterministic zero-mean oscillation on every channel.
    Texture,
}

#[derive(Args)]
pub struct NoiseArgs {
    /// Input image (PPM P3/P6 or PNG).
    #[arg(long, conflicts_with = "synthetic")]
    pub input: Option<PathBuf>,
    /// Use the clean half of the built-in benchmark at this side length.
    #[arg(long, value_name = "N")]
    pub synthetic: Option<usize>,
    /// Where to write the degraded image.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = NoiseKind::GaussianRgb)]
    pub model: NoiseKind,
    /// Standard deviation of the Gaussian model.
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    /// Angle deviation of the rotation model.
    #[arg(long, default_value_t = 0.2)]
    pub sigma_theta: f64,
    /// Oscillation periods per axis of the texture model.
    #[arg(long, default_value_t = 8)]
    pub k: u32,
    /// Oscillation amplitude of the texture model.
    #[arg(long, default_value_t = 0.05)]
    pub amp: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
