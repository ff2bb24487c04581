//! One runner per subcommand. Each returns the process exit code (0
//! success, 2 finished without convergence) or a [`Failure`].

use crate::args::*;
use crate::util::{domain, field_err, io_err, parse_fixed, solver_err, usage, Failure};
use denoise_solver::{benchmark_pair, denoise, energy_trace_export, gamma_probe, psnr};
use densities::{jump_k, qtf, JumpSpec};
use energy_model::{energy_total, DensityQuery, FidelityWeights, PhaseState};
use field_core::{
    add_noise, decompose, load_image, read_cbf1, recompose, save_image, vec3, write_cbf1,
    BrightnessField, ChromaticityField, ColorImage, DecomposeOptions, NoiseModel, ScalarField,
    Vec3Field,
};
use gnorm::{gnorm, GNormConfig};
use serde_json::json;
use std::path::Path;

pub fn run(cli: Cli) -> Result<u8, Failure> {
    let json = cli.json;
    match cli.command {
        Command::Denoise(a) => denoise_cmd(a, json),
        Command::Decompose(a) => decompose_cmd(a, json),
        Command::Recompose(a) => recompose_cmd(a, json),
        Command::Gnorm(a) => gnorm_cmd(a, json),
        Command::Energy(a) => energy_cmd(a, json),
        Command::Qtf(a) => qtf_cmd(a, json),
        Command::Jumpk(a) => jumpk_cmd(a, json),
        Command::GammaProbe(a) => gamma_probe_cmd(a, json),
        Command::Noise(a) => noise_cmd(a, json),
    }
}

/// Resolves the working image: a file, or the noisy half of the built-in
/// two-phase benchmark.
fn load_source(src: &SourceArgs, seed: u64) -> Result<ColorImage, Failure> {
    match (&src.input, src.synthetic) {
        (Some(path), None) => load_image(path).map_err(field_err),
        (None, Some(n)) => {
            if n < 2 {
                return Err(domain("--synthetic side length must be at least 2"));
            }
            if !(src.sigma >= 0.0) {
                return Err(domain(format!("--sigma must be >= 0 (got {})", src.sigma)));
            }
            Ok(benchmark_pair(n, src.sigma, seed).1)
        }
        (None, None) => Err(usage("provide --input FILE or --synthetic N")),
        (Some(_), Some(_)) => Err(usage("--input and --synthetic are mutually exclusive")),
    }
}

/// Saves an image and reports quantization clamping on stderr so stdout
/// stays machine-readable.
fn write_image(path: &Path, img: &ColorImage) -> Result<usize, Failure> {
    let report = save_image(path, img).map_err(field_err)?;
    if report.clamped_pixels > 0 {
        eprintln!(
            "note: {} pixels were clamped to [0, 1] while writing {}",
            report.clamped_pixels,
            path.display()
        );
    }
    Ok(report.clamped_pixels)
}

fn write_scalar_dump(path: &Path, f: &ScalarField) -> Result<(), Failure> {
    write_cbf1(path, f.rows(), f.cols(), 1, f.data()).map_err(field_err)
}

fn write_vec3_dump(path: &Path, f: &Vec3Field) -> Result<(), Failure> {
    let flat: Vec<f64> = f.data().iter().flatten().copied().collect();
    write_cbf1(path, f.rows(), f.cols(), 3, &flat).map_err(field_err)
}

fn read_scalar_dump(path: &Path) -> Result<ScalarField, Failure> {
    read_cbf1(path).and_then(|d| d.to_scalar()).map_err(field_err)
}

fn read_vec3_dump(path: &Path) -> Result<Vec3Field, Failure> {
    read_cbf1(path).and_then(|d| d.to_vec3()).map_err(field_err)
}

/// Checks a user-supplied brightness/chromaticity pair against the model's
/// constraints, then tightens it exactly (box clamp, renormalization) so the
/// typed wrappers accept it. Rejects anything further off than read-back
/// rounding could explain.
fn validate_pair(
    b: &ScalarField,
    c: &Vec3Field,
    alpha: f64,
    beta: f64,
) -> Result<(BrightnessField, ChromaticityField), Failure> {
    if b.rows() != c.rows() || b.cols() != c.cols() {
        return Err(domain(format!(
            "brightness is {}x{} but chromaticity is {}x{}",
            b.rows(),
            b.cols(),
            c.rows(),
            c.cols()
        )));
    }
    let mut bf = b.clone();
    for v in bf.data_mut() {
        if !v.is_finite() || *v < alpha - 1e-9 || *v > beta + 1e-9 {
            return Err(domain(format!(
                "brightness value {v} lies outside [{alpha}, {beta}]"
            )));
        }
        *v = v.clamp(alpha, beta);
    }
    let mut cf = c.clone();
    for px in cf.data_mut() {
        let n = vec3::norm(*px);
        if !n.is_finite() || (n - 1.0).abs() > 1e-6 {
            return Err(domain(format!(
                "chromaticity pixel has norm {n}, expected 1 within 1e-6"
            )));
        }
        *px = vec3::normalize_or(*px, 1e-12, [0.0, 0.0, 1.0]);
    }
    Ok((BrightnessField::new(bf, alpha, beta), ChromaticityField::new(cf)))
}

fn check_box(alpha: f64, beta: f64) -> Result<(), Failure> {
    if !(0.0 < alpha && alpha < beta && beta.is_finite()) {
        return Err(domain(format!(
            "need 0 < alpha < beta (got alpha = {alpha}, beta = {beta})"
        )));
    }
    Ok(())
}

fn print_json(value: &serde_json::Value) {
    println!("{value}");
}

fn yes_no(flags: &[bool]) -> String {
    flags
        .iter()
        .map(|&f| if f { "yes" } else { "no" })
        .collect::<Vec<_>>()
        .join(" ")
}

fn denoise_cmd(a: DenoiseArgs, json: bool) -> Result<u8, Failure> {
    let p = a.solver.resolve()?;
    let g = a.edge.build()?;
    let img = load_source(&a.source, p.seed)?;
    let result = denoise(&img, &p, &g).map_err(solver_err)?;
    if let Some(path) = &a.trace {
        energy_trace_export(&result, path).map_err(solver_err)?;
    }
    let mut clamped = None;
    if let Some(path) = &a.output {
        clamped = Some(write_image(path, &result.restored)?);
    }
    if let Some(path) = &a.brightness_out {
        write_scalar_dump(path, result.brightness.values())?;
    }
    if let Some(path) = &a.chromaticity_out {
        write_vec3_dump(path, result.chromaticity.values())?;
    }
    let all_converged = result.converged.iter().all(|&c| c);
    let final_energy = result.trace.last().map(|r| r.energy.total);
    let moved = psnr(&result.restored, &img, 1.0);
    if json {
        print_json(&json!({
            "rows": img.rows(),
            "cols": img.cols(),
            "epsilon_schedule": p.epsilon_schedule,
            "iterations": result.iterations,
            "converged": result.converged,
            "mean_gaps": result.mean_gaps,
            "final_energy": final_energy,
            "psnr_vs_input": moved,
            "clamped_pixels": clamped,
        }));
    } else {
        println!("image: {}x{}", img.rows(), img.cols());
        println!(
            "stages (epsilon): {}",
            p.epsilon_schedule
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(", ")
        );
        println!("outer iterations: {}", result.iterations);
        println!("converged: {}", yes_no(&result.converged));
        if let Some(e) = final_energy {
            println!("final energy: {e:.12e}");
        }
        if let Some((gb, gc)) = result.mean_gaps.last() {
            println!("mean gaps (final): brightness {gb:.3e}, color {gc:.3e}");
        }
        println!("psnr vs input: {moved:.2} dB");
        if let (Some(path), Some(n)) = (&a.output, clamped) {
            println!("wrote {} ({n} pixels clamped)", path.display());
        }
    }
    Ok(if all_converged { 0 } else { 2 })
}

fn decompose_cmd(a: DecomposeArgs, json: bool) -> Result<u8, Failure> {
    check_box(a.alpha, a.beta)?;
    let img = load_source(&a.source, a.seed)?;
    let opts = DecomposeOptions {
        alpha: a.alpha,
        beta: a.beta,
        ..DecomposeOptions::default()
    };
    let (b, c) = decompose(&img, &opts).map_err(field_err)?;
    write_scalar_dump(&a.brightness_out, b.values())?;
    write_vec3_dump(&a.chromaticity_out, c.values())?;
    if json {
        print_json(&json!({
            "rows": img.rows(),
            "cols": img.cols(),
            "alpha": a.alpha,
            "beta": a.beta,
            "brightness_out": a.brightness_out.display().to_string(),
            "chromaticity_out": a.chromaticity_out.display().to_string(),
        }));
    } else {
        println!(
            "decomposed {}x{} image into {} and {}",
            img.rows(),
            img.cols(),
            a.brightness_out.display(),
            a.chromaticity_out.display()
        );
    }
    Ok(0)
}

fn recompose_cmd(a: RecomposeArgs, json: bool) -> Result<u8, Failure> {
    check_box(a.alpha, a.beta)?;
    let b = read_scalar_dump(&a.brightness)?;
    let c = read_vec3_dump(&a.chromaticity)?;
    let (bf, cf) = validate_pair(&b, &c, a.alpha, a.beta)?;
    let img = recompose(&bf, &cf);
    let clamped = write_image(&a.output, &img)?;
    if json {
        print_json(&json!({
            "rows": img.rows(),
            "cols": img.cols(),
            "output": a.output.display().to_string(),
            "clamped_pixels": clamped,
        }));
    } else {
        println!(
            "recomposed {}x{} image to {}",
            img.rows(),
            img.cols(),
            a.output.display()
        );
    }
    Ok(0)
}

fn gnorm_cmd(a: GnormArgs, json: bool) -> Result<u8, Failure> {
    let img = load_source(&a.source, a.seed)?;
    let mut channels: Vec<ScalarField> = (0..3)
        .map(|ch| ScalarField::from_fn(img.rows(), img.cols(), |i, j| img.get(i, j)[ch]))
        .collect();
    if a.center {
        for field in &mut channels {
            let mean = field.data().iter().sum::<f64>() / field.data().len() as f64;
            for v in field.data_mut() {
                *v -= mean;
            }
        }
    }
    let mut cfg = GNormConfig::default();
    if let Some(n) = a.max_iters {
        cfg.max_iters = n;
    }
    if let Some(t) = a.tol_gap {
        cfg.tol_gap = t;
    }
    let res = gnorm(&channels, &cfg).map_err(|e| match e {
        gnorm::Error::NonZeroMean { .. } => domain(format!("NonZeroMean: {e}")),
    })?;
    if json {
        print_json(&json!({
            "value": res.value,
            "lower_bound": res.lower_bound,
            "gap": res.gap,
            "feasibility_residual": res.feasibility_residual,
            "iterations": res.iterations,
            "converged": res.converged,
        }));
    } else {
        println!("gnorm: {:.12e}", res.value);
        println!("lower bound: {:.12e}", res.lower_bound);
        println!("relative gap: {:.3e}", res.gap);
        println!("feasibility residual: {:.3e}", res.feasibility_residual);
        println!("iterations: {}", res.iterations);
        println!("converged: {}", yes_no(&[res.converged]));
    }
    Ok(if res.converged { 0 } else { 2 })
}

fn energy_cmd(a: EnergyArgs, json: bool) -> Result<u8, Failure> {
    check_box(a.alpha, a.beta)?;
    if !(a.epsilon > 0.0) {
        return Err(domain(format!("--epsilon must be positive (got {})", a.epsilon)));
    }
    let g = a.edge.build()?;
    let img = load_source(&a.source, a.seed)?;
    let opts = DecomposeOptions {
        alpha: a.alpha,
        beta: a.beta,
        ..DecomposeOptions::default()
    };
    let (b0, c0) = decompose(&img, &opts).map_err(field_err)?;
    let (bf, cf) = if a.brightness.is_none() && a.chromaticity.is_none() {
        (b0.clone(), c0.clone())
    } else {
        let b = match &a.brightness {
            Some(path) => read_scalar_dump(path)?,
            None => b0.values().clone(),
        };
        let c = match &a.chromaticity {
            Some(path) => read_vec3_dump(path)?,
            None => c0.values().clone(),
        };
        validate_pair(&b, &c, a.alpha, a.beta)?
    };
    if bf.rows() != img.rows() || bf.cols() != img.cols() {
        return Err(domain(format!(
            "candidate is {}x{} but the datum image is {}x{}",
            bf.rows(),
            bf.cols(),
            img.rows(),
            img.cols()
        )));
    }
    let weights = FidelityWeights {
        lambda_v: a.lambda_v,
        lambda_b: a.lambda_b,
        lambda_c: a.lambda_c,
    };
    let mut gcfg = GNormConfig::default();
    if let Some(n) = a.gnorm_max_iters {
        gcfg.max_iters = n;
    }
    if let Some(t) = a.gnorm_tol {
        gcfg.tol_gap = t;
    }
    let br = energy_total(&bf, &cf, &img, &b0, &c0, &g, a.epsilon, &weights, &gcfg)
        .map_err(|e| domain(e.to_string()))?;
    if json {
        print_json(&serde_json::to_value(&br).expect("breakdown serializes"));
    } else {
        println!("tv_brightness: {:.12e}", br.tv_brightness);
        println!("weighted_chroma: {:.12e}", br.weighted_chroma);
        println!("tv_product: {:.12e}", br.tv_product);
        println!("regularizer: {:.12e}", br.regularizer);
        println!("gnorm_color: {:.12e}", br.gnorm_color);
        println!("gnorm_brightness: {:.12e}", br.gnorm_brightness);
        println!("mean_penalty_color: {:.12e}", br.mean_penalty_color);
        println!("mean_penalty_brightness: {:.12e}", br.mean_penalty_brightness);
        println!("l2_chroma: {:.12e}", br.l2_chroma);
        println!("fidelity: {:.12e}", br.fidelity);
        println!("total: {:.12e}", br.total);
    }
    Ok(0)
}

fn qtf_cmd(a: QtfArgs, json: bool) -> Result<u8, Failure> {
    let s = parse_fixed::<3>(&a.s, "--s")?;
    let xi = parse_fixed::<2>(&a.xi, "--xi")?;
    let eta = match (&a.eta, a.eta_zero) {
        (Some(raw), false) => {
            let e = parse_fixed::<6>(raw, "--eta")?;
            [[e[0], e[1]], [e[2], e[3]], [e[4], e[5]]]
        }
        (None, true) => [[0.0; 2]; 3],
        _ => return Err(usage("provide --eta E11,E12,E21,E22,E31,E32 or --eta-zero")),
    };
    let q = DensityQuery::new(a.r, s, xi, eta).map_err(|e| domain(e.to_string()))?;
    let cfg = a.cell.resolve()?;
    let g = a.edge.build()?;
    let est = qtf(&q, &g, &cfg).map_err(|e| domain(e.to_string()))?;
    if json {
        print_json(&json!({
            "value": est.value,
            "is_upper_bound": est.is_upper_bound,
            "grid_n": est.diagnostics.grid_n,
            "restarts": est.diagnostics.restarts,
            "per_grid": est.diagnostics.per_grid,
            "flagged": est.diagnostics.flagged,
        }));
    } else {
        println!("{}", est.value);
    }
    Ok(if est.diagnostics.flagged { 2 } else { 0 })
}

fn jumpk_cmd(a: JumpkArgs, json: bool) -> Result<u8, Failure> {
    let sa = parse_fixed::<3>(&a.sa, "--sa")?;
    let sb = parse_fixed::<3>(&a.sb, "--sb")?;
    let nu = parse_fixed::<2>(&a.nu, "--nu")?;
    let spec = JumpSpec {
        a: PhaseState { r: a.ra, s: sa },
        b: PhaseState { r: a.rb, s: sb },
        nu,
    };
    let cfg = a.cell.resolve()?;
    let g = a.edge.build()?;
    let est = jump_k(&spec, &g, &cfg).map_err(|e| domain(e.to_string()))?;
    if json {
        print_json(&json!({
            "value": est.value,
            "is_upper_bound": est.is_upper_bound,
            "counting_value": est.diagnostics.counting_value,
            "surrogate_value": est.diagnostics.surrogate_value,
            "scheme_disagreement": est.diagnostics.scheme_disagreement,
            "planar_value": est.diagnostics.planar_value,
            "flagged": est.diagnostics.flagged,
        }));
    } else {
        println!("{}", est.value);
    }
    Ok(if est.diagnostics.flagged { 2 } else { 0 })
}

fn gamma_probe_cmd(a: GammaProbeArgs, json: bool) -> Result<u8, Failure> {
    let p = a.solver.resolve()?;
    let g = a.edge.build()?;
    let img = load_source(&a.source, p.seed)?;
    let report = gamma_probe(&img, &p, &g).map_err(solver_err)?;
    let mut csv =
        String::from("epsilon,mean_gap_brightness,mean_gap_color,f_reg,f_fid_eps,f_fid_centered,total\n");
    for row in &report.rows {
        csv.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            row.epsilon,
            row.mean_gap_brightness,
            row.mean_gap_color,
            row.f_reg,
            row.f_fid_eps,
            row.f_fid_centered,
            row.total
        ));
    }
    if let Some(path) = &a.output {
        std::fs::write(path, &csv).map_err(|e| io_err(format!("{}: {e}", path.display())))?;
    }
    let all_converged = report.result.converged.iter().all(|&c| c);
    if json {
        print_json(&json!({
            "rows": report.rows,
            "gaps_monotone": report.gaps_monotone,
            "gaps_within_tolerance": report.gaps_within_tolerance,
            "energy_stable": report.energy_stable,
            "gap_tolerance": report.gap_tolerance,
            "energy_variation": report.energy_variation,
            "converged": report.result.converged,
        }));
    } else if a.output.is_none() {
        print!("{csv}");
    } else {
        println!("wrote {}", a.output.as_ref().expect("checked").display());
        println!("gaps monotone: {}", yes_no(&[report.gaps_monotone]));
        println!(
            "gaps within tolerance: {}",
            yes_no(&[report.gaps_within_tolerance])
        );
        println!("energy stable: {}", yes_no(&[report.energy_stable]));
    }
    Ok(if all_converged { 0 } else { 2 })
}

fn noise_cmd(a: NoiseArgs, json: bool) -> Result<u8, Failure> {
    let img = match (&a.input, a.synthetic) {
        (Some(path), None) => load_image(path).map_err(field_err)?,
        (None, Some(n)) => {
            if n < 2 {
                return Err(domain("--synthetic side length must be at least 2"));
            }
            benchmark_pair(n, 0.0, a.seed).0
        }
        (None, None) => return Err(usage("provide --input FILE or --synthetic N")),
        (Some(_), Some(_)) => {
            return Err(usage("--input and --synthetic are mutually exclusive"))
        }
    };
    let model = match a.model {
        NoiseKind::GaussianRgb => {
            if !(a.sigma >= 0.0) {
                return Err(domain(format!("--sigma must be >= 0 (got {})", a.sigma)));
            }
            NoiseModel::GaussianRgb { sigma: a.sigma }
        }
        NoiseKind::ChromaRotation => {
            if !(a.sigma_theta >= 0.0) {
                return Err(domain(format!(
                    "--sigma-theta must be >= 0 (got {})",
                    a.sigma_theta
                )));
            }
            NoiseModel::ChromaRotation {
                sigma_theta: a.sigma_theta,
            }
        }
        NoiseKind::Texture => {
            if !a.amp.is_finite() {
                return Err(domain(format!("--amp must be finite (got {})", a.amp)));
            }
            NoiseModel::Texture { k: a.k, amp: a.amp }
        }
    };
    let noisy = add_noise(&img, &model, a.seed);
    let clamped = write_image(&a.output, &noisy)?;
    if json {
        print_json(&json!({
            "rows": noisy.rows(),
            "cols": noisy.cols(),
            "output": a.output.display().to_string(),
            "seed": a.seed,
            "clamped_pixels": clamped,
        }));
    } else {
        println!(
            "wrote {}x{} degraded image to {}",
            noisy.rows(),
            noisy.cols(),
            a.output.display()
        );
    }
    Ok(0)
}
