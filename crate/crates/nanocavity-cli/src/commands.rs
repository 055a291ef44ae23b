//! Subcommand implementations and exit-code policy.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical/fit failure,
//! 4 internal invariant violation. All file writes happen after the
//! computation finishes; floats are serialized with 12 significant digits
//! so identical runs produce byte-identical data files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use nanocavity::design::{design_from_json, CavityDesign, EffectiveIndexProfile, Polarization};
use nanocavity::io::{
    cqed_report_json, fit_report_json, fmt_sig, round_sig, sweep_sidecar_json, write_emission_csv,
    write_spectrum_csv, write_sweep_csv,
};
use nanocavity::sweep::{design_hash, design_point};
use nanocavity::{
    build_stack, calibrate_slat_loss, classify_regime, effective_indices, effective_length,
    emission_spectrum, emit, fit_kappa_sc, helmholtz_oracle, reflection_spectrum, sweep_n_in,
    sweep_n_out, sweep_reflection, CqedReport, Error,
};

#[derive(Parser)]
#[command(name = "nanocavity", version, about = "One-sided composite nanofiber cavity simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Ypol,
    Xpol,
    Both,
}

#[derive(Args)]
pub struct CommonArgs {
    /// Cavity design JSON file.
    #[arg(long)]
    pub design: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Polarization profile(s) to run.
    #[arg(long, value_enum, default_value = "both")]
    pub profile: ProfileArg,
    /// Worker threads for sweeps and spectra (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Override the slat loss Im(n_slat).
    #[arg(long)]
    pub loss: Option<f64>,
    /// Remove all loss (overrides --loss).
    #[arg(long, default_value_t = false)]
    pub lossless: bool,
    /// Random seed recorded in provenance (reserved for noise-injection
    /// test modes).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Subcommand)]
pub enum Command {
    /// Reflection spectra and Lorentzian fit reports.
    Spectrum {
        #[command(flatten)]
        common: CommonArgs,
        /// Wavelength window, nm (lo:hi).
        #[arg(long, default_value = "600:640")]
        window: String,
        /// Uniform samples before adaptive refinement.
        #[arg(long, default_value_t = 4001)]
        samples: usize,
    },
    /// Emission spectra (Purcell factor and channeling fractions).
    Emit {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "600:640")]
        window: String,
        #[arg(long, default_value_t = 2001)]
        samples: usize,
        /// Cross-check the closed form against the finite-difference
        /// point-source solve at representative wavelengths.
        #[arg(long, default_value_t = false)]
        oracle: bool,
    },
    /// Slat-count sweeps.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// What to sweep: input mirror, output mirror, or the reflection
        /// pipeline over the input mirror.
        #[arg(long, value_enum)]
        mode: SweepMode,
        /// Swept values as lo:hi:step (defaults per mode).
        #[arg(long)]
        range: Option<String>,
        /// Fixed opposite-mirror slat count (defaults per mode).
        #[arg(long)]
        fixed: Option<usize>,
    },
    /// Cavity-QED performance report (Q_sc, finesse, loss, C, 2g0).
    Metrics {
        #[command(flatten)]
        common: CommonArgs,
        /// Fit kappa_sc from an existing kappa_ghz,r0 CSV instead of
        /// simulating the sweep.
        #[arg(long)]
        points: Option<PathBuf>,
        /// Emitter free decay rate (GHz).
        #[arg(long, default_value_t = 1.2)]
        gamma_ghz: f64,
        /// Input-mirror family for the kappa_sc fit, lo:hi:step.
        #[arg(long, default_value = "100:400:20")]
        range: String,
        /// Output mirror of the kappa_sc family.
        #[arg(long, default_value_t = 400)]
        n_out: usize,
    },
    /// Calibrate Im(n_slat) against a target scattering rate.
    Calibrate {
        #[command(flatten)]
        common: CommonArgs,
        /// Target scattering rate (GHz).
        #[arg(long, default_value_t = 25.0)]
        target_ghz: f64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepMode {
    Nin,
    Nout,
    Reflection,
}

/// Failure classified by exit code.
enum Failure {
    Config(String),
    Numerical(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> ExitCode {
        match self {
            Failure::Config(_) => ExitCode::from(2),
            Failure::Numerical(_) => ExitCode::from(3),
            Failure::Internal(_) => ExitCode::from(4),
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numerical(m) | Failure::Internal(m) => m,
        }
    }
}

fn classify(err: Error) -> Failure {
    match &err {
        Error::InvalidDesign(_) | Error::InvalidInput(_) | Error::Io(_) | Error::Json(_) => {
            Failure::Config(err.to_string())
        }
        Error::NoDipFound { .. }
        | Error::FitDidNotConverge { .. }
        | Error::GridLimited { .. }
        | Error::NoConfinedMode
        | Error::DegenerateResonance { .. }
        | Error::CalibrationUnreachable { .. }
        | Error::OracleNotConverged { .. }
        | Error::NumericalFailure(_) => Failure::Numerical(err.to_string()),
    }
}

pub fn run(cli: Cli) -> ExitCode {
    let result = match cli.command {
        Command::Spectrum {
            common,
            window,
            samples,
        } => with_pool(&common, |ctx| cmd_spectrum(ctx, &window, samples)),
        Command::Emit {
            common,
            window,
            samples,
            oracle,
        } => with_pool(&common, |ctx| cmd_emit(ctx, &window, samples, oracle)),
        Command::Sweep {
            common,
            mode,
            range,
            fixed,
        } => with_pool(&common, |ctx| cmd_sweep(ctx, mode, range.as_deref(), fixed)),
        Command::Metrics {
            common,
            points,
            gamma_ghz,
            range,
            n_out,
        } => with_pool(&common, |ctx| {
            cmd_metrics(ctx, points.as_deref(), gamma_ghz, &range, n_out)
        }),
        Command::Calibrate { common, target_ghz } => {
            with_pool(&common, |ctx| cmd_calibrate(ctx, target_ghz))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

/// Resolved run context shared by all commands.
struct Ctx {
    design: CavityDesign,
    design_path: PathBuf,
    out_dir: PathBuf,
    profiles: Vec<Polarization>,
    loss: Option<f64>,
    lossless: bool,
    seed: u64,
    workers: Option<usize>,
    started: Instant,
}

impl Ctx {
    /// Design and calibrated (possibly overridden) profile for one
    /// polarization.
    fn realize(&self, pol: Polarization) -> Result<(CavityDesign, EffectiveIndexProfile), Failure> {
        let design = self.design.with_polarization(pol);
        let mut profile = effective_indices(&design).map_err(classify)?;
        if let Some(im) = self.loss {
            if !(im >= 0.0) {
                return Err(Failure::Config(format!("--loss must be >= 0, got {im}")));
            }
            profile = profile.with_slat_loss(im);
        }
        if self.lossless {
            profile = profile.lossless();
        }
        Ok((design, profile))
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
        let path = self.out_dir.join(name);
        fs::write(&path, bytes).map_err(|e| Failure::Config(format!("cannot write {name}: {e}")))?;
        Ok(path)
    }

    fn provenance(&self, command: &str, parameters: Value, outputs: &[PathBuf]) -> Value {
        json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "design_path": self.design_path.display().to_string(),
            "design_sha256": design_hash(&self.design),
            "design": serde_json::to_value(&self.design).unwrap(),
            "profiles": self.profiles.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
            "loss_override": self.loss.map(round_sig),
            "lossless": self.lossless,
            "seed": self.seed,
            "workers": self.workers,
            "parameters": parameters,
            "wall_time_s": self.started.elapsed().as_secs_f64(),
            "outputs": outputs.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect::<Vec<_>>(),
        })
    }

    fn finish(
        &self,
        command: &str,
        parameters: Value,
        outputs: Vec<PathBuf>,
    ) -> Result<(), Failure> {
        let prov = self.provenance(command, parameters, &outputs);
        self.write(
            "provenance.json",
            (serde_json::to_string_pretty(&prov).unwrap() + "\n").as_bytes(),
        )?;
        Ok(())
    }
}

fn with_pool<F>(common: &CommonArgs, body: F) -> Result<(), Failure>
where
    F: FnOnce(&Ctx) -> Result<(), Failure> + Send,
{
    let text = fs::read_to_string(&common.design).map_err(|e| {
        Failure::Config(format!(
            "cannot read design file {}: {e}",
            common.design.display()
        ))
    })?;
    let design = design_from_json(&text).map_err(classify)?;
    fs::create_dir_all(&common.out).map_err(|e| {
        Failure::Config(format!(
            "cannot create output directory {}: {e}",
            common.out.display()
        ))
    })?;
    let profiles = match common.profile {
        ProfileArg::Ypol => vec![Polarization::YPol],
        ProfileArg::Xpol => vec![Polarization::XPol],
        ProfileArg::Both => vec![Polarization::YPol, Polarization::XPol],
    };
    let ctx = Ctx {
        design,
        design_path: common.design.clone(),
        out_dir: common.out.clone(),
        profiles,
        loss: common.loss,
        lossless: common.lossless,
        seed: common.seed,
        workers: common.workers,
        started: Instant::now(),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = common.workers {
        if w == 0 {
            return Err(Failure::Config("--workers must be >= 1".into()));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Failure::Internal(format!("thread pool: {e}")))?;
    pool.install(|| body(&ctx))
}

fn parse_window(s: &str) -> Result<(f64, f64), Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 2 {
        return Err(Failure::Config(format!("bad window '{s}', expected lo:hi")));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| Failure::Config(format!("bad window bound '{}'", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| Failure::Config(format!("bad window bound '{}'", parts[1])))?;
    if !(lo > 0.0 && lo < hi) {
        return Err(Failure::Config(format!("bad window '{s}': need 0 < lo < hi")));
    }
    Ok((lo, hi))
}

fn parse_steps(s: &str) -> Result<Vec<usize>, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(Failure::Config(format!(
            "bad range '{s}', expected lo:hi:step"
        )));
    }
    let lo: usize = parts[0]
        .parse()
        .map_err(|_| Failure::Config(format!("bad range bound '{}'", parts[0])))?;
    let hi: usize = parts[1]
        .parse()
        .map_err(|_| Failure::Config(format!("bad range bound '{}'", parts[1])))?;
    let step: usize = parts[2]
        .parse()
        .map_err(|_| Failure::Config(format!("bad range step '{}'", parts[2])))?;
    if step == 0 || hi < lo {
        return Err(Failure::Config(format!("bad range '{s}'")));
    }
    Ok((lo..=hi).step_by(step).collect())
}

fn cmd_spectrum(ctx: &Ctx, window: &str, samples: usize) -> Result<(), Failure> {
    let (lo, hi) = parse_window(window)?;
    let mut outputs = Vec::new();
    let mut fit_failure: Option<Failure> = None;
    for &pol in &ctx.profiles {
        let (design, profile) = ctx.realize(pol)?;
        let stack = build_stack(&design, &profile).map_err(classify)?;
        let spectrum = reflection_spectrum(&stack, lo, hi, samples).map_err(classify)?;
        let mut csv = Vec::new();
        write_spectrum_csv(&spectrum, &mut csv).map_err(classify)?;
        outputs.push(ctx.write(&format!("spectrum_{pol}.csv"), &csv)?);

        // hunt the dip inside the stopband core only; band-edge ripple
        // minima outside it are deeper than shallow cavity dips
        let center = design.bragg_wavelength_nm();
        let core = 0.5 * profile.stopband_half_width_nm(&design);
        let dip_window = (lo.max(center - core), hi.min(center + core));
        let fit_result = if dip_window.0 < dip_window.1 {
            nanocavity::find_dip(&spectrum, dip_window)
                .and_then(|guess| nanocavity::fit_lorentzian(&spectrum, &guess))
        } else {
            Err(Error::NoDipFound { lo, hi })
        };
        match fit_result {
            Ok(fit) => {
                let report = fit_report_json(&fit, None);
                outputs.push(ctx.write(
                    &format!("fit_report_{pol}.json"),
                    (serde_json::to_string_pretty(&report).unwrap() + "\n").as_bytes(),
                )?);
            }
            Err(e) => {
                fit_failure = Some(classify(e));
            }
        }
    }
    ctx.finish(
        "spectrum",
        json!({"window_nm": [round_sig(lo), round_sig(hi)], "samples": samples}),
        outputs,
    )?;
    match fit_failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn cmd_emit(ctx: &Ctx, window: &str, samples: usize, oracle: bool) -> Result<(), Failure> {
    let (lo, hi) = parse_window(window)?;
    let mut outputs = Vec::new();
    for &pol in &ctx.profiles {
        let (design, profile) = ctx.realize(pol)?;
        let stack = build_stack(&design, &profile).map_err(classify)?;
        let rows = emission_spectrum(&stack, lo, hi, samples).map_err(classify)?;
        for (lambda, e) in &rows {
            if (e.eta_left + e.eta_right + e.eta_loss - 1.0).abs() > 1e-9 {
                return Err(Failure::Internal(format!(
                    "emission bookkeeping violated at {lambda} nm"
                )));
            }
        }
        let mut csv = Vec::new();
        write_emission_csv(&rows, &mut csv).map_err(classify)?;
        outputs.push(ctx.write(&format!("emission_{pol}.csv"), &csv)?);

        if oracle {
            // representative wavelengths: window ends, center, and the peak
            let peak = rows
                .iter()
                .max_by(|a, b| a.1.purcell.total_cmp(&b.1.purcell))
                .map(|&(l, _)| l)
                .unwrap_or((lo + hi) / 2.0);
            let mut checks = Vec::new();
            for lambda in [lo + 0.02 * (hi - lo), 0.5 * (lo + hi), peak, hi - 0.02 * (hi - lo)] {
                let closed = emit(&stack, lambda).map_err(classify)?;
                let fd = helmholtz_oracle(&stack, lambda).map_err(classify)?;
                let d_purcell = (closed.purcell - fd.purcell).abs() / fd.purcell.abs().max(1e-300);
                let d_eta = (closed.eta_left - fd.eta_left).abs();
                checks.push(json!({
                    "wavelength_nm": round_sig(lambda),
                    "closed_form": {"purcell": round_sig(closed.purcell), "eta_left": round_sig(closed.eta_left)},
                    "oracle": {"purcell": round_sig(fd.purcell), "eta_left": round_sig(fd.eta_left)},
                    "diff_purcell_rel": round_sig(d_purcell),
                    "diff_eta_abs": round_sig(d_eta),
                }));
                if d_purcell > 1e-3 || d_eta > 1e-3 {
                    return Err(Failure::Numerical(format!(
                        "closed form and oracle disagree at {lambda} nm: \
                         purcell rel {d_purcell:.2e}, eta abs {d_eta:.2e}"
                    )));
                }
            }
            outputs.push(ctx.write(
                &format!("oracle_check_{pol}.json"),
                (serde_json::to_string_pretty(&Value::Array(checks)).unwrap() + "\n").as_bytes(),
            )?);
        }
    }
    ctx.finish(
        "emit",
        json!({"window_nm": [round_sig(lo), round_sig(hi)], "samples": samples, "oracle": oracle}),
        outputs,
    )
}

fn cmd_sweep(
    ctx: &Ctx,
    mode: SweepMode,
    range: Option<&str>,
    fixed: Option<usize>,
) -> Result<(), Failure> {
    let (mode_name, default_range, default_fixed) = match mode {
        SweepMode::Nin => ("nin", "60:220:10", 400),
        SweepMode::Nout => ("nout", "200:480:10", 200),
        SweepMode::Reflection => ("reflection", "100:400:20", 400),
    };
    let values = parse_steps(range.unwrap_or(default_range))?;
    let fixed = fixed.unwrap_or(default_fixed);
    let mut outputs = Vec::new();
    for &pol in &ctx.profiles {
        let (design, profile) = ctx.realize(pol)?;
        let table = match mode {
            SweepMode::Nin => sweep_n_in(&design, &profile, &values, fixed),
            SweepMode::Nout => sweep_n_out(&design, &profile, &values, fixed),
            SweepMode::Reflection => sweep_reflection(&design, &profile, &values, fixed),
        }
        .map_err(classify)?;
        let mut csv = Vec::new();
        write_sweep_csv(&table, &mut csv).map_err(classify)?;
        outputs.push(ctx.write(&format!("sweep_{mode_name}_{pol}.csv"), &csv)?);
        let sidecar = sweep_sidecar_json(&table);
        outputs.push(ctx.write(
            &format!("sweep_{mode_name}_{pol}.json"),
            (serde_json::to_string_pretty(&sidecar).unwrap() + "\n").as_bytes(),
        )?);
        if let Some(warning) = &table.provenance.warning {
            eprintln!("warning ({pol}): {warning}");
        }
    }
    ctx.finish(
        "sweep",
        json!({"mode": mode_name, "values": values, "fixed": fixed}),
        outputs,
    )
}

fn read_points_csv(path: &Path) -> Result<Vec<(f64, f64)>, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with(|c: char| c.is_alphabetic())) {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 2 {
            return Err(Failure::Config(format!(
                "{}:{}: expected kappa_ghz,r0",
                path.display(),
                i + 1
            )));
        }
        let k: f64 = cols[0].trim().parse().map_err(|_| {
            Failure::Config(format!("{}:{}: bad kappa '{}'", path.display(), i + 1, cols[0]))
        })?;
        let r: f64 = cols[1].trim().parse().map_err(|_| {
            Failure::Config(format!("{}:{}: bad r0 '{}'", path.display(), i + 1, cols[1]))
        })?;
        points.push((k * 1e9, r));
    }
    Ok(points)
}

fn cmd_metrics(
    ctx: &Ctx,
    points: Option<&Path>,
    gamma_ghz: f64,
    range: &str,
    n_out: usize,
) -> Result<(), Failure> {
    if !(gamma_ghz > 0.0) {
        return Err(Failure::Config("--gamma-ghz must be > 0".into()));
    }
    let mut outputs = Vec::new();

    if let Some(points_path) = points {
        let pts = read_points_csv(points_path)?;
        let fit = fit_kappa_sc(&pts).map_err(classify)?;
        let report = json!({
            "kappa_sc_ghz": round_sig(fit.kappa_sc_hz / 1e9),
            "sigma_ghz": round_sig(fit.sigma_hz / 1e9),
            "objective": round_sig(fit.objective),
            "n_over_side": fit.n_over_side,
            "n_under_side": fit.n_under_side,
            "poorly_constrained": fit.poorly_constrained,
        });
        outputs.push(ctx.write(
            "kappa_sc_fit.json",
            (serde_json::to_string_pretty(&report).unwrap() + "\n").as_bytes(),
        )?);
        return ctx.finish(
            "metrics",
            json!({"points": points_path.display().to_string(), "gamma_ghz": round_sig(gamma_ghz)}),
            outputs,
        );
    }

    let family = parse_steps(range)?;
    for &pol in &ctx.profiles {
        let (design, profile) = ctx.realize(pol)?;
        let table = sweep_reflection(&design, &profile, &family, n_out).map_err(classify)?;
        let kappa_sc_hz = table
            .provenance
            .kappa_sc_ghz
            .ok_or_else(|| Failure::Numerical("kappa_sc fit failed over the family".into()))?
            * 1e9;
        let (fit, emission) = design_point(&design, &profile).map_err(classify)?;
        let stack = build_stack(&design, &profile).map_err(classify)?;
        let l_eff_um = effective_length(&stack, fit.lambda0_nm).map_err(classify)? / 1000.0;
        let report = CqedReport::assemble(
            fit.lambda0_nm,
            fit.kappa_hz,
            kappa_sc_hz,
            l_eff_um,
            emission.purcell,
            emission.eta_left,
            gamma_ghz * 1e9,
        )
        .map_err(classify)?;
        outputs.push(ctx.write(
            &format!("cqed_report_{pol}.json"),
            (serde_json::to_string_pretty(&cqed_report_json(&report)).unwrap() + "\n").as_bytes(),
        )?);
        let regime = classify_regime(fit.kappa_hz, kappa_sc_hz, 0.05).regime;
        outputs.push(ctx.write(
            &format!("fit_report_{pol}.json"),
            (serde_json::to_string_pretty(&fit_report_json(&fit, Some(regime))).unwrap() + "\n")
                .as_bytes(),
        )?);
        let mut csv = Vec::new();
        write_sweep_csv(&table, &mut csv).map_err(classify)?;
        outputs.push(ctx.write(&format!("sweep_reflection_{pol}.csv"), &csv)?);
    }
    ctx.finish(
        "metrics",
        json!({"gamma_ghz": round_sig(gamma_ghz), "range": range, "n_out": n_out}),
        outputs,
    )
}

fn cmd_calibrate(ctx: &Ctx, target_ghz: f64) -> Result<(), Failure> {
    if !(target_ghz > 0.0) {
        return Err(Failure::Config("--target-ghz must be > 0".into()));
    }
    let mut outputs = Vec::new();
    for &pol in &ctx.profiles {
        let (design, _) = ctx.realize(pol)?;
        let cal = calibrate_slat_loss(&design, target_ghz * 1e9).map_err(classify)?;
        let report = json!({
            "im_n_slat": round_sig(cal.im_n_slat),
            "achieved_kappa_sc_ghz": round_sig(cal.achieved_kappa_sc_hz / 1e9),
            "target_kappa_sc_ghz": round_sig(cal.target_kappa_sc_hz / 1e9),
            "bisection_steps": cal.bisection_steps,
            "poorly_constrained": cal.fit.poorly_constrained,
        });
        outputs.push(ctx.write(
            &format!("calibration_{pol}.json"),
            (serde_json::to_string_pretty(&report).unwrap() + "\n").as_bytes(),
        )?);
        println!(
            "{pol}: Im(n_slat) = {} -> kappa_sc = {} GHz",
            fmt_sig(cal.im_n_slat),
            fmt_sig(cal.achieved_kappa_sc_hz / 1e9)
        );
    }
    ctx.finish("calibrate", json!({"target_ghz": round_sig(target_ghz)}), outputs)
}
