//! Resonance extraction: dip detection, Lorentzian fitting, linewidth
//! conversion, coupling-regime classification, and the scattering-rate
//! free-parameter fit over a design sweep.

use serde::Serialize;

use crate::constants::fwhm_nm_to_hz;
use crate::error::{Error, Result};
use crate::tmm::Spectrum;

/// Default relative band for calling a point critically coupled.
pub const DEFAULT_CRITICAL_TOLERANCE: f64 = 0.05;

/// Initial dip estimate handed to the Lorentzian fit.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DipGuess {
    pub lambda0_nm: f64,
    pub delta_lambda_nm: f64,
    pub r0: f64,
    pub baseline: f64,
}

/// Lorentzian dip parameters with derived quality factor and linewidth.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResonanceFit {
    /// Dip center (nm).
    pub lambda0_nm: f64,
    /// FWHM (nm).
    pub delta_lambda_nm: f64,
    /// On-resonance reflectivity.
    pub r0: f64,
    /// Stopband reflectivity level.
    pub baseline: f64,
    /// Q = lambda0 / delta_lambda.
    pub q: f64,
    /// Total cavity linewidth, ordinary frequency: kappa = c dl / l^2.
    pub kappa_hz: f64,
    /// RMS of the fit residuals.
    pub residual_rms: f64,
    /// 1-sigma estimates for (lambda0, delta_lambda, r0, baseline).
    pub uncertainty: [f64; 4],
}

impl ResonanceFit {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_lambda_nm > 0.0) {
            return Err(Error::InvalidInput("fitted width must be positive".into()));
        }
        if self.r0 < 0.0 || self.r0 > self.baseline || self.baseline > 1.0 + 1e-6 {
            return Err(Error::InvalidInput(format!(
                "fit violates 0 <= r0 <= baseline <= 1: r0 = {}, baseline = {}",
                self.r0, self.baseline
            )));
        }
        let q = self.lambda0_nm / self.delta_lambda_nm;
        if (q - self.q).abs() / q > 1e-12 {
            return Err(Error::InvalidInput("q inconsistent with lambda0/dl".into()));
        }
        Ok(())
    }
}

/// Coupling regime of a resonance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Over,
    Critical,
    Under,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::Over => write!(f, "over"),
            Regime::Critical => write!(f, "critical"),
            Regime::Under => write!(f, "under"),
        }
    }
}

/// Regime call together with the comparison it was made from.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CouplingRegime {
    pub regime: Regime,
    pub kappa_hz: f64,
    pub kappa_sc_hz: f64,
    pub tolerance: f64,
}

/// Compares kappa/2 against kappa_sc: critical when |kappa - 2 kappa_sc| <=
/// tolerance * kappa, over-coupled when kappa/2 > kappa_sc, under-coupled
/// otherwise. The comparison is invariant under joint rescaling.
pub fn classify_regime(kappa_hz: f64, kappa_sc_hz: f64, tolerance: f64) -> CouplingRegime {
    let regime = if (kappa_hz - 2.0 * kappa_sc_hz).abs() <= tolerance * kappa_hz {
        Regime::Critical
    } else if kappa_hz > 2.0 * kappa_sc_hz {
        Regime::Over
    } else {
        Regime::Under
    };
    CouplingRegime {
        regime,
        kappa_hz,
        kappa_sc_hz,
        tolerance,
    }
}

/// Locates the deepest significant local minimum of R in `window` and
/// estimates width and baseline. The baseline is the in-window median; a
/// dip must undercut it by three robust noise deviations.
pub fn find_dip(spectrum: &Spectrum, window: (f64, f64)) -> Result<DipGuess> {
    let (lo, hi) = window;
    let n = spectrum.len();
    if n < 3 {
        return Err(Error::InvalidInput("spectrum too short".into()));
    }
    let full = (
        spectrum.wavelengths_nm[0],
        spectrum.wavelengths_nm[n - 1],
    );
    if lo < full.0 - 1e-12 || hi > full.1 + 1e-12 || lo >= hi {
        return Err(Error::InvalidInput(format!(
            "window [{lo}, {hi}] outside spectrum range [{}, {}]",
            full.0, full.1
        )));
    }
    let idx: Vec<usize> = (0..n)
        .filter(|&i| spectrum.wavelengths_nm[i] >= lo && spectrum.wavelengths_nm[i] <= hi)
        .collect();
    if idx.len() < 3 {
        return Err(Error::InvalidInput("fewer than 3 samples in window".into()));
    }
    let r: Vec<f64> = idx.iter().map(|&i| spectrum.reflectance[i]).collect();
    let l: Vec<f64> = idx.iter().map(|&i| spectrum.wavelengths_nm[i]).collect();

    let mut sorted = r.clone();
    sorted.sort_by(f64::total_cmp);
    let baseline = sorted[sorted.len() / 2];
    let mut dev: Vec<f64> = r.iter().map(|v| (v - baseline).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let noise = 1.4826 * dev[dev.len() / 2];

    // deepest local minimum
    let mut best: Option<usize> = None;
    for i in 1..r.len() - 1 {
        if r[i] <= r[i - 1] && r[i] <= r[i + 1] {
            if best.map_or(true, |b| r[i] < r[b]) {
                best = Some(i);
            }
        }
    }
    let i0 = best.ok_or(Error::NoDipFound { lo, hi })?;
    if r[i0] >= baseline - 3.0 * noise.max(1e-12) {
        return Err(Error::NoDipFound { lo, hi });
    }

    let half = 0.5 * (baseline + r[i0]);
    let mut li = i0;
    while li > 0 && r[li] < half {
        li -= 1;
    }
    let mut ri = i0;
    while ri < r.len() - 1 && r[ri] < half {
        ri += 1;
    }
    let width = if ri > li && (r[li] >= half || li == 0) && (r[ri] >= half || ri == r.len() - 1) {
        (l[ri] - l[li]).max(f64::MIN_POSITIVE)
    } else {
        (hi - lo) / 2.0
    };
    Ok(DipGuess {
        lambda0_nm: l[i0],
        delta_lambda_nm: width,
        r0: r[i0],
        baseline,
    })
}

/// Lorentzian dip model:
/// `R(l) = B - (B - R0) (dl/2)^2 / ((l - l0)^2 + (dl/2)^2)`.
fn lorentzian(p: &[f64; 4], lambda: f64) -> f64 {
    let (l0, w, r0, b) = (p[0], p[1], p[2], p[3]);
    let u = w * w;
    let v = (lambda - l0).powi(2) + u;
    b - (b - r0) * u / v
}

fn lorentzian_jacobian(p: &[f64; 4], lambda: f64) -> [f64; 4] {
    let (l0, w, r0, b) = (p[0], p[1], p[2], p[3]);
    let dl = lambda - l0;
    let u = w * w;
    let v = dl * dl + u;
    let shape = u / v;
    [
        -(b - r0) * 2.0 * u * dl / (v * v),
        -(b - r0) * 2.0 * w * dl * dl / (v * v),
        shape,
        1.0 - shape,
    ]
}

/// Dense Gaussian elimination with partial pivoting for the 4x4 normal
/// equations.
fn solve4(a: &mut [[f64; 4]; 4], b: &mut [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let mut piv = col;
        for row in col + 1..4 {
            if a[row][col].abs() > a[piv][col].abs() {
                piv = row;
            }
        }
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let mut s = b[row];
        for k in row + 1..4 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

const MAX_FIT_ITERATIONS: usize = 200;
const STEP_TOLERANCE: f64 = 1e-10;

/// Levenberg-Marquardt on the four Lorentzian parameters.
fn lm_fit(
    lambdas: &[f64],
    values: &[f64],
    start: [f64; 4],
) -> Result<([f64; 4], f64, [f64; 4])> {
    let n = lambdas.len();
    let mut p = start;
    let mut mu = 1e-3;
    let ssr = |p: &[f64; 4]| -> f64 {
        lambdas
            .iter()
            .zip(values)
            .map(|(&l, &y)| (lorentzian(p, l) - y).powi(2))
            .sum()
    };
    let mut current = ssr(&p);
    let mut last_step = f64::INFINITY;
    for _ in 0..MAX_FIT_ITERATIONS {
        // assemble J^T J and J^T res
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        for (&l, &y) in lambdas.iter().zip(values) {
            let res = lorentzian(&p, l) - y;
            let j = lorentzian_jacobian(&p, l);
            for a in 0..4 {
                jtr[a] += j[a] * res;
                for b in 0..4 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let mut improved = false;
        for _ in 0..25 {
            let mut a = jtj;
            for d in 0..4 {
                a[d][d] += mu * jtj[d][d].max(1e-300);
            }
            let mut rhs = [-jtr[0], -jtr[1], -jtr[2], -jtr[3]];
            let Some(step) = solve4(&mut a, &mut rhs) else {
                mu *= 10.0;
                continue;
            };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2], p[3] + step[3]];
            if trial[1] <= 0.0 {
                mu *= 10.0;
                continue;
            }
            let trial_ssr = ssr(&trial);
            if trial_ssr <= current {
                let pn: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                let sn: f64 = step.iter().map(|v| v * v).sum::<f64>().sqrt();
                last_step = sn / pn.max(1e-300);
                p = trial;
                current = trial_ssr;
                mu = (mu * 0.3).max(1e-14);
                improved = true;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            // cannot improve further; treat a stalled tiny step as converged
            if last_step < STEP_TOLERANCE {
                break;
            }
            return Err(Error::FitDidNotConverge {
                iterations: MAX_FIT_ITERATIONS,
                last_step,
            });
        }
        if last_step < STEP_TOLERANCE {
            break;
        }
    }
    if last_step >= STEP_TOLERANCE && n > 4 {
        return Err(Error::FitDidNotConverge {
            iterations: MAX_FIT_ITERATIONS,
            last_step,
        });
    }

    // parameter uncertainties from the final curvature
    let dof = (n as f64 - 4.0).max(1.0);
    let sigma2 = current / dof;
    let mut jtj = [[0.0; 4]; 4];
    for &l in lambdas {
        let j = lorentzian_jacobian(&p, l);
        for a in 0..4 {
            for b in 0..4 {
                jtj[a][b] += j[a] * j[b];
            }
        }
    }
    let mut unc = [f64::NAN; 4];
    for d in 0..4 {
        // invert via solves of unit vectors; only the diagonal is needed
        let mut a = jtj;
        let mut e = [0.0; 4];
        e[d] = 1.0;
        if let Some(col) = solve4(&mut a, &mut e) {
            if col[d] > 0.0 {
                unc[d] = (col[d] * sigma2).sqrt();
            }
        }
    }
    Ok((p, (current / n as f64).sqrt(), unc))
}

/// Nonlinear least-squares Lorentzian fit of a reflection dip.
///
/// Fits over a window of +-5 widths around the center (clipped to the
/// sampled range), iterating the window once from the first fit. Converged
/// when the relative parameter step falls below 1e-10 within 200
/// iterations; a fitted width below twice the local grid step is reported
/// as grid-limited.
pub fn fit_lorentzian(spectrum: &Spectrum, guess: &DipGuess) -> Result<ResonanceFit> {
    if !(guess.delta_lambda_nm > 0.0) || !(guess.lambda0_nm > 0.0) {
        return Err(Error::InvalidInput("invalid dip guess".into()));
    }
    let mut center = guess.lambda0_nm;
    let mut width = guess.delta_lambda_nm;
    let mut p = [guess.lambda0_nm, guess.delta_lambda_nm / 2.0, guess.r0, guess.baseline];
    let mut fit = None;
    for pass in 0..2 {
        let lo = center - 5.0 * width;
        let hi = center + 5.0 * width;
        let mut lambdas = Vec::new();
        let mut values = Vec::new();
        for i in 0..spectrum.len() {
            let l = spectrum.wavelengths_nm[i];
            if l >= lo && l <= hi {
                lambdas.push(l);
                values.push(spectrum.reflectance[i]);
            }
        }
        if lambdas.len() < 5 {
            if pass > 0 {
                // refit window narrower than the sampling; keep the first fit
                break;
            }
            return Err(Error::InvalidInput(format!(
                "only {} samples in fit window [{lo:.4}, {hi:.4}]",
                lambdas.len()
            )));
        }
        let (pf, rms, unc) = lm_fit(&lambdas, &values, p)?;
        center = pf[0];
        width = 2.0 * pf[1];
        p = pf;
        fit = Some((pf, rms, unc));
    }
    let (pf, rms, unc) = fit.unwrap();
    let lambda0 = pf[0];
    let delta_lambda = 2.0 * pf[1];
    let grid_step = spectrum.local_step_nm(lambda0);
    if delta_lambda < 2.0 * grid_step {
        return Err(Error::GridLimited {
            delta_lambda_nm: delta_lambda,
            grid_step_nm: grid_step,
        });
    }
    let r0 = pf[2].max(0.0);
    Ok(ResonanceFit {
        lambda0_nm: lambda0,
        delta_lambda_nm: delta_lambda,
        r0,
        baseline: pf[3],
        q: lambda0 / delta_lambda,
        kappa_hz: fwhm_nm_to_hz(delta_lambda, lambda0),
        residual_rms: rms,
        uncertainty: [unc[0], 2.0 * unc[1], unc[2], unc[3]],
    })
}

/// Result of the scattering-rate free-parameter fit.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KappaScFit {
    pub kappa_sc_hz: f64,
    /// Sum of squared residuals at the optimum.
    pub objective: f64,
    /// Points with kappa above / below the fitted critical value.
    pub n_over_side: usize,
    pub n_under_side: usize,
    /// All points on one side of critical coupling: the fit is weakly
    /// constrained and `sigma_hz` is wide.
    pub poorly_constrained: bool,
    /// 1-sigma curvature estimate of the fitted rate.
    pub sigma_hz: f64,
}

/// Fits `R0(kappa) = (1 - 2 kappa_sc / kappa)^2` to the measured
/// `(kappa, R0)` points with the scattering rate as the only free
/// parameter, by bracketed scalar minimization to 1e-12 relative.
pub fn fit_kappa_sc(points: &[(f64, f64)]) -> Result<KappaScFit> {
    if points.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(k, _)| !(k > 0.0)) {
        return Err(Error::InvalidInput("kappa values must be positive".into()));
    }
    let kappa_max = points.iter().map(|&(k, _)| k).fold(0.0, f64::max);
    let objective = |ksc: f64| -> f64 {
        points
            .iter()
            .map(|&(k, r0)| {
                let model = (1.0 - 2.0 * ksc / k).powi(2);
                (r0 - model).powi(2)
            })
            .sum()
    };
    // coarse scan, then golden-section refinement
    let hi = kappa_max / 2.0;
    let lo = hi * 1e-9;
    const COARSE: usize = 4096;
    let mut best = (lo, objective(lo));
    for i in 0..=COARSE {
        let k = lo + (hi - lo) * i as f64 / COARSE as f64;
        let f = objective(k);
        if f < best.1 {
            best = (k, f);
        }
    }
    let span = (hi - lo) / COARSE as f64;
    let mut a = (best.0 - span).max(lo);
    let mut b = (best.0 + span).min(hi);
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = objective(x1);
    let mut f2 = objective(x2);
    while (b - a) > 1e-12 * b.abs().max(1e-300) {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = objective(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = objective(x2);
        }
    }
    let ksc = 0.5 * (a + b);
    let fmin = objective(ksc);

    let n_over_side = points.iter().filter(|&&(k, _)| k > 2.0 * ksc).count();
    let n_under_side = points.iter().filter(|&&(k, _)| k < 2.0 * ksc).count();
    let poorly_constrained = n_over_side == 0 || n_under_side == 0;

    // curvature-based uncertainty: F''(ksc) from central differences
    let h = ksc * 1e-4;
    let f2d = (objective(ksc + h) - 2.0 * fmin + objective(ksc - h)) / (h * h);
    let dof = (points.len() as f64 - 1.0).max(1.0);
    let sigma_res2 = fmin / dof;
    let sigma_hz = if f2d > 0.0 {
        (2.0 * sigma_res2 / f2d).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(KappaScFit {
        kappa_sc_hz: ksc,
        objective: fmin,
        n_over_side,
        n_under_side,
        poorly_constrained,
        sigma_hz,
    })
}
