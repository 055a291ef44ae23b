//! Deterministic CSV/JSON serialization of simulation artifacts.
//!
//! Floats are written with 12 significant digits everywhere, so re-running
//! a command with identical inputs reproduces byte-identical files.

use std::io::Write;

use serde_json::{json, Map, Value};

use crate::analysis::{Regime, ResonanceFit};
use crate::cqed::CqedReport;
use crate::emission::EmissionResult;
use crate::error::Result;
use crate::sweep::SweepTable;
use crate::tmm::Spectrum;

/// Formats a float with 12 significant digits, trimming trailing zeros
/// (printf %.12g equivalent).
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let s = if (-4..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        }
    } else {
        let sci = format!("{x:.11e}");
        // trim zeros in the mantissa: "1.20000000000e-7" -> "1.2e-7"
        let (mantissa, exponent) = sci.split_once('e').unwrap();
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{mantissa}e{exponent}")
    };
    s
}

/// Rounds a float to 12 significant digits (for JSON serialization).
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap()
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(round_sig(x))
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

/// `wavelength_nm,R,T,re_r,im_r,re_t,im_t`, one row per sample.
pub fn write_spectrum_csv<W: Write>(spectrum: &Spectrum, mut out: W) -> Result<()> {
    writeln!(out, "wavelength_nm,R,T,re_r,im_r,re_t,im_t")?;
    for i in 0..spectrum.len() {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_sig(spectrum.wavelengths_nm[i]),
            fmt_sig(spectrum.reflectance[i]),
            fmt_sig(spectrum.transmittance[i]),
            fmt_sig(spectrum.r[i].re),
            fmt_sig(spectrum.r[i].im),
            fmt_sig(spectrum.t[i].re),
            fmt_sig(spectrum.t[i].im),
        )?;
    }
    Ok(())
}

/// `wavelength_nm,purcell,eta_left,eta_right,eta_loss`.
pub fn write_emission_csv<W: Write>(samples: &[(f64, EmissionResult)], mut out: W) -> Result<()> {
    writeln!(out, "wavelength_nm,purcell,eta_left,eta_right,eta_loss")?;
    for (lambda, e) in samples {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_sig(*lambda),
            fmt_sig(e.purcell),
            fmt_sig(e.eta_left),
            fmt_sig(e.eta_right),
            fmt_sig(e.eta_loss),
        )?;
    }
    Ok(())
}

/// `n_in,n_out,lambda0_nm,kappa_ghz,r0,eta,purcell,regime,status`.
pub fn write_sweep_csv<W: Write>(table: &SweepTable, mut out: W) -> Result<()> {
    writeln!(out, "n_in,n_out,lambda0_nm,kappa_ghz,r0,eta,purcell,regime,status")?;
    for row in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.n_in,
            row.n_out,
            opt(row.lambda0_nm),
            opt(row.kappa_ghz),
            opt(row.r0),
            opt(row.eta),
            opt(row.purcell),
            row.regime.map(|r| r.to_string()).unwrap_or_default(),
            row.status,
        )?;
    }
    Ok(())
}

/// Provenance sidecar of a sweep table.
pub fn sweep_sidecar_json(table: &SweepTable) -> Value {
    let p = &table.provenance;
    json!({
        "design_sha256": p.design_sha256,
        "polarization": p.polarization,
        "im_n_slat": num(p.im_n_slat),
        "swept_parameter": p.swept_parameter,
        "swept_values": p.swept_values,
        "fixed_parameter": p.fixed_parameter,
        "fixed_value": p.fixed_value,
        "kappa_sc_ghz": p.kappa_sc_ghz.map(num).unwrap_or(Value::Null),
        "critical_tolerance": p.critical_tolerance.map(num).unwrap_or(Value::Null),
        "warning": p.warning.clone().map(Value::String).unwrap_or(Value::Null),
        "rows": table.rows.len(),
    })
}

/// Fit report with the regime call, if one was made.
pub fn fit_report_json(fit: &ResonanceFit, regime: Option<Regime>) -> Value {
    let mut m = Map::new();
    m.insert("lambda0_nm".into(), num(fit.lambda0_nm));
    m.insert("delta_lambda_nm".into(), num(fit.delta_lambda_nm));
    m.insert("r0".into(), num(fit.r0));
    m.insert("baseline".into(), num(fit.baseline));
    m.insert("q".into(), num(fit.q));
    m.insert("kappa_ghz".into(), num(fit.kappa_hz / 1e9));
    m.insert("residual_rms".into(), num(fit.residual_rms));
    m.insert(
        "regime".into(),
        regime
            .map(|r| Value::String(r.to_string()))
            .unwrap_or(Value::Null),
    );
    Value::Object(m)
}

/// Cavity performance report with unit-suffixed field names.
pub fn cqed_report_json(report: &CqedReport) -> Value {
    json!({
        "lambda0_nm": num(report.lambda0_nm),
        "kappa_ghz": num(report.kappa_hz / 1e9),
        "kappa_in_ghz": num(report.kappa_in_hz / 1e9),
        "kappa_sc_ghz": num(report.kappa_sc_hz / 1e9),
        "q_sc": num(report.q_sc),
        "finesse_sc": num(report.finesse_sc),
        "one_pass_loss_pct": num(report.one_pass_loss * 100.0),
        "l_eff_um": num(report.l_eff_um),
        "purcell": num(report.purcell),
        "cooperativity": num(report.cooperativity),
        "g0_ghz": num(report.g0_hz / 1e9),
        "gamma_ghz": num(report.gamma_hz / 1e9),
        "eta": num(report.eta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_formatting() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(620.0), "620");
        assert_eq!(fmt_sig(1.5), "1.5");
        assert_eq!(fmt_sig(-0.04), "-0.04");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig(1.342e-4), "0.0001342");
        assert_eq!(fmt_sig(2.5e-7), "2.5e-7");
        assert_eq!(fmt_sig(1.23456789012345e14), "1.23456789012e14");
        assert_eq!(fmt_sig(9.87654321e17), "9.87654321e17");
    }

    #[test]
    fn round_sig_is_idempotent() {
        for x in [std::f64::consts::PI, 1.0 / 7.0, 6.2e-19, -123456.789] {
            let once = round_sig(x);
            assert_eq!(once, round_sig(once));
        }
    }

    #[test]
    fn twelve_digits_survive() {
        let x = 1.23456789012e3;
        assert_eq!(fmt_sig(x), "1234.56789012");
    }
}
