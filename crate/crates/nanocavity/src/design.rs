//! Cavity geometry and its reduction to a 1D effective-index layer stack.
//!
//! The composite cavity is a nanocapillary fiber with a thin-slat grating
//! pressed against it: `n_in` slat periods, a defect spacer of width
//! `1.5 * grating_period`, then `n_out` slat periods. The 3D structure is
//! reduced to alternating homogeneous segments of two complex effective
//! indices, one for bare-fiber segments and one for slat-covered segments.
//!
//! The index pair per polarization is calibrated so that the mean index
//! `nbar = alpha * Re(n_slat) + (1 - alpha) * Re(n_base)` satisfies the
//! Bragg condition `2 * nbar * grating_period = lambda_target` for the
//! reference period of 244 nm. The split between base and slat index (the
//! modulation depth) is a model constant chosen to place the critical
//! coupling crossover and the cavity effective length; see
//! [`EffectiveIndexProfile`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reference grating period (nm) for which the index calibration holds.
pub const REFERENCE_PERIOD_NM: f64 = 244.0;

/// Bragg target wavelength (nm) per polarization profile.
pub const LAMBDA_TARGET_YPOL_NM: f64 = 620.0;
pub const LAMBDA_TARGET_XPOL_NM: f64 = 619.0;

/// Index modulation depth `Re(n_slat) - Re(n_base)` per polarization.
///
/// The y-polarized mode sees the stronger modulation. The values fix the
/// mirror strength per period and with it the effective cavity length
/// (~12 um) and the input-mirror count at which critical coupling occurs
/// (~250-300 slats at the default scattering loss).
pub const DELTA_N_YPOL: f64 = 0.028;
pub const DELTA_N_XPOL: f64 = 0.022;

/// Default scattering loss surrogate, `Im(n_slat)`, y-polarization.
///
/// Calibrated by [`crate::cqed::calibrate_slat_loss`] so the fitted
/// scattering rate over the reference input-mirror sweep is 25 GHz
/// (achieved 24.6 GHz, within the 2% calibration band); recorded here as a
/// regression fixture.
pub const IM_N_SLAT_YPOL: f64 = 1.407e-4;

/// Default slat loss for the x-polarization profile.
///
/// The grating scatters the x-polarized mode more weakly; no quantitative
/// anchor exists, so the default keeps the x cavity in the same
/// phenomenological range with a lower scattering rate (~23 GHz).
pub const IM_N_SLAT_XPOL: f64 = 1.1e-4;

/// Polarization selecting one of the two effective-index profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    YPol,
    XPol,
}

impl Polarization {
    pub fn lambda_target_nm(self) -> f64 {
        match self {
            Polarization::YPol => LAMBDA_TARGET_YPOL_NM,
            Polarization::XPol => LAMBDA_TARGET_XPOL_NM,
        }
    }

    pub fn delta_n(self) -> f64 {
        match self {
            Polarization::YPol => DELTA_N_YPOL,
            Polarization::XPol => DELTA_N_XPOL,
        }
    }

    pub fn default_slat_loss(self) -> f64 {
        match self {
            Polarization::YPol => IM_N_SLAT_YPOL,
            Polarization::XPol => IM_N_SLAT_XPOL,
        }
    }
}

impl std::fmt::Display for Polarization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Polarization::YPol => write!(f, "ypol"),
            Polarization::XPol => write!(f, "xpol"),
        }
    }
}

/// Full geometric/material parameter record of the composite cavity.
///
/// Lengths in nm except `slat_height` (um). The slat height, capillary
/// diameters and the silica/water indices are carried as metadata for a
/// future mode-solver plug-in; the 1D reduction does not consume them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityDesign {
    /// Grating period (nm).
    pub grating_period: f64,
    /// Slat duty cycle, fraction of the period covered by a slat.
    pub duty_cycle: f64,
    /// Slat thickness (nm); must equal `duty_cycle * grating_period`.
    pub slat_thickness: f64,
    /// Slat height (um); metadata, unused by the 1D model.
    pub slat_height: f64,
    /// Defect spacer width (nm); must equal `1.5 * grating_period`.
    pub defect_width: f64,
    /// Slat count of the input (collection-side) mirror.
    pub n_slats_input: usize,
    /// Slat count of the output mirror.
    pub n_slats_output: usize,
    /// Capillary inner diameter (nm); metadata.
    pub ncf_inner_diameter: f64,
    /// Capillary outer diameter (nm); metadata.
    pub ncf_outer_diameter: f64,
    /// Silica refractive index; metadata.
    pub n_silica: f64,
    /// Water refractive index; metadata.
    pub n_water: f64,
    /// Which effective-index profile the design addresses.
    pub polarization_profile: Polarization,
}

impl Default for CavityDesign {
    /// The optimum one-sided design: 244 nm period, 15% duty cycle,
    /// 150 input and 400 output slats, y-polarization.
    fn default() -> Self {
        let period = REFERENCE_PERIOD_NM;
        let alpha = 0.15;
        CavityDesign {
            grating_period: period,
            duty_cycle: alpha,
            slat_thickness: alpha * period,
            slat_height: 2.0,
            defect_width: 1.5 * period,
            n_slats_input: 150,
            n_slats_output: 400,
            ncf_inner_diameter: 125.0,
            ncf_outer_diameter: 515.0,
            n_silica: 1.45,
            n_water: 1.33,
            polarization_profile: Polarization::YPol,
        }
    }
}

impl CavityDesign {
    /// Same design with different mirror slat counts.
    pub fn with_mirrors(&self, n_in: usize, n_out: usize) -> Self {
        CavityDesign {
            n_slats_input: n_in,
            n_slats_output: n_out,
            ..self.clone()
        }
    }

    /// Same design addressing the other polarization profile.
    pub fn with_polarization(&self, pol: Polarization) -> Self {
        CavityDesign {
            polarization_profile: pol,
            ..self.clone()
        }
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<()> {
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
        for (name, v) in [
            ("grating_period", self.grating_period),
            ("slat_thickness", self.slat_thickness),
            ("slat_height", self.slat_height),
            ("defect_width", self.defect_width),
            ("ncf_inner_diameter", self.ncf_inner_diameter),
            ("ncf_outer_diameter", self.ncf_outer_diameter),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidDesign(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        if !(self.duty_cycle > 0.0 && self.duty_cycle < 1.0) {
            return Err(Error::InvalidDesign(format!(
                "duty_cycle must lie in (0, 1), got {}",
                self.duty_cycle
            )));
        }
        if rel(self.slat_thickness, self.duty_cycle * self.grating_period) > 1e-9 {
            return Err(Error::InvalidDesign(format!(
                "slat_thickness {} inconsistent with duty_cycle * grating_period = {}",
                self.slat_thickness,
                self.duty_cycle * self.grating_period
            )));
        }
        if rel(self.defect_width, 1.5 * self.grating_period) > 1e-9 {
            return Err(Error::InvalidDesign(format!(
                "defect_width {} inconsistent with 1.5 * grating_period = {}",
                self.defect_width,
                1.5 * self.grating_period
            )));
        }
        Ok(())
    }

    /// Bragg wavelength (nm) of this design under its calibrated profile:
    /// `2 * nbar * grating_period`.
    pub fn bragg_wavelength_nm(&self) -> f64 {
        let nbar = self.polarization_profile.lambda_target_nm() / (2.0 * REFERENCE_PERIOD_NM);
        2.0 * nbar * self.grating_period
    }
}

/// Effective indices of the 1D surrogate for one polarization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveIndexProfile {
    /// Index of unperturbed fiber segments.
    pub n_base: Complex64,
    /// Index of slat-covered segments; `Re(n_slat) > Re(n_base)`.
    pub n_slat: Complex64,
    /// Semi-infinite medium on the input (collection) side.
    pub n_exterior_left: f64,
    /// Semi-infinite medium on the output side.
    pub n_exterior_right: f64,
}

impl EffectiveIndexProfile {
    /// Checks the profile invariants.
    pub fn validate(&self) -> Result<()> {
        if self.n_slat.re <= self.n_base.re {
            return Err(Error::InvalidDesign(format!(
                "slats must raise the effective index: Re(n_slat) = {} <= Re(n_base) = {}",
                self.n_slat.re, self.n_base.re
            )));
        }
        if self.n_base.im < 0.0 || self.n_slat.im < 0.0 {
            return Err(Error::InvalidDesign(
                "Im(n) must be >= 0 (loss, never gain)".into(),
            ));
        }
        if self.n_base.re < 1.0 || self.n_exterior_left < 1.0 || self.n_exterior_right < 1.0 {
            return Err(Error::InvalidDesign(
                "refractive indices below 1 are not supported".into(),
            ));
        }
        Ok(())
    }

    /// Mean effective index `alpha * Re(n_slat) + (1 - alpha) * Re(n_base)`
    /// for a given duty cycle.
    pub fn mean_index(&self, duty_cycle: f64) -> f64 {
        duty_cycle * self.n_slat.re + (1.0 - duty_cycle) * self.n_base.re
    }

    /// Same profile with all loss removed.
    pub fn lossless(&self) -> Self {
        EffectiveIndexProfile {
            n_base: Complex64::new(self.n_base.re, 0.0),
            n_slat: Complex64::new(self.n_slat.re, 0.0),
            ..*self
        }
    }

    /// Same profile with a specific slat loss `Im(n_slat)`.
    pub fn with_slat_loss(&self, im_n_slat: f64) -> Self {
        EffectiveIndexProfile {
            n_slat: Complex64::new(self.n_slat.re, im_n_slat),
            ..*self
        }
    }

    /// Coupled-mode estimate of the stopband half-width (nm) around the
    /// Bragg wavelength, for grids and search windows.
    ///
    /// The square-wave modulation has first Fourier amplitude
    /// `2 * dn / pi * sin(pi * alpha)`; the half-width is
    /// `lambda_b * dn1 / nbar`.
    pub fn stopband_half_width_nm(&self, design: &CavityDesign) -> f64 {
        let dn = self.n_slat.re - self.n_base.re;
        let dn1 = 2.0 * dn / std::f64::consts::PI * (std::f64::consts::PI * design.duty_cycle).sin();
        let nbar = self.mean_index(design.duty_cycle);
        design.bragg_wavelength_nm() * dn1 / nbar
    }
}

/// Derives the calibrated effective-index profile for a design.
///
/// The mean index is forced by the Bragg condition
/// `nbar = lambda_target / (2 * 244 nm)` and split with the per-polarization
/// modulation depth: `Re(n_base) = nbar - alpha * dn`,
/// `Re(n_slat) = Re(n_base) + dn`. The slat carries the calibrated
/// scattering loss in its imaginary part; base segments and exteriors are
/// lossless, and the exteriors are the unperturbed fiber itself.
pub fn effective_indices(design: &CavityDesign) -> Result<EffectiveIndexProfile> {
    design.validate()?;
    if design.n_silica < 1.0 || design.n_water < 1.0 {
        return Err(Error::InvalidDesign(format!(
            "media indices must be >= 1, got n_silica = {}, n_water = {}",
            design.n_silica, design.n_water
        )));
    }
    let pol = design.polarization_profile;
    let nbar = pol.lambda_target_nm() / (2.0 * REFERENCE_PERIOD_NM);
    let dn = pol.delta_n();
    let n_base = nbar - design.duty_cycle * dn;
    let n_slat = n_base + dn;
    let profile = EffectiveIndexProfile {
        n_base: Complex64::new(n_base, 0.0),
        n_slat: Complex64::new(n_slat, pol.default_slat_loss()),
        n_exterior_left: n_base,
        n_exterior_right: n_base,
    };
    profile.validate()?;
    Ok(profile)
}

/// One homogeneous segment of the stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// Thickness (nm).
    pub thickness_nm: f64,
    /// Complex refractive index.
    pub index: Complex64,
}

/// Ordered homogeneous layers with a marked source plane.
///
/// The left exterior faces the input (collection) side.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    pub layers: Vec<Layer>,
    /// Dipole position, nm from the left edge of the first layer.
    pub source_plane_nm: f64,
    /// Real indices of the semi-infinite exterior media (left, right).
    pub exterior: (f64, f64),
}

impl LayerStack {
    /// Total physical length (nm).
    pub fn total_length_nm(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness_nm).sum()
    }

    /// Index of the layer containing the source plane, with the offset of
    /// the source inside that layer (nm).
    pub fn source_layer(&self) -> Option<(usize, f64)> {
        let mut z = 0.0;
        for (i, layer) in self.layers.iter().enumerate() {
            let next = z + layer.thickness_nm;
            if self.source_plane_nm <= next || i == self.layers.len() - 1 {
                return Some((i, self.source_plane_nm - z));
            }
            z = next;
        }
        None
    }

    /// True if every layer index has zero imaginary part.
    pub fn is_lossless(&self) -> bool {
        self.layers.iter().all(|l| l.index.im == 0.0)
    }
}

/// Builds the layer stack for a design under a given profile.
///
/// Each mirror starts with a slat adjacent to the defect: the input mirror
/// is `n_in` periods of (base, slat) walking left-to-right, the output
/// mirror is the mirrored sequence (slat, base). The source plane sits at
/// the defect center. A stack built with `n_in == n_out` is therefore
/// mirror-symmetric about the source plane.
pub fn build_stack(design: &CavityDesign, profile: &EffectiveIndexProfile) -> Result<LayerStack> {
    design.validate()?;
    profile.validate()?;
    let t = design.slat_thickness;
    let gap = design.grating_period - t;
    let n_layers = 2 * (design.n_slats_input + design.n_slats_output) + 1;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..design.n_slats_input {
        layers.push(Layer {
            thickness_nm: gap,
            index: profile.n_base,
        });
        layers.push(Layer {
            thickness_nm: t,
            index: profile.n_slat,
        });
    }
    layers.push(Layer {
        thickness_nm: design.defect_width,
        index: profile.n_base,
    });
    for _ in 0..design.n_slats_output {
        layers.push(Layer {
            thickness_nm: t,
            index: profile.n_slat,
        });
        layers.push(Layer {
            thickness_nm: gap,
            index: profile.n_base,
        });
    }
    let source_plane_nm =
        design.n_slats_input as f64 * design.grating_period + design.defect_width / 2.0;
    Ok(LayerStack {
        layers,
        source_plane_nm,
        exterior: (profile.n_exterior_left, profile.n_exterior_right),
    })
}

/// Rescales the design so its Bragg wavelength shifts by `delta_lambda_nm`.
///
/// The period and its dependent lengths scale by
/// `(lambda_target + delta) / lambda_target`; tuning range is +-10 nm.
pub fn detune_design(design: &CavityDesign, delta_lambda_nm: f64) -> Result<CavityDesign> {
    design.validate()?;
    if delta_lambda_nm.abs() > 10.0 {
        return Err(Error::InvalidInput(format!(
            "detuning {delta_lambda_nm} nm outside the +-10 nm tuning range"
        )));
    }
    let lambda0 = design.polarization_profile.lambda_target_nm();
    let scale = (lambda0 + delta_lambda_nm) / lambda0;
    Ok(CavityDesign {
        grating_period: design.grating_period * scale,
        slat_thickness: design.slat_thickness * scale,
        defect_width: design.defect_width * scale,
        ..design.clone()
    })
}

/// Parses a design from its JSON file representation; unknown keys are
/// rejected and the structural invariants are checked.
pub fn design_from_json(text: &str) -> Result<CavityDesign> {
    let design: CavityDesign =
        serde_json::from_str(text).map_err(|e| Error::InvalidDesign(e.to_string()))?;
    design.validate()?;
    Ok(design)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_design_is_valid() {
        CavityDesign::default().validate().unwrap();
    }

    #[test]
    fn bragg_condition_pins_mean_index() {
        // nbar = 620 / (2 * 244) for the default y-pol design.
        let design = CavityDesign::default();
        let profile = effective_indices(&design).unwrap();
        let nbar = profile.mean_index(design.duty_cycle);
        let expected = 620.0 / (2.0 * 244.0);
        assert!(
            (nbar - expected).abs() / expected < 1e-12,
            "nbar = {nbar}, expected {expected}"
        );
        assert!((expected - 1.27049).abs() < 1e-5);
    }

    #[test]
    fn xpol_mean_index() {
        let design = CavityDesign::default().with_polarization(Polarization::XPol);
        let profile = effective_indices(&design).unwrap();
        let nbar = profile.mean_index(design.duty_cycle);
        let expected = 619.0 / (2.0 * 244.0);
        assert!((nbar - expected).abs() / expected < 1e-12);
        assert!((expected - 1.26844).abs() < 1e-5);
    }

    #[test]
    fn ypol_sees_larger_modulation_than_xpol() {
        let y = effective_indices(&CavityDesign::default()).unwrap();
        let x = effective_indices(&CavityDesign::default().with_polarization(Polarization::XPol))
            .unwrap();
        let dn_y = y.n_slat.re - y.n_base.re;
        let dn_x = x.n_slat.re - x.n_base.re;
        assert!(dn_y > dn_x);
    }

    #[test]
    fn zero_duty_cycle_limit_recovers_base_index() {
        // alpha -> 0: the mean index degenerates to Re(n_base).
        let mut design = CavityDesign::default();
        design.duty_cycle = 1e-12;
        design.slat_thickness = design.duty_cycle * design.grating_period;
        let profile = effective_indices(&design).unwrap();
        let nbar = profile.mean_index(design.duty_cycle);
        assert!((nbar - profile.n_base.re).abs() < 1e-10);
    }

    #[test]
    fn media_indices_below_one_rejected() {
        let mut design = CavityDesign::default();
        design.n_water = 0.9;
        assert!(matches!(
            effective_indices(&design),
            Err(Error::InvalidDesign(_))
        ));
    }

    #[test]
    fn stack_layer_count_and_length() {
        // n_in = 150, n_out = 400: 1101 layers, 550 * 244 + 366 = 134566 nm.
        let design = CavityDesign::default();
        let profile = effective_indices(&design).unwrap();
        let stack = build_stack(&design, &profile).unwrap();
        assert_eq!(stack.layers.len(), 1101);
        assert!((stack.total_length_nm() - 134_566.0).abs() < 1e-6);
        assert!((stack.source_plane_nm - (150.0 * 244.0 + 183.0)).abs() < 1e-9);
    }

    #[test]
    fn bare_defect_is_a_single_layer() {
        let design = CavityDesign::default().with_mirrors(0, 0);
        let profile = effective_indices(&design).unwrap();
        let stack = build_stack(&design, &profile).unwrap();
        assert_eq!(stack.layers.len(), 1);
        assert!((stack.layers[0].thickness_nm - design.defect_width).abs() < 1e-12);
        assert_eq!(stack.layers[0].index, profile.n_base);
    }

    #[test]
    fn period_split_matches_duty_cycle() {
        // 15% of 244 nm: 36.6 nm slat, 207.4 nm base per period.
        let design = CavityDesign::default();
        let profile = effective_indices(&design).unwrap();
        let stack = build_stack(&design, &profile).unwrap();
        assert!((stack.layers[0].thickness_nm - 207.4).abs() < 1e-9);
        assert!((stack.layers[1].thickness_nm - 36.6).abs() < 1e-9);
        assert_eq!(stack.layers[1].index, profile.n_slat);
    }

    #[test]
    fn symmetric_stack_is_mirror_symmetric() {
        let design = CavityDesign::default().with_mirrors(25, 25);
        let profile = effective_indices(&design).unwrap();
        let stack = build_stack(&design, &profile).unwrap();
        let mut reversed = stack.layers.clone();
        reversed.reverse();
        assert_eq!(stack.layers, reversed);
        assert!((stack.source_plane_nm * 2.0 - stack.total_length_nm()).abs() < 1e-9);
    }

    #[test]
    fn build_stack_is_deterministic() {
        let design = CavityDesign::default();
        let profile = effective_indices(&design).unwrap();
        let a = build_stack(&design, &profile).unwrap();
        let b = build_stack(&design, &profile).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn detune_identity() {
        let design = CavityDesign::default();
        let same = detune_design(&design, 0.0).unwrap();
        assert_eq!(design, same);
    }

    #[test]
    fn detune_rescales_period() {
        // +10 nm: 244 * 630/620 = 247.935...; -10 nm: 240.064...
        let design = CavityDesign::default();
        let up = detune_design(&design, 10.0).unwrap();
        assert!((up.grating_period - 244.0 * 630.0 / 620.0).abs() < 1e-9);
        assert!((up.grating_period - 247.935).abs() < 1e-3);
        up.validate().unwrap();
        let down = detune_design(&design, -10.0).unwrap();
        assert!((down.grating_period - 244.0 * 610.0 / 620.0).abs() < 1e-9);
        assert!((down.grating_period - 240.065).abs() < 1e-3);
    }

    #[test]
    fn detune_out_of_range_rejected() {
        let design = CavityDesign::default();
        assert!(detune_design(&design, 10.5).is_err());
        assert!(detune_design(&design, -11.0).is_err());
    }

    #[test]
    fn design_json_round_trip_and_unknown_key_rejection() {
        let design = CavityDesign::default();
        let text = serde_json::to_string_pretty(&design).unwrap();
        let back = design_from_json(&text).unwrap();
        assert_eq!(design, back);

        let with_extra = text.replacen('{', "{\n  \"surprise\": 1,", 1);
        assert!(design_from_json(&with_extra).is_err());
    }

    #[test]
    fn invariant_violations_rejected() {
        let mut d = CavityDesign::default();
        d.slat_thickness = 40.0;
        assert!(d.validate().is_err());

        let mut d = CavityDesign::default();
        d.defect_width = 400.0;
        assert!(d.validate().is_err());

        let mut d = CavityDesign::default();
        d.duty_cycle = 1.2;
        assert!(d.validate().is_err());

        let mut d = CavityDesign::default();
        d.grating_period = -1.0;
        assert!(d.validate().is_err());
    }
}
