//! Complex 2x2 transfer-matrix engine for layered stacks.
//!
//! Conventions, fixed once: fields evolve as `exp(-i omega t)`, a
//! forward-travelling wave is `exp(+i k z)` with `k = 2 pi n / lambda`, and
//! passive loss means `Im(n) > 0`. The stack matrix `M` relates the
//! (forward, backward) amplitudes on the left exterior boundary to those on
//! the right exterior boundary, so for unit incidence from the left
//! `r = m21 / m11` and `t = 1 / m11`.

use num_complex::Complex64;
use serde::Serialize;

use crate::design::{Layer, LayerStack};
use crate::error::{Error, Result};
use crate::grid::{self, Seek};

/// 2x2 complex transfer matrix in the (forward, backward) amplitude basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub m11: Complex64,
    pub m12: Complex64,
    pub m21: Complex64,
    pub m22: Complex64,
}

impl TransferMatrix {
    pub fn identity() -> Self {
        TransferMatrix {
            m11: Complex64::new(1.0, 0.0),
            m12: Complex64::new(0.0, 0.0),
            m21: Complex64::new(0.0, 0.0),
            m22: Complex64::new(1.0, 0.0),
        }
    }

    /// Interface from medium `n1` into medium `n2` at normal incidence:
    /// `(1/t12) [[1, r12], [r12, 1]]` with `r12 = (n1-n2)/(n1+n2)`.
    pub fn interface(n1: Complex64, n2: Complex64) -> Self {
        let r = (n1 - n2) / (n1 + n2);
        let inv_t = (n1 + n2) / (2.0 * n1);
        TransferMatrix {
            m11: inv_t,
            m12: r * inv_t,
            m21: r * inv_t,
            m22: inv_t,
        }
    }

    /// Propagation through thickness `d` of index `n`:
    /// `diag(exp(-i phi), exp(+i phi))` with `phi = 2 pi n d / lambda`,
    /// relating left-edge amplitudes to right-edge amplitudes.
    pub fn propagation(n: Complex64, d_nm: f64, lambda_nm: f64) -> Self {
        let phi = Complex64::new(0.0, 2.0 * std::f64::consts::PI) * n * d_nm / lambda_nm;
        TransferMatrix {
            m11: (-phi).exp(),
            m12: Complex64::new(0.0, 0.0),
            m21: Complex64::new(0.0, 0.0),
            m22: phi.exp(),
        }
    }

    /// Matrix product `self * other` (self acts closer to the left exterior).
    pub fn compose(&self, other: &TransferMatrix) -> Self {
        TransferMatrix {
            m11: self.m11 * other.m11 + self.m12 * other.m21,
            m12: self.m11 * other.m12 + self.m12 * other.m22,
            m21: self.m21 * other.m11 + self.m22 * other.m21,
            m22: self.m21 * other.m12 + self.m22 * other.m22,
        }
    }

    pub fn det(&self) -> Complex64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }
}

/// Transfer matrix of a layer run between arbitrary media.
pub(crate) fn matrix_between(
    n_inc: Complex64,
    layers: &[Layer],
    n_exit: Complex64,
    lambda_nm: f64,
) -> TransferMatrix {
    let mut m = TransferMatrix::identity();
    let mut prev = n_inc;
    for layer in layers {
        m = m.compose(&TransferMatrix::interface(prev, layer.index));
        m = m.compose(&TransferMatrix::propagation(
            layer.index,
            layer.thickness_nm,
            lambda_nm,
        ));
        prev = layer.index;
    }
    m.compose(&TransferMatrix::interface(prev, n_exit))
}

/// Reflection/transmission amplitudes of a layer run between arbitrary
/// media, incidence from the `n_inc` side.
pub(crate) fn rt_between(
    n_inc: Complex64,
    layers: &[Layer],
    n_exit: Complex64,
    lambda_nm: f64,
) -> Result<(Complex64, Complex64)> {
    let m = matrix_between(n_inc, layers, n_exit, lambda_nm);
    if m.m11.norm() < 1e-300 {
        return Err(Error::NumericalFailure(format!(
            "|m11| = {:.3e} underflow at lambda = {lambda_nm} nm",
            m.m11.norm()
        )));
    }
    Ok((m.m21 / m.m11, 1.0 / m.m11))
}

/// Full-stack transfer matrix including both exterior interfaces.
pub fn stack_matrix(stack: &LayerStack, lambda_nm: f64) -> TransferMatrix {
    matrix_between(
        Complex64::new(stack.exterior.0, 0.0),
        &stack.layers,
        Complex64::new(stack.exterior.1, 0.0),
        lambda_nm,
    )
}

/// Amplitudes (r, t) for a unit wave incident from the left exterior.
pub fn rt_left_incidence(stack: &LayerStack, lambda_nm: f64) -> Result<(Complex64, Complex64)> {
    if !(lambda_nm > 0.0) {
        return Err(Error::InvalidInput(format!(
            "wavelength must be positive, got {lambda_nm}"
        )));
    }
    rt_between(
        Complex64::new(stack.exterior.0, 0.0),
        &stack.layers,
        Complex64::new(stack.exterior.1, 0.0),
        lambda_nm,
    )
}

/// Power reflectance and transmittance for left incidence;
/// `T = (n_right / n_left) |t|^2` for real exteriors.
pub fn power_rt(stack: &LayerStack, lambda_nm: f64) -> Result<(f64, f64)> {
    let (r, t) = rt_left_incidence(stack, lambda_nm)?;
    Ok((
        r.norm_sqr(),
        stack.exterior.1 / stack.exterior.0 * t.norm_sqr(),
    ))
}

/// Sampled reflection/transmission spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub wavelengths_nm: Vec<f64>,
    pub r: Vec<Complex64>,
    pub t: Vec<Complex64>,
    pub reflectance: Vec<f64>,
    pub transmittance: Vec<f64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.wavelengths_nm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavelengths_nm.is_empty()
    }

    /// Local grid step at the sample nearest `lambda_nm`.
    pub fn local_step_nm(&self, lambda_nm: f64) -> f64 {
        let n = self.len();
        if n < 2 {
            return f64::INFINITY;
        }
        let i = match self
            .wavelengths_nm
            .binary_search_by(|w| w.total_cmp(&lambda_nm))
        {
            Ok(i) => i,
            Err(i) => i.min(n - 1),
        };
        if i == 0 {
            self.wavelengths_nm[1] - self.wavelengths_nm[0]
        } else if i == n - 1 {
            self.wavelengths_nm[n - 1] - self.wavelengths_nm[n - 2]
        } else {
            (self.wavelengths_nm[i + 1] - self.wavelengths_nm[i - 1]) / 2.0
        }
    }
}

/// Reflection spectrum over `[lambda_min, lambda_max]` with `n_samples`
/// uniform points plus adaptive refinement near detected dips, so at least
/// 50 samples fall within one linewidth of any resonance.
pub fn reflection_spectrum(
    stack: &LayerStack,
    lambda_min_nm: f64,
    lambda_max_nm: f64,
    n_samples: usize,
) -> Result<Spectrum> {
    if !(lambda_min_nm > 0.0 && lambda_min_nm < lambda_max_nm) {
        return Err(Error::InvalidInput(format!(
            "bad wavelength window [{lambda_min_nm}, {lambda_max_nm}]"
        )));
    }
    if n_samples < 2 {
        return Err(Error::InvalidInput("n_samples must be >= 2".into()));
    }
    let n_left = Complex64::new(stack.exterior.0, 0.0);
    let n_right = Complex64::new(stack.exterior.1, 0.0);
    let eval = |lambda: f64| {
        let m = matrix_between(n_left, &stack.layers, n_right, lambda);
        let r = m.m21 / m.m11;
        let t = 1.0 / m.m11;
        (r, t)
    };
    let samples = grid::refine(
        lambda_min_nm,
        lambda_max_nm,
        n_samples,
        eval,
        |&(r, _): &(Complex64, Complex64)| r.norm_sqr(),
        Seek::Minima,
    );
    let ratio = stack.exterior.1 / stack.exterior.0;
    let mut spectrum = Spectrum {
        wavelengths_nm: Vec::with_capacity(samples.len()),
        r: Vec::with_capacity(samples.len()),
        t: Vec::with_capacity(samples.len()),
        reflectance: Vec::with_capacity(samples.len()),
        transmittance: Vec::with_capacity(samples.len()),
    };
    for (lambda, (r, t)) in samples {
        spectrum.wavelengths_nm.push(lambda);
        spectrum.r.push(r);
        spectrum.t.push(t);
        spectrum.reflectance.push(r.norm_sqr());
        spectrum.transmittance.push(ratio * t.norm_sqr());
    }
    Ok(spectrum)
}

/// Two-mirror decomposition of a stack about a source plane.
///
/// `r_left`/`t_left` describe the sub-stack left of the plane as seen from
/// inside the layer hosting the plane, with the propagation from the plane
/// to the first interface absorbed into the coefficients (reference-plane
/// shift); likewise on the right. `phase_left`/`phase_right` are the
/// one-way propagation phases (radians, real part) from the plane to each
/// sub-stack boundary that were absorbed.
#[derive(Debug, Clone, Copy)]
pub struct MirrorCoefficients {
    pub r_left: Complex64,
    pub t_left: Complex64,
    pub r_right: Complex64,
    pub t_right: Complex64,
    pub phase_left: f64,
    pub phase_right: f64,
    /// Index of the layer hosting the source plane.
    pub host_index: Complex64,
}

/// Splits the stack at `source_plane_nm` and computes both mirror
/// coefficient sets at `lambda_nm`. The plane must lie strictly inside a
/// layer (the defect, for cavity stacks).
pub fn mirror_coefficients(
    stack: &LayerStack,
    source_plane_nm: f64,
    lambda_nm: f64,
) -> Result<MirrorCoefficients> {
    let mut z = 0.0;
    let mut host: Option<(usize, f64)> = None;
    for (i, layer) in stack.layers.iter().enumerate() {
        let next = z + layer.thickness_nm;
        if source_plane_nm > z && source_plane_nm < next {
            host = Some((i, source_plane_nm - z));
            break;
        }
        z = next;
    }
    let (host_idx, offset) = host.ok_or_else(|| {
        Error::InvalidInput(format!(
            "source plane {source_plane_nm} nm does not lie strictly inside a layer"
        ))
    })?;
    let n_c = stack.layers[host_idx].index;
    let d_left = offset;
    let d_right = stack.layers[host_idx].thickness_nm - offset;

    // Left sub-stack as seen from the source: partial host layer, then the
    // remaining layers in reverse order, exiting into the left exterior.
    let mut left_layers = Vec::with_capacity(host_idx + 1);
    left_layers.push(Layer {
        thickness_nm: d_left,
        index: n_c,
    });
    for layer in stack.layers[..host_idx].iter().rev() {
        left_layers.push(*layer);
    }
    let (r_left, t_left) = rt_between(
        n_c,
        &left_layers,
        Complex64::new(stack.exterior.0, 0.0),
        lambda_nm,
    )?;

    let mut right_layers = Vec::with_capacity(stack.layers.len() - host_idx);
    right_layers.push(Layer {
        thickness_nm: d_right,
        index: n_c,
    });
    right_layers.extend_from_slice(&stack.layers[host_idx + 1..]);
    let (r_right, t_right) = rt_between(
        n_c,
        &right_layers,
        Complex64::new(stack.exterior.1, 0.0),
        lambda_nm,
    )?;

    let k = 2.0 * std::f64::consts::PI / lambda_nm;
    Ok(MirrorCoefficients {
        r_left,
        t_left,
        r_right,
        t_right,
        phase_left: k * n_c.re * d_left,
        phase_right: k * n_c.re * d_right,
        host_index: n_c,
    })
}

/// Side a plane wave is launched from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Normalized |E(z)|^2 for a unit wave incident from `side`, sampled at
/// >= 8 points per layer from the internal forward/backward amplitudes.
/// Positions are nm from the left stack edge; the maximum is scaled to 1.
pub fn intensity_profile(stack: &LayerStack, lambda_nm: f64, side: Side) -> Vec<(f64, f64)> {
    match side {
        Side::Left => {
            let r = rt_left_incidence(stack, lambda_nm)
                .map(|(r, _)| r)
                .unwrap_or_else(|_| Complex64::new(0.0, 0.0));
            let incident = (Complex64::new(1.0, 0.0), r);
            let n_inc = Complex64::new(stack.exterior.0, 0.0);
            let mut points = sample_intensity(&stack.layers, n_inc, incident, lambda_nm);
            let max = points.iter().map(|&(_, i)| i).fold(0.0_f64, f64::max);
            if max > 0.0 {
                for p in points.iter_mut() {
                    p.1 /= max;
                }
            }
            points
        }
        Side::Right => {
            let mut rev_layers: Vec<Layer> = stack.layers.iter().rev().copied().collect();
            let reversed = LayerStack {
                layers: std::mem::take(&mut rev_layers),
                source_plane_nm: stack.total_length_nm() - stack.source_plane_nm,
                exterior: (stack.exterior.1, stack.exterior.0),
            };
            let total = stack.total_length_nm();
            let mut profile = intensity_profile(&reversed, lambda_nm, Side::Left);
            for p in profile.iter_mut() {
                p.0 = total - p.0;
            }
            profile.reverse();
            profile
        }
    }
}

/// Walks amplitudes layer to layer from the left and samples raw |E|^2 at
/// nine points per layer.
pub(crate) fn sample_intensity(
    layers: &[Layer],
    n_inc: Complex64,
    (a0, b0): (Complex64, Complex64),
    lambda_nm: f64,
) -> Vec<(f64, f64)> {
    const PTS_PER_LAYER: usize = 9;
    let mut points = Vec::with_capacity(layers.len() * PTS_PER_LAYER);
    let mut a = a0;
    let mut b = b0;
    let mut prev = n_inc;
    let mut z0 = 0.0;
    for layer in layers {
        // cross the interface: invert (1/t)[[1, r],[r, 1]]
        let r = (prev - layer.index) / (prev + layer.index);
        let t = 2.0 * prev / (prev + layer.index);
        let det = 1.0 - r * r;
        let a2 = t * (a - r * b) / det;
        let b2 = t * (b - r * a) / det;
        let k = Complex64::new(0.0, 2.0 * std::f64::consts::PI) * layer.index / lambda_nm;
        for j in 0..PTS_PER_LAYER {
            let dz = layer.thickness_nm * j as f64 / (PTS_PER_LAYER - 1) as f64;
            let e = a2 * (k * dz).exp() + b2 * (-k * dz).exp();
            points.push((z0 + dz, e.norm_sqr()));
        }
        a = a2 * (k * layer.thickness_nm).exp();
        b = b2 * (-k * layer.thickness_nm).exp();
        prev = layer.index;
        z0 += layer.thickness_nm;
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{build_stack, effective_indices, CavityDesign};
    use approx::assert_relative_eq;

    fn bare(n_ext: f64) -> LayerStack {
        LayerStack {
            layers: vec![],
            source_plane_nm: 0.0,
            exterior: (n_ext, n_ext),
        }
    }

    #[test]
    fn empty_stack_is_identity() {
        let m = stack_matrix(&bare(1.0), 620.0);
        assert_relative_eq!(m.m11.re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(m.m21.norm(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(m.m12.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn fresnel_single_interface() {
        // 1.0 -> 1.5 step: r = -0.2, R = 0.04 at any wavelength.
        let stack = LayerStack {
            layers: vec![Layer {
                thickness_nm: 100.0,
                index: Complex64::new(1.5, 0.0),
            }],
            source_plane_nm: 50.0,
            exterior: (1.0, 1.5),
        };
        let (r, _) = rt_left_incidence(&stack, 733.0).unwrap();
        assert_relative_eq!(r.re, -0.2, epsilon = 1e-12);
        assert_relative_eq!(r.im, 0.0, epsilon = 1e-12);
        assert_relative_eq!(r.norm_sqr(), 0.04, epsilon = 1e-12);
    }

    #[test]
    fn half_wave_layer_is_invisible() {
        // n d = lambda / 2 between equal exteriors: r = 0.
        let lambda = 620.0;
        let n = 1.7;
        let stack = LayerStack {
            layers: vec![Layer {
                thickness_nm: lambda / (2.0 * n),
                index: Complex64::new(n, 0.0),
            }],
            source_plane_nm: 10.0,
            exterior: (1.0, 1.0),
        };
        let (r, t) = rt_left_incidence(&stack, lambda).unwrap();
        assert!(r.norm() < 1e-12, "|r| = {}", r.norm());
        assert_relative_eq!(t.norm_sqr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn determinant_equals_index_ratio() {
        let stack = LayerStack {
            layers: vec![
                Layer {
                    thickness_nm: 130.0,
                    index: Complex64::new(2.1, 0.0),
                },
                Layer {
                    thickness_nm: 87.0,
                    index: Complex64::new(1.4, 0.0),
                },
            ],
            source_plane_nm: 100.0,
            exterior: (1.0, 1.62),
        };
        let m = stack_matrix(&stack, 512.0);
        let expected = stack.exterior.1 / stack.exterior.0;
        assert_relative_eq!(m.det().re, expected, max_relative = 1e-10);
        assert!(m.det().im.abs() < 1e-10);
    }

    // Quarter-wave Bragg mirror oracle in the characteristic-matrix
    // (admittance) formalism, an independent route from the amplitude
    // matrices used by the engine.
    fn qws_admittance_reflectance(
        n_lo: f64,
        n_hi: f64,
        pairs: usize,
        n_l: f64,
        n_r: f64,
    ) -> f64 {
        // each quarter-wave layer: [[0, i/n], [i n, 0]]
        let i = Complex64::new(0.0, 1.0);
        let mut b = Complex64::new(1.0, 0.0);
        let mut c = Complex64::new(n_r, 0.0);
        for _ in 0..pairs {
            // substrate-side first: lo then hi walking toward the incidence side
            let (b2, c2) = (i / n_lo * c, i * n_lo * b);
            let (b3, c3) = (i / n_hi * c2, i * n_hi * b2);
            b = b3;
            c = c3;
        }
        let y = c / b;
        let r = (n_l - y) / (n_l + y);
        r.norm_sqr()
    }

    #[test]
    fn quarter_wave_mirror_matches_admittance_oracle() {
        let lambda = 620.0;
        let (n_hi, n_lo) = (2.3, 1.45);
        let (n_l, n_r) = (1.0, 1.52);
        for pairs in [1, 3, 8] {
            let mut layers = Vec::new();
            for _ in 0..pairs {
                layers.push(Layer {
                    thickness_nm: lambda / (4.0 * n_hi),
                    index: Complex64::new(n_hi, 0.0),
                });
                layers.push(Layer {
                    thickness_nm: lambda / (4.0 * n_lo),
                    index: Complex64::new(n_lo, 0.0),
                });
            }
            let stack = LayerStack {
                layers,
                source_plane_nm: 1.0,
                exterior: (n_l, n_r),
            };
            let (r, _) = rt_left_incidence(&stack, lambda).unwrap();
            let expected = qws_admittance_reflectance(n_lo, n_hi, pairs, n_l, n_r);
            assert_relative_eq!(r.norm_sqr(), expected, max_relative = 1e-10);
        }
    }

    #[test]
    fn lossless_reversal_preserves_reflectance() {
        let layers = vec![
            Layer {
                thickness_nm: 210.0,
                index: Complex64::new(1.9, 0.0),
            },
            Layer {
                thickness_nm: 95.0,
                index: Complex64::new(1.3, 0.0),
            },
            Layer {
                thickness_nm: 151.0,
                index: Complex64::new(2.4, 0.0),
            },
        ];
        let fwd = LayerStack {
            layers: layers.clone(),
            source_plane_nm: 10.0,
            exterior: (1.0, 1.0),
        };
        let mut rev_layers = layers;
        rev_layers.reverse();
        let rev = LayerStack {
            layers: rev_layers,
            source_plane_nm: 10.0,
            exterior: (1.0, 1.0),
        };
        let (rf, tf) = rt_left_incidence(&fwd, 633.0).unwrap();
        let (rb, tb) = rt_left_incidence(&rev, 633.0).unwrap();
        assert_relative_eq!(rf.norm(), rb.norm(), max_relative = 1e-10);
        assert_relative_eq!(tf.norm(), tb.norm(), max_relative = 1e-12);
    }

    #[test]
    fn spectrum_conserves_energy_for_lossless_stack() {
        let design = CavityDesign::default().with_mirrors(20, 20);
        let profile = effective_indices(&design).unwrap().lossless();
        let stack = build_stack(&design, &profile).unwrap();
        let spec = reflection_spectrum(&stack, 600.0, 640.0, 301).unwrap();
        for i in 0..spec.len() {
            let sum = spec.reflectance[i] + spec.transmittance[i];
            assert!(
                (sum - 1.0).abs() < 1e-9,
                "R+T = {sum} at {} nm",
                spec.wavelengths_nm[i]
            );
        }
    }

    #[test]
    fn default_design_dip_lies_near_band_center() {
        let design = CavityDesign::default().with_mirrors(290, 400);
        let profile = effective_indices(&design).unwrap();
        let stack = build_stack(&design, &profile).unwrap();
        let spec = reflection_spectrum(&stack, 600.0, 640.0, 2001).unwrap();
        // deepest sample within the stopband interior
        let mut min_i = None;
        for i in 0..spec.len() {
            if (spec.wavelengths_nm[i] - 620.9).abs() < 3.0
                && min_i.map_or(true, |m: usize| spec.reflectance[i] < spec.reflectance[m])
            {
                min_i = Some(i);
            }
        }
        let dip = spec.wavelengths_nm[min_i.unwrap()];
        // The thin-slat mirror phase offsets the defect mode slightly above
        // the Bragg wavelength; see design notes.
        assert!((dip - 620.0).abs() < 1.5, "dip at {dip} nm");
    }

    #[test]
    fn under_coupled_dip_is_shallower_than_critical() {
        // past the critical crossover the on-resonance dip fills back in
        let base = CavityDesign::default();
        let profile = effective_indices(&base).unwrap();
        let depth = |n_in: usize| {
            let design = base.with_mirrors(n_in, 400);
            let (fit, _) = crate::sweep::design_point(&design, &profile).unwrap();
            fit.baseline - fit.r0
        };
        assert!(depth(340) < depth(290));
    }

    #[test]
    fn mirror_coefficients_symmetric_stack() {
        let design = CavityDesign::default().with_mirrors(40, 40);
        let profile = effective_indices(&design).unwrap();
        let stack = build_stack(&design, &profile).unwrap();
        let mc = mirror_coefficients(&stack, stack.source_plane_nm, 620.9).unwrap();
        assert_relative_eq!(mc.r_left.re, mc.r_right.re, max_relative = 1e-10);
        assert_relative_eq!(mc.r_left.im, mc.r_right.im, max_relative = 1e-10);
        assert_relative_eq!(mc.phase_left, mc.phase_right, max_relative = 1e-12);
    }

    #[test]
    fn mirror_coefficients_no_input_mirror_gives_fresnel() {
        // Left of the source there is only defect medium out to the
        // exterior; with equal indices the reflection vanishes.
        let design = CavityDesign::default().with_mirrors(0, 60);
        let profile = effective_indices(&design).unwrap();
        let stack = build_stack(&design, &profile).unwrap();
        let mc = mirror_coefficients(&stack, stack.source_plane_nm, 620.0).unwrap();
        assert!(mc.r_left.norm() < 1e-12);
        assert!(mc.r_right.norm() > 0.5);
    }

    #[test]
    fn asymmetric_mirrors_ordered_by_strength() {
        let design = CavityDesign::default().with_mirrors(150, 400);
        let profile = effective_indices(&design).unwrap();
        let stack = build_stack(&design, &profile).unwrap();
        let lam0 = 620.9;
        let mc = mirror_coefficients(&stack, stack.source_plane_nm, lam0).unwrap();
        assert!(
            mc.r_right.norm() > mc.r_left.norm(),
            "|rR| = {} should exceed |rL| = {}",
            mc.r_right.norm(),
            mc.r_left.norm()
        );
    }

    #[test]
    fn source_plane_on_interface_rejected() {
        let design = CavityDesign::default().with_mirrors(2, 2);
        let profile = effective_indices(&design).unwrap();
        let stack = build_stack(&design, &profile).unwrap();
        let z_interface = stack.layers[0].thickness_nm;
        assert!(mirror_coefficients(&stack, z_interface, 620.0).is_err());
        assert!(mirror_coefficients(&stack, -1.0, 620.0).is_err());
    }

    #[test]
    fn right_incidence_mirrors_reversed_stack() {
        let layers = vec![
            Layer {
                thickness_nm: 180.0,
                index: Complex64::new(2.2, 0.001),
            },
            Layer {
                thickness_nm: 95.0,
                index: Complex64::new(1.4, 0.0),
            },
        ];
        let stack = LayerStack {
            layers: layers.clone(),
            source_plane_nm: 100.0,
            exterior: (1.0, 1.6),
        };
        let mut rev = layers;
        rev.reverse();
        let reversed = LayerStack {
            layers: rev,
            source_plane_nm: 100.0,
            exterior: (1.6, 1.0),
        };
        let total = stack.total_length_nm();
        let from_right = intensity_profile(&stack, 633.0, Side::Right);
        let reference = intensity_profile(&reversed, 633.0, Side::Left);
        for (&(z, i), &(zr, ir)) in from_right.iter().zip(reference.iter().rev()) {
            assert_relative_eq!(z, total - zr, epsilon = 1e-9);
            assert_relative_eq!(i, ir, max_relative = 1e-12);
        }
    }

    #[test]
    fn geometric_scaling_shifts_spectrum_exactly() {
        // scaling every length by s maps r(lambda) to r(s * lambda); this
        // is why detuning rescales the period to shift the Bragg response
        let design = CavityDesign::default().with_mirrors(30, 40);
        let profile = effective_indices(&design).unwrap();
        let stack = build_stack(&design, &profile).unwrap();
        let detuned = crate::design::detune_design(&design, 5.0).unwrap();
        let scaled = build_stack(&detuned, &profile).unwrap();
        let s = detuned.grating_period / design.grating_period;
        for lambda in [615.0, 620.0, 621.5] {
            let (r, _) = rt_left_incidence(&stack, lambda).unwrap();
            let (rs, _) = rt_left_incidence(&scaled, s * lambda).unwrap();
            assert_relative_eq!(r.re, rs.re, epsilon = 1e-9);
            assert_relative_eq!(r.im, rs.im, epsilon = 1e-9);
        }
        // and the Bragg anchor moves by exactly the requested detuning
        assert_relative_eq!(
            detuned.bragg_wavelength_nm() - design.bragg_wavelength_nm(),
            5.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn uniform_medium_profile_is_flat() {
        let stack = LayerStack {
            layers: vec![Layer {
                thickness_nm: 1000.0,
                index: Complex64::new(1.33, 0.0),
            }],
            source_plane_nm: 500.0,
            exterior: (1.33, 1.33),
        };
        let profile = intensity_profile(&stack, 620.0, Side::Left);
        for &(_, i) in &profile {
            assert_relative_eq!(i, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn on_resonance_intensity_peaks_in_defect() {
        let design = CavityDesign::default().with_mirrors(150, 400);
        let profile = effective_indices(&design).unwrap();
        let stack = build_stack(&design, &profile).unwrap();
        // locate the dip first
        let spec = reflection_spectrum(&stack, 619.5, 622.5, 801).unwrap();
        let mut min_i = 0;
        for i in 0..spec.len() {
            if spec.reflectance[i] < spec.reflectance[min_i] {
                min_i = i;
            }
        }
        let lam0 = spec.wavelengths_nm[min_i];
        let prof = intensity_profile(&stack, lam0, Side::Left);
        let (z_max, _) = prof
            .iter()
            .cloned()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let defect_lo = 150.0 * 244.0;
        let defect_hi = defect_lo + 366.0;
        assert!(
            z_max >= defect_lo - 244.0 && z_max <= defect_hi + 244.0,
            "peak at z = {z_max}, defect at [{defect_lo}, {defect_hi}]"
        );
    }

    #[test]
    fn off_resonance_enhancement_is_modest() {
        let design = CavityDesign::default().with_mirrors(150, 400);
        let profile = effective_indices(&design).unwrap();
        let stack = build_stack(&design, &profile).unwrap();
        // 20 nm above resonance, outside the stopband
        let prof = intensity_profile(&stack, 640.9, Side::Left);
        let exterior_level = prof
            .iter()
            .take(9)
            .map(|&(_, i)| i)
            .fold(0.0_f64, f64::max);
        let interior_max = prof.iter().map(|&(_, i)| i).fold(0.0_f64, f64::max);
        assert!(
            interior_max <= 10.0 * exterior_level.max(1e-30),
            "interior {interior_max} vs exterior {exterior_level}"
        );
    }
}
