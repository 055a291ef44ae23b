//! Physical constants and unit helpers.

/// Speed of light in vacuum (m/s).
pub const C_MPS: f64 = 299_792_458.0;

/// Speed of light in nm·Hz (c expressed for wavelength-in-nm arithmetic).
pub const C_NM_HZ: f64 = C_MPS * 1.0e9;

/// Ordinary frequency (Hz) of a vacuum wavelength given in nm.
#[inline]
pub fn frequency_hz(lambda_nm: f64) -> f64 {
    C_NM_HZ / lambda_nm
}

/// Linewidth conversion: FWHM in nm at `lambda_nm` to ordinary frequency (Hz).
///
/// kappa = c * dlambda / lambda^2.
#[inline]
pub fn fwhm_nm_to_hz(delta_lambda_nm: f64, lambda_nm: f64) -> f64 {
    C_NM_HZ * delta_lambda_nm / (lambda_nm * lambda_nm)
}
