//! Supermode model: membrane gap and injection current map to the S/AS
//! fundamental mode wavelengths, linewidths and the common thermal shift.
//!
//! The splitting follows the evanescent-coupling exponential
//! `s(d) = s0 * exp(-(d - d0)/L_c)`; heating moves both modes together by
//! `kappa_th * (I - I_ref)` and cancels out of the splitting.

use serde::Serialize;
use thiserror::Error;

use crate::config::DeviceParams;

/// Which fundamental supermode an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CavityMode {
    /// Symmetric combination; the long-wavelength branch.
    Symmetric,
    /// Antisymmetric combination; the short-wavelength branch.
    Antisymmetric,
}

/// S/AS mode wavelengths and linewidths at one drive state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModePair {
    pub lambda_s_nm: f64,
    pub lambda_as_nm: f64,
    pub fwhm_s_nm: f64,
    pub fwhm_as_nm: f64,
    pub splitting_nm: f64,
    pub thermal_shift_nm: f64,
}

impl ModePair {
    pub fn wavelength(&self, mode: CavityMode) -> f64 {
        match mode {
            CavityMode::Symmetric => self.lambda_s_nm,
            CavityMode::Antisymmetric => self.lambda_as_nm,
        }
    }
}

/// Mechanical and thermal tuning ranges separated by the semi-difference of
/// the two mode shifts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TuningDecomposition {
    pub mechanical_nm: f64,
    pub thermal_nm: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum OpticsError {
    #[error("tuning decomposition needs at least 2 sweep rows (got {0})")]
    TooFewRows(usize),
}

/// Mode splitting at a given gap.
pub fn splitting(p: &DeviceParams, gap_nm: f64) -> f64 {
    p.optics.s0_nm * (-(gap_nm - p.mech.d0_nm) / p.optics.l_c_nm).exp()
}

/// Common thermal redshift of both modes at a given injection current.
pub fn thermal_shift(p: &DeviceParams, i_ma: f64) -> f64 {
    p.optics.kappa_th_nm_per_ma * (i_ma - p.optics.i_ref_ma)
}

/// S/AS wavelengths and linewidths at a given gap and current.
pub fn mode_pair(p: &DeviceParams, gap_nm: f64, i_ma: f64) -> ModePair {
    let s = splitting(p, gap_nm);
    let t = thermal_shift(p, i_ma);
    let center = p.optics.lambda0_nm + t;
    let lambda_s = center + 0.5 * s;
    let lambda_as = center - 0.5 * s;
    ModePair {
        lambda_s_nm: lambda_s,
        lambda_as_nm: lambda_as,
        fwhm_s_nm: lambda_s / p.optics.q,
        fwhm_as_nm: lambda_as / p.optics.q,
        splitting_nm: s,
        thermal_shift_nm: t,
    }
}

/// Split a `(V, lambda_S, lambda_AS)` sweep into mechanical and thermal
/// tuning ranges: the modes move oppositely under actuation and together
/// under heating, so the half-sum of the end-to-end shifts is mechanical
/// and the half-difference is thermal.
pub fn decompose_tuning(sweep: &[(f64, f64, f64)]) -> Result<TuningDecomposition, OpticsError> {
    if sweep.len() < 2 {
        return Err(OpticsError::TooFewRows(sweep.len()));
    }
    let first = sweep.first().unwrap();
    let last = sweep.last().unwrap();
    let d_s = (last.1 - first.1).abs();
    let d_as = (last.2 - first.2).abs();
    Ok(TuningDecomposition {
        mechanical_nm: 0.5 * (d_s + d_as),
        thermal_nm: 0.5 * (d_as - d_s),
    })
}
