//! Exciton physics: Stark-shifted wavelength, field-dependent tunneling
//! escape, the cavity-enhanced decay budget, electroluminescence
//! enhancement and the diode RC cutoff.

use serde::Serialize;
use thiserror::Error;

use crate::config::DeviceParams;

/// Decay-channel decomposition at one bias and mode wavelength. Rates are
/// per nanosecond. `gamma_total` is accumulated in the fixed order
/// phc + leaky + tun so results are bitwise reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayBudget {
    pub gamma_phc: f64,
    pub gamma_leaky: f64,
    pub gamma_tun: f64,
    pub gamma_total: f64,
    pub tau_total_ns: f64,
    /// Fraction of the decay going into the cavity mode.
    pub beta: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum EmitterError {
    #[error("rc_cutoff needs positive R and C (got R = {r} ohm, C = {c} F)")]
    NonPositiveRc { r: f64, c: f64 },
}

/// Exciton wavelength under the linearized Stark law. `v_res_mv` is stored
/// in millivolts; the slope is per volt.
pub fn exciton_wavelength(p: &DeviceParams, v_qd: f64) -> f64 {
    let e = &p.emitter;
    e.lambda_x_at_res_nm + e.stark_slope_nm_per_v * (v_qd - e.v_res_mv / 1000.0)
}

/// Tunneling escape rate: a single exponential in the bias, anchored at the
/// injection threshold and monotone nonincreasing in `v_qd`.
pub fn tunneling_rate(p: &DeviceParams, v_qd: f64) -> f64 {
    let e = &p.emitter;
    e.tun_prefactor_per_ns * (-(v_qd - e.v_th_v) / e.tun_scale_v).exp()
}

/// Peak cavity-enhanced rate, calibrated from the on-resonance lifetime
/// anchor with tunneling neglected: `1/tau_on_res - 1/tau_leaky`.
pub fn purcell_rate_max(p: &DeviceParams) -> f64 {
    1.0 / p.emitter.tau_on_res_ns - 1.0 / p.emitter.tau_leaky_ns
}

/// Cavity-enhanced decay rate at a given spectral detuning: Lorentzian in
/// the detuning with the cavity linewidth `lambda_mode / Q`.
pub fn purcell_rate(p: &DeviceParams, detuning_nm: f64, lambda_mode_nm: f64) -> f64 {
    let fwhm = lambda_mode_nm / p.optics.q;
    let x = 2.0 * detuning_nm / fwhm;
    purcell_rate_max(p) / (1.0 + x * x)
}

/// Combine the three decay channels at a given bias and mode wavelength.
pub fn decay_budget(p: &DeviceParams, v_qd: f64, lambda_mode_nm: f64) -> DecayBudget {
    let detuning = exciton_wavelength(p, v_qd) - lambda_mode_nm;
    let gamma_phc = purcell_rate(p, detuning, lambda_mode_nm);
    let gamma_leaky = 1.0 / p.emitter.tau_leaky_ns;
    let gamma_tun = tunneling_rate(p, v_qd);
    let gamma_total = gamma_phc + gamma_leaky + gamma_tun;
    DecayBudget {
        gamma_phc,
        gamma_leaky,
        gamma_tun,
        gamma_total,
        tau_total_ns: 1.0 / gamma_total,
        beta: gamma_phc / gamma_total,
    }
}

/// Total decay rate in a bulk (cavity-free) region: zero-field radiative
/// rate plus tunneling. This is what a time-resolved ensemble measurement
/// sees as its fast component.
pub fn bulk_decay_rate(p: &DeviceParams, v_qd: f64) -> f64 {
    1.0 / p.emitter.tau_bulk_ns + tunneling_rate(p, v_qd)
}

/// Electroluminescence enhancement versus detuning:
/// `1 + (enh_max - 1) * L(detuning)^enh_exponent` with `L` the unit-height
/// cavity Lorentzian. The exponent is a phenomenological steepening knob;
/// a plain spectral-overlap Lorentzian is too shallow to reproduce the
/// observed on/off contrast.
pub fn el_enhancement(p: &DeviceParams, detuning_nm: f64, lambda_mode_nm: f64) -> f64 {
    let fwhm = lambda_mode_nm / p.optics.q;
    let x = 2.0 * detuning_nm / fwhm;
    let lorentz = 1.0 / (1.0 + x * x);
    1.0 + (p.emitter.enh_max - 1.0) * lorentz.powf(p.emitter.enh_exponent)
}

/// RC cutoff frequency `1/(2 pi R C)` in Hz.
pub fn rc_cutoff(r_ohm: f64, c_farad: f64) -> Result<f64, EmitterError> {
    if r_ohm <= 0.0 || c_farad <= 0.0 {
        return Err(EmitterError::NonPositiveRc { r: r_ohm, c: c_farad });
    }
    Ok(1.0 / (2.0 * std::f64::consts::PI * r_ohm * c_farad))
}
