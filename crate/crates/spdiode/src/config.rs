//! Device parameter schema, JSON loading/validation, and closed-form
//! calibration helpers.
//!
//! The configuration is a fixed JSON schema with units spelled out in the
//! key names (`d0_nm`, `kappa_th_nm_per_ma`, ...). Every field is required
//! and unknown keys are rejected: silent typos in a hand-edited config are
//! the main field-data hazard, so they fail loudly at load time.
//!
//! A calibrated preset, [`DeviceParams::paper_device`], ships embedded in
//! the crate (and as `presets/paper_device.json`).

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lumped electromechanical parameters of the double-membrane actuator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechParams {
    /// Rest gap between the membranes at zero effective actuation voltage.
    pub d0_nm: f64,
    /// Built-in voltage of the actuation junction. The effective actuation
    /// voltage is `v_bi_cav_v - v_cav`.
    pub v_bi_cav_v: f64,
    /// Spring constant divided by (permittivity x plate area), so the
    /// force balance reads `k * (d0 - d) = v_eff^2 / (2 d^2)`.
    pub k_over_eps_a_v2_nm3: f64,
}

/// Supermode optics of the coupled cavity pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticsParams {
    /// Uncoupled slab resonance; the S/AS pair is centred here (plus the
    /// thermal shift).
    pub lambda0_nm: f64,
    /// Mode splitting at the rest gap `d0_nm`.
    pub s0_nm: f64,
    /// Decay length of the evanescent coupling, `s(d) = s0 exp(-(d-d0)/L_c)`.
    pub l_c_nm: f64,
    /// Quality factor shared by both fundamental modes.
    pub q: f64,
    /// Linear thermal shift coefficient (both modes move together).
    pub kappa_th_nm_per_ma: f64,
    /// Injection current at which the thermal shift is defined to be zero.
    pub i_ref_ma: f64,
}

/// Crosstalk between the actuation diode and the injection diode: the
/// measured injection current drops linearly with the cavity voltage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrosstalkParams {
    pub i_at_vref_ma: f64,
    pub i_at_vlow_ma: f64,
    pub v_ref_v: f64,
    pub v_low_v: f64,
}

/// Exciton physics: Stark tuning, decay channels, tunneling escape and the
/// phenomenological electroluminescence enhancement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterParams {
    /// Exciton wavelength at the resonance bias `v_res_mv`.
    pub lambda_x_at_res_nm: f64,
    /// Bias at which the exciton crosses the cavity mode, in millivolts.
    pub v_res_mv: f64,
    /// Stark slope; negative means blue shift with increasing bias.
    pub stark_slope_nm_per_v: f64,
    /// Radiative lifetime at zero field in a bulk (cavity-free) region.
    pub tau_bulk_ns: f64,
    /// Lifetime of the decay into leaky modes inside the photonic crystal.
    pub tau_leaky_ns: f64,
    /// Total on-resonance lifetime anchor used to calibrate the peak
    /// cavity-enhanced rate: `gamma_phc_max = 1/tau_on_res - 1/tau_leaky`.
    pub tau_on_res_ns: f64,
    /// Injection threshold of the QD diode.
    pub v_th_v: f64,
    /// Tunneling rate at threshold; the rate grows exponentially below it.
    pub tun_prefactor_per_ns: f64,
    /// Voltage scale of the tunneling exponential.
    pub tun_scale_v: f64,
    /// Exponent of the enhancement Lorentzian (model knob, not physics).
    pub enh_exponent: f64,
    /// On-resonance electroluminescence enhancement factor.
    pub enh_max: f64,
    /// Probability that a pulse creates a dark exciton (time-resolved model).
    pub dark_fraction: f64,
    /// Dark-to-bright repopulation (spin-flip) rate.
    pub dark_repop_rate_per_ns: f64,
}

/// Single-photon detector model shared by both HBT channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorParams {
    pub efficiency: f64,
    pub dark_rate_hz: f64,
    /// Timing jitter. Interpreted as a Gaussian FWHM unless
    /// `jitter_is_sigma` is set (vendors quote FWHM).
    pub jitter_fwhm_ps: f64,
    pub jitter_is_sigma: bool,
    pub dead_time_ns: f64,
}

/// Coincidence histogram defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelatorParams {
    pub bin_width_ps: i64,
    pub window_ns: f64,
}

/// Band-pass filter in front of the HBT setup (recorded device metadata).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterParams {
    pub center_nm: f64,
    pub fwhm_nm: f64,
}

/// Knobs of the photon-statistics chain that are not detector hardware:
/// the effective pump rate of the two-level emitter and the Poissonian
/// background fraction (cavity feeding) mixed into the detected signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HbtParams {
    pub pump_rate_per_ns: f64,
    pub background_fraction: f64,
}

/// A secondary exciton line riding its own Stark slope (off by default).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtraLine {
    pub lambda_at_vres_nm: f64,
    pub stark_slope_nm_per_v: f64,
    pub amplitude: f64,
}

/// A band-edge mode riding the AS-mode shift, placed at a fixed offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandEdgeMode {
    pub offset_nm: f64,
    pub amplitude: f64,
}

/// Spectral synthesis knobs: linewidths, relative amplitudes and the single
/// global counts/s scale (the intensity axis is otherwise arbitrary).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectraParams {
    pub exciton_fwhm_nm: f64,
    pub mode_amplitude: f64,
    pub exciton_amplitude: f64,
    pub background: f64,
    pub scale_counts_per_s: f64,
    pub band_edge_modes: Vec<BandEdgeMode>,
    pub extra_lines: Vec<ExtraLine>,
}

/// Full calibrated parameter set of one device. Immutable after load; safe
/// to share read-only across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    pub mech: MechParams,
    pub optics: OpticsParams,
    pub crosstalk: CrosstalkParams,
    pub emitter: EmitterParams,
    pub detector: DetectorParams,
    pub correlator: CorrelatorParams,
    pub filter: FilterParams,
    pub hbt: HbtParams,
    pub spectra: SpectraParams,
}

/// The two control voltages plus the derived injection current.
///
/// The nominal injection current is the crosstalk reference current whenever
/// the QD diode is above threshold, scaled by the linear crosstalk model;
/// below threshold it is zero. Construct via [`crate::actuator::drive_state`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveState {
    pub v_cav: f64,
    pub v_qd: f64,
    pub i_qd_ma: f64,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("invalid config: field `{field}` {reason}")]
    Invalid { field: String, reason: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("degenerate anchors: both gaps equal {0} nm")]
    DegenerateAnchors(f64),
    #[error("non-positive splitting {0} nm")]
    NonPositiveSplitting(f64),
    #[error("current delta must be nonzero")]
    ZeroCurrentDelta,
}

impl fmt::Display for DriveState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "V_CAV={} V, V_QD={} V, I_QD={} mA",
            self.v_cav, self.v_qd, self.i_qd_ma
        )
    }
}

const PAPER_DEVICE_JSON: &str = include_str!("../presets/paper_device.json");

impl DeviceParams {
    /// Parse and validate a parameter set from a JSON string.
    pub fn from_json_str(s: &str) -> Result<Self, ConfigError> {
        let p: DeviceParams = serde_json::from_str(s).map_err(|e| ConfigError::Parse {
            path: "<string>".into(),
            source: e,
        })?;
        p.validate()?;
        Ok(p)
    }

    /// Pretty-printed JSON, round-trippable through [`load_config`].
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("DeviceParams serializes")
    }

    /// The shipped reference preset, calibrated so that the forward model
    /// reproduces the published tuning curves, lifetimes and correlation
    /// numbers of the device it describes.
    pub fn paper_device() -> Self {
        Self::from_json_str(PAPER_DEVICE_JSON).expect("embedded preset is valid")
    }

    /// Check every schema invariant, naming the offending field on failure.
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn bad(field: &str, reason: impl Into<String>) -> ConfigError {
            ConfigError::Invalid {
                field: field.into(),
                reason: reason.into(),
            }
        }
        let positive: [(&str, f64); 12] = [
            ("mech.d0_nm", self.mech.d0_nm),
            ("mech.k_over_eps_a_v2_nm3", self.mech.k_over_eps_a_v2_nm3),
            ("optics.lambda0_nm", self.optics.lambda0_nm),
            ("optics.s0_nm", self.optics.s0_nm),
            ("optics.l_c_nm", self.optics.l_c_nm),
            ("optics.q", self.optics.q),
            ("emitter.tau_bulk_ns", self.emitter.tau_bulk_ns),
            ("emitter.tau_leaky_ns", self.emitter.tau_leaky_ns),
            ("emitter.tau_on_res_ns", self.emitter.tau_on_res_ns),
            ("emitter.tun_scale_v", self.emitter.tun_scale_v),
            ("spectra.exciton_fwhm_nm", self.spectra.exciton_fwhm_nm),
            ("filter.fwhm_nm", self.filter.fwhm_nm),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(bad(name, format!("must be > 0 (got {v})")));
            }
        }
        let nonneg: [(&str, f64); 8] = [
            ("crosstalk.i_at_vlow_ma", self.crosstalk.i_at_vlow_ma),
            ("emitter.tun_prefactor_per_ns", self.emitter.tun_prefactor_per_ns),
            ("emitter.dark_repop_rate_per_ns", self.emitter.dark_repop_rate_per_ns),
            ("detector.dark_rate_hz", self.detector.dark_rate_hz),
            ("detector.jitter_fwhm_ps", self.detector.jitter_fwhm_ps),
            ("detector.dead_time_ns", self.detector.dead_time_ns),
            ("hbt.pump_rate_per_ns", self.hbt.pump_rate_per_ns),
            ("spectra.background", self.spectra.background),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(bad(name, format!("must be >= 0 (got {v})")));
            }
        }
        let eff = self.detector.efficiency;
        if !(eff > 0.0 && eff <= 1.0) {
            return Err(bad(
                "detector.efficiency",
                format!("must be a fraction in (0, 1] (got {eff})"),
            ));
        }
        if self.crosstalk.i_at_vref_ma < self.crosstalk.i_at_vlow_ma {
            return Err(bad(
                "crosstalk.i_at_vref_ma",
                "must be >= i_at_vlow_ma".to_string(),
            ));
        }
        if self.crosstalk.v_ref_v == self.crosstalk.v_low_v {
            return Err(bad("crosstalk.v_ref_v", "must differ from v_low_v".to_string()));
        }
        if self.emitter.tau_on_res_ns > self.emitter.tau_leaky_ns {
            return Err(bad(
                "emitter.tau_on_res_ns",
                "must be <= tau_leaky_ns so the cavity-enhanced rate is nonnegative",
            ));
        }
        if self.emitter.enh_max < 1.0 {
            return Err(bad("emitter.enh_max", "must be >= 1".to_string()));
        }
        if self.emitter.enh_exponent <= 0.0 {
            return Err(bad("emitter.enh_exponent", "must be > 0".to_string()));
        }
        if !(0.0..1.0).contains(&self.hbt.background_fraction) {
            return Err(bad(
                "hbt.background_fraction",
                "must be a fraction in [0, 1)".to_string(),
            ));
        }
        if !(0.0..=1.0).contains(&self.emitter.dark_fraction) {
            return Err(bad("emitter.dark_fraction", "must be in [0, 1]".to_string()));
        }
        if self.correlator.bin_width_ps <= 0 {
            return Err(bad("correlator.bin_width_ps", "must be > 0".to_string()));
        }
        if self.correlator.window_ns * 1000.0 < self.correlator.bin_width_ps as f64 {
            return Err(bad(
                "correlator.window_ns",
                "must cover at least one bin".to_string(),
            ));
        }
        if self.mech.d0_nm.is_finite() && self.mech.v_bi_cav_v.is_nan() {
            return Err(bad("mech.v_bi_cav_v", "must be finite".to_string()));
        }
        Ok(())
    }
}

/// Load and validate a device configuration from a JSON file.
pub fn load_config<P: AsRef<Path>>(path: P) -> Result<DeviceParams, ConfigError> {
    let path_str = path.as_ref().display().to_string();
    let text = std::fs::read_to_string(&path).map_err(|e| ConfigError::Io {
        path: path_str.clone(),
        source: e,
    })?;
    let p: DeviceParams = serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path_str,
        source: e,
    })?;
    p.validate()?;
    Ok(p)
}

/// Write a parameter set back to disk as pretty-printed JSON.
pub fn save_config<P: AsRef<Path>>(p: &DeviceParams, path: P) -> Result<(), ConfigError> {
    let path_str = path.as_ref().display().to_string();
    std::fs::write(&path, p.to_json_string()).map_err(|e| ConfigError::Io {
        path: path_str,
        source: e,
    })
}

/// Solve the exponential splitting law through two (gap, splitting) anchors.
///
/// Returns `(s0, l_c)` such that `s(d) = s0 * exp(-(d - d_a)/l_c)` passes
/// through both anchors exactly, with the first anchor taken as the rest-gap
/// reference (so `s0` is the splitting at `anchor_a`'s gap). Closed form; no
/// iteration.
pub fn calibrate_splitting(
    anchor_a: (f64, f64),
    anchor_b: (f64, f64),
) -> Result<(f64, f64), CalibrationError> {
    let (d_a, s_a) = anchor_a;
    let (d_b, s_b) = anchor_b;
    if s_a <= 0.0 {
        return Err(CalibrationError::NonPositiveSplitting(s_a));
    }
    if s_b <= 0.0 {
        return Err(CalibrationError::NonPositiveSplitting(s_b));
    }
    if d_a == d_b {
        return Err(CalibrationError::DegenerateAnchors(d_a));
    }
    // s_b = s_a * exp(-(d_b - d_a)/L)  =>  L = (d_a - d_b)/ln(s_b/s_a)
    let l_c = (d_a - d_b) / (s_b / s_a).ln();
    Ok((s_a, l_c))
}

/// Thermal shift coefficient from a (current change, wavelength change) pair.
pub fn calibrate_thermal(delta_i_ma: f64, delta_lambda_nm: f64) -> Result<f64, CalibrationError> {
    if delta_i_ma == 0.0 {
        return Err(CalibrationError::ZeroCurrentDelta);
    }
    Ok(delta_lambda_nm / delta_i_ma)
}

/// Calibrate the lumped actuator constant from a single (voltage, gap)
/// anchor: `k = v_eff^2 / (2 d^2 (d0 - d))`.
pub fn calibrate_actuation(d0_nm: f64, v_bi_cav_v: f64, v_cav_v: f64, gap_nm: f64) -> f64 {
    let v_eff = v_bi_cav_v - v_cav_v;
    v_eff * v_eff / (2.0 * gap_nm * gap_nm * (d0_nm - gap_nm))
}
