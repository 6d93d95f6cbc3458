//! Electromechanics of the double-membrane actuator: lumped parallel-plate
//! plus spring model, its pull-in instability, and the inter-diode
//! crosstalk current.
//!
//! The reduced force balance is `k * (d0 - d) = v_eff^2 / (2 d^2)` with
//! `k = k_spring / (eps * area)` and `v_eff = v_bi_cav - v_cav`. The force
//! depends on `v_eff^2`, so bias of either sign attracts. Stable equilibria
//! live on `(2 d0 / 3, d0]`; beyond the pull-in voltage no stable gap exists.

use serde::Serialize;
use thiserror::Error;

use crate::config::{DeviceParams, DriveState};

/// A solved static equilibrium of the membrane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Equilibrium {
    pub gap_nm: f64,
    /// Effective actuation voltage `v_bi_cav - v_cav`.
    pub v_eff: f64,
    pub stable: bool,
}

/// Pull-in threshold of the actuator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PullInPoint {
    /// Effective voltage at which the stable and unstable branches merge.
    pub v_pi: f64,
    /// Gap at the merge point, `2 d0 / 3`.
    pub d_pi_nm: f64,
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("pull-in: no stable gap at V_CAV = {v_cav} V (|v_eff| = {v_eff_abs} V exceeds V_pi = {v_pi} V)")]
pub struct PullInError {
    pub v_cav: f64,
    pub v_eff_abs: f64,
    pub v_pi: f64,
}

/// Analytic pull-in point: `d_pi = 2 d0 / 3`, `v_pi = sqrt(8 k d0^3 / 27)`.
pub fn pull_in(p: &DeviceParams) -> PullInPoint {
    let d0 = p.mech.d0_nm;
    let k = p.mech.k_over_eps_a_v2_nm3;
    PullInPoint {
        v_pi: (8.0 * k * d0 * d0 * d0 / 27.0).sqrt(),
        d_pi_nm: 2.0 * d0 / 3.0,
    }
}

/// Stable membrane gap at a given cavity voltage.
///
/// Bisects the force-balance residual on the stable branch `(2 d0 / 3, d0]`
/// down to an interval of 1e-9 nm, which leaves a relative force residual
/// below 1e-9. Errors past pull-in.
pub fn equilibrium_gap(p: &DeviceParams, v_cav: f64) -> Result<Equilibrium, PullInError> {
    let d0 = p.mech.d0_nm;
    let k = p.mech.k_over_eps_a_v2_nm3;
    let v_eff = p.mech.v_bi_cav_v - v_cav;
    let pi = pull_in(p);
    if v_eff.abs() > pi.v_pi {
        return Err(PullInError {
            v_cav,
            v_eff_abs: v_eff.abs(),
            v_pi: pi.v_pi,
        });
    }
    if v_eff == 0.0 {
        return Ok(Equilibrium {
            gap_nm: d0,
            v_eff,
            stable: true,
        });
    }
    let v2 = v_eff * v_eff;
    // Spring minus electrostatic term; positive when the spring wins.
    let f = |d: f64| k * (d0 - d) - v2 / (2.0 * d * d);
    let mut lo = 2.0 * d0 / 3.0;
    let mut hi = d0;
    // f(hi) = -v2/(2 d0^2) < 0, f(lo+) > 0 for |v_eff| < v_pi.
    for _ in 0..200 {
        if hi - lo < 1e-9 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Equilibrium {
        gap_nm: 0.5 * (lo + hi),
        v_eff,
        stable: true,
    })
}

/// Measured injection current under diode crosstalk: linear in the cavity
/// voltage between the two calibration anchors, scaled to the nominal
/// current and clamped at zero.
pub fn crosstalk_current(p: &DeviceParams, v_cav: f64, i_nominal_ma: f64) -> f64 {
    let c = &p.crosstalk;
    let slope = (c.i_at_vref_ma - c.i_at_vlow_ma) / (c.v_ref_v - c.v_low_v);
    let i = c.i_at_vlow_ma + slope * (v_cav - c.v_low_v);
    (i * i_nominal_ma / c.i_at_vref_ma).max(0.0)
}

/// Build the drive state for a voltage pair: the injection current is the
/// crosstalk-scaled reference current above threshold and zero below.
pub fn drive_state(p: &DeviceParams, v_cav: f64, v_qd: f64) -> DriveState {
    let i_nominal = if v_qd >= p.emitter.v_th_v {
        p.crosstalk.i_at_vref_ma
    } else {
        0.0
    };
    DriveState {
        v_cav,
        v_qd,
        i_qd_ma: crosstalk_current(p, v_cav, i_nominal),
    }
}
