//! The toolkit's specific fit models on top of the LM engine.

use super::{least_squares, FitError, FitResult, Param};
use crate::photostats::{DecayTrace, G2Curve};
use crate::spectra::{Spectrum, SweepTable};

/// Kept for API compatibility of the Stark fit: the plain [`FitResult`]
/// already carries the derived crossing bias, so this is an alias.
pub type StarkFit = FitResult;

fn g2_model(p: &[f64], x: f64) -> f64 {
    if p[1] <= 0.0 {
        return f64::INFINITY;
    }
    1.0 - p[0] * (-x.abs() / p[1]).exp()
}

fn fit_g2_impl(curve: &G2Curve, weighted: bool) -> Result<FitResult, FitError> {
    if curve.g2.len() < 3 {
        return Err(FitError::TooFewPoints {
            need: 3,
            got: curve.g2.len(),
            params: 2,
        });
    }
    let data: Vec<(f64, f64, f64)> = curve
        .tau_ps
        .iter()
        .zip(curve.g2.iter().zip(&curve.sigma))
        .map(|(&t, (&g, &s))| (t as f64, g, if weighted { s } else { 1.0 }))
        .collect();

    // Deterministic initialization: dip depth from the curve minimum, time
    // constant from the first positive-delay bin recovering past 1 - A/e.
    let min_g2 = curve.g2.iter().cloned().fold(f64::INFINITY, f64::min);
    let a0 = (1.0 - min_g2).clamp(1e-6, 1.0);
    let level = 1.0 - a0 / std::f64::consts::E;
    let max_tau = curve.tau_ps.last().copied().unwrap_or(0) as f64;
    let mut tau0 = max_tau / 10.0;
    for (&t, &g) in curve.tau_ps.iter().zip(&curve.g2) {
        if t > 0 && g >= level {
            tau0 = t as f64;
            break;
        }
    }
    tau0 = tau0.max(curve.bin_width_ps as f64);

    let mut fit = least_squares(g2_model, &data, &[a0, tau0], &["a", "tau_t_ps"])?;
    let a = fit.value("a");
    let tau = fit.value("tau_t_ps");
    fit.derived.push(Param {
        name: "g2_zero".into(),
        value: 1.0 - a,
        std_error: fit.std_error("a"),
    });
    if max_tau < 3.0 * tau {
        fit.warnings
            .push(format!("curve spans {max_tau} ps, less than 3 tau_t = {}", 3.0 * tau));
    }
    Ok(fit)
}

/// Fit the antibunching dip `g2(tau) = 1 - A exp(-|tau|/tau_t)`, weighting
/// bins by their Poisson sigma. The derived `g2_zero` parameter is `1 - A`.
pub fn fit_g2(curve: &G2Curve) -> Result<FitResult, FitError> {
    fit_g2_impl(curve, true)
}

/// [`fit_g2`] with uniform weights instead of per-bin Poisson sigmas.
pub fn fit_g2_unweighted(curve: &G2Curve) -> Result<FitResult, FitError> {
    fit_g2_impl(curve, false)
}

fn lorentzian_model(p: &[f64], x: f64) -> f64 {
    if p[1] <= 0.0 {
        return f64::INFINITY;
    }
    let t = 2.0 * (x - p[0]) / p[1];
    p[3] + p[2] / (1.0 + t * t)
}

/// Fit a single Lorentzian peak plus flat offset to a spectrum, weighting
/// points by Poisson counting errors. Derives `q = center/fwhm` with the
/// covariance-propagated uncertainty.
pub fn fit_lorentzian(spec: &Spectrum) -> Result<FitResult, FitError> {
    let n = spec.wavelengths_nm.len();
    if n < 5 {
        return Err(FitError::TooFewPoints { need: 5, got: n, params: 4 });
    }
    let data: Vec<(f64, f64, f64)> = spec
        .wavelengths_nm
        .iter()
        .zip(&spec.intensities)
        .map(|(&x, &y)| (x, y, y.max(1.0).sqrt()))
        .collect();

    let (i_max, _) = spec
        .intensities
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    let y_max = spec.intensities[i_max];
    let y_min = spec.intensities.iter().cloned().fold(f64::INFINITY, f64::min);
    let center0 = spec.wavelengths_nm[i_max];
    let amp0 = (y_max - y_min).max(1e-12);
    let half = y_min + 0.5 * amp0;
    let mut left = spec.wavelengths_nm[0];
    for i in (0..i_max).rev() {
        if spec.intensities[i] < half {
            left = spec.wavelengths_nm[i];
            break;
        }
    }
    let mut right = spec.wavelengths_nm[n - 1];
    for i in i_max..n {
        if spec.intensities[i] < half {
            right = spec.wavelengths_nm[i];
            break;
        }
    }
    let span = spec.wavelengths_nm[n - 1] - spec.wavelengths_nm[0];
    let fwhm0 = (right - left).max(span * 1e-4);

    let mut fit = least_squares(
        lorentzian_model,
        &data,
        &[center0, fwhm0, amp0, y_min],
        &["center_nm", "fwhm_nm", "amplitude", "offset"],
    )?;

    let c = fit.value("center_nm");
    let w = fit.value("fwhm_nm");
    let k = 4;
    let v_cc = fit.covariance[0];
    let v_cw = fit.covariance[1];
    let v_ww = fit.covariance[k + 1];
    let var_q = v_cc / (w * w) + c * c / w.powi(4) * v_ww - 2.0 * c / w.powi(3) * v_cw;
    fit.derived.push(Param {
        name: "q".into(),
        value: c / w,
        std_error: var_q.max(0.0).sqrt(),
    });
    if i_max < 2 || i_max + 3 > n || c < spec.wavelengths_nm[0] || c > spec.wavelengths_nm[n - 1] {
        fit.warnings.push("peak at grid edge".into());
    }
    if fit.value("amplitude").abs() < 3.0 * fit.std_error("amplitude") {
        fit.warnings.push("amplitude consistent with zero".into());
    }
    Ok(fit)
}

const SQRT_PI: f64 = 1.7724538509055159;

/// Scaled complementary error function `exp(u^2) erfc(u)` for `u >= 0`.
fn erfcx(u: f64) -> f64 {
    if u < 20.0 {
        (u * u).exp() * libm::erfc(u)
    } else {
        let inv2 = 1.0 / (u * u);
        (1.0 - 0.5 * inv2 + 0.75 * inv2 * inv2 - 1.875 * inv2 * inv2 * inv2) / (u * SQRT_PI)
    }
}

/// One-sided exponential decay of lifetime `tau` convolved with a Gaussian
/// of width `sigma`, normalized to unit amplitude before convolution.
fn decay_conv(t: f64, tau: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return if t < 0.0 { 0.0 } else { (-t / tau).exp() };
    }
    let u = (sigma / tau - t / sigma) / std::f64::consts::SQRT_2;
    if u >= 0.0 {
        0.5 * (-t * t / (2.0 * sigma * sigma)).exp() * erfcx(u)
    } else {
        0.5 * (sigma * sigma / (2.0 * tau * tau) - t / tau).exp() * libm::erfc(u)
    }
}

fn biexp_model(sigma_ns: f64) -> impl Fn(&[f64], f64) -> f64 {
    move |p: &[f64], t: f64| {
        if p[0] <= 0.0 || p[1] <= 0.0 {
            return f64::INFINITY;
        }
        p[2] * decay_conv(t, p[0], sigma_ns) + p[3] * decay_conv(t, p[1], sigma_ns)
    }
}

fn biexp_init(data: &[(f64, f64, f64)]) -> [f64; 4] {
    let (i_peak, peak) = data
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
        .map(|(i, d)| (i, *d))
        .unwrap();
    let (t_peak, y_peak, _) = peak;
    let t_end = data.last().unwrap().0;
    let range = (t_end - t_peak).max(1e-9);

    // Slow component: log-linear regression over the last 40% of the trace.
    let tail: Vec<(f64, f64)> = data
        .iter()
        .filter(|(t, y, _)| *t > t_peak + 0.6 * range && *y >= 3.0)
        .map(|(t, y, _)| (*t, y.ln()))
        .collect();
    let (mut tau_s, mut a_s) = (range / 3.0, 0.05 * y_peak);
    if tail.len() >= 3 {
        let n = tail.len() as f64;
        let sx: f64 = tail.iter().map(|p| p.0).sum();
        let sy: f64 = tail.iter().map(|p| p.1).sum();
        let sxx: f64 = tail.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = tail.iter().map(|p| p.0 * p.1).sum();
        let denom = n * sxx - sx * sx;
        if denom > 0.0 {
            let slope = (n * sxy - sx * sy) / denom;
            if slope < -1e-12 {
                tau_s = (-1.0 / slope).clamp(range / 100.0, 10.0 * range);
                a_s = ((sy - slope * sx) / n).exp().min(y_peak);
            }
        }
    }

    // Fast component: 1/e crossing of the slow-subtracted early decay.
    let slow_at = |t: f64| a_s * (-t / tau_s).exp();
    let yf_peak = (y_peak - slow_at(t_peak)).max(0.05 * y_peak);
    let mut tau_f = tau_s / 10.0;
    for (t, y, _) in data.iter().skip(i_peak) {
        if y - slow_at(*t) <= yf_peak / std::f64::consts::E {
            tau_f = (*t - t_peak).max(1e-6);
            break;
        }
    }
    tau_f = tau_f.min(0.5 * tau_s);
    [tau_f, tau_s, yf_peak, a_s]
}

/// Fit `a_f exp(-t/tau_f) + a_s exp(-t/tau_s)` convolved with a Gaussian
/// instrument response of FWHM `irf_fwhm_ps` to a decay trace.
/// `tau_fast < tau_slow` is enforced by reordering after the solve.
pub fn fit_biexp_irf(trace: &DecayTrace, irf_fwhm_ps: f64) -> Result<FitResult, FitError> {
    if irf_fwhm_ps < 0.0 {
        return Err(FitError::BadInput("IRF width must be nonnegative".into()));
    }
    let data: Vec<(f64, f64, f64)> = trace
        .counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            (
                trace.bin_center_ps(i) * 1e-3, // ns
                c as f64,
                (c as f64).max(1.0).sqrt(),
            )
        })
        .collect();
    if data.len() < 5 {
        return Err(FitError::TooFewPoints {
            need: 5,
            got: data.len(),
            params: 4,
        });
    }
    let sigma_ns = irf_fwhm_ps / (2.0 * (2.0 * 2f64.ln()).sqrt()) * 1e-3;
    let init = biexp_init(&data);
    let mut fit = least_squares(
        biexp_model(sigma_ns),
        &data,
        &init,
        &["tau_fast_ns", "tau_slow_ns", "a_fast", "a_slow"],
    )?;

    if fit.value("tau_fast_ns") > fit.value("tau_slow_ns") {
        fit.params.swap(0, 1);
        fit.params.swap(2, 3);
        fit.params[0].name = "tau_fast_ns".into();
        fit.params[1].name = "tau_slow_ns".into();
        fit.params[2].name = "a_fast".into();
        fit.params[3].name = "a_slow".into();
        // Covariance loses its meaning under the swap only in labelling;
        // permute rows and columns to match.
        let k = 4;
        let perm = [1usize, 0, 3, 2];
        let old = fit.covariance.clone();
        for r in 0..k {
            for c in 0..k {
                fit.covariance[r * k + c] = old[perm[r] * k + perm[c]];
            }
        }
    }
    let tf = fit.value("tau_fast_ns");
    let ts = fit.value("tau_slow_ns");
    if (ts - tf).abs() < 0.1 * ts {
        fit.warnings
            .push("decay constants within 10%; components degenerate".into());
    }
    if fit.value("a_slow").abs() < 3.0 * fit.std_error("a_slow") {
        fit.warnings
            .push("slow amplitude consistent with zero; tau_slow unidentifiable".into());
    }
    Ok(fit)
}

/// Weighted linear regression of the exciton wavelength on the swept bias.
/// Derives the zero-detuning crossing bias `v_res_v` (from the detuning
/// column) and the wavelength at that bias.
pub fn fit_stark(table: &SweepTable) -> Result<FitResult, FitError> {
    if table.rows.len() < 2 {
        return Err(FitError::TooFewPoints {
            need: 2,
            got: table.rows.len(),
            params: 2,
        });
    }
    let line = |p: &[f64], x: f64| p[0] * x + p[1];
    let lam_data: Vec<(f64, f64, f64)> = table
        .rows
        .iter()
        .map(|r| (r.v, r.lambda_x_nm, 1.0))
        .collect();
    let v0 = table.rows[0].v;
    let dv = table.rows.last().unwrap().v - v0;
    let slope0 = if dv != 0.0 {
        (table.rows.last().unwrap().lambda_x_nm - table.rows[0].lambda_x_nm) / dv
    } else {
        0.0
    };
    let mut fit = least_squares(
        line,
        &lam_data,
        &[slope0, table.rows[0].lambda_x_nm - slope0 * v0],
        &["slope_nm_per_v", "intercept_nm"],
    )?;

    // Crossing bias from the detuning column (linear when the mode is
    // fixed during the sweep).
    let det_data: Vec<(f64, f64, f64)> =
        table.rows.iter().map(|r| (r.v, r.detuning_nm, 1.0)).collect();
    let det_fit = least_squares(line, &det_data, &[slope0, 0.0], &["a", "b"])?;
    let a = det_fit.value("a");
    let b = det_fit.value("b");
    if a.abs() > 1e-12 {
        let v_res = -b / a;
        let vaa = det_fit.covariance[0];
        let vab = det_fit.covariance[1];
        let vbb = det_fit.covariance[3];
        let da = b / (a * a);
        let db = -1.0 / a;
        let var = da * da * vaa + db * db * vbb + 2.0 * da * db * vab;
        fit.derived.push(Param {
            name: "v_res_v".into(),
            value: v_res,
            std_error: var.max(0.0).sqrt(),
        });
        let s = fit.value("slope_nm_per_v");
        let i = fit.value("intercept_nm");
        let vss = fit.covariance[0];
        let vsi = fit.covariance[1];
        let vii = fit.covariance[3];
        let var_lam = v_res * v_res * vss + vii + 2.0 * v_res * vsi;
        fit.derived.push(Param {
            name: "lambda_at_v_res_nm".into(),
            value: s * v_res + i,
            std_error: var_lam.max(0.0).sqrt(),
        });
    } else {
        fit.warnings
            .push("detuning does not depend on bias; crossing undetermined".into());
    }
    Ok(fit)
}
