//! Forward synthesis of EL spectra and the two voltage-sweep tables, with
//! optional Poisson shot noise.

use std::io::Write;

use rand_distr::{Distribution, Poisson};
use serde::Serialize;
use thiserror::Error;

use crate::actuator::{drive_state, equilibrium_gap, PullInError};
use crate::config::{DeviceParams, DriveState};
use crate::emitter::{el_enhancement, exciton_wavelength};
use crate::optics::mode_pair;
use crate::photostats::{self, salt};
use crate::textio::fmt9;

/// Wavelength grid for spectral synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WavelengthGrid {
    pub min_nm: f64,
    pub max_nm: f64,
    pub step_nm: f64,
}

/// One synthesized spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub wavelengths_nm: Vec<f64>,
    /// Counts per second per grid point.
    pub intensities: Vec<f64>,
    pub drive: DriveState,
}

/// One row of a voltage sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub v: f64,
    pub lambda_s_nm: f64,
    pub lambda_as_nm: f64,
    pub lambda_x_nm: f64,
    /// Exciton detuning from the S mode.
    pub detuning_nm: f64,
    pub peak_s: f64,
    pub peak_as: f64,
    pub peak_x: f64,
}

/// Sweep rows ordered by the swept voltage, one per requested value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("bad wavelength grid: {0}")]
    BadGrid(String),
    #[error("empty voltage list")]
    EmptyVoltages,
    #[error(transparent)]
    PullIn(#[from] PullInError),
}

fn lorentzian(x: f64, center: f64, fwhm: f64) -> f64 {
    let t = 2.0 * (x - center) / fwhm;
    1.0 / (1.0 + t * t)
}

/// Model row at one drive point: mode positions, exciton line and peak
/// intensities (EL peaks are dark below the injection threshold).
pub fn sweep_row(p: &DeviceParams, v_cav: f64, v_qd: f64) -> Result<SweepRow, PullInError> {
    let drive = drive_state(p, v_cav, v_qd);
    let gap = equilibrium_gap(p, v_cav)?.gap_nm;
    let mp = mode_pair(p, gap, drive.i_qd_ma);
    let lambda_x = exciton_wavelength(p, v_qd);
    let detuning = lambda_x - mp.lambda_s_nm;
    let scale = p.spectra.scale_counts_per_s;
    let on = drive.i_qd_ma > 0.0;
    let (peak_s, peak_as, peak_x) = if on {
        (
            p.spectra.mode_amplitude * scale,
            p.spectra.mode_amplitude * scale,
            p.spectra.exciton_amplitude * el_enhancement(p, detuning, mp.lambda_s_nm) * scale,
        )
    } else {
        (0.0, 0.0, 0.0)
    };
    Ok(SweepRow {
        v: v_cav,
        lambda_s_nm: mp.lambda_s_nm,
        lambda_as_nm: mp.lambda_as_nm,
        lambda_x_nm: lambda_x,
        detuning_nm: detuning,
        peak_s,
        peak_as,
        peak_x,
    })
}

/// Synthesize one EL spectrum: Lorentzian S/AS mode peaks, configured
/// band-edge lines riding the AS mode, Stark-tuned exciton lines weighted
/// by the cavity enhancement, and a flat background. A seed applies
/// per-bin Poisson shot noise; `None` is noiseless and bit-deterministic.
pub fn synthesize(
    p: &DeviceParams,
    drive: &DriveState,
    grid: WavelengthGrid,
    seed: Option<u64>,
) -> Result<Spectrum, SpectraError> {
    if !(grid.step_nm > 0.0) || grid.max_nm <= grid.min_nm {
        return Err(SpectraError::BadGrid(format!(
            "need min < max and step > 0 (got {} .. {} step {})",
            grid.min_nm, grid.max_nm, grid.step_nm
        )));
    }
    let gap = equilibrium_gap(p, drive.v_cav)?.gap_nm;
    let mp = mode_pair(p, gap, drive.i_qd_ma);
    let sp = &p.spectra;
    let scale = sp.scale_counts_per_s;

    // (center, fwhm, amplitude) of every line in the spectrum.
    let mut peaks: Vec<(f64, f64, f64)> = Vec::new();
    if drive.i_qd_ma > 0.0 {
        peaks.push((mp.lambda_s_nm, mp.fwhm_s_nm, sp.mode_amplitude * scale));
        peaks.push((mp.lambda_as_nm, mp.fwhm_as_nm, sp.mode_amplitude * scale));
        for be in &sp.band_edge_modes {
            let center = mp.lambda_as_nm + be.offset_nm;
            peaks.push((center, center / p.optics.q, be.amplitude * sp.mode_amplitude * scale));
        }
        let lambda_x = exciton_wavelength(p, drive.v_qd);
        let enh = el_enhancement(p, lambda_x - mp.lambda_s_nm, mp.lambda_s_nm);
        peaks.push((lambda_x, sp.exciton_fwhm_nm, sp.exciton_amplitude * enh * scale));
        for line in &sp.extra_lines {
            let lam = line.lambda_at_vres_nm
                + line.stark_slope_nm_per_v * (drive.v_qd - p.emitter.v_res_mv / 1000.0);
            let e = el_enhancement(p, lam - mp.lambda_s_nm, mp.lambda_s_nm);
            peaks.push((lam, sp.exciton_fwhm_nm, line.amplitude * e * scale));
        }
    }

    let n = ((grid.max_nm - grid.min_nm) / grid.step_nm).floor() as usize + 1;
    let mut wavelengths = Vec::with_capacity(n);
    let mut intensities = Vec::with_capacity(n);
    for i in 0..n {
        let x = grid.min_nm + grid.step_nm * i as f64;
        let mut y = sp.background * scale;
        for &(c, w, a) in &peaks {
            y += a * lorentzian(x, c, w);
        }
        wavelengths.push(x);
        intensities.push(y);
    }
    if let Some(seed) = seed {
        let mut rng = photostats::rng_for(seed, salt::SHOT_NOISE);
        for y in intensities.iter_mut() {
            if *y > 0.0 {
                *y = Poisson::new(*y).expect("positive mean").sample(&mut rng);
            }
        }
    }
    Ok(Spectrum {
        wavelengths_nm: wavelengths,
        intensities,
        drive: *drive,
    })
}

/// Sweep the cavity voltage at fixed QD bias. Errors on pull-in anywhere in
/// the list; callers that want per-row flagging should call [`sweep_row`]
/// voltage by voltage.
pub fn sweep_cavity(
    p: &DeviceParams,
    v_cav_list: &[f64],
    v_qd: f64,
) -> Result<SweepTable, SpectraError> {
    if v_cav_list.is_empty() {
        return Err(SpectraError::EmptyVoltages);
    }
    let rows = v_cav_list
        .iter()
        .map(|&v| sweep_row(p, v, v_qd))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepTable { rows })
}

/// Sweep the QD bias at fixed cavity voltage; the swept voltage is stored
/// in each row's `v` field.
pub fn sweep_qd(
    p: &DeviceParams,
    v_qd_list: &[f64],
    v_cav: f64,
) -> Result<SweepTable, SpectraError> {
    if v_qd_list.is_empty() {
        return Err(SpectraError::EmptyVoltages);
    }
    let rows = v_qd_list
        .iter()
        .map(|&vq| {
            sweep_row(p, v_cav, vq).map(|mut r| {
                r.v = vq;
                r
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepTable { rows })
}

impl SweepTable {
    /// `(V, lambda_S, lambda_AS)` triples for the tuning decomposition.
    pub fn tuning_rows(&self) -> Vec<(f64, f64, f64)> {
        self.rows
            .iter()
            .map(|r| (r.v, r.lambda_s_nm, r.lambda_as_nm))
            .collect()
    }

    /// CSV with the header `V,lambda_S_nm,lambda_AS_nm,lambda_X_nm,detuning_nm`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "V,lambda_S_nm,lambda_AS_nm,lambda_X_nm,detuning_nm")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt9(r.v),
                fmt9(r.lambda_s_nm),
                fmt9(r.lambda_as_nm),
                fmt9(r.lambda_x_nm),
                fmt9(r.detuning_nm)
            )?;
        }
        Ok(())
    }
}

impl Spectrum {
    /// CSV with the header `wavelength_nm,intensity`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "wavelength_nm,intensity")?;
        for (x, y) in self.wavelengths_nm.iter().zip(&self.intensities) {
            writeln!(w, "{},{}", fmt9(*x), fmt9(*y))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DeviceParams;
    use crate::optics::decompose_tuning;
    use approx::assert_relative_eq;

    fn vgrid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn synthesized_peaks_sit_at_the_sweep_endpoints() {
        let p = DeviceParams::paper_device();
        let drive = crate::actuator::drive_state(&p, 2.3, 3.5);
        let grid = WavelengthGrid {
            min_nm: 1180.0,
            max_nm: 1270.0,
            step_nm: 0.01,
        };
        let s = synthesize(&p, &drive, grid, None).unwrap();
        // Local maxima nearest to the expected mode positions.
        for expected in [1205.1, 1242.3] {
            let peak = s
                .wavelengths_nm
                .iter()
                .zip(&s.intensities)
                .filter(|(x, _)| (**x - expected).abs() < 2.0)
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(x, _)| *x)
                .unwrap();
            assert!(
                (peak - expected).abs() < 0.05,
                "peak at {peak}, expected {expected}"
            );
        }
    }

    #[test]
    fn noiseless_synthesis_is_bit_deterministic() {
        let p = DeviceParams::paper_device();
        let drive = crate::actuator::drive_state(&p, 2.2, 1.63);
        let grid = WavelengthGrid {
            min_nm: 1240.0,
            max_nm: 1245.0,
            step_nm: 0.005,
        };
        let a = synthesize(&p, &drive, grid, None).unwrap();
        let b = synthesize(&p, &drive, grid, None).unwrap();
        assert_eq!(a, b);
        let c = synthesize(&p, &drive, grid, Some(1)).unwrap();
        let d = synthesize(&p, &drive, grid, Some(1)).unwrap();
        assert_eq!(c, d);
        assert_ne!(a, c);
    }

    #[test]
    fn exciton_amplitude_contrast_on_vs_off_resonance() {
        let p = DeviceParams::paper_device();
        let grid = WavelengthGrid {
            min_nm: 1235.0,
            max_nm: 1250.0,
            step_nm: 0.005,
        };
        let v_on = 1.630;
        let v_off = 1.630 - 0.65 / 4.0; // 0.65 nm detuned at -4 nm/V
        let peak_x = |v_qd: f64| {
            let drive = crate::actuator::drive_state(&p, 2.2, v_qd);
            let s = synthesize(&p, &drive, grid, None).unwrap();
            let lam_x = crate::emitter::exciton_wavelength(&p, v_qd);
            // Sample at the exciton line centre, background-subtracted by a
            // far point.
            let at = |target: f64| {
                s.wavelengths_nm
                    .iter()
                    .zip(&s.intensities)
                    .min_by(|a, b| {
                        (a.0 - target)
                            .abs()
                            .partial_cmp(&(b.0 - target).abs())
                            .unwrap()
                    })
                    .map(|(_, y)| *y)
                    .unwrap()
            };
            at(lam_x)
        };
        // The mode peak under the on-resonance exciton contributes too, so
        // compare after subtracting the mode-only spectrum.
        let drive_on = crate::actuator::drive_state(&p, 2.2, v_on);
        let drive_off = crate::actuator::drive_state(&p, 2.2, v_off);
        let mut bare = p.clone();
        bare.spectra.exciton_amplitude = 0.0;
        let mode_on = synthesize(&bare, &drive_on, grid, None).unwrap();
        let mode_off = synthesize(&bare, &drive_off, grid, None).unwrap();
        let lam_on = crate::emitter::exciton_wavelength(&p, v_on);
        let lam_off = crate::emitter::exciton_wavelength(&p, v_off);
        let idx = |s: &Spectrum, target: f64| {
            s.wavelengths_nm
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    (a.1 - target)
                        .abs()
                        .partial_cmp(&(b.1 - target).abs())
                        .unwrap()
                })
                .map(|(i, _)| i)
                .unwrap()
        };
        let on = peak_x(v_on) - mode_on.intensities[idx(&mode_on, lam_on)];
        let off = peak_x(v_off) - mode_off.intensities[idx(&mode_off, lam_off)];
        assert_relative_eq!(on / off, 9.7, epsilon = 0.3);
    }

    #[test]
    fn lorentzian_quadrature_sanity() {
        // Integrated grid intensity of an isolated peak matches
        // (pi/2) * amplitude * fwhm / step within 1%.
        let mut p = DeviceParams::paper_device();
        p.spectra.background = 0.0;
        p.spectra.exciton_amplitude = 0.0;
        p.spectra.mode_amplitude = 1.0;
        let drive = crate::actuator::drive_state(&p, 2.3, 3.5);
        let grid = WavelengthGrid {
            min_nm: 1150.0,
            max_nm: 1300.0,
            step_nm: 0.002,
        };
        let s = synthesize(&p, &drive, grid, None).unwrap();
        let total: f64 = s.intensities.iter().sum();
        let scale = p.spectra.scale_counts_per_s;
        let fwhm_s = 1242.3 / p.optics.q;
        let fwhm_as = 1205.1 / p.optics.q;
        let expected = std::f64::consts::FRAC_PI_2 * scale * (fwhm_s + fwhm_as) / grid.step_nm;
        assert_relative_eq!(total, expected, max_relative = 0.01);
    }

    #[test]
    fn shot_noise_is_unbiased() {
        let p = DeviceParams::paper_device();
        let drive = crate::actuator::drive_state(&p, 2.2, 1.63);
        let grid = WavelengthGrid {
            min_nm: 1242.0,
            max_nm: 1242.5,
            step_nm: 0.01,
        };
        let clean = synthesize(&p, &drive, grid, None).unwrap();
        let n_seeds = 100;
        let mut sums = vec![0.0; clean.intensities.len()];
        for seed in 0..n_seeds {
            let noisy = synthesize(&p, &drive, grid, Some(seed)).unwrap();
            for (s, y) in sums.iter_mut().zip(&noisy.intensities) {
                *s += y;
            }
        }
        for (i, (&mean_sum, &mu)) in sums.iter().zip(&clean.intensities).enumerate() {
            let mean = mean_sum / n_seeds as f64;
            let sigma_mean = (mu / n_seeds as f64).sqrt();
            assert!(
                (mean - mu).abs() < 3.5 * sigma_mean,
                "bin {i}: mean {mean} vs {mu} +- {sigma_mean}"
            );
        }
    }

    #[test]
    fn cavity_sweep_endpoints_and_monotonicity() {
        let p = DeviceParams::paper_device();
        let table = sweep_cavity(&p, &vgrid(2.3, -1.0, 34), 3.5).unwrap();
        let first = table.rows.first().unwrap();
        let last = table.rows.last().unwrap();
        assert_relative_eq!(first.lambda_as_nm, 1205.1, epsilon = 0.05);
        assert_relative_eq!(first.lambda_s_nm, 1242.3, epsilon = 0.05);
        assert_relative_eq!(last.lambda_as_nm, 1186.5, epsilon = 0.05);
        assert_relative_eq!(last.lambda_s_nm, 1257.7, epsilon = 0.05);
        // AS blue-shifts strictly everywhere: thermal and mechanical parts
        // pull the same way. For S they compete near the zero-force end, so
        // the red shift is strict only once actuation dominates (below
        // ~1.85 V); above that the thermal dip stays under 0.15 nm.
        for w in table.rows.windows(2) {
            assert!(w[1].lambda_as_nm < w[0].lambda_as_nm, "AS blue-shifts as V decreases");
            if w[0].v < 1.85 {
                assert!(w[1].lambda_s_nm > w[0].lambda_s_nm, "S red-shifts as V decreases");
            } else {
                assert!(w[1].lambda_s_nm > w[0].lambda_s_nm - 0.15);
            }
        }
        let d = decompose_tuning(&table.tuning_rows()).unwrap();
        assert_relative_eq!(d.thermal_nm, 1.6, epsilon = 0.05);
        let single = sweep_cavity(&p, &[0.5], 3.5).unwrap();
        assert_eq!(single.rows.len(), 1);
    }

    #[test]
    fn qd_sweep_crossing_and_intensity_contrast() {
        let p = DeviceParams::paper_device();
        let table = sweep_qd(&p, &vgrid(1.25, 2.0, 151), 2.2).unwrap();
        // Detuning changes sign exactly once, near 1.63 V.
        let signs: Vec<bool> = table.rows.iter().map(|r| r.detuning_nm > 0.0).collect();
        let flips = signs.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(flips, 1);
        let crossing = table
            .rows
            .iter()
            .min_by(|a, b| a.detuning_nm.abs().partial_cmp(&b.detuning_nm.abs()).unwrap())
            .unwrap();
        assert_relative_eq!(crossing.v, 1.630, epsilon = 0.005);
        // Peak exciton intensity at the crossing over the far-detuned level.
        let max_x = table.rows.iter().map(|r| r.peak_x).fold(0.0, f64::max);
        let min_x = table.rows.iter().map(|r| r.peak_x).fold(f64::INFINITY, f64::min);
        assert_relative_eq!(max_x / min_x, p.emitter.enh_max, max_relative = 0.05);
        // A sweep entirely above the crossing has no sign change.
        let above = sweep_qd(&p, &vgrid(1.7, 2.0, 31), 2.2).unwrap();
        assert!(above.rows.iter().all(|r| r.detuning_nm < 0.0));
    }

    #[test]
    fn sweep_tables_are_pure_functions_of_inputs() {
        let p = DeviceParams::paper_device();
        let vs = vgrid(2.3, -1.0, 12);
        assert_eq!(sweep_cavity(&p, &vs, 3.5).unwrap(), sweep_cavity(&p, &vs, 3.5).unwrap());
    }

    #[test]
    fn pull_in_propagates_and_grid_is_validated() {
        let p = DeviceParams::paper_device();
        assert!(matches!(
            sweep_cavity(&p, &[2.3, -2.0], 3.5),
            Err(SpectraError::PullIn(_))
        ));
        let drive = crate::actuator::drive_state(&p, 2.3, 3.5);
        let bad = WavelengthGrid {
            min_nm: 1300.0,
            max_nm: 1200.0,
            step_nm: 0.01,
        };
        assert!(matches!(
            synthesize(&p, &drive, bad, None),
            Err(SpectraError::BadGrid(_))
        ));
        assert!(matches!(
            sweep_cavity(&p, &[], 3.5),
            Err(SpectraError::EmptyVoltages)
        ));
    }

    #[test]
    fn csv_headers_are_pinned() {
        let p = DeviceParams::paper_device();
        let table = sweep_cavity(&p, &[2.3, 0.0], 3.5).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("V,lambda_S_nm,lambda_AS_nm,lambda_X_nm,detuning_nm\n"));
        let drive = crate::actuator::drive_state(&p, 2.3, 3.5);
        let grid = WavelengthGrid {
            min_nm: 1200.0,
            max_nm: 1201.0,
            step_nm: 0.5,
        };
        let s = synthesize(&p, &drive, grid, None).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("wavelength_nm,intensity\n"));
    }
}
