//! Pulsed time-resolved decay traces from a bright/dark three-level model.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::Serialize;

use super::{rng_for, salt};
use crate::config::DeviceParams;
use crate::emitter::{bulk_decay_rate, tunneling_rate};

/// Histogram of photon arrival delays after the excitation pulse.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayTrace {
    pub bin_width_ps: i64,
    /// Left edge of the first bin.
    pub start_ps: i64,
    pub counts: Vec<u64>,
    pub n_pulses: u64,
}

impl DecayTrace {
    pub fn bin_center_ps(&self, i: usize) -> f64 {
        self.start_ps as f64 + (i as f64 + 0.5) * self.bin_width_ps as f64
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Simulate `n_pulses` excitation cycles of the dot ensemble in a bulk
/// region at bias `v_qd` and histogram the photon delays.
///
/// Per pulse the exciton is created dark with probability
/// `emitter.dark_fraction`. A bright exciton decays at the bulk rate
/// (radiative plus tunneling) and emits a photon with the radiative branch
/// probability. A dark exciton first has to flip to the bright state
/// (against tunneling escape) before it can emit, which produces the slow
/// tail. Delays are blurred by a Gaussian instrument response of FWHM
/// `irf_fwhm_ps`. Bin width comes from `correlator.bin_width_ps`.
pub fn decay_trace(
    p: &DeviceParams,
    v_qd: f64,
    n_pulses: u64,
    irf_fwhm_ps: f64,
    seed: u64,
) -> DecayTrace {
    assert!(n_pulses > 0, "need at least one pulse");
    assert!(irf_fwhm_ps >= 0.0, "IRF width must be nonnegative");
    let gamma_fast = bulk_decay_rate(p, v_qd); // per ns
    let gamma_rad = 1.0 / p.emitter.tau_bulk_ns;
    let p_rad = gamma_rad / gamma_fast;
    let dark_fraction = p.emitter.dark_fraction;
    let gamma_repop = p.emitter.dark_repop_rate_per_ns;
    let gamma_slow_exit = gamma_repop + tunneling_rate(p, v_qd);
    let p_repop = if gamma_slow_exit > 0.0 {
        gamma_repop / gamma_slow_exit
    } else {
        0.0
    };

    let sigma_ps = irf_fwhm_ps / (2.0 * (2.0 * 2f64.ln()).sqrt());
    let tau_fast_ns = 1.0 / gamma_fast;
    let tau_slow_ns = if dark_fraction > 0.0 && gamma_slow_exit > 0.0 {
        1.0 / gamma_slow_exit
    } else {
        tau_fast_ns
    };
    let bin = p.correlator.bin_width_ps;
    let start_ps = if sigma_ps > 0.0 {
        -((4.0 * sigma_ps / bin as f64).ceil() as i64) * bin
    } else {
        0
    };
    let end_ps = ((6.0 * tau_fast_ns.max(tau_slow_ns) * 1e3 / bin as f64).ceil() as i64) * bin;
    let n_bins = ((end_ps - start_ps) / bin) as usize;
    let mut counts = vec![0u64; n_bins];

    let mut rng = rng_for(seed, salt::TRACE);
    let fast = Exp::new(gamma_fast).expect("positive bulk rate");
    let slow = if gamma_slow_exit > 0.0 {
        Some(Exp::new(gamma_slow_exit).expect("positive exit rate"))
    } else {
        None
    };
    let irf = if sigma_ps > 0.0 {
        Some(Normal::new(0.0, sigma_ps).expect("valid IRF sigma"))
    } else {
        None
    };

    for _ in 0..n_pulses {
        let mut t_ns = 0.0_f64;
        if rng.random::<f64>() < dark_fraction {
            let Some(slow) = &slow else { continue };
            t_ns += slow.sample(&mut rng);
            if rng.random::<f64>() >= p_repop {
                continue; // escaped by tunneling, no photon
            }
        }
        t_ns += fast.sample(&mut rng);
        if rng.random::<f64>() >= p_rad {
            continue; // non-radiative
        }
        let mut t_ps = t_ns * 1e3;
        if let Some(irf) = &irf {
            t_ps += irf.sample(&mut rng);
        }
        let idx = ((t_ps - start_ps as f64) / bin as f64).floor();
        if idx >= 0.0 && (idx as usize) < n_bins {
            counts[idx as usize] += 1;
        }
    }
    DecayTrace {
        bin_width_ps: bin,
        start_ps,
        counts,
        n_pulses,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DeviceParams;

    #[test]
    fn trace_is_deterministic_per_seed() {
        let p = DeviceParams::paper_device();
        let a = decay_trace(&p, 1.5, 20_000, 90.0, 3);
        let b = decay_trace(&p, 1.5, 20_000, 90.0, 3);
        assert_eq!(a, b);
        let c = decay_trace(&p, 1.5, 20_000, 90.0, 4);
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn no_dark_branch_gives_mono_exponential_tail() {
        let mut p = DeviceParams::paper_device();
        p.emitter.dark_fraction = 0.0;
        let tr = decay_trace(&p, 1.5, 400_000, 0.0, 9);
        // Log-slope between 0.5 and 2.5 ns should match the bulk rate.
        let gamma = bulk_decay_rate(&p, 1.5);
        let y = |t_ns: f64| -> f64 {
            let i = ((t_ns * 1e3 - tr.start_ps as f64) / tr.bin_width_ps as f64) as usize;
            // Average 16 bins around the target for noise suppression.
            let lo = i.saturating_sub(8);
            let hi = (i + 8).min(tr.counts.len());
            tr.counts[lo..hi].iter().sum::<u64>() as f64 / (hi - lo) as f64
        };
        let measured = (y(0.5) / y(2.5)).ln() / 2.0;
        assert!(
            (measured - gamma).abs() / gamma < 0.05,
            "log-slope {measured} vs {gamma}"
        );
    }

    #[test]
    fn dark_branch_adds_a_slow_tail() {
        let p = DeviceParams::paper_device();
        let tr = decay_trace(&p, 1.5, 200_000, 90.0, 5);
        // With the dark branch on, counts persist far beyond 6 fast
        // lifetimes (8.7 ns).
        let far = ((12.0e3 - tr.start_ps as f64) / tr.bin_width_ps as f64) as usize;
        let tail: u64 = tr.counts[far..].iter().sum();
        assert!(tail > 100, "slow tail missing ({tail} counts)");
        let mut q = p.clone();
        q.emitter.dark_fraction = 0.0;
        let tr2 = decay_trace(&q, 1.5, 200_000, 90.0, 5);
        let far2 = ((12.0e3 - tr2.start_ps as f64) / tr2.bin_width_ps as f64) as usize;
        if far2 < tr2.counts.len() {
            let tail2: u64 = tr2.counts[far2..].iter().sum();
            assert!(tail2 < tail / 20);
        }
    }
}
