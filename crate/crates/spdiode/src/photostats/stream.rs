//! Emission-stream generation: the pumped two-level renewal process and
//! Poissonian background mixing.

use rand_distr::{Distribution, Exp};

use super::{rng_for, salt, EmitterRates, TimeTagStream};

/// Simulate the CW-pumped two-level emitter over `duration_ps`.
///
/// The process alternates an exponential ground-state refill wait (rate
/// `pump_per_ns`) and an exponential excited-state decay wait (rate
/// `decay_per_ns`); each decay instant is one emitted photon. Zero rates
/// give an empty stream. The ideal correlation of this process is
/// `g2(tau) = 1 - exp(-(r_p + gamma)|tau|)`.
pub fn emit_stream(rates: &EmitterRates, duration_ps: i64, seed: u64) -> TimeTagStream {
    let mut tags = Vec::new();
    if rates.pump_per_ns > 0.0 && rates.decay_per_ns > 0.0 && duration_ps > 0 {
        let mut rng = rng_for(seed, salt::EMIT);
        let refill = Exp::new(rates.pump_per_ns).expect("positive pump rate");
        let decay = Exp::new(rates.decay_per_ns).expect("positive decay rate");
        let duration_ns = duration_ps as f64 * 1e-3;
        let expected = rates.emission_rate_per_ns() * duration_ns;
        tags.reserve(expected as usize + 4 * (expected.sqrt() as usize) + 16);
        let mut t_ns = 0.0_f64;
        loop {
            t_ns += refill.sample(&mut rng);
            t_ns += decay.sample(&mut rng);
            if t_ns > duration_ns {
                break;
            }
            tags.push((t_ns * 1e3).round() as i64);
        }
    }
    TimeTagStream::from_unsorted(0, duration_ps, tags)
}

/// Merge an independent Poisson background into a signal stream.
///
/// The background rate is chosen so that background counts make up
/// `rates.background_fraction` of the total in expectation (based on the
/// theoretical signal rate, so pass the same `rates` the stream was
/// generated with).
pub fn mix_background(
    stream: &TimeTagStream,
    rates: &EmitterRates,
    duration_ps: i64,
    seed: u64,
) -> TimeTagStream {
    let rho = rates.background_fraction;
    assert!((0.0..1.0).contains(&rho), "background fraction must be in [0, 1)");
    let signal_rate = rates.emission_rate_per_ns();
    if rho == 0.0 || signal_rate == 0.0 {
        return stream.clone();
    }
    let bg_rate_per_ns = signal_rate * rho / (1.0 - rho);
    let mut rng = rng_for(seed, salt::BACKGROUND);
    let gap = Exp::new(bg_rate_per_ns).expect("positive background rate");
    let duration_ns = duration_ps as f64 * 1e-3;
    let mut merged = stream.timestamps.clone();
    let mut t_ns = gap.sample(&mut rng);
    while t_ns <= duration_ns {
        merged.push((t_ns * 1e3).round() as i64);
        t_ns += gap.sample(&mut rng);
    }
    TimeTagStream::from_unsorted(stream.channel, duration_ps, merged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const RATES: EmitterRates = EmitterRates {
        pump_per_ns: 0.05,
        decay_per_ns: 2.330952380952381,
        background_fraction: 0.0,
    };

    #[test]
    fn zero_pump_gives_empty_stream() {
        let r = EmitterRates {
            pump_per_ns: 0.0,
            decay_per_ns: 2.0,
            background_fraction: 0.0,
        };
        assert!(emit_stream(&r, 1_000_000, 1).is_empty());
        let r2 = EmitterRates {
            pump_per_ns: 1.0,
            decay_per_ns: 0.0,
            background_fraction: 0.0,
        };
        assert!(emit_stream(&r2, 1_000_000, 1).is_empty());
    }

    #[test]
    fn same_seed_is_bit_identical_and_seeds_differ() {
        let a = emit_stream(&RATES, 50_000_000, 7);
        let b = emit_stream(&RATES, 50_000_000, 7);
        assert_eq!(a, b);
        let c = emit_stream(&RATES, 50_000_000, 8);
        assert_ne!(a.timestamps, c.timestamps);
    }

    #[test]
    fn mean_gap_matches_renewal_theory() {
        // Mean inter-photon gap is 1/r_p + 1/gamma; check to 3 sigma over
        // ~1e6 events.
        let duration_ps = 21_000_000_000; // ~1e6 events at 20.43 ns/event
        let s = emit_stream(&RATES, duration_ps, 42);
        let n = s.len();
        assert!(n > 900_000, "got {n} events");
        let mean_gap_ps = (s.timestamps[n - 1] - s.timestamps[0]) as f64 / (n - 1) as f64;
        let expected_ns = 1.0 / RATES.pump_per_ns + 1.0 / RATES.decay_per_ns;
        let var_ns2 = 1.0 / (RATES.pump_per_ns * RATES.pump_per_ns)
            + 1.0 / (RATES.decay_per_ns * RATES.decay_per_ns);
        let sigma_mean_ns = (var_ns2 / (n - 1) as f64).sqrt();
        assert!(
            (mean_gap_ps * 1e-3 - expected_ns).abs() < 3.0 * sigma_mean_ns,
            "mean gap {} ns vs {} +- {}",
            mean_gap_ps * 1e-3,
            expected_ns,
            3.0 * sigma_mean_ns
        );
    }

    #[test]
    fn zero_background_returns_identical_stream() {
        let s = emit_stream(&RATES, 10_000_000, 3);
        let m = mix_background(&s, &RATES, 10_000_000, 3);
        assert_eq!(s, m);
    }

    #[test]
    fn background_fraction_matches_request() {
        let mut rates = RATES;
        rates.background_fraction = 0.16;
        let duration_ps = 21_000_000_000;
        let s = emit_stream(&rates, duration_ps, 11);
        let m = mix_background(&s, &rates, duration_ps, 11);
        let added = m.len() - s.len();
        let frac = added as f64 / m.len() as f64;
        // Binomial-ish spread on ~1e6 totals is ~4e-4; allow 3 sigma.
        let sigma = (0.16_f64 * 0.84 / m.len() as f64).sqrt() * 2.0;
        assert_relative_eq!(frac, 0.16, epsilon = 3.0 * sigma);
    }
}
