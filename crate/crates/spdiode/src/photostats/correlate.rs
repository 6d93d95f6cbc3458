//! Coincidence counting and g2 normalization.
//!
//! Delays are binned by symmetric rounding, `k = round(delay/width)`, so a
//! histogram and its input-swapped mirror are bin-for-bin identical. With an
//! even bin width the zero bin is one picosecond narrower than the rest;
//! [`normalize_g2`] accounts for the true per-bin widths so a flat Poisson
//! floor normalizes to exactly one in expectation.

use serde::Serialize;

use super::TimeTagStream;

/// Raw coincidence histogram over delays `t_b - t_a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoincidenceHistogram {
    pub bin_width_ps: i64,
    /// Number of bins on each side of the zero bin; `2*half_bins + 1` total.
    pub half_bins: i64,
    /// Counts indexed by `bin + half_bins`.
    pub counts: Vec<u64>,
}

impl CoincidenceHistogram {
    fn new(bin_width_ps: i64, half_bins: i64) -> Self {
        CoincidenceHistogram {
            bin_width_ps,
            half_bins,
            counts: vec![0; (2 * half_bins + 1) as usize],
        }
    }

    /// Symmetric-rounding bin index for a delay: `round(delay / width)`
    /// with ties away from zero, so `bin(-d) == -bin(d)` exactly.
    pub fn bin_of(&self, delay_ps: i64) -> i64 {
        let w = self.bin_width_ps;
        let k = (2 * delay_ps.abs() + w) / (2 * w);
        if delay_ps < 0 {
            -k
        } else {
            k
        }
    }

    /// Largest |delay| that falls inside the outermost bin.
    pub fn max_delay_ps(&self) -> i64 {
        self.half_bins * self.bin_width_ps + (self.bin_width_ps - 1) / 2
    }

    /// Delay at the centre of bin index `i` (0-based).
    pub fn tau_center_ps(&self, i: usize) -> i64 {
        (i as i64 - self.half_bins) * self.bin_width_ps
    }

    pub fn tau_centers(&self) -> Vec<i64> {
        (0..self.counts.len()).map(|i| self.tau_center_ps(i)).collect()
    }

    /// True width of bin `i` in picoseconds: with an even bin width the
    /// zero bin covers one picosecond less than the others.
    pub fn bin_true_width_ps(&self, i: usize) -> i64 {
        if self.bin_width_ps % 2 == 0 && i as i64 == self.half_bins {
            self.bin_width_ps - 1
        } else {
            self.bin_width_ps
        }
    }

    fn record(&mut self, delay_ps: i64) {
        let k = self.bin_of(delay_ps);
        if k.abs() <= self.half_bins {
            self.counts[(k + self.half_bins) as usize] += 1;
        }
    }

    /// Bin-wise sum of two histograms on the same grid.
    pub fn merge_from(&mut self, other: &CoincidenceHistogram) {
        assert_eq!(self.bin_width_ps, other.bin_width_ps, "bin width mismatch");
        assert_eq!(self.half_bins, other.half_bins, "bin count mismatch");
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
    }

    /// The histogram with the delay axis reversed (swap of the two inputs).
    pub fn mirrored(&self) -> CoincidenceHistogram {
        let mut m = self.clone();
        m.counts.reverse();
        m
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Count all pair delays `t_b - t_a` out to (at least) `window_ps`, binned
/// at `bin_width_ps`. The histogram covers every full bin out to
/// `round(window/width)` on both sides.
pub fn correlate(
    a: &TimeTagStream,
    b: &TimeTagStream,
    bin_width_ps: i64,
    window_ps: i64,
) -> CoincidenceHistogram {
    assert!(bin_width_ps > 0, "bin width must be positive");
    assert!(window_ps >= bin_width_ps, "window must cover at least one bin");
    let half_bins = (2 * window_ps + bin_width_ps) / (2 * bin_width_ps);
    let mut hist = CoincidenceHistogram::new(bin_width_ps, half_bins);
    let reach = hist.max_delay_ps();
    let tb = &b.timestamps;
    let mut start = 0_usize;
    for &t in &a.timestamps {
        let lo = t - reach;
        let hi = t + reach;
        while start < tb.len() && tb[start] < lo {
            start += 1;
        }
        let mut j = start;
        while j < tb.len() && tb[j] <= hi {
            hist.record(tb[j] - t);
            j += 1;
        }
    }
    hist
}

/// Normalized correlation curve with per-bin Poisson uncertainties.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct G2Curve {
    pub tau_ps: Vec<i64>,
    pub g2: Vec<f64>,
    pub sigma: Vec<f64>,
    pub counts: Vec<u64>,
    pub bin_width_ps: i64,
}

/// Normalize a coincidence histogram by the accidental-coincidence level
/// `rate_a * rate_b * bin_width * duration` (rates in counts/ps, duration
/// in ps). Empty bins get a one-count sigma floor.
pub fn normalize_g2(
    hist: &CoincidenceHistogram,
    rate_a_per_ps: f64,
    rate_b_per_ps: f64,
    duration_ps: i64,
) -> G2Curve {
    assert!(rate_a_per_ps > 0.0 && rate_b_per_ps > 0.0, "rates must be positive");
    assert!(duration_ps > 0, "duration must be positive");
    let n = hist.counts.len();
    let mut g2 = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    for i in 0..n {
        let expected = rate_a_per_ps
            * rate_b_per_ps
            * hist.bin_true_width_ps(i) as f64
            * duration_ps as f64;
        let c = hist.counts[i] as f64;
        g2.push(c / expected);
        sigma.push(c.max(1.0).sqrt() / expected);
    }
    G2Curve {
        tau_ps: hist.tau_centers(),
        g2,
        sigma,
        counts: hist.counts.clone(),
        bin_width_ps: hist.bin_width_ps,
    }
}

/// Correlate two detector channels and normalize by their measured rates.
pub fn g2_from_streams(
    a: &TimeTagStream,
    b: &TimeTagStream,
    bin_width_ps: i64,
    window_ps: i64,
) -> (CoincidenceHistogram, G2Curve) {
    let hist = correlate(a, b, bin_width_ps, window_ps);
    let duration = a.duration_ps.max(b.duration_ps);
    let curve = normalize_g2(&hist, a.rate_per_ps(), b.rate_per_ps(), duration);
    (hist, curve)
}

/// Ideal correlation of the background-diluted two-level emitter:
/// `1 - purity_sq * exp(-lambda |tau|)` with `lambda` per ns and `tau` in ps.
/// This is the oracle the Monte Carlo chain is tested against.
pub fn analytic_g2(tau_ps: f64, purity_sq: f64, lambda_per_ns: f64) -> f64 {
    assert!((0.0..=1.0).contains(&purity_sq), "purity_sq must be in [0, 1]");
    1.0 - purity_sq * (-lambda_per_ns * tau_ps.abs() * 1e-3).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photostats::{emit_stream, EmitterRates, TimeTagStream};
    use approx::assert_relative_eq;

    fn poisson_stream(rate_per_ps: f64, duration_ps: i64, seed: u64, channel: u8) -> TimeTagStream {
        // Exponential gaps; reuse emit_stream with a fast refill so the
        // process is effectively Poisson? No: build directly for clarity.
        use rand_distr::{Distribution, Exp};
        let mut rng = crate::photostats::rng_for(seed, 0xF00D);
        let gap = Exp::new(rate_per_ps).unwrap();
        let mut tags = Vec::new();
        let mut t = gap.sample(&mut rng);
        while t <= duration_ps as f64 {
            tags.push(t.round() as i64);
            t += gap.sample(&mut rng);
        }
        TimeTagStream::from_unsorted(channel, duration_ps, tags)
    }

    #[test]
    fn identical_single_tag_streams_give_one_zero_count() {
        let a = TimeTagStream::from_unsorted(0, 1000, vec![500]);
        let b = TimeTagStream::from_unsorted(1, 1000, vec![500]);
        let h = correlate(&a, &b, 16, 5000);
        assert_eq!(h.total_counts(), 1);
        assert_eq!(h.counts[h.half_bins as usize], 1);
    }

    #[test]
    fn mirror_symmetry_is_exact_including_edge_delays() {
        // Tags placed so some delays land exactly on half-bin edges.
        let a = TimeTagStream::from_unsorted(0, 100_000, vec![100, 5000, 20_008, 40_000]);
        let b = TimeTagStream::from_unsorted(1, 100_000, vec![108, 5016, 20_000, 40_024, 50_000]);
        let ab = correlate(&a, &b, 16, 2000);
        let ba = correlate(&b, &a, 16, 2000);
        assert_eq!(ab, ba.mirrored());
    }

    #[test]
    fn flat_poisson_pair_normalizes_to_one() {
        let duration = 400_000_000;
        let a = poisson_stream(5e-4, duration, 21, 0);
        let b = poisson_stream(5e-4, duration, 22, 1);
        let (h, curve) = g2_from_streams(&a, &b, 16, 5000);
        // Expected counts per full bin from the measured rates.
        let expect = a.rate_per_ps() * b.rate_per_ps() * 16.0 * duration as f64;
        assert!(expect > 1000.0);
        for (i, &c) in h.counts.iter().enumerate() {
            let e = expect * h.bin_true_width_ps(i) as f64 / 16.0;
            let z = (c as f64 - e) / e.sqrt();
            assert!(z.abs() < 4.5, "bin {i}: {c} vs {e} (z = {z})");
        }
        let mean_g2 = curve.g2.iter().sum::<f64>() / curve.g2.len() as f64;
        let sem = (1.0 / expect / curve.g2.len() as f64).sqrt();
        assert!((mean_g2 - 1.0).abs() < 4.0 * sem, "mean g2 {mean_g2}");
        // The zero bin must not be systematically low despite its
        // narrower true width.
        let mid = h.half_bins as usize;
        assert!((curve.g2[mid] - 1.0).abs() < 4.5 / expect.sqrt());
    }

    #[test]
    fn segmented_correlation_merges_exactly() {
        let duration = 50_000_000;
        let rates = EmitterRates {
            pump_per_ns: 0.05,
            decay_per_ns: 2.33,
            background_fraction: 0.0,
        };
        let s = emit_stream(&rates, duration, 5);
        let half = duration / 2;
        let third = duration / 3;
        let split = |s: &TimeTagStream, cuts: &[i64]| -> Vec<TimeTagStream> {
            let mut parts = Vec::new();
            let mut edges = vec![i64::MIN];
            edges.extend_from_slice(cuts);
            edges.push(i64::MAX);
            for w in edges.windows(2) {
                let tags: Vec<i64> = s
                    .timestamps
                    .iter()
                    .copied()
                    .filter(|&t| t > w[0] && t <= w[1])
                    .collect();
                parts.push(TimeTagStream {
                    channel: s.channel,
                    duration_ps: s.duration_ps,
                    timestamps: tags,
                });
            }
            parts
        };
        // Split both inputs into 3 segments; the full histogram equals the
        // bin-wise sum over all 9 segment pairs (cross-boundary pairs live
        // in the off-diagonal terms).
        let a = split(&s, &[third, 2 * third]);
        let b_stream = emit_stream(&rates, duration, 6);
        let b = split(&b_stream, &[half, half + third]);
        let whole = correlate(&s, &b_stream, 16, 5000);
        let mut summed = correlate(&a[0], &b[0], 16, 5000);
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                if i == 0 && j == 0 {
                    continue;
                }
                summed.merge_from(&correlate(ai, bj, 16, 5000));
            }
        }
        assert_eq!(whole, summed);
    }

    #[test]
    fn analytic_g2_limits() {
        assert_eq!(analytic_g2(0.0, 1.0, 2.0), 0.0);
        assert!(analytic_g2(1e9, 1.0, 2.0) > 0.999999);
        assert_relative_eq!(
            analytic_g2(0.0, (1.0_f64 - 0.16).powi(2), 1.0),
            0.2944,
            epsilon = 1e-12
        );
    }

    #[test]
    fn doubling_duration_halves_relative_sigma() {
        let duration = 100_000_000;
        let a1 = poisson_stream(5e-4, duration, 31, 0);
        let b1 = poisson_stream(5e-4, duration, 32, 1);
        let a2 = poisson_stream(5e-4, 2 * duration, 33, 0);
        let b2 = poisson_stream(5e-4, 2 * duration, 34, 1);
        let (_, c1) = g2_from_streams(&a1, &b1, 16, 5000);
        let (_, c2) = g2_from_streams(&a2, &b2, 16, 5000);
        let rel1 = c1.sigma[10] / c1.g2[10];
        let rel2 = c2.sigma[10] / c2.g2[10];
        assert_relative_eq!(rel1 / rel2, 2f64.sqrt(), epsilon = 0.25);
    }

    #[test]
    fn empty_bins_get_a_sigma_floor() {
        let a = TimeTagStream::from_unsorted(0, 1_000_000, vec![1000]);
        let b = TimeTagStream::from_unsorted(1, 1_000_000, vec![900_000]);
        let h = correlate(&a, &b, 16, 5000);
        let c = normalize_g2(&h, 1e-6, 1e-6, 1_000_000);
        assert!(c.sigma.iter().all(|&s| s > 0.0));
        assert!(c.g2.iter().all(|&g| g >= 0.0));
    }

    #[test]
    fn binning_is_symmetric_and_covers_the_window() {
        let h = CoincidenceHistogram::new(16, 313);
        for d in [-5015, -5000, -8, -7, 0, 7, 8, 5000, 5015] {
            assert_eq!(h.bin_of(d), -h.bin_of(-d));
        }
        assert_eq!(h.bin_of(7), 0);
        assert_eq!(h.bin_of(8), 1);
        assert_eq!(h.bin_of(23), 1);
        assert_eq!(h.bin_of(24), 2);
        assert_eq!(h.max_delay_ps(), 313 * 16 + 7);
        // Odd widths have uniform bins.
        let ho = CoincidenceHistogram::new(15, 10);
        assert_eq!(ho.bin_true_width_ps(10), 15);
        assert_eq!(ho.bin_of(7), 0);
        assert_eq!(ho.bin_of(8), 1);
    }
}
