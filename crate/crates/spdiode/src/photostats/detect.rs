//! HBT detection chain: 50/50 splitter, detection efficiency, Gaussian
//! timing jitter, per-channel dead time and dark counts.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

use super::{rng_for, salt, TimeTagStream};
use crate::config::DetectorParams;

const FWHM_TO_SIGMA: f64 = 2.354_820_045_030_949_3; // 2 sqrt(2 ln 2)

/// Jitter width as a Gaussian sigma in ps, honouring the FWHM/sigma
/// interpretation flag.
pub fn jitter_sigma_ps(det: &DetectorParams) -> f64 {
    if det.jitter_is_sigma {
        det.jitter_fwhm_ps
    } else {
        det.jitter_fwhm_ps / FWHM_TO_SIGMA
    }
}

/// Remove every tag that follows its predecessor by less than `dead_ps`.
/// The first tag always survives; tags are assumed sorted.
pub fn apply_dead_time(stream: &TimeTagStream, dead_ps: i64) -> TimeTagStream {
    if dead_ps <= 0 {
        return stream.clone();
    }
    let mut kept = Vec::with_capacity(stream.len());
    let mut last = i64::MIN / 2;
    for &t in &stream.timestamps {
        if t - last >= dead_ps {
            kept.push(t);
            last = t;
        }
    }
    TimeTagStream {
        channel: stream.channel,
        duration_ps: stream.duration_ps,
        timestamps: kept,
    }
}

/// Poisson dark counts on one channel over `[0, duration_ps]`.
pub fn dark_counts(channel: u8, duration_ps: i64, rate_per_ps: f64, seed: u64, salt_value: u64) -> TimeTagStream {
    let mut tags = Vec::new();
    if rate_per_ps > 0.0 && duration_ps > 0 {
        let mut rng = rng_for(seed, salt_value);
        let gap = Exp::new(rate_per_ps).expect("positive dark rate");
        let mut t = gap.sample(&mut rng);
        while t <= duration_ps as f64 {
            tags.push(t.round() as i64);
            t += gap.sample(&mut rng);
        }
    }
    TimeTagStream::from_unsorted(channel, duration_ps, tags)
}

/// Merge two sorted streams on the same channel.
pub fn merge_streams(a: &TimeTagStream, b: &TimeTagStream) -> TimeTagStream {
    let mut merged = Vec::with_capacity(a.len() + b.len());
    merged.extend_from_slice(&a.timestamps);
    merged.extend_from_slice(&b.timestamps);
    TimeTagStream::from_unsorted(a.channel, a.duration_ps.max(b.duration_ps), merged)
}

/// Run the emission stream through the HBT chain and return the two
/// detector channels.
///
/// Per photon: independent fair channel choice, Bernoulli(efficiency)
/// survival, Gaussian jitter. Then per channel: dead-time pruning followed
/// by merging of Poisson dark counts.
pub fn detect_hbt(
    stream: &TimeTagStream,
    det: &DetectorParams,
    seed: u64,
) -> (TimeTagStream, TimeTagStream) {
    let sigma = jitter_sigma_ps(det);
    let normal = if sigma > 0.0 {
        Some(Normal::new(0.0, sigma).expect("valid jitter sigma"))
    } else {
        None
    };
    let mut rng = rng_for(seed, salt::DETECT);
    let mut raw: [Vec<i64>; 2] = [Vec::new(), Vec::new()];
    for &t in &stream.timestamps {
        let channel = usize::from(rng.random::<bool>());
        let survives = rng.random::<f64>() < det.efficiency;
        if !survives {
            continue;
        }
        let t_out = match &normal {
            Some(n) => (t as f64 + n.sample(&mut rng)).round() as i64,
            None => t,
        };
        raw[channel].push(t_out);
    }
    let dead_ps = (det.dead_time_ns * 1e3).round() as i64;
    let dark_rate_per_ps = det.dark_rate_hz * 1e-12;
    let finish = |tags: Vec<i64>, channel: u8, dark_salt: u64| {
        let jittered = TimeTagStream::from_unsorted(channel, stream.duration_ps, tags);
        let pruned = apply_dead_time(&jittered, dead_ps);
        let darks = dark_counts(channel, stream.duration_ps, dark_rate_per_ps, seed, dark_salt);
        merge_streams(&pruned, &darks)
    };
    let [tags_a, tags_b] = raw;
    (
        finish(tags_a, 0, salt::DARKS_A),
        finish(tags_b, 1, salt::DARKS_B),
    )
}
