//! Stochastic photon engine: CW two-level emitter streams, Poissonian
//! background mixing, the HBT detection chain, coincidence correlation and
//! time-resolved decay traces.
//!
//! All operations are pure functions of their inputs and a `u64` seed;
//! identical seeds give bit-identical streams and histograms. Time is
//! integer picoseconds throughout, which keeps binning and stream merging
//! exact.

mod correlate;
mod detect;
mod io;
mod stream;
mod trace;

pub use correlate::{
    analytic_g2, correlate, g2_from_streams, normalize_g2, CoincidenceHistogram, G2Curve,
};
pub use detect::{apply_dead_time, dark_counts, detect_hbt, jitter_sigma_ps, merge_streams};
pub use io::{
    read_tags_bin, read_tags_csv, write_tags_bin, write_tags_csv, TagIoError, BIN_RECORD_BYTES,
};
pub use stream::{emit_stream, mix_background};
pub use trace::{decay_trace, DecayTrace};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

/// Rates of the pumped two-level emitter plus the detected background
/// fraction. Rates are per nanosecond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmitterRates {
    /// Ground-state refill (pump) rate `r_p`.
    pub pump_per_ns: f64,
    /// Excited-state decay rate `gamma`.
    pub decay_per_ns: f64,
    /// Fraction of detected counts contributed by the Poissonian
    /// background, `0 <= rho_b < 1`.
    pub background_fraction: f64,
}

impl EmitterRates {
    /// Mean emission rate of the renewal process, `1/(1/r_p + 1/gamma)`,
    /// per nanosecond. Zero if either rate is zero.
    pub fn emission_rate_per_ns(&self) -> f64 {
        if self.pump_per_ns <= 0.0 || self.decay_per_ns <= 0.0 {
            0.0
        } else {
            1.0 / (1.0 / self.pump_per_ns + 1.0 / self.decay_per_ns)
        }
    }
}

/// Ordered detection timestamps on one channel, in picoseconds.
///
/// Timestamps are strictly increasing and confined to `[0, duration_ps]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeTagStream {
    pub channel: u8,
    pub duration_ps: i64,
    pub timestamps: Vec<i64>,
}

impl TimeTagStream {
    /// Build a stream from arbitrary tags: clamps into `[0, duration]`,
    /// sorts, and resolves duplicate picoseconds by nudging forward (and,
    /// at the upper edge, backward) so the sequence is strictly increasing
    /// without changing the number of tags.
    pub fn from_unsorted(channel: u8, duration_ps: i64, mut tags: Vec<i64>) -> Self {
        for t in tags.iter_mut() {
            *t = (*t).clamp(0, duration_ps);
        }
        tags.sort_unstable();
        for i in 1..tags.len() {
            if tags[i] <= tags[i - 1] {
                tags[i] = tags[i - 1] + 1;
            }
        }
        if let Some(&last) = tags.last() {
            if last > duration_ps {
                let n = tags.len();
                tags[n - 1] = duration_ps;
                for i in (0..n - 1).rev() {
                    if tags[i] >= tags[i + 1] {
                        tags[i] = tags[i + 1] - 1;
                    } else {
                        break;
                    }
                }
            }
        }
        debug_assert!(tags.windows(2).all(|w| w[0] < w[1]));
        TimeTagStream {
            channel,
            duration_ps,
            timestamps: tags,
        }
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Mean detected rate in counts per picosecond.
    pub fn rate_per_ps(&self) -> f64 {
        if self.duration_ps == 0 {
            0.0
        } else {
            self.timestamps.len() as f64 / self.duration_ps as f64
        }
    }
}

/// Salts for deriving independent sub-streams from one user seed.
pub(crate) mod salt {
    pub const EMIT: u64 = 1;
    pub const BACKGROUND: u64 = 2;
    pub const DETECT: u64 = 3;
    pub const DARKS_A: u64 = 4;
    pub const DARKS_B: u64 = 5;
    pub const TRACE: u64 = 6;
    pub const SHOT_NOISE: u64 = 7;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58476D1CE4E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

/// Deterministic per-purpose RNG derived from the user seed and a salt.
pub(crate) fn rng_for(seed: u64, salt_value: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(splitmix64(seed ^ salt_value.wrapping_mul(0x9E3779B97F4A7C15)))
}
