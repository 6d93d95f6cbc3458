//! Time-tag export/import.
//!
//! Two formats:
//! - CSV with the mandatory header `channel,timestamp_ps`, one row per tag;
//! - a raw little-endian binary format of 9-byte records `(u8 channel,
//!   u64 timestamp_ps)` with no header, for large streams.
//!
//! Neither format stores the stream duration; readers take it as an
//! argument (pass 0 to infer it from the last tag).

use std::io::{self, BufRead, Read, Write};

use thiserror::Error;

use super::TimeTagStream;

/// Size of one binary record: `u8` channel + `u64` timestamp.
pub const BIN_RECORD_BYTES: usize = 9;

#[derive(Debug, Error)]
pub enum TagIoError {
    #[error("tag I/O failed: {0}")]
    Io(#[from] io::Error),
    #[error("bad tag CSV header: expected `channel,timestamp_ps`, got `{0}`")]
    BadHeader(String),
    #[error("bad tag CSV row {line}: {reason}")]
    BadRow { line: usize, reason: String },
    #[error("binary tag data is truncated ({0} trailing bytes)")]
    Truncated(usize),
}

/// Write streams as CSV rows `channel,timestamp_ps`.
pub fn write_tags_csv<W: Write>(streams: &[&TimeTagStream], mut w: W) -> Result<(), TagIoError> {
    writeln!(w, "channel,timestamp_ps")?;
    for s in streams {
        for &t in &s.timestamps {
            writeln!(w, "{},{}", s.channel, t)?;
        }
    }
    Ok(())
}

/// Read CSV tags back into one stream per channel, ordered by channel id.
/// `duration_ps = 0` infers the duration from the latest tag.
pub fn read_tags_csv<R: Read>(r: R, duration_ps: i64) -> Result<Vec<TimeTagStream>, TagIoError> {
    let mut lines = io::BufReader::new(r).lines();
    let header = lines
        .next()
        .ok_or_else(|| TagIoError::BadHeader(String::new()))??;
    if header.trim() != "channel,timestamp_ps" {
        return Err(TagIoError::BadHeader(header));
    }
    let mut per_channel: Vec<(u8, Vec<i64>)> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, ',');
        let bad = |reason: &str| TagIoError::BadRow {
            line: i + 2,
            reason: reason.to_string(),
        };
        let ch: u8 = parts
            .next()
            .ok_or_else(|| bad("missing channel"))?
            .trim()
            .parse()
            .map_err(|_| bad("channel is not a u8"))?;
        let ts: i64 = parts
            .next()
            .ok_or_else(|| bad("missing timestamp"))?
            .trim()
            .parse()
            .map_err(|_| bad("timestamp is not an integer"))?;
        match per_channel.iter_mut().find(|(c, _)| *c == ch) {
            Some((_, v)) => v.push(ts),
            None => per_channel.push((ch, vec![ts])),
        }
    }
    per_channel.sort_by_key(|(c, _)| *c);
    Ok(assemble(per_channel, duration_ps))
}

/// Write streams as raw little-endian `(u8, u64)` records.
pub fn write_tags_bin<W: Write>(streams: &[&TimeTagStream], mut w: W) -> Result<(), TagIoError> {
    for s in streams {
        for &t in &s.timestamps {
            w.write_all(&[s.channel])?;
            w.write_all(&(t as u64).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Read raw binary tags back into one stream per channel.
pub fn read_tags_bin<R: Read>(mut r: R, duration_ps: i64) -> Result<Vec<TimeTagStream>, TagIoError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let trailing = buf.len() % BIN_RECORD_BYTES;
    if trailing != 0 {
        return Err(TagIoError::Truncated(trailing));
    }
    let mut per_channel: Vec<(u8, Vec<i64>)> = Vec::new();
    for rec in buf.chunks_exact(BIN_RECORD_BYTES) {
        let ch = rec[0];
        let ts = u64::from_le_bytes(rec[1..9].try_into().unwrap()) as i64;
        match per_channel.iter_mut().find(|(c, _)| *c == ch) {
            Some((_, v)) => v.push(ts),
            None => per_channel.push((ch, vec![ts])),
        }
    }
    per_channel.sort_by_key(|(c, _)| *c);
    Ok(assemble(per_channel, duration_ps))
}

fn assemble(per_channel: Vec<(u8, Vec<i64>)>, duration_ps: i64) -> Vec<TimeTagStream> {
    let inferred = per_channel
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .max()
        .unwrap_or(0);
    let duration = if duration_ps > 0 { duration_ps } else { inferred };
    per_channel
        .into_iter()
        .map(|(ch, tags)| TimeTagStream::from_unsorted(ch, duration, tags))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photostats::{emit_stream, EmitterRates};

    fn two_streams() -> (TimeTagStream, TimeTagStream) {
        let rates = EmitterRates {
            pump_per_ns: 0.05,
            decay_per_ns: 2.0,
            background_fraction: 0.0,
        };
        let mut a = emit_stream(&rates, 5_000_000, 1);
        let mut b = emit_stream(&rates, 5_000_000, 2);
        a.channel = 0;
        b.channel = 1;
        (a, b)
    }

    #[test]
    fn csv_round_trip() {
        let (a, b) = two_streams();
        let mut buf = Vec::new();
        write_tags_csv(&[&a, &b], &mut buf).unwrap();
        let back = read_tags_csv(&buf[..], a.duration_ps).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0], a);
        assert_eq!(back[1], b);
    }

    #[test]
    fn bin_round_trip_and_record_size() {
        let (a, b) = two_streams();
        let mut buf = Vec::new();
        write_tags_bin(&[&a, &b], &mut buf).unwrap();
        assert_eq!(buf.len(), (a.len() + b.len()) * BIN_RECORD_BYTES);
        let back = read_tags_bin(&buf[..], a.duration_ps).unwrap();
        assert_eq!(back[0], a);
        assert_eq!(back[1], b);
    }

    #[test]
    fn bad_header_and_truncation_are_rejected() {
        assert!(matches!(
            read_tags_csv(&b"chan,ts\n0,1\n"[..], 0),
            Err(TagIoError::BadHeader(_))
        ));
        assert!(matches!(
            read_tags_csv(&b"channel,timestamp_ps\n0,abc\n"[..], 0),
            Err(TagIoError::BadRow { line: 2, .. })
        ));
        assert!(matches!(
            read_tags_bin(&[0u8; 10][..], 0),
            Err(TagIoError::Truncated(1))
        ));
    }
}
