//! Timestamp stream files.
//!
//! Binary: one 9-byte record per click, a little-endian `i64` time in
//! picoseconds followed by the channel byte (0 = A, 1 = B). CSV: header
//! `channel,timestamp_ps`, then one row per click. Both are ordered by time,
//! ties broken by channel.

use std::io::{BufRead, Read, Write};

use super::{Channel, DetectionRecord};
use crate::error::{Error, Result};

pub const RECORD_BYTES: usize = 9;

/// A click as stored on disk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct TimeTag {
    pub time_ps: i64,
    pub channel: Channel,
}

impl From<&DetectionRecord> for TimeTag {
    fn from(r: &DetectionRecord) -> Self {
        TimeTag {
            time_ps: r.time_ps,
            channel: r.channel,
        }
    }
}

/// Merge two per-channel streams into one time-ordered tag list.
pub fn merge_streams(a: &[DetectionRecord], b: &[DetectionRecord]) -> Vec<TimeTag> {
    let mut tags: Vec<TimeTag> = a.iter().chain(b).map(TimeTag::from).collect();
    tags.sort();
    tags
}

pub fn write_binary<W: Write>(mut w: W, tags: &[TimeTag]) -> Result<()> {
    let mut buf = Vec::with_capacity(tags.len() * RECORD_BYTES);
    for t in tags {
        buf.extend_from_slice(&t.time_ps.to_le_bytes());
        buf.push(t.channel.byte());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Vec<TimeTag>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() % RECORD_BYTES != 0 {
        return Err(Error::arg(format!(
            "binary stream length {} is not a multiple of {RECORD_BYTES}",
            buf.len()
        )));
    }
    buf.chunks_exact(RECORD_BYTES)
        .enumerate()
        .map(|(i, rec)| {
            let mut t = [0u8; 8];
            t.copy_from_slice(&rec[..8]);
            let channel = Channel::from_byte(rec[8])
                .ok_or_else(|| Error::arg(format!("record {i}: bad channel byte {}", rec[8])))?;
            Ok(TimeTag {
                time_ps: i64::from_le_bytes(t),
                channel,
            })
        })
        .collect()
}

pub fn write_csv<W: Write>(mut w: W, tags: &[TimeTag]) -> Result<()> {
    let mut out = String::with_capacity(16 * tags.len() + 24);
    out.push_str("channel,timestamp_ps\n");
    for t in tags {
        out.push_str(t.channel.label());
        out.push(',');
        out.push_str(&t.time_ps.to_string());
        out.push('\n');
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_csv<R: BufRead>(r: R) -> Result<Vec<TimeTag>> {
    let mut tags = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if n == 0 || line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (ch, t) = line
            .split_once(',')
            .ok_or_else(|| Error::arg(format!("line {}: expected channel,timestamp_ps", n + 1)))?;
        let channel = match ch.trim() {
            "A" => Channel::A,
            "B" => Channel::B,
            other => return Err(Error::arg(format!("line {}: unknown channel {other:?}", n + 1))),
        };
        let time_ps = t
            .trim()
            .parse()
            .map_err(|e| Error::arg(format!("line {}: {e}", n + 1)))?;
        tags.push(TimeTag { time_ps, channel });
    }
    Ok(tags)
}
