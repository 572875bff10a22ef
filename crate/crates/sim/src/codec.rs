//! Compact little-endian wire format for odometry and path messages, and
//! per-channel bandwidth accounting.

use coguide::frames::{FrameId, Path, Pose, Vec3};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"CGP1";
pub const HEADER_BYTES: usize = 11;
pub const POSE_BYTES: usize = 32;
pub const ODOMETRY_BYTES: usize = HEADER_BYTES + POSE_BYTES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum MessageKind {
    Odometry = 1,
    Path = 2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireMessage {
    pub kind: MessageKind,
    pub seq: u32,
    /// `(x, y, z, heading)` per pose.
    pub poses: Vec<[f64; 4]>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("message truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("unknown message kind {0}")]
    UnknownKind(u8),
    #[error("{0} trailing bytes after message")]
    TrailingBytes(usize),
    #[error("path of {0} poses exceeds the 65535 pose limit")]
    TooLong(usize),
    #[error("odometry message must carry exactly one pose, got {0}")]
    BadOdometry(usize),
}

impl WireMessage {
    pub fn encode(&self) -> Result<Vec<u8>, CodecError> {
        let n = self.poses.len();
        if n > u16::MAX as usize {
            return Err(CodecError::TooLong(n));
        }
        let mut out = Vec::with_capacity(HEADER_BYTES + POSE_BYTES * n);
        out.extend_from_slice(&MAGIC);
        out.push(self.kind as u8);
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.extend_from_slice(&(n as u16).to_le_bytes());
        for p in &self.poses {
            for v in p {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < HEADER_BYTES {
            return Err(CodecError::Truncated { need: HEADER_BYTES, have: bytes.len() });
        }
        let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(CodecError::BadMagic(magic));
        }
        let kind = match bytes[4] {
            1 => MessageKind::Odometry,
            2 => MessageKind::Path,
            k => return Err(CodecError::UnknownKind(k)),
        };
        let seq = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes"));
        let n = u16::from_le_bytes(bytes[9..11].try_into().expect("2 bytes")) as usize;
        let need = HEADER_BYTES + POSE_BYTES * n;
        if bytes.len() < need {
            return Err(CodecError::Truncated { need, have: bytes.len() });
        }
        if bytes.len() > need {
            return Err(CodecError::TrailingBytes(bytes.len() - need));
        }
        let poses = bytes[HEADER_BYTES..]
            .chunks_exact(POSE_BYTES)
            .map(|c| std::array::from_fn(|i| f64::from_le_bytes(c[8 * i..8 * i + 8].try_into().expect("8 bytes"))))
            .collect();
        Ok(WireMessage { kind, seq, poses })
    }
}

fn pose_row(p: &Pose) -> [f64; 4] {
    [p.position.x, p.position.y, p.position.z, p.heading]
}

pub fn encode_path(path: &Path, seq: u32) -> Result<Vec<u8>, CodecError> {
    WireMessage { kind: MessageKind::Path, seq, poses: path.poses().iter().map(pose_row).collect() }.encode()
}

/// Decodes a path message; the frame is implied by the channel.
pub fn decode_path(bytes: &[u8], frame: FrameId) -> Result<(u32, Path), CodecError> {
    let m = WireMessage::decode(bytes)?;
    let poses = m
        .poses
        .iter()
        .map(|r| Pose::new(Vec3::new(r[0], r[1], r[2]), r[3], frame))
        .collect();
    Ok((m.seq, Path::new(frame, poses).expect("poses built in one frame")))
}

pub fn encode_odometry(pose: &Pose, seq: u32) -> Vec<u8> {
    WireMessage { kind: MessageKind::Odometry, seq, poses: vec![pose_row(pose)] }
        .encode()
        .expect("single pose fits")
}

pub fn decode_odometry(bytes: &[u8], frame: FrameId) -> Result<(u32, Pose), CodecError> {
    let m = WireMessage::decode(bytes)?;
    if m.kind != MessageKind::Odometry || m.poses.len() != 1 {
        return Err(CodecError::BadOdometry(m.poses.len()));
    }
    let r = m.poses[0];
    Ok((m.seq, Pose::new(Vec3::new(r[0], r[1], r[2]), r[3], frame)))
}

/// Byte and message counts for one channel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChannelStats {
    pub messages: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BandwidthMeter {
    pub odometry: ChannelStats,
    pub path: ChannelStats,
    /// Size of every path message, in send order.
    pub path_sizes: Vec<usize>,
}

impl BandwidthMeter {
    pub fn record(&mut self, kind: MessageKind, bytes: usize) {
        let ch = match kind {
            MessageKind::Odometry => &mut self.odometry,
            MessageKind::Path => {
                self.path_sizes.push(bytes);
                &mut self.path
            }
        };
        ch.messages += 1;
        ch.bytes += bytes as u64;
    }

    /// Kilobytes (1000 B) per second over `duration` seconds.
    pub fn kbps(stats: &ChannelStats, duration: f64) -> f64 {
        stats.bytes as f64 / 1000.0 / duration
    }

    /// Mean message size in kilobytes.
    pub fn mean_kb(stats: &ChannelStats) -> f64 {
        if stats.messages == 0 {
            0.0
        } else {
            stats.bytes as f64 / stats.messages as f64 / 1000.0
        }
    }
}

/// Histogram of path message sizes as CSV `bin_start_bytes,bin_end_bytes,count`.
pub fn size_histogram_csv(sizes: &[usize], bin: usize) -> String {
    use std::fmt::Write;
    let mut s = String::from("bin_start_bytes,bin_end_bytes,count\n");
    let bin = bin.max(1);
    let Some(&max) = sizes.iter().max() else {
        return s;
    };
    let mut counts = vec![0usize; max / bin + 1];
    for &x in sizes {
        counts[x / bin] += 1;
    }
    for (i, c) in counts.iter().enumerate() {
        let _ = writeln!(s, "{},{},{}", i * bin, (i + 1) * bin, c);
    }
    s
}
