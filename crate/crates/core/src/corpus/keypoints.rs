//! Upper-body keypoints kept from COCO-WholeBody predictions.
//!
//! Input order (133 points): body 0-16, feet 17-22, face 23-90, left hand
//! 91-111, right hand 112-132. Output order (121 points): face 0-67,
//! hands 68-109 (left then right), upper body 110-120 (body points 0-10).
//!
//! Keypoint file layout, all integers and floats little-endian:
//!
//! ```text
//! offset  size       field
//! 0       4          magic "KPT1"
//! 4       4          u32 sample id length L
//! 8       L          sample id, UTF-8
//! 8+L     4          u32 frame count F
//! 12+L    4          u32 points per frame (121)
//! 16+L    F*121*12   per frame, per point: f32 x, f32 y, f32 confidence
//! ```

use std::fs;
use std::ops::Range;
use std::path::Path;

use super::CorpusError;

pub const WHOLEBODY_KEYPOINTS: usize = 133;
pub const KEYPOINTS: usize = 121;
pub const FACE_RANGE: Range<usize> = 0..68;
pub const HAND_RANGE: Range<usize> = 68..110;
pub const BODY_RANGE: Range<usize> = 110..121;

const SRC_UPPER_BODY: Range<usize> = 0..11;
const SRC_FACE: Range<usize> = 23..91;
const SRC_HANDS: Range<usize> = 91..133;
const MAGIC: &[u8; 4] = b"KPT1";

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Keypoint {
    pub x: f32,
    pub y: f32,
    pub confidence: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeypointFrame {
    points: Vec<Keypoint>,
}

impl KeypointFrame {
    pub fn new(points: Vec<Keypoint>) -> Result<Self, CorpusError> {
        if points.len() != KEYPOINTS {
            return Err(CorpusError::KeypointArity {
                expected: KEYPOINTS,
                actual: points.len(),
            });
        }
        Ok(KeypointFrame { points })
    }

    pub fn points(&self) -> &[Keypoint] {
        &self.points
    }

    pub fn face(&self) -> &[Keypoint] {
        &self.points[FACE_RANGE]
    }

    pub fn hands(&self) -> &[Keypoint] {
        &self.points[HAND_RANGE]
    }

    pub fn upper_body(&self) -> &[Keypoint] {
        &self.points[BODY_RANGE]
    }

    /// Indices of points outside `[0, width) x [0, height)` or non-finite.
    pub fn invalid_points(&self, width: f32, height: f32) -> Vec<usize> {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                !(p.x.is_finite() && p.y.is_finite())
                    || p.x < 0.0
                    || p.y < 0.0
                    || p.x >= width
                    || p.y >= height
            })
            .map(|(i, _)| i)
            .collect()
    }
}

/// Drops the six lower-body and six foot points from a 133-point frame.
pub fn prune_keypoints(raw: &[Keypoint]) -> Result<KeypointFrame, CorpusError> {
    if raw.len() != WHOLEBODY_KEYPOINTS {
        return Err(CorpusError::KeypointArity {
            expected: WHOLEBODY_KEYPOINTS,
            actual: raw.len(),
        });
    }
    let points = raw[SRC_FACE]
        .iter()
        .chain(&raw[SRC_HANDS])
        .chain(&raw[SRC_UPPER_BODY])
        .copied()
        .collect();
    KeypointFrame::new(points)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeypointSequence {
    pub sample_id: String,
    pub frames: Vec<KeypointFrame>,
}

pub fn write_keypoint_file(path: &Path, seq: &KeypointSequence) -> Result<(), CorpusError> {
    let id = seq.sample_id.as_bytes();
    let mut out = Vec::with_capacity(16 + id.len() + seq.frames.len() * KEYPOINTS * 12);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(id.len() as u32).to_le_bytes());
    out.extend_from_slice(id);
    out.extend_from_slice(&(seq.frames.len() as u32).to_le_bytes());
    out.extend_from_slice(&(KEYPOINTS as u32).to_le_bytes());
    for f in &seq.frames {
        for p in f.points() {
            out.extend_from_slice(&p.x.to_le_bytes());
            out.extend_from_slice(&p.y.to_le_bytes());
            out.extend_from_slice(&p.confidence.to_le_bytes());
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_keypoint_file(path: &Path) -> Result<KeypointSequence, CorpusError> {
    let bytes = fs::read(path)?;
    let bad = |m: &str| CorpusError::KeypointFormat(m.to_string());
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8], CorpusError> {
        let s = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated"))?;
        pos += n;
        Ok(s)
    };
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap()) as usize;
    if take(4)? != MAGIC {
        return Err(bad("bad magic"));
    }
    let id_len = u32_at(take(4)?);
    let sample_id = String::from_utf8(take(id_len)?.to_vec()).map_err(|_| bad("sample id not UTF-8"))?;
    let frames = u32_at(take(4)?);
    let per_frame = u32_at(take(4)?);
    if per_frame != KEYPOINTS {
        return Err(CorpusError::KeypointArity {
            expected: KEYPOINTS,
            actual: per_frame,
        });
    }
    let body = take(frames * KEYPOINTS * 12)?;
    let f32_at = |b: &[u8]| f32::from_le_bytes(b.try_into().unwrap());
    let frames = body
        .chunks_exact(KEYPOINTS * 12)
        .map(|chunk| {
            let points = chunk
                .chunks_exact(12)
                .map(|p| Keypoint {
                    x: f32_at(&p[0..4]),
                    y: f32_at(&p[4..8]),
                    confidence: f32_at(&p[8..12]),
                })
                .collect();
            KeypointFrame::new(points)
        })
        .collect::<Result<Vec<_>, _>>()?;
    if pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok(KeypointSequence { sample_id, frames })
}
