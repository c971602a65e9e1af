//! Temporal signal processing over per-frame streams.
//!
//! Activity segmentation (score streams) and subtitle transition detection
//! (frame streams) share the same run-length machinery defined here.

mod io;

pub use io::{
    decode_raw_planar, encode_raw_planar, read_frame_dir, read_raw_planar, read_score_stream,
    rgb_to_intensity, write_raw_planar, write_score_stream,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("stream too short: {frames} frames, need at least {needed}")]
    StreamTooShort { frames: usize, needed: usize },
    #[error("frame {index} has {actual} pixels, expected {expected}")]
    FrameSize {
        index: usize,
        expected: usize,
        actual: usize,
    },
    #[error("fps must be positive, got {0}")]
    InvalidFps(f64),
    #[error("value {value} at index {index} outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

/// A single intensity image, row-major, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), width * height, "plane data length mismatch");
        Plane {
            width,
            height,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Plane::new(width, height, vec![value; width * height])
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    /// Quantizes to 8 bits with round-to-nearest, clamping to `[0, 255]`.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Self {
        Plane::new(
            width,
            height,
            bytes.iter().map(|&b| b as f32 / 255.0).collect(),
        )
    }
}

/// Ordered intensity planes for one fixed screen region of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStream {
    pub episode_id: String,
    pub fps: f64,
    pub width: usize,
    pub height: usize,
    pub frames: Vec<Plane>,
}

impl FrameStream {
    pub fn new(
        episode_id: impl Into<String>,
        fps: f64,
        width: usize,
        height: usize,
        frames: Vec<Plane>,
    ) -> Result<Self, SignalError> {
        if !(fps > 0.0) {
            return Err(SignalError::InvalidFps(fps));
        }
        let expected = width * height;
        for (index, frame) in frames.iter().enumerate() {
            if frame.len() != expected || frame.width != width || frame.height != height {
                return Err(SignalError::FrameSize {
                    index,
                    expected,
                    actual: frame.len(),
                });
            }
            if let Some(&value) = frame.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(SignalError::OutOfRange {
                    index,
                    value: value as f64,
                });
            }
        }
        Ok(FrameStream {
            episode_id: episode_id.into(),
            fps,
            width,
            height,
            frames,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Per-frame signing-activity probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreStream {
    pub episode_id: String,
    pub fps: f64,
    pub scores: Vec<f64>,
}

impl ScoreStream {
    pub fn new(
        episode_id: impl Into<String>,
        fps: f64,
        scores: Vec<f64>,
    ) -> Result<Self, SignalError> {
        if !(fps > 0.0) {
            return Err(SignalError::InvalidFps(fps));
        }
        if let Some((index, &value)) = scores
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(SignalError::OutOfRange { index, value });
        }
        Ok(ScoreStream {
            episode_id: episode_id.into(),
            fps,
            scores,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Sign,
    Subtitle,
}

/// Half-open frame interval `[start_frame, end_frame)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub start_frame: usize,
    pub end_frame: usize,
    pub kind: SegmentKind,
}

impl Segment {
    pub fn new(start_frame: usize, end_frame: usize, kind: SegmentKind) -> Self {
        debug_assert!(start_frame < end_frame, "empty segment");
        Segment {
            start_frame,
            end_frame,
            kind,
        }
    }

    pub fn sign(start_frame: usize, end_frame: usize) -> Self {
        Segment::new(start_frame, end_frame, SegmentKind::Sign)
    }

    pub fn subtitle(start_frame: usize, end_frame: usize) -> Self {
        Segment::new(start_frame, end_frame, SegmentKind::Subtitle)
    }

    pub fn frames(&self) -> usize {
        self.end_frame - self.start_frame
    }

    pub fn duration_seconds(&self, fps: f64) -> f64 {
        self.frames() as f64 / fps
    }
}

/// Clip duration limits in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationBounds {
    pub min_s: f64,
    pub max_s: f64,
    /// When false, both bounds are exclusive.
    #[serde(default = "default_inclusive")]
    pub inclusive: bool,
}

fn default_inclusive() -> bool {
    true
}

impl Default for DurationBounds {
    fn default() -> Self {
        DurationBounds {
            min_s: 3.0,
            max_s: 15.0,
            inclusive: true,
        }
    }
}

impl DurationBounds {
    pub fn contains(&self, seconds: f64) -> bool {
        if self.inclusive {
            self.min_s <= seconds && seconds <= self.max_s
        } else {
            self.min_s < seconds && seconds < self.max_s
        }
    }
}

/// Maximal runs of frames whose score is at least `threshold`.
pub fn binarize_and_segment(scores: &ScoreStream, threshold: f64) -> Vec<Segment> {
    let mask: Vec<bool> = scores.scores.iter().map(|&s| s >= threshold).collect();
    runs(&mask, SegmentKind::Sign)
}

fn runs(mask: &[bool], kind: SegmentKind) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &on) in mask.iter().enumerate() {
        match (on, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(Segment::new(s, i, kind));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Segment::new(s, mask.len(), kind));
    }
    out
}

pub fn filter_by_duration(segments: &[Segment], fps: f64, bounds: DurationBounds) -> Vec<Segment> {
    segments
        .iter()
        .filter(|s| bounds.contains(s.duration_seconds(fps)))
        .copied()
        .collect()
}

/// Mean absolute second temporal difference per frame.
///
/// Interior frame `t` gets `mean_p |I[t-1][p] - 2 I[t][p] + I[t+1][p]|`; the
/// first and last frames get 0.
pub fn temporal_laplacian(stream: &FrameStream) -> Result<Vec<f64>, SignalError> {
    let n = stream.frames.len();
    if n < 3 {
        return Err(SignalError::StreamTooShort {
            frames: n,
            needed: 3,
        });
    }
    let pixels = stream.width * stream.height;
    let mut out = vec![0.0; n];
    if pixels == 0 {
        return Ok(out);
    }
    for t in 1..n - 1 {
        let (prev, cur, next) = (
            &stream.frames[t - 1].data,
            &stream.frames[t].data,
            &stream.frames[t + 1].data,
        );
        // f32 inputs widened to f64 make each second difference exact, so
        // the two lobes of an ideal step produce bit-identical measures.
        let sum: f64 = prev
            .iter()
            .zip(cur)
            .zip(next)
            .map(|((&a, &b), &c)| (a as f64 - 2.0 * b as f64 + c as f64).abs())
            .sum();
        out[t] = sum / pixels as f64;
    }
    Ok(out)
}

/// One transition per contiguous run of measures at or above `threshold`,
/// placed at the run's maximum.
///
/// Ties go to the last index: an ideal step between frames `t-1` and `t`
/// produces two equal lobes at `t-1` and `t`, and `t` is the first frame of
/// the new content.
pub fn detect_transitions(measures: &[f64], threshold: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for (t, &m) in measures.iter().enumerate() {
        if m >= threshold {
            best = match best {
                Some((_, v)) if m < v => best,
                _ => Some((t, m)),
            };
        } else if let Some((idx, _)) = best.take() {
            out.push(idx);
        }
    }
    if let Some((idx, _)) = best {
        out.push(idx);
    }
    out
}

/// Partitions `[0, frame_count)` so that every transition starts a segment.
pub fn segments_from_transitions(transitions: &[usize], frame_count: usize) -> Vec<Segment> {
    let mut out = Vec::with_capacity(transitions.len() + 1);
    let mut start = 0;
    for &t in transitions {
        if t > start && t < frame_count {
            out.push(Segment::subtitle(start, t));
            start = t;
        }
    }
    if start < frame_count {
        out.push(Segment::subtitle(start, frame_count));
    }
    out
}
