//! Subtitle clip extraction: frame averaging, blank removal, OCR and
//! edit-distance regrouping of over-segmented clips.

mod cleaner;
mod ocr;

pub use cleaner::{Cleaner, CleanerError};
pub use ocr::{
    image_digest, png_bytes, read_mock_table, run_ocr, run_ocr_batch, write_mock_table,
    CommandOcr, HttpOcr, MockEntry, MockOcr, OcrAdapter, OcrBackend, OcrError, OcrText,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distance::edit_distance;
use crate::signal::{FrameStream, Plane, Segment, SegmentKind};

pub const DEFAULT_BLANK_EPSILON: f64 = 0.02;
pub const DEFAULT_REGROUP_THRESHOLD: usize = 3;

#[derive(Debug, Error)]
pub enum SubtitleError {
    #[error("segment [{start}, {end}) outside stream of {frames} frames")]
    OutOfRange {
        start: usize,
        end: usize,
        frames: usize,
    },
    #[error("clip [{start}, {end}) has no OCR text")]
    MissingText { start: usize, end: usize },
}

/// A subtitle clip reduced to its per-pixel mean frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SubtitleClip {
    pub segment: Segment,
    pub mean_frame: Plane,
    pub ocr: Option<OcrText>,
}

impl SubtitleClip {
    pub fn text(&self) -> Option<&str> {
        self.ocr.as_ref().map(|o| o.text.as_str())
    }

    pub fn ocr_confidence(&self) -> Option<f64> {
        self.ocr.as_ref().map(|o| o.confidence)
    }
}

/// Anything carrying a frame span and (possibly) recognized text.
pub trait Transcript {
    fn segment(&self) -> Segment;
    fn text(&self) -> Option<&str>;
    fn confidence(&self) -> Option<f64>;
}

impl Transcript for SubtitleClip {
    fn segment(&self) -> Segment {
        self.segment
    }
    fn text(&self) -> Option<&str> {
        SubtitleClip::text(self)
    }
    fn confidence(&self) -> Option<f64> {
        self.ocr_confidence()
    }
}

/// Line-delimited clip manifest entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub episode_id: String,
    pub start_frame: usize,
    pub end_frame: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl ClipRecord {
    pub fn from_clip(episode_id: &str, clip: &SubtitleClip) -> Self {
        ClipRecord {
            episode_id: episode_id.to_string(),
            start_frame: clip.segment.start_frame,
            end_frame: clip.segment.end_frame,
            text: clip.text().map(str::to_string),
            confidence: clip.ocr_confidence(),
        }
    }
}

impl Transcript for ClipRecord {
    fn segment(&self) -> Segment {
        Segment::subtitle(self.start_frame, self.end_frame)
    }
    fn text(&self) -> Option<&str> {
        self.text.as_deref()
    }
    fn confidence(&self) -> Option<f64> {
        self.confidence
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMember {
    pub start_frame: usize,
    pub end_frame: usize,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

/// Temporally adjacent clips judged to carry the same subtitle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtitleGroup {
    pub start_frame: usize,
    pub end_frame: usize,
    pub representative_text: String,
    pub members: Vec<GroupMember>,
}

impl SubtitleGroup {
    pub fn segment(&self) -> Segment {
        Segment::new(self.start_frame, self.end_frame, SegmentKind::Subtitle)
    }

    fn from_members(members: Vec<GroupMember>) -> Self {
        let texts: Vec<&str> = members.iter().map(|m| m.text.as_str()).collect();
        let representative_text = texts[select_representative(&texts)].to_string();
        SubtitleGroup {
            start_frame: members[0].start_frame,
            end_frame: members[members.len() - 1].end_frame,
            representative_text,
            members,
        }
    }
}

/// Which text a candidate clip is compared against when deciding to merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeAnchor {
    /// The group's most recent member.
    #[default]
    LastMember,
    /// The group's representative so far.
    Representative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegroupConfig {
    pub threshold: usize,
    #[serde(default)]
    pub anchor: MergeAnchor,
}

impl Default for RegroupConfig {
    fn default() -> Self {
        RegroupConfig {
            threshold: DEFAULT_REGROUP_THRESHOLD,
            anchor: MergeAnchor::LastMember,
        }
    }
}

pub fn average_clip(stream: &FrameStream, segment: Segment) -> Result<SubtitleClip, SubtitleError> {
    if segment.start_frame >= segment.end_frame || segment.end_frame > stream.frames.len() {
        return Err(SubtitleError::OutOfRange {
            start: segment.start_frame,
            end: segment.end_frame,
            frames: stream.frames.len(),
        });
    }
    let mut acc = vec![0.0f64; stream.width * stream.height];
    for frame in &stream.frames[segment.start_frame..segment.end_frame] {
        for (a, &v) in acc.iter_mut().zip(&frame.data) {
            *a += v as f64;
        }
    }
    let n = segment.frames() as f64;
    let data = acc.into_iter().map(|s| (s / n) as f32).collect();
    Ok(SubtitleClip {
        segment,
        mean_frame: Plane::new(stream.width, stream.height, data),
        ocr: None,
    })
}

/// True when the clip's mean intensity is below `epsilon` (no subtitle shown).
pub fn is_blank(clip: &SubtitleClip, epsilon: f64) -> bool {
    clip.mean_frame.mean() < epsilon
}

/// Index of the text with the smallest total (equivalently mean) edit
/// distance to the others; the earliest wins ties.
pub fn select_representative<S: AsRef<str>>(texts: &[S]) -> usize {
    assert!(!texts.is_empty(), "empty group");
    let n = texts.len();
    let mut totals = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = edit_distance(texts[i].as_ref(), texts[j].as_ref());
            totals[i] += d;
            totals[j] += d;
        }
    }
    // min_by_key keeps the first minimum
    (0..n).min_by_key(|&i| totals[i]).unwrap_or(0)
}

/// Left-to-right merge of adjacent clips whose edit distance is below
/// `config.threshold`.
pub fn regroup<T: Transcript>(clips: &[T], config: RegroupConfig) -> Result<Vec<SubtitleGroup>, SubtitleError> {
    let mut groups: Vec<Vec<GroupMember>> = Vec::new();
    for clip in clips {
        let seg = clip.segment();
        let text = clip.text().ok_or(SubtitleError::MissingText {
            start: seg.start_frame,
            end: seg.end_frame,
        })?;
        let member = GroupMember {
            start_frame: seg.start_frame,
            end_frame: seg.end_frame,
            text: text.to_string(),
            confidence: clip.confidence(),
        };
        let joins = groups.last().is_some_and(|g| {
            let anchor = match config.anchor {
                MergeAnchor::LastMember => g[g.len() - 1].text.as_str(),
                MergeAnchor::Representative => {
                    let texts: Vec<&str> = g.iter().map(|m| m.text.as_str()).collect();
                    texts[select_representative(&texts)]
                }
            };
            edit_distance(text, anchor) < config.threshold
        });
        match groups.last_mut() {
            Some(g) if joins => g.push(member),
            _ => groups.push(vec![member]),
        }
    }
    Ok(groups.into_iter().map(SubtitleGroup::from_members).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn record(start: usize, end: usize, text: &str) -> ClipRecord {
        ClipRecord {
            episode_id: "ep".into(),
            start_frame: start,
            end_frame: end,
            text: Some(text.into()),
            confidence: Some(0.9),
        }
    }

    fn records(texts: &[&str]) -> Vec<ClipRecord> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| record(i * 10, i * 10 + 10, t))
            .collect()
    }

    fn stream(frames: Vec<Vec<f32>>) -> FrameStream {
        let w = frames[0].len();
        FrameStream::new(
            "ep",
            25.0,
            w,
            1,
            frames.into_iter().map(|d| Plane::new(w, 1, d)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn average_examples() {
        let s = stream(vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.25, 0.75]]);
        let one = average_clip(&s, Segment::subtitle(2, 3)).unwrap();
        assert_eq!(one.mean_frame.data, vec![0.25, 0.75]);
        assert!(one.ocr.is_none());
        let two = average_clip(&s, Segment::subtitle(0, 2)).unwrap();
        assert_eq!(two.mean_frame.data, vec![0.5, 0.5]);
        assert!(matches!(
            average_clip(&s, Segment::subtitle(1, 4)),
            Err(SubtitleError::OutOfRange { .. })
        ));
    }

    #[test]
    fn average_matches_naive_accumulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let frames: Vec<Vec<f32>> = (0..5)
            .map(|_| (0..6).map(|_| rng.random::<f32>()).collect())
            .collect();
        let clip = average_clip(&stream(frames.clone()), Segment::subtitle(0, 5)).unwrap();
        for p in 0..6 {
            let mut s = 0.0f64;
            for f in &frames {
                s += f[p] as f64;
            }
            assert!((clip.mean_frame.data[p] as f64 - s / 5.0).abs() < 1e-6);
        }
    }

    #[test]
    fn blank_examples() {
        let clip = |v: f32| SubtitleClip {
            segment: Segment::subtitle(0, 1),
            mean_frame: Plane::filled(4, 1, v),
            ocr: None,
        };
        assert!(is_blank(&clip(0.0), 0.01));
        assert!(!is_blank(&clip(1.0), 0.01));
        let mut c = clip(0.0);
        c.mean_frame.data = vec![0.036, 0.0, 0.0, 0.0];
        // mean 0.009
        assert!(is_blank(&c, 0.01));
    }

    #[test]
    fn representative_examples() {
        assert_eq!(select_representative(&["A"]), 0);
        assert_eq!(select_representative(&["ABCD", "ABCE", "ABZE"]), 1);
        assert_eq!(select_representative(&["X", "X", "X"]), 0);
    }

    #[test]
    fn regroup_examples() {
        let groups = regroup(&records(&["ABCD", "ABCE", "XYZ"]), RegroupConfig { threshold: 2, ..Default::default() }).unwrap();
        let texts: Vec<Vec<&str>> = groups
            .iter()
            .map(|g| g.members.iter().map(|m| m.text.as_str()).collect())
            .collect();
        assert_eq!(texts, vec![vec!["ABCD", "ABCE"], vec!["XYZ"]]);
        assert_eq!((groups[0].start_frame, groups[0].end_frame), (0, 20));

        let single = regroup(&records(&["天氣"]), RegroupConfig::default()).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].representative_text, "天氣");
    }

    #[test]
    fn regroup_missing_text() {
        let mut r = records(&["A", "B"]);
        r[1].text = None;
        assert!(matches!(
            regroup(&r, RegroupConfig::default()),
            Err(SubtitleError::MissingText { start: 10, .. })
        ));
    }

    #[test]
    fn chain_versus_representative_anchor() {
        // chain drift: each step differs by one char from the previous
        let texts = ["AAAA", "AAAB", "AABB", "ABBB", "BBBB"];
        let chain = regroup(&records(&texts), RegroupConfig { threshold: 2, anchor: MergeAnchor::LastMember }).unwrap();
        assert_eq!(chain.len(), 1);
        let rep = regroup(&records(&texts), RegroupConfig { threshold: 2, anchor: MergeAnchor::Representative }).unwrap();
        assert!(rep.len() > 1);
    }

    fn random_text(rng: &mut ChaCha8Rng) -> String {
        let n = rng.random_range(1..6);
        (0..n).map(|_| ['甲', '乙', '丙', 'a', 'b'][rng.random_range(0..5)]).collect()
    }

    #[test]
    fn regroup_is_ordered_partition_and_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..300 {
            let n = rng.random_range(1..12);
            let texts: Vec<String> = (0..n).map(|_| random_text(&mut rng)).collect();
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let cfg = RegroupConfig { threshold: rng.random_range(0..4), ..Default::default() };
            let groups = regroup(&records(&refs), cfg).unwrap();
            let flat: Vec<&str> = groups
                .iter()
                .flat_map(|g| g.members.iter().map(|m| m.text.as_str()))
                .collect();
            assert_eq!(flat, refs);
            for g in &groups {
                assert!(g.members.iter().any(|m| m.text == g.representative_text));
                assert_eq!(g.start_frame, g.members[0].start_frame);
                assert_eq!(g.end_frame, g.members.last().unwrap().end_frame);
            }
            let reps: Vec<&str> = groups.iter().map(|g| g.representative_text.as_str()).collect();
            let separated = reps
                .windows(2)
                .all(|w| edit_distance(w[0], w[1]) >= cfg.threshold);
            if separated {
                let again = regroup(&records(&reps), cfg).unwrap();
                assert_eq!(again.len(), groups.len());
            }
        }
    }
}
