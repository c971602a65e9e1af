//! Synthetic episodes with known ground truth, for exercising the pipeline
//! offline.
//!
//! Each sign run carries one or more subtitles placed around its midpoint.
//! Subtitles are random binary patterns on a black strip (what a background
//! remover would output), so clip means are exact and a digest-keyed mock OCR
//! table can answer for them. Optional over-segmentation splits a subtitle
//! into two visually different clips whose OCR texts differ by one
//! character, which regrouping must merge back.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{AlignedRecord, SubtitleSpan};
use crate::signal::{FrameStream, Plane, ScoreStream};
use crate::subtitle::{image_digest, MockEntry};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("infeasible synthetic episode: {0}")]
    Infeasible(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub episode_id: String,
    pub seed: u64,
    pub signs: usize,
    pub min_subtitles: usize,
    pub max_subtitles: usize,
    pub min_sign_s: f64,
    pub max_sign_s: f64,
    /// Short active runs (under 3 s) that duration filtering must drop.
    pub distractors: usize,
    /// Probability that a subtitle is split into two OCR-variant clips.
    pub oversegment: f64,
    pub width: usize,
    pub height: usize,
    pub fps: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            episode_id: "synth".into(),
            seed: 0,
            signs: 4,
            min_subtitles: 1,
            max_subtitles: 3,
            min_sign_s: 3.0,
            max_sign_s: 15.0,
            distractors: 1,
            oversegment: 0.2,
            width: 64,
            height: 8,
            fps: 25.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthEpisode {
    pub scores: ScoreStream,
    pub frames: FrameStream,
    pub mock_table: Vec<MockEntry>,
    /// Expected alignment, one record per sign run.
    pub truth: Vec<AlignedRecord>,
}

const POOLS: [&str; 2] = [
    "天氣溫度濕百分比昨今明日港島九龍新界市民政府會議",
    "輸入個案名印海員醫院確診病人檢測疫苗學校交通",
];

struct Clip {
    start: usize,
    end: usize,
    pattern: Plane,
    text: String,
}

fn random_pattern(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Plane {
    loop {
        let data: Vec<f32> = (0..w * h)
            .map(|_| if rng.random_bool(0.35) { 1.0 } else { 0.0 })
            .collect();
        let p = Plane::new(w, h, data);
        if p.mean() >= 0.2 {
            return p;
        }
    }
}

fn random_text(rng: &mut ChaCha8Rng, pool: &str) -> String {
    let chars: Vec<char> = pool.chars().collect();
    let n = rng.random_range(4..=10);
    (0..n).map(|_| chars[rng.random_range(0..chars.len())]).collect()
}

impl SynthSpec {
    fn validate(&self) -> Result<(), SynthError> {
        let fail = |m: String| Err(SynthError::Infeasible(m));
        if !(3.0 <= self.min_sign_s && self.min_sign_s <= self.max_sign_s && self.max_sign_s <= 15.0) {
            return fail(format!(
                "sign durations [{}, {}] s must lie within [3, 15] s",
                self.min_sign_s, self.max_sign_s
            ));
        }
        if self.min_subtitles == 0 || self.min_subtitles > self.max_subtitles || self.max_subtitles > 3 {
            return fail(format!(
                "subtitles per sign [{}, {}] must lie within [1, 3]",
                self.min_subtitles, self.max_subtitles
            ));
        }
        if !(0.0..=1.0).contains(&self.oversegment) {
            return fail(format!("oversegment probability {}", self.oversegment));
        }
        if self.width < 8 || self.height == 0 {
            return fail(format!("strip {}x{} too small", self.width, self.height));
        }
        if self.fps != 25.0 {
            return fail("synthetic timings assume 25 fps".into());
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<SynthEpisode, SynthError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (w, h) = (self.width, self.height);
        let min_len = (self.min_sign_s * self.fps).ceil() as usize;
        let max_len = (self.max_sign_s * self.fps).floor() as usize;

        let mut active: Vec<(usize, usize)> = Vec::new();
        let mut clips: Vec<Clip> = Vec::new();
        let mut truth = Vec::new();
        let mut distractors_left = self.distractors;
        let mut sub_index = 0usize;
        let mut t = rng.random_range(25..75);

        for k in 0..self.signs {
            let len = rng.random_range(min_len..=max_len);
            let (start, end) = (t, t + len);
            active.push((start, end));

            // subtitles fill the central half of the run
            let block = len / 2;
            let block_start = start + (len - block) / 2;
            let count = rng.random_range(self.min_subtitles..=self.max_subtitles);
            let gaps: Vec<usize> = (1..count)
                .map(|_| if rng.random_bool(0.5) { 0 } else { rng.random_range(4..8) })
                .collect();
            let each = (block - gaps.iter().sum::<usize>()) / count;
            let mut s = block_start;
            let mut spans = Vec::new();
            for c in 0..count {
                let e = s + each;
                let pool = POOLS[sub_index % 2];
                sub_index += 1;
                let text = random_text(&mut rng, pool);
                let pattern = random_pattern(&mut rng, w, h);
                if rng.random_bool(self.oversegment) && each >= 12 {
                    let cut = s + each / 2;
                    let mut variant = pattern.clone();
                    let band = rng.random_range(0..4) * (w / 4);
                    for y in 0..h {
                        for x in band..band + w / 4 {
                            let v = &mut variant.data[y * w + x];
                            *v = 1.0 - *v;
                        }
                    }
                    let mut chars: Vec<char> = text.chars().collect();
                    let pos = rng.random_range(0..chars.len());
                    let pool_chars: Vec<char> = pool.chars().filter(|&ch| ch != chars[pos]).collect();
                    chars[pos] = pool_chars[rng.random_range(0..pool_chars.len())];
                    clips.push(Clip { start: s, end: cut, pattern, text: text.clone() });
                    clips.push(Clip { start: cut, end: e, pattern: variant, text: chars.into_iter().collect() });
                } else {
                    clips.push(Clip { start: s, end: e, pattern, text: text.clone() });
                }
                spans.push(SubtitleSpan { start_frame: s, end_frame: e, text });
                s = e + gaps.get(c).copied().unwrap_or(0);
            }
            truth.push(AlignedRecord {
                episode_id: self.episode_id.clone(),
                sign_start: start,
                sign_end: end,
                joined_text: spans.iter().map(|s| s.text.as_str()).collect(),
                subtitles: spans,
            });

            t = end;
            if distractors_left > 0 && (k % 2 == 1 || self.signs - k <= distractors_left) {
                distractors_left -= 1;
                let pre = rng.random_range(15..40);
                let dlen = rng.random_range(10..50);
                active.push((t + pre, t + pre + dlen));
                t += pre + dlen;
            }
            t += rng.random_range(25..100);
        }
        let frame_count = t + rng.random_range(25..75);

        let scores = (0..frame_count)
            .map(|f| {
                if active.iter().any(|&(s, e)| s <= f && f < e) {
                    rng.random_range(0.6..=1.0)
                } else {
                    rng.random_range(0.0..0.4)
                }
            })
            .collect();
        let mut frames = vec![Plane::filled(w, h, 0.0); frame_count];
        for c in &clips {
            for f in &mut frames[c.start..c.end] {
                f.data.clone_from(&c.pattern.data);
            }
        }
        let mut mock_table: Vec<MockEntry> = clips
            .iter()
            .map(|c| MockEntry {
                digest: image_digest(&c.pattern),
                text: c.text.clone(),
                confidence: 0.9,
            })
            .collect();
        mock_table.dedup_by(|a, b| a.digest == b.digest);

        Ok(SynthEpisode {
            scores: ScoreStream::new(self.episode_id.clone(), self.fps, scores).expect("scores in range"),
            frames: FrameStream::new(self.episode_id.clone(), self.fps, w, h, frames).expect("frames consistent"),
            mock_table,
            truth,
        })
    }
}
