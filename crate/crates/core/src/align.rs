//! Dynamic time warping between sign clips and subtitle groups of one
//! episode, using the distance between temporal midpoints as local cost.
//!
//! Costs are computed exactly in half-frame ticks (`start + end` of a segment
//! is twice its midpoint in frames), so ties are genuine and results do not
//! move under a global time shift. Seconds are derived at the end.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::Segment;
use crate::subtitle::SubtitleGroup;

#[derive(Debug, Error, PartialEq)]
pub enum AlignError {
    #[error("cannot align an empty {0} list")]
    Empty(&'static str),
}

pub fn midpoint(segment: &Segment, fps: f64) -> f64 {
    (segment.start_frame + segment.end_frame) as f64 / 2.0 / fps
}

fn ticks(segment: &Segment) -> u64 {
    (segment.start_frame + segment.end_frame) as u64
}

/// Local cost in half-frame ticks.
pub fn local_cost_ticks(sign: &Segment, sub: &Segment) -> u64 {
    ticks(sign).abs_diff(ticks(sub))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Diagonal,
    /// `(i, j) -> (i, j + 1)`: the same sign takes another subtitle.
    NextSubtitle,
    /// `(i, j) -> (i + 1, j)`: the same subtitle spans another sign.
    NextSign,
}

/// Preference order among equally cheap predecessor steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// diagonal, then next subtitle, then next sign
    #[default]
    DiagonalFirst,
    SubtitleFirst,
    SignFirst,
}

impl TiePolicy {
    fn order(self) -> [Step; 3] {
        use Step::*;
        match self {
            TiePolicy::DiagonalFirst => [Diagonal, NextSubtitle, NextSign],
            TiePolicy::SubtitleFirst => [NextSubtitle, Diagonal, NextSign],
            TiePolicy::SignFirst => [NextSign, Diagonal, NextSubtitle],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentPath {
    /// `(sign_index, subtitle_index)` cells from `(0, 0)` to the last pair.
    pub pairs: Vec<(usize, usize)>,
    /// Summed local cost in half-frame ticks.
    pub cost_ticks: u64,
    /// Summed local cost in seconds.
    pub total_cost: f64,
}

/// Minimum-cost monotonic path with steps `(1,1)`, `(0,1)` and `(1,0)`.
pub fn dtw_align(
    signs: &[Segment],
    subs: &[Segment],
    fps: f64,
    policy: TiePolicy,
) -> Result<AlignmentPath, AlignError> {
    if signs.is_empty() {
        return Err(AlignError::Empty("sign"));
    }
    if subs.is_empty() {
        return Err(AlignError::Empty("subtitle"));
    }
    let (n, m) = (signs.len(), subs.len());
    let cost = |i: usize, j: usize| local_cost_ticks(&signs[i], &subs[j]);
    let mut acc = vec![vec![u64::MAX; m]; n];
    for i in 0..n {
        for j in 0..m {
            let best_prev = if i == 0 && j == 0 {
                0
            } else {
                let mut best = u64::MAX;
                if i > 0 && j > 0 {
                    best = best.min(acc[i - 1][j - 1]);
                }
                if j > 0 {
                    best = best.min(acc[i][j - 1]);
                }
                if i > 0 {
                    best = best.min(acc[i - 1][j]);
                }
                best
            };
            acc[i][j] = best_prev + cost(i, j);
        }
    }

    let mut pairs = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while (i, j) != (0, 0) {
        let candidates = policy.order().into_iter().filter_map(|step| match step {
            Step::Diagonal if i > 0 && j > 0 => Some((i - 1, j - 1)),
            Step::NextSubtitle if j > 0 => Some((i, j - 1)),
            Step::NextSign if i > 0 => Some((i - 1, j)),
            _ => None,
        });
        // min_by_key keeps the first of equal keys, i.e. the preferred step
        let (pi, pj) = candidates
            .min_by_key(|&(a, b)| acc[a][b])
            .expect("a predecessor exists off the origin");
        pairs.push((pi, pj));
        i = pi;
        j = pj;
    }
    pairs.reverse();
    let cost_ticks = acc[n - 1][m - 1];
    Ok(AlignmentPath {
        pairs,
        cost_ticks,
        total_cost: cost_ticks as f64 / (2.0 * fps),
    })
}

/// A sign clip with the subtitle groups assigned to it.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSample {
    pub sign: Segment,
    pub subtitles: Vec<SubtitleGroup>,
    pub joined_text: String,
}

/// Index of the sign each subtitle is assigned to.
///
/// A subtitle matched to several signs along the path goes to the one with
/// the nearest midpoint, earlier sign on ties.
pub fn assign_subtitles(path: &AlignmentPath, signs: &[Segment], subs: &[Segment]) -> Vec<usize> {
    let mut best: Vec<Option<(u64, usize)>> = vec![None; subs.len()];
    for &(i, j) in &path.pairs {
        let d = local_cost_ticks(&signs[i], &subs[j]);
        match best[j] {
            Some((bd, bi)) if bd < d || (bd == d && bi <= i) => {}
            _ => best[j] = Some((d, i)),
        }
    }
    best.into_iter()
        .map(|b| b.expect("path covers every subtitle").1)
        .collect()
}

/// Builds one sample per sign that received at least one subtitle.
pub fn materialize_samples(
    path: &AlignmentPath,
    signs: &[Segment],
    subs: &[SubtitleGroup],
    separator: &str,
) -> Vec<AlignedSample> {
    let segs: Vec<Segment> = subs.iter().map(SubtitleGroup::segment).collect();
    let owner = assign_subtitles(path, signs, &segs);
    let mut buckets: Vec<Vec<SubtitleGroup>> = vec![Vec::new(); signs.len()];
    for (j, &i) in owner.iter().enumerate() {
        buckets[i].push(subs[j].clone());
    }
    signs
        .iter()
        .zip(buckets)
        .filter(|(_, b)| !b.is_empty())
        .map(|(sign, subtitles)| {
            let joined_text = subtitles
                .iter()
                .map(|g| g.representative_text.as_str())
                .collect::<Vec<_>>()
                .join(separator);
            AlignedSample {
                sign: *sign,
                subtitles,
                joined_text,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtitleSpan {
    pub start_frame: usize,
    pub end_frame: usize,
    pub text: String,
}

/// Line-delimited alignment manifest entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedRecord {
    pub episode_id: String,
    pub sign_start: usize,
    pub sign_end: usize,
    pub joined_text: String,
    pub subtitles: Vec<SubtitleSpan>,
}

impl AlignedRecord {
    pub fn from_sample(episode_id: &str, s: &AlignedSample) -> Self {
        AlignedRecord {
            episode_id: episode_id.to_string(),
            sign_start: s.sign.start_frame,
            sign_end: s.sign.end_frame,
            joined_text: s.joined_text.clone(),
            subtitles: s
                .subtitles
                .iter()
                .map(|g| SubtitleSpan {
                    start_frame: g.start_frame,
                    end_frame: g.end_frame,
                    text: g.representative_text.clone(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subtitle::GroupMember;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn group(start: usize, end: usize, text: &str) -> SubtitleGroup {
        SubtitleGroup {
            start_frame: start,
            end_frame: end,
            representative_text: text.into(),
            members: vec![GroupMember {
                start_frame: start,
                end_frame: end,
                text: text.into(),
                confidence: None,
            }],
        }
    }

    fn random_segments(rng: &mut ChaCha8Rng, n: usize) -> Vec<Segment> {
        let mut t = rng.random_range(0..50);
        (0..n)
            .map(|_| {
                let s = t + rng.random_range(0..40);
                let e = s + rng.random_range(1..200);
                t = s + rng.random_range(1..60);
                Segment::sign(s, e)
            })
            .collect()
    }

    fn brute_force(signs: &[Segment], subs: &[Segment]) -> u64 {
        fn go(i: usize, j: usize, acc: u64, signs: &[Segment], subs: &[Segment], best: &mut u64) {
            let acc = acc + (signs[i].start_frame + signs[i].end_frame).abs_diff(subs[j].start_frame + subs[j].end_frame) as u64;
            if i + 1 == signs.len() && j + 1 == subs.len() {
                *best = (*best).min(acc);
                return;
            }
            if i + 1 < signs.len() && j + 1 < subs.len() {
                go(i + 1, j + 1, acc, signs, subs, best);
            }
            if j + 1 < subs.len() {
                go(i, j + 1, acc, signs, subs, best);
            }
            if i + 1 < signs.len() {
                go(i + 1, j, acc, signs, subs, best);
            }
        }
        let mut best = u64::MAX;
        go(0, 0, 0, signs, subs, &mut best);
        best
    }

    fn check_path(p: &AlignmentPath, n: usize, m: usize) {
        assert_eq!(p.pairs[0], (0, 0));
        assert_eq!(*p.pairs.last().unwrap(), (n - 1, m - 1));
        for w in p.pairs.windows(2) {
            let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            assert!(matches!((di, dj), (1, 1) | (0, 1) | (1, 0)), "bad step {w:?}");
        }
    }

    #[test]
    fn midpoint_examples() {
        assert_eq!(midpoint(&Segment::sign(0, 50), 25.0), 1.0);
        assert_eq!(midpoint(&Segment::sign(100, 200), 25.0), 6.0);
        assert_eq!(
            midpoint(&Segment::sign(40, 60), 25.0),
            midpoint(&Segment::sign(30, 70), 25.0)
        );
    }

    #[test]
    fn single_cell() {
        let p = dtw_align(&[Segment::sign(0, 50)], &[Segment::subtitle(50, 100)], 25.0, TiePolicy::default()).unwrap();
        assert_eq!(p.pairs, vec![(0, 0)]);
        assert_eq!(p.total_cost, 2.0);
    }

    #[test]
    fn identical_sequences_take_the_diagonal() {
        let segs: Vec<Segment> = (0..6).map(|k| Segment::sign(k * 100, k * 100 + 80)).collect();
        let p = dtw_align(&segs, &segs, 25.0, TiePolicy::default()).unwrap();
        assert_eq!(p.pairs, (0..6).map(|k| (k, k)).collect::<Vec<_>>());
        assert_eq!(p.total_cost, 0.0);
    }

    #[test]
    fn empty_inputs() {
        let s = [Segment::sign(0, 1)];
        assert_eq!(dtw_align(&[], &s, 25.0, TiePolicy::default()), Err(AlignError::Empty("sign")));
        assert_eq!(dtw_align(&s, &[], 25.0, TiePolicy::default()), Err(AlignError::Empty("subtitle")));
    }

    #[test]
    fn matches_brute_force_and_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for _ in 0..1000 {
            let n = rng.random_range(1..=6);
            let signs = random_segments(&mut rng, n);
            let n = rng.random_range(1..=10);
            let subs = random_segments(&mut rng, n);
            let p = dtw_align(&signs, &subs, 25.0, TiePolicy::default()).unwrap();
            check_path(&p, signs.len(), subs.len());
            assert_eq!(p.cost_ticks, brute_force(&signs, &subs));
            let path_sum: u64 = p.pairs.iter().map(|&(i, j)| local_cost_ticks(&signs[i], &subs[j])).sum();
            assert_eq!(path_sum, p.cost_ticks);

            let shift = rng.random_range(1..500);
            let mv = |v: &[Segment]| -> Vec<Segment> {
                v.iter().map(|s| Segment::sign(s.start_frame + shift, s.end_frame + shift)).collect()
            };
            let q = dtw_align(&mv(&signs), &mv(&subs), 25.0, TiePolicy::default()).unwrap();
            assert_eq!(q, p);
        }
    }

    #[test]
    fn many_subtitles_one_sign() {
        let signs = [Segment::sign(0, 300)];
        let subs = [group(10, 100, "甲"), group(100, 200, "乙"), group(200, 290, "丙")];
        let segs: Vec<Segment> = subs.iter().map(|g| g.segment()).collect();
        let p = dtw_align(&signs, &segs, 25.0, TiePolicy::default()).unwrap();
        let samples = materialize_samples(&p, &signs, &subs, "");
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].joined_text, "甲乙丙");
        assert_eq!(materialize_samples(&p, &signs, &subs, " ")[0].joined_text, "甲 乙 丙");
    }

    #[test]
    fn diagonal_keeps_every_sign() {
        let signs: Vec<Segment> = (0..4).map(|k| Segment::sign(k * 200, k * 200 + 150)).collect();
        let subs: Vec<SubtitleGroup> = (0..4).map(|k| group(k * 200 + 20, k * 200 + 130, "x")).collect();
        let segs: Vec<Segment> = subs.iter().map(|g| g.segment()).collect();
        let p = dtw_align(&signs, &segs, 25.0, TiePolicy::default()).unwrap();
        let samples = materialize_samples(&p, &signs, &subs, "");
        assert_eq!(samples.len(), 4);
        assert!(samples.iter().all(|s| s.subtitles.len() == 1));
    }

    #[test]
    fn unmatched_sign_is_dropped() {
        // middle sign has no subtitle near it
        let signs = [Segment::sign(0, 100), Segment::sign(400, 500), Segment::sign(1000, 1100)];
        let subs = [group(20, 80, "a"), group(1020, 1080, "b")];
        let segs: Vec<Segment> = subs.iter().map(|g| g.segment()).collect();
        let p = dtw_align(&signs, &segs, 25.0, TiePolicy::default()).unwrap();
        let samples = materialize_samples(&p, &signs, &subs, "");
        let kept: Vec<Segment> = samples.iter().map(|s| s.sign).collect();
        assert_eq!(kept, vec![signs[0], signs[2]]);
    }

    #[test]
    fn assignment_is_total_and_single_valued() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..300 {
            let n = rng.random_range(1..=6);
            let signs = random_segments(&mut rng, n);
            let n = rng.random_range(1..=10);
            let segs = random_segments(&mut rng, n);
            let subs: Vec<SubtitleGroup> = segs.iter().map(|s| group(s.start_frame, s.end_frame, "t")).collect();
            let p = dtw_align(&signs, &segs, 25.0, TiePolicy::default()).unwrap();
            let owner = assign_subtitles(&p, &signs, &segs);
            assert_eq!(owner.len(), segs.len());
            for (j, &i) in owner.iter().enumerate() {
                assert!(p.pairs.contains(&(i, j)));
            }
            let samples = materialize_samples(&p, &signs, &subs, "");
            let total: usize = samples.iter().map(|s| s.subtitles.len()).sum();
            assert_eq!(total, segs.len());
        }
    }

    #[test]
    fn tie_policies_agree_on_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.random_range(1..=5);
            let signs = random_segments(&mut rng, n);
            let n = rng.random_range(1..=7);
            let subs = random_segments(&mut rng, n);
            let costs: Vec<u64> = [TiePolicy::DiagonalFirst, TiePolicy::SubtitleFirst, TiePolicy::SignFirst]
                .iter()
                .map(|&t| {
                    let p = dtw_align(&signs, &subs, 25.0, t).unwrap();
                    check_path(&p, signs.len(), subs.len());
                    p.cost_ticks
                })
                .collect();
            assert!(costs.windows(2).all(|w| w[0] == w[1]));
        }
    }
}
