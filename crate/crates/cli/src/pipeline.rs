//! Per-episode stages. Each reads and writes plain files inside the episode
//! directory, so any stage can be rerun or replaced on its own.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use signcorpus_core::align::{dtw_align, materialize_samples, AlignedRecord};
use signcorpus_core::signal::{
    binarize_and_segment, decode_raw_planar, encode_raw_planar, filter_by_duration,
    read_raw_planar, read_score_stream, segments_from_transitions, temporal_laplacian,
    detect_transitions, Segment, SegmentKind,
};
use signcorpus_core::subtitle::{
    average_clip, is_blank, regroup, run_ocr_batch, ClipRecord, SubtitleClip, SubtitleGroup,
};

use crate::config::PipelineConfig;
use crate::error::CliError;

pub const SCORES: &str = "scores.txt";
pub const SUBTITLE_FRAMES: &str = "subtitles.raw";
pub const SIGNS: &str = "signs.jsonl";
pub const CLIPS: &str = "clips.jsonl";
pub const CLIP_FRAMES: &str = "clips.raw";
pub const OCR: &str = "ocr.jsonl";
pub const GROUPS: &str = "groups.jsonl";
pub const ALIGNED: &str = "aligned.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    SegmentActivity,
    SubtitleClips,
    Ocr,
    Regroup,
    Align,
}

impl Stage {
    /// The order `all` runs them in.
    pub const CHAIN: [Stage; 5] = [
        Stage::SegmentActivity,
        Stage::SubtitleClips,
        Stage::Ocr,
        Stage::Regroup,
        Stage::Align,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::SegmentActivity => "segment-activity",
            Stage::SubtitleClips => "subtitle-clips",
            Stage::Ocr => "ocr",
            Stage::Regroup => "regroup",
            Stage::Align => "align",
        }
    }
}

/// What one stage produced for one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub episode: String,
    pub stage: String,
    pub records: usize,
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Data(format!("bad output path {}", path.display())))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn jsonl_bytes<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for it in items {
        serde_json::to_writer(&mut out, it).expect("plain data serializes");
        out.push(b'\n');
    }
    out
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let text = fs::read_to_string(path).map_err(|_| CliError::MissingInput(path.to_path_buf()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

fn require(path: PathBuf) -> Result<PathBuf, CliError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::MissingInput(path))
    }
}

pub fn episode_id(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

/// Active sign runs from the score stream, kept if their duration is in
/// bounds.
pub fn segment_activity(cfg: &PipelineConfig, dir: &Path) -> Result<usize, CliError> {
    let id = episode_id(dir);
    let scores = read_score_stream(&require(dir.join(SCORES))?, &id)?;
    if scores.fps != cfg.fps {
        return Err(CliError::Data(format!(
            "{SCORES} is at {} fps but the configuration says {}",
            scores.fps, cfg.fps
        )));
    }
    let runs = binarize_and_segment(&scores, cfg.activity_threshold);
    let kept = filter_by_duration(&runs, cfg.fps, cfg.bounds());
    write_atomic(&dir.join(SIGNS), &jsonl_bytes(&kept))?;
    Ok(kept.len())
}

/// Splits the subtitle strip at detected transitions, averages each piece
/// and drops blank ones. Mean frames go to `clips.raw` in clip order.
pub fn subtitle_clips(cfg: &PipelineConfig, dir: &Path) -> Result<usize, CliError> {
    let id = episode_id(dir);
    let raw = read_raw_planar(&require(dir.join(SUBTITLE_FRAMES))?, &id, cfg.fps)?;
    let stream = cfg.cleaner().clean(&raw)?;
    let measures = temporal_laplacian(&stream)?;
    let transitions = detect_transitions(&measures, cfg.laplacian_threshold);
    let mut clips = Vec::new();
    for seg in segments_from_transitions(&transitions, stream.len()) {
        let clip = average_clip(&stream, seg)?;
        if !is_blank(&clip, cfg.blank_epsilon) {
            clips.push(clip);
        }
    }
    let records: Vec<ClipRecord> = clips.iter().map(|c| ClipRecord::from_clip(&id, c)).collect();
    let means: Vec<_> = clips.iter().map(|c| c.mean_frame.clone()).collect();
    write_atomic(&dir.join(CLIP_FRAMES), &encode_raw_planar(stream.width, stream.height, &means))?;
    write_atomic(&dir.join(CLIPS), &jsonl_bytes(&records))?;
    Ok(records.len())
}

fn load_clips(dir: &Path) -> Result<Vec<SubtitleClip>, CliError> {
    let records: Vec<ClipRecord> = read_jsonl(&dir.join(CLIPS))?;
    let bytes = fs::read(require(dir.join(CLIP_FRAMES))?)?;
    let (_, _, frames) = decode_raw_planar(&bytes)?;
    if frames.len() != records.len() {
        return Err(CliError::Data(format!(
            "{CLIPS} lists {} clips but {CLIP_FRAMES} holds {} frames",
            records.len(),
            frames.len()
        )));
    }
    Ok(records
        .into_iter()
        .zip(frames)
        .map(|(r, mean_frame)| SubtitleClip {
            segment: Segment::new(r.start_frame, r.end_frame, SegmentKind::Subtitle),
            mean_frame,
            ocr: None,
        })
        .collect())
}

pub fn ocr(cfg: &PipelineConfig, dir: &Path) -> Result<usize, CliError> {
    let id = episode_id(dir);
    let clips = load_clips(dir)?;
    let adapter = cfg.ocr_adapter(dir)?;
    let read = run_ocr_batch(&clips, &adapter)?;
    let records: Vec<ClipRecord> = read.iter().map(|c| ClipRecord::from_clip(&id, c)).collect();
    write_atomic(&dir.join(OCR), &jsonl_bytes(&records))?;
    Ok(records.len())
}

pub fn regroup_stage(cfg: &PipelineConfig, dir: &Path) -> Result<usize, CliError> {
    let records: Vec<ClipRecord> = read_jsonl(&dir.join(OCR))?;
    let groups = regroup(&records, cfg.regroup())?;
    write_atomic(&dir.join(GROUPS), &jsonl_bytes(&groups))?;
    Ok(groups.len())
}

/// Pairs sign runs with subtitle groups. With no signs or no groups there
/// is nothing to align and the output is empty.
pub fn align(cfg: &PipelineConfig, dir: &Path) -> Result<usize, CliError> {
    let id = episode_id(dir);
    let signs: Vec<Segment> = read_jsonl(&dir.join(SIGNS))?;
    let groups: Vec<SubtitleGroup> = read_jsonl(&dir.join(GROUPS))?;
    let records: Vec<AlignedRecord> = if signs.is_empty() || groups.is_empty() {
        Vec::new()
    } else {
        let segs: Vec<Segment> = groups.iter().map(SubtitleGroup::segment).collect();
        let path = dtw_align(&signs, &segs, cfg.fps, cfg.tie_policy)?;
        materialize_samples(&path, &signs, &groups, &cfg.text_separator)
            .iter()
            .map(|s| AlignedRecord::from_sample(&id, s))
            .collect()
    };
    write_atomic(&dir.join(ALIGNED), &jsonl_bytes(&records))?;
    Ok(records.len())
}

pub fn run_stage(stage: Stage, cfg: &PipelineConfig, dir: &Path) -> Result<StageReport, CliError> {
    if !dir.is_dir() {
        return Err(CliError::MissingInput(dir.to_path_buf()));
    }
    let records = match stage {
        Stage::SegmentActivity => segment_activity(cfg, dir),
        Stage::SubtitleClips => subtitle_clips(cfg, dir),
        Stage::Ocr => ocr(cfg, dir),
        Stage::Regroup => regroup_stage(cfg, dir),
        Stage::Align => align(cfg, dir),
    }
    .map_err(|e| e.in_context(&format!("{} [{}]", dir.display(), stage.name())))?;
    Ok(StageReport {
        episode: episode_id(dir),
        stage: stage.name().to_string(),
        records,
    })
}

/// Runs `stages` in order on every episode, episodes in parallel on
/// `cfg.workers` threads. Every episode is attempted; results keep the
/// input order.
pub fn run_episodes(
    stages: &[Stage],
    cfg: &PipelineConfig,
    dirs: &[PathBuf],
) -> Vec<Result<Vec<StageReport>, CliError>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .expect("thread pool");
    pool.install(|| {
        dirs.par_iter()
            .map(|d| stages.iter().map(|&s| run_stage(s, cfg, d)).collect())
            .collect()
    })
}
