//! Corpus manifests, OOV-free dataset splits, split statistics and the
//! keypoint file layout.

mod keypoints;
mod split;
mod stats;

pub use keypoints::{
    prune_keypoints, read_keypoint_file, write_keypoint_file, Keypoint, KeypointFrame,
    KeypointSequence, BODY_RANGE, FACE_RANGE, HAND_RANGE, KEYPOINTS, WHOLEBODY_KEYPOINTS,
};
pub use split::{make_split, SplitOptions, SplitRatios, SplitStrategy};
pub use stats::{compute_stats, CorpusStats, SplitStats};

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("invalid split ratios {0:?}: each must be positive and they must sum to 1")]
    InvalidRatios((f64, f64, f64)),
    #[error("duplicate sample id {0}")]
    DuplicateSample(String),
    #[error("sample {0} has no split assignment")]
    Unassigned(String),
    #[error("expected {expected} keypoints, got {actual}")]
    KeypointArity { expected: usize, actual: usize },
    #[error("{path}:{line}: {detail}")]
    Parse {
        path: String,
        line: usize,
        detail: String,
    },
    #[error("malformed keypoint file: {0}")]
    KeypointFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One annotated clip of the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub signer_id: String,
    pub episode_id: String,
    pub start_frame: usize,
    pub end_frame: usize,
    pub fps: f64,
    pub glosses: Vec<String>,
    pub text: String,
}

impl SampleRecord {
    pub fn duration_seconds(&self) -> f64 {
        (self.end_frame - self.start_frame) as f64 / self.fps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub assignments: BTreeMap<String, Split>,
    pub seed: u64,
    pub ratios: SplitRatios,
    /// Fractions actually realized.
    pub achieved: SplitRatios,
    pub attempts: usize,
    /// True when the attempts ran out and the fallback decided the split.
    pub fallback: bool,
}

impl SplitAssignment {
    pub fn get(&self, sample_id: &str) -> Option<Split> {
        self.assignments.get(sample_id).copied()
    }

    pub fn count(&self, split: Split) -> usize {
        self.assignments.values().filter(|&&s| s == split).count()
    }
}

/// Reads a line-delimited JSON manifest of [`SampleRecord`]s.
pub fn read_manifest(path: &Path) -> Result<Vec<SampleRecord>, CorpusError> {
    read_jsonl(path)
}

pub fn write_manifest(path: &Path, samples: &[SampleRecord]) -> Result<(), CorpusError> {
    write_jsonl(path, samples)
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            detail: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CorpusError> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut f, item).map_err(std::io::Error::from)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

/// `<sample_id>\t<split>` lines, in sample id order.
pub fn write_split_file(path: &Path, assignment: &SplitAssignment) -> Result<(), CorpusError> {
    let mut out = String::new();
    for (id, split) in &assignment.assignments {
        out.push_str(&format!("{id}\t{split}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_split_file(path: &Path) -> Result<BTreeMap<String, Split>, CorpusError> {
    let text = fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |detail: String| CorpusError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            detail,
        };
        let (id, split) = line
            .split_once('\t')
            .ok_or_else(|| err("expected <sample_id>\\t<split>".into()))?;
        let split = split.trim().parse::<Split>().map_err(err)?;
        if out.insert(id.to_string(), split).is_some() {
            return Err(CorpusError::DuplicateSample(id.to_string()));
        }
    }
    Ok(out)
}
