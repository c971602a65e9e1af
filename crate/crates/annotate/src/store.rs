use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use signcorpus_core::gloss::{self, ParseErrorKind};
use thiserror::Error;

/// Task snapshot written once when the store is created.
pub const MANIFEST: &str = "manifest.jsonl";
/// Append-only log of accepted writes.
pub const ANNOTATION_LOG: &str = "annotations.jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown task {0}")]
    NotFound(String),
    #[error("version conflict: expected {expected}, current {current}")]
    Conflict { expected: u64, current: u64 },
    #[error("invalid annotation: {}", .0.first().map_or("", |d| d.message.as_str()))]
    Invalid(Vec<Diagnostic>),
    #[error("{0}")]
    BadRequest(String),
    #[error("store is read-only")]
    ReadOnly,
    #[error("{file}:{line}: {detail}")]
    Corrupt { file: String, line: usize, detail: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Unannotated,
    Draft,
    Done,
    /// Set aside by the annotator, e.g. for a misaligned subtitle.
    Flagged,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Unannotated => "unannotated",
            Status::Draft => "draft",
            Status::Done => "done",
            Status::Flagged => "flagged",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unannotated" => Ok(Status::Unannotated),
            "draft" => Ok(Status::Draft),
            "done" => Ok(Status::Done),
            "flagged" => Ok(Status::Flagged),
            other => Err(format!("unknown status {other:?}")),
        }
    }
}

/// Everything about a task that is fixed at store creation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSeed {
    pub sample_id: String,
    /// Clip file or frame directory, relative to the store directory unless
    /// absolute.
    pub media: String,
    pub subtitle_text: String,
    pub signer: String,
    pub episode: String,
    pub start_frame: usize,
    pub end_frame: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub sample_id: String,
    pub media: String,
    pub subtitle_text: String,
    pub signer: String,
    pub episode: String,
    pub start_frame: usize,
    pub end_frame: usize,
    pub status: Status,
    pub raw_annotation: Option<String>,
    pub version: u64,
}

impl AnnotationTask {
    fn fresh(seed: TaskSeed) -> Self {
        AnnotationTask {
            sample_id: seed.sample_id,
            media: seed.media,
            subtitle_text: seed.subtitle_text,
            signer: seed.signer,
            episode: seed.episode,
            start_frame: seed.start_frame,
            end_frame: seed.end_frame,
            status: Status::Unannotated,
            raw_annotation: None,
            version: 0,
        }
    }

    pub fn summary(&self) -> TaskSummary {
        TaskSummary {
            sample_id: self.sample_id.clone(),
            signer: self.signer.clone(),
            episode: self.episode.clone(),
            start_frame: self.start_frame,
            end_frame: self.end_frame,
            status: self.status,
            version: self.version,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub sample_id: String,
    pub signer: String,
    pub episode: String,
    pub start_frame: usize,
    pub end_frame: usize,
    pub status: Status,
    pub version: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskFilter {
    pub status: Option<Status>,
    pub signer: Option<String>,
    pub episode: Option<String>,
}

impl TaskFilter {
    fn matches(&self, t: &AnnotationTask) -> bool {
        self.status.is_none_or(|s| s == t.status)
            && self.signer.as_ref().is_none_or(|s| *s == t.signer)
            && self.episode.as_ref().is_none_or(|e| *e == t.episode)
    }
}

/// One accepted write.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub sample_id: String,
    pub version: u64,
    pub status: Status,
    pub raw: Option<String>,
}

/// A positioned complaint about a raw annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// Byte offset into the raw string.
    pub offset: usize,
    pub token_index: usize,
    pub expected: String,
    pub found: String,
    pub message: String,
}

fn describe(kind: ParseErrorKind) -> &'static str {
    match kind {
        ParseErrorKind::EmptyAnnotation => "empty annotation",
        ParseErrorKind::EmptyBase => "missing gloss word",
        ParseErrorKind::EmptyHomosignMember => "empty homosign member",
        ParseErrorKind::UnbalancedParen => "unbalanced parenthesis",
        ParseErrorKind::InvalidModifier => "invalid modifier",
        ParseErrorKind::DuplicateModifier => "repeated modifier",
        ParseErrorKind::DuplicateHomosignMember => "repeated homosign member",
        ParseErrorKind::UnexpectedChar => "unexpected character",
    }
}

/// Checks a raw annotation against the gloss grammar without storing it.
pub fn validate(raw: &str) -> Result<(), Vec<Diagnostic>> {
    match gloss::parse(raw) {
        Ok(_) => Ok(()),
        Err(e) => {
            let message = if e.kind == ParseErrorKind::EmptyAnnotation {
                describe(e.kind).to_string()
            } else {
                format!("{} at byte {}: expected {}, found {:?}", describe(e.kind), e.offset, e.expected, e.found)
            };
            Err(vec![Diagnostic {
                offset: e.offset,
                token_index: e.token_index,
                expected: e.expected.to_string(),
                found: e.found,
                message,
            }])
        }
    }
}

/// Durable annotation store: the manifest snapshot plus the append-only log.
///
/// Reads may run concurrently; writes to one task are serialized by that
/// task's lock, and the version check happens under it.
pub struct Store {
    dir: PathBuf,
    order: Vec<String>,
    tasks: HashMap<String, Mutex<AnnotationTask>>,
    log: Option<Mutex<File>>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)
}

fn to_line<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string(v).expect("plain data serializes");
    s.push('\n');
    s
}

impl Store {
    /// Creates a new store in `dir`. Fails if a manifest already exists.
    pub fn create(dir: &Path, seeds: Vec<TaskSeed>) -> Result<Store, StoreError> {
        fs::create_dir_all(dir)?;
        let manifest = dir.join(MANIFEST);
        if manifest.exists() {
            return Err(StoreError::BadRequest(format!("{} already exists", manifest.display())));
        }
        let mut seen = std::collections::HashSet::new();
        for s in &seeds {
            if !seen.insert(s.sample_id.as_str()) {
                return Err(StoreError::BadRequest(format!("duplicate sample id {}", s.sample_id)));
            }
        }
        let body: String = seeds.iter().map(to_line).collect();
        write_atomic(&dir.join(ANNOTATION_LOG), b"")?;
        write_atomic(&manifest, body.as_bytes())?;
        Store::open(dir, false)
    }

    /// Opens a store and replays its log. A torn final log line (no trailing
    /// newline, unparsable) is dropped; any other bad line is an error.
    pub fn open(dir: &Path, read_only: bool) -> Result<Store, StoreError> {
        let manifest_path = dir.join(MANIFEST);
        let manifest = fs::read_to_string(&manifest_path)?;
        let mut tasks = HashMap::new();
        let mut order = Vec::new();
        for (i, line) in manifest.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let seed: TaskSeed = serde_json::from_str(line).map_err(|e| StoreError::Corrupt {
                file: manifest_path.display().to_string(),
                line: i + 1,
                detail: e.to_string(),
            })?;
            order.push((seed.episode.clone(), seed.start_frame, seed.sample_id.clone()));
            let id = seed.sample_id.clone();
            if tasks.insert(id.clone(), AnnotationTask::fresh(seed)).is_some() {
                return Err(StoreError::Corrupt {
                    file: manifest_path.display().to_string(),
                    line: i + 1,
                    detail: format!("duplicate sample id {id}"),
                });
            }
        }
        order.sort();

        let log_path = dir.join(ANNOTATION_LOG);
        let log_text = match fs::read_to_string(&log_path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(e.into()),
        };
        let mut valid_len = 0usize;
        for (i, piece) in log_text.split_inclusive('\n').enumerate() {
            let torn = !piece.ends_with('\n');
            let corrupt = |detail: String| StoreError::Corrupt {
                file: log_path.display().to_string(),
                line: i + 1,
                detail,
            };
            if piece.trim().is_empty() {
                valid_len += piece.len();
                continue;
            }
            let entry: LogEntry = match serde_json::from_str(piece) {
                Ok(e) => e,
                Err(_) if torn => break,
                Err(e) => return Err(corrupt(e.to_string())),
            };
            let task = tasks
                .get_mut(&entry.sample_id)
                .ok_or_else(|| corrupt(format!("unknown task {}", entry.sample_id)))?;
            if entry.version != task.version + 1 {
                return Err(corrupt(format!(
                    "version {} follows {} for {}",
                    entry.version, task.version, entry.sample_id
                )));
            }
            task.version = entry.version;
            task.status = entry.status;
            task.raw_annotation = entry.raw;
            valid_len += piece.len();
        }

        let log = if read_only {
            None
        } else {
            let f = OpenOptions::new().create(true).append(true).open(&log_path)?;
            if (valid_len as u64) < f.metadata()?.len() {
                f.set_len(valid_len as u64)?;
            }
            Some(Mutex::new(f))
        };
        Ok(Store {
            dir: dir.to_path_buf(),
            order: order.into_iter().map(|(_, _, id)| id).collect(),
            tasks: tasks.into_iter().map(|(k, v)| (k, Mutex::new(v))).collect(),
            log,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn is_read_only(&self) -> bool {
        self.log.is_none()
    }

    fn lock(&self, id: &str) -> Result<std::sync::MutexGuard<'_, AnnotationTask>, StoreError> {
        let m = self.tasks.get(id).ok_or_else(|| StoreError::NotFound(id.to_string()))?;
        Ok(m.lock().unwrap_or_else(|p| p.into_inner()))
    }

    /// Matching tasks ordered by episode, then start frame.
    pub fn list_tasks(&self, filter: &TaskFilter) -> Vec<TaskSummary> {
        self.order
            .iter()
            .filter_map(|id| {
                let t = self.lock(id).ok()?;
                filter.matches(&t).then(|| t.summary())
            })
            .collect()
    }

    pub fn get_task(&self, sample_id: &str) -> Result<AnnotationTask, StoreError> {
        Ok(self.lock(sample_id)?.clone())
    }

    /// Resolved location of a task's media.
    pub fn media_path(&self, sample_id: &str) -> Result<PathBuf, StoreError> {
        let media = PathBuf::from(&self.lock(sample_id)?.media);
        Ok(if media.is_absolute() { media } else { self.dir.join(media) })
    }

    /// Validates and durably records an annotation, returning the new
    /// version. On any error the store and its log are unchanged.
    ///
    /// A flagged write may carry an empty annotation; otherwise the raw
    /// string must parse.
    pub fn put_annotation(
        &self,
        sample_id: &str,
        raw: &str,
        expected_version: u64,
        done: bool,
        flagged: bool,
    ) -> Result<u64, StoreError> {
        let log = self.log.as_ref().ok_or(StoreError::ReadOnly)?;
        let mut task = self.lock(sample_id)?;
        if task.version != expected_version {
            return Err(StoreError::Conflict {
                expected: expected_version,
                current: task.version,
            });
        }
        if done && flagged {
            return Err(StoreError::BadRequest("a task cannot be both done and flagged".into()));
        }
        let raw = if flagged && raw.trim().is_empty() {
            None
        } else {
            validate(raw).map_err(StoreError::Invalid)?;
            Some(raw.to_string())
        };
        let entry = LogEntry {
            sample_id: sample_id.to_string(),
            version: task.version + 1,
            status: if flagged {
                Status::Flagged
            } else if done {
                Status::Done
            } else {
                Status::Draft
            },
            raw,
        };
        {
            let mut f = log.lock().unwrap_or_else(|p| p.into_inner());
            let before = f.metadata()?.len();
            let written = f.write_all(to_line(&entry).as_bytes()).and_then(|_| f.sync_data());
            if let Err(e) = written {
                let _ = f.set_len(before);
                return Err(e.into());
            }
        }
        task.version = entry.version;
        task.status = entry.status;
        task.raw_annotation = entry.raw;
        Ok(task.version)
    }

    /// Every task as one JSON line, in listing order. Two stores with the
    /// same history produce identical bytes.
    pub fn snapshot(&self) -> Vec<u8> {
        self.order
            .iter()
            .map(|id| to_line(&*self.lock(id).expect("listed id exists")))
            .collect::<String>()
            .into_bytes()
    }
}
