use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Cursor, Write};
use std::path::Path;
use std::process::Command;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::SubtitleClip;
use crate::signal::Plane;

#[derive(Debug, Error)]
pub enum OcrError {
    /// The backend could not be reached or did not complete the request.
    #[error("ocr transport error: {0}")]
    Transport(String),
    /// The backend answered with something that is not a valid result.
    #[error("ocr protocol error: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrText {
    pub text: String,
    pub confidence: f64,
}

impl OcrText {
    fn checked(text: String, confidence: f64) -> Result<Self, OcrError> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(OcrError::Protocol(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(OcrText { text, confidence })
    }
}

/// A text recognizer for averaged subtitle frames. One request per image.
pub trait OcrBackend: Send + Sync {
    fn recognize(&self, image: &Plane) -> Result<OcrText, OcrError>;
}

/// SHA-256 over `"W H\n"` followed by the 8-bit quantized pixels.
pub fn image_digest(image: &Plane) -> String {
    let mut h = Sha256::new();
    h.update(format!("{} {}\n", image.width, image.height).as_bytes());
    h.update(image.to_bytes());
    hex::encode(h.finalize())
}

/// 8-bit grayscale PNG encoding of a plane.
pub fn png_bytes(image: &Plane) -> Vec<u8> {
    let gray = image::GrayImage::from_raw(image.width as u32, image.height as u32, image.to_bytes())
        .expect("plane dimensions match its data");
    let mut out = Cursor::new(Vec::new());
    gray.write_to(&mut out, image::ImageFormat::Png)
        .expect("png encoding to memory");
    out.into_inner()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockEntry {
    pub digest: String,
    pub text: String,
    pub confidence: f64,
}

/// Offline backend answering from a digest-keyed table.
#[derive(Debug, Clone, Default)]
pub struct MockOcr {
    table: HashMap<String, OcrText>,
}

impl MockOcr {
    pub fn new(entries: impl IntoIterator<Item = MockEntry>) -> Self {
        MockOcr {
            table: entries
                .into_iter()
                .map(|e| {
                    (
                        e.digest,
                        OcrText {
                            text: e.text,
                            confidence: e.confidence,
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn insert(&mut self, image: &Plane, text: impl Into<String>, confidence: f64) {
        self.table.insert(
            image_digest(image),
            OcrText {
                text: text.into(),
                confidence,
            },
        );
    }
}

impl OcrBackend for MockOcr {
    fn recognize(&self, image: &Plane) -> Result<OcrText, OcrError> {
        let digest = image_digest(image);
        let hit = self
            .table
            .get(&digest)
            .ok_or_else(|| OcrError::Protocol(format!("no mock entry for image {digest}")))?;
        OcrText::checked(hit.text.clone(), hit.confidence)
    }
}

pub fn read_mock_table(path: &Path) -> std::io::Result<MockOcr> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut entries = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: MockEntry = serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("{}:{}: {e}", path.display(), i + 1),
            )
        })?;
        entries.push(e);
    }
    Ok(MockOcr::new(entries))
}

pub fn write_mock_table(path: &Path, entries: &[MockEntry]) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    for e in entries {
        writeln!(f, "{}", serde_json::to_string(e)?)?;
    }
    Ok(())
}

/// Runs `program args... <png path>` and reads `<confidence>\t<text>` from
/// the first line of its standard output.
#[derive(Debug, Clone)]
pub struct CommandOcr {
    pub program: String,
    pub args: Vec<String>,
}

impl CommandOcr {
    /// Splits a command line on whitespace.
    pub fn from_command_line(line: &str) -> Option<Self> {
        let mut parts = line.split_whitespace().map(str::to_string);
        let program = parts.next()?;
        Some(CommandOcr {
            program,
            args: parts.collect(),
        })
    }
}

pub(crate) fn parse_command_line(stdout: &str) -> Result<OcrText, OcrError> {
    let line = stdout
        .lines()
        .next()
        .ok_or_else(|| OcrError::Protocol("empty output".into()))?;
    let (conf, text) = line
        .split_once('\t')
        .ok_or_else(|| OcrError::Protocol(format!("expected '<confidence>\\t<text>', got {line:?}")))?;
    let confidence = conf
        .trim()
        .parse::<f64>()
        .map_err(|e| OcrError::Protocol(format!("confidence {conf:?}: {e}")))?;
    OcrText::checked(text.to_string(), confidence)
}

impl OcrBackend for CommandOcr {
    fn recognize(&self, image: &Plane) -> Result<OcrText, OcrError> {
        let mut tmp = tempfile::Builder::new()
            .suffix(".png")
            .tempfile()
            .map_err(|e| OcrError::Transport(format!("temp file: {e}")))?;
        tmp.write_all(&png_bytes(image))
            .and_then(|_| tmp.flush())
            .map_err(|e| OcrError::Transport(format!("temp file: {e}")))?;
        let out = Command::new(&self.program)
            .args(&self.args)
            .arg(tmp.path())
            .output()
            .map_err(|e| OcrError::Transport(format!("{}: {e}", self.program)))?;
        if !out.status.success() {
            return Err(OcrError::Transport(format!(
                "{} exited with {}: {}",
                self.program,
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        let stdout = String::from_utf8(out.stdout)
            .map_err(|e| OcrError::Protocol(format!("output not UTF-8: {e}")))?;
        parse_command_line(&stdout)
    }
}

/// POSTs PNG bytes and expects `{"text": ..., "confidence": ...}`.
#[derive(Debug, Clone)]
pub struct HttpOcr {
    pub url: String,
    agent: ureq::Agent,
}

impl HttpOcr {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpOcr {
            url: url.into(),
            agent,
        }
    }
}

impl OcrBackend for HttpOcr {
    fn recognize(&self, image: &Plane) -> Result<OcrText, OcrError> {
        let mut resp = self
            .agent
            .post(&self.url)
            .header("Content-Type", "image/png")
            .send(&png_bytes(image)[..])
            .map_err(|e| OcrError::Transport(format!("{}: {e}", self.url)))?;
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| OcrError::Transport(format!("reading response: {e}")))?;
        let payload: OcrText = serde_json::from_str(&body)
            .map_err(|e| OcrError::Protocol(format!("bad payload {body:?}: {e}")))?;
        OcrText::checked(payload.text, payload.confidence)
    }
}

#[derive(Debug, Clone)]
pub enum OcrAdapter {
    ExternalCommand(CommandOcr),
    Http(HttpOcr),
    Mock(MockOcr),
}

impl OcrBackend for OcrAdapter {
    fn recognize(&self, image: &Plane) -> Result<OcrText, OcrError> {
        match self {
            OcrAdapter::ExternalCommand(c) => c.recognize(image),
            OcrAdapter::Http(h) => h.recognize(image),
            OcrAdapter::Mock(m) => m.recognize(image),
        }
    }
}

pub fn run_ocr(clip: &SubtitleClip, backend: &dyn OcrBackend) -> Result<SubtitleClip, OcrError> {
    let ocr = backend.recognize(&clip.mean_frame)?;
    Ok(SubtitleClip {
        ocr: Some(ocr),
        ..clip.clone()
    })
}

/// Recognizes clips concurrently; output order follows input order.
pub fn run_ocr_batch(clips: &[SubtitleClip], backend: &dyn OcrBackend) -> Result<Vec<SubtitleClip>, OcrError> {
    clips.par_iter().map(|c| run_ocr(c, backend)).collect()
}
