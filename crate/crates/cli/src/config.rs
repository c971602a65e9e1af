//! Pipeline parameters: one TOML file, with `key.path=value` overrides from
//! the command line applied before validation.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use signcorpus_core::align::TiePolicy;
use signcorpus_core::corpus::{SplitOptions, SplitRatios, SplitStrategy};
use signcorpus_core::signal::DurationBounds;
use signcorpus_core::subtitle::{
    read_mock_table, Cleaner, CommandOcr, HttpOcr, MergeAnchor, OcrAdapter, RegroupConfig,
    DEFAULT_BLANK_EPSILON, DEFAULT_REGROUP_THRESHOLD,
};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub fps: f64,
    /// Frames with an activity score at or above this are active.
    pub activity_threshold: f64,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    /// Mean temporal Laplacian above which a frame is a subtitle transition.
    pub laplacian_threshold: f64,
    /// Clips whose mean intensity is below this are blank.
    pub blank_epsilon: f64,
    /// Edit distance below which consecutive subtitle clips merge.
    pub regroup_threshold: usize,
    pub merge_anchor: MergeAnchor,
    pub tie_policy: TiePolicy,
    /// Inserted between subtitle texts assigned to the same sign clip.
    pub text_separator: String,
    /// Episodes processed in parallel.
    pub workers: usize,
    pub split: SplitConfig,
    pub adapters: AdapterConfig,
    pub paths: PathsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
    pub seed: u64,
    pub max_attempts: usize,
    pub strategy: SplitStrategy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdapterConfig {
    /// Background remover command line; none means frames pass through.
    pub cleaner: Option<String>,
    pub ocr: OcrConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OcrKind {
    Mock,
    Command,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcrConfig {
    pub kind: OcrKind,
    /// Mock lookup table; a relative path is taken inside each episode
    /// directory.
    pub mock_table: PathBuf,
    pub command: Option<String>,
    pub url: Option<String>,
    pub timeout_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub episodes: Vec<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub split_file: Option<PathBuf>,
    pub store: Option<PathBuf>,
    pub bind: Option<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            fps: 25.0,
            activity_threshold: 0.5,
            min_duration_s: 3.0,
            max_duration_s: 15.0,
            laplacian_threshold: 0.05,
            blank_epsilon: DEFAULT_BLANK_EPSILON,
            regroup_threshold: DEFAULT_REGROUP_THRESHOLD,
            merge_anchor: MergeAnchor::LastMember,
            tie_policy: TiePolicy::DiagonalFirst,
            text_separator: String::new(),
            workers: 4,
            split: SplitConfig::default(),
            adapters: AdapterConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

impl Default for SplitConfig {
    fn default() -> Self {
        let r = SplitRatios::default();
        let o = SplitOptions::default();
        SplitConfig {
            train: r.train,
            dev: r.dev,
            test: r.test,
            seed: o.seed,
            max_attempts: o.max_attempts,
            strategy: o.strategy,
        }
    }
}

impl Default for AdapterConfig {
    fn default() -> Self {
        AdapterConfig {
            cleaner: None,
            ocr: OcrConfig::default(),
        }
    }
}

impl Default for OcrConfig {
    fn default() -> Self {
        OcrConfig {
            kind: OcrKind::Mock,
            mock_table: PathBuf::from("mock_ocr.jsonl"),
            command: None,
            url: None,
            timeout_s: 30.0,
        }
    }
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::config(field, format!("must be positive, got {v}")))
    }
}

/// Sets `a.b.c = value` in a TOML table, creating intermediate tables.
/// The value is parsed as TOML, falling back to a bare string.
fn set_dotted(root: &mut toml::Table, key: &str, raw: &str) -> Result<(), CliError> {
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("bad override key {key:?}")));
    }
    let mut table = root;
    for (depth, part) in parts[..parts.len() - 1].iter().enumerate() {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(parts[..=depth].join("."), "is not a table"))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Pulls the offending key out of a deserialization message when toml
/// reports one.
fn field_of(message: &str) -> String {
    for marker in ["unknown field `", "missing field `"] {
        if let Some(rest) = message.split(marker).nth(1) {
            if let Some(name) = rest.split('`').next() {
                return name.to_string();
            }
        }
    }
    "config".to_string()
}

impl PipelineConfig {
    /// Reads `path` (or starts from defaults), applies `KEY=VALUE`
    /// overrides, and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|_| CliError::MissingInput(p.to_path_buf()))?;
                toml::from_str::<toml::Table>(&text).map_err(|e| CliError::config("config", e.to_string()))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("override {o:?} is not KEY=VALUE")))?;
            set_dotted(&mut table, k.trim(), v.trim())?;
        }
        let cfg: PipelineConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| {
            let msg = e.message().to_string();
            CliError::config(field_of(&msg), msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        positive("fps", self.fps)?;
        positive("activity_threshold", self.activity_threshold)?;
        positive("min_duration_s", self.min_duration_s)?;
        positive("max_duration_s", self.max_duration_s)?;
        if self.max_duration_s < self.min_duration_s {
            return Err(CliError::config("max_duration_s", "must not be below min_duration_s"));
        }
        positive("laplacian_threshold", self.laplacian_threshold)?;
        positive("blank_epsilon", self.blank_epsilon)?;
        if self.regroup_threshold == 0 {
            return Err(CliError::config("regroup_threshold", "must be positive"));
        }
        if self.workers == 0 {
            return Err(CliError::config("workers", "must be positive"));
        }
        self.split_ratios()
            .validate()
            .map_err(|e| CliError::config("split", e.to_string()))?;
        if self.split.max_attempts == 0 {
            return Err(CliError::config("split.max_attempts", "must be positive"));
        }
        if let Some(c) = &self.adapters.cleaner {
            if Cleaner::from_command_line(c).is_none() {
                return Err(CliError::config("adapters.cleaner", "empty command line"));
            }
        }
        let ocr = &self.adapters.ocr;
        positive("adapters.ocr.timeout_s", ocr.timeout_s)?;
        match ocr.kind {
            OcrKind::Command if ocr.command.as_deref().and_then(CommandOcr::from_command_line).is_none() => {
                Err(CliError::config("adapters.ocr.command", "required for kind = \"command\""))
            }
            OcrKind::Http if ocr.url.as_deref().is_none_or(|u| u.trim().is_empty()) => {
                Err(CliError::config("adapters.ocr.url", "required for kind = \"http\""))
            }
            _ => Ok(()),
        }
    }

    pub fn bounds(&self) -> DurationBounds {
        DurationBounds {
            min_s: self.min_duration_s,
            max_s: self.max_duration_s,
            inclusive: true,
        }
    }

    pub fn regroup(&self) -> RegroupConfig {
        RegroupConfig {
            threshold: self.regroup_threshold,
            anchor: self.merge_anchor,
        }
    }

    pub fn split_ratios(&self) -> SplitRatios {
        SplitRatios {
            train: self.split.train,
            dev: self.split.dev,
            test: self.split.test,
        }
    }

    pub fn split_options(&self) -> SplitOptions {
        SplitOptions {
            ratios: self.split_ratios(),
            seed: self.split.seed,
            max_attempts: self.split.max_attempts,
            strategy: self.split.strategy,
        }
    }

    pub fn cleaner(&self) -> Cleaner {
        self.adapters
            .cleaner
            .as_deref()
            .and_then(Cleaner::from_command_line)
            .unwrap_or_default()
    }

    /// OCR backend for one episode directory.
    pub fn ocr_adapter(&self, episode_dir: &Path) -> Result<OcrAdapter, CliError> {
        let ocr = &self.adapters.ocr;
        Ok(match ocr.kind {
            OcrKind::Mock => {
                let table = if ocr.mock_table.is_absolute() {
                    ocr.mock_table.clone()
                } else {
                    episode_dir.join(&ocr.mock_table)
                };
                if !table.exists() {
                    return Err(CliError::MissingInput(table));
                }
                OcrAdapter::Mock(read_mock_table(&table).map_err(|e| CliError::Data(format!("{}: {e}", table.display())))?)
            }
            OcrKind::Command => OcrAdapter::ExternalCommand(
                ocr.command
                    .as_deref()
                    .and_then(CommandOcr::from_command_line)
                    .ok_or_else(|| CliError::config("adapters.ocr.command", "required for kind = \"command\""))?,
            ),
            OcrKind::Http => OcrAdapter::Http(HttpOcr::new(
                ocr.url.clone().unwrap_or_default(),
                Duration::from_secs_f64(ocr.timeout_s),
            )),
        })
    }
}
