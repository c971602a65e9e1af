//! Corpus-level commands that are not tied to one episode directory.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use signcorpus_annotate::{Store, TaskSeed};
use signcorpus_core::align::AlignedRecord;
use signcorpus_core::corpus::{
    compute_stats, make_split, read_manifest, read_split_file, write_split_file, CorpusStats,
    Split,
};
use signcorpus_core::gloss::{
    canonicalize_for_scoring, parse, to_training_sequence, GlossAnnotation, HomosignRegistry,
    SequenceMode,
};
use signcorpus_core::metrics::{
    bleu, corpus_wer, rouge_l, rouge_l_sentence, sentence_bleu, tokenize_chars, wer,
    CharTokenization, MetricKind, SampleScore, ScoreReport, Smoothing,
};
use signcorpus_core::signal::{write_raw_planar, write_score_stream};
use signcorpus_core::subtitle::write_mock_table;
use signcorpus_core::synth::SynthSpec;
use signcorpus_core::tsv;

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::pipeline::{self, jsonl_bytes, write_atomic};

fn read_pairs(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    if !path.exists() {
        return Err(CliError::MissingInput(path.to_path_buf()));
    }
    Ok(tsv::read_pairs(path)?)
}

fn pairs_bytes(pairs: &[(String, String)]) -> Vec<u8> {
    pairs.iter().flat_map(|(id, v)| format!("{id}\t{v}\n").into_bytes()).collect()
}

fn parse_all(path: &Path) -> Result<Vec<(String, GlossAnnotation)>, CliError> {
    read_pairs(path)?
        .into_iter()
        .map(|(id, raw)| {
            parse(&raw)
                .map(|a| (id.clone(), a))
                .map_err(|e| CliError::Data(format!("{}: sample {id}: {e}", path.display())))
        })
        .collect()
}

fn load_registry(path: &Path) -> Result<HomosignRegistry, CliError> {
    let text = fs::read_to_string(path).map_err(|_| CliError::MissingInput(path.to_path_buf()))?;
    HomosignRegistry::from_dump(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Raw annotations to flat gloss sequences. Training mode builds the
/// registry from the annotations themselves and can write it out; test
/// mode resolves against a given registry.
pub fn gloss_normalize(
    input: &Path,
    output: &Path,
    registry_in: Option<&Path>,
    registry_out: Option<&Path>,
) -> Result<usize, CliError> {
    let anns = parse_all(input)?;
    let registry = match registry_in {
        Some(p) => load_registry(p)?,
        None => HomosignRegistry::from_annotations(anns.iter().map(|(_, a)| a)),
    };
    let mode = if registry_in.is_some() {
        SequenceMode::Test(&registry)
    } else {
        SequenceMode::Train
    };
    let out: Vec<(String, String)> = anns
        .iter()
        .map(|(id, a)| (id.clone(), to_training_sequence(a, mode).join(" ")))
        .collect();
    write_atomic(output, &pairs_bytes(&out))?;
    if let Some(p) = registry_out {
        write_atomic(p, registry.to_dump().as_bytes())?;
    }
    Ok(out.len())
}

fn split_tokens(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// Hypotheses aligned to reference order. A reference without hypothesis
/// scores against an empty one; a hypothesis without reference is an error.
fn paired(hyp: &Path, reference: &Path) -> Result<Vec<(String, String, String)>, CliError> {
    let refs = read_pairs(reference)?;
    let mut hyps: HashMap<String, String> = HashMap::new();
    for (id, h) in read_pairs(hyp)? {
        if hyps.insert(id.clone(), h).is_some() {
            return Err(CliError::Data(format!("{}: duplicate sample {id}", hyp.display())));
        }
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(refs.len());
    for (id, r) in refs {
        if !seen.insert(id.clone()) {
            return Err(CliError::Data(format!("{}: duplicate sample {id}", reference.display())));
        }
        let h = hyps.remove(&id).unwrap_or_default();
        out.push((id, h, r));
    }
    if let Some(extra) = hyps.keys().min() {
        return Err(CliError::Data(format!("hypothesis {extra} has no reference")));
    }
    Ok(out)
}

pub fn gloss_canonicalize(
    registry: &Path,
    hyp: &Path,
    reference: &Path,
    out_hyp: &Path,
    out_ref: &Path,
) -> Result<usize, CliError> {
    let reg = load_registry(registry)?;
    let mut hs = Vec::new();
    let mut rs = Vec::new();
    for (id, h, r) in paired(hyp, reference)? {
        let (h, r) = canonicalize_for_scoring(&split_tokens(&h), &split_tokens(&r), &reg);
        hs.push((id.clone(), h.join(" ")));
        rs.push((id, r.join(" ")));
    }
    write_atomic(out_hyp, &pairs_bytes(&hs))?;
    write_atomic(out_ref, &pairs_bytes(&rs))?;
    Ok(rs.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tokens {
    /// Whitespace-separated tokens.
    Words,
    /// Characters, with ASCII letter and digit runs kept whole.
    Chars,
    /// Every non-space character on its own.
    EachChar,
}

impl Tokens {
    fn apply(self, s: &str) -> Vec<String> {
        match self {
            Tokens::Words => split_tokens(s),
            Tokens::Chars => tokenize_chars(s, CharTokenization::KeepAsciiRuns),
            Tokens::EachChar => tokenize_chars(s, CharTokenization::PerCharacter),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScoreOptions {
    pub metric: MetricKind,
    pub tokens: Tokens,
    pub max_n: usize,
    pub beta: f64,
    pub smoothing: Smoothing,
    /// Canonicalize homosigns before WER.
    pub registry: Option<PathBuf>,
}

impl ScoreOptions {
    pub fn new(metric: MetricKind) -> Self {
        ScoreOptions {
            metric,
            tokens: if metric == MetricKind::Wer { Tokens::Words } else { Tokens::Chars },
            max_n: 4,
            beta: 1.0,
            smoothing: Smoothing::None,
            registry: None,
        }
    }
}

pub fn score(hyp: &Path, reference: &Path, opts: &ScoreOptions) -> Result<ScoreReport, CliError> {
    let rows = paired(hyp, reference)?;
    if rows.is_empty() {
        return Err(CliError::Data(format!("{} has no samples", reference.display())));
    }
    let registry = opts.registry.as_deref().map(load_registry).transpose()?;
    let mut ids = Vec::new();
    let mut pairs = Vec::new();
    for (id, h, r) in rows {
        let (mut h, mut r) = (opts.tokens.apply(&h), opts.tokens.apply(&r));
        if let Some(reg) = &registry {
            (h, r) = canonicalize_for_scoring(&h, &r, reg);
        }
        ids.push(id);
        pairs.push((h, r));
    }
    let one = |k: &str, v: f64| BTreeMap::from([(k.to_string(), v)]);
    let (per, corpus): (Vec<BTreeMap<String, f64>>, BTreeMap<String, f64>) = match opts.metric {
        MetricKind::Wer => {
            let per = pairs
                .iter()
                .zip(&ids)
                .map(|((h, r), id)| {
                    wer(h, r).map(|v| one("wer", v)).map_err(|e| CliError::Data(format!("sample {id}: {e}")))
                })
                .collect::<Result<_, _>>()?;
            (per, one("wer", corpus_wer(&pairs)?))
        }
        MetricKind::Bleu => {
            let names: Vec<String> = (1..=opts.max_n).map(|n| format!("bleu{n}")).collect();
            let per = pairs
                .iter()
                .map(|(h, r)| names.iter().cloned().zip(sentence_bleu(h, r, opts.max_n, opts.smoothing)).collect())
                .collect();
            let (hs, rs): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
            (per, names.into_iter().zip(bleu(&hs, &rs, opts.max_n)?).collect())
        }
        MetricKind::RougeL => {
            let per = pairs
                .iter()
                .map(|(h, r)| one("rouge_l", 100.0 * rouge_l_sentence(h, r, opts.beta)))
                .collect();
            let (hs, rs): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
            (per, one("rouge_l", rouge_l(&hs, &rs, opts.beta)?))
        }
    };
    Ok(ScoreReport {
        metric: opts.metric,
        per_sample: ids
            .into_iter()
            .zip(per)
            .map(|(sample_id, values)| SampleScore { sample_id, values })
            .collect(),
        corpus,
    })
}

fn manifest_path(flag: Option<&Path>, cfg: &PipelineConfig) -> Result<PathBuf, CliError> {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.paths.manifest.clone())
        .ok_or_else(|| CliError::Usage("no manifest given (--manifest or paths.manifest)".into()))
}

fn split_path(flag: Option<&Path>, cfg: &PipelineConfig) -> Result<PathBuf, CliError> {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.paths.split_file.clone())
        .ok_or_else(|| CliError::Usage("no split file given (--split or paths.split_file)".into()))
}

fn load_manifest(path: &Path) -> Result<Vec<signcorpus_core::corpus::SampleRecord>, CliError> {
    if !path.exists() {
        return Err(CliError::MissingInput(path.to_path_buf()));
    }
    Ok(read_manifest(path)?)
}

/// Splits the manifest and writes `<sample_id>\t<split>` lines. Returns a
/// JSON summary.
pub fn split(cfg: &PipelineConfig, manifest: Option<&Path>, out: Option<&Path>) -> Result<serde_json::Value, CliError> {
    let manifest = manifest_path(manifest, cfg)?;
    let out = split_path(out, cfg)?;
    let samples = load_manifest(&manifest)?;
    let a = make_split(&samples, cfg.split_options())?;
    let tmp = out.with_file_name(format!(
        ".{}.{}.tmp",
        out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        std::process::id()
    ));
    write_split_file(&tmp, &a)?;
    fs::rename(&tmp, &out)?;
    Ok(json!({
        "samples": samples.len(),
        "counts": Split::ALL.iter().map(|&s| (s.to_string(), a.count(s))).collect::<BTreeMap<_, _>>(),
        "achieved": a.achieved,
        "seed": a.seed,
        "attempts": a.attempts,
        "fallback": a.fallback,
    }))
}

pub fn stats(cfg: &PipelineConfig, manifest: Option<&Path>, split_file: Option<&Path>) -> Result<CorpusStats, CliError> {
    let samples = load_manifest(&manifest_path(manifest, cfg)?)?;
    let sp = split_path(split_file, cfg)?;
    if !sp.exists() {
        return Err(CliError::MissingInput(sp));
    }
    Ok(compute_stats(&samples, &read_split_file(&sp)?)?)
}

/// Seeds an annotation store with one task per aligned sample.
pub fn store_init(store: &Path, episodes: &[PathBuf], signer: &str, media_template: &str) -> Result<usize, CliError> {
    let mut seeds = Vec::new();
    for dir in episodes {
        let records: Vec<AlignedRecord> = pipeline::read_jsonl(&dir.join(pipeline::ALIGNED))?;
        for r in records {
            let sample_id = format!("{}_{:06}", r.episode_id, r.sign_start);
            let media = media_template
                .replace("{episode}", &r.episode_id)
                .replace("{sample_id}", &sample_id)
                .replace("{start}", &r.sign_start.to_string())
                .replace("{end}", &r.sign_end.to_string());
            seeds.push(TaskSeed {
                sample_id,
                media,
                subtitle_text: r.joined_text,
                signer: signer.to_string(),
                episode: r.episode_id,
                start_frame: r.sign_start,
                end_frame: r.sign_end,
            });
        }
    }
    let n = seeds.len();
    Store::create(store, seeds)?;
    Ok(n)
}

pub const TRUTH: &str = "truth.jsonl";
pub const SYNTH_SPEC: &str = "synth.json";
/// Where the default mock OCR configuration looks.
pub const MOCK_TABLE: &str = "mock_ocr.jsonl";

/// Writes a synthetic episode: score stream, subtitle strip, mock OCR
/// table, ground truth and the spec that produced them.
pub fn synth_episode(spec: &SynthSpec, out: &Path) -> Result<usize, CliError> {
    let e = spec.generate()?;
    fs::create_dir_all(out)?;
    let tmp = tempdir_in(out)?;
    write_score_stream(&tmp.join(pipeline::SCORES), &e.scores)?;
    write_raw_planar(&tmp.join(pipeline::SUBTITLE_FRAMES), &e.frames)?;
    write_mock_table(&tmp.join(MOCK_TABLE), &e.mock_table)?;
    fs::write(tmp.join(TRUTH), jsonl_bytes(&e.truth))?;
    fs::write(tmp.join(SYNTH_SPEC), serde_json::to_vec_pretty(spec)?)?;
    for entry in fs::read_dir(&tmp)? {
        let entry = entry?;
        fs::rename(entry.path(), out.join(entry.file_name()))?;
    }
    fs::remove_dir(&tmp)?;
    Ok(e.truth.len())
}

fn tempdir_in(parent: &Path) -> Result<PathBuf, CliError> {
    let p = parent.join(format!(".synth.{}.tmp", std::process::id()));
    if p.exists() {
        fs::remove_dir_all(&p)?;
    }
    fs::create_dir(&p)?;
    Ok(p)
}
