//! Recognition and translation metrics: gloss WER, corpus BLEU-1..n and
//! ROUGE-L over character tokens.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distance::levenshtein;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("empty reference for sample {0}")]
    EmptyReference(usize),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("hypothesis/reference count mismatch: {hyps} vs {refs}")]
    LengthMismatch { hyps: usize, refs: usize },
    #[error("max n-gram order must be at least 1")]
    ZeroOrder,
}

/// Word error rate in percent: token edit distance over reference length.
pub fn wer<T: PartialEq>(hyp: &[T], reference: &[T]) -> Result<f64, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference(0));
    }
    Ok(100.0 * levenshtein(hyp, reference) as f64 / reference.len() as f64)
}

/// Micro-averaged WER: pooled edits over pooled reference length.
pub fn corpus_wer<T: PartialEq>(pairs: &[(Vec<T>, Vec<T>)]) -> Result<f64, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let mut edits = 0usize;
    let mut ref_len = 0usize;
    for (i, (hyp, reference)) in pairs.iter().enumerate() {
        if reference.is_empty() {
            return Err(MetricError::EmptyReference(i));
        }
        edits += levenshtein(hyp, reference);
        ref_len += reference.len();
    }
    Ok(100.0 * edits as f64 / ref_len as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharTokenization {
    /// One token per character, except that runs of ASCII letters and digits
    /// stay whole (`"11宗"` gives `["11", "宗"]`).
    #[default]
    KeepAsciiRuns,
    /// One token per Unicode scalar value.
    PerCharacter,
}

/// Splits text into character tokens; whitespace is dropped.
pub fn tokenize_chars(text: &str, mode: CharTokenization) -> Vec<String> {
    let mut out = Vec::new();
    let mut run = String::new();
    for ch in text.chars() {
        if mode == CharTokenization::KeepAsciiRuns && ch.is_ascii_alphanumeric() {
            run.push(ch);
            continue;
        }
        if !run.is_empty() {
            out.push(std::mem::take(&mut run));
        }
        if !ch.is_whitespace() {
            out.push(ch.to_string());
        }
    }
    if !run.is_empty() {
        out.push(run);
    }
    out
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram matches and total hypothesis n-grams per order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NgramStats {
    pub matches: Vec<usize>,
    pub totals: Vec<usize>,
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl NgramStats {
    pub fn of<T: Eq + Hash>(hyp: &[T], reference: &[T], max_n: usize) -> Self {
        let mut s = NgramStats {
            matches: vec![0; max_n],
            totals: vec![0; max_n],
            hyp_len: hyp.len(),
            ref_len: reference.len(),
        };
        for n in 1..=max_n {
            let h = ngram_counts(hyp, n);
            let r = ngram_counts(reference, n);
            s.matches[n - 1] = h
                .iter()
                .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
                .sum();
            s.totals[n - 1] = hyp.len().saturating_sub(n - 1);
        }
        s
    }

    fn add(&mut self, other: &NgramStats) {
        for (a, b) in self.matches.iter_mut().zip(&other.matches) {
            *a += b;
        }
        for (a, b) in self.totals.iter_mut().zip(&other.totals) {
            *a += b;
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    fn brevity_penalty(&self) -> f64 {
        if self.hyp_len == 0 {
            0.0
        } else if self.hyp_len < self.ref_len {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        } else {
            1.0
        }
    }

    /// BLEU-1..max_n on a 0-100 scale from (possibly smoothed) precisions.
    fn scores(&self, precisions: &[f64]) -> Vec<f64> {
        let bp = self.brevity_penalty();
        let mut log_sum = 0.0;
        let mut out = Vec::with_capacity(precisions.len());
        let mut zero = false;
        for (k, &p) in precisions.iter().enumerate() {
            if p <= 0.0 {
                zero = true;
            } else {
                log_sum += p.ln();
            }
            let n = (k + 1) as f64;
            out.push(if zero { 0.0 } else { 100.0 * bp * (log_sum / n).exp() });
        }
        out
    }
}

/// Corpus-level BLEU-1..`max_n` without smoothing, on a 0-100 scale.
pub fn bleu<T: Eq + Hash>(hyps: &[Vec<T>], refs: &[Vec<T>], max_n: usize) -> Result<Vec<f64>, MetricError> {
    check_corpus(hyps.len(), refs.len())?;
    if max_n == 0 {
        return Err(MetricError::ZeroOrder);
    }
    let mut total = NgramStats {
        matches: vec![0; max_n],
        totals: vec![0; max_n],
        ..Default::default()
    };
    for (h, r) in hyps.iter().zip(refs) {
        total.add(&NgramStats::of(h, r, max_n));
    }
    let precisions: Vec<f64> = total
        .matches
        .iter()
        .zip(&total.totals)
        .map(|(&m, &t)| if t == 0 { 0.0 } else { m as f64 / t as f64 })
        .collect();
    Ok(total.scores(&precisions))
}

/// Smoothing for sentence-level BLEU, where zero higher-order matches are
/// common.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Smoothing {
    #[default]
    None,
    /// Zero match counts are replaced by `epsilon`.
    Epsilon(f64),
    /// Add one to matches and totals for orders above 1.
    AddOne,
    /// The k-th zero-precision order gets `1 / (2^k * total)`.
    Exponential,
}

pub fn sentence_bleu<T: Eq + Hash>(hyp: &[T], reference: &[T], max_n: usize, smoothing: Smoothing) -> Vec<f64> {
    let s = NgramStats::of(hyp, reference, max_n);
    let mut inv = 1.0;
    let precisions: Vec<f64> = s
        .matches
        .iter()
        .zip(&s.totals)
        .enumerate()
        .map(|(k, (&m, &t))| {
            let (m, t) = (m as f64, t as f64);
            match smoothing {
                _ if t == 0.0 => 0.0,
                Smoothing::None => m / t,
                Smoothing::Epsilon(eps) => {
                    if m == 0.0 {
                        eps / t
                    } else {
                        m / t
                    }
                }
                Smoothing::AddOne => {
                    if k == 0 {
                        m / t
                    } else {
                        (m + 1.0) / (t + 1.0)
                    }
                }
                Smoothing::Exponential => {
                    if m == 0.0 {
                        inv *= 2.0;
                        1.0 / (inv * t)
                    } else {
                        m / t
                    }
                }
            }
        })
        .collect();
    s.scores(&precisions)
}

fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS F-measure for one pair, in `[0, 1]`.
pub fn rouge_l_sentence<T: PartialEq>(hyp: &[T], reference: &[T], beta: f64) -> f64 {
    if hyp.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(hyp, reference) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let p = lcs / hyp.len() as f64;
    let r = lcs / reference.len() as f64;
    let b2 = beta * beta;
    (1.0 + b2) * p * r / (r + b2 * p)
}

/// Mean per-sample ROUGE-L F-measure, scaled to 0-100.
pub fn rouge_l<T: PartialEq>(hyps: &[Vec<T>], refs: &[Vec<T>], beta: f64) -> Result<f64, MetricError> {
    check_corpus(hyps.len(), refs.len())?;
    let sum: f64 = hyps
        .iter()
        .zip(refs)
        .map(|(h, r)| rouge_l_sentence(h, r, beta))
        .sum();
    Ok(100.0 * sum / hyps.len() as f64)
}

fn check_corpus(hyps: usize, refs: usize) -> Result<(), MetricError> {
    if hyps != refs {
        return Err(MetricError::LengthMismatch { hyps, refs });
    }
    if hyps == 0 {
        return Err(MetricError::EmptyCorpus);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Wer,
    Bleu,
    RougeL,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub sample_id: String,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub metric: MetricKind,
    pub per_sample: Vec<SampleScore>,
    pub corpus: BTreeMap<String, f64>,
}

impl ScoreReport {
    /// Fixed-width text table: one row per sample, then the corpus row.
    pub fn to_table(&self) -> String {
        let columns: Vec<&String> = self.corpus.keys().collect();
        let mut out = format!("{:<24}", "sample");
        for c in &columns {
            out.push_str(&format!(" {c:>10}"));
        }
        out.push('\n');
        let row = |out: &mut String, id: &str, values: &BTreeMap<String, f64>| {
            out.push_str(&format!("{id:<24}"));
            for c in &columns {
                match values.get(*c) {
                    Some(v) => out.push_str(&format!(" {v:>10.2}")),
                    None => out.push_str(&format!(" {:>10}", "-")),
                }
            }
            out.push('\n');
        };
        for s in &self.per_sample {
            row(&mut out, &s.sample_id, &s.values);
        }
        row(&mut out, "CORPUS", &self.corpus);
        out
    }
}
