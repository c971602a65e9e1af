use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{CorpusError, SampleRecord, Split};

/// One row of the split statistics table. OOV fields are `None` where they
/// do not apply (train and overall rows).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SplitStats {
    pub hours: f64,
    pub samples: usize,
    pub gloss_vocab: usize,
    pub running_glosses: usize,
    pub gloss_oovs: Option<usize>,
    pub gloss_singletons: usize,
    pub char_vocab: usize,
    pub running_chars: usize,
    pub char_oovs: Option<usize>,
    pub char_singletons: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub train: SplitStats,
    pub dev: SplitStats,
    pub test: SplitStats,
    pub overall: SplitStats,
}

fn counts<'a, I: IntoIterator<Item = &'a str>>(items: I) -> HashMap<&'a str, usize> {
    let mut m = HashMap::new();
    for it in items {
        *m.entry(it).or_insert(0) += 1;
    }
    m
}

fn chars_of(s: &SampleRecord) -> impl Iterator<Item = &str> {
    s.text
        .char_indices()
        .filter(|(_, c)| !c.is_whitespace())
        .map(move |(i, c)| &s.text[i..i + c.len_utf8()])
}

fn row(samples: &[&SampleRecord], train: Option<(&HashSet<&str>, &HashSet<&str>)>) -> SplitStats {
    let glosses = counts(samples.iter().flat_map(|s| s.glosses.iter().map(String::as_str)));
    let chars = counts(samples.iter().flat_map(|s| chars_of(s)));
    let oovs = |m: &HashMap<&str, usize>, vocab: &HashSet<&str>| m.keys().filter(|k| !vocab.contains(*k)).count();
    SplitStats {
        hours: samples.iter().map(|s| s.duration_seconds()).sum::<f64>() / 3600.0,
        samples: samples.len(),
        gloss_vocab: glosses.len(),
        running_glosses: glosses.values().sum(),
        gloss_oovs: train.map(|(g, _)| oovs(&glosses, g)),
        gloss_singletons: glosses.values().filter(|&&c| c == 1).count(),
        char_vocab: chars.len(),
        running_chars: chars.values().sum(),
        char_oovs: train.map(|(_, c)| oovs(&chars, c)),
        char_singletons: chars.values().filter(|&&c| c == 1).count(),
    }
}

/// Per-split and overall statistics. Singletons are counted within each
/// split; OOVs are types absent from train. Characters exclude whitespace.
pub fn compute_stats(samples: &[SampleRecord], assignment: &BTreeMap<String, Split>) -> Result<CorpusStats, CorpusError> {
    let mut by_split: HashMap<Split, Vec<&SampleRecord>> = HashMap::new();
    for s in samples {
        let split = assignment
            .get(&s.sample_id)
            .ok_or_else(|| CorpusError::Unassigned(s.sample_id.clone()))?;
        by_split.entry(*split).or_default().push(s);
    }
    let part = |split: Split| by_split.get(&split).cloned().unwrap_or_default();
    let train = part(Split::Train);
    let train_glosses: HashSet<&str> = train.iter().flat_map(|s| s.glosses.iter().map(String::as_str)).collect();
    let train_chars: HashSet<&str> = train.iter().flat_map(|s| chars_of(s)).collect();
    let vocab = Some((&train_glosses, &train_chars));
    let all: Vec<&SampleRecord> = samples.iter().collect();
    Ok(CorpusStats {
        train: row(&train, None),
        dev: row(&part(Split::Dev), vocab),
        test: row(&part(Split::Test), vocab),
        overall: row(&all, None),
    })
}

impl CorpusStats {
    pub fn rows(&self) -> [(&'static str, &SplitStats); 4] {
        [
            ("train", &self.train),
            ("dev", &self.dev),
            ("test", &self.test),
            ("overall", &self.overall),
        ]
    }

    /// Text table with the gloss and character column groups side by side.
    pub fn to_table(&self) -> String {
        let na = |v: Option<usize>| v.map_or("N/A".to_string(), |v| v.to_string());
        let mut out = format!(
            "{:<8} {:>7} {:>8} | {:>7} {:>9} {:>6} {:>10} | {:>7} {:>9} {:>6} {:>10}\n",
            "split", "hours", "samples", "g.vocab", "g.running", "g.oov", "g.single", "c.vocab", "c.running", "c.oov", "c.single"
        );
        for (name, r) in self.rows() {
            out.push_str(&format!(
                "{:<8} {:>7.2} {:>8} | {:>7} {:>9} {:>6} {:>10} | {:>7} {:>9} {:>6} {:>10}\n",
                name,
                r.hours,
                r.samples,
                r.gloss_vocab,
                r.running_glosses,
                na(r.gloss_oovs),
                r.gloss_singletons,
                r.char_vocab,
                r.running_chars,
                na(r.char_oovs),
                r.char_singletons
            ));
        }
        out
    }
}
