use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, SampleRecord, Split, SplitAssignment};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.90,
            dev: 0.05,
            test: 0.05,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let ok = [self.train, self.dev, self.test].iter().all(|&r| r > 0.0)
            && (self.train + self.dev + self.test - 1.0).abs() < 1e-6;
        if ok {
            Ok(())
        } else {
            Err(CorpusError::InvalidRatios((self.train, self.dev, self.test)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    /// Draw held-out samples one at a time in shuffled order, rejecting any
    /// draw that would leave one of its glosses without a training
    /// occurrence.
    #[default]
    Incremental,
    /// Cut a shuffled order at the target sizes and reject the whole
    /// partition if dev or test has an OOV gloss.
    Partition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitOptions {
    pub ratios: SplitRatios,
    pub seed: u64,
    pub max_attempts: usize,
    #[serde(default)]
    pub strategy: SplitStrategy,
}

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions {
            ratios: SplitRatios::default(),
            seed: 0,
            max_attempts: 100,
            strategy: SplitStrategy::Incremental,
        }
    }
}

fn targets(n: usize, ratios: &SplitRatios) -> (usize, usize) {
    let dev = (n as f64 * ratios.dev).round() as usize;
    let test = ((n as f64 * ratios.test).round() as usize).min(n - dev.min(n));
    (dev.min(n), test)
}

/// Assigns every sample to train, dev or test so that dev and test contain
/// no gloss absent from train.
///
/// Deterministic for a given seed. When no attempt meets the target sizes
/// with zero OOVs, the best attempt is kept and OOV-bearing held-out samples
/// are moved to train; `achieved` then reports the adjusted ratios.
pub fn make_split(samples: &[SampleRecord], options: SplitOptions) -> Result<SplitAssignment, CorpusError> {
    if samples.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    options.ratios.validate()?;
    let mut ids = HashSet::new();
    for s in samples {
        if !ids.insert(s.sample_id.as_str()) {
            return Err(CorpusError::DuplicateSample(s.sample_id.clone()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let (dev_target, test_target) = targets(samples.len(), &options.ratios);
    let attempts = options.max_attempts.max(1);
    let mut best: Option<(usize, Vec<Split>)> = None;
    let mut used = 0;
    let mut success = false;
    for _ in 0..attempts {
        used += 1;
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut rng);
        let labels = match options.strategy {
            SplitStrategy::Incremental => incremental_attempt(samples, &order, dev_target, test_target),
            SplitStrategy::Partition => partition_attempt(samples, &order, dev_target, test_target),
        };
        let held_out = labels.iter().filter(|&&s| s != Split::Train).count();
        let oov_free = oov_bearing(samples, &labels).is_empty();
        if oov_free && held_out == dev_target + test_target {
            best = Some((held_out, labels));
            success = true;
            break;
        }
        // rank failed attempts by how many held-out samples survive the fallback
        let mut fixed = labels;
        move_oov_to_train(samples, &mut fixed);
        let kept = fixed.iter().filter(|&&s| s != Split::Train).count();
        if best.as_ref().is_none_or(|(k, _)| kept > *k) {
            best = Some((kept, fixed));
        }
    }
    let (_, labels) = best.expect("at least one attempt");
    debug_assert!(oov_bearing(samples, &labels).is_empty());

    let n = samples.len() as f64;
    let frac = |split: Split| labels.iter().filter(|&&s| s == split).count() as f64 / n;
    Ok(SplitAssignment {
        assignments: samples
            .iter()
            .zip(&labels)
            .map(|(s, &l)| (s.sample_id.clone(), l))
            .collect::<BTreeMap<_, _>>(),
        seed: options.seed,
        ratios: options.ratios,
        achieved: SplitRatios {
            train: frac(Split::Train),
            dev: frac(Split::Dev),
            test: frac(Split::Test),
        },
        attempts: used,
        fallback: !success,
    })
}

fn incremental_attempt(samples: &[SampleRecord], order: &[usize], dev_target: usize, test_target: usize) -> Vec<Split> {
    // occurrences of each gloss among samples currently labelled train
    let mut train_count: HashMap<&str, usize> = HashMap::new();
    for s in samples {
        for g in &s.glosses {
            *train_count.entry(g.as_str()).or_insert(0) += 1;
        }
    }
    let mut labels = vec![Split::Train; samples.len()];
    let (mut dev, mut test) = (0, 0);
    for &i in order {
        if dev == dev_target && test == test_target {
            break;
        }
        let mut need: HashMap<&str, usize> = HashMap::new();
        for g in &samples[i].glosses {
            *need.entry(g.as_str()).or_insert(0) += 1;
        }
        if need.iter().any(|(g, &k)| train_count[g] <= k) {
            continue;
        }
        for (g, k) in need {
            *train_count.get_mut(g).unwrap() -= k;
        }
        if dev < dev_target {
            labels[i] = Split::Dev;
            dev += 1;
        } else {
            labels[i] = Split::Test;
            test += 1;
        }
    }
    labels
}

fn partition_attempt(samples: &[SampleRecord], order: &[usize], dev_target: usize, test_target: usize) -> Vec<Split> {
    let mut labels = vec![Split::Train; samples.len()];
    for (rank, &i) in order.iter().enumerate() {
        if rank < dev_target {
            labels[i] = Split::Dev;
        } else if rank < dev_target + test_target {
            labels[i] = Split::Test;
        }
    }
    labels
}

/// Held-out samples containing a gloss that no train sample has.
fn oov_bearing(samples: &[SampleRecord], labels: &[Split]) -> Vec<usize> {
    let train: HashSet<&str> = samples
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == Split::Train)
        .flat_map(|(s, _)| s.glosses.iter().map(String::as_str))
        .collect();
    samples
        .iter()
        .zip(labels)
        .enumerate()
        .filter(|(_, (s, &l))| l != Split::Train && s.glosses.iter().any(|g| !train.contains(g.as_str())))
        .map(|(i, _)| i)
        .collect()
}

/// Moves OOV-bearing held-out samples to train one at a time, re-checking
/// after each move since a moved sample can cover other samples' glosses.
fn move_oov_to_train(samples: &[SampleRecord], labels: &mut [Split]) {
    while let Some(&i) = oov_bearing(samples, labels).first() {
        labels[i] = Split::Train;
    }
}
