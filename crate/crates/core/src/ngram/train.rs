use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use super::{Level, NGramModel, Vocab, BOS, BOS_ID, EOS, EOS_ID, UNK, UNK_ID};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainConfig {
    pub order: usize,
    /// Types seen fewer times than this become `<unk>`.
    pub unk_threshold: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            order: 5,
            unk_threshold: 2,
        }
    }
}

/// Train on in-memory sentences, one whitespace-tokenised sentence each.
pub fn train<S: AsRef<str>>(sentences: &[S], config: TrainConfig) -> Result<NGramModel> {
    train_with(
        || Ok(sentences.iter().map(|s| Ok(s.as_ref().to_string()))),
        config,
    )
}

/// Train on a corpus file holding one sentence per line.
pub fn train_from_file(path: impl AsRef<Path>, config: TrainConfig) -> Result<NGramModel> {
    let path = path.as_ref();
    let open = || {
        let f = std::fs::File::open(path)
            .map_err(|e| Error::io(format!("opening corpus {}", path.display()), e))?;
        Ok(std::io::BufReader::new(f)
            .lines()
            .map(move |l| l.map_err(|e| Error::io("reading corpus", e))))
    };
    train_with(open, config)
}

fn train_with<F, I>(source: F, config: TrainConfig) -> Result<NGramModel>
where
    F: Fn() -> Result<I>,
    I: Iterator<Item = Result<String>>,
{
    let n = config.order;
    if n == 0 {
        return Err(Error::Training("order must be at least 1".into()));
    }

    let mut freq: HashMap<String, u64> = HashMap::new();
    for line in source()? {
        for tok in line?.split_whitespace() {
            *freq.entry(tok.to_string()).or_default() += 1;
        }
    }
    if freq.is_empty() {
        return Err(Error::Training("corpus is empty".into()));
    }
    let mut kept: Vec<String> = freq
        .into_iter()
        .filter(|(w, c)| *c >= config.unk_threshold && !is_special(w))
        .map(|(w, _)| w)
        .collect();
    if kept.is_empty() {
        return Err(Error::Training(format!(
            "corpus has no in-vocabulary tokens at unk threshold {}",
            config.unk_threshold
        )));
    }
    kept.sort_unstable();
    let mut words = vec![UNK.to_string(), BOS.to_string(), EOS.to_string()];
    words.extend(kept);
    let vocab = Vocab::from_words(words);

    let bits = (usize::BITS - (vocab.len() - 1).leading_zeros()).max(1);
    if bits as usize * n > 128 {
        return Err(Error::Training(format!(
            "order {n} with a vocabulary of {} types does not fit 128-bit keys",
            vocab.len()
        )));
    }

    // every occurrence of a top-order n-gram, packed
    let mut occurrences: Vec<u128> = Vec::new();
    let mut unk_seen = false;
    let mut padded: Vec<u32> = Vec::new();
    for line in source()? {
        let line = line?;
        let mut toks = line.split_whitespace().peekable();
        if toks.peek().is_none() {
            continue;
        }
        padded.clear();
        padded.resize(n - 1, BOS_ID);
        for t in toks {
            let id = if is_special(t) { UNK_ID } else { vocab.id(t) };
            unk_seen |= id == UNK_ID;
            padded.push(id);
        }
        padded.push(EOS_ID);
        for window in padded.windows(n) {
            occurrences.push(
                window
                    .iter()
                    .fold(0u128, |acc, &id| (acc << bits) | u128::from(id)),
            );
        }
    }
    occurrences.sort_unstable();
    let (keys, counts) = run_lengths(&occurrences);
    drop(occurrences);

    let mut levels = vec![Level::new(keys, counts, bits)];
    for k in (1..n).rev() {
        // continuation count: each (k+1)-gram type contributes one left
        // extension to its k-token suffix
        let mask = (1u128 << (bits as usize * k)) - 1;
        let mut suffixes: Vec<u128> = levels
            .last()
            .unwrap()
            .keys
            .iter()
            .map(|&key| key & mask)
            .collect();
        suffixes.sort_unstable();
        let (keys, counts) = run_lengths(&suffixes);
        levels.push(Level::new(keys, counts, bits));
    }
    levels.reverse();

    let discounts = levels
        .iter()
        .enumerate()
        .map(|(i, level)| {
            let (n1, n2) = level.count_of_counts();
            let d = if n1 + n2 == 0 {
                f64::NAN
            } else {
                n1 as f64 / (n1 + 2 * n2) as f64
            };
            if d > 0.0 && d < 1.0 {
                d
            } else {
                log::warn!(
                    "order {}: degenerate count-of-counts (n1={n1}, n2={n2}); using discount 0.5",
                    i + 1
                );
                0.5
            }
        })
        .collect();

    Ok(NGramModel {
        order: n,
        vocab,
        bits,
        discounts,
        levels,
        unk_seen,
    })
}

fn is_special(w: &str) -> bool {
    w == UNK || w == BOS || w == EOS
}

fn run_lengths(sorted: &[u128]) -> (Vec<u128>, Vec<u32>) {
    let mut keys = Vec::new();
    let mut counts: Vec<u32> = Vec::new();
    for &k in sorted {
        if keys.last() == Some(&k) {
            *counts.last_mut().unwrap() += 1;
        } else {
            keys.push(k);
            counts.push(1);
        }
    }
    (keys, counts)
}
