//! Interpolated Kneser-Ney n-gram language model.
//!
//! One absolute discount per order, `D_k = n₁ / (n₁ + 2·n₂)` from the
//! count-of-counts of that order. The highest order uses raw counts; lower
//! orders use continuation counts (number of distinct left extensions), and
//! the unigram level interpolates with a uniform distribution over the
//! predictable vocabulary:
//!
//! ```text
//! P_k(w | c) = max(N_k(c w) − D_k, 0) / N_k(c ·)
//!            + D_k · T_k(c) / N_k(c ·) · P_{k−1}(w | c′)
//! P_0(w)     = 1 / |V|
//! ```
//!
//! where `T_k(c)` is the number of distinct words following `c` at that
//! order and `c′` drops the oldest token of `c`. A context never seen at an
//! order passes the lower-order estimate through unchanged.
//!
//! The predictable vocabulary is every type except `<s>`; `<unk>` belongs to
//! it only when the training corpus produced unknown tokens. A model trained
//! with `unk_threshold = 1` is therefore closed-vocabulary.

mod io;
mod serve;
mod train;

use std::collections::HashMap;

pub use serve::NGramBackend;
pub use train::{train, train_from_file, TrainConfig};

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

pub(crate) const UNK_ID: u32 = 0;
pub(crate) const BOS_ID: u32 = 1;
pub(crate) const EOS_ID: u32 = 2;

/// Current model file format.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub(crate) fn from_words(words: Vec<String>) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Self { words, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Id of `word`, with out-of-vocabulary words mapped to `<unk>`.
    pub fn id(&self, word: &str) -> u32 {
        self.index.get(word).copied().unwrap_or(UNK_ID)
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }
}

/// Counts of one order, sorted by packed key, plus per-context totals.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Level {
    pub keys: Vec<u128>,
    pub counts: Vec<u32>,
    pub ctx_keys: Vec<u128>,
    pub ctx_totals: Vec<u64>,
    pub ctx_types: Vec<u32>,
}

impl Level {
    pub fn new(keys: Vec<u128>, counts: Vec<u32>, bits: u32) -> Self {
        let mut ctx_keys = Vec::new();
        let mut ctx_totals = Vec::new();
        let mut ctx_types = Vec::new();
        for (&k, &c) in keys.iter().zip(&counts) {
            let ctx = k >> bits;
            if ctx_keys.last() == Some(&ctx) {
                *ctx_totals.last_mut().unwrap() += u64::from(c);
                *ctx_types.last_mut().unwrap() += 1;
            } else {
                ctx_keys.push(ctx);
                ctx_totals.push(u64::from(c));
                ctx_types.push(1);
            }
        }
        Self {
            keys,
            counts,
            ctx_keys,
            ctx_totals,
            ctx_types,
        }
    }

    pub fn count(&self, key: u128) -> u32 {
        self.keys
            .binary_search(&key)
            .map(|i| self.counts[i])
            .unwrap_or(0)
    }

    pub fn context(&self, ctx: u128) -> Option<(u64, u32)> {
        self.ctx_keys
            .binary_search(&ctx)
            .ok()
            .map(|i| (self.ctx_totals[i], self.ctx_types[i]))
    }

    /// `(n₁, n₂)`: number of entries with count one and two.
    pub fn count_of_counts(&self) -> (u64, u64) {
        self.counts.iter().fold((0, 0), |(n1, n2), &c| match c {
            1 => (n1 + 1, n2),
            2 => (n1, n2 + 1),
            _ => (n1, n2),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    vocab: Vocab,
    /// Bits per token id in packed keys.
    bits: u32,
    /// `discounts[k-1]` is the discount of order `k`.
    discounts: Vec<f64>,
    levels: Vec<Level>,
    unk_seen: bool,
}

impl NGramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn discount(&self, order: usize) -> f64 {
        self.discounts[order - 1]
    }

    pub fn discounts(&self) -> &[f64] {
        &self.discounts
    }

    /// Number of distinct entries stored at each order.
    pub fn type_counts(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.keys.len()).collect()
    }

    /// Size of the predictable vocabulary the unigram level smooths over.
    pub fn predictable_vocab_size(&self) -> usize {
        self.vocab.len() - 1 - usize::from(!self.unk_seen)
    }

    pub(crate) fn pack(&self, ids: &[u32]) -> u128 {
        ids.iter()
            .fold(0u128, |acc, &id| (acc << self.bits) | u128::from(id))
    }

    /// `P(word | context)`; contexts longer than `order − 1` are truncated
    /// to their most recent tokens. Unknown words and context tokens map to
    /// `<unk>`; `<s>` in a context is the sentence-start marker.
    pub fn prob(&self, context: &[&str], word: &str) -> f64 {
        let ctx: Vec<u32> = context.iter().map(|w| self.vocab.id(w)).collect();
        self.prob_ids(&ctx, self.vocab.id(word))
    }

    pub(crate) fn prob_ids(&self, context: &[u32], word: u32) -> f64 {
        if word == BOS_ID || (word == UNK_ID && !self.unk_seen) {
            return 0.0;
        }
        let keep = context.len().min(self.order - 1);
        let ctx = &context[context.len() - keep..];
        let mut p = 1.0 / self.predictable_vocab_size() as f64;
        for k in 1..=keep + 1 {
            let c = &ctx[ctx.len() - (k - 1)..];
            let level = &self.levels[k - 1];
            let ctx_key = self.pack(c);
            if let Some((total, types)) = level.context(ctx_key) {
                let d = self.discounts[k - 1];
                let count = level.count((ctx_key << self.bits) | u128::from(word));
                let total = total as f64;
                p = (f64::from(count) - d).max(0.0) / total + d * f64::from(types) / total * p;
            }
        }
        p
    }
}
