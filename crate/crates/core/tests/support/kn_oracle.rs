//! Brute-force interpolated Kneser-Ney over string n-gram tables.
//!
//! Deliberately naive: every table is a `HashMap<Vec<String>, u64>` and
//! every probability is recomputed by scanning. Used to check the packed
//! implementation.

#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

const UNK: &str = "<unk>";
const BOS: &str = "<s>";
const EOS: &str = "</s>";

pub struct KnOracle {
    pub order: usize,
    vocab: HashSet<String>,
    unk_seen: bool,
    /// counts[k-1][g] for k-grams g: raw counts at the top order,
    /// continuation counts below.
    counts: Vec<HashMap<Vec<String>, u64>>,
    pub discounts: Vec<f64>,
}

impl KnOracle {
    pub fn train(sentences: &[String], order: usize, unk_threshold: u64) -> Self {
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for s in sentences {
            for t in s.split_whitespace() {
                *freq.entry(t).or_default() += 1;
            }
        }
        let mut vocab: HashSet<String> = [UNK, BOS, EOS].iter().map(|s| s.to_string()).collect();
        for (w, c) in &freq {
            if *c >= unk_threshold && ![UNK, BOS, EOS].contains(w) {
                vocab.insert(w.to_string());
            }
        }

        let mut unk_seen = false;
        let mut padded_sentences = Vec::new();
        for s in sentences {
            let toks: Vec<&str> = s.split_whitespace().collect();
            if toks.is_empty() {
                continue;
            }
            let mut p: Vec<String> = vec![BOS.to_string(); order - 1];
            for t in toks {
                if vocab.contains(t) && t != BOS && t != EOS {
                    p.push(t.to_string());
                } else {
                    unk_seen = true;
                    p.push(UNK.to_string());
                }
            }
            p.push(EOS.to_string());
            padded_sentences.push(p);
        }

        // all k-grams that end at a predicted position
        let mut counts = vec![HashMap::new(); order];
        let mut ending: Vec<HashSet<Vec<String>>> = vec![HashSet::new(); order + 1];
        for p in &padded_sentences {
            for j in (order - 1)..p.len() {
                for k in 1..=order {
                    ending[k].insert(p[j + 1 - k..=j].to_vec());
                }
                *counts[order - 1]
                    .entry(p[j + 1 - order..=j].to_vec())
                    .or_insert(0) += 1;
            }
        }
        for k in 1..order {
            for g in &ending[k + 1] {
                *counts[k - 1].entry(g[1..].to_vec()).or_insert(0) += 1;
            }
        }

        let discounts = counts
            .iter()
            .map(|table| {
                let n1 = table.values().filter(|&&c| c == 1).count() as f64;
                let n2 = table.values().filter(|&&c| c == 2).count() as f64;
                let d = n1 / (n1 + 2.0 * n2);
                if d > 0.0 && d < 1.0 {
                    d
                } else {
                    0.5
                }
            })
            .collect();

        Self {
            order,
            vocab,
            unk_seen,
            counts,
            discounts,
        }
    }

    /// Every word the model can predict.
    pub fn predictable(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .vocab
            .iter()
            .filter(|w| *w != BOS && (*w != UNK || self.unk_seen))
            .cloned()
            .collect();
        v.sort();
        v
    }

    fn map(&self, w: &str) -> String {
        if self.vocab.contains(w) {
            w.to_string()
        } else {
            UNK.to_string()
        }
    }

    pub fn prob(&self, context: &[&str], word: &str) -> f64 {
        let word = self.map(word);
        if word == BOS || (word == UNK && !self.unk_seen) {
            return 0.0;
        }
        let ctx: Vec<String> = context.iter().map(|w| self.map(w)).collect();
        let keep = ctx.len().min(self.order - 1);
        let ctx = &ctx[ctx.len() - keep..];

        let mut p = 1.0 / self.predictable().len() as f64;
        for k in 1..=keep + 1 {
            let c = &ctx[ctx.len() - (k - 1)..];
            let table = &self.counts[k - 1];
            let mut total = 0u64;
            let mut types = 0u64;
            for (g, n) in table {
                if g[..k - 1] == *c {
                    total += n;
                    types += 1;
                }
            }
            if total == 0 {
                continue;
            }
            let mut g = c.to_vec();
            g.push(word.clone());
            let n = table.get(&g).copied().unwrap_or(0) as f64;
            let d = self.discounts[k - 1];
            p = (n - d).max(0.0) / total as f64 + d * types as f64 / total as f64 * p;
        }
        p
    }
}
