//! Backend scoring interface.
//!
//! A backend turns sentences into per-token surprisals (bits) with character
//! spans into the exact input string. The harness never sees the model's
//! internal state; everything it measures is a sum of token surprisals.
//!
//! Backends condition the first token on a beginning-of-sequence marker
//! that is never itself scored, so `total_bits` is `−log₂ P(sentence | start)`
//! for every backend alike.

mod transport;
pub mod wire;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::suite::RegionedSentence;

pub use transport::{ExecBackend, Loopback, TcpBackend, WireClient};

/// Tolerance for the additivity invariants, in bits.
pub const ADDITIVITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenScore {
    pub text: String,
    pub surprisal_bits: f64,
    /// Character offsets, half-open.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceScore {
    pub sentence: String,
    pub tokens: Vec<TokenScore>,
    pub total_bits: f64,
}

impl SentenceScore {
    /// Build a score after checking the token invariants: finite
    /// non-negative surprisals, ordered non-overlapping in-bounds spans, and
    /// coverage of every non-whitespace character.
    pub fn from_tokens(sentence: &str, tokens: Vec<TokenScore>) -> Result<Self> {
        let chars: Vec<char> = sentence.chars().collect();
        let bad = |why: String| Error::protocol(format!("sentence {sentence:?}: {why}"));
        let mut covered = vec![false; chars.len()];
        let mut prev_end = 0;
        for (i, t) in tokens.iter().enumerate() {
            if !t.surprisal_bits.is_finite() || t.surprisal_bits < 0.0 {
                return Err(bad(format!("token {i} has surprisal {}", t.surprisal_bits)));
            }
            if t.start >= t.end || t.end > chars.len() {
                return Err(bad(format!(
                    "token {i} has invalid span [{}, {})",
                    t.start, t.end
                )));
            }
            if t.start < prev_end {
                return Err(bad(format!(
                    "token {i} overlaps or precedes the previous token"
                )));
            }
            prev_end = t.end;
            covered[t.start..t.end].iter_mut().for_each(|c| *c = true);
        }
        if let Some(pos) = chars
            .iter()
            .zip(&covered)
            .position(|(c, &cov)| !cov && !c.is_whitespace())
        {
            return Err(bad(format!(
                "character {pos} ({:?}) is not covered by any token",
                chars[pos]
            )));
        }
        let total_bits = tokens.iter().map(|t| t.surprisal_bits).sum();
        Ok(Self {
            sentence: sentence.to_string(),
            tokens,
            total_bits,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Ngram,
    Neural,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendInfo {
    pub name: String,
    pub kind: BackendKind,
    pub context_window: Option<u32>,
    pub version: String,
}

impl BackendInfo {
    pub fn check(&self) -> Result<()> {
        if self.context_window.is_some() != (self.kind == BackendKind::Ngram) {
            return Err(Error::protocol(format!(
                "backend {}: context_window must be present exactly for n-gram backends",
                self.name
            )));
        }
        Ok(())
    }
}

/// Per-sentence outcome reported by a backend: tokens, or a failure confined
/// to that sentence.
pub type RawResult = std::result::Result<Vec<TokenScore>, String>;

pub trait Backend: Send + Sync {
    fn handshake(&self) -> Result<BackendInfo>;

    /// Score one batch; one result per sentence, in input order.
    fn score_batch(&self, sentences: &[String]) -> Result<Vec<RawResult>>;

    /// Score several batches with up to `jobs` of them in flight. Output
    /// order follows input order.
    fn score_batches(&self, batches: &[Vec<String>], jobs: usize) -> Result<Vec<Vec<RawResult>>> {
        if jobs <= 1 || batches.len() <= 1 {
            return batches.iter().map(|b| self.score_batch(b)).collect();
        }
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::transport(format!("cannot start scoring threads: {e}")))?;
        pool.install(|| batches.par_iter().map(|b| self.score_batch(b)).collect())
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn handshake(&self) -> Result<BackendInfo> {
        (**self).handshake()
    }
    fn score_batch(&self, sentences: &[String]) -> Result<Vec<RawResult>> {
        (**self).score_batch(sentences)
    }
    fn score_batches(&self, batches: &[Vec<String>], jobs: usize) -> Result<Vec<Vec<RawResult>>> {
        (**self).score_batches(batches, jobs)
    }
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn handshake(&self) -> Result<BackendInfo> {
        (**self).handshake()
    }
    fn score_batch(&self, sentences: &[String]) -> Result<Vec<RawResult>> {
        (**self).score_batch(sentences)
    }
    fn score_batches(&self, batches: &[Vec<String>], jobs: usize) -> Result<Vec<Vec<RawResult>>> {
        (**self).score_batches(batches, jobs)
    }
}

/// Obtain and check the backend's identity.
pub fn handshake(backend: &dyn Backend) -> Result<BackendInfo> {
    let info = backend.handshake()?;
    info.check()?;
    Ok(info)
}

/// Score sentences in one batch.
pub fn score(backend: &dyn Backend, sentences: &[String]) -> Result<Vec<SentenceScore>> {
    score_with_jobs(backend, sentences, 1, sentences.len().max(1))
}

/// Score sentences split into batches of `batch_size`, up to `jobs` batches
/// in flight. The result does not depend on either parameter for a
/// deterministic backend.
pub fn score_with_jobs(
    backend: &dyn Backend,
    sentences: &[String],
    jobs: usize,
    batch_size: usize,
) -> Result<Vec<SentenceScore>> {
    if let Some(i) = sentences.iter().position(|s| s.trim().is_empty()) {
        return Err(Error::validation(format!("empty sentence at position {i}")));
    }
    let batches: Vec<Vec<String>> = sentences
        .chunks(batch_size.max(1))
        .map(<[String]>::to_vec)
        .collect();
    let results = backend.score_batches(&batches, jobs)?;
    let mut out = Vec::with_capacity(sentences.len());
    for (batch, res) in batches.iter().zip(results) {
        if res.len() != batch.len() {
            return Err(Error::protocol(format!(
                "backend returned {} results for {} sentences",
                res.len(),
                batch.len()
            )));
        }
        for (sentence, r) in batch.iter().zip(res) {
            let tokens = r.map_err(|msg| {
                Error::protocol(format!("backend failed on sentence {sentence:?}: {msg}"))
            })?;
            out.push(SentenceScore::from_tokens(sentence, tokens)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionScore {
    pub name: String,
    pub bits: f64,
    pub n_tokens: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionScores {
    pub regions: Vec<RegionScore>,
}

impl RegionScores {
    pub fn region(&self, name: &str) -> Option<&RegionScore> {
        self.regions.iter().find(|r| r.name == name)
    }

    pub fn total_bits(&self) -> f64 {
        self.regions.iter().map(|r| r.bits).sum()
    }

    /// Combine the regions of several physical sentences of one condition,
    /// ordered by `order`.
    pub fn merge(parts: Vec<RegionScores>, order: &[String]) -> Result<Self> {
        let mut all: Vec<RegionScore> = parts.into_iter().flat_map(|p| p.regions).collect();
        let mut regions = Vec::with_capacity(order.len());
        for name in order {
            let pos = all.iter().position(|r| &r.name == name).ok_or_else(|| {
                Error::validation(format!("region {name} missing from every sentence"))
            })?;
            regions.push(all.swap_remove(pos));
        }
        if let Some(extra) = all.first() {
            return Err(Error::validation(format!(
                "region {} scored twice",
                extra.name
            )));
        }
        Ok(Self { regions })
    }
}

/// Assign each token to the region holding its first non-whitespace
/// character and sum surprisals per region.
pub fn align(score: &SentenceScore, rsent: &RegionedSentence) -> Result<RegionScores> {
    if score.sentence != rsent.text {
        return Err(Error::validation(format!(
            "alignment text mismatch: scored {:?}, rendered {:?}",
            score.sentence, rsent.text
        )));
    }
    let mut regions: Vec<RegionScore> = rsent
        .spans
        .iter()
        .map(|s| RegionScore {
            name: s.region.clone(),
            bits: 0.0,
            n_tokens: 0,
        })
        .collect();
    let chars: Vec<char> = rsent.text.chars().collect();
    for t in &score.tokens {
        let anchor = (t.start..t.end.min(chars.len()))
            .find(|&p| !chars[p].is_whitespace())
            .unwrap_or(t.start);
        let idx = rsent
            .spans
            .iter()
            .rposition(|s| !s.is_empty() && s.start <= anchor)
            .ok_or_else(|| {
                Error::protocol(format!(
                    "token {:?} at {} precedes the first region of {:?}",
                    t.text, t.start, rsent.text
                ))
            })?;
        regions[idx].bits += t.surprisal_bits;
        regions[idx].n_tokens += 1;
    }
    Ok(RegionScores { regions })
}

/// Whitespace tokenisation with character spans.
pub fn whitespace_tokens(sentence: &str) -> Vec<(usize, usize, &str)> {
    let mut out = Vec::new();
    let mut start: Option<(usize, usize)> = None; // (char index, byte index)
    let mut char_idx = 0;
    for (byte_idx, c) in sentence.char_indices() {
        if c.is_whitespace() {
            if let Some((cs, bs)) = start.take() {
                out.push((cs, char_idx, &sentence[bs..byte_idx]));
            }
        } else if start.is_none() {
            start = Some((char_idx, byte_idx));
        }
        char_idx += 1;
    }
    if let Some((cs, bs)) = start {
        out.push((cs, char_idx, &sentence[bs..]));
    }
    out
}
