//! Scoring a suite against a backend and the persisted scores file.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::ConditionScores;
use crate::protocol::{
    align, handshake, score_with_jobs, Backend, BackendInfo, RegionScores, SentenceScore,
    ADDITIVITY_TOLERANCE,
};
use crate::suite::{render, ConditionLabel, RegionSpan, TestSuite};

pub const SCORES_FORMAT: u32 = 1;

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRef {
    pub name: String,
    pub sha256: String,
}

/// One physical sentence: its scores, region spans and per-region sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSentence {
    #[serde(flatten)]
    pub score: SentenceScore,
    pub spans: Vec<RegionSpan>,
    pub alignment: RegionScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCondition {
    pub item: u64,
    pub label: ConditionLabel,
    pub sentences: Vec<ScoredSentence>,
    /// Region sums across all sentences, in suite region order.
    pub regions: RegionScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoresFile {
    pub format: u32,
    pub suite: SuiteRef,
    pub backend: BackendInfo,
    pub region_names: Vec<String>,
    pub conditions: Vec<ScoredCondition>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoreOptions {
    pub jobs: usize,
    pub batch_size: usize,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        Self {
            jobs: 1,
            batch_size: 64,
        }
    }
}

/// Render every (item, condition), score each distinct sentence once and
/// align the results to regions.
pub fn score_suite(
    suite: &TestSuite,
    suite_sha256: &str,
    backend: &dyn Backend,
    options: ScoreOptions,
) -> Result<ScoresFile> {
    suite.validate()?;
    let info = handshake(backend)?;

    let mut rendered = Vec::new();
    let mut unique: Vec<String> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for item in &suite.items {
        for label in item.conditions.keys() {
            let sentences = render(item, label)?;
            for s in &sentences {
                if !seen.contains_key(&s.text) {
                    seen.insert(s.text.clone(), unique.len());
                    unique.push(s.text.clone());
                }
            }
            rendered.push((item.id, label.clone(), sentences));
        }
    }
    log::info!(
        "scoring {} distinct sentences of suite {} with {}",
        unique.len(),
        suite.name,
        info.name
    );
    let scores = score_with_jobs(backend, &unique, options.jobs, options.batch_size)?;

    let mut conditions = Vec::with_capacity(rendered.len());
    for (item, label, sentences) in rendered {
        let mut scored = Vec::with_capacity(sentences.len());
        for rs in sentences {
            let score = scores[seen[&rs.text]].clone();
            let alignment = align(&score, &rs)?;
            scored.push(ScoredSentence {
                score,
                spans: rs.spans,
                alignment,
            });
        }
        let regions = RegionScores::merge(
            scored.iter().map(|s| s.alignment.clone()).collect(),
            &suite.region_names,
        )
        .map_err(|e| Error::validation(format!("item {item}, condition {label}: {e}")))?;
        conditions.push(ScoredCondition {
            item,
            label,
            sentences: scored,
            regions,
        });
    }

    let file = ScoresFile {
        format: SCORES_FORMAT,
        suite: SuiteRef {
            name: suite.name.clone(),
            sha256: suite_sha256.to_string(),
        },
        backend: info,
        region_names: suite.region_names.clone(),
        conditions,
    };
    file.check_conservation()?;
    Ok(file)
}

impl ScoresFile {
    /// Region sums keyed by (item, condition).
    pub fn condition_scores(&self) -> ConditionScores {
        self.conditions
            .iter()
            .map(|c| ((c.item, c.label.clone()), c.regions.clone()))
            .collect()
    }

    /// Token sums equal sentence totals, and region sums equal the totals of
    /// their sentences, within the protocol tolerance.
    pub fn check_conservation(&self) -> Result<()> {
        for c in &self.conditions {
            let mut total = 0.0;
            for s in &c.sentences {
                let tokens: f64 = s.score.tokens.iter().map(|t| t.surprisal_bits).sum();
                if (tokens - s.score.total_bits).abs() > ADDITIVITY_TOLERANCE
                    || (s.alignment.total_bits() - s.score.total_bits).abs() > ADDITIVITY_TOLERANCE
                {
                    return Err(Error::protocol(format!(
                        "item {}, condition {}: surprisal not conserved for {:?}",
                        c.item, c.label, s.score.sentence
                    )));
                }
                total += s.score.total_bits;
            }
            if (c.regions.total_bits() - total).abs() > ADDITIVITY_TOLERANCE {
                return Err(Error::protocol(format!(
                    "item {}, condition {}: merged regions do not sum to the sentence totals",
                    c.item, c.label
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scores serialize");
        s.push('\n');
        s
    }

    pub fn parse(source: &str) -> Result<Self> {
        let file: ScoresFile = serde_json::from_str(source).map_err(Error::from_json)?;
        if file.format != SCORES_FORMAT {
            return Err(Error::validation(format!(
                "scores format {} is not supported (expected {SCORES_FORMAT})",
                file.format
            )));
        }
        file.check_conservation()?;
        Ok(file)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading scores {}", path.display()), e))?;
        Self::parse(&text)
    }

    /// Check that these scores belong to `suite`: same name and a score for
    /// every (item, condition).
    pub fn check_suite(&self, suite: &TestSuite) -> Result<()> {
        if self.suite.name != suite.name {
            return Err(Error::validation(format!(
                "scores are for suite {:?}, not {:?}",
                self.suite.name, suite.name
            )));
        }
        let have: BTreeMap<(u64, &ConditionLabel), ()> = self
            .conditions
            .iter()
            .map(|c| ((c.item, &c.label), ()))
            .collect();
        for item in &suite.items {
            for label in item.conditions.keys() {
                if !have.contains_key(&(item.id, label)) {
                    return Err(Error::validation(format!(
                        "scores lack item {}, condition {label}",
                        item.id
                    )));
                }
            }
        }
        Ok(())
    }
}
