//! Programmable mock backend with exact, analytically known surprisals.
//!
//! Every whitespace token gets a base surprisal plus the penalties of all
//! rules matching it. A rule matches on a condition-label pattern, a region
//! and optionally the token text, so a rule set can encode an expected
//! effect exactly ("+2 bits on VP2 in mismatch conditions").
//!
//! Rules file:
//!
//! ```json
//! {
//!   "name": "ordering-k2",
//!   "base": {"constant": 3.0},
//!   "rules": [
//!     {"condition": {"ORDER": "mismatch"}, "region": "VP1", "penalty_bits": 2.0},
//!     {"condition": {"ORDER": "mismatch"}, "region": "VP2", "penalty_bits": 2.0}
//!   ]
//! }
//! ```
//!
//! `base` is one of `{"constant": bits}`, `{"uniform_vocab": size}` (log₂ of
//! the size) or `{"lexical": {"bits": {token: bits}, "default": bits}}`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{
    whitespace_tokens, Backend, BackendInfo, BackendKind, RawResult, SentenceScore, TokenScore,
};
use crate::suite::{render, ConditionLabel, RegionedSentence, TestSuite};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleRule {
    /// Label pattern; an empty pattern matches every condition.
    #[serde(default, skip_serializing_if = "ConditionLabel::is_empty")]
    pub condition: ConditionLabel,
    /// Region the token must fall in; absent matches any region.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    /// Exact token text; absent matches any token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
    pub penalty_bits: f64,
}

impl OracleRule {
    pub fn new(condition: ConditionLabel, region: impl Into<String>, penalty_bits: f64) -> Self {
        Self {
            condition,
            region: Some(region.into()),
            token: None,
            penalty_bits,
        }
    }

    fn applies(&self, label: Option<&ConditionLabel>, region: Option<&str>, token: &str) -> bool {
        let cond_ok = match label {
            Some(l) => l.matches(&self.condition),
            None => self.condition.is_empty(),
        };
        let region_ok = match (&self.region, region) {
            (None, _) => true,
            (Some(want), Some(got)) => want == got,
            (Some(_), None) => false,
        };
        cond_ok && region_ok && self.token.as_deref().map_or(true, |t| t == token)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseBits {
    Constant(f64),
    UniformVocab(u64),
    Lexical {
        bits: BTreeMap<String, f64>,
        default: f64,
    },
}

impl BaseBits {
    pub fn bits(&self, token: &str) -> f64 {
        match self {
            BaseBits::Constant(b) => *b,
            BaseBits::UniformVocab(n) => (*n as f64).log2(),
            BaseBits::Lexical { bits, default } => bits.get(token).copied().unwrap_or(*default),
        }
    }

    fn check(&self) -> Result<()> {
        let ok = match self {
            BaseBits::Constant(b) => b.is_finite() && *b >= 0.0,
            BaseBits::UniformVocab(n) => *n >= 1,
            BaseBits::Lexical { bits, default } => {
                default.is_finite()
                    && *default >= 0.0
                    && bits.values().all(|b| b.is_finite() && *b >= 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::validation(
                "oracle base surprisal must be finite and non-negative",
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    #[serde(rename = "$schema", default, skip_serializing)]
    pub schema: Option<String>,
    #[serde(default = "default_name")]
    pub name: String,
    pub base: BaseBits,
    #[serde(default)]
    pub rules: Vec<OracleRule>,
}

fn default_name() -> String {
    "mock-oracle".into()
}

impl OracleSpec {
    pub fn new(base: BaseBits, rules: Vec<OracleRule>) -> Self {
        Self {
            schema: None,
            name: default_name(),
            base,
            rules,
        }
    }

    pub fn parse(source: &str) -> Result<Self> {
        let spec: OracleSpec = serde_json::from_str(source).map_err(Error::from_json)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading rules {}", path.display()), e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.check()?;
        if let Some(r) = self.rules.iter().find(|r| !r.penalty_bits.is_finite()) {
            return Err(Error::validation(format!(
                "rule penalty {} is not finite",
                r.penalty_bits
            )));
        }
        Ok(())
    }
}

/// Score one rendered sentence of condition `label`. Tokens are whitespace
/// tokens; each belongs to the region holding its first character.
pub fn oracle_score(
    rules: &[OracleRule],
    base: &BaseBits,
    rsent: &RegionedSentence,
    label: &ConditionLabel,
) -> SentenceScore {
    score_tokens(rules, base, &rsent.text, Some((rsent, label)))
}

fn score_tokens(
    rules: &[OracleRule],
    base: &BaseBits,
    text: &str,
    context: Option<(&RegionedSentence, &ConditionLabel)>,
) -> SentenceScore {
    let tokens: Vec<TokenScore> = whitespace_tokens(text)
        .into_iter()
        .map(|(start, end, tok)| {
            let region = context
                .and_then(|(rs, _)| rs.region_at(start))
                .map(|s| s.region.as_str());
            let label = context.map(|(_, l)| l);
            let raw = base.bits(tok)
                + rules
                    .iter()
                    .filter(|r| r.applies(label, region, tok))
                    .map(|r| r.penalty_bits)
                    .sum::<f64>();
            let bits = if raw < 0.0 {
                log::warn!("oracle surprisal {raw} for {tok:?} in {text:?} clamped to 0");
                0.0
            } else {
                raw
            };
            TokenScore {
                text: tok.to_string(),
                surprisal_bits: bits,
                start,
                end,
            }
        })
        .collect();
    let total_bits = tokens.iter().map(|t| t.surprisal_bits).sum();
    SentenceScore {
        sentence: text.to_string(),
        tokens,
        total_bits,
    }
}

/// The oracle as a protocol backend. Sentences are recognised by their exact
/// text among the renderings of a suite, which recovers their condition and
/// region spans; unrecognised sentences receive only rules that name neither
/// a condition nor a region.
#[derive(Debug, Clone)]
pub struct MockBackend {
    spec: OracleSpec,
    index: HashMap<String, Vec<(ConditionLabel, RegionedSentence)>>,
}

impl MockBackend {
    pub fn new(spec: OracleSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            index: HashMap::new(),
        })
    }

    pub fn with_suite(spec: OracleSpec, suite: &TestSuite) -> Result<Self> {
        let mut backend = Self::new(spec)?;
        backend.add_suite(suite)?;
        Ok(backend)
    }

    pub fn add_suite(&mut self, suite: &TestSuite) -> Result<()> {
        for item in &suite.items {
            for label in item.conditions.keys() {
                for rsent in render(item, label)? {
                    let entry = self.index.entry(rsent.text.clone()).or_default();
                    if !entry.iter().any(|(l, r)| l == label && r == &rsent) {
                        entry.push((label.clone(), rsent));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> &OracleSpec {
        &self.spec
    }

    pub fn score_sentence(&self, sentence: &str) -> RawResult {
        let spec = &self.spec;
        let Some(renderings) = self.index.get(sentence) else {
            return Ok(score_tokens(&spec.rules, &spec.base, sentence, None).tokens);
        };
        let mut scored = renderings
            .iter()
            .map(|(label, rs)| oracle_score(&spec.rules, &spec.base, rs, label));
        let first = scored.next().expect("index entries are non-empty");
        for other in scored {
            if other.tokens != first.tokens {
                return Err(format!(
                    "sentence occurs in several conditions with different oracle scores: {sentence:?}"
                ));
            }
        }
        Ok(first.tokens)
    }
}

impl Backend for MockBackend {
    fn handshake(&self) -> Result<BackendInfo> {
        Ok(BackendInfo {
            name: self.spec.name.clone(),
            kind: BackendKind::Mock,
            context_window: None,
            version: format!(
                "syneval-mock/{} rules={} sentences={}",
                env!("CARGO_PKG_VERSION"),
                self.spec.rules.len(),
                self.index.len()
            ),
        })
    }

    fn score_batch(&self, sentences: &[String]) -> Result<Vec<RawResult>> {
        Ok(sentences.iter().map(|s| self.score_sentence(s)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{align, score};
    use crate::suite::{parse_suite, render_sentence};

    const ORDERING: &str = r#"{
      "name": "mini",
      "factors": [{"name": "ORDER", "levels": ["match", "mismatch"]}],
      "regions": ["NP1", "comp", "NP2", "VP1", "VP2", "end"],
      "items": [{"id": 1, "conditions": [
        {"label": {"ORDER": "match"}, "regions": ["The diamond", "that", "the thief", "stole", "glittered", "."]},
        {"label": {"ORDER": "mismatch"}, "regions": ["The diamond", "that", "the thief", "glittered", "stole", "."]}
      ]}]
    }"#;

    fn label(order: &str) -> ConditionLabel {
        ConditionLabel::new([("ORDER", order)])
    }

    #[test]
    fn base_only() {
        let suite = parse_suite(ORDERING).unwrap();
        let rs = render_sentence(&suite.items[0], &label("match")).unwrap();
        let s = oracle_score(&[], &BaseBits::Constant(3.0), &rs, &label("match"));
        assert_eq!(s.tokens.len(), 8);
        assert_eq!(s.total_bits, 24.0);
        let five = RegionedSentence {
            text: "a b c d e".into(),
            spans: vec![],
        };
        assert_eq!(
            oracle_score(&[], &BaseBits::Constant(3.0), &five, &label("match")).total_bits,
            15.0
        );
        let four = RegionedSentence {
            text: "w x y z".into(),
            spans: vec![],
        };
        let s = oracle_score(&[], &BaseBits::UniformVocab(8), &four, &label("match"));
        assert!(s.tokens.iter().all(|t| t.surprisal_bits == 3.0));
        assert_eq!(s.total_bits, 12.0);
    }

    #[test]
    fn rules_hit_only_their_region_and_condition() {
        let suite = parse_suite(ORDERING).unwrap();
        let rules = vec![OracleRule::new(label("mismatch"), "VP2", 2.0)];
        for (order, expect) in [("match", 0.0), ("mismatch", 2.0)] {
            let rs = render_sentence(&suite.items[0], &label(order)).unwrap();
            let s = oracle_score(&rules, &BaseBits::Constant(1.0), &rs, &label(order));
            let regions = align(&s, &rs).unwrap();
            assert_eq!(regions.region("VP2").unwrap().bits, 1.0 + expect);
            assert_eq!(regions.region("VP1").unwrap().bits, 1.0);
        }
    }

    #[test]
    fn token_predicate_and_clamping() {
        let rs = RegionedSentence {
            text: "a b a".into(),
            spans: vec![],
        };
        let rules = vec![OracleRule {
            condition: ConditionLabel::default(),
            region: None,
            token: Some("a".into()),
            penalty_bits: -5.0,
        }];
        let s = oracle_score(&rules, &BaseBits::Constant(2.0), &rs, &label("match"));
        let bits: Vec<f64> = s.tokens.iter().map(|t| t.surprisal_bits).collect();
        assert_eq!(bits, vec![0.0, 2.0, 0.0]);
    }

    #[test]
    fn backend_recovers_conditions_from_text() {
        let suite = parse_suite(ORDERING).unwrap();
        let spec = OracleSpec::new(
            BaseBits::Constant(1.0),
            vec![OracleRule::new(label("mismatch"), "VP1", 2.0)],
        );
        let b = MockBackend::with_suite(spec, &suite).unwrap();
        assert_eq!(b.handshake().unwrap().kind, BackendKind::Mock);
        let s = score(
            &b,
            &[
                "The diamond that the thief glittered stole .".to_string(),
                "unrelated text".to_string(),
            ],
        )
        .unwrap();
        assert_eq!(s[0].total_bits, 10.0);
        assert_eq!(s[1].total_bits, 2.0);
    }

    #[test]
    fn ambiguous_text_with_conflicting_scores_fails() {
        let same = ORDERING.replace(
            r#""glittered", "stole", "."]"#,
            r#""stole", "glittered", "."]"#,
        );
        let suite = parse_suite(&same).unwrap();
        let spec = OracleSpec::new(
            BaseBits::Constant(1.0),
            vec![OracleRule::new(label("mismatch"), "VP1", 2.0)],
        );
        let b = MockBackend::with_suite(spec, &suite).unwrap();
        let out = b.score_sentence("The diamond that the thief stole glittered .");
        assert!(out.unwrap_err().contains("several conditions"));
        let neutral =
            MockBackend::with_suite(OracleSpec::new(BaseBits::Constant(1.0), vec![]), &suite)
                .unwrap();
        assert!(neutral
            .score_sentence("The diamond that the thief stole glittered .")
            .is_ok());
    }

    #[test]
    fn rules_file_parses() {
        let spec = OracleSpec::parse(
            r#"{"base": {"lexical": {"bits": {"the": 1.5}, "default": 4}},
                "rules": [{"condition": {"GAP": "+"}, "region": "post", "penalty_bits": 3}]}"#,
        )
        .unwrap();
        assert_eq!(spec.name, "mock-oracle");
        assert_eq!(spec.base.bits("the"), 1.5);
        assert_eq!(spec.base.bits("cat"), 4.0);
        assert!(OracleSpec::parse(r#"{"base": {"constant": -1}}"#).is_err());
        assert!(OracleSpec::parse(r#"{"base": {"constant": 1}, "extra": 1}"#).is_err());
    }
}
