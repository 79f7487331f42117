//! Test-suite data model.
//!
//! A [`TestSuite`] is a set of lexically matched [`Item`]s, each realised
//! under every cell of a fully crossed factorial design. Every realisation
//! ([`Condition`]) supplies text for the same ordered list of named regions;
//! regions may be empty (gaps). A condition can span several physical
//! sentences, which are scored independently but share one region namespace.

mod format;
mod measure;
mod render;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::AnalysisSpec;

pub use format::{parse_suite, read_suite};
pub use measure::{validate_measurement_regions, Violation};
pub use render::{render, render_condition, render_sentence, RegionSpan, RegionedSentence};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    pub levels: Vec<String>,
}

/// Assignment of levels to factors. A full label names every factor of its
/// suite; the same type doubles as a partial pattern when matching.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConditionLabel(BTreeMap<String, String>);

impl ConditionLabel {
    pub fn new<K, V>(pairs: impl IntoIterator<Item = (K, V)>) -> Self
    where
        K: Into<String>,
        V: Into<String>,
    {
        Self(
            pairs
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        )
    }

    pub fn get(&self, factor: &str) -> Option<&str> {
        self.0.get(factor).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when every assignment in `pattern` also holds here.
    pub fn matches(&self, pattern: &ConditionLabel) -> bool {
        pattern.iter().all(|(f, l)| self.get(f) == Some(l))
    }

    pub fn with(&self, factor: &str, level: &str) -> Self {
        let mut map = self.0.clone();
        map.insert(factor.to_string(), level.to_string());
        Self(map)
    }

    pub fn without(&self, factor: &str) -> Self {
        let mut map = self.0.clone();
        map.remove(factor);
        Self(map)
    }

    /// Parse the `FACTOR=level,FACTOR=level` form produced by `Display`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::validation(format!("malformed condition label {s:?}")))?;
            if map
                .insert(k.trim().to_string(), v.trim().to_string())
                .is_some()
            {
                return Err(Error::validation(format!(
                    "factor {k} assigned twice in {s:?}"
                )));
            }
        }
        Ok(Self(map))
    }
}

impl fmt::Display for ConditionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, v) in &self.0 {
            if !first {
                f.write_str(",")?;
            }
            write!(f, "{k}={v}")?;
            first = false;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionText {
    pub name: String,
    pub text: String,
    /// Index of the physical sentence hosting this region.
    pub sentence: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condition {
    pub label: ConditionLabel,
    pub regions: Vec<RegionText>,
}

impl Condition {
    pub fn region(&self, name: &str) -> Option<&RegionText> {
        self.regions.iter().find(|r| r.name == name)
    }

    pub fn sentence_count(&self) -> usize {
        self.regions
            .iter()
            .map(|r| r.sentence + 1)
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Item {
    pub id: u64,
    pub conditions: BTreeMap<ConditionLabel, Condition>,
}

impl Item {
    pub fn condition(&self, label: &ConditionLabel) -> Result<&Condition> {
        self.conditions
            .get(label)
            .ok_or_else(|| Error::validation(format!("item {} has no condition {label}", self.id)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSuite {
    pub name: String,
    pub factors: Vec<Factor>,
    pub region_names: Vec<String>,
    pub items: Vec<Item>,
    pub metadata: BTreeMap<String, serde_json::Value>,
    pub analyses: Vec<AnalysisSpec>,
}

impl TestSuite {
    pub fn factor(&self, name: &str) -> Option<&Factor> {
        self.factors.iter().find(|f| f.name == name)
    }

    pub fn has_region(&self, name: &str) -> bool {
        self.region_names.iter().any(|r| r == name)
    }

    /// Every cell of the factor cross, first factor varying slowest.
    pub fn cells(&self) -> Vec<ConditionLabel> {
        cross(&self.factors)
    }

    pub fn is_cell(&self, label: &ConditionLabel) -> bool {
        label.len() == self.factors.len()
            && self.factors.iter().all(|f| {
                label
                    .get(&f.name)
                    .is_some_and(|l| f.levels.iter().any(|x| x == l))
            })
    }

    pub fn item(&self, id: u64) -> Option<&Item> {
        self.items.iter().find(|i| i.id == id)
    }

    /// Check every structural invariant of the data model.
    pub fn validate(&self) -> Result<()> {
        validate_factors(&self.factors)?;
        if self.region_names.is_empty() {
            return Err(Error::validation("suite declares no regions"));
        }
        let mut seen = BTreeSet::new();
        for r in &self.region_names {
            if r.is_empty() {
                return Err(Error::validation("region names must be non-empty"));
            }
            if !seen.insert(r) {
                return Err(Error::validation(format!("duplicate region name {r:?}")));
            }
        }
        if self.items.is_empty() {
            return Err(Error::validation("suite has no items"));
        }
        let cells = self.cells();
        let mut ids = BTreeSet::new();
        for item in &self.items {
            if item.id == 0 {
                return Err(Error::validation("item ids must be positive integers"));
            }
            if !ids.insert(item.id) {
                return Err(Error::validation(format!("duplicate item id {}", item.id)));
            }
            for cell in &cells {
                if !item.conditions.contains_key(cell) {
                    return Err(Error::validation(format!(
                        "item {}: missing condition {cell}",
                        item.id
                    )));
                }
            }
            for (label, cond) in &item.conditions {
                if !self.is_cell(label) {
                    return Err(Error::validation(format!(
                        "item {}: condition {label} is not a cell of the factor cross",
                        item.id
                    )));
                }
                if &cond.label != label {
                    return Err(Error::validation(format!(
                        "item {}: condition keyed {label} carries label {}",
                        item.id, cond.label
                    )));
                }
                self.validate_condition(item.id, cond)?;
            }
        }
        Ok(())
    }

    fn validate_condition(&self, item: u64, cond: &Condition) -> Result<()> {
        let at = || format!("item {item}, condition {}", cond.label);
        if cond.regions.len() != self.region_names.len() {
            let missing: Vec<&str> = self
                .region_names
                .iter()
                .filter(|n| cond.region(n).is_none())
                .map(String::as_str)
                .collect();
            return Err(Error::validation(format!(
                "{}: expected {} regions, found {} (missing: {})",
                at(),
                self.region_names.len(),
                cond.regions.len(),
                missing.join(", ")
            )));
        }
        for (want, got) in self.region_names.iter().zip(&cond.regions) {
            if want != &got.name {
                return Err(Error::validation(format!(
                    "{}: region {:?} out of order, expected {want:?}",
                    at(),
                    got.name
                )));
            }
            if got.text.trim() != got.text {
                return Err(Error::validation(format!(
                    "{}: region {want} has leading or trailing whitespace",
                    at()
                )));
            }
        }
        let n_sentences = cond.sentence_count();
        for s in 0..n_sentences {
            if !cond
                .regions
                .iter()
                .any(|r| r.sentence == s && !r.text.is_empty())
            {
                return Err(Error::validation(format!(
                    "{}: sentence {s} has no non-empty region",
                    at()
                )));
            }
        }
        Ok(())
    }

    /// Pretty-printed JSON in the suite file format.
    pub fn to_json(&self) -> String {
        format::to_json(self)
    }
}

pub(crate) fn validate_factors(factors: &[Factor]) -> Result<()> {
    let mut names = BTreeSet::new();
    for f in factors {
        if f.name.is_empty() || f.name.contains([',', '=']) {
            return Err(Error::validation(format!(
                "invalid factor name {:?}",
                f.name
            )));
        }
        if !names.insert(&f.name) {
            return Err(Error::validation(format!("duplicate factor {:?}", f.name)));
        }
        if f.levels.is_empty() {
            return Err(Error::validation(format!(
                "factor {} has no levels",
                f.name
            )));
        }
        let mut levels = BTreeSet::new();
        for l in &f.levels {
            if l.is_empty() || l.contains([',', '=']) {
                return Err(Error::validation(format!(
                    "invalid level {l:?} of {}",
                    f.name
                )));
            }
            if !levels.insert(l) {
                return Err(Error::validation(format!(
                    "duplicate level {l:?} of {}",
                    f.name
                )));
            }
        }
    }
    Ok(())
}

pub(crate) fn cross(factors: &[Factor]) -> Vec<ConditionLabel> {
    let mut cells = vec![ConditionLabel::default()];
    for f in factors {
        cells = cells
            .into_iter()
            .flat_map(|c| f.levels.iter().map(move |l| c.with(&f.name, l)))
            .collect();
    }
    cells
}
