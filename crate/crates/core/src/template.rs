//! Seeded slot templates and their expansion into test suites.
//!
//! A template lists its regions in order. Each region owns one or more named
//! seed sets, and every condition selects one set per region (regions it does
//! not mention use the set named `default`). An item is one *seed tuple*:
//! a choice of seed index per region, shared by every condition so that the
//! conditions of an item stay minimal pairs.
//!
//! Within a region, every set a condition may select must hold either one
//! seed or the same number `m` of seeds; seed `j` of one set corresponds to
//! seed `j` of the others. The region's radix is `m` (1 if all selected sets
//! are singletons), and the tuple space is the product of region radices,
//! enumerated in mixed-radix order with the first region most significant.
//!
//! ```json
//! {
//!   "name": "gap-demo",
//!   "factors": [{"name": "GAP", "levels": ["+", "-"]}],
//!   "regions": [
//!     {"name": "prefix", "seeds": ["I know who the"]},
//!     {"name": "subj", "seeds": ["count", "baron"]},
//!     {"name": "verb", "seeds": ["insulted", "praised"]},
//!     {"name": "obj", "seeds": {"gap": [""], "filled": ["the hostess", "the maid"]}},
//!     {"name": "post", "seeds": ["yesterday ."]}
//!   ],
//!   "conditions": [
//!     {"label": {"GAP": "+"}, "use": {"obj": "gap"}},
//!     {"label": {"GAP": "-"}, "use": {"obj": "filled"}}
//!   ]
//! }
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::metrics::AnalysisSpec;
use crate::rng::SplitMix64;
use crate::suite::{
    cross, validate_factors, Condition, ConditionLabel, Factor, Item, RegionText, TestSuite,
};

pub const DEFAULT_SET: &str = "default";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Slot {
    pub name: String,
    pub seeds: SeedSets,
}

/// Either one anonymous list (the `default` set) or named sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSets {
    Single(Vec<String>),
    Named(BTreeMap<String, Vec<String>>),
}

impl SeedSets {
    pub fn get(&self, set: &str) -> Option<&[String]> {
        match self {
            SeedSets::Single(v) if set == DEFAULT_SET => Some(v),
            SeedSets::Single(_) => None,
            SeedSets::Named(m) => m.get(set).map(Vec::as_slice),
        }
    }

    fn iter(&self) -> Box<dyn Iterator<Item = (&str, &[String])> + '_> {
        match self {
            SeedSets::Single(v) => Box::new(std::iter::once((DEFAULT_SET, v.as_slice()))),
            SeedSets::Named(m) => Box::new(m.iter().map(|(k, v)| (k.as_str(), v.as_slice()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateCondition {
    pub label: ConditionLabel,
    /// Region name to seed-set name.
    #[serde(rename = "use", default)]
    pub uses: BTreeMap<String, String>,
    /// Physical sentence index per region, as in suite files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentences: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Template {
    #[serde(rename = "$schema", default, skip_serializing)]
    pub schema: Option<String>,
    pub name: String,
    #[serde(default)]
    pub factors: Vec<Factor>,
    pub regions: Vec<Slot>,
    pub conditions: Vec<TemplateCondition>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub analyses: Vec<AnalysisSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpansionMode {
    Exhaustive,
    Sample { size: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpansionPlan {
    pub mode: ExpansionMode,
    pub seed: u64,
}

impl ExpansionPlan {
    pub fn exhaustive() -> Self {
        Self {
            mode: ExpansionMode::Exhaustive,
            seed: 0,
        }
    }

    pub fn sample(size: u64, seed: u64) -> Self {
        Self {
            mode: ExpansionMode::Sample { size },
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpansionCount {
    /// Product of the selected set sizes, per condition in template order.
    pub per_condition: Vec<(ConditionLabel, u64)>,
    /// Number of joint seed tuples, i.e. of distinct items.
    pub joint: u64,
}

impl Template {
    pub fn parse(source: &str) -> Result<Self> {
        let t: Template = serde_json::from_str(source).map_err(Error::from_json)?;
        t.validate()?;
        Ok(t)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading template {}", path.display()), e))?;
        Self::parse(&text)
    }

    fn set_name<'a>(cond: &'a TemplateCondition, region: &str) -> &'a str {
        cond.uses
            .get(region)
            .map(String::as_str)
            .unwrap_or(DEFAULT_SET)
    }

    fn selected<'a>(&'a self, cond: &TemplateCondition, slot: &'a Slot) -> Result<&'a [String]> {
        let set = Self::set_name(cond, &slot.name);
        slot.seeds.get(set).ok_or_else(|| {
            Error::validation(format!(
                "condition {}: region {} has no seed set {set:?}",
                cond.label, slot.name
            ))
        })
    }

    pub fn validate(&self) -> Result<()> {
        validate_factors(&self.factors)?;
        if self.regions.is_empty() {
            return Err(Error::validation("template declares no regions"));
        }
        let mut names = BTreeSet::new();
        for slot in &self.regions {
            if slot.name.is_empty() || !names.insert(slot.name.as_str()) {
                return Err(Error::validation(format!(
                    "invalid or duplicate region {:?}",
                    slot.name
                )));
            }
            let mut any = false;
            for (set, seeds) in slot.seeds.iter() {
                any = true;
                if seeds.is_empty() {
                    return Err(Error::validation(format!(
                        "region {}: seed set {set:?} is empty",
                        slot.name
                    )));
                }
                let mut distinct = BTreeSet::new();
                for s in seeds {
                    if s.trim() != s {
                        return Err(Error::validation(format!(
                            "region {}: seed {s:?} has leading or trailing whitespace",
                            slot.name
                        )));
                    }
                    if !distinct.insert(s) {
                        return Err(Error::validation(format!(
                            "region {}: seed {s:?} repeated in set {set:?}",
                            slot.name
                        )));
                    }
                }
            }
            if !any {
                return Err(Error::validation(format!(
                    "region {} has no seed sets",
                    slot.name
                )));
            }
        }

        let cells: BTreeSet<ConditionLabel> = cross(&self.factors).into_iter().collect();
        let mut seen = BTreeSet::new();
        for cond in &self.conditions {
            if !cells.contains(&cond.label) {
                return Err(Error::validation(format!(
                    "condition {} is not a cell of the factor cross",
                    cond.label
                )));
            }
            if !seen.insert(&cond.label) {
                return Err(Error::validation(format!(
                    "condition {} listed twice",
                    cond.label
                )));
            }
            if let Some(region) = cond.uses.keys().find(|r| !names.contains(r.as_str())) {
                return Err(Error::validation(format!(
                    "condition {}: unknown region {region:?}",
                    cond.label
                )));
            }
            if let Some(s) = &cond.sentences {
                if s.len() != self.regions.len() {
                    return Err(Error::validation(format!(
                        "condition {}: {} sentence indices for {} regions",
                        cond.label,
                        s.len(),
                        self.regions.len()
                    )));
                }
            }
            for slot in &self.regions {
                self.selected(cond, slot)?;
            }
        }
        if let Some(missing) = cells.iter().find(|c| !seen.contains(c)) {
            return Err(Error::validation(format!(
                "template has no condition {missing}"
            )));
        }
        self.radices().map(|_| ())
    }

    /// Per region: the common size of the non-singleton sets its conditions
    /// select, or 1.
    fn radices(&self) -> Result<Vec<u64>> {
        self.regions
            .iter()
            .map(|slot| {
                let mut radix = 1usize;
                for cond in &self.conditions {
                    let n = self.selected(cond, slot)?.len();
                    if n == 1 {
                        continue;
                    }
                    if radix != 1 && radix != n {
                        return Err(Error::validation(format!(
                            "region {}: conditions select seed sets of sizes {radix} and {n}; \
                             sets must have one seed or a common size",
                            slot.name
                        )));
                    }
                    radix = n;
                }
                Ok(radix as u64)
            })
            .collect()
    }

    pub fn count_expansions(&self) -> Result<ExpansionCount> {
        self.validate()?;
        let overflow = || Error::validation("expansion count exceeds 2^64");
        let mut per_condition = Vec::with_capacity(self.conditions.len());
        for cond in &self.conditions {
            let mut n = 1u64;
            for slot in &self.regions {
                n = n
                    .checked_mul(self.selected(cond, slot)?.len() as u64)
                    .ok_or_else(overflow)?;
            }
            per_condition.push((cond.label.clone(), n));
        }
        let joint = self
            .radices()?
            .iter()
            .try_fold(1u64, |acc, &r| acc.checked_mul(r))
            .ok_or_else(overflow)?;
        Ok(ExpansionCount {
            per_condition,
            joint,
        })
    }

    pub fn expand(&self, plan: ExpansionPlan) -> Result<TestSuite> {
        let count = self.count_expansions()?;
        let radices = self.radices()?;
        let indices: Vec<u64> = match plan.mode {
            ExpansionMode::Exhaustive => (0..count.joint).collect(),
            ExpansionMode::Sample { size: 0 } => {
                return Err(Error::validation("sample size must be at least 1"));
            }
            ExpansionMode::Sample { size } if size > count.joint => {
                return Err(Error::validation(format!(
                    "requested {size} of {} available seed tuples",
                    count.joint
                )));
            }
            ExpansionMode::Sample { size } => {
                SplitMix64::new(plan.seed).sample_distinct(count.joint, size)
            }
        };

        let mut items = Vec::with_capacity(indices.len());
        for (n, &index) in indices.iter().enumerate() {
            let tuple = decode(index, &radices);
            let mut conditions = BTreeMap::new();
            for cond in &self.conditions {
                let mut regions = Vec::with_capacity(self.regions.len());
                for (r, slot) in self.regions.iter().enumerate() {
                    let seeds = self.selected(cond, slot)?;
                    let pick = if seeds.len() == 1 {
                        0
                    } else {
                        tuple[r] as usize
                    };
                    regions.push(RegionText {
                        name: slot.name.clone(),
                        text: seeds[pick].clone(),
                        sentence: cond.sentences.as_ref().map_or(0, |s| s[r]),
                    });
                }
                conditions.insert(
                    cond.label.clone(),
                    Condition {
                        label: cond.label.clone(),
                        regions,
                    },
                );
            }
            items.push(Item {
                id: n as u64 + 1,
                conditions,
            });
        }

        let mut metadata = self.metadata.clone();
        let expansion = match plan.mode {
            ExpansionMode::Exhaustive => {
                json!({"template": self.name, "mode": "exhaustive", "available": count.joint})
            }
            ExpansionMode::Sample { size } => json!({
                "template": self.name,
                "mode": "sample",
                "sample_size": size,
                "seed": plan.seed,
                "rng": "splitmix64",
                "available": count.joint,
                "tuples": indices,
            }),
        };
        metadata.insert("expansion".into(), expansion);

        let suite = TestSuite {
            name: self.name.clone(),
            factors: self.factors.clone(),
            region_names: self.regions.iter().map(|s| s.name.clone()).collect(),
            items,
            metadata,
            analyses: self.analyses.clone(),
        };
        suite.validate()?;
        Ok(suite)
    }
}

/// Mixed-radix digits of `index`, most significant first.
fn decode(mut index: u64, radices: &[u64]) -> Vec<u64> {
    let mut digits = vec![0; radices.len()];
    for (d, &r) in digits.iter_mut().zip(radices).rev() {
        *d = index % r;
        index /= r;
    }
    digits
}
