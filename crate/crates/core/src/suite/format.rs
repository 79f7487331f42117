use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Condition, ConditionLabel, Factor, Item, RegionText, TestSuite};
use crate::error::{Error, Result};
use crate::metrics::AnalysisSpec;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSuite {
    #[serde(rename = "$schema", default, skip_serializing_if = "Option::is_none")]
    schema: Option<String>,
    name: String,
    #[serde(default)]
    factors: Vec<Factor>,
    regions: Vec<String>,
    items: Vec<RawItem>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    metadata: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    analyses: Vec<AnalysisSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawItem {
    id: u64,
    conditions: Vec<RawCondition>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCondition {
    label: ConditionLabel,
    regions: RawRegions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sentences: Option<Vec<usize>>,
}

/// Region texts either aligned with the suite's `regions` array or keyed by
/// region name.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RawRegions {
    Aligned(Vec<String>),
    Named(BTreeMap<String, String>),
}

/// Parse and validate a suite document.
pub fn parse_suite(source: &str) -> Result<TestSuite> {
    let raw: RawSuite = serde_json::from_str(source).map_err(Error::from_json)?;
    let suite = from_raw(raw)?;
    suite.validate()?;
    Ok(suite)
}

pub fn read_suite(path: impl AsRef<Path>) -> Result<TestSuite> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading suite {}", path.display()), e))?;
    parse_suite(&text)
}

fn from_raw(raw: RawSuite) -> Result<TestSuite> {
    let mut items = Vec::with_capacity(raw.items.len());
    for raw_item in raw.items {
        let mut conditions = BTreeMap::new();
        for rc in raw_item.conditions {
            let at = format!("item {}, condition {}", raw_item.id, rc.label);
            let texts: Vec<(String, String)> = match rc.regions {
                RawRegions::Aligned(list) => {
                    if list.len() > raw.regions.len() {
                        return Err(Error::validation(format!(
                            "{at}: {} region texts for {} declared regions",
                            list.len(),
                            raw.regions.len()
                        )));
                    }
                    raw.regions.iter().cloned().zip(list).collect()
                }
                RawRegions::Named(mut map) => {
                    let picked: Vec<(String, String)> = raw
                        .regions
                        .iter()
                        .filter_map(|n| map.remove(n).map(|t| (n.clone(), t)))
                        .collect();
                    if let Some(extra) = map.keys().next() {
                        return Err(Error::validation(format!("{at}: unknown region {extra:?}")));
                    }
                    picked
                }
            };
            let sentences = match rc.sentences {
                Some(s) if s.len() != texts.len() => {
                    return Err(Error::validation(format!(
                        "{at}: {} sentence indices for {} regions",
                        s.len(),
                        texts.len()
                    )))
                }
                Some(s) => s,
                None => vec![0; texts.len()],
            };
            let regions = texts
                .into_iter()
                .zip(sentences)
                .map(|((name, text), sentence)| RegionText {
                    name,
                    text,
                    sentence,
                })
                .collect();
            let label = rc.label;
            let cond = Condition {
                label: label.clone(),
                regions,
            };
            if conditions.insert(label, cond).is_some() {
                return Err(Error::validation(format!("{at}: condition listed twice")));
            }
        }
        items.push(Item {
            id: raw_item.id,
            conditions,
        });
    }
    Ok(TestSuite {
        name: raw.name,
        factors: raw.factors,
        region_names: raw.regions,
        items,
        metadata: raw.metadata,
        analyses: raw.analyses,
    })
}

pub(super) fn to_json(suite: &TestSuite) -> String {
    let cells = suite.cells();
    let items = suite
        .items
        .iter()
        .map(|item| {
            // cross order first, then anything a caller added outside the cross
            let mut ordered: Vec<&Condition> = cells
                .iter()
                .filter_map(|c| item.conditions.get(c))
                .collect();
            ordered.extend(
                item.conditions
                    .values()
                    .filter(|c| !cells.contains(&c.label)),
            );
            RawItem {
                id: item.id,
                conditions: ordered
                    .into_iter()
                    .map(|c| {
                        let multi = c.regions.iter().any(|r| r.sentence != 0);
                        RawCondition {
                            label: c.label.clone(),
                            regions: RawRegions::Aligned(
                                c.regions.iter().map(|r| r.text.clone()).collect(),
                            ),
                            sentences: multi
                                .then(|| c.regions.iter().map(|r| r.sentence).collect()),
                        }
                    })
                    .collect(),
            }
        })
        .collect();
    let raw = RawSuite {
        schema: None,
        name: suite.name.clone(),
        factors: suite.factors.clone(),
        regions: suite.region_names.clone(),
        items,
        metadata: suite.metadata.clone(),
        analyses: suite.analyses.clone(),
    };
    let mut out = serde_json::to_string_pretty(&raw).expect("suite serialization is infallible");
    out.push('\n');
    out
}
