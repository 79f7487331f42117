//! Surprisal contrasts.
//!
//! Every metric is a signed sum of region surprisals across conditions,
//! evaluated separately for each item. The presets cover the ordering
//! effect of center-embedding designs and the filler–gap wh-effects; any
//! other contrast can be declared term by term.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::RegionScores;
use crate::suite::{validate_measurement_regions, ConditionLabel, TestSuite};

pub const ORDER: &str = "ORDER";
pub const FILLER: &str = "FILLER";
pub const GAP: &str = "GAP";

/// Region surprisals for every scored (item, condition).
pub type ConditionScores = BTreeMap<(u64, ConditionLabel), RegionScores>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub condition: ConditionLabel,
    pub region: String,
}

impl Term {
    pub fn new(condition: ConditionLabel, region: impl Into<String>) -> Self {
        Self {
            condition,
            region: region.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contrast {
    pub name: String,
    /// The cell of the non-contrasted factors this instance is evaluated in,
    /// e.g. `CONTEXT=embedding`. Empty when the contrast spans the design.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub cell: String,
    pub plus: Vec<Term>,
    pub minus: Vec<Term>,
}

impl Contrast {
    pub fn new(name: impl Into<String>, plus: Vec<Term>, minus: Vec<Term>) -> Self {
        Self {
            name: name.into(),
            cell: String::new(),
            plus,
            minus,
        }
    }

    pub fn id(&self) -> String {
        if self.cell.is_empty() {
            self.name.clone()
        } else {
            format!("{}[{}]", self.name, self.cell)
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.plus.iter().chain(&self.minus)
    }

    pub fn negated(&self) -> Self {
        Self {
            name: self.name.clone(),
            cell: self.cell.clone(),
            plus: self.minus.clone(),
            minus: self.plus.clone(),
        }
    }

    fn check_shape(&self) -> Result<()> {
        if self.plus.is_empty() || self.minus.is_empty() {
            return Err(Error::validation(format!(
                "contrast {} needs at least one term on each side",
                self.id()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub name: String,
    pub cell: String,
    pub per_item: BTreeMap<u64, f64>,
    pub n_items: usize,
}

impl MetricResult {
    pub fn id(&self) -> String {
        if self.cell.is_empty() {
            self.name.clone()
        } else {
            format!("{}[{}]", self.name, self.cell)
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.per_item.values().copied().collect()
    }
}

/// Per item, Σ plus-term region sums − Σ minus-term region sums.
pub fn eval_contrast(
    suite: &TestSuite,
    scores: &ConditionScores,
    contrast: &Contrast,
) -> Result<MetricResult> {
    contrast.check_shape()?;
    let violations = validate_measurement_regions(suite, contrast);
    if !violations.is_empty() {
        let msgs: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(Error::validation(msgs.join("; ")));
    }
    let side = |item: u64, terms: &[Term]| -> Result<f64> {
        let mut sum = 0.0;
        for t in terms {
            let rs = scores.get(&(item, t.condition.clone())).ok_or_else(|| {
                Error::validation(format!(
                    "no scores for item {item}, condition {} (contrast {})",
                    t.condition,
                    contrast.id()
                ))
            })?;
            let region = rs.region(&t.region).ok_or_else(|| {
                Error::validation(format!(
                    "scores for item {item}, condition {} lack region {}",
                    t.condition, t.region
                ))
            })?;
            sum += region.bits;
        }
        Ok(sum)
    };
    let mut per_item = BTreeMap::new();
    for item in &suite.items {
        let value = side(item.id, &contrast.plus)? - side(item.id, &contrast.minus)?;
        if !value.is_finite() {
            return Err(Error::validation(format!(
                "contrast {} is not finite for item {}",
                contrast.id(),
                item.id
            )));
        }
        per_item.insert(item.id, value);
    }
    Ok(MetricResult {
        name: contrast.name.clone(),
        cell: contrast.cell.clone(),
        n_items: per_item.len(),
        per_item,
    })
}

fn require_factor(suite: &TestSuite, factor: &str, levels: &[&str]) -> Result<()> {
    let f = suite
        .factor(factor)
        .ok_or_else(|| Error::validation(format!("suite {} has no factor {factor}", suite.name)))?;
    for l in levels {
        if !f.levels.iter().any(|x| x == l) {
            return Err(Error::validation(format!(
                "factor {factor} lacks level {l:?}"
            )));
        }
    }
    Ok(())
}

fn require_region(suite: &TestSuite, region: &str) -> Result<()> {
    if suite.has_region(region) {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "suite {} has no region {region}",
            suite.name
        )))
    }
}

/// Cells of the factors not in `contrasted`, restricted to those matching
/// `within`, each returned as a partial label.
fn residual_cells(
    suite: &TestSuite,
    contrasted: &[&str],
    within: &ConditionLabel,
) -> Result<Vec<ConditionLabel>> {
    for (f, l) in within.iter() {
        if contrasted.contains(&f) {
            return Err(Error::validation(format!(
                "cannot restrict contrasted factor {f}"
            )));
        }
        require_factor(suite, f, &[l])?;
    }
    let rest: Vec<_> = suite
        .factors
        .iter()
        .filter(|f| !contrasted.contains(&f.name.as_str()))
        .cloned()
        .collect();
    Ok(crate::suite::cross(&rest)
        .into_iter()
        .filter(|c| c.matches(within))
        .collect())
}

/// Mismatch minus match, summed over VP1 and VP2; one contrast per cell of
/// the remaining factors.
pub fn ordering_effect(suite: &TestSuite) -> Result<Vec<Contrast>> {
    require_factor(suite, ORDER, &["match", "mismatch"])?;
    require_region(suite, "VP1")?;
    require_region(suite, "VP2")?;
    let cells = residual_cells(suite, &[ORDER], &ConditionLabel::default())?;
    Ok(cells
        .into_iter()
        .map(|rest| {
            let side = |level: &str| {
                let label = rest.with(ORDER, level);
                vec![Term::new(label.clone(), "VP1"), Term::new(label, "VP2")]
            };
            Contrast {
                name: "ordering_effect".into(),
                cell: rest.to_string(),
                plus: side("mismatch"),
                minus: side("match"),
            }
        })
        .collect())
}

fn filler_gap_contrasts(
    suite: &TestSuite,
    name: &str,
    within: &ConditionLabel,
    build: impl Fn(&ConditionLabel) -> (Vec<Term>, Vec<Term>),
) -> Result<Vec<Contrast>> {
    require_factor(suite, FILLER, &["+", "-"])?;
    require_factor(suite, GAP, &["+", "-"])?;
    let cells = residual_cells(suite, &[FILLER, GAP], within)?;
    if cells.is_empty() {
        return Err(Error::validation(format!(
            "no cells of {} match {within}",
            suite.name
        )));
    }
    Ok(cells
        .into_iter()
        .map(|rest| {
            let (plus, minus) = build(&rest);
            Contrast {
                name: name.into(),
                cell: rest.to_string(),
                plus,
                minus,
            }
        })
        .collect())
}

fn fg(rest: &ConditionLabel, filler: &str, gap: &str) -> ConditionLabel {
    rest.with(FILLER, filler).with(GAP, gap)
}

/// S([−FILLER, +GAP]) − S([+FILLER, +GAP]) in the post-gap region.
pub fn wh_effect_plus_gap(
    suite: &TestSuite,
    measure_region: &str,
    within: &ConditionLabel,
) -> Result<Vec<Contrast>> {
    require_region(suite, measure_region)?;
    filler_gap_contrasts(suite, "wh_effect_plus_gap", within, |rest| {
        (
            vec![Term::new(fg(rest, "-", "+"), measure_region)],
            vec![Term::new(fg(rest, "+", "+"), measure_region)],
        )
    })
}

/// S([+FILLER, −GAP]) − S([−FILLER, −GAP]) at the filled object: the filled
/// gap effect.
pub fn wh_effect_minus_gap(
    suite: &TestSuite,
    measure_region: &str,
    within: &ConditionLabel,
) -> Result<Vec<Contrast>> {
    require_region(suite, measure_region)?;
    filler_gap_contrasts(suite, "wh_effect_minus_gap", within, |rest| {
        (
            vec![Term::new(fg(rest, "+", "-"), measure_region)],
            vec![Term::new(fg(rest, "-", "-"), measure_region)],
        )
    })
}

/// Sum of the two wh-effects as one signed sum over the four FILLER × GAP
/// cells.
pub fn licensing_interaction(
    suite: &TestSuite,
    plus_region: &str,
    minus_region: &str,
    within: &ConditionLabel,
) -> Result<Vec<Contrast>> {
    require_region(suite, plus_region)?;
    require_region(suite, minus_region)?;
    filler_gap_contrasts(suite, "licensing_interaction", within, |rest| {
        (
            vec![
                Term::new(fg(rest, "-", "+"), plus_region),
                Term::new(fg(rest, "+", "-"), minus_region),
            ],
            vec![
                Term::new(fg(rest, "+", "+"), plus_region),
                Term::new(fg(rest, "-", "-"), minus_region),
            ],
        )
    })
}

/// A declared analysis: a named preset or an explicit contrast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnalysisSpec {
    Preset(Preset),
    Explicit { contrast: Contrast },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preset {
    OrderingEffect {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    WhEffectPlusGap {
        region: String,
        #[serde(default, skip_serializing_if = "ConditionLabel::is_empty")]
        within: ConditionLabel,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    WhEffectMinusGap {
        region: String,
        #[serde(default, skip_serializing_if = "ConditionLabel::is_empty")]
        within: ConditionLabel,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    LicensingInteraction {
        plus_region: String,
        minus_region: String,
        #[serde(default, skip_serializing_if = "ConditionLabel::is_empty")]
        within: ConditionLabel,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
}

impl AnalysisSpec {
    pub fn expand(&self, suite: &TestSuite) -> Result<Vec<Contrast>> {
        let (contrasts, name) = match self {
            AnalysisSpec::Explicit { contrast } => {
                contrast.check_shape()?;
                (vec![contrast.clone()], None)
            }
            AnalysisSpec::Preset(p) => match p {
                Preset::OrderingEffect { name } => (ordering_effect(suite)?, name.as_ref()),
                Preset::WhEffectPlusGap {
                    region,
                    within,
                    name,
                } => (wh_effect_plus_gap(suite, region, within)?, name.as_ref()),
                Preset::WhEffectMinusGap {
                    region,
                    within,
                    name,
                } => (wh_effect_minus_gap(suite, region, within)?, name.as_ref()),
                Preset::LicensingInteraction {
                    plus_region,
                    minus_region,
                    within,
                    name,
                } => (
                    licensing_interaction(suite, plus_region, minus_region, within)?,
                    name.as_ref(),
                ),
            },
        };
        Ok(contrasts
            .into_iter()
            .map(|mut c| {
                if let Some(n) = name {
                    c.name = n.clone();
                }
                c
            })
            .collect())
    }
}

/// Expand a list of analyses into concrete contrasts, rejecting duplicates.
pub fn expand_analyses(suite: &TestSuite, specs: &[AnalysisSpec]) -> Result<Vec<Contrast>> {
    let mut out: Vec<Contrast> = Vec::new();
    for spec in specs {
        for c in spec.expand(suite)? {
            if out.iter().any(|o| o.id() == c.id()) {
                return Err(Error::validation(format!(
                    "contrast {} declared twice",
                    c.id()
                )));
            }
            out.push(c);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{RegionScore, RegionScores};
    use crate::suite::parse_suite;

    fn two_by_two() -> TestSuite {
        parse_suite(
            r#"{"name": "fg", "factors": [
                {"name": "FILLER", "levels": ["+", "-"]}, {"name": "GAP", "levels": ["+", "-"]}],
              "regions": ["prefix", "filler", "verb", "obj", "post", "end"],
              "items": [{"id": 1, "conditions": [
                {"label": {"FILLER": "-", "GAP": "-"}, "regions": ["I know", "that", "the count insulted", "the hostess", "yesterday", "."]},
                {"label": {"FILLER": "+", "GAP": "-"}, "regions": ["I know", "who", "the count insulted", "the hostess", "yesterday", "."]},
                {"label": {"FILLER": "-", "GAP": "+"}, "regions": ["I know", "that", "the count insulted", "", "yesterday", "."]},
                {"label": {"FILLER": "+", "GAP": "+"}, "regions": ["I know", "who", "the count insulted", "", "yesterday", "."]}]}]}"#,
        )
        .unwrap()
    }

    fn scores_with(suite: &TestSuite, f: impl Fn(&ConditionLabel, &str) -> f64) -> ConditionScores {
        let mut out = ConditionScores::new();
        for item in &suite.items {
            for label in item.conditions.keys() {
                let regions = suite
                    .region_names
                    .iter()
                    .map(|r| RegionScore {
                        name: r.clone(),
                        bits: f(label, r),
                        n_tokens: 1,
                    })
                    .collect();
                out.insert((item.id, label.clone()), RegionScores { regions });
            }
        }
        out
    }

    fn label(filler: &str, gap: &str) -> ConditionLabel {
        ConditionLabel::new([(FILLER, filler), (GAP, gap)])
    }

    #[test]
    fn ordering_effect_arithmetic() {
        let suite = parse_suite(
            r#"{"name": "ce", "factors": [{"name": "ORDER", "levels": ["match", "mismatch"]}],
              "regions": ["NP1", "VP1", "VP2"],
              "items": [{"id": 1, "conditions": [
                {"label": {"ORDER": "match"}, "regions": ["The diamond that the thief", "stole", "glittered"]},
                {"label": {"ORDER": "mismatch"}, "regions": ["The diamond that the thief", "glittered", "stole"]}]}]}"#,
        )
        .unwrap();
        let contrasts = ordering_effect(&suite).unwrap();
        assert_eq!(contrasts.len(), 1);
        let scores = scores_with(&suite, |l, r| match (l.get(ORDER).unwrap(), r) {
            ("mismatch", "VP1") => 5.0,
            ("mismatch", "VP2") => 7.0,
            ("match", "VP1") => 2.0,
            ("match", "VP2") => 3.0,
            _ => 11.0,
        });
        let m = eval_contrast(&suite, &scores, &contrasts[0]).unwrap();
        assert_eq!(m.per_item[&1], 7.0);
        let neg = eval_contrast(&suite, &scores, &contrasts[0].negated()).unwrap();
        assert_eq!(neg.per_item[&1], -7.0);
    }

    #[test]
    fn ordering_effect_needs_vp2() {
        let suite = parse_suite(
            r#"{"name": "ce", "factors": [{"name": "ORDER", "levels": ["match", "mismatch"]}],
              "regions": ["NP1", "VP1"],
              "items": [{"id": 1, "conditions": [
                {"label": {"ORDER": "match"}, "regions": ["The thief", "stole"]},
                {"label": {"ORDER": "mismatch"}, "regions": ["The thief", "glittered"]}]}]}"#,
        )
        .unwrap();
        assert!(ordering_effect(&suite).is_err());
    }

    #[test]
    fn wh_effects_arithmetic() {
        let suite = two_by_two();
        let scores = scores_with(&suite, |l, r| {
            match (l.get(FILLER).unwrap(), l.get(GAP).unwrap(), r) {
                ("-", "+", "post") => 10.0,
                ("+", "+", "post") => 6.0,
                ("+", "-", "obj") => 9.0,
                ("-", "-", "obj") => 5.0,
                _ => 1.0,
            }
        });
        let none = ConditionLabel::default();
        let plus = &wh_effect_plus_gap(&suite, "post", &none).unwrap()[0];
        let minus = &wh_effect_minus_gap(&suite, "obj", &none).unwrap()[0];
        let inter = &licensing_interaction(&suite, "post", "obj", &none).unwrap()[0];
        assert_eq!(
            eval_contrast(&suite, &scores, plus).unwrap().per_item[&1],
            4.0
        );
        assert_eq!(
            eval_contrast(&suite, &scores, minus).unwrap().per_item[&1],
            4.0
        );
        assert_eq!(
            eval_contrast(&suite, &scores, inter).unwrap().per_item[&1],
            8.0
        );
    }

    #[test]
    fn identical_conditions_give_zero() {
        let suite = two_by_two();
        let scores = scores_with(&suite, |_, _| 2.5);
        let none = ConditionLabel::default();
        for c in [
            wh_effect_plus_gap(&suite, "post", &none).unwrap(),
            wh_effect_minus_gap(&suite, "obj", &none).unwrap(),
            licensing_interaction(&suite, "post", "obj", &none).unwrap(),
        ] {
            assert_eq!(
                eval_contrast(&suite, &scores, &c[0]).unwrap().per_item[&1],
                0.0
            );
        }
    }

    #[test]
    fn additive_filler_and_gap_cancel_in_interaction() {
        let suite = two_by_two();
        // surprisal = base + filler term + gap term, no interaction
        let scores = scores_with(&suite, |l, r| {
            let f = if l.get(FILLER) == Some("+") {
                1.25
            } else {
                0.0
            };
            let g = if l.get(GAP) == Some("+") { 2.5 } else { 0.0 };
            r.len() as f64 + f + g
        });
        let c =
            &licensing_interaction(&suite, "post", "post", &ConditionLabel::default()).unwrap()[0];
        assert_eq!(eval_contrast(&suite, &scores, c).unwrap().per_item[&1], 0.0);
    }

    #[test]
    fn missing_scores_name_item_and_condition() {
        let suite = two_by_two();
        let mut scores = scores_with(&suite, |_, _| 1.0);
        scores.remove(&(1, label("+", "+")));
        let c = &wh_effect_plus_gap(&suite, "post", &ConditionLabel::default()).unwrap()[0];
        let err = eval_contrast(&suite, &scores, c).unwrap_err().to_string();
        assert!(err.contains("item 1, condition FILLER=+,GAP=+"), "{err}");
    }

    #[test]
    fn measuring_a_gap_is_rejected() {
        let suite = two_by_two();
        let scores = scores_with(&suite, |_, _| 1.0);
        let c = &wh_effect_plus_gap(&suite, "obj", &ConditionLabel::default()).unwrap()[0];
        assert!(eval_contrast(&suite, &scores, c).is_err());
    }

    #[test]
    fn analysis_specs_deserialize() {
        let specs: Vec<AnalysisSpec> = serde_json::from_str(
            r#"[{"preset": "ordering_effect"},
                {"preset": "wh_effect_plus_gap", "region": "post", "within": {"ISLAND": "cnp"}},
                {"preset": "licensing_interaction", "plus_region": "post", "minus_region": "obj"},
                {"contrast": {"name": "custom", "plus": [{"condition": {"GAP": "+"}, "region": "post"}],
                              "minus": [{"condition": {"GAP": "-"}, "region": "post"}]}}]"#,
        )
        .unwrap();
        assert!(matches!(
            specs[0],
            AnalysisSpec::Preset(Preset::OrderingEffect { .. })
        ));
        assert!(matches!(specs[3], AnalysisSpec::Explicit { .. }));
        let suite = two_by_two();
        let expanded = expand_analyses(&suite, &specs[2..3]).unwrap();
        assert_eq!(expanded[0].plus.len(), 2);
    }
}
