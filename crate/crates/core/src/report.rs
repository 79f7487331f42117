//! Report tables and run manifests.
//!
//! A report is a tab-separated table with one row per contrast and cell:
//!
//! ```text
//! metric  condition_set  mean_bits  ci_low  ci_high  p_perm  n_items  backend  suite
//! ```
//!
//! preceded by `#` comment lines naming the interval and test procedures.
//! Intervals of contrasts sharing a name are computed jointly, with
//! within-item adjustment across their cells; a contrast with one cell gets
//! an ordinary t interval. `NA` marks an undefined interval.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::ScoresFile;
use crate::metrics::{eval_contrast, Contrast, MetricResult};
use crate::protocol::BackendInfo;
use crate::stats::{paired_permutation, t_interval, within_item_ci, ConditionMatrix};
use crate::suite::TestSuite;

pub const HEADER: [&str; 9] = [
    "metric",
    "condition_set",
    "mean_bits",
    "ci_low",
    "ci_high",
    "p_perm",
    "n_items",
    "backend",
    "suite",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeOptions {
    pub ci_level: f64,
    pub n_perm: u64,
    pub seed: u64,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            ci_level: 0.95,
            n_perm: 10_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub metric: String,
    pub condition_set: String,
    pub mean_bits: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub p_perm: f64,
    pub n_items: usize,
    pub backend: String,
    pub suite: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub options: AnalyzeOptions,
    pub rows: Vec<ReportRow>,
    pub metrics: Vec<MetricResult>,
}

/// Evaluate every contrast on the scores and summarise it.
pub fn analyze(
    suite: &TestSuite,
    scores: &ScoresFile,
    contrasts: &[Contrast],
    options: AnalyzeOptions,
) -> Result<Report> {
    scores.check_suite(suite)?;
    if contrasts.is_empty() {
        return Err(Error::validation(format!(
            "no analyses to run on suite {}",
            suite.name
        )));
    }
    let table = scores.condition_scores();
    let metrics: Vec<MetricResult> = contrasts
        .iter()
        .map(|c| eval_contrast(suite, &table, c))
        .collect::<Result<_>>()?;

    // joint within-item intervals per contrast name
    let mut groups: BTreeMap<&str, Vec<&MetricResult>> = BTreeMap::new();
    for m in &metrics {
        groups.entry(m.name.as_str()).or_default().push(m);
    }
    let mut intervals: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for group in groups.values() {
        if group[0].n_items < 2 {
            continue;
        }
        if group.len() >= 2 {
            let matrix = ConditionMatrix::from_metrics(group)?;
            for i in within_item_ci(&matrix, options.ci_level)?.intervals {
                intervals.insert(i.condition, (i.lower, i.upper));
            }
        } else {
            let i = t_interval(&group[0].values(), options.ci_level)?;
            intervals.insert(group[0].id(), (i.lower, i.upper));
        }
    }

    let rows = metrics
        .iter()
        .map(|m| {
            let perm = paired_permutation(&m.values(), options.n_perm, options.seed)?;
            let ci = intervals.get(&m.id());
            Ok(ReportRow {
                metric: m.name.clone(),
                condition_set: if m.cell.is_empty() {
                    "all".into()
                } else {
                    m.cell.clone()
                },
                mean_bits: perm.observed,
                ci_low: ci.map(|c| c.0),
                ci_high: ci.map(|c| c.1),
                p_perm: perm.p_value,
                n_items: m.n_items,
                backend: scores.backend.name.clone(),
                suite: suite.name.clone(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(Report {
        options,
        rows,
        metrics,
    })
}

fn num(v: f64) -> String {
    // avoid "-0.000000"
    let s = format!("{v:.6}");
    if s.trim_start_matches('-')
        .chars()
        .all(|c| c == '0' || c == '.')
    {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), num)
}

fn clean(field: &str) -> String {
    field.replace(['\t', '\n', '\r'], " ")
}

impl Report {
    pub fn notes(&self) -> Vec<String> {
        vec![
            format!(
                "ci: {}% within-item (Masson-Loftus) interval across the cells of each metric; t interval for single-cell metrics",
                num(self.options.ci_level * 100.0).trim_end_matches('0').trim_end_matches('.')
            ),
            format!(
                "p_perm: two-sided paired sign-flip permutation test of mean = 0 on by-item values, exhaustive when 2^n <= {} else sampled (seed {}); used in place of mixed-effects regression",
                self.options.n_perm, self.options.seed
            ),
        ]
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for n in self.notes() {
            writeln!(out, "# {n}").unwrap();
        }
        out.push_str(&HEADER.join("\t"));
        out.push('\n');
        for r in &self.rows {
            let fields = [
                clean(&r.metric),
                clean(&r.condition_set),
                num(r.mean_bits),
                opt(r.ci_low),
                opt(r.ci_high),
                num(r.p_perm),
                r.n_items.to_string(),
                clean(&r.backend),
                clean(&r.suite),
            ];
            out.push_str(&fields.join("\t"));
            out.push('\n');
        }
        out
    }

    /// Per-item metric values as a long table: metric, condition_set, item, value_bits.
    pub fn items_tsv(&self) -> String {
        let mut out = String::from("metric\tcondition_set\titem\tvalue_bits\n");
        for m in &self.metrics {
            let cell = if m.cell.is_empty() {
                "all"
            } else {
                m.cell.as_str()
            };
            for (item, v) in &m.per_item {
                writeln!(
                    out,
                    "{}\t{}\t{item}\t{}",
                    clean(&m.name),
                    clean(cell),
                    num(*v)
                )
                .unwrap();
            }
        }
        out
    }
}

/// Concatenate report tables under one header, keeping the comment lines of
/// the first table.
pub fn merge_reports<S: AsRef<str>>(tables: &[S]) -> Result<String> {
    if tables.is_empty() {
        return Err(Error::validation("no reports to merge"));
    }
    let header = HEADER.join("\t");
    let mut comments = Vec::new();
    let mut rows = Vec::new();
    for (i, t) in tables.iter().enumerate() {
        let mut saw_header = false;
        for line in t.as_ref().lines() {
            if let Some(c) = line.strip_prefix('#') {
                if i == 0 {
                    comments.push(format!("#{c}"));
                }
            } else if !saw_header {
                if line != header {
                    return Err(Error::validation(format!(
                        "report {} has an unexpected header {line:?}",
                        i + 1
                    )));
                }
                saw_header = true;
            } else if !line.is_empty() {
                if line.split('\t').count() != HEADER.len() {
                    return Err(Error::validation(format!(
                        "report {}: malformed row {line:?}",
                        i + 1
                    )));
                }
                rows.push(line.to_string());
            }
        }
        if !saw_header {
            return Err(Error::validation(format!("report {} has no header", i + 1)));
        }
    }
    let mut out = String::new();
    for c in comments {
        out.push_str(&c);
        out.push('\n');
    }
    out.push_str(&header);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRef {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun an analysis and check its output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub suite: FileRef,
    pub scores: FileRef,
    pub backend: BackendInfo,
    pub contrasts: Vec<Contrast>,
    pub ci_level: f64,
    pub n_perm: u64,
    pub seed: u64,
    pub report: FileRef,
    /// Seconds since the Unix epoch.
    pub created: u64,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn parse(source: &str) -> Result<Self> {
        serde_json::from_str(source).map_err(Error::from_json)
    }

    pub fn options(&self) -> AnalyzeOptions {
        AnalyzeOptions {
            ci_level: self.ci_level,
            n_perm: self.n_perm,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{score_suite, ScoreOptions};
    use crate::metrics::ordering_effect;
    use crate::oracle::{BaseBits, MockBackend, OracleRule, OracleSpec};
    use crate::suite::{parse_suite, ConditionLabel};

    fn suite() -> TestSuite {
        let mut items = Vec::new();
        for id in 1..=6 {
            let mut conds = Vec::new();
            for ctx in ["embedding", "sentence"] {
                for (order, a, b) in [
                    ("match", "stole", "glittered"),
                    ("mismatch", "glittered", "stole"),
                ] {
                    conds.push(format!(
                        r#"{{"label": {{"ORDER": "{order}", "CONTEXT": "{ctx}"}}, "regions": ["The diamond{id}", "{}", "the thief", "{a}", "{b}", "."]}}"#,
                        if ctx == "embedding" { "that" } else { "and" }
                    ));
                }
            }
            items.push(format!(
                r#"{{"id": {id}, "conditions": [{}]}}"#,
                conds.join(",")
            ));
        }
        parse_suite(&format!(
            r#"{{"name": "mini", "factors": [{{"name": "ORDER", "levels": ["match", "mismatch"]}}, {{"name": "CONTEXT", "levels": ["embedding", "sentence"]}}],
               "regions": ["NP1", "comp", "NP2", "VP1", "VP2", "end"], "items": [{}]}}"#,
            items.join(",")
        ))
        .unwrap()
    }

    fn run() -> Report {
        let s = suite();
        let rules = vec![
            OracleRule::new(
                ConditionLabel::new([("ORDER", "mismatch"), ("CONTEXT", "sentence")]),
                "VP1",
                2.0,
            ),
            OracleRule::new(
                ConditionLabel::new([("ORDER", "mismatch"), ("CONTEXT", "sentence")]),
                "VP2",
                2.0,
            ),
        ];
        let b =
            MockBackend::with_suite(OracleSpec::new(BaseBits::Constant(1.0), rules), &s).unwrap();
        let scores = score_suite(&s, "x", &b, ScoreOptions::default()).unwrap();
        analyze(
            &s,
            &scores,
            &ordering_effect(&s).unwrap(),
            AnalyzeOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn rows_per_cell() {
        let r = run();
        assert_eq!(r.rows.len(), 2);
        let emb = &r.rows[0];
        assert_eq!(emb.condition_set, "CONTEXT=embedding");
        assert_eq!(emb.mean_bits, 0.0);
        assert_eq!(emb.p_perm, 1.0);
        let sent = &r.rows[1];
        assert_eq!(sent.mean_bits, 4.0);
        assert_eq!(sent.p_perm, 2.0 / 64.0);
        assert_eq!(sent.backend, "mock-oracle");
        // within-item intervals: every item has the same effects, so zero width
        assert_eq!(sent.ci_low, Some(4.0));
        assert_eq!(sent.ci_high, Some(4.0));
    }

    #[test]
    fn tsv_is_stable_and_mergeable() {
        let a = run().to_tsv();
        assert_eq!(a, run().to_tsv());
        assert!(a.starts_with("# ci: 95% within-item"));
        let lines: Vec<&str> = a.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(lines[0], HEADER.join("\t"));
        assert_eq!(lines[2], "ordering_effect\tCONTEXT=sentence\t4.000000\t4.000000\t4.000000\t0.031250\t6\tmock-oracle\tmini");
        let merged = merge_reports(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(merged.lines().filter(|l| !l.starts_with('#')).count(), 5);
        assert!(merge_reports(&["bad\theader\n"]).is_err());
    }

    #[test]
    fn negative_zero_prints_as_zero() {
        assert_eq!(num(-0.0), "0.000000");
        assert_eq!(num(-1e-9), "0.000000");
        assert_eq!(num(-1.5), "-1.500000");
    }
}
