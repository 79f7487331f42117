use serde::{Deserialize, Serialize};

use super::{Condition, ConditionLabel, Item};
use crate::error::{Error, Result};

/// Half-open `[start, end)` interval of a region, in characters (Unicode
/// scalar values) of the rendered sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSpan {
    pub region: String,
    pub start: usize,
    pub end: usize,
}

impl RegionSpan {
    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, pos: usize) -> bool {
        self.start <= pos && pos < self.end
    }
}

/// One physical sentence with the spans of the regions it hosts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionedSentence {
    pub text: String,
    pub spans: Vec<RegionSpan>,
}

impl RegionedSentence {
    pub fn span(&self, region: &str) -> Option<&RegionSpan> {
        self.spans.iter().find(|s| s.region == region)
    }

    /// Text covered by a span.
    pub fn slice(&self, span: &RegionSpan) -> String {
        self.text
            .chars()
            .skip(span.start)
            .take(span.end - span.start)
            .collect()
    }

    /// Region owning character `pos`: the last non-empty region starting at
    /// or before it. `None` when `pos` precedes every region.
    pub fn region_at(&self, pos: usize) -> Option<&RegionSpan> {
        self.spans
            .iter()
            .rev()
            .find(|s| !s.is_empty() && s.start <= pos)
    }
}

/// Render every physical sentence of a condition, in sentence-index order.
pub fn render_condition(cond: &Condition) -> Vec<RegionedSentence> {
    (0..cond.sentence_count())
        .map(|s| {
            let mut text = String::new();
            let mut len = 0usize;
            let mut spans = Vec::new();
            for r in cond.regions.iter().filter(|r| r.sentence == s) {
                if r.text.is_empty() {
                    // zero-width, anchored at the end of the preceding material
                    spans.push(RegionSpan {
                        region: r.name.clone(),
                        start: len,
                        end: len,
                    });
                    continue;
                }
                if len > 0 {
                    text.push(' ');
                    len += 1;
                }
                let start = len;
                text.push_str(&r.text);
                len += r.text.chars().count();
                spans.push(RegionSpan {
                    region: r.name.clone(),
                    start,
                    end: len,
                });
            }
            RegionedSentence { text, spans }
        })
        .collect()
}

pub fn render(item: &Item, label: &ConditionLabel) -> Result<Vec<RegionedSentence>> {
    Ok(render_condition(item.condition(label)?))
}

/// Render a single-sentence condition.
pub fn render_sentence(item: &Item, label: &ConditionLabel) -> Result<RegionedSentence> {
    let mut sentences = render(item, label)?;
    if sentences.len() != 1 {
        return Err(Error::validation(format!(
            "item {}, condition {label} renders {} sentences",
            item.id,
            sentences.len()
        )));
    }
    Ok(sentences.remove(0))
}
