use std::fmt;

use super::TestSuite;
use crate::metrics::Contrast;

/// A (region, condition) reference of a contrast that cannot be measured.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub contrast: String,
    pub item: Option<u64>,
    pub condition: String,
    pub region: String,
    pub reason: &'static str,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.contrast)?;
        if let Some(item) = self.item {
            write!(f, "item {item}, ")?;
        }
        write!(
            f,
            "condition {}, region {}: {}",
            self.condition, self.region, self.reason
        )
    }
}

/// Every violation of the measurability requirement: referenced regions and
/// conditions must exist, and measured regions must be non-empty in every
/// item. Never fails; an empty list means the contrast is measurable.
pub fn validate_measurement_regions(suite: &TestSuite, contrast: &Contrast) -> Vec<Violation> {
    let mut out = Vec::new();
    let violation = |item, term: &crate::metrics::Term, reason| Violation {
        contrast: contrast.id(),
        item,
        condition: term.condition.to_string(),
        region: term.region.clone(),
        reason,
    };
    for term in contrast.terms() {
        if !suite.has_region(&term.region) {
            out.push(violation(None, term, "region not declared by the suite"));
            continue;
        }
        if !suite.is_cell(&term.condition) {
            out.push(violation(
                None,
                term,
                "condition is not a cell of the factor cross",
            ));
            continue;
        }
        for item in &suite.items {
            let text = item
                .conditions
                .get(&term.condition)
                .and_then(|c| c.region(&term.region))
                .map(|r| r.text.as_str());
            match text {
                None => out.push(violation(
                    Some(item.id),
                    term,
                    "condition or region missing",
                )),
                Some("") => out.push(violation(Some(item.id), term, "region is empty")),
                Some(_) => {}
            }
        }
    }
    out
}
