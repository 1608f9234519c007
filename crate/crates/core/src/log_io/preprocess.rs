use std::collections::BTreeMap;

use serde::Deserialize;

use crate::event_model::{EventLog, Trace};

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessPolicy {
    /// Drop traces with any event lacking a resource.
    pub require_resource: bool,
    /// Drop traces with any event lacking one of these payload values.
    pub required_payloads: Vec<String>,
    pub min_length: usize,
}

impl Default for PreprocessPolicy {
    fn default() -> Self {
        PreprocessPolicy {
            require_resource: false,
            required_payloads: Vec::new(),
            min_length: 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PreprocessReport {
    pub input_traces: usize,
    pub removed_traces: usize,
    pub removal_reasons: BTreeMap<String, usize>,
}

fn rejection(trace: &Trace, policy: &PreprocessPolicy) -> Option<String> {
    if policy.require_resource && trace.events().iter().any(|e| e.resource().is_none()) {
        return Some("missing_resource".into());
    }
    for name in &policy.required_payloads {
        if trace.events().iter().any(|e| e.payload(name).is_none()) {
            return Some(format!("missing_payload:{name}"));
        }
    }
    if trace.len() < policy.min_length {
        return Some("too_short".into());
    }
    None
}

/// Removes whole traces that violate `policy`, plus traces the loader quarantined.
pub fn preprocess(log: &EventLog, policy: &PreprocessPolicy) -> (EventLog, PreprocessReport) {
    let mut report = PreprocessReport {
        input_traces: log.len() + log.quarantined().len(),
        ..Default::default()
    };
    for q in log.quarantined() {
        *report.removal_reasons.entry(q.reason.clone()).or_default() += 1;
        report.removed_traces += 1;
    }
    let mut reasons = Vec::new();
    let kept = log
        .without_quarantine()
        .retain(|trace| match rejection(trace, policy) {
            Some(reason) => {
                reasons.push(reason);
                false
            }
            None => true,
        });
    for reason in reasons {
        *report.removal_reasons.entry(reason).or_default() += 1;
        report.removed_traces += 1;
    }
    (kept, report)
}
