//! Events, traces and event logs.
//!
//! An event carries a case identifier, an activity and a timestamp, plus an
//! optional resource and any number of named payload values. A missing
//! optional value is the absent marker ([`AttributeValue::Absent`]).

mod registry;
mod timestamp;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

pub use registry::{extract_registry, LabelRegistry, RoleConfig, RoleSource, END_MARKER};
pub use timestamp::{Timestamp, MILLIS_PER_DAY};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AttributeKey {
    CaseId,
    Activity,
    Timestamp,
    Resource,
    Payload(String),
}

impl AttributeKey {
    pub fn is_mandatory(&self) -> bool {
        matches!(
            self,
            AttributeKey::CaseId | AttributeKey::Activity | AttributeKey::Timestamp
        )
    }
}

impl FromStr for AttributeKey {
    type Err = Error;

    /// `case_id`, `activity`, `timestamp`, `resource`; anything else names a payload.
    /// A `payload:` prefix forces the payload reading.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(name) = s.strip_prefix("payload:") {
            if name.is_empty() {
                return Err(Error::Key("empty payload name".into()));
            }
            return Ok(AttributeKey::Payload(name.to_string()));
        }
        Ok(match s {
            "case_id" | "case" => AttributeKey::CaseId,
            "activity" | "concept:name" => AttributeKey::Activity,
            "timestamp" | "time:timestamp" => AttributeKey::Timestamp,
            "resource" | "org:resource" => AttributeKey::Resource,
            "" => return Err(Error::Key("empty attribute key".into())),
            other => AttributeKey::Payload(other.to_string()),
        })
    }
}

impl fmt::Display for AttributeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeKey::CaseId => f.write_str("case_id"),
            AttributeKey::Activity => f.write_str("activity"),
            AttributeKey::Timestamp => f.write_str("timestamp"),
            AttributeKey::Resource => f.write_str("resource"),
            AttributeKey::Payload(name) => write!(f, "payload:{name}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AttributeValue<'a> {
    Text(&'a str),
    Timestamp(&'a Timestamp),
    Absent,
}

impl AttributeValue<'_> {
    pub fn is_absent(&self) -> bool {
        matches!(self, AttributeValue::Absent)
    }

    /// Owned text form; `None` for the absent marker.
    pub fn to_text(&self) -> Option<String> {
        match self {
            AttributeValue::Text(s) => Some((*s).to_string()),
            AttributeValue::Timestamp(t) => Some(t.to_iso()),
            AttributeValue::Absent => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId(pub u64);

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// One recorded event. Equality compares attribute content, not the synthesized id.
#[derive(Clone, Debug)]
pub struct Event {
    id: EventId,
    case_id: String,
    activity: String,
    timestamp: Timestamp,
    resource: Option<String>,
    payload: BTreeMap<String, String>,
}

impl Event {
    pub fn new(
        id: EventId,
        case_id: impl Into<String>,
        activity: impl Into<String>,
        timestamp: Timestamp,
    ) -> Self {
        Event {
            id,
            case_id: case_id.into(),
            activity: activity.into(),
            timestamp,
            resource: None,
            payload: BTreeMap::new(),
        }
    }

    pub fn with_resource(mut self, resource: impl Into<String>) -> Self {
        self.resource = Some(resource.into());
        self
    }

    pub fn with_payload(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.payload.insert(key.into(), value.into());
        self
    }

    pub fn id(&self) -> EventId {
        self.id
    }

    pub fn case_id(&self) -> &str {
        &self.case_id
    }

    pub fn activity(&self) -> &str {
        &self.activity
    }

    pub fn timestamp(&self) -> &Timestamp {
        &self.timestamp
    }

    pub fn resource(&self) -> Option<&str> {
        self.resource.as_deref()
    }

    pub fn payload(&self, name: &str) -> Option<&str> {
        self.payload.get(name).map(String::as_str)
    }

    pub fn payload_entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.payload.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Reads any attribute; undeclared payload names read as absent.
    pub fn attribute(&self, key: &AttributeKey) -> AttributeValue<'_> {
        match key {
            AttributeKey::CaseId => AttributeValue::Text(&self.case_id),
            AttributeKey::Activity => AttributeValue::Text(&self.activity),
            AttributeKey::Timestamp => AttributeValue::Timestamp(&self.timestamp),
            AttributeKey::Resource => self
                .resource
                .as_deref()
                .map_or(AttributeValue::Absent, AttributeValue::Text),
            AttributeKey::Payload(name) => self
                .payload
                .get(name)
                .map_or(AttributeValue::Absent, |v| AttributeValue::Text(v)),
        }
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.case_id == other.case_id
            && self.activity == other.activity
            && self.timestamp == other.timestamp
            && self.resource == other.resource
            && self.payload == other.payload
    }
}

impl Eq for Event {}

/// A case: events of one process instance in time order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    case_id: String,
    events: Vec<Event>,
}

impl Trace {
    /// Builds a trace without checking it; see [`validate_trace`].
    pub fn new(case_id: impl Into<String>, events: Vec<Event>) -> Self {
        Trace {
            case_id: case_id.into(),
            events,
        }
    }

    pub fn case_id(&self) -> &str {
        &self.case_id
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Timestamp of the first event. Panics on an empty trace, which a loaded log never holds.
    pub fn start(&self) -> &Timestamp {
        trace_start(self)
    }

    pub fn end(&self) -> &Timestamp {
        self.events.last().expect("trace is non-empty").timestamp()
    }

    pub fn duration_millis(&self) -> i64 {
        self.end().millis() - self.start().millis()
    }
}

pub fn trace_start(trace: &Trace) -> &Timestamp {
    trace
        .events
        .first()
        .expect("trace is non-empty")
        .timestamp()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceViolation {
    Empty,
    ForeignCaseId { position: usize, found: String },
    DecreasingTimestamp { position: usize },
    DuplicateEventId { position: usize, id: EventId },
}

impl fmt::Display for TraceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceViolation::Empty => f.write_str("empty trace"),
            TraceViolation::ForeignCaseId { position, found } => {
                write!(f, "foreign case id {found:?} at position {position}")
            }
            TraceViolation::DecreasingTimestamp { position } => {
                write!(f, "decreasing timestamp at position {position}")
            }
            TraceViolation::DuplicateEventId { position, id } => {
                write!(f, "duplicate event id {id} at position {position}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<TraceViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        self.violations.iter().map(ToString::to_string).collect()
    }
}

/// Lists every violated trace invariant. Positions are 1-based.
pub fn validate_trace(trace: &Trace) -> ValidationReport {
    let mut violations = Vec::new();
    if trace.events.is_empty() {
        violations.push(TraceViolation::Empty);
    }
    let mut seen = HashSet::new();
    for (index, event) in trace.events.iter().enumerate() {
        let position = index + 1;
        if event.case_id != trace.case_id {
            violations.push(TraceViolation::ForeignCaseId {
                position,
                found: event.case_id.clone(),
            });
        }
        if index > 0 && event.timestamp < trace.events[index - 1].timestamp {
            violations.push(TraceViolation::DecreasingTimestamp { position });
        }
        if !seen.insert(event.id) {
            violations.push(TraceViolation::DuplicateEventId {
                position,
                id: event.id,
            });
        }
    }
    ValidationReport { violations }
}

/// A trace the loader could not admit, kept so preprocessing can account for it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuarantinedTrace {
    pub case_id: String,
    pub reason: String,
}

/// A set of completed traces keyed by case id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventLog {
    traces: BTreeMap<String, Arc<Trace>>,
    payload_keys: BTreeSet<String>,
    quarantined: Vec<QuarantinedTrace>,
}

impl EventLog {
    pub fn empty(payload_keys: BTreeSet<String>) -> Self {
        EventLog {
            traces: BTreeMap::new(),
            payload_keys,
            quarantined: Vec::new(),
        }
    }

    /// Validates every trace and checks case-id and event-id uniqueness across the log.
    pub fn from_traces(
        traces: impl IntoIterator<Item = Trace>,
        payload_keys: BTreeSet<String>,
    ) -> Result<Self> {
        let mut log = EventLog::empty(payload_keys);
        let mut ids = HashSet::new();
        for trace in traces {
            let report = validate_trace(&trace);
            if !report.is_valid() {
                return Err(Error::Domain(format!(
                    "trace {}: {}",
                    trace.case_id,
                    report.messages().join("; ")
                )));
            }
            for event in &trace.events {
                if !ids.insert(event.id) {
                    return Err(Error::Domain(format!(
                        "event id {} is not unique",
                        event.id
                    )));
                }
            }
            let case_id = trace.case_id.clone();
            if log
                .traces
                .insert(case_id.clone(), Arc::new(trace))
                .is_some()
            {
                return Err(Error::Domain(format!("duplicate case id {case_id:?}")));
            }
        }
        Ok(log)
    }

    pub(crate) fn with_quarantine(mut self, mut quarantined: Vec<QuarantinedTrace>) -> Self {
        quarantined.sort_by(|a, b| a.case_id.cmp(&b.case_id));
        self.quarantined = quarantined;
        self
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// Traces in case-id order.
    pub fn traces(&self) -> impl ExactSizeIterator<Item = &Trace> + '_ {
        self.traces.values().map(|t| t.as_ref())
    }

    pub fn case_ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.traces.keys().map(String::as_str)
    }

    pub fn get(&self, case_id: &str) -> Option<&Trace> {
        self.traces.get(case_id).map(|t| t.as_ref())
    }

    pub fn event_count(&self) -> usize {
        self.traces.values().map(|t| t.len()).sum()
    }

    pub fn payload_keys(&self) -> &BTreeSet<String> {
        &self.payload_keys
    }

    pub fn quarantined(&self) -> &[QuarantinedTrace] {
        &self.quarantined
    }

    /// Whether `key` may be read from this log's events.
    pub fn declares(&self, key: &AttributeKey) -> bool {
        match key {
            AttributeKey::Payload(name) => self.payload_keys.contains(name),
            _ => true,
        }
    }

    /// Reads `key` from `event`, rejecting payload names the log does not declare.
    pub fn attribute_of<'e>(
        &self,
        event: &'e Event,
        key: &AttributeKey,
    ) -> Result<AttributeValue<'e>> {
        if !self.declares(key) {
            return Err(Error::Key(key.to_string()));
        }
        Ok(event.attribute(key))
    }

    /// Sub-log keeping the traces for which `keep` holds; traces are shared, not copied.
    pub fn retain(&self, mut keep: impl FnMut(&Trace) -> bool) -> EventLog {
        EventLog {
            traces: self
                .traces
                .iter()
                .filter(|(_, t)| keep(t))
                .map(|(k, t)| (k.clone(), Arc::clone(t)))
                .collect(),
            payload_keys: self.payload_keys.clone(),
            quarantined: Vec::new(),
        }
    }

    /// Sub-log restricted to the given case ids (unknown ids are ignored).
    pub fn select<'a>(&self, case_ids: impl IntoIterator<Item = &'a str>) -> EventLog {
        let wanted: HashSet<&str> = case_ids.into_iter().collect();
        self.retain(|t| wanted.contains(t.case_id()))
    }

    /// Case ids ordered by (first timestamp, case id).
    pub fn chronological_case_ids(&self) -> Vec<&str> {
        let mut ids: Vec<(&Timestamp, &str)> = self
            .traces
            .values()
            .map(|t| (t.start(), t.case_id()))
            .collect();
        ids.sort();
        ids.into_iter().map(|(_, id)| id).collect()
    }

    pub(crate) fn without_quarantine(&self) -> EventLog {
        EventLog {
            traces: self.traces.clone(),
            payload_keys: self.payload_keys.clone(),
            quarantined: Vec::new(),
        }
    }
}
