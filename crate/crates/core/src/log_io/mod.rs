//! Reading, cleaning and writing event logs.

mod canonical;
mod csv_log;
mod preprocess;
mod xes;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use flate2::read::GzDecoder;

use crate::error::{Error, Result};
use crate::event_model::{Event, EventId, EventLog, QuarantinedTrace, Timestamp, Trace};

pub use canonical::{canonical_bytes, write_canonical, CANONICAL_COLUMNS};
pub use csv_log::{parse_canonical, parse_csv, ColumnMapping};
pub use preprocess::{preprocess, PreprocessPolicy, PreprocessReport};
pub use xes::parse_xes;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LogFormat {
    Xes,
    Csv,
}

impl FromStr for LogFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xes" => Ok(LogFormat::Xes),
            "csv" => Ok(LogFormat::Csv),
            other => Err(Error::Input(format!(
                "unknown log format {other:?} (expected xes or csv)"
            ))),
        }
    }
}

impl fmt::Display for LogFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogFormat::Xes => "xes",
            LogFormat::Csv => "csv",
        })
    }
}

/// Reads a whole file, transparently inflating gzip content.
pub fn read_source(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::file(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::file(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Loads a log file. CSV without a mapping is read as canonical CSV.
pub fn load_log(
    path: &Path,
    format: LogFormat,
    mapping: Option<&ColumnMapping>,
) -> Result<EventLog> {
    let bytes = read_source(path)?;
    match (format, mapping) {
        (LogFormat::Xes, _) => parse_xes(bytes.as_slice()),
        (LogFormat::Csv, Some(m)) => parse_csv(bytes.as_slice(), m),
        (LogFormat::Csv, None) => parse_canonical(bytes.as_slice()),
    }
}

/// An event as read from a file, before mandatory values are checked.
#[derive(Debug, Default)]
struct RawEvent {
    activity: Option<String>,
    timestamp: Option<Timestamp>,
    resource: Option<String>,
    payload: BTreeMap<String, String>,
}

/// Groups raw events by case in file order and builds the log; cases with
/// missing mandatory values are quarantined instead of failing the load.
#[derive(Debug, Default)]
struct LogBuilder {
    cases: Vec<(String, Vec<RawEvent>)>,
    index: HashMap<String, usize>,
    payload_keys: BTreeSet<String>,
    forced_quarantine: Vec<QuarantinedTrace>,
}

impl LogBuilder {
    fn declare_payload(&mut self, key: &str) {
        self.payload_keys.insert(key.to_string());
    }

    fn push(&mut self, case_id: &str, event: RawEvent) {
        for key in event.payload.keys() {
            if !self.payload_keys.contains(key) {
                self.payload_keys.insert(key.clone());
            }
        }
        let slot = match self.index.get(case_id) {
            Some(&i) => i,
            None => {
                self.cases.push((case_id.to_string(), Vec::new()));
                self.index.insert(case_id.to_string(), self.cases.len() - 1);
                self.cases.len() - 1
            }
        };
        self.cases[slot].1.push(event);
    }

    fn quarantine(&mut self, case_id: String, reason: &str) {
        self.forced_quarantine.push(QuarantinedTrace {
            case_id,
            reason: reason.to_string(),
        });
    }

    fn build(self) -> Result<EventLog> {
        let mut next_id = 0u64;
        let mut traces = Vec::new();
        let mut quarantined = self.forced_quarantine;
        for (case_id, raw_events) in self.cases {
            let mut events = Vec::with_capacity(raw_events.len());
            let mut missing = None;
            for raw in raw_events {
                let id = EventId(next_id);
                next_id += 1;
                let (activity, timestamp) = match (raw.activity, raw.timestamp) {
                    (Some(a), Some(t)) => (a, t),
                    (None, _) => {
                        missing.get_or_insert("missing_activity");
                        continue;
                    }
                    (_, None) => {
                        missing.get_or_insert("missing_timestamp");
                        continue;
                    }
                };
                let mut event = Event::new(id, case_id.clone(), activity, timestamp);
                if let Some(r) = raw.resource {
                    event = event.with_resource(r);
                }
                for (k, v) in raw.payload {
                    event = event.with_payload(k, v);
                }
                events.push(event);
            }
            if let Some(reason) = missing {
                quarantined.push(QuarantinedTrace {
                    case_id,
                    reason: reason.to_string(),
                });
                continue;
            }
            if events.is_empty() {
                quarantined.push(QuarantinedTrace {
                    case_id,
                    reason: "empty_trace".to_string(),
                });
                continue;
            }
            // stable: ties keep file order
            events.sort_by(|a, b| a.timestamp().cmp(b.timestamp()));
            traces.push(Trace::new(case_id, events));
        }
        Ok(EventLog::from_traces(traces, self.payload_keys)?.with_quarantine(quarantined))
    }
}
