//! Descriptive statistics of an event log.

use std::fmt;

use crate::error::{Error, Result};
use crate::event_model::{EventLog, LabelRegistry, MILLIS_PER_DAY};
use crate::rational::{format_decimal, from_usize, ratio, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogStatistics {
    pub cases: usize,
    pub activities: usize,
    pub roles: usize,
    pub events: usize,
    pub max_case_length: usize,
    pub min_case_length: usize,
    pub avg_case_length: Rational,
    /// Longest first-to-last-event span of a single case, in days.
    pub max_duration_days: Rational,
}

pub fn log_statistics(log: &EventLog, registry: &LabelRegistry) -> Result<LogStatistics> {
    if log.is_empty() {
        return Err(Error::Domain("statistics of an empty log".into()));
    }
    let max_case_length = log.traces().map(|t| t.len()).max().unwrap_or(0);
    let min_case_length = log.traces().map(|t| t.len()).min().unwrap_or(0);
    let events = log.event_count();
    let max_duration_ms = log.traces().map(|t| t.duration_millis()).max().unwrap_or(0);
    Ok(LogStatistics {
        cases: log.len(),
        activities: registry.activities().len(),
        roles: registry.roles().len(),
        events,
        max_case_length,
        min_case_length,
        avg_case_length: from_usize(events) / from_usize(log.len()),
        max_duration_days: ratio(max_duration_ms, MILLIS_PER_DAY),
    })
}

impl LogStatistics {
    /// `(measure, value)` rows in presentation order, decimals rounded to two places.
    pub fn rows(&self) -> Vec<(&'static str, String)> {
        vec![
            ("Number of cases", self.cases.to_string()),
            ("Number of activities", self.activities.to_string()),
            ("Number of roles", self.roles.to_string()),
            ("Number of events", self.events.to_string()),
            ("Maximal case length", self.max_case_length.to_string()),
            ("Minimal case length", self.min_case_length.to_string()),
            (
                "Average case length",
                format_decimal(&self.avg_case_length, 2),
            ),
            (
                "Maximal duration (days)",
                format_decimal(&self.max_duration_days, 2),
            ),
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("measure,value\n");
        for (name, value) in self.rows() {
            out.push_str(&format!("{name},{value}\n"));
        }
        out
    }
}

impl fmt::Display for LogStatistics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = self.rows();
        let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
        for (name, value) in rows {
            writeln!(f, "{name:<width$}  {value:>10}")?;
        }
        Ok(())
    }
}
