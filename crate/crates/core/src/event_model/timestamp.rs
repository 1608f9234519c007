use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Utc};

use crate::error::{Error, Result};

const NAIVE_FORMATS: &[&str] = &[
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y/%m/%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
    "%Y/%m/%d %H:%M",
];

const OFFSET_FORMATS: &[&str] = &["%Y-%m-%dT%H:%M:%S%.f%z", "%Y-%m-%d %H:%M:%S%.f%z"];

pub const MILLIS_PER_DAY: i64 = 86_400_000;

/// A UTC instant at millisecond precision that remembers its source text.
///
/// Equality, ordering and hashing use the instant only.
#[derive(Clone, Debug)]
pub struct Timestamp {
    millis: i64,
    source: String,
}

impl Timestamp {
    pub fn from_millis(millis: i64) -> Self {
        let mut ts = Timestamp {
            millis,
            source: String::new(),
        };
        ts.source = ts.to_iso();
        ts
    }

    /// Parses `text` with an explicit chrono pattern, or with the built-in
    /// ISO-8601 variants when `format` is `None`. Values without an offset are UTC.
    pub fn parse(text: &str, format: Option<&str>) -> Result<Self> {
        let trimmed = text.trim();
        let instant = match format {
            Some(fmt) => parse_with(trimmed, fmt),
            None => parse_iso(trimmed),
        }
        .ok_or_else(|| Error::Input(format!("unparseable timestamp {text:?}")))?;
        Ok(Timestamp {
            millis: instant.timestamp_millis(),
            source: text.to_string(),
        })
    }

    pub fn millis(&self) -> i64 {
        self.millis
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// `YYYY-MM-DDTHH:MM:SS.sssZ`
    pub fn to_iso(&self) -> String {
        match Utc.timestamp_millis_opt(self.millis).single() {
            Some(dt) => dt.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string(),
            None => format!("@{}ms", self.millis),
        }
    }
}

fn parse_iso(text: &str) -> Option<DateTime<Utc>> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in OFFSET_FORMATS {
        if let Ok(dt) = DateTime::parse_from_str(text, fmt) {
            return Some(dt.with_timezone(&Utc));
        }
    }
    for fmt in NAIVE_FORMATS {
        if let Ok(naive) = NaiveDateTime::parse_from_str(text, fmt) {
            return Some(naive.and_utc());
        }
    }
    NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|n| n.and_utc())
}

fn parse_with(text: &str, fmt: &str) -> Option<DateTime<Utc>> {
    if let Ok(dt) = DateTime::parse_from_str(text, fmt) {
        return Some(dt.with_timezone(&Utc));
    }
    if let Ok(naive) = NaiveDateTime::parse_from_str(text, fmt) {
        return Some(naive.and_utc());
    }
    NaiveDate::parse_from_str(text, fmt)
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|n| n.and_utc())
}

impl PartialEq for Timestamp {
    fn eq(&self, other: &Self) -> bool {
        self.millis == other.millis
    }
}

impl Eq for Timestamp {}

impl PartialOrd for Timestamp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Timestamp {
    fn cmp(&self, other: &Self) -> Ordering {
        self.millis.cmp(&other.millis)
    }
}

impl Hash for Timestamp {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.millis.hash(state);
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_offsets_to_utc() {
        let a = Timestamp::parse("2020-10-09T16:50:17.000+02:00", None).unwrap();
        let b = Timestamp::parse("2020-10-09T14:50:17", None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_iso(), "2020-10-09T14:50:17.000Z");
        assert_eq!(a.source(), "2020-10-09T16:50:17.000+02:00");
        let c = Timestamp::parse("2020-10-09T16:50:17.123+0200", None).unwrap();
        assert_eq!(c.millis() - a.millis(), 123);
    }

    #[test]
    fn truncates_to_milliseconds() {
        let a = Timestamp::parse("2020-01-01T00:00:00.123456Z", None).unwrap();
        assert_eq!(a.to_iso(), "2020-01-01T00:00:00.123Z");
    }

    #[test]
    fn explicit_format() {
        let a = Timestamp::parse("09.10.2020 14:50", Some("%d.%m.%Y %H:%M")).unwrap();
        assert_eq!(a.to_iso(), "2020-10-09T14:50:00.000Z");
        assert!(Timestamp::parse("yesterday", None).is_err());
    }
}
