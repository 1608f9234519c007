use std::collections::BTreeMap;
use std::io::Read;

use serde::Deserialize;

use super::canonical::CANONICAL_COLUMNS;
use super::{LogBuilder, RawEvent};
use crate::error::{Error, Result};
use crate::event_model::{EventLog, Timestamp};

/// Which CSV columns hold which event attributes.
#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMapping {
    pub case_column: String,
    pub activity_column: String,
    pub timestamp_column: String,
    /// chrono pattern; ISO-8601 variants are accepted when unset.
    #[serde(default)]
    pub timestamp_format: Option<String>,
    #[serde(default)]
    pub resource_column: Option<String>,
    #[serde(default)]
    pub payload_columns: Vec<String>,
}

impl ColumnMapping {
    pub fn validate(&self) -> Result<()> {
        let m = [
            &self.case_column,
            &self.activity_column,
            &self.timestamp_column,
        ];
        if m[0] == m[1] || m[0] == m[2] || m[1] == m[2] {
            return Err(Error::Config(
                "case, activity and timestamp columns must be distinct".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let mapping: ColumnMapping =
            toml::from_str(text).map_err(|e| Error::Config(format!("column mapping: {e}")))?;
        mapping.validate()?;
        Ok(mapping)
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Csv {
            row: 1,
            message: format!("header has no column {name:?}"),
        })
}

fn cell(record: &csv::StringRecord, idx: usize) -> Option<&str> {
    record.get(idx).filter(|s| !s.is_empty())
}

/// Parses a CSV log; row numbers in errors count the header as row 1.
pub fn parse_csv(source: impl Read, mapping: &ColumnMapping) -> Result<EventLog> {
    mapping.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() {
        return Ok(EventLog::default());
    }
    let case_idx = column(&headers, &mapping.case_column)?;
    let act_idx = column(&headers, &mapping.activity_column)?;
    let ts_idx = column(&headers, &mapping.timestamp_column)?;
    let res_idx = mapping
        .resource_column
        .as_deref()
        .map(|c| column(&headers, c))
        .transpose()?;
    let payload_idx = mapping
        .payload_columns
        .iter()
        .map(|c| Ok((c.clone(), column(&headers, c)?)))
        .collect::<Result<Vec<_>>>()?;

    let mut builder = LogBuilder::default();
    for (name, _) in &payload_idx {
        builder.declare_payload(name);
    }
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Csv {
            row,
            message: e.to_string(),
        })?;
        let case_id = cell(&record, case_idx).ok_or_else(|| Error::Csv {
            row,
            message: format!("empty case id in column {:?}", mapping.case_column),
        })?;
        let timestamp = cell(&record, ts_idx)
            .map(|text| {
                Timestamp::parse(text, mapping.timestamp_format.as_deref()).map_err(|e| {
                    Error::Csv {
                        row,
                        message: e.to_string(),
                    }
                })
            })
            .transpose()?;
        let payload: BTreeMap<String, String> = payload_idx
            .iter()
            .filter_map(|(name, idx)| cell(&record, *idx).map(|v| (name.clone(), v.to_string())))
            .collect();
        builder.push(
            case_id,
            RawEvent {
                activity: cell(&record, act_idx).map(str::to_string),
                timestamp,
                resource: res_idx
                    .and_then(|idx| cell(&record, idx))
                    .map(str::to_string),
                payload,
            },
        );
    }
    builder.build()
}

/// Reads the canonical CSV layout: the four fixed columns, then payload columns.
pub fn parse_canonical(mut source: impl Read) -> Result<EventLog> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(bytes.as_slice());
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() {
        return Ok(EventLog::default());
    }
    let fixed: Vec<&str> = headers.iter().take(CANONICAL_COLUMNS.len()).collect();
    if fixed != CANONICAL_COLUMNS {
        return Err(Error::Csv {
            row: 1,
            message: format!(
                "canonical header must start with {}",
                CANONICAL_COLUMNS.join(",")
            ),
        });
    }
    let mapping = ColumnMapping {
        case_column: CANONICAL_COLUMNS[0].into(),
        activity_column: CANONICAL_COLUMNS[1].into(),
        timestamp_column: CANONICAL_COLUMNS[2].into(),
        timestamp_format: None,
        resource_column: Some(CANONICAL_COLUMNS[3].into()),
        payload_columns: headers
            .iter()
            .skip(CANONICAL_COLUMNS.len())
            .map(str::to_string)
            .collect(),
    };
    parse_csv(bytes.as_slice(), &mapping)
}
