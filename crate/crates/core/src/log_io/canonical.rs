use std::io::Write;

use crate::error::{Error, Result};
use crate::event_model::EventLog;

pub const CANONICAL_COLUMNS: [&str; 4] = ["case_id", "activity", "timestamp", "resource"];

/// Deterministic CSV: traces by (start, case id), events in trace order,
/// fixed columns then payload columns in lexicographic order, `\n` line ends.
pub fn write_canonical(log: &EventLog, sink: impl Write) -> Result<()> {
    let payload: Vec<&String> = log.payload_keys().iter().collect();
    if let Some(clash) = payload
        .iter()
        .find(|p| CANONICAL_COLUMNS.contains(&p.as_str()))
    {
        return Err(Error::Domain(format!(
            "payload key {clash:?} clashes with a canonical column"
        )));
    }
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    let csv_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Internal(format!("csv writer: {other:?}")),
    };
    let header: Vec<&str> = CANONICAL_COLUMNS
        .iter()
        .copied()
        .chain(payload.iter().map(|s| s.as_str()))
        .collect();
    writer.write_record(&header).map_err(csv_err)?;
    for case_id in log.chronological_case_ids() {
        let trace = log.get(case_id).expect("case id from this log");
        for event in trace.events() {
            let ts = event.timestamp().to_iso();
            let mut row: Vec<&str> = vec![
                event.case_id(),
                event.activity(),
                ts.as_str(),
                event.resource().unwrap_or(""),
            ];
            row.extend(payload.iter().map(|k| event.payload(k).unwrap_or("")));
            writer.write_record(&row).map_err(csv_err)?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn canonical_bytes(log: &EventLog) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_canonical(log, &mut out)?;
    Ok(out)
}
