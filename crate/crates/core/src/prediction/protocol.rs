//! File formats exchanged with external predictors.
//!
//! * `train.csv`: the training log in canonical CSV
//! * `registry.txt`: `[activities]` then `[roles]` sections, one label per
//!   line, closed by `[end]` and the end-marker line
//! * `instances.csv`: `case_id,prefix_length,prefix_activities,prefix_roles,task`
//!   with prefix labels joined by `|`
//! * `predictions.txt`: one label per line, aligned with the instance rows

use std::io::{BufRead, BufReader, Read, Write};

use super::{PredictionInstance, PredictionTask};
use crate::error::{Error, Result};
use crate::event_model::{LabelRegistry, END_MARKER};

pub const INSTANCE_COLUMNS: [&str; 5] = [
    "case_id",
    "prefix_length",
    "prefix_activities",
    "prefix_roles",
    "task",
];
const PREFIX_SEPARATOR: char = '|';

pub fn write_registry(registry: &LabelRegistry, mut sink: impl Write) -> Result<()> {
    writeln!(sink, "[activities]")?;
    for label in registry.activities() {
        writeln!(sink, "{label}")?;
    }
    writeln!(sink, "[roles]")?;
    for label in registry.roles() {
        writeln!(sink, "{label}")?;
    }
    writeln!(sink, "[end]")?;
    writeln!(sink, "{END_MARKER}")?;
    Ok(())
}

/// Reads a registry file. Resources are not part of the exchange format and come back empty.
pub fn read_registry(source: impl Read) -> Result<LabelRegistry> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Activities,
        Roles,
        End,
    }
    let mut section = Section::None;
    let (mut activities, mut roles) = (Vec::new(), Vec::new());
    let mut saw_marker = false;
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        match line {
            "[activities]" if section == Section::None => section = Section::Activities,
            "[roles]" if section == Section::Activities => section = Section::Roles,
            "[end]" if section == Section::Roles => section = Section::End,
            "" => {}
            label => match section {
                Section::Activities => activities.push(label.to_string()),
                Section::Roles => roles.push(label.to_string()),
                Section::End if label == END_MARKER && !saw_marker => saw_marker = true,
                _ => {
                    return Err(Error::Protocol(format!(
                        "registry line {}: unexpected {label:?}",
                        i + 1
                    )))
                }
            },
        }
    }
    if !saw_marker {
        return Err(Error::Protocol(
            "registry is missing the [end] section".into(),
        ));
    }
    LabelRegistry::from_labels(activities, Vec::new(), roles)
}

fn csv_writer<W: Write>(sink: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink)
}

fn csv_error(e: csv::Error) -> Error {
    let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Csv {
        row,
        message: e.to_string(),
    }
}

pub fn write_instances(
    instances: &[PredictionInstance],
    task: PredictionTask,
    sink: impl Write,
) -> Result<()> {
    let mut w = csv_writer(sink);
    w.write_record(INSTANCE_COLUMNS).map_err(csv_error)?;
    let sep = PREFIX_SEPARATOR.to_string();
    for inst in instances {
        let acts = inst.context(PredictionTask::NextActivity).join(&sep);
        let roles = inst.context(PredictionTask::NextRole).join(&sep);
        let len = inst.prefix_length().to_string();
        w.write_record([&*inst.case_id, &len, &acts, &roles, task.name()])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// One row of `instances.csv`, without its target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceQuery {
    pub case_id: String,
    pub prefix_activities: Vec<String>,
    /// Empty strings stand for events without a role.
    pub prefix_roles: Vec<String>,
    pub task: PredictionTask,
}

impl InstanceQuery {
    pub fn prefix_length(&self) -> usize {
        self.prefix_activities.len()
    }

    pub fn context(&self) -> Vec<&str> {
        let labels = match self.task {
            PredictionTask::NextActivity => &self.prefix_activities,
            PredictionTask::NextRole => &self.prefix_roles,
        };
        labels.iter().map(String::as_str).collect()
    }
}

pub fn read_instances(source: impl Read) -> Result<Vec<InstanceQuery>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(source);
    let header = r.headers().map_err(csv_error)?.clone();
    if header.iter().ne(INSTANCE_COLUMNS) {
        return Err(Error::Protocol(format!(
            "instances header must be {}",
            INSTANCE_COLUMNS.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let row = i + 2;
        let bad = |msg: String| Error::Csv { row, message: msg };
        let len: usize = rec[1]
            .parse()
            .map_err(|_| bad(format!("bad prefix_length {:?}", &rec[1])))?;
        let split = |s: &str| {
            s.split(PREFIX_SEPARATOR)
                .map(str::to_string)
                .collect::<Vec<_>>()
        };
        let acts = split(&rec[2]);
        let roles = split(&rec[3]);
        if len == 0 || acts.len() != len || roles.len() != len {
            return Err(bad(format!(
                "prefix_length {len} does not match the prefix columns"
            )));
        }
        out.push(InstanceQuery {
            case_id: rec[0].to_string(),
            prefix_activities: acts,
            prefix_roles: roles,
            task: rec[4].parse()?,
        });
    }
    Ok(out)
}

pub fn write_predictions(labels: &[String], mut sink: impl Write) -> Result<()> {
    for label in labels {
        writeln!(sink, "{label}")?;
    }
    Ok(())
}

/// One label per line; a trailing newline is optional, `\r\n` is accepted.
pub fn read_predictions(source: impl Read) -> Result<Vec<String>> {
    BufReader::new(source)
        .lines()
        .map(|l| {
            l.map(|s| s.trim_end_matches('\r').to_string())
                .map_err(Error::from)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_model::fixtures::table1;
    use crate::event_model::{extract_registry, RoleSource};
    use crate::prediction::generate_instances;

    #[test]
    fn registry_layout_and_round_trip() {
        let reg = extract_registry(&table1(), &RoleSource::Resource).unwrap();
        let mut buf = Vec::new();
        write_registry(&reg, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "[activities]\nA\nC\nT\nW\n[roles]\nKH\nMF\nMK\nPE\nSJ\nSL\n[end]\n⟂END\n"
        );
        let back = read_registry(&buf[..]).unwrap();
        assert_eq!(back.activities(), reg.activities());
        assert_eq!(back.roles(), reg.roles());
    }

    #[test]
    fn malformed_registry() {
        assert!(read_registry("[activities]\nA\n[roles]\n".as_bytes()).is_err());
        assert!(read_registry("[roles]\nA\n[end]\n⟂END\n".as_bytes()).is_err());
        assert!(
            read_registry("[activities]\nA\n[roles]\n[end]\n⟂END\nextra\n".as_bytes()).is_err()
        );
    }

    #[test]
    fn instances_layout_and_round_trip() {
        let log = table1();
        let reg = extract_registry(&log, &RoleSource::Resource).unwrap();
        let inst = generate_instances(&log, PredictionTask::NextRole, &reg, &RoleSource::Resource)
            .unwrap();
        let mut buf = Vec::new();
        write_instances(&inst, PredictionTask::NextRole, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "case_id,prefix_length,prefix_activities,prefix_roles,task"
        );
        assert_eq!(lines[2], "Case1,2,A|T,MF|SL,next_role");
        assert_eq!(lines.len(), 10);
        let queries = read_instances(&buf[..]).unwrap();
        assert_eq!(queries.len(), inst.len());
        for (q, i) in queries.iter().zip(&inst) {
            assert_eq!(q.context(), i.context(PredictionTask::NextRole));
            assert_eq!(q.prefix_length(), i.prefix_length());
        }
    }

    #[test]
    fn inconsistent_instance_row() {
        let text =
            "case_id,prefix_length,prefix_activities,prefix_roles,task\nc,2,A,R,next_activity\n";
        assert!(matches!(
            read_instances(text.as_bytes()),
            Err(Error::Csv { row: 2, .. })
        ));
        assert!(read_instances("a,b\n".as_bytes()).is_err());
    }

    #[test]
    fn predictions_round_trip() {
        let labels = vec!["A".to_string(), END_MARKER.to_string()];
        let mut buf = Vec::new();
        write_predictions(&labels, &mut buf).unwrap();
        assert_eq!(read_predictions(&buf[..]).unwrap(), labels);
        assert_eq!(
            read_predictions("A\r\nB".as_bytes()).unwrap(),
            vec!["A", "B"]
        );
    }
}
