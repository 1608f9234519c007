//! XES reader covering the attribute subset the evaluation pipeline needs.
//!
//! `concept:name` gives the case id (trace) or activity (event),
//! `time:timestamp` the timestamp and `org:resource` the resource. Every
//! other literal event attribute, `org:role` included, becomes a payload
//! value in its lexical form. Extensions, globals, classifiers, log-level
//! attributes and nested list/container values are skipped.

use std::io::Read;

use quick_xml::events::{BytesStart, Event as XmlEvent};
use quick_xml::Reader;

use super::{LogBuilder, RawEvent};
use crate::error::{Error, Result};
use crate::event_model::{EventLog, Timestamp};

const LITERAL_TYPES: &[&str] = &["string", "date", "int", "float", "boolean", "id"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scope {
    Log,
    Trace,
    Event,
    Other,
}

#[derive(Default)]
struct OpenTrace {
    case_id: Option<String>,
    events: Vec<RawEvent>,
}

pub fn parse_xes(mut source: impl Read) -> Result<EventLog> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    XesParser::new(&bytes).run()
}

fn line_at(bytes: &[u8], pos: u64) -> usize {
    let end = (pos as usize).min(bytes.len());
    bytes[..end].iter().filter(|&&b| b == b'\n').count() + 1
}

struct XesParser<'a> {
    bytes: &'a [u8],
    builder: LogBuilder,
    stack: Vec<Scope>,
    trace: Option<OpenTrace>,
    event: Option<RawEvent>,
    trace_count: usize,
    skipped: std::collections::BTreeSet<String>,
}

impl<'a> XesParser<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        XesParser {
            bytes,
            builder: LogBuilder::default(),
            stack: Vec::new(),
            trace: None,
            event: None,
            trace_count: 0,
            skipped: Default::default(),
        }
    }

    fn line_at(&self, pos: u64) -> usize {
        line_at(self.bytes, pos)
    }

    fn run(mut self) -> Result<EventLog> {
        let mut reader = Reader::from_reader(self.bytes);
        reader.config_mut().trim_text(true);
        let mut buf = Vec::new();
        let mut seen_log = false;
        loop {
            let pos = reader.buffer_position();
            let event = reader.read_event_into(&mut buf).map_err(|e| Error::Xes {
                line: self.line_at(reader.error_position()),
                message: e.to_string(),
            })?;
            match event {
                XmlEvent::Start(start) => {
                    let scope = self.open(&start, pos, &mut seen_log)?;
                    self.stack.push(scope);
                }
                XmlEvent::Empty(start) => {
                    let scope = self.open(&start, pos, &mut seen_log)?;
                    self.stack.push(scope);
                    self.close(pos)?;
                }
                XmlEvent::End(_) => self.close(pos)?,
                XmlEvent::Eof => break,
                _ => {}
            }
            buf.clear();
        }
        if !self.stack.is_empty() {
            return Err(Error::Xes {
                line: self.line_at(self.bytes.len() as u64),
                message: "unexpected end of document: unclosed elements".into(),
            });
        }
        if !seen_log {
            return Err(Error::Xes {
                line: 1,
                message: "no <log> element".into(),
            });
        }
        for name in &self.skipped {
            // header declarations carry no event data
            if matches!(name.as_str(), "extension" | "global" | "classifier") {
                log::debug!("XES: skipped header element {name}");
                continue;
            }
            log::warn!("XES: ignored unsupported element or attribute {name}");
        }
        self.builder.build()
    }

    fn open(&mut self, start: &BytesStart<'_>, pos: u64, seen_log: &mut bool) -> Result<Scope> {
        let name = String::from_utf8_lossy(start.local_name().as_ref()).into_owned();
        let parent = self.stack.last().copied();
        let scope = match (parent, name.as_str()) {
            (None, "log") => {
                *seen_log = true;
                Scope::Log
            }
            (None, other) => {
                return Err(Error::Xes {
                    line: self.line_at(pos),
                    message: format!("expected <log>, found <{other}>"),
                })
            }
            (Some(Scope::Log), "trace") => {
                self.trace = Some(OpenTrace::default());
                Scope::Trace
            }
            (Some(Scope::Trace), "event") => {
                self.event = Some(RawEvent::default());
                Scope::Event
            }
            (Some(Scope::Trace) | Some(Scope::Event), kind) if LITERAL_TYPES.contains(&kind) => {
                let (key, value) = self.key_value(start, pos)?;
                self.assign(parent.unwrap(), kind, key, value, pos)?;
                Scope::Other
            }
            (Some(Scope::Log), kind @ ("extension" | "global" | "classifier")) => {
                self.skipped.insert(kind.to_string());
                Scope::Other
            }
            (Some(Scope::Trace) | Some(Scope::Event), kind @ ("list" | "container")) => {
                self.skipped.insert(kind.to_string());
                Scope::Other
            }
            _ => Scope::Other,
        };
        Ok(scope)
    }

    fn key_value(&self, start: &BytesStart<'_>, pos: u64) -> Result<(String, String)> {
        let mut key = None;
        let mut value = None;
        for attr in start.attributes() {
            let attr = attr.map_err(|e| Error::Xes {
                line: self.line_at(pos),
                message: e.to_string(),
            })?;
            let text = attr
                .unescape_value()
                .map_err(|e| Error::Xes {
                    line: self.line_at(pos),
                    message: e.to_string(),
                })?
                .into_owned();
            match attr.key.as_ref() {
                b"key" => key = Some(text),
                b"value" => value = Some(text),
                _ => {}
            }
        }
        match (key, value) {
            (Some(k), Some(v)) => Ok((k, v)),
            _ => Err(Error::Xes {
                line: self.line_at(pos),
                message: "attribute element needs both key and value".into(),
            }),
        }
    }

    fn assign(
        &mut self,
        owner: Scope,
        kind: &str,
        key: String,
        value: String,
        pos: u64,
    ) -> Result<()> {
        match owner {
            Scope::Trace => {
                let trace = self.trace.as_mut().expect("open trace");
                if key == "concept:name" {
                    trace.case_id = Some(value);
                }
            }
            Scope::Event => {
                let bytes = self.bytes;
                let event = self.event.as_mut().expect("open event");
                match key.as_str() {
                    "concept:name" => event.activity = Some(value),
                    "time:timestamp" if kind == "date" => {
                        let ts = Timestamp::parse(&value, None).map_err(|e| Error::Xes {
                            line: line_at(bytes, pos),
                            message: e.to_string(),
                        })?;
                        event.timestamp = Some(ts);
                    }
                    "org:resource" => event.resource = Some(value),
                    _ => {
                        event.payload.insert(key, value);
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn close(&mut self, pos: u64) -> Result<()> {
        let scope = self.stack.pop().ok_or_else(|| Error::Xes {
            line: self.line_at(pos),
            message: "unbalanced closing tag".into(),
        })?;
        match scope {
            Scope::Event => {
                let event = self.event.take().expect("open event");
                self.trace.as_mut().expect("open trace").events.push(event);
            }
            Scope::Trace => {
                let trace = self.trace.take().expect("open trace");
                self.trace_count += 1;
                match trace.case_id {
                    Some(case_id) if !self.builder.index.contains_key(&case_id) => {
                        if trace.events.is_empty() {
                            self.builder.quarantine(case_id.clone(), "empty_trace");
                        }
                        for event in trace.events {
                            self.builder.push(&case_id, event);
                        }
                    }
                    Some(case_id) => {
                        return Err(Error::Xes {
                            line: self.line_at(pos),
                            message: format!("duplicate trace concept:name {case_id:?}"),
                        })
                    }
                    None => {
                        let placeholder = format!("<trace #{}>", self.trace_count);
                        self.builder.quarantine(placeholder, "missing_case_id");
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}
