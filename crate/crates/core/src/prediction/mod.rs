//! Next-label prediction: instance construction, the built-in back-off
//! baseline, and the file protocol for external predictors.

mod baseline;
mod external;
pub mod protocol;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::event_model::{Event, EventLog, LabelRegistry, RoleSource, END_MARKER};

pub use baseline::{train_baseline, BaselineModel, DEFAULT_ORDER};
pub use external::{
    run_external, ExternalCommand, PredictorHandle, PredictorKind, DEFAULT_TIMEOUT,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PredictionTask {
    NextActivity,
    NextRole,
}

impl PredictionTask {
    pub fn name(&self) -> &'static str {
        match self {
            PredictionTask::NextActivity => "next_activity",
            PredictionTask::NextRole => "next_role",
        }
    }

    /// Target space: registered labels of the task's kind plus the end marker.
    pub fn labels(&self, registry: &LabelRegistry) -> Vec<String> {
        match self {
            PredictionTask::NextActivity => registry.activity_labels(),
            PredictionTask::NextRole => registry.role_labels(),
        }
    }

    pub fn is_registered(&self, registry: &LabelRegistry, label: &str) -> bool {
        match self {
            PredictionTask::NextActivity => registry.has_activity(label),
            PredictionTask::NextRole => registry.has_role(label),
        }
    }
}

impl FromStr for PredictionTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "next_activity" => Ok(PredictionTask::NextActivity),
            "next_role" => Ok(PredictionTask::NextRole),
            other => Err(Error::Input(format!(
                "unknown task {other:?} (expected next_activity or next_role)"
            ))),
        }
    }
}

impl fmt::Display for PredictionTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrefixStep {
    pub activity: String,
    pub role: Option<String>,
}

impl PrefixStep {
    pub fn label(&self, task: PredictionTask) -> &str {
        match task {
            PredictionTask::NextActivity => &self.activity,
            PredictionTask::NextRole => self.role.as_deref().unwrap_or(""),
        }
    }
}

/// One prefix of a trace and the label that follows it.
///
/// All instances of a trace share its step list; `prefix_length` selects the prefix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredictionInstance {
    pub case_id: Arc<str>,
    steps: Arc<[PrefixStep]>,
    prefix_length: usize,
    pub target: String,
}

impl PredictionInstance {
    pub fn new(
        case_id: impl Into<Arc<str>>,
        prefix: Vec<PrefixStep>,
        target: impl Into<String>,
    ) -> Self {
        let prefix_length = prefix.len();
        PredictionInstance {
            case_id: case_id.into(),
            steps: prefix.into(),
            prefix_length,
            target: target.into(),
        }
    }

    pub fn prefix(&self) -> &[PrefixStep] {
        &self.steps[..self.prefix_length]
    }

    pub fn prefix_length(&self) -> usize {
        self.prefix_length
    }

    /// Prefix labels of the task's kind.
    pub fn context(&self, task: PredictionTask) -> Vec<&str> {
        self.prefix().iter().map(|s| s.label(task)).collect()
    }
}

fn event_label<'e>(
    event: &'e Event,
    task: PredictionTask,
    roles: &'e RoleSource,
) -> Result<&'e str> {
    match task {
        PredictionTask::NextActivity => Ok(event.activity()),
        PredictionTask::NextRole => roles.role_of(event).ok_or_else(|| {
            Error::Input(format!(
                "event {} of case {:?} has no role (resource missing or unmapped)",
                event.id(),
                event.case_id()
            ))
        }),
    }
}

/// One instance per prefix length `1..=|trace|`, the last one targeting the
/// end marker, ordered by (case id, prefix length).
pub fn generate_instances(
    log: &EventLog,
    task: PredictionTask,
    registry: &LabelRegistry,
    roles: &RoleSource,
) -> Result<Vec<PredictionInstance>> {
    let mut out = Vec::with_capacity(log.event_count());
    for trace in log.traces() {
        let case_id: Arc<str> = Arc::from(trace.case_id());
        let mut steps = Vec::with_capacity(trace.len());
        let mut targets = Vec::with_capacity(trace.len());
        for event in trace.events() {
            if !registry.has_activity(event.activity()) {
                return Err(Error::UnknownLabel {
                    label: event.activity().to_string(),
                    context: format!("activity in case {}", trace.case_id()),
                });
            }
            let label = event_label(event, task, roles)?;
            if !task.is_registered(registry, label) {
                return Err(Error::UnknownLabel {
                    label: label.to_string(),
                    context: format!("{task} label in case {}", trace.case_id()),
                });
            }
            targets.push(label.to_string());
            steps.push(PrefixStep {
                activity: event.activity().to_string(),
                role: roles.role_of(event).map(str::to_string),
            });
        }
        let steps: Arc<[PrefixStep]> = steps.into();
        targets.remove(0);
        targets.push(END_MARKER.to_string());
        for (i, target) in targets.into_iter().enumerate() {
            out.push(PredictionInstance {
                case_id: Arc::clone(&case_id),
                steps: Arc::clone(&steps),
                prefix_length: i + 1,
                target,
            });
        }
    }
    Ok(out)
}
