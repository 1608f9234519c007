use std::collections::{BTreeMap, HashMap};

use super::PredictionTask;
use crate::error::{Error, Result};
use crate::event_model::{EventLog, LabelRegistry, RoleSource, END_MARKER};

pub const DEFAULT_ORDER: usize = 3;

type Context = Vec<String>;

/// Back-off Markov predictor over label windows of length `0..=order`.
///
/// `tables[j]` maps each window of the last `j` labels to next-label counts;
/// `tables[0]` has the single empty window and holds global frequencies.
#[derive(Clone, Debug)]
pub struct BaselineModel {
    task: PredictionTask,
    order: usize,
    tables: Vec<HashMap<Context, BTreeMap<String, u64>>>,
    best: Vec<HashMap<Context, String>>,
    fallback: String,
}

impl BaselineModel {
    pub fn task(&self) -> PredictionTask {
        self.task
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Next-label counts observed after `window` (its length selects the table).
    pub fn counts(&self, window: &[&str]) -> Option<&BTreeMap<String, u64>> {
        let key: Context = window.iter().map(|s| s.to_string()).collect();
        self.tables.get(window.len())?.get(&key)
    }

    /// Label for a prefix: the most frequent successor of the longest known
    /// suffix window, ties broken lexicographically.
    pub fn predict(&self, prefix: &[&str]) -> &str {
        let longest = self.order.min(prefix.len());
        for j in (0..=longest).rev() {
            let key: Context = prefix[prefix.len() - j..]
                .iter()
                .map(|s| s.to_string())
                .collect();
            if let Some(label) = self.best[j].get(&key) {
                return label;
            }
        }
        &self.fallback
    }
}

fn argmax(counts: &BTreeMap<String, u64>) -> Option<&String> {
    // BTreeMap iterates ascending, so the first maximum is the least label
    let mut best: Option<(&String, u64)> = None;
    for (label, &n) in counts {
        if n > 0 && best.is_none_or(|(_, m)| n > m) {
            best = Some((label, n));
        }
    }
    best.map(|(l, _)| l)
}

pub fn train_baseline(
    train: &EventLog,
    task: PredictionTask,
    order: usize,
    registry: &LabelRegistry,
    roles: &RoleSource,
) -> Result<BaselineModel> {
    if order == 0 {
        return Err(Error::Config("baseline order must be at least 1".into()));
    }
    if train.is_empty() {
        return Err(Error::Domain("cannot train on an empty log".into()));
    }
    let mut tables: Vec<HashMap<Context, BTreeMap<String, u64>>> = vec![HashMap::new(); order + 1];
    for trace in train.traces() {
        let labels: Vec<&str> = trace
            .events()
            .iter()
            .map(|e| match task {
                PredictionTask::NextActivity => Some(e.activity()),
                PredictionTask::NextRole => roles.role_of(e),
            })
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| {
                Error::Input(format!(
                    "case {:?} has events without a role",
                    trace.case_id()
                ))
            })?;
        for i in 0..labels.len() {
            let target = labels.get(i + 1).copied().unwrap_or(END_MARKER);
            for (j, table) in tables.iter_mut().enumerate().take(order.min(i + 1) + 1) {
                let window: Context = labels[i + 1 - j..=i]
                    .iter()
                    .map(|s| s.to_string())
                    .collect();
                *table
                    .entry(window)
                    .or_default()
                    .entry(target.to_string())
                    .or_default() += 1;
            }
        }
    }
    let best = tables
        .iter()
        .map(|table| {
            table
                .iter()
                .filter_map(|(ctx, counts)| argmax(counts).map(|l| (ctx.clone(), l.clone())))
                .collect()
        })
        .collect();
    let fallback = task
        .labels(registry)
        .into_iter()
        .min()
        .unwrap_or_else(|| END_MARKER.to_string());
    Ok(BaselineModel {
        task,
        order,
        tables,
        best,
        fallback,
    })
}
