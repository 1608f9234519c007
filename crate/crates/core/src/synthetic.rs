//! Hand-specified logs for tests, demos and property checks.
//!
//! Trace `i` is named `c{i:04}` and starts `i` days after the epoch; its
//! events follow one minute apart.

use std::collections::BTreeSet;

use crate::event_model::{Event, EventId, EventLog, Timestamp, Trace, MILLIS_PER_DAY};

/// A log whose traces carry only activities.
pub fn from_sequences<S: AsRef<str>>(seqs: &[Vec<S>]) -> EventLog {
    let steps: Vec<Vec<(&str, Option<&str>)>> = seqs
        .iter()
        .map(|s| s.iter().map(|a| (a.as_ref(), None)).collect())
        .collect();
    from_steps(&steps)
}

/// A log from `(activity, resource)` steps.
pub fn from_steps(seqs: &[Vec<(&str, Option<&str>)>]) -> EventLog {
    let mut id = 0u64;
    let traces: Vec<Trace> = seqs
        .iter()
        .enumerate()
        .map(|(i, seq)| {
            let case = format!("c{i:04}");
            let events = seq
                .iter()
                .enumerate()
                .map(|(j, (act, res))| {
                    id += 1;
                    let ms = i as i64 * MILLIS_PER_DAY + j as i64 * 60_000;
                    let e = Event::new(EventId(id), case.clone(), *act, Timestamp::from_millis(ms));
                    match res {
                        Some(r) => e.with_resource(*r),
                        None => e,
                    }
                })
                .collect();
            Trace::new(case, events)
        })
        .collect();
    EventLog::from_traces(traces, BTreeSet::new()).expect("synthetic traces are valid")
}

/// `n` copies of one activity sequence.
pub fn repeated(seq: &[&str], n: usize) -> EventLog {
    from_sequences(&vec![seq.to_vec(); n])
}
