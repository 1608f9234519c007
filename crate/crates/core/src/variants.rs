//! Trace variants: equivalence of traces under a chosen set of attributes,
//! and the empirical distribution of the resulting classes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::event_model::{AttributeKey, EventLog, Trace};
use crate::rational::{format_decimal, from_usize, ratio, Rational};

/// Attributes compared position by position, in declaration order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PerspectiveSet {
    keys: Vec<AttributeKey>,
}

impl PerspectiveSet {
    pub fn new(keys: impl IntoIterator<Item = AttributeKey>) -> Result<Self> {
        let mut out: Vec<AttributeKey> = Vec::new();
        for key in keys {
            if !out.contains(&key) {
                out.push(key);
            }
        }
        if out.is_empty() {
            return Err(Error::Config("perspective set must not be empty".into()));
        }
        Ok(PerspectiveSet { keys: out })
    }

    pub fn activity() -> Self {
        PerspectiveSet {
            keys: vec![AttributeKey::Activity],
        }
    }

    /// Comma-separated key names, e.g. `activity,resource`.
    pub fn parse(text: &str) -> Result<Self> {
        let keys = text
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<AttributeKey>>>()?;
        PerspectiveSet::new(keys)
    }

    pub fn keys(&self) -> &[AttributeKey] {
        &self.keys
    }

    pub fn check_declared(&self, log: &EventLog) -> Result<()> {
        match self.keys.iter().find(|k| !log.declares(k)) {
            Some(k) => Err(Error::Key(k.to_string())),
            None => Ok(()),
        }
    }
}

impl fmt::Display for PerspectiveSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.keys.iter().map(ToString::to_string).collect();
        f.write_str(&names.join(","))
    }
}

/// Canonical representative of a variant class.
///
/// Row `i` holds the perspective values of the `i`-th event; `None` is the
/// absent marker and never equals `Some("")`. Trailing rows that are
/// entirely absent are dropped, which is exactly the padding rule: a trace
/// compares equal to a longer one whose extra events carry no values.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VariantKey {
    rows: Vec<Vec<Option<String>>>,
}

impl VariantKey {
    pub fn from_rows(mut rows: Vec<Vec<Option<String>>>) -> Self {
        while rows.last().is_some_and(|r| r.iter().all(Option::is_none)) {
            rows.pop();
        }
        VariantKey { rows }
    }

    /// Key for a single-attribute perspective from plain labels.
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Self {
        VariantKey::from_rows(
            labels
                .iter()
                .map(|l| vec![Some(l.as_ref().to_string())])
                .collect(),
        )
    }

    pub fn rows(&self) -> &[Vec<Option<String>>] {
        &self.rows
    }
}

impl fmt::Display for VariantKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|v| v.as_deref().unwrap_or("ε"))
                    .collect::<Vec<_>>()
                    .join("|")
            })
            .collect();
        write!(f, "⟨{}⟩", rows.join(","))
    }
}

pub fn variant_key(trace: &Trace, perspective: &PerspectiveSet) -> VariantKey {
    VariantKey::from_rows(
        trace
            .events()
            .iter()
            .map(|e| {
                perspective
                    .keys
                    .iter()
                    .map(|k| e.attribute(k).to_text())
                    .collect()
            })
            .collect(),
    )
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariantPartition {
    perspective: PerspectiveSet,
    classes: BTreeMap<VariantKey, BTreeSet<String>>,
    log_size: usize,
}

impl VariantPartition {
    pub fn perspective(&self) -> &PerspectiveSet {
        &self.perspective
    }

    pub fn classes(&self) -> &BTreeMap<VariantKey, BTreeSet<String>> {
        &self.classes
    }

    pub fn log_size(&self) -> usize {
        self.log_size
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// The class containing `case_id`.
    pub fn class_of(&self, case_id: &str) -> Option<&VariantKey> {
        self.classes
            .iter()
            .find(|(_, ids)| ids.contains(case_id))
            .map(|(k, _)| k)
    }

    /// Classes by descending size, ties by least case id.
    pub fn ranked(&self) -> Vec<(&VariantKey, &BTreeSet<String>)> {
        let mut ranked: Vec<_> = self.classes.iter().collect();
        ranked.sort_by(|a, b| {
            b.1.len()
                .cmp(&a.1.len())
                .then_with(|| a.1.first().cmp(&b.1.first()))
        });
        ranked
    }
}

pub fn partition(log: &EventLog, perspective: &PerspectiveSet) -> VariantPartition {
    let mut classes: BTreeMap<VariantKey, BTreeSet<String>> = BTreeMap::new();
    for trace in log.traces() {
        classes
            .entry(variant_key(trace, perspective))
            .or_default()
            .insert(trace.case_id().to_string());
    }
    VariantPartition {
        perspective: perspective.clone(),
        classes,
        log_size: log.len(),
    }
}

/// Exact class probabilities, summing to one.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct VariantDistribution {
    probabilities: BTreeMap<VariantKey, Rational>,
}

impl VariantDistribution {
    pub fn probabilities(&self) -> &BTreeMap<VariantKey, Rational> {
        &self.probabilities
    }

    /// Probability of `key`; zero when absent.
    pub fn probability(&self, key: &VariantKey) -> Rational {
        self.probabilities
            .get(key)
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    pub fn total(&self) -> Rational {
        self.probabilities
            .values()
            .fold(Rational::zero(), |acc, p| acc + p)
    }
}

pub fn distribution(partition: &VariantPartition) -> Result<VariantDistribution> {
    if partition.log_size == 0 {
        return Err(Error::Domain("variant distribution of an empty log".into()));
    }
    let n = from_usize(partition.log_size);
    Ok(VariantDistribution {
        probabilities: partition
            .classes
            .iter()
            .map(|(k, ids)| (k.clone(), from_usize(ids.len()) / &n))
            .collect(),
    })
}

/// Decimal places of probabilities and distances in reports.
pub const PROBABILITY_PLACES: usize = 3;

/// Total variation distance: half the L1 distance over the union of keys.
pub fn distribution_distance(a: &VariantDistribution, b: &VariantDistribution) -> Rational {
    let keys: BTreeSet<&VariantKey> = a
        .probabilities
        .keys()
        .chain(b.probabilities.keys())
        .collect();
    let sum = keys
        .into_iter()
        .map(|k| (a.probability(k) - b.probability(k)).abs())
        .fold(Rational::zero(), |acc, d| acc + d);
    sum * ratio(1, 2)
}

/// CSV with columns `rank,representative,size,probability,variant`.
pub fn write_variants_csv(partition: &VariantPartition, sink: impl Write) -> Result<()> {
    let dist = distribution(partition)?;
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    let io = |e: csv::Error| Error::Io(e.into());
    writer
        .write_record(["rank", "representative", "size", "probability", "variant"])
        .map_err(io)?;
    for (rank, (key, ids)) in partition.ranked().into_iter().enumerate() {
        writer
            .write_record([
                (rank + 1).to_string(),
                ids.first().cloned().unwrap_or_default(),
                ids.len().to_string(),
                format_decimal(&dist.probability(key), PROBABILITY_PLACES),
                key.to_string(),
            ])
            .map_err(io)?;
    }
    writer.flush()?;
    Ok(())
}
