//! Shrinking a training log by a reduction factor.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::event_model::EventLog;
use crate::rational::{render_exact, round_share, Rational};
use crate::rng::seeded_shuffle;
use crate::variants::{
    distribution, distribution_distance, partition, variant_key, PerspectiveSet, VariantKey,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ReductionMethod {
    Random,
    /// Drop the earliest-starting traces first.
    TemporalOldest,
    /// Drop the latest-starting traces first.
    TemporalNewest,
    /// Drop only traces of the target variants, earliest first.
    VariantTargeted,
}

impl ReductionMethod {
    pub fn name(&self) -> &'static str {
        match self {
            ReductionMethod::Random => "random",
            ReductionMethod::TemporalOldest => "temporal_oldest",
            ReductionMethod::TemporalNewest => "temporal_newest",
            ReductionMethod::VariantTargeted => "variant_targeted",
        }
    }
}

impl FromStr for ReductionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(ReductionMethod::Random),
            "temporal" | "temporal_oldest" => Ok(ReductionMethod::TemporalOldest),
            "temporal_newest" => Ok(ReductionMethod::TemporalNewest),
            "variant_targeted" => Ok(ReductionMethod::VariantTargeted),
            other => Err(Error::Input(format!(
                "unknown reduction method {other:?} (expected random, temporal_oldest, temporal_newest or variant_targeted)"
            ))),
        }
    }
}

impl fmt::Display for ReductionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariantTargets {
    pub perspective: PerspectiveSet,
    pub keys: BTreeSet<VariantKey>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReductionSpec {
    /// Share of traces to remove, in `[0, 1)`.
    pub factor: Rational,
    pub method: ReductionMethod,
    pub seed: u64,
    pub targets: Option<VariantTargets>,
}

impl ReductionSpec {
    pub fn new(factor: Rational, method: ReductionMethod, seed: u64) -> Result<Self> {
        if factor < Rational::zero() || factor >= Rational::one() {
            return Err(Error::Input(format!(
                "reduction factor must be in [0, 1), got {}",
                render_exact(&factor)
            )));
        }
        Ok(ReductionSpec {
            factor,
            method,
            seed,
            targets: None,
        })
    }

    pub fn with_targets(mut self, targets: VariantTargets) -> Self {
        self.targets = Some(targets);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RemovalManifest {
    pub method: ReductionMethod,
    pub factor: Rational,
    pub seed: u64,
    /// Traces the factor asked for.
    pub requested: usize,
    pub removed: Vec<String>,
    /// Requested removals that found no eligible trace (variant-targeted only).
    pub shortfall: usize,
}

impl RemovalManifest {
    pub fn write(&self, mut sink: impl Write) -> Result<()> {
        writeln!(
            sink,
            "# reduction method={} factor={} seed={} requested={} removed={} shortfall={}",
            self.method,
            render_exact(&self.factor),
            self.seed,
            self.requested,
            self.removed.len(),
            self.shortfall
        )?;
        for id in &self.removed {
            writeln!(sink, "{id}")?;
        }
        Ok(())
    }
}

/// Traces to remove: `round(factor * n)` half-even, at most `n - 1`.
pub fn removal_count(factor: &Rational, n: usize) -> usize {
    round_share(factor, n).min(n.saturating_sub(1))
}

pub fn reduce(train: &EventLog, spec: &ReductionSpec) -> Result<(EventLog, RemovalManifest)> {
    let n = train.len();
    if n == 0 {
        return Err(Error::Domain("cannot reduce an empty training log".into()));
    }
    let requested = removal_count(&spec.factor, n);
    let mut shortfall = 0;
    let removed: Vec<String> = match spec.method {
        ReductionMethod::TemporalOldest => train
            .chronological_case_ids()
            .into_iter()
            .take(requested)
            .map(str::to_string)
            .collect(),
        ReductionMethod::TemporalNewest => train
            .chronological_case_ids()
            .into_iter()
            .rev()
            .take(requested)
            .map(str::to_string)
            .collect(),
        ReductionMethod::Random => {
            let mut ids: Vec<String> = train.case_ids().map(str::to_string).collect();
            seeded_shuffle(&mut ids, spec.seed);
            ids.truncate(requested);
            ids
        }
        ReductionMethod::VariantTargeted => {
            let targets = spec
                .targets
                .as_ref()
                .filter(|t| !t.keys.is_empty())
                .ok_or_else(|| {
                    Error::Config(
                        "variant_targeted reduction needs at least one target variant".into(),
                    )
                })?;
            let candidates: Vec<String> = train
                .chronological_case_ids()
                .into_iter()
                .filter(|id| {
                    let trace = train.get(id).expect("id from this log");
                    targets
                        .keys
                        .contains(&variant_key(trace, &targets.perspective))
                })
                .take(requested)
                .map(str::to_string)
                .collect();
            shortfall = requested - candidates.len();
            candidates
        }
    };
    let gone: HashSet<&str> = removed.iter().map(String::as_str).collect();
    let reduced = train.retain(|t| !gone.contains(t.case_id()));
    Ok((
        reduced,
        RemovalManifest {
            method: spec.method,
            factor: spec.factor.clone(),
            seed: spec.seed,
            requested,
            removed,
            shortfall,
        },
    ))
}

/// Total variation distance between the variant distributions before and after reduction.
pub fn reduction_bias(
    train: &EventLog,
    reduced: &EventLog,
    perspective: &PerspectiveSet,
) -> Result<Rational> {
    let before = distribution(&partition(train, perspective))?;
    let after = distribution(&partition(reduced, perspective))?;
    Ok(distribution_distance(&before, &after))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_model::fixtures::from_sequences;
    use crate::rational::ratio;
    use proptest::prelude::*;

    fn uniform(n: usize) -> EventLog {
        let seqs: Vec<&[&str]> = vec![&["A", "B"]; n];
        from_sequences(&seqs)
    }

    #[test]
    fn zero_factor_is_identity() {
        let log = uniform(10);
        for method in [
            ReductionMethod::Random,
            ReductionMethod::TemporalOldest,
            ReductionMethod::TemporalNewest,
        ] {
            let (out, manifest) =
                reduce(&log, &ReductionSpec::new(ratio(0, 1), method, 3).unwrap()).unwrap();
            assert_eq!(out, log);
            assert!(manifest.removed.is_empty());
        }
    }

    #[test]
    fn heavy_reduction_leaves_one() {
        let log = uniform(100);
        let (out, _) = reduce(
            &log,
            &ReductionSpec::new(ratio(99, 100), ReductionMethod::Random, 1).unwrap(),
        )
        .unwrap();
        assert_eq!(out.len(), 1);
        let tiny = uniform(3);
        let (out, _) = reduce(
            &tiny,
            &ReductionSpec::new(ratio(99, 100), ReductionMethod::TemporalOldest, 0).unwrap(),
        )
        .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.case_ids().collect::<Vec<_>>(), vec!["c0002"]);
    }

    #[test]
    fn temporal_directions() {
        let log = uniform(5);
        let spec = ReductionSpec::new(ratio(2, 5), ReductionMethod::TemporalOldest, 0).unwrap();
        assert_eq!(
            reduce(&log, &spec).unwrap().1.removed,
            vec!["c0000", "c0001"]
        );
        let spec = ReductionSpec::new(ratio(2, 5), ReductionMethod::TemporalNewest, 0).unwrap();
        assert_eq!(
            reduce(&log, &spec).unwrap().1.removed,
            vec!["c0004", "c0003"]
        );
    }

    #[test]
    fn factor_bounds() {
        assert!(ReductionSpec::new(ratio(1, 1), ReductionMethod::Random, 0).is_err());
        assert!(ReductionSpec::new(ratio(-1, 10), ReductionMethod::Random, 0).is_err());
        let spec = ReductionSpec::new(ratio(1, 2), ReductionMethod::Random, 0).unwrap();
        assert!(reduce(&EventLog::default(), &spec).is_err());
    }

    #[test]
    fn variant_targeted_with_shortfall() {
        let log = from_sequences(&[
            &["A", "X"],
            &["A", "B"],
            &["A", "X"],
            &["A", "B"],
            &["A", "B"],
            &["A", "B"],
        ]);
        let targets = VariantTargets {
            perspective: PerspectiveSet::activity(),
            keys: [VariantKey::from_labels(&["A", "X"])].into(),
        };
        let spec = ReductionSpec::new(ratio(1, 2), ReductionMethod::VariantTargeted, 0)
            .unwrap()
            .with_targets(targets.clone());
        let (out, manifest) = reduce(&log, &spec).unwrap();
        assert_eq!(manifest.requested, 3);
        assert_eq!(manifest.removed, vec!["c0000", "c0002"]);
        assert_eq!(manifest.shortfall, 1);
        assert_eq!(out.len(), 4);

        let spec = ReductionSpec::new(ratio(1, 6), ReductionMethod::VariantTargeted, 0)
            .unwrap()
            .with_targets(targets);
        assert_eq!(reduce(&log, &spec).unwrap().1.removed, vec!["c0000"]);

        let bare = ReductionSpec::new(ratio(1, 2), ReductionMethod::VariantTargeted, 0).unwrap();
        assert!(matches!(reduce(&log, &bare), Err(Error::Config(_))));
    }

    #[test]
    fn bias_examples() {
        let log = from_sequences(&[&["A"], &["A"], &["B"], &["C"]]);
        let p = PerspectiveSet::activity();
        assert_eq!(reduction_bias(&log, &log, &p).unwrap(), Rational::zero());
        // dropping the whole {C} class (probability 1/4) moves at least that much mass
        let without_c = log.select(["c0000", "c0001", "c0002"]);
        let bias = reduction_bias(&log, &without_c, &p).unwrap();
        assert!(bias >= ratio(1, 4));
        assert_eq!(bias, ratio(1, 4));
    }

    #[test]
    fn manifest_text() {
        let log = uniform(4);
        let spec = ReductionSpec::new(ratio(1, 2), ReductionMethod::TemporalOldest, 0).unwrap();
        let mut out = Vec::new();
        reduce(&log, &spec).unwrap().1.write(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "# reduction method=temporal_oldest factor=0.5 seed=0 requested=2 removed=2 shortfall=0\nc0000\nc0001\n"
        );
    }

    proptest! {
        #[test]
        fn sizes_and_kept_traces(n in 1usize..60, num in 0i64..100, seed in any::<u64>(), m in 0usize..3) {
            let log = uniform(n);
            let method = [ReductionMethod::Random, ReductionMethod::TemporalOldest, ReductionMethod::TemporalNewest][m];
            let factor = ratio(num, 100);
            let (out, manifest) = reduce(&log, &ReductionSpec::new(factor.clone(), method, seed).unwrap()).unwrap();
            prop_assert_eq!(out.len(), n - removal_count(&factor, n));
            prop_assert_eq!(manifest.removed.len() + out.len(), n);
            for trace in out.traces() {
                prop_assert_eq!(Some(trace), log.get(trace.case_id()));
            }
            if method == ReductionMethod::TemporalOldest {
                for gone in &manifest.removed {
                    let start = log.get(gone).unwrap().start();
                    prop_assert!(out.traces().all(|t| start <= t.start()));
                }
            }
        }
    }
}
