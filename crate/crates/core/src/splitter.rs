//! Train/test splitting. The test side is fixed once and reused for every
//! reduced training log derived from the same split.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::event_model::EventLog;
use crate::rational::{render_exact, round_share, Rational};
use crate::rng::seeded_shuffle;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitMethod {
    Random,
    Temporal,
}

impl FromStr for SplitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SplitMethod::Random),
            "temporal" => Ok(SplitMethod::Temporal),
            other => Err(Error::Input(format!(
                "unknown split method {other:?} (expected random or temporal)"
            ))),
        }
    }
}

impl fmt::Display for SplitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMethod::Random => "random",
            SplitMethod::Temporal => "temporal",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    /// Training share, strictly between 0 and 1.
    pub ratio: Rational,
    pub method: SplitMethod,
    /// Used by the random method only.
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(ratio: Rational, method: SplitMethod, seed: u64) -> Result<Self> {
        if ratio <= Rational::zero() || ratio >= Rational::one() {
            return Err(Error::Input(format!(
                "split ratio must be strictly between 0 and 1, got {}",
                render_exact(&ratio)
            )));
        }
        Ok(SplitSpec {
            ratio,
            method,
            seed,
        })
    }

    /// Short stable name, e.g. `temporal-0.7` or `random-0.7-s42`.
    pub fn label(&self) -> String {
        match self.method {
            SplitMethod::Temporal => format!("temporal-{}", render_exact(&self.ratio)),
            SplitMethod::Random => format!("random-{}-s{}", render_exact(&self.ratio), self.seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitManifest {
    pub spec: SplitSpec,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

impl SplitManifest {
    /// Text form: a header comment, then `[train]` and `[test]` sections with one case id per line.
    pub fn write(&self, mut sink: impl Write) -> Result<()> {
        writeln!(
            sink,
            "# split method={} ratio={} seed={}",
            self.spec.method,
            render_exact(&self.spec.ratio),
            self.spec.seed
        )?;
        writeln!(sink, "[train]")?;
        for id in &self.train {
            writeln!(sink, "{id}")?;
        }
        writeln!(sink, "[test]")?;
        for id in &self.test {
            writeln!(sink, "{id}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SplitResult {
    pub train: EventLog,
    pub test: EventLog,
    pub manifest: SplitManifest,
}

/// Number of training traces: `round(ratio * n)` half-even, clamped to `[1, n - 1]`.
pub fn train_count(ratio: &Rational, n: usize) -> usize {
    round_share(ratio, n).clamp(1, n.saturating_sub(1).max(1))
}

pub fn split(log: &EventLog, spec: &SplitSpec) -> Result<SplitResult> {
    let n = log.len();
    if n < 2 {
        return Err(Error::Domain(format!(
            "cannot split a log of {n} trace(s); both sides must be non-empty"
        )));
    }
    let ordered: Vec<String> = match spec.method {
        SplitMethod::Temporal => log
            .chronological_case_ids()
            .into_iter()
            .map(str::to_string)
            .collect(),
        SplitMethod::Random => {
            let mut ids: Vec<String> = log.case_ids().map(str::to_string).collect();
            seeded_shuffle(&mut ids, spec.seed);
            ids
        }
    };
    let k = train_count(&spec.ratio, n);
    let (train_ids, test_ids) = ordered.split_at(k);
    Ok(SplitResult {
        train: log.select(train_ids.iter().map(String::as_str)),
        test: log.select(test_ids.iter().map(String::as_str)),
        manifest: SplitManifest {
            spec: spec.clone(),
            train: train_ids.to_vec(),
            test: test_ids.to_vec(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_model::fixtures::{from_sequences, table1};
    use crate::rational::ratio;
    use proptest::prelude::*;

    #[test]
    fn temporal_split_of_ten() {
        let log = from_sequences(&[&["A"][..]; 10]);
        let res = split(
            &log,
            &SplitSpec::new(ratio(7, 10), SplitMethod::Temporal, 0).unwrap(),
        )
        .unwrap();
        assert_eq!(res.train.len(), 7);
        assert_eq!(res.test.len(), 3);
        assert_eq!(res.manifest.test, vec!["c0007", "c0008", "c0009"]);
    }

    #[test]
    fn sample_log_temporal_split() {
        let res = split(
            &table1(),
            &SplitSpec::new(ratio(2, 3), SplitMethod::Temporal, 0).unwrap(),
        )
        .unwrap();
        assert_eq!(res.manifest.train, vec!["Case2", "Case3"]);
        assert_eq!(res.manifest.test, vec!["Case1"]);
    }

    #[test]
    fn random_split_is_reproducible() {
        let log = from_sequences(&[&["A"][..]; 20]);
        let spec = SplitSpec::new(ratio(7, 10), SplitMethod::Random, 99).unwrap();
        let a = split(&log, &spec).unwrap();
        let b = split(&log, &spec).unwrap();
        assert_eq!(a.manifest, b.manifest);
        let other = split(&log, &SplitSpec { seed: 100, ..spec }).unwrap();
        assert_ne!(a.manifest.train, other.manifest.train);
    }

    #[test]
    fn pinned_random_permutation() {
        // sorted ids [a,b,c,d,e] shuffled with SplitMix64(seed 1), j = next % (i+1)
        let log = from_sequences(&[&["A"][..]; 5]);
        let spec = SplitSpec::new(ratio(3, 5), SplitMethod::Random, 1).unwrap();
        let res = split(&log, &spec).unwrap();
        let mut expected: Vec<String> = (0..5).map(|i| format!("c{i:04}")).collect();
        let mut rng = crate::rng::SplitMix64::new(1);
        for i in (1..5).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            expected.swap(i, j);
        }
        assert_eq!(res.manifest.train, expected[..3]);
        assert_eq!(res.manifest.test, expected[3..]);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(SplitSpec::new(ratio(3, 2), SplitMethod::Temporal, 0).is_err());
        assert!(SplitSpec::new(ratio(0, 1), SplitMethod::Temporal, 0).is_err());
        assert!(SplitSpec::new(ratio(1, 1), SplitMethod::Temporal, 0).is_err());
        let spec = SplitSpec::new(ratio(1, 2), SplitMethod::Temporal, 0).unwrap();
        assert!(split(&from_sequences(&[&["A"]]), &spec).is_err());
    }

    #[test]
    fn clamp_keeps_both_sides() {
        assert_eq!(train_count(&ratio(1, 100), 2), 1);
        assert_eq!(train_count(&ratio(99, 100), 2), 1);
        assert_eq!(train_count(&ratio(99, 100), 10), 9);
    }

    #[test]
    fn manifest_text() {
        let res = split(
            &table1(),
            &SplitSpec::new(ratio(2, 3), SplitMethod::Temporal, 0).unwrap(),
        )
        .unwrap();
        let mut out = Vec::new();
        res.manifest.write(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "# split method=temporal ratio=2/3 seed=0\n[train]\nCase2\nCase3\n[test]\nCase1\n"
        );
    }

    proptest! {
        #[test]
        fn split_partitions_log(n in 2usize..40, num in 1i64..99, seed in any::<u64>(), temporal in any::<bool>()) {
            let seqs: Vec<&[&str]> = vec![&["A"]; n];
            let log = from_sequences(&seqs);
            let method = if temporal { SplitMethod::Temporal } else { SplitMethod::Random };
            let res = split(&log, &SplitSpec::new(ratio(num, 100), method, seed).unwrap()).unwrap();
            prop_assert_eq!(res.train.len() + res.test.len(), n);
            prop_assert!(res.train.case_ids().all(|c| res.test.get(c).is_none()));
            prop_assert!(!res.train.is_empty() && !res.test.is_empty());
            if temporal {
                let max_train = res.train.traces().map(|t| t.start().clone()).max().unwrap();
                let min_test = res.test.traces().map(|t| t.start().clone()).min().unwrap();
                prop_assert!(max_train <= min_test);
            }
        }
    }
}
