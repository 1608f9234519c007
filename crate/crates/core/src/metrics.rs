//! Confusion matrices and the classification metrics derived from them.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::rational::{format_decimal, from_usize, Rational};

/// Decimal places used when metrics are written to CSV.
pub const METRIC_PLACES: usize = 6;

/// Rows are true labels, columns are predictions, both in `labels` order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn count(&self, truth: usize, predicted: usize) -> usize {
        self.counts[truth][predicted]
    }

    /// Count for a label pair; zero when either label is unknown.
    pub fn count_of(&self, truth: &str, predicted: &str) -> usize {
        let pos = |l: &str| self.labels.iter().position(|x| x == l);
        match (pos(truth), pos(predicted)) {
            (Some(t), Some(p)) => self.counts[t][p],
            _ => 0,
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }
}

pub fn confusion<T: AsRef<str>, P: AsRef<str>>(
    targets: &[T],
    predictions: &[P],
    labels: &[String],
) -> Result<ConfusionMatrix> {
    if targets.len() != predictions.len() {
        return Err(Error::Input(format!(
            "{} targets but {} predictions",
            targets.len(),
            predictions.len()
        )));
    }
    let index: HashMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    if index.len() != labels.len() {
        return Err(Error::Input("confusion labels must be distinct".into()));
    }
    let lookup = |l: &str, what: &str| {
        index
            .get(l)
            .copied()
            .ok_or_else(|| Error::Input(format!("{what} label {l:?} is not in the label set")))
    };
    let mut counts = vec![vec![0usize; labels.len()]; labels.len()];
    for (t, p) in targets.iter().zip(predictions) {
        counts[lookup(t.as_ref(), "target")?][lookup(p.as_ref(), "predicted")?] += 1;
    }
    Ok(ConfusionMatrix {
        labels: labels.to_vec(),
        counts,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassMetrics {
    pub precision: Rational,
    /// Zero for classes without support.
    pub recall: Rational,
    pub f1: Rational,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MacroMetrics {
    pub precision: Rational,
    pub recall: Rational,
    pub f1: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetricsReport {
    pub total: usize,
    pub accuracy: Rational,
    pub per_class: BTreeMap<String, ClassMetrics>,
    /// Unweighted means over classes with support.
    pub macro_avg: MacroMetrics,
}

fn share(num: usize, den: usize) -> Rational {
    if den == 0 {
        Rational::zero()
    } else {
        from_usize(num) / from_usize(den)
    }
}

pub fn report(matrix: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = matrix.total();
    if total == 0 {
        return Err(Error::Domain("no scored instances".into()));
    }
    let n = matrix.labels.len();
    let mut per_class = BTreeMap::new();
    let (mut sum_p, mut sum_r, mut sum_f) = (Rational::zero(), Rational::zero(), Rational::zero());
    let mut supported = 0usize;
    for (c, label) in matrix.labels.iter().enumerate() {
        let tp = matrix.counts[c][c];
        let support: usize = matrix.counts[c].iter().sum();
        let predicted: usize = (0..n).map(|r| matrix.counts[r][c]).sum();
        let precision = share(tp, predicted);
        let recall = share(tp, support);
        let denom = &precision + &recall;
        let f1 = if denom.is_zero() {
            Rational::zero()
        } else {
            Rational::from_integer(2.into()) * &precision * &recall / denom
        };
        if support > 0 {
            supported += 1;
            sum_p += &precision;
            sum_r += &recall;
            sum_f += &f1;
        }
        per_class.insert(
            label.clone(),
            ClassMetrics {
                precision,
                recall,
                f1,
                support,
            },
        );
    }
    let k = from_usize(supported);
    Ok(MetricsReport {
        total,
        accuracy: share(matrix.correct(), total),
        per_class,
        macro_avg: MacroMetrics {
            precision: sum_p / &k,
            recall: sum_r / &k,
            f1: sum_f / k,
        },
    })
}

impl MetricsReport {
    /// `label,support,precision,recall,f1`, one row per class in label order.
    pub fn write_per_class(&self, mut sink: impl Write) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut sink);
        let io = |e: csv::Error| Error::Internal(format!("per-class CSV: {e}"));
        w.write_record(["label", "support", "precision", "recall", "f1"])
            .map_err(io)?;
        for (label, m) in &self.per_class {
            w.write_record([
                label.as_str(),
                &m.support.to_string(),
                &format_decimal(&m.precision, METRIC_PLACES),
                &format_decimal(&m.recall, METRIC_PLACES),
                &format_decimal(&m.f1, METRIC_PLACES),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use proptest::prelude::*;

    fn labels(ls: &[&str]) -> Vec<String> {
        ls.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn hand_matrix() {
        let m = confusion(&["A", "A", "B"], &["A", "B", "B"], &labels(&["A", "B"])).unwrap();
        assert_eq!(
            (m.count(0, 0), m.count(0, 1), m.count(1, 0), m.count(1, 1)),
            (1, 1, 0, 1)
        );
        let r = report(&m).unwrap();
        assert_eq!(r.accuracy, ratio(2, 3));
        let a = &r.per_class["A"];
        assert_eq!(
            (a.recall.clone(), a.precision.clone(), a.f1.clone()),
            (ratio(1, 2), ratio(1, 1), ratio(2, 3))
        );
        assert_eq!(r.per_class["B"].precision, ratio(1, 2));
    }

    #[test]
    fn trivial_cases() {
        let ls = labels(&["A", "B", "C"]);
        let m = confusion(&["A", "B"], &["A", "B"], &ls).unwrap();
        assert_eq!(m.total(), 2);
        let r = report(&confusion(&["A", "B", "C"], &["A", "B", "C"], &ls).unwrap()).unwrap();
        assert_eq!(
            (r.accuracy.clone(), r.macro_avg.f1.clone()),
            (ratio(1, 1), ratio(1, 1))
        );
        let r = report(&confusion(&["A"; 4], &["A"; 4], &ls).unwrap()).unwrap();
        assert_eq!(
            r.macro_avg,
            MacroMetrics {
                precision: ratio(1, 1),
                recall: ratio(1, 1),
                f1: ratio(1, 1)
            }
        );
        let empty: [&str; 0] = [];
        assert_eq!(confusion(&empty, &empty, &ls).unwrap().total(), 0);
        assert!(matches!(
            report(&confusion(&empty, &empty, &ls).unwrap()),
            Err(Error::Domain(_))
        ));
        assert!(confusion(&["A"], &["A", "B"], &ls).is_err());
        assert!(confusion(&["A"], &["Z"], &ls).is_err());
    }

    #[test]
    fn unsupported_class_is_outside_macro() {
        // C is predicted but never true: precision 0, excluded from the averages
        let r = report(&confusion(&["A", "B"], &["A", "C"], &labels(&["A", "B", "C"])).unwrap())
            .unwrap();
        assert_eq!(r.per_class["C"].support, 0);
        assert_eq!(r.per_class["C"].precision, ratio(0, 1));
        assert_eq!(r.macro_avg.recall, ratio(1, 2));
        assert_eq!(r.macro_avg.precision, ratio(1, 2));
    }

    #[test]
    fn per_class_csv() {
        let r =
            report(&confusion(&["A", "A", "B"], &["A", "B", "B"], &labels(&["A", "B"])).unwrap())
                .unwrap();
        let mut out = Vec::new();
        r.write_per_class(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "label,support,precision,recall,f1\nA,2,1.000000,0.500000,0.666667\nB,1,0.500000,1.000000,0.666667\n"
        );
    }

    fn pairs() -> impl Strategy<Value = Vec<(usize, usize)>> {
        prop::collection::vec((0usize..5, 0usize..5), 1..20)
    }

    fn build(p: &[(usize, usize)]) -> MetricsReport {
        let ls = labels(&["a", "b", "c", "d", "e"]);
        let t: Vec<&str> = p.iter().map(|&(t, _)| ls[t].as_str()).collect();
        let q: Vec<&str> = p.iter().map(|&(_, q)| ls[q].as_str()).collect();
        report(&confusion(&t, &q, &ls).unwrap()).unwrap()
    }

    proptest! {
        #[test]
        fn accuracy_is_support_weighted_recall(p in pairs()) {
            let r = build(&p);
            let weighted: Rational = r.per_class.values()
                .map(|m| &m.recall * from_usize(m.support))
                .fold(Rational::zero(), |a, b| a + b) / from_usize(r.total);
            prop_assert_eq!(weighted, r.accuracy.clone());
            prop_assert_eq!(r.per_class.values().map(|m| m.support).sum::<usize>(), r.total);
        }

        #[test]
        fn order_and_scale_invariance(p in pairs(), rot in 0usize..20) {
            let r = build(&p);
            let mut rotated = p.clone();
            rotated.rotate_left(rot % p.len());
            rotated.reverse();
            prop_assert_eq!(&build(&rotated), &r);
            let doubled: Vec<_> = p.iter().chain(p.iter()).copied().collect();
            let d = build(&doubled);
            prop_assert_eq!(d.accuracy, r.accuracy.clone());
            prop_assert_eq!(d.per_class.iter().map(|(l, m)| (l.clone(), m.f1.clone(), m.recall.clone())).collect::<Vec<_>>(),
                            r.per_class.iter().map(|(l, m)| (l.clone(), m.f1.clone(), m.recall.clone())).collect::<Vec<_>>());
            prop_assert_eq!(d.macro_avg, r.macro_avg);
        }

        #[test]
        fn values_in_unit_interval(p in pairs()) {
            let r = build(&p);
            let one = ratio(1, 1);
            for m in r.per_class.values() {
                for v in [&m.precision, &m.recall, &m.f1] {
                    prop_assert!(*v >= Rational::zero() && *v <= one);
                }
            }
        }
    }
}
