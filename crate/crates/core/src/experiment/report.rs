use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::Read;
use std::path::{Path, PathBuf};

use super::run::{CellKey, CellStatus, RunResult};
use crate::error::{Error, Result};
use crate::metrics::METRIC_PLACES;
use crate::prediction::PredictionTask;
use crate::rational::{format_decimal, parse_rational, render_exact, Rational};
use crate::reducer::ReductionMethod;
use crate::variants::PROBABILITY_PLACES;

pub const RESULT_COLUMNS: [&str; 20] = [
    "log",
    "split",
    "method",
    "factor",
    "predictor",
    "task",
    "status",
    "seed",
    "train_traces",
    "test_traces",
    "test_instances",
    "accuracy",
    "accuracy_exact",
    "macro_precision",
    "macro_recall",
    "macro_f1",
    "bias",
    "shortfall",
    "test_sha256",
    "reason",
];

/// Placeholder for cells whose run failed.
pub const FAILED_CELL: &str = "—";
/// Decimal places of accuracies in the wide tables.
pub const TABLE_PLACES: usize = 2;

fn dec(v: &Rational) -> String {
    format_decimal(v, METRIC_PLACES)
}

pub(super) fn result_record(r: &RunResult) -> Vec<String> {
    let k = &r.key;
    let mut row = vec![
        k.log.clone(),
        k.split.clone(),
        k.method.to_string(),
        render_exact(&k.factor),
        k.predictor.clone(),
        k.task.to_string(),
    ];
    let (status, metrics, reason) = match &r.status {
        CellStatus::Ok(m) => (
            "ok",
            vec![
                dec(&m.accuracy),
                m.accuracy.to_string(),
                dec(&m.macro_avg.precision),
                dec(&m.macro_avg.recall),
                dec(&m.macro_avg.f1),
            ],
            String::new(),
        ),
        CellStatus::Failed(why) => (
            "failed",
            vec![String::new(); 5],
            why.split_whitespace().collect::<Vec<_>>().join(" "),
        ),
    };
    row.push(status.to_string());
    row.push(r.seed.to_string());
    row.push(r.train_traces.to_string());
    row.push(r.test_traces.to_string());
    row.push(r.test_instances.to_string());
    row.extend(metrics);
    row.push(
        r.bias
            .as_ref()
            .map(|b| format_decimal(b, PROBABILITY_PLACES))
            .unwrap_or_default(),
    );
    row.push(r.shortfall.to_string());
    row.push(r.test_sha256.clone());
    row.push(reason);
    row
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Csv {
        row: e.position().map(|p| p.line() as usize).unwrap_or(0),
        message: format!("{}: {e}", path.display()),
    }
}

/// Writes `results_long.csv`, `timings.csv`, `per_class/` and the wide tables into `dir`.
pub fn emit_report(results: &[RunResult], dir: &Path) -> Result<()> {
    if results.is_empty() {
        return Err(Error::Domain("no results to report".into()));
    }
    fs::create_dir_all(dir.join("per_class")).map_err(|e| Error::file(dir, e))?;
    let mut sorted: Vec<&RunResult> = results.iter().collect();
    sorted.sort_by(|a, b| a.key.cmp(&b.key));

    let path = dir.join("results_long.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(RESULT_COLUMNS).map_err(csv_err(&path))?;
    for r in &sorted {
        w.write_record(result_record(r)).map_err(csv_err(&path))?;
    }
    w.flush()?;

    // wall-clock figures vary between runs, so they stay out of results_long.csv
    let path = dir.join("timings.csv");
    let mut w = csv_writer(&path)?;
    w.write_record([
        "log",
        "split",
        "method",
        "factor",
        "predictor",
        "task",
        "train_secs",
        "predict_secs",
    ])
    .map_err(csv_err(&path))?;
    for r in &sorted {
        let k = &r.key;
        w.write_record([
            k.log.clone(),
            k.split.clone(),
            k.method.to_string(),
            render_exact(&k.factor),
            k.predictor.clone(),
            k.task.to_string(),
            r.timings
                .train_secs
                .map(|s| format!("{s:.6}"))
                .unwrap_or_default(),
            format!("{:.6}", r.timings.predict_secs),
        ])
        .map_err(csv_err(&path))?;
    }
    w.flush()?;

    for r in &sorted {
        if let Some(m) = r.report() {
            let path = dir.join("per_class").join(format!("{}.csv", r.key.slug()));
            m.write_per_class(File::create(&path).map_err(|e| Error::file(&path, e))?)?;
        }
    }

    let summaries: Vec<ResultSummary> = sorted
        .iter()
        .map(|r| ResultSummary {
            key: r.key.clone(),
            accuracy: r.report().map(|m| m.accuracy.clone()),
        })
        .collect();
    write_tables(&summaries, dir)?;
    Ok(())
}

/// The part of a result row the wide tables need.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResultSummary {
    pub key: CellKey,
    /// `None` for failed cells.
    pub accuracy: Option<Rational>,
}

/// Reads back the summaries from a `results_long.csv`.
pub fn read_results(source: impl Read, origin: &Path) -> Result<Vec<ResultSummary>> {
    let mut r = csv::ReaderBuilder::new().from_reader(source);
    let header = r.headers().map_err(csv_err(origin))?.clone();
    if header.iter().ne(RESULT_COLUMNS) {
        return Err(Error::Input(format!(
            "{}: not a results_long.csv (unexpected header)",
            origin.display()
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(origin))?;
        let bad = |m: String| Error::Csv {
            row: i + 2,
            message: format!("{}: {m}", origin.display()),
        };
        let key = CellKey {
            log: rec[0].to_string(),
            split: rec[1].to_string(),
            method: rec[2].parse().map_err(|e: Error| bad(e.to_string()))?,
            factor: parse_rational(&rec[3]).map_err(|e| bad(e.to_string()))?,
            predictor: rec[4].to_string(),
            task: rec[5].parse().map_err(|e: Error| bad(e.to_string()))?,
        };
        let accuracy = match &rec[6] {
            "ok" => Some(parse_rational(&rec[12]).map_err(|e| bad(e.to_string()))?),
            "failed" => None,
            other => return Err(bad(format!("unknown status {other:?}"))),
        };
        out.push(ResultSummary { key, accuracy });
    }
    Ok(out)
}

/// Cell text of one row of a wide table: accuracy with REFERENCE/BEST marks, or the failure placeholder.
///
/// `cells` maps factor to accuracy for one method group. The factor-0 cell is
/// the reference; the best is the highest accuracy, ties going to the lower factor.
pub fn mark_group(cells: &BTreeMap<Rational, Option<Rational>>) -> BTreeMap<Rational, String> {
    let mut best: Option<(&Rational, &Rational)> = None;
    for (factor, acc) in cells {
        if let Some(acc) = acc {
            if best.is_none_or(|(_, b)| acc > b) {
                best = Some((factor, acc));
            }
        }
    }
    cells
        .iter()
        .map(|(factor, acc)| {
            let text = match acc {
                None => FAILED_CELL.to_string(),
                Some(a) => {
                    let mut t = format_decimal(a, TABLE_PLACES);
                    if num_traits::Zero::is_zero(factor) {
                        t.push_str(" REFERENCE");
                    }
                    if best.is_some_and(|(f, _)| f == factor) {
                        t.push_str(" BEST");
                    }
                    t
                }
            };
            (factor.clone(), text)
        })
        .collect()
}

/// Writes one `table_<log>_<task>_<predictor>.csv` per group; rows are splits,
/// columns are `method:factor` pairs.
pub fn write_tables(summaries: &[ResultSummary], dir: &Path) -> Result<Vec<PathBuf>> {
    type Group = BTreeMap<String, BTreeMap<ReductionMethod, BTreeMap<Rational, Option<Rational>>>>;
    let mut groups: BTreeMap<(String, PredictionTask, String), Group> = BTreeMap::new();
    for s in summaries {
        let k = &s.key;
        groups
            .entry((k.log.clone(), k.task, k.predictor.clone()))
            .or_default()
            .entry(k.split.clone())
            .or_default()
            .entry(k.method)
            .or_default()
            .insert(k.factor.clone(), s.accuracy.clone());
    }
    let mut written = Vec::new();
    for ((log, task, predictor), rows) in groups {
        let columns: BTreeSet<(ReductionMethod, Rational)> = rows
            .values()
            .flat_map(|methods| {
                methods
                    .iter()
                    .flat_map(|(m, cells)| cells.keys().map(move |f| (*m, f.clone())))
            })
            .collect();
        let path = dir.join(format!("table_{log}_{task}_{predictor}.csv"));
        let mut w = csv_writer(&path)?;
        let mut header = vec!["split".to_string()];
        header.extend(
            columns
                .iter()
                .map(|(m, f)| format!("{m}:{}", render_exact(f))),
        );
        w.write_record(&header).map_err(csv_err(&path))?;
        for (split, methods) in &rows {
            let marked: BTreeMap<ReductionMethod, BTreeMap<Rational, String>> = methods
                .iter()
                .map(|(m, cells)| (*m, mark_group(cells)))
                .collect();
            let mut record = vec![split.clone()];
            for (m, f) in &columns {
                record.push(
                    marked
                        .get(m)
                        .and_then(|c| c.get(f))
                        .cloned()
                        .unwrap_or_default(),
                );
            }
            w.write_record(&record).map_err(csv_err(&path))?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn group(cells: &[(i64, Option<(i64, i64)>)]) -> BTreeMap<Rational, Option<Rational>> {
        cells
            .iter()
            .map(|(f, a)| (ratio(*f, 100), a.map(|(n, d)| ratio(n, d))))
            .collect()
    }

    #[test]
    fn equal_accuracies_mark_the_first_column_twice() {
        let marked = mark_group(&group(&[
            (0, Some((3, 4))),
            (20, Some((3, 4))),
            (40, Some((3, 4))),
        ]));
        assert_eq!(marked[&ratio(0, 1)], "0.75 REFERENCE BEST");
        assert_eq!(marked[&ratio(1, 5)], "0.75");
    }

    #[test]
    fn best_away_from_reference_and_failures() {
        let marked = mark_group(&group(&[
            (0, Some((70, 100))),
            (20, Some((80, 100))),
            (40, None),
            (60, Some((80, 100))),
        ]));
        assert_eq!(marked[&ratio(0, 1)], "0.70 REFERENCE");
        assert_eq!(marked[&ratio(1, 5)], "0.80 BEST");
        assert_eq!(marked[&ratio(2, 5)], FAILED_CELL);
        assert_eq!(marked[&ratio(3, 5)], "0.80");
    }

    #[test]
    fn wide_table_and_round_trip() {
        let key = |method, f: i64| CellKey {
            log: "L".into(),
            split: "temporal-0.7".into(),
            method,
            factor: ratio(f, 100),
            predictor: "markov".into(),
            task: PredictionTask::NextActivity,
        };
        let summaries = vec![
            ResultSummary {
                key: key(ReductionMethod::Random, 0),
                accuracy: Some(ratio(1, 2)),
            },
            ResultSummary {
                key: key(ReductionMethod::Random, 20),
                accuracy: None,
            },
            ResultSummary {
                key: key(ReductionMethod::TemporalOldest, 0),
                accuracy: Some(ratio(1, 2)),
            },
            ResultSummary {
                key: key(ReductionMethod::TemporalOldest, 20),
                accuracy: Some(ratio(2, 3)),
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let written = write_tables(&summaries, dir.path()).unwrap();
        assert_eq!(
            written,
            vec![dir.path().join("table_L_next_activity_markov.csv")]
        );
        assert_eq!(
            fs::read_to_string(&written[0]).unwrap(),
            "split,random:0.0,random:0.2,temporal_oldest:0.0,temporal_oldest:0.2\n\
             temporal-0.7,0.50 REFERENCE BEST,—,0.50 REFERENCE,0.67 BEST\n"
        );
    }
}
