use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use smallog_core::experiment::{
    emit_report, run_experiment, CellStatus, ExperimentConfig, RunResult,
};
use smallog_core::log_io::{canonical_bytes, load_log, write_canonical, LogFormat};
use smallog_core::rational::{ratio, Rational};
use smallog_core::reducer::ReductionMethod;
use smallog_core::splitter::{split, SplitMethod, SplitSpec};
use smallog_core::synthetic;

const PAPER_FACTORS: &str = "factors = [0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 0.99]";

fn write_log(dir: &Path, name: &str, seqs: &[Vec<&str>]) {
    let log = synthetic::from_sequences(seqs);
    write_canonical(&log, fs::File::create(dir.join(name)).unwrap()).unwrap();
}

fn mixed_log(n: usize) -> Vec<Vec<&'static str>> {
    (0..n)
        .map(|i| match i % 5 {
            0 => vec!["A", "B", "D"],
            1 => vec!["A", "C", "D"],
            2 => vec!["A", "B", "B", "D"],
            3 => vec!["A", "B", "D"],
            _ => vec!["A", "C", "E"],
        })
        .collect()
}

fn config(dir: &Path, body: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(body, dir).unwrap()
}

fn run(dir: &Path, body: &str, jobs: usize) -> Vec<RunResult> {
    let cfg = config(dir, body);
    let results = run_experiment(&cfg, jobs).unwrap();
    emit_report(&results, &cfg.output_dir).unwrap();
    results
}

#[test]
fn grid_shape_and_test_freeze() {
    let dir = tempfile::tempdir().unwrap();
    write_log(dir.path(), "mixed.csv", &mixed_log(60));
    let body = format!(
        "seed = 7\n{PAPER_FACTORS}\nreduction_methods = [\"temporal_oldest\", \"random\"]\n\
         [[logs]]\nname = \"mixed\"\npath = \"mixed.csv\"\n\
         [[splits]]\nmethod = \"temporal\"\nratio = 0.7\n"
    );
    let results = run(dir.path(), &body, 4);
    assert_eq!(results.len(), 16);
    assert!(results
        .iter()
        .all(|r| matches!(r.status, CellStatus::Ok(_))));

    // every cell hashed the same test data, and that data is the split's test side
    let hashes: BTreeSet<&str> = results.iter().map(|r| r.test_sha256.as_str()).collect();
    assert_eq!(hashes.len(), 1);
    let log = load_log(&dir.path().join("mixed.csv"), LogFormat::Csv, None).unwrap();
    let test = split(
        &log,
        &SplitSpec::new(ratio(7, 10), SplitMethod::Temporal, 0).unwrap(),
    )
    .unwrap()
    .test;
    use sha2::Digest;
    let expected = format!(
        "{:x}",
        sha2::Sha256::digest(canonical_bytes(&test).unwrap())
    );
    assert_eq!(*hashes.first().unwrap(), expected);

    // reference cells train on the whole training side; the test share grows with the factor
    for method in [ReductionMethod::TemporalOldest, ReductionMethod::Random] {
        let mut cells: Vec<&RunResult> =
            results.iter().filter(|r| r.key.method == method).collect();
        cells.sort_by(|a, b| a.key.factor.cmp(&b.key.factor));
        assert_eq!(cells[0].train_traces, 42);
        assert_eq!(cells[0].bias, Some(Rational::from_integer(0.into())));
        let shares: Vec<Rational> = cells
            .iter()
            .map(|r| {
                ratio(
                    r.test_traces as i64,
                    (r.test_traces + r.train_traces) as i64,
                )
            })
            .collect();
        assert!(shares.windows(2).all(|w| w[0] <= w[1]), "{shares:?}");
        assert_eq!(cells.last().unwrap().train_traces, 1);
    }

    let out = dir.path().join("results");
    for name in [
        "results_long.csv",
        "timings.csv",
        "table_mixed_next_activity_markov.csv",
        "logs/mixed.stats.csv",
    ] {
        assert!(out.join(name).is_file(), "{name}");
    }
    assert!(!out.join("results_partial.csv").exists());
    assert_eq!(fs::read_dir(out.join("per_class")).unwrap().count(), 16);
    let manifests: Vec<String> = fs::read_dir(out.join("manifests"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(manifests.len(), 17);
    let table = fs::read_to_string(out.join("table_mixed_next_activity_markov.csv")).unwrap();
    assert!(table.starts_with("split,random:0.0,random:0.2,"));
    assert_eq!(table.matches("REFERENCE").count(), 2);
    assert_eq!(table.matches("BEST").count(), 2);
}

#[test]
fn reference_only_grid() {
    let dir = tempfile::tempdir().unwrap();
    write_log(dir.path(), "l.csv", &mixed_log(10));
    let results = run(
        dir.path(),
        "tasks = [\"next_activity\"]\n[[logs]]\nname = \"l\"\npath = \"l.csv\"\n",
        2,
    );
    assert_eq!(results.len(), 2);
    assert!(results.iter().all(|r| r.key.factor == ratio(0, 1)));
}

#[test]
fn single_variant_is_predicted_perfectly_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    write_log(dir.path(), "det.csv", &vec![vec!["A", "B", "C", "D"]; 200]);
    let body = format!("{PAPER_FACTORS}\n[[logs]]\nname = \"det\"\npath = \"det.csv\"\n");
    let results = run(dir.path(), &body, 4);
    assert_eq!(results.len(), 16);
    for r in &results {
        assert_eq!(
            r.report().expect("ok cell").accuracy,
            ratio(1, 1),
            "{:?}",
            r.key
        );
    }
}

#[test]
fn failing_predictor_is_contained_to_its_cells() {
    let dir = tempfile::tempdir().unwrap();
    write_log(dir.path(), "l.csv", &mixed_log(20));
    fs::write(
        dir.path().join("broken.sh"),
        "echo 'model exploded' >&2\nexit 1\n",
    )
    .unwrap();
    let body = "factors = [0.5]\n[[logs]]\nname = \"l\"\npath = \"l.csv\"\n\
                [[predictors]]\nname = \"markov\"\nkind = \"builtin_markov\"\norder = 2\n\
                [[predictors]]\nname = \"broken\"\nkind = \"external\"\n\
                command = \"sh broken.sh {train} {instances} {registry} {out}\"\n";
    let results = run(dir.path(), body, 2);
    assert_eq!(results.len(), 8);
    for r in &results {
        match (&r.key.predictor[..], &r.status) {
            ("markov", CellStatus::Ok(_)) => {}
            ("broken", CellStatus::Failed(why)) => assert!(why.contains("model exploded"), "{why}"),
            other => panic!("unexpected {other:?}"),
        }
    }
    let out = dir.path().join("results");
    let table = fs::read_to_string(out.join("table_l_next_activity_broken.csv")).unwrap();
    assert_eq!(table.matches('—').count(), 4);
    let long = fs::read_to_string(out.join("results_long.csv")).unwrap();
    assert_eq!(long.matches(",failed,").count(), 4);
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    write_log(dir.path(), "l.csv", &mixed_log(40));
    let body = |out: &str| {
        format!(
            "seed = 3\noutput_dir = \"{out}\"\nfactors = [0.2, 0.5, 0.9]\ntasks = [\"next_activity\"]\n\
             [[logs]]\nname = \"l\"\npath = \"l.csv\"\n\
             [[splits]]\nmethod = \"random\"\nratio = 0.7\n[[splits]]\nmethod = \"temporal\"\nratio = 0.7\n"
        )
    };
    run(dir.path(), &body("one"), 1);
    run(dir.path(), &body("many"), 8);
    for name in ["results_long.csv", "table_l_next_activity_markov.csv"] {
        let a = fs::read(dir.path().join("one").join(name)).unwrap();
        let b = fs::read(dir.path().join("many").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn configuration_errors_abort_before_training() {
    let dir = tempfile::tempdir().unwrap();
    write_log(dir.path(), "l.csv", &mixed_log(10));
    // roles are requested but the log has no resources
    let cfg = config(
        dir.path(),
        "tasks = [\"next_role\"]\n[[logs]]\nname = \"l\"\npath = \"l.csv\"\n",
    );
    assert!(run_experiment(&cfg, 1).is_err());
    assert!(!cfg.output_dir.join("results_long.csv").exists());
}
