use std::path::PathBuf;

use proptest::prelude::*;
use smallog_core::event_model::{extract_registry, RoleSource, END_MARKER};
use smallog_core::log_io::{load_log, ColumnMapping, LogFormat};
use smallog_core::metrics::{confusion, report};
use smallog_core::prediction::{generate_instances, train_baseline, PredictionTask};
use smallog_core::rational::ratio;
use smallog_core::reducer::{reduce, ReductionMethod, ReductionSpec};
use smallog_core::splitter::{split, SplitMethod, SplitSpec};
use smallog_core::synthetic;
use smallog_core::variants::{distribution, partition, PerspectiveSet};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

#[test]
fn fixture_formats_agree_and_compose() {
    let mapping =
        ColumnMapping::from_toml(&std::fs::read_to_string(fixture("table1_mapping.toml")).unwrap())
            .unwrap();
    let csv = load_log(&fixture("table1.csv"), LogFormat::Csv, Some(&mapping)).unwrap();
    let xes = load_log(&fixture("table1.xes"), LogFormat::Xes, None).unwrap();
    assert_eq!(csv, xes);

    let dist = distribution(&partition(&csv, &PerspectiveSet::activity())).unwrap();
    let mut probs: Vec<_> = dist.probabilities().values().cloned().collect();
    probs.sort();
    assert_eq!(probs, vec![ratio(1, 3), ratio(2, 3)]);

    let registry = extract_registry(&csv, &RoleSource::Resource).unwrap();
    let res = split(
        &csv,
        &SplitSpec::new(ratio(2, 3), SplitMethod::Temporal, 0).unwrap(),
    )
    .unwrap();
    assert_eq!(res.test.case_ids().collect::<Vec<_>>(), vec!["Case1"]);
    let (reduced, _) = reduce(
        &res.train,
        &ReductionSpec::new(ratio(1, 2), ReductionMethod::TemporalOldest, 0).unwrap(),
    )
    .unwrap();
    assert_eq!(reduced.case_ids().collect::<Vec<_>>(), vec!["Case3"]);

    let task = PredictionTask::NextActivity;
    let instances = generate_instances(&res.test, task, &registry, &RoleSource::Resource).unwrap();
    let model = train_baseline(&reduced, task, 1, &registry, &RoleSource::Resource).unwrap();
    let predicted: Vec<&str> = instances
        .iter()
        .map(|i| model.predict(&i.context(task)))
        .collect();
    // Case3 is ⟨A,T,C⟩, so the test case ⟨A,T,W⟩ gets its final W wrong
    assert_eq!(predicted, vec!["T", "C", "C"]);
    let targets: Vec<&str> = instances.iter().map(|i| i.target.as_str()).collect();
    assert_eq!(targets, vec!["T", "W", END_MARKER]);
    let m = report(&confusion(&targets, &predicted, &task.labels(&registry)).unwrap()).unwrap();
    assert_eq!(m.accuracy, ratio(1, 3));
    // W never occurs in the reduced training data, yet it stays a scorable label
    assert_eq!(m.per_class["W"].support, 1);
    assert_eq!(m.per_class["W"].recall, ratio(0, 1));
}

fn arb_log() -> impl Strategy<Value = Vec<Vec<&'static str>>> {
    let acts = prop::sample::select(vec!["A", "B", "C", "D", "E"]);
    prop::collection::vec(prop::collection::vec(acts, 1..6), 2..30)
}

proptest! {
    #[test]
    fn predictions_stay_inside_the_reference_registry(
        seqs in arb_log(),
        num in 0i64..100,
        seed in any::<u64>(),
        order in 1usize..4,
    ) {
        let log = synthetic::from_sequences(&seqs);
        let registry = extract_registry(&log, &RoleSource::Resource).unwrap();
        let res = split(&log, &SplitSpec::new(ratio(7, 10), SplitMethod::Random, seed).unwrap()).unwrap();
        let (reduced, _) = reduce(&res.train, &ReductionSpec::new(ratio(num, 100), ReductionMethod::Random, seed).unwrap()).unwrap();
        let task = PredictionTask::NextActivity;
        let instances = generate_instances(&res.test, task, &registry, &RoleSource::Resource).unwrap();
        prop_assert_eq!(instances.len(), res.test.event_count());
        let model = train_baseline(&reduced, task, order, &registry, &RoleSource::Resource).unwrap();
        let labels = task.labels(&registry);
        for inst in &instances {
            let p = model.predict(&inst.context(task));
            prop_assert!(labels.iter().any(|l| l == p), "{} not registered", p);
        }
    }
}
