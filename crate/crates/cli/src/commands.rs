use std::fs::{self, File};
use std::path::Path;

use anyhow::{bail, Context, Result};
use smallog_core::event_model::{
    extract_registry, EventLog, LabelRegistry, RoleConfig, RoleSource,
};
use smallog_core::experiment::{
    emit_report, read_results, run_experiment, write_tables, CellStatus, ExperimentConfig,
};
use smallog_core::log_io::{load_log, write_canonical, ColumnMapping, LogFormat};
use smallog_core::metrics::{confusion, report, METRIC_PLACES};
use smallog_core::prediction::protocol::{
    read_instances, read_predictions, read_registry, write_instances, write_predictions,
    write_registry,
};
use smallog_core::prediction::{generate_instances, train_baseline, PredictionTask};
use smallog_core::rational::{format_decimal, Rational};
use smallog_core::reducer::{
    reduce, reduction_bias, ReductionMethod, ReductionSpec, VariantTargets,
};
use smallog_core::splitter::{split, SplitSpec};
use smallog_core::stats::log_statistics;
use smallog_core::variants::{
    partition, write_variants_csv, PerspectiveSet, VariantKey, PROBABILITY_PLACES,
};

use crate::{Command, LogArgs, RoleArgs};

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Stats { log, roles, out } => stats(&log, &roles, out.as_deref()),
        Command::Variants {
            log,
            perspective,
            out,
        } => variants(&log, &perspective, out.as_deref()),
        Command::Split {
            log,
            roles,
            ratio,
            method,
            seed,
            out,
        } => {
            let spec = SplitSpec::new(ratio, method, seed).context("invalid --ratio")?;
            split_cmd(&log, &roles, &spec, &out)
        }
        Command::Reduce {
            log,
            factor,
            method,
            seed,
            perspective,
            targets,
            out,
        } => {
            let spec = ReductionSpec::new(factor, method, seed).context("invalid --factor")?;
            reduce_cmd(&log, spec, &perspective, &targets, &out)
        }
        Command::Instances {
            log,
            roles,
            registry,
            task,
            out,
        } => instances(&log, &roles, &registry, task, &out),
        Command::Predict {
            log,
            roles,
            registry,
            instances,
            order,
            out,
        } => predict(&log, &roles, &registry, &instances, order, &out),
        Command::Evaluate {
            targets,
            predictions,
            registry,
            task,
            out,
        } => evaluate(&targets, &predictions, &registry, task, out.as_deref()),
        Command::Run { config, jobs, out } => run(&config, jobs, out.as_deref()),
        Command::Report { results, out } => report_cmd(&results, &out),
    }
}

fn load(args: &LogArgs) -> Result<EventLog> {
    let format = match args.format {
        Some(f) => f,
        None => LogFormat::infer(&args.log).with_context(|| {
            format!(
                "cannot infer the format of {}; pass --format",
                args.log.display()
            )
        })?,
    };
    let mapping = match &args.mapping {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("--mapping {}", path.display()))?;
            Some(
                ColumnMapping::from_toml(&text)
                    .with_context(|| format!("--mapping {}", path.display()))?,
            )
        }
        None => None,
    };
    let log = load_log(&args.log, format, mapping.as_ref())
        .with_context(|| format!("--log {}", args.log.display()))?;
    for q in log.quarantined() {
        log::warn!("trace {} skipped: {}", q.case_id, q.reason);
    }
    Ok(log)
}

fn role_source(args: &RoleArgs, log: &EventLog) -> Result<RoleSource> {
    let mapping = match &args.role_mapping {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("--role-mapping {}", path.display()))?;
            Some(
                RoleConfig::mapping_from_toml(&text)
                    .with_context(|| format!("--role-mapping {}", path.display()))?,
            )
        }
        None => None,
    };
    Ok(RoleSource::resolve(
        &RoleConfig {
            attribute: args.role_attribute.clone(),
            mapping,
        },
        log,
    ))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).with_context(|| format!("cannot create {}", path.display()))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("cannot create {}", path.display()))
}

fn load_registry(path: &Path) -> Result<LabelRegistry> {
    let file = File::open(path).with_context(|| format!("--registry {}", path.display()))?;
    read_registry(file).with_context(|| format!("--registry {}", path.display()))
}

fn stats(args: &LogArgs, roles: &RoleArgs, out: Option<&Path>) -> Result<()> {
    let log = load(args)?;
    let source = role_source(roles, &log)?;
    let registry = extract_registry(&log, &source)?;
    let s = log_statistics(&log, &registry)?;
    match out {
        Some(path) => fs::write(path, s.to_csv())
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{s}"),
    }
    Ok(())
}

fn variants(args: &LogArgs, perspective: &str, out: Option<&Path>) -> Result<()> {
    let log = load(args)?;
    let p = PerspectiveSet::parse(perspective).context("invalid --perspective")?;
    p.check_declared(&log).context("invalid --perspective")?;
    let part = partition(&log, &p);
    match out {
        Some(path) => write_variants_csv(&part, create(path)?)?,
        None => write_variants_csv(&part, std::io::stdout().lock())?,
    }
    Ok(())
}

fn split_cmd(args: &LogArgs, roles: &RoleArgs, spec: &SplitSpec, out: &Path) -> Result<()> {
    let log = load(args)?;
    // the registry covers the whole log so later stages never meet an unknown label
    let registry = extract_registry(&log, &role_source(roles, &log)?)?;
    let res = split(&log, spec)?;
    create_dir(out)?;
    write_canonical(&res.train, create(&out.join("train.csv"))?)?;
    write_canonical(&res.test, create(&out.join("test.csv"))?)?;
    res.manifest.write(create(&out.join("split.txt"))?)?;
    write_registry(&registry, create(&out.join("registry.txt"))?)?;
    println!(
        "{}: {} training and {} test traces",
        spec.label(),
        res.train.len(),
        res.test.len()
    );
    Ok(())
}

fn reduce_cmd(
    args: &LogArgs,
    spec: ReductionSpec,
    perspective: &str,
    targets: &[String],
    out: &Path,
) -> Result<()> {
    let log = load(args)?;
    let p = PerspectiveSet::parse(perspective).context("invalid --perspective")?;
    p.check_declared(&log).context("invalid --perspective")?;
    let spec = if targets.is_empty() {
        if spec.method == ReductionMethod::VariantTargeted {
            bail!("variant_targeted reduction needs at least one --target");
        }
        spec
    } else {
        if p.keys().len() != 1 {
            bail!("--target needs a single-key --perspective");
        }
        let keys = targets
            .iter()
            .map(|t| VariantKey::from_labels(&t.split(',').collect::<Vec<_>>()))
            .collect();
        spec.with_targets(VariantTargets {
            perspective: p.clone(),
            keys,
        })
    };
    let (reduced, manifest) = reduce(&log, &spec)?;
    create_dir(out)?;
    write_canonical(&reduced, create(&out.join("reduced.csv"))?)?;
    manifest.write(create(&out.join("removed.txt"))?)?;
    let bias = reduction_bias(&log, &reduced, &p)?;
    println!(
        "removed {} of {} traces (shortfall {}); variant distribution shift {}",
        manifest.removed.len(),
        log.len(),
        manifest.shortfall,
        format_decimal(&bias, PROBABILITY_PLACES)
    );
    Ok(())
}

fn instances(
    args: &LogArgs,
    roles: &RoleArgs,
    registry: &Path,
    task: PredictionTask,
    out: &Path,
) -> Result<()> {
    let log = load(args)?;
    let registry = load_registry(registry)?;
    let inst = generate_instances(&log, task, &registry, &role_source(roles, &log)?)?;
    create_dir(out)?;
    write_instances(&inst, task, create(&out.join("instances.csv"))?)?;
    let targets: Vec<String> = inst.iter().map(|i| i.target.clone()).collect();
    write_predictions(&targets, create(&out.join("targets.txt"))?)?;
    println!("{} instances", inst.len());
    Ok(())
}

fn predict(
    args: &LogArgs,
    roles: &RoleArgs,
    registry: &Path,
    instances: &Path,
    order: usize,
    out: &Path,
) -> Result<()> {
    let log = load(args)?;
    let registry = load_registry(registry)?;
    let file =
        File::open(instances).with_context(|| format!("--instances {}", instances.display()))?;
    let queries =
        read_instances(file).with_context(|| format!("--instances {}", instances.display()))?;
    let labels: Vec<String> = match queries.first() {
        None => Vec::new(),
        Some(first) => {
            let task = first.task;
            if queries.iter().any(|q| q.task != task) {
                bail!("--instances {} mixes tasks", instances.display());
            }
            let model = train_baseline(&log, task, order, &registry, &role_source(roles, &log)?)
                .context("invalid --order or training log")?;
            queries
                .iter()
                .map(|q| model.predict(&q.context()).to_string())
                .collect()
        }
    };
    write_predictions(&labels, create(out)?)?;
    Ok(())
}

fn read_labels(path: &Path, flag: &str) -> Result<Vec<String>> {
    let file = File::open(path).with_context(|| format!("{flag} {}", path.display()))?;
    Ok(read_predictions(file)?)
}

fn fraction(v: &Rational) -> String {
    format!("{} ({v})", format_decimal(v, METRIC_PLACES))
}

fn evaluate(
    targets: &Path,
    predictions: &Path,
    registry: &Path,
    task: PredictionTask,
    out: Option<&Path>,
) -> Result<()> {
    let targets = read_labels(targets, "--targets")?;
    let predicted = read_labels(predictions, "--predictions")?;
    let registry = load_registry(registry)?;
    let matrix = confusion(&targets, &predicted, &task.labels(&registry))?;
    let m = report(&matrix)?;
    println!("instances        {}", m.total);
    println!("accuracy         {}", fraction(&m.accuracy));
    println!("macro precision  {}", fraction(&m.macro_avg.precision));
    println!("macro recall     {}", fraction(&m.macro_avg.recall));
    println!("macro f1         {}", fraction(&m.macro_avg.f1));
    match out {
        Some(path) => m.write_per_class(create(path)?)?,
        None => m.write_per_class(std::io::stdout().lock())?,
    }
    Ok(())
}

fn run(config: &Path, jobs: Option<usize>, out: Option<&Path>) -> Result<()> {
    let mut cfg =
        ExperimentConfig::load(config).with_context(|| format!("--config {}", config.display()))?;
    if let Some(dir) = out {
        cfg.output_dir = dir.to_path_buf();
    }
    let jobs = match jobs {
        Some(0) => bail!("--jobs must be at least 1"),
        Some(n) => n,
        None => std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1),
    };
    let results = run_experiment(&cfg, jobs)?;
    emit_report(&results, &cfg.output_dir)?;
    let failed = results
        .iter()
        .filter(|r| matches!(r.status, CellStatus::Failed(_)))
        .count();
    println!(
        "{} cells ({} failed); results in {}",
        results.len(),
        failed,
        cfg.output_dir.display()
    );
    Ok(())
}

fn report_cmd(results: &Path, out: &Path) -> Result<()> {
    let file = File::open(results).with_context(|| format!("--results {}", results.display()))?;
    let summaries = read_results(file, results)?;
    if summaries.is_empty() {
        bail!("--results {} has no rows", results.display());
    }
    create_dir(out)?;
    for path in write_tables(&summaries, out)? {
        println!("{}", path.display());
    }
    Ok(())
}
