use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, LogConfig};
use super::report::{result_record, RESULT_COLUMNS};
use crate::error::{Error, Result};
use crate::event_model::{extract_registry, EventLog, LabelRegistry, RoleSource};
use crate::log_io::{canonical_bytes, load_log, preprocess};
use crate::metrics::{confusion, report, MetricsReport};
use crate::prediction::{
    generate_instances, protocol::write_registry, run_external, train_baseline, PredictionInstance,
    PredictionTask, PredictorHandle, PredictorKind,
};
use crate::rational::{render_exact, Rational};
use crate::reducer::{reduce, reduction_bias, ReductionMethod, ReductionSpec, VariantTargets};
use crate::rng::derive_seed;
use crate::splitter::split;
use crate::stats::log_statistics;

pub const PARTIAL_RESULTS: &str = "results_partial.csv";

/// Coordinates of one grid cell. Ordering is the row order of every report.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub log: String,
    pub split: String,
    pub method: ReductionMethod,
    pub factor: Rational,
    pub predictor: String,
    pub task: PredictionTask,
}

impl CellKey {
    /// File-name-safe identifier.
    pub fn slug(&self) -> String {
        format!(
            "{}__{}__{}__{}__{}__{}",
            self.log,
            self.split,
            self.method,
            render_exact(&self.factor).replace('/', "_"),
            self.predictor,
            self.task
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CellStatus {
    Ok(MetricsReport),
    Failed(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timings {
    /// Absent for external predictors, which train and predict in one call.
    pub train_secs: Option<f64>,
    pub predict_secs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub key: CellKey,
    /// Seed of the cell's reduction.
    pub seed: u64,
    pub status: CellStatus,
    pub bias: Option<Rational>,
    pub train_traces: usize,
    pub test_traces: usize,
    pub test_instances: usize,
    /// SHA-256 of the canonical serialization of the test log the cell was scored on.
    pub test_sha256: String,
    pub shortfall: usize,
    pub timings: Timings,
}

impl RunResult {
    pub fn report(&self) -> Option<&MetricsReport> {
        match &self.status {
            CellStatus::Ok(r) => Some(r),
            CellStatus::Failed(_) => None,
        }
    }
}

/// Everything the cells of one (log, split) share.
struct SplitContext {
    log: String,
    split: String,
    registry: LabelRegistry,
    roles: RoleSource,
    train: EventLog,
    test: EventLog,
    instances: Vec<(PredictionTask, Arc<Vec<PredictionInstance>>)>,
}

struct Reduction {
    ctx: Arc<SplitContext>,
    method: ReductionMethod,
    factor: Rational,
    seed: u64,
}

struct Reduced {
    log: EventLog,
    bias: Rational,
    shortfall: usize,
    test_sha256: String,
}

struct Job {
    ctx: Arc<SplitContext>,
    key: CellKey,
    seed: u64,
    predictor: PredictorHandle,
    instances: Arc<Vec<PredictionInstance>>,
    reduced: Arc<std::result::Result<Reduced, String>>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::file(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::file(path, e))
}

fn prepare_log(
    config: &ExperimentConfig,
    log_cfg: &LogConfig,
    out: &Path,
) -> Result<Vec<Arc<SplitContext>>> {
    let raw = load_log(&log_cfg.path, log_cfg.format, log_cfg.mapping.as_ref())?;
    let (reference, prep) = preprocess(&raw, &log_cfg.preprocess);
    log::info!(
        "{}: {} traces read, {} removed by preprocessing",
        log_cfg.name,
        prep.input_traces,
        prep.removed_traces
    );
    if reference.len() < 2 {
        return Err(Error::Domain(format!(
            "log {:?} has fewer than 2 usable traces",
            log_cfg.name
        )));
    }
    config.perspective.check_declared(&reference)?;
    let roles = RoleSource::resolve(&log_cfg.roles, &reference);
    // extracted from the whole reference log, before any split
    let registry = extract_registry(&reference, &roles)?;

    let mut buf = Vec::new();
    write_registry(&registry, &mut buf)?;
    write_file(
        &out.join("logs")
            .join(format!("{}.registry.txt", log_cfg.name)),
        &buf,
    )?;
    let stats = log_statistics(&reference, &registry)?;
    write_file(
        &out.join("logs").join(format!("{}.stats.csv", log_cfg.name)),
        stats.to_csv().as_bytes(),
    )?;

    let mut contexts = Vec::new();
    for split_cfg in &config.splits {
        let spec = split_cfg.spec_for(&log_cfg.name, config.seed)?;
        let res = split(&reference, &spec)?;
        let mut buf = Vec::new();
        res.manifest.write(&mut buf)?;
        write_file(
            &out.join("manifests")
                .join(format!("{}__{}.split.txt", log_cfg.name, spec.label())),
            &buf,
        )?;
        let instances = config
            .tasks
            .iter()
            .map(|&task| {
                Ok((
                    task,
                    Arc::new(generate_instances(&res.test, task, &registry, &roles)?),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        contexts.push(Arc::new(SplitContext {
            log: log_cfg.name.clone(),
            split: spec.label(),
            registry: registry.clone(),
            roles: roles.clone(),
            train: res.train,
            test: res.test,
            instances,
        }));
    }
    Ok(contexts)
}

fn run_reduction(
    config: &ExperimentConfig,
    r: &Reduction,
    out: &Path,
) -> std::result::Result<Reduced, String> {
    let go = || -> Result<Reduced> {
        let mut spec = ReductionSpec::new(r.factor.clone(), r.method, r.seed)?;
        if r.method == ReductionMethod::VariantTargeted {
            spec = spec.with_targets(VariantTargets {
                perspective: config.perspective.clone(),
                keys: config.variant_targets.clone(),
            });
        }
        let (log, manifest) = reduce(&r.ctx.train, &spec)?;
        let mut buf = Vec::new();
        manifest.write(&mut buf)?;
        let name = format!(
            "{}__{}__{}__{}.removed.txt",
            r.ctx.log,
            r.ctx.split,
            r.method,
            render_exact(&r.factor).replace('/', "_")
        );
        write_file(&out.join("manifests").join(name), &buf)?;
        Ok(Reduced {
            bias: reduction_bias(&r.ctx.train, &log, &config.perspective)?,
            shortfall: manifest.shortfall,
            // hashed per cell so the report can show every cell saw the same test data
            test_sha256: format!("{:x}", Sha256::digest(canonical_bytes(&r.ctx.test)?)),
            log,
        })
    };
    go().map_err(|e| e.to_string())
}

fn predict(job: &Job, train: &EventLog, scratch: &Path) -> Result<(Vec<String>, Timings)> {
    let ctx = &job.ctx;
    let task = job.key.task;
    match &job.predictor.kind {
        PredictorKind::BuiltinMarkov { order } => {
            let t0 = Instant::now();
            let model = train_baseline(train, task, *order, &ctx.registry, &ctx.roles)?;
            let train_secs = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let labels = job
                .instances
                .iter()
                .map(|i| model.predict(&i.context(task)).to_string())
                .collect();
            Ok((
                labels,
                Timings {
                    train_secs: Some(train_secs),
                    predict_secs: t1.elapsed().as_secs_f64(),
                },
            ))
        }
        PredictorKind::External(cmd) => {
            let t0 = Instant::now();
            let labels = run_external(cmd, train, &job.instances, task, &ctx.registry, scratch)?;
            Ok((
                labels,
                Timings {
                    train_secs: None,
                    predict_secs: t0.elapsed().as_secs_f64(),
                },
            ))
        }
    }
}

fn run_cell(job: &Job, out: &Path) -> RunResult {
    let ctx = &job.ctx;
    let mut result = RunResult {
        key: job.key.clone(),
        seed: job.seed,
        status: CellStatus::Failed(String::new()),
        bias: None,
        train_traces: 0,
        test_traces: ctx.test.len(),
        test_instances: job.instances.len(),
        test_sha256: String::new(),
        shortfall: 0,
        timings: Timings::default(),
    };
    let reduced = match job.reduced.as_ref() {
        Ok(r) => r,
        Err(reason) => {
            result.status = CellStatus::Failed(format!("reduction failed: {reason}"));
            return result;
        }
    };
    result.bias = Some(reduced.bias.clone());
    result.train_traces = reduced.log.len();
    result.test_sha256 = reduced.test_sha256.clone();
    result.shortfall = reduced.shortfall;

    let scratch = out.join("scratch").join(job.key.slug());
    let scored = predict(job, &reduced.log, &scratch).and_then(|(labels, timings)| {
        let targets: Vec<&str> = job.instances.iter().map(|i| i.target.as_str()).collect();
        let matrix = confusion(&targets, &labels, &job.key.task.labels(&ctx.registry))?;
        Ok((report(&matrix)?, timings))
    });
    match scored {
        Ok((metrics, timings)) => {
            result.status = CellStatus::Ok(metrics);
            result.timings = timings;
            if scratch.exists() {
                let _ = fs::remove_dir_all(&scratch);
            }
        }
        Err(e) => {
            log::warn!("cell {} failed: {e}", job.key.slug());
            result.status = CellStatus::Failed(e.to_string());
        }
    }
    result
}

/// Runs the whole grid with `jobs` worker threads and returns results sorted by cell.
///
/// Manifests, per-log registries and statistics are written to the output
/// directory as they are produced; each finished cell is appended to
/// `results_partial.csv`, which is deleted once the grid completes.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<Vec<RunResult>> {
    let out = &config.output_dir;
    for sub in ["", "logs", "manifests", "scratch"] {
        create_dir(&out.join(sub))?;
    }

    // everything that can fail on configuration or data happens before any training
    let mut contexts = Vec::new();
    for log_cfg in &config.logs {
        contexts.extend(prepare_log(config, log_cfg, out)?);
    }

    let mut reductions = Vec::new();
    for ctx in &contexts {
        for &method in &config.reduction_methods {
            for factor in &config.factors {
                let coords = format!(
                    "reduce\u{1f}{}\u{1f}{}\u{1f}{method}\u{1f}{}",
                    ctx.log,
                    ctx.split,
                    render_exact(factor)
                );
                reductions.push(Reduction {
                    ctx: Arc::clone(ctx),
                    method,
                    factor: factor.clone(),
                    seed: derive_seed(config.seed, &coords),
                });
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Internal(format!("cannot start worker pool: {e}")))?;

    let reduced: Vec<Arc<std::result::Result<Reduced, String>>> = pool.install(|| {
        reductions
            .par_iter()
            .map(|r| Arc::new(run_reduction(config, r, out)))
            .collect()
    });

    let mut cells = Vec::new();
    for (r, red) in reductions.iter().zip(&reduced) {
        for predictor in &config.predictors {
            for (task, instances) in &r.ctx.instances {
                cells.push(Job {
                    ctx: Arc::clone(&r.ctx),
                    key: CellKey {
                        log: r.ctx.log.clone(),
                        split: r.ctx.split.clone(),
                        method: r.method,
                        factor: r.factor.clone(),
                        predictor: predictor.name.clone(),
                        task: *task,
                    },
                    seed: r.seed,
                    predictor: predictor.clone(),
                    instances: Arc::clone(instances),
                    reduced: Arc::clone(red),
                });
            }
        }
    }
    log::info!("running {} cells on {} worker(s)", cells.len(), jobs.max(1));

    let partial_path = out.join(PARTIAL_RESULTS);
    let file = File::create(&partial_path).map_err(|e| Error::file(&partial_path, e))?;
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    writer
        .write_record(RESULT_COLUMNS)
        .map_err(|e| Error::Internal(e.to_string()))?;
    writer.flush()?;
    let partial = Mutex::new(writer);

    let mut results: Vec<RunResult> = pool.install(|| {
        cells
            .par_iter()
            .map(|job| {
                let result = run_cell(job, out);
                let mut w = partial.lock().unwrap_or_else(|p| p.into_inner());
                if let Err(e) = w
                    .write_record(result_record(&result))
                    .map_err(|e| e.to_string())
                    .and_then(|_| w.flush().map_err(|e| e.to_string()))
                {
                    log::warn!("cannot append to {}: {e}", partial_path.display());
                }
                result
            })
            .collect()
    });
    drop(partial);
    results.sort_by(|a, b| a.key.cmp(&b.key));
    let _ = fs::remove_file(&partial_path);
    let _ = fs::remove_dir(out.join("scratch"));
    Ok(results)
}
