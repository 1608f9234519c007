use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use wait_timeout::ChildExt;

use super::protocol::{read_predictions, write_instances, write_registry};
use super::{train_baseline, PredictionInstance, PredictionTask};
use crate::error::{Error, Result};
use crate::event_model::{EventLog, LabelRegistry, RoleSource};
use crate::log_io::write_canonical;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(3600);

/// Placeholders substituted into each argument of a command template.
const PLACEHOLDERS: [&str; 5] = ["{train}", "{instances}", "{registry}", "{out}", "{task}"];

/// A predictor run as a subprocess speaking the file protocol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExternalCommand {
    /// Shell-style command line, e.g. `python predict.py {train} {instances} {registry} {out}`.
    pub template: String,
    pub working_dir: Option<PathBuf>,
    pub timeout: Duration,
}

impl ExternalCommand {
    pub fn new(template: impl Into<String>) -> Result<Self> {
        let template = template.into();
        let words = shell_words::split(&template).map_err(|e| {
            Error::Config(format!("cannot split predictor command {template:?}: {e}"))
        })?;
        if words.is_empty() {
            return Err(Error::Config("predictor command is empty".into()));
        }
        if !words.iter().any(|w| w.contains("{out}")) {
            return Err(Error::Config(format!(
                "predictor command {template:?} has no {{out}} placeholder"
            )));
        }
        Ok(ExternalCommand {
            template,
            working_dir: None,
            timeout: DEFAULT_TIMEOUT,
        })
    }

    pub fn with_working_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.working_dir = Some(dir.into());
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn argv(&self, values: &[String; 5]) -> Result<Vec<String>> {
        let words = shell_words::split(&self.template).map_err(|e| Error::Config(e.to_string()))?;
        Ok(words
            .into_iter()
            .map(|w| {
                PLACEHOLDERS
                    .iter()
                    .zip(values)
                    .fold(w, |acc, (p, v)| acc.replace(p, v))
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PredictorKind {
    BuiltinMarkov { order: usize },
    External(ExternalCommand),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredictorHandle {
    pub name: String,
    pub kind: PredictorKind,
}

impl PredictorHandle {
    pub fn builtin(name: impl Into<String>, order: usize) -> Self {
        PredictorHandle {
            name: name.into(),
            kind: PredictorKind::BuiltinMarkov { order },
        }
    }

    pub fn external(name: impl Into<String>, command: ExternalCommand) -> Self {
        PredictorHandle {
            name: name.into(),
            kind: PredictorKind::External(command),
        }
    }

    /// Trains on `train` and predicts one label per instance.
    ///
    /// `scratch` receives the exchange files of external predictors.
    pub fn predict(
        &self,
        train: &EventLog,
        instances: &[PredictionInstance],
        task: PredictionTask,
        registry: &LabelRegistry,
        roles: &RoleSource,
        scratch: &Path,
    ) -> Result<Vec<String>> {
        match &self.kind {
            PredictorKind::BuiltinMarkov { order } => {
                let model = train_baseline(train, task, *order, registry, roles)?;
                Ok(instances
                    .iter()
                    .map(|i| model.predict(&i.context(task)).to_string())
                    .collect())
            }
            PredictorKind::External(cmd) => {
                run_external(cmd, train, instances, task, registry, scratch)
            }
        }
    }
}

fn tail(path: &Path, lines: usize) -> String {
    let text = fs::read_to_string(path).unwrap_or_default();
    let all: Vec<&str> = text.lines().collect();
    all[all.len().saturating_sub(lines)..].join("\n")
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::file(path, e))
}

/// Writes the exchange files into `scratch`, runs the command and validates its output.
pub fn run_external(
    cmd: &ExternalCommand,
    train: &EventLog,
    instances: &[PredictionInstance],
    task: PredictionTask,
    registry: &LabelRegistry,
    scratch: &Path,
) -> Result<Vec<String>> {
    fs::create_dir_all(scratch).map_err(|e| Error::file(scratch, e))?;
    let scratch = scratch
        .canonicalize()
        .map_err(|e| Error::file(scratch, e))?;
    let train_path = scratch.join("train.csv");
    let instances_path = scratch.join("instances.csv");
    let registry_path = scratch.join("registry.txt");
    let out_path = scratch.join("predictions.txt");
    write_canonical(train, create(&train_path)?)?;
    write_instances(instances, task, create(&instances_path)?)?;
    write_registry(registry, create(&registry_path)?)?;
    if out_path.exists() {
        fs::remove_file(&out_path).map_err(|e| Error::file(&out_path, e))?;
    }

    let values =
        [&train_path, &instances_path, &registry_path, &out_path].map(|p| p.display().to_string());
    let values = [
        values[0].clone(),
        values[1].clone(),
        values[2].clone(),
        values[3].clone(),
        task.name().to_string(),
    ];
    let argv = cmd.argv(&values)?;
    let stderr_path = scratch.join("stderr.log");
    let mut command = Command::new(&argv[0]);
    command
        .args(&argv[1..])
        .current_dir(cmd.working_dir.as_deref().unwrap_or(&scratch))
        .stdin(Stdio::null())
        .stdout(create(&scratch.join("stdout.log"))?)
        .stderr(create(&stderr_path)?);
    log::debug!("running predictor: {argv:?}");
    let mut child = command
        .spawn()
        .map_err(|e| Error::PredictorFailed(format!("cannot start {:?}: {e}", argv[0])))?;
    let status = match child.wait_timeout(cmd.timeout)? {
        Some(status) => status,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(Error::PredictorFailed(format!(
                "timed out after {}s",
                cmd.timeout.as_secs_f64()
            )));
        }
    };
    if !status.success() {
        return Err(Error::PredictorFailed(format!(
            "{status}; stderr tail:\n{}",
            tail(&stderr_path, 20)
        )));
    }

    let file = File::open(&out_path)
        .map_err(|_| Error::Protocol(format!("predictor wrote no {}", out_path.display())))?;
    let labels = read_predictions(file)?;
    if labels.len() != instances.len() {
        return Err(Error::Protocol(format!(
            "expected {} predictions, got {}",
            instances.len(),
            labels.len()
        )));
    }
    if let Some((i, bad)) = labels
        .iter()
        .enumerate()
        .find(|(_, l)| !task.is_registered(registry, l))
    {
        return Err(Error::Protocol(format!(
            "prediction {} is {bad:?}, which is not a registered label",
            i + 1
        )));
    }
    Ok(labels)
}
