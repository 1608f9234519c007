use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use num_traits::{One, Zero};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::event_model::RoleConfig;
use crate::log_io::{ColumnMapping, LogFormat, PreprocessPolicy};
use crate::prediction::{
    ExternalCommand, PredictionTask, PredictorHandle, DEFAULT_ORDER, DEFAULT_TIMEOUT,
};
use crate::rational::{from_f64_decimal, parse_rational, render_exact, Rational};
use crate::reducer::ReductionMethod;
use crate::rng::derive_seed;
use crate::splitter::{SplitMethod, SplitSpec};
use crate::variants::{PerspectiveSet, VariantKey};

/// A number written either as a TOML float/integer or as a string (`"0.95"`, `"7/10"`).
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum Number {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Number {
    fn to_rational(&self) -> Result<Rational> {
        match self {
            Number::Int(i) => Ok(Rational::from_integer((*i).into())),
            Number::Float(f) => from_f64_decimal(*f),
            Number::Text(s) => parse_rational(s),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seed: u64,
    output_dir: Option<String>,
    variants_perspective: Option<String>,
    #[serde(default)]
    factors: Vec<Number>,
    reduction_methods: Option<Vec<String>>,
    /// Activity sequences targeted by `variant_targeted`.
    #[serde(default)]
    variant_targets: Vec<Vec<String>>,
    tasks: Option<Vec<String>>,
    logs: Vec<RawLog>,
    splits: Option<Vec<RawSplit>>,
    predictors: Option<Vec<RawPredictor>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLog {
    name: String,
    path: String,
    format: Option<String>,
    mapping: Option<String>,
    #[serde(default)]
    preprocess: PreprocessPolicy,
    #[serde(default)]
    roles: RoleConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSplit {
    method: String,
    ratio: Number,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPredictor {
    name: String,
    kind: String,
    order: Option<usize>,
    command: Option<String>,
    working_dir: Option<String>,
    timeout_secs: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogConfig {
    pub name: String,
    pub path: PathBuf,
    pub format: LogFormat,
    pub mapping: Option<ColumnMapping>,
    pub preprocess: PreprocessPolicy,
    pub roles: RoleConfig,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitConfig {
    pub method: SplitMethod,
    pub ratio: Rational,
    /// Explicit seed; otherwise one is derived per log from the experiment seed.
    pub seed: Option<u64>,
}

impl SplitConfig {
    pub fn spec_for(&self, log: &str, base_seed: u64) -> Result<SplitSpec> {
        let seed = match (self.method, self.seed) {
            (SplitMethod::Temporal, _) => 0,
            (SplitMethod::Random, Some(s)) => s,
            (SplitMethod::Random, None) => derive_seed(
                base_seed,
                &format!("split\u{1f}{log}\u{1f}{}", render_exact(&self.ratio)),
            ),
        };
        SplitSpec::new(self.ratio.clone(), self.method, seed)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub logs: Vec<LogConfig>,
    pub splits: Vec<SplitConfig>,
    pub reduction_methods: Vec<ReductionMethod>,
    /// Strictly increasing, starting with the reference factor 0.
    pub factors: Vec<Rational>,
    pub variant_targets: BTreeSet<VariantKey>,
    pub predictors: Vec<PredictorHandle>,
    pub tasks: Vec<PredictionTask>,
    pub perspective: PerspectiveSet,
    pub seed: u64,
    pub output_dir: PathBuf,
}

fn check_name(kind: &str, name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "_.-".contains(c));
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{kind} name {name:?} may only contain letters, digits, '_', '.' and '-'"
        )))
    }
}

fn unique<'a>(kind: &str, names: impl IntoIterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for n in names {
        check_name(kind, n)?;
        if !seen.insert(n) {
            return Err(Error::Config(format!("duplicate {kind} name {n:?}")));
        }
    }
    Ok(())
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Input(m) | Error::Domain(m) => Error::Config(m),
        other => other,
    }
}

/// Normalizes a factor list: checks bounds and order and prepends 0 when absent.
pub fn normalize_factors(factors: Vec<Rational>) -> Result<Vec<Rational>> {
    for f in &factors {
        if *f < Rational::zero() || *f >= Rational::one() {
            return Err(Error::Config(format!(
                "factor {} is outside [0, 1)",
                render_exact(f)
            )));
        }
    }
    if factors.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("factors must be strictly increasing".into()));
    }
    let mut out = factors;
    if out.first().is_none_or(|f| !f.is_zero()) {
        out.insert(0, Rational::zero());
    }
    Ok(out)
}

impl LogFormat {
    /// Guesses the format from the file extension, looking through a `.gz` suffix.
    pub fn infer(path: &Path) -> Option<LogFormat> {
        let name = path.file_name()?.to_str()?.to_ascii_lowercase();
        let name = name.strip_suffix(".gz").unwrap_or(&name);
        if name.ends_with(".xes") {
            Some(LogFormat::Xes)
        } else if name.ends_with(".csv") {
            Some(LogFormat::Csv)
        } else {
            None
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    /// Parses a config; relative paths resolve against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let resolve = |p: &str| base.join(p);

        if raw.logs.is_empty() {
            return Err(Error::Config(
                "at least one [[logs]] entry is required".into(),
            ));
        }
        unique("log", raw.logs.iter().map(|l| l.name.as_str()))?;
        let mut logs = Vec::new();
        for l in raw.logs {
            let path = resolve(&l.path);
            let format = match &l.format {
                Some(f) => f.parse().map_err(config_err)?,
                None => LogFormat::infer(&path).ok_or_else(|| {
                    Error::Config(format!(
                        "log {:?}: cannot infer format of {}",
                        l.name, l.path
                    ))
                })?,
            };
            let mapping = match &l.mapping {
                Some(m) => {
                    let p = resolve(m);
                    let text = fs::read_to_string(&p).map_err(|e| Error::file(&p, e))?;
                    Some(ColumnMapping::from_toml(&text)?)
                }
                None => None,
            };
            if !path.is_file() {
                return Err(Error::Config(format!(
                    "log {:?}: file {} not found",
                    l.name,
                    path.display()
                )));
            }
            logs.push(LogConfig {
                name: l.name,
                path,
                format,
                mapping,
                preprocess: l.preprocess,
                roles: l.roles,
            });
        }

        let splits = match raw.splits {
            Some(s) if s.is_empty() => {
                return Err(Error::Config("splits must not be empty".into()))
            }
            Some(s) => s
                .into_iter()
                .map(|s| {
                    let cfg = SplitConfig {
                        method: s.method.parse().map_err(config_err)?,
                        ratio: s.ratio.to_rational().map_err(config_err)?,
                        seed: s.seed,
                    };
                    cfg.spec_for("", 0).map_err(config_err)?;
                    Ok(cfg)
                })
                .collect::<Result<Vec<_>>>()?,
            None => vec![SplitConfig {
                method: SplitMethod::Temporal,
                ratio: Rational::new(7.into(), 10.into()),
                seed: None,
            }],
        };
        let labels: Vec<String> = splits
            .iter()
            .map(|s| s.spec_for("", 0).unwrap().label())
            .collect();
        if labels.iter().collect::<BTreeSet<_>>().len() != labels.len() {
            return Err(Error::Config("duplicate split entries".into()));
        }

        let reduction_methods = raw
            .reduction_methods
            .unwrap_or_else(|| vec!["temporal_oldest".into(), "random".into()])
            .iter()
            .map(|m| m.parse().map_err(config_err))
            .collect::<Result<Vec<ReductionMethod>>>()?;
        if reduction_methods.is_empty() {
            return Err(Error::Config("reduction_methods must not be empty".into()));
        }
        if reduction_methods.iter().collect::<BTreeSet<_>>().len() != reduction_methods.len() {
            return Err(Error::Config("duplicate reduction method".into()));
        }

        let factors = normalize_factors(
            raw.factors
                .iter()
                .map(|f| f.to_rational().map_err(config_err))
                .collect::<Result<Vec<_>>>()?,
        )?;

        let perspective = match &raw.variants_perspective {
            Some(p) => PerspectiveSet::parse(p).map_err(config_err)?,
            None => PerspectiveSet::activity(),
        };
        let variant_targets: BTreeSet<VariantKey> = raw
            .variant_targets
            .iter()
            .map(|t| VariantKey::from_labels(t))
            .collect();
        if reduction_methods.contains(&ReductionMethod::VariantTargeted) {
            if variant_targets.is_empty() {
                return Err(Error::Config(
                    "variant_targeted reduction needs variant_targets".into(),
                ));
            }
            if perspective.keys().len() != 1 {
                return Err(Error::Config(
                    "variant_targets need a single-key variants_perspective".into(),
                ));
            }
        }

        let predictors = match raw.predictors {
            None => vec![PredictorHandle::builtin("markov", DEFAULT_ORDER)],
            Some(ps) => {
                unique("predictor", ps.iter().map(|p| p.name.as_str()))?;
                ps.into_iter()
                    .map(|p| build_predictor(p, base))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        if predictors.is_empty() {
            return Err(Error::Config("predictors must not be empty".into()));
        }

        let tasks = raw
            .tasks
            .unwrap_or_else(|| vec!["next_activity".into()])
            .iter()
            .map(|t| t.parse().map_err(config_err))
            .collect::<Result<Vec<PredictionTask>>>()?;
        if tasks.is_empty() {
            return Err(Error::Config("tasks must not be empty".into()));
        }

        Ok(ExperimentConfig {
            logs,
            splits,
            reduction_methods,
            factors,
            variant_targets,
            predictors,
            tasks,
            perspective,
            seed: raw.seed,
            output_dir: resolve(raw.output_dir.as_deref().unwrap_or("results")),
        })
    }
}

fn build_predictor(p: RawPredictor, base: &Path) -> Result<PredictorHandle> {
    match p.kind.as_str() {
        "builtin_markov" => {
            if p.command.is_some() {
                return Err(Error::Config(format!(
                    "predictor {:?}: builtin_markov takes no command",
                    p.name
                )));
            }
            let order = p.order.unwrap_or(DEFAULT_ORDER);
            if order == 0 {
                return Err(Error::Config(format!(
                    "predictor {:?}: order must be at least 1",
                    p.name
                )));
            }
            Ok(PredictorHandle::builtin(p.name, order))
        }
        "external" => {
            let command = p.command.ok_or_else(|| {
                Error::Config(format!("predictor {:?}: external needs a command", p.name))
            })?;
            if p.timeout_secs == Some(0) {
                return Err(Error::Config(format!(
                    "predictor {:?}: timeout_secs must be positive",
                    p.name
                )));
            }
            let cmd = ExternalCommand::new(command)?
                .with_timeout(
                    p.timeout_secs
                        .map(Duration::from_secs)
                        .unwrap_or(DEFAULT_TIMEOUT),
                )
                .with_working_dir(base.join(p.working_dir.as_deref().unwrap_or(".")));
            Ok(PredictorHandle::external(p.name, cmd))
        }
        other => Err(Error::Config(format!(
            "predictor {:?}: unknown kind {other:?} (expected builtin_markov or external)",
            p.name
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn dir_with_log() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("l.csv"),
            "case_id,activity,timestamp,resource\nc,A,2020-01-01T00:00:00Z,\n",
        )
        .unwrap();
        dir
    }

    #[test]
    fn defaults_and_relative_paths() {
        let dir = dir_with_log();
        let cfg =
            ExperimentConfig::from_toml("[[logs]]\nname = \"l\"\npath = \"l.csv\"\n", dir.path())
                .unwrap();
        assert_eq!(cfg.logs[0].path, dir.path().join("l.csv"));
        assert_eq!(cfg.logs[0].format, LogFormat::Csv);
        assert_eq!(cfg.factors, vec![ratio(0, 1)]);
        assert_eq!(
            cfg.reduction_methods,
            vec![ReductionMethod::TemporalOldest, ReductionMethod::Random]
        );
        assert_eq!(cfg.splits[0].ratio, ratio(7, 10));
        assert_eq!(cfg.predictors, vec![PredictorHandle::builtin("markov", 3)]);
        assert_eq!(cfg.output_dir, dir.path().join("results"));
    }

    #[test]
    fn factor_forms() {
        let dir = dir_with_log();
        let text = "factors = [0.2, \"2/5\", 0.95]\n[[logs]]\nname = \"l\"\npath = \"l.csv\"\n";
        let cfg = ExperimentConfig::from_toml(text, dir.path()).unwrap();
        assert_eq!(
            cfg.factors,
            vec![ratio(0, 1), ratio(1, 5), ratio(2, 5), ratio(19, 20)]
        );
        assert!(normalize_factors(vec![ratio(1, 2), ratio(1, 5)]).is_err());
        assert!(normalize_factors(vec![ratio(1, 1)]).is_err());
        assert_eq!(
            normalize_factors(vec![ratio(0, 1), ratio(1, 2)])
                .unwrap()
                .len(),
            2
        );
    }

    #[test]
    fn rejected_configs() {
        let dir = dir_with_log();
        let log = "[[logs]]\nname = \"l\"\npath = \"l.csv\"\n";
        for bad in [
            String::from("logs = []\n"),
            format!("bogus = 1\n{log}"),
            format!("factors = [1.0]\n{log}"),
            format!("reduction_methods = [\"variant_targeted\"]\n{log}"),
            format!("tasks = [\"next_thing\"]\n{log}"),
            format!("{log}[[splits]]\nmethod = \"temporal\"\nratio = 1.5\n"),
            format!("{log}[[predictors]]\nname = \"x\"\nkind = \"external\"\n"),
            format!("{log}[[predictors]]\nname = \"x\"\nkind = \"external\"\ncommand = \"p {{train}}\"\n"),
            format!("{log}[[predictors]]\nname = \"bad name\"\nkind = \"builtin_markov\"\n"),
            format!("{log}{log}"),
            "[[logs]]\nname = \"m\"\npath = \"missing.csv\"\n".to_string(),
        ] {
            assert!(matches!(ExperimentConfig::from_toml(&bad, dir.path()), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn split_seeds() {
        let random = SplitConfig {
            method: SplitMethod::Random,
            ratio: ratio(7, 10),
            seed: None,
        };
        let a = random.spec_for("a", 1).unwrap();
        assert_eq!(a, random.spec_for("a", 1).unwrap());
        assert_ne!(a.seed, random.spec_for("b", 1).unwrap().seed);
        let fixed = SplitConfig {
            seed: Some(9),
            ..random
        };
        assert_eq!(fixed.spec_for("a", 1).unwrap().seed, 9);
    }
}
