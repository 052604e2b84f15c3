//! Experiment configuration: flat `key = value` text, layered over
//! per-experiment defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::parallel::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    MseVsK,
    MseVsEps,
    MseVsN2,
    ExactCiGaussian,
    AceDemo,
    TopicCheck,
    CiReport,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::MseVsK,
        ExperimentKind::MseVsEps,
        ExperimentKind::MseVsN2,
        ExperimentKind::ExactCiGaussian,
        ExperimentKind::AceDemo,
        ExperimentKind::TopicCheck,
        ExperimentKind::CiReport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::MseVsK => "mse-vs-k",
            ExperimentKind::MseVsEps => "mse-vs-eps",
            ExperimentKind::MseVsN2 => "mse-vs-n2",
            ExperimentKind::ExactCiGaussian => "exact-ci-gaussian",
            ExperimentKind::AceDemo => "ace-demo",
            ExperimentKind::TopicCheck => "topic-check",
            ExperimentKind::CiReport => "ci-report",
        }
    }

    /// Name of the swept parameter, used as the plot axis label.
    pub fn grid_label(self) -> &'static str {
        match self {
            ExperimentKind::MseVsK | ExperimentKind::ExactCiGaussian | ExperimentKind::AceDemo => "k",
            ExperimentKind::TopicCheck => "topics",
            ExperimentKind::MseVsEps | ExperimentKind::CiReport => "alpha",
            ExperimentKind::MseVsN2 => "n2",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataModel {
    Mixture,
    Gaussian,
}

impl FromStr for DataModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixture" => Ok(DataModel::Mixture),
            "gaussian" => Ok(DataModel::Gaussian),
            _ => Err(Error::Config(format!("unknown model '{s}' (mixture|gaussian)"))),
        }
    }
}

impl fmt::Display for DataModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataModel::Mixture => "mixture",
            DataModel::Gaussian => "gaussian",
        })
    }
}

/// Downstream predictors compared in the MSE experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Linear ψ learned on the pretext sample.
    Psi,
    /// Linear head on raw `X₁`.
    RawX1,
    /// Closed-form ψ* with a learned head.
    PsiStar,
    /// Gaussian-kernel ridge regression on `X₁`.
    KernelX1,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Psi => "psi",
            Method::RawX1 => "raw-x1",
            Method::PsiStar => "psi-star",
            Method::KernelX1 => "kernel-x1",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Method::Psi, Method::RawX1, Method::PsiStar, Method::KernelX1]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: DataModel,
    pub d1: usize,
    pub d2: usize,
    pub n1: usize,
    pub n2: usize,
    pub k: usize,
    pub alpha: f64,
    pub k_grid: Vec<usize>,
    pub alpha_grid: Vec<f64>,
    pub n2_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Relative ridge, scaled by the mean squared feature entry.
    pub ridge: f64,
    pub pca: Option<usize>,
    pub eval_n: usize,
    pub noise1: f64,
    pub noise2: f64,
    pub methods: Vec<Method>,
    pub kernel_ridge: f64,
    /// `|X₁| = |X₂|` for ace-demo joints.
    pub support: usize,
    /// `|Y|` for ace-demo joints.
    pub y_size: usize,
    pub vocab: usize,
    pub doc_len: usize,
    pub atoms: usize,
    pub execution: Execution,
    pub output_dir: PathBuf,
    pub plot: bool,
}

const KEYS: &[&str] = &[
    "experiment",
    "model",
    "d1",
    "d2",
    "n1",
    "n2",
    "k",
    "alpha",
    "k_grid",
    "alpha_grid",
    "n2_grid",
    "trials",
    "seed",
    "ridge",
    "pca",
    "eval_n",
    "noise1",
    "noise2",
    "methods",
    "kernel_ridge",
    "support",
    "y_size",
    "vocab",
    "doc_len",
    "atoms",
    "execution",
    "output_dir",
    "plot",
];

impl ExperimentConfig {
    pub fn defaults(experiment: ExperimentKind) -> Self {
        let base = Self {
            experiment,
            model: DataModel::Mixture,
            d1: 50,
            d2: 40,
            n1: 4000,
            n2: 1000,
            k: 2,
            alpha: 0.0,
            k_grid: vec![2, 4, 8, 16],
            alpha_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            n2_grid: vec![250, 500, 1000, 2000],
            trials: 30,
            seed: 0,
            ridge: 1e-8,
            pca: None,
            eval_n: 10_000,
            noise1: 1.0,
            noise2: 0.5,
            methods: vec![Method::Psi, Method::RawX1],
            kernel_ridge: 1e-3,
            support: 8,
            y_size: 3,
            vocab: 5,
            doc_len: 6,
            atoms: 4,
            execution: Execution::Parallel,
            output_dir: PathBuf::from("out"),
            plot: false,
        };
        match experiment {
            ExperimentKind::MseVsN2 => Self {
                model: DataModel::Gaussian,
                ..base
            },
            ExperimentKind::ExactCiGaussian => Self {
                model: DataModel::Gaussian,
                methods: vec![Method::Psi, Method::PsiStar, Method::RawX1],
                k_grid: vec![1, 2, 4, 8],
                ..base
            },
            ExperimentKind::AceDemo => Self {
                k_grid: vec![1, 2, 3],
                trials: 20,
                ..base
            },
            ExperimentKind::TopicCheck => Self {
                k_grid: vec![1, 2, 3],
                trials: 10,
                ..base
            },
            _ => base,
        }
    }

    /// Builds a config from parsed file entries and CLI overrides
    /// (`overrides` win).
    pub fn resolve(file: &BTreeMap<String, String>, overrides: &BTreeMap<String, String>) -> Result<Self> {
        let experiment = overrides
            .get("experiment")
            .or_else(|| file.get("experiment"))
            .map(|s| s.parse())
            .transpose()?
            .unwrap_or(ExperimentKind::MseVsK);
        let mut cfg = Self::defaults(experiment);
        for (k, v) in file.iter().chain(overrides.iter()) {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "experiment" => self.experiment = v.parse()?,
            "model" => self.model = v.parse()?,
            "d1" => self.d1 = parse(key, v)?,
            "d2" => self.d2 = parse(key, v)?,
            "n1" => self.n1 = parse(key, v)?,
            "n2" => self.n2 = parse(key, v)?,
            "k" => self.k = parse(key, v)?,
            "alpha" => self.alpha = parse(key, v)?,
            "k_grid" => self.k_grid = parse_list(key, v)?,
            "alpha_grid" => self.alpha_grid = parse_list(key, v)?,
            "n2_grid" => self.n2_grid = parse_list(key, v)?,
            "trials" => self.trials = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "ridge" => self.ridge = parse(key, v)?,
            "pca" => {
                self.pca = match v {
                    "" | "none" => None,
                    _ => Some(parse(key, v)?),
                }
            }
            "eval_n" => self.eval_n = parse(key, v)?,
            "noise1" => self.noise1 = parse(key, v)?,
            "noise2" => self.noise2 = parse(key, v)?,
            "methods" => self.methods = parse_list(key, v)?,
            "kernel_ridge" => self.kernel_ridge = parse(key, v)?,
            "support" => self.support = parse(key, v)?,
            "y_size" => self.y_size = parse(key, v)?,
            "vocab" => self.vocab = parse(key, v)?,
            "doc_len" => self.doc_len = parse(key, v)?,
            "atoms" => self.atoms = parse(key, v)?,
            "execution" => {
                self.execution = match v {
                    "parallel" => Execution::Parallel,
                    "sequential" => Execution::Sequential,
                    _ => return Err(Error::Config(format!("execution must be parallel|sequential, got '{v}'"))),
                }
            }
            "output_dir" => self.output_dir = PathBuf::from(v),
            "plot" => self.plot = parse(key, v)?,
            _ => {
                return Err(Error::Config(format!(
                    "unknown key '{key}' (valid keys: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be ≥ 1");
        }
        if self.d1 == 0 || self.d2 == 0 || self.n1 == 0 || self.n2 < 2 || self.eval_n == 0 {
            return bad("dimensions and sample sizes must be positive (n2 ≥ 2)");
        }
        if self.ridge.is_nan() || self.ridge < 0.0 || self.kernel_ridge.is_nan() || self.kernel_ridge < 0.0 {
            return bad("ridge values must be ≥ 0");
        }
        if !(0.0..=1.0).contains(&self.alpha) || self.alpha_grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return bad("alpha values must lie in [0, 1]");
        }
        if !(self.noise1 > 0.0 && self.noise2 > 0.0) {
            return bad("noise scales must be positive");
        }
        if self.methods.is_empty() {
            return bad("methods must be nonempty");
        }
        if self.grid_len() == 0 {
            return bad("grid must be nonempty");
        }
        if self.k_grid.contains(&0) || self.k == 0 {
            return bad("class counts must be ≥ 1");
        }
        if self.n2_grid.iter().any(|&n| n < 2) {
            return bad("n2 grid values must be ≥ 2");
        }
        if let Some(r) = self.pca {
            if r == 0 {
                return bad("pca rank must be ≥ 1");
            }
        }
        match self.experiment {
            ExperimentKind::AceDemo => {
                if self.support < 2 || self.y_size == 0 {
                    return bad("ace-demo needs support ≥ 2 and y_size ≥ 1");
                }
                if self.k_grid.iter().any(|&k| k + 1 > self.support) {
                    return bad("ace-demo k values must satisfy k + 1 ≤ support");
                }
            }
            ExperimentKind::TopicCheck if self.atoms == 0 || !self.doc_len.is_multiple_of(2) || self.doc_len == 0 => {
                return bad("topic-check needs atoms ≥ 1 and an even doc_len");
            }
            _ => {}
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        match self.experiment {
            ExperimentKind::MseVsK | ExperimentKind::ExactCiGaussian | ExperimentKind::AceDemo | ExperimentKind::TopicCheck => {
                self.k_grid.iter().map(|&k| k as f64).collect()
            }
            ExperimentKind::MseVsEps | ExperimentKind::CiReport => self.alpha_grid.clone(),
            ExperimentKind::MseVsN2 => self.n2_grid.iter().map(|&n| n as f64).collect(),
        }
    }

    pub fn grid_len(&self) -> usize {
        self.grid().len()
    }

    /// Resolved configuration as `key = value` lines.
    pub fn to_kv_string(&self) -> String {
        let list = |v: &[String]| v.join(",");
        let rows: Vec<(&str, String)> = vec![
            ("experiment", self.experiment.to_string()),
            ("model", self.model.to_string()),
            ("d1", self.d1.to_string()),
            ("d2", self.d2.to_string()),
            ("n1", self.n1.to_string()),
            ("n2", self.n2.to_string()),
            ("k", self.k.to_string()),
            ("alpha", self.alpha.to_string()),
            ("k_grid", list(&self.k_grid.iter().map(|v| v.to_string()).collect::<Vec<_>>())),
            ("alpha_grid", list(&self.alpha_grid.iter().map(|v| v.to_string()).collect::<Vec<_>>())),
            ("n2_grid", list(&self.n2_grid.iter().map(|v| v.to_string()).collect::<Vec<_>>())),
            ("trials", self.trials.to_string()),
            ("seed", self.seed.to_string()),
            ("ridge", self.ridge.to_string()),
            ("pca", self.pca.map_or("none".to_string(), |r| r.to_string())),
            ("eval_n", self.eval_n.to_string()),
            ("noise1", self.noise1.to_string()),
            ("noise2", self.noise2.to_string()),
            ("methods", list(&self.methods.iter().map(|m| m.name().to_string()).collect::<Vec<_>>())),
            ("kernel_ridge", self.kernel_ridge.to_string()),
            ("support", self.support.to_string()),
            ("y_size", self.y_size.to_string()),
            ("vocab", self.vocab.to_string()),
            ("doc_len", self.doc_len.to_string()),
            ("atoms", self.atoms.to_string()),
        ];
        rows.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("cannot parse value '{v}' for key '{key}'")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        if out.insert(key.to_string(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
        }
    }
    Ok(out)
}
