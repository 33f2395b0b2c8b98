//! Experiment configuration, read from a sectioned `key = value` file (TOML).
//!
//! ```toml
//! output_dir = "runs/synthlt50"
//!
//! [dataset]
//! classes = 50
//! n_max = 500
//! n_min = 5
//! image_size = 12
//! noise_sd = 0.25
//! test_per_class = 40
//! t_many = 100
//! t_low = 20
//! seed = 7                    # or: train_path = "...", test_path = "..."
//!
//! [model]
//! feature_dim = 64
//! hidden_dim = 64
//!
//! [train]
//! strategy = "cbs_rrs_ss"
//! iterations = 4000
//! batch_size = 64
//! per_class_draw = 4
//! lambda = [0.5, 1.0, 1.0]
//! lr0 = 0.1
//! momentum = 0.9
//! weight_decay = 0.005
//! seed = 0
//!
//! [sweep]
//! strategies = ["rrs_only", "cbs_only", "cbs_rrs"]
//! lambdas = [[0.5, 1.0, 1.0]]
//! seeds = [0, 1, 2, 3, 4]
//! ```
//!
//! Every key except `output_dir` has a default; unknown keys are rejected.

use std::path::{Path, PathBuf};

use ltlab_core::model::LossWeights;
use ltlab_core::train::{Strategy, TrainConfig};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: cannot read config: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Syntax {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: field `{field}`: {message}")]
    Field {
        path: PathBuf,
        field: String,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub classes: usize,
    pub n_max: u32,
    pub n_min: u32,
    pub image_size: usize,
    pub noise_sd: f64,
    pub test_per_class: u32,
    pub t_many: u32,
    pub t_low: u32,
    pub seed: u64,
    /// Pre-built training set; overrides generation when set.
    pub train_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            classes: 50,
            n_max: 500,
            n_min: 5,
            image_size: 12,
            noise_sd: 0.25,
            test_per_class: 40,
            t_many: 100,
            t_low: 20,
            seed: 7,
            train_path: None,
            test_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub feature_dim: usize,
    pub hidden_dim: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            feature_dim: t.feature_dim,
            hidden_dim: t.hidden_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub strategy: String,
    pub iterations: usize,
    pub batch_size: usize,
    pub per_class_draw: usize,
    pub lambda: [f64; 3],
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub eval_every: usize,
    pub stage1_fraction: f64,
    pub stage2_lr_fraction: f64,
    /// Trailing window of the group loss curves.
    pub loss_window: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            strategy: t.strategy.name().into(),
            iterations: t.iterations,
            batch_size: t.batch_size,
            per_class_draw: t.per_class_draw,
            lambda: [t.weights.lambda1, t.weights.lambda2, t.weights.lambda3],
            lr0: t.lr0,
            momentum: t.momentum,
            weight_decay: t.weight_decay,
            seed: t.seed,
            eval_every: t.eval_every,
            stage1_fraction: t.stage1_fraction,
            stage2_lr_fraction: t.stage2_lr_fraction,
            loss_window: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub strategies: Vec<String>,
    pub lambdas: Vec<[f64; 3]>,
    pub seeds: Vec<u64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            strategies: Strategy::ALL.iter().map(|s| s.name().to_owned()).collect(),
            lambdas: vec![TrainSection::default().lambda],
            seeds: vec![0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    output_dir: PathBuf,
    #[serde(default)]
    dataset: DatasetSection,
    #[serde(default)]
    model: ModelSection,
    #[serde(default)]
    train: TrainSection,
    #[serde(default)]
    sweep: SweepSection,
}

/// A parsed and validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub dataset: DatasetSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub sweep: SweepSection,
    /// Strategy of the `train` verb.
    pub strategy: Strategy,
    pub sweep_strategies: Vec<Strategy>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        let mut cfg = Self::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.dataset.train_path, &mut cfg.dataset.test_path].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        for (field, p) in [
            ("dataset.train_path", &cfg.dataset.train_path),
            ("dataset.test_path", &cfg.dataset.test_path),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(ConfigError::Field {
                        path: path.to_owned(),
                        field: field.into(),
                        message: format!("{} does not exist", p.display()),
                    });
                }
            }
        }
        Ok(cfg)
    }

    /// Parses `text`; `path` is used only in messages.
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            ConfigError::Syntax {
                path: path.to_owned(),
                line,
                column,
                message: e.message().to_owned(),
            }
        })?;
        let field = |field: &str, message: String| ConfigError::Field {
            path: path.to_owned(),
            field: field.into(),
            message,
        };
        let strategy = Strategy::from_name(&raw.train.strategy)
            .ok_or_else(|| field("train.strategy", format!("unknown strategy {:?}", raw.train.strategy)))?;
        let sweep_strategies = raw
            .sweep
            .strategies
            .iter()
            .map(|s| Strategy::from_name(s).ok_or_else(|| field("sweep.strategies", format!("unknown strategy {s:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if raw.sweep.lambdas.is_empty() {
            return Err(field("sweep.lambdas", "needs at least one ratio".into()));
        }
        if raw.sweep.seeds.is_empty() {
            return Err(field("sweep.seeds", "needs at least one seed".into()));
        }
        if raw.train.loss_window == 0 {
            return Err(field("train.loss_window", "must be positive".into()));
        }
        if raw.dataset.train_path.is_some() != raw.dataset.test_path.is_some() {
            return Err(field(
                "dataset.train_path",
                "train_path and test_path must be given together".into(),
            ));
        }
        if raw.dataset.test_per_class == 0 {
            return Err(field("dataset.test_per_class", "must be positive".into()));
        }
        let cfg = Self {
            output_dir: raw.output_dir,
            dataset: raw.dataset,
            model: raw.model,
            train: raw.train,
            sweep: raw.sweep,
            strategy,
            sweep_strategies,
        };
        let check = |name: &str, tc: TrainConfig| {
            tc.validate().map_err(|e| {
                let f = match &e {
                    ltlab_core::Error::InvalidConfig(m) if m.contains("divide") => "train.per_class_draw",
                    ltlab_core::Error::InvalidWeights(_) => name,
                    _ => "train",
                };
                field(f, e.to_string())
            })
        };
        check("train.lambda", cfg.train_config(strategy, cfg.train.lambda, cfg.train.seed))?;
        for &s in &cfg.sweep_strategies {
            for &l in &cfg.sweep.lambdas {
                check("sweep.lambdas", cfg.train_config(s, l, cfg.train.seed))?;
            }
        }
        Ok(cfg)
    }

    pub fn train_config(&self, strategy: Strategy, lambda: [f64; 3], seed: u64) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            strategy,
            iterations: t.iterations,
            batch_size: t.batch_size,
            per_class_draw: t.per_class_draw,
            weights: LossWeights {
                lambda1: lambda[0],
                lambda2: lambda[1],
                lambda3: lambda[2],
            },
            lr0: t.lr0,
            momentum: t.momentum,
            weight_decay: t.weight_decay,
            seed,
            eval_every: t.eval_every,
            stage1_fraction: t.stage1_fraction,
            stage2_lr_fraction: t.stage2_lr_fraction,
            hidden_dim: self.model.hidden_dim,
            feature_dim: self.model.feature_dim,
        }
    }
}
