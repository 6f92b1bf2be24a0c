use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::dataio::{
    generate_synthetic, load_dataset, Dataset, SyntheticConfig, EDGES_FILE, FEATURES_FILE, LABELS_FILE,
};
use crate::model::{EmbeddingMode, Hyperparameters, LossWeighting};
use crate::strategies::{AgeWeights, Strategy, StrategyOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic,
    Files,
}

/// Locations of the three dataset tables. Each path defaults to the
/// standard file name inside `dir`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilesConfig {
    pub dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
}

impl FilesConfig {
    pub fn edges_path(&self) -> PathBuf {
        self.edges.clone().unwrap_or_else(|| self.dir.join(EDGES_FILE))
    }

    pub fn features_path(&self) -> PathBuf {
        self.features.clone().unwrap_or_else(|| self.dir.join(FEATURES_FILE))
    }

    pub fn labels_path(&self) -> PathBuf {
        self.labels.clone().unwrap_or_else(|| self.dir.join(LABELS_FILE))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: DatasetSource,
    /// generator seed for the synthetic source
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub synthetic: SyntheticConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub files: Option<FilesConfig>,
}

/// Observational unit of the significance tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AnovaUnit {
    /// every (bootstrap, day) value is one observation
    #[default]
    BootstrapDay,
    /// one observation per bootstrap: its mean over days
    BootstrapMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// days labeled in full before querying starts
    pub initial_days: usize,
    /// queries per day
    pub k: usize,
    pub strategies: Vec<Strategy>,
    pub bootstraps: usize,
    pub holdout_fraction: f64,
    pub gap_thresholds: Vec<u32>,
    /// gap threshold reported in the CPI versus exertion table
    pub reference_threshold: u32,
    pub rolling_window: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    /// probability cut-off for the thresholded metrics
    pub threshold: f64,
    pub anova_unit: AnovaUnit,
    /// worker threads, 0 for one per core
    pub threads: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            initial_days: 6,
            k: 5,
            strategies: Strategy::ALL.to_vec(),
            bootstraps: 20,
            holdout_fraction: 0.2,
            gap_thresholds: vec![1, 2, 3, 4, 5],
            reference_threshold: 3,
            rolling_window: 5,
            base_seed: 0,
            output_dir: PathBuf::from("results"),
            threshold: 0.5,
            anova_unit: AnovaUnit::BootstrapDay,
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden_dim: usize,
    pub lr: f64,
    pub epochs: usize,
    pub weighting: LossWeighting,
    pub embedding: EmbeddingMode,
}

impl Default for ModelSection {
    fn default() -> Self {
        let h = Hyperparameters::default();
        Self {
            hidden_dim: h.hidden_dim,
            lr: h.lr,
            epochs: h.epochs,
            weighting: h.weighting,
            embedding: EmbeddingMode::default(),
        }
    }
}

impl ModelSection {
    pub fn hyperparameters(&self) -> Hyperparameters {
        Hyperparameters {
            hidden_dim: self.hidden_dim,
            lr: self.lr,
            epochs: self.epochs,
            weighting: self.weighting,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub age: AgeWeights,
}

/// Pool size left after holding out `round(fraction · n)` nodes.
pub fn pool_size_for(node_count: usize, holdout_fraction: f64) -> usize {
    node_count - (holdout_fraction * node_count as f64).round() as usize
}

impl ExperimentConfig {
    /// Config over the default synthetic dataset with every other setting
    /// at its default.
    pub fn synthetic_default() -> Self {
        Self {
            dataset: DatasetConfig {
                source: DatasetSource::Synthetic,
                seed: 0,
                synthetic: SyntheticConfig::default(),
                files: None,
            },
            experiment: ExperimentSection::default(),
            model: ModelSection::default(),
            age: AgeWeights::default(),
        }
    }

    /// Parses a TOML config, or the `config` object of a JSON run manifest
    /// when the file ends in `.json`. Relative paths are resolved against
    /// the file's directory.
    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut config = if path.extension().is_some_and(|e| e == "json") {
            let mut manifest: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
            let inner = manifest
                .get_mut("config")
                .map(serde_json::Value::take)
                .ok_or_else(|| HarnessError::Config(format!("{}: manifest has no 'config' object", path.display())))?;
            serde_json::from_value(inner).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?
        } else {
            Self::from_toml_str(&text).map_err(|e| match e {
                HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
                other => other,
            })?
        };
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(files) = &mut self.dataset.files {
            fix(&mut files.dir);
            for p in [&mut files.edges, &mut files.features, &mut files.labels]
                .into_iter()
                .flatten()
            {
                fix(p);
            }
        }
        fix(&mut self.experiment.output_dir);
    }

    pub fn hyperparameters(&self) -> Hyperparameters {
        self.model.hyperparameters()
    }

    pub fn strategy_options(&self) -> StrategyOptions {
        StrategyOptions {
            age_weights: self.age,
            ..StrategyOptions::default()
        }
    }

    /// Checks that need no data. Dataset-dependent limits are checked by
    /// [`ExperimentConfig::validate_against`].
    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: String| Err(HarnessError::Config(m));
        let e = &self.experiment;
        if e.initial_days < 1 {
            return fail("initial_days must be at least 1".into());
        }
        if e.k < 1 {
            return fail("k must be at least 1".into());
        }
        if e.bootstraps < 1 {
            return fail("bootstraps must be at least 1".into());
        }
        if !(e.holdout_fraction > 0.0 && e.holdout_fraction < 1.0) {
            return fail(format!(
                "holdout_fraction must lie in (0, 1), got {}",
                e.holdout_fraction
            ));
        }
        if e.strategies.is_empty() {
            return fail("strategies must not be empty".into());
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = e.strategies.iter().find(|s| !seen.insert(**s)) {
            return fail(format!("strategy '{dup}' listed twice"));
        }
        if e.gap_thresholds.is_empty() || e.gap_thresholds.contains(&0) {
            return fail("gap_thresholds must be a nonempty list of integers >= 1".into());
        }
        if e.reference_threshold < 1 {
            return fail("reference_threshold must be at least 1".into());
        }
        if e.rolling_window < 1 {
            return fail("rolling_window must be at least 1".into());
        }
        if !(e.threshold > 0.0 && e.threshold < 1.0) {
            return fail(format!("threshold must lie in (0, 1), got {}", e.threshold));
        }
        self.hyperparameters()
            .validate()
            .map_err(|err| HarnessError::Config(err.to_string()))?;
        self.age
            .validate()
            .map_err(|err| HarnessError::Config(err.to_string()))?;
        match self.dataset.source {
            DatasetSource::Synthetic => {
                let s = &self.dataset.synthetic;
                s.validate().map_err(|err| HarnessError::Config(err.to_string()))?;
                self.check_sizes(s.node_count, s.days)
            }
            DatasetSource::Files => {
                if self.dataset.files.is_none() {
                    return fail("dataset source 'files' needs a [dataset.files] section".into());
                }
                Ok(())
            }
        }
    }

    fn check_sizes(&self, node_count: usize, days: usize) -> Result<(), HarnessError> {
        let e = &self.experiment;
        let pool = pool_size_for(node_count, e.holdout_fraction);
        if pool == 0 || pool == node_count {
            return Err(HarnessError::Config(format!(
                "holdout_fraction {} leaves an empty pool or holdout for {node_count} nodes",
                e.holdout_fraction
            )));
        }
        if e.k > pool {
            return Err(HarnessError::Config(format!(
                "k = {} exceeds the query pool size {pool} (k must satisfy 1 <= k <= pool size)",
                e.k
            )));
        }
        if e.initial_days + 2 > days {
            return Err(HarnessError::Config(format!(
                "initial_days + 2 = {} exceeds the {days} available days (need one query day and one next day)",
                e.initial_days + 2
            )));
        }
        Ok(())
    }

    /// Limits that depend on the loaded dataset.
    pub fn validate_against(&self, dataset: &Dataset<f64>) -> Result<(), HarnessError> {
        self.check_sizes(dataset.node_count(), dataset.day_count())
    }

    pub fn load_dataset(&self) -> Result<Dataset<f64>, HarnessError> {
        let ds = match self.dataset.source {
            DatasetSource::Synthetic => generate_synthetic(&self.dataset.synthetic, self.dataset.seed)?,
            DatasetSource::Files => {
                let files = self
                    .dataset
                    .files
                    .as_ref()
                    .ok_or_else(|| HarnessError::Config("missing [dataset.files] section".into()))?;
                load_dataset(&files.edges_path(), &files.features_path(), &files.labels_path())?
            }
        };
        self.validate_against(&ds)?;
        Ok(ds)
    }

    pub fn bootstrap_seed(&self, bootstrap: usize) -> u64 {
        self.experiment.base_seed.wrapping_add(bootstrap as u64)
    }
}
