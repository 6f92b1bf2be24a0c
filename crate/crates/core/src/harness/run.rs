use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::HarnessError;
use crate::burden::QueryLog;
use crate::dataio::{Dataset, Split};
use crate::linalg::Matrix;
use crate::metrics::{EvalSlice, Metric, NodeCategory};
use crate::model::{build_normalized_adjacency, Gcn, LabeledExample, ModelOutput, NodeClassifier, NormalizedAdjacency};
use crate::strategies::{SelectionContext, Strategy, StrategyOptions};

/// One metric value for one evaluation slice; `None` when the metric is
/// undefined there (empty slice, single class, no positives).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub strategy: Strategy,
    pub bootstrap: usize,
    pub day: u32,
    pub category: NodeCategory,
    pub metric: Metric,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapLog {
    pub strategy: Strategy,
    pub bootstrap: usize,
    pub log: QueryLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitFailure {
    pub strategy: Strategy,
    pub bootstrap: usize,
    pub day: Option<u32>,
    pub message: String,
}

/// Count of holdout-isolation checks made during a run and every breach
/// found.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsolationAudit {
    pub checked_queries: usize,
    pub checked_labels: usize,
    pub violations: Vec<String>,
}

impl IsolationAudit {
    fn merge(&mut self, other: IsolationAudit) {
        self.checked_queries += other.checked_queries;
        self.checked_labels += other.checked_labels;
        self.violations.extend(other.violations);
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub dataset_name: String,
    pub node_count: usize,
    pub day_count: usize,
    pub records: Vec<MetricRecord>,
    pub logs: Vec<BootstrapLog>,
    pub failures: Vec<UnitFailure>,
    pub audit: IsolationAudit,
}

struct Shared<'a> {
    config: &'a ExperimentConfig,
    dataset: &'a Dataset<f64>,
    adj: NormalizedAdjacency<f64>,
    options: StrategyOptions,
}

struct UnitOutput {
    records: Vec<MetricRecord>,
    log: QueryLog,
    audit: IsolationAudit,
}

fn day_seed(bootstrap_seed: u64, day: usize) -> u64 {
    bootstrap_seed ^ (day as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs every configured (strategy, bootstrap) pair on `dataset`. Units run
/// in parallel and are merged in (strategy, bootstrap) order, so the result
/// does not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig, dataset: &Dataset<f64>) -> Result<RunResult, HarnessError> {
    config.validate()?;
    config.validate_against(dataset)?;
    let shared = Shared {
        config,
        dataset,
        adj: build_normalized_adjacency(&dataset.graph),
        options: config.strategy_options(),
    };
    let units: Vec<(Strategy, usize)> = config
        .experiment
        .strategies
        .iter()
        .flat_map(|&s| (0..config.experiment.bootstraps).map(move |b| (s, b)))
        .collect();
    let started = Instant::now();
    let work = || -> Vec<Result<UnitOutput, UnitFailure>> {
        units.par_iter().map(|&(s, b)| run_unit(&shared, s, b)).collect()
    };
    let outputs = if config.experiment.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.experiment.threads)
            .build()
            .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?
            .install(work)
    } else {
        work()
    };
    log::info!("{} units finished in {:.1?}", units.len(), started.elapsed());

    let mut result = RunResult {
        config: config.clone(),
        dataset_name: dataset.name.clone(),
        node_count: dataset.node_count(),
        day_count: dataset.day_count(),
        records: Vec::new(),
        logs: Vec::new(),
        failures: Vec::new(),
        audit: IsolationAudit::default(),
    };
    for (&(strategy, bootstrap), out) in units.iter().zip(outputs) {
        match out {
            Ok(out) => {
                result.records.extend(out.records);
                result.logs.push(BootstrapLog {
                    strategy,
                    bootstrap,
                    log: out.log,
                });
                result.audit.merge(out.audit);
            }
            Err(failure) => {
                log::warn!(
                    "{strategy} bootstrap {bootstrap} failed at day {:?}: {}",
                    failure.day,
                    failure.message
                );
                result.failures.push(failure);
            }
        }
    }
    Ok(result)
}

fn examples<'a>(dataset: &'a Dataset<f64>, buffer: &[(usize, Vec<usize>)]) -> Vec<LabeledExample<'a, f64>> {
    buffer
        .iter()
        .map(|(d, mask)| LabeledExample {
            features: &dataset.days[*d].features,
            labels: &dataset.days[*d].labels,
            mask: mask.clone(),
        })
        .collect()
}

fn run_unit(shared: &Shared<'_>, strategy: Strategy, bootstrap: usize) -> Result<UnitOutput, UnitFailure> {
    let cfg = shared.config;
    let ds = shared.dataset;
    let fail = |day: Option<u32>, message: String| UnitFailure {
        strategy,
        bootstrap,
        day,
        message,
    };
    let seed = cfg.bootstrap_seed(bootstrap);
    let split =
        Split::random(ds.node_count(), cfg.experiment.holdout_fraction, seed).map_err(|e| fail(None, e.to_string()))?;
    let mut in_holdout = vec![false; ds.node_count()];
    for &v in &split.holdout {
        in_holdout[v] = true;
    }
    let mut audit = IsolationAudit::default();
    let check_labels = |day: u32, mask: &[usize], audit: &mut IsolationAudit| {
        audit.checked_labels += mask.len();
        for &v in mask.iter().filter(|&&v| in_holdout[v]) {
            audit.violations.push(format!(
                "{strategy} bootstrap {bootstrap} day {day}: holdout node {v} labeled"
            ));
        }
    };

    let labeled = |d: usize, nodes: &[usize]| -> Vec<usize> {
        nodes
            .iter()
            .copied()
            .filter(|&v| ds.days[d].labels[v].is_some())
            .collect()
    };
    let mut buffer: Vec<(usize, Vec<usize>)> = Vec::new();
    for d in 0..cfg.experiment.initial_days {
        let mask = labeled(d, &split.pool);
        check_labels(ds.days[d].day_index, &mask, &mut audit);
        if !mask.is_empty() {
            buffer.push((d, mask));
        }
    }
    let mut model = Gcn::new(cfg.hyperparameters(), seed);
    model
        .fit(&shared.adj, &examples(ds, &buffer))
        .map_err(|e| fail(None, format!("initial training: {e}")))?;

    let mut log = QueryLog::new(split.pool.clone());
    let mut records = Vec::new();
    let predict = |model: &Gcn<f64>, d: usize| -> Result<ModelOutput<f64>, String> {
        model
            .predict(&shared.adj, &ds.days[d].features)
            .map_err(|e| e.to_string())
    };

    for t in cfg.experiment.initial_days..ds.day_count() - 1 {
        let day = ds.days[t].day_index;
        let at = |m: String| fail(Some(day), m);
        let current = predict(&model, t).map_err(at)?;
        let embeddings: Matrix<f64> = if strategy.wants_raw_features() {
            ds.days[t].features.clone()
        } else {
            model
                .embed(cfg.model.embedding, &shared.adj, &ds.days[t].features)
                .map_err(|e| at(e.to_string()))?
        };
        let ctx = SelectionContext {
            graph: &ds.graph,
            adj: &shared.adj,
            embeddings: &embeddings,
            probabilities: &current.probabilities,
            pool: &split.pool,
            history: &log,
            k: cfg.experiment.k,
            rng_seed: day_seed(seed, t),
        };
        let chosen = strategy
            .select(&ctx, &shared.options)
            .map_err(|e| at(e.to_string()))?
            .chosen;

        audit.checked_queries += chosen.len();
        for &v in chosen.iter().filter(|&&v| in_holdout[v]) {
            audit.violations.push(format!(
                "{strategy} bootstrap {bootstrap} day {day}: holdout node {v} queried"
            ));
        }
        log.record_all(&chosen, day).map_err(|e| at(e.to_string()))?;

        if !chosen.is_empty() {
            let mask = labeled(t, &chosen);
            check_labels(day, &mask, &mut audit);
            if !mask.is_empty() {
                buffer.push((t, mask));
                model
                    .fit(&shared.adj, &examples(ds, &buffer))
                    .map_err(|e| at(format!("retraining: {e}")))?;
            }
        }

        let same_day = predict(&model, t).map_err(at)?;
        let next_day = predict(&model, t + 1).map_err(at)?;
        let mut is_chosen = vec![false; ds.node_count()];
        for &v in &chosen {
            is_chosen[v] = true;
        }
        let unqueried: Vec<usize> = split.pool.iter().copied().filter(|&v| !is_chosen[v]).collect();
        let mut slices = vec![
            (NodeCategory::TestSetSameDay, t, &split.holdout, &same_day),
            (NodeCategory::UnqueriedSameDay, t, &unqueried, &same_day),
            (NodeCategory::UnqueriedNextDay, t + 1, &unqueried, &next_day),
        ];
        if strategy != Strategy::NoAl {
            slices.push((NodeCategory::TrainNextDay, t + 1, &chosen, &next_day));
        }
        for (category, d, nodes, output) in slices {
            let slice = eval_slice(ds, category, d, nodes, output);
            for metric in Metric::ALL {
                let value = slice
                    .as_ref()
                    .and_then(|s| metric.evaluate(s, cfg.experiment.threshold).ok());
                records.push(MetricRecord {
                    strategy,
                    bootstrap,
                    day,
                    category,
                    metric,
                    value,
                });
            }
        }
    }
    log::debug!("{strategy} bootstrap {bootstrap} done");
    Ok(UnitOutput { records, log, audit })
}

/// Slice over `nodes` on day position `d`, skipping nodes without a label;
/// `None` when nothing is left.
fn eval_slice(
    ds: &Dataset<f64>,
    category: NodeCategory,
    d: usize,
    nodes: &[usize],
    output: &ModelOutput<f64>,
) -> Option<EvalSlice<f64>> {
    let (truth, scores): (Vec<bool>, Vec<f64>) = nodes
        .iter()
        .filter_map(|&v| ds.days[d].labels[v].map(|l| (l, output.positive_probability(v))))
        .unzip();
    EvalSlice::new(category, ds.days[d].day_index, truth, scores).ok()
}
