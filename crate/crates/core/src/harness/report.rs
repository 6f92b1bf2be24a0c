use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::{AnovaUnit, ExperimentConfig};
use super::run::{BootstrapLog, IsolationAudit, MetricRecord, RunResult, UnitFailure};
use super::HarnessError;
use crate::burden::{
    centrality_values_burden_correlation, mean_normalized_centrality, over_exertion, BurdenQuantity, BurdenReport,
    QueryLog,
};
use crate::dataio::Split;
use crate::graph::{compute_centrality, CentralityMetric, Graph};
use crate::metrics::{cpi, rolling_mean_std, Metric, NodeCategory, PerformanceSeries};
use crate::stats::{anova_oneway, kruskal_wallis, CorrelationMethod, SampleGroups};
use crate::strategies::Strategy;

pub const DAILY_FILE: &str = "daily.csv";
pub const QUERIES_FILE: &str = "queries.csv";
pub const MANIFEST_FILE: &str = "run_manifest.json";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const ROLLING_FILE: &str = "rolling.csv";
pub const BURDEN_FILE: &str = "burden.csv";
pub const TRADEOFF_FILE: &str = "tradeoff.csv";
pub const CENTRALITY_HEATMAP_FILE: &str = "centrality_heatmap.csv";
pub const CENTRALITY_CORRELATION_FILE: &str = "centrality_correlation.csv";
pub const SIGNIFICANCE_FILE: &str = "significance.csv";

/// Files rebuilt by [`recompute_reports`] from the daily records and
/// query logs.
pub const DERIVED_FILES: [&str; 7] = [
    AGGREGATE_FILE,
    ROLLING_FILE,
    BURDEN_FILE,
    TRADEOFF_FILE,
    CENTRALITY_HEATMAP_FILE,
    CENTRALITY_CORRELATION_FILE,
    SIGNIFICANCE_FILE,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub node_count: usize,
    pub day_count: usize,
    pub edge_count: usize,
}

/// Everything needed to reproduce a run. `generated_unix_seconds` is the
/// only field that changes between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub generated_unix_seconds: u64,
    pub config: ExperimentConfig,
    pub bootstrap_seeds: Vec<u64>,
    pub dataset: DatasetInfo,
    pub failures: Vec<UnitFailure>,
    pub audit: IsolationAudit,
}

/// Across-bootstrap summary of one (strategy, category, metric) cell. The
/// per-bootstrap value is the mean over defined days; the CPI is taken per
/// bootstrap and is undefined when any day is.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub strategy: Strategy,
    pub category: NodeCategory,
    pub metric: Metric,
    pub bootstraps: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub cpi_bootstraps: usize,
    pub cpi_mean: Option<f64>,
    pub cpi_std: Option<f64>,
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (Some(mean), Some(var.sqrt()))
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

type Cell = (Strategy, NodeCategory, Metric);

/// bootstrap → ordered (day, value) per cell, in record order.
fn group_records(records: &[MetricRecord]) -> HashMap<Cell, BTreeMap<usize, Vec<(u32, Option<f64>)>>> {
    let mut cells: HashMap<Cell, BTreeMap<usize, Vec<(u32, Option<f64>)>>> = HashMap::new();
    for r in records {
        cells
            .entry((r.strategy, r.category, r.metric))
            .or_default()
            .entry(r.bootstrap)
            .or_default()
            .push((r.day, r.value));
    }
    for per_boot in cells.values_mut() {
        for days in per_boot.values_mut() {
            days.sort_by_key(|&(d, _)| d);
        }
    }
    cells
}

fn cells_in_order(strategies: &[Strategy]) -> impl Iterator<Item = Cell> + '_ {
    strategies.iter().flat_map(|&s| {
        NodeCategory::ALL
            .into_iter()
            .flat_map(move |c| Metric::ALL.into_iter().map(move |m| (s, c, m)))
    })
}

/// One row per (strategy, category, metric), strategies in the given order.
/// Cells without records (the `train_next_day` slice of `no_al`) get empty
/// values.
pub fn aggregate(records: &[MetricRecord], strategies: &[Strategy]) -> Vec<AggregateRow> {
    let cells = group_records(records);
    let empty = BTreeMap::new();
    cells_in_order(strategies)
        .map(|(strategy, category, metric)| {
            let per_boot = cells.get(&(strategy, category, metric)).unwrap_or(&empty);
            let mut means = Vec::new();
            let mut cpis = Vec::new();
            for days in per_boot.values() {
                let defined: Vec<f64> = days.iter().filter_map(|&(_, v)| v).collect();
                if !defined.is_empty() {
                    means.push(defined.iter().sum::<f64>() / defined.len() as f64);
                }
                if defined.len() == days.len() {
                    let pts: Vec<(u32, f64)> = days.iter().map(|&(d, v)| (d, v.unwrap_or_default())).collect();
                    if let Some(c) = PerformanceSeries::new(metric.name(), pts)
                        .ok()
                        .and_then(|s| cpi(&s).ok())
                    {
                        cpis.push(c);
                    }
                }
            }
            let (mean, std) = mean_std(&means);
            let (cpi_mean, cpi_std) = mean_std(&cpis);
            AggregateRow {
                strategy,
                category,
                metric,
                bootstraps: means.len(),
                mean,
                std,
                cpi_bootstraps: cpis.len(),
                cpi_mean,
                cpi_std,
            }
        })
        .collect()
}

struct Csv {
    path: std::path::PathBuf,
    writer: csv::Writer<fs::File>,
}

impl Csv {
    fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self, HarnessError> {
        let path = dir.join(name);
        let writer = csv::Writer::from_path(&path).map_err(|e| HarnessError::io(&path, e))?;
        let mut out = Self { path, writer };
        out.row(header.iter().copied())?;
        Ok(out)
    }

    fn row<I, S>(&mut self, fields: I) -> Result<(), HarnessError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .map_err(|e| HarnessError::io(&self.path, e))
    }

    fn finish(mut self) -> Result<(), HarnessError> {
        self.writer.flush().map_err(|e| HarnessError::io(&self.path, e))
    }
}

/// Creates `dir` and proves it writable, so a bad output directory fails
/// before any simulation work.
pub fn ensure_writable(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let probe = dir.join(".write_probe");
    fs::write(&probe, b"").map_err(|e| HarnessError::io(dir, e))?;
    fs::remove_file(&probe).map_err(|e| HarnessError::io(&probe, e))
}

/// Writes the raw tables, the manifest and every derived report.
pub fn emit_reports(result: &RunResult, graph: &Graph, dir: &Path) -> Result<(), HarnessError> {
    ensure_writable(dir)?;
    let mut daily = Csv::create(
        dir,
        DAILY_FILE,
        &["strategy", "bootstrap", "day", "category", "metric", "value"],
    )?;
    for r in &result.records {
        daily.row([
            r.strategy.name().to_owned(),
            r.bootstrap.to_string(),
            r.day.to_string(),
            r.category.name().to_owned(),
            r.metric.name().to_owned(),
            fmt(r.value),
        ])?;
    }
    daily.finish()?;

    let mut queries = Csv::create(dir, QUERIES_FILE, &["strategy", "bootstrap", "day", "node"])?;
    for b in &result.logs {
        let mut entries: Vec<(u32, usize)> = b
            .log
            .iter()
            .flat_map(|(v, days)| days.iter().map(move |&d| (d, v)))
            .collect();
        entries.sort_unstable();
        for (d, v) in entries {
            queries.row([
                b.strategy.name().to_owned(),
                b.bootstrap.to_string(),
                d.to_string(),
                v.to_string(),
            ])?;
        }
    }
    queries.finish()?;

    let config = &result.config;
    let manifest = RunManifest {
        generated_unix_seconds: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        config: config.clone(),
        bootstrap_seeds: (0..config.experiment.bootstraps)
            .map(|b| config.bootstrap_seed(b))
            .collect(),
        dataset: DatasetInfo {
            name: result.dataset_name.clone(),
            node_count: result.node_count,
            day_count: result.day_count,
            edge_count: graph.edge_count(),
        },
        failures: result.failures.clone(),
        audit: result.audit.clone(),
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| HarnessError::Report(e.to_string()))?;
    fs::write(&path, json + "\n").map_err(|e| HarnessError::io(&path, e))?;

    write_derived(config, graph, &result.records, &result.logs, dir)
}

fn parse<T: std::str::FromStr>(path: &Path, line: u64, field: &str) -> Result<T, HarnessError>
where
    T::Err: std::fmt::Display,
{
    field
        .parse()
        .map_err(|e| HarnessError::Report(format!("{}:{line}: bad field '{field}': {e}", path.display())))
}

fn read_rows(path: &Path, columns: usize) -> Result<Vec<(u64, csv::StringRecord)>, HarnessError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| HarnessError::io(path, e))?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| HarnessError::Report(format!("{}: {e}", path.display())))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != columns {
            return Err(HarnessError::Report(format!(
                "{}:{line}: expected {columns} fields, found {}",
                path.display(),
                rec.len()
            )));
        }
        rows.push((line, rec));
    }
    Ok(rows)
}

/// Loads a `daily.csv` written by [`emit_reports`].
pub fn read_daily(path: &Path) -> Result<Vec<MetricRecord>, HarnessError> {
    read_rows(path, 6)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(MetricRecord {
                strategy: parse(path, line, &rec[0])?,
                bootstrap: parse(path, line, &rec[1])?,
                day: parse(path, line, &rec[2])?,
                category: parse(path, line, &rec[3])?,
                metric: parse(path, line, &rec[4])?,
                value: if rec[5].is_empty() {
                    None
                } else {
                    Some(parse(path, line, &rec[5])?)
                },
            })
        })
        .collect()
}

/// Rebuilds query logs from `queries.csv`. Every configured unit not listed
/// in `failures` gets a log, so units with no queries survive the round
/// trip. Pools are redrawn from the bootstrap seeds.
pub fn read_queries(
    path: &Path,
    config: &ExperimentConfig,
    node_count: usize,
    failures: &[UnitFailure],
) -> Result<Vec<BootstrapLog>, HarnessError> {
    let mut logs = Vec::new();
    let mut index = HashMap::new();
    for &strategy in &config.experiment.strategies {
        for bootstrap in 0..config.experiment.bootstraps {
            if failures
                .iter()
                .any(|f| f.strategy == strategy && f.bootstrap == bootstrap)
            {
                continue;
            }
            let split = Split::random(
                node_count,
                config.experiment.holdout_fraction,
                config.bootstrap_seed(bootstrap),
            )?;
            index.insert((strategy, bootstrap), logs.len());
            logs.push(BootstrapLog {
                strategy,
                bootstrap,
                log: QueryLog::new(split.pool),
            });
        }
    }
    for (line, rec) in read_rows(path, 4)? {
        let strategy: Strategy = parse(path, line, &rec[0])?;
        let bootstrap: usize = parse(path, line, &rec[1])?;
        let day: u32 = parse(path, line, &rec[2])?;
        let node: usize = parse(path, line, &rec[3])?;
        let i = *index.get(&(strategy, bootstrap)).ok_or_else(|| {
            HarnessError::Report(format!(
                "{}:{line}: unit {strategy}/{bootstrap} is not part of the run",
                path.display()
            ))
        })?;
        logs[i]
            .log
            .record(node, day)
            .map_err(|e| HarnessError::Report(format!("{}:{line}: {e}", path.display())))?;
    }
    Ok(logs)
}

/// Rebuilds every derived report in `dir` from `daily.csv`, `queries.csv`
/// and the manifest.
pub fn recompute_reports(dir: &Path) -> Result<(), HarnessError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| HarnessError::Report(format!("{}: {e}", path.display())))?;
    let dataset = manifest.config.load_dataset()?;
    let records = read_daily(&dir.join(DAILY_FILE))?;
    let logs = read_queries(
        &dir.join(QUERIES_FILE),
        &manifest.config,
        dataset.node_count(),
        &manifest.failures,
    )?;
    write_derived(&manifest.config, &dataset.graph, &records, &logs, dir)
}

fn write_derived(
    config: &ExperimentConfig,
    graph: &Graph,
    records: &[MetricRecord],
    logs: &[BootstrapLog],
    dir: &Path,
) -> Result<(), HarnessError> {
    let strategies = &config.experiment.strategies;
    let agg = aggregate(records, strategies);
    write_aggregate(dir, &agg)?;
    write_rolling(dir, records, strategies, config.experiment.rolling_window)?;
    write_burden(dir, logs, strategies, &config.experiment.gap_thresholds)?;
    write_tradeoff(dir, &agg, logs, strategies, config.experiment.reference_threshold)?;
    write_heatmap(dir, graph, logs, strategies)?;
    write_correlations(dir, graph, logs, strategies)?;
    write_significance(dir, records, strategies, config.experiment.anova_unit)
}

fn write_aggregate(dir: &Path, rows: &[AggregateRow]) -> Result<(), HarnessError> {
    let mut out = Csv::create(
        dir,
        AGGREGATE_FILE,
        &[
            "strategy",
            "category",
            "metric",
            "bootstraps",
            "mean",
            "std",
            "cpi_bootstraps",
            "cpi_mean",
            "cpi_std",
        ],
    )?;
    for r in rows {
        out.row([
            r.strategy.name().to_owned(),
            r.category.name().to_owned(),
            r.metric.name().to_owned(),
            r.bootstraps.to_string(),
            fmt(r.mean),
            fmt(r.std),
            r.cpi_bootstraps.to_string(),
            fmt(r.cpi_mean),
            fmt(r.cpi_std),
        ])?;
    }
    out.finish()
}

fn write_rolling(
    dir: &Path,
    records: &[MetricRecord],
    strategies: &[Strategy],
    window: usize,
) -> Result<(), HarnessError> {
    let mut out = Csv::create(
        dir,
        ROLLING_FILE,
        &[
            "strategy",
            "category",
            "metric",
            "day",
            "mean",
            "rolling_mean",
            "rolling_std",
        ],
    )?;
    let cells = group_records(records);
    for cell in cells_in_order(strategies) {
        let Some(per_boot) = cells.get(&cell) else { continue };
        let mut by_day: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for days in per_boot.values() {
            for &(d, v) in days {
                if let Some(v) = v {
                    by_day.entry(d).or_default().push(v);
                }
            }
        }
        if by_day.is_empty() {
            continue;
        }
        let pts: Vec<(u32, f64)> = by_day
            .iter()
            .map(|(&d, vs)| (d, vs.iter().sum::<f64>() / vs.len() as f64))
            .collect();
        let series =
            PerformanceSeries::new(cell.2.name(), pts.clone()).map_err(|e| HarnessError::Report(e.to_string()))?;
        let (means, stds) = rolling_mean_std(&series, window).map_err(|e| HarnessError::Report(e.to_string()))?;
        for (((d, m), (_, rm)), (_, rs)) in pts.iter().zip(means.points()).zip(stds.points()) {
            out.row([
                cell.0.name().to_owned(),
                cell.1.name().to_owned(),
                cell.2.name().to_owned(),
                d.to_string(),
                m.to_string(),
                rm.to_string(),
                rs.to_string(),
            ])?;
        }
    }
    out.finish()
}

fn logs_of<'a>(logs: &'a [BootstrapLog], strategy: Strategy) -> impl Iterator<Item = &'a QueryLog> + 'a {
    logs.iter().filter(move |b| b.strategy == strategy).map(|b| &b.log)
}

fn stat_row(strategy: Strategy, measure: &str, threshold: Option<u32>, values: &[f64]) -> [String; 6] {
    let (mean, std) = mean_std(values);
    [
        strategy.name().to_owned(),
        measure.to_owned(),
        threshold.map(|t| t.to_string()).unwrap_or_default(),
        values.len().to_string(),
        fmt(mean),
        fmt(std),
    ]
}

fn write_burden(
    dir: &Path,
    logs: &[BootstrapLog],
    strategies: &[Strategy],
    thresholds: &[u32],
) -> Result<(), HarnessError> {
    let mut out = Csv::create(
        dir,
        BURDEN_FILE,
        &["strategy", "measure", "threshold", "bootstraps", "mean", "std"],
    )?;
    for &s in strategies {
        let reports: Vec<BurdenReport<f64>> = logs_of(logs, s).map(|l| BurdenReport::compute(l, thresholds)).collect();
        let collect =
            |f: &dyn Fn(&BurdenReport<f64>) -> Option<f64>| -> Vec<f64> { reports.iter().filter_map(f).collect() };
        out.row(stat_row(s, "sampling_entropy", None, &collect(&|r| r.sampling_entropy)))?;
        out.row(stat_row(
            s,
            "coverage_ratio",
            None,
            &collect(&|r| Some(r.coverage_ratio)),
        ))?;
        out.row(stat_row(s, "average_time_gap", None, &collect(&|r| r.average_time_gap)))?;
        for (i, &k) in thresholds.iter().enumerate() {
            out.row(stat_row(
                s,
                "within_gap_pct",
                Some(k),
                &collect(&|r| r.within_gap_pct[i].1),
            ))?;
        }
        for (i, &k) in thresholds.iter().enumerate() {
            out.row(stat_row(
                s,
                "over_exertion",
                Some(k),
                &collect(&|r| r.over_exertion[i].1),
            ))?;
        }
    }
    out.finish()
}

fn write_tradeoff(
    dir: &Path,
    agg: &[AggregateRow],
    logs: &[BootstrapLog],
    strategies: &[Strategy],
    reference: u32,
) -> Result<(), HarnessError> {
    let mut out = Csv::create(
        dir,
        TRADEOFF_FILE,
        &[
            "strategy",
            "cpi_mean",
            "cpi_std",
            "threshold",
            "over_exertion_mean",
            "over_exertion_std",
        ],
    )?;
    for &s in strategies {
        let row = agg
            .iter()
            .find(|r| r.strategy == s && r.category == NodeCategory::TestSetSameDay && r.metric == Metric::Accuracy);
        let exertion: Vec<f64> = logs_of(logs, s)
            .filter_map(|l| over_exertion(l, reference).ok())
            .collect();
        let (em, es) = mean_std(&exertion);
        out.row([
            s.name().to_owned(),
            fmt(row.and_then(|r| r.cpi_mean)),
            fmt(row.and_then(|r| r.cpi_std)),
            reference.to_string(),
            fmt(em),
            fmt(es),
        ])?;
    }
    out.finish()
}

fn write_heatmap(
    dir: &Path,
    graph: &Graph,
    logs: &[BootstrapLog],
    strategies: &[Strategy],
) -> Result<(), HarnessError> {
    let mut header = vec!["strategy"];
    header.extend(CentralityMetric::ALL.iter().map(|m| m.name()));
    let mut out = Csv::create(dir, CENTRALITY_HEATMAP_FILE, &header)?;
    let named: Vec<(String, QueryLog)> = logs
        .iter()
        .map(|b| (b.strategy.name().to_owned(), b.log.clone()))
        .collect();
    let rows = mean_normalized_centrality::<f64>(&named, graph, &CentralityMetric::ALL)
        .map_err(|e| HarnessError::Report(e.to_string()))?;
    for &s in strategies {
        let mut fields = vec![s.name().to_owned()];
        for j in 0..CentralityMetric::ALL.len() {
            let values: Vec<f64> = rows
                .iter()
                .filter(|(name, _)| name == s.name())
                .filter_map(|(_, row)| row[j])
                .collect();
            fields.push(fmt(mean_std(&values).0));
        }
        out.row(fields)?;
    }
    out.finish()
}

fn write_correlations(
    dir: &Path,
    graph: &Graph,
    logs: &[BootstrapLog],
    strategies: &[Strategy],
) -> Result<(), HarnessError> {
    let mut out = Csv::create(
        dir,
        CENTRALITY_CORRELATION_FILE,
        &[
            "strategy",
            "centrality",
            "quantity",
            "method",
            "bootstraps",
            "mean",
            "std",
        ],
    )?;
    let centralities = CentralityMetric::ALL
        .iter()
        .map(|&m| compute_centrality::<f64>(graph, m).map(|c| (m, c.values)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| HarnessError::Report(e.to_string()))?;
    for &s in strategies {
        for (metric, values) in &centralities {
            for quantity in BurdenQuantity::ALL {
                for (method, name) in [
                    (CorrelationMethod::Pearson, "pearson"),
                    (CorrelationMethod::Spearman, "spearman"),
                ] {
                    let rs: Vec<f64> = logs_of(logs, s)
                        .filter_map(|l| centrality_values_burden_correlation(l, values, quantity, method).ok())
                        .collect();
                    let (mean, std) = mean_std(&rs);
                    out.row([
                        s.name().to_owned(),
                        metric.name().to_owned(),
                        quantity.name().to_owned(),
                        name.to_owned(),
                        rs.len().to_string(),
                        fmt(mean),
                        fmt(std),
                    ])?;
                }
            }
        }
    }
    out.finish()
}

fn write_significance(
    dir: &Path,
    records: &[MetricRecord],
    strategies: &[Strategy],
    unit: AnovaUnit,
) -> Result<(), HarnessError> {
    let mut out = Csv::create(
        dir,
        SIGNIFICANCE_FILE,
        &[
            "category",
            "metric",
            "test",
            "unit",
            "groups",
            "observations",
            "statistic",
            "p_value",
            "df_between",
            "df_within",
            "note",
        ],
    )?;
    let unit_name = match unit {
        AnovaUnit::BootstrapDay => "bootstrap_day",
        AnovaUnit::BootstrapMean => "bootstrap_mean",
    };
    let cells = group_records(records);
    for category in NodeCategory::ALL {
        for metric in Metric::ALL {
            let groups: Vec<(String, Vec<f64>)> = strategies
                .iter()
                .filter_map(|&s| {
                    let per_boot = cells.get(&(s, category, metric))?;
                    let obs: Vec<f64> = match unit {
                        AnovaUnit::BootstrapDay => per_boot.values().flatten().filter_map(|&(_, v)| v).collect(),
                        AnovaUnit::BootstrapMean => per_boot
                            .values()
                            .filter_map(|days| {
                                let d: Vec<f64> = days.iter().filter_map(|&(_, v)| v).collect();
                                (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64)
                            })
                            .collect(),
                    };
                    (!obs.is_empty()).then(|| (s.name().to_owned(), obs))
                })
                .collect();
            let n_groups = groups.len().to_string();
            let n_obs = groups.iter().map(|(_, v)| v.len()).sum::<usize>().to_string();
            let prefix = |test: &str| {
                vec![
                    category.name().to_owned(),
                    metric.name().to_owned(),
                    test.to_owned(),
                    unit_name.to_owned(),
                    n_groups.clone(),
                    n_obs.clone(),
                ]
            };
            let sample = SampleGroups::new(groups);
            let mut anova = prefix("anova");
            match sample.as_ref().map_err(Clone::clone).and_then(anova_oneway) {
                Ok(r) => anova.extend([
                    r.f.to_string(),
                    r.p.to_string(),
                    r.df_between.to_string(),
                    r.df_within.to_string(),
                    if r.degenerate {
                        "zero within-group variance".into()
                    } else {
                        String::new()
                    },
                ]),
                Err(e) => anova.extend([
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.to_string(),
                ]),
            }
            out.row(anova)?;
            let mut kw = prefix("kruskal_wallis");
            match sample.as_ref().map_err(Clone::clone).and_then(kruskal_wallis) {
                Ok(r) => kw.extend([
                    r.h.to_string(),
                    r.p.to_string(),
                    r.df.to_string(),
                    String::new(),
                    String::new(),
                ]),
                Err(e) => kw.extend([
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.to_string(),
                ]),
            }
            out.row(kw)?;
        }
    }
    out.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(strategy: Strategy, bootstrap: usize, day: u32, value: Option<f64>) -> MetricRecord {
        MetricRecord {
            strategy,
            bootstrap,
            day,
            category: NodeCategory::TestSetSameDay,
            metric: Metric::Accuracy,
            value,
        }
    }

    #[test]
    fn aggregate_means_over_bootstraps() {
        let records = vec![
            rec(Strategy::Random, 0, 6, Some(0.5)),
            rec(Strategy::Random, 0, 7, Some(1.0)),
            rec(Strategy::Random, 1, 6, Some(0.25)),
            rec(Strategy::Random, 1, 7, None),
        ];
        let rows = aggregate(&records, &[Strategy::Random]);
        assert_eq!(rows.len(), 4 * 7);
        let r = &rows[0];
        assert_eq!((r.category, r.metric), (NodeCategory::TestSetSameDay, Metric::Accuracy));
        assert_eq!(r.bootstraps, 2);
        assert!((r.mean.unwrap() - 0.5).abs() < 1e-15);
        assert!((r.std.unwrap() - 0.25).abs() < 1e-15);
        // the second bootstrap has an undefined day, so only one CPI
        assert_eq!(r.cpi_bootstraps, 1);
        assert!((r.cpi_mean.unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(rows[1].bootstraps, 0);
        assert_eq!(rows[1].mean, None);
    }

    #[test]
    fn daily_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![
            rec(Strategy::NoAl, 0, 6, Some(0.1 + 0.2)),
            rec(Strategy::Age, 3, 7, None),
        ];
        let path = dir.path().join(DAILY_FILE);
        let mut out = Csv::create(
            dir.path(),
            DAILY_FILE,
            &["strategy", "bootstrap", "day", "category", "metric", "value"],
        )
        .unwrap();
        for r in &records {
            out.row([
                r.strategy.name().to_owned(),
                r.bootstrap.to_string(),
                r.day.to_string(),
                r.category.name().to_owned(),
                r.metric.name().to_owned(),
                fmt(r.value),
            ])
            .unwrap();
        }
        out.finish().unwrap();
        assert_eq!(read_daily(&path).unwrap(), records);
    }

    #[test]
    fn unwritable_directory_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain_file");
        fs::write(&file, b"x").unwrap();
        assert!(matches!(
            ensure_writable(&file.join("sub")),
            Err(HarnessError::Io { .. })
        ));
    }
}
