//! Direct and indirect net-load prediction, the four-way comparison and the
//! look-ahead sensitivity sweep.
//!
//! The direct method trains one model on net load. The indirect method
//! trains three models (total load, wind and solar generation) and derives
//! net load from their denormalized predictions:
//! `load − wind − solar`. Every metric is computed in MW.

use std::io::Write;
use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::dataset::{build_dataset, HourlyRecord, Series, WindowSpec, WindowedDataset, DEFAULT_LOOK_AHEAD, DEFAULT_LOOK_BACK};
use crate::error::{Error, Result};
use crate::metrics::{ape_stats, near_zero_threshold, ApeStats, MetricReport};
use crate::models::{init_params, Model, ModelKind, ModelSizes};
use crate::training::{predict_range, train_model, TrainConfig, TrainOutcome, TrainReport};

/// Rows in the trace view emitted by the comparison.
pub const TRACE_VIEW_ROWS: usize = 300;

pub const SUMMARY_HEADER: &str = "method,mape,rmspe,r2,ape_max,ape_min,ape_median,ape_std";
pub const SENSITIVITY_HEADER: &str = "lookahead,mape,rmspe,cod";
pub const TRACE_HEADER: &str = "timestamp,actual,predicted,percentage_error";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Indirect,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Indirect => "indirect",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "direct" => Ok(Method::Direct),
            "indirect" => Ok(Method::Indirect),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

/// Which inputs each indirect sub-model sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureRouting {
    /// Each sub-model sees its own history plus the weather and capacity
    /// columns that drive it.
    Routed,
    /// All eight observed columns go to every sub-model.
    All,
}

impl std::str::FromStr for FeatureRouting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "routed" => Ok(FeatureRouting::Routed),
            "all" => Ok(FeatureRouting::All),
            other => Err(Error::Config(format!("unknown feature routing `{other}`"))),
        }
    }
}

/// The indirect sub-targets, in combination order.
pub const INDIRECT_TARGETS: [Series; 3] = [Series::TotalLoad, Series::WindGen, Series::SolarGen];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: Method,
    pub model_kind: ModelKind,
    pub look_back: usize,
    pub look_ahead: usize,
    pub hidden: [usize; 2],
    /// Indirect only.
    pub routing: FeatureRouting,
    /// Direct only: add net-load history as an extra input channel.
    pub net_load_history: bool,
    /// Indirect only: give the load sub-model hour-of-day sine/cosine.
    pub hour_encoding: bool,
    pub train: TrainConfig,
    /// Model seed; indirect sub-models use `seed`, `seed + 1`, `seed + 2`.
    pub seed: u64,
}

impl MethodSpec {
    pub fn new(method: Method, model_kind: ModelKind) -> Self {
        Self {
            method,
            model_kind,
            look_back: DEFAULT_LOOK_BACK,
            look_ahead: DEFAULT_LOOK_AHEAD,
            hidden: model_kind.default_hidden(),
            routing: FeatureRouting::Routed,
            net_load_history: true,
            hour_encoding: false,
            train: TrainConfig::default(),
            seed: 0,
        }
    }

    /// E.g. `LSTM-indirect`.
    pub fn label(&self) -> String {
        format!("{}-{}", self.model_kind, self.method.as_str())
    }

    /// E.g. `lstm_indirect`, used in file and column names.
    pub fn key(&self) -> String {
        format!("{}_{}", self.model_kind.as_str(), self.method.as_str())
    }

    pub fn targets(&self) -> Vec<Series> {
        match self.method {
            Method::Direct => vec![Series::NetLoad],
            Method::Indirect => INDIRECT_TARGETS.to_vec(),
        }
    }

    pub fn features(&self, target: Series) -> Vec<Series> {
        use Series::*;
        match (self.method, target) {
            (Method::Direct, _) => {
                let mut f = Series::OBSERVED.to_vec();
                if self.net_load_history {
                    f.push(NetLoad);
                }
                f
            }
            (Method::Indirect, _) if self.routing == FeatureRouting::All => Series::OBSERVED.to_vec(),
            (Method::Indirect, TotalLoad) => {
                let mut f = vec![Temperature, TotalLoad];
                if self.hour_encoding {
                    f.extend([HourSin, HourCos]);
                }
                f
            }
            (Method::Indirect, WindGen) => vec![WindSpeed, WindCapacity, WindGen, Temperature],
            (Method::Indirect, _) => vec![Irradiance, SolarCapacity, SolarGen, Temperature],
        }
    }

    pub fn window_spec(&self, target: Series) -> Result<WindowSpec> {
        WindowSpec::new(self.look_back, self.look_ahead, target, self.features(target))
    }

    /// Seed of the `k`-th sub-model.
    pub fn submodel_seed(&self, k: usize) -> u64 {
        self.seed.wrapping_add(k as u64)
    }
}

/// One windowed dataset per target of the spec, all with the default split.
pub fn build_datasets(records: &[HourlyRecord], spec: &MethodSpec) -> Result<Vec<WindowedDataset>> {
    spec.targets()
        .into_iter()
        .map(|t| build_dataset(records, spec.window_spec(t)?))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub timestamp: NaiveDateTime,
    pub actual: f64,
    pub predicted: f64,
    /// Signed, `(predicted − actual) / actual × 100`.
    pub percentage_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubModelSummary {
    pub target: Series,
    pub features: Vec<Series>,
    pub seed: u64,
    pub train_report: TrainReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub label: String,
    pub method: Method,
    pub model_kind: ModelKind,
    pub look_back: usize,
    pub look_ahead: usize,
    pub routing: Option<FeatureRouting>,
    /// Hash of the split's sample alignment; equal across runs that share
    /// samples.
    pub split_hash: String,
    pub n_test: usize,
    /// MW scale.
    pub metrics: MetricReport,
    /// MSE after scaling net load by its training-range min-max.
    pub normalized_mse: f64,
    pub ape: ApeStats,
    pub submodels: Vec<SubModelSummary>,
    pub trace: Vec<TraceRow>,
}

/// A report plus the trained models behind it.
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub report: MethodReport,
    /// One outcome per target, in [`MethodSpec::targets`] order.
    pub outcomes: Vec<(Series, TrainOutcome)>,
}

/// Per-sample `load − wind − solar`.
pub fn combine_indirect(load: &[f64], wind: &[f64], solar: &[f64]) -> Result<Vec<f64>> {
    if load.len() != wind.len() || load.len() != solar.len() {
        return Err(Error::Misaligned(format!(
            "sub-model predictions have lengths {}, {}, {}",
            load.len(),
            wind.len(),
            solar.len()
        )));
    }
    Ok(load
        .iter()
        .zip(wind)
        .zip(solar)
        .map(|((l, w), s)| l - w - s)
        .collect())
}

fn check_alignment(datasets: &[WindowedDataset]) -> Result<()> {
    let first = &datasets[0];
    for ds in &datasets[1..] {
        if ds.split != first.split || ds.split_hash() != first.split_hash() {
            return Err(Error::Misaligned(format!(
                "`{}` and `{}` datasets do not share window alignment",
                first.spec.target, ds.spec.target
            )));
        }
    }
    Ok(())
}

fn check_datasets(datasets: &[WindowedDataset], spec: &MethodSpec) -> Result<()> {
    let want = spec.targets();
    let got: Vec<Series> = datasets.iter().map(|d| d.spec.target).collect();
    if got != want {
        return Err(Error::Config(format!(
            "{} expects targets {want:?}, datasets predict {got:?}",
            spec.label()
        )));
    }
    for ds in datasets {
        if ds.spec.look_back != spec.look_back || ds.spec.look_ahead != spec.look_ahead {
            return Err(Error::Config(format!(
                "dataset horizon {}/{} differs from spec {}/{}",
                ds.spec.look_back, ds.spec.look_ahead, spec.look_back, spec.look_ahead
            )));
        }
    }
    check_alignment(datasets)
}

/// Fresh model for one dataset of the spec.
pub fn new_model(spec: &MethodSpec, ds: &WindowedDataset, seed: u64) -> Result<Model> {
    let sizes = ModelSizes {
        features: ds.n_features(),
        look_back: ds.spec.look_back,
        hidden: spec.hidden,
        outputs: 1,
    };
    init_params(spec.model_kind, sizes, seed)
}

/// Net load (MW) at a record of aligned datasets: the target itself for the
/// direct method, `load − wind − solar` for the indirect one.
fn net_load_at_row(datasets: &[WindowedDataset], row: usize) -> f64 {
    match datasets {
        [d] => d.raw_target_at_row(row),
        [l, w, s] => l.raw_target_at_row(row) - w.raw_target_at_row(row) - s.raw_target_at_row(row),
        _ => unreachable!("datasets are checked against the spec"),
    }
}

/// Scores trained models on the shared test split.
pub fn evaluate_models(
    spec: &MethodSpec,
    datasets: &[WindowedDataset],
    models: &[&Model],
    train_reports: Vec<TrainReport>,
) -> Result<MethodReport> {
    check_datasets(datasets, spec)?;
    if models.len() != datasets.len() {
        return Err(Error::Config(format!(
            "{} models for {} datasets",
            models.len(),
            datasets.len()
        )));
    }
    let first = &datasets[0];
    let test = first.split.test.clone();
    let mut denorm = Vec::with_capacity(datasets.len());
    for (ds, model) in datasets.iter().zip(models) {
        let pred = predict_range(model, ds, test.clone())?;
        denorm.push(pred.into_iter().map(|v| ds.denormalize(v)).collect::<Vec<f64>>());
    }
    let predicted = match denorm.as_slice() {
        [p] => p.clone(),
        [l, w, s] => combine_indirect(l, w, s)?,
        _ => unreachable!("datasets are checked against the spec"),
    };
    let actual: Vec<f64> = test.clone().map(|i| net_load_at_row(datasets, first.target_row(i))).collect();

    let fit = first.fit_rows();
    let (lo, hi) = fit
        .map(|r| net_load_at_row(datasets, r))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let metrics = MetricReport::compute(&actual, &predicted)?;
    let ape = ape_stats(&actual, &predicted, near_zero_threshold(&actual))?;
    let trace = test
        .clone()
        .zip(actual.iter().zip(&predicted))
        .map(|(i, (&a, &p))| TraceRow {
            timestamp: first.target_timestamp(i),
            actual: a,
            predicted: p,
            percentage_error: (p - a) / a * 100.0,
        })
        .collect();
    let submodels = datasets
        .iter()
        .zip(train_reports)
        .enumerate()
        .map(|(k, (ds, train_report))| SubModelSummary {
            target: ds.spec.target,
            features: ds.spec.features.clone(),
            seed: spec.submodel_seed(k),
            train_report,
        })
        .collect();
    Ok(MethodReport {
        label: spec.label(),
        method: spec.method,
        model_kind: spec.model_kind,
        look_back: spec.look_back,
        look_ahead: spec.look_ahead,
        routing: (spec.method == Method::Indirect).then_some(spec.routing),
        split_hash: first.split_hash(),
        n_test: test.len(),
        normalized_mse: metrics.mse / ((hi - lo) * (hi - lo)),
        metrics,
        ape,
        submodels,
        trace,
    })
}

fn run(datasets: &[WindowedDataset], spec: &MethodSpec) -> Result<MethodRun> {
    check_datasets(datasets, spec)?;
    let mut outcomes = Vec::with_capacity(datasets.len());
    for (k, ds) in datasets.iter().enumerate() {
        let seed = spec.submodel_seed(k);
        let model = new_model(spec, ds, seed)?;
        let cfg = TrainConfig { seed, ..spec.train };
        outcomes.push((ds.spec.target, train_model(model, ds, &cfg)?));
    }
    let models: Vec<&Model> = outcomes.iter().map(|(_, o)| &o.model).collect();
    let reports = outcomes.iter().map(|(_, o)| o.report.clone()).collect();
    let report = evaluate_models(spec, datasets, &models, reports)?;
    Ok(MethodRun { report, outcomes })
}

/// One model trained on net load.
pub fn run_direct(ds: &WindowedDataset, spec: &MethodSpec) -> Result<MethodRun> {
    if spec.method != Method::Direct {
        return Err(Error::Config(format!("{} is not a direct spec", spec.label())));
    }
    if ds.spec.target != Series::NetLoad {
        return Err(Error::Config(format!(
            "direct method needs a net_load dataset, got `{}`",
            ds.spec.target
        )));
    }
    run(std::slice::from_ref(ds), spec)
}

/// Three models (load, wind, solar) combined into a net-load forecast.
pub fn run_indirect(bundle: &[WindowedDataset], spec: &MethodSpec) -> Result<MethodRun> {
    if spec.method != Method::Indirect {
        return Err(Error::Config(format!("{} is not an indirect spec", spec.label())));
    }
    run(bundle, spec)
}

/// Builds the datasets of a spec and runs it.
pub fn run_method(records: &[HourlyRecord], spec: &MethodSpec) -> Result<MethodRun> {
    let datasets = build_datasets(records, spec)?;
    match spec.method {
        Method::Direct => run_direct(&datasets[0], spec),
        Method::Indirect => run_indirect(&datasets, spec),
    }
}

impl MethodReport {
    /// Metrics recomputed from the stored trace.
    pub fn recompute_metrics(&self) -> Result<MetricReport> {
        let actual: Vec<f64> = self.trace.iter().map(|t| t.actual).collect();
        let predicted: Vec<f64> = self.trace.iter().map(|t| t.predicted).collect();
        MetricReport::compute(&actual, &predicted)
    }

    pub fn write_trace_csv(&self, mut w: impl Write, limit: usize) -> std::io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for t in self.trace.iter().take(limit) {
            writeln!(
                w,
                "{},{},{},{}",
                t.timestamp.format("%Y-%m-%dT%H:%M:%S"),
                t.actual,
                t.predicted,
                t.percentage_error
            )?;
        }
        Ok(())
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        write_file(path, serde_json::to_string_pretty(self)? + "\n")
    }

    fn summary_row(&self) -> String {
        let (m, a) = (&self.metrics, &self.ape);
        format!(
            "{},{},{},{},{},{},{},{}",
            self.label, m.mape, m.rmspe, m.r2, a.max, a.min, a.median, a.std_dev
        )
    }
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn to_string(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> String {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

/// The four method/model combinations sharing one template, with per-kind
/// hidden sizes.
pub fn four_specs(template: &MethodSpec, fcnn_hidden: [usize; 2], lstm_hidden: [usize; 2]) -> [MethodSpec; 4] {
    let make = |kind, method, hidden| MethodSpec {
        method,
        model_kind: kind,
        hidden,
        ..template.clone()
    };
    [
        make(ModelKind::Fcnn, Method::Direct, fcnn_hidden),
        make(ModelKind::Fcnn, Method::Indirect, fcnn_hidden),
        make(ModelKind::Lstm, Method::Direct, lstm_hidden),
        make(ModelKind::Lstm, Method::Indirect, lstm_hidden),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub reports: Vec<MethodReport>,
}

/// Runs every spec on the same records and checks they evaluated the same
/// test samples.
pub fn compare_methods(records: &[HourlyRecord], specs: &[MethodSpec]) -> Result<(Comparison, Vec<MethodRun>)> {
    let Some(first) = specs.first() else {
        return Err(Error::Config("no methods to compare".into()));
    };
    for s in specs {
        if s.look_back != first.look_back || s.look_ahead != first.look_ahead || s.train.epochs != first.train.epochs {
            return Err(Error::Config(format!(
                "{} does not share look-back, look-ahead and epochs with {}",
                s.label(),
                first.label()
            )));
        }
    }
    let mut runs = Vec::with_capacity(specs.len());
    for s in specs {
        runs.push(run_method(records, s)?);
    }
    let hash = &runs[0].report.split_hash;
    if let Some(r) = runs.iter().find(|r| &r.report.split_hash != hash) {
        return Err(Error::Misaligned(format!("{} used a different split", r.report.label)));
    }
    let reports = runs.iter().map(|r| r.report.clone()).collect();
    Ok((Comparison { reports }, runs))
}

impl Comparison {
    pub fn summary_csv(&self) -> String {
        let mut out = format!("{SUMMARY_HEADER}\n");
        for r in &self.reports {
            out.push_str(&r.summary_row());
            out.push('\n');
        }
        out
    }

    /// Wide CSV of the first `rows` test hours: actual net load, then
    /// prediction and signed percentage error per method.
    pub fn trace_view_csv(&self, rows: usize) -> String {
        let mut out = String::from("timestamp,actual");
        for r in &self.reports {
            let key = r.label.to_ascii_lowercase().replace('-', "_");
            out.push_str(&format!(",{key}_pred,{key}_pct_error"));
        }
        out.push('\n');
        let n = self.reports.first().map_or(0, |r| r.trace.len().min(rows));
        for i in 0..n {
            let t = &self.reports[0].trace[i];
            out.push_str(&format!("{},{}", t.timestamp.format("%Y-%m-%dT%H:%M:%S"), t.actual));
            for r in &self.reports {
                let x = &r.trace[i];
                out.push_str(&format!(",{},{}", x.predicted, x.percentage_error));
            }
            out.push('\n');
        }
        out
    }

    /// Label of the method with the lowest median APE.
    pub fn best_by_median_ape(&self) -> Option<&str> {
        self.reports
            .iter()
            .min_by(|a, b| a.ape.median.total_cmp(&b.ape.median))
            .map(|r| r.label.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub lookahead: usize,
    pub mape: f64,
    pub rmspe: f64,
    /// Coefficient of determination.
    pub cod: f64,
}

/// Retrains the spec once per horizon.
pub fn sensitivity_lookahead(
    records: &[HourlyRecord],
    spec: &MethodSpec,
    horizons: &[usize],
) -> Result<Vec<SensitivityRow>> {
    if horizons.is_empty() || horizons.contains(&0) || horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!(
            "horizons must be positive and strictly ascending, got {horizons:?}"
        )));
    }
    horizons
        .iter()
        .map(|&h| {
            let s = MethodSpec {
                look_ahead: h,
                ..spec.clone()
            };
            let run = run_method(records, &s)?;
            let m = run.report.metrics;
            Ok(SensitivityRow {
                lookahead: h,
                mape: m.mape,
                rmspe: m.rmspe,
                cod: m.r2,
            })
        })
        .collect()
}

pub fn sensitivity_csv(rows: &[SensitivityRow]) -> String {
    to_string(|w| {
        writeln!(w, "{SENSITIVITY_HEADER}")?;
        for r in rows {
            writeln!(w, "{},{},{},{}", r.lookahead, r.mape, r.rmspe, r.cod)?;
        }
        Ok(())
    })
}

/// Whether MAPE never decreases as the horizon grows.
pub fn mape_non_decreasing(rows: &[SensitivityRow]) -> bool {
    rows.windows(2).all(|w| w[1].mape >= w[0].mape)
}

pub fn trace_csv(report: &MethodReport, limit: usize) -> String {
    to_string(|w| report.write_trace_csv(w, limit))
}
