//! The batch commands behind the `netload` binary.
//!
//! Each command takes a resolved [`RunConfig`], computes everything in
//! memory and only then creates `paths.out` and writes its files, so a
//! failing run leaves no partial outputs. The resolved config is written to
//! `config.txt` next to the results. Outputs carry no wall-clock data, so
//! reruns with the same config are byte-identical.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dataset::{ingest_csv, write_csv, DatasetStats, HourlyRecord, Normalizer, Series, WindowSpec};
use crate::error::{Error, Result};
use crate::models::checkpoint;
use crate::models::Model;
use crate::pipeline::{
    build_datasets, compare_methods, evaluate_models, run_direct, run_indirect, sensitivity_csv, sensitivity_lookahead,
    trace_csv, write_file, Comparison, Method, MethodReport, MethodRun, MethodSpec, SensitivityRow,
};
use crate::synthgen::generate_series;
use crate::training::TrainReport;

pub const CONFIG_FILE: &str = "config.txt";
pub const DATASET_FILE: &str = "dataset.csv";
pub const STATS_FILE: &str = "dataset_stats.json";
pub const SUMMARY_FILE: &str = "comparison.csv";
pub const TRACE_VIEW_FILE: &str = "trace_view.csv";
pub const SENSITIVITY_FILE: &str = "sensitivity.csv";

/// Records from `paths.data`, or freshly generated from `synth.*`.
pub fn load_records(cfg: &RunConfig) -> Result<Vec<HourlyRecord>> {
    match cfg.data_path() {
        Some(p) => Ok(ingest_csv(p)?.0),
        None => Ok(generate_series(&cfg.synth_config())?.records),
    }
}

/// Files staged in memory and written together.
#[derive(Default)]
struct Outputs(Vec<(PathBuf, Vec<u8>)>);

impl Outputs {
    fn add(&mut self, name: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.0.push((name.into(), bytes.into()));
    }

    fn json(&mut self, name: impl Into<PathBuf>, value: &impl Serialize) -> Result<()> {
        self.add(name, serde_json::to_string_pretty(value)? + "\n");
        Ok(())
    }

    fn commit(self, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
        let dir = &cfg.paths.out;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::with_capacity(self.0.len() + 1);
        for (name, bytes) in self.0.into_iter().chain([(CONFIG_FILE.into(), cfg.to_text().into_bytes())]) {
            let path = dir.join(name);
            write_file(&path, bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn loss_csv(report: &TrainReport) -> Vec<u8> {
    let mut buf = Vec::new();
    report.write_csv(&mut buf).expect("writing to memory cannot fail");
    buf
}

/// Writes the synthetic dataset CSV and its stats JSON.
pub fn cmd_generate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let series = generate_series(&cfg.synth_config())?;
    let mut csv = Vec::new();
    write_csv(&mut csv, &series.records)?;
    let mut out = Outputs::default();
    out.add(DATASET_FILE, csv);
    out.json(STATS_FILE, &DatasetStats::from_records(&series.records))?;
    out.commit(cfg)
}

/// Saved with every checkpoint, enough to rebuild its dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub spec: MethodSpec,
    pub window: WindowSpec,
    pub normalizer: Normalizer,
    pub split_hash: String,
    pub final_epoch: usize,
    pub best_epoch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub target: Series,
    /// Parameters after the last epoch; these are evaluated.
    pub checkpoint: String,
    /// Parameters with the lowest validation MSE.
    pub best_checkpoint: String,
    pub loss_csv: String,
}

/// Index of one trained method, read back by `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: MethodSpec,
    pub split_hash: String,
    pub submodels: Vec<ManifestEntry>,
}

pub fn manifest_file(spec: &MethodSpec) -> String {
    format!("{}_manifest.json", spec.key())
}

fn stage_run(out: &mut Outputs, spec: &MethodSpec, run: &MethodRun, meta_of: &[(WindowSpec, Normalizer)]) -> Result<Manifest> {
    let key = spec.key();
    let mut submodels = Vec::new();
    for ((target, outcome), (window, normalizer)) in run.outcomes.iter().zip(meta_of) {
        let stem = format!("{key}_{}", target.name());
        let meta = CheckpointMeta {
            spec: spec.clone(),
            window: window.clone(),
            normalizer: normalizer.clone(),
            split_hash: run.report.split_hash.clone(),
            final_epoch: outcome.report.epochs,
            best_epoch: outcome.report.best_epoch,
        };
        let meta = serde_json::to_value(&meta)?;
        let entry = ManifestEntry {
            target: *target,
            checkpoint: format!("{stem}.ckpt"),
            best_checkpoint: format!("{stem}_best.ckpt"),
            loss_csv: format!("{stem}_loss.csv"),
        };
        out.add(&entry.checkpoint, checkpoint::encode(&outcome.model, meta.clone())?);
        out.add(&entry.best_checkpoint, checkpoint::encode(&outcome.best_model, meta)?);
        out.add(&entry.loss_csv, loss_csv(&outcome.report));
        submodels.push(entry);
    }
    let manifest = Manifest {
        spec: spec.clone(),
        split_hash: run.report.split_hash.clone(),
        submodels,
    };
    out.json(manifest_file(spec), &manifest)?;
    out.json(format!("{key}_report.json"), &run.report)?;
    out.add(format!("{key}_trace.csv"), trace_csv(&run.report, usize::MAX));
    Ok(manifest)
}

fn train_and_stage(out: &mut Outputs, records: &[HourlyRecord], spec: &MethodSpec) -> Result<MethodRun> {
    let datasets = build_datasets(records, spec)?;
    let run = match spec.method {
        Method::Direct => run_direct(&datasets[0], spec)?,
        Method::Indirect => run_indirect(&datasets, spec)?,
    };
    let meta: Vec<_> = datasets.iter().map(|d| (d.spec.clone(), d.normalizer.clone())).collect();
    stage_run(out, spec, &run, &meta)?;
    Ok(run)
}

/// Trains the `run` spec: checkpoints (final and best), loss curves, the
/// test report and a manifest for `evaluate`.
pub fn cmd_train(cfg: &RunConfig) -> Result<(MethodReport, Vec<PathBuf>)> {
    let records = load_records(cfg)?;
    let mut out = Outputs::default();
    let run = train_and_stage(&mut out, &records, &cfg.method_spec())?;
    Ok((run.report, out.commit(cfg)?))
}

/// Re-scores checkpoints listed in a manifest on the configured data, using
/// the normalizers stored with them.
pub fn cmd_evaluate(cfg: &RunConfig, manifest_path: &Path) -> Result<(MethodReport, Vec<PathBuf>)> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let records = load_records(cfg)?;
    let spec = &manifest.spec;
    let mut datasets = Vec::new();
    let mut models: Vec<Model> = Vec::new();
    for (entry, ds) in manifest.submodels.iter().zip(build_datasets(&records, spec)?) {
        let (model, header) = checkpoint::load(&dir.join(&entry.checkpoint))?;
        let meta: CheckpointMeta = serde_json::from_value(header.metadata)
            .map_err(|e| Error::Checkpoint(format!("{}: bad metadata: {e}", entry.checkpoint)))?;
        if meta.window != ds.spec {
            return Err(Error::Checkpoint(format!(
                "{} was trained on a different window layout",
                entry.checkpoint
            )));
        }
        datasets.push(ds.with_normalizer(meta.normalizer)?);
        models.push(model);
    }
    if datasets.len() != manifest.submodels.len() {
        return Err(Error::Checkpoint("manifest lists the wrong number of models".into()));
    }
    let refs: Vec<&Model> = models.iter().collect();
    let reports = vec![TrainReport::default(); refs.len()];
    let report = evaluate_models(spec, &datasets, &refs, reports)?;
    let key = spec.key();
    let mut out = Outputs::default();
    out.json(format!("{key}_evaluation.json"), &report)?;
    out.add(format!("{key}_evaluation_trace.csv"), trace_csv(&report, usize::MAX));
    Ok((report, out.commit(cfg)?))
}

/// Trains all four combinations and writes the summary table, the trace
/// view of the first `compare.trace_rows` test hours and per-method files.
pub fn cmd_compare(cfg: &RunConfig) -> Result<(Comparison, Vec<PathBuf>)> {
    let records = load_records(cfg)?;
    let specs = cfg.compare_specs();
    let (comparison, runs) = compare_methods(&records, &specs)?;
    let mut out = Outputs::default();
    for (spec, run) in specs.iter().zip(&runs) {
        let datasets = build_datasets(&records, spec)?;
        let meta: Vec<_> = datasets.iter().map(|d| (d.spec.clone(), d.normalizer.clone())).collect();
        stage_run(&mut out, spec, run, &meta)?;
    }
    out.add(SUMMARY_FILE, comparison.summary_csv());
    out.add(TRACE_VIEW_FILE, comparison.trace_view_csv(cfg.compare.trace_rows));
    Ok((comparison, out.commit(cfg)?))
}

/// One retrained `run` spec per horizon in `sensitivity.horizons`.
pub fn cmd_sensitivity(cfg: &RunConfig) -> Result<(Vec<SensitivityRow>, Vec<PathBuf>)> {
    let records = load_records(cfg)?;
    let rows = sensitivity_lookahead(&records, &cfg.method_spec(), &cfg.sensitivity.horizons)?;
    let mut out = Outputs::default();
    out.add(SENSITIVITY_FILE, sensitivity_csv(&rows));
    Ok((rows, out.commit(cfg)?))
}
