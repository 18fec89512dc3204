//! Hourly grid records: CSV ingestion and validation, timezone alignment,
//! net-load derivation, min-max normalization and sliding windows with a
//! chronological train/validation/test split.
//!
//! The CSV schema is fixed:
//!
//! ```text
//! timestamp,total_load_mw,wind_gen_mw,wind_cap_mw,solar_gen_mw,solar_cap_mw,temperature_c,wind_speed_ms,irradiance_wm2
//! ```
//!
//! with ISO-8601 timestamps at hour resolution.

use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use chrono::{Duration, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 9] = [
    "timestamp",
    "total_load_mw",
    "wind_gen_mw",
    "wind_cap_mw",
    "solar_gen_mw",
    "solar_cap_mw",
    "temperature_c",
    "wind_speed_ms",
    "irradiance_wm2",
];

/// Fixed GMT to CST shift. Daylight saving time is deliberately ignored.
pub const GMT_TO_CST_HOURS: i64 = -6;

pub const DEFAULT_LOOK_BACK: usize = 24;
pub const DEFAULT_LOOK_AHEAD: usize = 1;

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourlyRecord {
    pub timestamp: NaiveDateTime,
    pub total_load: f64,
    pub wind_gen: f64,
    pub wind_capacity: f64,
    pub solar_gen: f64,
    pub solar_capacity: f64,
    pub temperature: f64,
    pub wind_speed: f64,
    pub irradiance: f64,
}

/// `total_load − wind_gen − solar_gen`. May be negative.
pub fn compute_net_load(r: &HourlyRecord) -> f64 {
    r.total_load - r.wind_gen - r.solar_gen
}

/// A column that can be fed to a model or predicted by one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Series {
    TotalLoad,
    WindGen,
    WindCapacity,
    SolarGen,
    SolarCapacity,
    Temperature,
    WindSpeed,
    Irradiance,
    NetLoad,
    HourSin,
    HourCos,
}

impl Series {
    /// The eight observed columns of the CSV schema.
    pub const OBSERVED: [Series; 8] = [
        Series::TotalLoad,
        Series::WindGen,
        Series::WindCapacity,
        Series::SolarGen,
        Series::SolarCapacity,
        Series::Temperature,
        Series::WindSpeed,
        Series::Irradiance,
    ];

    pub fn value(self, r: &HourlyRecord) -> f64 {
        match self {
            Series::TotalLoad => r.total_load,
            Series::WindGen => r.wind_gen,
            Series::WindCapacity => r.wind_capacity,
            Series::SolarGen => r.solar_gen,
            Series::SolarCapacity => r.solar_capacity,
            Series::Temperature => r.temperature,
            Series::WindSpeed => r.wind_speed,
            Series::Irradiance => r.irradiance,
            Series::NetLoad => compute_net_load(r),
            Series::HourSin => hour_angle(r).sin(),
            Series::HourCos => hour_angle(r).cos(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Series::TotalLoad => "total_load",
            Series::WindGen => "wind_gen",
            Series::WindCapacity => "wind_capacity",
            Series::SolarGen => "solar_gen",
            Series::SolarCapacity => "solar_capacity",
            Series::Temperature => "temperature",
            Series::WindSpeed => "wind_speed",
            Series::Irradiance => "irradiance",
            Series::NetLoad => "net_load",
            Series::HourSin => "hour_sin",
            Series::HourCos => "hour_cos",
        }
    }

    /// Whether the series can be a prediction target.
    pub fn is_target(self) -> bool {
        matches!(
            self,
            Series::NetLoad | Series::TotalLoad | Series::WindGen | Series::SolarGen
        )
    }
}

impl std::fmt::Display for Series {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Series {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Series::OBSERVED
            .iter()
            .chain(&[Series::NetLoad, Series::HourSin, Series::HourCos])
            .copied()
            .find(|x| x.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown series `{s}`")))
    }
}

fn hour_angle(r: &HourlyRecord) -> f64 {
    r.timestamp.hour() as f64 * std::f64::consts::TAU / 24.0
}

// ---------------------------------------------------------------------------
// Ingestion

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim().trim_end_matches('Z');
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

fn check_record(line: usize, r: &HourlyRecord) -> Result<()> {
    let fail = |field: &'static str, message: String| Error::InvalidRecord {
        row: line,
        timestamp: r.timestamp.format(TIMESTAMP_FORMAT).to_string(),
        field,
        message,
    };
    let fields = [
        ("total_load_mw", r.total_load),
        ("wind_gen_mw", r.wind_gen),
        ("wind_cap_mw", r.wind_capacity),
        ("solar_gen_mw", r.solar_gen),
        ("solar_cap_mw", r.solar_capacity),
        ("temperature_c", r.temperature),
        ("wind_speed_ms", r.wind_speed),
        ("irradiance_wm2", r.irradiance),
    ];
    for (name, v) in fields {
        if !v.is_finite() {
            return Err(fail(name, format!("{v} is not finite")));
        }
    }
    if r.timestamp.minute() != 0 || r.timestamp.second() != 0 {
        return Err(fail("timestamp", "not on an hour boundary".into()));
    }
    if r.total_load <= 0.0 {
        return Err(fail("total_load_mw", format!("{} must be positive", r.total_load)));
    }
    if r.wind_gen < 0.0 {
        return Err(fail("wind_gen_mw", format!("{} is negative", r.wind_gen)));
    }
    if r.wind_gen > r.wind_capacity {
        return Err(fail(
            "wind_gen_mw",
            format!("{} exceeds capacity {}", r.wind_gen, r.wind_capacity),
        ));
    }
    if r.solar_gen < 0.0 {
        return Err(fail("solar_gen_mw", format!("{} is negative", r.solar_gen)));
    }
    if r.solar_gen > r.solar_capacity {
        return Err(fail(
            "solar_gen_mw",
            format!("{} exceeds capacity {}", r.solar_gen, r.solar_capacity),
        ));
    }
    Ok(())
}

/// Parses and validates CSV text, then sorts chronologically.
pub fn parse_csv(reader: impl Read) -> Result<Vec<HourlyRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("header must be `{}`, found `{}`", CSV_HEADER.join(","), got.join(",")),
        });
    }
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let bad = |message: String| Error::Parse { line, message };
        let timestamp = parse_timestamp(&row[0])
            .ok_or_else(|| bad(format!("unparseable timestamp `{}`", &row[0])))?;
        let mut v = [0.0; 8];
        for (k, slot) in v.iter_mut().enumerate() {
            let text = row[k + 1].trim();
            *slot = text
                .parse()
                .map_err(|_| bad(format!("column {} value `{text}` is not a number", CSV_HEADER[k + 1])))?;
        }
        let r = HourlyRecord {
            timestamp,
            total_load: v[0],
            wind_gen: v[1],
            wind_capacity: v[2],
            solar_gen: v[3],
            solar_capacity: v[4],
            temperature: v[5],
            wind_speed: v[6],
            irradiance: v[7],
        };
        check_record(line, &r)?;
        records.push(r);
    }
    records.sort_by_key(|r| r.timestamp);
    if let Some(w) = records.windows(2).find(|w| w[0].timestamp == w[1].timestamp) {
        return Err(Error::DuplicateTimestamp(w[0].timestamp.format(TIMESTAMP_FORMAT).to_string()));
    }
    Ok(records)
}

/// Reads, validates and sorts a dataset file; the report lists every missing
/// hour between the first and last timestamp.
pub fn ingest_csv(path: &Path) -> Result<(Vec<HourlyRecord>, DatasetStats)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let records = parse_csv(std::io::BufReader::new(file))?;
    let stats = DatasetStats::from_records(&records);
    Ok((records, stats))
}

pub fn write_csv(writer: impl Write, records: &[HourlyRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record(&[
            r.timestamp.format(TIMESTAMP_FORMAT).to_string(),
            r.total_load.to_string(),
            r.wind_gen.to_string(),
            r.wind_capacity.to_string(),
            r.solar_gen.to_string(),
            r.solar_capacity.to_string(),
            r.temperature.to_string(),
            r.wind_speed.to_string(),
            r.irradiance.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_csv(path: &Path, records: &[HourlyRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(std::io::BufWriter::new(file), records)
}

/// Missing hours between consecutive sorted records.
pub fn find_gaps(records: &[HourlyRecord]) -> Vec<NaiveDateTime> {
    let mut gaps = Vec::new();
    for w in records.windows(2) {
        let mut t = w[0].timestamp + Duration::hours(1);
        while t < w[1].timestamp {
            gaps.push(t);
            t += Duration::hours(1);
        }
    }
    gaps
}

/// Shifts every timestamp by a fixed number of hours.
pub fn shift_timezone(records: &[HourlyRecord], offset_hours: i64) -> Vec<HourlyRecord> {
    records
        .iter()
        .map(|r| HourlyRecord {
            timestamp: r.timestamp + Duration::hours(offset_hours),
            ..*r
        })
        .collect()
}

/// Summary written next to every generated or ingested dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub rows: usize,
    pub first_timestamp: Option<NaiveDateTime>,
    pub last_timestamp: Option<NaiveDateTime>,
    pub missing_hours: Vec<NaiveDateTime>,
    pub negative_net_load_hours: usize,
    pub wind_capacity_decreases: usize,
    pub solar_capacity_decreases: usize,
    pub mean_net_load_mw: f64,
    pub min_net_load_mw: f64,
    pub max_net_load_mw: f64,
}

impl DatasetStats {
    pub fn from_records(records: &[HourlyRecord]) -> Self {
        let net: Vec<f64> = records.iter().map(compute_net_load).collect();
        let decreases = |f: fn(&HourlyRecord) -> f64| {
            records.windows(2).filter(|w| f(&w[1]) < f(&w[0])).count()
        };
        let n = net.len().max(1) as f64;
        Self {
            rows: records.len(),
            first_timestamp: records.first().map(|r| r.timestamp),
            last_timestamp: records.last().map(|r| r.timestamp),
            missing_hours: find_gaps(records),
            negative_net_load_hours: net.iter().filter(|&&x| x < 0.0).count(),
            wind_capacity_decreases: decreases(|r| r.wind_capacity),
            solar_capacity_decreases: decreases(|r| r.solar_capacity),
            mean_net_load_mw: net.iter().sum::<f64>() / n,
            min_net_load_mw: net.iter().copied().fold(f64::INFINITY, f64::min),
            max_net_load_mw: net.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

// ---------------------------------------------------------------------------
// Normalization

/// Per-series min-max scaling to `[0, 1]` over the fitting rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub series: Vec<Series>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// Fits min and max of each series on `records[rows]` only.
pub fn fit_normalizer(
    records: &[HourlyRecord],
    rows: Range<usize>,
    series: &[Series],
) -> Result<Normalizer> {
    if rows.is_empty() || rows.end > records.len() {
        return Err(Error::EmptySplit("train"));
    }
    let mut min = vec![f64::INFINITY; series.len()];
    let mut max = vec![f64::NEG_INFINITY; series.len()];
    for r in &records[rows] {
        for (k, s) in series.iter().enumerate() {
            let v = s.value(r);
            min[k] = min[k].min(v);
            max[k] = max[k].max(v);
        }
    }
    for (k, s) in series.iter().enumerate() {
        if max[k] <= min[k] {
            return Err(Error::ConstantFeature(s.name().to_string()));
        }
    }
    Ok(Normalizer {
        series: series.to_vec(),
        min,
        max,
    })
}

impl Normalizer {
    fn index(&self, s: Series) -> Result<usize> {
        self.series
            .iter()
            .position(|&x| x == s)
            .ok_or_else(|| Error::Config(format!("normalizer has no `{s}` column")))
    }

    pub fn transform(&self, s: Series, v: f64) -> Result<f64> {
        let k = self.index(s)?;
        Ok((v - self.min[k]) / (self.max[k] - self.min[k]))
    }

    pub fn inverse(&self, s: Series, v: f64) -> Result<f64> {
        let k = self.index(s)?;
        Ok(v * (self.max[k] - self.min[k]) + self.min[k])
    }
}

// ---------------------------------------------------------------------------
// Windowing

/// What a dataset's windows contain and predict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub look_back: usize,
    pub look_ahead: usize,
    pub target: Series,
    /// Input channels, in column order.
    pub features: Vec<Series>,
}

impl WindowSpec {
    pub fn new(look_back: usize, look_ahead: usize, target: Series, features: Vec<Series>) -> Result<Self> {
        if look_back == 0 || look_ahead == 0 {
            return Err(Error::Config("look-back and look-ahead must be at least one hour".into()));
        }
        if !target.is_target() {
            return Err(Error::Config(format!("`{target}` cannot be a prediction target")));
        }
        if features.is_empty() {
            return Err(Error::Config("at least one input feature is required".into()));
        }
        Ok(Self {
            look_back,
            look_ahead,
            target,
            features,
        })
    }

    /// Hours from the first input to the target, inclusive.
    fn span(&self) -> usize {
        self.look_back + self.look_ahead
    }
}

/// Sliding windows before the split is frozen. Sample `i` uses records
/// `starts[i] .. starts[i] + look_back` as inputs and record
/// `starts[i] + look_back + look_ahead − 1` as target.
#[derive(Debug, Clone)]
pub struct Windows {
    pub spec: WindowSpec,
    records: Vec<HourlyRecord>,
    starts: Vec<usize>,
    dropped_for_gaps: usize,
}

/// Builds every gap-free window; windows that span a missing hour are dropped
/// and counted.
pub fn make_windows(records: &[HourlyRecord], spec: WindowSpec) -> Result<Windows> {
    let span = spec.span();
    if records.len() < span {
        return Err(Error::InsufficientData(format!(
            "{} records cannot hold a {}-hour window plus a {}-hour horizon",
            records.len(),
            spec.look_back,
            spec.look_ahead
        )));
    }
    let expected = Duration::hours(span as i64 - 1);
    let mut starts = Vec::with_capacity(records.len() - span + 1);
    let mut dropped = 0;
    for s in 0..=records.len() - span {
        if records[s + span - 1].timestamp - records[s].timestamp == expected {
            starts.push(s);
        } else {
            dropped += 1;
        }
    }
    if starts.is_empty() {
        return Err(Error::InsufficientData("every window crosses a gap".into()));
    }
    Ok(Windows {
        spec,
        records: records.to_vec(),
        starts,
        dropped_for_gaps: dropped,
    })
}

impl Windows {
    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn dropped_for_gaps(&self) -> usize {
        self.dropped_for_gaps
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn target_row(&self, i: usize) -> usize {
        self.starts[i] + self.spec.span() - 1
    }
}

/// Fractions of samples assigned to validation and test; the rest trains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.90,
            val: 0.05,
            test: 0.05,
        }
    }
}

/// Sample index ranges of the three splits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitBounds {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl SplitRatios {
    /// `val = ⌊val·n⌋`, `test = ⌊test·n⌋`, remainder to train.
    pub fn bounds(&self, n: usize) -> Result<SplitBounds> {
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 || [self.train, self.val, self.test].iter().any(|r| *r < 0.0) {
            return Err(Error::Config(format!("split ratios must be non-negative and sum to 1, got {sum}")));
        }
        // The small epsilon keeps products like 0.05·1000 from flooring below 50.
        let val = (self.val * n as f64 + 1e-9).floor() as usize;
        let test = (self.test * n as f64 + 1e-9).floor() as usize;
        let train = n.saturating_sub(val + test);
        for (len, name) in [(train, "train"), (val, "validation"), (test, "test")] {
            if len == 0 {
                return Err(Error::EmptySplit(name));
            }
        }
        Ok(SplitBounds {
            train: 0..train,
            val: train..train + val,
            test: train + val..n,
        })
    }
}

/// Normalized windows with a frozen chronological split.
#[derive(Debug, Clone)]
pub struct WindowedDataset {
    pub spec: WindowSpec,
    pub split: SplitBounds,
    pub normalizer: Normalizer,
    timestamps: Vec<NaiveDateTime>,
    starts: Vec<usize>,
    /// Records × features, row-major, normalized.
    inputs: Vec<f64>,
    /// Normalized target per record.
    targets: Vec<f64>,
    raw_targets: Vec<f64>,
    dropped_for_gaps: usize,
    /// Records the normalizer was fitted on.
    fit_rows: Range<usize>,
    records: Vec<HourlyRecord>,
}

/// Freezes the split and fits the normalizer on the rows that training
/// samples touch (their inputs and targets), then normalizes everything.
pub fn split_chronological(windows: Windows, ratios: SplitRatios) -> Result<WindowedDataset> {
    let split = ratios.bounds(windows.len())?;
    let first = windows.starts[split.train.start];
    let last = windows.target_row(split.train.end - 1);
    let fit_rows = first..last + 1;
    let mut series = windows.spec.features.clone();
    if !series.contains(&windows.spec.target) {
        series.push(windows.spec.target);
    }
    let normalizer = fit_normalizer(&windows.records, fit_rows.clone(), &series)?;
    let mut ds = WindowedDataset {
        timestamps: windows.records.iter().map(|r| r.timestamp).collect(),
        spec: windows.spec,
        split,
        normalizer,
        starts: windows.starts,
        inputs: Vec::new(),
        targets: Vec::new(),
        raw_targets: Vec::new(),
        dropped_for_gaps: windows.dropped_for_gaps,
        fit_rows,
        records: windows.records,
    };
    ds.apply_normalizer();
    Ok(ds)
}

/// `make_windows` followed by the default 90:5:5 split.
pub fn build_dataset(records: &[HourlyRecord], spec: WindowSpec) -> Result<WindowedDataset> {
    split_chronological(make_windows(records, spec)?, SplitRatios::default())
}

impl WindowedDataset {
    fn apply_normalizer(&mut self) {
        let n = &self.normalizer;
        let cols: Vec<usize> = self
            .spec
            .features
            .iter()
            .map(|s| n.index(*s).expect("normalizer covers every feature"))
            .collect();
        let tk = n.index(self.spec.target).expect("normalizer covers the target");
        let scale = |k: usize, v: f64| (v - n.min[k]) / (n.max[k] - n.min[k]);
        let f = self.spec.features.len();
        self.inputs = Vec::with_capacity(self.records.len() * f);
        self.targets = Vec::with_capacity(self.records.len());
        self.raw_targets = Vec::with_capacity(self.records.len());
        for r in &self.records {
            for (s, &k) in self.spec.features.iter().zip(&cols) {
                self.inputs.push(scale(k, s.value(r)));
            }
            let y = self.spec.target.value(r);
            self.raw_targets.push(y);
            self.targets.push(scale(tk, y));
        }
    }

    /// Rescales every value with a previously fitted normalizer, for
    /// instance one stored with a checkpoint.
    pub fn with_normalizer(mut self, normalizer: Normalizer) -> Result<Self> {
        for s in self.spec.features.iter().chain([&self.spec.target]) {
            normalizer.index(*s)?;
        }
        self.normalizer = normalizer;
        self.apply_normalizer();
        Ok(self)
    }

    pub fn records(&self) -> &[HourlyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.spec.features.len()
    }

    pub fn dropped_for_gaps(&self) -> usize {
        self.dropped_for_gaps
    }

    /// Record range the normalizer statistics came from.
    pub fn fit_rows(&self) -> Range<usize> {
        self.fit_rows.clone()
    }

    /// Normalized input window of sample `i`, `look_back × features`
    /// values, time-major.
    pub fn input(&self, i: usize) -> &[f64] {
        let f = self.n_features();
        let s = self.starts[i];
        &self.inputs[s * f..(s + self.spec.look_back) * f]
    }

    pub fn inputs(&self, range: Range<usize>) -> Vec<&[f64]> {
        range.map(|i| self.input(i)).collect()
    }

    pub fn target_row(&self, i: usize) -> usize {
        self.starts[i] + self.spec.span() - 1
    }

    /// Record indices of sample `i`'s input window.
    pub fn input_rows(&self, i: usize) -> Range<usize> {
        self.starts[i]..self.starts[i] + self.spec.look_back
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[self.target_row(i)]
    }

    pub fn targets(&self, range: Range<usize>) -> Vec<f64> {
        range.map(|i| self.target(i)).collect()
    }

    /// Target of sample `i` in physical units.
    pub fn raw_target(&self, i: usize) -> f64 {
        self.raw_targets[self.target_row(i)]
    }

    /// Target value of record `row` in physical units.
    pub fn raw_target_at_row(&self, row: usize) -> f64 {
        self.raw_targets[row]
    }

    pub fn raw_targets(&self, range: Range<usize>) -> Vec<f64> {
        range.map(|i| self.raw_target(i)).collect()
    }

    pub fn target_timestamp(&self, i: usize) -> NaiveDateTime {
        self.timestamps[self.target_row(i)]
    }

    /// Maps a normalized prediction back to physical units.
    pub fn denormalize(&self, v: f64) -> f64 {
        self.normalizer
            .inverse(self.spec.target, v)
            .expect("target is always a normalizer column")
    }

    /// Hex SHA-256 over the horizon and the target timestamps of every
    /// split, so two datasets with equal hashes evaluate identical samples.
    pub fn split_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.spec.look_back as u64).to_le_bytes());
        h.update((self.spec.look_ahead as u64).to_le_bytes());
        for (tag, range) in [(b'T', &self.split.train), (b'V', &self.split.val), (b'E', &self.split.test)] {
            h.update([tag]);
            h.update((range.len() as u64).to_le_bytes());
            for i in range.clone() {
                h.update(self.target_timestamp(i).and_utc().timestamp().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Checks that no sample's inputs reach a later split's target hours and
    /// that the normalizer only saw rows up to the last training target.
    pub fn check_leakage(&self) -> Result<()> {
        let splits = [&self.split.train, &self.split.val, &self.split.test];
        for (k, earlier) in splits.iter().enumerate() {
            let Some(max_input) = (*earlier).clone().map(|i| self.input_rows(i).end - 1).max() else {
                continue;
            };
            for later in &splits[k + 1..] {
                if let Some(min_target) = (*later).clone().map(|i| self.target_row(i)).min() {
                    if max_input >= min_target {
                        return Err(Error::Misaligned(format!(
                            "input row {max_input} reaches later target row {min_target}"
                        )));
                    }
                }
            }
        }
        let first_val_target = self.target_row(self.split.val.start);
        if self.fit_rows.end > first_val_target {
            return Err(Error::Misaligned("normalizer saw validation targets".into()));
        }
        Ok(())
    }
}
