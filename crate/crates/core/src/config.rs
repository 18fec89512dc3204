//! Run configuration as flat `key = value` text with dotted section keys.
//!
//! ```text
//! # comment
//! seed = 7
//! run.model = lstm
//! window.look_ahead = 2
//! sensitivity.horizons = 1, 2, 4
//! synth.n_years = 2
//! ```
//!
//! Keys mirror the serialized [`RunConfig`]; unknown keys are rejected.
//! Every random stream derives from `seed`, so the synthetic generator and
//! the trainer have no seeds of their own in the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::pipeline::{four_specs, FeatureRouting, Method, MethodSpec, TRACE_VIEW_ROWS};
use crate::synthgen::SynthConfig;
use crate::training::TrainConfig;

/// Keys filled in from the master seed rather than read from the file.
const SEEDED_KEYS: [&str; 2] = ["synth.seed", "train.seed"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub run: RunSection,
    pub window: WindowSection,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub compare: CompareSection,
    pub sensitivity: SensitivitySection,
    pub synth: SynthConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paths {
    /// Dataset CSV; synthetic data is generated in memory when empty.
    pub data: String,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSection {
    pub method: Method,
    pub model: ModelKind,
    pub routing: FeatureRouting,
    pub net_load_history: bool,
    pub hour_encoding: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSection {
    pub look_back: usize,
    pub look_ahead: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    pub fcnn_hidden: [usize; 2],
    pub lstm_hidden: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSection {
    pub trace_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySection {
    pub horizons: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let spec = MethodSpec::new(Method::Direct, ModelKind::Fcnn);
        Self {
            seed: 42,
            paths: Paths {
                data: String::new(),
                out: PathBuf::from("out"),
            },
            run: RunSection {
                method: spec.method,
                model: spec.model_kind,
                routing: spec.routing,
                net_load_history: spec.net_load_history,
                hour_encoding: spec.hour_encoding,
            },
            window: WindowSection {
                look_back: spec.look_back,
                look_ahead: spec.look_ahead,
            },
            model: ModelSection {
                fcnn_hidden: ModelKind::Fcnn.default_hidden(),
                lstm_hidden: ModelKind::Lstm.default_hidden(),
            },
            train: spec.train,
            compare: CompareSection {
                trace_rows: TRACE_VIEW_ROWS,
            },
            sensitivity: SensitivitySection { horizons: vec![1, 2, 4] },
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn data_path(&self) -> Option<&Path> {
        (!self.paths.data.is_empty()).then(|| Path::new(&self.paths.data))
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            ..self.synth.clone()
        }
    }

    pub fn hidden(&self, kind: ModelKind) -> [usize; 2] {
        match kind {
            ModelKind::Fcnn => self.model.fcnn_hidden,
            ModelKind::Lstm => self.model.lstm_hidden,
        }
    }

    /// The spec selected by the `run` section.
    pub fn method_spec(&self) -> MethodSpec {
        let train = TrainConfig {
            seed: self.seed,
            ..self.train
        };
        MethodSpec {
            method: self.run.method,
            model_kind: self.run.model,
            look_back: self.window.look_back,
            look_ahead: self.window.look_ahead,
            hidden: self.hidden(self.run.model),
            routing: self.run.routing,
            net_load_history: self.run.net_load_history,
            hour_encoding: self.run.hour_encoding,
            train,
            seed: self.seed,
        }
    }

    /// FCNN/LSTM × direct/indirect sharing everything else.
    pub fn compare_specs(&self) -> [MethodSpec; 4] {
        four_specs(&self.method_spec(), self.model.fcnn_hidden, self.model.lstm_hidden)
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(self, text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: n + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        self.apply_pairs(&pairs)
    }

    /// Applies dotted-key overrides, typed after the current values.
    pub fn apply_pairs(self, pairs: &[(String, String)]) -> Result<Self> {
        let mut tree = serde_json::to_value(&self)?;
        for (key, raw) in pairs {
            if SEEDED_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("`{key}` is derived from `seed`")));
            }
            let slot = lookup(&mut tree, key)?;
            *slot = typed(slot, raw).map_err(|m| Error::Config(format!("`{key}`: {m}")))?;
        }
        serde_json::from_value(tree).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::default().apply_text(&text)
    }

    /// Every key, sorted within sections, as `key = value` lines.
    pub fn to_text(&self) -> String {
        let tree = serde_json::to_value(self).expect("config serializes");
        let mut lines = Vec::new();
        flatten("", &tree, &mut lines);
        lines.retain(|(k, _)| !SEEDED_KEYS.contains(&k.as_str()));
        lines.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

fn lookup<'a>(tree: &'a mut Value, key: &str) -> Result<&'a mut Value> {
    let mut node = tree;
    for part in key.split('.') {
        node = node
            .as_object_mut()
            .and_then(|m| m.get_mut(part))
            .ok_or_else(|| Error::Config(format!("unknown key `{key}`")))?;
    }
    if node.is_object() {
        return Err(Error::Config(format!("`{key}` is a section, not a key")));
    }
    Ok(node)
}

fn typed(current: &Value, raw: &str) -> std::result::Result<Value, String> {
    Ok(match current {
        Value::Bool(_) => Value::Bool(raw.parse().map_err(|_| format!("expected true or false, got `{raw}`"))?),
        Value::Number(_) => serde_json::from_str::<serde_json::Number>(raw)
            .map(Value::Number)
            .map_err(|_| format!("expected a number, got `{raw}`"))?,
        Value::Array(items) => {
            let proto = items.first().cloned().unwrap_or(Value::Number(0.into()));
            let parts = raw.trim_matches(|c| c == '[' || c == ']');
            let list: std::result::Result<Vec<Value>, String> = parts
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| typed(&proto, s))
                .collect();
            Value::Array(list?)
        }
        _ => Value::String(raw.to_string()),
    })
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            let (leaves, sections): (Map<String, Value>, Map<String, Value>) =
                m.clone().into_iter().partition(|(_, v)| !v.is_object());
            for (k, v) in leaves.iter().chain(sections.iter()) {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        Value::Array(items) => {
            let s: Vec<String> = items.iter().map(scalar).collect();
            out.push((prefix.to_string(), s.join(", ")));
        }
        _ => out.push((prefix.to_string(), scalar(v))),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let cfg = RunConfig::default();
        let text = cfg.to_text();
        assert!(text.contains("run.model = fcnn\n"), "{text}");
        assert!(text.contains("sensitivity.horizons = 1, 2, 4\n"));
        assert!(!text.contains("synth.seed"));
        assert_eq!(RunConfig::default().apply_text(&text).unwrap(), cfg);
    }

    #[test]
    fn overrides_are_typed() {
        let cfg = RunConfig::default()
            .apply_text("# note\nseed = 7\nrun.model = lstm\nrun.method=indirect\nwindow.look_ahead = 4\nmodel.lstm_hidden = 8, 8\ntrain.adam.base_lr = 1e-3\nsensitivity.horizons = [1,3]\nrun.hour_encoding = true\n")
            .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.run.model, ModelKind::Lstm);
        assert_eq!(cfg.run.method, Method::Indirect);
        assert_eq!(cfg.window.look_ahead, 4);
        assert_eq!(cfg.model.lstm_hidden, [8, 8]);
        assert_eq!(cfg.train.adam.base_lr, 1e-3);
        assert_eq!(cfg.sensitivity.horizons, vec![1, 3]);
        let spec = cfg.method_spec();
        assert_eq!((spec.seed, spec.train.seed, spec.hidden), (7, 7, [8, 8]));
        assert!(spec.hour_encoding);
        assert_eq!(cfg.synth_config().seed, 7);
    }

    #[test]
    fn bad_input_rejected() {
        let base = RunConfig::default;
        assert!(matches!(base().apply_text("nonsense"), Err(Error::Parse { line: 1, .. })));
        assert!(base().apply_text("train.nope = 1").is_err());
        assert!(base().apply_text("train = 1").is_err());
        assert!(base().apply_text("train.epochs = ten").is_err());
        assert!(base().apply_text("run.model = gru").is_err());
        assert!(base().apply_text("synth.seed = 3").is_err());
        assert!(base().apply_text("run.net_load_history = yes").is_err());
    }

    #[test]
    fn compare_specs_share_template() {
        let specs = RunConfig::default().compare_specs();
        let labels: Vec<String> = specs.iter().map(|s| s.label()).collect();
        assert_eq!(labels, ["FCNN-direct", "FCNN-indirect", "LSTM-direct", "LSTM-indirect"]);
        assert_eq!(specs[3].hidden, ModelKind::Lstm.default_hidden());
    }
}
