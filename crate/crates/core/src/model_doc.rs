//! JSON model documents holding named networks, scalers and auxiliary fits.
//!
//! Floats are written in shortest round-trip form and parsed exactly, so a
//! save/load cycle reproduces every parameter bit for bit.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lstm::{Gate, LstmModel};
use crate::nn::{Activation, DenseNetwork};
use crate::preprocess::{FeatureScalers, LogCountTransform};
use crate::trend::{LinearModel, OffsetK, TrendParams};

pub const FORMAT: &str = "larvae-model";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelEntry {
    Dense(DenseNetwork),
    Lstm(LstmModel),
    Scalers(FeatureScalers),
    LogTransform(LogCountTransform),
    Trend(TrendParams),
    Linear(LinearModel),
    /// Per-region min/max offsets keyed by region id.
    Offsets(BTreeMap<String, OffsetK>),
}

impl ModelEntry {
    pub fn schema(&self) -> &'static str {
        match self {
            ModelEntry::Dense(_) => "dense",
            ModelEntry::Lstm(_) => "lstm",
            ModelEntry::Scalers(_) => "scalers",
            ModelEntry::LogTransform(_) => "log_transform",
            ModelEntry::Trend(_) => "trend",
            ModelEntry::Linear(_) => "linear",
            ModelEntry::Offsets(_) => "offsets",
        }
    }
}

/// An ordered collection of named model entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelDocument {
    entries: Vec<(String, ModelEntry)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    format: String,
    schema_version: u32,
    entries: Vec<RawEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    name: String,
    model: RawModel,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "schema", rename_all = "snake_case")]
enum RawModel {
    Dense(RawDense),
    Lstm(RawLstm),
    Scalers(FeatureScalers),
    LogTransform(LogCountTransform),
    Trend(TrendParams),
    Linear(LinearModel),
    Offsets { regions: BTreeMap<String, OffsetK> },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDense {
    layer_dims: Vec<usize>,
    dropout_rate: f64,
    activations: Vec<Activation>,
    /// Row-major, one matrix per layer (fan_out x fan_in).
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGate {
    input_weights: Vec<f64>,
    recurrent_weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLstm {
    hidden_size: usize,
    input_size: usize,
    output_len: usize,
    input_dropout_rate: f64,
    input_gate: RawGate,
    forget_gate: RawGate,
    output_gate: RawGate,
    cell_gate: RawGate,
    head_weights: Vec<f64>,
    head_bias: Vec<f64>,
}

impl RawModel {
    fn from_entry(entry: &ModelEntry) -> Self {
        match entry {
            ModelEntry::Dense(net) => RawModel::Dense(RawDense {
                layer_dims: net.layer_dims().to_vec(),
                dropout_rate: net.dropout_rate(),
                activations: net.activations().to_vec(),
                weights: net.weights().to_vec(),
                biases: net.biases().to_vec(),
            }),
            ModelEntry::Lstm(m) => {
                let gate = |g: Gate| RawGate {
                    input_weights: m.input_weights(g).to_vec(),
                    recurrent_weights: m.recurrent_weights(g).to_vec(),
                    bias: m.gate_bias(g).to_vec(),
                };
                RawModel::Lstm(RawLstm {
                    hidden_size: m.hidden_size(),
                    input_size: m.input_size(),
                    output_len: m.output_len(),
                    input_dropout_rate: m.input_dropout_rate(),
                    input_gate: gate(Gate::Input),
                    forget_gate: gate(Gate::Forget),
                    output_gate: gate(Gate::Output),
                    cell_gate: gate(Gate::Cell),
                    head_weights: m.head_weights().to_vec(),
                    head_bias: m.head_bias().to_vec(),
                })
            }
            ModelEntry::Scalers(s) => RawModel::Scalers(s.clone()),
            ModelEntry::LogTransform(t) => RawModel::LogTransform(*t),
            ModelEntry::Trend(p) => RawModel::Trend(*p),
            ModelEntry::Linear(l) => RawModel::Linear(*l),
            ModelEntry::Offsets(k) => RawModel::Offsets { regions: k.clone() },
        }
    }

    fn into_entry(self) -> Result<ModelEntry> {
        Ok(match self {
            RawModel::Dense(d) => {
                ModelEntry::Dense(DenseNetwork::from_parts(d.layer_dims, d.weights, d.biases, d.activations, d.dropout_rate)?)
            }
            RawModel::Lstm(l) => {
                let gates = [l.input_gate, l.forget_gate, l.output_gate, l.cell_gate];
                let [a, b, c, d] = gates.map(|g| (g.input_weights, g.recurrent_weights, g.bias));
                ModelEntry::Lstm(LstmModel::from_parts(
                    l.hidden_size,
                    l.input_size,
                    l.output_len,
                    [a.0, b.0, c.0, d.0],
                    [a.1, b.1, c.1, d.1],
                    [a.2, b.2, c.2, d.2],
                    l.head_weights,
                    l.head_bias,
                    l.input_dropout_rate,
                )?)
            }
            RawModel::Scalers(s) => {
                if s.scalers.iter().any(|sc| !(sc.mean.is_finite() && sc.std.is_finite() && sc.std > 0.0)) {
                    return Err(Error::data("scaler with non-finite mean or non-positive spread"));
                }
                ModelEntry::Scalers(s)
            }
            RawModel::LogTransform(t) => {
                if !(t.offset.is_finite() && t.offset >= 0.0) {
                    return Err(Error::data(format!("log transform offset {} must be >= 0", t.offset)));
                }
                ModelEntry::LogTransform(t)
            }
            RawModel::Trend(p) => ModelEntry::Trend(p),
            RawModel::Linear(l) => {
                if !(l.slope.is_finite() && l.intercept.is_finite()) {
                    return Err(Error::data("linear model coefficients must be finite"));
                }
                ModelEntry::Linear(l)
            }
            RawModel::Offsets { regions } => ModelEntry::Offsets(
                regions
                    .into_iter()
                    .map(|(r, k)| Ok((r, OffsetK::new(k.k_min, k.k_max)?)))
                    .collect::<Result<_>>()?,
            ),
        })
    }
}

impl ModelDocument {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces the entry called `name`.
    pub fn insert(&mut self, name: impl Into<String>, entry: ModelEntry) {
        let name = name.into();
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = entry,
            None => self.entries.push((name, entry)),
        }
    }

    pub fn get(&self, name: &str) -> Option<&ModelEntry> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, e)| e)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn to_json(&self) -> String {
        let raw = RawDocument {
            format: FORMAT.to_string(),
            schema_version: SCHEMA_VERSION,
            entries: self
                .entries
                .iter()
                .map(|(name, e)| RawEntry {
                    name: name.clone(),
                    model: RawModel::from_entry(e),
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&raw).expect("model documents always serialize");
        text.push('\n');
        text
    }

    /// Parses a document; `source_name` labels parse errors.
    pub fn from_json(text: &str, source_name: &str) -> Result<Self> {
        let raw: RawDocument = serde_json::from_str(text).map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            line: e.line() as u64,
            field: format!("column {}", e.column()),
            message: e.to_string(),
        })?;
        if raw.format != FORMAT {
            return Err(Error::data(format!("{source_name}: format `{}` is not `{FORMAT}`", raw.format)));
        }
        if raw.schema_version != SCHEMA_VERSION {
            return Err(Error::data(format!(
                "{source_name}: unsupported schema version {}",
                raw.schema_version
            )));
        }
        let mut doc = ModelDocument::new();
        for entry in raw.entries {
            let name = entry.name;
            if doc.get(&name).is_some() {
                return Err(Error::data(format!("{source_name}: duplicate entry `{name}`")));
            }
            let model = entry.model.into_entry().map_err(|e| {
                Error::data(format!("{source_name}: entry `{name}` failed validation: {e}"))
            })?;
            doc.entries.push((name, model));
        }
        Ok(doc)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    fn require(&self, name: &str, schema: &str) -> Result<&ModelEntry> {
        let entry = self
            .get(name)
            .ok_or_else(|| Error::data(format!("model document has no entry `{name}`")))?;
        if entry.schema() != schema {
            return Err(Error::data(format!(
                "entry `{name}` is a {} model, expected {schema}",
                entry.schema()
            )));
        }
        Ok(entry)
    }

    pub fn dense(&self, name: &str) -> Result<&DenseNetwork> {
        match self.require(name, "dense")? {
            ModelEntry::Dense(n) => Ok(n),
            _ => unreachable!(),
        }
    }

    pub fn lstm(&self, name: &str) -> Result<&LstmModel> {
        match self.require(name, "lstm")? {
            ModelEntry::Lstm(m) => Ok(m),
            _ => unreachable!(),
        }
    }

    pub fn scalers(&self, name: &str) -> Result<&FeatureScalers> {
        match self.require(name, "scalers")? {
            ModelEntry::Scalers(s) => Ok(s),
            _ => unreachable!(),
        }
    }

    pub fn log_transform(&self, name: &str) -> Result<LogCountTransform> {
        match self.require(name, "log_transform")? {
            ModelEntry::LogTransform(t) => Ok(*t),
            _ => unreachable!(),
        }
    }

    pub fn trend(&self, name: &str) -> Result<TrendParams> {
        match self.require(name, "trend")? {
            ModelEntry::Trend(p) => Ok(*p),
            _ => unreachable!(),
        }
    }

    pub fn linear(&self, name: &str) -> Result<LinearModel> {
        match self.require(name, "linear")? {
            ModelEntry::Linear(l) => Ok(*l),
            _ => unreachable!(),
        }
    }

    pub fn offsets(&self, name: &str) -> Result<&BTreeMap<String, OffsetK>> {
        match self.require(name, "offsets")? {
            ModelEntry::Offsets(k) => Ok(k),
            _ => unreachable!(),
        }
    }
}
