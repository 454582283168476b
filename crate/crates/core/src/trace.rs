//! Trace data model and the JSONL trace format.
//!
//! One record per line:
//!
//! ```text
//! {"id": "q1", "options": ["A","B"], "label": 0,
//!  "plm": {"layers": [[0.1, 0.2], [1.5, -0.3]]},
//!  "polm": {"layers": [[0.1, 0.2], [4.0, -1.0]]}}
//! ```
//!
//! `layers[l][i]` is the logit of option `i` at layer `l + 1`; the last row is
//! the model's output layer.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-sample option logits of the reference PLM and the post-trained PoLM.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePair {
    pub id: String,
    pub option_names: Vec<String>,
    pub label: Option<usize>,
    /// `L` rows x `V_opt` columns; row `L - 1` is the final layer.
    pub plm_layers: Vec<Vec<f64>>,
    pub polm_layers: Vec<Vec<f64>>,
}

impl TracePair {
    pub fn layer_count(&self) -> usize {
        self.plm_layers.len()
    }

    pub fn option_count(&self) -> usize {
        self.option_names.len()
    }

    pub fn plm_final(&self) -> &[f64] {
        self.plm_layers.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn polm_final(&self) -> &[f64] {
        self.polm_layers.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Per-pair invariant check; one entry per broken invariant.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let v = self.option_count();
        let mut push = |invariant: &str, detail: String| {
            out.push(Violation {
                sample_id: self.id.clone(),
                invariant: invariant.to_string(),
                detail,
            })
        };
        if v < 2 {
            push("option count", format!("{v} options, need at least 2"));
        }
        if self.plm_layers.len() < 2 {
            push(
                "layer count",
                format!("{} layers, need at least 2", self.plm_layers.len()),
            );
        }
        if self.plm_layers.len() != self.polm_layers.len() {
            push(
                "matching shapes",
                format!(
                    "plm has {} layers, polm has {}",
                    self.plm_layers.len(),
                    self.polm_layers.len()
                ),
            );
        }
        for (model, layers) in [("plm", &self.plm_layers), ("polm", &self.polm_layers)] {
            for (l, row) in layers.iter().enumerate() {
                if row.len() != v {
                    push(
                        "matching shapes",
                        format!(
                            "{model} layer {} has {} logits, expected {v}",
                            l + 1,
                            row.len()
                        ),
                    );
                }
                if let Some(i) = row.iter().position(|x| !x.is_finite()) {
                    push(
                        "finite logits",
                        format!("{model} layer {} option {i} is {}", l + 1, row[i]),
                    );
                }
            }
        }
        if let Some(label) = self.label {
            if label >= v {
                push(
                    "label out of range",
                    format!("label {label} with {v} options"),
                );
            }
        }
        out
    }
}

/// An ordered, shape-uniform collection of trace pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    pub samples: Vec<TracePair>,
    pub layer_count: usize,
    pub option_count: usize,
}

impl TraceSet {
    /// Builds a set and checks every invariant, failing on the first one
    /// broken.
    pub fn new(samples: Vec<TracePair>) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptyTraceSet)?;
        let set = Self {
            layer_count: first.layer_count(),
            option_count: first.option_count(),
            samples,
        };
        set.check()?;
        Ok(set)
    }

    fn check(&self) -> Result<()> {
        let mut seen = HashSet::new();
        let first = &self.samples[0];
        for s in &self.samples {
            if let Some(v) = s.violations().into_iter().next() {
                return Err(Error::InvalidSample {
                    id: v.sample_id,
                    message: format!("{}: {}", v.invariant, v.detail),
                });
            }
            if s.layer_count() != self.layer_count || s.option_count() != self.option_count {
                return Err(Error::CrossSampleMismatch {
                    first_id: first.id.clone(),
                    first_layers: self.layer_count,
                    first_options: self.option_count,
                    other_id: s.id.clone(),
                    other_layers: s.layer_count(),
                    other_options: s.option_count(),
                });
            }
            if !seen.insert(s.id.as_str()) {
                return Err(Error::DuplicateId(s.id.clone()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TracePair> {
        self.samples.iter()
    }

    /// First sample without a gold label, if any.
    pub fn first_unlabeled(&self) -> Option<&TracePair> {
        self.samples.iter().find(|s| s.label.is_none())
    }
}

impl<'a> IntoIterator for &'a TraceSet {
    type Item = &'a TracePair;
    type IntoIter = std::slice::Iter<'a, TracePair>;

    fn into_iter(self) -> Self::IntoIter {
        self.samples.iter()
    }
}

/// A broken invariant found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub sample_id: String,
    pub invariant: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sample '{}': {} ({})",
            self.sample_id, self.invariant, self.detail
        )
    }
}

/// Lists every invariant violation in the set. Empty means valid.
pub fn validate(set: &TraceSet) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for s in &set.samples {
        out.extend(s.violations());
        if s.layer_count() != set.layer_count || s.option_count() != set.option_count {
            out.push(Violation {
                sample_id: s.id.clone(),
                invariant: "uniform shape".into(),
                detail: format!(
                    "{} x {}, set is {} x {}",
                    s.layer_count(),
                    s.option_count(),
                    set.layer_count,
                    set.option_count
                ),
            });
        }
        if !seen.insert(s.id.as_str()) {
            out.push(Violation {
                sample_id: s.id.clone(),
                invariant: "unique id".into(),
                detail: "id appears more than once".into(),
            });
        }
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelLayers {
    layers: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceRecord {
    id: String,
    options: Vec<String>,
    #[serde(default)]
    label: Option<usize>,
    plm: ModelLayers,
    polm: ModelLayers,
}

impl From<TraceRecord> for TracePair {
    fn from(r: TraceRecord) -> Self {
        TracePair {
            id: r.id,
            option_names: r.options,
            label: r.label,
            plm_layers: r.plm.layers,
            polm_layers: r.polm.layers,
        }
    }
}

impl From<&TracePair> for TraceRecord {
    fn from(p: &TracePair) -> Self {
        TraceRecord {
            id: p.id.clone(),
            options: p.option_names.clone(),
            label: p.label,
            plm: ModelLayers {
                layers: p.plm_layers.clone(),
            },
            polm: ModelLayers {
                layers: p.polm_layers.clone(),
            },
        }
    }
}

/// Loads and validates a trace file, preserving file order.
pub fn load_traces(path: impl AsRef<Path>) -> Result<TraceSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_traces(BufReader::new(file), path)
}

/// Parses trace JSONL from any reader. `origin` is only used in messages.
pub fn read_traces(reader: impl BufRead, origin: &Path) -> Result<TraceSet> {
    let mut samples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                path: origin.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
        samples.push(TracePair::from(record));
    }
    TraceSet::new(samples)
}

/// Writes the set as trace JSONL. Empty sets are refused.
pub fn write_traces(set: &TraceSet, path: impl AsRef<Path>) -> Result<()> {
    if set.is_empty() {
        return Err(Error::EmptyTraceSet);
    }
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_traces_to(set, &mut w).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_traces_to(set: &TraceSet, w: &mut impl Write) -> Result<()> {
    for s in &set.samples {
        serde_json::to_writer(&mut *w, &TraceRecord::from(s))?;
        w.write_all(b"\n").map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}
