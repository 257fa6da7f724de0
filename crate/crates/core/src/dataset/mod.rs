//! Tabular data: feature metadata, encoding for distance computation, target
//! binning, cohort filtering, synthetic planted-structure generation and
//! stratified fold assignment.

mod folds;
mod io;
mod synth;

pub use folds::{kfold_split, FoldAssignment};
pub use io::{load_csv, load_csv_with, read_feature_specs, write_csv, LabelMode, LoadOptions};
pub use synth::{synth_local_structures, ClusterTruth, SynthData, SynthParams, SynthTruth};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
    Ordinal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

impl FeatureSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Numeric,
            categories: Vec::new(),
        }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Categorical,
            categories: categories.into_iter().map(Into::into).collect(),
        }
    }

    pub fn ordinal<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Ordinal,
            categories: categories.into_iter().map(Into::into).collect(),
        }
    }

    pub fn is_numeric(&self) -> bool {
        self.kind == FeatureKind::Numeric
    }

    /// Integer code of a category label.
    pub fn code_of(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == label)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            FeatureKind::Numeric => {
                if !self.categories.is_empty() {
                    return Err(Error::config(format!(
                        "numeric feature '{}' must not list categories",
                        self.name
                    )));
                }
            }
            FeatureKind::Categorical | FeatureKind::Ordinal => {
                if self.categories.is_empty() {
                    return Err(Error::config(format!(
                        "feature '{}' needs at least one category",
                        self.name
                    )));
                }
                for (i, c) in self.categories.iter().enumerate() {
                    if self.categories[..i].contains(c) {
                        return Err(Error::config(format!(
                            "feature '{}' lists category '{c}' twice",
                            self.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Number of encoded columns this feature occupies.
    fn encoded_width(&self) -> usize {
        match self.kind {
            FeatureKind::Categorical => self.categories.len(),
            _ => 1,
        }
    }
}

/// Equal-width binning of a continuous target into `bin_count` classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinningSpec {
    pub bin_count: usize,
    pub lo: f64,
    pub hi: f64,
}

impl BinningSpec {
    pub fn new(bin_count: usize, lo: f64, hi: f64) -> Result<Self> {
        if bin_count < 2 {
            return Err(Error::config("bin_count must be at least 2"));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::config(format!("invalid binning range [{lo}, {hi}]")));
        }
        Ok(BinningSpec { bin_count, lo, hi })
    }

    /// Range taken from the observed minimum and maximum.
    pub fn from_values(bin_count: usize, values: &[f64]) -> Result<Self> {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        BinningSpec::new(bin_count, lo, hi)
    }

    pub fn class_of(&self, v: f64) -> Result<u32> {
        if !(v >= self.lo && v <= self.hi) {
            return Err(Error::data(format!(
                "value {v} outside binning range [{}, {}]",
                self.lo, self.hi
            )));
        }
        let width = self.hi - self.lo;
        let bin = ((self.bin_count as f64) * (v - self.lo) / width).floor() as usize;
        Ok(bin.min(self.bin_count - 1) as u32 + 1)
    }
}

/// Map each value to its 1-based bin; class 1 is the lowest range.
pub fn bin_target(values: &[f64], spec: &BinningSpec) -> Result<Vec<u32>> {
    values.iter().map(|&v| spec.class_of(v)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodeOptions {
    /// Z-score numeric features before distance computation.
    pub standardize: bool,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions { standardize: true }
    }
}

/// Extra non-feature column carried along for cohort filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxColumn {
    pub name: String,
    pub values: Vec<String>,
}

/// The universe of `m` labelled instances.
///
/// Two views of the features are kept: `raw` holds numeric values as read and
/// category codes (0-based, in spec order) for categorical/ordinal features;
/// `encoded` is the distance-space matrix (standardized numerics, ordinal
/// codes, one-hot categoricals).
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Vec<FeatureSpec>,
    raw: Vec<f64>,
    encoded: Vec<f64>,
    encoded_dim: usize,
    labels: Vec<u32>,
    class_names: Vec<String>,
    origin_ids: Vec<usize>,
    aux: Vec<AuxColumn>,
    options: EncodeOptions,
}

impl Dataset {
    /// Build from raw rows. Labels must be 1-based and every class in
    /// `1..=class_names.len()` must occur.
    pub fn from_raw(
        features: Vec<FeatureSpec>,
        rows: Vec<Vec<f64>>,
        labels: Vec<u32>,
        class_names: Vec<String>,
        options: EncodeOptions,
    ) -> Result<Self> {
        let m = rows.len();
        let origin_ids = (0..m).collect();
        Dataset::assemble(features, rows, labels, class_names, origin_ids, Vec::new(), options)
    }

    fn assemble(
        features: Vec<FeatureSpec>,
        rows: Vec<Vec<f64>>,
        labels: Vec<u32>,
        class_names: Vec<String>,
        origin_ids: Vec<usize>,
        aux: Vec<AuxColumn>,
        options: EncodeOptions,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::data("dataset is empty"));
        }
        if features.is_empty() {
            return Err(Error::config("at least one feature is required"));
        }
        for f in &features {
            f.validate()?;
        }
        if labels.len() != rows.len() {
            return Err(Error::contract(format!(
                "{} labels for {} rows",
                labels.len(),
                rows.len()
            )));
        }
        let c = class_names.len();
        if c == 0 {
            return Err(Error::data("no classes"));
        }
        let mut seen = vec![false; c];
        for (i, &l) in labels.iter().enumerate() {
            if l == 0 || l as usize > c {
                return Err(Error::Data {
                    row: Some(i + 1),
                    column: None,
                    message: format!("label {l} outside [1, {c}]"),
                });
            }
            seen[l as usize - 1] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::data(format!("class {} never occurs", missing + 1)));
        }
        let f = features.len();
        let mut raw = Vec::with_capacity(rows.len() * f);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != f {
                return Err(Error::DimensionMismatch {
                    expected: f,
                    got: row.len(),
                });
            }
            for (j, (&v, spec)) in row.iter().zip(&features).enumerate() {
                if !v.is_finite() {
                    return Err(Error::at(i + 1, &features[j].name, "missing or non-finite value"));
                }
                if !spec.is_numeric() {
                    let ok = v >= 0.0 && v.fract() == 0.0 && (v as usize) < spec.categories.len();
                    if !ok {
                        return Err(Error::at(i + 1, &spec.name, format!("invalid category code {v}")));
                    }
                }
            }
            raw.extend_from_slice(row);
        }
        let (encoded, encoded_dim) = encode(&features, &raw, rows.len(), options);
        Ok(Dataset {
            features,
            raw,
            encoded,
            encoded_dim,
            labels,
            class_names,
            origin_ids,
            aux,
            options,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, id: usize) -> u32 {
        self.labels[id]
    }

    pub fn origin_ids(&self) -> &[usize] {
        &self.origin_ids
    }

    pub fn encode_options(&self) -> EncodeOptions {
        self.options
    }

    /// Raw feature values of one instance (category codes for categorical features).
    pub fn raw_row(&self, id: usize) -> &[f64] {
        let f = self.features.len();
        &self.raw[id * f..(id + 1) * f]
    }

    pub fn raw_value(&self, id: usize, feature: usize) -> f64 {
        self.raw[id * self.features.len() + feature]
    }

    /// Encoded distance-space vector of one instance.
    pub fn row(&self, id: usize) -> &[f64] {
        &self.encoded[id * self.encoded_dim..(id + 1) * self.encoded_dim]
    }

    pub fn encoded_dim(&self) -> usize {
        self.encoded_dim
    }

    /// Per-class counts over `ids`, indexed by `class - 1`.
    pub fn class_histogram(&self, ids: &[usize]) -> Vec<usize> {
        let mut h = vec![0; self.class_count()];
        for &i in ids {
            h[self.labels[i] as usize - 1] += 1;
        }
        h
    }

    pub fn row_view(&self, id: usize) -> RowView<'_> {
        RowView { dataset: self, id }
    }

    /// Keep the rows for which `keep` is true. Ids are reassigned in order,
    /// numeric standardization is recomputed over the kept rows and classes
    /// that vanish are dropped (remaining classes keep their order and names).
    pub fn filter_rows(&self, keep: impl Fn(&RowView<'_>) -> bool) -> Result<Dataset> {
        let kept: Vec<usize> = (0..self.len()).filter(|&i| keep(&self.row_view(i))).collect();
        if kept.is_empty() {
            return Err(Error::data("filter removed every row"));
        }
        let rows = kept.iter().map(|&i| self.raw_row(i).to_vec()).collect();
        let labels: Vec<u32> = kept.iter().map(|&i| self.labels[i]).collect();
        let (labels, class_names) = compact_classes(&labels, &self.class_names);
        let origin_ids = kept.iter().map(|&i| self.origin_ids[i]).collect();
        let aux = self
            .aux
            .iter()
            .map(|col| AuxColumn {
                name: col.name.clone(),
                values: kept.iter().map(|&i| col.values[i].clone()).collect(),
            })
            .collect();
        Dataset::assemble(
            self.features.clone(),
            rows,
            labels,
            class_names,
            origin_ids,
            aux,
            self.options,
        )
    }

    pub(crate) fn with_aux(mut self, aux: Vec<AuxColumn>) -> Self {
        self.aux = aux;
        self
    }

    /// SHA-256 over everything that determines downstream results.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.features).expect("feature specs serialize"));
        h.update([self.options.standardize as u8]);
        for v in &self.raw {
            h.update(v.to_bits().to_le_bytes());
        }
        for l in &self.labels {
            h.update(l.to_le_bytes());
        }
        for name in &self.class_names {
            h.update(name.as_bytes());
            h.update([0]);
        }
        for o in &self.origin_ids {
            h.update((*o as u64).to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Read access to one instance for filter predicates.
#[derive(Clone, Copy)]
pub struct RowView<'a> {
    dataset: &'a Dataset,
    id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell<'a> {
    Number(f64),
    Category(&'a str),
    Text(&'a str),
}

impl<'a> RowView<'a> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn label(&self) -> u32 {
        self.dataset.labels[self.id]
    }

    /// Look up a feature or auxiliary column by name.
    pub fn get(&self, column: &str) -> Option<Cell<'a>> {
        let ds = self.dataset;
        if let Some(j) = ds.features.iter().position(|f| f.name == column) {
            let v = ds.raw_value(self.id, j);
            let spec = &ds.features[j];
            return Some(if spec.is_numeric() {
                Cell::Number(v)
            } else {
                Cell::Category(&spec.categories[v as usize])
            });
        }
        ds.aux
            .iter()
            .find(|c| c.name == column)
            .map(|c| Cell::Text(c.values[self.id].as_str()))
    }

    /// Column value rendered as text (numbers via `Display`).
    pub fn text(&self, column: &str) -> Option<String> {
        self.get(column).map(|c| match c {
            Cell::Number(v) => v.to_string(),
            Cell::Category(s) | Cell::Text(s) => s.to_string(),
        })
    }
}

/// Renumber labels to `1..=C'` over the classes present, preserving order.
pub(crate) fn compact_classes(labels: &[u32], names: &[String]) -> (Vec<u32>, Vec<String>) {
    let mut present = vec![false; names.len()];
    for &l in labels {
        present[l as usize - 1] = true;
    }
    let mut remap = vec![0u32; names.len()];
    let mut kept = Vec::new();
    for (c, &p) in present.iter().enumerate() {
        if p {
            kept.push(names[c].clone());
            remap[c] = kept.len() as u32;
        }
    }
    let labels = labels.iter().map(|&l| remap[l as usize - 1]).collect();
    (labels, kept)
}

fn encode(features: &[FeatureSpec], raw: &[f64], m: usize, options: EncodeOptions) -> (Vec<f64>, usize) {
    let f = features.len();
    let dim: usize = features.iter().map(FeatureSpec::encoded_width).sum();
    let mut out = vec![0.0; m * dim];
    let mut offset = 0;
    for (j, spec) in features.iter().enumerate() {
        match spec.kind {
            FeatureKind::Numeric => {
                let col = (0..m).map(|i| raw[i * f + j]);
                let (mean, std) = if options.standardize {
                    let mean = col.clone().sum::<f64>() / m as f64;
                    let var = col.clone().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
                    (mean, var.sqrt())
                } else {
                    (0.0, 1.0)
                };
                for (i, v) in col.enumerate() {
                    out[i * dim + offset] = if std > 0.0 { (v - mean) / std } else { 0.0 };
                }
            }
            FeatureKind::Ordinal => {
                for i in 0..m {
                    out[i * dim + offset] = raw[i * f + j];
                }
            }
            FeatureKind::Categorical => {
                for i in 0..m {
                    let code = raw[i * f + j] as usize;
                    out[i * dim + offset + code] = 1.0;
                }
            }
        }
        offset += spec.encoded_width();
    }
    (out, dim)
}
