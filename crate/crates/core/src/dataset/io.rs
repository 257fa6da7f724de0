use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{compact_classes, AuxColumn, BinningSpec, Dataset, EncodeOptions, FeatureKind, FeatureSpec};
use crate::error::{Error, Result};

/// How the label column becomes class indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum LabelMode {
    /// Distinct values are classes, ordered numerically when every value is an
    /// integer and lexicographically otherwise.
    #[default]
    Classes,
    /// Continuous target cut into equal-width bins; the range defaults to the
    /// observed min/max.
    Binned {
        bin_count: usize,
        #[serde(default)]
        range: Option<[f64; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadOptions {
    pub encode: EncodeOptions,
    pub label: LabelMode,
}

pub fn read_feature_specs(path: impl AsRef<Path>) -> Result<Vec<FeatureSpec>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let specs: Vec<FeatureSpec> = serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
    for s in &specs {
        s.validate()?;
    }
    Ok(specs)
}

pub fn load_csv(path: impl AsRef<Path>, specs: &[FeatureSpec], label_column: &str) -> Result<Dataset> {
    load_csv_with(path, specs, label_column, &LoadOptions::default())
}

/// Parse a headered CSV. Feature columns are located by name; columns that
/// are neither features nor the label are kept as auxiliary text columns.
pub fn load_csv_with(
    path: impl AsRef<Path>,
    specs: &[FeatureSpec],
    label_column: &str,
    options: &LoadOptions,
) -> Result<Dataset> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers().map_err(csv_err)?.clone();

    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        if index.insert(h, i).is_some() {
            return Err(Error::Data {
                row: None,
                column: Some(h.to_string()),
                message: "duplicate header".into(),
            });
        }
    }
    let mut feature_cols = Vec::with_capacity(specs.len());
    for s in specs {
        s.validate()?;
        match index.get(s.name.as_str()) {
            Some(&i) => feature_cols.push(i),
            None => {
                return Err(Error::Data {
                    row: None,
                    column: Some(s.name.clone()),
                    message: "feature column missing from header".into(),
                })
            }
        }
    }
    let label_col = *index.get(label_column).ok_or_else(|| Error::Data {
        row: None,
        column: Some(label_column.to_string()),
        message: "label column missing from header".into(),
    })?;
    let aux_cols: Vec<usize> = (0..headers.len())
        .filter(|i| *i != label_col && !feature_cols.contains(i))
        .collect();

    let mut rows = Vec::new();
    let mut raw_labels = Vec::new();
    let mut aux: Vec<Vec<String>> = vec![Vec::new(); aux_cols.len()];
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row_no = r + 1;
        let mut row = Vec::with_capacity(specs.len());
        for (spec, &col) in specs.iter().zip(&feature_cols) {
            let cell = record.get(col).unwrap_or("").trim();
            if cell.is_empty() {
                return Err(Error::at(row_no, &spec.name, "missing value"));
            }
            let value = match spec.kind {
                FeatureKind::Numeric => cell
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::at(row_no, &spec.name, format!("non-numeric value '{cell}'")))?,
                FeatureKind::Categorical | FeatureKind::Ordinal => spec
                    .code_of(cell)
                    .ok_or_else(|| Error::at(row_no, &spec.name, format!("unknown category '{cell}'")))?
                    as f64,
            };
            row.push(value);
        }
        let label = record.get(label_col).unwrap_or("").trim();
        if label.is_empty() {
            return Err(Error::at(row_no, label_column, "missing label"));
        }
        raw_labels.push(label.to_string());
        for (k, &col) in aux_cols.iter().enumerate() {
            aux[k].push(record.get(col).unwrap_or("").to_string());
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::data(format!("{} has no data rows", path.display())));
    }

    let (labels, class_names) = encode_labels(&raw_labels, label_column, &options.label)?;
    let aux = aux_cols
        .iter()
        .zip(aux)
        .map(|(&col, values)| AuxColumn {
            name: headers[col].to_string(),
            values,
        })
        .collect();
    Ok(Dataset::from_raw(specs.to_vec(), rows, labels, class_names, options.encode)?.with_aux(aux))
}

fn encode_labels(raw: &[String], column: &str, mode: &LabelMode) -> Result<(Vec<u32>, Vec<String>)> {
    match mode {
        LabelMode::Classes => {
            let ints: Option<Vec<i64>> = raw.iter().map(|s| s.parse::<i64>().ok()).collect();
            let (keys, names): (Vec<String>, Vec<String>) = match ints {
                Some(ints) => {
                    let distinct: BTreeMap<i64, ()> = ints.iter().map(|&v| (v, ())).collect();
                    let names: Vec<String> = distinct.keys().map(i64::to_string).collect();
                    (ints.iter().map(i64::to_string).collect(), names)
                }
                None => {
                    let distinct: BTreeMap<&str, ()> = raw.iter().map(|s| (s.as_str(), ())).collect();
                    (raw.to_vec(), distinct.keys().map(|s| s.to_string()).collect())
                }
            };
            let lookup: HashMap<&str, u32> = names
                .iter()
                .enumerate()
                .map(|(i, n)| (n.as_str(), i as u32 + 1))
                .collect();
            let labels = keys.iter().map(|k| lookup[k.as_str()]).collect();
            Ok((labels, names))
        }
        LabelMode::Binned { bin_count, range } => {
            let mut values = Vec::with_capacity(raw.len());
            for (r, s) in raw.iter().enumerate() {
                let v = s
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::at(r + 1, column, format!("non-numeric target '{s}'")))?;
                values.push(v);
            }
            let spec = match range {
                Some([lo, hi]) => BinningSpec::new(*bin_count, *lo, *hi)?,
                None => BinningSpec::from_values(*bin_count, &values)?,
            };
            let mut labels = Vec::with_capacity(values.len());
            for (r, &v) in values.iter().enumerate() {
                labels.push(spec.class_of(v).map_err(|e| Error::at(r + 1, column, e.to_string()))?);
            }
            let names: Vec<String> = (1..=*bin_count).map(|b| format!("bin{b}")).collect();
            Ok(compact_classes(&labels, &names))
        }
    }
}

/// Write features (raw values, category labels) and the class name per row.
pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>, label_column: &str) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = dataset.feature_names();
    header.push(label_column.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..dataset.len() {
        let mut rec: Vec<String> = dataset
            .raw_row(i)
            .iter()
            .zip(dataset.features())
            .map(|(&v, spec)| {
                if spec.is_numeric() {
                    v.to_string()
                } else {
                    spec.categories[v as usize].clone()
                }
            })
            .collect();
        rec.push(dataset.class_names()[dataset.label(i) as usize - 1].clone());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
