use std::path::{Path, PathBuf};

use super::{BaselineReport, ExperimentReport};
use crate::error::{Error, Result};

fn f(v: f64) -> String {
    format!("{v:.6}")
}

fn opt(v: Option<f64>) -> String {
    v.map(f).unwrap_or_default()
}

fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Write `report.json` plus one CSV per table and the plot series. Returns
/// the paths written.
pub fn write_report_files(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut out = |name: &str| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };

    write_json(&out("report.json"), report)?;

    let a = &report.aggregates;
    write_table(
        &out("summary.csv"),
        &[
            "sst",
            "subset_count",
            "mean_cv_accuracy_pct",
            "cv_accuracy_variance",
            "mean_size",
            "coverage",
            "whole_cv_accuracy_pct",
            "remainder_size",
            "remainder_whole_accuracy_pct",
        ],
        &[vec![
            a.sst.to_string(),
            a.subset_count.to_string(),
            f(a.mean_cv_accuracy_pct),
            f(a.cv_accuracy_variance),
            f(a.mean_size),
            f(a.coverage),
            f(a.whole_cv_accuracy_pct),
            report.remainder.size.to_string(),
            opt(report.remainder.whole_accuracy_pct),
        ]],
    )?;

    let subset_header = [
        "model",
        "size",
        "class_count",
        "node_count",
        "cv_accuracy_pct",
        "train_accuracy_pct",
        "kappa",
        "whole_accuracy_pct",
        "whole_kappa",
        "whole_root_left",
        "whole_root_right",
        "root_feature",
        "node_features",
    ];
    let w = &report.whole;
    let mut rows = vec![vec![
        "whole".to_string(),
        w.size.to_string(),
        w.class_count.to_string(),
        w.node_count.to_string(),
        opt(w.cv_accuracy_pct),
        f(w.train_accuracy_pct),
        f(w.kappa),
        f(w.train_accuracy_pct),
        f(w.kappa),
        opt(w.root_left),
        opt(w.root_right),
        w.root_feature.clone().unwrap_or_default(),
        w.node_features.join(";"),
    ]];
    for s in &report.subsets {
        let m = &s.model;
        rows.push(vec![
            (s.index + 1).to_string(),
            m.size.to_string(),
            m.class_count.to_string(),
            m.node_count.to_string(),
            opt(m.cv_accuracy_pct),
            f(m.train_accuracy_pct),
            f(m.kappa),
            f(s.whole_accuracy_pct),
            f(s.whole_kappa),
            opt(s.whole_root_left),
            opt(s.whole_root_right),
            m.root_feature.clone().unwrap_or_default(),
            m.node_features.join(";"),
        ]);
    }
    write_table(&out("subsets.csv"), &subset_header, &rows)?;

    let rows: Vec<Vec<String>> = report
        .cp_sweep
        .iter()
        .map(|r| {
            vec![
                f(r.cp),
                r.whole_nodes.to_string(),
                f(r.whole_cv_accuracy_pct),
                f(r.subset_mean_nodes),
                f(r.subset_mean_cv_accuracy_pct),
                opt(r.baseline_mean_nodes),
                opt(r.baseline_mean_cv_accuracy_pct),
            ]
        })
        .collect();
    write_table(
        &out("cp_sweep.csv"),
        &[
            "cp",
            "whole_nodes",
            "whole_cv_accuracy_pct",
            "subset_mean_nodes",
            "subset_mean_cv_accuracy_pct",
            "baseline_mean_nodes",
            "baseline_mean_cv_accuracy_pct",
        ],
        &rows,
    )?;

    let fu = &report.feature_usage;
    let mut header = vec!["model"];
    header.extend(fu.features.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = fu
        .models
        .iter()
        .zip(&fu.cells)
        .map(|(m, cells)| {
            std::iter::once(m.clone())
                .chain(cells.iter().map(|u| u.as_str().to_string()))
                .collect()
        })
        .collect();
    write_table(&out("feature_usage.csv"), &header, &rows)?;

    let rows: Vec<Vec<String>> = report
        .root_candidates
        .iter()
        .enumerate()
        .map(|(i, c)| vec![(i + 1).to_string(), c.feature.clone(), c.description.clone(), f(c.improvement)])
        .collect();
    write_table(&out("root_candidates.csv"), &["rank", "feature", "split", "improvement"], &rows)?;

    let whole_cv = opt(report.whole.cv_accuracy_pct);
    let rows: Vec<Vec<String>> = report
        .subsets
        .iter()
        .map(|s| {
            vec![
                (s.index + 1).to_string(),
                s.model.size.to_string(),
                opt(s.model.cv_accuracy_pct),
                whole_cv.clone(),
            ]
        })
        .collect();
    write_table(
        &out("plot_subsets.csv"),
        &["subset", "size", "cv_accuracy_pct", "whole_cv_accuracy_pct"],
        &rows,
    )?;

    if let Some(b) = &report.baseline {
        written.extend(write_baseline_tables(b, report, dir)?);
    }
    Ok(written)
}

fn write_baseline_tables(b: &BaselineReport, report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let table = dir.join("baseline.csv");
    let rows: Vec<Vec<String>> = b
        .subsets
        .iter()
        .map(|r| {
            vec![
                (r.index + 1).to_string(),
                r.size.to_string(),
                r.node_count.to_string(),
                f(r.cv_accuracy_pct),
            ]
        })
        .collect();
    write_table(&table, &["baseline_subset", "size", "node_count", "cv_accuracy_pct"], &rows)?;

    let plot = dir.join("plot_baseline.csv");
    let n = b.subsets.len().max(report.subsets.len());
    let rows: Vec<Vec<String>> = (0..n)
        .map(|i| {
            let s = report.subsets.get(i);
            let r = b.subsets.get(i);
            vec![
                (i + 1).to_string(),
                s.map(|s| s.model.size.to_string()).unwrap_or_default(),
                opt(s.and_then(|s| s.model.cv_accuracy_pct)),
                r.map(|r| r.size.to_string()).unwrap_or_default(),
                r.map(|r| f(r.cv_accuracy_pct)).unwrap_or_default(),
                opt(report.whole.cv_accuracy_pct),
            ]
        })
        .collect();
    write_table(
        &plot,
        &[
            "index",
            "subset_size",
            "subset_cv_accuracy_pct",
            "baseline_size",
            "baseline_cv_accuracy_pct",
            "whole_cv_accuracy_pct",
        ],
        &rows,
    )?;
    Ok(vec![table, plot])
}

/// Baseline-only output for the `baseline` command.
pub fn write_baseline_files(b: &BaselineReport, report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let json = dir.join("baseline.json");
    write_json(&json, b)?;
    let mut written = vec![json];
    written.extend(write_baseline_tables(b, report, dir)?);
    Ok(written)
}
