use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_and_sample_variance, random_baseline, tree_accuracy, tree_confusion, tree_cv, BaselineSpec};
use crate::cart::{fit_tree, primary_split_candidates, root_split_proportions, SplitCandidate, TreeModel, TreeParams};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed;
use crate::subsetting::SubsettingResult;

/// Knobs of the evaluation. Per-subset detail rows use `detail_cp`; the cp
/// sweep covers `cp_list`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub cp_list: Vec<f64>,
    pub detail_cp: f64,
    pub folds: usize,
    pub min_node: usize,
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            cp_list: vec![0.01, 0.015, 0.02, 0.025, 0.05],
            detail_cp: 0.015,
            folds: 5,
            min_node: 20,
            seed: 0,
        }
    }
}

impl EvalSettings {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::config("folds must be at least 2"));
        }
        if self.min_node == 0 {
            return Err(Error::config("min_node must be positive"));
        }
        for &cp in self.cp_list.iter().chain(std::iter::once(&self.detail_cp)) {
            if !(cp >= 0.0 && cp.is_finite()) {
                return Err(Error::config(format!("cp values must be finite and non-negative, got {cp}")));
            }
        }
        Ok(())
    }

    pub fn tree_params(&self, cp: f64) -> TreeParams {
        TreeParams::with_min_node(cp, self.min_node)
    }

    fn fold_seed(&self, purpose: &str) -> u64 {
        seed::substream(self.seed, purpose)
    }
}

/// One model evaluated on one group of instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub size: usize,
    pub class_count: usize,
    pub node_count: usize,
    pub cv_accuracy_pct: Option<f64>,
    pub train_accuracy_pct: f64,
    pub kappa: f64,
    pub node_features: Vec<String>,
    pub root_feature: Option<String>,
    /// Root split proportions of this model's own tree over its instances.
    pub root_left: Option<f64>,
    pub root_right: Option<f64>,
}

/// A discovered subset: its own tree, and the whole-dataset tree scored on
/// its members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetRow {
    pub index: usize,
    pub model: ModelRow,
    pub whole_accuracy_pct: f64,
    pub whole_kappa: f64,
    /// Where the whole-dataset tree's root split sends this subset's members.
    pub whole_root_left: Option<f64>,
    pub whole_root_right: Option<f64>,
}

/// Instances never captured by a subset, served by the whole-dataset tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderRow {
    pub size: usize,
    pub whole_accuracy_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpRow {
    pub cp: f64,
    pub whole_nodes: usize,
    pub whole_cv_accuracy_pct: f64,
    pub subset_mean_nodes: f64,
    pub subset_mean_cv_accuracy_pct: f64,
    pub baseline_mean_nodes: Option<f64>,
    pub baseline_mean_cv_accuracy_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub sst: usize,
    pub subset_count: usize,
    pub mean_cv_accuracy_pct: f64,
    /// Sample variance (n - 1) of per-subset CV accuracy in percent.
    pub cv_accuracy_variance: f64,
    pub mean_size: f64,
    pub coverage: f64,
    pub whole_cv_accuracy_pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Usage {
    Unused,
    Node,
    Root,
}

impl Usage {
    pub fn as_str(self) -> &'static str {
        match self {
            Usage::Unused => "",
            Usage::Node => "node",
            Usage::Root => "root",
        }
    }
}

/// Feature-by-model usage grid; row 0 is the whole-dataset tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureUsage {
    pub features: Vec<String>,
    pub models: Vec<String>,
    pub cells: Vec<Vec<Usage>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub index: usize,
    pub size: usize,
    pub node_count: usize,
    pub cv_accuracy_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub spec: BaselineSpec,
    pub cp: f64,
    pub subsets: Vec<BaselineRow>,
    pub mean_cv_accuracy_pct: f64,
    pub mean_nodes: f64,
    pub per_cp: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub dataset_hash: String,
    pub instance_count: usize,
    pub settings: EvalSettings,
    pub whole: ModelRow,
    pub subsets: Vec<SubsetRow>,
    pub remainder: RemainderRow,
    pub cp_sweep: Vec<CpRow>,
    pub aggregates: Aggregates,
    pub feature_usage: FeatureUsage,
    pub root_candidates: Vec<SplitCandidate>,
    pub baseline: Option<BaselineReport>,
}

fn pct(x: f64) -> f64 {
    100.0 * x
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn model_row(dataset: &Dataset, ids: &[usize], tree: &TreeModel, cv: Option<f64>) -> Result<ModelRow> {
    let confusion = tree_confusion(tree, dataset, ids);
    let (root_left, root_right) = match root_split_proportions(tree, dataset, ids) {
        Ok((l, r)) => (Some(l), Some(r)),
        Err(_) => (None, None),
    };
    Ok(ModelRow {
        size: ids.len(),
        class_count: dataset.class_histogram(ids).iter().filter(|&&n| n > 0).count(),
        node_count: tree.node_count,
        cv_accuracy_pct: cv.map(pct),
        train_accuracy_pct: pct(confusion.accuracy()?),
        kappa: confusion.kappa()?,
        node_features: tree.node_features(),
        root_feature: tree.root_feature(),
        root_left,
        root_right,
    })
}

fn check_result(dataset: &Dataset, result: &SubsettingResult) -> Result<()> {
    let hash = dataset.content_hash();
    if hash != result.dataset_hash {
        return Err(Error::StaleResult {
            expected: hash,
            found: result.dataset_hash.clone(),
        });
    }
    if result.instance_count != dataset.len() {
        return Err(Error::contract("result instance count does not match the dataset"));
    }
    result.check_partition()
}

/// Train and cross-validate trees on the whole dataset and on every
/// discovered subset, across the cp list, and assemble the report tables.
pub fn compare_whole_vs_subsets(
    dataset: &Dataset,
    result: &SubsettingResult,
    settings: &EvalSettings,
    baseline: Option<&BaselineSpec>,
) -> Result<ExperimentReport> {
    settings.validate()?;
    check_result(dataset, result)?;
    let all: Vec<usize> = (0..dataset.len()).collect();
    let whole_fold_seed = settings.fold_seed("folds/whole");

    // cp sweep
    let mut cp_sweep = Vec::with_capacity(settings.cp_list.len());
    for &cp in &settings.cp_list {
        let params = settings.tree_params(cp);
        let whole_tree = fit_tree(dataset, &all, &params)?;
        let whole_cv = tree_cv(dataset, &all, &params, settings.folds, whole_fold_seed)?;
        let per_subset: Vec<(usize, Option<f64>)> = result
            .subsets
            .par_iter()
            .map(|s| -> Result<(usize, Option<f64>)> {
                let tree = fit_tree(dataset, &s.member_ids, &params)?;
                let cv = subset_cv(dataset, &s.member_ids, &params, settings, s.index)?;
                Ok((tree.node_count, cv))
            })
            .collect::<Result<_>>()?;
        cp_sweep.push(CpRow {
            cp,
            whole_nodes: whole_tree.node_count,
            whole_cv_accuracy_pct: pct(whole_cv.mean_accuracy),
            subset_mean_nodes: mean(per_subset.iter().map(|p| p.0 as f64)),
            subset_mean_cv_accuracy_pct: mean(per_subset.iter().filter_map(|p| p.1).map(pct)),
            baseline_mean_nodes: None,
            baseline_mean_cv_accuracy_pct: None,
        });
    }

    // detail rows at detail_cp
    let params = settings.tree_params(settings.detail_cp);
    let whole_tree = fit_tree(dataset, &all, &params)?;
    let whole_cv = tree_cv(dataset, &all, &params, settings.folds, whole_fold_seed)?;
    let whole = model_row(dataset, &all, &whole_tree, Some(whole_cv.mean_accuracy))?;
    let subsets: Vec<SubsetRow> = result
        .subsets
        .par_iter()
        .map(|s| -> Result<SubsetRow> {
            let ids = &s.member_ids;
            let tree = fit_tree(dataset, ids, &params)?;
            let cv = subset_cv(dataset, ids, &params, settings, s.index)?;
            let whole_on_subset = tree_confusion(&whole_tree, dataset, ids);
            let (wl, wr) = match root_split_proportions(&whole_tree, dataset, ids) {
                Ok((l, r)) => (Some(l), Some(r)),
                Err(_) => (None, None),
            };
            Ok(SubsetRow {
                index: s.index,
                model: model_row(dataset, ids, &tree, cv)?,
                whole_accuracy_pct: pct(whole_on_subset.accuracy()?),
                whole_kappa: whole_on_subset.kappa()?,
                whole_root_left: wl,
                whole_root_right: wr,
            })
        })
        .collect::<Result<_>>()?;

    let remainder = RemainderRow {
        size: result.remainder_ids.len(),
        whole_accuracy_pct: (!result.remainder_ids.is_empty())
            .then(|| pct(tree_accuracy(&whole_tree, dataset, &result.remainder_ids))),
    };

    let aggregates = aggregate(result, &subsets, whole.cv_accuracy_pct.unwrap_or(0.0));
    let feature_usage = feature_usage(dataset, &whole, &subsets);
    let root_candidates = if dataset.len() >= 2 {
        primary_split_candidates(dataset, &all, &params)?
    } else {
        Vec::new()
    };

    let baseline = match baseline {
        Some(spec) => {
            let b = evaluate_baseline(dataset, spec, settings)?;
            for (row, &(_, nodes, cv)) in cp_sweep.iter_mut().zip(&b.per_cp) {
                row.baseline_mean_nodes = Some(nodes);
                row.baseline_mean_cv_accuracy_pct = Some(cv);
            }
            Some(b)
        }
        None => None,
    };

    Ok(ExperimentReport {
        dataset_hash: result.dataset_hash.clone(),
        instance_count: dataset.len(),
        settings: settings.clone(),
        whole,
        subsets,
        remainder,
        cp_sweep,
        aggregates,
        feature_usage,
        root_candidates,
        baseline,
    })
}

fn subset_cv(
    dataset: &Dataset,
    ids: &[usize],
    params: &TreeParams,
    settings: &EvalSettings,
    index: usize,
) -> Result<Option<f64>> {
    if ids.len() < 2 {
        return Ok(None);
    }
    let seed = settings.fold_seed(&format!("folds/subset/{index}"));
    Ok(Some(tree_cv(dataset, ids, params, settings.folds, seed)?.mean_accuracy))
}

/// Summary over subset rows; recomputable from the rows alone.
pub(crate) fn aggregate(result: &SubsettingResult, rows: &[SubsetRow], whole_cv_pct: f64) -> Aggregates {
    let cvs: Vec<f64> = rows.iter().filter_map(|r| r.model.cv_accuracy_pct).collect();
    let (mean_cv, var) = mean_and_sample_variance(&cvs);
    Aggregates {
        sst: result.config.sst,
        subset_count: rows.len(),
        mean_cv_accuracy_pct: mean_cv,
        cv_accuracy_variance: var,
        mean_size: mean(rows.iter().map(|r| r.model.size as f64)),
        coverage: result.coverage(),
        whole_cv_accuracy_pct: whole_cv_pct,
    }
}

fn feature_usage(dataset: &Dataset, whole: &ModelRow, subsets: &[SubsetRow]) -> FeatureUsage {
    let features = dataset.feature_names();
    let usage_row = |row: &ModelRow| -> Vec<Usage> {
        features
            .iter()
            .map(|f| {
                if row.root_feature.as_deref() == Some(f.as_str()) {
                    Usage::Root
                } else if row.node_features.contains(f) {
                    Usage::Node
                } else {
                    Usage::Unused
                }
            })
            .collect()
    };
    let mut models = vec!["whole".to_string()];
    let mut cells = vec![usage_row(whole)];
    for s in subsets {
        models.push((s.index + 1).to_string());
        cells.push(usage_row(&s.model));
    }
    FeatureUsage { features, models, cells }
}

/// Cross-validate trees on random control subsets drawn from the whole dataset.
pub fn evaluate_baseline(dataset: &Dataset, spec: &BaselineSpec, settings: &EvalSettings) -> Result<BaselineReport> {
    settings.validate()?;
    let all: Vec<usize> = (0..dataset.len()).collect();
    let subsets = random_baseline(&all, spec)?;
    let eval_at = |cp: f64| -> Result<Vec<BaselineRow>> {
        let params = settings.tree_params(cp);
        subsets
            .par_iter()
            .enumerate()
            .map(|(j, ids)| {
                let tree = fit_tree(dataset, ids, &params)?;
                let seed = settings.fold_seed(&format!("folds/baseline/{j}"));
                let cv = tree_cv(dataset, ids, &params, settings.folds, seed)?;
                Ok(BaselineRow {
                    index: j,
                    size: ids.len(),
                    node_count: tree.node_count,
                    cv_accuracy_pct: pct(cv.mean_accuracy),
                })
            })
            .collect()
    };
    let mut per_cp = Vec::with_capacity(settings.cp_list.len());
    for &cp in &settings.cp_list {
        let rows = eval_at(cp)?;
        per_cp.push((
            cp,
            mean(rows.iter().map(|r| r.node_count as f64)),
            mean(rows.iter().map(|r| r.cv_accuracy_pct)),
        ));
    }
    let rows = eval_at(settings.detail_cp)?;
    Ok(BaselineReport {
        spec: *spec,
        cp: settings.detail_cp,
        mean_cv_accuracy_pct: mean(rows.iter().map(|r| r.cv_accuracy_pct)),
        mean_nodes: mean(rows.iter().map(|r| r.node_count as f64)),
        subsets: rows,
        per_cp,
    })
}
