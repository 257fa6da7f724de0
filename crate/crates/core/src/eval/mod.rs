//! Accuracy, Cohen's kappa, cross-validation, the random-subset baseline and
//! the whole-dataset versus per-subset comparison report.

mod export;
mod report;

pub(crate) use export::write_json;
pub use export::{write_baseline_files, write_report_files};
pub use report::{
    compare_whole_vs_subsets, evaluate_baseline, Aggregates, BaselineReport, BaselineRow, CpRow, EvalSettings,
    ExperimentReport, FeatureUsage, ModelRow, RemainderRow, SubsetRow, Usage,
};

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cart::{fit_tree, TreeModel, TreeParams};
use crate::dataset::{kfold_split, Dataset, FoldAssignment};
use crate::error::{Error, Result};
use crate::seed;
use crate::subsetting::SubsettingResult;

/// Rows are actual classes, columns predicted (both 1-based labels mapped to
/// index `label - 1`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(class_count: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; class_count]; class_count],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let c = counts.len();
        if counts.iter().any(|r| r.len() != c) {
            return Err(Error::contract("confusion matrix must be square"));
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn from_labels(actual: &[u32], predicted: &[u32], class_count: usize) -> Self {
        let mut m = ConfusionMatrix::new(class_count);
        for (&a, &p) in actual.iter().zip(predicted) {
            m.add(a, p);
        }
        m
    }

    pub fn add(&mut self, actual: u32, predicted: u32) {
        self.counts[actual as usize - 1][predicted as usize - 1] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> Result<f64> {
        let n = self.total();
        if n == 0 {
            return Err(Error::contract("accuracy of an empty confusion matrix"));
        }
        Ok(self.trace() as f64 / n as f64)
    }

    /// Cohen's kappa; 0 when chance agreement is 1.
    pub fn kappa(&self) -> Result<f64> {
        let n = self.total();
        if n == 0 {
            return Err(Error::contract("kappa of an empty confusion matrix"));
        }
        let n = n as f64;
        let p_o = self.trace() as f64 / n;
        let c = self.counts.len();
        let p_e: f64 = (0..c)
            .map(|k| {
                let row: u64 = self.counts[k].iter().sum();
                let col: u64 = self.counts.iter().map(|r| r[k]).sum();
                (row as f64 / n) * (col as f64 / n)
            })
            .sum();
        if p_e >= 1.0 {
            return Ok(0.0);
        }
        Ok((p_o - p_e) / (1.0 - p_e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
}

/// Train on each fold's complement, score on the fold, average.
///
/// `folds` indexes positions of `ids`. `scorer` returns an accuracy in [0, 1].
pub fn cross_validate<M>(
    ids: &[usize],
    folds: &FoldAssignment,
    trainer: impl Fn(&[usize]) -> Result<M>,
    scorer: impl Fn(&M, &[usize]) -> f64,
) -> Result<CvResult> {
    if folds.fold_of.len() != ids.len() {
        return Err(Error::contract("fold assignment does not match the id list"));
    }
    let mut fold_accuracies = Vec::with_capacity(folds.k);
    for fold in 0..folds.k {
        let test: Vec<usize> = folds.test_positions(fold).into_iter().map(|p| ids[p]).collect();
        let train: Vec<usize> = folds.train_positions(fold).into_iter().map(|p| ids[p]).collect();
        if train.is_empty() {
            return Err(Error::contract(format!("fold {fold} leaves no training instances")));
        }
        if test.is_empty() {
            return Err(Error::contract(format!("fold {fold} is empty")));
        }
        let model = trainer(&train)?;
        fold_accuracies.push(scorer(&model, &test));
    }
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
    Ok(CvResult {
        mean_accuracy,
        fold_accuracies,
    })
}

pub fn tree_accuracy(tree: &TreeModel, dataset: &Dataset, ids: &[usize]) -> f64 {
    let hits = ids.iter().filter(|&&i| tree.predict_id(dataset, i) == dataset.label(i)).count();
    hits as f64 / ids.len() as f64
}

pub fn tree_confusion(tree: &TreeModel, dataset: &Dataset, ids: &[usize]) -> ConfusionMatrix {
    let actual: Vec<u32> = ids.iter().map(|&i| dataset.label(i)).collect();
    ConfusionMatrix::from_labels(&actual, &tree.predict_ids(dataset, ids), dataset.class_count())
}

/// Stratified k-fold CV of a tree on `ids`. Sets smaller than `k` fall back
/// to leave-one-out; a single instance cannot be cross-validated.
pub fn tree_cv(dataset: &Dataset, ids: &[usize], params: &TreeParams, k: usize, fold_seed: u64) -> Result<CvResult> {
    if ids.len() < 2 {
        return Err(Error::contract("cross-validation needs at least two instances"));
    }
    let labels: Vec<u32> = ids.iter().map(|&i| dataset.label(i)).collect();
    let folds = kfold_split(&labels, k.min(ids.len()), fold_seed)?;
    cross_validate(
        ids,
        &folds,
        |train| fit_tree(dataset, train, params),
        |tree, test| tree_accuracy(tree, dataset, test),
    )
}

/// Size distribution and count of the random control subsets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
    pub rng_seed: u64,
}

impl BaselineSpec {
    /// Sample mean and sample standard deviation of the discovered subset
    /// sizes; one baseline subset per discovered subset.
    pub fn from_result(result: &SubsettingResult, rng_seed: u64) -> Self {
        let sizes: Vec<f64> = result.subsets.iter().map(|s| s.size as f64).collect();
        let (mean, var) = mean_and_sample_variance(&sizes);
        BaselineSpec {
            mean,
            std: var.sqrt(),
            count: sizes.len(),
            rng_seed,
        }
    }
}

pub(crate) fn mean_and_sample_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var)
}

const SIZE_REDRAWS: usize = 100;

/// Disjoint uniformly sampled subsets whose sizes follow
/// `round(Normal(mean, std))` clamped to `[2, |pool|]`. A size that overflows
/// what is left of the pool is redrawn, then clipped.
pub fn random_baseline(pool: &[usize], spec: &BaselineSpec) -> Result<Vec<Vec<usize>>> {
    if !(spec.std >= 0.0) || !spec.mean.is_finite() || !spec.std.is_finite() {
        return Err(Error::config("baseline size distribution must have finite mean and std >= 0"));
    }
    if spec.count > 0 && pool.len() < 2 * spec.count {
        return Err(Error::contract(format!(
            "pool of {} cannot hold {} baseline subsets of at least 2",
            pool.len(),
            spec.count
        )));
    }
    let normal = Normal::new(spec.mean, spec.std).map_err(|e| Error::config(e.to_string()))?;
    let mut rng = seed::rng(spec.rng_seed);
    let mut shuffled = pool.to_vec();
    shuffled.shuffle(&mut rng);
    let mut used = 0;
    let mut out = Vec::with_capacity(spec.count);
    for j in 0..spec.count {
        // leave at least 2 for each subset still to come
        let reserve = 2 * (spec.count - j - 1);
        let room = shuffled.len() - used - reserve;
        let draw = |rng: &mut seed::Rng| (normal.sample(rng).round().max(2.0) as usize).min(pool.len());
        let mut size = draw(&mut rng);
        let mut tries = 1;
        while size > room && tries < SIZE_REDRAWS {
            size = draw(&mut rng);
            tries += 1;
        }
        let size = size.min(room);
        let mut members = shuffled[used..used + size].to_vec();
        members.sort_unstable();
        used += size;
        out.push(members);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{EncodeOptions, FeatureSpec};

    fn cm(rows: &[&[u64]]) -> ConfusionMatrix {
        ConfusionMatrix::from_counts(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(cm(&[&[3, 0], &[0, 4]]).accuracy().unwrap(), 1.0);
        assert_eq!(cm(&[&[0, 3], &[4, 0]]).accuracy().unwrap(), 0.0);
        assert!((cm(&[&[3, 1], &[2, 4]]).accuracy().unwrap() - 0.7).abs() < 1e-12);
        assert!(ConfusionMatrix::new(3).accuracy().is_err());
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(cm(&[&[5, 0, 0], &[0, 3, 0], &[0, 0, 2]]).kappa().unwrap(), 1.0);
        // constant predictor of class 1
        assert_eq!(cm(&[&[6, 0], &[4, 0]]).kappa().unwrap(), 0.0);
        assert!((cm(&[&[20, 5], &[10, 15]]).kappa().unwrap() - 0.4).abs() < 1e-12);
        // single non-zero cell: chance agreement is 1
        assert_eq!(cm(&[&[7, 0], &[0, 0]]).kappa().unwrap(), 0.0);
        assert!(ConfusionMatrix::new(2).kappa().is_err());
        assert!(ConfusionMatrix::from_counts(vec![vec![1, 2]]).is_err());
    }

    fn toy(labels: &[u32]) -> Dataset {
        let c = *labels.iter().max().unwrap() as usize;
        Dataset::from_raw(
            vec![FeatureSpec::numeric("x")],
            (0..labels.len()).map(|i| vec![i as f64]).collect(),
            labels.to_vec(),
            (1..=c).map(|i| i.to_string()).collect(),
            EncodeOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn constant_trainer_scores_prevalence() {
        let ds = toy(&[1, 1, 1, 2, 2, 1, 1, 2, 1, 1]);
        let ids: Vec<usize> = (0..10).collect();
        let folds = kfold_split(ds.labels(), 5, 1).unwrap();
        let cv = cross_validate(
            &ids,
            &folds,
            |_| Ok(1u32),
            |&c, test| test.iter().filter(|&&i| ds.label(i) == c).count() as f64 / test.len() as f64,
        )
        .unwrap();
        // stratified folds of 2 each hold 7/5 class-1 on average; folds are equal-sized
        assert!((cv.mean_accuracy - 0.7).abs() < 1e-12);
        assert!(cv.fold_accuracies.iter().all(|a| (0.0..=1.0).contains(a)));
    }

    #[test]
    fn leave_one_out_memorizer_on_duplicated_pairs() {
        // 6 points as 3 duplicated pairs; a 1-NN memorizer under LOO always
        // finds the twin, so every fold scores 1 when twins share a label and
        // 0 otherwise. Pair labels: (1,1), (2,2), (1,2) -> 4/6.
        let coords: [f64; 6] = [0.0, 0.0, 5.0, 5.0, 9.0, 9.0];
        let labels = [1u32, 1, 2, 2, 1, 2];
        let ids: Vec<usize> = (0..6).collect();
        let folds = FoldAssignment {
            k: 6,
            fold_of: (0..6).collect(),
        };
        let cv = cross_validate(
            &ids,
            &folds,
            |train| Ok(train.to_vec()),
            |train: &Vec<usize>, test| {
                let q = test[0];
                let nearest = *train
                    .iter()
                    .min_by(|&&a, &&b| {
                        (coords[a] - coords[q])
                            .abs()
                            .total_cmp(&(coords[b] - coords[q]).abs())
                            .then(a.cmp(&b))
                    })
                    .unwrap();
                f64::from(labels[nearest] == labels[q])
            },
        )
        .unwrap();
        assert_eq!(cv.fold_accuracies, vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        assert!((cv.mean_accuracy - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn cv_rejects_empty_training_side() {
        let folds = FoldAssignment { k: 1, fold_of: vec![0, 0] };
        let r = cross_validate(&[0, 1], &folds, |_| Ok(()), |_, _| 1.0);
        assert!(r.is_err());
    }

    #[test]
    fn tree_cv_is_deterministic() {
        let labels: Vec<u32> = (0..40).map(|i| if (i / 5) % 2 == 0 { 1 } else { 2 }).collect();
        let ds = toy(&labels);
        let ids: Vec<usize> = (0..40).collect();
        let p = TreeParams::with_min_node(0.0, 2);
        assert_eq!(tree_cv(&ds, &ids, &p, 5, 3).unwrap(), tree_cv(&ds, &ids, &p, 5, 3).unwrap());
        assert!(tree_cv(&ds, &[0], &p, 5, 3).is_err());
        // fewer instances than folds falls back to leave-one-out
        assert_eq!(tree_cv(&ds, &[0, 1, 2], &p, 5, 3).unwrap().fold_accuracies.len(), 3);
    }

    #[test]
    fn baseline_with_zero_std_has_exact_sizes() {
        let pool: Vec<usize> = (0..100).collect();
        let spec = BaselineSpec {
            mean: 12.0,
            std: 0.0,
            count: 5,
            rng_seed: 4,
        };
        let subsets = random_baseline(&pool, &spec).unwrap();
        assert!(subsets.iter().all(|s| s.len() == 12));
        assert_eq!(subsets, random_baseline(&pool, &spec).unwrap());
    }

    #[test]
    fn baseline_subsets_are_disjoint_and_fit_the_pool() {
        let pool: Vec<usize> = (100..160).collect();
        let spec = BaselineSpec {
            mean: 25.0,
            std: 10.0,
            count: 4,
            rng_seed: 8,
        };
        let subsets = random_baseline(&pool, &spec).unwrap();
        let mut seen = std::collections::HashSet::new();
        for s in &subsets {
            assert!(s.len() >= 2);
            for &i in s {
                assert!(pool.contains(&i));
                assert!(seen.insert(i));
            }
        }
        assert!(random_baseline(&pool[..5], &spec).is_err());
    }

    #[test]
    fn sample_variance_uses_n_minus_one() {
        let (m, v) = mean_and_sample_variance(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((v - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!(mean_and_sample_variance(&[3.0]), (3.0, 0.0));
    }
}
