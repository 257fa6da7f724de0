//! Recursive-partitioning classification trees with complexity-parameter
//! pruning, and the inspection helpers used by the reports.
//!
//! A split is kept only when its impurity decrease is positive and at least
//! `cp` times the root node's total impurity (`n * impurity`).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureKind, FeatureSpec};
use crate::error::{Error, Result};

/// Multiclass categorical features with at most this many observed levels
/// get an exhaustive subset search.
const EXHAUSTIVE_LEVELS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Gini,
    Entropy,
}

impl Criterion {
    /// `n * impurity` for a class-count vector.
    fn total(self, counts: &[usize]) -> f64 {
        let n: usize = counts.iter().sum();
        if n == 0 {
            return 0.0;
        }
        let n = n as f64;
        match self {
            Criterion::Gini => n - counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / n,
            Criterion::Entropy => -counts
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| {
                    let p = c as f64 / n;
                    c as f64 * p.ln()
                })
                .sum::<f64>(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeParams {
    pub cp: f64,
    /// Minimum instances in a node to attempt a split.
    pub min_split: usize,
    /// Minimum instances in any leaf.
    pub min_bucket: usize,
    pub max_depth: usize,
    #[serde(default)]
    pub criterion: Criterion,
}

impl TreeParams {
    /// `min_split` 20, `min_bucket` 7, depth 30.
    pub fn new(cp: f64) -> Self {
        TreeParams::with_min_node(cp, 20)
    }

    /// `min_bucket` follows as `round(min_node / 3)`, at least 1.
    pub fn with_min_node(cp: f64, min_node: usize) -> Self {
        TreeParams {
            cp,
            min_split: min_node,
            min_bucket: ((min_node as f64 / 3.0).round() as usize).max(1),
            max_depth: 30,
            criterion: Criterion::Gini,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.cp >= 0.0 && self.cp.is_finite()) {
            return Err(Error::config(format!("cp must be finite and non-negative, got {}", self.cp)));
        }
        if self.min_bucket == 0 {
            return Err(Error::config("min_bucket must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SplitRule {
    /// Left when `value < threshold`.
    Threshold { feature: usize, threshold: f64 },
    /// Left when the category code is in `left`; codes seen at the node but
    /// routed right are in `right`.
    Categories {
        feature: usize,
        left: Vec<usize>,
        right: Vec<usize>,
    },
}

impl SplitRule {
    pub fn feature(&self) -> usize {
        match self {
            SplitRule::Threshold { feature, .. } | SplitRule::Categories { feature, .. } => *feature,
        }
    }

    /// `None` for a category code never seen at the node.
    pub fn goes_left(&self, raw: &[f64]) -> Option<bool> {
        match self {
            SplitRule::Threshold { feature, threshold } => Some(raw[*feature] < *threshold),
            SplitRule::Categories { feature, left, right } => {
                let code = raw[*feature] as usize;
                if left.contains(&code) {
                    Some(true)
                } else if right.contains(&code) {
                    Some(false)
                } else {
                    None
                }
            }
        }
    }

    /// Direction string per category in spec order (`L`, `R`, `-` for absent),
    /// or `< threshold` for numeric splits.
    pub fn describe(&self, spec: &FeatureSpec) -> String {
        match self {
            SplitRule::Threshold { threshold, .. } => format!("< {threshold}"),
            SplitRule::Categories { left, right, .. } => (0..spec.categories.len())
                .map(|c| {
                    if left.contains(&c) {
                        'L'
                    } else if right.contains(&c) {
                        'R'
                    } else {
                        '-'
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf {
        class_counts: Vec<usize>,
        predicted: u32,
    },
    Split {
        rule: SplitRule,
        improvement: f64,
        class_counts: Vec<usize>,
        n_left: usize,
        n_right: usize,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn class_counts(&self) -> &[usize] {
        match self {
            TreeNode::Leaf { class_counts, .. } | TreeNode::Split { class_counts, .. } => class_counts,
        }
    }

    fn internal_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.internal_count() + right.internal_count(),
        }
    }

    fn visit_splits<'t>(&'t self, out: &mut Vec<(&'t SplitRule, f64)>) {
        if let TreeNode::Split {
            rule,
            improvement,
            left,
            right,
            ..
        } = self
        {
            out.push((rule, *improvement));
            left.visit_splits(out);
            right.visit_splits(out);
        }
    }
}

/// Class index (1-based) with the largest count; ties go to the lowest class.
fn majority(counts: &[usize]) -> u32 {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best as u32 + 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    pub root: TreeNode,
    pub params: TreeParams,
    /// Number of internal (split) nodes.
    pub node_count: usize,
    pub training_ids: Vec<usize>,
    features: Vec<FeatureSpec>,
    class_count: usize,
}

impl TreeModel {
    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn predict(&self, raw: &[f64]) -> Result<u32> {
        if raw.len() != self.features.len() {
            return Err(Error::DimensionMismatch {
                expected: self.features.len(),
                got: raw.len(),
            });
        }
        Ok(self.leaf_for(raw).1)
    }

    pub fn predict_id(&self, dataset: &Dataset, id: usize) -> u32 {
        self.leaf_for(dataset.raw_row(id)).1
    }

    pub fn predict_ids(&self, dataset: &Dataset, ids: &[usize]) -> Vec<u32> {
        ids.iter().map(|&i| self.predict_id(dataset, i)).collect()
    }

    fn leaf_for(&self, raw: &[f64]) -> (&TreeNode, u32) {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { predicted, .. } => return (node, *predicted),
                TreeNode::Split {
                    rule,
                    n_left,
                    n_right,
                    left,
                    right,
                    ..
                } => {
                    let go_left = rule.goes_left(raw).unwrap_or(n_left >= n_right);
                    node = if go_left { left } else { right };
                }
            }
        }
    }

    /// Names of features used by internal nodes, in feature order.
    pub fn node_features(&self) -> Vec<String> {
        let mut splits = Vec::new();
        self.root.visit_splits(&mut splits);
        let used: BTreeSet<usize> = splits.iter().map(|(r, _)| r.feature()).collect();
        used.into_iter().map(|f| self.features[f].name.clone()).collect()
    }

    pub fn root_feature(&self) -> Option<String> {
        match &self.root {
            TreeNode::Split { rule, .. } => Some(self.features[rule.feature()].name.clone()),
            TreeNode::Leaf { .. } => None,
        }
    }

    /// Improvements of every split, in preorder.
    pub fn split_improvements(&self) -> Vec<f64> {
        let mut splits = Vec::new();
        self.root.visit_splits(&mut splits);
        splits.into_iter().map(|(_, imp)| imp).collect()
    }

    /// Total impurity (`n * impurity`) of the root node.
    pub fn root_risk(&self) -> f64 {
        self.params.criterion.total(self.root.class_counts())
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn to_json(&self) -> TreeJson {
        node_json(&self.root, &self.features)
    }
}

/// Stable JSON form of a tree node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeJson {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub left_categories: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub improvement: Option<f64>,
    pub class_counts: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub left: Option<Box<TreeJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub right: Option<Box<TreeJson>>,
}

fn node_json(node: &TreeNode, features: &[FeatureSpec]) -> TreeJson {
    match node {
        TreeNode::Leaf {
            class_counts,
            predicted,
        } => TreeJson {
            feature: None,
            kind: None,
            threshold: None,
            left_categories: None,
            improvement: None,
            class_counts: class_counts.clone(),
            predicted: Some(*predicted),
            left: None,
            right: None,
        },
        TreeNode::Split {
            rule,
            improvement,
            class_counts,
            left,
            right,
            ..
        } => {
            let spec = &features[rule.feature()];
            let (kind, threshold, left_categories) = match rule {
                SplitRule::Threshold { threshold, .. } => ("numeric", Some(*threshold), None),
                SplitRule::Categories { left, .. } => (
                    "categorical",
                    None,
                    Some(left.iter().map(|&c| spec.categories[c].clone()).collect()),
                ),
            };
            TreeJson {
                feature: Some(spec.name.clone()),
                kind: Some(kind.to_string()),
                threshold,
                left_categories,
                improvement: Some(*improvement),
                class_counts: class_counts.clone(),
                predicted: None,
                left: Some(Box::new(node_json(left, features))),
                right: Some(Box::new(node_json(right, features))),
            }
        }
    }
}

/// Best split found for one feature at a node.
#[derive(Debug, Clone, PartialEq)]
struct FoundSplit {
    rule: SplitRule,
    improvement: f64,
}

struct Grower<'d> {
    dataset: &'d Dataset,
    params: TreeParams,
    class_count: usize,
    min_improvement: f64,
}

impl Grower<'_> {
    fn counts(&self, ids: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.class_count];
        for &i in ids {
            c[self.dataset.label(i) as usize - 1] += 1;
        }
        c
    }

    fn grow(&self, ids: &mut [usize], depth: usize) -> TreeNode {
        let class_counts = self.counts(ids);
        let leaf = |class_counts: Vec<usize>| TreeNode::Leaf {
            predicted: majority(&class_counts),
            class_counts,
        };
        let pure = class_counts.iter().filter(|&&n| n > 0).count() <= 1;
        if ids.len() < self.params.min_split || pure || depth >= self.params.max_depth {
            return leaf(class_counts);
        }
        let Some(best) = self.best_split(ids, &class_counts) else {
            return leaf(class_counts);
        };
        if !(best.improvement > 0.0) || best.improvement < self.min_improvement {
            return leaf(class_counts);
        }
        let mut n_left = 0;
        for i in 0..ids.len() {
            let raw = self.dataset.raw_row(ids[i]);
            if best.rule.goes_left(raw).expect("split built from node categories") {
                ids.swap(i, n_left);
                n_left += 1;
            }
        }
        let (l, r) = ids.split_at_mut(n_left);
        let n_right = r.len();
        TreeNode::Split {
            left: Box::new(self.grow(l, depth + 1)),
            right: Box::new(self.grow(r, depth + 1)),
            rule: best.rule,
            improvement: best.improvement,
            class_counts,
            n_left,
            n_right,
        }
    }

    fn best_split(&self, ids: &[usize], counts: &[usize]) -> Option<FoundSplit> {
        let mut best: Option<FoundSplit> = None;
        for f in 0..self.dataset.feature_count() {
            if let Some(s) = self.best_for_feature(f, ids, counts) {
                if best.as_ref().is_none_or(|b| s.improvement > b.improvement) {
                    best = Some(s);
                }
            }
        }
        best
    }

    fn best_for_feature(&self, feature: usize, ids: &[usize], counts: &[usize]) -> Option<FoundSplit> {
        match self.dataset.features()[feature].kind {
            FeatureKind::Numeric | FeatureKind::Ordinal => self.best_threshold(feature, ids, counts),
            FeatureKind::Categorical => self.best_category_split(feature, ids, counts),
        }
    }

    fn best_threshold(&self, feature: usize, ids: &[usize], counts: &[usize]) -> Option<FoundSplit> {
        let crit = self.params.criterion;
        let parent = crit.total(counts);
        let mut pairs: Vec<(f64, usize)> = ids
            .iter()
            .map(|&i| (self.dataset.raw_value(i, feature), self.dataset.label(i) as usize - 1))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pairs.len();
        let mut left = vec![0usize; self.class_count];
        let mut right = counts.to_vec();
        let mut best: Option<(f64, f64)> = None;
        for i in 0..n - 1 {
            let (v, c) = pairs[i];
            left[c] += 1;
            right[c] -= 1;
            let next = pairs[i + 1].0;
            if !(v < next) {
                continue;
            }
            let n_left = i + 1;
            if n_left < self.params.min_bucket || n - n_left < self.params.min_bucket {
                continue;
            }
            let improvement = parent - crit.total(&left) - crit.total(&right);
            if best.is_none_or(|(b, _)| improvement > b) {
                let mut t = 0.5 * (v + next);
                if t <= v {
                    t = next;
                }
                best = Some((improvement, t));
            }
        }
        best.map(|(improvement, threshold)| FoundSplit {
            rule: SplitRule::Threshold { feature, threshold },
            improvement,
        })
    }

    fn best_category_split(&self, feature: usize, ids: &[usize], counts: &[usize]) -> Option<FoundSplit> {
        let crit = self.params.criterion;
        let parent = crit.total(counts);
        let levels = self.dataset.features()[feature].categories.len();
        let mut per_level = vec![vec![0usize; self.class_count]; levels];
        for &i in ids {
            let code = self.dataset.raw_value(i, feature) as usize;
            per_level[code][self.dataset.label(i) as usize - 1] += 1;
        }
        let present: Vec<usize> = (0..levels).filter(|&l| per_level[l].iter().sum::<usize>() > 0).collect();
        if present.len() < 2 {
            return None;
        }
        let classes_present: Vec<usize> = (0..self.class_count).filter(|&c| counts[c] > 0).collect();

        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut consider = |left_set: Vec<usize>| {
            let mut left = vec![0usize; self.class_count];
            for &l in &left_set {
                for (acc, &c) in left.iter_mut().zip(&per_level[l]) {
                    *acc += c;
                }
            }
            let n_left: usize = left.iter().sum();
            let n_right = ids.len() - n_left;
            if n_left < self.params.min_bucket || n_right < self.params.min_bucket {
                return;
            }
            let right: Vec<usize> = counts.iter().zip(&left).map(|(a, b)| a - b).collect();
            let improvement = parent - crit.total(&left) - crit.total(&right);
            if best.as_ref().is_none_or(|(b, _)| improvement > *b) {
                best = Some((improvement, left_set));
            }
        };

        if classes_present.len() > 2 && present.len() <= EXHAUSTIVE_LEVELS {
            let rest = &present[1..];
            for mask in 0..(1usize << rest.len()) - 1 {
                let mut left_set = vec![present[0]];
                left_set.extend(rest.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &l)| l));
                consider(left_set);
            }
        } else {
            // order levels by the share of one reference class; for two-class
            // nodes the best split is a prefix of this order
            let reference = classes_present[0];
            let mut order = present.clone();
            order.sort_by(|&a, &b| {
                let pa = per_level[a][reference] as f64 / per_level[a].iter().sum::<usize>() as f64;
                let pb = per_level[b][reference] as f64 / per_level[b].iter().sum::<usize>() as f64;
                pa.total_cmp(&pb).then(a.cmp(&b))
            });
            for cut in 1..order.len() {
                consider(order[..cut].to_vec());
            }
        }

        best.map(|(improvement, left_set)| {
            let mut left = left_set;
            left.sort_unstable();
            let mut right: Vec<usize> = present.iter().copied().filter(|l| !left.contains(l)).collect();
            if !left.contains(&present[0]) {
                std::mem::swap(&mut left, &mut right);
            }
            FoundSplit {
                rule: SplitRule::Categories { feature, left, right },
                improvement,
            }
        })
    }
}

/// Grow a tree on `ids` of `dataset`.
pub fn fit_tree(dataset: &Dataset, ids: &[usize], params: &TreeParams) -> Result<TreeModel> {
    params.validate()?;
    if ids.is_empty() {
        return Err(Error::contract("cannot fit a tree on an empty id set"));
    }
    let mut work = ids.to_vec();
    work.sort_unstable();
    let training_ids = work.clone();
    let class_count = dataset.class_count();
    let mut root_counts = vec![0; class_count];
    for &i in &work {
        root_counts[dataset.label(i) as usize - 1] += 1;
    }
    let grower = Grower {
        dataset,
        params: *params,
        class_count,
        min_improvement: params.cp * params.criterion.total(&root_counts),
    };
    let root = grower.grow(&mut work, 0);
    Ok(TreeModel {
        node_count: root.internal_count(),
        root,
        params: *params,
        training_ids,
        features: dataset.features().to_vec(),
        class_count,
    })
}

/// A feature's best root split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub feature: String,
    pub rule: SplitRule,
    pub description: String,
    pub improvement: f64,
}

/// Best root split per feature, by decreasing improvement (ties: lower
/// feature index first). Empty when the node holds a single class.
pub fn primary_split_candidates(dataset: &Dataset, ids: &[usize], params: &TreeParams) -> Result<Vec<SplitCandidate>> {
    params.validate()?;
    if ids.len() < 2 {
        return Err(Error::contract("primary split candidates need at least two instances"));
    }
    let grower = Grower {
        dataset,
        params: *params,
        class_count: dataset.class_count(),
        min_improvement: 0.0,
    };
    let counts = grower.counts(ids);
    if counts.iter().filter(|&&n| n > 0).count() < 2 {
        return Ok(Vec::new());
    }
    let mut out: Vec<SplitCandidate> = (0..dataset.feature_count())
        .filter_map(|f| grower.best_for_feature(f, ids, &counts))
        .map(|s| {
            let spec = &dataset.features()[s.rule.feature()];
            SplitCandidate {
                feature: spec.name.clone(),
                description: s.rule.describe(spec),
                rule: s.rule,
                improvement: s.improvement,
            }
        })
        .collect();
    out.sort_by(|a, b| b.improvement.total_cmp(&a.improvement));
    Ok(out)
}

/// Fractions of `ids` routed left and right by the tree's root split.
pub fn root_split_proportions(tree: &TreeModel, dataset: &Dataset, ids: &[usize]) -> Result<(f64, f64)> {
    let TreeNode::Split {
        rule, n_left, n_right, ..
    } = &tree.root
    else {
        return Err(Error::contract("tree has no root split"));
    };
    if ids.is_empty() {
        return Err(Error::contract("no instances to route"));
    }
    let left = ids
        .iter()
        .filter(|&&i| rule.goes_left(dataset.raw_row(i)).unwrap_or(n_left >= n_right))
        .count();
    let lf = left as f64 / ids.len() as f64;
    Ok((lf, 1.0 - lf))
}
