//! Brute-force reference implementations used as test oracles. Deliberately
//! naive: full sorts, full rescans, no shared code with the library beyond
//! reading the dataset.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use subsetter::cart::{SplitRule, TreeNode, TreeParams};
use subsetter::dataset::{Dataset, EncodeOptions, FeatureSpec};
use rand::Rng;
use subsetter::dataset::SynthParams;
use subsetter::subsetting::{KStep, SubsettingConfig, SubsettingResult};

pub fn dist(ds: &Dataset, a: usize, b: usize) -> f64 {
    let (x, y) = (ds.row(a), ds.row(b));
    let mut ss = 0.0;
    for j in 0..x.len() {
        ss += (x[j] - y[j]) * (x[j] - y[j]);
    }
    (ss / x.len() as f64).sqrt()
}

/// Sort the whole pool by (distance, id), drop the query, keep `k`.
pub fn brute_neighbors(ds: &Dataset, pool: &[usize], query: usize, k: usize) -> Vec<usize> {
    let mut all: Vec<(f64, usize)> = pool.iter().filter(|&&i| i != query).map(|&i| (dist(ds, query, i), i)).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.into_iter().take(k).map(|(_, i)| i).collect()
}

/// Plurality label; among tied labels the one appearing first (nearest).
pub fn brute_vote(ds: &Dataset, neighbors: &[usize]) -> u32 {
    let count = |l: u32| neighbors.iter().filter(|&&n| ds.label(n) == l).count();
    let best = neighbors.iter().map(|&n| count(ds.label(n))).max().unwrap();
    neighbors.iter().map(|&n| ds.label(n)).find(|&l| count(l) == best).unwrap()
}

pub fn brute_is_hit(ds: &Dataset, pool: &[usize], id: usize, k: usize) -> bool {
    brute_vote(ds, &brute_neighbors(ds, pool, id, k)) == ds.label(id)
}

/// Fixed point of "add any pool hit that is a neighbor of a member",
/// recomputing neighbor lists from scratch for every member.
pub fn brute_closure(ds: &Dataset, pool: &[usize], seed: usize, k: usize) -> BTreeSet<usize> {
    let mut hit = HashMap::new();
    let mut members = BTreeSet::from([seed]);
    let mut expanded = BTreeSet::new();
    while let Some(&m) = members.difference(&expanded).next() {
        expanded.insert(m);
        for n in brute_neighbors(ds, pool, m, k) {
            if *hit.entry(n).or_insert_with(|| brute_is_hit(ds, pool, n, k)) {
                members.insert(n);
            }
        }
    }
    members
}

/// Leave-self-out KNN accuracy (percent) within `members`, K capped at
/// `|members| - 1`.
pub fn brute_member_accuracy(ds: &Dataset, members: &[usize], k: usize) -> f64 {
    if members.len() < 2 {
        return 100.0;
    }
    let k = k.min(members.len() - 1);
    let hits = members.iter().filter(|&&i| brute_is_hit(ds, members, i, k)).count();
    100.0 * hits as f64 / members.len() as f64
}

/// Reference tree over numeric features only.
#[derive(Debug, Clone, PartialEq)]
pub enum RefTree {
    Leaf { counts: Vec<usize>, predicted: u32 },
    Split { feature: usize, threshold: f64, counts: Vec<usize>, left: Box<RefTree>, right: Box<RefTree> },
}

fn counts_of(ds: &Dataset, ids: &[usize]) -> Vec<usize> {
    let mut c = vec![0; ds.class_count()];
    for &i in ids {
        c[ds.label(i) as usize - 1] += 1;
    }
    c
}

/// `n * gini` as `n - sum c^2 / n`.
fn weighted_gini(c: &[usize]) -> f64 {
    let n: usize = c.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    n - c.iter().map(|&x| (x * x) as f64).sum::<f64>() / n
}

fn first_max(c: &[usize]) -> u32 {
    let best = *c.iter().max().unwrap();
    c.iter().position(|&x| x == best).unwrap() as u32 + 1
}

/// Enumerate every (feature, midpoint) split at every node, recounting
/// children from scratch; first strictly best wins (lowest feature, lowest
/// threshold).
pub fn reference_tree(ds: &Dataset, ids: &[usize], p: &TreeParams) -> RefTree {
    let root_risk = weighted_gini(&counts_of(ds, ids));
    grow_ref(ds, ids, p, p.cp * root_risk, 0)
}

fn grow_ref(ds: &Dataset, ids: &[usize], p: &TreeParams, min_gain: f64, depth: usize) -> RefTree {
    let counts = counts_of(ds, ids);
    let leaf = RefTree::Leaf { predicted: first_max(&counts), counts: counts.clone() };
    let classes = counts.iter().filter(|&&c| c > 0).count();
    if ids.len() < p.min_split || classes <= 1 || depth >= p.max_depth {
        return leaf;
    }
    let parent = weighted_gini(&counts);
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..ds.feature_count() {
        let mut values: Vec<f64> = ids.iter().map(|&i| ds.raw_value(i, f)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            let (l, r): (Vec<usize>, Vec<usize>) = ids.iter().partition(|&&i| ds.raw_value(i, f) < t);
            if l.len() < p.min_bucket || r.len() < p.min_bucket {
                continue;
            }
            let gain = parent - weighted_gini(&counts_of(ds, &l)) - weighted_gini(&counts_of(ds, &r));
            if best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, f, t));
            }
        }
    }
    match best {
        Some((gain, f, t)) if gain > 0.0 && gain >= min_gain => {
            let (l, r): (Vec<usize>, Vec<usize>) = ids.iter().partition(|&&i| ds.raw_value(i, f) < t);
            RefTree::Split {
                feature: f,
                threshold: t,
                counts,
                left: Box::new(grow_ref(ds, &l, p, min_gain, depth + 1)),
                right: Box::new(grow_ref(ds, &r, p, min_gain, depth + 1)),
            }
        }
        _ => leaf,
    }
}

pub fn same_tree(node: &TreeNode, r: &RefTree) -> bool {
    match (node, r) {
        (TreeNode::Leaf { class_counts, predicted }, RefTree::Leaf { counts, predicted: p }) => {
            class_counts == counts && predicted == p
        }
        (
            TreeNode::Split { rule: SplitRule::Threshold { feature, threshold }, class_counts, left, right, .. },
            RefTree::Split { feature: f, threshold: t, counts, left: rl, right: rr },
        ) => feature == f && threshold == t && class_counts == counts && same_tree(left, rl) && same_tree(right, rr),
        _ => false,
    }
}

pub fn ref_internal_nodes(r: &RefTree) -> usize {
    match r {
        RefTree::Leaf { .. } => 0,
        RefTree::Split { left, right, .. } => 1 + ref_internal_nodes(left) + ref_internal_nodes(right),
    }
}

/// Numeric dataset from rows, classes named "c1".."cC".
pub fn numeric_dataset(rows: Vec<Vec<f64>>, labels: Vec<u32>) -> Dataset {
    let d = rows[0].len();
    let c = *labels.iter().max().unwrap() as usize;
    let features = (0..d).map(|j| FeatureSpec::numeric(format!("x{j}"))).collect();
    let names = (1..=c).map(|k| format!("c{k}")).collect();
    Dataset::from_raw(features, rows, labels, names, EncodeOptions::default()).unwrap()
}

/// Kappa from a dense matrix, written directly from the definition.
pub fn kappa_by_hand(m: &[Vec<f64>]) -> f64 {
    let n: f64 = m.iter().flatten().sum();
    let c = m.len();
    let po = (0..c).map(|i| m[i][i]).sum::<f64>() / n;
    let pe = (0..c)
        .map(|i| {
            let row: f64 = m[i].iter().sum();
            let col: f64 = m.iter().map(|r| r[i]).sum();
            row * col
        })
        .sum::<f64>()
        / (n * n);
    if pe == 1.0 {
        0.0
    } else {
        (po - pe) / (1.0 - pe)
    }
}

/// K in force at `coverage`: the last step whose threshold has been reached.
pub fn scheduled_k(cfg: &SubsettingConfig, coverage: f64) -> usize {
    cfg.k_schedule.iter().filter(|s| s.coverage <= coverage).map(|s| s.k).next_back().unwrap()
}

/// Check a discovery result against brute force. Returns every violation
/// found (empty when the result is sound).
pub fn audit(ds: &Dataset, r: &SubsettingResult) -> Vec<String> {
    let m = ds.len();
    let mut bad = Vec::new();
    let mut owner = vec![0usize; m];
    for &i in r.subsets.iter().flat_map(|s| &s.member_ids).chain(&r.remainder_ids) {
        owner[i] += 1;
    }
    if let Some(i) = owner.iter().position(|&n| n != 1) {
        bad.push(format!("id {i} assigned {} times", owner[i]));
    }
    let mut taken = vec![false; m];
    for s in &r.subsets {
        let tag = format!("subset {}", s.index);
        let pool: Vec<usize> = (0..m).filter(|&i| !taken[i]).collect();
        let coverage = (m - pool.len()) as f64 / m as f64;
        if s.k_used != scheduled_k(&r.config, coverage) {
            bad.push(format!("{tag}: K {} not scheduled at coverage {coverage}", s.k_used));
        }
        let k = s.k_used;
        let mut hit = HashMap::new();
        let mut is_hit = |i: usize| *hit.entry(i).or_insert_with(|| brute_is_hit(ds, &pool, i, k));
        if !s.member_ids.contains(&s.seed_id) {
            bad.push(format!("{tag}: seed not a member"));
        }
        for &i in &s.member_ids {
            if taken[i] {
                bad.push(format!("{tag}: member {i} was already taken"));
            }
            if !is_hit(i) {
                bad.push(format!("{tag}: member {i} is not a positive hit"));
            }
            for n in brute_neighbors(ds, &pool, i, k) {
                if is_hit(n) && s.member_ids.binary_search(&n).is_err() {
                    bad.push(format!("{tag}: not closed, hit neighbor {n} of {i} missing"));
                }
            }
        }
        let closure: Vec<usize> = brute_closure(ds, &pool, s.seed_id, k).into_iter().collect();
        if closure != s.member_ids {
            bad.push(format!("{tag}: members differ from the closure of seed {}", s.seed_id));
        }
        let classes = s.member_ids.iter().map(|&i| ds.label(i)).collect::<BTreeSet<_>>().len();
        if !(s.size < m && classes <= ds.class_count() && s.size == s.member_ids.len()) {
            bad.push(format!("{tag}: size/class bounds violated"));
        }
        let acc = brute_member_accuracy(ds, &s.member_ids, k);
        let c = &r.config;
        let pen = if s.size <= c.sst { c.alpha_l * (c.sst - s.size) as f64 } else { c.alpha_u * (s.size - c.sst) as f64 };
        if (acc - s.knn_accuracy).abs() > 1e-9 || (100.0 - acc + pen - s.regularized_error).abs() > 1e-9 {
            bad.push(format!("{tag}: score mismatch ({} vs oracle {acc})", s.knn_accuracy));
        }
        for &i in &s.member_ids {
            taken[i] = true;
        }
    }
    bad
}

/// A random small synthetic problem (m <= 1000) and a random valid config.
pub fn random_case(rng: &mut impl Rng) -> (SynthParams, SubsettingConfig) {
    let cluster_count = rng.random_range(2..=5);
    let class_count = rng.random_range(2..=4);
    let params = SynthParams {
        cluster_count,
        per_cluster_size: rng.random_range(15..=1000 / cluster_count),
        class_count,
        noise_rate: rng.random_range(0.0..0.3),
        feature_count: rng.random_range((cluster_count + 1).max(4)..=8),
        rng_seed: rng.random(),
        ..SynthParams::default()
    };
    let steps = rng.random_range(1..=4);
    let mut k = rng.random_range(1..=3);
    let mut cov = 0.0;
    let mut k_schedule = Vec::new();
    for _ in 0..steps {
        k_schedule.push(KStep { coverage: cov, k });
        cov += rng.random_range(0.05..0.3);
        k += rng.random_range(1..=2);
    }
    let config = SubsettingConfig {
        sst: rng.random_range(5..=300),
        alpha_l: rng.random_range(0.0..1.0),
        alpha_u: rng.random_range(0.0..1.0),
        k_schedule,
        coverage_target: rng.random_range(0.3..=1.0),
        seed_fraction: rng.random_range(0.05..=1.0),
        rng_seed: rng.random(),
        ..SubsettingConfig::default()
    };
    (params, config)
}
