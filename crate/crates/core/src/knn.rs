//! Normalized Euclidean distance, exact neighbor queries over an active pool
//! and a leave-self-out majority-vote KNN classifier.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Datasets up to this size get a precomputed distance matrix by default.
pub const DEFAULT_CACHE_THRESHOLD: usize = 10_000;

/// `sqrt(sum_j (a_j - b_j)^2 / |f|)`.
pub fn distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::contract("distance needs at least one feature"));
    }
    Ok(distance_unchecked(a, b))
}

#[inline]
fn distance_unchecked(a: &[f64], b: &[f64]) -> f64 {
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (ss / a.len() as f64).sqrt()
}

/// Distance-space view of a dataset, optionally with every pairwise distance
/// precomputed.
pub struct KnnSpace<'a> {
    dataset: &'a Dataset,
    cache: Option<Vec<f64>>,
}

impl<'a> KnnSpace<'a> {
    pub fn new(dataset: &'a Dataset) -> Self {
        KnnSpace::with_cache_threshold(dataset, DEFAULT_CACHE_THRESHOLD)
    }

    pub fn with_cache_threshold(dataset: &'a Dataset, threshold: usize) -> Self {
        let m = dataset.len();
        let cache = (m <= threshold).then(|| {
            let mut d = vec![0.0; m * m];
            d.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
                for (j, slot) in row.iter_mut().enumerate() {
                    *slot = distance_unchecked(dataset.row(i), dataset.row(j));
                }
            });
            d
        });
        KnnSpace { dataset, cache }
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    pub fn is_cached(&self) -> bool {
        self.cache.is_some()
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        match &self.cache {
            Some(d) => d[i * self.dataset.len() + j],
            None => distance_unchecked(self.dataset.row(i), self.dataset.row(j)),
        }
    }

    /// Index over all instances.
    pub fn full_index(&self) -> NeighborIndex<'_, 'a> {
        NeighborIndex::new(self, (0..self.dataset.len()).collect())
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Candidate {
    dist: f64,
    id: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact nearest-neighbor queries restricted to a set of reference ids.
pub struct NeighborIndex<'s, 'a> {
    space: &'s KnnSpace<'a>,
    active: Vec<usize>,
    is_active: Vec<bool>,
}

impl<'s, 'a> NeighborIndex<'s, 'a> {
    /// Reference ids are deduplicated and sorted; queries never depend on the
    /// order they were supplied in.
    pub fn new(space: &'s KnnSpace<'a>, mut reference: Vec<usize>) -> Self {
        reference.sort_unstable();
        reference.dedup();
        let mut is_active = vec![false; space.dataset.len()];
        for &i in &reference {
            is_active[i] = true;
        }
        NeighborIndex {
            space,
            active: reference,
            is_active,
        }
    }

    pub fn reference_ids(&self) -> &[usize] {
        &self.active
    }

    pub fn contains(&self, id: usize) -> bool {
        self.is_active.get(id).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn space(&self) -> &'s KnnSpace<'a> {
        self.space
    }

    /// The `k` reference ids nearest to `query`, ascending by distance with
    /// ties broken by lower id. The query id itself is never returned.
    pub fn neighbors(&self, query: usize, k: usize) -> Result<Vec<usize>> {
        if query >= self.space.dataset.len() {
            return Err(Error::contract(format!("query id {query} not in dataset")));
        }
        let available = self.active.len() - usize::from(self.contains(query));
        if k > available {
            return Err(Error::contract(format!(
                "k={k} exceeds the {available} reference instances available"
            )));
        }
        Ok(self.neighbors_unchecked(query, k))
    }

    fn neighbors_unchecked(&self, query: usize, k: usize) -> Vec<usize> {
        if k == 0 {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        for &id in &self.active {
            if id == query {
                continue;
            }
            let cand = Candidate {
                dist: self.space.dist(query, id),
                id,
            };
            if heap.len() < k {
                heap.push(cand);
            } else if cand < *heap.peek().expect("heap is full") {
                heap.pop();
                heap.push(cand);
            }
        }
        heap.into_sorted_vec().into_iter().map(|c| c.id).collect()
    }
}

/// Majority vote among `k` neighbors. Vote ties go to the tied class of the
/// nearest neighbor; `neighbors` must be ascending by distance.
pub fn vote(labels: impl Iterator<Item = u32> + Clone, class_count: usize) -> u32 {
    let mut counts = vec![0usize; class_count + 1];
    for l in labels.clone() {
        counts[l as usize] += 1;
    }
    let best = *counts.iter().max().expect("at least one class");
    labels
        .into_iter()
        .find(|&l| counts[l as usize] == best)
        .expect("non-empty neighbor list")
}

pub struct KnnModel<'s, 'a> {
    k: usize,
    index: NeighborIndex<'s, 'a>,
}

impl<'s, 'a> KnnModel<'s, 'a> {
    pub fn fit(index: NeighborIndex<'s, 'a>, k: usize) -> Result<Self> {
        if index.is_empty() {
            return Err(Error::contract("KNN model needs a non-empty reference set"));
        }
        if k == 0 || k >= index.len() {
            return Err(Error::contract(format!(
                "k={k} must lie in [1, {}) for a reference set of {}",
                index.len(),
                index.len()
            )));
        }
        Ok(KnnModel { k, index })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn index(&self) -> &NeighborIndex<'s, 'a> {
        &self.index
    }

    /// Leave-self-out prediction for any dataset instance.
    pub fn predict(&self, query: usize) -> Result<u32> {
        let neighbors = self.index.neighbors(query, self.k)?;
        Ok(self.vote_over(&neighbors))
    }

    fn vote_over(&self, neighbors: &[usize]) -> u32 {
        let ds = self.index.space.dataset;
        vote(neighbors.iter().map(|&i| ds.label(i)), ds.class_count())
    }

    /// Neighbor lists and predictions for every reference instance.
    pub fn neighbor_table(&self) -> NeighborTable {
        let ds = self.index.space.dataset;
        let rows: Vec<(Vec<usize>, u32)> = self
            .index
            .active
            .par_iter()
            .map(|&id| {
                let n = self.index.neighbors_unchecked(id, self.k);
                let p = self.vote_over(&n);
                (n, p)
            })
            .collect();
        let mut lists = vec![Vec::new(); ds.len()];
        let mut hit = vec![false; ds.len()];
        for (&id, (n, p)) in self.index.active.iter().zip(rows) {
            hit[id] = p == ds.label(id);
            lists[id] = n;
        }
        NeighborTable {
            k: self.k,
            lists,
            hit,
        }
    }

    /// Reference ids whose leave-self-out prediction equals their label, ascending.
    pub fn positive_hits(&self) -> Vec<usize> {
        self.neighbor_table().positive_hits()
    }

    /// Fraction of reference instances predicted correctly.
    pub fn training_accuracy(&self) -> f64 {
        let table = self.neighbor_table();
        table.positive_hits().len() as f64 / self.index.len() as f64
    }
}

/// Frozen per-iteration KNN state: each reference instance's neighbor list
/// and whether it is a positive hit. Indexed by dataset id; ids outside the
/// reference set have an empty list and are never hits.
#[derive(Debug, Clone)]
pub struct NeighborTable {
    pub k: usize,
    lists: Vec<Vec<usize>>,
    hit: Vec<bool>,
}

impl NeighborTable {
    pub fn neighbors_of(&self, id: usize) -> &[usize] {
        &self.lists[id]
    }

    pub fn is_hit(&self, id: usize) -> bool {
        self.hit[id]
    }

    pub fn positive_hits(&self) -> Vec<usize> {
        (0..self.hit.len()).filter(|&i| self.hit[i]).collect()
    }
}
