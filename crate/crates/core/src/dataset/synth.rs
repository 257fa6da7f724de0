use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, EncodeOptions, FeatureSpec};
use crate::error::{Error, Result};
use crate::seed;

const CENTER_BOX: f64 = 8.0;
const MIN_CENTER_GAP: f64 = 10.0;

/// Parameters of the planted local-structure generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub cluster_count: usize,
    pub per_cluster_size: usize,
    pub class_count: usize,
    pub noise_rate: f64,
    pub feature_count: usize,
    /// Standard deviation of a cluster along its rule features.
    #[serde(default = "default_rule_spread")]
    pub rule_spread: f64,
    /// Standard deviation along the remaining features.
    #[serde(default = "default_background_spread")]
    pub background_spread: f64,
    pub rng_seed: u64,
}

fn default_rule_spread() -> f64 {
    1.0
}

fn default_background_spread() -> f64 {
    0.25
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            cluster_count: 8,
            per_cluster_size: 375,
            class_count: 4,
            noise_rate: 0.15,
            feature_count: 8,
            rule_spread: default_rule_spread(),
            background_spread: default_background_spread(),
            rng_seed: 0,
        }
    }
}

/// Ground truth for one generated cluster.
///
/// Labels follow `mapping[q]` where `q` is the bit pattern of
/// `x[f] > threshold[f]` over the rule features (first feature is the high bit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTruth {
    pub center: Vec<f64>,
    pub spread: Vec<f64>,
    pub rule_features: Vec<usize>,
    pub thresholds: Vec<f64>,
    pub mapping: Vec<u32>,
    pub first_id: usize,
    pub size: usize,
}

impl ClusterTruth {
    /// Class the cluster's rule assigns to a raw feature vector.
    pub fn apply(&self, raw: &[f64]) -> u32 {
        let q = self
            .rule_features
            .iter()
            .zip(&self.thresholds)
            .fold(0usize, |q, (&f, &t)| (q << 1) | usize::from(raw[f] > t));
        self.mapping[q]
    }

    pub fn ids(&self) -> std::ops::Range<usize> {
        self.first_id..self.first_id + self.size
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub params: SynthParams,
    pub clusters: Vec<ClusterTruth>,
    /// Ids whose label was flipped away from the cluster rule.
    pub flipped: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub dataset: Dataset,
    pub truth: SynthTruth,
}

/// Gaussian clusters with well-separated centers, each labelled by its own
/// rule over one (two classes) or two (three or four classes) designated
/// features. A `noise_rate` fraction of labels is flipped to a different class.
pub fn synth_local_structures(params: &SynthParams) -> Result<SynthData> {
    let p = params;
    if p.cluster_count < 2 {
        return Err(Error::config("cluster_count must be at least 2"));
    }
    if p.class_count < 2 || p.class_count > 4 {
        return Err(Error::config(format!(
            "class_count {} not representable by a one- or two-feature rule (2..=4)",
            p.class_count
        )));
    }
    if p.per_cluster_size == 0 {
        return Err(Error::config("per_cluster_size must be positive"));
    }
    if !(p.rule_spread > 0.0 && p.background_spread > 0.0) {
        return Err(Error::config("spreads must be positive"));
    }
    if !(0.0..1.0).contains(&p.noise_rate) {
        return Err(Error::config("noise_rate must lie in [0, 1)"));
    }
    let rule_width = if p.class_count == 2 { 1 } else { 2 };
    let mut rule_sets: Vec<Vec<usize>> = if rule_width == 1 {
        (0..p.feature_count).map(|f| vec![f]).collect()
    } else {
        (0..p.feature_count)
            .flat_map(|a| (a + 1..p.feature_count).map(move |b| vec![a, b]))
            .collect()
    };
    if rule_sets.len() < p.cluster_count {
        return Err(Error::config(format!(
            "{} features give only {} distinct rules for {} clusters",
            p.feature_count,
            rule_sets.len(),
            p.cluster_count
        )));
    }

    let mut rng = seed::rng(p.rng_seed);
    rule_sets.shuffle(&mut rng);
    let centers = sample_centers(&mut rng, p.cluster_count, p.feature_count)?;

    let m = p.cluster_count * p.per_cluster_size;
    let mut rows = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    let mut clusters = Vec::with_capacity(p.cluster_count);
    for (c, center) in centers.into_iter().enumerate() {
        let rule_features = rule_sets[c].clone();
        let spread: Vec<f64> = (0..p.feature_count)
            .map(|f| if rule_features.contains(&f) { p.rule_spread } else { p.background_spread })
            .collect();
        let mut mapping: Vec<u32> = (1..=p.class_count as u32).collect();
        while mapping.len() < 1 << rule_width {
            mapping.push(rng.random_range(1..=p.class_count as u32));
        }
        mapping.shuffle(&mut rng);
        let cluster = ClusterTruth {
            thresholds: rule_features.iter().map(|&f| center[f]).collect(),
            center,
            spread,
            rule_features,
            mapping,
            first_id: rows.len(),
            size: p.per_cluster_size,
        };
        for _ in 0..p.per_cluster_size {
            let row: Vec<f64> = cluster
                .center
                .iter()
                .zip(&cluster.spread)
                .map(|(&mu, &sd)| Normal::new(mu, sd).expect("positive spread").sample(&mut rng))
                .collect();
            labels.push(cluster.apply(&row));
            rows.push(row);
        }
        clusters.push(cluster);
    }

    let flips = (p.noise_rate * m as f64).round() as usize;
    let mut flipped = rand::seq::index::sample(&mut rng, m, flips).into_vec();
    flipped.sort_unstable();
    for &i in &flipped {
        let offset = rng.random_range(1..p.class_count as u32);
        labels[i] = (labels[i] - 1 + offset) % p.class_count as u32 + 1;
    }

    let features = (1..=p.feature_count).map(|f| FeatureSpec::numeric(format!("x{f}"))).collect();
    let class_names = (1..=p.class_count).map(|c| c.to_string()).collect();
    let dataset = Dataset::from_raw(features, rows, labels, class_names, EncodeOptions::default())
        .map_err(|e| Error::config(format!("infeasible synthetic parameters: {e}")))?;
    Ok(SynthData {
        dataset,
        truth: SynthTruth {
            params: p.clone(),
            clusters,
            flipped,
        },
    })
}

fn sample_centers(rng: &mut seed::Rng, count: usize, dim: usize) -> Result<Vec<Vec<f64>>> {
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut attempts = 0;
    while centers.len() < count {
        attempts += 1;
        if attempts > 100_000 {
            return Err(Error::config("could not place well-separated cluster centers"));
        }
        let cand: Vec<f64> = (0..dim).map(|_| rng.random_range(-CENTER_BOX..CENTER_BOX)).collect();
        let far = centers.iter().all(|c| {
            c.iter().zip(&cand).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() >= MIN_CENTER_GAP
        });
        if far {
            centers.push(cand);
        }
    }
    Ok(centers)
}
