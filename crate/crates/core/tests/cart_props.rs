mod common;

use common::{numeric_dataset, reference_tree, ref_internal_nodes, same_tree};
use proptest::prelude::*;
use subsetter::cart::{fit_tree, primary_split_candidates, TreeParams};
use subsetter::dataset::{synth_local_structures, Dataset, SynthParams};
use subsetter::eval::tree_accuracy;

const CP_LIST: [f64; 5] = [0.01, 0.015, 0.02, 0.025, 0.05];

/// Labels compacted to 1..=C so every class is present.
fn toy(rows: Vec<Vec<f64>>, labels: Vec<u32>) -> Dataset {
    let mut seen: Vec<u32> = labels.clone();
    seen.sort_unstable();
    seen.dedup();
    let labels = labels.iter().map(|l| seen.iter().position(|s| s == l).unwrap() as u32 + 1).collect();
    numeric_dataset(rows, labels)
}

fn toy_strategy(dim: usize) -> impl Strategy<Value = Dataset> {
    (6usize..48)
        .prop_flat_map(move |n| {
            (
                prop::collection::vec(prop::collection::vec(0i32..12, dim), n),
                prop::collection::vec(1u32..=3, n),
            )
        })
        .prop_map(|(rows, labels)| {
            toy(rows.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect(), labels)
        })
}

fn params_strategy() -> impl Strategy<Value = TreeParams> {
    (prop::sample::select(vec![0.0, 0.01, 0.05, 0.2]), 1usize..10).prop_map(|(cp, n)| TreeParams::with_min_node(cp, n))
}

fn all(ds: &Dataset) -> Vec<usize> {
    (0..ds.len()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_exhaustive_reference_1d(ds in toy_strategy(1), p in params_strategy()) {
        let tree = fit_tree(&ds, &all(&ds), &p).unwrap();
        let reference = reference_tree(&ds, &all(&ds), &p);
        prop_assert!(same_tree(&tree.root, &reference), "{:?}\nvs\n{:?}", tree.root, reference);
        prop_assert_eq!(tree.node_count, ref_internal_nodes(&reference));
    }

    #[test]
    fn matches_exhaustive_reference_2d(ds in toy_strategy(2), p in params_strategy()) {
        let tree = fit_tree(&ds, &all(&ds), &p).unwrap();
        prop_assert!(same_tree(&tree.root, &reference_tree(&ds, &all(&ds), &p)));
    }

    #[test]
    fn node_count_never_grows_with_cp(ds in toy_strategy(2), min_node in 1usize..8) {
        let counts: Vec<usize> = CP_LIST
            .iter()
            .map(|&cp| fit_tree(&ds, &all(&ds), &TreeParams::with_min_node(cp, min_node)).unwrap().node_count)
            .collect();
        prop_assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
    }

    #[test]
    fn fit_ignores_id_order(ds in toy_strategy(2), p in params_strategy(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut ids = all(&ds);
        ids.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let a = fit_tree(&ds, &all(&ds), &p).unwrap();
        let b = fit_tree(&ds, &ids, &p).unwrap();
        prop_assert_eq!(a.root, b.root);
    }

    #[test]
    fn batch_prediction_equals_single(ds in toy_strategy(2), p in params_strategy()) {
        let tree = fit_tree(&ds, &all(&ds), &p).unwrap();
        let batch = tree.predict_ids(&ds, &all(&ds));
        let single: Vec<u32> = all(&ds).iter().map(|&i| tree.predict_id(&ds, i)).collect();
        prop_assert_eq!(batch, single);
    }

    #[test]
    fn unpruned_tree_memorizes_distinct_points(n in 4usize..40, labels in prop::collection::vec(1u32..=3, 40)) {
        // Distinct x, so every point can be isolated.
        let rows = (0..n).map(|i| vec![i as f64 * 0.5]).collect();
        let ds = toy(rows, labels[..n].to_vec());
        let tree = fit_tree(&ds, &all(&ds), &TreeParams::with_min_node(0.0, 1)).unwrap();
        prop_assert_eq!(tree_accuracy(&tree, &ds, &all(&ds)), 1.0);
    }
}

#[test]
fn node_count_never_grows_with_cp_on_synthetic_data() {
    for seed in 0..3 {
        let data = synth_local_structures(&SynthParams {
            cluster_count: 4,
            per_cluster_size: 150,
            rng_seed: seed,
            ..Default::default()
        })
        .unwrap();
        let ds = &data.dataset;
        let ids = all(ds);
        let counts: Vec<usize> =
            CP_LIST.iter().map(|&cp| fit_tree(ds, &ids, &TreeParams::new(cp)).unwrap().node_count).collect();
        assert!(counts.windows(2).all(|w| w[0] >= w[1]), "seed {seed}: {counts:?}");
        // And on every single cluster, where the planted rule lives.
        for c in &data.truth.clusters {
            let ids: Vec<usize> = c.ids().collect();
            let counts: Vec<usize> =
                CP_LIST.iter().map(|&cp| fit_tree(ds, &ids, &TreeParams::new(cp)).unwrap().node_count).collect();
            assert!(counts.windows(2).all(|w| w[0] >= w[1]), "seed {seed}: {counts:?}");
        }
    }
}

#[test]
fn top_ranked_root_feature_is_brute_force_best() {
    let data = synth_local_structures(&SynthParams {
        cluster_count: 2,
        per_cluster_size: 400,
        class_count: 2,
        noise_rate: 0.05,
        rng_seed: 4,
        ..Default::default()
    })
    .unwrap();
    let ds = &data.dataset;
    let ids: Vec<usize> = data.truth.clusters[0].ids().collect();
    let p = TreeParams::new(0.0);
    // Best single split over every (feature, midpoint) pair = root of a depth-1 reference tree.
    let stump = TreeParams { max_depth: 1, ..p };
    let reference = reference_tree(ds, &ids, &stump);
    let common::RefTree::Split { feature, .. } = reference else {
        panic!("planted rule must produce a split")
    };
    let ranked = primary_split_candidates(ds, &ids, &p).unwrap();
    assert_eq!(ranked[0].feature, ds.feature_names()[feature]);
    assert!(data.truth.clusters[0].rule_features.contains(&feature));
}
