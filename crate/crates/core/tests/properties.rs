//! Cross-module properties: gradient correctness against finite differences,
//! strategy reduction identities, partition exactness under fuzzing, SMOTE
//! geometry, and run-level determinism.

use ndarray::Array2;
use proptest::prelude::*;

use flbench_core::data::{smote, Dataset, Provenance, ResampleMethod, ResampleSpec};
use flbench_core::fed::{
    local_train, run_central, run_federated, run_local, ClientShard, EvalSplit, FedRunConfig,
    FedRunInputs, Strategy, StrategyConfig,
};
use flbench_core::metrics::MetricsConfig;
use flbench_core::nn::{
    backward, forward_train, mlp_init, weighted_cross_entropy, AdamConfig, ModelParams,
    TrainConfig,
};
use flbench_core::partition::{
    partition_feature_skew, partition_iid, partition_quantity_skew, SchemeMeta,
};
use flbench_core::rng::{derive_seed, RngStream};

fn train_loss(params: &ModelParams, x: &Array2<f64>, y: &[u8], w: [f64; 2]) -> f64 {
    let mut p = params.clone();
    let mut stream = RngStream::new(0);
    let (logits, _) = forward_train(&mut p, x.view(), 0.0, &mut stream).unwrap();
    weighted_cross_entropy(logits.view(), y, w).unwrap().0
}

/// Central-difference gradients over the flat trainable vector.
fn finite_diff(params: &ModelParams, x: &Array2<f64>, y: &[u8], w: [f64; 2]) -> Vec<f64> {
    let theta = params.flatten_trainable();
    let h = 1e-5;
    (0..theta.len())
        .map(|i| {
            let mut plus = params.clone();
            let mut tp = theta.clone();
            tp[i] += h;
            plus.assign_trainable(&tp).unwrap();
            let mut minus = params.clone();
            let mut tm = theta.clone();
            tm[i] -= h;
            minus.assign_trainable(&tm).unwrap();
            (train_loss(&plus, x, y, w) - train_loss(&minus, x, y, w)) / (2.0 * h)
        })
        .collect()
}

#[test]
fn backprop_matches_finite_differences_on_random_small_nets() {
    for seed in 0..5u64 {
        let mut s = RngStream::new(seed);
        let hidden = 1 + (s.below(3) as usize); // 1..=3 units per layer
        let layers = vec![3, hidden, hidden.min(2) + 1, 2];
        let mut params = mlp_init(&layers, seed + 100).unwrap();
        for bn in &mut params.bn {
            bn.gamma.mapv_inplace(|g| g * 1.2);
            bn.beta_shift.mapv_inplace(|_| -0.05);
        }
        let x = Array2::from_shape_fn((5, 3), |_| s.normal());
        let y: Vec<u8> = (0..5).map(|i| u8::from(i % 2 == 0)).collect();
        let w = [0.8, 1.9];

        let mut p = params.clone();
        let mut stream = RngStream::new(0);
        let (_, cache) = forward_train(&mut p, x.view(), 0.0, &mut stream).unwrap();
        let grads = backward(&params, &cache, &y, w).unwrap();
        let numeric = finite_diff(&params, &x, &y, w);
        let max_rel = grads
            .flat
            .iter()
            .zip(&numeric)
            .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
            .fold(0.0, f64::max);
        assert!(max_rel < 1e-4, "seed {seed}: max relative error {max_rel}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flatten_round_trip_is_bit_exact(seed in 0u64..1000, h1 in 1usize..6, h2 in 1usize..6) {
        let params = mlp_init(&[4, h1, h2, 2], seed).unwrap();
        let flat = params.flatten();
        let back = params.unflatten(&flat).unwrap();
        prop_assert_eq!(&back, &params);
        prop_assert_eq!(back.flatten(), flat);
    }

    #[test]
    fn loss_is_scale_invariant_in_class_weights(scale in 0.01f64..100.0, seed in 0u64..500) {
        let mut s = RngStream::new(seed);
        let logits = Array2::from_shape_fn((6, 2), |_| s.normal());
        let y: Vec<u8> = (0..6).map(|_| s.below(2) as u8).collect();
        let w = [0.5, 2.0];
        let (a, _) = weighted_cross_entropy(logits.view(), &y, w).unwrap();
        let (b, _) = weighted_cross_entropy(logits.view(), &y, [w[0] * scale, w[1] * scale]).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn smote_output_is_geometrically_sound(seed in 0u64..300, minority in 3usize..12) {
        let n = 40 + minority;
        let mut s = RngStream::new(seed);
        let features = Array2::from_shape_fn((n, 3), |_| s.normal());
        let labels: Vec<u8> = (0..n).map(|i| u8::from(i < minority)).collect();
        let ds = Dataset {
            feature_names: vec!["a".into(), "b".into(), "c".into()],
            missing: Array2::from_elem((n, 3), false),
            features: features.clone(),
            labels,
            provenance: Provenance::Synthetic,
            groups: None,
            group_names: vec![],
        };
        let spec = ResampleSpec {
            method: ResampleMethod::Smote,
            k_neighbors: 3,
            target_minority_ratio: 0.5,
            seed,
        };
        let out = smote(&ds, &spec).unwrap();
        // Count exactness.
        let target = (0.5f64 * 40.0).ceil() as usize;
        prop_assert_eq!(out.positives(), target.max(minority));
        // Originals untouched.
        prop_assert_eq!(out.features.slice(ndarray::s![..n, ..]).to_owned(), ds.features.clone());
        // Synthetic rows stay inside the minority bounding box (a consequence
        // of segment membership).
        for j in 0..3 {
            let lo = (0..minority).map(|i| ds.features[[i, j]]).fold(f64::MAX, f64::min);
            let hi = (0..minority).map(|i| ds.features[[i, j]]).fold(f64::MIN, f64::max);
            for r in n..out.n() {
                prop_assert!(out.features[[r, j]] >= lo - 1e-12);
                prop_assert!(out.features[[r, j]] <= hi + 1e-12);
            }
        }
    }
}

#[test]
fn fuzzed_partitions_are_exact_partitions() {
    let mut s = RngStream::new(99);
    let mut checked = 0usize;
    while checked < 1000 {
        let n = 1 + s.below(400) as usize;
        let k = 1 + s.below(20) as usize;
        if n < k {
            continue;
        }
        let seed = s.next_u64();
        let plan = if checked.is_multiple_of(2) {
            partition_iid(n, k, seed).unwrap()
        } else {
            match partition_quantity_skew(n, k, 0.3 + s.uniform() * 3.0, seed) {
                Ok(plan) => plan,
                // Retries exhausted is a documented outcome when n barely
                // exceeds K under a sparse Dirichlet draw.
                Err(flbench_core::Error::Train(_)) => continue,
                Err(other) => panic!("unexpected error: {other}"),
            }
        };
        assert!(plan.is_partition_of(n), "n={n} k={k} seed={seed}");
        if plan.scheme == flbench_core::partition::Scheme::Iid {
            let sizes: Vec<usize> = plan.clients.iter().map(Vec::len).collect();
            let spread = sizes.iter().max().unwrap() - sizes.iter().min().unwrap();
            assert!(spread <= 1, "iid spread {spread} for n={n} k={k}");
        }
        checked += 1;
    }
}

#[test]
fn pca_partition_is_contiguous_and_exact() {
    let mut s = RngStream::new(5);
    for trial in 0..20 {
        let n = 30 + s.below(200) as usize;
        let k = 1 + s.below(8) as usize;
        let features = Array2::from_shape_fn((n, 4), |_| s.normal());
        let ds = Dataset {
            feature_names: (0..4).map(|j| format!("x{j}")).collect(),
            labels: vec![0; n],
            missing: Array2::from_elem((n, 4), false),
            features: features.clone(),
            provenance: Provenance::Synthetic,
            groups: None,
            group_names: vec![],
        };
        let plan = partition_feature_skew(&ds, k).unwrap();
        assert!(plan.is_partition_of(n), "trial {trial}");
        let SchemeMeta::FeatureSkewPca { direction, .. } = &plan.meta else {
            panic!("wrong meta");
        };
        let score = |i: usize| -> f64 {
            features.row(i).iter().zip(direction).map(|(a, b)| a * b).sum()
        };
        for pair in plan.clients.windows(2) {
            let max_prev = pair[0].iter().map(|&i| score(i)).fold(f64::MIN, f64::max);
            let min_next = pair[1].iter().map(|&i| score(i)).fold(f64::MAX, f64::min);
            assert!(max_prev <= min_next + 1e-12, "trial {trial}");
        }
    }
}

// ---- run-level identities ------------------------------------------------

fn toy_inputs(clients: usize, rows_per_client: usize, seed: u64) -> FedRunInputs {
    let mut s = RngStream::new(seed);
    let mut make_split = |n: usize| {
        let y: Vec<u8> = (0..n).map(|i| u8::from(i % 4 == 0)).collect();
        let x = Array2::from_shape_fn((n, 3), |(i, _)| {
            s.normal() + if y[i] == 1 { 1.5 } else { -1.5 }
        });
        (x, y)
    };
    let shards = (0..clients)
        .map(|_| {
            let (x, y) = make_split(rows_per_client);
            ClientShard {
                train_x: x.clone(),
                train_y: y.clone(),
                raw_x: x,
                raw_y: y,
            }
        })
        .collect();
    let (vx, vy) = make_split(40);
    let (tx, ty) = make_split(40);
    FedRunInputs {
        clients: shards,
        val: EvalSplit { x: vx, y: vy },
        test: EvalSplit { x: tx, y: ty },
        layer_sizes: vec![3, 4, 2],
    }
}

fn toy_cfg(strategy: Strategy, mu: f64, rounds: usize, seed: u64) -> FedRunConfig {
    FedRunConfig {
        local_epochs: 2,
        global_rounds: rounds,
        train: TrainConfig {
            learning_rate: 0.005,
            batch_size: 8,
            dropout_rate: 0.1,
            class_weights: [1.0, 1.0],
            adam: AdamConfig::default(),
        },
        auto_class_weights: true,
        strategy: StrategyConfig {
            strategy,
            mu,
            q: 5e-12,
            lipschitz: 200.0,
            eta_g: 0.1,
            tau: 1e-5,
            server_beta1: 0.9,
            server_beta2: 0.99,
        },
        metrics: MetricsConfig {
            beta: 2.0,
            threshold: 0.5,
        },
        seed,
    }
}

#[test]
fn fedprox_with_zero_mu_matches_fedavg_bit_for_bit() {
    let inputs = toy_inputs(3, 24, 7);
    let avg = run_federated(&inputs, &toy_cfg(Strategy::FedAvg, 0.0, 4, 11)).unwrap();
    let prox = run_federated(&inputs, &toy_cfg(Strategy::FedProx, 0.0, 4, 11)).unwrap();
    assert_eq!(avg.models[0].flatten(), prox.models[0].flatten());
    let a = serde_json::to_string(&avg.history).unwrap();
    let p = serde_json::to_string(&prox.history).unwrap();
    assert_eq!(a, p);
}

#[test]
fn fedprox_with_positive_mu_diverges_from_fedavg() {
    let inputs = toy_inputs(3, 24, 7);
    let avg = run_federated(&inputs, &toy_cfg(Strategy::FedAvg, 0.0, 3, 11)).unwrap();
    let prox = run_federated(&inputs, &toy_cfg(Strategy::FedProx, 1.0, 3, 11)).unwrap();
    assert_ne!(avg.models[0].flatten(), prox.models[0].flatten());
}

#[test]
fn single_client_federation_tracks_local_training() {
    let inputs = toy_inputs(1, 32, 3);
    let cfg = toy_cfg(Strategy::FedAvg, 0.0, 1, 5);
    let outcome = run_federated(&inputs, &cfg).unwrap();

    // Reproduce the client's round-0 local training by hand.
    let global = mlp_init(&inputs.layer_sizes, derive_seed(5, "model-init", 0, 0)).unwrap();
    let tc = TrainConfig {
        class_weights: flbench_core::nn::inverse_frequency_weights(&inputs.clients[0].train_y),
        ..cfg.train.clone()
    };
    let mut stream = RngStream::derived(5, "client-train", 0, 0);
    let update = local_train(
        0,
        inputs.clients[0].train_x.view(),
        &inputs.clients[0].train_y,
        &global,
        &tc,
        cfg.local_epochs,
        0.0,
        &mut stream,
    )
    .unwrap();
    assert_eq!(outcome.models[0].flatten(), update.new_params.flatten());
}

#[test]
fn one_client_local_run_is_bit_identical_to_central() {
    let inputs = toy_inputs(1, 48, 9);
    let cfg = toy_cfg(Strategy::FedAvg, 0.0, 3, 13);
    let central = run_central(&inputs, &cfg).unwrap();
    let local = run_local(&inputs, &cfg).unwrap();
    assert_eq!(central.models[0].flatten(), local.models[0].flatten());
    assert_eq!(
        central.history.final_test_metrics.fbeta,
        local.history.final_test_metrics.fbeta
    );
    assert_eq!(central.history.best_round, local.history.best_round);
}

#[test]
fn repeated_federated_runs_serialize_identically() {
    let inputs = toy_inputs(4, 20, 21);
    let cfg = toy_cfg(Strategy::FedYogi, 0.0, 3, 17);
    let a = run_federated(&inputs, &cfg).unwrap();
    let b = run_federated(&inputs, &cfg).unwrap();
    assert_eq!(
        serde_json::to_string(&a.history).unwrap(),
        serde_json::to_string(&b.history).unwrap()
    );
    assert_eq!(a.models[0].flatten(), b.models[0].flatten());
}

#[test]
fn qfedavg_runs_end_to_end() {
    let inputs = toy_inputs(3, 24, 2);
    let out = run_federated(&inputs, &toy_cfg(Strategy::QFedAvg, 0.0, 3, 19)).unwrap();
    let f = out.history.final_test_metrics.fbeta;
    assert!((0.0..=1.0).contains(&f));
    assert_eq!(out.history.rounds.len(), 3);
}

#[test]
fn training_lowers_loss_on_an_easy_separable_shard() {
    let inputs = toy_inputs(1, 64, 31);
    let global = mlp_init(&inputs.layer_sizes, 3).unwrap();
    let tc = TrainConfig {
        learning_rate: 0.01,
        batch_size: 8,
        dropout_rate: 0.0,
        class_weights: [1.0, 1.0],
        adam: AdamConfig::default(),
    };
    let mut stream = RngStream::new(4);
    let up = local_train(
        0,
        inputs.clients[0].train_x.view(),
        &inputs.clients[0].train_y,
        &global,
        &tc,
        10,
        0.0,
        &mut stream,
    )
    .unwrap();
    assert!(up.local_train_loss < up.loss_at_global);
}
