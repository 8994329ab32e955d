mod support;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rentyield::evaluation::{
    grid_search_forest, implied_yield_ranking, rank_with_model, run_cell, train_test_split,
    zscore_filter, EvalReport, ForestGrid, ModelChoice, RunOptions,
};
use rentyield::model::TrainedModel;
use rentyield::synth::{generate, SynthConfig};
use rentyield::{FinancingTerms, ForestConfig, Listing, ModelSpec, Operation, SvrConfig};

fn small_synth(n_rent: usize, seed: u64) -> Vec<Listing> {
    generate(&SynthConfig {
        n_rent,
        n_sale: 20,
        seed,
        outlier_fraction: 0.0,
    })
}

/// Everything except wall-clock time.
fn strip(mut r: EvalReport) -> EvalReport {
    r.runtime_ms = 0.0;
    r
}

fn forest(n_trees: usize) -> ModelChoice {
    ModelChoice::Forest {
        config: ForestConfig {
            n_trees,
            ..ForestConfig::default()
        },
    }
}

#[test]
fn split_sizes_and_disjointness() {
    for n in 2..60 {
        for f in [0.1, 0.5, 0.7, 0.999] {
            let p = train_test_split(n, f, 11).unwrap();
            let expected = ((f * n as f64).floor() as usize).clamp(1, n - 1);
            assert_eq!(p.n_train(), expected);
            assert_eq!(p.n_train() + p.n_test(), n);
            let mut all: Vec<usize> = p.train.iter().chain(&p.test).copied().collect();
            all.sort();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
    let p = train_test_split(2, 0.999, 0).unwrap();
    assert_eq!((p.n_train(), p.n_test()), (1, 1));
}

#[test]
fn cell_results_ignore_input_order() {
    let data = small_synth(300, 4);
    let mut shuffled = data.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(9));
    let opts = RunOptions {
        seed: 5,
        zscore: Some(3.0),
        ..RunOptions::default()
    };
    for choice in [ModelChoice::Ols, forest(20)] {
        let a = run_cell(&data, ModelSpec::Spec3, &choice, &opts).unwrap();
        let b = run_cell(&shuffled, ModelSpec::Spec3, &choice, &opts).unwrap();
        assert_eq!(a.scatter, b.scatter);
        assert_eq!(a.report.rmse_test, b.report.rmse_test);
        assert_eq!(a.model.model, b.model.model);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn zscore_filter_is_anti_monotone(
        seed in any::<u64>(),
        n in 0usize..80,
        z1 in 0.1..5.0f64,
        dz in 0.0..5.0f64,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = support::random_dataset(&mut rng, n);
        let lo = zscore_filter(&rows, z1).unwrap();
        let hi = zscore_filter(&rows, z1 + dz).unwrap();
        for l in &lo.kept {
            prop_assert!(hi.kept.contains(l));
        }
        prop_assert_eq!(lo.kept.len() + lo.removed.len(), n);
    }
}

#[test]
fn thirty_thousand_euro_rent_is_removed_at_one_point_five() {
    let mut rows: Vec<Listing> = (0..99)
        .map(|i| Listing::new(format!("r{i:02}"), Operation::Rent, 950.0 + i as f64, 60.0 + (i % 7) as f64, "Sol").unwrap())
        .collect();
    rows.push(Listing::new("big", Operation::Rent, 30_000.0, 63.0, "Sol").unwrap());

    // Direct computation of the outlier's score.
    let n = rows.len() as f64;
    let mean = rows.iter().map(|l| l.price).sum::<f64>() / n;
    let sd = (rows.iter().map(|l| (l.price - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!((30_000.0 - mean) / sd > 1.5);

    let out = zscore_filter(&rows, 1.5).unwrap();
    assert!(out.removed.iter().any(|l| l.id == "big"));
    assert!(out.kept.iter().all(|l| l.id != "big"));
}

#[test]
fn constant_columns_are_reported_not_filtered() {
    let rows: Vec<Listing> = (0..5)
        .map(|i| Listing::new(format!("r{i}"), Operation::Rent, 1000.0, 50.0 + i as f64, "Sol").unwrap())
        .collect();
    let out = zscore_filter(&rows, 0.5).unwrap();
    assert_eq!(out.zero_variance, vec![rentyield::evaluation::ZColumn::Price]);
    assert!(zscore_filter(&rows, 0.0).is_err());
}

#[test]
fn grid_is_invariant_to_enumeration_order() {
    let data = small_synth(200, 8);
    let grid = ForestGrid {
        n_trees: vec![5, 10],
        mtry: vec![1, 3],
        zscore: vec![1.5, 10.0],
    };
    let reversed = ForestGrid {
        n_trees: grid.n_trees.iter().rev().copied().collect(),
        mtry: grid.mtry.iter().rev().copied().collect(),
        zscore: grid.zscore.iter().rev().copied().collect(),
    };
    let base = ForestConfig::default();
    let a: Vec<_> = grid_search_forest(&data, ModelSpec::Spec3, &grid, base, 3, 0.7).unwrap().into_iter().map(strip).collect();
    let b: Vec<_> = grid_search_forest(&data, ModelSpec::Spec3, &reversed, base, 3, 0.7).unwrap().into_iter().map(strip).collect();
    assert_eq!(a.len(), 8);
    assert_eq!(a, b);
    for w in a.windows(2) {
        assert!(w[0].rmse_test.unwrap() <= w[1].rmse_test.unwrap());
    }
}

#[test]
fn single_cell_grid_matches_direct_run() {
    let data = small_synth(150, 12);
    let grid = ForestGrid {
        n_trees: vec![15],
        mtry: vec![2],
        zscore: vec![2.0],
    };
    let base = ForestConfig::default();
    let g = grid_search_forest(&data, ModelSpec::Spec2, &grid, base, 21, 0.7).unwrap();
    let choice = ModelChoice::Forest {
        config: ForestConfig {
            n_trees: 15,
            mtry: Some(2),
            ..base
        },
    };
    let opts = RunOptions {
        seed: 21,
        train_fraction: 0.7,
        zscore: Some(2.0),
    };
    let direct = run_cell(&data, ModelSpec::Spec2, &choice, &opts).unwrap();
    assert_eq!(strip(g[0].clone()), strip(direct.report));
}

#[test]
fn reports_are_reproducible_from_recorded_fields() {
    let data = small_synth(150, 30);
    let svr = ModelChoice::svr_default("radial", SvrConfig { standardize: true, ..SvrConfig::default() }).unwrap();
    for choice in [ModelChoice::Ols, forest(12), svr] {
        let opts = RunOptions {
            seed: 77,
            train_fraction: 0.6,
            zscore: Some(5.0),
        };
        let first = run_cell(&data, ModelSpec::Spec3, &choice, &opts).unwrap().report;
        assert_eq!(first.dataset_hash, rentyield::evaluation::dataset_hash(&data));

        let rebuilt = match first.model {
            rentyield::model::ModelKind::Ols => ModelChoice::Ols,
            rentyield::model::ModelKind::Forest => ModelChoice::Forest {
                config: serde_json::from_value(first.hyperparameters.clone()).unwrap(),
            },
            rentyield::model::ModelKind::Svr => ModelChoice::Svr {
                config: serde_json::from_value(first.hyperparameters.clone()).unwrap(),
                auto_gamma: false,
            },
        };
        let opts = RunOptions {
            seed: first.seed,
            train_fraction: first.train_fraction,
            zscore: first.zscore,
        };
        let again = run_cell(&data, first.spec, &rebuilt, &opts).unwrap().report;
        assert_eq!(strip(first), strip(again));
    }
}

#[test]
fn artifacts_are_byte_identical_and_round_trip() {
    let data = small_synth(200, 2);
    let opts = RunOptions {
        seed: 7,
        ..RunOptions::default()
    };
    let a = run_cell(&data, ModelSpec::Spec4, &forest(10), &opts).unwrap();
    let b = run_cell(&data, ModelSpec::Spec4, &forest(10), &opts).unwrap();
    let ja = a.model.to_json().unwrap();
    assert_eq!(ja, b.model.to_json().unwrap());

    let back = TrainedModel::from_json(&ja).unwrap();
    assert_eq!(back, a.model);
    for l in data.iter().filter(|l| l.operation == Operation::Sale) {
        match (a.model.predict_listing(l), back.predict_listing(l)) {
            (Ok(x), Ok(y)) => assert_eq!(x.to_bits(), y.to_bits()),
            (Err(_), Err(_)) => {}
            other => panic!("{other:?}"),
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    a.model.save(&path).unwrap();
    assert_eq!(TrainedModel::load(&path).unwrap(), a.model);
}

#[test]
fn noiseless_linear_rents_give_zero_test_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data: Vec<Listing> = (0..80)
        .map(|i| {
            let mut l = support::random_listing(&mut rng, format!("x{i:03}"));
            l.operation = Operation::Rent;
            l.exterior = Some(i % 3 == 0);
            l.floor = Some(i % 9);
            l.price = 12.0 * l.size + 90.0 * f64::from(u8::from(l.exterior.unwrap())) + 15.0 * l.floor.unwrap() as f64 + 100.0;
            l
        })
        .collect();
    let run = run_cell(&data, ModelSpec::Spec1, &ModelChoice::Ols, &RunOptions::default()).unwrap();
    assert!(run.report.rmse_test.unwrap() < 1e-8);
}

fn sale(id: &str, price: f64, size: f64) -> Listing {
    Listing::new(id, Operation::Sale, price, size, "Sol").unwrap()
}

#[test]
fn stub_model_ranking_matches_hand_arithmetic() {
    // Monthly payments at the default terms, worked out by hand.
    let fixture = [
        ("a", 90_000.0, 40.0, 252.39561022546852),
        ("b", 150_800.0, 70.0, 422.9028669111184),
        ("c", 210_000.0, 60.0, 588.9230905260932),
        ("d", 260_000.0, 120.0, 729.1428739846867),
        ("e", 400_000.0, 150.0, 1121.7582676687489),
    ];
    let sales: Vec<Listing> = fixture.iter().map(|&(id, p, s, _)| sale(id, p, s)).collect();
    let ranking = implied_yield_ranking(&sales, |l| Ok(8.0 * l.size), &FinancingTerms::default()).unwrap();
    let order: Vec<&str> = ranking.ranked.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(order, ["b", "d", "a", "e", "c"]);
    for r in &ranking.ranked {
        let &(_, _, size, m) = fixture.iter().find(|f| f.0 == r.id).unwrap();
        assert!((r.monthly_mortgage - m).abs() <= 1e-9 * m);
        assert!((r.implied_index - 8.0 * size / m).abs() <= 1e-9);
    }
}

#[test]
fn cheaper_twin_ranks_higher_and_unscorable_rows_are_skipped() {
    let sales = vec![sale("x", 300_000.0, 80.0), sale("y", 250_000.0, 80.0), sale("z", 200_000.0, 80.0)];
    let r = implied_yield_ranking(
        &sales,
        |l| {
            if l.id == "z" {
                Err(rentyield::features::EncodeError::MissingFeature("lift"))
            } else {
                Ok(1200.0)
            }
        },
        &FinancingTerms::default(),
    )
    .unwrap();
    assert_eq!(r.ranked[0].id, "y");
    assert!(r.ranked[0].implied_index > r.ranked[1].implied_index);
    assert_eq!(r.skipped.len(), 1);
    assert!(r.skipped[0].reason.contains("lift"));
}

#[test]
fn trained_model_ranks_synthetic_sales() {
    let data = small_synth(300, 6);
    let run = run_cell(&data, ModelSpec::Spec1, &ModelChoice::Ols, &RunOptions::default()).unwrap();
    let r = rank_with_model(&data, &run.model, &FinancingTerms::default()).unwrap();
    assert_eq!(r.ranked.len() + r.skipped.len(), 20);
    for w in r.ranked.windows(2) {
        assert!(w[0].implied_index >= w[1].implied_index);
    }
}
