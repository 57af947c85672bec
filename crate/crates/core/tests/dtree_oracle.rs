mod oracles;

use proptest::prelude::*;
use slomo_core::dtree::{best_split, cross_validate_fit, fit, DataSet, Example, FitParams, Predictor, Schema};

fn dataset(rows: &[(Vec<usize>, usize)], values: &[usize], n_labels: usize) -> DataSet {
    let schema = Schema::new(
        values
            .iter()
            .enumerate()
            .map(|(p, &n)| Predictor::new(format!("p{p}"), (0..n).map(|v| format!("v{v}"))))
            .collect(),
        (0..n_labels).map(|l| format!("L{l}")),
    );
    let mut data = DataSet::new(schema);
    for (features, label) in rows {
        data.push_encoded(Example {
            features: features.clone(),
            label: *label,
        })
        .unwrap();
    }
    data
}

fn check_against_oracle(rows: &[(Vec<usize>, usize)], values: &[usize], n_labels: usize) {
    let data = dataset(rows, values, n_labels);
    let got = best_split(&data).map(|s| (s.predictor, s.value, s.gain));
    let want = oracles::best_split_oracle(rows, values, n_labels);
    match (got, want) {
        (None, None) => {}
        (Some(g), Some(w)) => {
            assert_eq!((g.0, g.1), (w.0, w.1), "rows {rows:?}");
            assert!((g.2 - w.2).abs() < 1e-12);
        }
        _ => panic!("split mismatch on {rows:?}: {got:?} vs {want:?}"),
    }
    // Isolating one cell takes at most Σ(values − 1) equality splits.
    let depth = values.iter().map(|v| v - 1).sum::<usize>().max(FitParams::default().max_depth);
    let params = FitParams {
        max_depth: depth,
        ..FitParams::default()
    };
    let tree = fit(&data, &params).unwrap();
    assert_eq!(tree.accuracy(&data), 1.0, "rows {rows:?}");
}

#[test]
fn exhaustive_binary_datasets() {
    let all = oracles::consistent_binary_datasets(3, 3);
    assert_eq!(all.len(), 4usize.pow(8) - 1);
    for rows in &all {
        check_against_oracle(rows, &[2, 2, 2], 3);
    }
}

/// Consistent data with repeated rows: labels are a function of the features.
fn consistent_rows() -> impl Strategy<Value = (Vec<(Vec<usize>, usize)>, Vec<usize>)> {
    prop::collection::vec(2usize..4, 1..4).prop_flat_map(|values| {
        let n_cells: usize = values.iter().product();
        let vals = values.clone();
        (
            prop::collection::vec(0usize..3, n_cells),
            prop::collection::vec(prop::collection::vec(0usize..4, values.len()), 1..20),
        )
            .prop_map(move |(table, raw)| {
                let rows = raw
                    .into_iter()
                    .map(|r| {
                        let f: Vec<usize> = r.iter().zip(&vals).map(|(x, n)| x % n).collect();
                        let cell = f.iter().zip(&vals).fold(0, |acc, (x, n)| acc * n + x);
                        (f, table[cell])
                    })
                    .collect();
                (rows, vals.clone())
            })
    })
}

proptest! {
    #[test]
    fn repeated_rows_and_wider_domains((rows, values) in consistent_rows()) {
        check_against_oracle(&rows, &values, 3);
    }

    #[test]
    fn cross_validation_is_reproducible((rows, values) in consistent_rows(), seed in any::<u64>()) {
        prop_assume!(rows.len() >= 3);
        let data = dataset(&rows, &values, 3);
        let params = FitParams { rng_seed: seed, ..FitParams::default() };
        let a = serde_json::to_string(&cross_validate_fit(&data, 3, &params).unwrap()).unwrap();
        let b = serde_json::to_string(&cross_validate_fit(&data, 3, &params).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }
}
