use std::collections::BTreeSet;

use decisionflow_core::{
    apply_mask, feasible_actions, row_utilities, select_action, solve_symbolic, sparsify_weights,
    Constraint, FilterPolicy, FilteredMatrix, Grid, WeightMatrix,
};
use proptest::prelude::*;

fn grid(max_n: usize, max_m: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_n, 0..=max_m).prop_flat_map(|(n, m)| {
        prop::collection::vec(prop::collection::vec(0.0..=1.0f64, m), n)
    })
}

/// Multiples of 1/16 keep scaled and shifted row sums exact.
fn dyadic_grid() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2..=7usize, 1..=10usize).prop_flat_map(|(n, m)| {
        prop::collection::vec(
            prop::collection::vec((0..=16u8).prop_map(|k| f64::from(k) / 16.0), m),
            n,
        )
    })
}

fn policy() -> impl Strategy<Value = FilterPolicy> {
    prop_oneof![
        Just(FilterPolicy::None),
        (0.0..1.0f64).prop_map(|e| FilterPolicy::threshold(e).unwrap()),
        (1..6usize).prop_map(|k| FilterPolicy::top_k(k).unwrap()),
    ]
}

proptest! {
    #[test]
    fn sparsify_is_idempotent(rows in grid(7, 10), p in policy()) {
        let w = WeightMatrix::from_rows(&rows).unwrap();
        let once = sparsify_weights(&w, &p);
        prop_assert_eq!(sparsify_weights(&once, &p), once);
    }

    #[test]
    fn sparsify_shrinks_support(rows in grid(7, 10), p in policy()) {
        let w = WeightMatrix::from_rows(&rows).unwrap();
        let out = sparsify_weights(&w, &p);
        for (i, j, v) in out.grid().cells() {
            if v != 0.0 {
                prop_assert_eq!(v, w.grid().get(i, j));
            }
            if let FilterPolicy::Threshold { epsilon } = p {
                prop_assert!(!(v.abs() > 0.0 && v.abs() <= epsilon));
            }
        }
    }

    #[test]
    fn mask_zeros_annihilate(rows in grid(7, 10), rel in 0.0..=1.0f64) {
        let w = WeightMatrix::from_rows(&rows).unwrap();
        let r = Grid::filled(w.grid().rows(), w.grid().cols(), rel);
        let out = apply_mask(&w, &r).unwrap();
        for (i, j, v) in w.grid().cells() {
            if v == 0.0 {
                prop_assert_eq!(out.grid().get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn positive_scale_preserves_argmax(rows in dyadic_grid(), c in (1..=32u8).prop_map(|k| f64::from(k) / 8.0)) {
        let n = rows.len();
        let feasible: BTreeSet<usize> = (0..n).collect();
        let base = row_utilities(&FilteredMatrix::from_grid(Grid::from_rows(&rows).unwrap()));
        let scaled = Grid::from_rows(&rows).unwrap().map(|v| v * c);
        let scaled = row_utilities(&FilteredMatrix::from_grid(scaled));
        prop_assert_eq!(select_action(&base, &feasible), select_action(&scaled, &feasible));
    }

    #[test]
    fn row_shift_preserves_argmax(rows in dyadic_grid(), shift_seed in prop::collection::vec(-16i8..=16, 10)) {
        let n = rows.len();
        let feasible: BTreeSet<usize> = (0..n).collect();
        let shifted: Vec<Vec<f64>> = rows
            .iter()
            .map(|row| row.iter().zip(&shift_seed).map(|(v, s)| v + f64::from(*s) / 16.0).collect())
            .collect();
        let a = row_utilities(&FilteredMatrix::from_grid(Grid::from_rows(&rows).unwrap()));
        let b = row_utilities(&FilteredMatrix::from_grid(Grid::from_rows(&shifted).unwrap()));
        prop_assert_eq!(select_action(&a, &feasible), select_action(&b, &feasible));
    }

    #[test]
    fn zero_column_is_neutral(r in grid(7, 10), p in policy()) {
        prop_assume!(r[0].len() < 10);
        let rg = Grid::from_rows(&r).unwrap();
        let w = WeightMatrix::ones(rg.rows(), rg.cols());
        let before = solve_symbolic(&rg, &w, &p, &[]).unwrap();
        let wide = rg.with_column(0.0);
        let wide_w = WeightMatrix::new(w.grid().with_column(0.0)).unwrap();
        let after = solve_symbolic(&wide, &wide_w, &p, &[]).unwrap();
        prop_assert_eq!(before.utilities, after.utilities);
        prop_assert_eq!(before.answer, after.answer);
    }

    #[test]
    fn answer_is_always_feasible(r in grid(7, 6), excluded in prop::collection::btree_set(0..7usize, 0..7)) {
        let rg = Grid::from_rows(&r).unwrap();
        let n = rg.rows();
        let cs: Vec<Constraint> = excluded.iter().filter(|&&i| i < n).map(|&i| Constraint::exclusion(i)).collect();
        let feasible = feasible_actions(&cs, n);
        match solve_symbolic(&rg, &WeightMatrix::ones(n, rg.cols()), &FilterPolicy::None, &cs) {
            Ok(sol) => prop_assert!(feasible.contains(&sol.answer)),
            Err(_) => prop_assert!(feasible.is_empty()),
        }
    }
}
