mod common;

use common::*;
use decisionflow_eval::*;
use decisionflow_pipeline::{Group, Mode, PredictionRow};
use proptest::prelude::*;

fn outcomes(n: usize) -> impl Strategy<Value = Vec<Option<usize>>> {
    prop::collection::vec(prop::option::weighted(0.9, 0usize..3), n)
}

proptest! {
    #[test]
    fn avg_and_bias_identities(h in 0.0f64..=100.0, l in 0.0f64..=100.0) {
        prop_assert_eq!(avg_acc(h, l), (h + l) / 2.0);
        prop_assert_eq!(bias(h, l), h - l);
        prop_assert_eq!(bias(h, h), 0.0);
    }

    #[test]
    fn report_identities_hold(answers in outcomes(16)) {
        let ds = mta(8, 8);
        let rows: Vec<PredictionRow> = ds.ids().iter().zip(&answers)
            .map(|(id, a)| row(id, Mode::Decisionflow, 0, *a)).collect();
        let m = &EvalReport::build(&file(rows), &ds, &[]).unwrap().modes[0];
        let (h, l) = (m.high_acc.unwrap(), m.low_acc.unwrap());
        prop_assert!((0.0..=100.0).contains(&h) && (0.0..=100.0).contains(&l));
        prop_assert_eq!(m.avg_acc.unwrap(), (h + l) / 2.0);
        prop_assert_eq!(m.bias.unwrap(), h - l);
        prop_assert_eq!(m.abs_bias.unwrap(), (h - l).abs());
    }

    #[test]
    fn accuracy_is_permutation_invariant(answers in outcomes(12), seed in any::<u64>()) {
        let ds = dellma(&[3, 3, 3, 3]);
        let rows: Vec<PredictionRow> = ds.ids().iter().zip(&answers)
            .map(|(id, a)| row(id, Mode::Cot, 0, *a)).collect();
        let mut shuffled = rows.clone();
        let mut state = seed;
        for i in (1..shuffled.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (state >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(accuracy(&rows, &ds).unwrap(), accuracy(&shuffled, &ds).unwrap());
        prop_assert_eq!(
            EvalReport::build(&file(rows), &ds, &[]).unwrap().to_json(),
            EvalReport::build(&file(shuffled), &ds, &[]).unwrap().to_json()
        );
    }

    #[test]
    fn fixing_a_wrong_prediction_never_lowers_accuracy(answers in outcomes(12), pick in 0usize..12) {
        let ds = dellma(&[3, 3, 3, 3]);
        let ids = ds.ids();
        let mut rows: Vec<PredictionRow> = ids.iter().zip(&answers)
            .map(|(id, a)| row(id, Mode::Cot, 0, *a)).collect();
        let before = accuracy(&rows, &ds).unwrap();
        rows[pick] = row(ids[pick], Mode::Cot, 0, Some(0));
        let after = accuracy(&rows, &ds).unwrap();
        for (g, t) in &before.groups {
            prop_assert!(after.percent(*g).unwrap() >= t.percent().unwrap());
        }
        prop_assert!(after.all.percent() >= before.all.percent());
    }

    #[test]
    fn all_is_the_prediction_weighted_mean(
        counts in prop::collection::vec(0usize..6, 6),
        answers in outcomes(30),
    ) {
        let ds = dellma(&counts);
        prop_assume!(!ds.is_empty());
        let rows: Vec<PredictionRow> = ds.ids().iter().zip(answers.iter().cycle())
            .map(|(id, a)| row(id, Mode::Cot, 0, *a)).collect();
        let acc = accuracy(&rows, &ds).unwrap();
        let weighted: f64 = acc.groups.values()
            .map(|t| t.percent().unwrap() * t.total as f64)
            .sum::<f64>() / rows.len() as f64;
        prop_assert!((acc.all.percent().unwrap() - weighted).abs() < 1e-9);
        for g in acc.groups.keys() {
            prop_assert!(matches!(g, Group::ActionCount(2..=7)));
        }
    }

    #[test]
    fn repeat_stats_oracle(values in prop::collection::vec(0.0f64..=100.0, 1..8)) {
        let s = repeat_stats(&values).unwrap();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        prop_assert!((s.mean - mean).abs() < 1e-9);
        if values.len() > 1 {
            // Two-pass-free oracle: (Σx² − n·mean²) / (n − 1).
            let sq: f64 = values.iter().map(|v| v * v).sum();
            let var = ((sq - n * mean * mean) / (n - 1.0)).max(0.0);
            prop_assert!((s.sample_std - var.sqrt()).abs() < 1e-6);
        } else {
            prop_assert!(s.single && s.sample_std == 0.0);
        }
    }

    #[test]
    fn half_up_matches_decimal_rounding(cents in -100_000i64..100_000, extra in 0u32..10) {
        // Values of the form k/1000 sit near (but not necessarily on) the tie.
        let milli = cents * 10 + i64::from(extra);
        let x = milli as f64 / 1000.0;
        let s = fmt2(x);
        let parsed: f64 = s.parse().unwrap();
        prop_assert!((parsed - x).abs() <= 0.005 + 1e-9);
        prop_assert_eq!(s.split_once('.').unwrap().1.len(), 2);
        if extra != 5 {
            let digit_rounded = (milli.abs() + 5) / 10 * milli.signum();
            prop_assert_eq!(parsed, digit_rounded as f64 / 100.0);
        }
    }
}
