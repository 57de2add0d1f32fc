//! Kernel checked against an exhaustive one-hot enumeration that shares no
//! code with the library's sparsify/mask/select path.

use decisionflow_core::{
    row_utilities, solve_symbolic, Constraint, ConstraintKind, FilterPolicy, FilteredMatrix, Grid,
    WeightMatrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn oracle_keep(row: &[f64], j: usize, policy: &FilterPolicy) -> bool {
    match *policy {
        FilterPolicy::None => true,
        FilterPolicy::Threshold { epsilon } => row[j].abs() > epsilon,
        FilterPolicy::TopK { k } => {
            // an entry survives iff fewer than k entries beat it
            let beaten_by = (0..row.len())
                .filter(|&l| {
                    row[l].abs() > row[j].abs() || (row[l].abs() == row[j].abs() && l < j)
                })
                .count();
            beaten_by < k
        }
    }
}

fn satisfies(assignment: &[u8], constraints: &[Constraint]) -> bool {
    constraints.iter().all(|c| match &c.kind {
        ConstraintKind::Exclusion { action } => assignment[*action] == 0,
        ConstraintKind::Cardinality { limit, over } => {
            over.iter().map(|&i| u64::from(assignment[i])).sum::<u64>() <= *limit
        }
        ConstraintKind::BinaryDomain | ConstraintKind::Opaque => true,
    })
}

/// Enumerates all 2^n binary assignments, keeps the feasible one-hot ones and
/// returns the first maximizer in index order.
fn brute_force(r: &[Vec<f64>], w: &[Vec<f64>], policy: &FilterPolicy, cs: &[Constraint]) -> Option<usize> {
    let n = r.len();
    let mut best: Option<(usize, f64)> = None;
    for mask in 0u32..(1 << n) {
        let assignment: Vec<u8> = (0..n).map(|i| ((mask >> i) & 1) as u8).collect();
        if assignment.iter().map(|&a| a as usize).sum::<usize>() != 1 || !satisfies(&assignment, cs) {
            continue;
        }
        let mut objective = 0.0;
        let mut chosen = 0;
        for i in 0..n {
            if assignment[i] == 1 {
                chosen = i;
                let mut row_sum = 0.0;
                for j in 0..r[i].len() {
                    let wp = if oracle_keep(&w[i], j, policy) { w[i][j] } else { 0.0 };
                    row_sum += if wp == 0.0 { 0.0 } else { wp * r[i][j] };
                }
                objective += row_sum;
            }
        }
        let better = match best {
            None => true,
            Some((b, v)) => objective > v || (objective == v && chosen < b),
        };
        if better {
            best = Some((chosen, objective));
        }
    }
    best.map(|(i, _)| i)
}

fn random_value(rng: &mut ChaCha8Rng) -> f64 {
    // coarse values make exact ties common
    if rng.random_bool(0.3) {
        f64::from(rng.random_range(0..=10u8)) / 10.0
    } else {
        rng.random::<f64>()
    }
}

fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, FilterPolicy, Vec<Constraint>) {
    let n = rng.random_range(2..=7);
    let m = rng.random_range(0..=10);
    let r: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| random_value(rng)).collect()).collect();
    let w: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| random_value(rng)).collect()).collect();
    let policy = match rng.random_range(0..3) {
        0 => FilterPolicy::None,
        1 => FilterPolicy::threshold(f64::from(rng.random_range(0..=8u8)) / 10.0).unwrap(),
        _ => FilterPolicy::top_k(rng.random_range(1..=4)).unwrap(),
    };
    let mut cs = Vec::new();
    for i in 0..n {
        if rng.random_bool(0.2) {
            cs.push(Constraint::exclusion(i));
        }
    }
    if rng.random_bool(0.3) {
        let over = (0..n).filter(|_| rng.random_bool(0.4)).collect();
        cs.push(Constraint {
            kind: ConstraintKind::Cardinality { limit: rng.random_range(0..=1), over },
            source_text: "generated".into(),
        });
    }
    (r, w, policy, cs)
}

#[test]
fn solve_matches_enumeration_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut infeasible = 0;
    for _ in 0..1000 {
        let (r, w, policy, cs) = random_instance(&mut rng);
        let expected = brute_force(&r, &w, &policy, &cs);
        let got = solve_symbolic(
            &Grid::from_rows(&r).unwrap(),
            &WeightMatrix::from_rows(&w).unwrap(),
            &policy,
            &cs,
        );
        match (expected, got) {
            (Some(e), Ok(sol)) => assert_eq!(sol.answer, e, "r={r:?} w={w:?} {policy:?} {cs:?}"),
            (None, Err(_)) => infeasible += 1,
            (e, g) => panic!("oracle {e:?} vs kernel {g:?}"),
        }
    }
    assert!(infeasible > 0, "generator should exercise infeasible instances");
}

fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        len => pairwise_sum(&xs[..len / 2]) + pairwise_sum(&xs[len / 2..]),
    }
}

#[test]
fn row_utilities_match_pairwise_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let rows: Vec<Vec<f64>> = (0..5).map(|_| (0..6).map(|_| rng.random::<f64>()).collect()).collect();
        let got = row_utilities(&FilteredMatrix::from_grid(Grid::from_rows(&rows).unwrap()));
        for (u, row) in got.iter().zip(&rows) {
            assert!((u - pairwise_sum(row)).abs() < 1e-12);
        }
    }
}
