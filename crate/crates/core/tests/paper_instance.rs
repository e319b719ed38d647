//! The three-category, 100-user reference instance.

mod common;

use common::{neumann_oracle, paper_instance, PAPER_T};
use kbuild::optimizer::DEFAULT_BRUTE_FORCE_CAP;
use kbuild::{
    brute_force, brute_force_parallel, compositions, feasibility, hill_climb, multi_start,
    steady_state_total, sweep_surface, triggered_decomposition, UserDistribution,
};

fn d(c: &[usize]) -> UserDistribution {
    UserDistribution::new(c.to_vec())
}

fn paper_rows() -> Vec<Vec<f64>> {
    PAPER_T.iter().map(|r| r.to_vec()).collect()
}

/// Exhaustive argmax using only the plain-loop Neumann oracle.
fn oracle_argmax() -> (Vec<usize>, f64) {
    let t = paper_rows();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for counts in compositions(100, 3) {
        let total: f64 = neumann_oracle(&t, &counts, &[1.0; 3]).iter().sum();
        if best.as_ref().map_or(true, |(_, b)| total > *b) {
            best = Some((counts, total));
        }
    }
    best.unwrap()
}

#[test]
fn steady_state_at_reported_distribution() {
    let inst = paper_instance(1.0);
    let dist = d(&[39, 30, 31]);
    let k = steady_state_total(&inst, &dist).unwrap();
    let oracle = neumann_oracle(&paper_rows(), dist.counts(), &[1.0; 3]);
    for (a, b) in k.as_slice().iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-10 * b, "{a} vs {b}");
    }
    for (a, b) in k.as_slice().iter().zip([54.64, 99.79, 117.49]) {
        assert!((a - b).abs() < 5e-3);
    }
    let f = feasibility(&inst, &dist).unwrap();
    assert!(f.feasible && (f.rho - 0.4964).abs() < 1e-3);
    let dec = triggered_decomposition(&inst, &dist).unwrap();
    for (a, b) in dec.triggered.as_slice().iter().zip([15.64, 69.79, 86.49]) {
        assert!((a - b).abs() < 5e-3);
    }
}

#[test]
fn brute_force_matches_oracle_argmax() {
    let (oracle_best, oracle_total) = oracle_argmax();
    let inst = paper_instance(1.0);
    let res = brute_force(&inst, DEFAULT_BRUTE_FORCE_CAP).unwrap();
    assert_eq!(res.evaluated, 5151);
    assert_eq!(res.infeasible_count, 0);
    assert_eq!(res.best.counts(), &oracle_best[..]);
    assert!((res.objective - oracle_total).abs() < 1e-9 * oracle_total);
    // Printed T with equal r peaks here, not at the reported [39, 30, 31].
    assert_eq!(res.best, d(&[41, 38, 21]));
    assert_eq!(brute_force_parallel(&inst, DEFAULT_BRUTE_FORCE_CAP).unwrap(), res);
}

#[test]
fn scaling_r_moves_the_value_but_not_the_argmax() {
    let base = brute_force(&paper_instance(1.0), DEFAULT_BRUTE_FORCE_CAP).unwrap();
    for r in [0.5, 7.3, 11.0] {
        let res = brute_force(&paper_instance(r), DEFAULT_BRUTE_FORCE_CAP).unwrap();
        assert_eq!(res.best, base.best);
        assert!((res.objective - r * base.objective).abs() < 1e-9 * res.objective);
    }
}

#[test]
fn hill_climb_from_even_split() {
    let inst = paper_instance(1.0);
    let brute = brute_force(&inst, DEFAULT_BRUTE_FORCE_CAP).unwrap();
    let res = hill_climb(&inst, &d(&[34, 33, 33])).unwrap();
    assert_eq!(res.best, brute.best);
    let first = &res.trace.steps[0];
    assert_eq!(first.distribution, d(&[34, 33, 33]));
    assert_eq!(res.trace.steps.last().unwrap().distribution, brute.best);
}

#[test]
fn multi_start_agrees_with_brute_force() {
    let inst = paper_instance(1.0);
    let brute = brute_force(&inst, DEFAULT_BRUTE_FORCE_CAP).unwrap();
    for seed in [0, 1, 12345] {
        let ms = multi_start(&inst, 100, seed).unwrap();
        assert_eq!(ms.agreement, 1.0);
        assert_eq!(ms.best().unwrap().best, brute.best);
    }
}

#[test]
fn surface_has_single_peak_at_brute_force_optimum() {
    let inst = paper_instance(1.0);
    let recs = sweep_surface(&inst).unwrap();
    assert_eq!(recs.len(), 5151);
    let best = recs
        .iter()
        .max_by(|a, b| a.objective.partial_cmp(&b.objective).unwrap())
        .unwrap();
    assert_eq!((best.n1, best.n2, best.n3), (41, 38, 21));
    assert!(recs.iter().all(|r| r.n1 + r.n2 + r.n3 == 100 && r.objective.is_some()));
}
