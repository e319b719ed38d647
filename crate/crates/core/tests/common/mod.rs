#![allow(dead_code)]

use kbuild::{
    spectral_radius, DenseMatrix, DenseVector, Instance, ModelInstance, UserDistribution,
};
use rand::Rng;

pub const PAPER_T: [[f64; 3]; 3] = [
    [0.001, 0.003, 0.0004],
    [0.03, 0.001, 0.005],
    [0.03, 0.008, 0.003],
];

pub fn paper_instance(r: f64) -> Instance {
    let rows: Vec<Vec<f64>> = PAPER_T.iter().map(|r| r.to_vec()).collect();
    ModelInstance::new(
        100,
        DenseMatrix::from_rows(&rows).unwrap(),
        DenseVector::new(vec![r; 3]).unwrap(),
        None,
    )
    .unwrap()
}

pub fn random_counts<R: Rng>(n: usize, m: usize, rng: &mut R) -> UserDistribution {
    let mut counts = vec![0; m];
    for _ in 0..n {
        counts[rng.random_range(0..m)] += 1;
    }
    UserDistribution::new(counts)
}

/// Random instance plus distribution with `ρ(NT)` scaled to `target`
/// (left alone when `ρ(NT)` is zero).
pub fn random_feasible<R: Rng>(
    rng: &mut R,
    max_m: usize,
    max_n: usize,
    target: f64,
) -> (Instance, UserDistribution) {
    let m = rng.random_range(1..=max_m);
    let n = rng.random_range(1..=max_n);
    let t: Vec<f64> = (0..m * m)
        .map(|_| if rng.random_bool(0.8) { rng.random::<f64>() } else { 0.0 })
        .collect();
    let r: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..5.0)).collect();
    let dist = random_counts(n, m, rng);
    let t = DenseMatrix::new(m, m, t).unwrap();
    let counts: Vec<f64> = dist.counts().iter().map(|&c| c as f64).collect();
    let rho = spectral_radius(&t.scale_rows(&counts).unwrap()).unwrap();
    let t = if rho > 0.0 { t.scaled(target / rho) } else { t };
    let inst = ModelInstance::new(n, t, DenseVector::new(r).unwrap(), None).unwrap();
    (inst, dist)
}

/// Steady state by summing the Neumann series with plain loops; shares no
/// code with the solver under test.
pub fn neumann_oracle(t: &[Vec<f64>], counts: &[usize], r: &[f64]) -> Vec<f64> {
    let m = counts.len();
    let n: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let mut term: Vec<f64> = (0..m).map(|i| n[i] * r[i]).collect();
    let mut total = term.clone();
    for _ in 0..100_000 {
        let next: Vec<f64> = (0..m)
            .map(|i| n[i] * (0..m).map(|j| t[i][j] * term[j]).sum::<f64>())
            .collect();
        let size = next.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        for i in 0..m {
            total[i] += next[i];
        }
        term = next;
        if size < 1e-17 * (1.0 + total.iter().sum::<f64>()) {
            break;
        }
    }
    total
}

/// Every composition of `n` into `m` parts, by recursion on the first part.
pub fn recursive_compositions(n: usize, m: usize) -> Vec<Vec<usize>> {
    if m == 1 {
        return vec![vec![n]];
    }
    let mut out = Vec::new();
    for first in 0..=n {
        for mut rest in recursive_compositions(n - first, m - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}
