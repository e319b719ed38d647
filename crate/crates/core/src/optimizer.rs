//! Search over integer user distributions.
//!
//! The decision variable is a composition of `n` into `m` nonnegative
//! parts. [`hill_climb`] walks the single-unit-transfer neighborhood,
//! [`brute_force`] enumerates every composition, and [`multi_start`]
//! reruns the climb from seeded random starts.
//!
//! Every search breaks objective ties towards the lexicographically smallest
//! distribution, so parallel and sequential runs agree exactly.

use std::cmp::Ordering;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    feasibility, solve_steady_state, total_objective, ModelInstance, UserDistribution,
};
use crate::scalar::Scalar;

pub const DEFAULT_BRUTE_FORCE_CAP: u128 = 10_000_000;

/// Objective and spectral radius of one distribution; `objective` is `None`
/// when the distribution is infeasible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation<S> {
    pub objective: Option<S>,
    pub rho: S,
}

pub fn evaluate<S: Scalar>(inst: &ModelInstance<S>, dist: &UserDistribution) -> Result<Evaluation<S>> {
    let feas = feasibility(inst, dist)?;
    if !feas.feasible {
        return Ok(Evaluation {
            objective: None,
            rho: feas.rho,
        });
    }
    let k = solve_steady_state(inst, dist)?;
    Ok(Evaluation {
        objective: Some(total_objective(&k, inst.weights())?),
        rho: feas.rho,
    })
}

/// `C(n + m − 1, m − 1)`, or `None` on overflow.
pub fn composition_count(n: usize, m: usize) -> Option<u128> {
    if m == 0 {
        return Some(u128::from(n == 0));
    }
    let k = (m - 1) as u128;
    let top = (n + m - 1) as u128;
    let k = k.min(top - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(top - i)? / (i + 1);
    }
    Some(acc)
}

/// Compositions of `n` into `m` parts in lexicographic order, from
/// `(0, …, 0, n)` to `(n, 0, …, 0)`.
#[derive(Debug, Clone)]
pub struct Compositions {
    next: Option<Vec<usize>>,
}

pub fn compositions(n: usize, m: usize) -> Compositions {
    assert!(m >= 1, "compositions need at least one part");
    let mut first = vec![0; m];
    first[m - 1] = n;
    Compositions { next: Some(first) }
}

impl Iterator for Compositions {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let m = current.len();
        // rightmost nonzero part past the first one
        if let Some(j) = (1..m).rev().find(|&j| current[j] > 0) {
            let mut succ = current.clone();
            let moved = succ[j];
            succ[j - 1] += 1;
            succ[j] = 0;
            succ[m - 1] = moved - 1;
            self.next = Some(succ);
        }
        Some(current)
    }
}

/// Every distribution reachable by moving one user from category `i` to
/// category `j ≠ i`, in ascending `(i, j)` order. Moves out of empty
/// categories are skipped.
pub fn neighbors(dist: &UserDistribution) -> Vec<UserDistribution> {
    let counts = dist.counts();
    let m = counts.len();
    let mut out = Vec::with_capacity(m * m.saturating_sub(1));
    for i in 0..m {
        if counts[i] == 0 {
            continue;
        }
        for j in (0..m).filter(|&j| j != i) {
            let mut next = counts.to_vec();
            next[i] -= 1;
            next[j] += 1;
            out.push(UserDistribution::new(next));
        }
    }
    out
}

/// Draws a composition of `n` into `m` parts uniformly at random by picking
/// `m − 1` distinct separator slots among `n + m − 1`.
pub fn random_distribution<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> UserDistribution {
    assert!(m >= 1, "random_distribution needs m >= 1");
    let slots = n + m - 1;
    let mut cuts = sample(rng, slots, m - 1).into_vec();
    cuts.sort_unstable();
    let mut counts = Vec::with_capacity(m);
    let mut prev = 0;
    for c in cuts {
        counts.push(c - prev);
        prev = c + 1;
    }
    counts.push(slots - prev);
    UserDistribution::new(counts)
}

/// Greater objective wins; equal objectives go to the smaller distribution.
fn better<S: Scalar>(a: (&UserDistribution, S), b: (&UserDistribution, S)) -> bool {
    match a.1.partial_cmp(&b.1) {
        Some(Ordering::Greater) => true,
        Some(Ordering::Equal) => a.0 < b.0,
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClimbOutcome {
    LocalOptimum,
    AllNeighborsInfeasible,
    StartInfeasible,
}

impl ClimbOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClimbOutcome::LocalOptimum => "local-optimum",
            ClimbOutcome::AllNeighborsInfeasible => "all-neighbors-infeasible",
            ClimbOutcome::StartInfeasible => "start-infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep<S> {
    pub iteration: usize,
    pub distribution: UserDistribution,
    pub objective: S,
    pub rho: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationTrace<S> {
    /// Feasible points visited, in order.
    pub steps: Vec<TraceStep<S>>,
    pub outcome: ClimbOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClimbResult<S> {
    pub best: UserDistribution,
    /// `None` only when the start and all its neighbors are infeasible.
    pub objective: Option<S>,
    pub trace: OptimizationTrace<S>,
}

fn best_feasible<S: Scalar>(
    inst: &ModelInstance<S>,
    candidates: Vec<UserDistribution>,
) -> Result<Option<(UserDistribution, S, S)>> {
    let mut best: Option<(UserDistribution, S, S)> = None;
    for cand in candidates {
        let ev = evaluate(inst, &cand)?;
        if let Some(obj) = ev.objective {
            let replace = match &best {
                None => true,
                Some((d, o, _)) => better((&cand, obj), (d, *o)),
            };
            if replace {
                best = Some((cand, obj, ev.rho));
            }
        }
    }
    Ok(best)
}

/// Steepest-ascent hill climbing over the unit-transfer neighborhood.
///
/// Moves to the best feasible neighbor only while it strictly improves the
/// objective. An infeasible start first jumps to its best feasible neighbor,
/// if it has one.
pub fn hill_climb<S: Scalar>(inst: &ModelInstance<S>, start: &UserDistribution) -> Result<ClimbResult<S>> {
    start.check(inst)?;
    let ev = evaluate(inst, start)?;
    let (mut current, mut current_obj, rho) = match ev.objective {
        Some(obj) => (start.clone(), obj, ev.rho),
        None => match best_feasible(inst, neighbors(start))? {
            Some(found) => found,
            None => {
                return Ok(ClimbResult {
                    best: start.clone(),
                    objective: None,
                    trace: OptimizationTrace {
                        steps: Vec::new(),
                        outcome: ClimbOutcome::StartInfeasible,
                    },
                })
            }
        },
    };
    let mut steps = vec![TraceStep {
        iteration: 0,
        distribution: current.clone(),
        objective: current_obj,
        rho,
    }];

    let outcome = loop {
        let nbs = neighbors(&current);
        let no_neighbors = nbs.is_empty();
        match best_feasible(inst, nbs)? {
            None if no_neighbors => break ClimbOutcome::LocalOptimum,
            None => break ClimbOutcome::AllNeighborsInfeasible,
            Some((next, obj, rho)) if obj > current_obj => {
                steps.push(TraceStep {
                    iteration: steps.len(),
                    distribution: next.clone(),
                    objective: obj,
                    rho,
                });
                current = next;
                current_obj = obj;
            }
            Some(_) => break ClimbOutcome::LocalOptimum,
        }
    };

    Ok(ClimbResult {
        best: current,
        objective: Some(current_obj),
        trace: OptimizationTrace { steps, outcome },
    })
}

/// True when no feasible neighbor of `dist` has a strictly larger objective.
pub fn is_local_optimum<S: Scalar>(inst: &ModelInstance<S>, dist: &UserDistribution) -> Result<bool> {
    let Some(own) = evaluate(inst, dist)?.objective else {
        return Ok(false);
    };
    for nb in neighbors(dist) {
        if let Some(obj) = evaluate(inst, &nb)?.objective {
            if obj > own {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult<S> {
    pub best: UserDistribution,
    pub objective: S,
    /// Number of compositions enumerated (feasible or not).
    pub evaluated: u64,
    pub infeasible_count: u64,
}

fn check_cap(n: usize, m: usize, cap: u128) -> Result<u128> {
    match composition_count(n, m) {
        Some(count) if count <= cap => Ok(count),
        Some(count) => Err(Error::CapExceeded { count, cap }),
        None => Err(Error::CapExceeded { count: u128::MAX, cap }),
    }
}

#[derive(Debug, Clone)]
struct Partial<S> {
    best: Option<(UserDistribution, S)>,
    evaluated: u64,
    infeasible: u64,
}

impl<S: Scalar> Partial<S> {
    fn empty() -> Self {
        Self {
            best: None,
            evaluated: 0,
            infeasible: 0,
        }
    }

    fn push(&mut self, inst: &ModelInstance<S>, dist: UserDistribution) -> Result<()> {
        self.evaluated += 1;
        match evaluate(inst, &dist)?.objective {
            None => self.infeasible += 1,
            Some(obj) => {
                let replace = match &self.best {
                    None => true,
                    Some((d, o)) => better((&dist, obj), (d, *o)),
                };
                if replace {
                    self.best = Some((dist, obj));
                }
            }
        }
        Ok(())
    }

    fn merge(self, other: Self) -> Self {
        let best = match (self.best, other.best) {
            (None, b) | (b, None) => b,
            (Some(a), Some(b)) => {
                if better((&b.0, b.1), (&a.0, a.1)) {
                    Some(b)
                } else {
                    Some(a)
                }
            }
        };
        Self {
            best,
            evaluated: self.evaluated + other.evaluated,
            infeasible: self.infeasible + other.infeasible,
        }
    }

    fn finish(self) -> Result<BruteForceResult<S>> {
        match self.best {
            Some((best, objective)) => Ok(BruteForceResult {
                best,
                objective,
                evaluated: self.evaluated,
                infeasible_count: self.infeasible,
            }),
            None => Err(Error::NoFeasiblePoint {
                evaluated: self.evaluated,
            }),
        }
    }
}

/// Evaluates every composition and returns the best feasible one.
///
/// Refuses to start when `C(n + m − 1, m − 1)` exceeds `cap`.
pub fn brute_force<S: Scalar>(inst: &ModelInstance<S>, cap: u128) -> Result<BruteForceResult<S>> {
    check_cap(inst.n(), inst.m(), cap)?;
    let mut acc = Partial::empty();
    for counts in compositions(inst.n(), inst.m()) {
        acc.push(inst, UserDistribution::new(counts))?;
    }
    acc.finish()
}

/// Same result as [`brute_force`], split over the first coordinate with rayon.
pub fn brute_force_parallel<S: Scalar>(inst: &ModelInstance<S>, cap: u128) -> Result<BruteForceResult<S>> {
    check_cap(inst.n(), inst.m(), cap)?;
    let (n, m) = (inst.n(), inst.m());
    if m == 1 {
        return brute_force(inst, cap);
    }
    (0..=n)
        .into_par_iter()
        .map(|first| {
            let mut acc = Partial::empty();
            for rest in compositions(n - first, m - 1) {
                let mut counts = Vec::with_capacity(m);
                counts.push(first);
                counts.extend(rest);
                acc.push(inst, UserDistribution::new(counts))?;
            }
            Ok(acc)
        })
        .try_reduce(Partial::empty, |a, b| Ok(a.merge(b)))?
        .finish()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiStartResult<S> {
    pub starts: Vec<UserDistribution>,
    pub runs: Vec<ClimbResult<S>>,
    /// Index into `runs` of the best final point.
    pub best_index: Option<usize>,
    /// Fraction of runs ending at the best final distribution.
    pub agreement: f64,
}

impl<S: Scalar> MultiStartResult<S> {
    pub fn best(&self) -> Option<&ClimbResult<S>> {
        self.best_index.map(|i| &self.runs[i])
    }
}

/// Runs [`hill_climb`] from `starts` random distributions drawn from a
/// ChaCha8 stream seeded with `seed`. Start points are drawn sequentially,
/// so results do not depend on thread scheduling.
pub fn multi_start<S: Scalar>(inst: &ModelInstance<S>, starts: usize, seed: u64) -> Result<MultiStartResult<S>> {
    if starts == 0 {
        return Err(Error::invalid("starts must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<UserDistribution> = (0..starts)
        .map(|_| random_distribution(inst.n(), inst.m(), &mut rng))
        .collect();
    let runs = points
        .par_iter()
        .map(|s| hill_climb(inst, s))
        .collect::<Result<Vec<_>>>()?;

    let mut best_index: Option<usize> = None;
    for (i, run) in runs.iter().enumerate() {
        let Some(obj) = run.objective else { continue };
        let replace = match best_index {
            None => true,
            Some(b) => better(
                (&run.best, obj),
                (&runs[b].best, runs[b].objective.expect("best run is feasible")),
            ),
        };
        if replace {
            best_index = Some(i);
        }
    }
    let agreement = match best_index {
        Some(b) => runs.iter().filter(|r| r.best == runs[b].best).count() as f64 / starts as f64,
        None => 0.0,
    };
    Ok(MultiStartResult {
        starts: points,
        runs,
        best_index,
        agreement,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceRecord<S> {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    /// `None` marks an infeasible point.
    pub objective: Option<S>,
    pub rho: S,
}

/// Objective over every `(n1, n2)` with `n3 = n − n1 − n2`, row-major in
/// `(n1, n2)`. Only defined for three categories.
pub fn sweep_surface<S: Scalar>(inst: &ModelInstance<S>) -> Result<Vec<SurfaceRecord<S>>> {
    if inst.m() != 3 {
        return Err(Error::UnsupportedDimension { m: inst.m(), expected: 3 });
    }
    let n = inst.n();
    let rows = (0..=n)
        .into_par_iter()
        .map(|n1| {
            (0..=n - n1)
                .map(|n2| {
                    let n3 = n - n1 - n2;
                    let ev = evaluate(inst, &UserDistribution::new(vec![n1, n2, n3]))?;
                    Ok(SurfaceRecord {
                        n1,
                        n2,
                        n3,
                        objective: ev.objective,
                        rho: ev.rho,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}
