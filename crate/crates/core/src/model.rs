//! The triggering model: knowledge produced per category evolves as
//! `K(t) = N (T K(t−1) + R(t))`, with `N = diag(n_1..n_m)`.
//!
//! When `ρ(NT) < 1` the cumulative output converges to `(I − NT)⁻¹ N R`
//! whatever the release schedule of internal knowledge, and the part of it
//! produced by triggering is `K − N R = N T K`.

use std::fmt;
use std::ops::Index;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{mat_vec_mul, solve_linear, spectral_radius, DenseMatrix, DenseVector};
use crate::scalar::Scalar;

/// Distributions with `ρ(NT) ≥ 1 − FEASIBILITY_MARGIN` are rejected.
pub const FEASIBILITY_MARGIN: f64 = 1e-9;
/// Geometric schedules stop releasing once the unreleased tail is at most this fraction.
pub const GEOMETRIC_TAIL: f64 = 1e-12;

/// Problem data: `n` users split over `m` categories with triggering matrix
/// `T` (`m×m`) and per-user internal knowledge `r` (length `m`).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInstance<S> {
    name: Option<String>,
    n: usize,
    triggering: DenseMatrix<S>,
    internal: DenseVector<S>,
    weights: Option<DenseVector<S>>,
}

impl<S: Scalar> ModelInstance<S> {
    pub fn new(
        n: usize,
        triggering: DenseMatrix<S>,
        internal: DenseVector<S>,
        weights: Option<DenseVector<S>>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if !triggering.is_square() {
            return Err(Error::invalid(format!(
                "T must be square, got {}x{}",
                triggering.rows(),
                triggering.cols()
            )));
        }
        let m = triggering.rows();
        if let Some(k) = triggering.as_slice().iter().position(|&x| x < S::zero()) {
            return Err(Error::invalid(format!("T[{}][{}] is negative", k / m, k % m)));
        }
        if internal.len() != m {
            return Err(Error::invalid(format!(
                "r has length {}, expected m = {m}",
                internal.len()
            )));
        }
        if let Some(i) = internal.as_slice().iter().position(|&x| x < S::zero()) {
            return Err(Error::invalid(format!("r[{i}] is negative")));
        }
        if let Some(w) = &weights {
            check_weights(w, m)?;
        }
        Ok(Self {
            name: None,
            n,
            triggering,
            internal,
            weights,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    /// Replaces the objective weights.
    pub fn with_weights(mut self, weights: Option<DenseVector<S>>) -> Result<Self> {
        if let Some(w) = &weights {
            check_weights(w, self.m())?;
        }
        self.weights = weights;
        Ok(self)
    }

    /// Same instance with every `r_i` multiplied by `factor`.
    pub fn with_internal_scaled(&self, factor: S) -> Result<Self> {
        if !(factor >= S::zero()) {
            return Err(Error::invalid("internal knowledge scale must be nonnegative"));
        }
        let mut out = self.clone();
        out.internal = self.internal.scaled(factor);
        Ok(out)
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.triggering.rows()
    }

    pub fn triggering(&self) -> &DenseMatrix<S> {
        &self.triggering
    }

    pub fn internal(&self) -> &DenseVector<S> {
        &self.internal
    }

    pub fn weights(&self) -> Option<&DenseVector<S>> {
        self.weights.as_ref()
    }
}

fn check_weights<S: Scalar>(w: &DenseVector<S>, m: usize) -> Result<()> {
    if w.len() != m {
        return Err(Error::invalid(format!(
            "weights have length {}, expected m = {m}",
            w.len()
        )));
    }
    if let Some(i) = w.as_slice().iter().position(|&x| x < S::zero()) {
        return Err(Error::invalid(format!("weights[{i}] is negative")));
    }
    if w.as_slice().iter().all(|&x| x == S::zero()) {
        return Err(Error::invalid("weights are all zero"));
    }
    Ok(())
}

/// Number of users in each category.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UserDistribution(Vec<usize>);

impl UserDistribution {
    pub fn new(counts: Vec<usize>) -> Self {
        Self(counts)
    }

    pub fn counts(&self) -> &[usize] {
        &self.0
    }

    pub fn m(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    /// Checks that the distribution has `m` entries summing to `n`.
    pub fn check<S: Scalar>(&self, inst: &ModelInstance<S>) -> Result<()> {
        if self.m() != inst.m() {
            return Err(Error::invalid(format!(
                "distribution has {} categories, instance has m = {}",
                self.m(),
                inst.m()
            )));
        }
        if self.total() != inst.n() {
            return Err(Error::invalid(format!(
                "distribution sums to {}, instance has n = {}",
                self.total(),
                inst.n()
            )));
        }
        Ok(())
    }

    pub(crate) fn as_scalars<S: Scalar>(&self) -> Vec<S> {
        self.0.iter().map(|&c| S::from_count(c)).collect()
    }
}

impl From<Vec<usize>> for UserDistribution {
    fn from(counts: Vec<usize>) -> Self {
        Self(counts)
    }
}

impl fmt::Display for UserDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for UserDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split(',')
            .enumerate()
            .map(|(i, part)| {
                part.trim().parse::<usize>().map_err(|_| {
                    Error::invalid(format!(
                        "entry {i} ({:?}) is not a nonnegative integer",
                        part.trim()
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

/// How each category's internal knowledge `r_i` is released over time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReleaseSchedule {
    /// Everything at `t = 0`.
    Impulse,
    /// `r_i / W` at each of `t = 0..W`.
    Uniform { window: usize },
    /// `r_i (1 − q) qᵗ`, truncated once the tail is below [`GEOMETRIC_TAIL`].
    Geometric { ratio: f64 },
}

impl ReleaseSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ReleaseSchedule::Impulse => Ok(()),
            ReleaseSchedule::Uniform { window } if window >= 1 => Ok(()),
            ReleaseSchedule::Uniform { .. } => Err(Error::invalid("uniform window must be at least 1")),
            ReleaseSchedule::Geometric { ratio } if ratio > 0.0 && ratio < 1.0 => Ok(()),
            ReleaseSchedule::Geometric { ratio } => Err(Error::invalid(format!(
                "geometric ratio must lie in (0, 1), got {ratio}"
            ))),
        }
    }

    /// Fraction of `r_i` released at each step; the last step absorbs the
    /// rounding remainder so the fractions sum to one.
    pub fn fractions<S: Scalar>(&self) -> Result<Vec<S>> {
        self.validate()?;
        let mut out: Vec<S> = match *self {
            ReleaseSchedule::Impulse => vec![S::one()],
            ReleaseSchedule::Uniform { window } => {
                vec![S::one() / S::from_count(window); window]
            }
            ReleaseSchedule::Geometric { ratio } => {
                let q = S::lit(ratio);
                let tail_limit = S::lit(GEOMETRIC_TAIL);
                let mut fr = Vec::new();
                let mut q_pow = S::one();
                loop {
                    fr.push((S::one() - q) * q_pow);
                    q_pow = q_pow * q;
                    if q_pow <= tail_limit {
                        break;
                    }
                }
                fr
            }
        };
        let head: S = out[..out.len() - 1].iter().copied().sum();
        let last = out.len() - 1;
        out[last] = S::one() - head;
        Ok(out)
    }
}

impl fmt::Display for ReleaseSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReleaseSchedule::Impulse => f.write_str("impulse"),
            ReleaseSchedule::Uniform { window } => write!(f, "uniform:{window}"),
            ReleaseSchedule::Geometric { ratio } => write!(f, "geometric:{ratio}"),
        }
    }
}

impl FromStr for ReleaseSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let sched = match s.split_once(':') {
            None if s == "impulse" => ReleaseSchedule::Impulse,
            Some(("uniform", w)) => ReleaseSchedule::Uniform {
                window: w
                    .parse()
                    .map_err(|_| Error::invalid(format!("uniform window {w:?} is not an integer")))?,
            },
            Some(("geometric", q)) => ReleaseSchedule::Geometric {
                ratio: q
                    .parse()
                    .map_err(|_| Error::invalid(format!("geometric ratio {q:?} is not a number")))?,
            },
            _ => {
                return Err(Error::invalid(format!(
                    "unknown schedule {s:?}; expected impulse, uniform:W or geometric:q"
                )))
            }
        };
        sched.validate()?;
        Ok(sched)
    }
}

/// Knowledge units per category.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeVector<S>(DenseVector<S>);

impl<S: Scalar> KnowledgeVector<S> {
    pub fn new(entries: Vec<S>) -> Result<Self> {
        let v = DenseVector::new(entries)?;
        if let Some(i) = v.as_slice().iter().position(|&x| x < S::zero()) {
            return Err(Error::invalid(format!("knowledge entry {i} is negative")));
        }
        Ok(Self(v))
    }

    fn computed(v: DenseVector<S>) -> Self {
        Self(v)
    }

    pub fn as_slice(&self) -> &[S] {
        self.0.as_slice()
    }

    pub fn as_vector(&self) -> &DenseVector<S> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> S {
        self.0.sum()
    }
}

impl<S> Index<usize> for KnowledgeVector<S> {
    type Output = S;

    fn index(&self, i: usize) -> &S {
        &self.0[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult<S> {
    /// `(t, K(t))` for every recorded step.
    pub per_step: Vec<(usize, KnowledgeVector<S>)>,
    pub cumulative: KnowledgeVector<S>,
    pub steps_run: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility<S> {
    pub rho: S,
    pub feasible: bool,
}

impl<S: Scalar> Feasibility<S> {
    pub fn bound() -> S {
        S::one() - S::lit(FEASIBILITY_MARGIN)
    }

    pub fn into_result(self) -> Result<S> {
        if self.feasible {
            Ok(self.rho)
        } else {
            Err(Error::Infeasible {
                rho: self.rho.as_f64(),
                bound: Self::bound().as_f64(),
            })
        }
    }
}

/// Split of the steady-state total into internal and triggered knowledge.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition<S> {
    /// `N r`
    pub internal: KnowledgeVector<S>,
    /// `K − N r`
    pub triggered: KnowledgeVector<S>,
    /// `internal + triggered`
    pub total: KnowledgeVector<S>,
}

impl<S: Scalar> Decomposition<S> {
    /// Share of the total produced by triggering.
    pub fn triggered_ratio(&self) -> S {
        let total = self.total.total();
        if total == S::zero() {
            S::zero()
        } else {
            self.triggered.total() / total
        }
    }
}

/// `N T` for the given distribution.
pub fn interaction_matrix<S: Scalar>(
    inst: &ModelInstance<S>,
    dist: &UserDistribution,
) -> Result<DenseMatrix<S>> {
    dist.check(inst)?;
    inst.triggering.scale_rows(&dist.as_scalars())
}

fn scale_entries<S: Scalar>(counts: &[S], v: &[S]) -> DenseVector<S> {
    DenseVector::from_vec_unchecked(counts.iter().zip(v).map(|(&n, &x)| n * x).collect())
}

/// One step of the recursion: `N (T k_prev + r_t)`.
pub fn step<S: Scalar>(
    inst: &ModelInstance<S>,
    dist: &UserDistribution,
    k_prev: &KnowledgeVector<S>,
    r_t: &DenseVector<S>,
) -> Result<KnowledgeVector<S>> {
    dist.check(inst)?;
    if k_prev.len() != inst.m() || r_t.len() != inst.m() {
        return Err(Error::invalid(format!(
            "step needs vectors of length m = {}, got k_prev {} and r_t {}",
            inst.m(),
            k_prev.len(),
            r_t.len()
        )));
    }
    let triggered = mat_vec_mul(&inst.triggering, k_prev.as_vector())?;
    let inner: Vec<S> = triggered
        .as_slice()
        .iter()
        .zip(r_t.as_slice())
        .map(|(&a, &b)| a + b)
        .collect();
    Ok(KnowledgeVector::computed(scale_entries(
        &dist.as_scalars(),
        &inner,
    )))
}

pub fn feasibility<S: Scalar>(
    inst: &ModelInstance<S>,
    dist: &UserDistribution,
) -> Result<Feasibility<S>> {
    let nt = interaction_matrix(inst, dist)?;
    let rho = spectral_radius(&nt)?;
    Ok(Feasibility {
        rho,
        feasible: rho < Feasibility::<S>::bound(),
    })
}

/// Runs the recursion from `K(0) = N R(0)`.
///
/// Once the schedule has released everything, the run stops at the first
/// step whose increment has `‖K(t)‖∞ < tol · (1 + Σ cumulative)`; that
/// step is not recorded. Hitting `max_steps` recorded steps first returns
/// the partial run with `converged = false`.
pub fn simulate<S: Scalar>(
    inst: &ModelInstance<S>,
    dist: &UserDistribution,
    schedule: &ReleaseSchedule,
    tol: S,
    max_steps: usize,
) -> Result<SimulationResult<S>> {
    if !(tol > S::zero()) {
        return Err(Error::invalid("tol must be positive"));
    }
    if max_steps == 0 {
        return Err(Error::invalid("max_steps must be at least 1"));
    }
    feasibility(inst, dist)?.into_result()?;
    let fractions = schedule.fractions::<S>()?;
    let counts = dist.as_scalars::<S>();
    let nt = interaction_matrix(inst, dist)?;
    let r = inst.internal.as_slice();
    let release = |t: usize| -> Vec<S> {
        match fractions.get(t) {
            Some(&f) => r.iter().map(|&ri| ri * f).collect(),
            None => vec![S::zero(); r.len()],
        }
    };

    let mut k = scale_entries(&counts, &release(0));
    let mut cumulative = k.as_slice().to_vec();
    let mut per_step = vec![(0, KnowledgeVector::computed(k.clone()))];
    let mut converged = false;
    let mut t = 1;
    while per_step.len() < max_steps {
        let triggered = mat_vec_mul(&nt, &k)?;
        let internal = scale_entries(&counts, &release(t));
        let next = DenseVector::from_vec_unchecked(
            triggered
                .as_slice()
                .iter()
                .zip(internal.as_slice())
                .map(|(&a, &b)| a + b)
                .collect(),
        );
        let running_total: S = cumulative.iter().copied().sum();
        if t >= fractions.len() && next.norm_inf() < tol * (S::one() + running_total) {
            converged = true;
            break;
        }
        cumulative
            .iter_mut()
            .zip(next.as_slice())
            .for_each(|(c, &x)| *c = *c + x);
        per_step.push((t, KnowledgeVector::computed(next.clone())));
        k = next;
        t += 1;
    }

    Ok(SimulationResult {
        steps_run: per_step.len(),
        per_step,
        cumulative: KnowledgeVector::computed(DenseVector::from_vec_unchecked(cumulative)),
        converged,
    })
}

/// Total knowledge ever produced: the solution of `(I − NT) K = N r`.
pub fn steady_state_total<S: Scalar>(
    inst: &ModelInstance<S>,
    dist: &UserDistribution,
) -> Result<KnowledgeVector<S>> {
    feasibility(inst, dist)?.into_result()?;
    solve_steady_state(inst, dist)
}

/// Steady state without the feasibility gate; callers must have checked it.
pub(crate) fn solve_steady_state<S: Scalar>(
    inst: &ModelInstance<S>,
    dist: &UserDistribution,
) -> Result<KnowledgeVector<S>> {
    let nt = interaction_matrix(inst, dist)?;
    let rhs = scale_entries(&dist.as_scalars(), inst.internal.as_slice());
    // Empty categories hold exactly zero knowledge; leaving them out of the
    // solve keeps round-off from leaking into them.
    let live: Vec<usize> = (0..dist.m()).filter(|&i| dist.counts()[i] > 0).collect();
    let mut k = vec![S::zero(); dist.m()];
    if !live.is_empty() {
        let sub = live
            .iter()
            .flat_map(|&i| live.iter().map(move |&j| (i, j)))
            .map(|(i, j)| nt[(i, j)])
            .collect();
        let sub = DenseMatrix::new(live.len(), live.len(), sub)?;
        let sub_rhs = DenseVector::from_vec_unchecked(live.iter().map(|&i| rhs[i]).collect());
        let x = solve_linear(&sub.identity_minus()?, &sub_rhs).map_err(|e| match e {
            Error::Singular { .. } => Error::NumericFailure(format!(
                "I - NT is numerically singular for {dist} although rho(NT) < 1: {e}"
            )),
            other => other,
        })?;
        // the exact solution is nonnegative; clip round-off below zero
        for (&i, &v) in live.iter().zip(x.as_slice()) {
            k[i] = v.max(S::zero());
        }
    }
    Ok(KnowledgeVector::computed(DenseVector::from_vec_unchecked(k)))
}

pub fn triggered_decomposition<S: Scalar>(
    inst: &ModelInstance<S>,
    dist: &UserDistribution,
) -> Result<Decomposition<S>> {
    let k = steady_state_total(inst, dist)?;
    let internal = scale_entries(&dist.as_scalars(), inst.internal.as_slice());
    let triggered: Vec<S> = k
        .as_slice()
        .iter()
        .zip(internal.as_slice())
        .map(|(&k, &i)| k - i)
        .collect();
    let total: Vec<S> = internal
        .as_slice()
        .iter()
        .zip(&triggered)
        .map(|(&i, &tr)| i + tr)
        .collect();
    Ok(Decomposition {
        internal: KnowledgeVector::computed(internal),
        triggered: KnowledgeVector::computed(DenseVector::from_vec_unchecked(triggered)),
        total: KnowledgeVector::computed(DenseVector::from_vec_unchecked(total)),
    })
}

/// `Σ w_i K_i`, unweighted when `weights` is `None`.
pub fn total_objective<S: Scalar>(k: &KnowledgeVector<S>, weights: Option<&DenseVector<S>>) -> Result<S> {
    match weights {
        None => Ok(k.total()),
        Some(w) if w.len() == k.len() => Ok(k
            .as_slice()
            .iter()
            .zip(w.as_slice())
            .map(|(&k, &w)| k * w)
            .sum()),
        Some(w) => Err(Error::invalid(format!(
            "weights have length {}, knowledge vector has length {}",
            w.len(),
            k.len()
        ))),
    }
}
