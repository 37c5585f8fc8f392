//! Floor iterates, multiple ergodic averages and their diagnostics.
//!
//! The average of an [`ExperimentSpec`] with factors `(T_i, f_i, a_i, x_i)` is
//! `A_N = (1/N) Σ_{n<N} Π_i f_i(T_i^{[a_i(n)]} x_i)`.

mod occupancy;
pub mod sum;

use std::fmt;

use num_complex::Complex64;
use rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use thiserror::Error;

use crate::dd::DoubleDouble;
use crate::expr::{Expr, FunctionError, FunctionSpec};
use crate::funclass::{check_dominated, Verdict};
use crate::systems::{Observable, PointState, SystemError, SystemSpec};

pub use occupancy::{occupancy, predicted_interval, term_decomposition, OccupancyTable, TermMagnitudes};
use sum::{block_sums, pairwise, BLOCK};

/// Default cap on `N`.
pub const N_MAX: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Function(#[from] FunctionError),
    #[error("N = {n} exceeds the budget {max}")]
    Budget { n: u64, max: u64 },
    #[error("iterates are not ordered by growth: {detail}")]
    GrowthOrder { detail: String },
    #[error("invalid experiment: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Slope {
    Real(DoubleDouble),
    Rational { p: i64, q: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum IterateSequence {
    Sublinear(FunctionSpec),
    /// `a(n) = slope · n + offset`.
    Linear { slope: Slope, offset: DoubleDouble },
}

impl IterateSequence {
    pub fn sublinear(f: FunctionSpec) -> Self {
        IterateSequence::Sublinear(f)
    }

    pub fn linear(slope: impl Into<DoubleDouble>, offset: impl Into<DoubleDouble>) -> Self {
        IterateSequence::Linear {
            slope: Slope::Real(slope.into()),
            offset: offset.into(),
        }
    }

    pub fn rational(p: i64, q: u64, offset: impl Into<DoubleDouble>) -> Result<Self, EngineError> {
        if q == 0 {
            return Err(EngineError::Invalid("slope denominator must be positive".into()));
        }
        Ok(IterateSequence::Linear {
            slope: Slope::Rational { p, q },
            offset: offset.into(),
        })
    }

    /// `[a(n)]`; zero at or below the function's domain start.
    pub fn floor_at(&self, n: u64) -> Result<i64, EngineError> {
        match self {
            IterateSequence::Sublinear(f) => {
                let x = n as f64;
                if x <= f.domain_start() {
                    return Ok(0);
                }
                let v = f.value(x)?;
                if !v.is_finite() {
                    return Err(EngineError::Invalid(format!("{f} is not finite at n = {n}")));
                }
                Ok(v.floor() as i64)
            }
            IterateSequence::Linear {
                slope: Slope::Real(g),
                offset,
            } => Ok((g.mul_i64(n as i64) + *offset).floor_i64()),
            IterateSequence::Linear {
                slope: Slope::Rational { p, q },
                offset,
            } => {
                let pn = *p as i128 * n as i128;
                let q = *q as i128;
                let whole = pn.div_euclid(q) as i64;
                let rest = DoubleDouble::from_f64(pn.rem_euclid(q) as f64).div_f64(q as f64) + *offset;
                Ok(whole + rest.floor_i64())
            }
        }
    }

    /// Real-valued function used for growth comparisons.
    pub fn growth_function(&self) -> Result<FunctionSpec, EngineError> {
        match self {
            IterateSequence::Sublinear(f) => Ok(f.clone()),
            IterateSequence::Linear { slope, offset } => {
                let k = match slope {
                    Slope::Real(g) => g.to_f64(),
                    Slope::Rational { p, q } => *p as f64 / *q as f64,
                };
                let e = Expr::Add(
                    Box::new(Expr::Mul(Box::new(Expr::Const(k)), Box::new(Expr::Var))),
                    Box::new(Expr::Const(offset.to_f64())),
                );
                Ok(FunctionSpec::from_expr(e)?)
            }
        }
    }

    pub fn is_sublinear(&self) -> bool {
        matches!(self, IterateSequence::Sublinear(_))
    }
}

impl fmt::Display for IterateSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IterateSequence::Sublinear(g) => write!(f, "{g}"),
            IterateSequence::Linear {
                slope: Slope::Real(g),
                offset,
            } => write!(f, "{:.17}*n+{:.17}", g.to_f64(), offset.to_f64()),
            IterateSequence::Linear {
                slope: Slope::Rational { p, q },
                offset,
            } => write!(f, "({p}/{q})*n+{:.17}", offset.to_f64()),
        }
    }
}

/// `[a(n)]` for `n` in `0..N`.
pub fn floor_iterates(a: &IterateSequence, n: u64) -> Result<Vec<i64>, EngineError> {
    if n > N_MAX {
        return Err(EngineError::Budget { n, max: N_MAX });
    }
    (0..n).map(|k| a.floor_at(k)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coupling {
    /// One draw shared by every factor with the same state space.
    Diagonal,
    /// Independent draws per factor.
    Product,
    /// Start points given explicitly.
    Explicit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    pub system: SystemSpec,
    pub observable: Observable,
    pub iterate: IterateSequence,
    pub start: PointState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    factors: Vec<Factor>,
}

impl ExperimentSpec {
    /// Validates that observables live on their systems and that iterates
    /// are strictly ordered by growth, fastest first (and their derivatives
    /// too when every iterate is sublinear).
    pub fn new(factors: Vec<Factor>) -> Result<Self, EngineError> {
        if factors.is_empty() {
            return Err(EngineError::Invalid("at least one factor is required".into()));
        }
        for f in &factors {
            f.observable.eval(&f.start)?;
            f.system.apply_power(1, &f.start)?;
        }
        let all_sublinear = factors.iter().all(|f| f.iterate.is_sublinear());
        for pair in factors.windows(2) {
            let fast = pair[0].iterate.growth_function()?;
            let slow = pair[1].iterate.growth_function()?;
            let v = check_dominated(&slow, &fast);
            if v.verdict != Verdict::Holds {
                return Err(EngineError::GrowthOrder {
                    detail: format!("{} ({}: {})", v.class_name, v.verdict, v.reason),
                });
            }
            if all_sublinear {
                let d = |g: &FunctionSpec| -> Result<FunctionSpec, EngineError> {
                    let e = g.derivative_expr(1).cloned().ok_or_else(|| {
                        EngineError::Invalid(format!("{g} has no symbolic derivative"))
                    })?;
                    Ok(FunctionSpec::from_expr(e)?)
                };
                let v = check_dominated(&d(&slow)?, &d(&fast)?);
                if v.verdict != Verdict::Holds {
                    return Err(EngineError::GrowthOrder {
                        detail: format!("derivatives: {} ({}: {})", v.class_name, v.verdict, v.reason),
                    });
                }
            }
        }
        Ok(ExperimentSpec { factors })
    }

    /// Skips the growth-order validation; for diagnostics on unordered
    /// iterates.
    pub fn unchecked(factors: Vec<Factor>) -> Self {
        ExperimentSpec { factors }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn d(&self) -> usize {
        self.factors.len()
    }

    /// `Π ‖f_i‖_∞`.
    pub fn sup_bound(&self) -> f64 {
        self.factors
            .iter()
            .map(|f| f.observable.sup_norm_bound())
            .product()
    }

    fn states(&self, n: u64) -> Result<Vec<PointState>, EngineError> {
        self.factors
            .iter()
            .map(|f| Ok(f.system.apply_power(f.iterate.floor_at(n)?, &f.start)?))
            .collect()
    }

    fn term(&self, n: u64) -> Result<Complex64, EngineError> {
        let mut acc = Complex64::new(1.0, 0.0);
        for f in &self.factors {
            let y = f.system.apply_power(f.iterate.floor_at(n)?, &f.start)?;
            acc *= f.observable.eval(&y)?;
        }
        Ok(acc)
    }
}

/// `A_N`, bit-identical for every worker count.
pub fn multiple_average(spec: &ExperimentSpec, n: u64, workers: usize) -> Result<Complex64, EngineError> {
    if n == 0 {
        return Err(EngineError::Invalid("N must be positive".into()));
    }
    if n > N_MAX {
        return Err(EngineError::Budget { n, max: N_MAX });
    }
    let sums = block_sums(0, n, workers, |k| spec.term(k))?;
    Ok(pairwise(&sums) / n as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AverageTrace {
    pub checkpoints: Vec<u64>,
    pub values: Vec<Complex64>,
    /// `|A_{N_k} - A_{N_{k-1}}|`, one per checkpoint after the first.
    pub cauchy_defects: Vec<f64>,
}

/// `10^3 · 2^k` up to `budget`, ending exactly at `budget`.
pub fn default_schedule(budget: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut n = 1000u64;
    while n < budget {
        out.push(n);
        n *= 2;
    }
    out.push(budget);
    out
}

/// Values at each checkpoint; completed blocks are reused between
/// checkpoints, so each value equals a fresh [`multiple_average`].
pub fn trace(spec: &ExperimentSpec, schedule: &[u64], workers: usize) -> Result<AverageTrace, EngineError> {
    if schedule.windows(2).any(|w| w[1] <= w[0]) || schedule.first() == Some(&0) {
        return Err(EngineError::Invalid("schedule must be positive and increasing".into()));
    }
    if let Some(&last) = schedule.last() {
        if last > N_MAX {
            return Err(EngineError::Budget { n: last, max: N_MAX });
        }
    }
    let mut full: Vec<Complex64> = Vec::new();
    let mut values = Vec::with_capacity(schedule.len());
    for &n in schedule {
        let complete = n / BLOCK;
        let done = full.len() as u64;
        if complete > done {
            full.extend(block_sums(done * BLOCK, complete * BLOCK, workers, |k| spec.term(k))?);
        }
        let mut sums = full.clone();
        sums.extend(block_sums(complete * BLOCK, n, 1, |k| spec.term(k))?);
        values.push(pairwise(&sums) / n as f64);
    }
    let cauchy_defects = values.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    Ok(AverageTrace {
        checkpoints: schedule.to_vec(),
        values,
        cauchy_defects,
    })
}

/// Shift applied to the first coordinate by the invariance probe: `p` for a
/// rational slope `p/q`, otherwise 1.
pub fn invariance_shift(spec: &ExperimentSpec) -> i64 {
    match spec.factors[0].iterate {
        IterateSequence::Linear {
            slope: Slope::Rational { p, .. },
            ..
        } => p,
        _ => 1,
    }
}

fn joint_state(states: Vec<PointState>) -> PointState {
    if states.len() == 1 {
        states.into_iter().next().unwrap()
    } else {
        PointState::Product(states)
    }
}

/// `|∫ g dλ_N − ∫ g d((T_1^r × id × …)λ_N)|` for the empirical measure along
/// the orbit; `g` lives on the product of the factor systems (or on the
/// single system when `d = 1`).
pub fn invariance_defect(
    spec: &ExperimentSpec,
    n: u64,
    g: &Observable,
    workers: usize,
) -> Result<f64, EngineError> {
    if n == 0 || n > N_MAX {
        return Err(EngineError::Budget { n, max: N_MAX });
    }
    let r = invariance_shift(spec);
    let first = &spec.factors[0].system;
    let sums = block_sums(0, n, workers, |k| {
        let states = spec.states(k)?;
        let mut shifted = states.clone();
        shifted[0] = first.apply_power(r, &shifted[0])?;
        let a = g.eval(&joint_state(states))?;
        let b = g.eval(&joint_state(shifted))?;
        Ok::<_, EngineError>(a - b)
    })?;
    Ok((pairwise(&sums) / n as f64).norm())
}

/// Whether `m = [nγ + ℓ]` for some integer `n`: `{(m − ℓ)/γ}` lies in
/// `(1 − 1/γ, 1)` or is exactly 0.
pub fn hits_linear_floor(gamma: DoubleDouble, ell: DoubleDouble, m: i64) -> bool {
    let s = (DoubleDouble::from_f64(m as f64) - ell) * gamma.recip();
    let frac = s.frac();
    if frac.to_f64() == 0.0 {
        return true;
    }
    let lower = DoubleDouble::ONE - gamma.recip();
    (frac - lower).to_f64() > 0.0 && frac.to_f64() < 1.0
}

/// Star discrepancy of the first `n` points, from the sorted-sample formula.
pub fn discrepancy(points: &[f64], n: usize) -> f64 {
    let n = n.min(points.len());
    if n == 0 {
        return 0.0;
    }
    let mut p: Vec<f64> = points[..n].iter().map(|x| x.rem_euclid(1.0)).collect();
    p.sort_by(f64::total_cmp);
    let nf = n as f64;
    p.iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / nf - x).max(x - i as f64 / nf))
        .fold(0.0, f64::max)
}

/// Seeded uniform draws in `[0, 1)` from SplitMix64.
pub struct StartSampler {
    rng: SplitMix64,
}

impl StartSampler {
    pub fn new(seed: u64) -> Self {
        StartSampler {
            rng: SplitMix64::seed_from_u64(seed),
        }
    }

    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// One start point per system. Under [`Coupling::Diagonal`] systems that
    /// share a state space (same kind, same cycle length) reuse the first
    /// draw made for that space.
    pub fn starts(&mut self, systems: &[SystemSpec], coupling: Coupling) -> Vec<PointState> {
        let mut made: Vec<(&'static str, u64, PointState)> = Vec::new();
        systems
            .iter()
            .map(|s| {
                let key = space_key(s);
                if coupling == Coupling::Diagonal {
                    if let Some(key) = key {
                        if let Some((_, _, p)) = made.iter().find(|(a, b, _)| (*a, *b) == key) {
                            return p.clone();
                        }
                    }
                }
                let p = s.point_from_uniform(&mut || self.uniform());
                if let Some((a, b)) = key {
                    made.push((a, b, p.clone()));
                }
                p
            })
            .collect()
    }
}

fn space_key(s: &SystemSpec) -> Option<(&'static str, u64)> {
    match s {
        SystemSpec::CircleRotation { .. } => Some(("circle", 0)),
        SystemSpec::FiniteCycle { q, .. } => Some(("cycle", *q)),
        _ => None,
    }
}
