//! Numerical membership tests for the sublinear function classes.
//!
//! Every test works on the geometric grid `x_k = 10 · 10^{k/4}` up to `1e12`
//! and returns a [`ClassVerdict`] carrying the grid evidence. Decision rules:
//!
//! * tends to zero: either every tail value is below `1e-3` and the envelope
//!   over the last 12 points does not exceed the one over the 12 before, or the
//!   tail is non-increasing and decays at least like `(log log x)^{-1/2}`
//!   (local exponent `-d ln q / d ln ln ln x >= 0.5`). It fails when the tail
//!   stays above `1e-2` with exponent at most `0.05`.
//! * has a limit: three-point Richardson extrapolants in `u = 1/log x` agree
//!   to `1e-3` over the last 6 points. A ratio whose last 16 values swing by
//!   more than `1e-2` with two or more turning points oscillates.
//! * bounded by a stable ceiling: tail increments at most `1e-3`, or positive
//!   and geometrically shrinking, or an envelope that stops growing.
//! * sign constant: no sign change of the derivative on the tail; one change
//!   is inconclusive, two or more fail.

use std::fmt;

use serde::Serialize;

use crate::expr::{FunctionError, FunctionSpec, LogAbs, MonotoneHint};

pub const GRID_X0: f64 = 10.0;
pub const GRID_POINTS: usize = 45;
pub const TAIL: usize = 8;
const WINDOW: usize = 12;
const LIMIT_RUN: usize = 6;
const OSC_RUN: usize = 16;
const ZERO_TOL: f64 = 1e-3;
const FAIL_FLOOR: f64 = 1e-2;
const LIMIT_TOL: f64 = 1e-3;
const ZERO_SNAP: f64 = 5e-3;
const OSC_AMPLITUDE: f64 = 1e-2;
const H_POINTS: usize = 21;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

impl Verdict {
    fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Fails, _) | (_, Verdict::Fails) => Verdict::Fails,
            (Verdict::Holds, Verdict::Holds) => Verdict::Holds,
            _ => Verdict::Inconclusive,
        }
    }

    fn or(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Holds, _) | (_, Verdict::Holds) => Verdict::Holds,
            (Verdict::Fails, Verdict::Fails) => Verdict::Fails,
            _ => Verdict::Inconclusive,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessPoint {
    pub x: f64,
    pub value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassVerdict {
    pub class_name: String,
    pub verdict: Verdict,
    pub reason: String,
    pub witness: Vec<WitnessPoint>,
    pub estimated_limit: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub conjuncts: Vec<ClassVerdict>,
}

impl ClassVerdict {
    fn new(class_name: impl Into<String>, verdict: Verdict, reason: impl Into<String>) -> Self {
        ClassVerdict {
            class_name: class_name.into(),
            verdict,
            reason: reason.into(),
            witness: Vec::new(),
            estimated_limit: None,
            conjuncts: Vec::new(),
        }
    }

    fn with_witness(mut self, xs: &[f64], vals: &[Option<f64>]) -> Self {
        let n = xs.len().min(vals.len());
        let from = n.saturating_sub(TAIL);
        self.witness = xs[from..n]
            .iter()
            .zip(&vals[from..n])
            .map(|(&x, &value)| WitnessPoint { x, value })
            .collect();
        self
    }

    fn conjunction(class_name: &str, parts: Vec<ClassVerdict>) -> Self {
        let verdict = parts
            .iter()
            .fold(Verdict::Holds, |acc, p| acc.and(p.verdict));
        let reason = match verdict {
            Verdict::Holds => "all conditions hold".to_string(),
            _ => parts
                .iter()
                .filter(|p| p.verdict == verdict)
                .map(|p| format!("{}: {}", p.class_name, p.reason))
                .collect::<Vec<_>>()
                .join("; "),
        };
        ClassVerdict {
            conjuncts: parts,
            ..ClassVerdict::new(class_name, verdict, reason)
        }
    }
}

/// Values of `x a'/a`, `x a''/a'` and `x a'''/a''` on the grid; `None` marks
/// points where a ratio is undefined or not finite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioProfile {
    pub grid: Vec<f64>,
    pub r1: Vec<Option<f64>>,
    pub r2: Vec<Option<f64>>,
    pub r3: Vec<Option<f64>>,
}

pub fn base_grid() -> Vec<f64> {
    (0..GRID_POINTS)
        .map(|k| GRID_X0 * 10f64.powf(k as f64 / 4.0))
        .collect()
}

/// Sample points for `f`, ordered toward the end of its domain. An inverse
/// is sampled on the image of its base function's grid, which runs toward
/// `-∞` when the base decreases.
pub fn grid_for(f: &FunctionSpec) -> Vec<f64> {
    match f.inverse_base() {
        Some(base) => grid_for(base)
            .into_iter()
            .filter_map(|x| base.value(x).ok().filter(|y| y.is_finite()))
            .collect(),
        None => {
            let c = f.domain_start();
            base_grid()
                .into_iter()
                .map(|x| if c < GRID_X0 { x } else { c + x })
                .collect()
        }
    }
}

fn log_ratio(num: LogAbs, den: LogAbs, x: f64) -> Option<f64> {
    if den.sign == 0 {
        return None;
    }
    if num.sign == 0 {
        return Some(0.0);
    }
    let sign = f64::from(num.sign * den.sign) * x.signum();
    let v = sign * (x.abs().ln() + num.ln_abs - den.ln_abs).exp();
    v.is_finite().then_some(v)
}

fn ratio(f: &FunctionSpec, k: usize, x: f64) -> Option<f64> {
    let num = f.log_derivative(k, x).ok()?;
    let den = f.log_derivative(k - 1, x).ok()?;
    log_ratio(num, den, x)
}

pub fn ratio_profile(f: &FunctionSpec) -> RatioProfile {
    let grid = grid_for(f);
    let col = |k| grid.iter().map(|&x| ratio(f, k, x)).collect();
    RatioProfile {
        r1: col(1),
        r2: col(2),
        r3: col(3),
        grid,
    }
}

fn ln3(x: f64) -> f64 {
    x.abs().ln().ln().ln()
}

fn all_finite(vals: &[Option<f64>]) -> Option<Vec<f64>> {
    vals.iter()
        .map(|v| v.filter(|v| v.is_finite()))
        .collect()
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn zero_test(xs: &[f64], qs: &[Option<f64>]) -> (Verdict, String) {
    let n = xs.len();
    if n < 2 * WINDOW {
        return (Verdict::Inconclusive, "grid too short".into());
    }
    let Some(vals) = all_finite(qs) else {
        return (Verdict::Inconclusive, "non-finite values on the grid".into());
    };
    let vals: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
    let t = &vals[n - TAIL..];
    let tx = &xs[n - TAIL..];
    let last = t[TAIL - 1];
    if max_of(t) < ZERO_TOL && max_of(&vals[n - WINDOW..]) <= max_of(&vals[n - 2 * WINDOW..n - WINDOW]) {
        return (
            Verdict::Holds,
            format!("below {ZERO_TOL:e} on the tail with a non-increasing envelope (final {last:.3e})"),
        );
    }
    if tx.iter().any(|x| x.abs() <= 16.0) {
        return (Verdict::Inconclusive, "grid too close to the origin for the decay gauge".into());
    }
    let exponent = |i: usize, j: usize| -(t[j].ln() - t[i].ln()) / (ln3(tx[j]) - ln3(tx[i]));
    let non_increasing = t.windows(2).all(|w| w[1] <= w[0]);
    if non_increasing && (0..TAIL - 1).all(|i| exponent(i, i + 1) >= 0.5) {
        return (
            Verdict::Holds,
            format!("non-increasing and decaying at least like (log log x)^(-1/2) (final {last:.3e})"),
        );
    }
    let overall = exponent(0, TAIL - 1);
    if min_of(t) >= FAIL_FLOOR && overall <= 0.05 {
        return (
            Verdict::Fails,
            format!("stays above {FAIL_FLOOR:e} without decaying (final {last:.3e})"),
        );
    }
    (
        Verdict::Inconclusive,
        format!("no decision: final {last:.3e}, decay exponent {overall:.3}"),
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum LimitOutcome {
    Limit(f64),
    Oscillates { amplitude: f64 },
    Unstable { spread: f64 },
    Undefined,
}

fn limit_test(xs: &[f64], vals: &[Option<f64>]) -> LimitOutcome {
    let n = xs.len();
    let Some(v) = all_finite(&vals[n.saturating_sub(OSC_RUN)..]) else {
        return LimitOutcome::Undefined;
    };
    if v.len() < LIMIT_RUN + 2 {
        return LimitOutcome::Undefined;
    }
    let amplitude = max_of(&v) - min_of(&v);
    let diffs: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    let turns = diffs
        .windows(2)
        .filter(|d| d[0] * d[1] < 0.0)
        .count();
    if turns >= 2 && amplitude > OSC_AMPLITUDE {
        return LimitOutcome::Oscillates { amplitude };
    }
    let xs = &xs[n - v.len()..];
    let u: Vec<f64> = xs.iter().map(|x| 1.0 / x.abs().ln()).collect();
    // Quadratic through three consecutive points, evaluated at u = 0.
    let extrap: Vec<f64> = (2..v.len())
        .map(|i| {
            let (u0, u1, u2) = (u[i - 2], u[i - 1], u[i]);
            let l0 = u1 * u2 / ((u0 - u1) * (u0 - u2));
            let l1 = u0 * u2 / ((u1 - u0) * (u1 - u2));
            let l2 = u0 * u1 / ((u2 - u0) * (u2 - u1));
            l0 * v[i - 2] + l1 * v[i - 1] + l2 * v[i]
        })
        .collect();
    let run = &extrap[extrap.len() - LIMIT_RUN..];
    let spread = max_of(run) - min_of(run);
    if spread <= LIMIT_TOL {
        let l = run[LIMIT_RUN - 1];
        LimitOutcome::Limit(if l.abs() <= ZERO_SNAP { 0.0 } else { l })
    } else {
        LimitOutcome::Unstable { spread }
    }
}

/// Decides whether `exp(logs)` is eventually bounded; the ceiling is returned
/// in log scale.
fn ceiling_test(logs: &[Option<f64>]) -> (Verdict, Option<f64>, String) {
    let n = logs.len();
    if n < 2 * WINDOW {
        return (Verdict::Inconclusive, None, "grid too short".into());
    }
    let tail = &logs[n - TAIL..];
    if tail.contains(&Some(f64::INFINITY)) {
        return (Verdict::Fails, None, "ratio is infinite on the tail".into());
    }
    let Some(v) = all_finite(&logs[n - 2 * WINDOW..]) else {
        return (Verdict::Inconclusive, None, "non-finite values on the grid".into());
    };
    let t = &v[v.len() - TAIL..];
    let d: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    if d.iter().all(|&di| di <= LIMIT_TOL) {
        let c = max_of(t);
        return (Verdict::Holds, Some(c), format!("flat or decreasing, ceiling {:.6e}", c.exp()));
    }
    if d.iter().all(|&di| di > 0.0) {
        let rho = d.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
        if rho <= 0.7 {
            let c = t[TAIL - 1] + d[d.len() - 1] * rho / (1.0 - rho);
            return (
                Verdict::Holds,
                Some(c),
                format!("increasing with geometrically shrinking steps, ceiling {:.6e}", c.exp()),
            );
        }
    }
    let recent = max_of(&v[WINDOW..]);
    let earlier = max_of(&v[..WINDOW]);
    if recent <= earlier + LIMIT_TOL {
        return (
            Verdict::Holds,
            Some(recent),
            format!("envelope stopped growing, ceiling {:.6e}", recent.exp()),
        );
    }
    let rise = t[TAIL - 1] - t[0];
    if d.iter().all(|&di| di > 0.0) && rise > std::f64::consts::LN_2 {
        return (
            Verdict::Fails,
            None,
            format!("grows on the whole tail, log rise {rise:.3}"),
        );
    }
    (Verdict::Inconclusive, None, format!("no stable ceiling, log rise {rise:.3}"))
}

fn sign_test(signs: &[Option<i8>]) -> (Verdict, String) {
    let Some(s) = signs.iter().copied().collect::<Option<Vec<i8>>>() else {
        return (Verdict::Inconclusive, "evaluation failed on the tail".into());
    };
    let nonzero: Vec<i8> = s.into_iter().filter(|&v| v != 0).collect();
    if nonzero.is_empty() {
        return (Verdict::Inconclusive, "derivative vanishes on the tail".into());
    }
    let changes = nonzero.windows(2).filter(|w| w[0] != w[1]).count();
    match changes {
        0 => (Verdict::Holds, format!("sign constant ({:+}) on the tail", nonzero[0])),
        1 => (Verdict::Inconclusive, "one sign change on the tail".into()),
        c => (Verdict::Fails, format!("{c} sign changes on the tail")),
    }
}

fn sign_witness(signs: &[Option<i8>]) -> Vec<Option<f64>> {
    signs.iter().map(|s| s.map(f64::from)).collect()
}

fn sublinear_from_values(name: &str, xs: &[f64], qs: Vec<Option<f64>>) -> ClassVerdict {
    let (verdict, reason) = zero_test(xs, &qs);
    ClassVerdict::new(name, verdict, reason).with_witness(xs, &qs)
}

/// `a(x)/x → 0`.
pub fn check_sublinear(f: &FunctionSpec) -> ClassVerdict {
    let xs = grid_for(f);
    let qs = xs
        .iter()
        .map(|&x| f.value(x).ok().map(|v| (v / x).abs()))
        .collect();
    sublinear_from_values("SL", &xs, qs)
}

fn reciprocal_derivative_sublinear(f: &FunctionSpec, xs: &[f64]) -> ClassVerdict {
    let qs = xs
        .iter()
        .map(|&x| {
            let d = f.log_derivative(1, x).ok()?;
            if d.sign == 0 {
                return None;
            }
            Some((-(d.ln_abs + x.abs().ln())).exp())
        })
        .collect();
    sublinear_from_values("SL(1/a')", xs, qs)
}

/// Sign of `g^{(k+1)}` on the tail.
pub fn check_mk(g: &FunctionSpec, k: usize) -> ClassVerdict {
    let name = format!("M{k}");
    if k > 2 {
        return ClassVerdict::new(name, Verdict::Inconclusive, "only k <= 2 is supported");
    }
    let xs = grid_for(g);
    let tail = &xs[xs.len().saturating_sub(TAIL)..];
    let signs: Vec<Option<i8>> = tail
        .iter()
        .map(|&x| g.log_derivative(k + 1, x).ok().map(|l| l.sign))
        .collect();
    let (verdict, reason) = sign_test(&signs);
    ClassVerdict::new(name, verdict, reason).with_witness(tail, &sign_witness(&signs))
}

fn h_grid(h_max: f64) -> impl Iterator<Item = f64> {
    (0..H_POINTS).map(move |i| -h_max + 2.0 * h_max * i as f64 / (H_POINTS - 1) as f64)
}

/// `limsup sup_{|h|<=1} |g^{(k+1)}(x+h) / g^{(k)}(x)|` along the grid.
pub fn check_dk(g: &FunctionSpec, k: usize) -> ClassVerdict {
    let name = format!("D{k}");
    if k > 2 {
        return ClassVerdict::new(name, Verdict::Inconclusive, "only k <= 2 is supported");
    }
    let xs = grid_for(g);
    let direction = if xs.last().is_some_and(|x| *x < 0.0) {
        "-inf"
    } else {
        "+inf"
    };
    let from = xs.len().saturating_sub(2 * WINDOW);
    let mut logs: Vec<Option<f64>> = vec![None; from];
    for &x in &xs[from..] {
        let q = (|| {
            let den = g.log_derivative(k, x).ok()?;
            if den.sign == 0 {
                return Some(f64::INFINITY);
            }
            let mut best = f64::NEG_INFINITY;
            for h in h_grid(1.0) {
                let num = g.log_derivative(k + 1, x + h).ok()?;
                if num.sign != 0 {
                    best = best.max(num.ln_abs - den.ln_abs);
                }
            }
            Some(best)
        })();
        logs.push(q);
    }
    let (verdict, ceiling, reason) = ceiling_test(&logs);
    let shown: Vec<Option<f64>> = logs.iter().map(|l| l.map(f64::exp)).collect();
    let mut v = ClassVerdict::new(name, verdict, format!("toward {direction}: {reason}"))
        .with_witness(&xs, &shown);
    v.estimated_limit = ceiling.map(f64::exp);
    v
}

/// Fejér conditions: `a'` tends monotonically to 0 and `x|a'(x)| → ∞`.
pub fn check_fejer(f: &FunctionSpec) -> ClassVerdict {
    let xs = grid_for(f);
    let mut mono = check_mk(f, 1);
    mono.class_name = "a'' sign-constant".into();
    let d1: Vec<Option<f64>> = xs
        .iter()
        .map(|&x| f.derivative(1, x).ok().map(f64::abs))
        .collect();
    let (v, r) = zero_test(&xs, &d1);
    let to_zero = ClassVerdict::new("a' -> 0", v, r).with_witness(&xs, &d1);
    let inv: Vec<Option<f64>> = xs
        .iter()
        .zip(&d1)
        .map(|(&x, d)| d.filter(|d| *d > 0.0).map(|d| 1.0 / (x.abs() * d)))
        .collect();
    let (v, r) = zero_test(&xs, &inv);
    let growth = ClassVerdict::new("x|a'| -> inf", v, r).with_witness(&xs, &inv);
    ClassVerdict::conjunction("F", vec![mono, to_zero, growth])
}

fn limit_verdict(name: &str, xs: &[f64], vals: &[Option<f64>]) -> (ClassVerdict, LimitOutcome) {
    let outcome = limit_test(xs, vals);
    let mut v = match outcome {
        LimitOutcome::Limit(l) => {
            let mut v = ClassVerdict::new(name, Verdict::Holds, format!("limit {l:.6}"));
            v.estimated_limit = Some(l);
            v
        }
        LimitOutcome::Oscillates { amplitude } => ClassVerdict::new(
            name,
            Verdict::Fails,
            format!("ratio oscillates, no limit (amplitude {amplitude:.4})"),
        ),
        LimitOutcome::Unstable { spread } => ClassVerdict::new(
            name,
            Verdict::Inconclusive,
            format!("extrapolants spread {spread:.2e}"),
        ),
        LimitOutcome::Undefined => {
            ClassVerdict::new(name, Verdict::Inconclusive, "ratio undefined on the grid")
        }
    };
    v = v.with_witness(xs, vals);
    (v, outcome)
}

/// Existence of the limits of the three logarithmic-derivative ratios.
pub fn check_r(f: &FunctionSpec) -> ClassVerdict {
    let p = ratio_profile(f);
    let parts = vec![
        limit_verdict("x a'/a", &p.grid, &p.r1).0,
        limit_verdict("x a''/a'", &p.grid, &p.r2).0,
        limit_verdict("x a'''/a''", &p.grid, &p.r3).0,
    ];
    ClassVerdict::conjunction("R", parts)
}

pub fn check_t(f: &FunctionSpec) -> ClassVerdict {
    let p = ratio_profile(f);
    let (first, outcome) = limit_verdict("x a'/a", &p.grid, &p.r1);
    let second = limit_verdict("x a''/a'", &p.grid, &p.r2).0;
    let third = limit_verdict("x a'''/a''", &p.grid, &p.r3).0;
    let r = ClassVerdict::conjunction("R", vec![first.clone(), second, third]);
    let mut parts = vec![r.clone()];
    let (verdict, reason) = match outcome {
        LimitOutcome::Oscillates { .. } => (Verdict::Fails, first.reason.clone()),
        LimitOutcome::Limit(l) if l <= 0.0 => (
            Verdict::Fails,
            if l == 0.0 {
                "ratio x a'/a tends to 0".to_string()
            } else {
                format!("limit {l:.6} of x a'/a is outside (0, 1]")
            },
        ),
        LimitOutcome::Limit(l) if l > 1.0 + LIMIT_TOL => {
            (Verdict::Fails, format!("limit {l:.6} of x a'/a is outside (0, 1]"))
        }
        LimitOutcome::Limit(l) if l < 1.0 - LIMIT_TOL => match r.verdict {
            Verdict::Holds => (Verdict::Holds, format!("x a'/a -> {l:.6} in (0, 1)")),
            v => (v, r.reason.clone()),
        },
        LimitOutcome::Limit(_) => {
            let fejer = check_fejer(f);
            let mono = fejer.conjuncts[0].verdict.and(fejer.conjuncts[1].verdict);
            parts.push(fejer);
            match mono {
                Verdict::Fails => (Verdict::Fails, "x a'/a -> 1 but a' does not tend monotonically to 0".into()),
                _ => (
                    mono.and(r.verdict),
                    "x a'/a -> 1; requires a' -> 0 monotonically".to_string(),
                ),
            }
        }
        _ => (Verdict::Inconclusive, first.reason.clone()),
    };
    ClassVerdict {
        estimated_limit: first.estimated_limit,
        witness: first.witness.clone(),
        conjuncts: parts,
        ..ClassVerdict::new("T", verdict, reason)
    }
}

/// Inverse of a monotone function, with inverse-rule derivatives.
pub fn compose_inverse(f: &FunctionSpec) -> Result<FunctionSpec, FunctionError> {
    if f.monotone() == MonotoneHint::Unknown {
        return Err(FunctionError::NotMonotone(f.to_string()));
    }
    Ok(FunctionSpec::inverse_of(f))
}

/// `a, 1/a' ∈ SL` and `a⁻¹ ∈ M1 ∩ D0 ∩ D1 ∩ (D2 ∪ M2)`.
pub fn check_s(f: &FunctionSpec) -> ClassVerdict {
    let xs = grid_for(f);
    let mut parts = vec![check_sublinear(f), reciprocal_derivative_sublinear(f, &xs)];
    match compose_inverse(f) {
        Ok(inv) => {
            let rename = |mut v: ClassVerdict| {
                v.class_name = format!("inverse in {}", v.class_name);
                v
            };
            parts.push(rename(check_mk(&inv, 1)));
            parts.push(rename(check_dk(&inv, 0)));
            parts.push(rename(check_dk(&inv, 1)));
            let d2 = rename(check_dk(&inv, 2));
            let m2 = rename(check_mk(&inv, 2));
            let verdict = d2.verdict.or(m2.verdict);
            parts.push(ClassVerdict {
                conjuncts: vec![d2, m2],
                ..ClassVerdict::new(
                    "inverse in D2 or M2",
                    verdict,
                    format!("union verdict {verdict}"),
                )
            });
        }
        Err(e) => parts.push(ClassVerdict::new("inverse", Verdict::Fails, e.to_string())),
    }
    ClassVerdict::conjunction("S", parts)
}

/// `slow(x)/fast(x) → 0` on the grid.
pub fn check_dominated(slow: &FunctionSpec, fast: &FunctionSpec) -> ClassVerdict {
    let c = slow.domain_start().max(fast.domain_start());
    let xs: Vec<f64> = base_grid()
        .into_iter()
        .map(|x| if c < GRID_X0 { x } else { c + x })
        .collect();
    let qs: Vec<Option<f64>> = xs
        .iter()
        .map(|&x| {
            let a = slow.log_derivative(0, x).ok()?;
            let b = fast.log_derivative(0, x).ok()?;
            if b.sign == 0 {
                return None;
            }
            if a.sign == 0 {
                return Some(0.0);
            }
            Some((a.ln_abs - b.ln_abs).exp())
        })
        .collect();
    let (verdict, reason) = zero_test(&xs, &qs);
    ClassVerdict::new(format!("{slow} << {fast}"), verdict, reason).with_witness(&xs, &qs)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub name: String,
    pub verdict: Verdict,
    pub reason: String,
    pub constant: Option<f64>,
    pub witness: Vec<WitnessPoint>,
}

fn bound_report(name: &str, xs: &[f64], logs: Vec<Option<f64>>) -> BoundReport {
    let (verdict, ceiling, reason) = ceiling_test(&logs);
    let shown: Vec<Option<f64>> = logs.iter().map(|l| l.map(f64::exp)).collect();
    let w = ClassVerdict::new(name, verdict, "").with_witness(xs, &shown).witness;
    BoundReport {
        name: name.into(),
        verdict,
        reason,
        constant: ceiling.map(f64::exp),
        witness: w,
    }
}

/// Empirical constant in `sup_{|h|<=H} |a'(x+h)/a(x)| <= C x^{β-α-1}`.
pub fn lemma21_bound(f: &FunctionSpec, alpha: f64, beta: f64, h_max: f64) -> BoundReport {
    let name = "translation-derivative bound";
    let p = ratio_profile(f);
    let xs = &p.grid;
    let n = xs.len();
    let slack = 1e-6;
    let pre = p.r1[n.saturating_sub(TAIL)..]
        .iter()
        .all(|r| r.is_some_and(|r| r >= alpha - slack && r <= beta + slack));
    if !pre {
        return BoundReport {
            name: name.into(),
            verdict: Verdict::Inconclusive,
            reason: format!("x a'/a leaves [{alpha}, {beta}] on the tail"),
            constant: None,
            witness: Vec::new(),
        };
    }
    let from = n.saturating_sub(2 * WINDOW);
    let mut logs = vec![None; from];
    for &x in &xs[from..] {
        let q = (|| {
            let den = f.log_derivative(0, x).ok()?;
            if den.sign == 0 {
                return None;
            }
            let mut best = f64::NEG_INFINITY;
            for h in h_grid(h_max) {
                let num = f.log_derivative(1, x + h).ok()?;
                if num.sign != 0 {
                    best = best.max(num.ln_abs);
                }
            }
            Some(best - den.ln_abs - (beta - alpha - 1.0) * x.abs().ln())
        })();
        logs.push(q);
    }
    bound_report(name, xs, logs)
}

/// `max_{|ρ|<=H} |a(x+ρ)/a(x)|` along the grid tail.
pub fn lemma22_translates(f: &FunctionSpec, h_max: f64) -> BoundReport {
    let xs = grid_for(f);
    let from = xs.len().saturating_sub(2 * WINDOW);
    let mut logs = vec![None; from];
    for &x in &xs[from..] {
        let q = (|| {
            let den = f.log_derivative(0, x).ok()?;
            if den.sign == 0 {
                return None;
            }
            let mut best = f64::NEG_INFINITY;
            for h in h_grid(h_max) {
                let num = f.log_derivative(0, x + h).ok()?;
                if num.sign != 0 {
                    best = best.max(num.ln_abs - den.ln_abs);
                }
            }
            Some(best)
        })();
        logs.push(q);
    }
    bound_report("translate ratio bound", &xs, logs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassName {
    Sublinear,
    Fejer,
    T,
    S,
    R,
    D(usize),
    M(usize),
}

impl ClassName {
    /// Parses a comma list such as `SL,F,T,S,Dk,Mk`; `Dk`/`Mk` expand to
    /// orders 0 through 2.
    pub fn parse_list(text: &str) -> Result<Vec<ClassName>, String> {
        let mut out = Vec::new();
        for raw in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match raw {
                "SL" => out.push(ClassName::Sublinear),
                "F" => out.push(ClassName::Fejer),
                "T" => out.push(ClassName::T),
                "S" => out.push(ClassName::S),
                "R" => out.push(ClassName::R),
                "Dk" => out.extend((0..3).map(ClassName::D)),
                "Mk" => out.extend((0..3).map(ClassName::M)),
                _ => {
                    let order = |s: &str| s.parse::<usize>().ok().filter(|k| *k <= 2);
                    match (raw.strip_prefix('D'), raw.strip_prefix('M')) {
                        (Some(k), _) if order(k).is_some() => out.push(ClassName::D(order(k).unwrap())),
                        (_, Some(k)) if order(k).is_some() => out.push(ClassName::M(order(k).unwrap())),
                        _ => return Err(format!("unknown class `{raw}`")),
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn all() -> Vec<ClassName> {
        vec![ClassName::Sublinear, ClassName::Fejer, ClassName::T, ClassName::S]
    }
}

pub fn classify(f: &FunctionSpec, classes: &[ClassName]) -> Vec<ClassVerdict> {
    classes
        .iter()
        .map(|c| match c {
            ClassName::Sublinear => check_sublinear(f),
            ClassName::Fejer => check_fejer(f),
            ClassName::T => check_t(f),
            ClassName::S => check_s(f),
            ClassName::R => check_r(f),
            ClassName::D(k) => check_dk(f, *k),
            ClassName::M(k) => check_mk(f, *k),
        })
        .collect()
}

pub fn classify_text(text: &str, classes: &[ClassName]) -> Result<Vec<ClassVerdict>, FunctionError> {
    let f = FunctionSpec::parse(text)?;
    Ok(classify(&f, classes))
}
