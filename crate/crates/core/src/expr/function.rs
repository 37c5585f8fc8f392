use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::{parse, DomainError, Expr, LogAbs, ParseError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MonotoneHint {
    Increasing,
    Decreasing,
    Unknown,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("no domain start in {{0, 1, e, e^e, e^e^e}} makes `{0}` evaluable on the probe grid")]
    NoDomain(String),
    #[error("`{0}` is not eventually monotone, so it has no inverse")]
    NotMonotone(String),
    #[error("derivative order {0} is not available (0..=3)")]
    Order(usize),
    #[error(transparent)]
    Inverse(#[from] InverseError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InverseError {
    #[error("no bracket found for y = {y} before |x| reached 1e18")]
    NoBracket { y: f64 },
    #[error("function is not monotone inside the bracket near x = {x}")]
    NonMonotone { x: f64 },
    #[error("evaluation failed while inverting: {0}")]
    Domain(#[from] DomainError),
    #[error("could not reach |f(x) - y| <= {tol:e} for y = {y}; best residual {residual:e}")]
    Tolerance { y: f64, tol: f64, residual: f64 },
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Closed { expr: Expr, derivs: [Expr; 3] },
    Inverse(Arc<FunctionSpec>),
}

/// A real function on a half-line `(domain_start, ∞)` together with its
/// first three derivatives. Either a closed-form expression, or the inverse of
/// another `FunctionSpec` whose derivatives follow from the inverse-function
/// rule.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionSpec {
    kind: Kind,
    domain_start: f64,
    monotone: MonotoneHint,
}

const DOMAIN_CANDIDATES: [f64; 5] = [
    0.0,
    1.0,
    std::f64::consts::E,
    15.154_262_241_479_262, // e^e
    3_814_279.104_760_214,  // e^(e^e)
];
const PROBE_OFFSETS: [f64; 12] = [
    1e-6, 1e-3, 0.5, 1.0, 2.0, 10.0, 100.0, 1e4, 1e6, 1e8, 1e10, 1e12,
];

impl FunctionSpec {
    pub fn parse(text: &str) -> Result<Self, FunctionError> {
        Self::from_expr(parse(text)?)
    }

    pub fn from_expr(expr: Expr) -> Result<Self, FunctionError> {
        let d1 = expr.differentiate();
        let d2 = d1.differentiate();
        let d3 = d2.differentiate();
        let derivs = [d1, d2, d3];
        let domain_start = DOMAIN_CANDIDATES
            .iter()
            .copied()
            .find(|&c| {
                PROBE_OFFSETS.iter().all(|&h| {
                    let x = c + h;
                    expr.eval_log(x)
                        .is_ok_and(|l| l.sign == 0 || l.ln_abs.is_finite())
                        && derivs.iter().all(|d| d.eval_log(x).is_ok())
                })
            })
            .ok_or_else(|| FunctionError::NoDomain(expr.to_string()))?;
        let mut spec = FunctionSpec {
            kind: Kind::Closed { expr, derivs },
            domain_start,
            monotone: MonotoneHint::Unknown,
        };
        spec.monotone = spec.detect_monotone();
        Ok(spec)
    }

    /// Inverse function; the result is evaluated with [`inverse_eval`].
    pub(crate) fn inverse_of(base: &FunctionSpec) -> Self {
        let monotone = base.monotone;
        let probe = base.domain_start + 1.0;
        let domain_start = match monotone {
            MonotoneHint::Decreasing => f64::NEG_INFINITY,
            _ => base.value(probe).unwrap_or(f64::NEG_INFINITY),
        };
        FunctionSpec {
            kind: Kind::Inverse(Arc::new(base.clone())),
            domain_start,
            monotone,
        }
    }

    pub fn with_domain_start(mut self, c: f64) -> Self {
        self.domain_start = c;
        self
    }

    pub fn with_monotone(mut self, hint: MonotoneHint) -> Self {
        self.monotone = hint;
        self
    }

    pub fn domain_start(&self) -> f64 {
        self.domain_start
    }

    pub fn monotone(&self) -> MonotoneHint {
        self.monotone
    }

    pub fn expr(&self) -> Option<&Expr> {
        match &self.kind {
            Kind::Closed { expr, .. } => Some(expr),
            Kind::Inverse(_) => None,
        }
    }

    /// Symbolic derivative of order `k` in `1..=3`; `None` for inverses.
    pub fn derivative_expr(&self, k: usize) -> Option<&Expr> {
        match &self.kind {
            Kind::Closed { derivs, .. } if (1..=3).contains(&k) => Some(&derivs[k - 1]),
            _ => None,
        }
    }

    /// The base function when this spec is an inverse.
    pub fn inverse_base(&self) -> Option<&FunctionSpec> {
        match &self.kind {
            Kind::Inverse(base) => Some(base),
            Kind::Closed { .. } => None,
        }
    }

    pub fn value(&self, x: f64) -> Result<f64, FunctionError> {
        self.derivative(0, x)
    }

    /// `a^{(k)}(x)` for `k` in `0..=3`.
    pub fn derivative(&self, k: usize, x: f64) -> Result<f64, FunctionError> {
        if k > 3 {
            return Err(FunctionError::Order(k));
        }
        match &self.kind {
            Kind::Closed { expr, derivs } => Ok(if k == 0 {
                expr.eval(x)?
            } else {
                derivs[k - 1].eval(x)?
            }),
            Kind::Inverse(base) => {
                let y = inverse_eval(base, x, None)?;
                if k == 0 {
                    return Ok(y);
                }
                let d1 = base.derivative(1, y)?;
                Ok(match k {
                    1 => 1.0 / d1,
                    2 => -base.derivative(2, y)? / d1.powi(3),
                    _ => {
                        let d2 = base.derivative(2, y)?;
                        let d3 = base.derivative(3, y)?;
                        (3.0 * d2 * d2 - d1 * d3) / d1.powi(5)
                    }
                })
            }
        }
    }

    /// `ln|a^{(k)}(x)|` with sign; overflow-free for closed forms.
    pub fn log_derivative(&self, k: usize, x: f64) -> Result<LogAbs, FunctionError> {
        if k > 3 {
            return Err(FunctionError::Order(k));
        }
        match &self.kind {
            Kind::Closed { expr, derivs } => Ok(if k == 0 {
                expr.eval_log(x)?
            } else {
                derivs[k - 1].eval_log(x)?
            }),
            Kind::Inverse(_) => Ok(LogAbs::from_f64(self.derivative(k, x)?)),
        }
    }

    fn detect_monotone(&self) -> MonotoneHint {
        let signs: Vec<f64> = [1e6, 1e8, 1e10, 1e12]
            .iter()
            .filter_map(|&h| self.derivative(1, self.domain_start + h).ok())
            .collect();
        if signs.len() < 4 {
            MonotoneHint::Unknown
        } else if signs.iter().all(|&s| s > 0.0) {
            MonotoneHint::Increasing
        } else if signs.iter().all(|&s| s < 0.0) {
            MonotoneHint::Decreasing
        } else {
            MonotoneHint::Unknown
        }
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Closed { expr, .. } => write!(f, "{expr}"),
            Kind::Inverse(base) => write!(f, "inverse[{base}]"),
        }
    }
}

/// Solves `f(x) = y` past `f.domain_start()`.
///
/// The bracket is grown geometrically from `domain_start + 1` (or taken from
/// `bracket_hint`), then narrowed by bisection with Newton steps on `f'`
/// accepted whenever they stay inside the bracket.
pub fn inverse_eval(
    f: &FunctionSpec,
    y: f64,
    bracket_hint: Option<(f64, f64)>,
) -> Result<f64, InverseError> {
    const LIMIT: f64 = 1e18;
    let tol = 1e-10 * y.abs().max(1.0);
    let c = f.domain_start().max(-LIMIT);
    let dir = match f.monotone() {
        MonotoneHint::Decreasing => -1.0,
        MonotoneHint::Increasing => 1.0,
        MonotoneHint::Unknown => {
            let probe = if c.is_finite() { c + 1.0 } else { 1.0 };
            match f.derivative(1, probe) {
                Ok(d) if d < 0.0 => -1.0,
                _ => 1.0,
            }
        }
    };
    // g is increasing with its root at the solution.
    let g = |x: f64| -> Result<f64, InverseError> {
        match f.value(x) {
            Ok(v) => Ok(dir * (v - y)),
            Err(FunctionError::Domain(e)) => Err(InverseError::Domain(e)),
            Err(_) => Err(InverseError::NoBracket { y }),
        }
    };

    let (mut lo, mut hi) = match bracket_hint {
        Some((a, b)) => (a.min(b), a.max(b)),
        None => {
            let start = c + 1.0;
            (start, start)
        }
    };
    let mut glo = g(lo)?;
    let mut ghi = g(hi)?;
    while ghi < 0.0 {
        lo = hi;
        glo = ghi;
        hi = if hi.abs() < 1.0 { hi + 1.0 } else { hi + hi.abs() };
        if hi > LIMIT {
            return Err(InverseError::NoBracket { y });
        }
        ghi = g(hi)?;
        if ghi < glo {
            return Err(InverseError::NonMonotone { x: hi });
        }
    }
    while glo > 0.0 {
        hi = lo;
        ghi = glo;
        let gap = lo - c;
        lo = if gap.is_finite() { c + 0.5 * gap } else { lo - lo.abs().max(1.0) };
        if gap < 1e-12 * c.abs().max(1.0) || lo < -LIMIT {
            return Err(InverseError::NoBracket { y });
        }
        glo = g(lo)?;
        if glo > ghi {
            return Err(InverseError::NonMonotone { x: lo });
        }
    }
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 {
        return Ok(hi);
    }

    let mut x = 0.5 * (lo + hi);
    for _ in 0..400 {
        let gx = g(x)?;
        if gx.abs() <= tol {
            return Ok(x);
        }
        if gx < glo || gx > ghi {
            return Err(InverseError::NonMonotone { x });
        }
        if gx < 0.0 {
            lo = x;
            glo = gx;
        } else {
            hi = x;
            ghi = gx;
        }
        let slope = dir * f.derivative(1, x).unwrap_or(f64::NAN);
        if slope < 0.0 && slope.abs() > 1e-300 && (gx.abs() > 1e-3 * tol) {
            return Err(InverseError::NonMonotone { x });
        }
        let newton = x - gx / slope;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == x || next <= lo || next >= hi {
            break;
        }
        x = next;
    }
    // Bracket exhausted at machine resolution: take the better endpoint.
    let (best, residual) = [lo, hi, x]
        .iter()
        .filter_map(|&t| g(t).ok().map(|gt| (t, gt.abs())))
        .fold((x, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
    if residual <= tol {
        Ok(best)
    } else {
        Err(InverseError::Tolerance { y, tol, residual })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_start_detection() {
        assert_eq!(FunctionSpec::parse("x^(1/2)").unwrap().domain_start(), 0.0);
        assert_eq!(
            FunctionSpec::parse("log(x)*log(log(x))").unwrap().domain_start(),
            1.0
        );
        assert_eq!(FunctionSpec::parse("x/log(x)").unwrap().domain_start(), 1.0);
        assert!(matches!(
            FunctionSpec::parse("log(-x)"),
            Err(FunctionError::NoDomain(_))
        ));
    }

    #[test]
    fn monotone_detection() {
        let f = FunctionSpec::parse("x^(1/2)").unwrap();
        assert_eq!(f.monotone(), MonotoneHint::Increasing);
        let f = FunctionSpec::parse("-x^(1/2)").unwrap();
        assert_eq!(f.monotone(), MonotoneHint::Decreasing);
        let f = FunctionSpec::parse("x*sin(x)").unwrap();
        assert_eq!(f.monotone(), MonotoneHint::Unknown);
    }

    #[test]
    fn inverse_examples() {
        let f = FunctionSpec::parse("x^(1/2)").unwrap();
        assert!((inverse_eval(&f, 3.0, None).unwrap() - 9.0).abs() < 1e-9);
        let f = FunctionSpec::parse("x^(2/3)").unwrap();
        assert!((inverse_eval(&f, 4.0, None).unwrap() - 8.0).abs() < 1e-8);
        let f = FunctionSpec::parse("log(x)*log(log(x))").unwrap();
        let x = inverse_eval(&f, 10.0, None).unwrap();
        assert!((f.value(x).unwrap() - 10.0).abs() <= 1e-9);
    }

    #[test]
    fn inverse_of_decreasing_function() {
        let f = FunctionSpec::parse("-x^(1/2)").unwrap();
        let x = inverse_eval(&f, -5.0, None).unwrap();
        assert!((x - 25.0).abs() < 1e-8);
    }

    #[test]
    fn inverse_with_hint_and_failures() {
        let f = FunctionSpec::parse("x^2").unwrap();
        let x = inverse_eval(&f, 2.0, Some((1.0, 2.0))).unwrap();
        assert!((x - 2f64.sqrt()).abs() < 1e-10);
        let bounded = FunctionSpec::parse("1 - 1/x").unwrap();
        assert!(matches!(
            inverse_eval(&bounded, 2.0, None),
            Err(InverseError::NoBracket { .. })
        ));
        let wavy = FunctionSpec::parse("x + 3*sin(x)").unwrap();
        let res = inverse_eval(&wavy.with_monotone(MonotoneHint::Increasing), 30.0, None);
        assert!(
            matches!(res, Err(InverseError::NonMonotone { .. })) || {
                let x = res.unwrap();
                (x + 3.0 * x.sin() - 30.0).abs() < 1e-8
            }
        );
    }

    #[test]
    fn inverse_spec_derivatives() {
        let f = FunctionSpec::parse("x^2").unwrap();
        let g = FunctionSpec::inverse_of(&f);
        assert!((g.value(4.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((g.derivative(1, 4.0).unwrap() - 0.25).abs() < 1e-12);
        // (sqrt y)'' = -1/4 y^{-3/2}, (sqrt y)''' = 3/8 y^{-5/2}
        assert!((g.derivative(2, 4.0).unwrap() + 0.25 / 8.0).abs() < 1e-12);
        assert!((g.derivative(3, 4.0).unwrap() - 0.375 / 32.0).abs() < 1e-12);
    }
}
