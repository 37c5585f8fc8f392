//! Concrete measure-preserving systems with exact power actions.
//!
//! Conventions: `e(t) = exp(2πi t)`, the Fourier mode `e_m(x) = e(m x)`, and a
//! rotation acts by `T x = x + θ mod 1`, so `e_m ∘ T = e(mθ) e_m`. An
//! observable is composed with the transformation, `(T f)(x) = f(T x)`.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::dd::DoubleDouble;

/// Modes whose eigenvalue phases are this close mod 1 are treated as equal.
pub const EIGEN_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("observable `{observable}` cannot be evaluated on `{system}`")]
    Mismatch { observable: String, system: String },
    #[error("{operation} is not available for {what}")]
    Unsupported {
        operation: &'static str,
        what: String,
    },
    #[error("invalid system: {0}")]
    Invalid(String),
}

/// `exp(2πi t)`, reducing `t` mod 1 before the trigonometric call.
pub fn e(t: f64) -> Complex64 {
    let r = t - t.round();
    let (s, c) = (TAU * r).sin_cos();
    Complex64::new(c, s)
}

/// `exp(2πi t)` for a double-double argument.
pub fn e_dd(t: DoubleDouble) -> Complex64 {
    e(t.frac_f64())
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SystemSpec {
    /// `x ↦ x + θ mod 1` on the circle with Lebesgue measure. `rational` is
    /// `Some((p, q))` only when the angle was declared as the reduced fraction
    /// `p/q`; an undeclared angle is treated as irrational.
    CircleRotation {
        angle: DoubleDouble,
        rational: Option<(u64, u64)>,
    },
    /// `x ↦ x + step mod q` on `{0, …, q-1}` with uniform measure.
    FiniteCycle { q: u64, step: u64 },
    Product(Vec<SystemSpec>),
    /// Mapping torus of `base` with the translation flow by `gamma`:
    /// `S(t, x) = ({t + γ}, T^{[t + γ]} x)`.
    Suspension {
        base: Box<SystemSpec>,
        gamma: DoubleDouble,
    },
}

impl SystemSpec {
    /// Rotation by an angle declared irrational.
    pub fn rotation(angle: impl Into<DoubleDouble>) -> Self {
        SystemSpec::CircleRotation {
            angle: angle.into().frac(),
            rational: None,
        }
    }

    /// Rotation by the rational angle `p/q`, stored in lowest terms.
    pub fn rational_rotation(p: i64, q: u64) -> Result<Self, SystemError> {
        if q == 0 {
            return Err(SystemError::Invalid("rotation denominator must be positive".into()));
        }
        let p = p.rem_euclid(q as i64) as u64;
        let g = gcd(p, q).max(1);
        let (p, q) = (p / g, q / g);
        Ok(SystemSpec::CircleRotation {
            angle: DoubleDouble::from_f64(p as f64).div_f64(q as f64),
            rational: Some((p, q)),
        })
    }

    pub fn cycle(q: u64) -> Result<Self, SystemError> {
        if q == 0 {
            return Err(SystemError::Invalid("cycle length must be positive".into()));
        }
        Ok(SystemSpec::FiniteCycle { q, step: 1 % q })
    }

    pub fn product(factors: Vec<SystemSpec>) -> Self {
        SystemSpec::Product(factors)
    }

    pub fn suspension(base: SystemSpec, gamma: impl Into<DoubleDouble>) -> Result<Self, SystemError> {
        let gamma = gamma.into();
        if !(gamma.to_f64() > 0.0) {
            return Err(SystemError::Invalid("suspension gamma must be positive".into()));
        }
        Ok(SystemSpec::Suspension {
            base: Box::new(base),
            gamma,
        })
    }

    /// The system generated by `T^p`.
    pub fn power_system(&self, p: i64) -> Result<Self, SystemError> {
        if p == 0 {
            return Err(SystemError::Invalid("power must be nonzero".into()));
        }
        Ok(match self {
            SystemSpec::CircleRotation { angle, rational } => match rational {
                Some((a, q)) => {
                    let num = (*a as i128 * p as i128).rem_euclid(*q as i128) as i64;
                    SystemSpec::rational_rotation(num, *q)?
                }
                None => SystemSpec::CircleRotation {
                    angle: angle.mul_i64(p).frac(),
                    rational: None,
                },
            },
            SystemSpec::FiniteCycle { q, step } => SystemSpec::FiniteCycle {
                q: *q,
                step: ((*step as i128 * p as i128).rem_euclid(*q as i128)) as u64,
            },
            SystemSpec::Product(fs) => SystemSpec::Product(
                fs.iter()
                    .map(|s| s.power_system(p))
                    .collect::<Result<_, _>>()?,
            ),
            SystemSpec::Suspension { .. } => {
                return Err(SystemError::Unsupported {
                    operation: "power_system",
                    what: "suspension".into(),
                })
            }
        })
    }

    /// Canonical starting point built from one real per circle/suspension
    /// coordinate (cycle coordinates take `floor(u * q)`).
    pub fn point_from_uniform(&self, draw: &mut impl FnMut() -> f64) -> PointState {
        match self {
            SystemSpec::CircleRotation { .. } => PointState::Circle(draw().rem_euclid(1.0)),
            SystemSpec::FiniteCycle { q, .. } => {
                PointState::Cycle(((draw() * *q as f64) as u64).min(q - 1))
            }
            SystemSpec::Product(fs) => {
                PointState::Product(fs.iter().map(|s| s.point_from_uniform(draw)).collect())
            }
            SystemSpec::Suspension { base, .. } => PointState::Suspension {
                t: DoubleDouble::from_f64(draw().rem_euclid(1.0)),
                x: Box::new(base.point_from_uniform(draw)),
            },
        }
    }

    /// `T^k x`; O(1) for rotations, cycles and the suspension flow.
    pub fn apply_power(&self, k: i64, x: &PointState) -> Result<PointState, SystemError> {
        Ok(match (self, x) {
            (SystemSpec::CircleRotation { angle, .. }, PointState::Circle(v)) => {
                PointState::Circle(angle.mul_i64(k).add_f64(*v).frac_f64())
            }
            (SystemSpec::FiniteCycle { q, step }, PointState::Cycle(v)) => {
                let q = *q as i128;
                let shifted = *v as i128 + k as i128 * *step as i128;
                PointState::Cycle(shifted.rem_euclid(q) as u64)
            }
            (SystemSpec::Product(fs), PointState::Product(xs)) if fs.len() == xs.len() => {
                PointState::Product(
                    fs.iter()
                        .zip(xs)
                        .map(|(s, x)| s.apply_power(k, x))
                        .collect::<Result<_, _>>()?,
                )
            }
            (SystemSpec::Suspension { base, gamma }, PointState::Suspension { t, x }) => {
                let moved = gamma.mul_i64(k) + *t;
                let whole = moved.floor_i64();
                PointState::Suspension {
                    t: moved - DoubleDouble::from_f64(whole as f64),
                    x: Box::new(base.apply_power(whole, x)?),
                }
            }
            _ => {
                return Err(SystemError::Mismatch {
                    observable: format!("{x:?}"),
                    system: self.to_string(),
                })
            }
        })
    }

    /// Integral of `f` against the invariant measure.
    pub fn space_average(&self, f: &Observable) -> Result<Complex64, SystemError> {
        match (self, f) {
            (SystemSpec::Suspension { base, .. }, Observable::Lifted(inner)) => {
                base.space_average(inner)
            }
            (SystemSpec::Product(fs), Observable::TensorProduct(gs)) if fs.len() == gs.len() => fs
                .iter()
                .zip(gs)
                .try_fold(Complex64::new(1.0, 0.0), |acc, (s, g)| {
                    Ok(acc * s.space_average(g)?)
                }),
            (SystemSpec::CircleRotation { .. }, Observable::TrigPoly(p)) => Ok(p.coefficient(0)),
            (SystemSpec::CircleRotation { .. }, Observable::Indicator { length, .. }) => {
                Ok(Complex64::new(*length, 0.0))
            }
            (SystemSpec::FiniteCycle { q, .. }, Observable::Tabulated(v)) if v.len() as u64 == *q => {
                Ok(v.iter().sum::<Complex64>() / *q as f64)
            }
            _ => Err(self.mismatch(f)),
        }
    }

    /// `E(f | I(T))` for the catalog systems.
    pub fn cond_exp_invariant(&self, f: &Observable) -> Result<Observable, SystemError> {
        match (self, f) {
            (SystemSpec::CircleRotation { rational, .. }, Observable::TrigPoly(p)) => {
                Ok(Observable::TrigPoly(match rational {
                    None => TrigPoly::constant(p.coefficient(0)),
                    Some((_, q)) => p.filter(|m| m.rem_euclid(*q as i64) == 0),
                }))
            }
            (SystemSpec::CircleRotation { rational: None, .. }, Observable::Indicator { length, .. }) => {
                Ok(Observable::TrigPoly(TrigPoly::constant(Complex64::new(*length, 0.0))))
            }
            (SystemSpec::CircleRotation { .. }, Observable::Indicator { .. }) => {
                Err(SystemError::Unsupported {
                    operation: "cond_exp_invariant",
                    what: "an indicator on a rational rotation".into(),
                })
            }
            (SystemSpec::FiniteCycle { q, step }, Observable::Tabulated(v)) if v.len() as u64 == *q => {
                // Orbits of x -> x + step are the residue classes mod gcd(step, q).
                let g = gcd(*step, *q).max(1) as usize;
                let class_mean: Vec<Complex64> = (0..g)
                    .map(|r| v.iter().skip(r).step_by(g).sum::<Complex64>() / (v.len() / g) as f64)
                    .collect();
                Ok(Observable::Tabulated(
                    (0..v.len()).map(|i| class_mean[i % g]).collect(),
                ))
            }
            (SystemSpec::Product(fs), Observable::TensorProduct(gs)) if fs.len() == gs.len() => {
                Ok(Observable::TensorProduct(
                    fs.iter()
                        .zip(gs)
                        .map(|(s, g)| s.cond_exp_invariant(g))
                        .collect::<Result<_, _>>()?,
                ))
            }
            (SystemSpec::Suspension { .. }, _) => Err(SystemError::Unsupported {
                operation: "cond_exp_invariant",
                what: "the suspension flow".into(),
            }),
            _ => Err(self.mismatch(f)),
        }
    }

    /// `E(f | I(T^p))`.
    pub fn cond_exp_power(&self, p: i64, f: &Observable) -> Result<Observable, SystemError> {
        self.power_system(p)?.cond_exp_invariant(f)
    }

    /// Projection of a trigonometric polynomial onto the eigenfunctions with
    /// `T g = e(m/γ) g`, i.e. the modes `k` with `kθ ≡ m/γ (mod 1)`.
    pub fn eigenprojection(
        &self,
        gamma: DoubleDouble,
        m: i64,
        f: &Observable,
    ) -> Result<Observable, SystemError> {
        match (self, f) {
            (SystemSpec::CircleRotation { angle, .. }, Observable::TrigPoly(p)) => {
                let target = DoubleDouble::from_f64(m as f64) * gamma.recip();
                Ok(Observable::TrigPoly(p.filter(|k| {
                    let diff = (angle.mul_i64(k) - target).frac_f64();
                    diff.min(1.0 - diff) <= EIGEN_MATCH_TOL
                })))
            }
            (SystemSpec::CircleRotation { .. }, _) => Err(SystemError::Unsupported {
                operation: "eigenprojection",
                what: format!("observable `{f}`"),
            }),
            _ => Err(SystemError::Unsupported {
                operation: "eigenprojection",
                what: self.to_string(),
            }),
        }
    }

    fn mismatch(&self, f: &Observable) -> SystemError {
        SystemError::Mismatch {
            observable: f.to_string(),
            system: self.to_string(),
        }
    }
}

impl fmt::Display for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemSpec::CircleRotation {
                rational: Some((p, q)),
                ..
            } => write!(f, "rotation({p}/{q})"),
            SystemSpec::CircleRotation { angle, .. } => write!(f, "rotation({:.17})", angle.to_f64()),
            SystemSpec::FiniteCycle { q, step } => write!(f, "cycle({q}, step {step})"),
            SystemSpec::Product(fs) => {
                f.write_str("product(")?;
                for (i, s) in fs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{s}")?;
                }
                f.write_str(")")
            }
            SystemSpec::Suspension { base, gamma } => {
                write!(f, "suspension({base}, gamma {:.17})", gamma.to_f64())
            }
        }
    }
}

/// One step of the suspension flow, `({t + γ}, T^{[t + γ]} x)`.
pub fn suspension_step(
    base: &SystemSpec,
    gamma: DoubleDouble,
    t: DoubleDouble,
    x: &PointState,
) -> Result<(DoubleDouble, PointState), SystemError> {
    let moved = t + gamma;
    let whole = moved.floor_i64();
    let x = base.apply_power(whole, x)?;
    Ok((moved - DoubleDouble::from_f64(whole as f64), x))
}

/// `f̃(t, x) = f(x)`.
pub fn lift_observable(f: Observable) -> Observable {
    Observable::Lifted(Box::new(f))
}

#[derive(Clone, Debug, PartialEq)]
pub enum PointState {
    Circle(f64),
    Cycle(u64),
    Product(Vec<PointState>),
    Suspension { t: DoubleDouble, x: Box<PointState> },
}

impl PointState {
    pub fn as_circle(&self) -> Option<f64> {
        match self {
            PointState::Circle(v) => Some(*v),
            _ => None,
        }
    }
}

/// Trigonometric polynomial `Σ_{|m| <= M} c_m e_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPoly {
    degree: usize,
    coeffs: Vec<Complex64>,
}

impl TrigPoly {
    pub fn new(degree: usize, coeffs: Vec<Complex64>) -> Result<Self, SystemError> {
        if coeffs.len() != 2 * degree + 1 {
            return Err(SystemError::Invalid(format!(
                "degree {degree} needs {} coefficients, got {}",
                2 * degree + 1,
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(SystemError::Invalid("coefficients must be finite".into()));
        }
        Ok(TrigPoly { degree, coeffs })
    }

    pub fn from_modes(modes: &[(i64, Complex64)]) -> Self {
        let degree = modes.iter().map(|(m, _)| m.unsigned_abs() as usize).max().unwrap_or(0);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * degree + 1];
        for &(m, c) in modes {
            coeffs[(m + degree as i64) as usize] += c;
        }
        TrigPoly { degree, coeffs }
    }

    pub fn constant(c: Complex64) -> Self {
        TrigPoly {
            degree: 0,
            coeffs: vec![c],
        }
    }

    /// The single mode `e_m`.
    pub fn mode(m: i64) -> Self {
        Self::from_modes(&[(m, Complex64::new(1.0, 0.0))])
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coefficient(&self, m: i64) -> Complex64 {
        let idx = m + self.degree as i64;
        if idx < 0 || idx as usize >= self.coeffs.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[idx as usize]
        }
    }

    /// Nonzero `(m, c_m)` pairs in increasing `m`.
    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != Complex64::new(0.0, 0.0))
            .map(move |(i, c)| (i as i64 - self.degree as i64, *c))
    }

    pub fn filter(&self, keep: impl Fn(i64) -> bool) -> TrigPoly {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if keep(i as i64 - self.degree as i64) {
                    *c
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        TrigPoly {
            degree: self.degree,
            coeffs,
        }
    }

    pub fn map_coefficients(&self, g: impl Fn(i64, Complex64) -> Complex64) -> TrigPoly {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| g(i as i64 - self.degree as i64, *c))
            .collect();
        TrigPoly {
            degree: self.degree,
            coeffs,
        }
    }

    pub fn add(&self, other: &TrigPoly) -> TrigPoly {
        let degree = self.degree.max(other.degree);
        let coeffs = (-(degree as i64)..=degree as i64)
            .map(|m| self.coefficient(m) + other.coefficient(m))
            .collect();
        TrigPoly { degree, coeffs }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.modes().map(|(m, c)| c * e(m as f64 * x)).sum()
    }

    pub fn sup_norm_bound(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Observable {
    TrigPoly(TrigPoly),
    /// Indicator of the arc `[start, start + length)` mod 1.
    Indicator { start: f64, length: f64 },
    /// Values on `{0, …, q-1}`.
    Tabulated(Vec<Complex64>),
    /// `f_1 ⊗ … ⊗ f_d` on a product system.
    TensorProduct(Vec<Observable>),
    /// Base observable viewed on the suspension, ignoring `t`.
    Lifted(Box<Observable>),
}

impl Observable {
    pub fn constant(c: f64) -> Self {
        Observable::TrigPoly(TrigPoly::constant(Complex64::new(c, 0.0)))
    }

    pub fn mode(m: i64) -> Self {
        Observable::TrigPoly(TrigPoly::mode(m))
    }

    pub fn indicator(start: f64, end: f64) -> Result<Self, SystemError> {
        let length = end - start;
        if !(0.0..=1.0).contains(&length) {
            return Err(SystemError::Invalid(format!(
                "indicator [{start}, {end}) must have length in [0, 1]"
            )));
        }
        Ok(Observable::Indicator {
            start: start.rem_euclid(1.0),
            length,
        })
    }

    pub fn as_trig_poly(&self) -> Option<&TrigPoly> {
        match self {
            Observable::TrigPoly(p) => Some(p),
            _ => None,
        }
    }

    pub fn eval(&self, x: &PointState) -> Result<Complex64, SystemError> {
        Ok(match (self, x) {
            (Observable::TrigPoly(p), PointState::Circle(v)) => p.eval(*v),
            (Observable::Indicator { start, length }, PointState::Circle(v)) => {
                let offset = (v - start).rem_euclid(1.0);
                Complex64::new(if offset < *length { 1.0 } else { 0.0 }, 0.0)
            }
            (Observable::Tabulated(vals), PointState::Cycle(i)) if (*i as usize) < vals.len() => {
                vals[*i as usize]
            }
            (Observable::TensorProduct(fs), PointState::Product(xs)) if fs.len() == xs.len() => {
                let mut acc = Complex64::new(1.0, 0.0);
                for (f, x) in fs.iter().zip(xs) {
                    acc *= f.eval(x)?;
                }
                acc
            }
            (Observable::Lifted(f), PointState::Suspension { x, .. }) => f.eval(x)?,
            _ => {
                return Err(SystemError::Mismatch {
                    observable: self.to_string(),
                    system: format!("{x:?}"),
                })
            }
        })
    }

    /// Upper bound for `‖f‖_∞`.
    pub fn sup_norm_bound(&self) -> f64 {
        match self {
            Observable::TrigPoly(p) => p.sup_norm_bound(),
            Observable::Indicator { length, .. } => {
                if *length > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Observable::Tabulated(v) => v.iter().map(|c| c.norm()).fold(0.0, f64::max),
            Observable::TensorProduct(fs) => fs.iter().map(Observable::sup_norm_bound).product(),
            Observable::Lifted(f) => f.sup_norm_bound(),
        }
    }

    /// `f ∘ T^k` as an observable of the same kind.
    pub fn compose_power(&self, s: &SystemSpec, k: i64) -> Result<Observable, SystemError> {
        match (s, self) {
            (SystemSpec::CircleRotation { angle, .. }, Observable::TrigPoly(p)) => {
                let shift = angle.mul_i64(k);
                Ok(Observable::TrigPoly(
                    p.map_coefficients(|m, c| c * e_dd(shift.mul_i64(m))),
                ))
            }
            (SystemSpec::CircleRotation { angle, .. }, Observable::Indicator { start, length }) => {
                let start = (-angle.mul_i64(k)).add_f64(*start).frac_f64();
                Ok(Observable::Indicator {
                    start,
                    length: *length,
                })
            }
            (SystemSpec::FiniteCycle { q, step }, Observable::Tabulated(v)) if v.len() as u64 == *q => {
                let q = *q as i128;
                let shift = k as i128 * *step as i128;
                Ok(Observable::Tabulated(
                    (0..v.len())
                        .map(|i| v[(i as i128 + shift).rem_euclid(q) as usize])
                        .collect(),
                ))
            }
            (SystemSpec::Product(ss), Observable::TensorProduct(fs)) if ss.len() == fs.len() => {
                Ok(Observable::TensorProduct(
                    ss.iter()
                        .zip(fs)
                        .map(|(s, f)| f.compose_power(s, k))
                        .collect::<Result<_, _>>()?,
                ))
            }
            _ => Err(SystemError::Unsupported {
                operation: "compose_power",
                what: format!("`{self}` on `{s}`"),
            }),
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::TrigPoly(p) => {
                let mut first = true;
                for (m, c) in p.modes() {
                    if !first {
                        f.write_str(" + ")?;
                    }
                    first = false;
                    write!(f, "({}{:+}i)e{m}", c.re, c.im)?;
                }
                if first {
                    f.write_str("0")?;
                }
                Ok(())
            }
            Observable::Indicator { start, length } => {
                write!(f, "1[{start}, {})", start + length)
            }
            Observable::Tabulated(v) => write!(f, "table({} values)", v.len()),
            Observable::TensorProduct(fs) => {
                for (i, g) in fs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ⊗ ")?;
                    }
                    write!(f, "[{g}]")?;
                }
                Ok(())
            }
            Observable::Lifted(g) => write!(f, "lift[{g}]"),
        }
    }
}
