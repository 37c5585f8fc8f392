//! Closed-form limits of the averages computed by [`crate::engine`].
//!
//! Conventions: `e(t) = exp(2πi t)`, `e_k(x) = e(kx)`, rotations act by
//! `Tx = x + θ`, so `e_k ∘ T = e(kθ) e_k`. The eigenspace indexed by `m` for a
//! linear iterate `γn + ℓ` is `{g : Tg = e(m/γ) g}`, and the mode `k` belongs to
//! it when `kθ ≡ m/γ (mod 1)`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::dd::DoubleDouble;
use crate::engine::{multiple_average, EngineError, ExperimentSpec, Factor, IterateSequence, Slope};
use crate::systems::{e_dd, Observable, PointState, SystemError, SystemSpec, TrigPoly, EIGEN_MATCH_TOL};

/// Largest `|m|` searched when matching modes to eigenspaces.
pub const M_SEARCH: i64 = 10_000;
/// Length of the brute-force average used to calibrate the window oracle.
pub const CALIBRATION_N: u64 = 100_000;
pub const CALIBRATION_TOL: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LimitError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(
        "window oracle: neither normalization matches the brute-force average {brute} \
         (printed {printed}, scaled {scaled})"
    )]
    Calibration {
        printed: Complex64,
        scaled: Complex64,
        brute: Complex64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// `∫_{x+(ℓ−1)/γ}^{x+ℓ/γ} f`.
    Printed,
    /// `γ ∫_{x+(ℓ−1)/γ}^{x+ℓ/γ} f`.
    Scaled,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Printed => "printed",
            Normalization::Scaled => "scaled",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitPrediction {
    pub value: Complex64,
    pub provenance: String,
    /// `(k, m)`: mode `k` of the first observable lies in eigenspace `m`.
    pub matched_modes: Vec<(i64, i64)>,
    /// Degree of the first observable when it is a trigonometric polynomial;
    /// the series over `m` is then finite and exact.
    pub mode_bound: Option<usize>,
}

/// `e(mℓ/γ) (e(−m/γ) − 1) / (−2πi m/γ)`, and 1 at `m = 0`.
pub fn fourier_coefficient(gamma: DoubleDouble, ell: DoubleDouble, m: i64) -> Complex64 {
    if m == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let inv = gamma.recip();
    let u = inv.mul_i64(m);
    let phase = e_dd(ell * u);
    let num = e_dd(-u) - 1.0;
    let den = Complex64::new(0.0, -TAU * u.to_f64());
    phase * num / den
}

fn rotation_angle(s: &SystemSpec) -> Result<DoubleDouble, LimitError> {
    match s {
        SystemSpec::CircleRotation { angle, .. } => Ok(*angle),
        other => Err(LimitError::Precondition(format!("{other} is not a circle rotation"))),
    }
}

/// Eigenspace index `m` with `kθ ≡ m/γ (mod 1)` and `|m| <= M_SEARCH`, if any.
fn eigen_index(theta: DoubleDouble, gamma: DoubleDouble, k: i64) -> Option<i64> {
    let kt = theta.mul_i64(k);
    let inv = gamma.recip();
    let g = gamma.to_f64().abs();
    let reach = (M_SEARCH as f64 / g).ceil() as i64 + 1;
    let base = kt.floor_i64();
    let frac = kt - DoubleDouble::from_f64(base as f64);
    let mut best: Option<i64> = None;
    for j in -reach..=reach {
        let m = ((frac.add_f64(j as f64)) * gamma).to_f64().round();
        if m.abs() > M_SEARCH as f64 {
            continue;
        }
        let m = m as i64;
        let d = (kt - inv.mul_i64(m)).frac_f64();
        if d.min(1.0 - d) <= EIGEN_MATCH_TOL && best.is_none_or(|b| m.abs() < b.abs()) {
            best = Some(m);
        }
    }
    best
}

/// Modes of `f` grouped by eigenspace index.
fn matched(theta: DoubleDouble, gamma: DoubleDouble, f: &TrigPoly) -> BTreeMap<i64, Vec<i64>> {
    let mut out: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    for (k, _) in f.modes() {
        if let Some(m) = eigen_index(theta, gamma, k) {
            out.entry(m).or_default().push(k);
        }
    }
    out
}

/// `lim (1/N) Σ_n f ∘ T^{[γn+ℓ]} = Σ_m c_m P_m f` for a rotation `T`, where
/// `P_m` projects onto the eigenspace `m` and `c_m` is [`fourier_coefficient`].
/// Modes outside every eigenspace contribute nothing.
pub fn mean_ergodic_limit(
    system: &SystemSpec,
    gamma: DoubleDouble,
    ell: DoubleDouble,
    f: &Observable,
) -> Result<Observable, LimitError> {
    let theta = rotation_angle(system)?;
    let p = f
        .as_trig_poly()
        .ok_or_else(|| LimitError::Precondition(format!("`{f}` is not a trigonometric polynomial")))?;
    let mut acc = TrigPoly::constant(Complex64::new(0.0, 0.0));
    for m in matched(theta, gamma, p).into_keys() {
        let c = fourier_coefficient(gamma, ell, m);
        if let Observable::TrigPoly(proj) = system.eigenprojection(gamma, m, f)? {
            acc = acc.add(&proj.map_coefficients(|_, v| v * c));
        }
    }
    Ok(Observable::TrigPoly(acc))
}

fn circle_point(x: &PointState) -> Result<f64, LimitError> {
    x.as_circle()
        .ok_or_else(|| LimitError::Precondition(format!("{x:?} is not a circle point")))
}

fn cond_exp_at(f: &Factor) -> Result<Complex64, LimitError> {
    Ok(f.system.cond_exp_invariant(&f.observable)?.eval(&f.start)?)
}

fn tail_product(spec: &ExperimentSpec) -> Result<Complex64, LimitError> {
    spec.factors()[1..]
        .iter()
        .try_fold(Complex64::new(1.0, 0.0), |acc, f| Ok(acc * cond_exp_at(f)?))
}

fn mode_bound(f: &Observable) -> Option<usize> {
    f.as_trig_poly().map(TrigPoly::degree)
}

fn behaves_like_identity(a: &IterateSequence) -> bool {
    match a {
        IterateSequence::Sublinear(_) => true,
        IterateSequence::Linear {
            slope: Slope::Rational { p, q },
            ..
        } => p == &1 && q == &1,
        IterateSequence::Linear {
            slope: Slope::Real(g), ..
        } => g.to_f64() == 1.0 && g.lo == 0.0,
    }
}

/// `Π E(f_i | I(T_i))(x_i)`. Accepts unit-slope linear iterates as well,
/// which reduce to the same product.
pub fn predicted_limit_sublinear(spec: &ExperimentSpec) -> Result<LimitPrediction, LimitError> {
    if let Some(f) = spec.factors().iter().find(|f| !behaves_like_identity(&f.iterate)) {
        return Err(LimitError::Precondition(format!(
            "iterate {} is neither sublinear nor of unit slope",
            f.iterate
        )));
    }
    let value = spec
        .factors()
        .iter()
        .try_fold(Complex64::new(1.0, 0.0), |acc, f| Ok::<_, LimitError>(acc * cond_exp_at(f)?))?;
    Ok(LimitPrediction {
        value,
        provenance: "product of invariant conditional expectations".into(),
        matched_modes: Vec::new(),
        mode_bound: mode_bound(&spec.factors()[0].observable),
    })
}

/// `F(x_1) Π_{i≥2} E(f_i | I(T_i))(x_i)` for `a_1(n) = γn + ℓ`, γ irrational.
pub fn predicted_limit_linear_irrational(spec: &ExperimentSpec) -> Result<LimitPrediction, LimitError> {
    let first = &spec.factors()[0];
    let (gamma, ell) = match &first.iterate {
        IterateSequence::Linear {
            slope: Slope::Real(g),
            offset,
        } => (*g, *offset),
        other => {
            return Err(LimitError::Precondition(format!(
                "first iterate {other} is not linear with a real slope"
            )))
        }
    };
    let theta = rotation_angle(&first.system)?;
    let f = first
        .observable
        .as_trig_poly()
        .ok_or_else(|| LimitError::Precondition("first observable must be a trigonometric polynomial".into()))?;
    let limit = mean_ergodic_limit(&first.system, gamma, ell, &first.observable)?;
    let value = limit.eval(&first.start)? * tail_product(spec)?;
    let matched_modes = matched(theta, gamma, f)
        .into_iter()
        .flat_map(|(m, ks)| ks.into_iter().map(move |k| (k, m)))
        .collect();
    Ok(LimitPrediction {
        value,
        provenance: "eigenspace series for an irrational linear iterate".into(),
        matched_modes,
        mode_bound: Some(f.degree()),
    })
}

/// `(1/q) Σ_{j<q} E(T_1^{[pj/q+ℓ]} f_1 | I(T_1^p))(x_1) · Π_{i≥2} E(f_i | I(T_i))(x_i)`.
pub fn predicted_limit_linear_rational(spec: &ExperimentSpec) -> Result<LimitPrediction, LimitError> {
    let first = &spec.factors()[0];
    let (p, q) = match &first.iterate {
        IterateSequence::Linear {
            slope: Slope::Rational { p, q },
            ..
        } => (*p, *q),
        other => {
            return Err(LimitError::Precondition(format!(
                "first iterate {other} does not have a rational slope"
            )))
        }
    };
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..q {
        let shift = first.iterate.floor_at(j)?;
        let shifted = first.observable.compose_power(&first.system, shift)?;
        sum += first.system.cond_exp_power(p, &shifted)?.eval(&first.start)?;
    }
    Ok(LimitPrediction {
        value: sum / q as f64 * tail_product(spec)?,
        provenance: "average of shifted conditional expectations for a rational slope".into(),
        matched_modes: Vec::new(),
        mode_bound: mode_bound(&first.observable),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowOracle {
    pub printed: Complex64,
    pub scaled: Complex64,
    pub brute: Complex64,
    pub selected: Normalization,
    /// Both normalizations were within tolerance of the brute-force value.
    pub ambiguous: bool,
}

impl WindowOracle {
    pub fn value(&self) -> Complex64 {
        match self.selected {
            Normalization::Printed => self.printed,
            Normalization::Scaled => self.scaled,
        }
    }
}

/// `∫_{x+(ℓ−1)/γ}^{x+ℓ/γ} f` in closed form.
fn window_integral(gamma: DoubleDouble, ell: DoubleDouble, f: &TrigPoly, x: f64) -> Complex64 {
    let inv = gamma.recip();
    let hi = ell * inv;
    let lo = (ell - DoubleDouble::ONE) * inv;
    f.modes()
        .map(|(k, c)| {
            if k == 0 {
                c * inv.to_f64()
            } else {
                let start = DoubleDouble::from_f64(x).mul_i64(k);
                let a = e_dd(start + hi.mul_i64(k));
                let b = e_dd(start + lo.mul_i64(k));
                c * (a - b) / Complex64::new(0.0, TAU * k as f64)
            }
        })
        .sum()
}

/// The window integral of `f` for the rotation by `1/γ`, under both
/// normalizations, with the one closer to the brute-force average at
/// [`CALIBRATION_N`] selected.
pub fn sliding_window_oracle(
    gamma: DoubleDouble,
    ell: DoubleDouble,
    f: &TrigPoly,
    x: f64,
) -> Result<WindowOracle, LimitError> {
    let printed = window_integral(gamma, ell, f, x);
    let scaled = printed * gamma.to_f64();
    let spec = ExperimentSpec::unchecked(vec![Factor {
        system: SystemSpec::rotation(gamma.recip()),
        observable: Observable::TrigPoly(f.clone()),
        iterate: IterateSequence::linear(gamma, ell),
        start: PointState::Circle(x),
    }]);
    let brute = multiple_average(&spec, CALIBRATION_N, 1)?;
    let dp = (printed - brute).norm();
    let ds = (scaled - brute).norm();
    if dp.min(ds) > CALIBRATION_TOL {
        return Err(LimitError::Calibration { printed, scaled, brute });
    }
    Ok(WindowOracle {
        printed,
        scaled,
        brute,
        selected: if ds <= dp { Normalization::Scaled } else { Normalization::Printed },
        ambiguous: dp.max(ds) <= CALIBRATION_TOL,
    })
}

/// `E(f̃ | I(S))({ℓ}, T^{[ℓ]} x)` on the suspension of `base` with flow time
/// `γ`, which equals the linear-iterate limit at `x`.
pub fn suspension_limit(
    base: &SystemSpec,
    gamma: DoubleDouble,
    ell: DoubleDouble,
    f: &Observable,
    x: &PointState,
) -> Result<Complex64, LimitError> {
    circle_point(x)?;
    Ok(mean_ergodic_limit(base, gamma, ell, f)?.eval(x)?)
}
