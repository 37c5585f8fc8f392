//! Three operations for the static page in `www/`: classify a function,
//! trace a two-rotation average, compare a linear-iterate limit with its
//! empirical value. Each returns a JSON string.

use eal_core::dd::consts;
use eal_core::engine::{multiple_average, trace, Coupling, ExperimentSpec, Factor, IterateSequence, StartSampler};
use eal_core::expr::FunctionSpec;
use eal_core::funclass::{classify, ClassName};
use eal_core::limits::{mean_ergodic_limit, sliding_window_oracle};
use eal_core::systems::{Observable, PointState, SystemSpec, TrigPoly};
use eal_core::Complex64;
use serde_json::json;
use wasm_bindgen::prelude::*;

const MAX_N: u64 = 2_000_000;

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn classify_function(function: &str, classes: &str) -> Result<String, JsValue> {
    js(classify_json(function, classes))
}

#[wasm_bindgen]
pub fn average_trace(c1: f64, c2: f64, budget: f64, seed: f64) -> Result<String, JsValue> {
    js(trace_json(c1, c2, budget as u64, seed as u64))
}

#[wasm_bindgen]
pub fn linear_limit(gamma: &str, ell: f64, x: f64, modes: &str, budget: f64) -> Result<String, JsValue> {
    js(limit_json(gamma, ell, x, modes, budget as u64))
}

pub fn classify_json(function: &str, classes: &str) -> Result<String, String> {
    let f = FunctionSpec::parse(function).map_err(|e| e.to_string())?;
    let classes = if classes.trim().is_empty() {
        ClassName::all()
    } else {
        ClassName::parse_list(classes)?
    };
    serde_json::to_string(&classify(&f, &classes)).map_err(|e| e.to_string())
}

/// `|A_N|` along `10^3 · 2^k` for `e_1 ⊗ e_1` on rotations by `{√2}` and
/// `{√3}` with iterates `n^c1`, `n^c2`.
pub fn trace_json(c1: f64, c2: f64, budget: u64, seed: u64) -> Result<String, String> {
    if !(0.0 < c2 && c2 < c1 && c1 <= 1.0) {
        return Err("need 0 < c2 < c1 <= 1".into());
    }
    if budget == 0 || budget > MAX_N {
        return Err(format!("budget must be in 1..={MAX_N}"));
    }
    let systems = vec![
        SystemSpec::rotation(consts::evaluate("frac(sqrt2)")?),
        SystemSpec::rotation(consts::evaluate("frac(sqrt3)")?),
    ];
    let starts = StartSampler::new(seed).starts(&systems, Coupling::Product);
    let factors = systems
        .into_iter()
        .zip(starts)
        .zip([c1, c2])
        .map(|((system, start), c)| {
            let f = FunctionSpec::parse(&format!("x^{c:?}")).map_err(|e| e.to_string())?;
            Ok(Factor {
                system,
                observable: Observable::mode(1),
                iterate: IterateSequence::sublinear(f),
                start,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let spec = ExperimentSpec::new(factors).map_err(|e| e.to_string())?;
    let t = trace(&spec, &eal_core::engine::default_schedule(budget), 1).map_err(|e| e.to_string())?;
    let points: Vec<_> = t
        .checkpoints
        .iter()
        .zip(&t.values)
        .map(|(n, v)| json!({ "n": n, "re": v.re, "im": v.im, "abs": v.norm() }))
        .collect();
    Ok(json!({ "points": points }).to_string())
}

/// Limit of `(1/N) Σ f(x + [γn+ℓ]/γ)` from the eigenspace series and the
/// window oracle, next to the empirical average. `modes` is a JSON list of
/// `[m, re, im]`.
pub fn limit_json(gamma: &str, ell: f64, x: f64, modes: &str, budget: u64) -> Result<String, String> {
    let gamma = consts::evaluate(gamma)?;
    if gamma.to_f64() <= 0.0 {
        return Err("gamma must be positive".into());
    }
    if budget == 0 || budget > MAX_N {
        return Err(format!("budget must be in 1..={MAX_N}"));
    }
    let modes: Vec<(i64, f64, f64)> = serde_json::from_str(modes).map_err(|e| format!("modes: {e}"))?;
    if modes.is_empty() || modes.iter().any(|(m, _, _)| m.abs() > 64) {
        return Err("modes must be a non-empty list of [m, re, im] with |m| <= 64".into());
    }
    let f = TrigPoly::from_modes(&modes.iter().map(|&(m, a, b)| (m, Complex64::new(a, b))).collect::<Vec<_>>());
    let ell_dd = consts::evaluate(&format!("{ell:?}"))?;
    let system = SystemSpec::rotation(gamma.recip());
    let observable = Observable::TrigPoly(f.clone());
    let series = mean_ergodic_limit(&system, gamma, ell_dd, &observable)
        .and_then(|g| Ok(g.eval(&PointState::Circle(x))?))
        .map_err(|e| e.to_string())?;
    let spec = ExperimentSpec::new(vec![Factor {
        system,
        observable,
        iterate: IterateSequence::linear(gamma, ell_dd),
        start: PointState::Circle(x),
    }])
    .map_err(|e| e.to_string())?;
    let empirical = multiple_average(&spec, budget, 1).map_err(|e| e.to_string())?;
    let window = match sliding_window_oracle(gamma, ell_dd, &f, x) {
        Ok(o) => json!({ "value": [o.value().re, o.value().im], "selected": o.selected.to_string() }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    Ok(json!({
        "series": [series.re, series.im],
        "empirical": [empirical.re, empirical.im],
        "gap": (series - empirical).norm(),
        "window": window,
    })
    .to_string())
}
