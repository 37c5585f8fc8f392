use std::path::Path;

use eal_core::dd::DoubleDouble;
use eal_core::engine::{
    invariance_defect, invariance_shift, multiple_average, occupancy, predicted_interval, term_decomposition, trace,
    ExperimentSpec, IterateSequence, Slope,
};
use eal_core::funclass::{classify, ClassName, ClassVerdict};
use eal_core::limits::{
    predicted_limit_linear_irrational, predicted_limit_linear_rational, predicted_limit_sublinear,
    sliding_window_oracle, LimitError, LimitPrediction, WindowOracle,
};
use eal_core::expr::FunctionSpec;
use eal_core::systems::{PointState, SystemSpec};
use eal_core::Complex64;
use serde_json::{json, Value};

use crate::config::{ConfigError, FactorConfig, IterateConfig, Num, RunConfig, SystemConfig};
use crate::output::{self, num, opt, Meta, Table};

/// Why a run ended unsuccessfully; outputs are written before tolerance and
/// oracle failures are reported.
#[derive(Debug)]
pub enum Failure {
    Io(String),
    Config(String),
    Tolerance(String),
    Oracle(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Tolerance(_) => 3,
            Failure::Oracle(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Io(m) => write!(f, "i/o error: {m}"),
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Tolerance(m) => write!(f, "tolerance breach: {m}"),
            Failure::Oracle(m) => write!(f, "oracle mismatch: {m}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

/// Breaches found while running; the worst one decides the exit status.
#[derive(Default)]
struct Breaches {
    tolerance: Vec<String>,
    oracle: Vec<String>,
}

impl Breaches {
    fn finish(self) -> Result<(), Failure> {
        if !self.oracle.is_empty() {
            return Err(Failure::Oracle(self.oracle.join("; ")));
        }
        if !self.tolerance.is_empty() {
            return Err(Failure::Tolerance(self.tolerance.join("; ")));
        }
        Ok(())
    }
}

pub struct Context<'a> {
    pub config: &'a RunConfig,
    pub out: &'a Path,
    pub workers: usize,
}

fn meta(command: &'static str, config: &RunConfig, decisions: &[&'static str]) -> Meta {
    Meta {
        command,
        seed: config.seed,
        config_hash: config.hash(),
        decisions: decisions.to_vec(),
    }
}

fn write(ctx: &Context, meta: &Meta, table: &Table, details: Value) -> Result<(), Failure> {
    output::write(ctx.out, meta, table, details).map_err(Failure::Io)
}

fn starts_text(x: &[PointState]) -> String {
    x.iter()
        .map(|p| match p {
            PointState::Circle(v) => num(*v),
            PointState::Cycle(i) => i.to_string(),
            other => format!("{other:?}"),
        })
        .collect::<Vec<_>>()
        .join(";")
}

fn base_meta(command: &'static str, config: &RunConfig, sampled: bool) -> Meta {
    let mut m = meta(command, config, &[output::FLOOR_ZERO, output::SUMMATION, output::CONSTANTS]);
    if sampled {
        m.add(output::SPLITMIX);
    }
    m
}

fn sampled(config: &RunConfig) -> bool {
    config.factors.iter().any(|f| f.start.is_none())
}

struct Prepared {
    specs: Vec<(Vec<PointState>, ExperimentSpec)>,
}

fn prepare(config: &RunConfig) -> Result<Prepared, Failure> {
    let systems = config.systems()?;
    let iterates = config.iterates()?;
    let starts = config.start_points(&systems)?;
    let specs = starts
        .into_iter()
        .map(|x| {
            let spec = config.experiment(&systems, &iterates, &x)?;
            Ok((x, spec))
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    Ok(Prepared { specs })
}

pub fn average(ctx: &Context) -> Result<(), Failure> {
    let config = ctx.config;
    let schedule = config.schedule()?;
    let p = prepare(config)?;
    let meta = base_meta("average", config, sampled(config));
    let mut table = Table::new(&["run", "start", "N", "re", "im", "abs", "cauchy_defect"]);
    for (run, (x, spec)) in p.specs.iter().enumerate() {
        let t = trace(spec, &schedule, ctx.workers).map_err(config_err)?;
        for (i, (n, v)) in t.checkpoints.iter().zip(&t.values).enumerate() {
            let defect = if i == 0 { None } else { Some(t.cauchy_defects[i - 1]) };
            table.push(vec![
                run.to_string(),
                starts_text(x),
                n.to_string(),
                num(v.re),
                num(v.im),
                num(v.norm()),
                opt(defect),
            ]);
        }
    }
    write(ctx, &meta, &table, json!({ "schedule": schedule, "runs": p.specs.len() }))
}

/// Rotation angle equals `1/γ` mod 1 up to double-double rounding.
fn rotates_by_inverse(s: &SystemSpec, gamma: DoubleDouble) -> bool {
    match s {
        SystemSpec::CircleRotation { angle, .. } => {
            let d = (*angle - gamma.recip()).frac_f64();
            d.min(1.0 - d) < 1e-25
        }
        _ => false,
    }
}

struct Predicted {
    prediction: LimitPrediction,
    oracle: Option<WindowOracle>,
}

fn predict(spec: &ExperimentSpec, meta: &mut Meta, breaches: &mut Breaches) -> Result<Option<Predicted>, Failure> {
    let first = &spec.factors()[0];
    let result = match &first.iterate {
        IterateSequence::Linear {
            slope: Slope::Real(g),
            offset,
        } if !(g.to_f64() == 1.0 && g.lo == 0.0) => {
            meta.add(output::EIGEN);
            let prediction = match predicted_limit_linear_irrational(spec) {
                Ok(p) => p,
                Err(LimitError::Precondition(_)) => return Ok(None),
                Err(e) => return Err(config_err(e)),
            };
            let mut oracle = None;
            if spec.d() == 1 && rotates_by_inverse(&first.system, *g) {
                if let (Some(f), Some(x)) = (first.observable.as_trig_poly(), first.start.as_circle()) {
                    meta.add(output::WINDOW);
                    match sliding_window_oracle(*g, *offset, f, x) {
                        Ok(o) => {
                            let gap = (o.value() - prediction.value).norm();
                            if gap > 1e-10 {
                                breaches
                                    .oracle
                                    .push(format!("series and window oracle differ by {gap:e}"));
                            }
                            oracle = Some(o);
                        }
                        Err(e @ LimitError::Calibration { .. }) => breaches.oracle.push(e.to_string()),
                        Err(e) => return Err(config_err(e)),
                    }
                }
            }
            Predicted { prediction, oracle }
        }
        IterateSequence::Linear {
            slope: Slope::Rational { p, q },
            ..
        } if !(*p == 1 && *q == 1) => Predicted {
            prediction: predicted_limit_linear_rational(spec).map_err(config_err)?,
            oracle: None,
        },
        _ => match predicted_limit_sublinear(spec) {
            Ok(p) => Predicted {
                prediction: p,
                oracle: None,
            },
            Err(LimitError::Precondition(_)) => return Ok(None),
            Err(e) => return Err(config_err(e)),
        },
    };
    Ok(Some(result))
}

pub fn limit(ctx: &Context) -> Result<(), Failure> {
    let config = ctx.config;
    let schedule = config.schedule()?;
    let n = *schedule.last().unwrap();
    let p = prepare(config)?;
    let mut meta = base_meta("limit", config, sampled(config));
    let mut breaches = Breaches::default();
    let mut table = Table::new(&[
        "run",
        "start",
        "N",
        "predicted_re",
        "predicted_im",
        "empirical_re",
        "empirical_im",
        "error",
        "provenance",
        "matched_modes",
        "normalization",
    ]);
    let mut details = Vec::new();
    for (run, (x, spec)) in p.specs.iter().enumerate() {
        let Some(pred) = predict(spec, &mut meta, &mut breaches)? else {
            return Err(Failure::Config(
                "no closed-form limit applies to this experiment".into(),
            ));
        };
        let empirical = multiple_average(spec, n, ctx.workers).map_err(config_err)?;
        let error = (empirical - pred.prediction.value).norm();
        if let Some(tol) = config.tolerance {
            if error > tol {
                breaches.tolerance.push(format!("run {run}: |A_N - limit| = {error:e} > {tol:e}"));
            }
        }
        let modes = pred
            .prediction
            .matched_modes
            .iter()
            .map(|(k, m)| format!("{k}:{m}"))
            .collect::<Vec<_>>()
            .join(";");
        table.push(vec![
            run.to_string(),
            starts_text(x),
            n.to_string(),
            num(pred.prediction.value.re),
            num(pred.prediction.value.im),
            num(empirical.re),
            num(empirical.im),
            num(error),
            pred.prediction.provenance.clone(),
            modes,
            pred.oracle.as_ref().map(|o| o.selected.to_string()).unwrap_or_default(),
        ]);
        details.push(json!({ "prediction": pred.prediction, "window_oracle": pred.oracle }));
    }
    write(ctx, &meta, &table, json!({ "N": n, "runs": details }))?;
    breaches.finish()
}

pub fn invariance(ctx: &Context) -> Result<(), Failure> {
    let config = ctx.config;
    let schedule = config.schedule()?;
    let g = config.probe()?;
    let p = prepare(config)?;
    let mut meta = base_meta("invariance", config, sampled(config));
    let mut breaches = Breaches::default();
    let mut table = Table::new(&["run", "start", "N", "shift", "defect"]);
    for (run, (x, spec)) in p.specs.iter().enumerate() {
        let shift = invariance_shift(spec);
        if shift != 1 {
            meta.add(output::SHIFT);
        }
        let mut last = 0.0;
        for &n in &schedule {
            last = invariance_defect(spec, n, &g, ctx.workers).map_err(config_err)?;
            table.push(vec![run.to_string(), starts_text(x), n.to_string(), shift.to_string(), num(last)]);
        }
        if let Some(tol) = config.tolerance {
            if last > tol {
                breaches.tolerance.push(format!("run {run}: defect {last:e} > {tol:e}"));
            }
        }
    }
    write(ctx, &meta, &table, json!({ "schedule": schedule, "probe": g.to_string() }))?;
    breaches.finish()
}

pub fn occupancy_table(ctx: &Context) -> Result<(), Failure> {
    let config = ctx.config;
    let n = *config.schedule()?.last().unwrap();
    let iterates = config.iterates()?;
    if iterates.is_empty() {
        return Err(Failure::Config("at least one [[factor]] is required".into()));
    }
    let meta = meta("occupancy", config, &[output::FLOOR_ZERO, output::DIRECT_COUNT, output::CONSTANTS]);
    let table_data = occupancy(&iterates, n).map_err(config_err)?;
    let terms = term_decomposition(&iterates, n).map_err(config_err)?;
    let single = match iterates.as_slice() {
        [IterateSequence::Sublinear(f)] => Some(f),
        _ => None,
    };
    let mut table = Table::new(&["box", "count", "predicted_lo", "predicted_hi"]);
    for (b, count) in &table_data.counts {
        let (lo, hi) = match single.map(|f| predicted_interval(f, b[0])) {
            Some(Ok((lo, hi))) => (Some(lo), Some(hi)),
            _ => (None, None),
        };
        let key = b.iter().map(i64::to_string).collect::<Vec<_>>().join(";");
        table.push(vec![key, count.to_string(), opt(lo), opt(hi)]);
    }
    write(
        ctx,
        &meta,
        &table,
        json!({ "N": n, "total": table_data.total(), "terms": terms }),
    )
}

pub fn classify_config(ctx: &Context) -> Result<(), Failure> {
    let config = ctx.config;
    if config.functions.is_empty() {
        return Err(Failure::Config("`functions` must list at least one function".into()));
    }
    let classes = parse_classes(config.classes.as_deref())?;
    let meta = meta("classify", config, &[output::GRID_TAIL]);
    let mut table = Table::new(&["function", "class", "verdict", "estimated_limit", "reason"]);
    let mut details = Vec::new();
    for text in &config.functions {
        let verdicts = classify_one(text, &classes)?;
        for v in &verdicts {
            table.push(vec![
                text.clone(),
                v.class_name.clone(),
                v.verdict.to_string(),
                opt(v.estimated_limit),
                v.reason.clone(),
            ]);
        }
        details.push(json!({ "function": text, "verdicts": verdicts }));
    }
    write(ctx, &meta, &table, json!({ "functions": details }))
}

pub fn parse_classes(text: Option<&str>) -> Result<Vec<ClassName>, Failure> {
    match text {
        Some(t) => ClassName::parse_list(t).map_err(Failure::Config),
        None => Ok(ClassName::all()),
    }
}

pub fn classify_one(text: &str, classes: &[ClassName]) -> Result<Vec<ClassVerdict>, Failure> {
    let f = FunctionSpec::parse(text).map_err(config_err)?;
    Ok(classify(&f, classes))
}

/// Grid cells: per-factor iterate overrides and, for the linear sweep, the
/// first system.
struct Cell {
    label: Vec<String>,
    factors: Vec<FactorConfig>,
}

fn cells(config: &RunConfig) -> Result<(Vec<&'static str>, Vec<Cell>), Failure> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| Failure::Config("`sweep` table is required".into()))?;
    match (&sweep.exponents, &sweep.gamma) {
        (Some(grid), None) => {
            if grid.len() != config.factors.len() {
                return Err(Failure::Config("`sweep.exponents` needs one list per factor".into()));
            }
            let mut out = vec![Vec::<f64>::new()];
            for options in grid {
                if options.is_empty() {
                    return Err(Failure::Config("empty exponent list in sweep".into()));
                }
                out = out
                    .into_iter()
                    .flat_map(|prefix| {
                        options.iter().map(move |c| {
                            let mut v = prefix.clone();
                            v.push(*c);
                            v
                        })
                    })
                    .collect();
            }
            let cells = out
                .into_iter()
                .map(|cs| {
                    let factors = config
                        .factors
                        .iter()
                        .zip(&cs)
                        .map(|(f, c)| FactorConfig {
                            iterate: IterateConfig::Function {
                                expr: format!("x^{c:?}"),
                            },
                            ..f.clone()
                        })
                        .collect();
                    Cell {
                        label: vec![cs.iter().map(|c| format!("{c:?}")).collect::<Vec<_>>().join(";"), String::new(), String::new()],
                        factors,
                    }
                })
                .collect();
            Ok((vec!["exponents", "gamma", "ell"], cells))
        }
        (None, Some(gammas)) => {
            let ells = sweep.ell.clone().unwrap_or_else(|| vec![Num::Int(0)]);
            if config.factors.is_empty() || gammas.is_empty() || ells.is_empty() {
                return Err(Failure::Config("sweep over gamma needs a factor, gamma and ell values".into()));
            }
            let mut cells = Vec::new();
            for g in gammas {
                for l in &ells {
                    let gamma = g.resolve()?;
                    if gamma.to_f64() <= 0.0 {
                        return Err(Failure::Config("sweep gamma must be positive".into()));
                    }
                    let mut factors = config.factors.clone();
                    factors[0].iterate = IterateConfig::Linear {
                        slope: g.clone(),
                        offset: l.clone(),
                    };
                    if sweep.rotate_by_inverse_gamma {
                        factors[0].system = SystemConfig::Rotation {
                            angle: Num::Text(format!("1/({})", num_text(g))),
                        };
                    }
                    cells.push(Cell {
                        label: vec![String::new(), num(gamma.to_f64()), num(l.f64()?)],
                        factors,
                    });
                }
            }
            Ok((vec!["exponents", "gamma", "ell"], cells))
        }
        _ => Err(Failure::Config(
            "`sweep` needs exactly one of `exponents` or `gamma`".into(),
        )),
    }
}

fn num_text(n: &Num) -> String {
    match n {
        Num::Int(v) => v.to_string(),
        Num::Float(v) => format!("{v:?}"),
        Num::Text(s) => s.clone(),
    }
}

pub fn sweep(ctx: &Context) -> Result<(), Failure> {
    let config = ctx.config;
    let n = *config.schedule()?.last().unwrap();
    let (label_cols, cells) = cells(config)?;
    let mut meta = base_meta("sweep", config, sampled(config));
    let mut breaches = Breaches::default();
    let mut header = vec!["cell"];
    header.extend(label_cols);
    header.extend(["run", "start", "N", "re", "im", "abs", "predicted_re", "predicted_im", "error"]);
    let mut table = Table::new(&header);
    for (i, cell) in cells.iter().enumerate() {
        let cell_config = RunConfig {
            factors: cell.factors.clone(),
            ..config.clone()
        };
        let p = prepare(&cell_config)?;
        for (run, (x, spec)) in p.specs.iter().enumerate() {
            let a = multiple_average(spec, n, ctx.workers).map_err(config_err)?;
            let pred: Option<Complex64> = predict(spec, &mut meta, &mut breaches)?.map(|p| p.prediction.value);
            let error = pred.map(|v| (a - v).norm());
            if let (Some(tol), Some(e)) = (config.tolerance, error) {
                if e > tol {
                    breaches.tolerance.push(format!("cell {i} run {run}: error {e:e} > {tol:e}"));
                }
            }
            let mut row = vec![i.to_string()];
            row.extend(cell.label.iter().cloned());
            row.extend([
                run.to_string(),
                starts_text(x),
                n.to_string(),
                num(a.re),
                num(a.im),
                num(a.norm()),
                opt(pred.map(|v| v.re)),
                opt(pred.map(|v| v.im)),
                opt(error),
            ]);
            table.push(row);
        }
    }
    write(ctx, &meta, &table, json!({ "N": n, "cells": cells.len() }))?;
    breaches.finish()
}
