//! Run configuration: TOML or JSON, with symbolic constants in numeric fields.

use std::fmt;
use std::path::Path;

use eal_core::dd::{consts, DoubleDouble};
use eal_core::engine::{Coupling, ExperimentSpec, Factor, IterateSequence};
use eal_core::expr::FunctionSpec;
use eal_core::systems::{Observable, PointState, SystemSpec, TrigPoly};
use eal_core::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// A number given either literally or as a constant expression
/// (`"frac(sqrt2)"`, `"1/golden"`).
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum Num {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Num {
    pub fn resolve(&self) -> Result<DoubleDouble, ConfigError> {
        // Literal floats go through their shortest decimal form so `0.3` and
        // `"0.3"` resolve identically.
        let text = match self {
            Num::Int(v) => v.to_string(),
            Num::Float(v) => format!("{v:?}"),
            Num::Text(s) => s.clone(),
        };
        consts::evaluate(&text).map_err(ConfigError)
    }

    pub fn f64(&self) -> Result<f64, ConfigError> {
        Ok(self.resolve()?.to_f64())
    }
}

impl Default for Num {
    fn default() -> Self {
        Num::Int(0)
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    Rotation { angle: Num },
    RationalRotation { p: i64, q: u64 },
    Cycle { q: u64, #[serde(default = "one")] step: u64 },
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableConfig {
    Mode { m: i64 },
    Constant { value: f64 },
    /// `[m, re, im]` triples.
    Trig { modes: Vec<(i64, f64, f64)> },
    Indicator { start: Num, end: Num },
    Table { values: Vec<f64> },
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IterateConfig {
    Function { expr: String },
    Linear { slope: Num, #[serde(default)] offset: Num },
    Rational { p: i64, q: u64, #[serde(default)] offset: Num },
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FactorConfig {
    pub system: SystemConfig,
    pub observable: ObservableConfig,
    pub iterate: IterateConfig,
    #[serde(default)]
    pub start: Option<Num>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default)]
    pub checkpoints: Option<Vec<u64>>,
    #[serde(default)]
    pub budget: Option<u64>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Candidate exponents per factor; cells are the Cartesian product and
    /// factor `i` uses the iterate `x^c_i`.
    #[serde(default)]
    pub exponents: Option<Vec<Vec<f64>>>,
    /// Slopes for the first factor's linear iterate `γn + ℓ`.
    #[serde(default)]
    pub gamma: Option<Vec<Num>>,
    #[serde(default)]
    pub ell: Option<Vec<Num>>,
    /// Replace the first system by the rotation through `1/γ` in each cell.
    #[serde(default)]
    pub rotate_by_inverse_gamma: bool,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum CouplingConfig {
    #[default]
    Product,
    Diagonal,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    /// Worker threads; overridden by `--workers` and never part of the hash.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub starts: Option<usize>,
    #[serde(default)]
    pub coupling: CouplingConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default, rename = "factor")]
    pub factors: Vec<FactorConfig>,
    #[serde(default)]
    pub probe: Option<Vec<ObservableConfig>>,
    #[serde(default)]
    pub functions: Vec<String>,
    #[serde(default)]
    pub classes: Option<String>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

pub const DEFAULT_BUDGET: u64 = 100_000;

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        if is_json {
            serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
        }
    }

    /// SHA-256 of the canonical JSON form, so TOML and JSON spellings of the
    /// same run share a hash.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn seed(&self) -> Result<u64, ConfigError> {
        self.seed.ok_or_else(|| ConfigError("`seed` is required".into()))
    }

    pub fn schedule(&self) -> Result<Vec<u64>, ConfigError> {
        let s = match (&self.schedule.checkpoints, self.schedule.budget) {
            (Some(c), _) => c.clone(),
            (None, b) => eal_core::engine::default_schedule(b.unwrap_or(DEFAULT_BUDGET)),
        };
        if s.is_empty() || s[0] == 0 || s.windows(2).any(|w| w[1] <= w[0]) {
            return err("schedule checkpoints must be positive and strictly increasing");
        }
        if *s.last().unwrap() > eal_core::engine::N_MAX {
            return err(format!("schedule exceeds N_MAX = {}", eal_core::engine::N_MAX));
        }
        Ok(s)
    }

    pub fn coupling(&self) -> Coupling {
        match self.coupling {
            CouplingConfig::Product => Coupling::Product,
            CouplingConfig::Diagonal => Coupling::Diagonal,
        }
    }

    pub fn runs(&self) -> usize {
        if self.factors.iter().all(|f| f.start.is_some()) {
            1
        } else {
            self.starts.unwrap_or(1).max(1)
        }
    }

    pub fn systems(&self) -> Result<Vec<SystemSpec>, ConfigError> {
        self.factors.iter().map(|f| f.system.build()).collect()
    }

    pub fn iterates(&self) -> Result<Vec<IterateSequence>, ConfigError> {
        self.factors.iter().map(|f| f.iterate.build()).collect()
    }

    /// One start tuple per run: explicit starts where given, otherwise drawn
    /// from SplitMix64 seeded by `seed`.
    pub fn start_points(&self, systems: &[SystemSpec]) -> Result<Vec<Vec<PointState>>, ConfigError> {
        let runs = self.runs();
        let explicit: Vec<Option<PointState>> = self
            .factors
            .iter()
            .zip(systems)
            .map(|(f, s)| f.start.as_ref().map(|x| point(s, x)).transpose())
            .collect::<Result<_, _>>()?;
        if explicit.iter().all(Option::is_some) {
            return Ok(vec![explicit.into_iter().flatten().collect()]);
        }
        let mut sampler = eal_core::engine::StartSampler::new(self.seed()?);
        Ok((0..runs)
            .map(|_| {
                sampler
                    .starts(systems, self.coupling())
                    .into_iter()
                    .zip(&explicit)
                    .map(|(drawn, given)| given.clone().unwrap_or(drawn))
                    .collect()
            })
            .collect())
    }

    pub fn experiment(
        &self,
        systems: &[SystemSpec],
        iterates: &[IterateSequence],
        starts: &[PointState],
    ) -> Result<ExperimentSpec, ConfigError> {
        if self.factors.is_empty() {
            return err("at least one [[factor]] is required");
        }
        let factors = self
            .factors
            .iter()
            .zip(systems.iter().zip(iterates).zip(starts))
            .map(|(f, ((s, a), x))| {
                Ok(Factor {
                    system: s.clone(),
                    observable: f.observable.build()?,
                    iterate: a.clone(),
                    start: x.clone(),
                })
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        ExperimentSpec::new(factors).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn probe(&self) -> Result<Observable, ConfigError> {
        let parts: Vec<Observable> = match &self.probe {
            Some(p) => p.iter().map(ObservableConfig::build).collect::<Result<_, _>>()?,
            None => self.factors.iter().map(|_| Observable::mode(1)).collect(),
        };
        if parts.len() != self.factors.len() {
            return err("`probe` needs one observable per factor");
        }
        Ok(if parts.len() == 1 {
            parts.into_iter().next().unwrap()
        } else {
            Observable::TensorProduct(parts)
        })
    }
}

fn point(s: &SystemSpec, x: &Num) -> Result<PointState, ConfigError> {
    match s {
        SystemSpec::FiniteCycle { q, .. } => match x {
            Num::Int(v) if *v >= 0 && (*v as u64) < *q => Ok(PointState::Cycle(*v as u64)),
            _ => err(format!("cycle start must be an integer in 0..{q}")),
        },
        _ => Ok(PointState::Circle(x.resolve()?.frac_f64())),
    }
}

impl SystemConfig {
    pub fn build(&self) -> Result<SystemSpec, ConfigError> {
        let s = match self {
            SystemConfig::Rotation { angle } => Ok(SystemSpec::rotation(angle.resolve()?)),
            SystemConfig::RationalRotation { p, q } => SystemSpec::rational_rotation(*p, *q),
            SystemConfig::Cycle { q, step } => {
                SystemSpec::cycle(*q).map(|_| SystemSpec::FiniteCycle { q: *q, step: step % q })
            }
        };
        s.map_err(|e| ConfigError(e.to_string()))
    }
}

impl ObservableConfig {
    pub fn build(&self) -> Result<Observable, ConfigError> {
        Ok(match self {
            ObservableConfig::Mode { m } => Observable::mode(*m),
            ObservableConfig::Constant { value } => Observable::constant(*value),
            ObservableConfig::Trig { modes } => {
                if modes.is_empty() {
                    return err("`trig` observable needs at least one mode");
                }
                let modes: Vec<(i64, Complex64)> = modes.iter().map(|&(m, re, im)| (m, Complex64::new(re, im))).collect();
                Observable::TrigPoly(TrigPoly::from_modes(&modes))
            }
            ObservableConfig::Indicator { start, end } => {
                Observable::indicator(start.f64()?, end.f64()?).map_err(|e| ConfigError(e.to_string()))?
            }
            ObservableConfig::Table { values } => {
                Observable::Tabulated(values.iter().map(|v| Complex64::new(*v, 0.0)).collect())
            }
        })
    }
}

impl IterateConfig {
    pub fn build(&self) -> Result<IterateSequence, ConfigError> {
        match self {
            IterateConfig::Function { expr } => FunctionSpec::parse(expr)
                .map(IterateSequence::sublinear)
                .map_err(|e| ConfigError(e.to_string())),
            IterateConfig::Linear { slope, offset } => Ok(IterateSequence::linear(slope.resolve()?, offset.resolve()?)),
            IterateConfig::Rational { p, q, offset } => {
                IterateSequence::rational(*p, *q, offset.resolve()?).map_err(|e| ConfigError(e.to_string()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOML: &str = r#"
seed = 7
starts = 2
tolerance = 0.1

[schedule]
checkpoints = [1000, 2000]

[[factor]]
system = { kind = "rotation", angle = "frac(sqrt2)" }
observable = { kind = "mode", m = 1 }
iterate = { kind = "function", expr = "x^0.9" }

[[factor]]
system = { kind = "rotation", angle = "frac(sqrt3)" }
observable = { kind = "trig", modes = [[1, 1.0, 0.0], [0, 0.5, 0.0]] }
iterate = { kind = "function", expr = "x^0.5" }
start = 0.25
"#;

    #[test]
    fn toml_and_json_share_a_hash() {
        let t: RunConfig = toml::from_str(TOML).unwrap();
        let j: RunConfig = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(t, j);
        assert_eq!(t.hash(), j.hash());
        let mut w = t.clone();
        w.workers = Some(8);
        assert_eq!(w.hash(), t.hash());
    }

    #[test]
    fn starts_mix_explicit_and_drawn() {
        let c: RunConfig = toml::from_str(TOML).unwrap();
        let systems = c.systems().unwrap();
        let starts = c.start_points(&systems).unwrap();
        assert_eq!(starts.len(), 2);
        assert_eq!(starts[0][1], PointState::Circle(0.25));
        assert_ne!(starts[0][0], starts[1][0]);
        assert_eq!(starts, c.start_points(&systems).unwrap());
    }

    #[test]
    fn numbers_resolve_symbolically() {
        assert_eq!(Num::Float(0.3).resolve().unwrap(), Num::Text("0.3".into()).resolve().unwrap());
        assert!(Num::Text("sqrt7".into()).resolve().is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(toml::from_str::<RunConfig>("seed = 1\nsead = 2").is_err());
    }
}
