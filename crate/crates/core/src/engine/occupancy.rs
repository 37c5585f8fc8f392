use std::collections::BTreeMap;

use serde::Serialize;

use super::{EngineError, IterateSequence, N_MAX};
use crate::expr::{inverse_eval, FunctionSpec};

/// `U_b`: how many `n` in `1..=N` have `b_i <= a_i(n) < b_i + 1` for every `i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OccupancyTable {
    pub n: u64,
    pub counts: BTreeMap<Vec<i64>, u64>,
}

impl OccupancyTable {
    pub fn get(&self, b: &[i64]) -> u64 {
        self.counts.get(b).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

pub fn occupancy(iterates: &[IterateSequence], n: u64) -> Result<OccupancyTable, EngineError> {
    if iterates.is_empty() {
        return Err(EngineError::Invalid("at least one iterate is required".into()));
    }
    if n > N_MAX {
        return Err(EngineError::Budget { n, max: N_MAX });
    }
    let mut counts = BTreeMap::new();
    for k in 1..=n {
        let b = iterates
            .iter()
            .map(|a| a.floor_at(k))
            .collect::<Result<Vec<_>, _>>()?;
        *counts.entry(b).or_insert(0) += 1;
    }
    Ok(OccupancyTable { n, counts })
}

/// `(min, max)` of `a^{-1}(b)` and `a^{-1}(b + 1)`: the real interval whose
/// integers are the times landing in box `b`.
pub fn predicted_interval(a: &FunctionSpec, b: i64) -> Result<(f64, f64), EngineError> {
    let lo = inverse_eval(a, b as f64, None).map_err(crate::expr::FunctionError::from)?;
    let hi = inverse_eval(a, (b + 1) as f64, None).map_err(crate::expr::FunctionError::from)?;
    Ok((lo.min(hi), lo.max(hi)))
}

/// The three pieces of `λ_N − (T_1 × id)λ_N` measured box by box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TermMagnitudes {
    /// `(1/N) Σ |U_{b_1,b*} − U_{b_1−1,b*}|` over boxes where both are occupied.
    pub shared: f64,
    /// `(1/N) Σ U_{b_1,b*}` over occupied boxes whose left neighbour is empty.
    pub appear: f64,
    /// `(1/N) Σ U_{b_1−1,b*}` over occupied boxes whose right neighbour is empty.
    pub disappear: f64,
}

pub fn term_decomposition(iterates: &[IterateSequence], n: u64) -> Result<TermMagnitudes, EngineError> {
    let table = occupancy(iterates, n)?;
    Ok(decompose(&table))
}

fn decompose(table: &OccupancyTable) -> TermMagnitudes {
    let nf = table.n.max(1) as f64;
    let (mut shared, mut appear, mut disappear) = (0u64, 0u64, 0u64);
    let neighbour = |b: &[i64], step: i64| {
        let mut v = b.to_vec();
        v[0] += step;
        v
    };
    for (b, &u) in &table.counts {
        let left = table.get(&neighbour(b, -1));
        if left > 0 {
            shared += u.abs_diff(left);
        } else {
            appear += u;
        }
        if table.get(&neighbour(b, 1)) == 0 {
            disappear += u;
        }
    }
    TermMagnitudes {
        shared: shared as f64 / nf,
        appear: appear as f64 / nf,
        disappear: disappear as f64 / nf,
    }
}
