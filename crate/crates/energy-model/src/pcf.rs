//! Relaxed energy of piecewise-constant states: bulk terms vanish, so the
//! energy is a sum of per-edge jump costs.

use crate::{Error, Result};
use field_core::grid::Field;
use field_core::vec3;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One constant phase: brightness value and unit chromaticity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub r: f64,
    pub s: [f64; 3],
}

/// A labeled partition of the grid into constant phases.
#[derive(Clone, Debug)]
pub struct PiecewiseConstantField {
    labels: Field<u32>,
    states: Vec<PhaseState>,
}

impl PiecewiseConstantField {
    /// Validates that every label points into `states` and every state has a
    /// unit chromaticity and finite brightness.
    pub fn new(labels: Field<u32>, states: Vec<PhaseState>) -> Result<Self> {
        for (k, st) in states.iter().enumerate() {
            if !st.r.is_finite() {
                return Err(Error::InvalidQuery(format!(
                    "state {k} has non-finite brightness"
                )));
            }
            let n = vec3::norm(st.s);
            if (n - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidQuery(format!(
                    "state {k} chromaticity norm {n} is not 1 within 1e-12"
                )));
            }
        }
        if let Some(&bad) = labels.data().iter().find(|&&l| l as usize >= states.len()) {
            return Err(Error::InvalidQuery(format!(
                "label {bad} out of range for {} states",
                states.len()
            )));
        }
        Ok(PiecewiseConstantField { labels, states })
    }

    /// Two phases split by a vertical interface at the middle column.
    pub fn split_vertical(rows: usize, cols: usize, a: PhaseState, b: PhaseState) -> Result<Self> {
        let labels = Field::from_fn(rows, cols, |_, j| u32::from(j >= cols / 2));
        Self::new(labels, vec![a, b])
    }

    pub fn labels(&self) -> &Field<u32> {
        &self.labels
    }

    pub fn states(&self) -> &[PhaseState] {
        &self.states
    }
}

/// Sums `h * jump_cost(from, to, nu)` over interior edges whose endpoints
/// carry different labels.
///
/// Horizontal neighbors are charged with `nu = [1, 0]` (left to right),
/// vertical neighbors with `nu = [0, 1]` (top to bottom). The cost closure is
/// invoked once per (from-label, to-label, direction) triple and the result
/// is reused across the interface, so expensive jump solvers are evaluated a
/// number of times bounded by the phase count, not the grid size.
pub fn energy_relaxed_pc<F>(field: &PiecewiseConstantField, mut jump_cost: F) -> f64
where
    F: FnMut(&PhaseState, &PhaseState, [f64; 2]) -> f64,
{
    let labels = &field.labels;
    let rows = labels.rows();
    let cols = labels.cols();
    let h = labels.h();
    let mut cache: BTreeMap<(u32, u32, u8), f64> = BTreeMap::new();
    let mut total = 0.0;
    let mut charge = |from: u32, to: u32, axis: u8| {
        let cost = *cache.entry((from, to, axis)).or_insert_with(|| {
            let nu = if axis == 0 { [1.0, 0.0] } else { [0.0, 1.0] };
            jump_cost(
                &field.states[from as usize],
                &field.states[to as usize],
                nu,
            )
        });
        h * cost
    };
    for i in 0..rows {
        for j in 0..cols.saturating_sub(1) {
            let (la, lb) = (labels.get(i, j), labels.get(i, j + 1));
            if la != lb {
                total += charge(la, lb, 0);
            }
        }
    }
    for i in 0..rows.saturating_sub(1) {
        for j in 0..cols {
            let (la, lb) = (labels.get(i, j), labels.get(i + 1, j));
            if la != lb {
                total += charge(la, lb, 1);
            }
        }
    }
    total
}
