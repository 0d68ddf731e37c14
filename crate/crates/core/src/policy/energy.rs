use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Battery drain rates in percent of capacity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyModel {
    pub idle_pct_per_min: f64,
    pub front_pct_per_min: f64,
    pub back_pct_per_min: f64,
    pub tail_pct_per_activation: f64,
}

impl EnergyModel {
    pub fn zero() -> Self {
        Self { idle_pct_per_min: 0.0, front_pct_per_min: 0.0, back_pct_per_min: 0.0, tail_pct_per_activation: 0.0 }
    }

    /// Model fitted to [`MEASURED_SESSIONS`].
    pub fn measured() -> Self {
        fit_energy_model(&MEASURED_SESSIONS).expect("builtin table is well-conditioned").model
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.idle_pct_per_min, self.front_pct_per_min, self.back_pct_per_min, self.tail_pct_per_activation];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(format!("energy rates must be finite and non-negative: {self:?}")));
        }
        Ok(())
    }

    /// Predicted drain of one measurement row.
    pub fn predict(&self, row: &EnergyRow) -> f64 {
        self.idle_pct_per_min * row.session()
            + self.front_pct_per_min * row.front_min
            + self.back_pct_per_min * row.back_min
            + self.tail_pct_per_activation * row.activations.unwrap_or(0.0)
    }
}

/// One battery measurement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub front_min: f64,
    pub back_min: f64,
    pub battery_pct: f64,
    /// Session length; defaults to `max(front_min, back_min)`.
    #[serde(default)]
    pub session_min: Option<f64>,
    #[serde(default)]
    pub activations: Option<f64>,
}

impl EnergyRow {
    pub const fn new(front_min: f64, back_min: f64, battery_pct: f64) -> Self {
        Self { front_min, back_min, battery_pct, session_min: None, activations: None }
    }

    pub fn session(&self) -> f64 {
        self.session_min.unwrap_or(self.front_min.max(self.back_min))
    }
}

const fn session_row(front_min: f64, back_min: f64, battery_pct: f64) -> EnergyRow {
    EnergyRow { front_min, back_min, battery_pct, session_min: Some(10.0), activations: None }
}

/// Measured 10-minute sessions (front minutes, back minutes, battery %). The
/// idle row is reported as "<1%" and entered as 0.5.
pub const MEASURED_SESSIONS: [EnergyRow; 7] = [
    session_row(0.0, 0.0, 0.5),
    session_row(10.0, 0.0, 2.0),
    session_row(10.0, 1.0, 2.0),
    session_row(10.0, 3.0, 3.0),
    session_row(10.0, 5.0, 4.0),
    session_row(10.0, 7.0, 5.0),
    session_row(10.0, 10.0, 5.0),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyFit {
    pub model: EnergyModel,
    /// Prediction minus measurement, per input row.
    pub residuals: Vec<f64>,
}

/// Least-squares fit of `battery ≈ idle·session + front·front_min +
/// back·back_min [+ tail·activations]`.
///
/// The tail column is included only when some row carries an activation
/// count; otherwise the tail rate is 0 and its effect folds into the back
/// rate. Fails on fewer than 3 rows or a rank-deficient design.
pub fn fit_energy_model(rows: &[EnergyRow]) -> Result<EnergyFit> {
    if rows.len() < 3 {
        return Err(Error::RankDeficient(format!("need at least 3 rows, got {}", rows.len())));
    }
    for (i, r) in rows.iter().enumerate() {
        let vals = [r.front_min, r.back_min, r.battery_pct, r.session(), r.activations.unwrap_or(0.0)];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(format!("row {}: values must be finite and non-negative", i + 1)));
        }
    }
    let with_tail = rows.iter().any(|r| r.activations.is_some());
    let cols = if with_tail { 4 } else { 3 };
    let a = DMatrix::from_fn(rows.len(), cols, |i, j| {
        let r = &rows[i];
        [r.session(), r.front_min, r.back_min, r.activations.unwrap_or(0.0)][j]
    });
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.battery_pct));
    let svd = a.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if rows.len() < cols || !(s_max > 0.0) || s_min <= s_max * 1e-10 {
        return Err(Error::RankDeficient(format!(
            "design matrix has singular values in [{s_min:.3e}, {s_max:.3e}]"
        )));
    }
    let x = svd.solve(&b, s_max * 1e-12).map_err(|e| Error::RankDeficient(e.to_string()))?;
    let model = EnergyModel {
        idle_pct_per_min: x[0],
        front_pct_per_min: x[1],
        back_pct_per_min: x[2],
        tail_pct_per_activation: if with_tail { x[3] } else { 0.0 },
    };
    let residuals = rows.iter().map(|r| model.predict(r) - r.battery_pct).collect();
    Ok(EnergyFit { model, residuals })
}

/// Accumulated on-time and battery drain over a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub front_on_ms: u64,
    pub back_on_ms: u64,
    pub back_activations: u64,
    pub battery_pct: f64,
}

/// Charges `dt_ms` of operation, plus one tail cost when `activation_edge`.
pub fn charge(
    ledger: &EnergyLedger,
    model: &EnergyModel,
    dt_ms: u64,
    front_on: bool,
    back_on: bool,
    activation_edge: bool,
) -> EnergyLedger {
    let minutes = dt_ms as f64 / 60_000.0;
    let mut rate = model.idle_pct_per_min;
    if front_on {
        rate += model.front_pct_per_min;
    }
    if back_on {
        rate += model.back_pct_per_min;
    }
    let mut out = *ledger;
    out.battery_pct += rate * minutes;
    if front_on {
        out.front_on_ms += dt_ms;
    }
    if back_on {
        out.back_on_ms += dt_ms;
    }
    if activation_edge {
        out.back_activations += 1;
        out.battery_pct += model.tail_pct_per_activation;
    }
    out
}
