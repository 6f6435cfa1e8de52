//! Nonlinear four-tank dynamics, equilibrium computation, and analytic
//! linearization about an operating point.
//!
//! Units are cm, s, and V throughout. Two pumps feed four interconnected
//! tanks through split valves; the lower-tank levels are the measured
//! outputs.

use nalgebra::{Matrix2x4, Matrix4, Matrix4x2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("non-finite input value in {context}")]
    NonFiniteInput { context: &'static str },
    #[error("equilibrium level of tank {tank} ({level:.3} cm) exceeds tank height ({height} cm)")]
    OverflowEquilibrium { tank: usize, level: f64, height: f64 },
    #[error("operating-point level of tank {tank} must be strictly positive, got {level}")]
    NonPositiveLevel { tank: usize, level: f64 },
}

/// Physical constants of the four-tank rig.
///
/// Index convention: tanks 1..4 map to array indices 0..3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantParams {
    /// Tank cross-sections A_i, cm².
    pub tank_area: [f64; 4],
    /// Outlet orifice cross-sections a_i, cm².
    pub orifice_area: [f64; 4],
    /// Valve splits (γ₁, γ₂), fraction of each pump flow routed to the
    /// lower tanks; must lie strictly inside (0, 1).
    pub valve_split: [f64; 2],
    /// Pump gains (k₁, k₂), cm³/(V·s).
    pub pump_gain: [f64; 2],
    /// Level sensor gain k_c, V/cm.
    pub sensor_gain: f64,
    /// Gravitational acceleration, cm/s².
    pub gravity: f64,
    /// Height of every tank, cm.
    pub tank_height: f64,
    /// Admissible absolute pump voltage range [V_min, V_max].
    pub voltage_range: [f64; 2],
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            tank_area: [28.0, 32.0, 28.0, 32.0],
            orifice_area: [0.071, 0.057, 0.071, 0.057],
            valve_split: [0.70, 0.60],
            pump_gain: [3.33, 3.35],
            sensor_gain: 0.50,
            gravity: 981.0,
            tank_height: 20.0,
            voltage_range: [0.0, 10.0],
        }
    }
}

impl PlantParams {
    /// Checks the structural invariants, returning the name of the first
    /// offending field.
    pub fn validate(&self) -> Result<(), String> {
        for (i, &v) in self.tank_area.iter().enumerate() {
            if !(v > 0.0) {
                return Err(format!("plant.params.tank_area[{i}] must be > 0, got {v}"));
            }
        }
        for (i, &v) in self.orifice_area.iter().enumerate() {
            if !(v > 0.0) {
                return Err(format!("plant.params.orifice_area[{i}] must be > 0, got {v}"));
            }
        }
        for (i, &v) in self.valve_split.iter().enumerate() {
            if !(v > 0.0 && v < 1.0) {
                return Err(format!(
                    "plant.params.valve_split[{i}] must lie strictly inside (0,1), got {v}"
                ));
            }
        }
        for (i, &v) in self.pump_gain.iter().enumerate() {
            if !(v > 0.0) {
                return Err(format!("plant.params.pump_gain[{i}] must be > 0, got {v}"));
            }
        }
        if !(self.sensor_gain > 0.0) {
            return Err(format!("plant.params.sensor_gain must be > 0, got {}", self.sensor_gain));
        }
        if !(self.gravity > 0.0) {
            return Err(format!("plant.params.gravity must be > 0, got {}", self.gravity));
        }
        if !(self.tank_height > 0.0) {
            return Err(format!("plant.params.tank_height must be > 0, got {}", self.tank_height));
        }
        if !(self.voltage_range[0] < self.voltage_range[1]) {
            return Err(format!(
                "plant.params.voltage_range must satisfy V_min < V_max, got [{}, {}]",
                self.voltage_range[0], self.voltage_range[1]
            ));
        }
        Ok(())
    }
}

/// Water levels (h₁..h₄), cm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub levels: [f64; 4],
}

/// Pump voltages (v₁, v₂), V.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpCommand {
    pub voltages: [f64; 2],
}

/// The (levels, voltages) pair about which the plant is linearized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingPoint {
    pub levels: [f64; 4],
    pub voltages: [f64; 2],
}

impl OperatingPoint {
    /// The published operating point of the rig.
    pub fn table_values() -> Self {
        Self { levels: [12.4, 12.7, 1.8, 1.4], voltages: [3.0, 3.0] }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (i, &v) in self.levels.iter().enumerate() {
            if !(v > 0.0) {
                return Err(format!(
                    "plant.operating_point.levels[{i}] must be strictly positive, got {v}"
                ));
            }
        }
        if self.voltages.iter().any(|v| !v.is_finite()) {
            return Err("plant.operating_point.voltages must be finite".into());
        }
        Ok(())
    }
}

/// Linear state-space model (A, B, C) in deviation coordinates
/// x = h − h⁰, u = v − v⁰, y = k_c·(x₁, x₂).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: Matrix4<f64>,
    pub b: Matrix4x2<f64>,
    pub c: Matrix2x4<f64>,
    pub operating_point: OperatingPoint,
    /// Tank time constants T_i, s.
    pub time_constants: [f64; 4],
}

fn outflow_speed(gravity: f64, level: f64) -> f64 {
    // Torricelli speed with the level clamped at zero: integrators can
    // momentarily undershoot and the square root must stay defined.
    (2.0 * gravity * level.max(0.0)).sqrt()
}

/// Level rates dh_i/dt (cm/s) of the nonlinear mass-balance model.
///
/// Pump i delivers flow k_i·v_i split by the valve setting between one
/// lower and one (diagonally opposite) upper tank; each tank drains
/// through its orifice at the Torricelli rate.
pub fn derivatives(
    params: &PlantParams,
    state: &PlantState,
    pump: &PumpCommand,
) -> Result<[f64; 4], PlantError> {
    if state.levels.iter().any(|v| !v.is_finite()) {
        return Err(PlantError::NonFiniteInput { context: "state.levels" });
    }
    if pump.voltages.iter().any(|v| !v.is_finite()) {
        return Err(PlantError::NonFiniteInput { context: "pump.voltages" });
    }
    let a = &params.tank_area;
    let ao = &params.orifice_area;
    let [g1, g2] = params.valve_split;
    let [k1, k2] = params.pump_gain;
    let [v1, v2] = pump.voltages;
    let s: Vec<f64> =
        state.levels.iter().map(|&h| outflow_speed(params.gravity, h)).collect();
    Ok([
        (-ao[0] * s[0] + ao[2] * s[2] + g1 * k1 * v1) / a[0],
        (-ao[1] * s[1] + ao[3] * s[3] + g2 * k2 * v2) / a[1],
        (-ao[2] * s[2] + (1.0 - g2) * k2 * v2) / a[2],
        (-ao[3] * s[3] + (1.0 - g1) * k1 * v1) / a[3],
    ])
}

/// Conservation check: total accumulation minus net external flow, cm³/s.
///
/// The tank interconnection only routes flow internally, so for rates
/// produced by [`derivatives`] the residual is zero to rounding.
pub fn mass_balance_residual(
    params: &PlantParams,
    state: &PlantState,
    pump: &PumpCommand,
    rates: &[f64; 4],
) -> f64 {
    let accumulation: f64 =
        params.tank_area.iter().zip(rates).map(|(a, r)| a * r).sum();
    let inflow = params.pump_gain[0] * pump.voltages[0] + params.pump_gain[1] * pump.voltages[1];
    let outflow = params.orifice_area[0] * outflow_speed(params.gravity, state.levels[0])
        + params.orifice_area[1] * outflow_speed(params.gravity, state.levels[1]);
    accumulation - (inflow - outflow)
}

/// Closed-form steady-state levels for constant pump voltages, without
/// the tank-height check. Upper tanks balance first, then the lower
/// tanks balance their orifice outflow against pump plus upper-tank
/// inflow.
pub fn equilibrium_levels(params: &PlantParams, pump: &PumpCommand) -> [f64; 4] {
    let ao = &params.orifice_area;
    let [g1, g2] = params.valve_split;
    let [k1, k2] = params.pump_gain;
    let [v1, v2] = pump.voltages;
    let two_g = 2.0 * params.gravity;
    let sq = |flow: f64, orifice: f64| (flow / orifice).powi(2) / two_g;
    let h3 = sq((1.0 - g2) * k2 * v2, ao[2]);
    let h4 = sq((1.0 - g1) * k1 * v1, ao[3]);
    let h1 = sq(g1 * k1 * v1 + (1.0 - g2) * k2 * v2, ao[0]);
    let h2 = sq(g2 * k2 * v2 + (1.0 - g1) * k1 * v1, ao[1]);
    [h1, h2, h3, h4]
}

/// Steady state for constant pump voltages, rejecting levels beyond the
/// physical tank height.
pub fn equilibrium(params: &PlantParams, pump: &PumpCommand) -> Result<PlantState, PlantError> {
    let levels = equilibrium_levels(params, pump);
    for (i, &h) in levels.iter().enumerate() {
        if h > params.tank_height {
            return Err(PlantError::OverflowEquilibrium {
                tank: i + 1,
                level: h,
                height: params.tank_height,
            });
        }
    }
    Ok(PlantState { levels })
}

/// Tank time constants T_i = (A_i/a_i)·√(2·h_i⁰/g), s.
pub fn time_constants(params: &PlantParams, levels0: &[f64; 4]) -> Result<[f64; 4], PlantError> {
    let mut t = [0.0; 4];
    for i in 0..4 {
        if !(levels0[i] > 0.0) {
            return Err(PlantError::NonPositiveLevel { tank: i + 1, level: levels0[i] });
        }
        t[i] = params.tank_area[i] / params.orifice_area[i]
            * (2.0 * levels0[i] / params.gravity).sqrt();
    }
    Ok(t)
}

/// Analytic linearization about an operating point with strictly
/// positive levels.
pub fn linearize(params: &PlantParams, op: &OperatingPoint) -> Result<LinearModel, PlantError> {
    let t = time_constants(params, &op.levels)?;
    let a_area = &params.tank_area;
    let [g1, g2] = params.valve_split;
    let [k1, k2] = params.pump_gain;
    let kc = params.sensor_gain;

    let mut a = Matrix4::zeros();
    a[(0, 0)] = -1.0 / t[0];
    a[(0, 2)] = a_area[2] / (a_area[0] * t[2]);
    a[(1, 1)] = -1.0 / t[1];
    a[(1, 3)] = a_area[3] / (a_area[1] * t[3]);
    a[(2, 2)] = -1.0 / t[2];
    a[(3, 3)] = -1.0 / t[3];

    let mut b = Matrix4x2::zeros();
    b[(0, 0)] = g1 * k1 / a_area[0];
    b[(1, 1)] = g2 * k2 / a_area[1];
    b[(2, 1)] = (1.0 - g2) * k2 / a_area[2];
    b[(3, 0)] = (1.0 - g1) * k1 / a_area[3];

    let mut c = Matrix2x4::zeros();
    c[(0, 0)] = kc;
    c[(1, 1)] = kc;

    Ok(LinearModel { a, b, c, operating_point: *op, time_constants: t })
}

/// Measured output voltages y = (k_c·h₁, k_c·h₂).
pub fn measure(params: &PlantParams, state: &PlantState) -> [f64; 2] {
    [params.sensor_gain * state.levels[0], params.sensor_gain * state.levels[1]]
}
