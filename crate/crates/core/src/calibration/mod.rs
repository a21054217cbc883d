//! Calibration of MZI meshes: transmission under input interference,
//! phase averaging, error coupling between consecutive MZIs, sweep sizes,
//! mesh-level calibration plans and their simulation.

mod plan;
mod simulate;

pub use plan::{calibration_plan, CalibrationPlan, CalibrationStep, RequiredState, StepClass};
pub use simulate::{
    errors_to_csv, simulate_calibration, CalibrationOptions, CalibrationRecord, CalibrationReport,
    StrayLight,
};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{MeshError, Result};
use crate::linalg::Complex;
use crate::mzi::VoltagePhaseModel;
use crate::optimize::grid_then_golden;

/// Minimum quadrature density for phase averaging, points per 2π.
pub const MIN_QUADRATURE_POINTS: usize = 720;

/// Default voltage span of a calibration sweep.
pub const DEFAULT_SWEEP_SPAN_V: f64 = 4.0;

/// Optical powers at the two inputs of an MZI and their relative phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterferenceCondition {
    /// dBm.
    pub p_top: f64,
    /// dBm; negative infinity for a dark input.
    pub p_bottom: f64,
    /// Relative phase of the bottom input, radians.
    pub delta_in: f64,
}

impl InterferenceCondition {
    pub fn new(p_top: f64, p_bottom: f64, delta_in: f64) -> Result<Self> {
        if !p_top.is_finite() || !delta_in.is_finite() || p_bottom.is_nan() || p_bottom == f64::INFINITY {
            return Err(MeshError::InvalidArgument(
                "p_top and delta_in must be finite, p_bottom finite or -inf".into(),
            ));
        }
        Ok(Self {
            p_top,
            p_bottom,
            delta_in,
        })
    }

    /// Bottom input `ratio_db` below the top one.
    pub fn relative(ratio_db: f64, delta_in: f64) -> Self {
        Self {
            p_top: 0.0,
            p_bottom: ratio_db,
            delta_in,
        }
    }

    pub fn dark_bottom() -> Self {
        Self::relative(f64::NEG_INFINITY, 0.0)
    }

    /// Linear power ratio P_bottom / P_top.
    pub fn ratio(&self) -> f64 {
        if self.p_bottom == f64::NEG_INFINITY {
            0.0
        } else {
            10f64.powf((self.p_bottom - self.p_top) / 10.0)
        }
    }
}

fn field_sum(theta: f64, ratio: f64, delta: f64) -> f64 {
    let (s, c) = (theta / 2.0).sin_cos();
    (Complex::new(s, 0.0) + Complex::from_polar(c * ratio.sqrt(), delta)).norm_sqr()
}

/// |sin(θ/2) + cos(θ/2)·√r·e^{jΔ}|², normalized to the top input power.
pub fn transmission(theta: f64, cond: &InterferenceCondition) -> f64 {
    field_sum(theta, cond.ratio(), cond.delta_in)
}

/// Mean transmission over Δ ∈ [Δ₀, Δ₀ + span] by the trapezoid rule, with
/// Δ₀ = `cond.delta_in`.
pub fn averaged_transmission(
    theta: f64,
    cond: &InterferenceCondition,
    span: f64,
    points_per_turn: usize,
) -> Result<f64> {
    if !(span > 0.0 && span.is_finite()) {
        return Err(MeshError::InvalidArgument("averaging span must be positive".into()));
    }
    let density = points_per_turn.max(MIN_QUADRATURE_POINTS) as f64;
    let intervals = ((density * span / (2.0 * PI)).ceil() as usize).max(2);
    let h = span / intervals as f64;
    let r = cond.ratio();
    let mut acc = 0.0;
    for i in 0..=intervals {
        let w = if i == 0 || i == intervals { 0.5 } else { 1.0 };
        acc += w * field_sum(theta, r, cond.delta_in + h * i as f64);
    }
    Ok(acc * h / span)
}

/// Transmission through two cascaded MZIs when light enters the first one's
/// top input and stray light reaches the second one's bottom input.
///
/// The field reaching the second MZI's top input is sin(θ₁/2) times the
/// source, so the detector sees |sin(θ₁/2)·sin(θ₂/2) + cos(θ₂/2)·√r₂·e^{jΔ}|²
/// with r₂ = P_bottom2 / P_top taken relative to the source power `cond2.p_top`.
pub fn two_stage_transmission(theta1: f64, theta2: f64, cond2: &InterferenceCondition) -> f64 {
    let s1 = (theta1 / 2.0).sin();
    let (s2, c2) = (theta2 / 2.0).sin_cos();
    (Complex::new(s1 * s2, 0.0) + Complex::from_polar(c2 * cond2.ratio().sqrt(), cond2.delta_in)).norm_sqr()
}

/// Location of the transmission minimum in θ ∈ [-π, π).
pub fn transmission_argmin(cond: &InterferenceCondition, tol: f64) -> f64 {
    grid_then_golden(|t| transmission(t, cond), -PI, PI, 721, tol)
}

/// Closed form of [`transmission_argmin`] for Δ = 0: −2·atan(√r).
pub fn interference_shift(ratio: f64) -> f64 {
    -2.0 * ratio.sqrt().atan()
}

pub fn averaged_argmin(cond: &InterferenceCondition, span: f64, tol: f64) -> Result<f64> {
    averaged_transmission(0.0, cond, span, MIN_QUADRATURE_POINTS)?;
    Ok(grid_then_golden(
        |t| averaged_transmission(t, cond, span, MIN_QUADRATURE_POINTS).unwrap_or(f64::INFINITY),
        -PI,
        PI,
        721,
        tol,
    ))
}

/// θ₁ minimizing the two-stage transmission for a fixed θ₂.
pub fn two_stage_argmin(theta2: f64, cond2: &InterferenceCondition, tol: f64) -> f64 {
    grid_then_golden(|t| two_stage_transmission(t, theta2, cond2), -PI, PI, 721, tol)
}

/// Relative-phase samples per θ point in a two-dimensional sweep. The
/// transmission is a first-order trigonometric polynomial in Δ, so four
/// equally spaced samples give its average exactly.
pub const DELTA_IN_SAMPLES: u64 = 4;

/// Measurement points for a voltage sweep of `span_v` volts. A
/// two-dimensional sweep of θ and Δ takes [`DELTA_IN_SAMPLES`] per θ point.
pub fn measurement_point_count(model: &VoltagePhaseModel, span_v: f64, dims: u32) -> Result<u64> {
    model.validate()?;
    if !(span_v >= 0.0 && span_v.is_finite()) {
        return Err(MeshError::InvalidArgument("sweep span must be >= 0".into()));
    }
    let per_axis = (span_v / model.resolution - 1e-9).ceil().max(0.0) as u64;
    match dims {
        1 => Ok(per_axis),
        2 => Ok(per_axis * DELTA_IN_SAMPLES),
        d => Err(MeshError::InvalidArgument(format!("sweep dimension {d} not in {{1, 2}}"))),
    }
}
