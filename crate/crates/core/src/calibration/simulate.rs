use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::plan::{CalibrationPlan, CalibrationStep, RequiredState, StepClass};
use super::{measurement_point_count, DEFAULT_SWEEP_SPAN_V, MIN_QUADRATURE_POINTS};
use crate::error::{MeshError, Result};
use crate::linalg::{Complex, ZERO};
use crate::mzi::{mzi_block, wrap_2pi, wrap_pi, MziImperfection, MziPhases, VoltagePhaseModel};
use crate::optimize::grid_then_golden;
use crate::topology::MeshTopology;

/// Residual light leaking into the nominally dark input of the target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrayLight {
    /// Power relative to the lit input, dB.
    pub ratio_db: f64,
    /// Phase relative to the lit input.
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub model: VoltagePhaseModel,
    pub sweep_span_v: f64,
    /// Span of the relative-phase average for steps without a dark input;
    /// `None` measures them without averaging.
    pub averaging_span: Option<f64>,
    pub quadrature_points: usize,
    pub stray: Option<StrayLight>,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            model: VoltagePhaseModel::default(),
            sweep_span_v: DEFAULT_SWEEP_SPAN_V,
            averaging_span: Some(2.0 * PI),
            quadrature_points: MIN_QUADRATURE_POINTS,
            stray: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub mzi_id: usize,
    pub class: StepClass,
    pub true_offset: f64,
    pub recovered_offset: f64,
    pub abs_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub records: Vec<CalibrationRecord>,
    pub max_error: f64,
}

impl CalibrationReport {
    pub fn max_error_for(&self, class: StepClass) -> f64 {
        self.records
            .iter()
            .filter(|r| r.class == class)
            .map(|r| r.abs_error)
            .fold(0.0, f64::max)
    }
}

/// Simulated bench: hidden θ offsets, θ = offset + π(V/Vπ)², ideal φ.
pub(crate) struct Bench<'a> {
    t: &'a MeshTopology,
    offsets: &'a [f64],
    model: VoltagePhaseModel,
    volts: Vec<f64>,
    phis: Vec<f64>,
}

impl<'a> Bench<'a> {
    pub(crate) fn new(t: &'a MeshTopology, offsets: &'a [f64], model: VoltagePhaseModel) -> Self {
        Self {
            t,
            offsets,
            model,
            volts: vec![0.0; t.mzi_count()],
            phis: vec![0.0; t.mzi_count()],
        }
    }

    fn heater_phase(&self, v: f64) -> f64 {
        PI * (v / self.model.v_pi).powi(2)
    }

    fn voltage_for(&self, phase: f64) -> f64 {
        self.model.v_pi * (wrap_2pi(phase) / PI).sqrt()
    }

    pub(crate) fn set_theta(&mut self, id: usize, theta: f64, estimate: f64) {
        self.volts[id] = self.voltage_for(theta - estimate);
    }

    /// Field at every waveguide just before `target`, and after the whole
    /// mesh, for unit light at `input`. `inject` adds a field at the
    /// target's dark input proportional to the lit one.
    pub(crate) fn run(&self, input: usize, target: usize, inject: Option<(usize, Complex)>) -> (Vec<Complex>, Vec<Complex>) {
        let mut v = vec![ZERO; self.t.n_waveguides()];
        v[input] = Complex::new(1.0, 0.0);
        let mut before = Vec::new();
        let ideal = MziImperfection::ideal();
        for p in self.t.placements() {
            if p.id == target {
                if let Some((dark_side, factor)) = inject {
                    let lit = v[p.top + 1 - dark_side];
                    v[p.top + dark_side] += factor * lit;
                }
                before = v.clone();
            }
            let theta = self.offsets[p.id] + self.heater_phase(self.volts[p.id]);
            let b = mzi_block(MziPhases::new(theta, self.phis[p.id]), &ideal);
            let (a, c) = (v[p.top], v[p.top + 1]);
            v[p.top] = b[0][0] * a + b[0][1] * c;
            v[p.top + 1] = b[1][0] * a + b[1][1] * c;
        }
        (before, v)
    }
}

fn wrap_half_turn(x: f64) -> f64 {
    x - PI * (x / PI).round()
}

/// Executes `plan` on a simulated mesh whose heaters carry the hidden θ
/// offsets, sweeping each target's voltage and locating the transmission
/// minimum. φ settings are taken as ideally referenced.
///
/// Steps without a dark input only fix the offset modulo π; the branch in
/// [-π/2, π/2) is taken, so offsets are assumed to lie in that range.
pub fn simulate_calibration(
    t: &MeshTopology,
    plan: &CalibrationPlan,
    hidden_offsets: &[f64],
    opts: &CalibrationOptions,
) -> Result<CalibrationReport> {
    if hidden_offsets.len() != t.mzi_count() {
        return Err(MeshError::Dimension(format!(
            "expected {} offsets, got {}",
            t.mzi_count(),
            hidden_offsets.len()
        )));
    }
    if plan.steps.len() != t.mzi_count() || plan.kind != t.kind() {
        return Err(MeshError::InvalidArgument("plan does not match topology".into()));
    }
    let points = measurement_point_count(&opts.model, opts.sweep_span_v, 1)? as usize;
    if points < 2 {
        return Err(MeshError::InvalidArgument("sweep needs at least two points".into()));
    }

    let mut bench = Bench::new(t, hidden_offsets, opts.model);
    let mut estimates: Vec<Option<f64>> = vec![None; t.mzi_count()];
    let mut records = Vec::with_capacity(plan.steps.len());

    for step in &plan.steps {
        configure(&mut bench, step, &estimates);
        let id = step.mzi_id;
        let shifter = match (step.class, opts.averaging_span) {
            (StepClass::AveragingRequired, Some(_)) => Some(step.averaging_shifter.ok_or_else(|| {
                MeshError::Numerical(format!("no phase shifter feeds MZI {id}; averaging impossible"))
            })?),
            _ => None,
        };
        let inject = match (step.class, opts.stray) {
            (StepClass::AveragingRequired, _) | (_, None) => None,
            (_, Some(s)) => {
                let amp = 10f64.powf(s.ratio_db / 20.0);
                Some((1 - step.lit_side, Complex::from_polar(amp, s.delta)))
            }
        };

        let detect = |b: &Bench, v: f64| -> f64 {
            let mut local = Bench {
                t: b.t,
                offsets: b.offsets,
                model: b.model,
                volts: b.volts.clone(),
                phis: b.phis.clone(),
            };
            local.volts[id] = v;
            match (shifter, opts.averaging_span) {
                (Some(p), Some(span)) => {
                    let intervals = ((opts.quadrature_points as f64 * span / (2.0 * PI)).ceil() as usize).max(2);
                    let h = span / intervals as f64;
                    let mut acc = 0.0;
                    for k in 0..=intervals {
                        let w = if k == 0 || k == intervals { 0.5 } else { 1.0 };
                        local.phis[p] = h * k as f64;
                        acc += w * local.run(step.light_input, id, None).1[step.detector_output].norm_sqr();
                    }
                    acc * h / span
                }
                _ => local.run(step.light_input, id, inject).1[step.detector_output].norm_sqr(),
            }
        };

        let v_star = grid_then_golden(|v| detect(&bench, v), 0.0, opts.sweep_span_v, points, 1e-10);
        let heater = bench.heater_phase(v_star);
        let recovered = match step.class {
            StepClass::AveragingRequired => wrap_half_turn(-heater),
            _ => {
                let theta0 = if step.lit_side == step.exit_side { 0.0 } else { PI };
                wrap_pi(theta0 - heater)
            }
        };
        estimates[id] = Some(recovered);
        bench.volts[id] = 0.0;
        let truth = hidden_offsets[id];
        records.push(CalibrationRecord {
            mzi_id: id,
            class: step.class,
            true_offset: truth,
            recovered_offset: recovered,
            abs_error: wrap_pi(recovered - truth).abs(),
        });
    }
    let max_error = records.iter().map(|r| r.abs_error).fold(0.0, f64::max);
    Ok(CalibrationReport { records, max_error })
}

/// Puts the bench into the state a step asks for: calibrated route MZIs
/// at their exact bar/cross voltages, uncalibrated route MZIs at their
/// design voltage, everything else unpowered.
pub(crate) fn configure(bench: &mut Bench, step: &CalibrationStep, estimates: &[Option<f64>]) {
    bench.volts.iter_mut().for_each(|v| *v = 0.0);
    bench.phis.iter_mut().for_each(|p| *p = 0.0);
    let theta_of = |s: RequiredState| match s {
        RequiredState::Bar => Some(PI),
        RequiredState::Cross => Some(0.0),
        RequiredState::Free => None,
    };
    for (&m, &s) in &step.required_states {
        if let Some(theta) = theta_of(s) {
            bench.set_theta(m, theta, estimates[m].unwrap_or(0.0));
        }
    }
    for (&m, &s) in &step.nominal {
        if let Some(theta) = theta_of(s) {
            bench.set_theta(m, theta, 0.0);
        }
    }
}

/// CSV with columns mzi_id, true, recovered, abs_error.
pub fn errors_to_csv(report: &CalibrationReport) -> String {
    let mut out = String::from("mzi_id,true,recovered,abs_error\n");
    for r in &report.records {
        out.push_str(&format!(
            "{},{:.12},{:.12},{:.12}\n",
            r.mzi_id, r.true_offset, r.recovered_offset, r.abs_error
        ));
    }
    out
}
