//! Monitoring routes, ex-situ closed-loop bias correction and in-situ
//! gradient programming.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{MeshError, Result};
use crate::linalg::{solve_linear, Complex, ComplexMatrix, ZERO};
use crate::mzi::{wrap_pi, MziPhases};
use crate::optimize::golden_section;
use crate::propagation::{apply_blocks, MeshState};
use crate::topology::{independently_accessible, Hop, MeshTopology};

/// Thermo-optic phase shifter transit time.
pub const DEFAULT_TRANSIT_TIME: f64 = 2.2e-6;

/// Light source, detector and route that isolate one MZI's θ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitoringPlan {
    pub mzi_id: usize,
    pub light_input: usize,
    pub light_input_label: String,
    pub detector_output: usize,
    pub detector_label: String,
    /// θ at which the detected power vanishes: 0 when the route keeps its
    /// side through the target, π when it crosses.
    pub null_theta: f64,
    pub upstream: Vec<Hop>,
    pub downstream: Vec<Hop>,
}

pub fn monitoring_plan(t: &MeshTopology, mzi_id: usize) -> Option<MonitoringPlan> {
    if mzi_id >= t.mzi_count() {
        return None;
    }
    let r = t.find_route(mzi_id)?;
    Some(MonitoringPlan {
        mzi_id,
        light_input: r.input_wg,
        light_input_label: t.input_label(r.input_wg),
        detector_output: r.output_wg,
        detector_label: t.output_label(r.output_wg),
        null_theta: if r.target.is_bar() { 0.0 } else { PI },
        upstream: r.upstream,
        downstream: r.downstream,
    })
}

/// Detected power along a plan with the target's effective θ shifted by `delta`.
fn route_power(s: &MeshState, plan: &MonitoringPlan, delta: f64) -> Result<f64> {
    let mut offsets = vec![MziPhases::default(); s.phases().len()];
    offsets[plan.mzi_id].theta = delta;
    let blocks = s.blocks(Some(&offsets))?;
    let mut v = vec![ZERO; s.topology().n_waveguides()];
    v[plan.light_input] = Complex::new(1.0, 0.0);
    for (i, &ph) in s.input_phases().iter().enumerate() {
        v[i] *= Complex::from_polar(1.0, ph);
    }
    apply_blocks(s.topology(), &blocks, &mut v);
    Ok(v[plan.detector_output].norm_sqr())
}

/// Result of a monitoring sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorFit {
    /// Effective θ the MZI currently sits at, in [-π, π).
    pub theta: f64,
    /// Fitted A of T = A·sin²((θ - θ_null)/2).
    pub amplitude: f64,
    /// RMS fit residual divided by A.
    pub normalized_residual: f64,
}

/// Sweeps the target's θ over a full turn around its current setting, fits
/// A·sin²(θ/2) to the detected power and refines the minimum. Returns the
/// effective θ, crosstalk included. No other bias is touched; the sweep's
/// own heat on neighbors is neglected.
pub fn monitor_theta(s: &MeshState, plan: &MonitoringPlan, sweep_points: usize) -> Result<MonitorFit> {
    if plan.mzi_id >= s.phases().len() {
        return Err(MeshError::InvalidArgument(format!("no MZI {}", plan.mzi_id)));
    }
    let k = sweep_points.max(8);
    let deltas: Vec<f64> = (0..k).map(|i| 2.0 * PI * i as f64 / k as f64).collect();
    let samples = deltas
        .iter()
        .map(|&d| route_power(s, plan, d))
        .collect::<Result<Vec<f64>>>()?;

    // Uniform samples make the least-squares fit of c0 + c1·cosδ + c2·sinδ
    // a discrete Fourier projection.
    let kf = k as f64;
    let c0 = samples.iter().sum::<f64>() / kf;
    let c1 = 2.0 / kf * samples.iter().zip(&deltas).map(|(t, d)| t * d.cos()).sum::<f64>();
    let c2 = 2.0 / kf * samples.iter().zip(&deltas).map(|(t, d)| t * d.sin()).sum::<f64>();
    let half_amp = c1.hypot(c2);
    if half_amp < 1e-20 {
        return Err(MeshError::DegenerateFit(format!(
            "route through MZI {} carries no modulated light",
            plan.mzi_id
        )));
    }
    let rms = (samples
        .iter()
        .zip(&deltas)
        .map(|(t, d)| (t - c0 - c1 * d.cos() - c2 * d.sin()).powi(2))
        .sum::<f64>()
        / kf)
        .sqrt();

    // T ∝ 1 - cos(θ_rel + δ), minimal at δ* = -θ_rel.
    let rel = c2.atan2(-c1);
    let guess = -rel;
    let step = 2.0 * PI / kf;
    let refined = golden_section(
        |d| route_power(s, plan, d).unwrap_or(f64::INFINITY),
        guess - step,
        guess + step,
        1e-12,
    );
    Ok(MonitorFit {
        theta: wrap_pi(plan.null_theta - refined),
        amplitude: 2.0 * half_amp,
        normalized_residual: rms / (2.0 * half_amp),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgrammingResult {
    pub phases: Vec<MziPhases>,
    pub input_phases: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub t_prog_seconds: f64,
    /// Residual after each iteration.
    pub history: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExSituOptions {
    pub iterations_per_mzi: usize,
    pub transit_time: f64,
    pub sweep_points: usize,
    /// Residual (max effective-phase error, rad) counted as converged.
    pub tolerance: f64,
}

impl Default for ExSituOptions {
    fn default() -> Self {
        Self {
            iterations_per_mzi: 10,
            transit_time: DEFAULT_TRANSIT_TIME,
            sweep_points: 64,
            tolerance: 0.01,
        }
    }
}

fn max_phase_error(eff: &[MziPhases], target: &[MziPhases]) -> f64 {
    eff.iter()
        .zip(target)
        .flat_map(|(e, t)| [wrap_pi(e.theta - t.theta).abs(), wrap_pi(e.phi - t.phi).abs()])
        .fold(0.0, f64::max)
}

/// Closed-loop programming: start from the precomputed target biases, then
/// in every iteration monitor each MZI's effective θ and subtract its error
/// from the bias. All MZIs are corrected concurrently, so one iteration
/// costs one heater transit. φ is read from an ideal phase reference.
pub fn program_ex_situ(
    s: &MeshState,
    target: &[MziPhases],
    opts: &ExSituOptions,
) -> Result<ProgrammingResult> {
    let t = s.topology();
    if target.len() != s.phases().len() {
        return Err(MeshError::Dimension("target phase count".into()));
    }
    let accessible = independently_accessible(t);
    let missing: Vec<usize> = (0..t.mzi_count()).filter(|m| !accessible.contains(m)).collect();
    if !missing.is_empty() {
        return Err(MeshError::InaccessibleSet(missing));
    }
    let plans: Vec<MonitoringPlan> = (0..t.mzi_count())
        .map(|m| monitoring_plan(t, m).expect("accessible"))
        .collect();

    let mut work = s.clone();
    work.set_phases(target.to_vec())?;
    let mut history = Vec::with_capacity(opts.iterations_per_mzi);
    for _ in 0..opts.iterations_per_mzi {
        let eff = work.effective_phases();
        let monitored = plans
            .iter()
            .map(|p| monitor_theta(&work, p, opts.sweep_points).map(|f| f.theta))
            .collect::<Result<Vec<f64>>>()?;
        let phases: Vec<MziPhases> = work
            .phases()
            .iter()
            .enumerate()
            .map(|(m, b)| {
                MziPhases::new(
                    b.theta - wrap_pi(monitored[m] - target[m].theta),
                    b.phi - wrap_pi(eff[m].phi - target[m].phi),
                )
            })
            .collect();
        work.set_phases(phases)?;
        history.push(max_phase_error(&work.effective_phases(), target));
    }
    let residual = history
        .last()
        .copied()
        .unwrap_or_else(|| max_phase_error(&work.effective_phases(), target));
    Ok(ProgrammingResult {
        phases: work.phases().to_vec(),
        input_phases: work.input_phases().to_vec(),
        iterations: opts.iterations_per_mzi,
        residual,
        converged: residual <= opts.tolerance,
        t_prog_seconds: opts.iterations_per_mzi as f64 * opts.transit_time,
        history,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InSituMethod {
    /// Damped Gauss-Newton on the aligned residual.
    #[default]
    LevenbergMarquardt,
    /// Plain descent along the adjoint gradient.
    GradientDescent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InSituOptions {
    pub method: InSituMethod,
    pub max_iterations: usize,
    /// Initial descent step (gradient descent only).
    pub step: f64,
    /// Residual (phase-aligned Frobenius distance) counted as converged.
    pub tolerance: f64,
    pub transit_time: f64,
}

impl Default for InSituOptions {
    fn default() -> Self {
        Self {
            method: InSituMethod::LevenbergMarquardt,
            max_iterations: 200,
            step: 0.05,
            tolerance: 1e-3,
            transit_time: DEFAULT_TRANSIT_TIME,
        }
    }
}

/// Frobenius distance between the realized main-port matrix and `target`
/// after the best per-input phase alignment, with its cotangent ∂L/∂U*
/// where L is the squared distance.
fn aligned_distance(u: &ComplexMatrix, target: &ComplexMatrix) -> (f64, ComplexMatrix) {
    let n = u.rows();
    let mut loss = 0.0;
    let mut g = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut c = ZERO;
        let mut nu = 0.0;
        let mut nt = 0.0;
        for i in 0..n {
            c += target[(i, j)].conj() * u[(i, j)];
            nu += u[(i, j)].norm_sqr();
            nt += target[(i, j)].norm_sqr();
        }
        loss += nu + nt - 2.0 * c.norm();
        let phase = if c.norm() > 0.0 { c / c.norm() } else { Complex::new(1.0, 0.0) };
        for i in 0..n {
            g[(i, j)] = u[(i, j)] - phase * target[(i, j)];
        }
    }
    (loss.max(0.0), g)
}

/// Fits the phases so that the realized main-port transfer matrix matches
/// `target` up to one phase per input column.
pub fn program_in_situ(s: &MeshState, target: &ComplexMatrix, opts: &InSituOptions) -> Result<ProgrammingResult> {
    let n = s.topology().n_main();
    if target.rows() != n || target.cols() != n {
        return Err(MeshError::Dimension(format!(
            "target is {}x{}, mesh has {n} main ports",
            target.rows(),
            target.cols()
        )));
    }
    let (work, iterations, loss, history) = match opts.method {
        InSituMethod::LevenbergMarquardt => levenberg_marquardt(s, target, opts)?,
        InSituMethod::GradientDescent => gradient_descent(s, target, opts)?,
    };
    if !loss.is_finite() {
        return Err(MeshError::Numerical("in-situ objective diverged".into()));
    }
    let residual = loss.sqrt();
    Ok(ProgrammingResult {
        phases: work.phases().to_vec(),
        input_phases: work.input_phases().to_vec(),
        iterations,
        residual,
        converged: residual < opts.tolerance,
        t_prog_seconds: t_prog(iterations, opts.transit_time),
        history,
    })
}

type Fit = (MeshState, usize, f64, Vec<f64>);

fn pack(s: &MeshState) -> Vec<f64> {
    let mut p: Vec<f64> = s.phases().iter().flat_map(|m| [m.theta, m.phi]).collect();
    p.extend_from_slice(s.input_phases());
    p
}

fn unpack(s: &mut MeshState, p: &[f64]) -> Result<()> {
    let m = s.phases().len();
    for (k, ph) in s.phases_mut().iter_mut().enumerate() {
        ph.theta = p[2 * k];
        ph.phi = p[2 * k + 1];
    }
    s.set_input_phases(p[2 * m..].to_vec())
}

/// Real residual vector whose squared norm is the aligned distance.
fn residual_vector(s: &MeshState, target: &ComplexMatrix) -> Result<Vec<f64>> {
    let u = s.main_transfer(None)?;
    let (_, g) = aligned_distance(&u, target);
    let n = u.rows();
    let mut r = Vec::with_capacity(2 * n * n);
    for i in 0..n {
        for j in 0..n {
            r.push(g[(i, j)].re);
            r.push(g[(i, j)].im);
        }
    }
    Ok(r)
}

fn levenberg_marquardt(s: &MeshState, target: &ComplexMatrix, opts: &InSituOptions) -> Result<Fit> {
    const H: f64 = 1e-6;
    let mut work = s.clone();
    let mut p = pack(&work);
    let np = p.len();
    let mut r = residual_vector(&work, target)?;
    let mut loss: f64 = r.iter().map(|x| x * x).sum();
    let mut lambda = 1e-3;
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut probe = work.clone();
    while loss.sqrt() >= opts.tolerance && iterations < opts.max_iterations {
        iterations += 1;
        let mut jac = vec![Vec::new(); np];
        for (k, col) in jac.iter_mut().enumerate() {
            let mut q = p.clone();
            q[k] = p[k] + H;
            unpack(&mut probe, &q)?;
            let plus = residual_vector(&probe, target)?;
            q[k] = p[k] - H;
            unpack(&mut probe, &q)?;
            let minus = residual_vector(&probe, target)?;
            *col = plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * H)).collect();
        }
        let mut jtj = vec![0.0; np * np];
        let mut jtr = vec![0.0; np];
        for a in 0..np {
            jtr[a] = jac[a].iter().zip(&r).map(|(x, y)| x * y).sum();
            for b in a..np {
                let v: f64 = jac[a].iter().zip(&jac[b]).map(|(x, y)| x * y).sum();
                jtj[a * np + b] = v;
                jtj[b * np + a] = v;
            }
        }
        let mut accepted = false;
        while lambda < 1e12 {
            let mut m = jtj.clone();
            for a in 0..np {
                m[a * np + a] += lambda * (1.0 + jtj[a * np + a]);
            }
            let rhs: Vec<f64> = jtr.iter().map(|x| -x).collect();
            let step = solve_linear(m, rhs, np)?;
            let q: Vec<f64> = p.iter().zip(&step).map(|(a, b)| a + b).collect();
            unpack(&mut probe, &q)?;
            let r2 = residual_vector(&probe, target)?;
            let l2: f64 = r2.iter().map(|x| x * x).sum();
            if l2 < loss {
                p = q;
                r = r2;
                loss = l2;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                break;
            }
            lambda *= 4.0;
        }
        history.push(loss.sqrt());
        if !accepted {
            break;
        }
    }
    unpack(&mut work, &p)?;
    Ok((work, iterations, loss, history))
}

/// Gradient descent; the step halves whenever a move fails to descend.
fn gradient_descent(s: &MeshState, target: &ComplexMatrix, opts: &InSituOptions) -> Result<Fit> {
    let t = s.topology();
    let n = t.n_main();
    let main = t.main_waveguides().to_vec();
    let w = t.n_waveguides();
    let evaluate = |st: &MeshState| -> Result<(f64, ComplexMatrix)> {
        let u = st.main_transfer(None)?;
        Ok(aligned_distance(&u, target))
    };

    let mut work = s.clone();
    let (mut loss, mut g) = evaluate(&work)?;
    let mut step = opts.step;
    let mut history = Vec::new();
    let mut iterations = 0;
    while loss.sqrt() >= opts.tolerance && iterations < opts.max_iterations {
        iterations += 1;
        let pairs: Vec<(Vec<Complex>, Vec<Complex>)> = (0..n)
            .map(|j| {
                let mut x = vec![ZERO; w];
                x[main[j]] = Complex::new(1.0, 0.0);
                let mut cot = vec![ZERO; w];
                for (i, &row) in main.iter().enumerate() {
                    cot[row] = g[(i, j)];
                }
                (x, cot)
            })
            .collect();
        let grad = work.phase_gradient(&pairs)?;
        loop {
            let mut trial = work.clone();
            for (p, d) in trial.phases_mut().iter_mut().zip(&grad.mzi) {
                p.theta -= step * d.theta;
                p.phi -= step * d.phi;
            }
            let ins: Vec<f64> = trial
                .input_phases()
                .iter()
                .zip(&grad.inputs)
                .map(|(p, d)| p - step * d)
                .collect();
            trial.set_input_phases(ins)?;
            let (l2, g2) = evaluate(&trial)?;
            if l2 < loss {
                work = trial;
                loss = l2;
                g = g2;
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                break;
            }
        }
        history.push(loss.sqrt());
        if step < 1e-12 {
            break;
        }
    }
    Ok((work, iterations, loss, history))
}

/// Programming time for a number of concurrent heater iterations.
pub fn t_prog(iterations: usize, transit_time: f64) -> f64 {
    iterations as f64 * transit_time
}
