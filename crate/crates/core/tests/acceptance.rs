//! End-to-end acceptance checks. Prints one line per criterion and exits
//! non-zero if a criterion fails that is not a known, characterized
//! deviation.

use std::f64::consts::PI;
use std::time::Instant;

use mzimesh::calibration::{
    averaged_argmin, interference_shift, transmission_argmin, two_stage_argmin, two_stage_transmission,
    InterferenceCondition,
};
use mzimesh::cli::datasets;
use mzimesh::config::RunConfig;
use mzimesh::energy::{e_static, e_total, efficiency_report, EnergyParams, BOKUN_REFERENCE_STATIC_FJ};
use mzimesh::mzi::{temperature_for_phase, thermal_phase_error, wrap_pi, ThermalParams};
use mzimesh::onn::{
    evaluate_accuracy, flatten_gradient, gaussian_dataset, gradient_relative_error, train, Activation, LossFn,
    OnnModel, TrainingConfig,
};
use mzimesh::programming::{monitor_theta, monitoring_plan};
use mzimesh::propagation::{MeshState, NoiseConfig};
use mzimesh::robustness::{run_sweep, SweepMetadata, SweepReport, SweepSpec};
use mzimesh::topology::{independently_accessible, structural_report};
use mzimesh::{MeshKind, MeshTopology, MziPhases};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

/// Criteria whose failure is understood: the computed value is right and
/// the reference value cannot be met.
const KNOWN: [(usize, &str); 2] = [
    (1, "Clements(8) diagonals share their crossing MZI: 13 distinct, not 14"),
    (3, "two-stage coupling gives 0.032π at -10 dB, reference 0.02π"),
];

struct Checks {
    ok: bool,
    notes: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self { ok: true, notes: Vec::new() }
    }

    fn check(&mut self, cond: bool, note: String) {
        if !cond {
            self.ok = false;
            self.notes.push(format!("MISS {note}"));
        } else {
            self.notes.push(note);
        }
    }

    fn done(self, elapsed: f64) -> Outcome {
        Outcome {
            pass: self.ok,
            detail: format!("{} [{elapsed:.2} s]", self.notes.join("; ")),
        }
    }
}

fn structural() -> Outcome {
    let t0 = Instant::now();
    let mut c = Checks::new();
    // Reck, Diamond, Clements, Bokun.
    let count = [28, 49, 28, 40];
    let depth = [13, 13, 8, 8];
    let paths = [(1, 13), (1, 13), (4, 8), (7, 8)];
    let accessible = [13, 49, 14, 40];
    for (i, kind) in MeshKind::ALL.into_iter().enumerate() {
        let r = structural_report(&MeshTopology::build(kind, 8).unwrap());
        c.check(r.mzi_count == count[i], format!("{kind} count {}", r.mzi_count));
        c.check(r.depth == depth[i], format!("{kind} depth {}", r.depth));
        c.check(
            (r.min_path, r.max_path) == paths[i],
            format!("{kind} paths {}-{}", r.min_path, r.max_path),
        );
        c.check(
            r.accessible_count == accessible[i],
            format!("{kind} accessible {} (want {})", r.accessible_count, accessible[i]),
        );
    }
    let el = t0.elapsed().as_secs_f64();
    c.check(el < 1.0, "runtime < 1 s".into());
    c.done(el)
}

fn unitarity() -> Outcome {
    let t0 = Instant::now();
    let mut c = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for kind in MeshKind::ALL {
        let mut s = MeshState::new(MeshTopology::build(kind, 8).unwrap());
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let phases = (0..s.phases().len())
                .map(|_| MziPhases::new(rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI)))
                .collect();
            s.set_phases(phases).unwrap();
            let ins = (0..s.input_phases().len()).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
            s.set_input_phases(ins).unwrap();
            worst = worst.max(s.transfer_matrix(None).unwrap().unitarity_defect().unwrap());
        }
        c.check(worst < 1e-10, format!("{kind} max defect {worst:.1e}"));
    }
    c.done(t0.elapsed().as_secs_f64())
}

/// Dense scan of a one-dimensional function, used as an independent
/// minimizer.
fn scan_argmin(f: impl Fn(f64) -> f64) -> f64 {
    let n = 400_000;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..n {
        let t = -PI + 2.0 * PI * i as f64 / n as f64;
        let v = f(t);
        if v < best.0 {
            best = (v, t);
        }
    }
    best.1
}

/// Window-averaged transmission in closed form:
/// mean over Δ of |sin(θ/2) + cos(θ/2)·√r·e^{jΔ}|².
fn averaged_closed_form(theta: f64, r: f64, d0: f64, span: f64) -> f64 {
    let (s, co) = (theta / 2.0).sin_cos();
    s * s + co * co * r + 2.0 * s * co * r.sqrt() * ((d0 + span).sin() - d0.sin()) / span
}

fn calibration() -> Outcome {
    let t0 = Instant::now();
    let mut c = Checks::new();
    let tol = 1e-10;

    let r20 = InterferenceCondition::relative(-20.0, 0.0);
    let s20 = transmission_argmin(&r20, tol);
    let want = -2.0 * 0.1f64.atan();
    c.check((s20 - want).abs() < 1e-4, format!("-20 dB shift {:.4}π", s20 / PI));
    c.check((s20.abs() / PI - 0.06).abs() < 0.01, "-20 dB within 0.01π of 0.06π".into());
    c.check((interference_shift(0.01) - want).abs() < 1e-12, "closed form".into());

    let want10 = 2.0 * 0.1f64.sqrt().atan();
    for delta in [0.0, PI] {
        let s = transmission_argmin(&InterferenceCondition::relative(-10.0, delta), tol);
        c.check(
            (s.abs() - want10).abs() < 1e-4,
            format!("-10 dB Δin={delta:.2} |shift| {:.4}π", s.abs() / PI),
        );
    }
    c.check((want10 / PI - 0.18).abs() < 0.02, "-10 dB within 0.02π of 0.18π".into());

    let mut full: f64 = 0.0;
    for (db, d0) in [(-10.0, 0.0), (-10.0, 1.3), (-3.0, 2.0), (-20.0, -0.5)] {
        let a = averaged_argmin(&InterferenceCondition::relative(db, d0), 2.0 * PI, tol).unwrap();
        full = full.max(a.abs());
    }
    c.check(full < 1e-4, format!("2π average error {full:.1e} rad"));

    for (span, reference) in [(1.6 * PI, 0.053), (2.4 * PI, 0.036)] {
        let d0 = PI - span / 2.0;
        let got = averaged_argmin(&InterferenceCondition::relative(-10.0, d0), span, tol).unwrap();
        let oracle = scan_argmin(|t| averaged_closed_form(t, 0.1, d0, span));
        c.check(
            (got - oracle).abs() < 1e-4,
            format!("span {:.1}π {:.4}π vs oracle {:.4}π", span / PI, got.abs() / PI, oracle.abs() / PI),
        );
        c.check(
            (got.abs() / PI - reference).abs() < 0.005,
            format!("span {:.1}π within 0.005π of {reference}π", span / PI),
        );
    }

    let c2 = InterferenceCondition::relative(-10.0, 0.0);
    let t1 = two_stage_argmin(1.1 * PI, &c2, tol);
    let oracle = scan_argmin(|t| two_stage_transmission(t, 1.1 * PI, &c2));
    c.check((t1 - oracle).abs() < 1e-4, "two-stage matches scan".into());
    c.check(
        (t1.abs() / PI - 0.02).abs() < 0.01,
        format!("two-stage θ1 error {:.4}π (want 0.02π ± 0.01π)", t1.abs() / PI),
    );
    c.done(t0.elapsed().as_secs_f64())
}

fn thermal() -> Outcome {
    let t0 = Instant::now();
    let mut c = Checks::new();
    let p = ThermalParams::default();
    let dphi = thermal_phase_error(2.7, &p);
    let closed = 2.0 * PI * 100e-6 / 1550e-9 * 1.8e-4 * 2.7;
    c.check((dphi - closed).abs() < 1e-12 && (dphi - 0.197).abs() < 5e-4, format!("2.7 K -> {dphi:.4} rad"));
    c.check((dphi / 0.2 - 1.0).abs() < 0.02, "within 2% of 0.2 rad".into());
    let dt = temperature_for_phase(PI, &p);
    c.check((dt - 43.06).abs() < 0.01, format!("π -> {dt:.3} K"));
    c.check((dt / 43.0 - 1.0).abs() < 0.02, "within 2% of 43 K".into());
    c.done(t0.elapsed().as_secs_f64())
}

fn energy() -> Outcome {
    let t0 = Instant::now();
    let mut c = Checks::new();
    let p = EnergyParams::default();
    let fj = 1e-15;
    let clements = e_static(MeshKind::Clements, 10, &p).unwrap();
    c.check((clements / fj - 450.0).abs() < 1e-9, format!("Clements static {:.3} fJ", clements / fj));
    let total = e_total(clements, 2e3, 440e-6).unwrap() / fj;
    c.check((total / 3750.0 - 1.0).abs() < 0.01, format!("Clements total {total:.1} fJ"));
    let ratio = e_total(BOKUN_REFERENCE_STATIC_FJ * fj, 2e3, 22e-6).unwrap() / (BOKUN_REFERENCE_STATIC_FJ * fj);
    c.check((ratio / (638.0 / 610.0) - 1.0).abs() < 0.005, format!("Bokun total/static {ratio:.4}"));
    let r = efficiency_report(10, &[2e3], &p).unwrap();
    let saving = r.headline.saving_reference;
    c.check((saving - 0.83).abs() < 0.01, format!("saving {:.2}%", 100.0 * saving));
    let bokun = e_static(MeshKind::Bokun, 10, &p).unwrap() / fj;
    c.check((bokun / 610.0 - 1.0).abs() < 0.10, format!("Bokun static {bokun:.0} fJ"));
    c.done(t0.elapsed().as_secs_f64())
}

fn monitoring() -> Outcome {
    let t0 = Instant::now();
    let mut c = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut s = MeshState::new(MeshTopology::build(MeshKind::Bokun, 8).unwrap());
    let phases: Vec<MziPhases> = (0..s.phases().len())
        .map(|_| MziPhases::new(rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI)))
        .collect();
    s.set_phases(phases.clone()).unwrap();
    let mut worst: f64 = 0.0;
    let mut monitored = 0;
    for (m, set) in phases.iter().enumerate() {
        let Some(plan) = monitoring_plan(s.topology(), m) else { continue };
        let fit = monitor_theta(&s, &plan, 64).unwrap();
        worst = worst.max(wrap_pi(fit.theta - set.theta).abs());
        monitored += 1;
    }
    c.check(monitored == 40, format!("Bokun monitored {monitored}/40"));
    c.check(worst < 0.01 * PI, format!("max θ error {worst:.1e} rad"));
    c.check(s.phases() == phases.as_slice(), "biases untouched".into());

    let t = MeshTopology::build(MeshKind::Clements, 8).unwrap();
    let acc = independently_accessible(&t);
    let unmonitorable: Vec<usize> = (0..t.mzi_count()).filter(|&m| monitoring_plan(&t, m).is_none()).collect();
    let consistent = (0..t.mzi_count()).all(|m| monitoring_plan(&t, m).is_some() == acc.contains(&m));
    c.check(
        consistent && !unmonitorable.is_empty(),
        format!("Clements {} MZIs off the diagonals unmonitorable", unmonitorable.len()),
    );
    c.done(t0.elapsed().as_secs_f64())
}

fn gradients() -> Outcome {
    let t0 = Instant::now();
    let mut c = Checks::new();
    let d = gaussian_dataset(4, 4, 2.0, 1.0, 3).unwrap();
    let idx: Vec<usize> = (0..d.len()).collect();
    for kind in MeshKind::ALL {
        let mut worst: f64 = 0.0;
        for seed in 0..3 {
            let model = OnnModel::new(kind, 4, 1, Activation::Identity, LossFn::MeanSquareError, 100 + seed).unwrap();
            let (_, g) = model.loss_and_gradient(&d, &idx).unwrap();
            let fd = model.finite_difference_gradient(&d, &idx, 1e-5).unwrap();
            worst = worst.max(gradient_relative_error(&flatten_gradient(&g), &fd));
        }
        c.check(worst < 1e-5, format!("{kind} {worst:.1e}"));
    }
    c.done(t0.elapsed().as_secs_f64())
}

fn gaussian_onn() -> Outcome {
    let t0 = Instant::now();
    let mut c = Checks::new();
    let train_set = gaussian_dataset(10, 60, 4.0, 1.0, 11).unwrap();
    let val = gaussian_dataset(10, 20, 4.0, 1.0, 12).unwrap();
    for kind in MeshKind::ALL {
        let model = OnnModel::new(kind, 10, 1, Activation::Identity, LossFn::MeanSquareError, 5).unwrap();
        let (model, _) = train(&model, &train_set, &TrainingConfig::default()).unwrap();
        let acc = evaluate_accuracy(&model, &val, &NoiseConfig::default(), 0.0, 1).unwrap();
        c.check(acc >= 0.97, format!("{kind} {:.1}%", 100.0 * acc));
    }
    let el = t0.elapsed().as_secs_f64();
    c.check(el < 120.0, "runtime < 2 min".into());
    c.done(el)
}

/// Sweep reports for seeds 1..=5, each holding one report per topology in
/// `MeshKind::ALL` order, plus the trained models and validation sets.
struct RobustnessRuns {
    reports: Vec<Vec<SweepReport>>,
    models: Vec<(OnnModel, mzimesh::onn::Dataset)>,
}

fn robustness_runs() -> RobustnessRuns {
    let mut reports = Vec::new();
    let mut models = Vec::new();
    for seed in 1..=5u64 {
        let mut row = Vec::new();
        for kind in MeshKind::ALL {
            let mut cfg = RunConfig {
                seed,
                ..Default::default()
            };
            cfg.mesh.kind = kind;
            cfg.mesh.n = 10;
            let (train_set, val, name) = datasets(&cfg).unwrap();
            let t = &cfg.training;
            let model = OnnModel::new(kind, 10, t.layers, t.activation, t.loss, seed).unwrap();
            let (model, _) = train(&model, &train_set, &t.config(seed)).unwrap();
            let spec = SweepSpec {
                seed,
                ..SweepSpec::sigma_loss()
            };
            let meta = SweepMetadata {
                topology: Some(kind),
                n: 10,
                layers: t.layers,
                dataset: name,
                samples: val.len(),
                seed,
                decided_grid: true,
            };
            row.push(run_sweep(&model, &val, &spec, meta).unwrap());
            if seed == 1 && kind == MeshKind::Clements {
                models.push((model, val));
            }
        }
        reports.push(row);
    }
    RobustnessRuns { reports, models }
}

fn orderings(runs: &RobustnessRuns, elapsed: f64) -> Outcome {
    let mut c = Checks::new();
    let mut agree = 0;
    let mut origin_min: f64 = 1.0;
    for (i, row) in runs.reports.iter().enumerate() {
        let fom: Vec<f64> = row.iter().map(|r| r.fom_value).collect();
        for r in row {
            origin_min = origin_min.min(r.origin_accuracy().unwrap());
        }
        // ALL order: Reck, Diamond, Clements, Bokun.
        let weak = fom[0].max(fom[1]);
        let ok = fom[2] >= 2.0 * weak && fom[3] >= 2.0 * weak;
        if ok {
            agree += 1;
        }
        c.notes.push(format!(
            "seed {}: R {:.3} D {:.3} C {:.3} B {:.3}{}",
            i + 1,
            fom[0],
            fom[1],
            fom[2],
            fom[3],
            if ok { "" } else { " (order broken)" }
        ));
    }
    c.check(agree >= 3, format!("{agree}/5 seeds agree"));
    c.check(origin_min >= 0.75, format!("min origin accuracy {:.1}%", 100.0 * origin_min));
    c.done(elapsed)
}

fn determinism(runs: &RobustnessRuns) -> Outcome {
    let t0 = Instant::now();
    let mut c = Checks::new();
    let (model, val) = &runs.models[0];
    let parallel = runs.reports[0][2].to_csv();
    let serial_spec = SweepSpec {
        seed: 1,
        parallel: false,
        ..SweepSpec::sigma_loss()
    };
    let meta = runs.reports[0][2].metadata.clone();
    let serial = run_sweep(model, val, &serial_spec, meta.clone()).unwrap().to_csv();
    let again = run_sweep(model, val, &SweepSpec { parallel: true, ..serial_spec }, meta).unwrap().to_csv();
    c.check(serial == parallel, "serial == parallel".into());
    c.check(again == parallel, "rerun identical".into());
    c.check(serial.lines().count() == 1 + 21 * 21, format!("{} cells", serial.lines().count() - 1));
    c.done(t0.elapsed().as_secs_f64())
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (1, "structure", structural()),
        (2, "unitarity", unitarity()),
        (3, "calibration errors", calibration()),
        (4, "thermal", thermal()),
        (5, "energy", energy()),
        (6, "monitoring round-trip", monitoring()),
        (7, "gradient correctness", gradients()),
        (8, "gaussian ONN", gaussian_onn()),
    ];
    let t0 = Instant::now();
    let runs = robustness_runs();
    results.push((9, "robustness orderings", orderings(&runs, t0.elapsed().as_secs_f64())));
    results.push((10, "determinism", determinism(&runs)));

    let mut unexpected = 0;
    for (id, name, o) in &results {
        let known = KNOWN.iter().find(|(k, _)| k == id).map(|(_, why)| *why);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, Some(_)) => "FAIL (known deviation)",
            (false, None) => {
                unexpected += 1;
                "FAIL"
            }
        };
        println!("criterion {id} {name}: {tag}: {}", o.detail);
        if let (false, Some(why)) = (o.pass, known) {
            println!("    deviation: {why}");
        }
    }
    let passed = results.iter().filter(|(_, _, o)| o.pass).count();
    println!("acceptance: {passed}/{} criteria pass, {unexpected} unexpected failures", results.len());
    if unexpected > 0 {
        std::process::exit(1);
    }
}
