//! The `mzimesh` command line: argument parsing, config resolution and one
//! function per subcommand. Every command writes its artifacts plus a
//! `resolved-config.toml` into the output directory and returns the text
//! meant for stdout.

use std::f64::consts::PI;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use serde::Serialize;

use crate::calibration::{calibration_plan, errors_to_csv, simulate_calibration, CalibrationOptions, StepClass, StrayLight};
use crate::config::{DatasetKind, ProgramMethod, RunConfig, RESOLVED_CONFIG_FILE};
use crate::energy::efficiency_report;
use crate::error::{MeshError, Result};
use crate::linalg::haar_unitary;
use crate::mzi::{wrap_pi, MziPhases, VoltagePhaseModel};
use crate::onn::mnist::{mnist_apply, mnist_reduced};
use crate::onn::{evaluate_accuracy, gaussian_dataset, train, Dataset, GradientMode, OnnModel};
use crate::programming::{
    monitor_theta, monitoring_plan, program_ex_situ, program_in_situ, ExSituOptions, InSituOptions, ProgrammingResult,
};
use crate::propagation::{CrosstalkModel, MeshState, NoiseConfig};
use crate::rng;
use crate::robustness::{run_sweep, SweepMetadata, SweepMode};
use crate::topology::{independently_accessible, structural_report, MeshKind, MeshTopology};

#[derive(Debug, Parser)]
#[command(name = "mzimesh", version, about = "Mach-Zehnder mesh simulator")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: $MZIMESH_OUT_DIR, then ./mzimesh-out).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    #[arg(long)]
    pub kind: Option<MeshKind>,
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Structural report of one topology.
    MeshInfo(MeshArgs),
    /// Calibration plan and simulated per-MZI offset errors.
    Calibrate {
        #[command(flatten)]
        mesh: MeshArgs,
        /// Stray light in the dark input, dB relative to the lit one.
        #[arg(long, allow_hyphen_values = true)]
        stray_db: Option<f64>,
        /// Measure steps without a dark input without phase averaging.
        #[arg(long)]
        no_averaging: bool,
    },
    /// Train an optical neural network and save it as JSON.
    Train {
        #[command(flatten)]
        mesh: MeshArgs,
        #[arg(long)]
        layers: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long, value_parser = parse_dataset)]
        dataset: Option<DatasetKind>,
        #[arg(long, value_parser = parse_gradient_mode)]
        gradient_mode: Option<GradientMode>,
    },
    /// Noise and loss sweep of a trained model.
    Sweep {
        /// Model JSON written by `train`.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_parser = parse_sweep_mode)]
        mode: Option<SweepMode>,
        #[arg(long)]
        trials: Option<usize>,
        /// Grid points along each axis.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Evaluate cells one at a time.
        #[arg(long)]
        serial: bool,
    },
    /// Energy per operation for every topology.
    Energy {
        #[arg(long)]
        n: Option<usize>,
        /// Heater power for a π shift, W.
        #[arg(long)]
        p_pi: Option<f64>,
        /// Comma-separated update rates, Hz.
        #[arg(long, value_delimiter = ',')]
        f_w: Option<Vec<f64>>,
    },
    /// Recover each MZI's θ on a randomly programmed mesh by monitoring.
    Monitor {
        #[command(flatten)]
        mesh: MeshArgs,
        /// Monitor a single MZI.
        #[arg(long)]
        mzi: Option<usize>,
        #[arg(long)]
        crosstalk: Option<f64>,
    },
    /// Program a mesh to a random target, ex-situ or in-situ.
    Program {
        #[command(flatten)]
        mesh: MeshArgs,
        #[arg(long, value_parser = parse_program_method)]
        method: Option<ProgramMethod>,
        #[arg(long)]
        crosstalk: Option<f64>,
    },
}

fn parse_dataset(s: &str) -> std::result::Result<DatasetKind, String> {
    match s {
        "gaussian" => Ok(DatasetKind::Gaussian),
        "mnist" => Ok(DatasetKind::Mnist),
        _ => Err("expected gaussian or mnist".into()),
    }
}

fn parse_gradient_mode(s: &str) -> std::result::Result<GradientMode, String> {
    match s {
        "analytic" => Ok(GradientMode::Analytic),
        "finite-difference" => Ok(GradientMode::FiniteDifference),
        _ => Err("expected analytic or finite-difference".into()),
    }
}

fn parse_sweep_mode(s: &str) -> std::result::Result<SweepMode, String> {
    match s {
        "sigma-loss" => Ok(SweepMode::SigmaLoss),
        "theta-phi" => Ok(SweepMode::ThetaPhi),
        _ => Err("expected sigma-loss or theta-phi".into()),
    }
}

fn parse_program_method(s: &str) -> std::result::Result<ProgramMethod, String> {
    match s {
        "in-situ" => Ok(ProgramMethod::InSitu),
        "ex-situ" => Ok(ProgramMethod::ExSitu),
        _ => Err("expected in-situ or ex-situ".into()),
    }
}

/// 2 for anything the user can fix in the invocation or config, 3 for
/// failures while running.
pub fn exit_code(e: &MeshError) -> i32 {
    match e {
        MeshError::Config(_) | MeshError::InvalidArgument(_) | MeshError::UnsupportedSize { .. } => 2,
        _ => 3,
    }
}

fn apply_mesh(cfg: &mut RunConfig, m: &MeshArgs) {
    if let Some(k) = m.kind {
        cfg.mesh.kind = k;
    }
    if let Some(n) = m.n {
        cfg.mesh.n = n;
    }
}

/// Loads the config file (if any) and applies the flags on top.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &cli.out_dir {
        cfg.output_dir = Some(d.clone());
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
        cfg.sweep.seed = s;
    }
    match &cli.command {
        Command::MeshInfo(m) => apply_mesh(&mut cfg, m),
        Command::Calibrate { mesh, stray_db, no_averaging } => {
            apply_mesh(&mut cfg, mesh);
            if stray_db.is_some() {
                cfg.calibration.stray_ratio_db = *stray_db;
            }
            if *no_averaging {
                cfg.calibration.averaging = false;
            }
        }
        Command::Train { mesh, layers, epochs, learning_rate, dataset, gradient_mode } => {
            apply_mesh(&mut cfg, mesh);
            let t = &mut cfg.training;
            t.layers = layers.unwrap_or(t.layers);
            t.epochs = epochs.unwrap_or(t.epochs);
            t.learning_rate = learning_rate.unwrap_or(t.learning_rate);
            t.gradient_mode = gradient_mode.unwrap_or(t.gradient_mode);
            cfg.dataset.kind = dataset.unwrap_or(cfg.dataset.kind);
        }
        Command::Sweep { model, mode, trials, steps, threshold, serial } => {
            let s = &mut cfg.sweep;
            if model.is_some() {
                s.model = model.clone();
            }
            if let Some(m) = mode {
                if *m != s.mode {
                    // Switching mode without a config keeps that mode's axes.
                    let d = match m {
                        SweepMode::SigmaLoss => crate::robustness::SweepSpec::sigma_loss(),
                        SweepMode::ThetaPhi => crate::robustness::SweepSpec::theta_phi(),
                    };
                    s.mode = *m;
                    s.axis2 = d.axis2;
                }
            }
            s.trials = trials.unwrap_or(s.trials);
            if let Some(k) = steps {
                s.axis1.steps = *k;
                s.axis2.steps = *k;
            }
            s.threshold = threshold.unwrap_or(s.threshold);
            if *serial {
                s.parallel = false;
            }
        }
        Command::Energy { n, p_pi, f_w } => {
            let e = &mut cfg.energy;
            e.n = n.unwrap_or(e.n);
            e.p_pi = p_pi.unwrap_or(e.p_pi);
            if let Some(f) = f_w {
                e.f_w_hz = f.clone();
            }
        }
        Command::Monitor { mesh, mzi, crosstalk } => {
            apply_mesh(&mut cfg, mesh);
            if mzi.is_some() {
                cfg.programming.mzi = *mzi;
            }
            cfg.programming.crosstalk = crosstalk.unwrap_or(cfg.programming.crosstalk);
        }
        Command::Program { mesh, method, crosstalk } => {
            apply_mesh(&mut cfg, mesh);
            if method.is_some() {
                cfg.programming.method = *method;
            }
            cfg.programming.crosstalk = crosstalk.unwrap_or(cfg.programming.crosstalk);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let p = dir.join(name);
    fs::write(&p, contents).map_err(|e| MeshError::io(p, e))
}

/// Creates the output directory and records the resolved configuration.
pub fn prepare_output(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.resolved_output_dir();
    fs::create_dir_all(&dir).map_err(|e| MeshError::io(&dir, e))?;
    let mut resolved = cfg.clone();
    resolved.output_dir = Some(dir.clone());
    write(&dir, RESOLVED_CONFIG_FILE, &resolved.to_toml()?)?;
    Ok(dir)
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

pub fn cmd_mesh_info(cfg: &RunConfig, out: &Path) -> Result<String> {
    let t = MeshTopology::build(cfg.mesh.kind, cfg.mesh.n)?;
    let json = to_json(&structural_report(&t))?;
    write(out, "mesh-info.json", &json)?;
    Ok(json)
}

#[derive(Serialize)]
struct CalibrationSummary {
    kind: MeshKind,
    n: usize,
    steps: usize,
    exact: usize,
    null_input: usize,
    averaging_required: usize,
    max_error_rad: f64,
    max_error_pi: f64,
}

pub fn cmd_calibrate(cfg: &RunConfig, out: &Path) -> Result<String> {
    let t = MeshTopology::build(cfg.mesh.kind, cfg.mesh.n)?;
    let plan = calibration_plan(&t);
    let c = &cfg.calibration;
    let mut r = rng::stream(cfg.seed, &[0xca1b]);
    let range = c.offset_range_pi * PI;
    let offsets: Vec<f64> = (0..t.mzi_count())
        .map(|_| if range > 0.0 { r.random_range(-range..range) } else { 0.0 })
        .collect();
    let opts = CalibrationOptions {
        model: VoltagePhaseModel {
            v_pi: c.v_pi,
            resolution: c.resolution_v,
        },
        sweep_span_v: c.sweep_span_v,
        averaging_span: c.averaging.then_some(c.averaging_span_pi * PI),
        quadrature_points: c.quadrature_points,
        stray: c.stray_ratio_db.map(|ratio_db| StrayLight {
            ratio_db,
            delta: c.stray_delta,
        }),
    };
    let report = simulate_calibration(&t, &plan, &offsets, &opts)?;
    write(out, "calibration-plan.json", &to_json(&plan)?)?;
    write(out, "calibration-errors.csv", &errors_to_csv(&report))?;
    to_json(&CalibrationSummary {
        kind: t.kind(),
        n: t.n_main(),
        steps: plan.steps.len(),
        exact: plan.count(StepClass::Exact),
        null_input: plan.count(StepClass::NullInput),
        averaging_required: plan.count(StepClass::AveragingRequired),
        max_error_rad: report.max_error,
        max_error_pi: report.max_error / PI,
    })
}

/// Training and validation sets described by the config, plus a label
/// for reports.
pub fn datasets(cfg: &RunConfig) -> Result<(Dataset, Dataset, String)> {
    let d = &cfg.dataset;
    let n = cfg.mesh.n;
    match d.kind {
        DatasetKind::Gaussian => {
            use rand::RngCore;
            let seed_train = rng::stream(cfg.seed, &[0xda7a, 0]).next_u64();
            let seed_val = rng::stream(cfg.seed, &[0xda7a, 1]).next_u64();
            let train = gaussian_dataset(n, d.train_per_class, d.separation, d.spread, seed_train)?;
            let val = gaussian_dataset(n, d.validation_per_class, d.separation, d.spread, seed_val)?;
            Ok((train, val, format!("gaussian(sep={}, spread={})", d.separation, d.spread)))
        }
        DatasetKind::Mnist => {
            let need = |p: &Option<PathBuf>, key: &str| {
                p.clone().ok_or_else(|| MeshError::Config(format!("dataset.{key} is required for mnist")))
            };
            if n < 10 {
                return Err(MeshError::Config("mnist needs mesh.n >= 10".into()));
            }
            let (train, reducer) = mnist_reduced(&need(&d.train_images, "train_images")?, &need(&d.train_labels, "train_labels")?, n)?;
            let val = mnist_apply(&need(&d.test_images, "test_images")?, &need(&d.test_labels, "test_labels")?, &reducer)?;
            let train = train.take(d.train_per_class * train.n_classes);
            let val = val.take(d.validation_samples);
            Ok((train, val, format!("mnist-pca{n}")))
        }
    }
}

#[derive(Serialize)]
struct TrainSummary {
    kind: MeshKind,
    n: usize,
    layers: usize,
    dataset: String,
    train_samples: usize,
    validation_samples: usize,
    final_loss: Option<f64>,
    train_accuracy: f64,
    validation_accuracy: f64,
    model: PathBuf,
}

pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<String> {
    let (train_set, val, name) = datasets(cfg)?;
    let t = &cfg.training;
    let model = OnnModel::new(cfg.mesh.kind, cfg.mesh.n, t.layers, t.activation, t.loss, cfg.seed)?;
    let (model, curve) = train(&model, &train_set, &t.config(cfg.seed))?;
    let model_path = out.join("model.json");
    model.save(&model_path)?;
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in curve.iter().enumerate() {
        csv.push_str(&format!("{},{l}\n", i + 1));
    }
    write(out, "training-curve.csv", &csv)?;
    let silent = NoiseConfig::default();
    let summary = to_json(&TrainSummary {
        kind: cfg.mesh.kind,
        n: cfg.mesh.n,
        layers: t.layers,
        dataset: name,
        train_samples: train_set.len(),
        validation_samples: val.len(),
        final_loss: curve.last().copied(),
        train_accuracy: evaluate_accuracy(&model, &train_set, &silent, 0.0, 1)?,
        validation_accuracy: evaluate_accuracy(&model, &val, &silent, 0.0, 1)?,
        model: model_path,
    })?;
    write(out, "train-summary.json", &summary)?;
    Ok(summary)
}

pub fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<String> {
    let path = cfg
        .sweep
        .model
        .as_ref()
        .ok_or_else(|| MeshError::Config("sweep needs a trained model (--model or sweep.model)".into()))?;
    let model = OnnModel::load(path)?;
    let mut data_cfg = cfg.clone();
    data_cfg.mesh.n = model.n_features();
    let (_, val, name) = datasets(&data_cfg)?;
    let metadata = SweepMetadata {
        topology: Some(model.kind()),
        n: model.n_features(),
        layers: model.layers().len(),
        dataset: name,
        samples: val.len(),
        seed: cfg.sweep.seed,
        decided_grid: true,
    };
    let report = run_sweep(&model, &val, &cfg.sweep.spec(), metadata)?;
    write(out, "sweep.csv", &report.to_csv())?;
    write(out, "sweep.svg", &report.to_svg())?;
    let summary = report.summary_json()? + "\n";
    write(out, "sweep-summary.json", &summary)?;
    Ok(summary)
}

pub fn cmd_energy(cfg: &RunConfig, out: &Path) -> Result<String> {
    let r = efficiency_report(cfg.energy.n, &cfg.energy.f_w_hz, &cfg.energy.params())?;
    write(out, "energy.csv", &r.to_csv())?;
    write(out, "energy.json", &to_json(&r)?)?;
    let mut s = format!("{:<10} {:>10} {:>14} {:>14}\n", "topology", "f_w (Hz)", "E_static fJ", "E_total fJ");
    for row in &r.rows {
        s.push_str(&format!(
            "{:<10} {:>10} {:>14.1} {:>14.1}\n",
            row.topology.name(),
            row.f_w_hz,
            row.e_static_fj,
            row.e_total_fj
        ));
    }
    let h = &r.headline;
    s.push_str(&format!(
        "saving at {} Hz: {:.2}% (counted), {:.2}% (Bokun static {} fJ)\n",
        h.f_w_hz,
        100.0 * h.saving,
        100.0 * h.saving_reference,
        h.bokun_reference_static_fj
    ));
    Ok(s)
}

fn random_phases(count: usize, seed: u64, key: u64) -> Vec<MziPhases> {
    let mut r = rng::stream(seed, &[key]);
    (0..count)
        .map(|_| MziPhases::new(r.random_range(0.0..2.0 * PI), r.random_range(0.0..2.0 * PI)))
        .collect()
}

fn programmed_state(cfg: &RunConfig, key: u64) -> Result<MeshState> {
    let t = MeshTopology::build(cfg.mesh.kind, cfg.mesh.n)?;
    let count = t.mzi_count();
    let mut s = MeshState::new(t);
    s.set_phases(random_phases(count, cfg.seed, key))?;
    s.set_crosstalk(CrosstalkModel::new(cfg.programming.crosstalk)?)?;
    Ok(s)
}

pub fn cmd_monitor(cfg: &RunConfig, out: &Path) -> Result<String> {
    let s = programmed_state(cfg, 0x3017)?;
    let t = s.topology();
    let ids: Vec<usize> = match cfg.programming.mzi {
        Some(m) if m >= t.mzi_count() => {
            return Err(MeshError::InvalidArgument(format!("mesh has {} MZIs, no MZI {m}", t.mzi_count())));
        }
        Some(m) => {
            if monitoring_plan(t, m).is_none() {
                return Err(MeshError::NotAccessible(m));
            }
            vec![m]
        }
        None => (0..t.mzi_count()).collect(),
    };
    let eff = s.effective_phases();
    let mut csv = String::from("mzi_id,accessible,bias_theta,effective_theta,monitored_theta,abs_error\n");
    let mut text = String::new();
    let mut worst: f64 = 0.0;
    let mut inaccessible = 0;
    for &m in &ids {
        let bias = wrap_pi(s.phases()[m].theta);
        let effective = wrap_pi(eff[m].theta);
        match monitoring_plan(t, m) {
            None => {
                inaccessible += 1;
                csv.push_str(&format!("{m},false,{bias:.12},{effective:.12},,\n"));
                text.push_str(&format!("MZI {m}: not independently accessible\n"));
            }
            Some(plan) => {
                let fit = monitor_theta(&s, &plan, cfg.programming.sweep_points)?;
                let err = wrap_pi(fit.theta - effective).abs();
                worst = worst.max(err);
                csv.push_str(&format!("{m},true,{bias:.12},{effective:.12},{:.12},{err:.3e}\n", fit.theta));
                text.push_str(&format!(
                    "MZI {m}: set {effective:+.6} rad, monitored {:+.6} rad via {} -> {}\n",
                    fit.theta, plan.light_input_label, plan.detector_label
                ));
            }
        }
    }
    write(out, "monitor.csv", &csv)?;
    text.push_str(&format!(
        "{} monitored, {inaccessible} not independently accessible, max error {worst:.3e} rad\n",
        ids.len() - inaccessible
    ));
    Ok(text)
}

#[derive(Serialize)]
struct ProgramOutput {
    kind: MeshKind,
    n: usize,
    method: ProgramMethod,
    result: ProgrammingResult,
}

pub fn cmd_program(cfg: &RunConfig, out: &Path) -> Result<String> {
    let s = programmed_state(cfg, 0x9a0c)?;
    let t = s.topology();
    let all_monitorable = independently_accessible(t).len() == t.mzi_count();
    let method = cfg.programming.method.unwrap_or(if all_monitorable {
        ProgramMethod::ExSitu
    } else {
        ProgramMethod::InSitu
    });
    let p = &cfg.programming;
    let result = match method {
        ProgramMethod::ExSitu => {
            let target = random_phases(t.mzi_count(), cfg.seed, 0x7a96);
            let d = ExSituOptions::default();
            let opts = ExSituOptions {
                iterations_per_mzi: p.iterations_per_mzi,
                transit_time: cfg.energy.transit_time,
                sweep_points: p.sweep_points,
                tolerance: p.tolerance.unwrap_or(d.tolerance),
            };
            program_ex_situ(&s, &target, &opts)?
        }
        ProgramMethod::InSitu => {
            let target = haar_unitary(t.n_main(), &mut rng::stream(cfg.seed, &[0x7a96]));
            let d = InSituOptions::default();
            let opts = InSituOptions {
                max_iterations: p.max_iterations,
                tolerance: p.tolerance.unwrap_or(d.tolerance),
                transit_time: cfg.energy.transit_time,
                ..d
            };
            program_in_situ(&s, &target, &opts)?
        }
    };
    let text = format!(
        "{method:?} on {} {}: residual {:.3e} after {} iterations ({}), t_prog {:.1} us\n",
        t.kind(),
        t.n_main(),
        result.residual,
        result.iterations,
        if result.converged { "converged" } else { "not converged" },
        result.t_prog_seconds * 1e6
    );
    write(
        out,
        "program.json",
        &to_json(&ProgramOutput {
            kind: t.kind(),
            n: t.n_main(),
            method,
            result,
        })?,
    )?;
    Ok(text)
}

pub fn run(cli: &Cli) -> Result<String> {
    let cfg = resolve(cli)?;
    let out = prepare_output(&cfg)?;
    match cli.command {
        Command::MeshInfo(_) => cmd_mesh_info(&cfg, &out),
        Command::Calibrate { .. } => cmd_calibrate(&cfg, &out),
        Command::Train { .. } => cmd_train(&cfg, &out),
        Command::Sweep { .. } => cmd_sweep(&cfg, &out),
        Command::Energy { .. } => cmd_energy(&cfg, &out),
        Command::Monitor { .. } => cmd_monitor(&cfg, &out),
        Command::Program { .. } => cmd_program(&cfg, &out),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("mzimesh").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        fs::write(&cfg, "seed = 5\n[mesh]\nkind = \"reck\"\nn = 6\n").unwrap();
        let c = resolve(&parse(&["mesh-info", "--config", cfg.to_str().unwrap(), "--n", "4"])).unwrap();
        assert_eq!(c.mesh.kind, MeshKind::Reck);
        assert_eq!(c.mesh.n, 4);
        assert_eq!(c.seed, 5);
    }

    #[test]
    fn sweep_flags() {
        let c = resolve(&parse(&["sweep", "--mode", "theta-phi", "--steps", "3", "--serial", "--seed", "9"])).unwrap();
        assert_eq!(c.sweep.mode, SweepMode::ThetaPhi);
        assert_eq!(c.sweep.axis2.max, 0.5);
        assert_eq!((c.sweep.axis1.steps, c.sweep.axis2.steps), (3, 3));
        assert!(!c.sweep.parallel);
        assert_eq!(c.sweep.seed, 9);
    }

    #[test]
    fn error_codes() {
        assert_eq!(exit_code(&MeshError::Config("x".into())), 2);
        assert_eq!(exit_code(&MeshError::UnsupportedSize { kind: "bokun", n: 7, reason: "odd" }), 2);
        assert_eq!(exit_code(&MeshError::NotAccessible(9)), 3);
        assert_eq!(exit_code(&MeshError::Numerical("x".into())), 3);
    }

    #[test]
    fn bad_values_are_config_errors() {
        let c = resolve(&parse(&["sweep", "--trials", "0"]));
        assert!(matches!(c, Err(MeshError::Config(_))));
        assert!(Cli::try_parse_from(["mzimesh", "mesh-info", "--kind", "hexagon"]).is_err());
    }
}
