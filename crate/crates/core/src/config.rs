//! Strict TOML run configuration. Unknown keys are rejected; every section
//! has defaults so a partial file (or none at all) is valid.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::energy::EnergyParams;
use crate::error::{MeshError, Result};
use crate::onn::{Activation, GradientMode, LossFn, TrainingConfig};
use crate::robustness::{Axis, SweepMode, SweepSpec};
use crate::topology::MeshKind;

pub const OUT_DIR_ENV: &str = "MZIMESH_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "mzimesh-out";
pub const RESOLVED_CONFIG_FILE: &str = "resolved-config.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSection {
    pub kind: MeshKind,
    pub n: usize,
}

impl Default for MeshSection {
    fn default() -> Self {
        Self {
            kind: MeshKind::Bokun,
            n: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationSection {
    pub v_pi: f64,
    pub resolution_v: f64,
    pub sweep_span_v: f64,
    /// Average steps without a dark input over the relative input phase.
    pub averaging: bool,
    /// Span of that average in units of π.
    pub averaging_span_pi: f64,
    pub quadrature_points: usize,
    /// Hidden heater offsets are drawn uniformly in ±offset_range_pi·π.
    pub offset_range_pi: f64,
    pub stray_ratio_db: Option<f64>,
    pub stray_delta: f64,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self {
            v_pi: 2.0,
            resolution_v: 0.01,
            sweep_span_v: 4.0,
            averaging: true,
            averaging_span_pi: 2.0,
            quadrature_points: 720,
            offset_range_pi: 0.45,
            stray_ratio_db: None,
            stray_delta: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Gaussian,
    Mnist,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub kind: DatasetKind,
    pub train_per_class: usize,
    pub validation_per_class: usize,
    pub separation: f64,
    pub spread: f64,
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    /// Cap on validation samples taken from the test split.
    pub validation_samples: usize,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            kind: DatasetKind::Gaussian,
            train_per_class: 60,
            validation_per_class: 20,
            separation: 1.2,
            spread: 1.0,
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
            validation_samples: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub layers: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub gradient_mode: GradientMode,
    pub activation: Activation,
    pub loss: LossFn,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainingConfig::default();
        Self {
            layers: 2,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            gradient_mode: t.gradient_mode,
            activation: Activation::default(),
            loss: LossFn::default(),
        }
    }
}

impl TrainingSection {
    pub fn config(&self, seed: u64) -> TrainingConfig {
        TrainingConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed,
            gradient_mode: self.gradient_mode,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Trained model to sweep.
    pub model: Option<PathBuf>,
    pub mode: SweepMode,
    pub axis1: Axis,
    pub axis2: Axis,
    pub trials: usize,
    pub seed: u64,
    pub threshold: f64,
    pub parallel: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self::from_spec(None, &SweepSpec::default())
    }
}

impl SweepSection {
    pub fn from_spec(model: Option<PathBuf>, s: &SweepSpec) -> Self {
        Self {
            model,
            mode: s.mode,
            axis1: s.axis1,
            axis2: s.axis2,
            trials: s.trials,
            seed: s.seed,
            threshold: s.threshold,
            parallel: s.parallel,
        }
    }

    pub fn spec(&self) -> SweepSpec {
        SweepSpec {
            mode: self.mode,
            axis1: self.axis1,
            axis2: self.axis2,
            trials: self.trials,
            seed: self.seed,
            threshold: self.threshold,
            parallel: self.parallel,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergySection {
    pub n: usize,
    pub f_w_hz: Vec<f64>,
    pub p_pi: f64,
    pub vr: f64,
    pub transit_time: f64,
    pub in_situ_iterations: usize,
    pub ex_situ_iterations: usize,
}

impl Default for EnergySection {
    fn default() -> Self {
        let p = EnergyParams::default();
        Self {
            n: 10,
            f_w_hz: vec![0.0, 1e2, 2e2, 5e2, 1e3, 2e3],
            p_pi: p.p_pi,
            vr: p.vr,
            transit_time: p.transit_time,
            in_situ_iterations: p.in_situ_iterations,
            ex_situ_iterations: p.ex_situ_iterations,
        }
    }
}

impl EnergySection {
    pub fn params(&self) -> EnergyParams {
        EnergyParams {
            p_pi: self.p_pi,
            vr: self.vr,
            transit_time: self.transit_time,
            in_situ_iterations: self.in_situ_iterations,
            ex_situ_iterations: self.ex_situ_iterations,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProgramMethod {
    InSitu,
    ExSitu,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProgrammingSection {
    pub crosstalk: f64,
    /// MZI to monitor; every MZI when absent.
    pub mzi: Option<usize>,
    pub sweep_points: usize,
    /// Defaults to ex-situ where every MZI is monitorable, in-situ otherwise.
    pub method: Option<ProgramMethod>,
    pub iterations_per_mzi: usize,
    pub max_iterations: usize,
    /// Defaults to 0.01 rad (ex-situ) or 1e-3 aligned distance (in-situ).
    pub tolerance: Option<f64>,
}

impl Default for ProgrammingSection {
    fn default() -> Self {
        Self {
            crosstalk: 0.0,
            mzi: None,
            sweep_points: 64,
            method: None,
            iterations_per_mzi: 10,
            max_iterations: 200,
            tolerance: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub mesh: MeshSection,
    pub calibration: CalibrationSection,
    pub dataset: DatasetSection,
    pub training: TrainingSection,
    pub sweep: SweepSection,
    pub energy: EnergySection,
    pub programming: ProgrammingSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output_dir: None,
            mesh: MeshSection::default(),
            calibration: CalibrationSection::default(),
            dataset: DatasetSection::default(),
            training: TrainingSection::default(),
            sweep: SweepSection::default(),
            energy: EnergySection::default(),
            programming: ProgrammingSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| MeshError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| MeshError::io(path, e))?;
        toml::from_str(&text).map_err(|e| MeshError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| MeshError::Config(e.to_string()))
    }

    /// Explicit setting, else the environment variable, else the default.
    pub fn resolved_output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    pub fn validate(&self) -> Result<()> {
        if self.training.layers == 0 {
            return Err(MeshError::Config("training.layers must be >= 1".into()));
        }
        self.sweep.spec().validate().map_err(|e| MeshError::Config(format!("sweep: {e}")))?;
        self.energy.params().validate().map_err(|e| MeshError::Config(format!("energy: {e}")))?;
        if !(0.0..1.0).contains(&self.programming.crosstalk) {
            return Err(MeshError::Config("programming.crosstalk must be in [0, 1)".into()));
        }
        if !(self.calibration.offset_range_pi >= 0.0 && self.calibration.offset_range_pi < 0.5) {
            return Err(MeshError::Config("calibration.offset_range_pi must be in [0, 0.5)".into()));
        }
        Ok(())
    }
}
