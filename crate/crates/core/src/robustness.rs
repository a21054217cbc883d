//! Accuracy surfaces over phase noise and insertion loss, and the area of
//! the region that keeps a target accuracy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MeshError, Result};
use crate::onn::{evaluate_trials, Dataset, OnnModel};
use crate::propagation::NoiseConfig;
use crate::rng;
use crate::svg::Heatmap;
use crate::topology::MeshKind;

pub const DEFAULT_THRESHOLD: f64 = 0.75;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// σθ along the first axis, σφ along the second, no loss.
    ThetaPhi,
    /// σθ = σφ along the first axis, per-MZI loss in dB along the second.
    SigmaLoss,
}

impl SweepMode {
    pub fn units(&self) -> &'static str {
        match self {
            SweepMode::ThetaPhi => "rad^2",
            SweepMode::SigmaLoss => "dB*rad",
        }
    }

    fn labels(&self) -> (&'static str, &'static str) {
        match self {
            SweepMode::ThetaPhi => ("sigma_theta (rad)", "sigma_phi (rad)"),
            SweepMode::SigmaLoss => ("sigma (rad)", "loss (dB/MZI)"),
        }
    }
}

/// `steps` equally spaced points from `min` to `max` inclusive. Each point
/// stands for a cell of width (max − min)/steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, steps: usize) -> Result<Self> {
        let a = Self { min, max, steps };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min >= 0.0 && self.max >= self.min && self.max.is_finite()) || self.steps == 0 {
            return Err(MeshError::InvalidArgument(format!(
                "axis {}..{} in {} steps: need 0 <= min <= max and steps >= 1",
                self.min, self.max, self.steps
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let d = (self.max - self.min) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.min + d * i as f64).collect()
    }

    pub fn cell_width(&self) -> f64 {
        (self.max - self.min) / self.steps as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub mode: SweepMode,
    pub axis1: Axis,
    pub axis2: Axis,
    pub trials: usize,
    pub seed: u64,
    pub threshold: f64,
    /// Evaluate cells concurrently. Results do not depend on it.
    pub parallel: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self::sigma_loss()
    }
}

impl SweepSpec {
    pub fn theta_phi() -> Self {
        Self {
            mode: SweepMode::ThetaPhi,
            axis1: Axis { min: 0.0, max: 0.5, steps: 21 },
            axis2: Axis { min: 0.0, max: 0.5, steps: 21 },
            trials: 20,
            seed: 1,
            threshold: DEFAULT_THRESHOLD,
            parallel: true,
        }
    }

    pub fn sigma_loss() -> Self {
        Self {
            mode: SweepMode::SigmaLoss,
            axis2: Axis { min: 0.0, max: 1.0, steps: 21 },
            ..Self::theta_phi()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.axis1.validate()?;
        self.axis2.validate()?;
        if self.trials == 0 {
            return Err(MeshError::InvalidArgument("trials must be >= 1".into()));
        }
        Ok(())
    }

    pub fn cell_area(&self) -> f64 {
        self.axis1.cell_width() * self.axis2.cell_width()
    }

    fn conditions(&self, a: f64, b: f64) -> (f64, f64, f64) {
        match self.mode {
            SweepMode::ThetaPhi => (a, b, 0.0),
            SweepMode::SigmaLoss => (a, a, b),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub axis1: f64,
    pub axis2: f64,
    pub mean_accuracy: f64,
    pub trials: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub topology: Option<MeshKind>,
    pub n: usize,
    pub layers: usize,
    pub dataset: String,
    pub samples: usize,
    pub seed: u64,
    /// Grid ranges and trial counts are chosen values, not measured ones.
    pub decided_grid: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub spec: SweepSpec,
    /// Row-major: axis1 outer, axis2 inner.
    pub cells: Vec<SweepCell>,
    pub fom_value: f64,
    pub threshold: f64,
    pub units: String,
    pub metadata: SweepMetadata,
}

fn cell_seed(seed: u64, i: usize, j: usize) -> u64 {
    use rand::RngCore;
    rng::stream(seed, &[0xce11, i as u64, j as u64]).next_u64()
}

/// Evaluates the frozen model at every grid point with fresh noise per
/// multiplication. Each cell draws from its own stream, so the grid is the
/// same for any schedule.
pub fn run_sweep(model: &OnnModel, data: &Dataset, spec: &SweepSpec, mut metadata: SweepMetadata) -> Result<SweepReport> {
    spec.validate()?;
    let a1 = spec.axis1.values();
    let a2 = spec.axis2.values();
    let points: Vec<(usize, usize)> = (0..a1.len()).flat_map(|i| (0..a2.len()).map(move |j| (i, j))).collect();
    let eval = |&(i, j): &(usize, usize)| -> Result<SweepCell> {
        let (st, sp, loss) = spec.conditions(a1[i], a2[j]);
        let noise = NoiseConfig::new(st, sp, cell_seed(spec.seed, i, j))?;
        let acc = evaluate_trials(model, data, &noise, loss, spec.trials)?;
        Ok(SweepCell {
            axis1: a1[i],
            axis2: a2[j],
            mean_accuracy: acc.iter().sum::<f64>() / acc.len() as f64,
            trials: spec.trials,
        })
    };
    let cells: Vec<SweepCell> = if spec.parallel {
        points.par_iter().map(eval).collect::<Result<_>>()?
    } else {
        points.iter().map(eval).collect::<Result<_>>()?
    };
    let acc: Vec<f64> = cells.iter().map(|c| c.mean_accuracy).collect();
    metadata.seed = spec.seed;
    Ok(SweepReport {
        spec: *spec,
        fom_value: fom_area(&acc, spec.cell_area(), spec.threshold),
        threshold: spec.threshold,
        units: spec.mode.units().to_string(),
        cells,
        metadata,
    })
}

/// Number of cells at or above `threshold` times the area of one cell.
pub fn fom_area(accuracies: &[f64], cell_area: f64, threshold: f64) -> f64 {
    accuracies.iter().filter(|&&a| a >= threshold).count() as f64 * cell_area
}

#[derive(Serialize)]
struct Summary<'a> {
    fom_value: f64,
    threshold: f64,
    units: &'a str,
    mode: SweepMode,
    axis1: Axis,
    axis2: Axis,
    trials: usize,
    origin_accuracy: Option<f64>,
    metadata: &'a SweepMetadata,
}

impl SweepReport {
    pub fn accuracies(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.mean_accuracy).collect()
    }

    pub fn fom_at(&self, threshold: f64) -> f64 {
        fom_area(&self.accuracies(), self.spec.cell_area(), threshold)
    }

    pub fn origin_accuracy(&self) -> Option<f64> {
        self.cells.first().map(|c| c.mean_accuracy)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("axis1,axis2,mean_accuracy,trials\n");
        for c in &self.cells {
            out.push_str(&format!("{},{},{},{}\n", c.axis1, c.axis2, c.mean_accuracy, c.trials));
        }
        out
    }

    pub fn summary_json(&self) -> Result<String> {
        let s = Summary {
            fom_value: self.fom_value,
            threshold: self.threshold,
            units: &self.units,
            mode: self.spec.mode,
            axis1: self.spec.axis1,
            axis2: self.spec.axis2,
            trials: self.spec.trials,
            origin_accuracy: self.origin_accuracy(),
            metadata: &self.metadata,
        };
        Ok(serde_json::to_string_pretty(&s)?)
    }

    pub fn to_svg(&self) -> String {
        let (x, y) = self.spec.mode.labels();
        let title = match self.metadata.topology {
            Some(k) => format!("{k}: FoM {:.4} {}", self.fom_value, self.units),
            None => format!("FoM {:.4} {}", self.fom_value, self.units),
        };
        Heatmap {
            rows: self.spec.axis1.steps,
            cols: self.spec.axis2.steps,
            values: self.accuracies(),
            x_label: y.to_string(),
            y_label: x.to_string(),
            x_range: (self.spec.axis2.min, self.spec.axis2.max),
            y_range: (self.spec.axis1.min, self.spec.axis1.max),
            title,
            threshold: self.threshold,
        }
        .render()
    }
}
