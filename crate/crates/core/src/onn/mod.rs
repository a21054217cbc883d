//! Optical neural networks built from mesh layers: forward inference with
//! noise and loss, phase-level training and accuracy evaluation.

pub mod dataset;
pub mod mnist;

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MeshError, Result};
use crate::linalg::{Complex, ComplexMatrix, ComplexVector, ZERO};
use crate::mzi::MziPhases;
use crate::propagation::{MeshState, NoiseConfig, PhaseGradient};
use crate::rng;
use crate::topology::{MeshKind, MeshTopology};

pub use dataset::{gaussian_dataset, Dataset};
pub use mnist::{mnist_apply, mnist_reduced, parse_idx_images, parse_idx_labels, PcaReducer};

const J: Complex = Complex::new(0.0, 1.0);

/// Complex nonlinearity applied between layers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Activation {
    Identity,
    /// (|z| − b)·z/|z| above the threshold, zero below.
    ModRelu { bias: f64 },
    /// Intensity-dependent electro-optic modulation of a tapped fraction
    /// `alpha` of the signal.
    ElectroOptic { alpha: f64, gain: f64, phase_bias: f64 },
}

impl Default for Activation {
    fn default() -> Self {
        Activation::ModRelu { bias: 0.1 }
    }
}

impl Activation {
    pub fn electro_optic() -> Self {
        Activation::ElectroOptic {
            alpha: 0.1,
            gain: 0.5 * PI,
            phase_bias: PI,
        }
    }

    /// Value with the Wirtinger derivatives ∂y/∂z and ∂y/∂z*.
    pub fn eval(&self, z: Complex) -> (Complex, Complex, Complex) {
        match *self {
            Activation::Identity => (z, Complex::new(1.0, 0.0), ZERO),
            Activation::ModRelu { bias } => {
                let r = z.norm();
                if r <= bias || r == 0.0 {
                    return (ZERO, ZERO, ZERO);
                }
                let y = z * ((r - bias) / r);
                let dz = Complex::new(1.0 - bias / (2.0 * r), 0.0);
                let dzc = z * z * (bias / (2.0 * r * r * r));
                (y, dz, dzc)
            }
            Activation::ElectroOptic { alpha, gain, phase_bias } => {
                let s = gain * z.norm_sqr() + phase_bias;
                let amp = (1.0 - alpha).sqrt();
                let e = Complex::from_polar(1.0, -s / 2.0);
                let (sn, cs) = (s / 2.0).sin_cos();
                let k = J * amp * e * cs;
                let dk = J * amp * e * (J * cs + sn) * -0.5;
                let y = k * z;
                let dz = k + z * dk * gain * z.conj();
                let dzc = dk * gain * z * z;
                (y, dz, dzc)
            }
        }
    }

    pub fn apply(&self, z: Complex) -> Complex {
        self.eval(z).0
    }

    /// Pulls the cotangent ∂L/∂y* back to ∂L/∂z*.
    pub fn backward(&self, z: Complex, cot: Complex) -> Complex {
        let (_, dz, dzc) = self.eval(z);
        cot.conj() * dzc + cot * dz.conj()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LossFn {
    /// Σ_k (P_k − Y_k)² on detected powers.
    #[default]
    MeanSquareError,
    /// Softmax cross-entropy on `scale`·P_k.
    CrossEntropy { scale: f64 },
}


impl LossFn {
    /// Loss and its derivative with respect to each detected power.
    pub fn eval(&self, powers: &[f64], label: usize) -> (f64, Vec<f64>) {
        match *self {
            LossFn::MeanSquareError => {
                let mut l = 0.0;
                let g = powers
                    .iter()
                    .enumerate()
                    .map(|(k, &p)| {
                        let e = p - if k == label { 1.0 } else { 0.0 };
                        l += e * e;
                        2.0 * e
                    })
                    .collect();
                (l, g)
            }
            LossFn::CrossEntropy { scale } => {
                let m = powers.iter().fold(f64::NEG_INFINITY, |a, &p| a.max(scale * p));
                let ex: Vec<f64> = powers.iter().map(|&p| (scale * p - m).exp()).collect();
                let z: f64 = ex.iter().sum();
                let l = -(scale * powers[label] - m - z.ln());
                let g = ex
                    .iter()
                    .enumerate()
                    .map(|(k, &e)| scale * (e / z - if k == label { 1.0 } else { 0.0 }))
                    .collect();
                (l, g)
            }
        }
    }
}

/// Stack of mesh layers acting on the main ports, with the activation
/// between consecutive layers and power detection at the end.
#[derive(Clone, Debug)]
pub struct OnnModel {
    layers: Vec<MeshState>,
    pub activation: Activation,
    pub loss: LossFn,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerSnapshot {
    phases: Vec<MziPhases>,
    input_phases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSnapshot {
    kind: MeshKind,
    n: usize,
    activation: Activation,
    loss: LossFn,
    layers: Vec<LayerSnapshot>,
}

impl OnnModel {
    /// Layers of the given topology with phases uniform in [0, 2π).
    pub fn new(kind: MeshKind, n: usize, n_layers: usize, activation: Activation, loss: LossFn, seed: u64) -> Result<Self> {
        if n_layers == 0 {
            return Err(MeshError::InvalidArgument("model needs at least one layer".into()));
        }
        let topology = MeshTopology::build(kind, n)?;
        let layers = (0..n_layers)
            .map(|l| {
                let mut s = MeshState::new(topology.clone());
                let mut r = rng::stream(seed, &[0x1a7e, l as u64]);
                let phases = (0..s.phases().len())
                    .map(|_| MziPhases::new(r.random_range(0.0..2.0 * PI), r.random_range(0.0..2.0 * PI)))
                    .collect();
                s.set_phases(phases)?;
                let ins = (0..s.input_phases().len()).map(|_| r.random_range(0.0..2.0 * PI)).collect();
                s.set_input_phases(ins)?;
                Ok(s)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers, activation, loss)
    }

    pub fn from_layers(layers: Vec<MeshState>, activation: Activation, loss: LossFn) -> Result<Self> {
        let first = layers.first().ok_or_else(|| MeshError::InvalidArgument("model needs at least one layer".into()))?;
        let n = first.topology().n_main();
        if layers.iter().any(|l| l.topology().n_main() != n) {
            return Err(MeshError::Dimension("all layers need the same main port count".into()));
        }
        Ok(Self {
            layers,
            activation,
            loss,
        })
    }

    pub fn layers(&self) -> &[MeshState] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [MeshState] {
        &mut self.layers
    }

    pub fn kind(&self) -> MeshKind {
        self.layers[0].topology().kind()
    }

    /// Features in = classes out = main port count.
    pub fn n_features(&self) -> usize {
        self.layers[0].topology().n_main()
    }

    /// Copy with every MZI attenuated by `loss_db`.
    pub fn with_uniform_loss(&self, loss_db: f64) -> Result<OnnModel> {
        let mut m = self.clone();
        for l in &mut m.layers {
            l.set_uniform_loss(loss_db)?;
        }
        Ok(m)
    }

    fn check(&self, x: &[Complex]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(MeshError::Dimension(format!(
                "sample has {} features, model takes {}",
                x.len(),
                self.n_features()
            )));
        }
        Ok(())
    }

    /// Detected output powers for one encoded sample; every layer draws a
    /// fresh noise sample from `rng`.
    pub fn forward<R: Rng + ?Sized>(&self, x: &[Complex], noise: &NoiseConfig, rng: &mut R) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut z = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let t = layer.topology();
            if l > 0 {
                z.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            let mut full = ComplexVector::zeros(t.n_waveguides());
            for (&w, v) in t.main_waveguides().iter().zip(&z) {
                full[w] = *v;
            }
            let out = layer.propagate(&full, noise, rng)?;
            z = t.main_waveguides().iter().map(|&w| out[w]).collect();
        }
        Ok(z.iter().map(|v| v.norm_sqr()).collect())
    }

    pub fn predict<R: Rng + ?Sized>(&self, x: &[Complex], noise: &NoiseConfig, rng: &mut R) -> Result<usize> {
        let p = self.forward(x, noise, rng)?;
        Ok(argmax(&p))
    }

    fn transfers(&self) -> Result<Vec<ComplexMatrix>> {
        self.layers.iter().map(|l| l.main_transfer(None)).collect()
    }

    /// Mean loss over the samples `idx` of `data`, noiseless.
    pub fn batch_loss(&self, data: &Dataset, idx: &[usize]) -> Result<f64> {
        let ts = self.transfers()?;
        let mut total = 0.0;
        for &i in idx {
            let x = data.encoded(i);
            self.check(&x)?;
            let mut z = x;
            for (l, t) in ts.iter().enumerate() {
                if l > 0 {
                    z.iter_mut().for_each(|v| *v = self.activation.apply(*v));
                }
                z = t.mul_vec(&ComplexVector(z))?.0;
            }
            let p: Vec<f64> = z.iter().map(|v| v.norm_sqr()).collect();
            total += self.loss.eval(&p, data.labels[i]).0;
        }
        Ok(total / idx.len().max(1) as f64)
    }

    /// Mean loss and its gradient per layer, by the adjoint method through
    /// each mesh and the Wirtinger chain rule through the activations.
    pub fn loss_and_gradient(&self, data: &Dataset, idx: &[usize]) -> Result<(f64, Vec<PhaseGradient>)> {
        let ts = self.transfers()?;
        let nl = self.layers.len();
        let scale = 1.0 / idx.len().max(1) as f64;
        let mut pairs: Vec<Vec<(Vec<Complex>, Vec<Complex>)>> = vec![Vec::with_capacity(idx.len()); nl];
        let mut total = 0.0;
        for &i in idx {
            let x = data.encoded(i);
            self.check(&x)?;
            // Layer inputs (after activation) and pre-activation outputs.
            let mut ins = Vec::with_capacity(nl);
            let mut outs: Vec<Vec<Complex>> = Vec::with_capacity(nl);
            let mut z = x;
            for (l, t) in ts.iter().enumerate() {
                if l > 0 {
                    z.iter_mut().for_each(|v| *v = self.activation.apply(*v));
                }
                ins.push(z.clone());
                z = t.mul_vec(&ComplexVector(z))?.0;
                outs.push(z.clone());
            }
            let p: Vec<f64> = z.iter().map(|v| v.norm_sqr()).collect();
            let (l, dp) = self.loss.eval(&p, data.labels[i]);
            total += l;
            let mut cot: Vec<Complex> = z.iter().zip(&dp).map(|(v, g)| v * (g * scale)).collect();
            for l in (0..nl).rev() {
                let topo = self.layers[l].topology();
                let mut xf = vec![ZERO; topo.n_waveguides()];
                let mut cf = vec![ZERO; topo.n_waveguides()];
                for (k, &w) in topo.main_waveguides().iter().enumerate() {
                    xf[w] = ins[l][k];
                    cf[w] = cot[k];
                }
                pairs[l].push((xf, cf));
                if l > 0 {
                    let back = ts[l].dagger().mul_vec(&ComplexVector(cot))?.0;
                    cot = back
                        .iter()
                        .zip(&outs[l - 1])
                        .map(|(c, z)| self.activation.backward(*z, *c))
                        .collect();
                }
            }
        }
        let grads = self
            .layers
            .iter()
            .zip(&pairs)
            .map(|(layer, p)| layer.phase_gradient(p))
            .collect::<Result<Vec<_>>>()?;
        Ok((total * scale, grads))
    }

    /// All trainable phases, layer by layer: (θ, φ) per MZI then input phases.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::new();
        for l in &self.layers {
            p.extend(l.phases().iter().flat_map(|m| [m.theta, m.phi]));
            p.extend_from_slice(l.input_phases());
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        let need: usize = self.layers.iter().map(|l| 2 * l.phases().len() + l.input_phases().len()).sum();
        if p.len() != need {
            return Err(MeshError::Dimension(format!("expected {need} parameters, got {}", p.len())));
        }
        let mut k = 0;
        for l in &mut self.layers {
            for m in l.phases_mut() {
                m.theta = p[k];
                m.phi = p[k + 1];
                k += 2;
            }
            let s = l.input_phases().len();
            l.set_input_phases(p[k..k + s].to_vec())?;
            k += s;
        }
        Ok(())
    }

    /// Central finite-difference gradient in the `params` order.
    pub fn finite_difference_gradient(&self, data: &Dataset, idx: &[usize], h: f64) -> Result<Vec<f64>> {
        let p = self.params();
        let mut probe = self.clone();
        let mut g = Vec::with_capacity(p.len());
        for k in 0..p.len() {
            let mut q = p.clone();
            q[k] = p[k] + h;
            probe.set_params(&q)?;
            let up = probe.batch_loss(data, idx)?;
            q[k] = p[k] - h;
            probe.set_params(&q)?;
            let down = probe.batch_loss(data, idx)?;
            g.push((up - down) / (2.0 * h));
        }
        Ok(g)
    }

    pub fn to_json(&self) -> Result<String> {
        let snap = ModelSnapshot {
            kind: self.kind(),
            n: self.n_features(),
            activation: self.activation,
            loss: self.loss,
            layers: self
                .layers
                .iter()
                .map(|l| LayerSnapshot {
                    phases: l.phases().to_vec(),
                    input_phases: l.input_phases().to_vec(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&snap)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: ModelSnapshot = serde_json::from_str(text)?;
        let topology = MeshTopology::build(snap.kind, snap.n)?;
        let layers = snap
            .layers
            .into_iter()
            .map(|l| {
                let mut s = MeshState::new(topology.clone());
                s.set_phases(l.phases)?;
                s.set_input_phases(l.input_phases)?;
                Ok(s)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers, snap.activation, snap.loss)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| MeshError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| MeshError::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Flattens per-layer gradients in the `OnnModel::params` order.
pub fn flatten_gradient(grads: &[PhaseGradient]) -> Vec<f64> {
    let mut out = Vec::new();
    for g in grads {
        out.extend(g.mzi.iter().flat_map(|m| [m.theta, m.phi]));
        out.extend_from_slice(&g.inputs);
    }
    out
}

/// Largest per-parameter relative difference between two gradients.
/// Parameters whose gradient vanishes exactly (a φ right before
/// detection, say) are compared on a floor of 1e-4 of the largest entry,
/// since a finite difference only resolves them to rounding noise.
pub fn gradient_relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(0.0f64, |m, x| m.max(x.abs()));
    let floor = (1e-4 * scale).max(f64::MIN_POSITIVE);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

fn argmax(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    #[default]
    Analytic,
    FiniteDifference,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub gradient_mode: GradientMode,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            learning_rate: 0.02,
            seed: 1,
            gradient_mode: GradientMode::Analytic,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(MeshError::InvalidArgument(
                "batch size and learning rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, p: &mut [f64], g: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..p.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * g[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * g[i] * g[i];
            p[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Mini-batch Adam on all phases of an ideal (noiseless, lossless) copy of
/// the model. Returns the trained model and the mean loss per epoch.
pub fn train(model: &OnnModel, data: &Dataset, cfg: &TrainingConfig) -> Result<(OnnModel, Vec<f64>)> {
    cfg.validate()?;
    if data.n_features != model.n_features() {
        return Err(MeshError::Dimension(format!(
            "dataset has {} features, model takes {}",
            data.n_features,
            model.n_features()
        )));
    }
    let mut m = model.clone();
    let mut p = m.params();
    let mut adam = Adam::new(p.len());
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng::stream(cfg.seed, &[0x7ea1, epoch as u64]));
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (loss, g) = match cfg.gradient_mode {
                GradientMode::Analytic => {
                    let (l, g) = m.loss_and_gradient(data, batch)?;
                    (l, flatten_gradient(&g))
                }
                GradientMode::FiniteDifference => (m.batch_loss(data, batch)?, m.finite_difference_gradient(data, batch, 1e-5)?),
            };
            if !loss.is_finite() || g.iter().any(|x| !x.is_finite()) {
                return Err(MeshError::Numerical(format!("training diverged in epoch {epoch} (loss {loss})")));
            }
            epoch_loss += loss * batch.len() as f64;
            adam.step(&mut p, &g, cfg.learning_rate);
            m.set_params(&p)?;
        }
        curve.push(epoch_loss / data.len().max(1) as f64);
    }
    Ok((m, curve))
}

/// Fraction of correctly classified samples for each trial. Trials run in
/// parallel, each on its own random stream keyed by the trial index.
pub fn evaluate_trials(model: &OnnModel, data: &Dataset, noise: &NoiseConfig, per_mzi_loss_db: f64, trials: usize) -> Result<Vec<f64>> {
    noise.validate()?;
    if trials == 0 {
        return Err(MeshError::InvalidArgument("need at least one trial".into()));
    }
    let m = if per_mzi_loss_db != 0.0 {
        model.with_uniform_loss(per_mzi_loss_db)?
    } else {
        model.clone()
    };
    let encoded: Vec<Vec<Complex>> = (0..data.len()).map(|i| data.encoded(i)).collect();
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut r = rng::stream(noise.seed, &[0xe7a1, trial as u64]);
            let mut correct = 0usize;
            for (x, &label) in encoded.iter().zip(&data.labels) {
                if m.predict(x, noise, &mut r)? == label {
                    correct += 1;
                }
            }
            Ok(correct as f64 / data.len().max(1) as f64)
        })
        .collect()
}

pub fn evaluate_accuracy(model: &OnnModel, data: &Dataset, noise: &NoiseConfig, per_mzi_loss_db: f64, trials: usize) -> Result<f64> {
    let acc = evaluate_trials(model, data, noise, per_mzi_loss_db, trials)?;
    Ok(acc.iter().sum::<f64>() / acc.len() as f64)
}
