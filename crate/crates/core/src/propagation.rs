//! Mesh transfer matrices and field propagation with phase noise, loss and
//! thermal crosstalk.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{MeshError, Result};
use crate::linalg::{Complex, ComplexMatrix, ComplexVector};
use crate::mzi::{mzi_block, mzi_block_with_grad, Block, MziImperfection, MziPhases};
use crate::topology::MeshTopology;

/// Linear nearest-neighbor thermal coupling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkModel {
    pub coefficient: f64,
}

impl CrosstalkModel {
    pub fn new(coefficient: f64) -> Result<Self> {
        let m = Self { coefficient };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.coefficient) {
            return Err(MeshError::InvalidArgument(format!(
                "crosstalk coefficient {} outside [0, 1)",
                self.coefficient
            )));
        }
        Ok(())
    }
}

/// Gaussian phase noise redrawn for every propagation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma_theta: f64,
    pub sigma_phi: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn new(sigma_theta: f64, sigma_phi: f64, seed: u64) -> Result<Self> {
        let n = Self {
            sigma_theta,
            sigma_phi,
            seed,
        };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_theta >= 0.0 && self.sigma_phi >= 0.0)
            || !self.sigma_theta.is_finite()
            || !self.sigma_phi.is_finite()
        {
            return Err(MeshError::InvalidArgument("noise sigmas must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn is_silent(&self) -> bool {
        self.sigma_theta == 0.0 && self.sigma_phi == 0.0
    }

    /// One offset per MZI, drawn theta then phi in id order.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<MziPhases> {
        (0..count)
            .map(|_| {
                let t: f64 = rng.sample(StandardNormal);
                let p: f64 = rng.sample(StandardNormal);
                MziPhases::new(t * self.sigma_theta, p * self.sigma_phi)
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct MeshState {
    topology: MeshTopology,
    phases: Vec<MziPhases>,
    input_phases: Vec<f64>,
    imperfections: Vec<MziImperfection>,
    crosstalk: CrosstalkModel,
}

impl MeshState {
    /// All phases zero, ideal MZIs, no crosstalk.
    pub fn new(topology: MeshTopology) -> Self {
        let m = topology.mzi_count();
        let s = topology.input_phase_shifters();
        Self {
            topology,
            phases: vec![MziPhases::default(); m],
            input_phases: vec![0.0; s],
            imperfections: vec![MziImperfection::ideal(); m],
            crosstalk: CrosstalkModel::default(),
        }
    }

    pub fn topology(&self) -> &MeshTopology {
        &self.topology
    }

    pub fn phases(&self) -> &[MziPhases] {
        &self.phases
    }

    pub fn phases_mut(&mut self) -> &mut [MziPhases] {
        &mut self.phases
    }

    pub fn set_phases(&mut self, phases: Vec<MziPhases>) -> Result<()> {
        if phases.len() != self.phases.len() {
            return Err(MeshError::Dimension(format!(
                "expected {} MZI phase pairs, got {}",
                self.phases.len(),
                phases.len()
            )));
        }
        self.phases = phases;
        Ok(())
    }

    pub fn input_phases(&self) -> &[f64] {
        &self.input_phases
    }

    pub fn set_input_phases(&mut self, phases: Vec<f64>) -> Result<()> {
        if phases.len() != self.input_phases.len() {
            return Err(MeshError::Dimension(format!(
                "expected {} input phases, got {}",
                self.input_phases.len(),
                phases.len()
            )));
        }
        self.input_phases = phases;
        Ok(())
    }

    pub fn imperfections(&self) -> &[MziImperfection] {
        &self.imperfections
    }

    pub fn set_imperfections(&mut self, imps: Vec<MziImperfection>) -> Result<()> {
        if imps.len() != self.imperfections.len() {
            return Err(MeshError::Dimension("imperfection list length".into()));
        }
        for imp in &imps {
            imp.validate()?;
        }
        self.imperfections = imps;
        Ok(())
    }

    pub fn set_uniform_loss(&mut self, loss_db: f64) -> Result<()> {
        let imp = MziImperfection::lossy(loss_db);
        imp.validate()?;
        self.imperfections.iter_mut().for_each(|i| i.loss_db = loss_db);
        Ok(())
    }

    pub fn crosstalk(&self) -> CrosstalkModel {
        self.crosstalk
    }

    pub fn set_crosstalk(&mut self, model: CrosstalkModel) -> Result<()> {
        model.validate()?;
        self.crosstalk = model;
        Ok(())
    }

    /// Phases each MZI actually experiences after thermal crosstalk.
    pub fn effective_phases(&self) -> Vec<MziPhases> {
        apply_crosstalk(&self.topology, &self.phases, self.crosstalk)
    }

    /// Per-MZI blocks for the effective phases plus optional offsets.
    pub fn blocks(&self, offsets: Option<&[MziPhases]>) -> Result<Vec<Block>> {
        let eff = self.effective_phases();
        if let Some(o) = offsets {
            if o.len() != eff.len() {
                return Err(MeshError::Dimension(format!(
                    "expected {} phase offsets, got {}",
                    eff.len(),
                    o.len()
                )));
            }
        }
        Ok(eff
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let p = match offsets {
                    Some(o) => MziPhases::new(p.theta + o[i].theta, p.phi + o[i].phi),
                    None => *p,
                };
                mzi_block(p, &self.imperfections[i])
            })
            .collect())
    }

    pub fn transfer_matrix(&self, offsets: Option<&[MziPhases]>) -> Result<ComplexMatrix> {
        let blocks = self.blocks(offsets)?;
        let w = self.topology.n_waveguides();
        let mut t = ComplexMatrix::identity(w);
        for (i, &ph) in self.input_phases.iter().enumerate() {
            t[(i, i)] = Complex::from_polar(1.0, ph);
        }
        for (p, b) in self.topology.placements().iter().zip(&blocks) {
            t.apply_block_left(b, p.top, p.top + 1);
        }
        Ok(t)
    }

    /// Transfer matrix restricted to the main input and output ports.
    pub fn main_transfer(&self, offsets: Option<&[MziPhases]>) -> Result<ComplexMatrix> {
        let t = self.transfer_matrix(offsets)?;
        let main = self.topology.main_waveguides();
        Ok(t.select(main, main))
    }

    /// Propagates a field over all ports with a fresh noise sample.
    pub fn propagate<R: Rng + ?Sized>(
        &self,
        input: &ComplexVector,
        noise: &NoiseConfig,
        rng: &mut R,
    ) -> Result<ComplexVector> {
        if input.len() != self.topology.n_waveguides() {
            return Err(MeshError::Dimension(format!(
                "input has {} entries, mesh has {} ports",
                input.len(),
                self.topology.n_waveguides()
            )));
        }
        let offsets = (!noise.is_silent()).then(|| noise.sample(self.phases.len(), rng));
        let blocks = self.blocks(offsets.as_deref())?;
        let mut v = input.clone();
        for (i, &ph) in self.input_phases.iter().enumerate() {
            v[i] *= Complex::from_polar(1.0, ph);
        }
        apply_blocks(&self.topology, &blocks, &mut v.0);
        Ok(v)
    }
}

/// Gradient of a real loss with respect to the set phases.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGradient {
    pub mzi: Vec<MziPhases>,
    pub inputs: Vec<f64>,
}

impl PhaseGradient {
    pub fn zeros(state: &MeshState) -> Self {
        Self {
            mzi: vec![MziPhases::default(); state.phases.len()],
            inputs: vec![0.0; state.input_phases.len()],
        }
    }

    pub fn add(&mut self, other: &PhaseGradient) {
        for (a, b) in self.mzi.iter_mut().zip(&other.mzi) {
            a.theta += b.theta;
            a.phi += b.phi;
        }
        for (a, b) in self.inputs.iter_mut().zip(&other.inputs) {
            *a += b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.mzi
            .iter()
            .flat_map(|p| [p.theta.abs(), p.phi.abs()])
            .chain(self.inputs.iter().map(|x| x.abs()))
            .fold(0.0, f64::max)
    }
}

impl MeshState {
    /// Noiseless output field over all ports.
    pub fn forward_field(&self, input: &[Complex]) -> Result<Vec<Complex>> {
        if input.len() != self.topology.n_waveguides() {
            return Err(MeshError::Dimension(format!(
                "input has {} entries, mesh has {} ports",
                input.len(),
                self.topology.n_waveguides()
            )));
        }
        let blocks = self.blocks(None)?;
        let mut v = input.to_vec();
        for (i, &ph) in self.input_phases.iter().enumerate() {
            v[i] *= Complex::from_polar(1.0, ph);
        }
        apply_blocks(&self.topology, &blocks, &mut v);
        Ok(v)
    }

    /// Adjoint-method gradient. Each pair holds a full-port input field and
    /// the loss cotangent ∂L/∂y* at the corresponding output; contributions
    /// of all pairs are summed. Crosstalk is folded back onto set phases.
    pub fn phase_gradient(&self, pairs: &[(Vec<Complex>, Vec<Complex>)]) -> Result<PhaseGradient> {
        let w = self.topology.n_waveguides();
        let eff = self.effective_phases();
        let fwd: Vec<(Block, Block, Block)> = eff
            .iter()
            .zip(&self.imperfections)
            .map(|(p, imp)| mzi_block_with_grad(*p, imp))
            .collect();
        let shifters: Vec<Complex> = self.input_phases.iter().map(|&p| Complex::from_polar(1.0, p)).collect();
        let mut g_eff = vec![MziPhases::default(); eff.len()];
        let mut g_in = vec![0.0; shifters.len()];
        let placements = self.topology.placements();
        let mut before: Vec<[Complex; 2]> = vec![[Complex::default(); 2]; placements.len()];

        for (x, cot) in pairs {
            if x.len() != w || cot.len() != w {
                return Err(MeshError::Dimension("gradient pair length".into()));
            }
            let mut v = x.clone();
            for (i, s) in shifters.iter().enumerate() {
                v[i] *= s;
            }
            for (k, p) in placements.iter().enumerate() {
                let (a, c) = (v[p.top], v[p.top + 1]);
                before[k] = [a, c];
                let b = &fwd[k].0;
                v[p.top] = b[0][0] * a + b[0][1] * c;
                v[p.top + 1] = b[1][0] * a + b[1][1] * c;
            }
            let mut adj = cot.clone();
            for (k, p) in placements.iter().enumerate().rev() {
                let (m, dt, dp) = &fwd[k];
                let [a, c] = before[k];
                let (u, l) = (adj[p.top], adj[p.top + 1]);
                let proj = |d: &Block| {
                    let y0 = d[0][0] * a + d[0][1] * c;
                    let y1 = d[1][0] * a + d[1][1] * c;
                    2.0 * (u.conj() * y0 + l.conj() * y1).re
                };
                g_eff[k].theta += proj(dt);
                g_eff[k].phi += proj(dp);
                adj[p.top] = m[0][0].conj() * u + m[1][0].conj() * l;
                adj[p.top + 1] = m[0][1].conj() * u + m[1][1].conj() * l;
            }
            for (i, s) in shifters.iter().enumerate() {
                let dy = Complex::new(0.0, 1.0) * s * x[i];
                g_in[i] += 2.0 * (adj[i].conj() * dy).re;
            }
        }

        let chi = self.crosstalk.coefficient;
        let mzi = if chi == 0.0 {
            g_eff
        } else {
            (0..g_eff.len())
                .map(|m| {
                    let (st, sp) = self
                        .topology
                        .neighbors(m)
                        .iter()
                        .fold((0.0, 0.0), |(a, b), &n| (a + g_eff[n].theta, b + g_eff[n].phi));
                    MziPhases::new(g_eff[m].theta + chi * st, g_eff[m].phi + chi * sp)
                })
                .collect()
        };
        Ok(PhaseGradient { mzi, inputs: g_in })
    }
}

/// Applies per-MZI blocks in placement order to a field in place.
pub fn apply_blocks(t: &MeshTopology, blocks: &[Block], v: &mut [Complex]) {
    for (p, b) in t.placements().iter().zip(blocks) {
        let (a, c) = (v[p.top], v[p.top + 1]);
        v[p.top] = b[0][0] * a + b[0][1] * c;
        v[p.top + 1] = b[1][0] * a + b[1][1] * c;
    }
}

/// θ_eff(m) = θ(m) + χ Σ θ(m') over thermal neighbors m', likewise for φ.
pub fn apply_crosstalk(t: &MeshTopology, phases: &[MziPhases], model: CrosstalkModel) -> Vec<MziPhases> {
    if model.coefficient == 0.0 {
        return phases.to_vec();
    }
    let chi = model.coefficient;
    (0..phases.len())
        .map(|m| {
            let (st, sp) = t
                .neighbors(m)
                .iter()
                .fold((0.0, 0.0), |(a, b), &n| (a + phases[n].theta, b + phases[n].phi));
            MziPhases::new(phases[m].theta + chi * st, phases[m].phi + chi * sp)
        })
        .collect()
}

/// CSV with one row per matrix row and `re,im` column pairs.
pub fn matrix_to_csv(m: &ComplexMatrix) -> String {
    let mut out = String::new();
    let header: Vec<String> = (0..m.cols()).map(|j| format!("c{j}_re,c{j}_im")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|z| format!("{:.17e},{:.17e}", z.re, z.im)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
