//! Single Mach-Zehnder interferometer: transfer matrix, imperfections,
//! thermo-optic voltage law and the thermal phase-error relation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{MeshError, Result};
use crate::linalg::{Complex, ComplexMatrix, J, ZERO};

/// 2x2 block in `[row][col]` layout.
pub type Block = [[Complex; 2]; 2];

/// Internal (`theta`) and external (`phi`) phase settings in radians.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MziPhases {
    pub theta: f64,
    pub phi: f64,
}

impl MziPhases {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    /// Phases wrapped to `[0, 2π)` for display; stored values are never wrapped.
    pub fn canonical(&self) -> (f64, f64) {
        (wrap_2pi(self.theta), wrap_2pi(self.phi))
    }
}

pub fn wrap_2pi(x: f64) -> f64 {
    let w = x.rem_euclid(2.0 * PI);
    if w >= 2.0 * PI {
        0.0
    } else {
        w
    }
}

/// Wraps to `(-π, π]`.
pub fn wrap_pi(x: f64) -> f64 {
    let w = wrap_2pi(x);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Bar state: top input exits the top output.
pub fn bar_state() -> MziPhases {
    MziPhases::new(PI, 0.0)
}

/// Cross state: top input exits the bottom output.
pub fn cross_state() -> MziPhases {
    MziPhases::new(0.0, 0.0)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MziImperfection {
    /// Insertion loss in dB, applied equally to both outputs.
    pub loss_db: f64,
    /// Deviation of each coupler's power split from 50:50.
    pub splitting_delta: f64,
}

impl MziImperfection {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn lossy(loss_db: f64) -> Self {
        Self {
            loss_db,
            splitting_delta: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.loss_db >= 0.0 && self.loss_db.is_finite()) {
            return Err(MeshError::InvalidArgument(format!(
                "loss_db must be finite and >= 0, got {}",
                self.loss_db
            )));
        }
        if self.splitting_delta.is_nan() || self.splitting_delta.abs() >= 0.5 {
            return Err(MeshError::InvalidArgument(format!(
                "splitting_delta must lie in (-0.5, 0.5), got {}",
                self.splitting_delta
            )));
        }
        Ok(())
    }

    pub fn amplitude(&self) -> f64 {
        10f64.powf(-self.loss_db / 20.0)
    }
}

fn coupler(split: f64) -> Block {
    let t = Complex::new((1.0 - split).sqrt(), 0.0);
    let k = J * split.sqrt();
    [[t, k], [k, t]]
}

fn mul(a: &Block, b: &Block) -> Block {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn scale_top_row(b: &Block, s: Complex) -> Block {
    [[b[0][0] * s, b[0][1] * s], b[1]]
}

/// Transfer block of one MZI. With no imperfection this is exactly
/// `e^{jθ/2} [[e^{jφ} sin(θ/2), e^{jφ} cos(θ/2)], [cos(θ/2), -sin(θ/2)]]`.
pub fn mzi_block(phases: MziPhases, imp: &MziImperfection) -> Block {
    let amp = imp.amplitude();
    if imp.splitting_delta == 0.0 {
        let half = phases.theta / 2.0;
        let (s, c) = half.sin_cos();
        let g = Complex::from_polar(amp, half);
        let gp = g * Complex::from_polar(1.0, phases.phi);
        return [[gp * s, gp * c], [g * c, -g * s]];
    }
    composed(phases, imp).0
}

/// Block together with its derivatives with respect to `theta` and `phi`.
pub fn mzi_block_with_grad(phases: MziPhases, imp: &MziImperfection) -> (Block, Block, Block) {
    let (m, d_theta) = composed(phases, imp);
    let d_phi = [[m[0][0] * J, m[0][1] * J], [ZERO, ZERO]];
    (m, d_theta, d_phi)
}

// M = -j·a · diag(e^{jφ},1) · C · diag(e^{jθ},1) · C; the -j factor makes the
// balanced case coincide with the closed form above.
fn composed(phases: MziPhases, imp: &MziImperfection) -> (Block, Block) {
    let split = 0.5 + imp.splitting_delta;
    let c = coupler(split);
    let g = -J * imp.amplitude();
    let e_theta = Complex::from_polar(1.0, phases.theta);
    let e_phi = Complex::from_polar(1.0, phases.phi);
    let inner = mul(&c, &scale_top_row(&c, e_theta));
    let inner_d = mul(&c, &[[c[0][0] * e_theta * J, c[0][1] * e_theta * J], [ZERO, ZERO]]);
    let finish = |b: Block| {
        let b = scale_top_row(&b, e_phi);
        [[b[0][0] * g, b[0][1] * g], [b[1][0] * g, b[1][1] * g]]
    };
    (finish(inner), finish(inner_d))
}

pub fn block_to_matrix(b: &Block) -> ComplexMatrix {
    ComplexMatrix::from_rows(&[&b[0], &b[1]]).expect("finite 2x2 block")
}

/// Validated 2x2 transfer matrix of a single MZI.
pub fn mzi_transfer(phases: MziPhases, imp: &MziImperfection) -> Result<ComplexMatrix> {
    imp.validate()?;
    if !(phases.theta.is_finite() && phases.phi.is_finite()) {
        return Err(MeshError::InvalidArgument("non-finite phase".into()));
    }
    Ok(block_to_matrix(&mzi_block(phases, imp)))
}

/// Quadratic thermo-optic law: dissipated power, hence phase, grows with V².
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoltagePhaseModel {
    pub v_pi: f64,
    pub resolution: f64,
}

impl Default for VoltagePhaseModel {
    fn default() -> Self {
        Self {
            v_pi: 2.0,
            resolution: 0.01,
        }
    }
}

impl VoltagePhaseModel {
    pub fn validate(&self) -> Result<()> {
        if self.v_pi > 0.0 && self.resolution > 0.0 {
            Ok(())
        } else {
            Err(MeshError::InvalidArgument(
                "v_pi and resolution must be positive".into(),
            ))
        }
    }
}

pub fn phase_from_voltage(v: f64, model: &VoltagePhaseModel) -> Result<f64> {
    model.validate()?;
    if v.is_nan() || v < 0.0 {
        return Err(MeshError::InvalidArgument(format!("negative voltage {v}")));
    }
    Ok(PI * (v / model.v_pi).powi(2))
}

pub fn voltage_from_phase(phase: f64, model: &VoltagePhaseModel) -> Result<f64> {
    model.validate()?;
    if phase.is_nan() || phase < 0.0 {
        return Err(MeshError::InvalidArgument(format!("negative phase {phase}")));
    }
    Ok(model.v_pi * (phase / PI).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    /// Phase-shifter length in meters.
    pub length: f64,
    /// Free-space wavelength in meters.
    pub lambda0: f64,
    /// Thermo-optic coefficient in 1/K.
    pub dn_dt: f64,
}

impl Default for ThermalParams {
    /// 100 µm silicon heater at 1550 nm.
    fn default() -> Self {
        Self {
            length: 100e-6,
            lambda0: 1550e-9,
            dn_dt: 1.8e-4,
        }
    }
}

impl ThermalParams {
    pub fn validate(&self) -> Result<()> {
        if self.length > 0.0 && self.lambda0 > 0.0 && self.dn_dt > 0.0 {
            Ok(())
        } else {
            Err(MeshError::InvalidArgument(
                "thermal parameters must be strictly positive".into(),
            ))
        }
    }

    fn radians_per_kelvin(&self) -> f64 {
        2.0 * PI * self.length / self.lambda0 * self.dn_dt
    }
}

/// Phase error produced by a temperature excursion `dt` (kelvin).
pub fn thermal_phase_error(dt: f64, p: &ThermalParams) -> f64 {
    p.radians_per_kelvin() * dt
}

/// Temperature excursion needed for a phase change `dphase`.
pub fn temperature_for_phase(dphase: f64, p: &ThermalParams) -> f64 {
    dphase / p.radians_per_kelvin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ComplexVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ideal(theta: f64, phi: f64) -> ComplexMatrix {
        mzi_transfer(MziPhases::new(theta, phi), &MziImperfection::ideal()).unwrap()
    }

    #[test]
    fn cross_and_bar_magnitudes() {
        let cross = ideal(0.0, 0.0);
        assert!(cross[(0, 0)].norm() < 1e-15);
        assert!((cross[(0, 1)].norm() - 1.0).abs() < 1e-15);

        let bar = ideal(PI, 0.0);
        assert!((bar[(0, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((bar[(1, 1)].norm() - 1.0).abs() < 1e-15);
        assert!(bar[(0, 1)].norm() < 1e-15 && bar[(1, 0)].norm() < 1e-15);
    }

    #[test]
    fn half_transmission_at_quarter_wave() {
        let m = ideal(PI / 2.0, 0.3);
        assert!((m[(0, 0)].norm_sqr() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn routing_of_named_states() {
        let top = ComplexVector::basis(2, 0);
        let cross = block_to_matrix(&mzi_block(cross_state(), &MziImperfection::ideal()));
        let bar = block_to_matrix(&mzi_block(bar_state(), &MziImperfection::ideal()));
        let once = cross.mul_vec(&top).unwrap();
        assert!((once[1].norm_sqr() - 1.0).abs() < 1e-15);
        let twice = cross.mul_vec(&once).unwrap();
        assert!((twice[0].norm_sqr() - 1.0).abs() < 1e-15);
        let barred = bar.mul_vec(&top).unwrap();
        assert!((barred[0].norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn double_cross_is_bar_up_to_phase() {
        let c = ideal(0.0, 0.0);
        let cc = c.matmul(&c).unwrap();
        assert!((cc[(0, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((cc[(1, 1)].norm() - 1.0).abs() < 1e-15);
        assert!(cc[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn dagger_times_self_is_identity() {
        let m = ideal(0.7, 0.3);
        let g = m.dagger().matmul(&m).unwrap();
        assert!(g.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-12);
    }

    #[test]
    fn composition_reproduces_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let p = MziPhases::new(rng.random_range(-7.0..7.0), rng.random_range(-7.0..7.0));
            let imp = MziImperfection::lossy(rng.random_range(0.0..2.0));
            let closed = block_to_matrix(&mzi_block(p, &imp));
            let comp = block_to_matrix(&composed(p, &imp).0);
            assert!(closed.max_abs_diff(&comp) < 1e-12);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let imp = MziImperfection {
            loss_db: 0.3,
            splitting_delta: 0.04,
        };
        let p = MziPhases::new(1.1, -0.4);
        let (_, dt, dp) = mzi_block_with_grad(p, &imp);
        let h = 1e-6;
        for (d, shift) in [(dt, (h, 0.0)), (dp, (0.0, h))] {
            let plus = mzi_block(MziPhases::new(p.theta + shift.0, p.phi + shift.1), &imp);
            let minus = mzi_block(MziPhases::new(p.theta - shift.0, p.phi - shift.1), &imp);
            for i in 0..2 {
                for j in 0..2 {
                    let fd = (plus[i][j] - minus[i][j]) / (2.0 * h);
                    assert!((fd - d[i][j]).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn unbalanced_coupler_breaks_full_extinction() {
        let imp = MziImperfection {
            loss_db: 0.0,
            splitting_delta: 0.1,
        };
        let m = mzi_transfer(cross_state(), &imp).unwrap();
        assert!(m[(0, 0)].norm() > 1e-3);
        assert!(m.unitarity_defect().unwrap() < 1e-12);
    }

    #[test]
    fn invalid_imperfections_rejected() {
        let p = cross_state();
        assert!(mzi_transfer(p, &MziImperfection::lossy(-0.1)).is_err());
        let bad = MziImperfection {
            loss_db: 0.0,
            splitting_delta: 0.5,
        };
        assert!(mzi_transfer(p, &bad).is_err());
    }

    #[test]
    fn voltage_law_points() {
        let m = VoltagePhaseModel::default();
        assert!((phase_from_voltage(m.v_pi, &m).unwrap() - PI).abs() < 1e-15);
        assert_eq!(phase_from_voltage(0.0, &m).unwrap(), 0.0);
        let v = m.v_pi / 2f64.sqrt();
        assert!((phase_from_voltage(v, &m).unwrap() - PI / 2.0).abs() < 1e-14);
        assert!(phase_from_voltage(-1.0, &m).is_err());
        assert!(voltage_from_phase(-0.1, &m).is_err());
    }

    #[test]
    fn thermal_phase_points() {
        let p = ThermalParams::default();
        assert_eq!(thermal_phase_error(0.0, &p), 0.0);
        let d = thermal_phase_error(2.7, &p);
        assert!((d - 0.197).abs() < 0.001, "{d}");
        let dt = temperature_for_phase(PI, &p);
        assert!((dt - 43.06).abs() < 0.01, "{dt}");
    }

    proptest::proptest! {
        #[test]
        fn ideal_block_is_unitary(theta in -20.0f64..20.0, phi in -20.0f64..20.0) {
            let m = ideal(theta, phi);
            proptest::prop_assert!(m.unitarity_defect().unwrap() < 1e-12);
        }

        #[test]
        fn top_to_top_power_is_sin_squared(theta in -20.0f64..20.0, phi in -5.0f64..5.0) {
            let m = ideal(theta, phi);
            let expected = (theta / 2.0).sin().powi(2);
            proptest::prop_assert!((m[(0, 0)].norm_sqr() - expected).abs() < 1e-12);
        }

        #[test]
        fn lossy_singular_values_equal_amplitude(
            theta in -7.0f64..7.0, phi in -7.0f64..7.0, loss in 0.0f64..3.0
        ) {
            let m = mzi_transfer(MziPhases::new(theta, phi), &MziImperfection::lossy(loss)).unwrap();
            let a = 10f64.powf(-loss / 20.0);
            let smax = m.max_singular_value();
            let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).norm();
            proptest::prop_assert!((smax - a).abs() < 1e-12);
            proptest::prop_assert!((det / smax - a).abs() < 1e-12);
        }

        #[test]
        fn voltage_round_trip(phase in 0.0f64..(4.0 * PI)) {
            let m = VoltagePhaseModel::default();
            let v = voltage_from_phase(phase, &m).unwrap();
            proptest::prop_assert!((phase_from_voltage(v, &m).unwrap() - phase).abs() < 1e-12);
        }

        #[test]
        fn thermal_error_is_linear(dt in -50.0f64..50.0, scale in 0.1f64..10.0) {
            let p = ThermalParams::default();
            let longer = ThermalParams { length: p.length * scale, ..p };
            let base = thermal_phase_error(dt, &p);
            proptest::prop_assert!((thermal_phase_error(dt * scale, &p) - base * scale).abs() < 1e-9);
            proptest::prop_assert!((thermal_phase_error(dt, &longer) - base * scale).abs() < 1e-9);
        }
    }
}
