//! Energy per operation of a mesh used as a matrix-vector multiplier, with
//! and without the cost of periodic reprogramming.

use serde::{Deserialize, Serialize};

use crate::error::{MeshError, Result};
use crate::topology::{mzi_count, MeshKind};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyParams {
    /// Heater power for a π shift, W.
    pub p_pi: f64,
    /// Vector rate, operations per second.
    pub vr: f64,
    /// Heater transit time, s.
    pub transit_time: f64,
    pub in_situ_iterations: usize,
    pub ex_situ_iterations: usize,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            p_pi: 0.020,
            vr: 1e10,
            transit_time: 2.2e-6,
            in_situ_iterations: 200,
            ex_situ_iterations: 10,
        }
    }
}

impl EnergyParams {
    /// Average power of one counted phase shifter.
    pub fn p_ps(&self) -> f64 {
        self.p_pi / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p_pi", self.p_pi), ("vr", self.vr), ("transit_time", self.transit_time)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(MeshError::InvalidArgument(format!("{name} must be finite and >= 0")));
            }
        }
        if self.vr == 0.0 {
            return Err(MeshError::InvalidArgument("vr must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProgrammingMethod {
    InSituBackprop,
    ExSituMonitored,
}

impl ProgrammingMethod {
    /// Meshes with every MZI independently accessible can be programmed
    /// ex-situ; the others need in-situ optimization.
    pub fn for_kind(kind: MeshKind) -> Self {
        match kind {
            MeshKind::Reck | MeshKind::Clements => ProgrammingMethod::InSituBackprop,
            MeshKind::Diamond | MeshKind::Bokun => ProgrammingMethod::ExSituMonitored,
        }
    }
}

/// Static energy per operation for `shifters` counted phase shifters on an
/// `n`-port mesh: shifters·P_PS / (N²·VR).
pub fn e_static_for_count(shifters: usize, n: usize, p: &EnergyParams) -> f64 {
    if shifters == 0 || n == 0 {
        return 0.0;
    }
    shifters as f64 * p.p_ps() / ((n * n) as f64 * p.vr)
}

/// One counted shifter per MZI.
pub fn e_static(kind: MeshKind, n: usize, p: &EnergyParams) -> Result<f64> {
    p.validate()?;
    Ok(e_static_for_count(mzi_count(kind, n)?, n, p))
}

pub fn t_prog(method: ProgrammingMethod, p: &EnergyParams) -> f64 {
    let iterations = match method {
        ProgrammingMethod::InSituBackprop => p.in_situ_iterations,
        ProgrammingMethod::ExSituMonitored => p.ex_situ_iterations,
    };
    iterations as f64 * p.transit_time
}

/// Energy per useful operation when a fraction f_w·t_prog of every update
/// period is spent programming.
pub fn e_total(e_static: f64, f_w: f64, t_prog: f64) -> Result<f64> {
    if !(f_w >= 0.0 && t_prog >= 0.0) {
        return Err(MeshError::InvalidArgument("f_w and t_prog must be >= 0".into()));
    }
    let busy = f_w * t_prog;
    if busy >= 1.0 {
        return Err(MeshError::InvalidArgument(format!(
            "programming consumes the whole update period (f_w·t_prog = {busy})"
        )));
    }
    Ok(e_static / (1.0 - busy))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub topology: MeshKind,
    pub f_w_hz: f64,
    pub e_static_fj: f64,
    pub e_total_fj: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Headline {
    pub f_w_hz: f64,
    pub clements_total_fj: f64,
    pub bokun_total_fj: f64,
    /// 1 − E_total(Bokun)/E_total(Clements) with the counted Bokun static energy.
    pub saving: f64,
    /// Same with the Bokun static energy pinned to `bokun_reference_static_fj`.
    pub saving_reference: f64,
    pub bokun_reference_static_fj: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub n: usize,
    pub params: EnergyParams,
    pub rows: Vec<EfficiencyRow>,
    pub headline: Headline,
}

pub const HEADLINE_F_W: f64 = 2e3;
/// Bokun 10×10 static energy quoted alongside the headline saving, fJ/Op.
pub const BOKUN_REFERENCE_STATIC_FJ: f64 = 610.0;

/// E_static and E_total for every topology over a grid of update rates.
pub fn efficiency_report(n: usize, f_w_grid: &[f64], p: &EnergyParams) -> Result<EfficiencyReport> {
    p.validate()?;
    let mut rows = Vec::new();
    for kind in MeshKind::ALL {
        let es = e_static(kind, n, p)?;
        let tp = t_prog(ProgrammingMethod::for_kind(kind), p);
        for &f in f_w_grid {
            rows.push(EfficiencyRow {
                topology: kind,
                f_w_hz: f,
                e_static_fj: es * 1e15,
                e_total_fj: e_total(es, f, tp)? * 1e15,
            });
        }
    }
    let total = |kind: MeshKind, es: f64| e_total(es, HEADLINE_F_W, t_prog(ProgrammingMethod::for_kind(kind), p));
    let clements = total(MeshKind::Clements, e_static(MeshKind::Clements, n, p)?)?;
    let bokun = total(MeshKind::Bokun, e_static(MeshKind::Bokun, n, p)?)?;
    let bokun_ref = total(MeshKind::Bokun, BOKUN_REFERENCE_STATIC_FJ * 1e-15)?;
    Ok(EfficiencyReport {
        n,
        params: *p,
        rows,
        headline: Headline {
            f_w_hz: HEADLINE_F_W,
            clements_total_fj: clements * 1e15,
            bokun_total_fj: bokun * 1e15,
            saving: 1.0 - bokun / clements,
            saving_reference: 1.0 - bokun_ref / clements,
            bokun_reference_static_fj: BOKUN_REFERENCE_STATIC_FJ,
        },
    })
}

impl EfficiencyReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("topology,f_w_hz,e_static_fj,e_total_fj\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{:.6},{:.6}\n", r.topology, r.f_w_hz, r.e_static_fj, r.e_total_fj));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FJ: f64 = 1e-15;

    #[test]
    fn static_energy_values() {
        let p = EnergyParams::default();
        assert!((e_static(MeshKind::Clements, 10, &p).unwrap() / FJ - 450.0).abs() < 1e-9);
        assert!((e_static(MeshKind::Reck, 10, &p).unwrap() / FJ - 450.0).abs() < 1e-9);
        assert!((e_static(MeshKind::Diamond, 10, &p).unwrap() / FJ - 810.0).abs() < 1e-9);
        assert!((e_static(MeshKind::Bokun, 10, &p).unwrap() / FJ - 650.0).abs() < 1e-9);
        assert_eq!(e_static_for_count(0, 10, &p), 0.0);
    }

    #[test]
    fn programming_times() {
        let p = EnergyParams::default();
        assert!((t_prog(ProgrammingMethod::InSituBackprop, &p) - 440e-6).abs() < 1e-15);
        assert!((t_prog(ProgrammingMethod::ExSituMonitored, &p) - 22e-6).abs() < 1e-15);
        let zero = EnergyParams {
            in_situ_iterations: 0,
            ..p
        };
        assert_eq!(t_prog(ProgrammingMethod::InSituBackprop, &zero), 0.0);
    }

    #[test]
    fn total_energy_values() {
        let e = e_total(450.0 * FJ, 2e3, 440e-6).unwrap() / FJ;
        assert!((e - 3750.0).abs() < 1e-9, "{e}");
        assert_eq!(e_total(450.0 * FJ, 0.0, 440e-6).unwrap(), 450.0 * FJ);
        let b = e_total(610.0 * FJ, 2e3, 22e-6).unwrap() / FJ;
        assert!((b / 638.0 - 1.0).abs() < 0.002, "{b}");
        assert!(e_total(1.0, 1e4, 1e-4).is_err());
        assert!(e_total(1.0, -1.0, 1e-4).is_err());
    }

    #[test]
    fn report_orderings_and_headline() {
        let r = efficiency_report(10, &[0.0, 2e3], &EnergyParams::default()).unwrap();
        let at = |k: MeshKind, f: f64| r.rows.iter().find(|x| x.topology == k && x.f_w_hz == f).unwrap().e_total_fj;
        assert_eq!(at(MeshKind::Reck, 0.0), at(MeshKind::Clements, 0.0));
        assert!(at(MeshKind::Clements, 0.0) < at(MeshKind::Bokun, 0.0));
        assert!(at(MeshKind::Bokun, 0.0) < at(MeshKind::Diamond, 0.0));
        assert!(at(MeshKind::Bokun, 2e3) < at(MeshKind::Clements, 2e3));
        assert!((r.headline.saving_reference - 0.83).abs() < 0.01);
        // The counted 65-MZI Bokun gives a slightly smaller saving.
        assert!((r.headline.saving - (1.0 - 650.0 / 0.956 / 3750.0)).abs() < 1e-9);
        let csv = r.to_csv();
        assert!(csv.starts_with("topology,f_w_hz,e_static_fj,e_total_fj\n"));
        assert_eq!(csv.lines().count(), 1 + 8);
    }

    proptest! {
        #[test]
        fn total_at_least_static(es in 0.0..1e-12f64, f in 0.0..1e4f64, t in 0.0..5e-5f64) {
            let e = e_total(es, f, t).unwrap();
            prop_assert!(e >= es);
            if f * t > 0.0 && es > 0.0 {
                prop_assert!(e > es);
            }
        }

        #[test]
        fn total_increases(es in 1e-15..1e-12f64, f in 1.0..1e4f64, t in 1e-7..5e-5f64) {
            let e = e_total(es, f, t).unwrap();
            prop_assert!(e_total(es, f * 1.01, t).unwrap() > e);
            prop_assert!(e_total(es, f, t * 1.01).unwrap() > e);
        }

        #[test]
        fn static_scaling(count in 1usize..500, n in 2usize..40) {
            let p = EnergyParams::default();
            let a = e_static_for_count(count, n, &p);
            prop_assert!((e_static_for_count(2 * count, n, &p) / a - 2.0).abs() < 1e-12);
            prop_assert!((e_static_for_count(count, 2 * n, &p) / a - 0.25).abs() < 1e-12);
        }
    }
}
