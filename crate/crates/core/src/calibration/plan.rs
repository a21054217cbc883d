use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::topology::{Hop, MeshKind, MeshTopology};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepClass {
    /// The target and every MZI after it on the route have a dark input.
    Exact,
    /// The target has a dark input; later MZIs rely on calibrated routing.
    NullInput,
    /// Both target inputs are lit from any single source.
    AveragingRequired,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequiredState {
    Cross,
    Bar,
    Free,
}

impl RequiredState {
    fn of(hop: &Hop) -> Self {
        if hop.is_bar() {
            RequiredState::Bar
        } else {
            RequiredState::Cross
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationStep {
    pub mzi_id: usize,
    pub stage: usize,
    pub class: StepClass,
    pub light_input: usize,
    pub light_input_label: String,
    pub detector_output: usize,
    pub detector_label: String,
    /// Input side of the target that receives light.
    pub lit_side: usize,
    /// Output side of the target that leads to the detector.
    pub exit_side: usize,
    /// States of already calibrated MZIs.
    pub required_states: BTreeMap<usize, RequiredState>,
    /// Route MZIs not yet calibrated, held at their design bias.
    pub nominal: BTreeMap<usize, RequiredState>,
    pub dark_inputs: Vec<usize>,
    /// MZI whose external phase shifter sweeps the relative input phase.
    pub averaging_shifter: Option<usize>,
    pub upstream: Vec<Hop>,
    pub downstream: Vec<Hop>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPlan {
    pub kind: MeshKind,
    pub n: usize,
    pub steps: Vec<CalibrationStep>,
}

impl CalibrationPlan {
    pub fn step_for(&self, mzi: usize) -> Option<&CalibrationStep> {
        self.steps.iter().find(|s| s.mzi_id == mzi)
    }

    pub fn count(&self, class: StepClass) -> usize {
        self.steps.iter().filter(|s| s.class == class).count()
    }
}

struct Draft {
    id: usize,
    class: StepClass,
    input: usize,
    lit_side: usize,
    exit_side: usize,
    output: usize,
    upstream: Vec<Hop>,
    downstream: Vec<Hop>,
}

/// Orders MZIs for calibration and picks light source, detector and route
/// for each. Exactly accessible MZIs come first from the input side; the
/// rest follow from the output side so that everything downstream of them
/// is already calibrated and can route light cleanly to the detector.
pub fn calibration_plan(t: &MeshTopology) -> CalibrationPlan {
    let cones: Vec<Vec<[bool; 2]>> = (0..t.n_waveguides()).map(|w| t.lit_cone(w)).collect();
    let input_order: Vec<usize> = t.main_waveguides().iter().chain(t.aux_waveguides()).copied().collect();

    let mut drafts: Vec<Draft> = (0..t.mzi_count())
        .map(|id| {
            if let Some(r) = t.find_route(id) {
                return Draft {
                    id,
                    class: StepClass::Exact,
                    input: r.input_wg,
                    lit_side: r.target.in_side,
                    exit_side: r.target.out_side,
                    output: r.output_wg,
                    upstream: r.upstream,
                    downstream: r.downstream,
                };
            }
            let (exit_side, downstream, output) = t.forward_path(id);
            let single = input_order
                .iter()
                .copied()
                .find(|&w| cones[w][id][0] != cones[w][id][1]);
            let (class, input) = match single {
                Some(w) => (StepClass::NullInput, w),
                None => {
                    let w = input_order
                        .iter()
                        .copied()
                        .find(|&w| cones[w][id][0] || cones[w][id][1])
                        .expect("every MZI is reachable from some input");
                    (StepClass::AveragingRequired, w)
                }
            };
            let lit_side = if cones[input][id][0] { 0 } else { 1 };
            Draft {
                id,
                class,
                input,
                lit_side,
                exit_side,
                output,
                upstream: t.trace_upstream(id, lit_side, input, &cones[input]),
                downstream,
            }
        })
        .collect();

    drafts.sort_by_key(|d| {
        let stage = t.placement(d.id).stage as i64;
        match d.class {
            StepClass::Exact => (0, stage, d.id),
            _ => (1, -stage, d.id),
        }
    });

    let mut calibrated: BTreeSet<usize> = BTreeSet::new();
    let mut steps = Vec::with_capacity(drafts.len());
    for d in drafts {
        let mut required = BTreeMap::new();
        let mut nominal = BTreeMap::new();
        for &m in &calibrated {
            required.insert(m, RequiredState::Free);
        }
        for hop in d.upstream.iter().chain(&d.downstream) {
            let state = RequiredState::of(hop);
            if calibrated.contains(&hop.mzi) {
                required.insert(hop.mzi, state);
            } else {
                nominal.insert(hop.mzi, state);
            }
        }
        let averaging_shifter = match d.class {
            StepClass::AveragingRequired => t.top_output_feeder(d.id),
            _ => None,
        };
        steps.push(CalibrationStep {
            mzi_id: d.id,
            stage: t.placement(d.id).stage,
            class: d.class,
            light_input: d.input,
            light_input_label: t.input_label(d.input),
            detector_output: d.output,
            detector_label: t.output_label(d.output),
            lit_side: d.lit_side,
            exit_side: d.exit_side,
            required_states: required,
            nominal,
            dark_inputs: (0..t.n_waveguides()).filter(|&w| w != d.input).collect(),
            averaging_shifter,
            upstream: d.upstream,
            downstream: d.downstream,
        });
        calibrated.insert(d.id);
    }
    CalibrationPlan {
        kind: t.kind(),
        n: t.n_main(),
        steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{independently_accessible, MeshKind};

    fn plan(kind: MeshKind) -> (MeshTopology, CalibrationPlan) {
        let t = MeshTopology::build(kind, 8).unwrap();
        let p = calibration_plan(&t);
        (t, p)
    }

    #[test]
    fn every_mzi_once_and_states_reference_calibrated_only() {
        for kind in MeshKind::ALL {
            let (t, p) = plan(kind);
            let ids: BTreeSet<usize> = p.steps.iter().map(|s| s.mzi_id).collect();
            assert_eq!(ids.len(), t.mzi_count());
            assert_eq!(p.steps.len(), t.mzi_count());
            let mut done = BTreeSet::new();
            for s in &p.steps {
                for m in s.required_states.keys() {
                    assert!(done.contains(m), "{kind}: step {} uses {}", s.mzi_id, m);
                }
                for m in s.nominal.keys() {
                    assert!(!done.contains(m));
                }
                let mut ports: Vec<usize> = s.dark_inputs.clone();
                ports.push(s.light_input);
                ports.sort_unstable();
                assert_eq!(ports, (0..t.n_waveguides()).collect::<Vec<_>>());
                done.insert(s.mzi_id);
            }
        }
    }

    #[test]
    fn diamond_and_bokun_are_all_exact() {
        for kind in [MeshKind::Diamond, MeshKind::Bokun] {
            let (t, p) = plan(kind);
            assert_eq!(p.count(StepClass::Exact), t.mzi_count());
        }
    }

    #[test]
    fn reck_has_null_inputs_only() {
        let (t, p) = plan(MeshKind::Reck);
        assert_eq!(p.count(StepClass::AveragingRequired), 0);
        assert_eq!(p.count(StepClass::Exact), independently_accessible(&t).len());
    }

    #[test]
    fn clements_needs_averaging() {
        let (_, p) = plan(MeshKind::Clements);
        let avg: Vec<_> = p
            .steps
            .iter()
            .filter(|s| s.class == StepClass::AveragingRequired)
            .collect();
        assert!(!avg.is_empty());
        assert!(avg.iter().all(|s| s.averaging_shifter.is_some()));
    }

    #[test]
    fn bokun_diagonal_routes_use_cross_states() {
        // Light entering an aux input walks a diagonal: every MZI on the way
        // is crossed, as in the hand-built sequences.
        let (t, p) = plan(MeshKind::Bokun);
        let diagonal = p
            .steps
            .iter()
            .filter(|s| !t.is_main(s.light_input) && t.is_main(s.detector_output))
            .filter(|s| s.upstream.len() + s.downstream.len() >= 4)
            .find(|s| s.upstream.iter().chain(&s.downstream).all(|h| !h.is_bar()));
        assert!(diagonal.is_some());
    }

    #[test]
    fn reck_outer_diagonal_step_lights_single_main_input() {
        let (t, p) = plan(MeshKind::Reck);
        // Light enters a main input; all upstream route MZIs are already
        // calibrated and crossed, every other input dark.
        let s = p
            .steps
            .iter()
            .filter(|s| s.class == StepClass::Exact && s.upstream.len() >= 3)
            .find(|s| s.upstream.iter().all(|h| s.required_states.get(&h.mzi) == Some(&RequiredState::Cross)))
            .expect("an exact step fed through crossed, calibrated MZIs");
        assert!(t.is_main(s.light_input));
        assert_eq!(s.dark_inputs.len(), 7);
    }

    #[test]
    fn plan_serializes() {
        let (_, p) = plan(MeshKind::Bokun);
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(v["steps"].as_array().unwrap().len(), 40);
        assert_eq!(v["steps"][0]["class"], "exact");
    }
}
