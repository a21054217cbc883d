//! Mesh topologies on a (stage, waveguide) lattice.
//!
//! Waveguides are numbered top to bottom from 0 across the full port set,
//! auxiliary waveguides included. Every waveguide starts at one input port
//! and ends at one output port with the same index. An MZI placed at
//! `top` couples waveguides `top` and `top + 1`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{MeshError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshKind {
    Reck,
    Clements,
    Diamond,
    Bokun,
}

impl MeshKind {
    pub const ALL: [MeshKind; 4] = [
        MeshKind::Reck,
        MeshKind::Diamond,
        MeshKind::Clements,
        MeshKind::Bokun,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeshKind::Reck => "reck",
            MeshKind::Clements => "clements",
            MeshKind::Diamond => "diamond",
            MeshKind::Bokun => "bokun",
        }
    }
}

impl fmt::Display for MeshKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeshKind {
    type Err = MeshError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "reck" => Ok(MeshKind::Reck),
            "clements" => Ok(MeshKind::Clements),
            "diamond" => Ok(MeshKind::Diamond),
            "bokun" => Ok(MeshKind::Bokun),
            other => Err(MeshError::InvalidArgument(format!("unknown mesh kind '{other}'"))),
        }
    }
}

/// Number of MZIs in an `n`-port mesh of the given kind.
pub fn mzi_count(kind: MeshKind, n: usize) -> Result<usize> {
    if n < 2 {
        return Err(MeshError::UnsupportedSize {
            kind: kind.name(),
            n,
            reason: "at least two ports are required",
        });
    }
    match kind {
        MeshKind::Reck | MeshKind::Clements => Ok(n * (n - 1) / 2),
        MeshKind::Diamond => Ok((n - 1) * (n - 1)),
        MeshKind::Bokun => {
            if !n.is_multiple_of(2) {
                return Err(MeshError::UnsupportedSize {
                    kind: "bokun",
                    n,
                    reason: "port count must be even",
                });
            }
            Ok(n * (3 * n - 4) / 4)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MziPlacement {
    pub id: usize,
    /// Column index, starting at 1.
    pub stage: usize,
    /// Upper of the two coupled waveguides.
    pub top: usize,
}

/// Where an MZI input comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Port(usize),
    /// Output `side` (0 = top, 1 = bottom) of MZI `id`.
    Mzi { id: usize, side: usize },
}

/// Where an MZI output goes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sink {
    Port(usize),
    /// Input `side` of MZI `id`.
    Mzi { id: usize, side: usize },
}

#[derive(Clone, Debug)]
pub struct MeshTopology {
    kind: MeshKind,
    n_main: usize,
    n_waveguides: usize,
    placements: Vec<MziPlacement>,
    main: Vec<usize>,
    aux: Vec<usize>,
    input_phase_shifters: usize,
    inputs: Vec<[Source; 2]>,
    outputs: Vec<[Sink; 2]>,
    neighbors: Vec<Vec<usize>>,
}

impl MeshTopology {
    pub fn build(kind: MeshKind, n: usize) -> Result<Self> {
        match kind {
            MeshKind::Reck => build_reck(n),
            MeshKind::Clements => build_clements(n),
            MeshKind::Diamond => build_diamond(n),
            MeshKind::Bokun => build_bokun(n),
        }
    }

    fn assemble(
        kind: MeshKind,
        n_main: usize,
        n_waveguides: usize,
        raw: Vec<(usize, usize)>,
        main: Vec<usize>,
        input_phase_shifters: usize,
    ) -> Self {
        let mut raw = raw;
        raw.sort_unstable();
        let placements: Vec<MziPlacement> = raw
            .into_iter()
            .enumerate()
            .map(|(id, (stage, top))| MziPlacement { id, stage, top })
            .collect();

        let mut last: Vec<Source> = (0..n_waveguides).map(Source::Port).collect();
        let mut inputs = Vec::with_capacity(placements.len());
        let mut outputs = vec![[Sink::Port(usize::MAX); 2]; placements.len()];
        for p in &placements {
            assert!(p.top + 1 < n_waveguides, "placement outside lattice");
            let srcs = [last[p.top], last[p.top + 1]];
            for (side, src) in srcs.iter().enumerate() {
                if let Source::Mzi { id, side: out } = *src {
                    assert_ne!(id, p.id);
                    outputs[id][out] = Sink::Mzi { id: p.id, side };
                }
            }
            inputs.push(srcs);
            last[p.top] = Source::Mzi { id: p.id, side: 0 };
            last[p.top + 1] = Source::Mzi { id: p.id, side: 1 };
        }
        for (wg, src) in last.iter().enumerate() {
            if let Source::Mzi { id, side } = *src {
                outputs[id][side] = Sink::Port(wg);
            }
        }

        let neighbors = placements
            .iter()
            .map(|p| {
                placements
                    .iter()
                    .filter(|q| {
                        q.id != p.id && p.stage.abs_diff(q.stage) <= 1 && p.top.abs_diff(q.top) <= 2
                    })
                    .map(|q| q.id)
                    .collect()
            })
            .collect();

        let aux = (0..n_waveguides).filter(|w| !main.contains(w)).collect();
        Self {
            kind,
            n_main,
            n_waveguides,
            placements,
            main,
            aux,
            input_phase_shifters,
            inputs,
            outputs,
            neighbors,
        }
    }

    pub fn kind(&self) -> MeshKind {
        self.kind
    }

    pub fn n_main(&self) -> usize {
        self.n_main
    }

    /// Total number of waveguides (= input ports = output ports).
    pub fn n_waveguides(&self) -> usize {
        self.n_waveguides
    }

    pub fn mzi_count(&self) -> usize {
        self.placements.len()
    }

    pub fn placements(&self) -> &[MziPlacement] {
        &self.placements
    }

    pub fn placement(&self, id: usize) -> &MziPlacement {
        &self.placements[id]
    }

    /// Waveguides carrying the main inputs and outputs, top to bottom.
    pub fn main_waveguides(&self) -> &[usize] {
        &self.main
    }

    pub fn aux_waveguides(&self) -> &[usize] {
        &self.aux
    }

    pub fn input_phase_shifters(&self) -> usize {
        self.input_phase_shifters
    }

    pub fn is_main(&self, wg: usize) -> bool {
        self.main.contains(&wg)
    }

    pub fn inputs_of(&self, id: usize) -> [Source; 2] {
        self.inputs[id]
    }

    pub fn outputs_of(&self, id: usize) -> [Sink; 2] {
        self.outputs[id]
    }

    /// MZIs thermally adjacent to `id`: same or neighboring stage and at most
    /// one waveguide pair apart.
    pub fn neighbors(&self, id: usize) -> &[usize] {
        &self.neighbors[id]
    }

    pub fn stages(&self) -> usize {
        self.placements.iter().map(|p| p.stage).max().unwrap_or(0)
    }

    pub fn input_label(&self, wg: usize) -> String {
        self.port_label(wg, 'I')
    }

    pub fn output_label(&self, wg: usize) -> String {
        self.port_label(wg, 'O')
    }

    fn port_label(&self, wg: usize, prefix: char) -> String {
        match self.main.iter().position(|&w| w == wg) {
            Some(k) => format!("{prefix}{k}"),
            None => {
                let k = self.aux.iter().position(|&w| w == wg).unwrap_or(wg);
                format!("{prefix}'{k}")
            }
        }
    }

    /// Lit cone of a single input: every MZI with any lit input lights both
    /// of its outputs. Returns per-MZI `[top_lit, bottom_lit]`.
    pub fn lit_cone(&self, input_wg: usize) -> Vec<[bool; 2]> {
        let mut lit = vec![[false; 2]; self.placements.len()];
        for id in 0..self.placements.len() {
            for side in 0..2 {
                lit[id][side] = match self.inputs[id][side] {
                    Source::Port(w) => w == input_wg,
                    Source::Mzi { id: p, .. } => lit[p][0] || lit[p][1],
                };
            }
        }
        lit
    }

    /// Searches for a monitoring route through `id`: light enters at one input
    /// port, reaches exactly one input of `id`, and every later MZI on the way
    /// to the detector has its off-path input dark.
    pub fn find_route(&self, id: usize) -> Option<Route> {
        let order = self.main.iter().chain(self.aux.iter()).copied();
        let mut best: Option<Route> = None;
        for input in order {
            let cone = self.lit_cone(input);
            let [t, b] = cone[id];
            if t == b {
                continue;
            }
            if let Some(route) = self.route_from(id, input, &cone) {
                let main_out = self.is_main(route.output_wg);
                if main_out {
                    return Some(route);
                }
                best.get_or_insert(route);
            }
        }
        best
    }

    fn route_from(&self, id: usize, input: usize, cone: &[[bool; 2]]) -> Option<Route> {
        let lit_side = if cone[id][0] { 0 } else { 1 };
        let upstream = self.trace_upstream(id, lit_side, input, cone);

        // BFS over (mzi, exit side) moves; predecessor map rebuilds the path.
        let n = self.placements.len();
        let mut prev: Vec<Option<(usize, usize, usize)>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[id] = true;
        let mut queue = VecDeque::from([id]);
        let mut found: Vec<(usize, usize, usize)> = Vec::new();
        while let Some(m) = queue.pop_front() {
            for out_side in 0..2 {
                match self.outputs[m][out_side] {
                    Sink::Port(w) => found.push((m, out_side, w)),
                    Sink::Mzi { id: next, side } => {
                        let other = 1 - side;
                        if !cone[next][other] && !seen[next] {
                            seen[next] = true;
                            prev[next] = Some((m, out_side, side));
                            queue.push_back(next);
                        }
                    }
                }
            }
        }
        let (last, last_side, output_wg) = found
            .iter()
            .copied()
            .find(|&(_, _, w)| self.is_main(w))
            .or_else(|| found.first().copied())?;

        let mut downstream = Vec::new();
        let mut out_side = last_side;
        let mut cur = last;
        while cur != id {
            let (p, p_out, in_side) = prev[cur].expect("bfs tree");
            downstream.push(Hop {
                mzi: cur,
                in_side,
                out_side,
            });
            out_side = p_out;
            cur = p;
        }
        downstream.reverse();
        Some(Route {
            mzi: id,
            input_wg: input,
            output_wg,
            target: Hop {
                mzi: id,
                in_side: lit_side,
                out_side,
            },
            upstream,
            downstream,
        })
    }

    /// Follows lit sources backwards from input `side` of `id` to the port
    /// `input`, which must light that side.
    pub fn trace_upstream(&self, id: usize, side: usize, input: usize, cone: &[[bool; 2]]) -> Vec<Hop> {
        let mut hops = Vec::new();
        let mut src = self.inputs[id][side];
        loop {
            match src {
                Source::Port(w) => {
                    debug_assert_eq!(w, input);
                    break;
                }
                Source::Mzi { id: p, side: out } => {
                    let in_side = if cone[p][0] { 0 } else { 1 };
                    hops.push(Hop {
                        mzi: p,
                        in_side,
                        out_side: out,
                    });
                    src = self.inputs[p][in_side];
                }
            }
        }
        hops.reverse();
        hops
    }
}

impl MeshTopology {
    /// Shortest forward path from `id` to an output port, ignoring lighting.
    /// Main outputs are preferred. Returns the exit side of `id`, the hops
    /// after it and the output waveguide.
    pub fn forward_path(&self, id: usize) -> (usize, Vec<Hop>, usize) {
        let n = self.placements.len();
        let mut prev: Vec<Option<(usize, usize, usize)>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[id] = true;
        let mut queue = VecDeque::from([id]);
        let mut found: Vec<(usize, usize, usize)> = Vec::new();
        while let Some(m) = queue.pop_front() {
            for out_side in 0..2 {
                match self.outputs[m][out_side] {
                    Sink::Port(w) => found.push((m, out_side, w)),
                    Sink::Mzi { id: next, side } => {
                        if !seen[next] {
                            seen[next] = true;
                            prev[next] = Some((m, out_side, side));
                            queue.push_back(next);
                        }
                    }
                }
            }
        }
        let (last, last_side, output) = found
            .iter()
            .copied()
            .find(|&(_, _, w)| self.is_main(w))
            .unwrap_or(found[0]);
        let mut hops = Vec::new();
        let mut out_side = last_side;
        let mut cur = last;
        while cur != id {
            let (p, p_out, in_side) = prev[cur].expect("bfs tree");
            hops.push(Hop {
                mzi: cur,
                in_side,
                out_side,
            });
            out_side = p_out;
            cur = p;
        }
        hops.reverse();
        (out_side, hops, output)
    }

    /// Predecessor whose top output feeds `id`, if any.
    pub fn top_output_feeder(&self, id: usize) -> Option<usize> {
        self.inputs[id].iter().find_map(|s| match *s {
            Source::Mzi { id: p, side: 0 } => Some(p),
            _ => None,
        })
    }
}

/// One MZI traversed by a route: enters on `in_side`, leaves on `out_side`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hop {
    pub mzi: usize,
    pub in_side: usize,
    pub out_side: usize,
}

impl Hop {
    /// Same-side traversal is the bar state, opposite side is cross.
    pub fn is_bar(&self) -> bool {
        self.in_side == self.out_side
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Route {
    pub mzi: usize,
    pub input_wg: usize,
    pub output_wg: usize,
    pub target: Hop,
    /// MZIs between the input port and the target, in propagation order.
    pub upstream: Vec<Hop>,
    /// MZIs between the target and the detector, in propagation order.
    pub downstream: Vec<Hop>,
}

/// Triangular mesh: diagonals of length N-1 ... 1 plus N input phase shifters.
pub fn build_reck(n: usize) -> Result<MeshTopology> {
    mzi_count(MeshKind::Reck, n)?;
    let mut raw = Vec::new();
    for a in 0..n - 1 {
        for b in 0..=a {
            raw.push((a + b + 1, a - b));
        }
    }
    Ok(MeshTopology::assemble(MeshKind::Reck, n, n, raw, (0..n).collect(), n))
}

/// Rectangular mesh with N alternating columns.
pub fn build_clements(n: usize) -> Result<MeshTopology> {
    mzi_count(MeshKind::Clements, n)?;
    if !n.is_multiple_of(2) {
        return Err(MeshError::UnsupportedSize {
            kind: "clements",
            n,
            reason: "port count must be even",
        });
    }
    let raw = clements_pairs(n, 0);
    Ok(MeshTopology::assemble(MeshKind::Clements, n, n, raw, (0..n).collect(), 0))
}

fn clements_pairs(n: usize, offset: usize) -> Vec<(usize, usize)> {
    let mut raw = Vec::new();
    for stage in 1..=n {
        let start = if stage % 2 == 1 { 0 } else { 1 };
        let mut top = start;
        while top + 1 < n {
            raw.push((stage, top + offset));
            top += 2;
        }
    }
    raw
}

/// Full diamond: the Reck triangle on the lower N waveguides mirrored onto
/// N-2 auxiliary waveguides above, columns of 1, 2, ..., N-1, ..., 2, 1 MZIs.
pub fn build_diamond(n: usize) -> Result<MeshTopology> {
    mzi_count(MeshKind::Diamond, n)?;
    let c = n - 2;
    let w = 2 * n - 2;
    let mut raw = Vec::new();
    for a in 0..n - 1 {
        for b in 0..n - 1 {
            raw.push((a + b + 1, c + a - b));
        }
    }
    Ok(MeshTopology::assemble(MeshKind::Diamond, n, w, raw, (c..c + n).collect(), 0))
}

/// Clements core with triangular caps of T(N/2 - 1) MZIs above and below,
/// each cap level adding one auxiliary waveguide.
pub fn build_bokun(n: usize) -> Result<MeshTopology> {
    mzi_count(MeshKind::Bokun, n)?;
    let k_aux = n / 2 - 1;
    let w = n + 2 * k_aux;
    let mut raw = clements_pairs(n, k_aux);
    for level in 1..=k_aux {
        let mut stage = level + 1;
        while stage + level < n {
            raw.push((stage, k_aux - level));
            raw.push((stage, k_aux + n + level - 2));
            stage += 2;
        }
    }
    Ok(MeshTopology::assemble(
        MeshKind::Bokun,
        n,
        w,
        raw,
        (k_aux..k_aux + n).collect(),
        0,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralReport {
    pub kind: MeshKind,
    pub n: usize,
    pub mzi_count: usize,
    pub depth: usize,
    pub min_path: usize,
    pub max_path: usize,
    pub accessible_count: usize,
    pub accessible_fraction: f64,
    #[serde(skip)]
    pub accessible_ids: BTreeSet<usize>,
}

pub fn structural_report(t: &MeshTopology) -> StructuralReport {
    let n = t.mzi_count();
    let mut longest = vec![0usize; n];
    // Main-port path statistics; None marks "not reachable from a main input".
    let mut shortest_main: Vec<Option<usize>> = vec![None; n];
    let mut longest_main: Vec<Option<usize>> = vec![None; n];
    for id in 0..n {
        let mut l = 0;
        let mut smin: Option<usize> = None;
        let mut smax: Option<usize> = None;
        for src in t.inputs_of(id) {
            let (ll, lo, hi) = match src {
                Source::Port(w) => {
                    let z = t.is_main(w).then_some(0);
                    (0, z, z)
                }
                Source::Mzi { id: p, .. } => (longest[p], shortest_main[p], longest_main[p]),
            };
            l = l.max(ll);
            smin = match (smin, lo) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
            smax = match (smax, hi) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            };
        }
        longest[id] = l + 1;
        shortest_main[id] = smin.map(|v| v + 1);
        longest_main[id] = smax.map(|v| v + 1);
    }

    let mut min_path = usize::MAX;
    let mut max_path = 0;
    let mut touched = vec![false; t.n_waveguides()];
    for id in 0..n {
        let p = t.placement(id);
        touched[p.top] = true;
        touched[p.top + 1] = true;
        for sink in t.outputs_of(id) {
            if let Sink::Port(w) = sink {
                if t.is_main(w) {
                    if let (Some(lo), Some(hi)) = (shortest_main[id], longest_main[id]) {
                        min_path = min_path.min(lo);
                        max_path = max_path.max(hi);
                    }
                }
            }
        }
    }
    if t.main_waveguides().iter().any(|&w| !touched[w]) {
        min_path = 0;
    }
    if min_path == usize::MAX {
        min_path = 0;
    }

    let accessible_ids = independently_accessible(t);
    StructuralReport {
        kind: t.kind(),
        n: t.n_main(),
        mzi_count: n,
        depth: longest.iter().copied().max().unwrap_or(0),
        min_path,
        max_path,
        accessible_count: accessible_ids.len(),
        accessible_fraction: if n == 0 {
            0.0
        } else {
            accessible_ids.len() as f64 / n as f64
        },
        accessible_ids,
    }
}

/// MZIs that can be monitored through some input/output pair while their
/// own off input and the off inputs of all later MZIs on the route stay dark.
pub fn independently_accessible(t: &MeshTopology) -> BTreeSet<usize> {
    let cones: Vec<(usize, Vec<[bool; 2]>)> = (0..t.n_waveguides())
        .map(|w| (w, t.lit_cone(w)))
        .collect();
    (0..t.mzi_count())
        .filter(|&id| {
            cones.iter().any(|(w, cone)| {
                cone[id][0] != cone[id][1] && t.route_from(id, *w, cone).is_some()
            })
        })
        .collect()
}
