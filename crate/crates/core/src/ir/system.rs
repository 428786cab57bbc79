use crate::design::{Attachments, Design, PdnGeometry, PdnIndex, StripeId, Technology};
use crate::error::{Error, Result};
use crate::geom::{Dbu, LayerId, Point};
use crate::linalg::{CsrMatrix, TripletMatrix};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Resistance between a load and its attachment point on the grid.
pub const DEFAULT_ATTACH_RESISTANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildOptions {
    /// ohm
    pub attach_resistance: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            attach_resistance: DEFAULT_ATTACH_RESISTANCE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridNode {
    pub layer: LayerId,
    pub at: Point,
}

/// Role of a grid node in the grounded formulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Unknown(usize),
    /// Tied to an ideal pad.
    Ground,
    /// Not connected to any pad; carries no current.
    Floating,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BranchKind {
    /// Wire between consecutive nodes of a track; lists the stripes it runs
    /// through and the length inside each.
    Wire {
        pieces: Vec<(StripeId, Dbu)>,
    },
    Via {
        index: usize,
    },
}

#[derive(Debug, Clone)]
pub struct Branch<T> {
    pub a: usize,
    pub b: usize,
    pub conductance: T,
    pub kind: BranchKind,
}

/// A load hooked to a grid node through the attachment resistance.
#[derive(Debug, Clone, Copy)]
pub struct SourceTap {
    pub node: usize,
    pub at: Point,
    pub current: f64,
    pub resistance: f64,
}

/// Grounded nodal system `G d = i` for the drop `d = vdd - v`, in mV with
/// currents in mA and conductances in 1/ohm.
#[derive(Debug, Clone)]
pub struct ConductanceSystem<T: Scalar = f64> {
    pub nodes: Vec<GridNode>,
    pub slots: Vec<Slot>,
    /// Grid node of each unknown.
    pub unknown_nodes: Vec<usize>,
    pub matrix: CsrMatrix<T>,
    pub currents: Vec<T>,
    pub branches: Vec<Branch<T>>,
    pub taps: Vec<SourceTap>,
    pub pad_nodes: Vec<usize>,
    pub vdd_mv: f64,
    pub layers: Vec<String>,
}

impl<T: Scalar> ConductanceSystem<T> {
    pub fn unknowns(&self) -> usize {
        self.unknown_nodes.len()
    }

    /// Drop at a grid node given the unknown vector.
    pub fn node_drop(&self, x: &[T], node: usize) -> T {
        match self.slots[node] {
            Slot::Unknown(k) => x[k],
            Slot::Ground | Slot::Floating => T::zero(),
        }
    }
}

/// Assemble the conductance system for a PDN geometry.
///
/// One node per via landing, pad attachment and load attachment on each
/// track; runs of abutting stripes on a track conduct as one wire, so the
/// wire between consecutive nodes is `sheet_resistance * length / width`
/// summed over the stripes it crosses. Pads are folded out as ground.
pub fn build_system<T: Scalar>(
    pdn: &PdnGeometry,
    design: &Design,
    tech: &Technology,
    opts: &BuildOptions,
) -> Result<ConductanceSystem<T>> {
    if pdn.layers != tech.layer_names() {
        return Err(Error::LayerMismatch(
            "geometry and technology layer stacks differ".into(),
        ));
    }
    if !(opts.attach_resistance > 0.0) {
        return Err(Error::config("attachment resistance must be positive"));
    }
    let index = PdnIndex::new(pdn);
    index.check_disjoint_tracks()?;
    let att = Attachments::compute(pdn, &index, design)?;

    // Along-track positions that need a node, per track.
    let mut marks: HashMap<(LayerId, Dbu), Vec<Dbu>> = HashMap::new();
    let mut mark = |layer: LayerId, p: Point| -> Result<()> {
        let dir = index
            .direction(layer)
            .ok_or_else(|| Error::Geometry(format!("no stripes on layer {}", pdn.layer_name(layer))))?;
        marks.entry((layer, p.across(dir))).or_default().push(p.along(dir));
        Ok(())
    };
    for (i, v) in pdn.vias.iter().enumerate() {
        if index.piece_at(v.lower, v.at()).is_none() || index.piece_at(v.upper, v.at()).is_none() {
            return Err(Error::Geometry(format!("via {i} does not land on a stripe crossing")));
        }
        mark(v.lower, v.at())?;
        mark(v.upper, v.at())?;
    }
    for (piece, p) in att.pads.iter().chain(&att.sources) {
        mark(pdn.stripes[*piece].layer, *p)?;
    }

    let mut nodes = Vec::new();
    let mut node_of: HashMap<(LayerId, Point), usize> = HashMap::new();
    let mut branches: Vec<Branch<T>> = Vec::new();
    for key in index.track_keys() {
        let Some(mut along) = marks.remove(&key) else { continue };
        along.sort_unstable();
        along.dedup();
        let (layer, coord) = key;
        let spec = tech.layer(layer);
        let dir = spec.direction;
        let pieces = index.track(layer, coord);

        // Runs of abutting stripes conduct as one wire.
        let mut runs: Vec<(Dbu, Dbu)> = Vec::new();
        for &i in pieces {
            let s = &pdn.stripes[i];
            match runs.last_mut() {
                Some(r) if s.start <= r.1 => r.1 = r.1.max(s.end),
                _ => runs.push((s.start, s.end)),
            }
        }

        let mut prev: Option<(usize, Dbu, usize)> = None;
        let mut run = 0;
        let mut cursor = 0;
        for t in along {
            while runs[run].1 < t {
                run += 1;
            }
            debug_assert!(runs[run].0 <= t, "marked positions lie on metal");
            let p = Point::from_track(dir, t, coord);
            let id = nodes.len();
            nodes.push(GridNode { layer, at: p });
            node_of.insert((layer, p), id);

            if let Some((pid, pt, prun)) = prev {
                if prun == run {
                    while pdn.stripes[pieces[cursor]].end <= pt {
                        cursor += 1;
                    }
                    let mut ratio = 0.0;
                    let mut used = Vec::new();
                    for &i in &pieces[cursor..] {
                        let s = &pdn.stripes[i];
                        if s.start >= t {
                            break;
                        }
                        let len = s.end.min(t) - s.start.max(pt);
                        if len > 0 {
                            ratio += len as f64 / s.width as f64;
                            used.push((s.id, len));
                        }
                    }
                    branches.push(Branch {
                        a: pid,
                        b: id,
                        conductance: T::of(1.0 / (spec.sheet_resistance * ratio)),
                        kind: BranchKind::Wire { pieces: used },
                    });
                }
            }
            prev = Some((id, t, run));
        }
    }

    for (i, v) in pdn.vias.iter().enumerate() {
        let a = node_of[&(v.lower, v.at())];
        let b = node_of[&(v.upper, v.at())];
        branches.push(Branch {
            a,
            b,
            conductance: T::of(1.0 / v.resistance),
            kind: BranchKind::Via { index: i },
        });
    }

    let mut pad_nodes: Vec<usize> = att
        .pads
        .iter()
        .map(|(piece, p)| node_of[&(pdn.stripes[*piece].layer, *p)])
        .collect();
    pad_nodes.sort_unstable();
    pad_nodes.dedup();

    // Reachability from the pads.
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for b in &branches {
        adj[b.a].push(b.b);
        adj[b.b].push(b.a);
    }
    let mut slots = vec![Slot::Floating; nodes.len()];
    let mut stack = pad_nodes.clone();
    for &p in &pad_nodes {
        slots[p] = Slot::Ground;
    }
    let mut reached = vec![false; nodes.len()];
    for &p in &pad_nodes {
        reached[p] = true;
    }
    while let Some(n) = stack.pop() {
        for &m in &adj[n] {
            if !reached[m] {
                reached[m] = true;
                stack.push(m);
            }
        }
    }
    let mut unknown_nodes = Vec::new();
    for (n, r) in reached.iter().enumerate() {
        if *r && slots[n] != Slot::Ground {
            slots[n] = Slot::Unknown(unknown_nodes.len());
            unknown_nodes.push(n);
        }
    }

    let mut taps = Vec::with_capacity(design.sources.len());
    for (k, ((piece, p), s)) in att.sources.iter().zip(&design.sources).enumerate() {
        let node = node_of[&(pdn.stripes[*piece].layer, *p)];
        if slots[node] == Slot::Floating {
            return Err(Error::Connectivity {
                index: k,
                x_um: s.x,
                y_um: s.y,
            });
        }
        taps.push(SourceTap {
            node,
            at: Point::from_um(s.x, s.y),
            current: s.current,
            resistance: opts.attach_resistance,
        });
    }

    let n = unknown_nodes.len();
    let mut trip = TripletMatrix::with_capacity(n, 4 * branches.len());
    for b in &branches {
        match (slots[b.a], slots[b.b]) {
            (Slot::Unknown(i), Slot::Unknown(j)) => trip.stamp_branch(i, j, b.conductance),
            (Slot::Unknown(i), Slot::Ground) | (Slot::Ground, Slot::Unknown(i)) => trip.stamp_ground(i, b.conductance),
            _ => {}
        }
    }
    let mut currents = vec![T::zero(); n];
    for t in &taps {
        if let Slot::Unknown(i) = slots[t.node] {
            currents[i] += T::of(t.current);
        }
    }

    Ok(ConductanceSystem {
        nodes,
        slots,
        unknown_nodes,
        matrix: trip.to_csr(),
        currents,
        branches,
        taps,
        pad_nodes,
        vdd_mv: tech.vdd_mv,
        layers: pdn.layers.clone(),
    })
}
