use crate::design::{Attachments, Design, PdnGeometry, PdnIndex, PieceConnectivity, StripeId};
use crate::error::{Error, Result};
use crate::geom::{dbu_to_um, Dbu, Direction, LayerId, Point};
use crate::windowing::WindowGrid;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};

/// Removal chosen for one candidate window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub window: usize,
    pub row: usize,
    pub col: usize,
    pub f: f64,
    /// Direction served first.
    pub direction: Direction,
    /// Uniform-grid PDN length in the window, dbu.
    pub reference: Dbu,
    /// PDN length present before this plan, dbu.
    pub present: Dbu,
    pub budget: Dbu,
    /// Segments to remove, in selection order.
    pub removed: Vec<StripeId>,
    /// Removed length per layer name, dbu.
    pub removed_by_layer: BTreeMap<String, Dbu>,
}

impl WindowPlan {
    pub fn removed_length(&self) -> Dbu {
        self.removed_by_layer.values().sum()
    }

    pub fn removed_um(&self) -> f64 {
        dbu_to_um(self.removed_length())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReductionPlan {
    pub windows: Vec<WindowPlan>,
    /// Planned segments left in place by the connectivity guard.
    pub skipped: Vec<StripeId>,
}

impl ReductionPlan {
    pub fn removals(&self) -> Vec<StripeId> {
        self.windows.iter().flat_map(|w| w.removed.iter().copied()).collect()
    }

    pub fn removed_by_layer(&self) -> BTreeMap<String, Dbu> {
        let mut out = BTreeMap::new();
        for w in &self.windows {
            for (l, d) in &w.removed_by_layer {
                *out.entry(l.clone()).or_insert(0) += d;
            }
        }
        out
    }

    /// Remove skipped segments from the window records.
    pub fn drop_skipped(&mut self, pdn: &PdnGeometry, skipped: &[StripeId]) {
        let skip: HashSet<StripeId> = skipped.iter().copied().collect();
        for w in &mut self.windows {
            w.removed.retain(|id| !skip.contains(id));
            w.removed_by_layer = layer_lengths(pdn, &w.removed);
        }
        self.skipped.extend_from_slice(skipped);
    }
}

fn layer_lengths(pdn: &PdnGeometry, ids: &[StripeId]) -> BTreeMap<String, Dbu> {
    let mut out = BTreeMap::new();
    for id in ids {
        let s = pdn.stripe(*id).expect("planned segment exists");
        *out.entry(pdn.layer_name(s.layer).to_string()).or_insert(0) += s.length();
    }
    out
}

fn midpoint(pdn: &PdnGeometry, i: usize) -> Point {
    let s = &pdn.stripes[i];
    Point::from_track(s.direction, s.start + s.length() / 2, s.coord)
}

fn lengths_by_window(pdn: &PdnGeometry, grid: &WindowGrid) -> Vec<Dbu> {
    let mut out = vec![0; grid.len()];
    for (i, s) in pdn.stripes.iter().enumerate() {
        if let Some(w) = grid.locate(midpoint(pdn, i)) {
            out[w] += s.length();
        }
    }
    out
}

/// Geometry segmented at window boundaries, indexed for planning.
#[derive(Debug, Clone)]
pub struct PlanContext<'a> {
    pub pdn: &'a PdnGeometry,
    pub grid: &'a WindowGrid,
    /// Stripe indices per window.
    pub members: Vec<Vec<usize>>,
    /// Stripes hosting a load or pad attachment.
    pub protected: HashSet<usize>,
    pub reference: Vec<Dbu>,
    pub present: Vec<Dbu>,
}

impl<'a> PlanContext<'a> {
    /// `pdn` must already be split at the grid's window boundaries. The
    /// reference geometry, when given, is the uniform grid the budget is
    /// measured against, so length already missing counts as removed.
    pub fn new(
        pdn: &'a PdnGeometry,
        design: &Design,
        grid: &'a WindowGrid,
        reference: Option<&PdnGeometry>,
    ) -> Result<Self> {
        let index = PdnIndex::new(pdn);
        let att = Attachments::compute(pdn, &index, design)?;
        let mut members = vec![Vec::new(); grid.len()];
        for i in 0..pdn.stripes.len() {
            if let Some(w) = grid.locate(midpoint(pdn, i)) {
                members[w].push(i);
            }
        }
        let present = lengths_by_window(pdn, grid);
        let reference = match reference {
            Some(r) => {
                let (xs, ys) = grid.cuts();
                lengths_by_window(&r.split_at(&xs, &ys), grid)
            }
            None => present.clone(),
        };
        Ok(Self {
            pdn,
            grid,
            members,
            protected: att.host_pieces(),
            reference,
            present,
        })
    }
}

/// `k` evenly spaced picks among the unprotected tracks, as positions in
/// `tracks`; `None` if that would place two picks on neighbouring tracks.
fn spaced(tracks: &[usize], protected: &HashSet<usize>, k: usize) -> Option<Vec<usize>> {
    let eligible: Vec<usize> = (0..tracks.len()).filter(|&p| !protected.contains(&tracks[p])).collect();
    let m = eligible.len();
    if k == 0 || k > m {
        return None;
    }
    let picks: Vec<usize> = (0..k).map(|i| eligible[(2 * i + 1) * m / (2 * k)]).collect();
    picks.windows(2).all(|w| w[1] >= w[0] + 2).then_some(picks)
}

/// Choose segments inside `window` whose total length is the largest that
/// fits `F * reference - (reference - present)`. Layers of the `preferred`
/// direction are filled first, round-robin, each with evenly spaced
/// non-adjacent tracks; the other direction takes what budget remains.
pub fn plan_reduction(ctx: &PlanContext<'_>, window: usize, f: f64, preferred: Direction) -> WindowPlan {
    let pdn = ctx.pdn;
    let (row, col) = ctx.grid.row_col(window);
    let reference = ctx.reference[window];
    let present = ctx.present[window];
    let budget = if f > 0.0 {
        (f * reference as f64).floor() as Dbu - (reference - present).max(0)
    } else {
        0
    };
    let mut plan = WindowPlan {
        window,
        row,
        col,
        f,
        direction: preferred,
        reference,
        present,
        budget,
        removed: Vec::new(),
        removed_by_layer: BTreeMap::new(),
    };
    if budget <= 0 {
        return plan;
    }

    let mut tracks: BTreeMap<LayerId, Vec<usize>> = BTreeMap::new();
    for &i in &ctx.members[window] {
        tracks.entry(pdn.stripes[i].layer).or_default().push(i);
    }
    for t in tracks.values_mut() {
        t.sort_by_key(|&i| (pdn.stripes[i].coord, pdn.stripes[i].start));
    }

    let len = |t: &[usize], picks: &[usize]| -> Dbu { picks.iter().map(|&p| pdn.stripes[t[p]].length()).sum() };
    let mut used: Dbu = 0;
    for dir in [preferred, preferred.other()] {
        let layers: Vec<LayerId> = tracks
            .iter()
            .filter(|(_, t)| pdn.stripes[t[0]].direction == dir)
            .map(|(l, _)| *l)
            .collect();
        let mut chosen: HashMap<LayerId, Vec<usize>> = HashMap::new();
        let mut open: Vec<bool> = vec![true; layers.len()];
        while open.iter().any(|o| *o) {
            for (k, l) in layers.iter().enumerate() {
                if !open[k] {
                    continue;
                }
                let t = &tracks[l];
                let cur = chosen.get(l).map_or(0, Vec::len);
                let old = chosen.get(l).map_or(0, |c| len(t, c));
                match spaced(t, &ctx.protected, cur + 1) {
                    Some(p) if used - old + len(t, &p) <= budget => {
                        used += len(t, &p) - old;
                        chosen.insert(*l, p);
                    }
                    _ => open[k] = false,
                }
            }
        }
        for l in &layers {
            if let Some(p) = chosen.get(l) {
                plan.removed.extend(p.iter().map(|&q| pdn.stripes[tracks[l][q]].id));
            }
        }
    }
    plan.removed_by_layer = layer_lengths(pdn, &plan.removed);
    plan
}

/// Result of applying a plan.
#[derive(Debug, Clone)]
pub struct Applied {
    pub pdn: PdnGeometry,
    /// Segments kept to avoid stranding a load or because they host an
    /// attachment.
    pub skipped: Vec<StripeId>,
}

/// Whether every load still reaches a pad.
pub fn loads_connected(pdn: &PdnGeometry, design: &Design) -> bool {
    let index = PdnIndex::new(pdn);
    let Ok(att) = Attachments::compute(pdn, &index, design) else {
        return false;
    };
    let conn = PieceConnectivity::new(pdn, &index);
    att.check_reachable(&conn, design).is_ok()
}

/// Remove the listed segments and any vias left dangling. Removals that
/// would strand a load, or that host an attachment, are skipped.
pub fn apply_plan(pdn: &PdnGeometry, design: &Design, removals: &[StripeId]) -> Result<Applied> {
    if removals.is_empty() {
        return Ok(Applied {
            pdn: pdn.clone(),
            skipped: Vec::new(),
        });
    }
    let index = PdnIndex::new(pdn);
    let att = Attachments::compute(pdn, &index, design)?;
    let hosts: HashSet<StripeId> = att.host_pieces().into_iter().map(|i| pdn.stripes[i].id).collect();
    let known: HashSet<StripeId> = pdn.stripes.iter().map(|s| s.id).collect();
    let mut skipped = Vec::new();
    let mut wanted = Vec::with_capacity(removals.len());
    for id in removals {
        if !known.contains(id) {
            return Err(Error::Geometry(format!("plan removes unknown segment {}", id.0)));
        }
        if hosts.contains(id) {
            skipped.push(*id);
        } else {
            wanted.push(*id);
        }
    }

    let all: HashSet<StripeId> = wanted.iter().copied().collect();
    let out = pdn.without(&all);
    if loads_connected(&out, design) {
        return Ok(Applied { pdn: out, skipped });
    }
    let mut kept = HashSet::new();
    for id in wanted {
        kept.insert(id);
        if !loads_connected(&pdn.without(&kept), design) {
            kept.remove(&id);
            skipped.push(id);
        }
    }
    Ok(Applied {
        pdn: pdn.without(&kept),
        skipped,
    })
}
