//! Track lookup, load/pad attachment and piece-level connectivity over a
//! [`PdnGeometry`].

use super::{Design, PdnGeometry};
use crate::error::{Error, Result};
use crate::geom::{Dbu, Direction, LayerId, Point};
use std::collections::{HashMap, HashSet};

/// Spatial index of stripes grouped by track `(layer, centreline)`.
pub struct PdnIndex<'a> {
    pdn: &'a PdnGeometry,
    tracks: HashMap<(LayerId, Dbu), Vec<usize>>,
    layer_coords: HashMap<LayerId, Vec<Dbu>>,
    layer_dir: HashMap<LayerId, Direction>,
}

impl<'a> PdnIndex<'a> {
    pub fn new(pdn: &'a PdnGeometry) -> Self {
        let mut tracks: HashMap<(LayerId, Dbu), Vec<usize>> = HashMap::new();
        let mut layer_dir = HashMap::new();
        for (i, s) in pdn.stripes.iter().enumerate() {
            tracks.entry((s.layer, s.coord)).or_default().push(i);
            layer_dir.insert(s.layer, s.direction);
        }
        let mut layer_coords: HashMap<LayerId, Vec<Dbu>> = HashMap::new();
        for (key, pieces) in tracks.iter_mut() {
            pieces.sort_by_key(|&i| (pdn.stripes[i].start, pdn.stripes[i].end, i));
            layer_coords.entry(key.0).or_default().push(key.1);
        }
        for coords in layer_coords.values_mut() {
            coords.sort_unstable();
        }
        Self {
            pdn,
            tracks,
            layer_coords,
            layer_dir,
        }
    }

    pub fn geometry(&self) -> &'a PdnGeometry {
        self.pdn
    }

    pub fn direction(&self, layer: LayerId) -> Option<Direction> {
        self.layer_dir.get(&layer).copied()
    }

    /// Track keys in deterministic order.
    pub fn track_keys(&self) -> Vec<(LayerId, Dbu)> {
        let mut keys: Vec<_> = self.tracks.keys().copied().collect();
        keys.sort_unstable();
        keys
    }

    /// Stripe indices on a track, sorted by start.
    pub fn track(&self, layer: LayerId, coord: Dbu) -> &[usize] {
        self.tracks.get(&(layer, coord)).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Sorted centreline positions used on a layer.
    pub fn layer_coords(&self, layer: LayerId) -> &[Dbu] {
        self.layer_coords.get(&layer).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Stripe whose centreline covers `p`.
    pub fn piece_at(&self, layer: LayerId, p: Point) -> Option<usize> {
        let dir = self.direction(layer)?;
        let pieces = self.tracks.get(&(layer, p.across(dir)))?;
        let t = p.along(dir);
        let k = pieces.partition_point(|&i| self.pdn.stripes[i].start <= t);
        if k == 0 {
            return None;
        }
        let i = pieces[k - 1];
        if self.pdn.stripes[i].end >= t {
            return Some(i);
        }
        None
    }

    /// Nearest stripe on `layer` to `p` (Euclidean to the centreline
    /// segment) and the projection of `p` onto it. Ties go to the lower
    /// stripe index.
    pub fn nearest_piece(&self, layer: LayerId, p: Point) -> Option<(usize, Point)> {
        let dir = self.direction(layer)?;
        let coords = self.layer_coords(layer);
        let across = p.across(dir);
        let t = p.along(dir);
        let mut best: Option<(i128, usize, Point)> = None;
        let pivot = coords.partition_point(|&c| c < across);
        let (mut lo, mut hi) = (pivot as isize - 1, pivot);

        loop {
            // Next closest track on either side.
            let pick_hi = match (lo >= 0, hi < coords.len()) {
                (false, false) => break,
                (true, false) => false,
                (false, true) => true,
                (true, true) => coords[hi] - across <= across - coords[lo as usize],
            };
            let c = if pick_hi {
                hi += 1;
                coords[hi - 1]
            } else {
                lo -= 1;
                coords[(lo + 1) as usize]
            };
            let dc = (c - across) as i128;
            if let Some((bd, _, _)) = best {
                if dc * dc > bd {
                    break;
                }
            }
            let pieces = &self.tracks[&(layer, c)];
            let k = pieces.partition_point(|&i| self.pdn.stripes[i].start <= t);
            for &i in pieces[k.saturating_sub(1)..(k + 1).min(pieces.len())].iter() {
                let s = &self.pdn.stripes[i];
                let proj = t.clamp(s.start, s.end);
                let da = (proj - t) as i128;
                let d = dc * dc + da * da;
                let better = match best {
                    None => true,
                    Some((bd, bi, _)) => d < bd || (d == bd && i < bi),
                };
                if better {
                    best = Some((d, i, Point::from_track(dir, proj, c)));
                }
            }
        }
        best.map(|(_, i, q)| (i, q))
    }

    pub(crate) fn check_disjoint_tracks(&self) -> Result<()> {
        for pieces in self.tracks.values() {
            for w in pieces.windows(2) {
                let (a, b) = (&self.pdn.stripes[w[0]], &self.pdn.stripes[w[1]]);
                if b.start < a.end {
                    return Err(Error::Geometry(format!(
                        "stripes {} and {} overlap on the same track",
                        a.id.0, b.id.0
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Where each load and pad connects to the grid.
#[derive(Debug, Clone)]
pub struct Attachments {
    /// Layer loads attach to.
    pub load_layer: Option<LayerId>,
    /// Per source: stripe index and attachment point.
    pub sources: Vec<(usize, Point)>,
    /// Per pad: stripe index and attachment point.
    pub pads: Vec<(usize, Point)>,
}

impl Attachments {
    /// Loads attach at their projection onto the nearest stripe of the lowest
    /// PDN layer; pads at their projection onto the nearest stripe of their
    /// own layer.
    pub fn compute(pdn: &PdnGeometry, index: &PdnIndex<'_>, design: &Design) -> Result<Self> {
        let load_layer = pdn.lowest_layer();
        let mut sources = Vec::with_capacity(design.sources.len());
        for (i, s) in design.sources.iter().enumerate() {
            let p = Point::from_um(s.x, s.y);
            let hit = load_layer.and_then(|l| index.nearest_piece(l, p));
            match hit {
                Some(h) => sources.push(h),
                None => {
                    return Err(Error::Connectivity {
                        index: i,
                        x_um: s.x,
                        y_um: s.y,
                    })
                }
            }
        }
        let mut pads = Vec::with_capacity(design.pads.len());
        for (i, pad) in design.pads.iter().enumerate() {
            let layer = pdn
                .layers
                .iter()
                .position(|n| *n == pad.layer)
                .map(|k| LayerId(k as u16))
                .ok_or_else(|| Error::config(format!("pad {i} references unknown layer {}", pad.layer)))?;
            let hit = index
                .nearest_piece(layer, Point::from_um(pad.x, pad.y))
                .ok_or_else(|| Error::config(format!("pad {i}: layer {} carries no PDN stripe", pad.layer)))?;
            pads.push(hit);
        }
        Ok(Self {
            load_layer,
            sources,
            pads,
        })
    }

    /// Stripes that host a load or pad attachment.
    pub fn host_pieces(&self) -> HashSet<usize> {
        self.sources.iter().chain(&self.pads).map(|(i, _)| *i).collect()
    }

    pub fn check_reachable(&self, conn: &PieceConnectivity, design: &Design) -> Result<()> {
        let grounded: HashSet<usize> = self.pads.iter().map(|(i, _)| conn.root(*i)).collect();
        for (k, (piece, _)) in self.sources.iter().enumerate() {
            if !grounded.contains(&conn.root(*piece)) {
                let s = &design.sources[k];
                return Err(Error::Connectivity {
                    index: k,
                    x_um: s.x,
                    y_um: s.y,
                });
            }
        }
        Ok(())
    }
}

/// Connected components of stripes, joined by vias and by abutting pieces on
/// the same track.
pub struct PieceConnectivity {
    root: Vec<usize>,
}

impl PieceConnectivity {
    pub fn new(pdn: &PdnGeometry, index: &PdnIndex<'_>) -> Self {
        let n = pdn.stripes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let union = |parent: &mut Vec<usize>, a: usize, b: usize| {
            let (ra, rb) = (find(parent, a), find(parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        };
        for key in index.track_keys() {
            let pieces = index.track(key.0, key.1);
            for w in pieces.windows(2) {
                if pdn.stripes[w[1]].start <= pdn.stripes[w[0]].end {
                    union(&mut parent, w[0], w[1]);
                }
            }
        }
        for v in &pdn.vias {
            if let (Some(a), Some(b)) = (index.piece_at(v.lower, v.at()), index.piece_at(v.upper, v.at())) {
                union(&mut parent, a, b);
            }
        }
        let root = (0..n).map(|i| find(&mut parent, i)).collect();
        Self { root }
    }

    pub fn root(&self, piece: usize) -> usize {
        self.root[piece]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{Stripe, StripeId};
    use crate::geom::Rect;

    fn geo(stripes: Vec<Stripe>) -> PdnGeometry {
        PdnGeometry {
            dbu_per_um: 1000,
            layers: vec!["M2".into(), "M3".into()],
            die: Rect::new(0, 0, 100, 100),
            stripes,
            vias: vec![],
        }
    }

    fn h(id: u32, y: Dbu, start: Dbu, end: Dbu) -> Stripe {
        Stripe {
            id: StripeId(id),
            layer: LayerId(0),
            direction: Direction::Horizontal,
            coord: y,
            start,
            end,
            width: 2,
        }
    }

    #[test]
    fn nearest_piece_projects_and_breaks_ties_low() {
        let g = geo(vec![h(0, 10, 0, 100), h(1, 30, 0, 40), h(2, 30, 60, 100)]);
        let idx = PdnIndex::new(&g);
        assert_eq!(
            idx.nearest_piece(LayerId(0), Point::new(50, 12)),
            Some((0, Point::new(50, 10)))
        );
        // Equidistant from y=10 and y=30: lower index wins.
        assert_eq!(
            idx.nearest_piece(LayerId(0), Point::new(20, 20)),
            Some((0, Point::new(20, 10)))
        );
        // Near the gap on y=30, closer to y=30 track ends than to y=10.
        assert_eq!(
            idx.nearest_piece(LayerId(0), Point::new(45, 29)),
            Some((1, Point::new(40, 30)))
        );
        assert_eq!(idx.nearest_piece(LayerId(1), Point::new(0, 0)), None);
    }

    #[test]
    fn piece_at_handles_gaps_and_shared_ends() {
        let g = geo(vec![h(0, 30, 0, 40), h(1, 30, 40, 60), h(2, 30, 80, 100)]);
        let idx = PdnIndex::new(&g);
        assert_eq!(idx.piece_at(LayerId(0), Point::new(20, 30)), Some(0));
        assert!(idx.piece_at(LayerId(0), Point::new(40, 30)).is_some());
        assert_eq!(idx.piece_at(LayerId(0), Point::new(70, 30)), None);
        assert_eq!(idx.piece_at(LayerId(0), Point::new(20, 31)), None);
        let conn = PieceConnectivity::new(&g, &idx);
        assert_eq!(conn.root(0), conn.root(1));
        assert_ne!(conn.root(0), conn.root(2));
    }

    #[test]
    fn overlapping_pieces_detected() {
        let g = geo(vec![h(0, 30, 0, 50), h(1, 30, 40, 60)]);
        assert!(PdnIndex::new(&g).check_disjoint_tracks().is_err());
    }
}
