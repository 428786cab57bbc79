use super::{Design, PdnSpec, Technology};
use crate::error::{Error, Result};
use crate::geom::{dbu_to_um, um_to_dbu, Dbu, Direction, LayerId, Point, Rect, DBU_PER_UM};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StripeId(pub u32);

/// One straight piece of PDN metal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stripe {
    pub id: StripeId,
    pub layer: LayerId,
    pub direction: Direction,
    /// Centreline position across the stripe direction.
    pub coord: Dbu,
    /// Span along the stripe direction.
    pub start: Dbu,
    pub end: Dbu,
    pub width: Dbu,
}

impl Stripe {
    pub fn length(&self) -> Dbu {
        self.end - self.start
    }

    /// Whether `p` lies on the centreline within the span (closed).
    pub fn covers(&self, p: Point) -> bool {
        p.across(self.direction) == self.coord
            && p.along(self.direction) >= self.start
            && p.along(self.direction) <= self.end
    }

    /// Footprint rectangle, including the width.
    pub fn footprint(&self) -> Rect {
        let lo = self.coord - self.width / 2;
        let hi = lo + self.width;
        match self.direction {
            Direction::Horizontal => Rect::new(self.start, lo, self.end, hi),
            Direction::Vertical => Rect::new(lo, self.start, hi, self.end),
        }
    }

    pub fn endpoints(&self) -> (Point, Point) {
        (
            Point::from_track(self.direction, self.start, self.coord),
            Point::from_track(self.direction, self.end, self.coord),
        )
    }
}

/// Lumped via stack between two PDN layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Via {
    pub x: Dbu,
    pub y: Dbu,
    pub lower: LayerId,
    pub upper: LayerId,
    /// ohm
    pub resistance: f64,
}

impl Via {
    pub fn at(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Instantiated power grid. Coordinates are in database units
/// (`dbu_per_um` per micrometre).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdnGeometry {
    pub dbu_per_um: Dbu,
    /// Technology layer names, indexed by [`LayerId`].
    pub layers: Vec<String>,
    pub die: Rect,
    pub stripes: Vec<Stripe>,
    pub vias: Vec<Via>,
}

impl PdnGeometry {
    pub fn empty(tech: &Technology, die: Rect) -> Self {
        Self {
            dbu_per_um: DBU_PER_UM,
            layers: tech.layer_names(),
            die,
            stripes: Vec::new(),
            vias: Vec::new(),
        }
    }

    pub fn layer_name(&self, id: LayerId) -> &str {
        &self.layers[id.index()]
    }

    /// Lowest layer that carries any stripe; loads attach here.
    pub fn lowest_layer(&self) -> Option<LayerId> {
        self.stripes.iter().map(|s| s.layer).min()
    }

    pub fn stripe(&self, id: StripeId) -> Option<&Stripe> {
        // Ids are usually positional; fall back to a scan after edits.
        match self.stripes.get(id.0 as usize) {
            Some(s) if s.id == id => Some(s),
            _ => self.stripes.iter().find(|s| s.id == id),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: Self = serde_json::from_str(text)?;
        if g.dbu_per_um != DBU_PER_UM {
            return Err(Error::config(format!(
                "geometry uses {} dbu/um, expected {DBU_PER_UM}",
                g.dbu_per_um
            )));
        }
        Ok(g)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Split every stripe at the given cut lines: horizontal stripes at
    /// `xs`, vertical stripes at `ys`. Ids are reassigned positionally.
    /// Electrical behaviour is unchanged: abutting pieces on a track
    /// conduct as one wire.
    pub fn split_at(&self, xs: &[Dbu], ys: &[Dbu]) -> PdnGeometry {
        let mut stripes = Vec::with_capacity(self.stripes.len());
        for s in &self.stripes {
            let cuts = match s.direction {
                Direction::Horizontal => xs,
                Direction::Vertical => ys,
            };
            let mut lo = s.start;
            for &c in cuts.iter().filter(|&&c| c > s.start && c < s.end) {
                stripes.push(Stripe {
                    start: lo,
                    end: c,
                    ..*s
                });
                lo = c;
            }
            stripes.push(Stripe { start: lo, ..*s });
        }
        for (i, s) in stripes.iter_mut().enumerate() {
            s.id = StripeId(i as u32);
        }
        PdnGeometry {
            stripes,
            ..self.clone()
        }
    }

    /// Copy without the listed stripes and without vias that no longer land
    /// on metal at both ends.
    pub fn without(&self, removed: &HashSet<StripeId>) -> PdnGeometry {
        let stripes: Vec<Stripe> = self
            .stripes
            .iter()
            .filter(|s| !removed.contains(&s.id))
            .copied()
            .collect();
        let kept = PdnGeometry {
            stripes,
            vias: Vec::new(),
            ..self.clone()
        };
        let index = super::PdnIndex::new(&kept);
        let vias = self
            .vias
            .iter()
            .filter(|v| index.piece_at(v.lower, v.at()).is_some() && index.piece_at(v.upper, v.at()).is_some())
            .copied()
            .collect();
        PdnGeometry { vias, ..kept }
    }

    /// Merge abutting pieces of equal width on each track. Ids are
    /// reassigned positionally in (layer, coord, start) order.
    pub fn coalesce(&self) -> PdnGeometry {
        let mut sorted = self.stripes.clone();
        sorted.sort_by_key(|s| (s.layer, s.coord, s.start));
        let mut stripes: Vec<Stripe> = Vec::with_capacity(sorted.len());
        for s in sorted {
            match stripes.last_mut() {
                Some(p) if p.layer == s.layer && p.coord == s.coord && p.width == s.width && p.end == s.start => {
                    p.end = s.end
                }
                _ => stripes.push(s),
            }
        }
        for (i, s) in stripes.iter_mut().enumerate() {
            s.id = StripeId(i as u32);
        }
        PdnGeometry {
            stripes,
            ..self.clone()
        }
    }

    /// Structural invariants plus load reachability.
    pub fn validate(&self, design: &Design) -> Result<()> {
        let die = self.die;
        for s in &self.stripes {
            if s.layer.index() >= self.layers.len() {
                return Err(Error::Geometry(format!("stripe {} on unknown layer", s.id.0)));
            }
            if s.width <= 0 {
                return Err(Error::Geometry(format!("stripe {} has non-positive width", s.id.0)));
            }
            if s.end < s.start {
                return Err(Error::Geometry(format!("stripe {} has reversed span", s.id.0)));
            }
            let (a, b) = s.endpoints();
            if !die.contains(a) || !die.contains(b) {
                return Err(Error::Geometry(format!("stripe {} leaves the die", s.id.0)));
            }
        }
        let mut ids = HashSet::new();
        if !self.stripes.iter().all(|s| ids.insert(s.id)) {
            return Err(Error::Geometry("duplicate stripe ids".into()));
        }
        let index = super::PdnIndex::new(self);
        index.check_disjoint_tracks()?;
        for (i, v) in self.vias.iter().enumerate() {
            if v.lower >= v.upper {
                return Err(Error::Geometry(format!("via {i} has lower >= upper layer")));
            }
            if index.piece_at(v.lower, v.at()).is_none() || index.piece_at(v.upper, v.at()).is_none() {
                return Err(Error::Geometry(format!(
                    "via {i} at ({}, {}) um is not on a stripe crossing",
                    dbu_to_um(v.x),
                    dbu_to_um(v.y)
                )));
            }
            if !(v.resistance > 0.0) {
                return Err(Error::Geometry(format!("via {i} has non-positive resistance")));
            }
        }
        let att = super::Attachments::compute(self, &index, design)?;
        let conn = super::PieceConnectivity::new(self, &index);
        att.check_reachable(&conn, design)
    }
}

/// Build a uniform grid: stripes at `offset + k * pitch` that fit inside the
/// die, full span, with vias at every crossing of adjacent PDN layers.
pub fn generate_uniform_pdn(design: &Design, tech: &Technology, spec: &PdnSpec) -> Result<PdnGeometry> {
    spec.validate(tech)?;
    let die = design.die.to_dbu();
    if die.is_degenerate() {
        return Err(Error::config("die is degenerate"));
    }
    let mut patterns: Vec<_> = spec
        .layers
        .iter()
        .map(|p| (tech.layer_id(&p.layer).expect("validated"), p))
        .collect();
    patterns.sort_by_key(|(id, _)| *id);

    let mut geo = PdnGeometry::empty(tech, die);
    let mut per_layer: Vec<(LayerId, Vec<Dbu>)> = Vec::new();
    for (layer, pat) in &patterns {
        let dir = tech.layer(*layer).direction;
        let (lo, hi) = die.span_across(dir);
        let (start, end) = die.span_along(dir);
        let width = um_to_dbu(pat.width);
        let pitch = um_to_dbu(pat.pitch);
        let offset = um_to_dbu(pat.offset);
        if width <= 0 || pitch <= 0 {
            return Err(Error::config(format!("layer {}: pattern snaps to zero dbu", pat.layer)));
        }
        let mut coords = Vec::new();
        let mut c = lo + offset;
        // Keep the full stripe footprint inside the die.
        while 2 * c + width <= 2 * hi {
            if 2 * c - width >= 2 * lo {
                coords.push(c);
            }
            c += pitch;
        }
        if coords.is_empty() {
            return Err(Error::DegenerateSpec {
                layer: pat.layer.clone(),
            });
        }
        for &coord in &coords {
            let id = StripeId(geo.stripes.len() as u32);
            geo.stripes.push(Stripe {
                id,
                layer: *layer,
                direction: dir,
                coord,
                start,
                end,
                width,
            });
        }
        per_layer.push((*layer, coords));
    }

    for pair in per_layer.windows(2) {
        let (lower, lower_coords) = &pair[0];
        let (upper, upper_coords) = &pair[1];
        let lower_dir = tech.layer(*lower).direction;
        let resistance = tech.via_stack_resistance(*lower, *upper);
        for &lc in lower_coords {
            for &uc in upper_coords {
                // Lower coord is across its own direction; upper likewise.
                let p = Point::from_track(lower_dir, uc, lc);
                geo.vias.push(Via {
                    x: p.x,
                    y: p.y,
                    lower: *lower,
                    upper: *upper,
                    resistance,
                });
            }
        }
    }
    Ok(geo)
}

/// Total stripe length per layer in database units. Integer accumulation is
/// exact, so totals are additive over disjoint stripe sets.
pub fn pdn_length_by_layer(pdn: &PdnGeometry) -> BTreeMap<LayerId, Dbu> {
    let mut out = BTreeMap::new();
    for s in &pdn.stripes {
        *out.entry(s.layer).or_insert(0) += s.length();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{default_technology, Pad, StripePattern};
    use crate::geom::RectUm;

    fn design(w: f64, h: f64) -> Design {
        Design {
            die: RectUm::new(0.0, 0.0, w, h),
            pads: vec![Pad {
                x: 10.0,
                y: 10.0,
                layer: "M3".into(),
            }],
            sources: vec![],
            nets: vec![],
        }
    }

    fn spec(entries: &[(&str, f64, f64, f64)]) -> PdnSpec {
        PdnSpec {
            layers: entries
                .iter()
                .map(|&(layer, width, pitch, offset)| StripePattern {
                    layer: layer.into(),
                    width,
                    pitch,
                    offset,
                })
                .collect(),
        }
    }

    #[test]
    fn vertical_stripes_follow_pattern() {
        let tech = default_technology();
        let g = generate_uniform_pdn(&design(100.0, 100.0), &tech, &spec(&[("M3", 1.0, 20.0, 10.0)])).unwrap();
        let xs: Vec<f64> = g.stripes.iter().map(|s| dbu_to_um(s.coord)).collect();
        assert_eq!(xs, vec![10.0, 30.0, 50.0, 70.0, 90.0]);
        for s in &g.stripes {
            assert_eq!(s.direction, Direction::Vertical);
            assert_eq!((s.start, s.end), (0, 100_000));
        }
        assert!(g.vias.is_empty());
    }

    #[test]
    fn crossings_get_vias() {
        let tech = default_technology();
        let g = generate_uniform_pdn(
            &design(100.0, 80.0),
            &tech,
            &spec(&[("M2", 1.0, 20.0, 10.0), ("M3", 1.0, 20.0, 10.0)]),
        )
        .unwrap();
        let h = g
            .stripes
            .iter()
            .filter(|s| s.direction == Direction::Horizontal)
            .count();
        let v = g.stripes.len() - h;
        assert_eq!((v, h), (5, 4));
        assert_eq!(g.vias.len(), 20);
        assert!(g.vias.iter().all(|v| v.resistance == 0.5));
        g.validate(&design(100.0, 80.0)).unwrap();
    }

    #[test]
    fn empty_source_list_is_fine() {
        let tech = default_technology();
        let d = design(100.0, 100.0);
        let g = generate_uniform_pdn(&d, &tech, &spec(&[("M2", 1.0, 20.0, 10.0), ("M3", 1.0, 20.0, 10.0)])).unwrap();
        g.validate(&d).unwrap();
    }

    #[test]
    fn unknown_layer_is_config_error() {
        let tech = default_technology();
        let r = generate_uniform_pdn(&design(100.0, 100.0), &tech, &spec(&[("MX", 1.0, 20.0, 10.0)]));
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn zero_stripes_is_degenerate() {
        let tech = default_technology();
        let r = generate_uniform_pdn(&design(100.0, 100.0), &tech, &spec(&[("M3", 1.0, 200.0, 150.0)]));
        assert!(matches!(r, Err(Error::DegenerateSpec { .. })));
    }

    #[test]
    fn lengths_by_layer() {
        let tech = default_technology();
        let g = generate_uniform_pdn(&design(100.0, 100.0), &tech, &spec(&[("M3", 1.0, 20.0, 10.0)])).unwrap();
        let len = pdn_length_by_layer(&g);
        assert_eq!(len.get(&LayerId(1)).copied().map(dbu_to_um), Some(500.0));
        assert!(pdn_length_by_layer(&PdnGeometry::empty(&tech, g.die)).is_empty());
    }

    #[test]
    fn split_preserves_length_and_vias() {
        let tech = default_technology();
        let d = design(100.0, 100.0);
        let g = generate_uniform_pdn(&d, &tech, &spec(&[("M2", 1.0, 20.0, 10.0), ("M3", 1.0, 20.0, 10.0)])).unwrap();
        let cuts: Vec<Dbu> = (1..5).map(|k| k * 20_000).collect();
        let s = g.split_at(&cuts, &cuts);
        assert_eq!(s.stripes.len(), 50);
        assert_eq!(pdn_length_by_layer(&s), pdn_length_by_layer(&g));
        assert_eq!(s.vias, g.vias);
        s.validate(&d).unwrap();
        assert_eq!(s.split_at(&cuts, &cuts), s);
    }

    #[test]
    fn removal_drops_dangling_vias() {
        let tech = default_technology();
        let d = design(100.0, 100.0);
        let g = generate_uniform_pdn(&d, &tech, &spec(&[("M2", 1.0, 20.0, 10.0), ("M3", 1.0, 20.0, 10.0)])).unwrap();
        // Remove the M2 stripe at y=50: five vias sit on it.
        let victim = g
            .stripes
            .iter()
            .find(|s| s.layer == LayerId(0) && s.coord == 50_000)
            .unwrap()
            .id;
        let out = g.without(&HashSet::from([victim]));
        assert_eq!(out.stripes.len(), g.stripes.len() - 1);
        assert_eq!(out.vias.len(), g.vias.len() - 5);
        out.validate(&d).unwrap();
    }
}
