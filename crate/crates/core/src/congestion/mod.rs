//! Global-route congestion estimate.
//!
//! Each net is routed as an MST turned into a rectilinear Steiner tree, and
//! its wiring is charged against per-gcell track capacity pooled over all
//! layers of a direction. PDN stripes occupy tracks and lower the capacity.

mod tree;

pub use tree::{build_mst, steinerize, Edge, Segment, SteinerTree};

use crate::design::{Design, PdnGeometry, Technology};
use crate::error::{Error, Result};
use crate::geom::{dbu_to_um, um_to_dbu, Dbu, Direction, Point, Rect};
use crate::windowing::WindowGrid;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CongestionConfig {
    /// um
    pub gcell_um: f64,
    /// Fraction of a window's hottest gcells averaged into its score.
    pub top_fraction: f64,
    /// Weight of the pin-density term (pins per gcell) in window scores.
    pub pin_weight: f64,
    /// Floor on usable capacity, tracks.
    pub epsilon: f64,
}

impl Default for CongestionConfig {
    fn default() -> Self {
        Self {
            gcell_um: 5.0,
            top_fraction: 0.25,
            pin_weight: 0.0,
            epsilon: 0.01,
        }
    }
}

impl CongestionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gcell_um > 0.0 && self.epsilon > 0.0 && self.pin_weight >= 0.0) {
            return Err(Error::config(
                "gcell size and epsilon must be positive, pin weight >= 0",
            ));
        }
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return Err(Error::config("top fraction must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Die tiled into gcells with per-direction track capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct GcellGrid {
    pub die: Rect,
    pub size: Dbu,
    pub cols: usize,
    pub rows: usize,
    /// Tracks per gcell for horizontal and vertical wiring.
    pub cap_h: Vec<u32>,
    pub cap_v: Vec<u32>,
}

impl GcellGrid {
    /// Capacity of a gcell in a direction is the number of whole tracks of
    /// every layer in that direction across the gcell.
    pub fn new(die: Rect, size_um: f64, tech: &Technology) -> Result<Self> {
        let size = um_to_dbu(size_um);
        if size <= 0 || die.is_degenerate() {
            return Err(Error::config("gcell size must be positive on a non-degenerate die"));
        }
        let cols = ((die.width() + size - 1) / size) as usize;
        let rows = ((die.height() + size - 1) / size) as usize;
        let mut grid = Self {
            die,
            size,
            cols,
            rows,
            cap_h: Vec::with_capacity(cols * rows),
            cap_v: Vec::with_capacity(cols * rows),
        };
        for g in 0..cols * rows {
            let r = grid.rect(g);
            let tracks = |dir: Direction, extent: Dbu| -> u32 {
                tech.layers
                    .iter()
                    .filter(|l| l.direction == dir)
                    .map(|l| (extent / um_to_dbu(l.track_pitch).max(1)) as u32)
                    .sum()
            };
            grid.cap_h.push(tracks(Direction::Horizontal, r.height()));
            grid.cap_v.push(tracks(Direction::Vertical, r.width()));
        }
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn rect(&self, g: usize) -> Rect {
        let (row, col) = (g / self.cols, g % self.cols);
        let x0 = self.die.x0 + col as Dbu * self.size;
        let y0 = self.die.y0 + row as Dbu * self.size;
        Rect::new(
            x0,
            y0,
            (x0 + self.size).min(self.die.x1),
            (y0 + self.size).min(self.die.y1),
        )
    }

    fn col_of(&self, x: Dbu) -> usize {
        (((x - self.die.x0).max(0) / self.size) as usize).min(self.cols - 1)
    }

    fn row_of(&self, y: Dbu) -> usize {
        (((y - self.die.y0).max(0) / self.size) as usize).min(self.rows - 1)
    }

    pub fn locate(&self, p: Point) -> usize {
        self.index(self.row_of(p.y), self.col_of(p.x))
    }

    /// Gcells crossed by the run `[lo, hi]` along `dir` at `across`, with
    /// the length inside each.
    fn crossings(&self, dir: Direction, across: Dbu, lo: Dbu, hi: Dbu) -> impl Iterator<Item = (usize, Dbu)> + '_ {
        let (fixed, first, last) = match dir {
            Direction::Horizontal => (self.row_of(across), self.col_of(lo), self.col_of(hi)),
            Direction::Vertical => (self.col_of(across), self.row_of(lo), self.row_of(hi)),
        };
        let origin = match dir {
            Direction::Horizontal => self.die.x0,
            Direction::Vertical => self.die.y0,
        };
        (first..=last).filter_map(move |k| {
            let c0 = origin + k as Dbu * self.size;
            let len = hi.min(c0 + self.size) - lo.max(c0);
            let g = match dir {
                Direction::Horizontal => self.index(fixed, k),
                Direction::Vertical => self.index(k, fixed),
            };
            (len > 0).then_some((g, len))
        })
    }
}

/// Expected routing usage per gcell, in tracks.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteDemand {
    pub h: Vec<f64>,
    pub v: Vec<f64>,
    /// Net pins per gcell.
    pub pins: Vec<u32>,
}

impl RouteDemand {
    pub fn total(&self) -> f64 {
        self.h.iter().sum::<f64>() + self.v.iter().sum::<f64>()
    }
}

/// Route every net; order follows `design.nets`.
pub fn route_nets(design: &Design) -> Result<Vec<SteinerTree>> {
    design
        .nets
        .par_iter()
        .map(|net| {
            let pins: Vec<Point> = net.pins.iter().map(|p| Point::from_um(p.x, p.y)).collect();
            let mst = build_mst(&pins).map_err(|_| Error::DegenerateNet {
                net: net.id.clone(),
                pins: pins.len(),
            })?;
            Ok(steinerize(&mst, &pins))
        })
        .collect()
}

/// Charge every tree segment `length / gcell size` tracks on the gcells it
/// crosses, in its own direction.
pub fn accumulate_demand<'a>(trees: impl IntoIterator<Item = &'a SteinerTree>, grid: &GcellGrid) -> RouteDemand {
    let mut d = RouteDemand {
        h: vec![0.0; grid.len()],
        v: vec![0.0; grid.len()],
        pins: vec![0; grid.len()],
    };
    let size = grid.size as f64;
    for t in trees {
        for (s, w) in t.weighted_segments() {
            let dir = s.direction();
            let target = match dir {
                Direction::Horizontal => &mut d.h,
                Direction::Vertical => &mut d.v,
            };
            for (g, len) in grid.crossings(dir, s.a.across(dir), s.a.along(dir), s.b.along(dir)) {
                target[g] += w * len as f64 / size;
            }
        }
    }
    d
}

fn count_pins(design: &Design, grid: &GcellGrid, d: &mut RouteDemand) {
    for n in &design.nets {
        for p in &n.pins {
            d.pins[grid.locate(Point::from_um(p.x, p.y))] += 1;
        }
    }
}

/// Tracks occupied by PDN stripes per gcell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Blockage {
    pub h: Vec<u32>,
    pub v: Vec<u32>,
}

/// Each stripe occupies `ceil(width / pitch)` tracks of its layer's
/// direction in every gcell its centreline passes through.
pub fn pdn_blockage(pdn: &PdnGeometry, grid: &GcellGrid, tech: &Technology) -> Blockage {
    let mut b = Blockage {
        h: vec![0; grid.len()],
        v: vec![0; grid.len()],
    };
    for s in &pdn.stripes {
        let pitch = um_to_dbu(tech.layer(s.layer).track_pitch).max(1);
        let tracks = ((s.width + pitch - 1) / pitch) as u32;
        let target = match s.direction {
            Direction::Horizontal => &mut b.h,
            Direction::Vertical => &mut b.v,
        };
        for (g, _) in grid.crossings(s.direction, s.coord, s.start, s.end) {
            target[g] += tracks;
        }
    }
    b
}

/// Aggregate congestion of one unit window.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct WindowCongestion {
    /// Top-fraction mean of `max(score_h, score_v)` plus the pin term.
    pub score: f64,
    pub score_h: f64,
    pub score_v: f64,
    pub pin_density: f64,
}

impl WindowCongestion {
    /// Direction whose wiring is more congested; horizontal on ties.
    pub fn congested_direction(&self) -> Direction {
        if self.score_v > self.score_h {
            Direction::Vertical
        } else {
            Direction::Horizontal
        }
    }
}

#[derive(Debug, Clone)]
pub struct CongestionMap {
    pub grid: GcellGrid,
    pub score_h: Vec<f64>,
    pub score_v: Vec<f64>,
    pub overflow: Vec<f64>,
    /// Gcells whose blockage reaches their capacity in some direction.
    pub saturated: Vec<bool>,
    pub windows: Vec<WindowCongestion>,
}

impl CongestionMap {
    pub fn gcell_score(&self, g: usize) -> f64 {
        self.score_h[g].max(self.score_v[g])
    }

    pub fn window_scores(&self) -> Vec<f64> {
        self.windows.iter().map(|w| w.score).collect()
    }

    /// CSV with columns `i, j, score_h, score_v, overflow` (column, row).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["i", "j", "score_h", "score_v", "overflow"])?;
        for g in 0..self.grid.len() {
            out.serialize((
                g % self.grid.cols,
                g / self.grid.cols,
                self.score_h[g],
                self.score_v[g],
                self.overflow[g],
            ))?;
        }
        out.flush()?;
        Ok(())
    }
}

fn top_mean(mut v: Vec<f64>, fraction: f64) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_unstable_by(|a, b| b.total_cmp(a));
    let k = ((v.len() as f64 * fraction).ceil() as usize).clamp(1, v.len());
    v[..k].iter().sum::<f64>() / k as f64
}

/// Score each gcell as `demand / max(capacity - blockage, eps)` per
/// direction and aggregate into windows. A gcell belongs to the window
/// holding its lower-left corner.
pub fn congestion_map(
    demand: &RouteDemand,
    grid: &GcellGrid,
    blockage: &Blockage,
    windows: &WindowGrid,
    cfg: &CongestionConfig,
) -> CongestionMap {
    let n = grid.len();
    let mut score_h = vec![0.0; n];
    let mut score_v = vec![0.0; n];
    let mut overflow = vec![0.0; n];
    let mut saturated = vec![false; n];
    for g in 0..n {
        let eh = grid.cap_h[g] as f64 - blockage.h[g] as f64;
        let ev = grid.cap_v[g] as f64 - blockage.v[g] as f64;
        saturated[g] = eh <= 0.0 || ev <= 0.0;
        score_h[g] = demand.h[g] / eh.max(cfg.epsilon);
        score_v[g] = demand.v[g] / ev.max(cfg.epsilon);
        overflow[g] = (demand.h[g] - eh.max(0.0)).max(0.0) + (demand.v[g] - ev.max(0.0)).max(0.0);
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); windows.len()];
    for g in 0..n {
        let r = grid.rect(g);
        if let Some(w) = windows.locate(Point::new(r.x0, r.y0)) {
            members[w].push(g);
        }
    }
    let wins = members
        .iter()
        .map(|gs| {
            let pick = |f: &dyn Fn(usize) -> f64| top_mean(gs.iter().map(|&g| f(g)).collect(), cfg.top_fraction);
            let pins: u32 = gs.iter().map(|&g| demand.pins[g]).sum();
            let pin_density = if gs.is_empty() {
                0.0
            } else {
                pins as f64 / gs.len() as f64
            };
            WindowCongestion {
                score: pick(&|g| score_h[g].max(score_v[g])) + cfg.pin_weight * pin_density,
                score_h: pick(&|g| score_h[g]),
                score_v: pick(&|g| score_v[g]),
                pin_density,
            }
        })
        .collect();

    CongestionMap {
        grid: grid.clone(),
        score_h,
        score_v,
        overflow,
        saturated,
        windows: wins,
    }
}

/// Routed demand for a design, reusable across PDN edits.
#[derive(Debug, Clone)]
pub struct CongestionModel {
    pub grid: GcellGrid,
    pub demand: RouteDemand,
    pub cfg: CongestionConfig,
    /// Total routed tree length, um.
    pub wirelength_um: f64,
}

impl CongestionModel {
    pub fn new(design: &Design, tech: &Technology, cfg: &CongestionConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = GcellGrid::new(design.die.to_dbu(), cfg.gcell_um, tech)?;
        let trees = route_nets(design)?;
        let mut demand = accumulate_demand(&trees, &grid);
        count_pins(design, &grid, &mut demand);
        let wirelength_um = trees.iter().map(|t| dbu_to_um(t.length())).sum();
        Ok(Self {
            grid,
            demand,
            cfg: *cfg,
            wirelength_um,
        })
    }

    pub fn map(&self, pdn: &PdnGeometry, tech: &Technology, windows: &WindowGrid) -> CongestionMap {
        let b = pdn_blockage(pdn, &self.grid, tech);
        congestion_map(&self.demand, &self.grid, &b, windows, &self.cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{default_technology, Net, Pin, Stripe, StripeId};
    use crate::geom::{LayerId, RectUm};
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn tech() -> Technology {
        default_technology()
    }

    fn grid(w: f64, h: f64) -> GcellGrid {
        GcellGrid::new(Rect::new(0, 0, um_to_dbu(w), um_to_dbu(h)), 5.0, &tech()).unwrap()
    }

    fn seg_tree(p: Point, q: Point) -> SteinerTree {
        SteinerTree {
            segments: vec![Segment::new(p, q)],
            ..Default::default()
        }
    }

    #[test]
    fn capacity_pools_layers() {
        let g = grid(20.0, 20.0);
        // H layers: M2, M4 at 0.5 um (10 tracks each), M6 at 1 um (5).
        assert_eq!(g.cap_h[0], 25);
        assert_eq!(g.cap_v[0], 25);
        let partial = grid(22.5, 20.0);
        assert_eq!(partial.cols, 5);
        assert_eq!(partial.cap_v[4], 12);
        assert_eq!(partial.cap_h[4], 25);
    }

    #[test]
    fn horizontal_segment_over_three_gcells() {
        let g = grid(20.0, 20.0);
        let t = seg_tree(Point::new(0, 2500), Point::new(15_000, 2500));
        let d = accumulate_demand([&t], &g);
        assert_eq!(&d.h[..4], &[1.0, 1.0, 1.0, 0.0]);
        assert!(d.v.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn l_connection_splits_half_half() {
        let g = grid(20.0, 20.0);
        // Centre of gcell (0,0) to centre of gcell (1,1).
        let t = SteinerTree {
            flexible: vec![(Point::new(2500, 2500), Point::new(7500, 7500))],
            ..Default::default()
        };
        let d = accumulate_demand([&t], &g);
        let (g00, g01, g10, g11) = (g.index(0, 0), g.index(0, 1), g.index(1, 0), g.index(1, 1));
        // Horizontal-first bend runs along row 0, vertical-first along row 1.
        assert_eq!(d.h[g00], 0.25);
        assert_eq!(d.h[g01], 0.25);
        assert_eq!(d.h[g10], 0.25);
        assert_eq!(d.h[g11], 0.25);
        assert_eq!(d.v[g01] + d.v[g11], 0.5);
        assert_eq!(d.v[g00] + d.v[g10], 0.5);
        assert_eq!(d.total(), 2.0);
    }

    #[test]
    fn blockage_ceiling_rule() {
        let t = tech();
        let g = grid(20.0, 20.0);
        let mut pdn = PdnGeometry::empty(&t, g.die);
        // M3 vertical, width 1 um, pitch 0.5 um.
        pdn.stripes.push(Stripe {
            id: StripeId(0),
            layer: LayerId(1),
            direction: Direction::Vertical,
            coord: 7500,
            start: 0,
            end: 20_000,
            width: 1000,
        });
        let b = pdn_blockage(&pdn, &g, &t);
        for row in 0..4 {
            assert_eq!(b.v[g.index(row, 1)], 2);
        }
        assert_eq!(b.v.iter().sum::<u32>(), 8);
        assert!(b.h.iter().all(|v| *v == 0));
        assert_eq!(
            pdn_blockage(&PdnGeometry::empty(&t, g.die), &g, &t)
                .v
                .iter()
                .sum::<u32>(),
            0
        );
    }

    fn manual_map(demand: f64, cap: u32, block: u32) -> CongestionMap {
        let t = tech();
        let mut g = grid(5.0, 5.0);
        g.cap_h = vec![cap];
        let w = WindowGrid::partition(g.die, 5.0).unwrap();
        let d = RouteDemand {
            h: vec![demand],
            v: vec![0.0],
            pins: vec![0],
        };
        let _ = t;
        congestion_map(
            &d,
            &g,
            &Blockage {
                h: vec![block],
                v: vec![0],
            },
            &w,
            &CongestionConfig::default(),
        )
    }

    #[test]
    fn score_examples() {
        let m = manual_map(8.0, 10, 2);
        assert_eq!(m.score_h[0], 1.0);
        assert_eq!(m.overflow[0], 0.0);
        let m = manual_map(0.0, 10, 2);
        assert_eq!(m.gcell_score(0), 0.0);
        let m = manual_map(3.0, 10, 12);
        assert!((m.score_h[0] - 300.0).abs() < 1e-9);
        assert!(m.saturated[0] && m.overflow[0] > 0.0);
    }

    #[test]
    fn window_takes_top_quartile() {
        let t = tech();
        let g = grid(20.0, 20.0);
        let w = WindowGrid::partition(g.die, 20.0).unwrap();
        let mut d = RouteDemand {
            h: vec![0.0; 16],
            v: vec![0.0; 16],
            pins: vec![0; 16],
        };
        // Four gcells at 25 tracks demand against 25 capacity.
        for k in [0, 5, 10, 15] {
            d.h[k] = 25.0;
        }
        d.pins[3] = 8;
        let b = Blockage {
            h: vec![0; 16],
            v: vec![0; 16],
        };
        let m = congestion_map(&d, &g, &b, &w, &CongestionConfig::default());
        assert_eq!(m.windows[0].score, 1.0);
        assert_eq!(m.windows[0].score_v, 0.0);
        assert_eq!(m.windows[0].congested_direction(), Direction::Horizontal);
        assert_eq!(m.windows[0].pin_density, 0.5);
        let cfg = CongestionConfig {
            pin_weight: 2.0,
            ..Default::default()
        };
        assert_eq!(congestion_map(&d, &g, &b, &w, &cfg).windows[0].score, 2.0);
        let _ = t;
    }

    #[test]
    fn degenerate_net_named() {
        let d = Design {
            die: RectUm::new(0.0, 0.0, 10.0, 10.0),
            pads: vec![],
            sources: vec![],
            nets: vec![Net {
                id: "clk".into(),
                pins: vec![Pin { x: 1.0, y: 1.0 }],
            }],
        };
        match route_nets(&d) {
            Err(Error::DegenerateNet { net, pins: 1 }) => assert_eq!(net, "clk"),
            other => panic!("{other:?}"),
        }
    }

    fn random_nets(seed: u64, n: usize) -> Vec<Net> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| Net {
                id: format!("n{i}"),
                pins: (0..rng.random_range(2..6))
                    .map(|_| Pin {
                        x: (rng.random::<f64>() * 60.0 * 1000.0).round() / 1000.0,
                        y: (rng.random::<f64>() * 40.0 * 1000.0).round() / 1000.0,
                    })
                    .collect(),
            })
            .collect()
    }

    proptest! {
        #[test]
        fn demand_is_conserved(seed in 0u64..10_000) {
            let design = Design {
                die: RectUm::new(0.0, 0.0, 60.0, 40.0),
                pads: vec![],
                sources: vec![],
                nets: random_nets(seed, 12),
            };
            let g = GcellGrid::new(design.die.to_dbu(), 5.0, &tech()).unwrap();
            let trees = route_nets(&design).unwrap();
            let d = accumulate_demand(&trees, &g);
            let length: f64 = trees.iter().map(|t| t.length() as f64).sum();
            prop_assert!((d.total() * g.size as f64 - length).abs() <= 1e-9 * length.max(1.0));
        }

        #[test]
        fn removal_restores_exact_tracks(seed in 0u64..10_000, drop in proptest::collection::vec(any::<bool>(), 64)) {
            use crate::design::{default_pdn_spec, generate_uniform_pdn};
            let t = tech();
            let design = Design {
                die: RectUm::new(0.0, 0.0, 200.0, 200.0),
                pads: vec![],
                sources: vec![],
                nets: random_nets(seed, 20),
            };
            let pdn = generate_uniform_pdn(&design, &t, &default_pdn_spec()).unwrap();
            let pdn = pdn.split_at(&[um_to_dbu(60.0), um_to_dbu(140.0)], &[um_to_dbu(100.0)]);
            let removed: HashSet<StripeId> = pdn.stripes.iter().zip(drop.iter().cycle()).filter(|(_, d)| **d).map(|(s, _)| s.id).collect();
            let after = pdn.without(&removed);
            let g = GcellGrid::new(design.die.to_dbu(), 5.0, &t).unwrap();
            let b0 = pdn_blockage(&pdn, &g, &t);
            let b1 = pdn_blockage(&after, &g, &t);
            // Independent count of removed track-units per gcell.
            let mut want_h = vec![0u32; g.len()];
            let mut want_v = vec![0u32; g.len()];
            for s in pdn.stripes.iter().filter(|s| removed.contains(&s.id)) {
                let pitch = um_to_dbu(t.layer(s.layer).track_pitch);
                let tracks = ((s.width as f64) / pitch as f64).ceil() as u32;
                for k in 0..g.len() {
                    let r = g.rect(k);
                    let fp = s.footprint();
                    let centre_in = match s.direction {
                        Direction::Horizontal => s.coord >= r.y0 && (s.coord < r.y1 || r.y1 == g.die.y1),
                        Direction::Vertical => s.coord >= r.x0 && (s.coord < r.x1 || r.x1 == g.die.x1),
                    };
                    let (a, b) = fp.span_along(s.direction);
                    let (c, d) = r.span_along(s.direction);
                    if centre_in && b.min(d) > a.max(c) {
                        match s.direction {
                            Direction::Horizontal => want_h[k] += tracks,
                            Direction::Vertical => want_v[k] += tracks,
                        }
                    }
                }
            }
            for k in 0..g.len() {
                prop_assert_eq!(b0.h[k] - b1.h[k], want_h[k]);
                prop_assert_eq!(b0.v[k] - b1.v[k], want_v[k]);
            }
            let w = WindowGrid::partition(g.die, 20.0).unwrap();
            let trees = route_nets(&design).unwrap();
            let dm = accumulate_demand(&trees, &g);
            let m0 = congestion_map(&dm, &g, &b0, &w, &CongestionConfig::default());
            let m1 = congestion_map(&dm, &g, &b1, &w, &CongestionConfig::default());
            for k in 0..g.len() {
                prop_assert!(m1.gcell_score(k) <= m0.gcell_score(k));
            }
        }
    }
}
