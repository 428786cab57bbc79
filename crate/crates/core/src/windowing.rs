//! Unit windows, guard bands and IR-safety classification.
//!
//! A window is judged over its guard band, the window grown by one step on
//! every side and clipped to the die, so a quiet window next to a stressed
//! neighbour is not mistaken for safe.

use crate::error::{Error, Result};
use crate::geom::{um_to_dbu, Dbu, Point, Rect};
use serde::{Deserialize, Serialize};
use std::io::Write;

pub const DEFAULT_UNIT_UM: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    /// um
    pub unit_um: f64,
    /// um; defaults to the unit size.
    pub guard_band_um: Option<f64>,
    /// mV; defaults to 85% of the IR limit.
    pub hotspot_threshold_mv: Option<f64>,
    /// mV; defaults to 25% of the IR limit.
    pub margin_threshold_mv: Option<f64>,
    pub tolerate_single_hotspot: bool,
    /// Minimum raw window congestion score for a candidate.
    pub congestion_floor: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            unit_um: DEFAULT_UNIT_UM,
            guard_band_um: None,
            hotspot_threshold_mv: None,
            margin_threshold_mv: None,
            tolerate_single_hotspot: false,
            congestion_floor: 0.5,
        }
    }
}

impl WindowConfig {
    pub fn guard_step(&self) -> Dbu {
        um_to_dbu(self.guard_band_um.unwrap_or(self.unit_um))
    }

    pub fn thresholds(&self, ir_limit_mv: f64) -> Result<SafetyThresholds> {
        let d = SafetyThresholds::defaults_for(ir_limit_mv);
        let t = SafetyThresholds {
            hotspot_mv: self.hotspot_threshold_mv.unwrap_or(d.hotspot_mv),
            margin_mv: self.margin_threshold_mv.unwrap_or(d.margin_mv),
            tolerate_single_hotspot: self.tolerate_single_hotspot,
            ..d
        };
        if self.guard_band_um.is_some_and(|g| !(g >= 0.0)) {
            return Err(Error::config("guard band must be >= 0"));
        }
        t.validate()?;
        Ok(t)
    }
}

/// Die tiled into unit windows, row-major from the die origin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowGrid {
    pub die: Rect,
    pub unit: Dbu,
    pub cols: usize,
    pub rows: usize,
    /// Unit exceeds the die extent along some axis.
    pub degenerate: bool,
}

impl WindowGrid {
    pub fn partition(die: Rect, unit_um: f64) -> Result<Self> {
        let unit = um_to_dbu(unit_um);
        if unit <= 0 {
            return Err(Error::config(format!("window unit {unit_um} um must be positive")));
        }
        if die.is_degenerate() {
            return Err(Error::config("die is degenerate"));
        }
        let cols = ((die.width() + unit - 1) / unit) as usize;
        let rows = ((die.height() + unit - 1) / unit) as usize;
        Ok(Self {
            die,
            unit,
            cols,
            rows,
            degenerate: unit > die.width() || unit > die.height(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    pub fn window(&self, row: usize, col: usize) -> Rect {
        let x0 = self.die.x0 + col as Dbu * self.unit;
        let y0 = self.die.y0 + row as Dbu * self.unit;
        Rect::new(
            x0,
            y0,
            (x0 + self.unit).min(self.die.x1),
            (y0 + self.unit).min(self.die.y1),
        )
    }

    pub fn window_at(&self, index: usize) -> Rect {
        let (r, c) = self.row_col(index);
        self.window(r, c)
    }

    /// Window containing `p`; points on the far die edge belong to the last
    /// row/column.
    pub fn locate(&self, p: Point) -> Option<usize> {
        if !self.die.contains(p) {
            return None;
        }
        let col = (((p.x - self.die.x0) / self.unit) as usize).min(self.cols - 1);
        let row = (((p.y - self.die.y0) / self.unit) as usize).min(self.rows - 1);
        Some(self.index(row, col))
    }

    /// Interior window boundaries along x and y.
    pub fn cuts(&self) -> (Vec<Dbu>, Vec<Dbu>) {
        let xs = (1..self.cols).map(|c| self.die.x0 + c as Dbu * self.unit).collect();
        let ys = (1..self.rows).map(|r| self.die.y0 + r as Dbu * self.unit).collect();
        (xs, ys)
    }

    /// Windows whose rectangle intersects `r`.
    pub fn overlapping(&self, r: &Rect) -> impl Iterator<Item = usize> + '_ {
        let c0 = ((r.x0 - self.die.x0).max(0) / self.unit) as usize;
        let r0 = ((r.y0 - self.die.y0).max(0) / self.unit) as usize;
        let c1 = ((((r.x1 - self.die.x0).max(0) + self.unit - 1) / self.unit) as usize).clamp(c0 + 1, self.cols);
        let r1 = ((((r.y1 - self.die.y0).max(0) + self.unit - 1) / self.unit) as usize).clamp(r0 + 1, self.rows);
        let c0 = c0.min(self.cols - 1);
        let r0 = r0.min(self.rows - 1);
        (r0..r1).flat_map(move |row| (c0..c1).map(move |col| self.index(row, col)))
    }
}

/// Window grown by `step` on all sides, clipped to the die.
pub fn guard_band(window: &Rect, step: Dbu, die: &Rect) -> Rect {
    window.expand(step.max(0)).intersection(die)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WindowMetrics {
    pub window_max_mv: f64,
    pub window_nodes: usize,
    pub guard_max_mv: f64,
    pub guard_mean_mv: f64,
    /// `ir_limit - mean drop` over the guard band.
    pub guard_mean_margin_mv: f64,
    pub guard_nodes: usize,
    /// Guard-band nodes above the hotspot threshold.
    pub hotspots: usize,
    pub congestion: f64,
}

/// Resolved IR-safety thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyThresholds {
    pub ir_limit_mv: f64,
    pub hotspot_mv: f64,
    pub margin_mv: f64,
    /// Ignore a single isolated hotspot instead of disqualifying on it.
    pub tolerate_single_hotspot: bool,
}

impl SafetyThresholds {
    /// Hotspot at 85% of the limit, required mean margin 25% of the limit.
    pub fn defaults_for(ir_limit_mv: f64) -> Self {
        Self {
            ir_limit_mv,
            hotspot_mv: 0.85 * ir_limit_mv,
            margin_mv: 0.25 * ir_limit_mv,
            tolerate_single_hotspot: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v <= self.ir_limit_mv;
        if !(self.ir_limit_mv > 0.0 && ok(self.hotspot_mv) && ok(self.margin_mv)) {
            return Err(Error::config(format!(
                "thresholds must lie in (0, ir_limit={}]: hotspot {}, margin {}",
                self.ir_limit_mv, self.hotspot_mv, self.margin_mv
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub safe: bool,
    /// No analysed node in the guard band.
    pub empty: bool,
}

/// Safe iff the guard band holds no hotspot node and its mean margin meets
/// the threshold. An empty guard band is unsafe.
pub fn classify_ir_safe(m: &WindowMetrics, t: &SafetyThresholds) -> Classification {
    if m.guard_nodes == 0 {
        return Classification {
            safe: false,
            empty: true,
        };
    }
    let allowed = if t.tolerate_single_hotspot { 1 } else { 0 };
    Classification {
        safe: m.hotspots <= allowed && m.guard_mean_margin_mv >= t.margin_mv,
        empty: false,
    }
}

/// Per-window IR metrics over the guard bands, from `(location, drop)`
/// samples. `congestion` is indexed by window.
pub fn window_metrics(
    grid: &WindowGrid,
    samples: &[(Point, f64)],
    congestion: &[f64],
    guard_step: Dbu,
    t: &SafetyThresholds,
) -> Result<Vec<WindowMetrics>> {
    assert_eq!(congestion.len(), grid.len(), "congestion per window");
    let mut buckets: Vec<Vec<(Point, f64)>> = vec![Vec::new(); grid.len()];
    for &(p, d) in samples {
        let w = grid.locate(p).ok_or(Error::Coverage)?;
        buckets[w].push((p, d));
    }
    let out = (0..grid.len())
        .map(|w| {
            let win = grid.window_at(w);
            let gb = guard_band(&win, guard_step, &grid.die);
            let own = &buckets[w];
            let window_max_mv = own.iter().map(|s| s.1).fold(0.0, f64::max);
            let (mut n, mut sum, mut max, mut hot) = (0usize, 0.0, 0.0f64, 0usize);
            for k in grid.overlapping(&gb) {
                for &(p, d) in &buckets[k] {
                    if gb.contains_tiled(p, &grid.die) {
                        n += 1;
                        sum += d;
                        max = max.max(d);
                        if d > t.hotspot_mv {
                            hot += 1;
                        }
                    }
                }
            }
            let mean = if n > 0 { sum / n as f64 } else { 0.0 };
            WindowMetrics {
                window_max_mv,
                window_nodes: own.len(),
                guard_max_mv: max,
                guard_mean_mv: mean,
                guard_mean_margin_mv: t.ir_limit_mv - mean,
                guard_nodes: n,
                hotspots: hot,
                congestion: congestion[w],
            }
        })
        .collect();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub window: usize,
    pub row: usize,
    pub col: usize,
    pub metrics: WindowMetrics,
}

/// Windows selected for PDN reduction, most congested first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub members: Vec<Candidate>,
}

impl CandidateSet {
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, window: usize) -> bool {
        self.members.iter().any(|c| c.window == window)
    }
}

/// Candidate report with columns
/// `row, col, safe, hotspots, mean_margin_mV, congestion, selected`.
pub fn write_window_csv<W: Write>(
    w: W,
    grid: &WindowGrid,
    metrics: &[WindowMetrics],
    classes: &[Classification],
    selected: &CandidateSet,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "row",
        "col",
        "safe",
        "hotspots",
        "mean_margin_mV",
        "congestion",
        "selected",
    ])?;
    let chosen: std::collections::HashSet<usize> = selected.members.iter().map(|c| c.window).collect();
    for (k, (m, c)) in metrics.iter().zip(classes).enumerate() {
        let (row, col) = grid.row_col(k);
        out.serialize((
            row,
            col,
            c.safe,
            m.hotspots,
            m.guard_mean_margin_mv,
            m.congestion,
            chosen.contains(&k),
        ))?;
    }
    out.flush()?;
    Ok(())
}

/// IR-safe windows whose congestion score reaches `congestion_floor`.
pub fn select_candidates(
    grid: &WindowGrid,
    metrics: &[WindowMetrics],
    classes: &[Classification],
    congestion_floor: f64,
) -> CandidateSet {
    let mut members: Vec<Candidate> = metrics
        .iter()
        .zip(classes)
        .enumerate()
        .filter(|(_, (m, c))| c.safe && m.congestion >= congestion_floor)
        .map(|(w, (m, _))| {
            let (row, col) = grid.row_col(w);
            Candidate {
                window: w,
                row,
                col,
                metrics: *m,
            }
        })
        .collect();
    members.sort_by(|a, b| {
        b.metrics
            .congestion
            .total_cmp(&a.metrics.congestion)
            .then(a.window.cmp(&b.window))
    });
    CandidateSet { members }
}
