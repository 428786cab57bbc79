//! Integer layout geometry.
//!
//! Layout coordinates are held in database units (1 nm) so that stripe
//! crossings, window boundaries and length totals are exact. Design inputs
//! arrive in micrometres and are snapped once at the boundary.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Database unit: one nanometre.
pub type Dbu = i64;

pub const DBU_PER_UM: Dbu = 1000;

/// Snap a micrometre value to the nearest database unit.
#[inline]
pub fn um_to_dbu(um: f64) -> Dbu {
    (um * DBU_PER_UM as f64).round() as Dbu
}

#[inline]
pub fn dbu_to_um(d: Dbu) -> f64 {
    d as f64 / DBU_PER_UM as f64
}

/// Routing / stripe direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Horizontal,
    Vertical,
}

impl Direction {
    pub fn other(self) -> Self {
        match self {
            Direction::Horizontal => Direction::Vertical,
            Direction::Vertical => Direction::Horizontal,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Horizontal => f.write_str("H"),
            Direction::Vertical => f.write_str("V"),
        }
    }
}

/// Index of a layer in the technology stack, bottom to top.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LayerId(pub u16);

impl LayerId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point {
    pub x: Dbu,
    pub y: Dbu,
}

impl Point {
    pub const fn new(x: Dbu, y: Dbu) -> Self {
        Self { x, y }
    }

    pub fn from_um(x: f64, y: f64) -> Self {
        Self::new(um_to_dbu(x), um_to_dbu(y))
    }

    pub fn manhattan(self, other: Point) -> Dbu {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    /// Coordinate along `dir`.
    #[inline]
    pub fn along(self, dir: Direction) -> Dbu {
        match dir {
            Direction::Horizontal => self.x,
            Direction::Vertical => self.y,
        }
    }

    /// Coordinate across `dir`.
    #[inline]
    pub fn across(self, dir: Direction) -> Dbu {
        match dir {
            Direction::Horizontal => self.y,
            Direction::Vertical => self.x,
        }
    }

    /// Build a point from (along, across) coordinates relative to `dir`.
    #[inline]
    pub fn from_track(dir: Direction, along: Dbu, across: Dbu) -> Self {
        match dir {
            Direction::Horizontal => Self::new(along, across),
            Direction::Vertical => Self::new(across, along),
        }
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]` in database units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x0: Dbu,
    pub y0: Dbu,
    pub x1: Dbu,
    pub y1: Dbu,
}

impl Rect {
    pub const fn new(x0: Dbu, y0: Dbu, x1: Dbu, y1: Dbu) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> Dbu {
        self.x1 - self.x0
    }

    pub fn height(&self) -> Dbu {
        self.y1 - self.y0
    }

    pub fn area_um2(&self) -> f64 {
        dbu_to_um(self.width()) * dbu_to_um(self.height())
    }

    pub fn is_degenerate(&self) -> bool {
        self.x1 <= self.x0 || self.y1 <= self.y0
    }

    /// Closed containment.
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    /// Half-open containment `[x0, x1) x [y0, y1)`, closed on any edge that
    /// coincides with the enclosing die so boundary points are not lost.
    pub fn contains_tiled(&self, p: Point, die: &Rect) -> bool {
        let in_x = p.x >= self.x0 && (p.x < self.x1 || (self.x1 == die.x1 && p.x == die.x1));
        let in_y = p.y >= self.y0 && (p.y < self.y1 || (self.y1 == die.y1 && p.y == die.y1));
        in_x && in_y
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }

    pub fn expand(&self, by: Dbu) -> Rect {
        Rect::new(self.x0 - by, self.y0 - by, self.x1 + by, self.y1 + by)
    }

    pub fn intersection(&self, other: &Rect) -> Rect {
        Rect::new(
            self.x0.max(other.x0),
            self.y0.max(other.y0),
            self.x1.min(other.x1),
            self.y1.min(other.y1),
        )
    }

    /// Extent `(lo, hi)` along `dir`.
    pub fn span_along(&self, dir: Direction) -> (Dbu, Dbu) {
        match dir {
            Direction::Horizontal => (self.x0, self.x1),
            Direction::Vertical => (self.y0, self.y1),
        }
    }

    /// Extent `(lo, hi)` across `dir`.
    pub fn span_across(&self, dir: Direction) -> (Dbu, Dbu) {
        self.span_along(dir.other())
    }
}

/// Rectangle in micrometres, as it appears in design documents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectUm {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl RectUm {
    pub const fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn contains_rect(&self, o: &RectUm) -> bool {
        o.x0 >= self.x0 && o.x1 <= self.x1 && o.y0 >= self.y0 && o.y1 <= self.y1
    }

    pub fn overlaps(&self, o: &RectUm) -> bool {
        self.x0 < o.x1 && o.x0 < self.x1 && self.y0 < o.y1 && o.y0 < self.y1
    }

    pub fn to_dbu(&self) -> Rect {
        Rect::new(
            um_to_dbu(self.x0),
            um_to_dbu(self.y0),
            um_to_dbu(self.x1),
            um_to_dbu(self.y1),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapping_round_trips_on_grid() {
        assert_eq!(um_to_dbu(20.0), 20_000);
        assert_eq!(um_to_dbu(0.0004), 0);
        assert_eq!(um_to_dbu(0.0006), 1);
        assert_eq!(dbu_to_um(um_to_dbu(336.815)), 336.815);
    }

    #[test]
    fn tiled_containment_closes_die_edge() {
        let die = Rect::new(0, 0, 100, 100);
        let w = Rect::new(80, 80, 100, 100);
        assert!(w.contains_tiled(Point::new(100, 100), &die));
        let inner = Rect::new(0, 0, 20, 20);
        assert!(!inner.contains_tiled(Point::new(20, 5), &die));
        assert!(inner.contains_tiled(Point::new(0, 19), &die));
    }
}
