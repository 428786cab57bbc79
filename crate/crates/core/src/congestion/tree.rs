use crate::error::{Error, Result};
use crate::geom::{Dbu, Direction, Point};
use serde::Serialize;
use std::collections::BTreeMap;

/// MST edge as pin indices, with `pins[a] <= pins[b]` lexicographically.
pub type Edge = (usize, usize);

/// Axis-parallel segment with `a <= b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    /// Normalises endpoint order. The endpoints must share an axis.
    pub fn new(p: Point, q: Point) -> Self {
        debug_assert!(p.x == q.x || p.y == q.y, "segment must be axis-parallel");
        if p <= q {
            Self { a: p, b: q }
        } else {
            Self { a: q, b: p }
        }
    }

    pub fn length(&self) -> Dbu {
        self.a.manhattan(self.b)
    }

    /// Horizontal for zero-length segments too.
    pub fn direction(&self) -> Direction {
        if self.a.y == self.b.y {
            Direction::Horizontal
        } else {
            Direction::Vertical
        }
    }

    fn line(&self) -> (Direction, Dbu) {
        let d = self.direction();
        (d, self.a.across(d))
    }

    fn span(&self) -> (Dbu, Dbu) {
        let d = self.direction();
        (self.a.along(d), self.b.along(d))
    }
}

/// Rectilinear minimum spanning tree by Kruskal. Ties break on length, then
/// lexicographically on the normalised endpoint coordinates.
pub fn build_mst(pins: &[Point]) -> Result<Vec<Edge>> {
    if pins.len() < 2 {
        return Err(Error::DegenerateNet {
            net: String::new(),
            pins: pins.len(),
        });
    }
    let n = pins.len();
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = if (pins[i], i) <= (pins[j], j) { (i, j) } else { (j, i) };
            edges.push((pins[a].manhattan(pins[b]), pins[a], pins[b], a, b));
        }
    }
    edges.sort_unstable();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut out = Vec::with_capacity(n - 1);
    for (_, _, _, a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            out.push((a, b));
            if out.len() == n - 1 {
                break;
            }
        }
    }
    Ok(out)
}

/// Rectilinear embedding of an MST.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SteinerTree {
    /// Fixed wiring, collinear overlaps merged.
    pub segments: Vec<Segment>,
    /// Diagonal edges with no preferred bend; routed either way with equal
    /// probability.
    pub flexible: Vec<(Point, Point)>,
    pub steiner_points: Vec<Point>,
}

impl SteinerTree {
    pub fn length(&self) -> Dbu {
        self.segments.iter().map(Segment::length).sum::<Dbu>()
            + self.flexible.iter().map(|(p, q)| p.manhattan(*q)).sum::<Dbu>()
    }

    /// Every wire with its expected usage: 1 for fixed segments, 0.5 for
    /// each leg of both bends of a flexible edge.
    pub fn weighted_segments(&self) -> impl Iterator<Item = (Segment, f64)> + '_ {
        let fixed = self.segments.iter().map(|s| (*s, 1.0));
        let flex = self.flexible.iter().flat_map(|&(p, q)| {
            let (lo, hi) = l_shapes(p, q);
            lo.into_iter().chain(hi).filter(|s| s.length() > 0).map(|s| (s, 0.5))
        });
        fixed.chain(flex)
    }
}

/// The two L embeddings of `p`-`q`: horizontal first, then vertical first.
fn l_shapes(p: Point, q: Point) -> ([Segment; 2], [Segment; 2]) {
    let c1 = Point::new(q.x, p.y);
    let c2 = Point::new(p.x, q.y);
    (
        [Segment::new(p, c1), Segment::new(c1, q)],
        [Segment::new(p, c2), Segment::new(c2, q)],
    )
}

type Lines = BTreeMap<(Direction, Dbu), Vec<(Dbu, Dbu)>>;

fn merge(mut iv: Vec<(Dbu, Dbu)>) -> Vec<(Dbu, Dbu)> {
    iv.sort_unstable();
    let mut out: Vec<(Dbu, Dbu)> = Vec::with_capacity(iv.len());
    for (lo, hi) in iv {
        match out.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

fn add(lines: &mut Lines, s: Segment) {
    if s.length() > 0 {
        let iv = lines.entry(s.line()).or_default();
        iv.push(s.span());
        *iv = merge(std::mem::take(iv));
    }
}

/// Length of `s` already covered by fixed wiring.
fn overlap(lines: &Lines, s: &Segment) -> Dbu {
    if s.length() == 0 {
        return 0;
    }
    let (lo, hi) = s.span();
    lines
        .get(&s.line())
        .map_or(0, |iv| iv.iter().map(|&(a, b)| (hi.min(b) - lo.max(a)).max(0)).sum())
}

/// Embed each MST edge rectilinearly. Straight edges are fixed first; a
/// diagonal edge takes the bend that shares the most length with wiring
/// already fixed, and stays flexible when neither bend shares any. Shared
/// collinear wiring is merged, which is where Steiner points appear.
pub fn steinerize(mst: &[Edge], pins: &[Point]) -> SteinerTree {
    let mut lines = Lines::new();
    let mut pending = Vec::new();
    for &(i, j) in mst {
        let (p, q) = (pins[i], pins[j]);
        if p.x == q.x || p.y == q.y {
            add(&mut lines, Segment::new(p, q));
        } else {
            pending.push((p, q));
        }
    }
    // Fixing one bend can create overlap for another; repeat to a fixpoint.
    loop {
        let mut changed = false;
        pending.retain(|&(p, q)| {
            let (h, v) = l_shapes(p, q);
            let oh: Dbu = h.iter().map(|s| overlap(&lines, s)).sum();
            let ov: Dbu = v.iter().map(|s| overlap(&lines, s)).sum();
            if oh == 0 && ov == 0 {
                return true;
            }
            for s in if oh >= ov { h } else { v } {
                add(&mut lines, s);
            }
            changed = true;
            false
        });
        if !changed {
            break;
        }
    }

    let segments: Vec<Segment> = lines
        .iter()
        .flat_map(|(&(d, c), iv)| {
            iv.iter()
                .map(move |&(lo, hi)| Segment::new(Point::from_track(d, lo, c), Point::from_track(d, hi, c)))
        })
        .collect();

    // Non-pin points where three or more wire ends meet.
    let mut candidates: Vec<Point> = segments.iter().flat_map(|s| [s.a, s.b]).collect();
    for s in &segments {
        for t in &segments {
            if s.direction() != t.direction() {
                let x = if s.direction() == Direction::Vertical {
                    s.a.x
                } else {
                    t.a.x
                };
                let y = if s.direction() == Direction::Horizontal {
                    s.a.y
                } else {
                    t.a.y
                };
                candidates.push(Point::new(x, y));
            }
        }
    }
    candidates.sort_unstable();
    candidates.dedup();
    let degree = |p: Point| -> usize {
        segments
            .iter()
            .map(|s| {
                let (d, c) = s.line();
                let (lo, hi) = s.span();
                let t = p.along(d);
                if p.across(d) != c || t < lo || t > hi {
                    0
                } else if t == lo || t == hi {
                    1
                } else {
                    2
                }
            })
            .sum()
    };
    let steiner_points = candidates
        .into_iter()
        .filter(|p| !pins.contains(p) && degree(*p) >= 3)
        .collect();

    SteinerTree {
        segments,
        flexible: pending,
        steiner_points,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(v: &[(i64, i64)]) -> Vec<Point> {
        v.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    fn mst_length(e: &[Edge], p: &[Point]) -> Dbu {
        e.iter().map(|&(a, b)| p[a].manhattan(p[b])).sum()
    }

    /// All spanning trees of the complete graph on `n` vertices, via Prüfer
    /// sequences.
    fn all_trees(n: usize) -> Vec<Vec<Edge>> {
        if n == 2 {
            return vec![vec![(0, 1)]];
        }
        let total = n.pow((n - 2) as u32);
        (0..total)
            .map(|mut code| {
                let seq: Vec<usize> = (0..n - 2)
                    .map(|_| {
                        let d = code % n;
                        code /= n;
                        d
                    })
                    .collect();
                let mut deg = vec![1; n];
                for &s in &seq {
                    deg[s] += 1;
                }
                let mut edges = Vec::new();
                for &s in &seq {
                    let leaf = (0..n).find(|&k| deg[k] == 1).unwrap();
                    edges.push((leaf.min(s), leaf.max(s)));
                    deg[leaf] -= 1;
                    deg[s] -= 1;
                }
                let rest: Vec<usize> = (0..n).filter(|&k| deg[k] == 1).collect();
                edges.push((rest[0], rest[1]));
                edges
            })
            .collect()
    }

    /// Rectilinear Steiner minimum by brute force over Hanan-grid subsets of
    /// up to `n - 2` extra points.
    fn hanan_rsmt(pins: &[Point]) -> Dbu {
        let mut xs: Vec<Dbu> = pins.iter().map(|p| p.x).collect();
        let mut ys: Vec<Dbu> = pins.iter().map(|p| p.y).collect();
        xs.sort_unstable();
        xs.dedup();
        ys.sort_unstable();
        ys.dedup();
        let hanan: Vec<Point> = xs
            .iter()
            .flat_map(|&x| ys.iter().map(move |&y| Point::new(x, y)))
            .filter(|p| !pins.contains(p))
            .collect();
        let k = pins.len().saturating_sub(2).min(3);
        let mut best = Dbu::MAX;
        let mut pick = Vec::new();
        fn rec(h: &[Point], start: usize, k: usize, pick: &mut Vec<Point>, pins: &[Point], best: &mut Dbu) {
            let mut all = pins.to_vec();
            all.extend_from_slice(pick);
            let e = build_mst(&all).unwrap();
            *best = (*best).min(e.iter().map(|&(a, b)| all[a].manhattan(all[b])).sum());
            if k == 0 {
                return;
            }
            for i in start..h.len() {
                pick.push(h[i]);
                rec(h, i + 1, k - 1, pick, pins, best);
                pick.pop();
            }
        }
        rec(&hanan, 0, k, &mut pick, pins, &mut best);
        best
    }

    #[test]
    fn collinear_chain() {
        let p = pts(&[(0, 0), (10, 0), (20, 0)]);
        let e = build_mst(&p).unwrap();
        assert_eq!(e, vec![(0, 1), (1, 2)]);
        assert_eq!(mst_length(&e, &p), 20);
        let t = steinerize(&e, &p);
        assert!(t.steiner_points.is_empty());
        assert_eq!(t.length(), 20);
    }

    #[test]
    fn two_pins_single_edge() {
        let p = pts(&[(5, 5), (0, 0)]);
        assert_eq!(build_mst(&p).unwrap(), vec![(1, 0)]);
        let t = steinerize(&build_mst(&p).unwrap(), &p);
        assert_eq!(t.length(), 10);
        assert_eq!(t.flexible.len(), 1);
    }

    #[test]
    fn degenerate_net() {
        assert!(matches!(
            build_mst(&pts(&[(0, 0)])),
            Err(Error::DegenerateNet { pins: 1, .. })
        ));
        assert!(build_mst(&[]).is_err());
    }

    #[test]
    fn square_tie_break_against_all_sixteen_trees() {
        let p = pts(&[(0, 0), (0, 10), (10, 0), (10, 10)]);
        let trees = all_trees(4);
        assert_eq!(trees.len(), 16);
        let key = |t: &Vec<Edge>| -> Vec<(Point, Point)> {
            let mut k: Vec<(Point, Point)> = t.iter().map(|&(a, b)| (p[a].min(p[b]), p[a].max(p[b]))).collect();
            k.sort_unstable();
            k
        };
        let best_len = trees.iter().map(|t| mst_length(t, &p)).min().unwrap();
        assert_eq!(best_len, 30);
        let oracle = trees.iter().filter(|t| mst_length(t, &p) == 30).map(key).min().unwrap();
        let got = build_mst(&p).unwrap();
        assert_eq!(mst_length(&got, &p), 30);
        assert_eq!(key(&got), oracle);
    }

    #[test]
    fn single_edge_l_route() {
        let p = pts(&[(0, 0), (10, 10)]);
        let t = steinerize(&build_mst(&p).unwrap(), &p);
        assert_eq!(t.length(), 20);
        let total: f64 = t.weighted_segments().map(|(s, w)| s.length() as f64 * w).sum();
        assert_eq!(total, 20.0);
    }

    #[test]
    fn three_pin_steiner_point() {
        let p = pts(&[(0, 0), (10, 0), (5, 5)]);
        assert_eq!(hanan_rsmt(&p), 15);
        let e = build_mst(&p).unwrap();
        assert_eq!(mst_length(&e, &p), 20);
        let t = steinerize(&e, &p);
        assert_eq!(t.length(), 15);
        assert_eq!(t.steiner_points, vec![Point::new(5, 0)]);
        assert!(t.flexible.is_empty());
    }

    fn pin_set(max: usize) -> impl Strategy<Value = Vec<Point>> {
        proptest::collection::vec((0i64..40, 0i64..40), 2..=max)
            .prop_map(|v| v.into_iter().map(|(x, y)| Point::new(x, y)).collect())
    }

    proptest! {
        #[test]
        fn mst_is_optimal(p in pin_set(7)) {
            let e = build_mst(&p).unwrap();
            prop_assert_eq!(e.len(), p.len() - 1);
            let best = all_trees(p.len()).iter().map(|t| mst_length(t, &p)).min().unwrap();
            prop_assert_eq!(mst_length(&e, &p), best);
        }

        #[test]
        fn steiner_between_rsmt_and_mst(p in pin_set(5)) {
            let e = build_mst(&p).unwrap();
            let t = steinerize(&e, &p);
            prop_assert!(t.length() <= mst_length(&e, &p));
            prop_assert!(t.length() >= hanan_rsmt(&p));
            let w: f64 = t.weighted_segments().map(|(s, w)| s.length() as f64 * w).sum();
            prop_assert_eq!(w, t.length() as f64);
        }
    }
}
