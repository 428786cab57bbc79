//! Static IR-drop and electromigration analysis of a PDN geometry.

mod em;
mod stats;
mod system;

pub use em::{em_check, EmConfig, EmElement, EmEntry, EmReport};
pub use stats::{window_ir_stats, WindowIrStats};
pub use system::{
    build_system, Branch, BranchKind, BuildOptions, ConductanceSystem, GridNode, Slot, SourceTap,
    DEFAULT_ATTACH_RESISTANCE,
};

use crate::design::{Design, PdnGeometry, Technology};
use crate::error::Result;
use crate::geom::{dbu_to_um, LayerId, Point};
use crate::linalg::{solve_spd, SolverOptions};
use crate::scalar::Scalar;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolvedNode<T> {
    pub layer: LayerId,
    pub at: Point,
    pub drop_mv: T,
    pub pad: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceDrop<T> {
    pub at: Point,
    pub current: f64,
    /// Drop at the load, including its attachment resistance.
    pub drop_mv: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchFlow<T> {
    pub kind: BranchKind,
    /// Signed current from branch end `a` to end `b`, mA.
    pub current_ma: T,
}

/// Solved drops and branch currents. Floating metal is omitted.
#[derive(Debug, Clone)]
pub struct IrSolution<T = f64> {
    pub vdd_mv: f64,
    pub layers: Vec<String>,
    /// Pad and connected grid nodes.
    pub nodes: Vec<SolvedNode<T>>,
    pub sources: Vec<SourceDrop<T>>,
    pub branches: Vec<BranchFlow<T>>,
    /// Raw unknown vector in system order.
    pub unknowns: Vec<T>,
    pub residual_inf: T,
    pub iterations: usize,
    pub direct: bool,
}

impl<T: Scalar> IrSolution<T> {
    /// Every analysed location with its drop: grid nodes then loads.
    pub fn samples(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        self.nodes
            .iter()
            .map(|n| (n.at, n.drop_mv.as_f64()))
            .chain(self.sources.iter().map(|s| (s.at, s.drop_mv.as_f64())))
    }

    pub fn max_drop(&self) -> f64 {
        self.samples().map(|(_, d)| d).fold(0.0, f64::max)
    }

    pub fn min_drop(&self) -> f64 {
        self.samples().map(|(_, d)| d).fold(f64::INFINITY, f64::min)
    }

    /// Power delivered to the loads, `sum I_k * drop_k` (uW).
    pub fn dissipated_power(&self) -> f64 {
        self.sources.iter().map(|s| s.current * s.drop_mv.as_f64()).sum()
    }

    /// Locations whose drop exceeds `limit_mv`.
    pub fn ir_violations(&self, limit_mv: f64) -> Vec<(Point, f64)> {
        self.samples().filter(|(_, d)| *d > limit_mv).collect()
    }

    /// CSV with columns `x, y, layer, drop_mV`; loads are listed with layer
    /// `load`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["x", "y", "layer", "drop_mV"])?;
        for n in &self.nodes {
            out.serialize((
                dbu_to_um(n.at.x),
                dbu_to_um(n.at.y),
                &self.layers[n.layer.index()],
                n.drop_mv.as_f64(),
            ))?;
        }
        for s in &self.sources {
            out.serialize((dbu_to_um(s.at.x), dbu_to_um(s.at.y), "load", s.drop_mv.as_f64()))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Solve an assembled system.
pub fn solve<T: Scalar>(sys: &ConductanceSystem<T>, opts: &SolverOptions) -> Result<IrSolution<T>> {
    let lin = solve_spd(&sys.matrix, &sys.currents, opts)?;
    let x = lin.x;

    let nodes = sys
        .nodes
        .iter()
        .zip(&sys.slots)
        .enumerate()
        .filter(|(_, (_, s))| **s != Slot::Floating)
        .map(|(i, (n, s))| SolvedNode {
            layer: n.layer,
            at: n.at,
            drop_mv: sys.node_drop(&x, i),
            pad: *s == Slot::Ground,
        })
        .collect();
    let sources = sys
        .taps
        .iter()
        .map(|t| SourceDrop {
            at: t.at,
            current: t.current,
            drop_mv: sys.node_drop(&x, t.node) + T::of(t.resistance * t.current),
        })
        .collect();
    let branches = sys
        .branches
        .iter()
        .map(|b| BranchFlow {
            kind: b.kind.clone(),
            current_ma: b.conductance * (sys.node_drop(&x, b.b) - sys.node_drop(&x, b.a)),
        })
        .collect();

    Ok(IrSolution {
        vdd_mv: sys.vdd_mv,
        layers: sys.layers.clone(),
        nodes,
        sources,
        branches,
        unknowns: x,
        residual_inf: lin.residual_inf,
        iterations: lin.iterations,
        direct: lin.direct,
    })
}

/// Build and solve in double precision.
pub fn analyze(
    pdn: &PdnGeometry,
    design: &Design,
    tech: &Technology,
    build: &BuildOptions,
    solver: &SolverOptions,
) -> Result<IrSolution> {
    let sys = build_system::<f64>(pdn, design, tech, build)?;
    solve(&sys, solver)
}
