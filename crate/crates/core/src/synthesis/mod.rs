//! Congestion-driven, IR-guarded PDN reduction.
//!
//! Every candidate window gets a reduction ratio from its congestion and IR
//! drop. Plans for all candidates are applied together and the whole chip
//! is re-verified; windows near a failure have their ratio damped and the
//! plans are rebuilt from the original geometry until verification passes.

mod config;
mod plan;

pub use config::{beta_term, target_f, IrMetric, SynthesisConfig, F_CEILING};
pub use plan::{apply_plan, loads_connected, plan_reduction, Applied, PlanContext, ReductionPlan, WindowPlan};

use crate::analysis::{Analysis, Analyzer, Verification};
use crate::design::PdnGeometry;
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::ir::{EmReport, IrSolution};
use crate::report::nearest_rank;
use crate::windowing::{guard_band, select_candidates, CandidateSet};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// One window in one verification round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub window: usize,
    pub row: usize,
    pub col: usize,
    #[serde(rename = "F")]
    pub f: f64,
    pub removed_um: f64,
    pub verify_pass: bool,
}

pub fn write_log_jsonl<W: Write>(mut w: W, log: &[IterationRecord]) -> Result<()> {
    for r in log {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SynthesisOutcome {
    pub baseline: Analysis,
    pub candidates: CandidateSet,
    /// Raw window score mapped to congestion 1.0.
    pub congestion_cap: f64,
    /// Plan that produced the final geometry; segment ids refer to the
    /// input split at window boundaries.
    pub plan: ReductionPlan,
    pub log: Vec<IterationRecord>,
    pub iterations: usize,
    pub final_pdn: PdnGeometry,
    pub final_ir: IrSolution,
    pub final_em: EmReport,
    pub verification: Verification,
}

/// Reduce `pdn` in congested IR-safe windows while keeping the full chip
/// within its IR and EM limits.
///
/// `reference` is the uniform grid the per-window budget is measured
/// against; pass `None` to measure against `pdn` itself.
pub fn synthesize(
    analyzer: &Analyzer<'_>,
    pdn: &PdnGeometry,
    reference: Option<&PdnGeometry>,
    cfg: &SynthesisConfig,
) -> Result<SynthesisOutcome> {
    cfg.validate()?;
    let design = analyzer.design;
    let grid = &analyzer.grid;
    let baseline = analyzer.analyze(pdn)?;
    let v = baseline.verification;
    if !v.pass {
        return Err(Error::Precondition {
            ir_violations: v.ir_violations,
            em_violations: v.em_violations,
            max_drop_mv: v.max_drop_mv,
        });
    }

    let floor = if cfg.brute_force {
        f64::NEG_INFINITY
    } else {
        analyzer.cfg.window.congestion_floor
    };
    let candidates = select_candidates(grid, &baseline.metrics, &baseline.classes, floor);
    let congestion_cap = match cfg.congestion_cap {
        Some(c) => c,
        None => {
            let scores = match reference {
                Some(r) => analyzer.congestion_map(r).window_scores(),
                None => baseline.cmap.window_scores(),
            };
            nearest_rank(&scores, 95.0).unwrap_or(0.0)
        }
    };

    let unchanged = |baseline: Analysis, candidates| SynthesisOutcome {
        final_pdn: pdn.clone(),
        final_ir: baseline.ir.clone(),
        final_em: baseline.em.clone(),
        verification: baseline.verification,
        baseline,
        candidates,
        congestion_cap,
        plan: ReductionPlan::default(),
        log: Vec::new(),
        iterations: 0,
    };
    if candidates.is_empty() {
        return Ok(unchanged(baseline, candidates));
    }

    let (xs, ys) = grid.cuts();
    let seg = pdn.split_at(&xs, &ys);
    let ctx = PlanContext::new(&seg, design, grid, reference)?;
    let mut ratios: Vec<f64> = candidates
        .members
        .iter()
        .map(|c| {
            if cfg.brute_force {
                cfg.f_max
            } else {
                let norm = if congestion_cap > 0.0 {
                    c.metrics.congestion / congestion_cap
                } else {
                    0.0
                };
                target_f(norm, cfg.ir_metric.pick(&c.metrics), cfg)
            }
        })
        .collect();
    let directions: Vec<_> = candidates
        .members
        .iter()
        .map(|c| baseline.cmap.windows[c.window].congested_direction())
        .collect();

    let mut log = Vec::new();
    let mut iteration = 0;
    loop {
        iteration += 1;
        let mut plan = ReductionPlan {
            windows: (0..candidates.len())
                .into_par_iter()
                .map(|k| plan_reduction(&ctx, candidates.members[k].window, ratios[k], directions[k]))
                .collect(),
            skipped: Vec::new(),
        };
        let applied = apply_plan(&seg, design, &plan.removals())?;
        plan.drop_skipped(&seg, &applied.skipped);
        let (ir, em, verification) = analyzer.verify(&applied.pdn)?;
        log.extend(plan.windows.iter().map(|w| IterationRecord {
            iteration,
            window: w.window,
            row: w.row,
            col: w.col,
            f: w.f,
            removed_um: w.removed_um(),
            verify_pass: verification.pass,
        }));
        if verification.pass {
            let final_pdn = if plan.removals().is_empty() {
                pdn.clone()
            } else {
                applied.pdn.coalesce()
            };
            return Ok(SynthesisOutcome {
                baseline,
                candidates,
                congestion_cap,
                plan,
                log,
                iterations: iteration,
                final_pdn,
                final_ir: ir,
                final_em: em,
                verification,
            });
        }

        // Windows whose guard band holds a violation.
        let hazards: Vec<Point> = ir
            .ir_violations(analyzer.tech.ir_limit_mv)
            .into_iter()
            .map(|(p, _)| p)
            .chain(em.violations.iter().map(|e| e.at))
            .collect();
        let mut offending: Vec<usize> = (0..candidates.len())
            .filter(|&k| ratios[k] > 0.0)
            .filter(|&k| {
                let gb = guard_band(
                    &grid.window_at(candidates.members[k].window),
                    analyzer.cfg.window.guard_step(),
                    &grid.die,
                );
                hazards.iter().any(|p| gb.contains_tiled(*p, &grid.die))
            })
            .collect();
        if offending.is_empty() {
            offending = (0..candidates.len()).filter(|&k| ratios[k] > 0.0).collect();
        }
        // Past the damping budget, implicated windows are dropped outright,
        // which ends with the unmodified geometry at worst.
        let factor = if iteration < cfg.max_iterations {
            cfg.damping
        } else {
            0.0
        };
        for k in offending {
            ratios[k] *= factor;
        }
    }
}

#[cfg(test)]
mod tests;
