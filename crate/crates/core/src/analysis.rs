//! Full-chip analysis of one PDN geometry: IR drop, EM, congestion and the
//! per-window safety metrics derived from them.

use crate::congestion::{CongestionConfig, CongestionMap, CongestionModel};
use crate::design::{Design, PdnGeometry, Technology};
use crate::error::Result;
use crate::ir::{analyze, em_check, BuildOptions, EmConfig, EmReport, IrSolution};
use crate::linalg::SolverOptions;
use crate::windowing::{
    classify_ir_safe, window_metrics, Classification, SafetyThresholds, WindowConfig, WindowGrid, WindowMetrics,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub build: BuildOptions,
    pub solver: SolverOptions,
    pub em: EmConfig,
    pub congestion: CongestionConfig,
    pub window: WindowConfig,
}

/// Power-integrity sign-off summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub max_drop_mv: f64,
    pub ir_limit_mv: f64,
    pub ir_violations: usize,
    pub em_violations: usize,
    pub max_em_utilization: f64,
    pub pass: bool,
}

impl Verification {
    pub fn new(sol: &IrSolution, em: &EmReport, ir_limit_mv: f64) -> Self {
        let ir_violations = sol.ir_violations(ir_limit_mv).len();
        Self {
            max_drop_mv: sol.max_drop(),
            ir_limit_mv,
            ir_violations,
            em_violations: em.violations.len(),
            max_em_utilization: em.max_utilization,
            pass: ir_violations == 0 && em.is_clean(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub ir: IrSolution,
    pub em: EmReport,
    pub verification: Verification,
    pub cmap: CongestionMap,
    pub metrics: Vec<WindowMetrics>,
    pub classes: Vec<Classification>,
}

/// Holds everything that does not depend on the PDN geometry.
#[derive(Debug, Clone)]
pub struct Analyzer<'a> {
    pub design: &'a Design,
    pub tech: &'a Technology,
    pub cfg: AnalysisConfig,
    pub grid: WindowGrid,
    pub thresholds: SafetyThresholds,
    pub congestion: CongestionModel,
}

impl<'a> Analyzer<'a> {
    pub fn new(design: &'a Design, tech: &'a Technology, cfg: &AnalysisConfig) -> Result<Self> {
        let grid = WindowGrid::partition(design.die.to_dbu(), cfg.window.unit_um)?;
        let thresholds = cfg.window.thresholds(tech.ir_limit_mv)?;
        let congestion = CongestionModel::new(design, tech, &cfg.congestion)?;
        Ok(Self {
            design,
            tech,
            cfg: *cfg,
            grid,
            thresholds,
            congestion,
        })
    }

    /// IR and EM only.
    pub fn verify(&self, pdn: &PdnGeometry) -> Result<(IrSolution, EmReport, Verification)> {
        let sol = analyze(pdn, self.design, self.tech, &self.cfg.build, &self.cfg.solver)?;
        let em = em_check(&sol, pdn, self.tech, &self.cfg.em);
        let v = Verification::new(&sol, &em, self.tech.ir_limit_mv);
        Ok((sol, em, v))
    }

    pub fn congestion_map(&self, pdn: &PdnGeometry) -> CongestionMap {
        self.congestion.map(pdn, self.tech, &self.grid)
    }

    pub fn analyze(&self, pdn: &PdnGeometry) -> Result<Analysis> {
        let (ir, em, verification) = self.verify(pdn)?;
        let cmap = self.congestion_map(pdn);
        let samples: Vec<_> = ir.samples().collect();
        let metrics = window_metrics(
            &self.grid,
            &samples,
            &cmap.window_scores(),
            self.cfg.window.guard_step(),
            &self.thresholds,
        )?;
        let classes = metrics.iter().map(|m| classify_ir_safe(m, &self.thresholds)).collect();
        Ok(Analysis {
            ir,
            em,
            verification,
            cmap,
            metrics,
            classes,
        })
    }
}
