use crate::error::{Error, Result};
use crate::windowing::WindowMetrics;
use serde::{Deserialize, Serialize};

/// Largest reduction ratio allowed in any window.
pub const F_CEILING: f64 = 0.5;

/// Which window drop feeds the inverse-drop term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IrMetric {
    #[default]
    GuardMax,
    GuardMean,
    WindowMax,
}

impl IrMetric {
    pub fn pick(self, m: &WindowMetrics) -> f64 {
        match self {
            IrMetric::GuardMax => m.guard_max_mv,
            IrMetric::GuardMean => m.guard_mean_mv,
            IrMetric::WindowMax => m.window_max_mv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    /// Weight of normalised congestion.
    pub alpha: f64,
    /// mV; weight of the inverse-drop term.
    pub beta_mv: f64,
    /// Value of the inverse-drop term at zero drop, and its ceiling.
    pub beta_cap: f64,
    pub f_max: f64,
    /// Factor applied to the ratio of a window implicated in a failed
    /// verification.
    pub damping: f64,
    pub max_iterations: usize,
    /// Raw window score mapped to congestion 1.0; defaults to the 95th
    /// percentile of window scores on the reference grid.
    pub congestion_cap: Option<f64>,
    pub ir_metric: IrMetric,
    /// Apply `f_max` to every IR-safe window regardless of congestion.
    pub brute_force: bool,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            alpha: 0.8,
            beta_mv: 2.0,
            beta_cap: F_CEILING,
            f_max: F_CEILING,
            damping: 0.5,
            max_iterations: 5,
            congestion_cap: None,
            ir_metric: IrMetric::GuardMax,
            brute_force: false,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta_mv >= 0.0 && self.alpha + self.beta_mv > 0.0) {
            return Err(Error::config("alpha and beta must be >= 0 with a positive sum"));
        }
        if !(self.f_max > 0.0 && self.f_max <= F_CEILING) {
            return Err(Error::config(format!("f_max must lie in (0, {F_CEILING}]")));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::config("damping must lie in (0, 1)"));
        }
        if !(self.beta_cap >= 0.0) {
            return Err(Error::config("beta cap must be >= 0"));
        }
        if self.congestion_cap.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::config("congestion cap must be positive"));
        }
        Ok(())
    }
}

/// Inverse-drop term `beta / drop`, saturating at the configured cap.
pub fn beta_term(ir_drop_mv: f64, cfg: &SynthesisConfig) -> f64 {
    if ir_drop_mv > 0.0 {
        (cfg.beta_mv / ir_drop_mv).min(cfg.beta_cap)
    } else {
        cfg.beta_cap
    }
}

/// Reduction ratio `clamp(alpha * c + beta / drop, 0, f_max)`.
pub fn target_f(congestion_norm: f64, ir_drop_mv: f64, cfg: &SynthesisConfig) -> f64 {
    let c = if congestion_norm.is_nan() {
        0.0
    } else {
        congestion_norm.clamp(0.0, 1.0)
    };
    (cfg.alpha * c + beta_term(ir_drop_mv, cfg)).clamp(0.0, cfg.f_max)
}
