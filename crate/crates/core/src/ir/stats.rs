use super::IrSolution;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::windowing::WindowGrid;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct WindowIrStats {
    pub max_drop_mv: f64,
    pub mean_drop_mv: f64,
    pub count: usize,
    /// No analysed location falls in the window.
    pub empty: bool,
}

/// Max and mean drop per window over grid nodes and loads. Every sample must
/// fall inside the grid.
pub fn window_ir_stats<T: Scalar>(sol: &IrSolution<T>, grid: &WindowGrid) -> Result<Vec<WindowIrStats>> {
    let mut out = vec![
        WindowIrStats {
            empty: true,
            ..Default::default()
        };
        grid.len()
    ];
    for (p, d) in sol.samples() {
        let w = grid.locate(p).ok_or(Error::Coverage)?;
        let s = &mut out[w];
        s.max_drop_mv = s.max_drop_mv.max(d);
        s.mean_drop_mv += d;
        s.count += 1;
        s.empty = false;
    }
    for s in &mut out {
        if s.count > 0 {
            s.mean_drop_mv /= s.count as f64;
        }
    }
    Ok(out)
}
