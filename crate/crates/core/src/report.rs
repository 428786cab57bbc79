//! Length and IR comparison tables, histograms and SVG heatmaps.

use crate::design::{pdn_length_by_layer, PdnGeometry};
use crate::error::{Error, Result};
use crate::geom::{dbu_to_um, Dbu};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;
use std::fmt::Write as _;
use std::io::Write;

/// Nearest-rank percentile: the value at rank `ceil(p / 100 * n)`.
pub fn nearest_rank(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let rank = ((p / 100.0 * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Some(v[rank - 1])
}

/// Relative reduction `(base - modified) / base * 100`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PercentDelta {
    /// `None` when the base is zero.
    pub raw: Option<f64>,
    /// Rounded half away from zero to two decimals, or `n/a`.
    pub display: String,
}

/// Computed exactly on the binary values of the inputs, so display rounding
/// never depends on floating-point error in the division.
pub fn percent_delta(base: f64, modified: f64) -> PercentDelta {
    let undefined = PercentDelta {
        raw: None,
        display: "n/a".into(),
    };
    let (Some(b), Some(m)) = (BigRational::from_float(base), BigRational::from_float(modified)) else {
        return undefined;
    };
    if b.is_zero() {
        return undefined;
    }
    let pct = (&b - &m) / &b * BigRational::from_integer(BigInt::from(100));
    let hundredths = pct.abs() * BigRational::from_integer(BigInt::from(100));
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let n = (hundredths + half).floor().to_integer();
    let sign = if pct.is_negative() && !n.is_zero() { "-" } else { "" };
    let whole = &n / BigInt::from(100);
    let frac = (&n % BigInt::from(100)).to_u32().unwrap_or(0);
    PercentDelta {
        raw: pct.to_f64(),
        display: format!("{sign}{whole}.{frac:02}%"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IrRow {
    pub max: f64,
    pub median: f64,
    pub ptile90: f64,
}

impl IrRow {
    pub fn from_drops(drops: &[f64]) -> Self {
        Self {
            max: drops.iter().copied().fold(0.0, f64::max),
            median: nearest_rank(drops, 50.0).unwrap_or(0.0),
            ptile90: nearest_rank(drops, 90.0).unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrReport {
    pub before: IrRow,
    pub after: IrRow,
}

/// MAX / MEDIAN / PTILE90 of load drops, mV.
pub fn ir_distribution_report(before: &[f64], after: &[f64]) -> IrReport {
    IrReport {
        before: IrRow::from_drops(before),
        after: IrRow::from_drops(after),
    }
}

impl IrReport {
    pub fn rows(&self) -> [(&'static str, f64, f64); 3] {
        [
            ("MAX (IR)", self.before.max, self.after.max),
            ("MEDIAN", self.before.median, self.after.median),
            ("PTILE90", self.before.ptile90, self.after.ptile90),
        ]
    }
}

/// Drop histogram with `bin_mv` wide bins from 0, columns
/// `bin_lo_mV, bin_hi_mV, before, after`.
pub fn write_ir_histogram<W: Write>(w: W, before: &[f64], after: &[f64], bin_mv: f64) -> Result<()> {
    if !(bin_mv > 0.0) {
        return Err(Error::config("histogram bin must be positive"));
    }
    let top = before.iter().chain(after).copied().fold(0.0, f64::max);
    let bins = ((top / bin_mv).floor() as usize + 1).max(1);
    let count = |d: &[f64]| {
        let mut c = vec![0usize; bins];
        for v in d {
            c[((v.max(0.0) / bin_mv).floor() as usize).min(bins - 1)] += 1;
        }
        c
    };
    let (b, a) = (count(before), count(after));
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["bin_lo_mV", "bin_hi_mV", "before", "after"])?;
    for k in 0..bins {
        out.serialize((k as f64 * bin_mv, (k + 1) as f64 * bin_mv, b[k], a[k]))?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthRow {
    pub layer: String,
    /// dbu
    pub base: Dbu,
    pub modified: Dbu,
    pub delta: PercentDelta,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthReport {
    pub rows: Vec<LengthRow>,
    pub total: LengthRow,
}

/// Per-layer PDN length before and after, with the total.
pub fn pdn_length_report(before: &PdnGeometry, after: &PdnGeometry) -> Result<LengthReport> {
    if before.layers != after.layers {
        return Err(Error::LayerMismatch(format!(
            "{:?} vs {:?}",
            before.layers, after.layers
        )));
    }
    let (b, a) = (pdn_length_by_layer(before), pdn_length_by_layer(after));
    let row = |layer: String, base: Dbu, modified: Dbu| LengthRow {
        layer,
        base,
        modified,
        delta: percent_delta(dbu_to_um(base), dbu_to_um(modified)),
    };
    let mut layers: Vec<_> = b.keys().chain(a.keys()).copied().collect();
    layers.sort_unstable();
    layers.dedup();
    let rows = layers
        .iter()
        .map(|l| {
            row(
                before.layer_name(*l).to_string(),
                b.get(l).copied().unwrap_or(0),
                a.get(l).copied().unwrap_or(0),
            )
        })
        .collect();
    Ok(LengthReport {
        rows,
        total: row("Total".into(), b.values().sum(), a.values().sum()),
    })
}

/// Plain-text PDN length and IR drop tables.
pub fn render_text(length: &LengthReport, ir: &IrReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "PDN length (um)");
    let _ = writeln!(s, "{:<8} {:>14} {:>14} {:>8}", "Layer", "Base", "Modified", "Delta");
    for r in length.rows.iter().chain([&length.total]) {
        let _ = writeln!(
            s,
            "{:<8} {:>14.3} {:>14.3} {:>8}",
            r.layer,
            dbu_to_um(r.base),
            dbu_to_um(r.modified),
            r.delta.display
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "IR drop (mV)");
    let _ = writeln!(s, "{:<10} {:>8} {:>8} {:>8}", "", "Base", "Modified", "Delta");
    for (name, b, a) in ir.rows() {
        let _ = writeln!(
            s,
            "{:<10} {:>8.1} {:>8.1} {:>8}",
            name,
            b,
            a,
            percent_delta(b, a).display
        );
    }
    s
}

/// Columns `table, item, base, modified, delta_pct, delta_display`; lengths
/// in um, drops in mV, raw deltas unrounded.
pub fn write_report_csv<W: Write>(w: W, length: &LengthReport, ir: &IrReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["table", "item", "base", "modified", "delta_pct", "delta_display"])?;
    for r in length.rows.iter().chain([&length.total]) {
        out.serialize((
            "length_um",
            &r.layer,
            dbu_to_um(r.base),
            dbu_to_um(r.modified),
            r.delta.raw,
            &r.delta.display,
        ))?;
    }
    for (name, b, a) in ir.rows() {
        let d = percent_delta(b, a);
        out.serialize(("ir_mV", name, b, a, d.raw, d.display))?;
    }
    out.flush()?;
    Ok(())
}

/// Ten-step scale from dark (low) to bright (at or above the anchor).
const PALETTE: [&str; 10] = [
    "#30123b", "#4145ab", "#4675ed", "#39a2fc", "#1bcfd4", "#24eca6", "#61fc6c", "#a4fc3b", "#f3c63a", "#d23105",
];

/// Colour step of `value` on a scale whose top step starts at 0.9 * anchor.
pub fn color_step(value: f64, anchor: f64) -> usize {
    if !(anchor > 0.0) || !(value > 0.0) {
        return 0;
    }
    ((value / anchor * 10.0).floor() as usize).min(9)
}

/// Row-major grid of values (row 0 at the bottom of the die) as an SVG
/// heatmap.
pub fn heatmap_svg(cols: usize, rows: usize, values: &[f64], anchor: f64, title: &str) -> String {
    let cell = (600 / cols.max(rows).max(1)).max(2);
    let (w, h) = (cols * cell, rows * cell);
    let legend = 24;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        w,
        h + 2 * legend,
        w,
        h + 2 * legend
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(
        s,
        r#"<text x="2" y="16" font-size="14" font-family="sans-serif">{}</text>"#,
        escape(title)
    );
    for r in 0..rows {
        for c in 0..cols {
            let v = values[r * cols + c];
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="{}"/>"#,
                c * cell,
                legend + (rows - 1 - r) * cell,
                PALETTE[color_step(v, anchor)]
            );
        }
    }
    let step = (w / 10).max(1);
    for (k, colour) in PALETTE.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{step}" height="10" fill="{colour}"/>"#,
            k * step,
            legend + h + 4
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="2" y="{}" font-size="10" font-family="sans-serif">0</text><text x="{}" y="{}" font-size="10" font-family="sans-serif" text-anchor="end">{anchor}</text>"#,
        legend + h + 24,
        w.saturating_sub(2),
        legend + h + 24
    );
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
