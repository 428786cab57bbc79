//! Seeded synthetic designs for tests and demos.
//!
//! Loads are scattered uniformly except inside hotspot regions, whose areal
//! density is multiplied by the region's ratio: a load lands in region `k`
//! with probability `r_k A_k / (sum_j r_j A_j + A_rest)`. Net centres follow
//! the same rule over the congested regions.

use super::{
    default_pdn_spec, default_technology, CurrentSource, Design, DesignDocument, Net, Pad, Pin, SCHEMA_VERSION,
};
use crate::error::{Error, Result};
use crate::geom::RectUm;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRegion {
    pub rect: RectUm,
    /// Areal density relative to the background.
    pub density_ratio: f64,
    /// Net bounding-box height / width for nets centred here.
    #[serde(default = "one")]
    pub aspect: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticParams {
    pub die_width: f64,
    pub die_height: f64,
    pub source_count: usize,
    /// mA, mean per load.
    pub mean_current: f64,
    /// Relative half-width of the uniform current spread.
    pub current_spread: f64,
    pub hotspots: Vec<DensityRegion>,
    pub net_count: usize,
    pub min_pins: usize,
    pub max_pins: usize,
    /// um, edge of a net's pin bounding box.
    pub net_span: f64,
    pub congested: Vec<DensityRegion>,
    pub pad_layer: String,
    pub pad_pitch: f64,
    pub pad_offset: f64,
}

impl Default for SyntheticParams {
    /// 1 mm x 1 mm die, 10,000 loads, two load hotspots, a vertically
    /// congested routing region and a mildly congested one.
    fn default() -> Self {
        Self {
            die_width: 1000.0,
            die_height: 1000.0,
            source_count: 10_000,
            mean_current: 0.3,
            current_spread: 0.5,
            hotspots: vec![
                DensityRegion {
                    rect: RectUm::new(100.0, 600.0, 260.0, 760.0),
                    density_ratio: 5.0,
                    aspect: 1.0,
                },
                DensityRegion {
                    rect: RectUm::new(700.0, 150.0, 820.0, 270.0),
                    density_ratio: 4.0,
                    aspect: 1.0,
                },
            ],
            net_count: 10_000,
            min_pins: 2,
            max_pins: 6,
            net_span: 30.0,
            congested: vec![
                DensityRegion {
                    rect: RectUm::new(380.0, 300.0, 640.0, 560.0),
                    density_ratio: 8.0,
                    aspect: 4.0,
                },
                DensityRegion {
                    rect: RectUm::new(600.0, 700.0, 760.0, 860.0),
                    density_ratio: 5.0,
                    aspect: 2.0,
                },
            ],
            pad_layer: "M7".into(),
            pad_pitch: 160.0,
            pad_offset: 40.0,
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<()> {
        let die = self.die();
        if !(self.die_width > 0.0 && self.die_height > 0.0) {
            return Err(Error::config("synthetic die must have positive size"));
        }
        if !(self.mean_current >= 0.0 && (0.0..=1.0).contains(&self.current_spread)) {
            return Err(Error::config("mean current must be >= 0 and spread in [0, 1]"));
        }
        if self.min_pins < 2 || self.max_pins < self.min_pins {
            return Err(Error::config("pins per net must satisfy 2 <= min <= max"));
        }
        if !(self.net_span > 0.0 && self.pad_pitch > 0.0) {
            return Err(Error::config("net span and pad pitch must be positive"));
        }
        for group in [&self.hotspots, &self.congested] {
            for (i, r) in group.iter().enumerate() {
                if !die.contains_rect(&r.rect) || r.rect.area() <= 0.0 {
                    return Err(Error::config(format!("region {i} is empty or outside the die")));
                }
                if !(r.density_ratio > 0.0 && r.aspect > 0.0) {
                    return Err(Error::config(format!("region {i}: ratio and aspect must be positive")));
                }
                if group[..i].iter().any(|o| o.rect.overlaps(&r.rect)) {
                    return Err(Error::config(format!("region {i} overlaps an earlier region")));
                }
            }
        }
        Ok(())
    }

    pub fn die(&self) -> RectUm {
        RectUm::new(0.0, 0.0, self.die_width, self.die_height)
    }

    /// Probability that a single load lands in hotspot `k`.
    pub fn hotspot_probability(&self, k: usize) -> f64 {
        region_weights(&self.die(), &self.hotspots)[k]
    }
}

/// Selection weights `[w_0, .., w_{n-1}, w_rest]`, normalised.
fn region_weights(die: &RectUm, regions: &[DensityRegion]) -> Vec<f64> {
    let inside: f64 = regions.iter().map(|r| r.rect.area()).sum();
    let mut w: Vec<f64> = regions.iter().map(|r| r.density_ratio * r.rect.area()).collect();
    w.push((die.area() - inside).max(0.0));
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

fn snap(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Draw a point: inside region `k`, or in the background outside all regions.
fn sample_point(
    rng: &mut ChaCha8Rng,
    die: &RectUm,
    regions: &[DensityRegion],
    weights: &[f64],
) -> (f64, f64, Option<usize>) {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut pick = regions.len();
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            pick = k;
            break;
        }
    }
    if pick < regions.len() {
        let r = &regions[pick].rect;
        let x = r.x0 + rng.random::<f64>() * r.width();
        let y = r.y0 + rng.random::<f64>() * r.height();
        return (snap(x), snap(y), Some(pick));
    }
    loop {
        let x = snap(die.x0 + rng.random::<f64>() * die.width());
        let y = snap(die.y0 + rng.random::<f64>() * die.height());
        if !regions.iter().any(|r| r.rect.contains(x, y)) {
            return (x, y, None);
        }
    }
}

/// Deterministic for a fixed `(params, seed)`.
pub fn generate_synthetic_design(params: &SyntheticParams, seed: u64) -> Result<Design> {
    params.validate()?;
    let die = params.die();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let hot_w = region_weights(&die, &params.hotspots);
    let sources = (0..params.source_count)
        .map(|_| {
            let (x, y, _) = sample_point(&mut rng, &die, &params.hotspots, &hot_w);
            let jitter = (rng.random::<f64>() * 2.0 - 1.0) * params.current_spread;
            CurrentSource {
                x,
                y,
                current: params.mean_current * (1.0 + jitter),
            }
        })
        .collect();

    let net_w = region_weights(&die, &params.congested);
    let nets = (0..params.net_count)
        .map(|i| {
            let (cx, cy, region) = sample_point(&mut rng, &die, &params.congested, &net_w);
            let aspect = region.map_or(1.0, |k| params.congested[k].aspect);
            let w = params.net_span / aspect.sqrt();
            let h = params.net_span * aspect.sqrt();
            let bx0 = (cx - w / 2.0).max(die.x0);
            let bx1 = (cx + w / 2.0).min(die.x1);
            let by0 = (cy - h / 2.0).max(die.y0);
            let by1 = (cy + h / 2.0).min(die.y1);
            let pins = rng.random_range(params.min_pins..=params.max_pins);
            Net {
                id: format!("n{i}"),
                pins: (0..pins)
                    .map(|_| Pin {
                        x: snap(bx0 + rng.random::<f64>() * (bx1 - bx0)),
                        y: snap(by0 + rng.random::<f64>() * (by1 - by0)),
                    })
                    .collect(),
            }
        })
        .collect();

    let mut pads = Vec::new();
    let mut y = die.y0 + params.pad_offset;
    while y <= die.y1 {
        let mut x = die.x0 + params.pad_offset;
        while x <= die.x1 {
            pads.push(Pad {
                x,
                y,
                layer: params.pad_layer.clone(),
            });
            x += params.pad_pitch;
        }
        y += params.pad_pitch;
    }

    Ok(Design {
        die,
        pads,
        sources,
        nets,
    })
}

/// Complete input document: default stack and pattern plus a synthetic design.
pub fn synthetic_document(params: &SyntheticParams, seed: u64) -> Result<DesignDocument> {
    let doc = DesignDocument {
        schema_version: SCHEMA_VERSION,
        technology: default_technology(),
        pdn_spec: default_pdn_spec(),
        design: generate_synthetic_design(params, seed)?,
    };
    doc.validate()?;
    Ok(doc)
}
