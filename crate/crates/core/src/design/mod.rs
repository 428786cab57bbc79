//! Chip description: technology stack, die, pads, loads and signal nets.
//!
//! All quantities use fixed units: micrometres, ohms, milliamps and
//! millivolts. The JSON document carries a `schema_version` field; see
//! `docs/schema.md`.

mod pdn;
pub mod synthetic;
mod topology;

pub use pdn::{generate_uniform_pdn, pdn_length_by_layer, PdnGeometry, Stripe, StripeId, Via};
pub use topology::{Attachments, PdnIndex, PieceConnectivity};

use crate::error::{Error, Result};
use crate::geom::{Direction, LayerId, RectUm};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub direction: Direction,
    /// ohm / square
    pub sheet_resistance: f64,
    /// um
    pub track_pitch: f64,
    /// ohm, one via cut from this layer to the next one up.
    pub via_resistance_to_next: f64,
    /// Current density limit, mA per um of wire width.
    pub em_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Technology {
    /// Bottom to top.
    pub layers: Vec<LayerSpec>,
    pub vdd_mv: f64,
    /// Maximum allowed drop at any load node.
    pub ir_limit_mv: f64,
}

impl Technology {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::config("technology has no layers"));
        }
        if !(self.vdd_mv > 0.0) {
            return Err(Error::config("vdd must be positive"));
        }
        if !(self.ir_limit_mv > 0.0 && self.ir_limit_mv < self.vdd_mv) {
            return Err(Error::config(format!(
                "ir limit {} mV must lie in (0, vdd={})",
                self.ir_limit_mv, self.vdd_mv
            )));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if !(l.sheet_resistance > 0.0 && l.track_pitch > 0.0 && l.via_resistance_to_next > 0.0) {
                return Err(Error::config(format!(
                    "layer {}: sheet resistance, track pitch and via resistance must be positive",
                    l.name
                )));
            }
            if !(l.em_limit > 0.0) {
                return Err(Error::config(format!("layer {}: EM limit must be positive", l.name)));
            }
            if i > 0 && self.layers[i - 1].direction == l.direction {
                return Err(Error::config(format!(
                    "layers {} and {} share a routing direction; the stack must alternate",
                    self.layers[i - 1].name,
                    l.name
                )));
            }
            if self.layers[..i].iter().any(|o| o.name == l.name) {
                return Err(Error::config(format!("duplicate layer name {}", l.name)));
            }
        }
        Ok(())
    }

    pub fn layer_id(&self, name: &str) -> Option<LayerId> {
        self.layers
            .iter()
            .position(|l| l.name == name)
            .map(|i| LayerId(i as u16))
    }

    pub fn layer(&self, id: LayerId) -> &LayerSpec {
        &self.layers[id.index()]
    }

    pub fn layer_names(&self) -> Vec<String> {
        self.layers.iter().map(|l| l.name.clone()).collect()
    }

    /// Series resistance of a via stack from `lower` up to `upper`.
    pub fn via_stack_resistance(&self, lower: LayerId, upper: LayerId) -> f64 {
        (lower.index()..upper.index())
            .map(|i| self.layers[i].via_resistance_to_next)
            .sum()
    }
}

/// Stripe pattern on one PDN layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripePattern {
    pub layer: String,
    /// um
    pub width: f64,
    /// um, centre to centre
    pub pitch: f64,
    /// um, first centreline measured from the die origin
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdnSpec {
    pub layers: Vec<StripePattern>,
}

impl PdnSpec {
    pub fn validate(&self, tech: &Technology) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::config("PDN spec lists no layers"));
        }
        let mut ids = Vec::new();
        for p in &self.layers {
            let id = tech
                .layer_id(&p.layer)
                .ok_or_else(|| Error::config(format!("PDN spec references unknown layer {}", p.layer)))?;
            if !(p.width > 0.0 && p.pitch > 0.0 && p.offset >= 0.0) {
                return Err(Error::config(format!(
                    "layer {}: width and pitch must be positive, offset non-negative",
                    p.layer
                )));
            }
            if p.width >= p.pitch {
                return Err(Error::config(format!(
                    "layer {}: width {} >= pitch {} would overlap stripes",
                    p.layer, p.width, p.pitch
                )));
            }
            if ids.contains(&id) {
                return Err(Error::config(format!("layer {} patterned twice", p.layer)));
            }
            ids.push(id);
        }
        ids.sort();
        for w in ids.windows(2) {
            if tech.layer(w[0]).direction == tech.layer(w[1]).direction {
                return Err(Error::config(format!(
                    "adjacent PDN layers {} and {} run in the same direction and cannot be via-connected",
                    tech.layer(w[0]).name,
                    tech.layer(w[1]).name
                )));
            }
        }
        Ok(())
    }
}

/// Ideal supply attachment point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pad {
    pub x: f64,
    pub y: f64,
    pub layer: String,
}

/// A cell load drawing current from the lowest PDN layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentSource {
    pub x: f64,
    pub y: f64,
    /// mA
    pub current: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pin {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Net {
    pub id: String,
    pub pins: Vec<Pin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub die: RectUm,
    pub pads: Vec<Pad>,
    pub sources: Vec<CurrentSource>,
    pub nets: Vec<Net>,
}

impl Design {
    pub fn validate(&self, tech: &Technology) -> Result<()> {
        let die = &self.die;
        if !(die.width() > 0.0 && die.height() > 0.0) {
            return Err(Error::config("die is degenerate"));
        }
        if self.pads.is_empty() {
            return Err(Error::config("design has no pads"));
        }
        for (i, p) in self.pads.iter().enumerate() {
            if !die.contains(p.x, p.y) {
                return Err(Error::config(format!("pad {i} lies outside the die")));
            }
            if tech.layer_id(&p.layer).is_none() {
                return Err(Error::config(format!("pad {i} references unknown layer {}", p.layer)));
            }
        }
        for (i, s) in self.sources.iter().enumerate() {
            if !die.contains(s.x, s.y) {
                return Err(Error::config(format!("source {i} lies outside the die")));
            }
            if !(s.current >= 0.0 && s.current.is_finite()) {
                return Err(Error::config(format!("source {i} has invalid current {}", s.current)));
            }
        }
        for n in &self.nets {
            if n.pins.len() < 2 {
                return Err(Error::DegenerateNet {
                    net: n.id.clone(),
                    pins: n.pins.len(),
                });
            }
            if n.pins.iter().any(|p| !die.contains(p.x, p.y)) {
                return Err(Error::config(format!("net {} has a pin outside the die", n.id)));
            }
        }
        Ok(())
    }

    pub fn total_current(&self) -> f64 {
        self.sources.iter().map(|s| s.current).sum()
    }
}

/// Single JSON input document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignDocument {
    pub schema_version: u32,
    pub technology: Technology,
    pub pdn_spec: PdnSpec,
    pub design: Design,
}

impl DesignDocument {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.technology.validate()?;
        self.pdn_spec.validate(&self.technology)?;
        self.design.validate(&self.technology)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text)?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&crate::error::read_text(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Six-layer M2..M7 stack. Resistances, pitches and limits are illustrative
/// placeholders, not characterised process data.
pub fn default_technology() -> Technology {
    let layer = |name: &str, direction, rs, pitch, via, em| LayerSpec {
        name: name.to_string(),
        direction,
        sheet_resistance: rs,
        track_pitch: pitch,
        via_resistance_to_next: via,
        em_limit: em,
    };
    use Direction::{Horizontal as H, Vertical as V};
    Technology {
        layers: vec![
            layer("M2", H, 0.10, 0.5, 0.5, 15.0),
            layer("M3", V, 0.10, 0.5, 0.5, 15.0),
            layer("M4", H, 0.06, 0.5, 0.3, 20.0),
            layer("M5", V, 0.06, 0.5, 0.3, 20.0),
            layer("M6", H, 0.03, 1.0, 0.2, 35.0),
            layer("M7", V, 0.03, 1.0, 0.2, 35.0),
        ],
        vdd_mv: 750.0,
        ir_limit_mv: 70.0,
    }
}

/// Uniform pattern over M2..M7. Widths and pitches are illustrative
/// placeholders chosen for the synthetic demo design.
pub fn default_pdn_spec() -> PdnSpec {
    let p = |layer: &str, width, pitch, offset| StripePattern {
        layer: layer.to_string(),
        width,
        pitch,
        offset,
    };
    PdnSpec {
        layers: vec![
            p("M2", 1.0, 20.0, 10.0),
            p("M3", 1.0, 20.0, 10.0),
            p("M4", 2.0, 40.0, 20.0),
            p("M5", 2.0, 40.0, 20.0),
            p("M6", 4.0, 80.0, 40.0),
            p("M7", 4.0, 80.0, 40.0),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_stack_is_valid() {
        let tech = default_technology();
        tech.validate().unwrap();
        default_pdn_spec().validate(&tech).unwrap();
        assert_eq!(tech.via_stack_resistance(LayerId(0), LayerId(2)), 1.0);
    }

    #[test]
    fn non_alternating_stack_rejected() {
        let mut tech = default_technology();
        tech.layers[1].direction = Direction::Horizontal;
        assert!(tech.validate().is_err());
    }

    #[test]
    fn ir_limit_must_be_below_vdd() {
        let mut tech = default_technology();
        tech.ir_limit_mv = tech.vdd_mv;
        assert!(tech.validate().is_err());
    }

    #[test]
    fn overlapping_stripes_rejected() {
        let tech = default_technology();
        let mut spec = default_pdn_spec();
        spec.layers[0].width = 20.0;
        assert!(spec.validate(&tech).is_err());
    }

    #[test]
    fn unknown_layer_rejected() {
        let tech = default_technology();
        let mut spec = default_pdn_spec();
        spec.layers[0].layer = "M9".into();
        assert!(matches!(spec.validate(&tech), Err(Error::Config(_))));
    }

    #[test]
    fn single_pin_net_is_degenerate() {
        let tech = default_technology();
        let d = Design {
            die: RectUm::new(0.0, 0.0, 10.0, 10.0),
            pads: vec![Pad {
                x: 0.0,
                y: 0.0,
                layer: "M7".into(),
            }],
            sources: vec![],
            nets: vec![Net {
                id: "n0".into(),
                pins: vec![Pin { x: 1.0, y: 1.0 }],
            }],
        };
        assert!(matches!(d.validate(&tech), Err(Error::DegenerateNet { pins: 1, .. })));
    }
}
