use super::{BranchKind, IrSolution};
use crate::design::{PdnGeometry, PdnIndex, StripeId, Technology};
use crate::geom::{dbu_to_um, LayerId, Point};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    /// Effective conducting width of a via stack, um. Defaults to the
    /// narrower of the two stripes it joins.
    pub via_width: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EmElement {
    Stripe(StripeId),
    Via(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmEntry {
    pub element: EmElement,
    pub layer: LayerId,
    pub at: Point,
    pub current_ma: f64,
    pub width_um: f64,
    /// mA / um
    pub density: f64,
    pub limit: f64,
    pub utilization: f64,
}

#[derive(Debug, Clone, Default)]
pub struct EmReport {
    /// All checked elements, highest utilisation first.
    pub entries: Vec<EmEntry>,
    pub violations: Vec<EmEntry>,
    pub max_utilization: f64,
}

impl EmReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Current density `|I| / width` for every stripe and via against the layer
/// limit. A stripe carries the largest current of any wire branch through
/// it; a via is checked against its lower layer's limit.
pub fn em_check<T: Scalar>(sol: &IrSolution<T>, pdn: &PdnGeometry, tech: &Technology, cfg: &EmConfig) -> EmReport {
    let mut stripe_current: HashMap<StripeId, f64> = HashMap::new();
    let mut via_current: HashMap<usize, f64> = HashMap::new();
    for b in &sol.branches {
        let i = b.current_ma.as_f64().abs();
        match &b.kind {
            BranchKind::Wire { pieces } => {
                for (id, _) in pieces {
                    let e = stripe_current.entry(*id).or_insert(0.0);
                    *e = e.max(i);
                }
            }
            BranchKind::Via { index } => {
                let e = via_current.entry(*index).or_insert(0.0);
                *e = e.max(i);
            }
        }
    }

    let mut entries = Vec::with_capacity(pdn.stripes.len() + pdn.vias.len());
    for s in &pdn.stripes {
        let current = stripe_current.get(&s.id).copied().unwrap_or(0.0);
        let width = dbu_to_um(s.width);
        let limit = tech.layer(s.layer).em_limit;
        let density = current / width;
        let (a, b) = s.endpoints();
        entries.push(EmEntry {
            element: EmElement::Stripe(s.id),
            layer: s.layer,
            at: Point::new((a.x + b.x) / 2, (a.y + b.y) / 2),
            current_ma: current,
            width_um: width,
            density,
            limit,
            utilization: density / limit,
        });
    }
    let index = PdnIndex::new(pdn);
    for (k, v) in pdn.vias.iter().enumerate() {
        let current = via_current.get(&k).copied().unwrap_or(0.0);
        let width = cfg.via_width.unwrap_or_else(|| {
            let w = |layer| {
                index
                    .piece_at(layer, v.at())
                    .map(|i| dbu_to_um(pdn.stripes[i].width))
                    .unwrap_or(f64::INFINITY)
            };
            w(v.lower).min(w(v.upper))
        });
        let limit = tech.layer(v.lower).em_limit;
        let density = current / width;
        entries.push(EmEntry {
            element: EmElement::Via(k),
            layer: v.lower,
            at: v.at(),
            current_ma: current,
            width_um: width,
            density,
            limit,
            utilization: density / limit,
        });
    }
    entries.sort_by(|a, b| b.utilization.total_cmp(&a.utilization).then(a.element.cmp(&b.element)));
    let violations: Vec<EmEntry> = entries.iter().filter(|e| e.density > e.limit).cloned().collect();
    let max_utilization = entries.first().map_or(0.0, |e| e.utilization);
    EmReport {
        entries,
        violations,
        max_utilization,
    }
}
