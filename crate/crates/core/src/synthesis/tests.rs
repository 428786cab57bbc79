use super::*;
use crate::analysis::AnalysisConfig;
use crate::design::synthetic::{synthetic_document, DensityRegion, SyntheticParams};
use crate::design::{generate_uniform_pdn, DesignDocument};
use crate::geom::RectUm;

fn small_params() -> SyntheticParams {
    SyntheticParams {
        die_width: 200.0,
        die_height: 200.0,
        source_count: 800,
        mean_current: 0.3,
        hotspots: vec![DensityRegion {
            rect: RectUm::new(20.0, 120.0, 60.0, 160.0),
            density_ratio: 4.0,
            aspect: 1.0,
        }],
        net_count: 1500,
        congested: vec![DensityRegion {
            rect: RectUm::new(80.0, 60.0, 160.0, 140.0),
            density_ratio: 8.0,
            aspect: 4.0,
        }],
        pad_pitch: 80.0,
        pad_offset: 40.0,
        ..Default::default()
    }
}

fn doc(p: &SyntheticParams) -> DesignDocument {
    synthetic_document(p, 3).unwrap()
}

struct Case {
    doc: DesignDocument,
    pdn: PdnGeometry,
}

impl Case {
    fn new(p: &SyntheticParams) -> Self {
        let doc = doc(p);
        let pdn = generate_uniform_pdn(&doc.design, &doc.technology, &doc.pdn_spec).unwrap();
        Self { doc, pdn }
    }

    fn analyzer(&self, cfg: &AnalysisConfig) -> Analyzer<'_> {
        Analyzer::new(&self.doc.design, &self.doc.technology, cfg).unwrap()
    }

    fn run(&self, cfg: &SynthesisConfig) -> SynthesisOutcome {
        synthesize(&self.analyzer(&AnalysisConfig::default()), &self.pdn, None, cfg).unwrap()
    }
}

#[test]
fn no_congestion_returns_input() {
    let c = Case::new(&SyntheticParams {
        net_count: 0,
        ..small_params()
    });
    let out = c.run(&SynthesisConfig::default());
    assert!(out.candidates.is_empty());
    assert_eq!(out.iterations, 0);
    assert!(out.log.is_empty());
    assert_eq!(out.final_pdn, c.pdn);
}

#[test]
fn all_unsafe_is_unchanged_even_brute_force() {
    let c = Case::new(&small_params());
    let mut cfg = AnalysisConfig::default();
    // Any window with a positive mean drop misses this margin.
    cfg.window.margin_threshold_mv = Some(c.doc.technology.ir_limit_mv);
    let an = c.analyzer(&cfg);
    let out = synthesize(
        &an,
        &c.pdn,
        None,
        &SynthesisConfig {
            brute_force: true,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(out.baseline.classes.iter().all(|k| !k.safe));
    assert!(out.candidates.is_empty());
    assert_eq!(out.final_pdn, c.pdn);
}

#[test]
fn dirty_baseline_is_rejected() {
    let mut c = Case::new(&small_params());
    c.doc.technology.ir_limit_mv = 30.0;
    let an = c.analyzer(&AnalysisConfig::default());
    match synthesize(&an, &c.pdn, None, &SynthesisConfig::default()) {
        Err(Error::Precondition { ir_violations, .. }) => assert!(ir_violations > 0),
        other => panic!("expected precondition error, got {:?}", other.map(|o| o.iterations)),
    }
}

#[test]
fn result_passes_independent_verification() {
    let c = Case::new(&small_params());
    let an = c.analyzer(&AnalysisConfig::default());
    for brute_force in [false, true] {
        let out = synthesize(
            &an,
            &c.pdn,
            None,
            &SynthesisConfig {
                brute_force,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(out.verification.pass);
        assert!(!out.plan.removals().is_empty());
        let (ir, em, v) = an.verify(&out.final_pdn).unwrap();
        assert!(v.pass);
        assert!(ir.max_drop() <= c.doc.technology.ir_limit_mv);
        assert!(em.is_clean());
        assert!((ir.max_drop() - out.verification.max_drop_mv).abs() < 1e-6);
        out.final_pdn.validate(&c.doc.design).unwrap();
    }
}

#[test]
fn failed_rounds_are_damped_and_logged() {
    let c = Case::new(&small_params());
    let out = c.run(&SynthesisConfig::default());
    assert!(out.iterations > 1, "design should need damping");
    let first: Vec<_> = out.log.iter().filter(|r| r.iteration == 1).collect();
    let last: Vec<_> = out.log.iter().filter(|r| r.iteration == out.iterations).collect();
    assert!(first.iter().all(|r| !r.verify_pass));
    assert!(last.iter().all(|r| r.verify_pass));
    assert_eq!(first.len(), out.candidates.len());
    for (a, b) in first.iter().zip(&last) {
        assert_eq!(a.window, b.window);
        assert!(b.f <= a.f);
    }
    assert!(first.iter().zip(&last).any(|(a, b)| b.f < a.f));
}

#[test]
fn tight_limit_terminates_with_clean_result() {
    let mut c = Case::new(&small_params());
    let base = c.analyzer(&AnalysisConfig::default()).verify(&c.pdn).unwrap().2;
    c.doc.technology.ir_limit_mv = base.max_drop_mv + 1e-3;
    let cfg = SynthesisConfig {
        brute_force: true,
        max_iterations: 2,
        ..Default::default()
    };
    let out = c.run(&cfg);
    assert!(out.verification.pass);
    assert!(
        out.iterations <= cfg.max_iterations + out.candidates.len(),
        "{} iterations",
        out.iterations
    );
}

#[test]
fn plan_matches_length_table() {
    let c = Case::new(&small_params());
    let out = c.run(&SynthesisConfig::default());
    let table = crate::report::pdn_length_report(&c.pdn, &out.final_pdn).unwrap();
    let removed = out.plan.removed_by_layer();
    for row in &table.rows {
        let r = removed.get(&row.layer).copied().unwrap_or(0);
        assert_eq!(row.base - row.modified, r, "layer {}", row.layer);
    }
    let total: i64 = removed.values().sum();
    assert_eq!(table.total.base - table.total.modified, total);
    let logged: f64 = out
        .log
        .iter()
        .filter(|r| r.iteration == out.iterations)
        .map(|r| r.removed_um)
        .sum();
    assert!((logged - crate::geom::dbu_to_um(total)).abs() < 1e-9);
}

#[test]
fn plans_follow_congested_direction() {
    let c = Case::new(&small_params());
    let out = c.run(&SynthesisConfig::default());
    for w in &out.plan.windows {
        let dir = out.baseline.cmap.windows[w.window].congested_direction();
        assert_eq!(w.direction, dir);
    }
    let removed = out.plan.removed_by_layer();
    assert!(removed.keys().any(|l| l == "M3" || l == "M5" || l == "M7"));
}

#[test]
fn undamped_result_is_a_fixed_point() {
    let c = Case::new(&SyntheticParams {
        mean_current: 0.1,
        ..small_params()
    });
    let an = c.analyzer(&AnalysisConfig::default());
    let cfg = SynthesisConfig::default();
    let first = synthesize(&an, &c.pdn, Some(&c.pdn), &cfg).unwrap();
    assert_eq!(first.iterations, 1);
    assert!(!first.plan.removals().is_empty());
    let second = synthesize(&an, &first.final_pdn, Some(&c.pdn), &cfg).unwrap();
    assert!(second.plan.removals().is_empty());
    assert_eq!(second.final_pdn, first.final_pdn);
}

#[test]
fn reruns_reach_a_fixed_point() {
    let c = Case::new(&small_params());
    let an = c.analyzer(&AnalysisConfig::default());
    let cfg = SynthesisConfig::default();
    let mut cur = c.pdn.clone();
    for _ in 0..8 {
        let out = synthesize(&an, &cur, Some(&c.pdn), &cfg).unwrap();
        assert!(out.verification.pass);
        if out.plan.removals().is_empty() {
            assert_eq!(out.final_pdn, cur);
            return;
        }
        let before: i64 = crate::design::pdn_length_by_layer(&cur).values().sum();
        let after: i64 = crate::design::pdn_length_by_layer(&out.final_pdn).values().sum();
        assert!(after < before);
        cur = out.final_pdn;
    }
    panic!("no fixed point within 8 reruns");
}

#[test]
fn brute_force_uses_every_safe_window() {
    let c = Case::new(&small_params());
    let out = c.run(&SynthesisConfig {
        brute_force: true,
        ..Default::default()
    });
    let safe = out.baseline.classes.iter().filter(|k| k.safe).count();
    assert_eq!(out.candidates.len(), safe);
    assert!(out.log.iter().filter(|r| r.iteration == 1).all(|r| r.f == F_CEILING));
}

#[test]
fn deterministic() {
    let c = Case::new(&small_params());
    let a = c.run(&SynthesisConfig::default());
    let b = c.run(&SynthesisConfig::default());
    assert_eq!(a.final_pdn, b.final_pdn);
    assert_eq!(a.log, b.log);
}

#[test]
fn log_lines_carry_ratio_key() {
    let c = Case::new(&small_params());
    let out = c.run(&SynthesisConfig::default());
    let mut buf = Vec::new();
    write_log_jsonl(&mut buf, &out.log).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), out.log.len());
    let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    for k in ["iteration", "window", "F", "removed_um", "verify_pass"] {
        assert!(v.get(k).is_some(), "missing {k}");
    }
}
