//! File-level driver behind the command-line tool: every stage reads its
//! inputs from disk, writes its artifacts into an output directory and
//! records a manifest from which the run can be replayed.

use crate::analysis::{Analysis, AnalysisConfig, Analyzer, Verification};
use crate::design::synthetic::{synthetic_document, SyntheticParams};
use crate::design::{generate_uniform_pdn, DesignDocument, PdnGeometry};
use crate::error::{Error, Result};
use crate::ir::{window_ir_stats, IrSolution};
use crate::report::{
    heatmap_svg, ir_distribution_report, pdn_length_report, render_text, write_ir_histogram, write_report_csv,
};
use crate::synthesis::{synthesize, write_log_jsonl, SynthesisConfig};
use crate::windowing::{write_window_csv, CandidateSet, WindowGrid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub analysis: AnalysisConfig,
    pub synthesis: SynthesisConfig,
    /// Used by `gen` only.
    pub synthetic: SyntheticParams,
    /// Bin width of the IR histogram, mV.
    pub histogram_bin_mv: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            analysis: AnalysisConfig::default(),
            synthesis: SynthesisConfig::default(),
            synthetic: SyntheticParams::default(),
            histogram_bin_mv: 1.0,
        }
    }
}

/// Command-line overrides. The same keys may appear at the top level of a
/// config file; flags win over the file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    /// mV
    pub beta: Option<f64>,
    /// um
    pub unit_window: Option<f64>,
    /// um
    pub guard_band: Option<f64>,
    pub brute_force: Option<bool>,
    pub tol: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.alpha {
            cfg.synthesis.alpha = v;
        }
        if let Some(v) = self.beta {
            cfg.synthesis.beta_mv = v;
        }
        if let Some(v) = self.unit_window {
            cfg.analysis.window.unit_um = v;
        }
        if let Some(v) = self.guard_band {
            cfg.analysis.window.guard_band_um = Some(v);
        }
        if let Some(v) = self.brute_force {
            cfg.synthesis.brute_force = v;
        }
        if let Some(v) = self.tol {
            cfg.analysis.solver.tol = v;
        }
    }
}

#[derive(Deserialize)]
struct ConfigFile {
    #[serde(flatten)]
    run: RunConfig,
    #[serde(flatten)]
    flags: Overrides,
}

/// Defaults, then the config file, then its flag-style keys, then `flags`.
pub fn load_config(path: Option<&Path>, flags: &Overrides) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => {
            let file: ConfigFile = serde_json::from_str(&crate::error::read_text(p)?)?;
            let mut cfg = file.run;
            file.flags.apply(&mut cfg);
            cfg
        }
        None => RunConfig::default(),
    };
    flags.apply(&mut cfg);
    cfg.synthesis.validate()?;
    cfg.analysis.congestion.validate()?;
    if !(cfg.histogram_bin_mv > 0.0) {
        return Err(Error::config("histogram bin must be positive"));
    }
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Gen,
    Analyze,
    Synthesize,
    Verify,
    Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub stage: Stage,
    pub inputs: Vec<InputFile>,
    pub config: RunConfig,
    pub seed: u64,
    /// Artifact name to file name inside the output directory.
    pub outputs: BTreeMap<String, String>,
    pub timings: Vec<StageTime>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<Verification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_verification: Option<Verification>,
}

impl RunManifest {
    fn new(stage: Stage, cfg: &RunConfig) -> Self {
        Self {
            tool: "pdnsynth".into(),
            version: VERSION.into(),
            stage,
            inputs: Vec::new(),
            config: cfg.clone(),
            seed: cfg.seed,
            outputs: BTreeMap::new(),
            timings: Vec::new(),
            verification: None,
            final_verification: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&crate::error::read_text(path)?)?)
    }

    pub fn input(&self, role: &str) -> Option<&Path> {
        self.inputs.iter().find(|i| i.role == role).map(|i| i.path.as_path())
    }

    fn add_input(&mut self, role: &str, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        self.inputs.push(InputFile {
            role: role.into(),
            path: fs::canonicalize(path)?,
            sha256,
        });
        Ok(())
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let r = f()?;
        self.timings.push(StageTime {
            stage: stage.into(),
            seconds: t.elapsed().as_secs_f64(),
        });
        Ok(r)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let digest = Sha256::digest(crate::error::read_bytes(path)?);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Artifact sink rooted at the output directory.
struct Out<'a> {
    dir: &'a Path,
    manifest: &'a mut RunManifest,
}

impl Out<'_> {
    fn file(&mut self, name: &str, file: &str) -> Result<BufWriter<File>> {
        self.manifest.outputs.insert(name.into(), file.into());
        Ok(BufWriter::new(File::create(self.dir.join(file))?))
    }

    fn text(&mut self, name: &str, file: &str, body: &str) -> Result<()> {
        let mut w = self.file(name, file)?;
        w.write_all(body.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, file: &str, value: &T) -> Result<()> {
        let mut w = self.file(name, file)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    fn ir_csv(&mut self, name: &str, file: &str, sol: &IrSolution) -> Result<()> {
        sol.write_csv(self.file(name, file)?)
    }
}

fn finish(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let mut w = BufWriter::new(File::create(dir.join(MANIFEST_FILE))?);
    serde_json::to_writer_pretty(&mut w, manifest)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn prepare(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

/// Write a synthetic design document.
pub fn run_gen(cfg: &RunConfig, out: &Path) -> Result<RunManifest> {
    prepare(out)?;
    let mut m = RunManifest::new(Stage::Gen, cfg);
    let doc = m.time("generate", || synthetic_document(&cfg.synthetic, cfg.seed))?;
    let body = doc.to_json()? + "\n";
    Out {
        dir: out,
        manifest: &mut m,
    }
    .text("design", "design.json", &body)?;
    finish(out, &m)?;
    Ok(m)
}

fn load_design(m: &mut RunManifest, path: &Path) -> Result<(DesignDocument, PdnGeometry)> {
    m.add_input("design", path)?;
    m.time("load", || {
        let doc = DesignDocument::load(path)?;
        let pdn = generate_uniform_pdn(&doc.design, &doc.technology, &doc.pdn_spec)?;
        Ok((doc, pdn))
    })
}

fn window_heatmaps(out: &mut Out<'_>, grid: &WindowGrid, analysis: &Analysis, ir_limit_mv: f64) -> Result<()> {
    let ir: Vec<f64> = window_ir_stats(&analysis.ir, grid)?
        .iter()
        .map(|s| s.max_drop_mv)
        .collect();
    let svg = heatmap_svg(grid.cols, grid.rows, &ir, ir_limit_mv, "window max IR drop (mV)");
    out.text("heatmap_ir", "heatmap_ir.svg", &svg)?;
    let svg = heatmap_svg(
        grid.cols,
        grid.rows,
        &analysis.cmap.window_scores(),
        1.0,
        "window congestion",
    );
    out.text("heatmap_congestion", "heatmap_congestion.svg", &svg)
}

fn baseline_artifacts(
    out: &mut Out<'_>,
    an: &Analyzer<'_>,
    pdn: &PdnGeometry,
    a: &Analysis,
    candidates: &CandidateSet,
) -> Result<()> {
    out.json("pdn_base", "pdn_base.json", pdn)?;
    out.ir_csv("ir_base", "ir_base.csv", &a.ir)?;
    a.cmap.write_csv(out.file("congestion", "congestion.csv")?)?;
    write_window_csv(
        out.file("windows", "windows.csv")?,
        &an.grid,
        &a.metrics,
        &a.classes,
        candidates,
    )?;
    window_heatmaps(out, &an.grid, a, an.tech.ir_limit_mv)
}

/// IR, EM and congestion of the uniform baseline.
pub fn run_analyze(design: &Path, cfg: &RunConfig, out: &Path) -> Result<RunManifest> {
    prepare(out)?;
    let mut m = RunManifest::new(Stage::Analyze, cfg);
    let (doc, pdn) = load_design(&mut m, design)?;
    let an = Analyzer::new(&doc.design, &doc.technology, &cfg.analysis)?;
    let a = m.time("analyze", || an.analyze(&pdn))?;
    let floor = if cfg.synthesis.brute_force {
        f64::NEG_INFINITY
    } else {
        cfg.analysis.window.congestion_floor
    };
    let candidates = crate::windowing::select_candidates(&an.grid, &a.metrics, &a.classes, floor);
    m.verification = Some(a.verification);
    let t = Instant::now();
    baseline_artifacts(
        &mut Out {
            dir: out,
            manifest: &mut m,
        },
        &an,
        &pdn,
        &a,
        &candidates,
    )?;
    m.timings.push(StageTime {
        stage: "write".into(),
        seconds: t.elapsed().as_secs_f64(),
    });
    finish(out, &m)?;
    Ok(m)
}

#[derive(Serialize)]
struct PlanFile<'a> {
    congestion_cap: f64,
    iterations: usize,
    candidates: Vec<usize>,
    plan: &'a crate::synthesis::ReductionPlan,
}

/// Full synthesis on the uniform baseline of `design`.
pub fn run_synthesize(design: &Path, cfg: &RunConfig, out: &Path) -> Result<RunManifest> {
    prepare(out)?;
    let mut m = RunManifest::new(Stage::Synthesize, cfg);
    let (doc, pdn) = load_design(&mut m, design)?;
    let an = Analyzer::new(&doc.design, &doc.technology, &cfg.analysis)?;
    let s = m.time("synthesize", || synthesize(&an, &pdn, Some(&pdn), &cfg.synthesis))?;
    m.verification = Some(s.baseline.verification);
    m.final_verification = Some(s.verification);

    let t = Instant::now();
    let mut o = Out {
        dir: out,
        manifest: &mut m,
    };
    baseline_artifacts(&mut o, &an, &pdn, &s.baseline, &s.candidates)?;
    o.json("pdn_final", "pdn_final.json", &s.final_pdn)?;
    o.ir_csv("ir_final", "ir_final.csv", &s.final_ir)?;
    o.json(
        "plan",
        "plan.json",
        &PlanFile {
            congestion_cap: s.congestion_cap,
            iterations: s.iterations,
            candidates: s.candidates.members.iter().map(|c| c.window).collect(),
            plan: &s.plan,
        },
    )?;
    write_log_jsonl(o.file("iterations", "iterations.jsonl")?, &s.log)?;
    let before = load_drops(&s.baseline.ir);
    let after = load_drops(&s.final_ir);
    write_tables(&mut o, &pdn, &s.final_pdn, &before, &after, cfg.histogram_bin_mv)?;
    m.timings.push(StageTime {
        stage: "write".into(),
        seconds: t.elapsed().as_secs_f64(),
    });
    finish(out, &m)?;
    Ok(m)
}

/// Re-analyse `pdn` against the design; artifacts are written only when
/// `out` is given.
pub fn run_verify(design: &Path, pdn_path: &Path, cfg: &RunConfig, out: Option<&Path>) -> Result<RunManifest> {
    let mut m = RunManifest::new(Stage::Verify, cfg);
    m.add_input("design", design)?;
    m.add_input("pdn", pdn_path)?;
    let (doc, pdn) = m.time("load", || {
        let doc = DesignDocument::load(design)?;
        let pdn = PdnGeometry::from_json(&crate::error::read_text(pdn_path)?)?;
        pdn.validate(&doc.design)?;
        Ok((doc, pdn))
    })?;
    let an = Analyzer::new(&doc.design, &doc.technology, &cfg.analysis)?;
    let (ir, em, v) = m.time("verify", || an.verify(&pdn))?;
    m.verification = Some(v);
    if let Some(dir) = out {
        prepare(dir)?;
        let mut o = Out { dir, manifest: &mut m };
        o.ir_csv("ir", "ir.csv", &ir)?;
        o.json("em_violations", "em_violations.json", &em.violations)?;
        finish(dir, &m)?;
    }
    Ok(m)
}

fn load_drops(sol: &IrSolution) -> Vec<f64> {
    sol.sources.iter().map(|s| s.drop_mv).collect()
}

fn write_tables(
    o: &mut Out<'_>,
    before: &PdnGeometry,
    after: &PdnGeometry,
    b: &[f64],
    a: &[f64],
    bin_mv: f64,
) -> Result<()> {
    let length = pdn_length_report(before, after)?;
    let ir = ir_distribution_report(b, a);
    write_report_csv(o.file("report_csv", "report.csv")?, &length, &ir)?;
    o.text("report_txt", "report.txt", &render_text(&length, &ir))?;
    write_ir_histogram(o.file("ir_histogram", "ir_histogram.csv")?, b, a, bin_mv)
}

/// Final geometry and load drops recorded by a manifest: the synthesised
/// result when present, otherwise the analysed baseline.
fn manifest_result(path: &Path) -> Result<(PdnGeometry, Vec<f64>)> {
    let m = RunManifest::load(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let pick = |keys: &[&str]| -> Result<PathBuf> {
        keys.iter()
            .find_map(|k| m.outputs.get(*k))
            .map(|f| dir.join(f))
            .ok_or_else(|| Error::config(format!("{} has no {} artifact", path.display(), keys[0])))
    };
    let pdn_file = match m.stage {
        Stage::Verify => m
            .input("pdn")
            .map(Path::to_path_buf)
            .ok_or_else(|| Error::config("verify manifest without pdn input"))?,
        _ => pick(&["pdn_final", "pdn_base"])?,
    };
    let pdn = PdnGeometry::from_json(&crate::error::read_text(&pdn_file)?)?;
    let mut rd = csv::Reader::from_path(pick(&["ir_final", "ir_base", "ir"])?)?;
    let mut drops = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        if rec.get(2) == Some("load") {
            let d = rec
                .get(3)
                .unwrap_or("")
                .parse::<f64>()
                .map_err(|e| Error::config(format!("bad drop value: {e}")))?;
            drops.push(d);
        }
    }
    Ok((pdn, drops))
}

/// Comparison tables between the results of two earlier runs.
pub fn run_report(base: &Path, modified: &Path, cfg: &RunConfig, out: &Path) -> Result<RunManifest> {
    prepare(out)?;
    let mut m = RunManifest::new(Stage::Report, cfg);
    m.add_input("base", base)?;
    m.add_input("modified", modified)?;
    let ((p0, d0), (p1, d1)) = m.time("load", || Ok((manifest_result(base)?, manifest_result(modified)?)))?;
    write_tables(
        &mut Out {
            dir: out,
            manifest: &mut m,
        },
        &p0,
        &p1,
        &d0,
        &d1,
        cfg.histogram_bin_mv,
    )?;
    finish(out, &m)?;
    Ok(m)
}

/// Re-run the stage recorded in `manifest` with its configuration snapshot.
/// Inputs must still hash to the recorded digests.
pub fn replay(manifest: &Path, out: &Path) -> Result<RunManifest> {
    let m = RunManifest::load(manifest)?;
    for i in &m.inputs {
        let now = sha256_file(&i.path)?;
        if now != i.sha256 {
            return Err(Error::config(format!(
                "input {} changed since the recorded run",
                i.path.display()
            )));
        }
    }
    let need = |role: &str| {
        m.input(role)
            .ok_or_else(|| Error::config(format!("manifest lacks a {role} input")))
    };
    let cfg = &m.config;
    match m.stage {
        Stage::Gen => run_gen(cfg, out),
        Stage::Analyze => run_analyze(need("design")?, cfg, out),
        Stage::Synthesize => run_synthesize(need("design")?, cfg, out),
        Stage::Verify => run_verify(need("design")?, need("pdn")?, cfg, Some(out)),
        Stage::Report => run_report(need("base")?, need("modified")?, cfg, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_keys_override_sections() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(
            &p,
            r#"{"seed": 3, "alpha": 0.4, "synthesis": {"alpha": 0.1, "beta_mv": 5.0}, "tol": 1e-7}"#,
        )
        .unwrap();
        let cfg = load_config(Some(&p), &Overrides::default()).unwrap();
        assert_eq!(
            (
                cfg.seed,
                cfg.synthesis.alpha,
                cfg.synthesis.beta_mv,
                cfg.analysis.solver.tol
            ),
            (3, 0.4, 5.0, 1e-7)
        );
        let flags = Overrides {
            alpha: Some(0.9),
            unit_window: Some(10.0),
            brute_force: Some(true),
            ..Default::default()
        };
        let cfg = load_config(Some(&p), &flags).unwrap();
        assert_eq!(cfg.synthesis.alpha, 0.9);
        assert_eq!(cfg.analysis.window.unit_um, 10.0);
        assert!(cfg.synthesis.brute_force);
    }

    #[test]
    fn invalid_override_is_rejected() {
        let flags = Overrides {
            alpha: Some(-1.0),
            ..Default::default()
        };
        assert!(matches!(load_config(None, &flags), Err(Error::Config(_))));
    }

    #[test]
    fn config_round_trips() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(load_config_str(&text), cfg);
    }

    fn load_config_str(s: &str) -> RunConfig {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, s).unwrap();
        load_config(Some(&p), &Overrides::default()).unwrap()
    }
}
