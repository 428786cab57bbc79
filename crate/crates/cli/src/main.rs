use clap::{Args, Parser, Subcommand};
use pdnsynth::analysis::Verification;
use pdnsynth::pipeline::{self, load_config, Overrides, RunConfig, RunManifest};
use pdnsynth::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Congestion-driven non-uniform PDN synthesis.
#[derive(Parser)]
#[command(name = "pdnsynth", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic design document.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Analyse IR drop, EM and congestion of the uniform baseline.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reduce the baseline in congested IR-safe windows.
    Synthesize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a PDN geometry against the IR and EM limits; exits 1 on violations.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        pdn: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the results recorded by two run manifests.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        modified: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run a recorded stage from its manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// mV
    #[arg(long)]
    beta: Option<f64>,
    /// Unit window edge, um.
    #[arg(long = "unit-window")]
    unit_window: Option<f64>,
    /// Guard-band step, um.
    #[arg(long = "guard-band")]
    guard_band: Option<f64>,
    #[arg(long = "brute-force")]
    brute_force: bool,
    /// Relative solver tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

impl Common {
    fn config(&self) -> pdnsynth::Result<RunConfig> {
        let flags = Overrides {
            seed: self.seed,
            alpha: self.alpha,
            beta: self.beta,
            unit_window: self.unit_window,
            guard_band: self.guard_band,
            brute_force: self.brute_force.then_some(true),
            tol: self.tol,
        };
        load_config(self.config.as_deref(), &flags)
    }
}

fn summary(label: &str, v: &Verification) {
    println!(
        "{label}: max drop {:.3} mV (limit {:.1}), {} IR / {} EM violation(s), max EM utilisation {:.3} -> {}",
        v.max_drop_mv,
        v.ir_limit_mv,
        v.ir_violations,
        v.em_violations,
        v.max_em_utilization,
        if v.pass { "PASS" } else { "FAIL" }
    );
}

fn written(out: &Path, m: &RunManifest) {
    println!("wrote {} artifact(s) to {}", m.outputs.len() + 1, out.display());
}

fn run(cli: Cli) -> pdnsynth::Result<ExitCode> {
    match cli.command {
        Command::Gen { common, out } => {
            let m = pipeline::run_gen(&common.config()?, &out)?;
            written(&out, &m);
        }
        Command::Analyze { common, design, out } => {
            let m = pipeline::run_analyze(&design, &common.config()?, &out)?;
            if let Some(v) = &m.verification {
                summary("baseline", v);
            }
            written(&out, &m);
        }
        Command::Synthesize { common, design, out } => {
            let m = pipeline::run_synthesize(&design, &common.config()?, &out)?;
            if let Some(v) = &m.verification {
                summary("baseline", v);
            }
            if let Some(v) = &m.final_verification {
                summary("final", v);
            }
            if let Ok(t) = std::fs::read_to_string(out.join("report.txt")) {
                print!("{t}");
            }
            written(&out, &m);
        }
        Command::Verify {
            common,
            design,
            pdn,
            out,
        } => {
            let m = pipeline::run_verify(&design, &pdn, &common.config()?, out.as_deref())?;
            let v = m.verification.expect("verify records its result");
            summary("verify", &v);
            if !v.pass {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Report {
            common,
            base,
            modified,
            out,
        } => {
            let m = pipeline::run_report(&base, &modified, &common.config()?, &out)?;
            if let Ok(t) = std::fs::read_to_string(out.join("report.txt")) {
                print!("{t}");
            }
            written(&out, &m);
        }
        Command::Replay { manifest, out } => {
            let m = pipeline::replay(&manifest, &out)?;
            written(&out, &m);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            eprintln!("error[usage]: {}", msg.trim_start_matches("error: ").trim_end());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            report_error(&e);
            ExitCode::from(2)
        }
    }
}

fn report_error(e: &Error) {
    eprintln!("error[{}]: {e}", e.kind());
}
