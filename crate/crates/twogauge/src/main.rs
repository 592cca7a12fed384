use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use twogauge::report::{csv_table, write_atomic};
use twogauge::{execute, load_str, Command, Overrides, RunError, VerifyKind};

#[derive(Parser)]
#[command(name = "twogauge", version, about = "Transport and verification suites for 2-connections")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for the report and CSV tables (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Integrator steps per unit parameter (even, at least 8).
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Number of step-size halvings in convergence tables.
    #[arg(long, global = true)]
    sweep: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress the one-line summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Crossed-module axioms, plus the Lie 2-algebra checks when requested.
    CheckCrossedModule,
    /// Torsor division, functor extension and η composition laws.
    TorsorSelftest,
    /// Path-ordered exponentials along the configured paths.
    Transport,
    /// Surface transport over the configured bigons.
    SurfaceTransport,
    /// Run one verification suite.
    Verify {
        #[arg(value_enum)]
        what: VerifyArg,
    },
    /// Recover the connection from transport by finite differences.
    Reconstruct {
        #[arg(value_enum, ignore_case = true)]
        what: ReconstructArg,
    },
    /// Surface holonomy of bigons whose boundary paths share endpoints.
    Holonomy2,
    /// Apply the configured gauge morphism and check the result.
    GaugeTransform,
    /// Every suite that applies to the config, in one report.
    Report,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyArg {
    Stokes,
    HigherStokes,
    FakeFlat,
    Gauge,
    Thin,
    AmbroseSinger,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReconstructArg {
    A,
    B,
}

impl Cmd {
    fn resolve(&self) -> Command {
        match self {
            Cmd::CheckCrossedModule => Command::CheckCrossedModule,
            Cmd::TorsorSelftest => Command::TorsorSelftest,
            Cmd::Transport => Command::Transport,
            Cmd::SurfaceTransport => Command::SurfaceTransport,
            Cmd::Verify { what } => Command::Verify(match what {
                VerifyArg::Stokes => VerifyKind::Stokes,
                VerifyArg::HigherStokes => VerifyKind::HigherStokes,
                VerifyArg::FakeFlat => VerifyKind::FakeFlat,
                VerifyArg::Gauge => VerifyKind::Gauge,
                VerifyArg::Thin => VerifyKind::Thin,
                VerifyArg::AmbroseSinger => VerifyKind::AmbroseSinger,
            }),
            Cmd::Reconstruct { what: ReconstructArg::A } => Command::ReconstructA,
            Cmd::Reconstruct { what: ReconstructArg::B } => Command::ReconstructB,
            Cmd::Holonomy2 => Command::Holonomy2,
            Cmd::GaugeTransform => Command::GaugeTransform,
            Cmd::Report => Command::Report,
        }
    }
}

fn fail(code: u8, summary: serde_json::Value) -> ExitCode {
    eprintln!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    ExitCode::from(code)
}

fn write_outputs(dir: &Path, outcome: &twogauge::Outcome) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    for (stem, rows) in &outcome.tables {
        write_atomic(&dir.join(format!("{stem}.csv")), &csv_table(rows))?;
    }
    let path = dir.join(format!("{}.json", outcome.report.command));
    write_atomic(&path, &outcome.report.to_json())?;
    Ok(path)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(config_path) = &cli.common.config else {
        return fail(2, serde_json::json!({"error": "schema", "path": "--config", "message": "a config file is required"}));
    };
    let text = match fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => return fail(1, serde_json::json!({"error": "io", "path": config_path.display().to_string(), "message": e.to_string()})),
    };
    let loaded = match load_str(&text) {
        Ok(l) => l,
        Err(e) => return fail(2, serde_json::json!({"error": "schema", "path": e.path, "message": e.message})),
    };
    let overrides = Overrides { steps: cli.common.steps, sweep: cli.common.sweep, seed: cli.common.seed };
    let outcome = match execute(cli.command.resolve(), &loaded, overrides) {
        Ok(o) => o,
        Err(RunError::Schema(e)) => return fail(2, serde_json::json!({"error": "schema", "path": e.path, "message": e.message})),
        Err(e @ RunError::Numeric { .. }) => {
            let code = e.exit_code() as u8;
            return fail(code, serde_json::json!({"error": "numeric", "message": e.to_string()}));
        }
    };
    let dir = cli
        .common
        .out
        .clone()
        .or_else(|| loaded.config.output.as_ref().map(|o| PathBuf::from(&o.dir)))
        .unwrap_or_else(|| PathBuf::from("out"));
    let written = match write_outputs(&dir, &outcome) {
        Ok(p) => p,
        Err(e) => return fail(1, serde_json::json!({"error": "io", "path": dir.display().to_string(), "message": e.to_string()})),
    };
    let r = &outcome.report;
    if !cli.common.quiet {
        let failed = r.defects.iter().filter(|d| !d.pass).count() + r.order_estimates.iter().filter(|o| !o.pass).count();
        println!(
            "{}: {} ({} checks, {} failed) -> {}",
            r.command,
            if r.pass { "pass" } else { "FAIL" },
            r.defects.len() + r.order_estimates.len(),
            failed,
            written.display()
        );
    }
    if r.pass {
        ExitCode::SUCCESS
    } else {
        fail(3, r.failure_summary())
    }
}
