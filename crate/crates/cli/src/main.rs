use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sfrom::config::{ParameterSpec, TruncationSpec};
use sfrom::io;
use sfrom::study::{self, Layout, StudyError};
use sfrom::{MonotonicClock, Parameters, StudyConfig};
use sfrom_core::pod::Truncation;
use sfrom_core::FieldKind;

/// POD-Galerkin reduced order model for 2D stream-function/vorticity flow.
#[derive(Parser)]
#[command(name = "sfrom", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one full-order simulation and save its snapshots.
    Fom(Common),
    /// Build a POD basis from snapshot files.
    Pod {
        #[command(flatten)]
        common: Common,
        /// Snapshot files to pool (all of one variable).
        #[arg(long, num_args = 1.., required = true)]
        snapshots: Vec<PathBuf>,
    },
    /// Training runs, global bases and reduced operators.
    Offline(Common),
    /// Run the reduced model from saved offline artifacts.
    Rom(Common),
    /// Run the reduced model and score it against full-order references.
    Compare(Common),
    /// Offline and online phases end to end.
    Study(Common),
}

#[derive(Args)]
struct Common {
    /// JSON study configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    re: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Cells per direction.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    /// End time.
    #[arg(long)]
    tend: Option<f64>,
    /// Relative POD eigenvalue threshold for both variables.
    #[arg(long)]
    threshold: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    /// Loads the configuration and applies flag overrides. `--re`/`--gamma`
    /// set the base parameters, or only the one test case when `single_test` is set.
    fn resolve(&self, single_test: bool) -> Result<StudyConfig, StudyError> {
        let mut cfg = match &self.config {
            Some(path) => StudyConfig::load(path).map_err(StudyError::Config)?,
            None => StudyConfig::default(),
        };
        let single = single_test && (self.re.is_some() || self.gamma.is_some());
        if !single {
            if let Some(v) = self.re {
                cfg.fom.re = v;
            }
            if let Some(v) = self.gamma {
                cfg.fom.gamma = v;
            }
        }
        if let Some(v) = self.grid {
            cfg.fom.grid = v;
        }
        if let Some(v) = self.dt {
            cfg.fom.dt = v;
        }
        if let Some(v) = self.tend {
            cfg.fom.t_end = v;
        }
        if let Some(v) = self.threshold {
            cfg.truncation_omega = TruncationSpec::Threshold(v);
            cfg.truncation_psi = TruncationSpec::Threshold(v);
        }
        if let Some(v) = &self.out {
            cfg.output = v.clone();
        }
        // a single test leaves the offline inputs, and so the fingerprint, alone
        if single {
            cfg.test = vec![ParameterSpec::Pair(Parameters {
                re: self.re.unwrap_or(cfg.fom.re),
                gamma: self.gamma.unwrap_or(cfg.fom.gamma),
            })];
        }
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct DiagnosticsRow {
    step: usize,
    t: f64,
    enstrophy: f64,
    total_vorticity: f64,
    transport_iterations: usize,
    poisson_iterations: usize,
}

fn fom(common: &Common) -> Result<(), StudyError> {
    let cfg = common.resolve(false)?;
    let p = Parameters {
        re: cfg.fom.re,
        gamma: cfg.fom.gamma,
    };
    let run = study::run_fom(&cfg, &p, &MonotonicClock::new())?;
    let root = &cfg.output;
    io::write_snapshots(&root.join("omega.sfv"), &run.omega)?;
    io::write_snapshots(&root.join("psi.sfv"), &run.psi)?;
    let csv_err = |source| StudyError::Csv {
        path: root.join("diagnostics.csv"),
        source,
    };
    let mut w = csv::Writer::from_path(root.join("diagnostics.csv")).map_err(csv_err)?;
    for d in &run.diagnostics {
        w.serialize(DiagnosticsRow {
            step: d.step,
            t: d.time,
            enstrophy: d.enstrophy,
            total_vorticity: d.total_vorticity,
            transport_iterations: d.transport_iterations,
            poisson_iterations: d.poisson_iterations,
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(|source| StudyError::Io {
        path: root.join("diagnostics.csv"),
        source,
    })?;
    println!(
        "fom {p}: {} steps, {} snapshots, {:.2} s, final enstrophy {:.6}",
        run.diagnostics.len(),
        run.omega.len(),
        run.wall_seconds,
        run.diagnostics.last().map_or(f64::NAN, |d| d.enstrophy)
    );
    Ok(())
}

fn pod(common: &Common, files: &[PathBuf]) -> Result<(), StudyError> {
    let cfg = common.resolve(false)?;
    let first = io::read_snapshots(&files[0], None)?;
    let spec = match first.kind() {
        FieldKind::StreamFunction => cfg.truncation_psi,
        _ => cfg.truncation_omega,
    };
    let basis = study::basis_from_files(files, Truncation::from(spec))?;
    let layout = Layout::new(&cfg.output);
    io::write_basis(&layout.basis(basis.kind()), &basis, 0)?;
    study::write_spectrum(&layout.spectrum(basis.kind()), &basis)?;
    println!(
        "pod {}: {} of {} modes retained -> {}",
        basis.kind().name(),
        basis.len(),
        basis.eigenvalues().len(),
        layout.basis(basis.kind()).display()
    );
    Ok(())
}

fn offline(common: &Common) -> Result<(), StudyError> {
    let cfg = common.resolve(false)?;
    let (_, report, _) = study::run_offline(&cfg, &MonotonicClock::new())?;
    study::write_json(&cfg.output.join("offline.json"), &report)?;
    println!(
        "offline: {} snapshots, {} vorticity modes, {} stream-function modes, fom {:.2} s, pod {:.2} s, projection {:.2} s",
        report.snapshot_count, report.omega.modes, report.psi.modes, report.fom_seconds, report.pod_seconds, report.projection_seconds
    );
    Ok(())
}

/// Online phase from saved artifacts; returns false if any test failed.
fn online(common: &Common, compare: bool) -> Result<bool, StudyError> {
    let mut cfg = common.resolve(true)?;
    cfg.compare = compare;
    let artifacts = study::load_offline(&cfg)?;
    let tests = cfg.test_cases().map_err(StudyError::Config)?;
    let outcomes = study::run_online(&cfg, &artifacts, &tests, &[], &MonotonicClock::new())?;
    let reports: Vec<_> = outcomes.iter().map(|o| o.report.clone()).collect();
    study::write_json(
        &cfg.output.join(if compare { "compare.json" } else { "rom.json" }),
        &reports,
    )?;
    print_tests(&reports);
    Ok(reports.iter().all(|r| r.failure.is_none()))
}

fn print_tests(reports: &[study::TestReport]) {
    for r in reports {
        match (&r.failure, &r.summary) {
            (Some(f), _) => println!(
                "{} [{:?}]: FAILED in {}: {}",
                r.parameters, r.regime, f.stage, f.message
            ),
            (None, Some(s)) => println!(
                "{} [{:?}]: max E_psi {:.4}%  max E_omega {:.4}%  max |E_e| {:.4}%  online {:.4} s  speedup {:.1}",
                r.parameters,
                r.regime,
                s.max_e_psi,
                s.max_e_omega,
                s.max_abs_e_enstrophy,
                r.rom_online_seconds,
                r.speedup.unwrap_or(f64::NAN)
            ),
            (None, None) => println!(
                "{} [{:?}]: {} steps, online {:.4} s",
                r.parameters, r.regime, r.rom_steps, r.rom_online_seconds
            ),
        }
    }
}

fn run_study(common: &Common) -> Result<bool, StudyError> {
    let cfg = common.resolve(false)?;
    let outcome = study::run_study(&cfg, &MonotonicClock::new())?;
    let off = &outcome.report.offline;
    println!(
        "offline: {} snapshots, {} vorticity modes, {} stream-function modes",
        off.snapshot_count, off.omega.modes, off.psi.modes
    );
    print_tests(&outcome.report.tests);
    println!("manifest: {}", Layout::new(&cfg.output).manifest().display());
    let ok = outcome.report.failures().next().is_none();
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fom(c) => fom(c).map(|_| true),
        Command::Pod { common, snapshots } => pod(common, snapshots).map(|_| true),
        Command::Offline(c) => offline(c).map(|_| true),
        Command::Rom(c) => online(c, false),
        Command::Compare(c) => online(c, true),
        Command::Study(c) => run_study(c),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: one or more test parameters failed (see report)");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error [{}]: {e}", e.stage());
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
