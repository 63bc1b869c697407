//! Offline/online study driver and report files.
//!
//! Output layout under the configured directory:
//!
//! ```text
//! manifest.json
//! snapshots/omega_000.sfv  psi_000.sfv  ...   one pair per training parameter
//! basis/omega.sfb  basis/psi.sfb
//! basis/spectrum_omega.csv  basis/spectrum_psi.csv
//! operators.sfo
//! tests/test_000_metrics.csv  tests/test_000_coefficients.csv  ...
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sfrom_core::fom::{forcing_shape, vortex_merger_ic, FomRun, FomSolver};
use sfrom_core::grid::enstrophy;
use sfrom_core::metrics::{error_enstrophy, error_relative};
use sfrom_core::pod::{build_basis, numerical_rank, PodBasis, SnapshotSet, Truncation};
use sfrom_core::rom::{project_operators, rom_run, ReducedOperators, RomConfig, RomRun};
use sfrom_core::{Clock, FieldKind};

use crate::config::{Parameters, Regime, StudyConfig, TestCase};
use crate::io::{self, Fingerprint, FormatError};

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{stage} failed ({context}): {source}")]
    Stage {
        stage: &'static str,
        context: String,
        #[source]
        source: sfrom_core::Error,
    },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
}

impl StudyError {
    /// Short stage label for command-line reporting.
    pub fn stage(&self) -> &'static str {
        match self {
            StudyError::Config(_) => "config",
            StudyError::Stage { stage, .. } => stage,
            StudyError::Format(_) | StudyError::Io { .. } | StudyError::Csv { .. } => "persistence",
        }
    }
}

fn stage(stage: &'static str, context: impl ToString) -> impl FnOnce(sfrom_core::Error) -> StudyError {
    move |source| StudyError::Stage {
        stage,
        context: context.to_string(),
        source,
    }
}

/// One row of the error time series, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub t: f64,
    pub e_psi: f64,
    pub e_omega: f64,
    pub e_enstrophy: f64,
    pub enstrophy_fom: f64,
    pub enstrophy_rom: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub max_e_psi: f64,
    pub max_e_omega: f64,
    pub max_abs_e_enstrophy: f64,
}

impl MetricsSummary {
    pub fn of(records: &[MetricsRecord]) -> Self {
        let max = |f: fn(&MetricsRecord) -> f64| records.iter().map(f).fold(0.0, f64::max);
        Self {
            max_e_psi: max(|r| r.e_psi),
            max_e_omega: max(|r| r.e_omega),
            max_abs_e_enstrophy: max(|r| r.e_enstrophy.abs()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainingRecord {
    pub parameters: Parameters,
    pub omega_file: PathBuf,
    pub psi_file: PathBuf,
    pub snapshots: usize,
    pub fom_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BasisRecord {
    pub file: PathBuf,
    pub spectrum_file: PathBuf,
    pub modes: usize,
    pub numerical_rank: usize,
    pub snapshots: usize,
    /// Fraction of snapshot energy captured by the retained modes.
    pub captured_energy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OfflineReport {
    pub fingerprint: String,
    pub training: Vec<TrainingRecord>,
    pub snapshot_count: usize,
    pub omega: BasisRecord,
    pub psi: BasisRecord,
    pub operators_file: PathBuf,
    pub fom_seconds: f64,
    pub pod_seconds: f64,
    pub projection_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FailureRecord {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub parameters: Parameters,
    pub regime: Regime,
    pub coefficients_file: Option<PathBuf>,
    pub metrics_file: Option<PathBuf>,
    pub rom_steps: usize,
    pub rom_setup_seconds: f64,
    pub rom_online_seconds: f64,
    /// Wall time of the full-order reference over the same window.
    pub fom_seconds: Option<f64>,
    /// True when the reference is the training run itself.
    pub fom_reused: bool,
    pub speedup: Option<f64>,
    pub summary: Option<MetricsSummary>,
    pub failure: Option<FailureRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub offline: OfflineReport,
    pub tests: Vec<TestReport>,
}

impl StudyReport {
    pub fn failures(&self) -> impl Iterator<Item = &TestReport> {
        self.tests.iter().filter(|t| t.failure.is_some())
    }
}

/// Bases and operators, either freshly built or loaded from disk.
#[derive(Debug, Clone)]
pub struct OfflineArtifacts {
    pub basis_omega: PodBasis,
    pub basis_psi: PodBasis,
    pub operators: ReducedOperators,
}

/// A training run kept in memory because a test reuses it as reference.
#[derive(Debug, Clone)]
pub struct Reference {
    pub parameters: Parameters,
    pub omega: SnapshotSet,
    pub psi: SnapshotSet,
    pub fom_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TestOutcome {
    pub report: TestReport,
    pub metrics: Vec<MetricsRecord>,
    pub rom: Option<RomRun>,
}

#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub report: StudyReport,
    pub artifacts: OfflineArtifacts,
    pub tests: Vec<TestOutcome>,
}

pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
        }
    }
    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }
    pub fn snapshots(&self, kind: FieldKind, k: usize) -> PathBuf {
        self.root.join("snapshots").join(format!("{}_{k:03}.sfv", kind.name()))
    }
    pub fn basis(&self, kind: FieldKind) -> PathBuf {
        self.root.join("basis").join(format!("{}.sfb", kind.name()))
    }
    pub fn spectrum(&self, kind: FieldKind) -> PathBuf {
        self.root.join("basis").join(format!("spectrum_{}.csv", kind.name()))
    }
    pub fn operators(&self) -> PathBuf {
        self.root.join("operators.sfo")
    }
    pub fn metrics(&self, k: usize) -> PathBuf {
        self.root.join("tests").join(format!("test_{k:03}_metrics.csv"))
    }
    pub fn coefficients(&self, k: usize) -> PathBuf {
        self.root.join("tests").join(format!("test_{k:03}_coefficients.csv"))
    }
}

fn ensure_parent(path: &Path) -> Result<(), StudyError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| StudyError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    Ok(())
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), StudyError> {
    ensure_parent(path)?;
    let csv_err = |source| StudyError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| StudyError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StudyError> {
    ensure_parent(path)?;
    let text = serde_json::to_string_pretty(value).expect("report is serializable");
    fs::write(path, text + "\n").map_err(|source| StudyError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Serialize)]
struct SpectrumRow {
    k: usize,
    lambda: f64,
    relative: f64,
}

pub fn write_spectrum(path: &Path, basis: &PodBasis) -> Result<(), StudyError> {
    let rel = basis.relative_eigenvalues();
    let rows: Vec<SpectrumRow> = basis
        .eigenvalues()
        .iter()
        .zip(rel)
        .enumerate()
        .map(|(k, (&lambda, relative))| SpectrumRow {
            k: k + 1,
            lambda,
            relative,
        })
        .collect();
    write_csv(path, &rows)
}

/// Writes `t, beta_1.., gamma_1..` rows for the recorded reduced states.
pub fn write_coefficients(path: &Path, run: &RomRun) -> Result<(), StudyError> {
    ensure_parent(path)?;
    let csv_err = |source| StudyError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let (nb, ng) = (run.initial.beta.len(), run.initial.gamma.len());
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=nb).map(|k| format!("beta_{k}")))
        .chain((1..=ng).map(|k| format!("gamma_{k}")))
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for (t, s) in &run.recorded {
        let row: Vec<String> = std::iter::once(*t)
            .chain(s.beta.iter().copied())
            .chain(s.gamma.iter().copied())
            .map(|v| v.to_string())
            .collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| StudyError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn captured_energy(basis: &PodBasis) -> f64 {
    let total: f64 = basis.eigenvalues().iter().map(|l| l.max(0.0)).sum();
    let kept: f64 = basis.eigenvalues()[..basis.len()].iter().map(|l| l.max(0.0)).sum();
    if total > 0.0 {
        kept / total
    } else {
        0.0
    }
}

/// Runs one full-order simulation for `p` from the vortex-merger state.
pub fn run_fom<C: Clock>(cfg: &StudyConfig, p: &Parameters, clock: &C) -> Result<FomRun, StudyError> {
    let fom_cfg = cfg.fom_config(p).map_err(StudyError::Config)?;
    let ic = vortex_merger_ic(&fom_cfg.grid).map_err(stage("initial condition", p))?;
    FomSolver::new(fom_cfg)
        .and_then(|s| s.run_from(ic, clock))
        .map_err(stage("training fom", p))
}

/// Training runs, pooled POD bases and reduced operators, all written under the output directory.
pub fn run_offline<C: Clock>(
    cfg: &StudyConfig,
    clock: &C,
) -> Result<(OfflineArtifacts, OfflineReport, Vec<Reference>), StudyError> {
    cfg.validate().map_err(StudyError::Config)?;
    let layout = Layout::new(&cfg.output);
    let grid = cfg.grid().map_err(StudyError::Config)?;
    let fingerprint = cfg.offline_fingerprint();
    let training = cfg.training_parameters().map_err(StudyError::Config)?;
    let tests = cfg.test_cases().map_err(StudyError::Config)?;

    let mut pooled_omega = SnapshotSet::new(FieldKind::Vorticity, grid);
    let mut pooled_psi = SnapshotSet::new(FieldKind::StreamFunction, grid);
    let mut records = Vec::with_capacity(training.len());
    let mut references = Vec::new();
    let mut fom_seconds = 0.0;
    for (k, p) in training.iter().enumerate() {
        let run = run_fom(cfg, p, clock)?;
        let omega_file = layout.snapshots(FieldKind::Vorticity, k);
        let psi_file = layout.snapshots(FieldKind::StreamFunction, k);
        io::write_snapshots(&omega_file, &run.omega)?;
        io::write_snapshots(&psi_file, &run.psi)?;
        fom_seconds += run.wall_seconds;
        records.push(TrainingRecord {
            parameters: *p,
            omega_file,
            psi_file,
            snapshots: run.omega.len(),
            fom_seconds: run.wall_seconds,
        });
        if cfg.compare && tests.iter().any(|t| t.parameters == *p) {
            references.push(Reference {
                parameters: *p,
                omega: run.omega.clone(),
                psi: run.psi.clone(),
                fom_seconds: run.wall_seconds,
            });
        }
        pooled_omega.append(run.omega).map_err(stage("snapshot pooling", p))?;
        pooled_psi.append(run.psi).map_err(stage("snapshot pooling", p))?;
    }

    let t = clock.now();
    let basis_omega = build_basis(&pooled_omega, cfg.truncation_omega.into()).map_err(stage("pod", "vorticity"))?;
    let basis_psi = build_basis(&pooled_psi, cfg.truncation_psi.into()).map_err(stage("pod", "stream function"))?;
    let pod_seconds = clock.now() - t;

    let t = clock.now();
    let operators = project_operators(
        &basis_omega,
        &basis_psi,
        &forcing_shape(&grid),
        cfg.fom.flux_mode.into(),
    )
    .map_err(stage(
        "projection",
        format!(
            "{} vorticity / {} stream-function modes",
            basis_omega.len(),
            basis_psi.len()
        ),
    ))?;
    let projection_seconds = clock.now() - t;

    let basis_record = |basis: &PodBasis| -> Result<BasisRecord, StudyError> {
        let file = layout.basis(basis.kind());
        let spectrum_file = layout.spectrum(basis.kind());
        io::write_basis(&file, basis, fingerprint)?;
        write_spectrum(&spectrum_file, basis)?;
        Ok(BasisRecord {
            file,
            spectrum_file,
            modes: basis.len(),
            numerical_rank: numerical_rank(basis.eigenvalues()),
            snapshots: basis.eigenvalues().len(),
            captured_energy: captured_energy(basis),
        })
    };
    let omega = basis_record(&basis_omega)?;
    let psi = basis_record(&basis_psi)?;
    io::write_operators(&layout.operators(), &operators, fingerprint)?;

    let report = OfflineReport {
        fingerprint: format!("{fingerprint:016x}"),
        training: records,
        snapshot_count: pooled_omega.len(),
        omega,
        psi,
        operators_file: layout.operators(),
        fom_seconds,
        pod_seconds,
        projection_seconds,
    };
    Ok((
        OfflineArtifacts {
            basis_omega,
            basis_psi,
            operators,
        },
        report,
        references,
    ))
}

/// Loads bases and operators written by [`run_offline`] for the same configuration.
pub fn load_offline(cfg: &StudyConfig) -> Result<OfflineArtifacts, StudyError> {
    let layout = Layout::new(&cfg.output);
    let fp = Fingerprint {
        grid: cfg.grid().map_err(StudyError::Config)?,
        config: cfg.offline_fingerprint(),
    };
    Ok(OfflineArtifacts {
        basis_omega: io::read_basis(&layout.basis(FieldKind::Vorticity), Some(&fp))?,
        basis_psi: io::read_basis(&layout.basis(FieldKind::StreamFunction), Some(&fp))?,
        operators: io::read_operators(&layout.operators(), Some(&fp))?,
    })
}

/// Error time series of a reduced run against full-order snapshots at the same times.
pub fn score(
    artifacts: &OfflineArtifacts,
    rom: &RomRun,
    omega: &SnapshotSet,
    psi: &SnapshotSet,
) -> Result<Vec<MetricsRecord>, sfrom_core::Error> {
    if rom.recorded.len() != omega.len() || omega.len() != psi.len() {
        return Err(sfrom_core::Error::Dimension {
            expected: omega.len(),
            found: rom.recorded.len(),
        });
    }
    let mut out = Vec::with_capacity(omega.len());
    for (((t, s), fw), fp) in rom.recorded.iter().zip(omega.snapshots()).zip(psi.snapshots()) {
        if (t - fw.time).abs() > 1e-9 * (1.0 + t.abs()) {
            return Err(sfrom_core::Error::Input(format!(
                "reduced time {t} does not match snapshot time {}",
                fw.time
            )));
        }
        let w = artifacts.basis_omega.reconstruct(&s.beta)?;
        let p = artifacts.basis_psi.reconstruct(&s.gamma)?;
        let (e_fom, e_rom) = (enstrophy(&fw.field), enstrophy(&w));
        out.push(MetricsRecord {
            t: *t,
            e_psi: error_relative(&fp.field, &p)?,
            e_omega: error_relative(&fw.field, &w)?,
            e_enstrophy: error_enstrophy(e_fom, e_rom)?,
            enstrophy_fom: e_fom,
            enstrophy_rom: e_rom,
        });
    }
    Ok(out)
}

fn failure_stage(e: &sfrom_core::Error, fallback: &str) -> String {
    match e {
        sfrom_core::Error::Step { stage, step, .. } => format!("{stage} (step {step})"),
        _ => fallback.to_string(),
    }
}

/// Online phase: one reduced run per test case, scored when `cfg.compare` is set.
/// Numerical failures become failure records; persistence failures abort.
pub fn run_online<C: Clock>(
    cfg: &StudyConfig,
    artifacts: &OfflineArtifacts,
    tests: &[TestCase],
    references: &[Reference],
    clock: &C,
) -> Result<Vec<TestOutcome>, StudyError> {
    let layout = Layout::new(&cfg.output);
    let grid = cfg.grid().map_err(StudyError::Config)?;
    let omega0 = vortex_merger_ic(&grid).map_err(stage("initial condition", "vortex merger"))?;
    let mut outcomes = Vec::with_capacity(tests.len());
    for (k, case) in tests.iter().enumerate() {
        let p = case.parameters;
        let mut report = TestReport {
            parameters: p,
            regime: case.regime,
            coefficients_file: None,
            metrics_file: None,
            rom_steps: 0,
            rom_setup_seconds: 0.0,
            rom_online_seconds: 0.0,
            fom_seconds: None,
            fom_reused: false,
            speedup: None,
            summary: None,
            failure: None,
        };
        let fail = |report: &mut TestReport, stage: String, e: &dyn std::fmt::Display| {
            report.failure = Some(FailureRecord {
                stage,
                message: e.to_string(),
            });
        };
        let rom_cfg = RomConfig {
            re: p.re,
            gamma: p.gamma,
            dt: cfg.fom.dt,
            t0: cfg.fom.t0,
            t_end: cfg.fom.t_end,
            record_stride: cfg.fom.snapshot_stride,
        };
        let rom = match rom_run(&artifacts.operators, &artifacts.basis_omega, &omega0, &rom_cfg, clock) {
            Ok(r) => r,
            Err(e) => {
                fail(&mut report, failure_stage(&e, "reduced setup"), &e);
                outcomes.push(TestOutcome {
                    report,
                    metrics: Vec::new(),
                    rom: None,
                });
                continue;
            }
        };
        report.rom_steps = rom.steps;
        report.rom_setup_seconds = rom.setup_seconds;
        report.rom_online_seconds = rom.online_seconds;
        let coefficients = layout.coefficients(k);
        write_coefficients(&coefficients, &rom)?;
        report.coefficients_file = Some(coefficients);

        let mut metrics = Vec::new();
        if cfg.compare {
            let reference = match references.iter().find(|r| r.parameters == p) {
                Some(r) => Ok((r.omega.clone(), r.psi.clone(), r.fom_seconds, true)),
                None => run_fom(cfg, &p, clock).map(|run| (run.omega, run.psi, run.wall_seconds, false)),
            };
            match reference {
                Ok((omega, psi, seconds, reused)) => {
                    report.fom_seconds = Some(seconds);
                    report.fom_reused = reused;
                    if rom.online_seconds > 0.0 {
                        report.speedup = Some(seconds / rom.online_seconds);
                    }
                    match score(artifacts, &rom, &omega, &psi) {
                        Ok(m) => {
                            let path = layout.metrics(k);
                            write_csv(&path, &m)?;
                            report.metrics_file = Some(path);
                            report.summary = Some(MetricsSummary::of(&m));
                            metrics = m;
                        }
                        Err(e) => fail(&mut report, "metrics".into(), &e),
                    }
                }
                Err(e) => fail(&mut report, format!("fom reference: {}", e.stage()), &e),
            }
        }
        outcomes.push(TestOutcome {
            report,
            metrics,
            rom: Some(rom),
        });
    }
    Ok(outcomes)
}

/// Offline and online phases end to end, with the manifest written last.
pub fn run_study<C: Clock>(cfg: &StudyConfig, clock: &C) -> Result<StudyOutcome, StudyError> {
    let (artifacts, offline, references) = run_offline(cfg, clock)?;
    let tests = cfg.test_cases().map_err(StudyError::Config)?;
    let outcomes = run_online(cfg, &artifacts, &tests, &references, clock)?;
    let report = StudyReport {
        config: cfg.clone(),
        offline,
        tests: outcomes.iter().map(|o| o.report.clone()).collect(),
    };
    write_json(&Layout::new(&cfg.output).manifest(), &report)?;
    Ok(StudyOutcome {
        report,
        artifacts,
        tests: outcomes,
    })
}

/// Builds a basis for an ad-hoc snapshot collection (the `pod` subcommand).
pub fn basis_from_files(files: &[PathBuf], truncation: Truncation) -> Result<PodBasis, StudyError> {
    let (first, rest) = files
        .split_first()
        .ok_or_else(|| StudyError::Config("no snapshot files given".into()))?;
    let mut set = io::read_snapshots(first, None)?;
    for f in rest {
        let more = io::read_snapshots(f, Some(set.grid()))?;
        set.append(more).map_err(stage("snapshot pooling", f.display()))?;
    }
    build_basis(&set, truncation).map_err(stage("pod", set.kind().name()))
}
