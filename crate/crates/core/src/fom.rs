//! Full-order model: BDF1 segregated stepping of the vorticity transport and
//! stream-function Poisson equations.
//!
//! Each step (i) convects ω^{n+1} with the flux of the lagged stream function
//! ψⁿ and solves `(I/dt + C(ψⁿ) + L_N/Re) ω^{n+1} = F^{n+1} + ωⁿ/dt`, then
//! (ii) solves `L_D ψ^{n+1} = ω^{n+1}` where `L_D ≈ -Δ` with ψ = 0 on the walls.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::clock::Clock;
use crate::error::{Error, Result, Stage};
use crate::fv::{self, FluxMode};
use crate::grid::{enstrophy, FieldKind, ScalarField, StructuredGrid};
use crate::linalg::{bicgstab_solve, cg_solve, CsrMatrix, SolverOptions};
use crate::pod::SnapshotSet;

#[derive(Debug, Clone, PartialEq)]
pub struct FomConfig {
    pub grid: StructuredGrid,
    pub re: f64,
    pub dt: f64,
    pub t0: f64,
    pub t_end: f64,
    /// Forcing strength; zero disables the source term.
    pub gamma: f64,
    pub flux_mode: FluxMode,
    pub transport_solver: SolverOptions,
    pub poisson_solver: SolverOptions,
    /// Steps between recorded snapshots.
    pub snapshot_stride: usize,
}

impl FomConfig {
    /// Unforced vortex merger at Re = 800, dt = 0.01 on (0, 20], snapshot every 8 steps.
    pub fn vortex_merger(n: usize) -> Result<Self> {
        Ok(Self {
            grid: StructuredGrid::periodic_box(n)?,
            re: 800.0,
            dt: 0.01,
            t0: 0.0,
            t_end: 20.0,
            gamma: 0.0,
            flux_mode: FluxMode::Linear,
            transport_solver: SolverOptions::default(),
            poisson_solver: SolverOptions::default(),
            snapshot_stride: 8,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.re > 0.0) {
            return Err(Error::Config(alloc::format!("Re must be positive, got {}", self.re)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config(alloc::format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= self.t0) || !self.t0.is_finite() || !self.t_end.is_finite() {
            return Err(Error::Config(alloc::format!(
                "time interval ({}, {}] is invalid",
                self.t0,
                self.t_end
            )));
        }
        if !self.gamma.is_finite() {
            return Err(Error::Config("gamma must be finite".into()));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Config("snapshot stride must be at least 1".into()));
        }
        if self.grid.nx() < 3 || self.grid.ny() < 3 {
            return Err(Error::Config("full-order grid needs at least 3x3 cells".into()));
        }
        let steps = (self.t_end - self.t0) / self.dt;
        if (steps - libm::round(steps)).abs() > 1e-6 * steps.max(1.0) {
            return Err(Error::Config(alloc::format!(
                "interval length {} is not a whole number of steps of {}",
                self.t_end - self.t0,
                self.dt
            )));
        }
        Ok(())
    }

    pub fn step_count(&self) -> usize {
        libm::round((self.t_end - self.t0) / self.dt) as usize
    }

    pub fn time(&self, step: usize) -> f64 {
        self.t0 + step as f64 * self.dt
    }

    /// Parameter vector tagged onto snapshots: `[Re, γ]`.
    pub fn parameters(&self) -> Vec<f64> {
        alloc::vec![self.re, self.gamma]
    }
}

fn check_vortex_domain(grid: &StructuredGrid) -> Result<()> {
    let two_pi = 2.0 * PI;
    if (grid.lx() - two_pi).abs() > 1e-12 || (grid.ly() - two_pi).abs() > 1e-12 {
        return Err(Error::Config(alloc::format!(
            "vortex merger needs the [0, 2π]² domain, got {} x {}",
            grid.lx(),
            grid.ly()
        )));
    }
    Ok(())
}

/// Two co-rotating Gaussian vortices centered at (3π/4, π) and (5π/4, π).
pub fn vortex_merger_ic(grid: &StructuredGrid) -> Result<ScalarField> {
    check_vortex_domain(grid)?;
    Ok(ScalarField::sample(*grid, FieldKind::Vorticity, vortex_merger_omega0))
}

/// Pointwise vortex-merger initial vorticity.
pub fn vortex_merger_omega0(x: f64, y: f64) -> f64 {
    let (x1, y1) = (0.75 * PI, PI);
    let (x2, y2) = (1.25 * PI, PI);
    libm::exp(-PI * ((x - x1) * (x - x1) + (y - y1) * (y - y1)))
        + libm::exp(-PI * ((x - x2) * (x - x2) + (y - y2) * (y - y2)))
}

/// Spatial part F₁ = cos(3x) cos(3y) of the separable source term.
pub fn forcing_shape(grid: &StructuredGrid) -> ScalarField {
    ScalarField::sample(*grid, FieldKind::Forcing, |x, y| {
        libm::cos(3.0 * x) * libm::cos(3.0 * y)
    })
}

/// Temporal part F₂(t) = -γ exp(-t/Re), so that F = F₂(t) F₁(x, y).
pub fn forcing_amplitude(t: f64, re: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        return 0.0;
    }
    -gamma * libm::exp(-t / re)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FomState {
    pub step: usize,
    pub omega: ScalarField,
    pub psi: ScalarField,
}

/// Per-step record of a full-order run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    pub enstrophy: f64,
    pub total_vorticity: f64,
    pub transport_iterations: usize,
    pub poisson_iterations: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct FomRun {
    pub omega: SnapshotSet,
    pub psi: SnapshotSet,
    /// Entry 0 is the initial state; entry n is after step n.
    pub diagnostics: Vec<StepDiagnostics>,
    pub final_state: FomState,
    /// Wall-clock seconds of the time-marching loop (initial Poisson solve excluded).
    pub wall_seconds: f64,
}

/// Stepper holding the operators that stay fixed over a run.
#[derive(Debug, Clone)]
pub struct FomSolver {
    cfg: FomConfig,
    poisson: CsrMatrix,
    forcing: ScalarField,
}

impl FomSolver {
    pub fn new(cfg: FomConfig) -> Result<Self> {
        cfg.validate()?;
        let poisson = fv::assemble_laplacian_dirichlet(&cfg.grid);
        let forcing = forcing_shape(&cfg.grid);
        Ok(Self { cfg, poisson, forcing })
    }

    pub fn config(&self) -> &FomConfig {
        &self.cfg
    }

    pub fn poisson_operator(&self) -> &CsrMatrix {
        &self.poisson
    }

    /// Solves `-Δψ = ω` with ψ = 0 on the walls.
    pub fn solve_stream_function(
        &self,
        omega: &ScalarField,
        guess: Option<&ScalarField>,
    ) -> Result<(ScalarField, usize)> {
        self.cfg.grid.check_same(omega.grid())?;
        let sol = cg_solve(
            &self.poisson,
            omega.values(),
            guess.map(|g| g.values()),
            self.cfg.poisson_solver,
        )?;
        Ok((
            ScalarField::from_values(self.cfg.grid, FieldKind::StreamFunction, sol.x)?,
            sol.iterations,
        ))
    }

    pub fn initial_state(&self, omega0: ScalarField) -> Result<FomState> {
        self.cfg.grid.check_same(omega0.grid())?;
        let (psi, _) = self
            .solve_stream_function(&omega0, None)
            .map_err(|e| e.at(Stage::InitialStreamFunction, 0))?;
        Ok(FomState {
            step: 0,
            omega: omega0.with_kind(FieldKind::Vorticity),
            psi,
        })
    }

    pub fn step(&self, state: &FomState) -> Result<FomState> {
        self.step_with_stats(state).map(|(s, _, _)| s)
    }

    fn step_with_stats(&self, state: &FomState) -> Result<(FomState, usize, usize)> {
        let cfg = &self.cfg;
        let next = state.step + 1;
        let flux = fv::stream_to_flux(&state.psi, cfg.flux_mode).map_err(|e| e.at(Stage::Vorticity, next))?;
        let transport =
            fv::assemble_helmholtz_neumann(cfg.dt, cfg.re, &flux).map_err(|e| e.at(Stage::Vorticity, next))?;

        let f2 = forcing_amplitude(cfg.time(next), cfg.re, cfg.gamma);
        let inv_dt = 1.0 / cfg.dt;
        let rhs: Vec<f64> = state
            .omega
            .values()
            .iter()
            .zip(self.forcing.values())
            .map(|(w, f1)| f2 * f1 + w * inv_dt)
            .collect();

        let sol = bicgstab_solve(&transport, &rhs, Some(state.omega.values()), cfg.transport_solver)
            .map_err(|e| e.at(Stage::Vorticity, next))?;
        let omega = ScalarField::from_values(cfg.grid, FieldKind::Vorticity, sol.x)
            .map_err(|e| e.at(Stage::Vorticity, next))?;
        let (psi, poisson_iterations) = self
            .solve_stream_function(&omega, Some(&state.psi))
            .map_err(|e| e.at(Stage::StreamFunction, next))?;
        Ok((FomState { step: next, omega, psi }, sol.iterations, poisson_iterations))
    }

    /// Marches from `omega0` over the configured interval, recording
    /// snapshots every `snapshot_stride` steps in (t0, T].
    pub fn run_from<C: Clock>(&self, omega0: ScalarField, clock: &C) -> Result<FomRun> {
        let cfg = &self.cfg;
        let params = cfg.parameters();
        let mut omega_set = SnapshotSet::new(FieldKind::Vorticity, cfg.grid);
        let mut psi_set = SnapshotSet::new(FieldKind::StreamFunction, cfg.grid);
        let mut state = self.initial_state(omega0)?;
        let mut diagnostics = Vec::with_capacity(cfg.step_count() + 1);
        diagnostics.push(StepDiagnostics {
            step: 0,
            time: cfg.t0,
            enstrophy: enstrophy(&state.omega),
            total_vorticity: state.omega.integral(),
            transport_iterations: 0,
            poisson_iterations: 0,
            seconds: 0.0,
        });
        let start = clock.now();
        for _ in 0..cfg.step_count() {
            let t_step = clock.now();
            let (next, transport_iterations, poisson_iterations) = self.step_with_stats(&state)?;
            state = next;
            let seconds = clock.now() - t_step;
            let time = cfg.time(state.step);
            diagnostics.push(StepDiagnostics {
                step: state.step,
                time,
                enstrophy: enstrophy(&state.omega),
                total_vorticity: state.omega.integral(),
                transport_iterations,
                poisson_iterations,
                seconds,
            });
            if state.step % cfg.snapshot_stride == 0 {
                omega_set.push(params.clone(), time, state.omega.clone())?;
                psi_set.push(params.clone(), time, state.psi.clone())?;
            }
        }
        let wall_seconds = clock.now() - start;
        Ok(FomRun {
            omega: omega_set,
            psi: psi_set,
            diagnostics,
            final_state: state,
            wall_seconds,
        })
    }
}

/// One segregated step; builds the fixed operators on every call. Use
/// [`FomSolver`] for repeated stepping.
pub fn fom_step(state: &FomState, cfg: &FomConfig) -> Result<FomState> {
    FomSolver::new(cfg.clone())?.step(state)
}

/// Runs the vortex-merger problem described by `cfg`.
pub fn fom_run<C: Clock>(cfg: &FomConfig, clock: &C) -> Result<FomRun> {
    let solver = FomSolver::new(cfg.clone())?;
    let omega0 = vortex_merger_ic(&cfg.grid)?;
    solver.run_from(omega0, clock)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::NoClock;

    fn small(n: usize, t_end: f64) -> FomConfig {
        FomConfig {
            t_end,
            ..FomConfig::vortex_merger(n).unwrap()
        }
    }

    #[test]
    fn ic_point_values() {
        let expected_center = 1.0 + libm::exp(-PI * (PI / 2.0) * (PI / 2.0));
        assert!((vortex_merger_omega0(0.75 * PI, PI) - expected_center).abs() < 1e-15);
        assert!((expected_center - 1.000431).abs() < 1e-6);
        let mid = 2.0 * libm::exp(-PI * (PI / 4.0) * (PI / 4.0));
        assert!((vortex_merger_omega0(PI, PI) - mid).abs() < 1e-15);
        assert!((mid - 0.288014).abs() < 1e-6);
    }

    #[test]
    fn ic_sampled_at_vortex_center() {
        // 4x1 cells on [0, 2π]²: cell (1, 0) has centroid (3π/4, π)
        let g = StructuredGrid::new(4, 1, 2.0 * PI, 2.0 * PI).unwrap();
        let f = ScalarField::sample(g, FieldKind::Vorticity, vortex_merger_omega0);
        assert!((f.at(1, 0) - 1.00043).abs() < 1e-5);
    }

    #[test]
    fn ic_bounds_and_symmetry() {
        let g = StructuredGrid::periodic_box(32).unwrap();
        let w = vortex_merger_ic(&g).unwrap();
        let upper = 1.0 + libm::exp(-PI * PI * PI / 4.0);
        assert!(w.values().iter().all(|&v| v > 0.0 && v <= upper));
        let mut asym = 0.0f64;
        for j in 0..32 {
            for i in 0..32 {
                asym = asym.max((w.at(i, j) - w.at(31 - i, j)).abs());
            }
        }
        assert!(asym <= 1e-13);
    }

    #[test]
    fn ic_requires_two_pi_box() {
        let g = StructuredGrid::new(8, 8, 1.0, 1.0).unwrap();
        assert!(matches!(vortex_merger_ic(&g), Err(Error::Config(_))));
    }

    #[test]
    fn forcing_values() {
        assert_eq!(forcing_amplitude(3.0, 800.0, 0.0), 0.0);
        assert!((forcing_amplitude(0.0, 800.0, 0.09) + 0.09).abs() < 1e-16);
        assert!((forcing_amplitude(800.0, 800.0, 0.09) + 0.09 / core::f64::consts::E).abs() < 1e-16);
        let g = StructuredGrid::periodic_box(8).unwrap();
        let f1 = forcing_shape(&g);
        let (x, y) = g.centroid(2, 5);
        let pointwise = -0.09 * libm::exp(-1.5 / 800.0) * libm::cos(3.0 * x) * libm::cos(3.0 * y);
        assert!((forcing_amplitude(1.5, 800.0, 0.09) * f1.at(2, 5) - pointwise).abs() < 1e-16);
    }

    #[test]
    fn zero_state_is_a_fixed_point() {
        let cfg = small(8, 0.05);
        let solver = FomSolver::new(cfg.clone()).unwrap();
        let state = solver
            .initial_state(ScalarField::zeros(cfg.grid, FieldKind::Vorticity))
            .unwrap();
        let next = solver.step(&state).unwrap();
        assert!(next.omega.values().iter().all(|&v| v == 0.0));
        assert!(next.psi.values().iter().all(|&v| v == 0.0));
        assert_eq!(fom_step(&state, &cfg).unwrap(), next);
    }

    #[test]
    fn snapshot_counts_follow_stride() {
        let run = fom_run(&small(8, 0.24), &NoClock).unwrap();
        assert_eq!(run.omega.len(), 3);
        assert_eq!(run.psi.len(), 3);
        assert_eq!(run.diagnostics.len(), 25);
        let times: Vec<f64> = run.omega.snapshots().iter().map(|s| s.time).collect();
        assert!((times[0] - 0.08).abs() < 1e-12 && (times[2] - 0.24).abs() < 1e-12);
        assert_eq!(run.omega.snapshots()[0].parameters, alloc::vec![800.0, 0.0]);
    }

    #[test]
    fn degenerate_interval_records_only_initial_diagnostics() {
        let run = fom_run(&small(8, 0.0), &NoClock).unwrap();
        assert!(run.omega.is_empty() && run.psi.is_empty());
        assert_eq!(run.diagnostics.len(), 1);
        assert_eq!(run.diagnostics[0].time, 0.0);
    }

    #[test]
    fn step_counts_for_benchmark_windows() {
        let cfg = FomConfig::vortex_merger(8).unwrap();
        assert_eq!(cfg.step_count() / cfg.snapshot_stride, 250);
        let half = FomConfig { t_end: 10.0, ..cfg };
        assert_eq!(half.step_count() / half.snapshot_stride, 125);
    }

    #[test]
    fn config_validation() {
        let base = FomConfig::vortex_merger(8).unwrap();
        assert!(FomConfig {
            re: 0.0,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(FomConfig {
            dt: -1.0,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(FomConfig {
            t_end: -1.0,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(FomConfig {
            snapshot_stride: 0,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(FomConfig {
            dt: 0.03,
            t_end: 0.1,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(base.validate().is_ok());
    }

    #[test]
    fn poisson_relation_holds_after_each_step() {
        let cfg = small(16, 0.05);
        let solver = FomSolver::new(cfg.clone()).unwrap();
        let mut state = solver.initial_state(vortex_merger_ic(&cfg.grid).unwrap()).unwrap();
        for _ in 0..5 {
            state = solver.step(&state).unwrap();
            let lpsi = solver.poisson_operator().mul_vec(state.psi.values()).unwrap();
            let r: f64 = lpsi
                .iter()
                .zip(state.omega.values())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let w: f64 = state.omega.values().iter().map(|v| v * v).sum();
            assert!(libm::sqrt(r) <= 10.0 * 1e-8 * libm::sqrt(w));
        }
    }

    #[test]
    fn solver_failure_reports_stage_and_step() {
        let mut cfg = small(16, 0.02);
        cfg.poisson_solver.max_iterations = Some(1);
        let solver = FomSolver::new(cfg.clone()).unwrap();
        let err = solver
            .run_from(vortex_merger_ic(&cfg.grid).unwrap(), &NoClock)
            .unwrap_err();
        assert!(matches!(
            err,
            Error::Step {
                stage: Stage::InitialStreamFunction,
                step: 0,
                ..
            }
        ));
    }
}
