//! Galerkin reduced order model with separate vorticity (φ) and
//! stream-function (ξ) bases.
//!
//! Reduced operators:
//!
//! ```text
//! M_ij = (φ_i, φ_j)            M̃_ij = (ξ_i, φ_j)
//! A_ij = (φ_i, Δφ_j)           B_ij = (ξ_i, Δξ_j)
//! G_ijk = (φ_i, ∇·((∇×ξ_j) φ_k))
//! H_i  = (φ_i, F₁)
//! ```
//!
//! Δ is the FV Neumann Laplacian for φ-modes and the Dirichlet one for
//! ξ-modes. One step solves
//!
//! ```text
//! (M/dt + C(γⁿ) - A/Re) β^{n+1} = H F₂^{n+1} + M βⁿ/dt,   C_ik = Σ_j γⁿ_j G_ijk
//! B γ^{n+1} = -M̃ β^{n+1}
//! ```

use alloc::vec;
use alloc::vec::Vec;

use crate::clock::Clock;
use crate::error::{Error, Result, Stage};
use crate::fom::forcing_amplitude;
use crate::fv::{self, FluxMode};
use crate::grid::{dot, ScalarField, StructuredGrid};
use crate::linalg::{lu_solve, CsrMatrix, DenseMatrix, LuFactors};
use crate::pod::PodBasis;

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedOperators {
    pub grid: StructuredGrid,
    pub flux_mode: FluxMode,
    /// M_r, N_ω × N_ω.
    pub mass: DenseMatrix,
    /// M̃_r, N_ψ × N_ω.
    pub coupling: DenseMatrix,
    /// A_r, N_ω × N_ω.
    pub diffusion: DenseMatrix,
    /// B_r, N_ψ × N_ψ.
    pub poisson: DenseMatrix,
    /// H_r, N_ω.
    pub forcing: Vec<f64>,
    /// G_r flattened as `[(i * N_ψ + j) * N_ω + k]`.
    pub convection: Vec<f64>,
}

impl ReducedOperators {
    pub fn n_omega(&self) -> usize {
        self.mass.rows()
    }

    pub fn n_psi(&self) -> usize {
        self.poisson.rows()
    }

    #[inline]
    pub fn convection_entry(&self, i: usize, j: usize, k: usize) -> f64 {
        let (nw, np) = (self.n_omega(), self.n_psi());
        self.convection[(i * np + j) * nw + k]
    }

    /// C(γ)_ik = Σ_j γ_j G_ijk.
    pub fn contract_convection(&self, gamma: &[f64]) -> DenseMatrix {
        let (nw, np) = (self.n_omega(), self.n_psi());
        let mut c = DenseMatrix::zeros(nw, nw);
        for i in 0..nw {
            for (j, &g) in gamma.iter().enumerate().take(np) {
                if g == 0.0 {
                    continue;
                }
                let base = (i * np + j) * nw;
                for k in 0..nw {
                    c[(i, k)] += g * self.convection[base + k];
                }
            }
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        let (nw, np) = (self.n_omega(), self.n_psi());
        let dims_ok = self.mass.is_square()
            && self.diffusion.rows() == nw
            && self.diffusion.cols() == nw
            && self.poisson.is_square()
            && self.coupling.rows() == np
            && self.coupling.cols() == nw
            && self.forcing.len() == nw
            && self.convection.len() == nw * np * nw;
        if !dims_ok {
            return Err(Error::Input("reduced operator dimensions are inconsistent".into()));
        }
        let finite = self.mass.is_finite()
            && self.coupling.is_finite()
            && self.diffusion.is_finite()
            && self.poisson.is_finite()
            && self.forcing.iter().chain(&self.convection).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Input("reduced operators contain non-finite entries".into()));
        }
        Ok(())
    }
}

/// Gram-type pairing `out_ij = (left_i, op right_j)` with `op` given as a CSR grid operator.
fn pair_with_operator(left: &[ScalarField], right: &[ScalarField], op: Option<&CsrMatrix>, vol: f64) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(left.len(), right.len());
    let mut tmp = vec![0.0; right.first().map_or(0, |f| f.values().len())];
    for (j, r) in right.iter().enumerate() {
        let rhs: &[f64] = match op {
            Some(op) => {
                op.mul_vec_into(r.values(), &mut tmp);
                &tmp
            }
            None => r.values(),
        };
        for (i, l) in left.iter().enumerate() {
            out[(i, j)] = dot(l.values(), rhs) * vol;
        }
    }
    out
}

/// Projects the full-order operators onto the two bases.
pub fn project_operators(
    basis_omega: &PodBasis,
    basis_psi: &PodBasis,
    forcing_shape: &ScalarField,
    flux_mode: FluxMode,
) -> Result<ReducedOperators> {
    let grid = *basis_omega.grid();
    grid.check_same(basis_psi.grid())?;
    grid.check_same(forcing_shape.grid())?;
    let vol = grid.cell_volume();
    let phi = basis_omega.modes();
    let xi = basis_psi.modes();
    let (nw, np) = (phi.len(), xi.len());

    let mass = pair_with_operator(phi, phi, None, vol);
    let coupling = pair_with_operator(xi, phi, None, vol);

    // the FV Laplacians approximate -Δ
    let mut diffusion = pair_with_operator(phi, phi, Some(&fv::assemble_laplacian_neumann(&grid)), vol);
    diffusion.as_mut_slice().iter_mut().for_each(|v| *v = -*v);
    let mut poisson = pair_with_operator(xi, xi, Some(&fv::assemble_laplacian_dirichlet(&grid)), vol);
    poisson.as_mut_slice().iter_mut().for_each(|v| *v = -*v);

    let forcing: Vec<f64> = phi
        .iter()
        .map(|p| dot(p.values(), forcing_shape.values()) * vol)
        .collect();

    let mut convection = vec![0.0; nw * np * nw];
    let mut tmp = vec![0.0; grid.cell_count()];
    for (j, x) in xi.iter().enumerate() {
        let conv = fv::assemble_convection(&fv::stream_to_flux(x, flux_mode)?);
        for (k, pk) in phi.iter().enumerate() {
            conv.mul_vec_into(pk.values(), &mut tmp);
            for (i, pi) in phi.iter().enumerate() {
                convection[(i * np + j) * nw + k] = dot(pi.values(), &tmp) * vol;
            }
        }
    }

    let ops = ReducedOperators {
        grid,
        flux_mode,
        mass,
        coupling,
        diffusion,
        poisson,
        forcing,
        convection,
    };
    ops.validate()?;
    if let Err(e) = LuFactors::new(&ops.poisson) {
        return Err(Error::Input(alloc::format!(
            "reduced Poisson matrix is singular (diagonal ratio {:e}): {e}",
            diagonal_ratio(&ops.poisson)
        )));
    }
    Ok(ops)
}

/// Crude conditioning indicator: max |B_ii| / min |B_ii|.
fn diagonal_ratio(m: &DenseMatrix) -> f64 {
    let d: Vec<f64> = (0..m.rows()).map(|i| m[(i, i)].abs()).collect();
    let hi = d.iter().cloned().fold(0.0f64, f64::max);
    let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
    hi / lo
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub step: usize,
    /// Vorticity coefficients.
    pub beta: Vec<f64>,
    /// Stream-function coefficients.
    pub gamma: Vec<f64>,
}

impl ReducedState {
    pub fn zeros(ops: &ReducedOperators) -> Self {
        Self {
            step: 0,
            beta: vec![0.0; ops.n_omega()],
            gamma: vec![0.0; ops.n_psi()],
        }
    }
}

/// γ from β through `B γ = -M̃ β`.
pub fn stream_coefficients(ops: &ReducedOperators, beta: &[f64]) -> Result<Vec<f64>> {
    let rhs: Vec<f64> = ops.coupling.mul_vec(beta)?.into_iter().map(|v| -v).collect();
    lu_solve(&ops.poisson, &rhs)
}

/// Online stepper with the β-independent factorizations done once.
#[derive(Debug, Clone)]
pub struct RomStepper<'a> {
    ops: &'a ReducedOperators,
    dt: f64,
    re: f64,
    /// M/dt - A/Re, the γ-independent part of the system matrix.
    base: DenseMatrix,
    poisson: LuFactors,
    system: DenseMatrix,
    rhs: Vec<f64>,
}

impl<'a> RomStepper<'a> {
    pub fn new(ops: &'a ReducedOperators, dt: f64, re: f64) -> Result<Self> {
        if !(dt > 0.0) || !(re > 0.0) {
            return Err(Error::Config(alloc::format!(
                "dt and Re must be positive, got dt={dt}, Re={re}"
            )));
        }
        ops.validate()?;
        let nw = ops.n_omega();
        let mut base = DenseMatrix::zeros(nw, nw);
        for i in 0..nw {
            for k in 0..nw {
                base[(i, k)] = ops.mass[(i, k)] / dt - ops.diffusion[(i, k)] / re;
            }
        }
        let poisson = LuFactors::new(&ops.poisson).map_err(|e| e.at(Stage::ReducedStreamFunction, 0))?;
        Ok(Self {
            ops,
            dt,
            re,
            system: base.clone(),
            base,
            poisson,
            rhs: vec![0.0; nw],
        })
    }

    pub fn operators(&self) -> &ReducedOperators {
        self.ops
    }

    pub fn initial_state(&self, beta0: Vec<f64>) -> Result<ReducedState> {
        let gamma = self
            .solve_stream(&beta0)
            .map_err(|e| e.at(Stage::ReducedStreamFunction, 0))?;
        Ok(ReducedState {
            step: 0,
            beta: beta0,
            gamma,
        })
    }

    fn solve_stream(&self, beta: &[f64]) -> Result<Vec<f64>> {
        let rhs: Vec<f64> = self.ops.coupling.mul_vec(beta)?.into_iter().map(|v| -v).collect();
        self.poisson.solve(&rhs)
    }

    /// Advances one step; `f2_next` is F₂ at the new time level.
    pub fn step(&mut self, state: &ReducedState, f2_next: f64) -> Result<ReducedState> {
        let ops = self.ops;
        let (nw, np) = (ops.n_omega(), ops.n_psi());
        if state.beta.len() != nw || state.gamma.len() != np {
            return Err(Error::Dimension {
                expected: nw + np,
                found: state.beta.len() + state.gamma.len(),
            });
        }
        let next = state.step + 1;
        self.system.as_mut_slice().copy_from_slice(self.base.as_slice());
        for i in 0..nw {
            for (j, &g) in state.gamma.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let base = (i * np + j) * nw;
                let row = &mut self.system.as_mut_slice()[i * nw..(i + 1) * nw];
                for (dst, gk) in row.iter_mut().zip(&ops.convection[base..base + nw]) {
                    *dst += g * gk;
                }
            }
        }
        let inv_dt = 1.0 / self.dt;
        for i in 0..nw {
            self.rhs[i] = ops.forcing[i] * f2_next + dot(ops.mass.row(i), &state.beta) * inv_dt;
        }
        let beta = lu_solve(&self.system, &self.rhs).map_err(|e| e.at(Stage::ReducedVorticity, next))?;
        let gamma = self
            .solve_stream(&beta)
            .map_err(|e| e.at(Stage::ReducedStreamFunction, next))?;
        Ok(ReducedState {
            step: next,
            beta,
            gamma,
        })
    }

    pub fn reynolds(&self) -> f64 {
        self.re
    }
}

/// One reduced step (factorizes everything on each call).
pub fn rom_step(state: &ReducedState, ops: &ReducedOperators, dt: f64, re: f64, f2_next: f64) -> Result<ReducedState> {
    RomStepper::new(ops, dt, re)?.step(state, f2_next)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RomConfig {
    pub re: f64,
    pub gamma: f64,
    pub dt: f64,
    pub t0: f64,
    pub t_end: f64,
    /// Steps between recorded coefficient vectors.
    pub record_stride: usize,
}

impl RomConfig {
    pub fn from_fom(cfg: &crate::fom::FomConfig) -> Self {
        Self {
            re: cfg.re,
            gamma: cfg.gamma,
            dt: cfg.dt,
            t0: cfg.t0,
            t_end: cfg.t_end,
            record_stride: cfg.snapshot_stride,
        }
    }

    pub fn step_count(&self) -> usize {
        libm::round((self.t_end - self.t0) / self.dt) as usize
    }

    pub fn time(&self, step: usize) -> f64 {
        self.t0 + step as f64 * self.dt
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RomRun {
    pub initial: ReducedState,
    /// States at steps that are multiples of `record_stride`, excluding step 0.
    pub recorded: Vec<(f64, ReducedState)>,
    pub final_state: ReducedState,
    /// Seconds spent projecting the initial condition.
    pub setup_seconds: f64,
    /// Seconds spent in the time-marching loop.
    pub online_seconds: f64,
    pub steps: usize,
}

/// Projects `omega0` onto the vorticity basis and marches the reduced system.
pub fn rom_run<C: Clock>(
    ops: &ReducedOperators,
    basis_omega: &PodBasis,
    omega0: &ScalarField,
    cfg: &RomConfig,
    clock: &C,
) -> Result<RomRun> {
    if cfg.record_stride == 0 {
        return Err(Error::Config("record stride must be at least 1".into()));
    }
    if !(cfg.t_end >= cfg.t0) {
        return Err(Error::Config("reduced run needs t_end >= t0".into()));
    }
    if basis_omega.len() != ops.n_omega() {
        return Err(Error::Dimension {
            expected: ops.n_omega(),
            found: basis_omega.len(),
        });
    }
    let t_setup = clock.now();
    let beta0 = basis_omega.project(omega0)?;
    let mut stepper = RomStepper::new(ops, cfg.dt, cfg.re)?;
    let initial = stepper.initial_state(beta0)?;
    let setup_seconds = clock.now() - t_setup;

    let steps = cfg.step_count();
    let mut recorded = Vec::with_capacity(steps / cfg.record_stride);
    let mut state = initial.clone();
    let start = clock.now();
    for _ in 0..steps {
        let f2 = forcing_amplitude(cfg.time(state.step + 1), cfg.re, cfg.gamma);
        state = stepper.step(&state, f2)?;
        if state.step % cfg.record_stride == 0 {
            recorded.push((cfg.time(state.step), state.clone()));
        }
    }
    let online_seconds = clock.now() - start;
    Ok(RomRun {
        initial,
        recorded,
        final_state: state,
        setup_seconds,
        online_seconds,
        steps,
    })
}
