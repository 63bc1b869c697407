//! Finite-volume operators on the structured grid.
//!
//! All operators are "per unit volume": a row is the sum of face
//! contributions divided by |Ω_i|. Diffusive face gradients use the two-point
//! formula (φ_Q - φ_P)/|d| |A|, face values for convection use central
//! differencing (arithmetic mean of the two adjacent cells). Boundary faces
//! carry zero convective flux in every operator.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{FieldKind, ScalarField, StructuredGrid};
use crate::linalg::{CsrBuilder, CsrMatrix};

/// How face fluxes are built from a cell-centered stream function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FluxMode {
    /// Cell velocities by central differences, linearly interpolated to faces.
    #[default]
    Linear,
    /// ψ averaged to cell corners; face flux is the corner difference along the face.
    /// Exactly divergence-free on every cell.
    Corner,
}

/// Convective flux φ_j through every face, positive in +x / +y.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceFlux {
    grid: StructuredGrid,
    /// Indexed by [`StructuredGrid::x_face`].
    x: Vec<f64>,
    /// Indexed by [`StructuredGrid::y_face`].
    y: Vec<f64>,
}

impl FaceFlux {
    pub fn zeros(grid: StructuredGrid) -> Self {
        Self {
            grid,
            x: vec![0.0; grid.x_face_count()],
            y: vec![0.0; grid.y_face_count()],
        }
    }

    pub fn grid(&self) -> &StructuredGrid {
        &self.grid
    }

    pub fn x_faces(&self) -> &[f64] {
        &self.x
    }

    pub fn y_faces(&self) -> &[f64] {
        &self.y
    }

    pub fn max_abs(&self) -> f64 {
        self.x.iter().chain(&self.y).fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Net outward flux of every cell, Σ_j φ_j (outward).
    pub fn net_outflow(&self) -> Vec<f64> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(g.cell_count());
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                out.push(
                    self.x[g.x_face(i + 1, j)] - self.x[g.x_face(i, j)] + self.y[g.y_face(i, j + 1)]
                        - self.y[g.y_face(i, j)],
                );
            }
        }
        out
    }

    /// `self + alpha * other`; used to superpose fluxes of basis modes.
    pub fn add_scaled(&mut self, alpha: f64, other: &FaceFlux) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        for (a, b) in self.x.iter_mut().zip(&other.x) {
            *a += alpha * b;
        }
        for (a, b) in self.y.iter_mut().zip(&other.y) {
            *a += alpha * b;
        }
        Ok(())
    }
}

fn require_three_cells(grid: &StructuredGrid) -> Result<()> {
    if grid.nx() < 3 || grid.ny() < 3 {
        return Err(Error::Config(alloc::format!(
            "velocity reconstruction needs at least 3x3 cells, got {}x{}",
            grid.nx(),
            grid.ny()
        )));
    }
    Ok(())
}

/// Derivative along a line of `n >= 3` samples with spacing `h`: central in
/// the interior, one-sided second order at both ends.
#[inline]
fn line_derivative(n: usize, k: usize, h: f64, at: impl Fn(usize) -> f64) -> f64 {
    if k == 0 {
        (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
    } else if k == n - 1 {
        (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
    } else {
        (at(k + 1) - at(k - 1)) / (2.0 * h)
    }
}

fn cell_velocity(psi: &ScalarField) -> (Vec<f64>, Vec<f64>) {
    let g = *psi.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let (hx, hy) = (g.hx(), g.hy());
    let p = psi.values();
    let mut u = vec![0.0; g.cell_count()];
    let mut v = vec![0.0; g.cell_count()];
    for j in 0..ny {
        for i in 0..nx {
            let idx = g.index(i, j);
            u[idx] = line_derivative(ny, j, hy, |jj| p[jj * nx + i]);
            v[idx] = -line_derivative(nx, i, hx, |ii| p[j * nx + ii]);
        }
    }
    (u, v)
}

/// Cell-centered velocity u = ∂ψ/∂y, v = -∂ψ/∂x.
pub fn curl_to_velocity(psi: &ScalarField) -> Result<(ScalarField, ScalarField)> {
    require_three_cells(psi.grid())?;
    let (u, v) = cell_velocity(psi);
    let g = *psi.grid();
    Ok((
        ScalarField::from_values(g, FieldKind::Generic, u)?,
        ScalarField::from_values(g, FieldKind::Generic, v)?,
    ))
}

/// Face fluxes φ_j = (∇×ψ)_j · A_j. Boundary-face fluxes are zero.
pub fn stream_to_flux(psi: &ScalarField, mode: FluxMode) -> Result<FaceFlux> {
    let g = *psi.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let mut flux = FaceFlux::zeros(g);
    match mode {
        FluxMode::Linear => {
            require_three_cells(&g)?;
            let (u, v) = cell_velocity(psi);
            let ax = g.x_face_area();
            let ay = g.y_face_area();
            for j in 0..ny {
                for i in 1..nx {
                    flux.x[g.x_face(i, j)] = 0.5 * (u[g.index(i - 1, j)] + u[g.index(i, j)]) * ax;
                }
            }
            for j in 1..ny {
                for i in 0..nx {
                    flux.y[g.y_face(i, j)] = 0.5 * (v[g.index(i, j - 1)] + v[g.index(i, j)]) * ay;
                }
            }
        }
        FluxMode::Corner => {
            // corner (i, j) sits at (i hx, j hy); boundary corners carry ψ = 0
            let p = psi.values();
            let mut corner = vec![0.0; (nx + 1) * (ny + 1)];
            for j in 1..ny {
                for i in 1..nx {
                    corner[j * (nx + 1) + i] = 0.25
                        * (p[g.index(i - 1, j - 1)] + p[g.index(i, j - 1)] + p[g.index(i - 1, j)] + p[g.index(i, j)]);
                }
            }
            let c = |i: usize, j: usize| corner[j * (nx + 1) + i];
            for j in 0..ny {
                for i in 1..nx {
                    flux.x[g.x_face(i, j)] = c(i, j + 1) - c(i, j);
                }
            }
            for j in 1..ny {
                for i in 0..nx {
                    flux.y[g.y_face(i, j)] = -(c(i + 1, j) - c(i, j));
                }
            }
        }
    }
    Ok(flux)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WallCondition {
    /// Homogeneous Dirichlet: the boundary value is zero at half-cell distance.
    ZeroValue,
    /// Homogeneous Neumann: no diffusive flux through the wall.
    ZeroGradient,
}

/// Assembles `mass * I + C(flux) + diffusion * L`, where `L ≈ -Δ` with the
/// given wall condition and `C` is the central-differencing convection operator.
fn assemble(
    grid: &StructuredGrid,
    mass: f64,
    diffusion: f64,
    wall: WallCondition,
    flux: Option<&FaceFlux>,
) -> Result<CsrMatrix> {
    if let Some(f) = flux {
        grid.check_same(f.grid())?;
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    let vol = grid.cell_volume();
    // diffusive coefficient |A| / (|d| |Ω|) for interior x- and y-faces
    let kx = grid.x_face_area() / (grid.hx() * vol);
    let ky = grid.y_face_area() / (grid.hy() * vol);
    let (wall_kx, wall_ky) = match wall {
        WallCondition::ZeroValue => (2.0 * kx, 2.0 * ky),
        WallCondition::ZeroGradient => (0.0, 0.0),
    };
    let mut b = CsrBuilder::with_capacity(grid.cell_count(), 5 * grid.cell_count());
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(5);
    for j in 0..ny {
        for i in 0..nx {
            let idx = grid.index(i, j);
            let mut diag = mass;
            let (mut south, mut west, mut east, mut north) = (0.0, 0.0, 0.0, 0.0);
            if i > 0 {
                west -= diffusion * kx;
                diag += diffusion * kx;
            } else {
                diag += diffusion * wall_kx;
            }
            if i + 1 < nx {
                east -= diffusion * kx;
                diag += diffusion * kx;
            } else {
                diag += diffusion * wall_kx;
            }
            if j > 0 {
                south -= diffusion * ky;
                diag += diffusion * ky;
            } else {
                diag += diffusion * wall_ky;
            }
            if j + 1 < ny {
                north -= diffusion * ky;
                diag += diffusion * ky;
            } else {
                diag += diffusion * wall_ky;
            }
            if let Some(f) = flux {
                // outward flux through each face, face value = mean of the two cells
                if i > 0 {
                    let out = -f.x[grid.x_face(i, j)] / vol;
                    diag += 0.5 * out;
                    west += 0.5 * out;
                }
                if i + 1 < nx {
                    let out = f.x[grid.x_face(i + 1, j)] / vol;
                    diag += 0.5 * out;
                    east += 0.5 * out;
                }
                if j > 0 {
                    let out = -f.y[grid.y_face(i, j)] / vol;
                    diag += 0.5 * out;
                    south += 0.5 * out;
                }
                if j + 1 < ny {
                    let out = f.y[grid.y_face(i, j + 1)] / vol;
                    diag += 0.5 * out;
                    north += 0.5 * out;
                }
            }
            row.clear();
            if j > 0 {
                row.push((idx - nx, south));
            }
            if i > 0 {
                row.push((idx - 1, west));
            }
            row.push((idx, diag));
            if i + 1 < nx {
                row.push((idx + 1, east));
            }
            if j + 1 < ny {
                row.push((idx + nx, north));
            }
            b.push_row(&row);
        }
    }
    b.finish()
}

/// Discrete `-Δ` with ψ = 0 on the boundary. Symmetric positive definite.
pub fn assemble_laplacian_dirichlet(grid: &StructuredGrid) -> CsrMatrix {
    assemble(grid, 0.0, 1.0, WallCondition::ZeroValue, None).expect("stencil assembly on a valid grid")
}

/// Discrete `-Δ` with ∂ω/∂n = 0 on the boundary. Symmetric positive
/// semidefinite with constants in its null space.
pub fn assemble_laplacian_neumann(grid: &StructuredGrid) -> CsrMatrix {
    assemble(grid, 0.0, 1.0, WallCondition::ZeroGradient, None).expect("stencil assembly on a valid grid")
}

/// Discrete `∇·(u ω)` for the given face fluxes, central differencing.
pub fn assemble_convection(flux: &FaceFlux) -> CsrMatrix {
    assemble(flux.grid(), 0.0, 0.0, WallCondition::ZeroGradient, Some(flux)).expect("stencil assembly on a valid grid")
}

/// Vorticity transport operator `I/dt + C(flux) + (1/Re) L_N`.
pub fn assemble_helmholtz_neumann(dt: f64, re: f64, flux: &FaceFlux) -> Result<CsrMatrix> {
    if !(dt > 0.0) || !(re > 0.0) {
        return Err(Error::Config(alloc::format!(
            "dt and Re must be positive, got dt={dt}, Re={re}"
        )));
    }
    assemble(flux.grid(), 1.0 / dt, 1.0 / re, WallCondition::ZeroGradient, Some(flux))
}

/// Applies a grid operator to a field.
pub fn apply(op: &CsrMatrix, field: &ScalarField) -> Result<ScalarField> {
    let values = op.mul_vec(field.values())?;
    ScalarField::from_values(*field.grid(), field.kind(), values)
}
