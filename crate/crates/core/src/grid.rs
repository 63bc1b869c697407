//! Uniform structured grid and cell-centered scalar fields.
//!
//! Cells are stored row-major with `j` (the y index) as the outer index, so
//! cell `(i, j)` lives at `j * nx + i`. Every module uses this ordering.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Uniform Cartesian partition of `[0, lx] x [0, ly]` into `nx * ny` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuredGrid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl StructuredGrid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 1 || ny < 1 {
            return Err(Error::Config(alloc::format!(
                "grid needs at least one cell per direction, got {nx}x{ny}"
            )));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::Config(alloc::format!(
                "domain extents must be positive and finite, got {lx}x{ly}"
            )));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    /// Square `n x n` grid on `[0, 2π]²`, the vortex-merger domain.
    pub fn periodic_box(n: usize) -> Result<Self> {
        Self::new(n, n, 2.0 * core::f64::consts::PI, 2.0 * core::f64::consts::PI)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    /// Volume |Ω_i| of every cell.
    pub fn cell_volume(&self) -> f64 {
        self.hx() * self.hy()
    }

    /// Area of a face normal to x (its length in 2D).
    pub fn x_face_area(&self) -> f64 {
        self.hy()
    }

    /// Area of a face normal to y.
    pub fn y_face_area(&self) -> f64 {
        self.hx()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn centroid(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy())
    }

    /// Number of x-normal faces, boundary faces included: `(nx + 1) * ny`.
    pub fn x_face_count(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    /// Number of y-normal faces, boundary faces included: `nx * (ny + 1)`.
    pub fn y_face_count(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    /// Index of the x-face on the west side of cell `(i, j)`; `i == nx` is the east boundary.
    #[inline]
    pub fn x_face(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    /// Index of the y-face on the south side of cell `(i, j)`; `j == ny` is the north boundary.
    #[inline]
    pub fn y_face(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn check_same(&self, other: &StructuredGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// What a field represents. Used for file tags and sanity checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Vorticity,
    StreamFunction,
    Forcing,
    Generic,
}

impl FieldKind {
    pub fn tag(self) -> u64 {
        match self {
            FieldKind::Vorticity => 1,
            FieldKind::StreamFunction => 2,
            FieldKind::Forcing => 3,
            FieldKind::Generic => 0,
        }
    }

    pub fn from_tag(tag: u64) -> Option<Self> {
        match tag {
            0 => Some(FieldKind::Generic),
            1 => Some(FieldKind::Vorticity),
            2 => Some(FieldKind::StreamFunction),
            3 => Some(FieldKind::Forcing),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FieldKind::Vorticity => "omega",
            FieldKind::StreamFunction => "psi",
            FieldKind::Forcing => "forcing",
            FieldKind::Generic => "generic",
        }
    }
}

/// One value per cell of a [`StructuredGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: StructuredGrid,
    kind: FieldKind,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: StructuredGrid, kind: FieldKind) -> Self {
        Self {
            grid,
            kind,
            values: vec![0.0; grid.cell_count()],
        }
    }

    pub fn from_values(grid: StructuredGrid, kind: FieldKind, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::Dimension {
                expected: grid.cell_count(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("field contains non-finite values".into()));
        }
        Ok(Self { grid, kind, values })
    }

    /// Evaluates `f` at every cell centroid.
    pub fn sample<F: Fn(f64, f64) -> f64>(grid: StructuredGrid, kind: FieldKind, f: F) -> Self {
        let mut values = Vec::with_capacity(grid.cell_count());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = grid.centroid(i, j);
                values.push(f(x, y));
            }
        }
        Self { grid, kind, values }
    }

    pub fn grid(&self) -> &StructuredGrid {
        &self.grid
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: FieldKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &ScalarField) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    /// Σ_i a_i |Ω_i|.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }
}

/// Discrete L²(Ω) pairing Σ_i a_i b_i |Ω_i|.
pub fn l2_inner(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    a.grid.check_same(&b.grid)?;
    Ok(dot(&a.values, &b.values) * a.grid.cell_volume())
}

pub fn l2_norm(a: &ScalarField) -> f64 {
    libm::sqrt(dot(&a.values, &a.values) * a.grid.cell_volume())
}

/// Enstrophy ∫ ω² dΩ.
pub fn enstrophy(omega: &ScalarField) -> f64 {
    dot(&omega.values, &omega.values) * omega.grid.cell_volume()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
