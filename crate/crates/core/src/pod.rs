//! Proper orthogonal decomposition by the method of snapshots.
//!
//! For a snapshot set Φ_1..Φ_N the correlation matrix C_ij = (Φ_i, Φ_j) is
//! eigendecomposed, C Q = Q Λ, and mode k is ζ_k = λ_k^{-1/2} Σ_j Q_jk Φ_j,
//! which is unit-norm in L²(Ω). Modes are then passed once through modified
//! Gram-Schmidt to absorb roundoff, and signed so that their entry of
//! largest magnitude is positive.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{dot, l2_inner, l2_norm, FieldKind, ScalarField, StructuredGrid};
use crate::linalg::{sym_eig, DenseMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Parameter vector π the snapshot was computed at.
    pub parameters: Vec<f64>,
    pub time: f64,
    pub field: ScalarField,
}

/// Ordered snapshots of one variable, parameter-major and time-minor.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    kind: FieldKind,
    grid: StructuredGrid,
    snapshots: Vec<Snapshot>,
}

impl SnapshotSet {
    pub fn new(kind: FieldKind, grid: StructuredGrid) -> Self {
        Self {
            kind,
            grid,
            snapshots: Vec::new(),
        }
    }

    pub fn push(&mut self, parameters: Vec<f64>, time: f64, field: ScalarField) -> Result<()> {
        self.grid.check_same(field.grid())?;
        self.snapshots.push(Snapshot {
            parameters,
            time,
            field: field.with_kind(self.kind),
        });
        Ok(())
    }

    /// Appends all snapshots of `other` (e.g. the run of the next training parameter).
    pub fn append(&mut self, other: SnapshotSet) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        if other.kind != self.kind {
            return Err(Error::Input("cannot pool snapshots of different variables".into()));
        }
        self.snapshots.extend(other.snapshots);
        Ok(())
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn grid(&self) -> &StructuredGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn fields(&self) -> impl Iterator<Item = &ScalarField> {
        self.snapshots.iter().map(|s| &s.field)
    }
}

/// C_ij = (Φ_i, Φ_j)_{L²}.
pub fn correlation_matrix(set: &SnapshotSet) -> Result<DenseMatrix> {
    let n = set.len();
    if n == 0 {
        return Err(Error::Input("correlation matrix of an empty snapshot set".into()));
    }
    let vol = set.grid.cell_volume();
    let mut c = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let a = set.snapshots[i].field.values();
        for j in i..n {
            let v = dot(a, set.snapshots[j].field.values()) * vol;
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(c)
}

/// How many modes to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// Keep modes with λ_k / Σλ ≥ threshold.
    Threshold(f64),
    /// Keep exactly this many modes.
    Count(usize),
    /// Keep every mode above the numerical-rank cutoff `N_s ε λ_1`.
    FullRank,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    kind: FieldKind,
    grid: StructuredGrid,
    modes: Vec<ScalarField>,
    /// Full spectrum of the correlation matrix, descending.
    eigenvalues: Vec<f64>,
    truncation: Truncation,
}

impl PodBasis {
    /// Reassembles a basis from stored parts, checking the invariants.
    pub fn from_parts(
        kind: FieldKind,
        grid: StructuredGrid,
        modes: Vec<ScalarField>,
        eigenvalues: Vec<f64>,
        truncation: Truncation,
    ) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::EmptyBasis("no modes".into()));
        }
        if modes.len() > eigenvalues.len() {
            return Err(Error::Input("more modes than eigenvalues".into()));
        }
        for m in &modes {
            grid.check_same(m.grid())?;
        }
        Ok(Self {
            kind,
            grid,
            modes,
            eigenvalues,
            truncation,
        })
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn grid(&self) -> &StructuredGrid {
        &self.grid
    }

    pub fn modes(&self) -> &[ScalarField] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    /// λ_k / Σλ for the whole spectrum.
    pub fn relative_eigenvalues(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().map(|l| l.max(0.0)).sum();
        self.eigenvalues.iter().map(|l| l / total).collect()
    }

    /// Largest deviation of the mode Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.modes.len() {
            for j in i..self.modes.len() {
                let g = l2_inner(&self.modes[i], &self.modes[j]).expect("modes share a grid");
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    /// Coefficients c_k = (field, ζ_k).
    pub fn project(&self, field: &ScalarField) -> Result<Vec<f64>> {
        self.grid.check_same(field.grid())?;
        self.modes.iter().map(|m| l2_inner(field, m)).collect()
    }

    /// Σ_k c_k ζ_k.
    pub fn reconstruct(&self, coeffs: &[f64]) -> Result<ScalarField> {
        if coeffs.len() != self.modes.len() {
            return Err(Error::Dimension {
                expected: self.modes.len(),
                found: coeffs.len(),
            });
        }
        let mut out = vec![0.0; self.grid.cell_count()];
        for (c, m) in coeffs.iter().zip(&self.modes) {
            for (o, v) in out.iter_mut().zip(m.values()) {
                *o += c * v;
            }
        }
        ScalarField::from_values(self.grid, self.kind, out)
    }
}

/// Number of eigenvalues above `N ε λ_1`.
pub fn numerical_rank(eigenvalues: &[f64]) -> usize {
    let Some(&first) = eigenvalues.first() else {
        return 0;
    };
    if !(first > 0.0) {
        return 0;
    }
    let cutoff = eigenvalues.len() as f64 * f64::EPSILON * first;
    eigenvalues.iter().take_while(|&&l| l > cutoff).count()
}

/// Builds the POD basis of `set`.
pub fn build_basis(set: &SnapshotSet, truncation: Truncation) -> Result<PodBasis> {
    let ns = set.len();
    if ns == 0 {
        return Err(Error::EmptyBasis("snapshot set is empty".into()));
    }
    let corr = correlation_matrix(set)?;
    let eig = sym_eig(&corr)?;
    let rank = numerical_rank(&eig.values);
    if rank == 0 {
        return Err(Error::EmptyBasis("all eigenvalues vanish".into()));
    }
    let total: f64 = eig.values.iter().map(|l| l.max(0.0)).sum();
    let count = match truncation {
        Truncation::Threshold(t) => {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Input(alloc::format!("threshold must lie in (0, 1), got {t}")));
            }
            eig.values[..rank].iter().take_while(|&&l| l / total >= t).count()
        }
        Truncation::Count(c) => {
            if c == 0 || c > ns {
                return Err(Error::Input(alloc::format!(
                    "mode count must lie in [1, {ns}], got {c}"
                )));
            }
            if c > rank {
                return Err(Error::EmptyBasis(alloc::format!(
                    "requested {c} modes but the snapshots have numerical rank {rank}"
                )));
            }
            c
        }
        Truncation::FullRank => rank,
    };
    if count == 0 {
        return Err(Error::EmptyBasis("threshold retains no modes".to_string()));
    }

    let grid = *set.grid();
    let vol = grid.cell_volume();
    let mut modes: Vec<ScalarField> = Vec::with_capacity(count);
    for k in 0..count {
        let scale = 1.0 / libm::sqrt(eig.values[k]);
        let mut v = vec![0.0; grid.cell_count()];
        for (j, snap) in set.snapshots.iter().enumerate() {
            let w = eig.vectors[(j, k)] * scale;
            if w != 0.0 {
                for (o, s) in v.iter_mut().zip(snap.field.values()) {
                    *o += w * s;
                }
            }
        }
        for prev in &modes {
            let proj = dot(&v, prev.values()) * vol;
            for (o, p) in v.iter_mut().zip(prev.values()) {
                *o -= proj * p;
            }
        }
        let norm = libm::sqrt(dot(&v, &v) * vol);
        if !(norm > 0.0) {
            return Err(Error::EmptyBasis(alloc::format!(
                "mode {k} vanished during orthogonalization"
            )));
        }
        let mut lead = 0.0f64;
        for &x in &v {
            if x.abs() > lead.abs() {
                lead = x;
            }
        }
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        v.iter_mut().for_each(|x| *x *= sign / norm);
        modes.push(ScalarField::from_values(grid, set.kind(), v)?);
    }
    Ok(PodBasis {
        kind: set.kind(),
        grid,
        modes,
        eigenvalues: eig.values,
        truncation,
    })
}

/// Σ_i ‖Φ_i - Π_r Φ_i‖² over the snapshot set.
pub fn projection_error_energy(set: &SnapshotSet, basis: &PodBasis) -> Result<f64> {
    let mut total = 0.0;
    for snap in &set.snapshots {
        let c = basis.project(&snap.field)?;
        let mut r = basis.reconstruct(&c)?;
        r.scale(-1.0);
        r.axpy(1.0, &snap.field)?;
        let e = l2_norm(&r);
        total += e * e;
    }
    Ok(total)
}
