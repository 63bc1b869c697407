//! Jacobi-preconditioned Krylov solvers.
//!
//! Both solvers report success only when the *true* relative residual
//! ‖b - Ax‖ / ‖b‖ meets the tolerance; the recursively updated residual is
//! re-synchronised with the true one whenever they disagree.

use alloc::vec;
use alloc::vec::Vec;

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// Relative residual tolerance used when none is given.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tolerance: f64,
    /// `None` means `10 * n`.
    pub max_iterations: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: None,
        }
    }
}

impl SolverOptions {
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self {
            tolerance,
            ..Self::default()
        }
    }

    fn max_iter(&self, n: usize) -> usize {
        self.max_iterations.unwrap_or(10 * n.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// True relative residual of `x`.
    pub residual: f64,
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(crate::grid::dot(v, v))
}

fn check(a: &CsrMatrix, b: &[f64], x0: Option<&[f64]>, opts: &SolverOptions) -> Result<()> {
    if b.len() != a.n() {
        return Err(Error::Dimension {
            expected: a.n(),
            found: b.len(),
        });
    }
    if let Some(x0) = x0 {
        if x0.len() != a.n() {
            return Err(Error::Dimension {
                expected: a.n(),
                found: x0.len(),
            });
        }
    }
    if !(opts.tolerance > 0.0) {
        return Err(Error::Input("solver tolerance must be positive".into()));
    }
    Ok(())
}

fn inverse_diagonal(a: &CsrMatrix) -> Result<Vec<f64>> {
    a.diagonal()
        .into_iter()
        .enumerate()
        .map(|(r, d)| {
            if d == 0.0 || !d.is_finite() {
                Err(Error::Singular { column: r })
            } else {
                Ok(1.0 / d)
            }
        })
        .collect()
}

fn true_residual(a: &CsrMatrix, b: &[f64], x: &[f64], r: &mut [f64]) -> f64 {
    a.mul_vec_into(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    norm(r)
}

/// Preconditioned conjugate gradients for symmetric positive definite `a`.
pub fn cg_solve(a: &CsrMatrix, b: &[f64], x0: Option<&[f64]>, opts: SolverOptions) -> Result<Solution> {
    check(a, b, x0, &opts)?;
    let n = a.n();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(Solution {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let inv_diag = inverse_diagonal(a)?;
    let target = opts.tolerance * b_norm;
    let max_iter = opts.max_iter(n);

    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = vec![0.0; n];
    let mut r_norm = true_residual(a, b, &x, &mut r);
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    let mut restart = true;
    let mut rz = 0.0;

    loop {
        if r_norm <= target {
            let check = true_residual(a, b, &x, &mut ap);
            if check <= target {
                return Ok(Solution {
                    x,
                    iterations,
                    residual: check / b_norm,
                });
            }
            r.copy_from_slice(&ap);
            restart = true;
        }
        if iterations >= max_iter {
            break;
        }
        for ((zi, ri), di) in z.iter_mut().zip(&r).zip(&inv_diag) {
            *zi = ri * di;
        }
        let rz_new = crate::grid::dot(&r, &z);
        if restart {
            p.copy_from_slice(&z);
            restart = false;
        } else {
            let beta = rz_new / rz;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
        rz = rz_new;
        a.mul_vec_into(&p, &mut ap);
        let pap = crate::grid::dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Breakdown {
                method: "CG",
                iteration: iterations,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        r_norm = norm(&r);
        iterations += 1;
    }
    let residual = true_residual(a, b, &x, &mut r) / b_norm;
    Err(Error::NotConverged {
        method: "CG",
        iterations,
        residual,
    })
}

/// Jacobi-preconditioned BiCGStab for general nonsingular `a`.
pub fn bicgstab_solve(a: &CsrMatrix, b: &[f64], x0: Option<&[f64]>, opts: SolverOptions) -> Result<Solution> {
    check(a, b, x0, &opts)?;
    let n = a.n();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(Solution {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let inv_diag = inverse_diagonal(a)?;
    let target = opts.tolerance * b_norm;
    let max_iter = opts.max_iter(n);
    let tiny = libm::sqrt(f64::MIN_POSITIVE);

    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = vec![0.0; n];
    let mut r_norm = true_residual(a, b, &x, &mut r);
    let mut r_hat = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut zs = vec![0.0; n];
    let (mut rho, mut alpha, mut omega) = (1.0f64, 1.0f64, 1.0f64);
    let mut iterations = 0;

    loop {
        if r_norm <= target {
            let check = true_residual(a, b, &x, &mut t);
            if check <= target {
                return Ok(Solution {
                    x,
                    iterations,
                    residual: check / b_norm,
                });
            }
            // drifted: restart from the true residual
            r.copy_from_slice(&t);
            r_hat.copy_from_slice(&t);
            r_norm = check;
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            p.iter_mut().for_each(|e| *e = 0.0);
            v.iter_mut().for_each(|e| *e = 0.0);
        }
        if iterations >= max_iter {
            break;
        }
        let rho_new = crate::grid::dot(&r_hat, &r);
        if rho_new.abs() < tiny * r_norm * norm(&r_hat) {
            return Err(Error::Breakdown {
                method: "BiCGStab",
                iteration: iterations,
            });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        for i in 0..n {
            y[i] = p[i] * inv_diag[i];
        }
        a.mul_vec_into(&y, &mut v);
        let rv = crate::grid::dot(&r_hat, &v);
        if rv == 0.0 {
            return Err(Error::Breakdown {
                method: "BiCGStab",
                iteration: iterations,
            });
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        iterations += 1;
        if norm(&s) <= target {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            r.copy_from_slice(&s);
            r_norm = norm(&r);
            continue;
        }
        for i in 0..n {
            zs[i] = s[i] * inv_diag[i];
        }
        a.mul_vec_into(&zs, &mut t);
        let tt = crate::grid::dot(&t, &t);
        if tt == 0.0 {
            return Err(Error::Breakdown {
                method: "BiCGStab",
                iteration: iterations,
            });
        }
        omega = crate::grid::dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * y[i] + omega * zs[i];
            r[i] = s[i] - omega * t[i];
        }
        r_norm = norm(&r);
        if omega == 0.0 {
            return Err(Error::Breakdown {
                method: "BiCGStab",
                iteration: iterations,
            });
        }
    }
    let residual = true_residual(a, b, &x, &mut r) / b_norm;
    Err(Error::NotConverged {
        method: "BiCGStab",
        iterations,
        residual,
    })
}
