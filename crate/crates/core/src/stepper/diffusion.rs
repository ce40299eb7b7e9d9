//! Linear diffusion solvers on a Neumann grid.
//!
//! Backward Euler uses the Thomas algorithm in 1D and Jacobi-preconditioned
//! conjugate gradients in 2D. The exponential scheme applies
//! `exp(tau * Laplacian)` exactly through the cosine eigenbasis, axis by
//! axis; it is positivity preserving and exact in time.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::grid::{neumann_laplacian, Field, Grid};

use super::StepError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DiffusionScheme {
    #[default]
    BackwardEuler,
    Exponential,
}

/// Solves a tridiagonal system; `sub[0]` and `sup[n-1]` are ignored.
///
/// No pivoting, so the matrix should be diagonally dominant.
pub fn thomas_solve(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Factorized `I - tau * Laplacian` on a 1D grid.
#[derive(Debug, Clone)]
pub(crate) struct TridiagonalFactor {
    off: f64,
    c: Vec<f64>,
    inv_denom: Vec<f64>,
}

impl TridiagonalFactor {
    fn new(cells: usize, spacing: f64, tau: f64) -> Self {
        let k = tau / (spacing * spacing);
        let diag = |i: usize| if i == 0 || i + 1 == cells { 1.0 + k } else { 1.0 + 2.0 * k };
        let off = -k;
        let mut c = vec![0.0; cells];
        let mut inv_denom = vec![0.0; cells];
        inv_denom[0] = 1.0 / diag(0);
        c[0] = off * inv_denom[0];
        for i in 1..cells {
            inv_denom[i] = 1.0 / (diag(i) - off * c[i - 1]);
            c[i] = if i + 1 < cells { off * inv_denom[i] } else { 0.0 };
        }
        Self { off, c, inv_denom }
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut d = vec![0.0; n];
        d[0] = rhs[0] * self.inv_denom[0];
        for i in 1..n {
            d[i] = (rhs[i] - self.off * d[i - 1]) * self.inv_denom[i];
        }
        for i in (0..n - 1).rev() {
            d[i] -= self.c[i] * d[i + 1];
        }
        d
    }
}

/// Dense `exp(tau * Laplacian)` for one axis, with entries clamped at zero.
pub fn cosine_exponential_matrix(cells: usize, spacing: f64, tau: f64) -> Vec<f64> {
    let n = cells;
    let mut basis = vec![0.0; n * n];
    let mut decay = vec![0.0; n];
    for k in 0..n {
        let norm = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        for i in 0..n {
            basis[k * n + i] = norm * (k as f64 * PI * (i as f64 + 0.5) / n as f64).cos();
        }
        let s = (k as f64 * PI / (2.0 * n as f64)).sin();
        decay[k] = (-tau * 4.0 * s * s / (spacing * spacing)).exp();
    }
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v: f64 = (0..n).map(|k| basis[k * n + i] * decay[k] * basis[k * n + j]).sum();
            let v = v.max(0.0);
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }
    out
}

#[derive(Debug, Clone)]
pub(crate) enum DiffusionOperator {
    Tridiagonal(TridiagonalFactor),
    Conjugate { grid: Grid, tau: f64 },
    Exponential { grid: Grid, axes: Vec<Vec<f64>> },
}

impl DiffusionOperator {
    pub(crate) fn new(grid: Grid, tau: f64, scheme: DiffusionScheme) -> Self {
        match scheme {
            DiffusionScheme::BackwardEuler if grid.dimension() == 1 => {
                Self::Tridiagonal(TridiagonalFactor::new(grid.cells()[0], grid.spacing(0), tau))
            }
            DiffusionScheme::BackwardEuler => Self::Conjugate { grid, tau },
            DiffusionScheme::Exponential => Self::Exponential {
                grid,
                axes: (0..grid.dimension())
                    .map(|a| cosine_exponential_matrix(grid.cells()[a], grid.spacing(a), tau))
                    .collect(),
            },
        }
    }

    /// Advances `u` by one diffusion substep.
    pub(crate) fn apply(&self, u: &Field, tolerance: f64) -> Result<Field, StepError> {
        match self {
            Self::Tridiagonal(factor) => {
                let out = factor.solve(u.values());
                Field::new(*u.grid(), out).map_err(|e| StepError::Internal(e.to_string()))
            }
            Self::Conjugate { grid, tau } => conjugate_gradient(*grid, *tau, u, tolerance),
            Self::Exponential { grid, axes } => Ok(apply_separable(*grid, axes, u)),
        }
    }
}

fn apply_separable(grid: Grid, axes: &[Vec<f64>], u: &Field) -> Field {
    let nx = grid.cells()[0];
    let mut values = u.values().to_vec();
    let ex = &axes[0];
    let mut row = vec![0.0; nx];
    for chunk in values.chunks_mut(nx) {
        for (i, out) in row.iter_mut().enumerate() {
            *out = ex[i * nx..(i + 1) * nx].iter().zip(chunk.iter()).map(|(a, b)| a * b).sum();
        }
        chunk.copy_from_slice(&row);
    }
    if grid.dimension() == 2 {
        let ny = grid.cells()[1];
        let ey = &axes[1];
        let mut column = vec![0.0; ny];
        let mut result = vec![0.0; ny];
        for i in 0..nx {
            for j in 0..ny {
                column[j] = values[j * nx + i];
            }
            for (j, out) in result.iter_mut().enumerate() {
                *out = ey[j * ny..(j + 1) * ny].iter().zip(&column).map(|(a, b)| a * b).sum();
            }
            for j in 0..ny {
                values[j * nx + i] = result[j];
            }
        }
    }
    Field::new(grid, values).expect("shape is preserved")
}

fn conjugate_gradient(grid: Grid, tau: f64, rhs: &Field, tolerance: f64) -> Result<Field, StepError> {
    let apply = |x: &Field| -> Vec<f64> {
        let lap = neumann_laplacian(x);
        x.values().iter().zip(lap.values()).map(|(v, l)| v - tau * l).collect()
    };
    let nx = grid.cells()[0];
    let ny = grid.cells()[1];
    let (ihx2, ihy2) = (1.0 / grid.spacing(0).powi(2), 1.0 / grid.spacing(1).powi(2));
    let diag: Vec<f64> = (0..grid.cell_count())
        .map(|c| {
            let (i, j) = (c % nx, c / nx);
            let xn = if i == 0 || i + 1 == nx { 1.0 } else { 2.0 };
            let yn = if j == 0 || j + 1 == ny { 1.0 } else { 2.0 };
            1.0 + tau * (xn * ihx2 + yn * ihy2)
        })
        .collect();
    let b = rhs.values();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = rhs.clone();
    if b_norm == 0.0 {
        return Ok(x);
    }
    let ax = apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
    let mut p = Field::new(grid, z.clone()).expect("shape");
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let max_iterations = 10 * grid.cell_count() + 100;
    for _ in 0..max_iterations {
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm <= tolerance * b_norm {
            return Ok(x);
        }
        let ap = apply(&p);
        let pap: f64 = p.values().iter().zip(&ap).map(|(a, b)| a * b).sum();
        let step = rz / pap;
        for (xi, pi) in x.values_mut().iter_mut().zip(p.values()) {
            *xi += step * pi;
        }
        for (ri, api) in r.iter_mut().zip(&ap) {
            *ri -= step * api;
        }
        for ((zi, ri), di) in z.iter_mut().zip(&r).zip(&diag) {
            *zi = ri / di;
        }
        let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        for (pi, zi) in p.values_mut().iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    Err(StepError::LinearSolve {
        residual: r_norm / b_norm,
        tolerance,
    })
}
