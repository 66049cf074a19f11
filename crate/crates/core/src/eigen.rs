//! Dense eigen-decomposition of general complex matrices.
//!
//! The matrix is reduced to complex Schur form `A = Q T Q*` and each
//! eigenvector of the triangular factor is found by back substitution,
//! in the manner of LAPACK's `ztrevc`.

use nalgebra::linalg::Schur;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use thiserror::Error;

const MAX_SWEEPS_PER_DIM: usize = 100;
const SHIFTS: [C64; 3] = [C64::new(0.0, 0.0), C64::new(0.1237, 0.0731), C64::new(-0.0419, 0.2113)];
/// Deflation tolerances, in units of machine epsilon, tried in order.
const DEFLATION_LADDER: [f64; 3] = [1.0, 64.0, 1024.0];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EigenError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("Schur iteration did not converge (1-norm condition estimate {condition_estimate:.3e})")]
    NoConvergence { condition_estimate: f64 },
}

/// Eigenvalues and unit-norm right eigenvectors (as matrix columns).
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<C64>,
    pub vectors: DMatrix<C64>,
}

fn one_norm(m: &DMatrix<C64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Crude `‖A‖₁ ‖A⁻¹‖₁` estimate used only for diagnostics.
pub fn condition_estimate(m: &DMatrix<C64>) -> f64 {
    match m.clone().try_inverse() {
        Some(inv) => one_norm(m) * one_norm(&inv),
        None => f64::INFINITY,
    }
}

/// Francis iterations can stall on matrices with symmetric spectra; a
/// complex diagonal shift breaks the symmetry without changing eigenvectors.
/// Strongly clustered spectra (a monodromy close to a multiple of the
/// identity) can also stall at the tightest deflation tolerance, so the
/// tolerance is relaxed step by step before giving up.
fn shifted_schur(m: &DMatrix<C64>) -> Option<(DMatrix<C64>, DMatrix<C64>, C64)> {
    let n = m.nrows();
    let scale = one_norm(m).max(1.0);
    for factor in DEFLATION_LADDER {
        for shift in SHIFTS {
            let shift = shift * scale;
            let shifted = m + DMatrix::<C64>::identity(n, n) * shift;
            if let Some(schur) = Schur::try_new(shifted, factor * f64::EPSILON, MAX_SWEEPS_PER_DIM * n) {
                let (q, t) = schur.unpack();
                return Some((q, t, shift));
            }
        }
    }
    None
}

pub fn eigen_decompose(m: &DMatrix<C64>) -> Result<Eigen, EigenError> {
    let (rows, cols) = m.shape();
    if rows != cols {
        return Err(EigenError::NotSquare { rows, cols });
    }
    if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(EigenError::NonFinite);
    }
    let n = rows;
    if n == 0 {
        return Ok(Eigen {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let fail = || EigenError::NoConvergence {
        condition_estimate: condition_estimate(m),
    };
    let (q, mut t, shift) = shifted_schur(m).ok_or_else(fail)?;

    let scale = one_norm(&t).max(f64::MIN_POSITIVE);
    for j in 0..n {
        for i in j + 1..n {
            if t[(i, j)].norm() > 1e-10 * scale {
                return Err(fail());
            }
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }

    let values: Vec<C64> = (0..n).map(|i| t[(i, i)] - shift).collect();
    let smallest_pivot = f64::EPSILON * scale;
    let mut vectors = DMatrix::<C64>::zeros(n, n);
    let mut y = vec![C64::new(0.0, 0.0); n];
    for k in 0..n {
        let lambda = t[(k, k)];
        y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        y[k] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = C64::new(0.0, 0.0);
            for j in i + 1..=k {
                s += t[(i, j)] * y[j];
            }
            let mut pivot = t[(i, i)] - lambda;
            if pivot.norm() < smallest_pivot {
                pivot = C64::new(smallest_pivot, 0.0);
            }
            y[i] = -s / pivot;
            // keep the partial solution bounded
            let big = y[i..=k].iter().map(|z| z.norm()).fold(0.0, f64::max);
            if big > 1e100 {
                for v in &mut y[i..=k] {
                    *v /= big;
                }
            }
        }
        let mut col = vectors.column_mut(k);
        for r in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for j in 0..=k {
                s += q[(r, j)] * y[j];
            }
            col[r] = s;
        }
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(fail());
        }
        col.iter_mut().for_each(|z| *z /= norm);
    }
    Ok(Eigen { values, vectors })
}
