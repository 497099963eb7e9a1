//! Hermitian eigendecomposition.
//!
//! Matrices up to [`JACOBI_MAX_DIM`] are diagonalized by cyclic complex
//! Jacobi sweeps. Every matrix the physics pipeline builds lives below that
//! bound; larger inputs go through faer's tridiagonal solver.

use faer::Side;

use super::{CMatrix, C64};
use crate::error::{Error, Result};

/// Largest dimension handled by the Jacobi kernel.
pub const JACOBI_MAX_DIM: usize = 128;

/// Sweep budget for the cyclic Jacobi iteration.
pub const JACOBI_SWEEP_BUDGET: usize = 100;

/// Absolute Hermiticity tolerance accepted by [`herm_eig`].
pub const HERMITIAN_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct HermEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: CMatrix,
}

impl HermEigen {
    /// U f(Λ) U†.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let d: Vec<C64> = self.values.iter().map(|&l| f(l)).collect();
        self.vectors
            .scale_columns(&d)
            .matmul(&self.vectors.adjoint())
    }

    pub fn min_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Eigendecomposition `A = U diag(λ) U†` of a Hermitian matrix, eigenvalues
/// ascending.
pub fn herm_eig(a: &CMatrix) -> Result<HermEigen> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "herm_eig needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let defect = a.hermiticity_defect();
    if !(defect <= HERMITIAN_TOL) {
        return Err(Error::NonHermitianInput { defect });
    }
    let n = a.rows();
    if n == 0 {
        return Ok(HermEigen {
            values: vec![],
            vectors: CMatrix::zeros(0, 0),
        });
    }
    let mut eig = if n <= JACOBI_MAX_DIM {
        jacobi(&a.hermitian_part())?
    } else {
        blocked(&a.hermitian_part())?
    };
    sort_ascending(&mut eig);
    Ok(eig)
}

fn sort_ascending(eig: &mut HermEigen) {
    let n = eig.values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.values[i].total_cmp(&eig.values[j]));
    if order.iter().enumerate().all(|(k, &i)| k == i) {
        return;
    }
    let values = order.iter().map(|&i| eig.values[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, k| eig.vectors[(r, order[k])]);
    eig.values = values;
    eig.vectors = vectors;
}

/// 2×2 unitary `[[c, s], [-s e^{-iφ}, c e^{-iφ}]]` that diagonalizes the
/// Hermitian block `[[app, apq], [conj(apq), aqq]]` under `G† B G`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Rotation {
    pub gpp: C64,
    pub gpq: C64,
    pub gqp: C64,
    pub gqq: C64,
}

impl Rotation {
    pub(crate) fn annihilating(app: f64, aqq: f64, apq: C64) -> Rotation {
        let r = apq.norm();
        let phase = apq / r;
        let theta = (aqq - app) / (2.0 * r);
        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
        let c = 1.0 / (t * t + 1.0).sqrt();
        let s = t * c;
        let e = phase.conj();
        Rotation {
            gpp: C64::new(c, 0.0),
            gpq: C64::new(s, 0.0),
            gqp: e * (-s),
            gqq: e * c,
        }
    }
}

/// Applies `A ← A G` on columns p, q of a row-major buffer.
pub(crate) fn rotate_columns(
    data: &mut [C64],
    rows: usize,
    cols: usize,
    p: usize,
    q: usize,
    g: Rotation,
) {
    for k in 0..rows {
        let akp = data[k * cols + p];
        let akq = data[k * cols + q];
        data[k * cols + p] = akp * g.gpp + akq * g.gqp;
        data[k * cols + q] = akp * g.gpq + akq * g.gqq;
    }
}

fn jacobi(a: &CMatrix) -> Result<HermEigen> {
    let n = a.rows();
    let mut m = a.clone();
    let mut v = CMatrix::identity(n);
    let frob = m.frobenius_norm();
    if frob == 0.0 {
        return Ok(HermEigen {
            values: vec![0.0; n],
            vectors: v,
        });
    }
    let floor = 0.25 * f64::EPSILON * frob;

    for _sweep in 0..JACOBI_SWEEP_BUDGET {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                if r <= floor || r <= 0.5 * f64::EPSILON * (app.abs() * aqq.abs()).sqrt() {
                    m[(p, q)] = C64::new(0.0, 0.0);
                    m[(q, p)] = C64::new(0.0, 0.0);
                    continue;
                }
                rotated = true;
                let g = Rotation::annihilating(app, aqq, apq);
                rotate_columns(m.as_mut_slice(), n, n, p, q, g);
                // rows: A ← G† A
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = g.gpp.conj() * apk + g.gqp.conj() * aqk;
                    m[(q, k)] = g.gpq.conj() * apk + g.gqq.conj() * aqk;
                }
                m[(p, q)] = C64::new(0.0, 0.0);
                m[(q, p)] = C64::new(0.0, 0.0);
                m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
                rotate_columns(v.as_mut_slice(), n, n, p, q, g);
            }
        }
        if !rotated {
            return Ok(HermEigen {
                values: (0..n).map(|i| m[(i, i)].re).collect(),
                vectors: v,
            });
        }
    }
    Err(Error::ConvergenceFailure {
        routine: "jacobi",
        budget: JACOBI_SWEEP_BUDGET,
    })
}

fn blocked(a: &CMatrix) -> Result<HermEigen> {
    let evd =
        a.to_faer()
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| Error::ConvergenceFailure {
                routine: "self_adjoint_eigen",
                budget: 0,
            })?;
    let s = evd.S();
    let values = (0..a.rows()).map(|i| s[i].re).collect();
    Ok(HermEigen {
        values,
        vectors: CMatrix::from_faer(&evd.U().to_owned()),
    })
}
