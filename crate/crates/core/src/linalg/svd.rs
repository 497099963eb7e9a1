//! Singular value decomposition.
//!
//! Well-conditioned tall matrices use the eigendecomposition of `A†A` and
//! recover the left vectors as `A q / σ`. When `σ_min/σ_max` drops below
//! [`EIG_ROUTE_MIN_RATIO`] that route loses accuracy, so the decomposition
//! falls back to one-sided (Hestenes) Jacobi on the columns of `A`.

use super::eigen::{herm_eig, rotate_columns, Rotation, JACOBI_MAX_DIM, JACOBI_SWEEP_BUDGET};
use super::{CMatrix, C64};
use crate::error::{Error, Result};

/// The left vectors from `A q / σ` lose orthogonality like `ε·(σ_max/σ_min)²`,
/// so the Gram route is only trusted while that stays near 1e-12.
pub const EIG_ROUTE_MIN_RATIO: f64 = 1e-2;

/// Thin SVD `A = P diag(σ) Q†` with `σ` descending.
///
/// `P` is `m×k`, `Q` is `n×k`, `k = min(m, n)`. For square inputs both are
/// unitary, with left vectors of vanishing singular values completed to an
/// orthonormal basis.
#[derive(Clone, Debug)]
pub struct Svd {
    pub left: CMatrix,
    pub sigma: Vec<f64>,
    pub right: CMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> CMatrix {
        let d: Vec<C64> = self.sigma.iter().map(|&s| C64::new(s, 0.0)).collect();
        self.left.scale_columns(&d).matmul(&self.right.adjoint())
    }

    pub fn nuclear_norm(&self) -> f64 {
        self.sigma.iter().sum()
    }
}

pub fn svd(a: &CMatrix) -> Result<Svd> {
    let (m, n) = (a.rows(), a.cols());
    if m == 0 || n == 0 {
        return Ok(Svd {
            left: CMatrix::zeros(m, 0),
            sigma: vec![],
            right: CMatrix::zeros(n, 0),
        });
    }
    if !a.is_finite() {
        return Err(Error::ShapeMismatch(
            "svd input has non-finite entries".into(),
        ));
    }
    if m < n {
        let t = svd(&a.adjoint())?;
        return Ok(Svd {
            left: t.right,
            sigma: t.sigma,
            right: t.left,
        });
    }
    if n > JACOBI_MAX_DIM {
        return blocked(a);
    }
    if let Some(s) = via_gram(a)? {
        return Ok(s);
    }
    hestenes(a)
}

fn via_gram(a: &CMatrix) -> Result<Option<Svd>> {
    let n = a.cols();
    let gram = a.adjoint().matmul(a).hermitian_part();
    let eig = herm_eig(&gram)?;
    let top = eig.max_value();
    if top <= 0.0 {
        return Ok(None);
    }
    let sigma: Vec<f64> = eig
        .values
        .iter()
        .rev()
        .map(|&l| l.max(0.0).sqrt())
        .collect();
    if sigma[n - 1] < EIG_ROUTE_MIN_RATIO * sigma[0] {
        return Ok(None);
    }
    let right = CMatrix::from_fn(n, n, |i, k| eig.vectors[(i, n - 1 - k)]);
    let aq = a.matmul(&right);
    let inv: Vec<C64> = sigma.iter().map(|&s| C64::new(1.0 / s, 0.0)).collect();
    let mut left = aq.scale_columns(&inv);
    reorthonormalize(&mut left, n);
    Ok(Some(Svd { left, sigma, right }))
}

fn hestenes(a: &CMatrix) -> Result<Svd> {
    let (m, n) = (a.rows(), a.cols());
    let mut u = a.clone();
    let mut v = CMatrix::identity(n);
    let scale = a.frobenius_norm();
    if scale == 0.0 {
        return Ok(Svd {
            left: CMatrix::identity(m).column_block(n),
            sigma: vec![0.0; n],
            right: v,
        });
    }
    let floor = f64::EPSILON * scale;
    let mut converged = false;
    for _ in 0..JACOBI_SWEEP_BUDGET {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, C64::new(0.0, 0.0));
                for k in 0..m {
                    let up = u[(k, p)];
                    let uq = u[(k, q)];
                    alpha += up.norm_sqr();
                    beta += uq.norm_sqr();
                    gamma += up.conj() * uq;
                }
                let g = gamma.norm();
                if g <= f64::EPSILON * (alpha * beta).sqrt() || alpha.min(beta) <= floor * floor {
                    continue;
                }
                rotated = true;
                let rot = Rotation::annihilating(alpha, beta, gamma);
                rotate_columns(u.as_mut_slice(), m, n, p, q, rot);
                rotate_columns(v.as_mut_slice(), n, n, p, q, rot);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::ConvergenceFailure {
            routine: "hestenes",
            budget: JACOBI_SWEEP_BUDGET,
        });
    }
    let norms: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|k| u[(k, j)].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let right = CMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    let cutoff = f64::EPSILON * scale * (m.max(n) as f64);
    let valid = sigma.iter().take_while(|&&s| s > cutoff).count();
    let mut left = CMatrix::zeros(m, n);
    for k in 0..valid {
        let j = order[k];
        let inv = 1.0 / norms[j];
        let col: Vec<C64> = (0..m).map(|r| u[(r, j)] * inv).collect();
        left.set_column(k, &col);
    }
    reorthonormalize(&mut left, valid);
    Ok(Svd { left, sigma, right })
}

fn blocked(a: &CMatrix) -> Result<Svd> {
    let dec = a
        .to_faer()
        .thin_svd()
        .map_err(|_| Error::ConvergenceFailure {
            routine: "thin_svd",
            budget: 0,
        })?;
    let k = a.cols();
    let s = dec.S();
    let sigma_raw: Vec<f64> = (0..k).map(|i| s[i].re).collect();
    let left_raw = CMatrix::from_faer(&dec.U().to_owned());
    let right_raw = CMatrix::from_faer(&dec.V().to_owned());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| sigma_raw[j].total_cmp(&sigma_raw[i]));
    Ok(Svd {
        left: CMatrix::from_fn(a.rows(), k, |r, c| left_raw[(r, order[c])]),
        sigma: order.iter().map(|&i| sigma_raw[i]).collect(),
        right: CMatrix::from_fn(k, k, |r, c| right_raw[(r, order[c])]),
    })
}

/// Modified Gram–Schmidt (twice) on the first `valid` columns, then fills the
/// remaining columns with orthonormal vectors drawn from the standard basis.
pub(crate) fn reorthonormalize(cols: &mut CMatrix, valid: usize) {
    let m = cols.rows();
    let n = cols.cols();
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(n);
    for j in 0..valid {
        let mut v = cols.column(j);
        for _ in 0..2 {
            for b in &basis {
                project_out(&mut v, b);
            }
        }
        let norm = vec_norm(&v);
        if norm > 0.0 {
            v.iter_mut().for_each(|z| *z /= norm);
        }
        basis.push(v);
    }
    while basis.len() < n {
        // the standard vector with the largest residual is always >= 1/sqrt(m)
        let mut best: Option<(f64, Vec<C64>)> = None;
        for candidate in 0..m {
            let mut v = vec![C64::new(0.0, 0.0); m];
            v[candidate] = C64::new(1.0, 0.0);
            for _ in 0..2 {
                for b in &basis {
                    project_out(&mut v, b);
                }
            }
            let norm = vec_norm(&v);
            if best.as_ref().map_or(true, |(bn, _)| norm > *bn) {
                best = Some((norm, v));
            }
        }
        let Some((norm, mut v)) = best else { break };
        v.iter_mut().for_each(|z| *z /= norm);
        basis.push(v);
    }
    for (j, b) in basis.iter().enumerate() {
        cols.set_column(j, b);
    }
}

fn project_out(v: &mut [C64], b: &[C64]) {
    let overlap: C64 = b.iter().zip(v.iter()).map(|(x, y)| x.conj() * y).sum();
    for (vi, bi) in v.iter_mut().zip(b) {
        *vi -= overlap * bi;
    }
}

fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

impl CMatrix {
    /// First `k` columns.
    pub fn column_block(&self, k: usize) -> CMatrix {
        CMatrix::from_fn(self.rows(), k, |i, j| self[(i, j)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{haar_unitary, random_gaussian_matrix, test_rng};

    fn check(a: &CMatrix, s: &Svd) {
        let scale = s.sigma.first().copied().unwrap_or(0.0).max(1.0);
        let res = (&s.reconstruct() - a).frobenius_norm();
        assert!(res <= 1e-10 * scale, "reconstruction {res}");
        assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
        assert!(s.sigma.iter().all(|&x| x >= 0.0));
        let k = s.sigma.len();
        let pl = (&s.left.adjoint().matmul(&s.left) - &CMatrix::identity(k)).frobenius_norm();
        let pr = (&s.right.adjoint().matmul(&s.right) - &CMatrix::identity(k)).frobenius_norm();
        assert!(pl < 1e-10 && pr < 1e-10, "isometry {pl} {pr}");
    }

    #[test]
    fn zero_matrix() {
        let a = CMatrix::zeros(3, 3);
        let s = svd(&a).unwrap();
        assert!(s.sigma.iter().all(|&x| x == 0.0));
        check(&a, &s);
    }

    #[test]
    fn unitary_has_unit_singular_values() {
        let mut rng = test_rng(1);
        let u = haar_unitary(&mut rng, 5);
        let s = svd(&u).unwrap();
        assert!(s.sigma.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        check(&u, &s);
    }

    #[test]
    fn random_6x6() {
        let mut rng = test_rng(6);
        let a = random_gaussian_matrix(&mut rng, 6, 6);
        check(&a, &svd(&a).unwrap());
    }

    #[test]
    fn rank_deficient_uses_hestenes_and_completes_basis() {
        let mut rng = test_rng(2);
        let x = random_gaussian_matrix(&mut rng, 6, 2);
        let y = random_gaussian_matrix(&mut rng, 2, 6);
        let a = x.matmul(&y);
        let s = svd(&a).unwrap();
        assert!(s.sigma[2] < 1e-12);
        check(&a, &s);
    }

    #[test]
    fn ill_conditioned_reconstruction() {
        let mut rng = test_rng(4);
        let u = haar_unitary(&mut rng, 7);
        let v = haar_unitary(&mut rng, 7);
        let d: Vec<C64> = [1.0, 0.5, 1e-3, 1e-6, 1e-9, 1e-12, 1e-14]
            .iter()
            .map(|&x| C64::new(x, 0.0))
            .collect();
        let a = u.scale_columns(&d).matmul(&v.adjoint());
        let s = svd(&a).unwrap();
        check(&a, &s);
        assert!((s.sigma[4] - 1e-9).abs() < 1e-13);
    }

    #[test]
    fn rectangular_both_ways() {
        let mut rng = test_rng(5);
        let a = random_gaussian_matrix(&mut rng, 7, 3);
        check(&a, &svd(&a).unwrap());
        let b = random_gaussian_matrix(&mut rng, 3, 7);
        check(&b, &svd(&b).unwrap());
    }
}
