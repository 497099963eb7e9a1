//! Seeded random matrices and states.
//!
//! Haar unitaries come from Gram–Schmidt on complex Gaussian matrices;
//! random spectra are normalized exponential draws (flat Dirichlet).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::linalg::{vec_norm, CMatrix, PureState, TensorShape, C64};

pub type StdRng = ChaCha8Rng;

pub fn test_rng(seed: u64) -> StdRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let g = random_gaussian_matrix(rng, n, n);
    (&g + &g.adjoint()).scale_real(0.5)
}

/// Haar-distributed unitary: Gram–Schmidt columns of a Gaussian matrix.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let g = random_gaussian_matrix(rng, n, n);
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = g.column(j);
        for _ in 0..2 {
            for b in &cols {
                let ov: C64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                v.iter_mut().zip(b).for_each(|(vi, bi)| *vi -= ov * bi);
            }
        }
        let norm = vec_norm(&v);
        v.iter_mut().for_each(|z| *z /= norm);
        cols.push(v);
    }
    CMatrix::from_fn(n, n, |i, j| cols[j][i])
}

/// `rank` weights summing to one (normalized Exp(1) draws).
pub fn random_spectrum<R: Rng + ?Sized>(rng: &mut R, rank: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..rank).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Random density matrix of the given rank with a Haar eigenbasis.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> CMatrix {
    assert!(
        rank >= 1 && rank <= n,
        "rank {rank} out of range for dimension {n}"
    );
    let mut spectrum = random_spectrum(rng, rank);
    spectrum.resize(n, 0.0);
    let u = haar_unitary(rng, n);
    let d: Vec<C64> = spectrum.iter().map(|&x| C64::new(x, 0.0)).collect();
    u.scale_columns(&d).matmul(&u.adjoint()).hermitian_part()
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<C64> {
    let mut v: Vec<C64> = (0..n).map(|_| complex_gaussian(rng)).collect();
    let norm = vec_norm(&v);
    v.iter_mut().for_each(|z| *z /= norm);
    v
}

pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R, shape: TensorShape) -> PureState {
    let v = random_unit_vector(rng, shape.dim());
    PureState::normalized(v, shape).expect("nonzero Gaussian vector")
}
