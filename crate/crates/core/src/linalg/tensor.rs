//! Tensor-product bookkeeping.
//!
//! A composite index is flattened big-endian: `i = Σ_j i_j · Π_{j'>j} d_{j'}`,
//! so the first factor varies slowest. Every routine here uses that one
//! convention.

use super::{CMatrix, C64};
use crate::error::{Error, Result};

/// Normalization tolerance for [`PureState`].
pub const NORM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TensorShape {
    factors: Vec<usize>,
}

impl TensorShape {
    pub fn new(factors: Vec<usize>) -> Result<Self> {
        if factors.is_empty() || factors.iter().any(|&d| d == 0) {
            return Err(Error::ShapeMismatch(format!(
                "tensor factors must be positive and nonempty, got {factors:?}"
            )));
        }
        Ok(Self { factors })
    }

    pub fn single(dim: usize) -> Self {
        Self { factors: vec![dim] }
    }

    /// `count` copies of a `dim`-dimensional factor.
    pub fn uniform(dim: usize, count: usize) -> Self {
        Self {
            factors: vec![dim; count],
        }
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().product()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.factors.len()];
        for j in (0..self.factors.len().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * self.factors[j + 1];
        }
        strides
    }

    pub fn subshape(&self, subset: &[usize]) -> TensorShape {
        TensorShape {
            factors: subset.iter().map(|&j| self.factors[j]).collect(),
        }
    }

    pub fn concat(&self, other: &TensorShape) -> TensorShape {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        TensorShape { factors }
    }

    /// Ambient offsets of every multi-index over `subset`, enumerated
    /// big-endian in the order the subset lists its factors.
    pub fn offsets(&self, subset: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let mut out = vec![0usize];
        for &j in subset {
            let mut next = Vec::with_capacity(out.len() * self.factors[j]);
            for &base in &out {
                for i in 0..self.factors[j] {
                    next.push(base + i * strides[j]);
                }
            }
            out = next;
        }
        out
    }

    fn validate_subset(&self, subset: &[usize]) -> Result<()> {
        for &j in subset {
            if j >= self.factors.len() {
                return Err(Error::BadFactorIndex {
                    index: j,
                    factors: self.factors.len(),
                });
            }
        }
        let mut seen = subset.to_vec();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != subset.len() {
            return Err(Error::ShapeMismatch(format!(
                "repeated factor in {subset:?}"
            )));
        }
        Ok(())
    }

    /// Factors not in `subset`, ascending.
    pub fn complement(&self, subset: &[usize]) -> Vec<usize> {
        (0..self.factors.len())
            .filter(|j| !subset.contains(j))
            .collect()
    }
}

/// Normalized state vector with a tensor shape.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: Vec<C64>,
    shape: TensorShape,
}

impl PureState {
    /// Checks dimension and unit norm.
    pub fn new(amplitudes: Vec<C64>, shape: TensorShape) -> Result<Self> {
        if amplitudes.len() != shape.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} amplitudes for shape {:?}",
                amplitudes.len(),
                shape.factors()
            )));
        }
        let norm = vec_norm(&amplitudes);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::ShapeMismatch(format!("state norm {norm} is not 1")));
        }
        Ok(Self { amplitudes, shape })
    }

    /// Rescales to unit norm.
    pub fn normalized(mut amplitudes: Vec<C64>, shape: TensorShape) -> Result<Self> {
        let norm = vec_norm(&amplitudes);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ShapeMismatch(
                "cannot normalize a zero vector".into(),
            ));
        }
        amplitudes.iter_mut().for_each(|z| *z /= norm);
        Self::new(amplitudes, shape)
    }

    pub fn basis(shape: TensorShape, index: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); shape.dim()];
        amplitudes[index] = C64::new(1.0, 0.0);
        Self { amplitudes, shape }
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn shape(&self) -> &TensorShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        vec_norm(&self.amplitudes)
    }

    /// ⟨self, other⟩, antilinear in `self`.
    pub fn inner(&self, other: &PureState) -> C64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        PureState {
            amplitudes: kron_vec(&self.amplitudes, &other.amplitudes),
            shape: self.shape.concat(&other.shape),
        }
    }

    /// `self ⊗ self ⊗ … ⊗ self` (`n` copies).
    pub fn tensor_power(&self, n: usize) -> PureState {
        let mut out = self.clone();
        for _ in 1..n {
            out = out.tensor(self);
        }
        out
    }

    /// Reinterprets the amplitudes under a different factorization of the same
    /// dimension.
    pub fn reshaped(&self, shape: TensorShape) -> Result<PureState> {
        if shape.dim() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "cannot reshape {:?} into {:?}",
                self.shape.factors(),
                shape.factors()
            )));
        }
        Ok(PureState {
            amplitudes: self.amplitudes.clone(),
            shape,
        })
    }

    /// |ψ⟩⟨ψ|.
    pub fn projector(&self) -> CMatrix {
        CMatrix::outer(&self.amplitudes, &self.amplitudes)
    }

    /// Applies `op` to the listed factors (in the listed order); identity on
    /// the rest. Does not renormalize.
    pub fn apply_on_factors(&self, op: &CMatrix, factors: &[usize]) -> Result<PureState> {
        Ok(PureState {
            amplitudes: apply_on_factors(&self.amplitudes, &self.shape, op, factors)?,
            shape: self.shape.clone(),
        })
    }

    /// Reduced density matrix on `keep` (ascending factor order).
    pub fn reduced(&self, keep: &[usize]) -> Result<CMatrix> {
        reduced_from_pure(&self.amplitudes, &self.shape, keep)
    }

    pub(crate) fn from_parts_unchecked(amplitudes: Vec<C64>, shape: TensorShape) -> PureState {
        PureState { amplitudes, shape }
    }
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// ⟨u, v⟩ = Σ conj(u_i) v_i.
pub fn inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn kron_vec(u: &[C64], v: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(u.len() * v.len());
    for a in u {
        for b in v {
            out.push(a * b);
        }
    }
    out
}

/// Kronecker product: `(A⊗B)[(i,k),(j,l)] = A[i,j]·B[k,l]`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (br, bc) = (b.rows(), b.cols());
    CMatrix::from_fn(a.rows() * br, a.cols() * bc, |r, c| {
        a[(r / br, c / bc)] * b[(r % br, c % bc)]
    })
}

/// `A^{⊗n}`.
pub fn kron_power(a: &CMatrix, n: usize) -> CMatrix {
    let mut out = a.clone();
    for _ in 1..n {
        out = kron(&out, a);
    }
    out
}

fn sorted_keep(shape: &TensorShape, keep: &[usize]) -> Result<Vec<usize>> {
    if keep.is_empty() {
        return Err(Error::ShapeMismatch(
            "partial trace must keep at least one factor".into(),
        ));
    }
    shape.validate_subset(keep)?;
    let mut k = keep.to_vec();
    k.sort_unstable();
    Ok(k)
}

/// Partial trace of a square matrix over every factor not in `keep`.
pub fn partial_trace_matrix(m: &CMatrix, shape: &TensorShape, keep: &[usize]) -> Result<CMatrix> {
    if !m.is_square() || m.rows() != shape.dim() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} matrix with shape {:?}",
            m.rows(),
            m.cols(),
            shape.factors()
        )));
    }
    let keep = sorted_keep(shape, keep)?;
    let traced = shape.complement(&keep);
    let bk = shape.offsets(&keep);
    let bt = shape.offsets(&traced);
    Ok(CMatrix::from_fn(bk.len(), bk.len(), |i, j| {
        bt.iter().map(|&t| m[(bk[i] + t, bk[j] + t)]).sum()
    }))
}

/// `tr_{traced} |ψ⟩⟨ψ|` computed as `M M†` with `M[k, t] = ψ[k ⊕ t]`.
pub fn reduced_from_pure(psi: &[C64], shape: &TensorShape, keep: &[usize]) -> Result<CMatrix> {
    if psi.len() != shape.dim() {
        return Err(Error::ShapeMismatch(
            "state length does not match shape".into(),
        ));
    }
    let keep = sorted_keep(shape, keep)?;
    let traced = shape.complement(&keep);
    let m = split_matrix(psi, shape, &keep, &traced);
    Ok(m.matmul(&m.adjoint()))
}

/// Arranges a vector as a matrix with rows indexed by `row_factors` and
/// columns by `col_factors`.
pub fn split_matrix(
    psi: &[C64],
    shape: &TensorShape,
    row_factors: &[usize],
    col_factors: &[usize],
) -> CMatrix {
    let br = shape.offsets(row_factors);
    let bc = shape.offsets(col_factors);
    CMatrix::from_fn(br.len(), bc.len(), |i, j| psi[br[i] + bc[j]])
}

/// Inverse of [`split_matrix`].
pub fn merge_matrix(
    m: &CMatrix,
    shape: &TensorShape,
    row_factors: &[usize],
    col_factors: &[usize],
) -> Vec<C64> {
    let br = shape.offsets(row_factors);
    let bc = shape.offsets(col_factors);
    let mut psi = vec![C64::new(0.0, 0.0); shape.dim()];
    for (i, &r) in br.iter().enumerate() {
        for (j, &c) in bc.iter().enumerate() {
            psi[r + c] = m[(i, j)];
        }
    }
    psi
}

pub fn apply_on_factors(
    psi: &[C64],
    shape: &TensorShape,
    op: &CMatrix,
    factors: &[usize],
) -> Result<Vec<C64>> {
    shape.validate_subset(factors)?;
    let sub = shape.subshape(factors).dim();
    if op.rows() != sub || op.cols() != sub {
        return Err(Error::ShapeMismatch(format!(
            "operator {}x{} on factors {:?} of {:?}",
            op.rows(),
            op.cols(),
            factors,
            shape.factors()
        )));
    }
    if psi.len() != shape.dim() {
        return Err(Error::ShapeMismatch(
            "state length does not match shape".into(),
        ));
    }
    let rest = shape.complement(factors);
    let m = split_matrix(psi, shape, factors, &rest);
    Ok(merge_matrix(&op.matmul(&m), shape, factors, &rest))
}

/// A permutation of `0..n` stored as images: `perm[i] = π(i)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; images.len()];
        for &i in &images {
            if i >= images.len() || seen[i] {
                return Err(Error::ShapeMismatch(format!(
                    "{images:?} is not a permutation"
                )));
            }
            seen[i] = true;
        }
        Ok(Self(images))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    /// Swap of `i` and `j`.
    pub fn transposition(n: usize, i: usize, j: usize) -> Self {
        let mut p: Vec<usize> = (0..n).collect();
        p.swap(i, j);
        Self(p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        Permutation(other.0.iter().map(|&i| self.0[i]).collect())
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.0.len()];
        for (i, &p) in self.0.iter().enumerate() {
            inv[p] = i;
        }
        Permutation(inv)
    }

    /// All `n!` permutations in lexicographic order.
    pub fn all(n: usize) -> Vec<Permutation> {
        let mut out = Vec::new();
        let mut current: Vec<usize> = (0..n).collect();
        loop {
            out.push(Permutation(current.clone()));
            // next lexicographic permutation
            let Some(i) = (0..n.saturating_sub(1))
                .rev()
                .find(|&i| current[i] < current[i + 1])
            else {
                break;
            };
            let j = (i + 1..n).rev().find(|&j| current[j] > current[i]).unwrap();
            current.swap(i, j);
            current[i + 1..].reverse();
        }
        out
    }
}

/// `(U_π ψ)(x_1,…,x_N) = ψ(x_{π⁻¹(1)},…,x_{π⁻¹(N)})` for `N` slots of local
/// dimension `d`: the content of slot `i` moves to slot `π(i)`.
pub fn permute_slots(psi: &[C64], d: usize, perm: &Permutation) -> Vec<C64> {
    let n = perm.len();
    debug_assert_eq!(psi.len(), d.pow(n as u32));
    let shape = TensorShape::uniform(d, n);
    let strides = shape.strides();
    // out offset of input slot i is stride of slot π(i)
    let moved: Vec<usize> = (0..n).map(|i| strides[perm.images()[i]]).collect();
    let mut out = vec![C64::new(0.0, 0.0); psi.len()];
    let mut digits = vec![0usize; n];
    for (idx, &amp) in psi.iter().enumerate() {
        let mut rem = idx;
        for slot in (0..n).rev() {
            digits[slot] = rem % d;
            rem /= d;
        }
        let target: usize = digits.iter().zip(&moved).map(|(x, s)| x * s).sum();
        out[target] = amp;
    }
    out
}

/// Maximum dimension for which [`permutation_operator`] materializes a dense
/// matrix.
pub const PERMUTATION_DIM_BUDGET: usize = 4096;

/// Dense 0/1 unitary `U_π` on `(C^d)^{⊗N}`.
pub fn permutation_operator(perm: &Permutation, d: usize) -> Result<CMatrix> {
    let dim = d
        .checked_pow(perm.len() as u32)
        .filter(|&x| x <= PERMUTATION_DIM_BUDGET)
        .ok_or(Error::SizeBudgetExceeded {
            dim: d.saturating_pow(perm.len() as u32),
            budget: PERMUTATION_DIM_BUDGET,
        })?;
    let mut u = CMatrix::zeros(dim, dim);
    let mut e = vec![C64::new(0.0, 0.0); dim];
    for col in 0..dim {
        e[col] = C64::new(1.0, 0.0);
        let img = permute_slots(&e, d, perm);
        let row = img.iter().position(|z| z.re == 1.0).unwrap();
        u[(row, col)] = C64::new(1.0, 0.0);
        e[col] = C64::new(0.0, 0.0);
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_density, random_gaussian_matrix, test_rng};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn kron_with_scalar_identity() {
        let mut rng = test_rng(1);
        let a = random_gaussian_matrix(&mut rng, 3, 2);
        assert_eq!(kron(&a, &CMatrix::identity(1)), a);
    }

    #[test]
    fn kron_of_diagonals() {
        let k = kron(
            &CMatrix::from_real_diag(&[2.0, 3.0]),
            &CMatrix::from_real_diag(&[5.0, 7.0]),
        );
        assert_eq!(k, CMatrix::from_real_diag(&[10.0, 14.0, 15.0, 21.0]));
    }

    #[test]
    fn kron_matches_index_formula() {
        let mut rng = test_rng(2);
        let a = random_gaussian_matrix(&mut rng, 2, 2);
        let b = random_gaussian_matrix(&mut rng, 3, 3);
        let k = kron(&a, &b);
        for i in 0..2 {
            for kk in 0..3 {
                for j in 0..2 {
                    for l in 0..3 {
                        assert_eq!(k[(i * 3 + kk, j * 3 + l)], a[(i, j)] * b[(kk, l)]);
                    }
                }
            }
        }
    }

    #[test]
    fn partial_trace_of_product() {
        let mut rng = test_rng(3);
        let s = random_density(&mut rng, 2, 2);
        let t = random_density(&mut rng, 3, 3);
        let rho = kron(&s, &t);
        let shape = TensorShape::new(vec![2, 3]).unwrap();
        let r = partial_trace_matrix(&rho, &shape, &[0]).unwrap();
        assert!((&r - &s).max_abs() < 1e-15);
        let r = partial_trace_matrix(&rho, &shape, &[1]).unwrap();
        assert!((&r - &t).max_abs() < 1e-15);
    }

    #[test]
    fn bell_state_marginal_is_maximally_mixed() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let psi = vec![c(h), c(0.0), c(0.0), c(h)];
        let shape = TensorShape::uniform(2, 2);
        let r = reduced_from_pure(&psi, &shape, &[0]).unwrap();
        assert!((&r - &CMatrix::identity(2).scale_real(0.5)).max_abs() < 1e-15);
    }

    fn paulis() -> Vec<CMatrix> {
        let i = C64::new(0.0, 1.0);
        vec![
            CMatrix::identity(2),
            CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]),
            CMatrix::from_vec(2, 2, vec![c(0.0), -i, i, c(0.0)]),
            CMatrix::from_real_diag(&[1.0, -1.0]),
        ]
    }

    #[test]
    fn partial_trace_defining_property_on_pauli_products() {
        let mut rng = test_rng(4);
        let rho = random_density(&mut rng, 8, 8);
        let shape = TensorShape::uniform(2, 3);
        let r = partial_trace_matrix(&rho, &shape, &[0, 2]).unwrap();
        let id = CMatrix::identity(2);
        for p in paulis() {
            for q in paulis() {
                let b = kron(&p, &q);
                let lhs = b.matmul(&r).trace();
                // B acts on factors 0 and 2, identity on factor 1
                let full = kron(&kron(&p, &id), &q);
                let rhs = full.matmul(&rho).trace();
                assert!((lhs - rhs).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn partial_trace_composes() {
        let mut rng = test_rng(5);
        let rho = random_density(&mut rng, 12, 12);
        let shape = TensorShape::new(vec![2, 3, 2]).unwrap();
        let step = partial_trace_matrix(&rho, &shape, &[0, 2]).unwrap();
        let step =
            partial_trace_matrix(&step, &TensorShape::new(vec![2, 2]).unwrap(), &[0]).unwrap();
        let once = partial_trace_matrix(&rho, &shape, &[0]).unwrap();
        assert!((&step - &once).max_abs() < 1e-12);
    }

    #[test]
    fn partial_trace_rejects_bad_factor() {
        let shape = TensorShape::uniform(2, 2);
        let rho = CMatrix::identity(4);
        assert!(matches!(
            partial_trace_matrix(&rho, &shape, &[2]),
            Err(Error::BadFactorIndex { index: 2, .. })
        ));
        assert!(partial_trace_matrix(&rho, &shape, &[]).is_err());
    }

    #[test]
    fn swap_moves_slots() {
        let swap = Permutation::transposition(2, 0, 1);
        let u = permutation_operator(&swap, 2).unwrap();
        // e0 ⊗ e1 is index 1, e1 ⊗ e0 is index 2
        let mut e01 = vec![c(0.0); 4];
        e01[1] = c(1.0);
        let out = u.matvec(&e01);
        assert_eq!(out[2], c(1.0));
        assert_eq!(
            permutation_operator(&Permutation::identity(3), 2).unwrap(),
            CMatrix::identity(8)
        );
    }

    #[test]
    fn permutation_group_law() {
        let a = Permutation::transposition(3, 0, 1);
        let b = Permutation::transposition(3, 1, 2);
        let ua = permutation_operator(&a, 2).unwrap();
        let ub = permutation_operator(&b, 2).unwrap();
        let uab = permutation_operator(&a.compose(&b), 2).unwrap();
        assert_eq!(ua.matmul(&ub), uab);
        for p in Permutation::all(3) {
            let u = permutation_operator(&p, 3).unwrap();
            let uu = u.adjoint().matmul(&u);
            assert_eq!(uu, CMatrix::identity(27));
        }
    }

    #[test]
    fn permute_slots_is_tensor_relabeling() {
        // U_π (u1 ⊗ u2 ⊗ u3) = u_{π⁻¹(1)} ⊗ u_{π⁻¹(2)} ⊗ u_{π⁻¹(3)}
        let mut rng = test_rng(7);
        let us: Vec<Vec<C64>> = (0..3)
            .map(|_| random_gaussian_matrix(&mut rng, 2, 1).column(0))
            .collect();
        let p = Permutation::new(vec![1, 2, 0]).unwrap();
        let psi = kron_vec(&kron_vec(&us[0], &us[1]), &us[2]);
        let inv = p.inverse();
        let expected = kron_vec(
            &kron_vec(&us[inv.images()[0]], &us[inv.images()[1]]),
            &us[inv.images()[2]],
        );
        let got = permute_slots(&psi, 2, &p);
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-15);
        }
        assert_eq!(Permutation::all(4).len(), 24);
    }

    #[test]
    fn apply_on_factors_matches_kron() {
        let mut rng = test_rng(8);
        let op = random_gaussian_matrix(&mut rng, 3, 3);
        let psi = random_gaussian_matrix(&mut rng, 12, 1).column(0);
        let shape = TensorShape::new(vec![2, 3, 2]).unwrap();
        let got = apply_on_factors(&psi, &shape, &op, &[1]).unwrap();
        let full = kron(&kron(&CMatrix::identity(2), &op), &CMatrix::identity(2));
        let want = full.matvec(&psi);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
