//! Purifications and the counting functional.
//!
//! Lifted N-body states live on `(C^L ⊗ C^a)^{⊗N}` with factor list
//! `[L, a, L, a, …]`, so particle `j` owns factors `2j` (position) and
//! `2j + 1` (auxiliary). Because the flattening is big-endian, the same
//! amplitudes read as `N` slots of dimension `L·a`, which is how the
//! projectors `p_j = |Φ⟩⟨Φ|_j` are applied.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    herm_eig, inner, kron_power, matrix_sqrt_psd, merge_matrix, permute_slots, reduced_from_pure,
    split_matrix, svd, vec_norm, CMatrix, DensityMatrix, Permutation, PureState, TensorShape, C64,
};
use crate::metrics::{fidelity, trace_norm_of_difference};
use crate::random::random_gaussian_matrix;

/// Eigenvalues at or below this are dropped from a one-body purification.
pub const PURIFICATION_CUTOFF: f64 = 1e-14;

/// Singular values of `√Γ √γ^{⊗N}` below this fraction of the largest are
/// treated as kernel.
pub const KERNEL_RELATIVE_TOL: f64 = 1e-10;

pub const PERMUTATION_INVARIANCE_TOL: f64 = 1e-10;
pub const SYMMETRY_TOL: f64 = 1e-8;
pub const MARGINAL_TOL: f64 = 1e-9;

/// Seed for the generic intertwiner used in the kernel completion.
const KERNEL_COMPLETION_SEED: u64 = 0x5eed_c0de;

/// Eigen-purification `Φ = Σ_m √λ_m u_m ⊗ e_m` over eigenpairs with
/// `λ_m > PURIFICATION_CUTOFF`; the auxiliary dimension is the rank.
pub fn purify_one_body(gamma: &DensityMatrix) -> Result<PureState> {
    let eig = herm_eig(gamma.matrix())?;
    if eig.min_value() < -crate::linalg::PSD_CLAMP {
        return Err(Error::NotPsd {
            min_eigenvalue: eig.min_value(),
        });
    }
    let l = gamma.dim();
    let kept: Vec<usize> = (0..l)
        .rev()
        .filter(|&k| eig.values[k] > PURIFICATION_CUTOFF)
        .collect();
    let a = kept.len();
    let mut amps = vec![C64::new(0.0, 0.0); l * a];
    for (m, &k) in kept.iter().enumerate() {
        let w = eig.values[k].sqrt();
        for x in 0..l {
            amps[x * a + m] = eig.vectors[(x, k)] * w;
        }
    }
    PureState::normalized(amps, TensorShape::new(vec![l, a])?)
}

/// Hilbert–Schmidt vectorization `|√γ⟩⟩`, shape `(L, L)`:
/// `Φ(x, y) = (√γ)[x, y]`.
pub fn vectorized_sqrt(gamma: &DensityMatrix) -> Result<PureState> {
    let l = gamma.dim();
    let root = matrix_sqrt_psd(gamma.matrix())?;
    PureState::normalized(root.into_vec(), TensorShape::new(vec![l, l])?)
}

/// Shape `[L, a, L, a, …]` of a lifted N-body state.
pub fn lifted_shape(sites: usize, aux_dim: usize, n: usize) -> TensorShape {
    let mut f = Vec::with_capacity(2 * n);
    for _ in 0..n {
        f.push(sites);
        f.push(aux_dim);
    }
    TensorShape::new(f).expect("positive dimensions")
}

pub fn physical_factors(n: usize) -> Vec<usize> {
    (0..n).map(|j| 2 * j).collect()
}

pub fn auxiliary_factors(n: usize) -> Vec<usize> {
    (0..n).map(|j| 2 * j + 1).collect()
}

/// Index map of `U_π` on `(C^d)^{⊗N}`: basis vector `i` goes to `map[i]`.
pub(crate) fn permutation_index_map(d: usize, perm: &Permutation) -> Vec<usize> {
    let n = perm.len();
    let dim = d.pow(n as u32);
    let mut map = vec![0; dim];
    let mut strides = vec![1usize; n];
    for j in (0..n.saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * d;
    }
    for (idx, slot) in map.iter_mut().enumerate() {
        let mut rem = idx;
        let mut target = 0;
        for j in (0..n).rev() {
            target += (rem % d) * strides[perm.images()[j]];
            rem /= d;
        }
        *slot = target;
    }
    map
}

/// `U_π A U_π†`.
pub(crate) fn conjugate_by_permutation(a: &CMatrix, map: &[usize]) -> CMatrix {
    let mut out = CMatrix::zeros(a.rows(), a.cols());
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            out[(map[i], map[j])] = a[(i, j)];
        }
    }
    out
}

/// Group average `(1/N!) Σ_π U_π A U_π†` on `(C^d)^{⊗N}`.
pub fn symmetrize(a: &CMatrix, d: usize, n: usize) -> CMatrix {
    let perms = Permutation::all(n);
    let mut acc = CMatrix::zeros(a.rows(), a.cols());
    for p in &perms {
        acc = &acc + &conjugate_by_permutation(a, &permutation_index_map(d, p));
    }
    acc.scale_real(1.0 / perms.len() as f64)
}

/// `max_π max_{ij} |(U_π A U_π† − A)_{ij}|`.
pub fn permutation_defect(a: &CMatrix, d: usize, n: usize) -> f64 {
    Permutation::all(n)
        .iter()
        .map(|p| {
            let map = permutation_index_map(d, p);
            (&conjugate_by_permutation(a, &map) - a).max_abs()
        })
        .fold(0.0, f64::max)
}

/// `max_π ‖Ũ_π Ψ − Ψ‖₂` with slots of dimension `slot_dim`.
pub fn symmetry_defect(psi: &PureState, slot_dim: usize, n: usize) -> f64 {
    Permutation::all(n)
        .iter()
        .map(|p| {
            let moved = permute_slots(psi.amplitudes(), slot_dim, p);
            moved
                .iter()
                .zip(psi.amplitudes())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Symmetric N-body purification together with the matching one-body
/// purification.
#[derive(Clone, Debug)]
pub struct PurifiedPair {
    pub psi_tilde: PureState,
    pub phi: PureState,
    pub aux_dim: usize,
    pub n: usize,
    pub symmetry_defect: f64,
    pub marginal_defect: f64,
    pub overlap_sq: f64,
    /// Dimension of `ker(√Γ √γ^{⊗N})` that had to be completed.
    pub kernel_dim: usize,
}

impl PurifiedPair {
    pub fn sites(&self) -> usize {
        self.phi.shape().factors()[0]
    }

    /// `Err(DegenerateKernelCompletion)` when the completion missed the
    /// symmetry tolerance.
    pub fn require_symmetric(&self) -> Result<()> {
        if self.symmetry_defect > SYMMETRY_TOL {
            return Err(Error::DegenerateKernelCompletion {
                defect: self.symmetry_defect,
            });
        }
        Ok(())
    }
}

/// Builds `Ψ̃ = |√Γ V⟩⟩` with `V` the polar unitary of `A = √Γ √γ^{⊗N}`
/// completed on `ker A` by an S_N-equivariant isometry, and `Φ = |√γ⟩⟩`.
///
/// The auxiliary space is a copy of `C^L` per particle. A symmetry defect
/// above [`SYMMETRY_TOL`] is recorded on the pair, not raised; callers that
/// need the guarantee use [`PurifiedPair::require_symmetric`].
pub fn purify_n_body(gamma_n: &DensityMatrix, gamma: &DensityMatrix) -> Result<PurifiedPair> {
    let l = gamma.dim();
    let n = particle_count(gamma_n.dim(), l)?;
    let perm_defect = permutation_defect(gamma_n.matrix(), l, n);
    if perm_defect > PERMUTATION_INVARIANCE_TOL {
        return Err(Error::NotPermutationInvariant {
            defect: perm_defect,
        });
    }

    let root_n = matrix_sqrt_psd(gamma_n.matrix())?;
    let root_one = matrix_sqrt_psd(gamma.matrix())?;
    let root_product = kron_power(&root_one, n);
    let a = root_n.matmul(&root_product);
    let (v, kernel_dim) = equivariant_polar(&a, l, n)?;
    let k = root_n.matmul(&v);

    let shape = lifted_shape(l, l, n);
    let amps = merge_matrix(&k, &shape, &physical_factors(n), &auxiliary_factors(n));
    let psi_tilde = PureState::normalized(amps, shape)?;
    let phi = PureState::normalized(root_one.into_vec(), TensorShape::new(vec![l, l])?)?;

    let marginal = reduced_from_pure(
        psi_tilde.amplitudes(),
        psi_tilde.shape(),
        &physical_factors(n),
    )?;
    let marginal_defect = trace_norm_of_difference(&marginal, gamma_n.matrix())?;
    let symmetry_defect = symmetry_defect(&psi_tilde, l * l, n);
    let overlap_sq = psi_tilde
        .inner(&phi.tensor_power(n))
        .norm_sqr()
        .clamp(0.0, 1.0);

    Ok(PurifiedPair {
        psi_tilde,
        phi,
        aux_dim: l,
        n,
        symmetry_defect,
        marginal_defect,
        overlap_sq,
        kernel_dim,
    })
}

fn particle_count(dim: usize, l: usize) -> Result<usize> {
    let mut n = 0;
    let mut d = 1;
    while d < dim {
        d *= l;
        n += 1;
    }
    if d != dim || n < 1 {
        return Err(Error::ShapeMismatch(format!(
            "N-body dimension {dim} is not a power of {l}"
        )));
    }
    Ok(n)
}

/// Polar unitary of `a` with an S_N-equivariant completion on the kernel.
///
/// `a` commutes with every `U_π`, so `ker a` and `ker a†` are isomorphic
/// representations. Averaging `K_B G K_A†` over the group for a Gaussian `G`
/// yields a generically invertible intertwiner `X` between them; the polar
/// unitary of `a + X` agrees with the partial isometry of `a` on the support
/// and is a function of commuting operators, hence in the commutant.
fn equivariant_polar(a: &CMatrix, l: usize, n: usize) -> Result<(CMatrix, usize)> {
    let dec = svd(a)?;
    let dim = a.rows();
    let top = dec.sigma.first().copied().unwrap_or(0.0);
    let cutoff = KERNEL_RELATIVE_TOL * top.max(f64::MIN_POSITIVE);
    let rank = dec.sigma.iter().filter(|&&s| s > cutoff).count();
    if rank == dim {
        return Ok((dec.left.matmul(&dec.right.adjoint()), 0));
    }
    let kernel_dim = dim - rank;
    let ker_a = CMatrix::from_fn(dim, kernel_dim, |i, j| dec.right[(i, rank + j)]);
    let ker_adj = CMatrix::from_fn(dim, kernel_dim, |i, j| dec.left[(i, rank + j)]);
    let mut rng = ChaCha8Rng::seed_from_u64(KERNEL_COMPLETION_SEED);
    let g = random_gaussian_matrix(&mut rng, kernel_dim, kernel_dim);
    let seed_map = ker_adj.matmul(&g).matmul(&ker_a.adjoint());
    let perms = Permutation::all(n);
    let mut avg = CMatrix::zeros(dim, dim);
    for p in &perms {
        let map = permutation_index_map(l, p);
        avg = &avg + &conjugate_by_permutation(&seed_map, &map);
    }
    let scale = top.max(1.0) / perms.len() as f64;
    let completed = &avg.scale_real(scale) + a;
    let polar = svd(&completed)?;
    Ok((polar.left.matmul(&polar.right.adjoint()), kernel_dim))
}

/// Lazily applied projector `p_j = |Φ⟩⟨Φ|` on slot `j` of a lifted N-body
/// state.
#[derive(Clone, Debug)]
pub struct SlotProjector<'a> {
    phi: &'a PureState,
    slot: usize,
    n: usize,
}

impl<'a> SlotProjector<'a> {
    pub fn new(phi: &'a PureState, slot: usize, n: usize) -> Result<Self> {
        if slot >= n {
            return Err(Error::BadFactorIndex {
                index: slot,
                factors: n,
            });
        }
        Ok(Self { phi, slot, n })
    }

    fn slot_shape(&self, psi: &PureState) -> Result<TensorShape> {
        let d = self.phi.dim();
        if psi.dim() != d.pow(self.n as u32) {
            return Err(Error::ShapeMismatch(format!(
                "lifted state of dimension {} is not ({d})^{}",
                psi.dim(),
                self.n
            )));
        }
        Ok(TensorShape::uniform(d, self.n))
    }

    /// `(⟨Φ|_j ⊗ 1) Ψ`, a vector on the remaining slots.
    pub fn contract(&self, psi: &PureState) -> Result<Vec<C64>> {
        let shape = self.slot_shape(psi)?;
        let rest = shape.complement(&[self.slot]);
        let m = split_matrix(psi.amplitudes(), &shape, &[self.slot], &rest);
        let phi = self.phi.amplitudes();
        Ok((0..m.cols())
            .map(|c| (0..m.rows()).map(|r| phi[r].conj() * m[(r, c)]).sum())
            .collect())
    }

    /// `p_j Ψ`.
    pub fn apply(&self, psi: &PureState) -> Result<Vec<C64>> {
        let shape = self.slot_shape(psi)?;
        let rest = shape.complement(&[self.slot]);
        let c = self.contract(psi)?;
        let m = CMatrix::outer(
            self.phi.amplitudes(),
            &c.iter().map(|z| z.conj()).collect::<Vec<_>>(),
        );
        Ok(merge_matrix(&m, &shape, &[self.slot], &rest))
    }

    /// `⟨Ψ, p_j Ψ⟩ = ‖(⟨Φ|_j ⊗ 1) Ψ‖²`.
    pub fn expectation(&self, psi: &PureState) -> Result<f64> {
        Ok(vec_norm(&self.contract(psi)?).powi(2))
    }
}

/// Counting functional `α̃ = ⟨Ψ, n̂ Ψ⟩ = 1 − (1/N) Σ_j ⟨Ψ, p_j Ψ⟩`.
pub fn alpha(psi: &PureState, phi: &PureState, n: usize) -> Result<f64> {
    let mut total = 0.0;
    for j in 0..n {
        total += SlotProjector::new(phi, j, n)?.expectation(psi)?;
    }
    let value = 1.0 - total / n as f64;
    if value < -1e-12 || value > 1.0 + 1e-12 {
        return Err(Error::ShapeMismatch(format!(
            "counting functional {value} outside [0, 1]; state not normalized?"
        )));
    }
    Ok(value.clamp(0.0, 1.0))
}

/// `1 − tr(Γ̃^{N:k} P^{⊗k}) = 1 − ‖(⟨Φ|^{⊗k} ⊗ 1) Ψ‖²`.
pub fn k_projection_defect(psi: &PureState, phi: &PureState, n: usize, k: usize) -> Result<f64> {
    if k == 0 || k > n {
        return Err(Error::ShapeMismatch(format!("k = {k} outside 1..={n}")));
    }
    let d = phi.dim();
    let shape = TensorShape::uniform(d, n);
    if psi.dim() != shape.dim() {
        return Err(Error::ShapeMismatch(
            "lifted state dimension mismatch".into(),
        ));
    }
    let head: Vec<usize> = (0..k).collect();
    let rest = shape.complement(&head);
    let m = split_matrix(psi.amplitudes(), &shape, &head, &rest);
    let bra = phi.tensor_power(k);
    let bra = bra.amplitudes();
    let weight: f64 = (0..m.cols())
        .map(|c| {
            let z: C64 = (0..m.rows()).map(|r| bra[r].conj() * m[(r, c)]).sum();
            z.norm_sqr()
        })
        .sum();
    Ok(1.0 - weight)
}

/// Lifted k-particle marginal `Γ̃^{N:k}` on `(C^{L·a})^{⊗k}`.
pub fn lifted_marginal(psi: &PureState, slot_dim: usize, n: usize, k: usize) -> Result<CMatrix> {
    let shape = TensorShape::uniform(slot_dim, n);
    let keep: Vec<usize> = (0..k).collect();
    reduced_from_pure(psi.amplitudes(), &shape, &keep)
}

/// `1 − F(Γ₀, γ₀^{⊗N}) + 1/N − α̃(0)`; nonnegative for a valid purification.
pub fn initial_alpha_bound_check(
    pair: &PurifiedPair,
    gamma_n: &DensityMatrix,
    gamma: &DensityMatrix,
) -> Result<f64> {
    let product = gamma.tensor_power(pair.n)?;
    let f0 = fidelity(gamma_n, &product)?;
    let a0 = alpha(&pair.psi_tilde, &pair.phi, pair.n)?;
    Ok(1.0 - f0 + 1.0 / pair.n as f64 - a0)
}

/// `⟨Ψ, Φ^{⊗N}⟩`.
pub fn product_overlap(psi: &PureState, phi: &PureState, n: usize) -> C64 {
    inner(psi.amplitudes(), phi.tensor_power(n).amplitudes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron, partial_trace_matrix};
    use crate::random::{haar_unitary, random_density, random_unit_vector, test_rng};

    fn density(m: CMatrix) -> DensityMatrix {
        DensityMatrix::flat(m).unwrap()
    }

    fn nbody(m: CMatrix, l: usize, n: usize) -> DensityMatrix {
        DensityMatrix::new(m, TensorShape::uniform(l, n)).unwrap()
    }

    #[test]
    fn one_body_pure() {
        let u = random_unit_vector(&mut test_rng(1), 3);
        let phi = purify_one_body(&density(CMatrix::outer(&u, &u))).unwrap();
        assert_eq!(phi.shape().factors(), &[3, 1]);
        assert!(inner(phi.amplitudes(), &u).norm() > 1.0 - 1e-12);
    }

    #[test]
    fn one_body_maximally_mixed() {
        let phi = purify_one_body(&density(CMatrix::identity(2).scale_real(0.5))).unwrap();
        assert_eq!(phi.shape().factors(), &[2, 2]);
        let mags: Vec<f64> = phi.amplitudes().iter().map(|z| z.norm()).collect();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut sorted = mags.clone();
        sorted.sort_by(f64::total_cmp);
        assert!(sorted[0] < 1e-15 && sorted[1] < 1e-15);
        assert!((sorted[2] - h).abs() < 1e-14 && (sorted[3] - h).abs() < 1e-14);
    }

    #[test]
    fn one_body_rank_three() {
        let g = density(random_density(&mut test_rng(2), 5, 3));
        let phi = purify_one_body(&g).unwrap();
        assert_eq!(phi.shape().factors()[1], 3);
        let back = partial_trace_matrix(&phi.projector(), phi.shape(), &[0]).unwrap();
        assert!((&back - g.matrix()).max_abs() <= 1e-11);
    }

    #[test]
    fn vectorization_purifies() {
        let g = density(random_density(&mut test_rng(3), 4, 2));
        let phi = vectorized_sqrt(&g).unwrap();
        let back = partial_trace_matrix(&phi.projector(), phi.shape(), &[0]).unwrap();
        assert!((&back - g.matrix()).max_abs() <= 1e-11);
    }

    #[test]
    fn product_data_gives_zero_alpha() {
        let mut rng = test_rng(4);
        for rank in [1, 2, 3] {
            let g = density(random_density(&mut rng, 3, rank));
            let gn = g.tensor_power(2).unwrap();
            let pair = purify_n_body(&gn, &g).unwrap();
            assert!(pair.marginal_defect <= MARGINAL_TOL);
            assert!(
                pair.symmetry_defect <= SYMMETRY_TOL,
                "{}",
                pair.symmetry_defect
            );
            assert!((pair.overlap_sq - 1.0).abs() < 1e-10);
            let a = alpha(&pair.psi_tilde, &pair.phi, 2).unwrap();
            assert!(a.abs() < 1e-12, "rank {rank}: alpha {a}");
        }
    }

    #[test]
    fn pure_product_has_unit_overlap() {
        let u = random_unit_vector(&mut test_rng(5), 2);
        let g = density(CMatrix::outer(&u, &u));
        let gn = g.tensor_power(3).unwrap();
        let pair = purify_n_body(&gn, &g).unwrap();
        assert!((pair.overlap_sq - 1.0).abs() < 1e-10);
        assert!(pair.symmetry_defect <= SYMMETRY_TOL);
    }

    #[test]
    fn mixed_two_body_overlap_meets_fidelity() {
        let mut rng = test_rng(6);
        let a = random_unit_vector(&mut rng, 2);
        let b = random_unit_vector(&mut rng, 2);
        let aa = crate::linalg::kron_vec(&a, &a);
        let bb = crate::linalg::kron_vec(&b, &b);
        let gn = (&CMatrix::outer(&aa, &aa).scale_real(0.6)
            + &CMatrix::outer(&bb, &bb).scale_real(0.4))
            .hermitian_part();
        let gn = nbody(gn, 2, 2);
        let g = gn.partial_trace(&[0]).unwrap();
        let pair = purify_n_body(&gn, &g).unwrap();
        let f = fidelity(&gn, &g.tensor_power(2).unwrap()).unwrap();
        assert!(pair.overlap_sq >= f - 1e-9, "{} < {f}", pair.overlap_sq);
        assert!(pair.marginal_defect <= MARGINAL_TOL);
        assert!(
            pair.symmetry_defect <= SYMMETRY_TOL,
            "{}",
            pair.symmetry_defect
        );
        assert!(initial_alpha_bound_check(&pair, &gn, &g).unwrap() >= -1e-9);
    }

    #[test]
    fn generic_random_symmetric_input() {
        let mut rng = test_rng(7);
        for _ in 0..5 {
            let gn = nbody(symmetrize(&random_density(&mut rng, 9, 9), 3, 2), 3, 2);
            let g = density(random_density(&mut rng, 3, 3));
            let pair = purify_n_body(&gn, &g).unwrap();
            assert_eq!(pair.kernel_dim, 0);
            assert!(pair.marginal_defect <= MARGINAL_TOL);
            assert!(pair.symmetry_defect <= SYMMETRY_TOL);
            let f = fidelity(&gn, &g.tensor_power(2).unwrap()).unwrap();
            assert!(pair.overlap_sq >= f - 1e-9);
            assert!(initial_alpha_bound_check(&pair, &gn, &g).unwrap() >= -1e-9);
        }
    }

    #[test]
    fn rejects_asymmetric_input() {
        let mut rng = test_rng(8);
        let g = random_density(&mut rng, 2, 1);
        let h = random_density(&mut rng, 2, 2);
        let gn = nbody(kron(&g, &h), 2, 2);
        assert!(matches!(
            purify_n_body(&gn, &density(g)),
            Err(Error::NotPermutationInvariant { .. })
        ));
    }

    #[test]
    fn projector_examples() {
        let mut rng = test_rng(9);
        let phi = crate::random::random_pure_state(&mut rng, TensorShape::new(vec![2, 2]).unwrap());
        let psi = phi.tensor_power(3);
        for j in 0..3 {
            let p = SlotProjector::new(&phi, j, 3).unwrap();
            let out = p.apply(&psi).unwrap();
            assert!(out
                .iter()
                .zip(psi.amplitudes())
                .all(|(a, b)| (a - b).norm() < 1e-14));
        }
        // orthogonal state in slot 1
        let mut chi = random_unit_vector(&mut rng, 4);
        let ov = inner(phi.amplitudes(), &chi);
        chi.iter_mut()
            .zip(phi.amplitudes())
            .for_each(|(c, p)| *c -= ov * p);
        let chi = PureState::normalized(chi, phi.shape().clone()).unwrap();
        let mixed = chi.tensor(&phi).tensor(&phi);
        let p1 = SlotProjector::new(&phi, 0, 3).unwrap();
        assert!(vec_norm(&p1.apply(&mixed).unwrap()) < 1e-14);
        assert!((alpha(&mixed, &phi, 3).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        assert!((alpha(&chi.tensor_power(3), &phi, 3).unwrap() - 1.0).abs() < 1e-14);
        assert!(alpha(&psi, &phi, 3).unwrap() < 1e-14);
    }

    #[test]
    fn projector_is_idempotent_and_expectation_matches() {
        let mut rng = test_rng(10);
        let phi = crate::random::random_pure_state(&mut rng, TensorShape::new(vec![2, 3]).unwrap());
        let psi = crate::random::random_pure_state(&mut rng, lifted_shape(2, 3, 2));
        for j in 0..2 {
            let p = SlotProjector::new(&phi, j, 2).unwrap();
            let once = PureState::from_parts_unchecked(p.apply(&psi).unwrap(), psi.shape().clone());
            let twice = p.apply(&once).unwrap();
            assert!(twice
                .iter()
                .zip(once.amplitudes())
                .all(|(a, b)| (a - b).norm() < 1e-12));
            let e = p.expectation(&psi).unwrap();
            assert!((0.0..=1.0).contains(&e));
            let direct = inner(psi.amplitudes(), once.amplitudes());
            assert!((direct.re - e).abs() < 1e-13 && direct.im.abs() < 1e-13);
        }
    }

    #[test]
    fn auxiliary_gauge_invariance() {
        let mut rng = test_rng(11);
        let gn = nbody(symmetrize(&random_density(&mut rng, 4, 4), 2, 2), 2, 2);
        let g = density(random_density(&mut rng, 2, 2));
        let pair = purify_n_body(&gn, &g).unwrap();
        let u = haar_unitary(&mut rng, 2);
        let phi2 = pair.phi.apply_on_factors(&u, &[1]).unwrap();
        let psi2 = pair
            .psi_tilde
            .apply_on_factors(&kron(&u, &u), &[1, 3])
            .unwrap();
        let a1 = alpha(&pair.psi_tilde, &pair.phi, 2).unwrap();
        let a2 = alpha(&psi2, &phi2, 2).unwrap();
        assert!((a1 - a2).abs() < 1e-12);
        let m1 = reduced_from_pure(pair.psi_tilde.amplitudes(), pair.psi_tilde.shape(), &[0, 2])
            .unwrap();
        let m2 = reduced_from_pure(psi2.amplitudes(), psi2.shape(), &[0, 2]).unwrap();
        assert!((&m1 - &m2).max_abs() < 1e-12);
        for k in [1, 2] {
            let d1 = k_projection_defect(&pair.psi_tilde, &pair.phi, 2, k).unwrap();
            let d2 = k_projection_defect(&psi2, &phi2, 2, k).unwrap();
            assert!((d1 - d2).abs() < 1e-12);
        }
    }

    #[test]
    fn k_marginal_counting_bound() {
        let mut rng = test_rng(12);
        for _ in 0..10 {
            let gn = nbody(symmetrize(&random_density(&mut rng, 8, 3), 2, 3), 2, 3);
            let g = density(random_density(&mut rng, 2, 2));
            let pair = purify_n_body(&gn, &g).unwrap();
            let a = alpha(&pair.psi_tilde, &pair.phi, 3).unwrap();
            for k in [1, 2] {
                let lhs = k_projection_defect(&pair.psi_tilde, &pair.phi, 3, k).unwrap();
                assert!(lhs <= k as f64 * a + 1e-10, "k={k}: {lhs} > {k}·{a}");
                let marg = lifted_marginal(&pair.psi_tilde, 4, 3, k).unwrap();
                let pk = pair.phi.tensor_power(k);
                let tr = inner(pk.amplitudes(), &marg.matvec(pk.amplitudes())).re;
                assert!((1.0 - tr - lhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn orthogonal_pure_data_margin() {
        let mut rng = test_rng(13);
        let u = random_unit_vector(&mut rng, 2);
        let chi = vec![-u[1].conj(), u[0].conj()];
        let g = density(CMatrix::outer(&u, &u));
        let cn = crate::linalg::kron_vec(&chi, &chi);
        let cn = crate::linalg::kron_vec(&cn, &chi);
        let gn = nbody(CMatrix::outer(&cn, &cn), 2, 3);
        let pair = purify_n_body(&gn, &g).unwrap();
        assert!((alpha(&pair.psi_tilde, &pair.phi, 3).unwrap() - 1.0).abs() < 1e-12);
        let margin = initial_alpha_bound_check(&pair, &gn, &g).unwrap();
        assert!((margin - 1.0 / 3.0).abs() < 1e-10);
    }
}
