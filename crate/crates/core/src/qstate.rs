//! Dense bipartite quantum-state primitives.
//!
//! All flattening is subsystem-1-major and 0-based: the basis state `|i1 i2>`
//! lives at flat index `i1 * d2 + i2`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};

pub const NORM_TOL: f64 = 1e-12;
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;
/// Hermiticity slack accepted by [`negativity`] on raw matrices.
pub const NEGATIVITY_HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bipartition {
    d1: usize,
    d2: usize,
}

impl Bipartition {
    pub fn new(d1: usize, d2: usize) -> Result<Self> {
        if d1 < 2 || d2 < 2 {
            return Err(Error::InvalidBipartition { d1, d2 });
        }
        Ok(Self { d1, d2 })
    }

    pub fn qubits() -> Self {
        Self { d1: 2, d2: 2 }
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn dim(&self) -> usize {
        self.d1 * self.d2
    }

    /// `max(d1, d2)`.
    pub fn larger(&self) -> usize {
        self.d1.max(self.d2)
    }

    #[inline]
    pub fn index(&self, i1: usize, i2: usize) -> usize {
        i1 * self.d2 + i2
    }

    fn check(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: dim,
            });
        }
        Ok(())
    }
}

/// Which tensor factor survives a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
}

impl PureState {
    pub fn new(amplitudes: CVector) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::Empty("pure state"));
        }
        let norm_sq = amplitudes.norm_squared();
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes `amplitudes` first; fails only on the zero vector.
    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        let n = amplitudes.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NotNormalized { norm_sq: n * n });
        }
        Self::new(amplitudes.unscale(n))
    }

    /// Computational basis state `|index>` in dimension `dim`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = CVector::zeros(dim);
        v[index] = linalg::ONE;
        Self { amplitudes: v }
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(CVector::from_iterator(
            amps.len(),
            amps.iter().map(|&a| Complex64::new(a, 0.0)),
        ))
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amplitudes
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix {
            matrix: linalg::outer(&self.amplitudes),
        }
    }

    /// `U |psi>`; the result is renormalized to absorb rounding.
    pub fn transformed(&self, u: &CMatrix) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.nrows(),
            });
        }
        Self::normalized(u * &self.amplitudes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.nrows() != matrix.ncols() {
            return Err(Error::NotDensityMatrix("matrix must be square and nonempty".into()));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NotDensityMatrix("non-finite entry".into()));
        }
        let deviation = linalg::hermitian_deviation(&matrix);
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        let tr = linalg::trace(&matrix).re;
        if (tr - 1.0).abs() > NORM_TOL {
            return Err(Error::NotDensityMatrix(format!("trace {tr} != 1")));
        }
        let min_ev = linalg::hermitian_eigenvalues(&matrix)[0];
        if min_ev < -PSD_TOL {
            return Err(Error::NotDensityMatrix(format!(
                "minimum eigenvalue {min_ev:.3e} is negative"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim).unscale(dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// `U rho U†`, re-Hermitized.
    pub fn conjugated(&self, u: &CMatrix) -> CMatrix {
        let m = u * &self.matrix * u.adjoint();
        (&m + m.adjoint()).scale(0.5)
    }

    /// `v rho + (1 - v) I/d` for `v` in `[0, 1]`.
    pub fn mixed_with_white_noise(&self, v: f64) -> Self {
        let d = self.dim();
        let noise = CMatrix::identity(d, d).unscale(d as f64);
        Self {
            matrix: self.matrix.scale(v) + noise.scale(1.0 - v),
        }
    }
}

/// Partial transpose on the first subsystem.
///
/// Entry `((i1,i2),(j1,j2))` of the output is entry `((j1,i2),(i1,j2))` of `rho`.
pub fn partial_transpose(rho: &CMatrix, bp: Bipartition) -> Result<CMatrix> {
    bp.check(rho.nrows())?;
    bp.check(rho.ncols())?;
    let (d1, d2) = (bp.d1, bp.d2);
    let mut out = CMatrix::zeros(rho.nrows(), rho.ncols());
    for i1 in 0..d1 {
        for i2 in 0..d2 {
            for j1 in 0..d1 {
                for j2 in 0..d2 {
                    out[(bp.index(i1, i2), bp.index(j1, j2))] =
                        rho[(bp.index(j1, i2), bp.index(i1, j2))];
                }
            }
        }
    }
    Ok(out)
}

/// Sum of the absolute values of the negative eigenvalues of `rho^{T_A}`.
pub fn negativity(rho: &CMatrix, bp: Bipartition) -> Result<f64> {
    bp.check(rho.nrows())?;
    let deviation = linalg::hermitian_deviation(rho);
    if deviation > NEGATIVITY_HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(negativity_unchecked(rho, bp))
}

pub(crate) fn negativity_unchecked(rho: &CMatrix, bp: Bipartition) -> f64 {
    let pt = partial_transpose(rho, bp).expect("dimension checked by caller");
    linalg::hermitian_eigenvalues(&pt)
        .into_iter()
        .filter(|&l| l < 0.0)
        .fold(0.0, |acc, l| acc - l)
}

/// Reduced state on the kept subsystem.
pub fn partial_trace(rho: &DensityMatrix, bp: Bipartition, keep: Subsystem) -> Result<DensityMatrix> {
    bp.check(rho.dim())?;
    let m = &rho.matrix;
    let (d1, d2) = (bp.d1, bp.d2);
    let out = match keep {
        Subsystem::First => CMatrix::from_fn(d1, d1, |i, j| {
            (0..d2).map(|k| m[(bp.index(i, k), bp.index(j, k))]).sum()
        }),
        Subsystem::Second => CMatrix::from_fn(d2, d2, |i, j| {
            (0..d1).map(|k| m[(bp.index(k, i), bp.index(k, j))]).sum()
        }),
    };
    Ok(DensityMatrix { matrix: out })
}

/// `d1 x d2` coefficient matrix `A[i1, i2] = a_{i1 d2 + i2}`.
pub(crate) fn coefficient_matrix(amps: &CVector, bp: Bipartition) -> CMatrix {
    CMatrix::from_fn(bp.d1, bp.d2, |i, j| amps[bp.index(i, j)])
}

/// Squared Schmidt coefficients, descending.
pub(crate) fn schmidt_weights(amps: &CVector, bp: Bipartition) -> Vec<f64> {
    let a = coefficient_matrix(amps, bp);
    let mut s: Vec<f64> = a
        .singular_values()
        .iter()
        .map(|x| x * x)
        .collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Shannon entropy in bits with `0 log 0 = 0`.
pub fn shannon_entropy(weights: &[f64]) -> f64 {
    weights
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum::<f64>()
        .max(0.0)
}

/// Binary entropy `h(x)` in bits.
pub fn binary_entropy(x: f64) -> f64 {
    shannon_entropy(&[x, 1.0 - x])
}

/// Entropy (base 2) of the reduced state of a pure state.
pub fn entropy_of_entanglement(psi: &PureState, bp: Bipartition) -> Result<f64> {
    bp.check(psi.dim())?;
    let norm_sq = psi.amplitudes.norm_squared();
    if (norm_sq - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized { norm_sq });
    }
    Ok(entropy_unchecked(&psi.amplitudes, bp))
}

pub(crate) fn entropy_unchecked(amps: &CVector, bp: Bipartition) -> f64 {
    shannon_entropy(&schmidt_weights(amps, bp))
}

/// Negativity of `|psi><psi|` from the Schmidt coefficients:
/// `((sum_i s_i)^2 - 1) / 2`.
pub fn pure_negativity(psi: &PureState, bp: Bipartition) -> Result<f64> {
    bp.check(psi.dim())?;
    Ok(pure_negativity_unchecked(&psi.amplitudes, bp))
}

pub(crate) fn pure_negativity_unchecked(amps: &CVector, bp: Bipartition) -> f64 {
    let a = coefficient_matrix(amps, bp);
    let sv = a.singular_values();
    let sum: f64 = sv.iter().sum();
    let norm_sq: f64 = sv.iter().map(|s| s * s).sum();
    ((sum * sum - norm_sq) / 2.0).max(0.0)
}

/// Product-state residual.
///
/// Local bases are permuted so that a largest-modulus amplitude sits at flat
/// index 0 and the global phase makes it real positive; the result is
/// `max_{n>=1, j>=1} |a_{0,0} a_{n,j} - a_{n,0} a_{0,j}|`, which vanishes iff
/// the state is a product across `bp`.
pub fn product_residual(psi: &PureState, bp: Bipartition) -> Result<f64> {
    bp.check(psi.dim())?;
    Ok(product_residual_unchecked(&psi.amplitudes, bp))
}

pub(crate) fn product_residual_unchecked(amps: &CVector, bp: Bipartition) -> f64 {
    let mut a = coefficient_matrix(amps, bp);
    let (mut p1, mut p2, mut best) = (0, 0, -1.0);
    for i in 0..bp.d1 {
        for j in 0..bp.d2 {
            let m = a[(i, j)].norm();
            if m > best {
                best = m;
                p1 = i;
                p2 = j;
            }
        }
    }
    a.swap_rows(0, p1);
    a.swap_columns(0, p2);
    if best > 0.0 {
        let phase = a[(0, 0)].conj() / best;
        a *= phase;
    }
    let mut res = 0.0f64;
    for n in 1..bp.d1 {
        for j in 1..bp.d2 {
            res = res.max((a[(0, 0)] * a[(n, j)] - a[(n, 0)] * a[(0, j)]).norm());
        }
    }
    res
}

/// All `2x2` minors of the coefficient matrix, split into real and imaginary
/// parts. Smooth in the amplitudes and identically zero iff the state is a
/// product.
pub(crate) fn product_minors(amps: &CVector, bp: Bipartition, out: &mut Vec<f64>) {
    let a = coefficient_matrix(amps, bp);
    for i in 0..bp.d1 {
        for k in i + 1..bp.d1 {
            for j in 0..bp.d2 {
                for l in j + 1..bp.d2 {
                    let m = a[(i, j)] * a[(k, l)] - a[(i, l)] * a[(k, j)];
                    out.push(m.re);
                    out.push(m.im);
                }
            }
        }
    }
}

/// Real symmetric embedding `[[Re H, -Im H], [Im H, Re H]]` of a Hermitian matrix.
pub fn real_embedding(h: &CMatrix) -> DMatrix<f64> {
    let n = h.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = h[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, random_density, random_hermitian, random_state, random_unitary};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn bell() -> PureState {
        let s = 0.5f64.sqrt();
        PureState::from_real(&[s, 0.0, 0.0, s]).unwrap()
    }

    fn psi_theta(theta: f64) -> PureState {
        PureState::from_real(&[theta.cos(), 0.0, 0.0, theta.sin()]).unwrap()
    }

    #[test]
    fn pt_of_identity_is_identity() {
        let id = CMatrix::identity(4, 4);
        assert_eq!(partial_transpose(&id, Bipartition::qubits()).unwrap(), id);
    }

    #[test]
    fn pt_of_bell_has_one_negative_eigenvalue() {
        let pt = partial_transpose(bell().projector().matrix(), Bipartition::qubits()).unwrap();
        let ev = linalg::hermitian_eigenvalues(&pt);
        let expected = [-0.5, 0.5, 0.5, 0.5];
        for (a, b) in ev.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn pt_is_an_involution_and_preserves_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (d1, d2) in [(2, 2), (2, 3), (3, 2), (3, 3)] {
            let bp = Bipartition::new(d1, d2).unwrap();
            let h = random_hermitian(d1 * d2, &mut rng);
            let once = partial_transpose(&h, bp).unwrap();
            assert_eq!(partial_transpose(&once, bp).unwrap(), h);
            assert!((linalg::trace(&once) - linalg::trace(&h)).norm() < 1e-12);
        }
    }

    #[test]
    fn pt_rejects_dimension_mismatch() {
        let m = CMatrix::identity(6, 6);
        assert!(matches!(
            partial_transpose(&m, Bipartition::qubits()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn negativity_examples() {
        let bp = Bipartition::qubits();
        assert!((negativity(bell().projector().matrix(), bp).unwrap() - 0.5).abs() < 1e-12);
        let zero = PureState::basis(4, 0);
        assert!(negativity(zero.projector().matrix(), bp).unwrap().abs() < 1e-12);
        let n = negativity(psi_theta(PI / 6.0).projector().matrix(), bp).unwrap();
        assert!((n - 3f64.sqrt() / 4.0).abs() < 1e-12, "{n}");
    }

    #[test]
    fn negativity_rejects_non_hermitian() {
        let mut m = CMatrix::identity(4, 4).unscale(4.0);
        m[(0, 1)] = c(0.1, 0.0);
        assert!(matches!(
            negativity(&m, Bipartition::qubits()),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn pure_negativity_matches_partial_transpose_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (d1, d2) in [(2, 2), (2, 3), (3, 3)] {
            let bp = Bipartition::new(d1, d2).unwrap();
            for _ in 0..20 {
                let psi = PureState::new(random_state(bp.dim(), &mut rng)).unwrap();
                let a = pure_negativity(&psi, bp).unwrap();
                let b = negativity(psi.projector().matrix(), bp).unwrap();
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn negativity_is_local_unitary_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bp = Bipartition::new(2, 3).unwrap();
        for _ in 0..50 {
            let rho = random_density(6, &mut rng);
            let ul = linalg::kron(&random_unitary(2, &mut rng), &random_unitary(3, &mut rng));
            let rotated = &ul * &rho * ul.adjoint();
            let rotated = (&rotated + rotated.adjoint()).scale(0.5);
            let a = negativity(&rho, bp).unwrap();
            let b = negativity(&rotated, bp).unwrap();
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn partial_trace_examples() {
        let bp = Bipartition::qubits();
        let half = CMatrix::identity(2, 2).unscale(2.0);
        let r = partial_trace(&bell().projector(), bp, Subsystem::First).unwrap();
        assert!(linalg::max_abs_diff(r.matrix(), &half) < 1e-12);

        let r = partial_trace(&PureState::basis(4, 0).projector(), bp, Subsystem::First).unwrap();
        let mut zero = CMatrix::zeros(2, 2);
        zero[(0, 0)] = linalg::ONE;
        assert!(linalg::max_abs_diff(r.matrix(), &zero) < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let bp = Bipartition::new(2, 3).unwrap();
        let ra = random_density(2, &mut rng);
        let rb = random_density(3, &mut rng);
        let prod = DensityMatrix::new(linalg::kron(&ra, &rb)).unwrap();
        let back_a = partial_trace(&prod, bp, Subsystem::First).unwrap();
        let back_b = partial_trace(&prod, bp, Subsystem::Second).unwrap();
        assert!(linalg::max_abs_diff(back_a.matrix(), &ra) < 1e-12);
        assert!(linalg::max_abs_diff(back_b.matrix(), &rb) < 1e-12);
        assert!((linalg::trace(back_a.matrix()).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_examples() {
        let bp = Bipartition::qubits();
        assert!((entropy_of_entanglement(&bell(), bp).unwrap() - 1.0).abs() < 1e-12);
        assert!(entropy_of_entanglement(&PureState::basis(4, 0), bp).unwrap().abs() < 1e-12);
        let s = entropy_of_entanglement(&psi_theta(PI / 6.0), bp).unwrap();
        // h(3/4) from its definition, written out independently.
        let h = -(0.75f64 * 0.75f64.log2() + 0.25 * 0.25f64.log2());
        assert!((s - h).abs() < 1e-12);
        assert!((s - 0.81128).abs() < 1e-5);
    }

    #[test]
    fn entropy_rejects_unnormalized() {
        let v = CVector::from_element(4, c(0.6, 0.0));
        let bogus = PureState { amplitudes: v };
        assert!(matches!(
            entropy_of_entanglement(&bogus, Bipartition::qubits()),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn product_residual_examples() {
        let bp = Bipartition::qubits();
        assert_eq!(product_residual(&PureState::basis(4, 0), bp).unwrap(), 0.0);
        assert!((product_residual(&bell(), bp).unwrap() - 0.5).abs() < 1e-12);
        // a_00 = 0 but the state is a product: |1>(|0> + |1>)/sqrt2.
        let s = 0.5f64.sqrt();
        let p = PureState::from_real(&[0.0, 0.0, s, s]).unwrap();
        assert!(product_residual(&p, bp).unwrap() < 1e-15);
    }

    #[test]
    fn product_residual_is_zero_on_the_two_qubit_separability_condition() {
        // c1 b4 = c2 b2 b3 makes c1|00> + c2(b2|01> + b3|10> + b4|11>) a product.
        let (c1, b2, b3) = (0.7f64, c(0.3, 0.4), c(-0.2, 0.5));
        let c2 = (1.0 - c1 * c1).sqrt();
        let b4 = b2 * b3 * c2 / c1;
        let v = CVector::from_vec(vec![c(c1, 0.0), b2 * c2, b3 * c2, b4 * c2]);
        let psi = PureState::normalized(v).unwrap();
        assert!(product_residual(&psi, Bipartition::qubits()).unwrap() < 1e-12);
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(CMatrix::identity(4, 4)).is_err());
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c(1.5, 0.0);
        m[(1, 1)] = c(-0.5, 0.0);
        assert!(DensityMatrix::new(m).is_err());
        assert!(DensityMatrix::new(DensityMatrix::maximally_mixed(4).into_matrix()).is_ok());
    }
}
