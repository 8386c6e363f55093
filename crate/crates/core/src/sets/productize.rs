use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::qstate::{Bipartition, PureState};

/// Pivot below which a state is treated as linearly dependent on its predecessors.
const PIVOT_TOL: f64 = 1e-10;

/// A unitary `U` such that every `U|psi_i>` is a product state.
///
/// With `d' = max(d1, d2)`, the first states are embedded triangularly into
/// `span{|i>|0>}` (on the larger factor) with coefficients fixed by their Gram
/// matrix; a `(d'+1)`-th independent state keeps its overlaps in the `|0>`
/// component and gets the same local vector on `|1>`, i.e. it is written as
/// `(sum_i c_i |i>)(|0> + t|1>)`.
pub fn productizing_basis(states: &[PureState], bp: Bipartition) -> Result<CMatrix> {
    let big = bp.larger();
    if states.len() > big + 1 {
        return Err(Error::TooManyStates {
            got: states.len(),
            max: big + 1,
        });
    }
    let d = bp.dim();
    for s in states {
        if s.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: s.dim(),
            });
        }
    }
    // Product basis vector with index `i` on the larger factor and `j` on the other.
    let slot = |i: usize, j: usize| -> usize {
        if bp.d1() >= bp.d2() {
            bp.index(i, j)
        } else {
            bp.index(j, i)
        }
    };

    // Modified Gram-Schmidt over the inputs; `sources` are the orthonormal
    // directions in the input space and `targets` their images.
    let mut sources: Vec<CVector> = Vec::new();
    let mut targets: Vec<CVector> = Vec::new();
    for s in states {
        let mut r = s.amplitudes().clone();
        let mut coeffs = Vec::with_capacity(sources.len());
        for e in &sources {
            let cf = e.dotc(&r);
            r -= e * cf;
            coeffs.push(cf);
        }
        let rest = r.norm();
        if rest < PIVOT_TOL {
            continue;
        }
        let e = r.unscale(rest);
        let image = if sources.len() < big {
            // Fits into span{|i>|0>}: the next unused |i>|0>.
            let mut t = CVector::zeros(d);
            t[slot(sources.len(), 0)] = linalg::ONE;
            t
        } else {
            // The (d'+1)-th direction. The overlap part is `sum_i c_i |i>|0>`
            // (the images of the first d' directions); the new direction must
            // map to `(sum_i c_i|i>)/|c| ⊗ |1>` so the state factorizes.
            let cnorm = coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let mut t = CVector::zeros(d);
            if cnorm < PIVOT_TOL {
                t[slot(0, 1)] = linalg::ONE;
            } else {
                for (i, z) in coeffs.iter().enumerate() {
                    t[slot(i, 1)] = z / cnorm;
                }
            }
            t
        };
        sources.push(e);
        targets.push(image);
    }

    let src = complete_basis(sources, d);
    let dst = complete_basis(targets, d);
    let mut u = CMatrix::zeros(d, d);
    for (s, t) in src.iter().zip(&dst) {
        u += t * s.adjoint();
    }
    Ok(u)
}

/// Extends an orthonormal family to an orthonormal basis of `C^d` using the
/// computational basis vectors in order.
fn complete_basis(mut vecs: Vec<CVector>, d: usize) -> Vec<CVector> {
    for k in 0..d {
        if vecs.len() == d {
            break;
        }
        let mut r = CVector::zeros(d);
        r[k] = linalg::ONE;
        for _ in 0..2 {
            for e in &vecs {
                let cf = e.dotc(&r);
                r -= e * cf;
            }
        }
        let n = r.norm();
        if n > 1e-6 {
            vecs.push(r.unscale(n));
        }
    }
    vecs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_state, unitarity_defect};
    use crate::qstate::product_residual;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn residuals(u: &CMatrix, states: &[PureState], bp: Bipartition) -> f64 {
        states
            .iter()
            .map(|s| product_residual(&s.transformed(u).unwrap(), bp).unwrap())
            .fold(0.0, f64::max)
    }

    #[test]
    fn three_random_qubit_pair_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let bp = Bipartition::qubits();
        for _ in 0..20 {
            let states: Vec<_> = (0..3)
                .map(|_| PureState::new(random_state(4, &mut rng)).unwrap())
                .collect();
            let u = productizing_basis(&states, bp).unwrap();
            assert!(unitarity_defect(&u) <= 1e-10);
            assert!(residuals(&u, &states, bp) < 1e-9);
        }
    }

    #[test]
    fn larger_and_asymmetric_bipartitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for (d1, d2) in [(2, 3), (3, 2), (3, 3), (2, 4), (4, 2)] {
            let bp = Bipartition::new(d1, d2).unwrap();
            for n in 1..=bp.larger() + 1 {
                let states: Vec<_> = (0..n)
                    .map(|_| PureState::new(random_state(bp.dim(), &mut rng)).unwrap())
                    .collect();
                let u = productizing_basis(&states, bp).unwrap();
                assert!(unitarity_defect(&u) <= 1e-10);
                assert!(residuals(&u, &states, bp) < 1e-9, "{d1}x{d2} n={n}");
            }
        }
    }

    #[test]
    fn orthogonal_product_inputs_keep_identity_valid() {
        let bp = Bipartition::qubits();
        let states: Vec<_> = (0..3).map(|i| PureState::basis(4, i)).collect();
        let id = CMatrix::identity(4, 4);
        assert_eq!(residuals(&id, &states, bp), 0.0);
        let u = productizing_basis(&states, bp).unwrap();
        assert!(residuals(&u, &states, bp) < 1e-12);
    }

    #[test]
    fn zero_and_bell_states() {
        let bp = Bipartition::qubits();
        let s = 0.5f64.sqrt();
        let states = vec![
            PureState::basis(4, 0),
            PureState::from_real(&[s, 0.0, 0.0, s]).unwrap(),
            PureState::from_real(&[0.0, s, s, 0.0]).unwrap(),
        ];
        let u = productizing_basis(&states, bp).unwrap();
        assert!(unitarity_defect(&u) <= 1e-10);
        assert!(residuals(&u, &states, bp) < 1e-9);
    }

    #[test]
    fn dependent_inputs_fall_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let bp = Bipartition::qubits();
        let a = PureState::new(random_state(4, &mut rng)).unwrap();
        let b = PureState::new(random_state(4, &mut rng)).unwrap();
        let phased = PureState::new(a.amplitudes() * linalg::c(0.0, 1.0)).unwrap();
        let states = vec![a, b, phased];
        let u = productizing_basis(&states, bp).unwrap();
        assert!(residuals(&u, &states, bp) < 1e-9);
    }

    #[test]
    fn too_many_states() {
        let bp = Bipartition::qubits();
        let states: Vec<_> = (0..4).map(|i| PureState::basis(4, i)).collect();
        assert!(matches!(
            productizing_basis(&states, bp),
            Err(Error::TooManyStates { got: 4, max: 3 })
        ));
    }
}
