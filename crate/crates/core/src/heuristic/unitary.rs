//! `U = exp(iH)` with `H` expanded in the generalized Gell-Mann basis plus identity.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// Coefficients of the Hermitian generator, `d^2` of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitaryParams(pub Vec<f64>);

impl UnitaryParams {
    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d * d])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Number of real parameters for `U(d)`.
pub fn parameter_count(d: usize) -> usize {
    d * d
}

/// Hermitian basis of `d x d` matrices: identity, then the symmetric and
/// antisymmetric off-diagonal Gell-Mann matrices for `j < k`, then the `d - 1`
/// diagonal ones.
pub fn hermitian_basis(d: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(d * d);
    out.push(CMatrix::identity(d, d));
    for j in 0..d {
        for k in j + 1..d {
            let mut s = CMatrix::zeros(d, d);
            s[(j, k)] = linalg::ONE;
            s[(k, j)] = linalg::ONE;
            out.push(s);
        }
    }
    for j in 0..d {
        for k in j + 1..d {
            let mut a = CMatrix::zeros(d, d);
            a[(j, k)] = linalg::c(0.0, -1.0);
            a[(k, j)] = linalg::c(0.0, 1.0);
            out.push(a);
        }
    }
    for l in 1..d {
        let norm = (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut m = CMatrix::zeros(d, d);
        for j in 0..l {
            m[(j, j)] = linalg::c(norm, 0.0);
        }
        m[(l, l)] = linalg::c(-(l as f64) * norm, 0.0);
        out.push(m);
    }
    out
}

/// Precomputed generator basis for repeated evaluation.
#[derive(Debug, Clone)]
pub struct UnitaryMap {
    d: usize,
    basis: Vec<CMatrix>,
}

impl UnitaryMap {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            basis: hermitian_basis(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn generator(&self, theta: &[f64]) -> CMatrix {
        let mut h = CMatrix::zeros(self.d, self.d);
        for (t, g) in theta.iter().zip(&self.basis) {
            if *t != 0.0 {
                h += g.scale(*t);
            }
        }
        h
    }

    /// `exp(iH)` via the eigendecomposition of `H`.
    pub fn unitary(&self, theta: &[f64]) -> CMatrix {
        let h = self.generator(theta);
        let (ev, v) = linalg::hermitian_eigh(&h);
        let mut vd = v.clone();
        for (j, l) in ev.iter().enumerate() {
            let ph = Complex64::from_polar(1.0, *l);
            for i in 0..self.d {
                vd[(i, j)] *= ph;
            }
        }
        vd * v.adjoint()
    }
}

pub fn unitary_from_params(theta: &UnitaryParams, d: usize) -> Result<CMatrix> {
    if theta.0.len() != parameter_count(d) {
        return Err(Error::DimensionMismatch {
            expected: parameter_count(d),
            got: theta.0.len(),
        });
    }
    if theta.0.iter().any(|t| !t.is_finite()) {
        return Err(Error::OutOfRange("non-finite unitary parameter".into()));
    }
    Ok(UnitaryMap::new(d).unitary(&theta.0))
}
