//! Explicit separating unitary for the two-qubit family with one overlap in `(0, 1/2]`.
//!
//! The transformed basis is `U|xi_1> = |00>` and
//! `U|xi_i> = b_i2|01> + b_i3|10> + b_i4|11>` for `i = 2, 3, 4`; the states are
//! all product iff `c_i1 b_i4 = c_ii b_i2 b_i3` for each `i` and the `3x3`
//! matrix `B = (b_ij)` is unitary.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::qstate::{Bipartition, PureState};

use super::StateSet;

/// Moduli used by the construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppBCoefficients {
    /// `|c_21|, |c_31|, |c_41|`.
    pub c: [f64; 3],
    /// `|b_i4|_max = sqrt(2/(|c_i1| + 1) - 1)` for `i = 2, 3, 4`.
    pub b4_max: [f64; 3],
}

pub fn appb_coefficients(c21: f64) -> Result<AppBCoefficients> {
    if !(c21 > 0.0 && c21 <= 0.5) {
        return Err(Error::OutOfRange(format!("c21 = {c21} not in (0, 0.5]")));
    }
    let c31 = 1.0 / (2.0 * c21 + 1.0);
    let c = [c21, c31, c31];
    let b4_max = c.map(|ci| (2.0 / (ci + 1.0) - 1.0).sqrt());
    Ok(AppBCoefficients { c, b4_max })
}

/// The four states `|xi_1>, c_i1|xi_1> + c_ii|xi_i>` with `|c_21| = c21`,
/// `|c_31| = |c_41| = 1/(2 c21 + 1)`, and a unitary making all of them product.
pub fn separability_unitary_appb(c21: f64) -> Result<(StateSet, CMatrix)> {
    let coef = appb_coefficients(c21)?;
    let cii = coef.c.map(|ci| (1.0 - ci * ci).sqrt());

    let mut states = vec![PureState::basis(4, 0)];
    for (i, (&ci, &cd)) in coef.c.iter().zip(&cii).enumerate() {
        let mut v = CVector::zeros(4);
        v[0] = linalg::c(ci, 0.0);
        v[i + 1] = linalg::c(cd, 0.0);
        states.push(PureState::normalized(v)?);
    }
    let set = StateSet::pure(format!("appb:{c21}"), Bipartition::qubits(), states)?;

    // Row moduli: |b_i4| at its maximum, |b_i2| = |b_i3| sharing the rest.
    let moduli: [[f64; 3]; 3] = std::array::from_fn(|i| {
        let b4 = coef.b4_max[i];
        let side = ((1.0 - b4 * b4) / 2.0).sqrt();
        [side, side, b4]
    });

    // Rows for xi_3 and xi_4: row 3 real, row 4 phased so the two are orthogonal.
    // The products p_m = |b_3m b_4m| obey the triangle inequality, so
    // p_2 + p_3 e^{i t3} + p_4 e^{i t4} = 0 has a solution (principal branch).
    let p: [f64; 3] = std::array::from_fn(|m| moduli[1][m] * moduli[2][m]);
    let cos_t3 = ((p[2] * p[2] - p[0] * p[0] - p[1] * p[1]) / (2.0 * p[0] * p[1])).clamp(-1.0, 1.0);
    let t3 = cos_t3.acos();
    let e3 = Complex64::from_polar(1.0, t3);
    let e4 = -(linalg::c(p[0], 0.0) + e3 * p[1]) / p[2];
    let phase = [linalg::ONE, e3, e4];
    let row3: [Complex64; 3] = std::array::from_fn(|m| linalg::c(moduli[1][m], 0.0));
    // sum_m b_3m conj(b_4m) = sum_m p_m phase_m  =>  b_4m = |b_4m| conj(phase_m).
    let row4: [Complex64; 3] = std::array::from_fn(|m| phase[m].conj() * moduli[2][m]);

    // Row 2 spans the orthogonal complement: conj(row3 x row4).
    let cross = [
        row3[1] * row4[2] - row3[2] * row4[1],
        row3[2] * row4[0] - row3[0] * row4[2],
        row3[0] * row4[1] - row3[1] * row4[0],
    ];
    let norm = cross.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let row2: [Complex64; 3] = std::array::from_fn(|m| cross[m].conj() / norm);

    // Row phases delta_i with c_i1 b'_i4 = delta_i c_ii b'_i2 b'_i3; multiplying
    // row i by delta_i restores c_i1 b_i4 = c_ii b_i2 b_i3.
    let mut rows = [row2, row3, row4];
    for (i, row) in rows.iter_mut().enumerate() {
        let lhs = row[2] * coef.c[i];
        let rhs = row[0] * row[1] * cii[i];
        let delta = lhs / rhs;
        let delta = delta / delta.norm();
        for z in row.iter_mut() {
            *z *= delta;
        }
    }

    // Column i of U is the image of xi_i.
    let mut u = CMatrix::zeros(4, 4);
    u[(0, 0)] = linalg::ONE;
    for (i, row) in rows.iter().enumerate() {
        for (m, z) in row.iter().enumerate() {
            u[(m + 1, i + 1)] = *z;
        }
    }
    Ok((set, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unitarity_defect;
    use crate::qstate::product_residual;

    #[test]
    fn coefficient_examples() {
        let c = appb_coefficients(0.3).unwrap();
        assert!((c.c[1] - 0.625).abs() < 1e-15 && (c.c[2] - 0.625).abs() < 1e-15);
        let c = appb_coefficients(0.5).unwrap();
        for b in c.b4_max {
            assert!((b - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn b4_weights_sum_to_one() {
        for c21 in [0.01, 0.1, 0.25, 0.3, 0.42, 0.5] {
            let c = appb_coefficients(c21).unwrap();
            let s: f64 = c.b4_max.iter().map(|b| b * b).sum();
            assert!((s - 1.0).abs() < 1e-14, "{c21}: {s}");
        }
    }

    #[test]
    fn construction_is_unitary_and_separating() {
        for c21 in [0.05, 0.1, 0.2, 0.3, 0.4, 0.5] {
            let (set, u) = separability_unitary_appb(c21).unwrap();
            assert!(unitarity_defect(&u) <= 1e-10, "{c21}");
            for s in set.pure_states().unwrap() {
                let t = s.transformed(&u).unwrap();
                let r = product_residual(&t, set.bipartition()).unwrap();
                assert!(r <= 1e-9, "c21 = {c21}: residual {r}");
            }
        }
    }

    #[test]
    fn out_of_range() {
        for c21 in [0.0, -0.1, 0.51, 1.0] {
            assert!(separability_unitary_appb(c21).is_err());
        }
    }
}
