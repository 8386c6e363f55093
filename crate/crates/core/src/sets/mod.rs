//! Candidate and certified absolutely entangled sets, analytic thresholds and
//! the constructive unitaries that make small sets product.

mod label;
mod productize;
mod separable;

pub use label::SetSpec;
pub use productize::productizing_basis;
pub use separable::{appb_coefficients, separability_unitary_appb, AppBCoefficients};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::qstate::{Bipartition, DensityMatrix, PureState};

#[derive(Debug, Clone, PartialEq)]
pub enum States {
    Pure(Vec<PureState>),
    Mixed(Vec<DensityMatrix>),
}

/// An ordered, nonempty list of states sharing one bipartition.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSet {
    label: String,
    bp: Bipartition,
    states: States,
}

impl StateSet {
    pub fn pure(label: impl Into<String>, bp: Bipartition, states: Vec<PureState>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Empty("state set"));
        }
        for s in &states {
            if s.dim() != bp.dim() {
                return Err(Error::DimensionMismatch {
                    expected: bp.dim(),
                    got: s.dim(),
                });
            }
        }
        Ok(Self {
            label: label.into(),
            bp,
            states: States::Pure(states),
        })
    }

    pub fn mixed(
        label: impl Into<String>,
        bp: Bipartition,
        states: Vec<DensityMatrix>,
    ) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Empty("state set"));
        }
        for s in &states {
            if s.dim() != bp.dim() {
                return Err(Error::DimensionMismatch {
                    expected: bp.dim(),
                    got: s.dim(),
                });
            }
        }
        Ok(Self {
            label: label.into(),
            bp,
            states: States::Mixed(states),
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn bipartition(&self) -> Bipartition {
        self.bp
    }

    pub fn dim(&self) -> usize {
        self.bp.dim()
    }

    pub fn len(&self) -> usize {
        match &self.states {
            States::Pure(v) => v.len(),
            States::Mixed(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.states, States::Pure(_))
    }

    pub fn states(&self) -> &States {
        &self.states
    }

    pub fn pure_states(&self) -> Option<&[PureState]> {
        match &self.states {
            States::Pure(v) => Some(v),
            States::Mixed(_) => None,
        }
    }

    /// Density matrices of all states (pure states are promoted to projectors).
    pub fn density_matrices(&self) -> Vec<DensityMatrix> {
        match &self.states {
            States::Pure(v) => v.iter().map(PureState::projector).collect(),
            States::Mixed(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    OneParam,
    CandidateMax,
    #[serde(rename = "appendixB")]
    AppendixB,
}

/// One point of a state family: the family, its amplitude parameter where the
/// family has one, and a white-noise visibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub kind: FamilyKind,
    pub bp: Bipartition,
    pub c: Option<f64>,
    pub v: f64,
}

impl FamilyParams {
    pub fn build(&self) -> Result<StateSet> {
        if !(0.0..=1.0).contains(&self.v) {
            return Err(Error::OutOfRange(format!("visibility {} not in [0, 1]", self.v)));
        }
        let need_c = || {
            self.c
                .ok_or_else(|| Error::OutOfRange("family parameter c is required".into()))
        };
        let set = match self.kind {
            FamilyKind::OneParam => one_param_set(self.bp, need_c()?)?,
            FamilyKind::CandidateMax => candidate_max_set(),
            FamilyKind::AppendixB => separability_unitary_appb(need_c()?)?.0,
        };
        if self.v < 1.0 {
            add_white_noise(&set, self.v)
        } else {
            Ok(set)
        }
    }
}

/// `|phi_1> = |xi_1>`, `|phi_k> = c|xi_1> + sqrt(1 - c^2)|xi_k>` for
/// `k = 2..=d1+d2`, over the computational basis.
pub fn one_param_set(bp: Bipartition, c: f64) -> Result<StateSet> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::OutOfRange(format!("c = {c} not in (0, 1)")));
    }
    let d = bp.dim();
    let k = bp.d1() + bp.d2();
    let s = (1.0 - c * c).sqrt();
    let mut states = vec![PureState::basis(d, 0)];
    for idx in 1..k {
        let mut v = CVector::zeros(d);
        v[0] = linalg::c(c, 0.0);
        v[idx] = linalg::c(s, 0.0);
        states.push(PureState::normalized(v)?);
    }
    StateSet::pure(format!("one-param:{}x{}:{}", bp.d1(), bp.d2(), c), bp, states)
}

/// `sqrt((d1-1)(d2-1)/(d1 d2))`: the one-parameter family is absolutely
/// entangled for `c` strictly above this value.
pub fn threshold_amplitude(bp: Bipartition) -> f64 {
    let (d1, d2) = (bp.d1() as f64, bp.d2() as f64);
    ((d1 - 1.0) * (d2 - 1.0) / (d1 * d2)).sqrt()
}

/// Lower bound on `sum_k S_k` for the one-parameter family with overlap `a`
/// and `K` states, attained when the column weights `B_k` are all equal.
pub fn schmidt_column_lower_bound(bp: Bipartition, k: usize, a: f64) -> f64 {
    let d1 = bp.d1() as f64;
    let k = k as f64;
    let a2 = a * a;
    (k - 1.0) * (k - d1) * a2 / ((d1 - 1.0) * (1.0 - a2) + (k - 1.0) * a2)
}

/// `(a, b, c)` of the four-state candidate with the largest known absolute set negativity.
pub fn candidate_max_coefficients() -> (f64, f64, f64) {
    let a: f64 = 0.6245;
    let b = (-3.0 * a * a + a - 2.0 * (1.0 - a) * (3.0 * a + 1.0).sqrt() + 2.0).sqrt() / 3.0;
    let c = (1.0 - a * a - 2.0 * b * b).sqrt();
    (a, b, c)
}

pub fn candidate_max_set() -> StateSet {
    let (a, b, c) = candidate_max_coefficients();
    let rows: [[f64; 4]; 4] = [
        [1.0, 0.0, 0.0, 0.0],
        [a, b, b, c],
        [a, b, c, b],
        [a, c, b, b],
    ];
    let states = rows
        .iter()
        .map(|r| PureState::normalized(CVector::from_iterator(4, r.iter().map(|&x| linalg::c(x, 0.0)))))
        .collect::<Result<Vec<_>>>()
        .expect("nonzero amplitudes");
    StateSet::pure("set2", Bipartition::qubits(), states).expect("dimension 4")
}

/// Replaces each state by `v rho_k + (1 - v) I/d`.
pub fn add_white_noise(set: &StateSet, v: f64) -> Result<StateSet> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::OutOfRange(format!("visibility {v} not in [0, 1]")));
    }
    let states = set
        .density_matrices()
        .iter()
        .map(|r| r.mixed_with_white_noise(v))
        .collect();
    StateSet::mixed(format!("{}@v={}", set.label(), v), set.bipartition(), states)
}

/// Computational basis plus Bell basis, and the CNOT that makes all eight product.
pub fn warmup_set() -> (StateSet, CMatrix) {
    let s = 0.5f64.sqrt();
    let rows: [[f64; 4]; 8] = [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [s, 0.0, 0.0, s],
        [s, 0.0, 0.0, -s],
        [0.0, s, s, 0.0],
        [0.0, s, -s, 0.0],
    ];
    let states = rows
        .iter()
        .map(|r| PureState::normalized(CVector::from_iterator(4, r.iter().map(|&x| linalg::c(x, 0.0)))))
        .collect::<Result<Vec<_>>>()
        .expect("nonzero amplitudes");
    let set = StateSet::pure("warmup", Bipartition::qubits(), states).expect("dimension 4");
    (set, cnot())
}

/// CNOT with the first qubit as control.
pub fn cnot() -> CMatrix {
    let mut u = CMatrix::zeros(4, 4);
    for (i, j) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        u[(i, j)] = linalg::ONE;
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{negativity, product_residual};

    #[test]
    fn one_param_overlaps() {
        let set = one_param_set(Bipartition::qubits(), 0.8).unwrap();
        let s = set.pure_states().unwrap();
        assert_eq!(s.len(), 4);
        for k in 1..4 {
            let o = s[0].amplitudes().dotc(s[k].amplitudes());
            assert!((o.re - 0.8).abs() < 1e-12 && o.im.abs() < 1e-12);
        }
        let o23 = s[1].amplitudes().dotc(s[2].amplitudes());
        assert!((o23.re - 0.64).abs() < 1e-12);
    }

    #[test]
    fn one_param_states_are_normalized_for_every_bipartition() {
        for (d1, d2) in [(2, 2), (2, 3), (3, 3), (2, 4), (4, 3)] {
            let bp = Bipartition::new(d1, d2).unwrap();
            let set = one_param_set(bp, 0.7).unwrap();
            assert_eq!(set.len(), d1 + d2);
            for s in set.pure_states().unwrap() {
                assert!((s.amplitudes().norm_squared() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn one_param_rejects_out_of_range() {
        for c in [0.0, 1.0, -0.3, 1.2, f64::NAN] {
            assert!(one_param_set(Bipartition::qubits(), c).is_err());
        }
    }

    #[test]
    fn thresholds() {
        let t = |a, b| threshold_amplitude(Bipartition::new(a, b).unwrap());
        assert!((t(2, 2) - 0.5).abs() < 1e-12);
        assert!((t(2, 3) - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((t(3, 3) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn column_bound_crosses_d2_minus_one_exactly_at_threshold() {
        for (d1, d2) in [(2, 2), (2, 3), (3, 3), (3, 4)] {
            let bp = Bipartition::new(d1, d2).unwrap();
            let k = d1 + d2;
            let t = threshold_amplitude(bp);
            let at = schmidt_column_lower_bound(bp, k, t);
            assert!((at - (d2 as f64 - 1.0)).abs() < 1e-12);
            assert!(schmidt_column_lower_bound(bp, k, t + 1e-3) > d2 as f64 - 1.0);
            assert!(schmidt_column_lower_bound(bp, k, t - 1e-3) < d2 as f64 - 1.0);
        }
    }

    #[test]
    fn candidate_max_coefficients_match_formula() {
        let (a, b, c) = candidate_max_coefficients();
        assert_eq!(a, 0.6245);
        // Frozen from a 30-digit mpmath evaluation of the same closed forms.
        assert!((b - 0.141_989_446_296_178_5).abs() < 1e-15, "{b}");
        assert!((c - 0.754_769_994_290_319_7).abs() < 1e-15, "{c}");
        assert!((b - 0.14200).abs() < 2e-5 && (c - 0.75477).abs() < 2e-5);
        for s in candidate_max_set().pure_states().unwrap() {
            assert!((s.amplitudes().norm_squared() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn white_noise() {
        let set = candidate_max_set();
        let same = add_white_noise(&set, 1.0).unwrap();
        for (a, b) in same.density_matrices().iter().zip(set.density_matrices()) {
            assert!(linalg::max_abs_diff(a.matrix(), b.matrix()) < 1e-15);
        }
        let flat = add_white_noise(&set, 0.0).unwrap();
        let mm = DensityMatrix::maximally_mixed(4);
        for r in flat.density_matrices() {
            assert!(linalg::max_abs_diff(r.matrix(), mm.matrix()) < 1e-15);
        }
        for v in [0.1, 0.55, 0.9] {
            for r in add_white_noise(&set, v).unwrap().density_matrices() {
                let ev = linalg::hermitian_eigenvalues(r.matrix());
                assert!(ev[0] >= (1.0 - v) / 4.0 - 1e-12);
                assert!((linalg::trace(r.matrix()).re - 1.0).abs() < 1e-12);
            }
        }
        assert!(add_white_noise(&set, 1.5).is_err());
    }

    #[test]
    fn warmup_cnot_makes_everything_product() {
        let (set, u) = warmup_set();
        let bp = set.bipartition();
        let states = set.pure_states().unwrap();
        for s in &states[..4] {
            assert!(product_residual(s, bp).unwrap() < 1e-15);
        }
        for s in states {
            let t = s.transformed(&u).unwrap();
            assert!(product_residual(&t, bp).unwrap() < 1e-15);
        }
        // CNOT|Phi+> = |+>|0>
        let t = states[4].transformed(&u).unwrap();
        let s = 0.5f64.sqrt();
        let plus_zero = [s, 0.0, s, 0.0];
        for (a, b) in t.amplitudes().iter().zip(plus_zero) {
            assert!((a.re - b).abs() < 1e-15 && a.im.abs() < 1e-15);
        }
        let n = negativity(states[7].projector().matrix(), bp).unwrap();
        assert!((n - 0.5).abs() < 1e-12);
    }

    #[test]
    fn family_params_build() {
        let p = FamilyParams {
            kind: FamilyKind::CandidateMax,
            bp: Bipartition::qubits(),
            c: None,
            v: 0.5,
        };
        let set = p.build().unwrap();
        assert!(!set.is_pure());
        let p = FamilyParams {
            kind: FamilyKind::OneParam,
            bp: Bipartition::qubits(),
            c: None,
            v: 1.0,
        };
        assert!(p.build().is_err());
    }
}
