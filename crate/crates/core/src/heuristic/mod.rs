//! Upper bounds on absolute set entanglement by multi-start local minimization
//! of `sum_k E(U rho_k U†)` over `U = exp(iH)`.

mod quasi_newton;
mod unitary;

pub use quasi_newton::{central_gradient, project_to_zero_set, QnOptions};
pub use unitary::{hermitian_basis, parameter_count, unitary_from_params, UnitaryMap, UnitaryParams};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::qstate::{self, Bipartition};
use crate::sets::{FamilyParams, StateSet, States};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Negativity,
    Entropy,
}

impl std::str::FromStr for Measure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "negativity" => Ok(Measure::Negativity),
            "entropy" => Ok(Measure::Entropy),
            _ => Err(Error::OutOfRange(format!("unknown measure `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub starts: usize,
    pub max_iter: usize,
    pub grad_eps: f64,
    pub tol: f64,
    pub seed: u64,
    /// Project states that end up nearly unentangled exactly onto the
    /// unentangled set after the descent.
    pub polish: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            starts: 20,
            max_iter: 2000,
            grad_eps: 1e-6,
            tol: 1e-10,
            seed: 0,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizationResult {
    pub value: f64,
    pub theta_opt: UnitaryParams,
    pub per_state: Vec<f64>,
    pub starts: usize,
    pub converged: bool,
}

/// Per-state entanglement below which polishing tries to zero a state.
const POLISH_THRESHOLD: f64 = 1e-3;
/// A polished point may cost at most this much in total objective.
const POLISH_SLACK: f64 = 1e-6;

/// `sum_k E(U rho_k U†)` for one state set and measure.
#[derive(Debug, Clone)]
pub struct SetObjective {
    measure: Measure,
    bp: Bipartition,
    map: UnitaryMap,
    pure: Option<Vec<CVector>>,
    mixed: Vec<CMatrix>,
}

impl SetObjective {
    pub fn new(set: &StateSet, measure: Measure) -> Result<Self> {
        let bp = set.bipartition();
        let (pure, mixed) = match set.states() {
            States::Pure(v) => (Some(v.iter().map(|s| s.amplitudes().clone()).collect()), Vec::new()),
            States::Mixed(v) => {
                if measure == Measure::Entropy {
                    return Err(Error::RequiresPureStates);
                }
                (None, v.iter().map(|r| r.matrix().clone()).collect())
            }
        };
        Ok(Self {
            measure,
            bp,
            map: UnitaryMap::new(bp.dim()),
            pure,
            mixed,
        })
    }

    pub fn dim(&self) -> usize {
        self.bp.dim()
    }

    pub fn len(&self) -> usize {
        self.pure.as_ref().map_or(self.mixed.len(), Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn unitary(&self, theta: &[f64]) -> CMatrix {
        self.map.unitary(theta)
    }

    pub fn per_state_for_unitary(&self, u: &CMatrix) -> Vec<f64> {
        match &self.pure {
            Some(states) => states
                .iter()
                .map(|psi| {
                    let t = u * psi;
                    match self.measure {
                        Measure::Negativity => qstate::pure_negativity_unchecked(&t, self.bp),
                        Measure::Entropy => qstate::entropy_unchecked(&t, self.bp),
                    }
                })
                .collect(),
            None => self
                .mixed
                .iter()
                .map(|rho| {
                    let m = u * rho * u.adjoint();
                    let m = (&m + m.adjoint()).scale(0.5);
                    qstate::negativity_unchecked(&m, self.bp)
                })
                .collect(),
        }
    }

    pub fn per_state(&self, theta: &[f64]) -> Vec<f64> {
        // `+ 0.0` folds `-0.0` into `0.0`.
        self.per_state_for_unitary(&self.unitary(theta))
            .into_iter()
            .map(|x| x + 0.0)
            .collect()
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        self.per_state(theta).iter().sum()
    }

    /// Smooth residuals that vanish iff every listed state is unentangled:
    /// `2x2` minors of the coefficient matrix for pure states, negative
    /// eigenvalues of the partial transpose for mixed ones.
    fn residuals(&self, theta: &[f64], which: &[usize]) -> Vec<f64> {
        let u = self.unitary(theta);
        let mut out = Vec::new();
        match &self.pure {
            Some(states) => {
                for &k in which {
                    qstate::product_minors(&(&u * &states[k]), self.bp, &mut out);
                }
            }
            None => {
                for &k in which {
                    let m = &u * &self.mixed[k] * u.adjoint();
                    let pt = qstate::partial_transpose(&m, self.bp).expect("dims");
                    out.extend(linalg::hermitian_eigenvalues(&pt).into_iter().map(|l| l.min(0.0)));
                }
            }
        }
        out
    }
}

pub fn set_objective(set: &StateSet, measure: Measure, theta: &UnitaryParams) -> Result<f64> {
    let obj = SetObjective::new(set, measure)?;
    if theta.0.len() != parameter_count(obj.dim()) {
        return Err(Error::DimensionMismatch {
            expected: parameter_count(obj.dim()),
            got: theta.0.len(),
        });
    }
    Ok(obj.value(&theta.0))
}

/// Initial parameter vectors: zero first, then uniform in `[-pi, pi]^{d^2}`
/// drawn sequentially from one seeded stream, so start `i` does not depend on
/// how many starts are requested.
pub fn initial_points(d: usize, starts: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = parameter_count(d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(starts);
    if starts > 0 {
        out.push(vec![0.0; n]);
    }
    for _ in 1..starts {
        out.push(
            (0..n)
                .map(|_| rng.random_range(-std::f64::consts::PI..=std::f64::consts::PI))
                .collect(),
        );
    }
    out
}

struct StartOutcome {
    theta: Vec<f64>,
    value: f64,
    converged: bool,
}

fn run_start(obj: &SetObjective, x0: &[f64], opts: &MinimizeOptions) -> StartOutcome {
    let f = |x: &[f64]| obj.value(x);
    let qn = quasi_newton::minimize(
        &f,
        x0,
        0.0,
        &QnOptions {
            max_iter: opts.max_iter,
            grad_eps: opts.grad_eps,
            tol: opts.tol,
        },
    );
    let mut theta = qn.x;
    let mut value = qn.value;
    if opts.polish {
        if let Some((t, v)) = polish(obj, &theta, value) {
            theta = t;
            value = v;
        }
    }
    StartOutcome {
        theta,
        value,
        converged: qn.converged,
    }
}

/// Drives nearly-unentangled states to exactly zero with Gauss-Newton; the
/// polished point is kept if it costs at most `POLISH_SLACK` overall.
fn polish(obj: &SetObjective, theta: &[f64], value: f64) -> Option<(Vec<f64>, f64)> {
    let per = obj.per_state(theta);
    let small: Vec<usize> = (0..per.len())
        .filter(|&k| per[k] > 0.0 && per[k] < POLISH_THRESHOLD)
        .collect();
    if small.is_empty() {
        return None;
    }
    let r = |x: &[f64]| obj.residuals(x, &small);
    let (t, _) = project_to_zero_set(&r, theta, 60);
    let v = obj.value(&t);
    (v <= value + POLISH_SLACK).then_some((t, v))
}

pub fn minimize_set_entanglement(
    set: &StateSet,
    measure: Measure,
    opts: &MinimizeOptions,
) -> Result<MinimizationResult> {
    if opts.starts == 0 {
        return Err(Error::OutOfRange("at least one start is required".into()));
    }
    if !(opts.grad_eps > 0.0) || !(opts.tol >= 0.0) {
        return Err(Error::OutOfRange("grad_eps must be positive and tol nonnegative".into()));
    }
    let obj = SetObjective::new(set, measure)?;
    let points = initial_points(obj.dim(), opts.starts, opts.seed);
    let outcomes: Vec<StartOutcome> = points
        .par_iter()
        .map(|x0| run_start(&obj, x0, opts))
        .collect();
    let best = outcomes
        .into_iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.value.total_cmp(&b.value).then(i.cmp(j)))
        .map(|(_, o)| o)
        .expect("at least one start");
    let per_state = obj.per_state(&best.theta);
    Ok(MinimizationResult {
        value: per_state.iter().sum(),
        theta_opt: UnitaryParams(best.theta),
        per_state,
        starts: opts.starts,
        converged: best.converged,
    })
}

/// One grid point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub param: f64,
    pub family: FamilyParams,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub param: f64,
    pub result: std::result::Result<MinimizationResult, String>,
}

/// Independent minimizations per grid point, returned in grid order.
pub fn sweep(points: &[SweepPoint], measure: Measure, opts: &MinimizeOptions) -> Result<Vec<SweepRow>> {
    if points.is_empty() {
        return Err(Error::Empty("sweep grid"));
    }
    Ok(points
        .par_iter()
        .map(|p| SweepRow {
            param: p.param,
            result: p
                .family
                .build()
                .and_then(|set| minimize_set_entanglement(&set, measure, opts))
                .map_err(|e| e.to_string()),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::{candidate_max_set, one_param_set, warmup_set, FamilyKind};

    #[test]
    fn objective_at_identity() {
        let bp = Bipartition::qubits();
        let set = one_param_set(bp, 0.8).unwrap();
        let v = set_objective(&set, Measure::Negativity, &UnitaryParams::zeros(4)).unwrap();
        assert!((v - 0.48).abs() < 1e-12, "{v}");

        let (w, _) = warmup_set();
        let v = set_objective(&w, Measure::Negativity, &UnitaryParams::zeros(4)).unwrap();
        assert!((v - 2.0).abs() < 1e-12);

        let products = StateSet::pure(
            "p",
            bp,
            (0..4).map(|i| crate::qstate::PureState::basis(4, i)).collect(),
        )
        .unwrap();
        let v = set_objective(&products, Measure::Negativity, &UnitaryParams::zeros(4)).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn entropy_requires_pure_states() {
        let noisy = crate::sets::add_white_noise(&candidate_max_set(), 0.9).unwrap();
        assert!(matches!(
            set_objective(&noisy, Measure::Entropy, &UnitaryParams::zeros(4)),
            Err(Error::RequiresPureStates)
        ));
    }

    #[test]
    fn mixed_and_pure_routes_agree() {
        let set = candidate_max_set();
        let as_mixed = StateSet::mixed("m", set.bipartition(), set.density_matrices()).unwrap();
        let theta: Vec<f64> = (0..16).map(|i| 0.1 * i as f64 - 0.7).collect();
        let a = set_objective(&set, Measure::Negativity, &UnitaryParams(theta.clone())).unwrap();
        let b = set_objective(&as_mixed, Measure::Negativity, &UnitaryParams(theta)).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn initial_points_are_prefix_stable() {
        let a = initial_points(4, 3, 9);
        let b = initial_points(4, 7, 9);
        assert_eq!(a[..], b[..3]);
        assert!(a[0].iter().all(|&t| t == 0.0));
    }

    #[test]
    fn warmup_minimizes_to_zero() {
        let (w, _) = warmup_set();
        let opts = MinimizeOptions {
            starts: 8,
            seed: 1,
            ..Default::default()
        };
        let r = minimize_set_entanglement(&w, Measure::Negativity, &opts).unwrap();
        assert!(r.value <= 1e-6, "{r:?}");
        let u = unitary_from_params(&r.theta_opt, 4).unwrap();
        for s in w.pure_states().unwrap() {
            let t = s.transformed(&u).unwrap();
            assert!(qstate::product_residual(&t, w.bipartition()).unwrap() < 1e-6);
        }
    }

    #[test]
    fn sweep_rows_follow_grid_order() {
        let bp = Bipartition::qubits();
        let points: Vec<SweepPoint> = [0.0, 1.0, 0.5]
            .iter()
            .map(|&v| SweepPoint {
                param: v,
                family: FamilyParams {
                    kind: FamilyKind::CandidateMax,
                    bp,
                    c: None,
                    v,
                },
            })
            .collect();
        let opts = MinimizeOptions {
            starts: 2,
            max_iter: 50,
            ..Default::default()
        };
        let rows = sweep(&points, Measure::Negativity, &opts).unwrap();
        assert_eq!(rows.iter().map(|r| r.param).collect::<Vec<_>>(), vec![0.0, 1.0, 0.5]);
        assert_eq!(rows[0].result.as_ref().unwrap().value, 0.0);
        assert!(sweep(&[], Measure::Negativity, &opts).is_err());
    }
}
