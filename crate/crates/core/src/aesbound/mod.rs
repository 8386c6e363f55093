//! Moment relaxation of the absolute set negativity.
//!
//! With `U` a global unitary and `sigma_k^+ - sigma_k^- = U rho_k U^dagger`
//! (both terms PPT), the minimum of `sum_k Tr sigma_k^-` over `U` and the
//! splits is the absolute set negativity. The relaxation replaces the
//! polynomial program by moment matrices over the real and imaginary parts of
//! `U` and of the Hermitian `sigma_k^+-`; any dual-feasible point of the
//! resulting SDP is a certified lower bound.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::polyopt::{self, Inequality, Monomial, PolyMatrix, Polynomial, SymbolicSdp};
use crate::qstate::{self, binary_entropy, Bipartition};
use crate::sdpcore::{self, CertificateReport, ExportOptions, NumericSdp, SdpSolution, SdpStatus, SizeBudget, SolverOptions};
use crate::sets::StateSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RelaxationConfig {
    /// Degree of the monomial basis of the `u` moment matrix.
    pub moment_deg_u: u32,
    /// Degree of the basis of each `sigma_k^+-` moment matrix.
    pub moment_deg_xi: u32,
    /// Degree of the `u` basis localizing the PPT and state constraints.
    pub loc_deg_u: u32,
    /// Degree of the `{u, xi_k}` basis localizing `U U^dagger = 1`.
    pub eq_deg: u32,
    pub include_left_unitarity: bool,
    /// Also require `sigma_k^+-` itself to be PSD (first moments only). This
    /// changes the minimized quantity and is off by default.
    pub include_sigma_psd: bool,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        Self {
            moment_deg_u: 2,
            moment_deg_xi: 2,
            loc_deg_u: 1,
            eq_deg: 1,
            include_left_unitarity: false,
            include_sigma_psd: false,
        }
    }
}

impl RelaxationConfig {
    /// A small relaxation that stays within the internal solver budget.
    pub fn reduced() -> Self {
        Self {
            moment_deg_u: 1,
            moment_deg_xi: 1,
            loc_deg_u: 0,
            eq_deg: 1,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

/// Slot numbering of the polynomial variables.
///
/// `u_{ij}` takes slots `2(i d + j)` (real part) and `2(i d + j) + 1`
/// (imaginary part). Each `sigma_k^s` takes `d^2` consecutive slots starting at
/// `2 d^2 + (2k + s) d^2`: the `d` diagonal entries, then real and imaginary
/// parts of the upper triangle in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableLayout {
    pub dim: usize,
    pub states: usize,
}

impl VariableLayout {
    pub fn new(dim: usize, states: usize) -> Self {
        Self { dim, states }
    }

    pub fn nvars(&self) -> usize {
        2 * self.dim * self.dim * (1 + self.states)
    }

    pub fn u_re(&self, i: usize, j: usize) -> usize {
        2 * (i * self.dim + j)
    }

    pub fn u_im(&self, i: usize, j: usize) -> usize {
        2 * (i * self.dim + j) + 1
    }

    pub fn u_vars(&self) -> Vec<usize> {
        (0..2 * self.dim * self.dim).collect()
    }

    fn sigma_base(&self, k: usize, s: Sign) -> usize {
        let d2 = self.dim * self.dim;
        2 * d2 + (2 * k + usize::from(s == Sign::Minus)) * d2
    }

    pub fn xi_vars(&self, k: usize, s: Sign) -> Vec<usize> {
        let b = self.sigma_base(k, s);
        (b..b + self.dim * self.dim).collect()
    }

    /// `(real slot, imaginary slot)` of entry `(i, j)` of `sigma_k^s`; the
    /// diagonal has no imaginary slot. For `i > j` the entry is the conjugate.
    pub fn sigma_slots(&self, k: usize, s: Sign, i: usize, j: usize) -> (usize, Option<usize>) {
        let b = self.sigma_base(k, s);
        let d = self.dim;
        if i == j {
            return (b + i, None);
        }
        let (a, c) = if i < j { (i, j) } else { (j, i) };
        let p = a * d - a * (a + 1) / 2 + (c - a - 1);
        (b + d + 2 * p, Some(b + d + 2 * p + 1))
    }

    /// Polynomial variables of a point `(U, sigma_k^+, sigma_k^-)`.
    pub fn point(&self, u: &CMatrix, sigmas: &[(CMatrix, CMatrix)]) -> Vec<f64> {
        let d = self.dim;
        let mut x = vec![0.0; self.nvars()];
        for i in 0..d {
            for j in 0..d {
                x[self.u_re(i, j)] = u[(i, j)].re;
                x[self.u_im(i, j)] = u[(i, j)].im;
            }
        }
        for (k, (sp, sm)) in sigmas.iter().enumerate() {
            for (s, m) in [(Sign::Plus, sp), (Sign::Minus, sm)] {
                for i in 0..d {
                    for j in i..d {
                        let (re, im) = self.sigma_slots(k, s, i, j);
                        x[re] = m[(i, j)].re;
                        if let Some(im) = im {
                            x[im] = m[(i, j)].im;
                        }
                    }
                }
            }
        }
        x
    }
}

/// Complex polynomial as a pair of real polynomials.
#[derive(Debug, Clone)]
struct CPoly {
    re: Polynomial,
    im: Polynomial,
}

impl CPoly {
    fn zero() -> Self {
        Self {
            re: Polynomial::zero(),
            im: Polynomial::zero(),
        }
    }

    fn from_slots(re: usize, im: Option<usize>, conj: bool) -> Self {
        let im = match im {
            Some(v) => Polynomial::var(v).scale(if conj { -1.0 } else { 1.0 }),
            None => Polynomial::zero(),
        };
        Self {
            re: Polynomial::var(re),
            im,
        }
    }

    fn conj(&self) -> Self {
        Self {
            re: self.re.clone(),
            im: self.im.scale(-1.0),
        }
    }

    fn mul(&self, o: &CPoly) -> Self {
        Self {
            re: self.re.mul(&o.re).sub(&self.im.mul(&o.im)),
            im: self.re.mul(&o.im).add(&self.im.mul(&o.re)),
        }
    }

    fn add_scaled(&mut self, o: &CPoly, z: num_complex::Complex64) {
        self.re.add_assign_scaled(&o.re, z.re);
        self.re.add_assign_scaled(&o.im, -z.im);
        self.im.add_assign_scaled(&o.im, z.re);
        self.im.add_assign_scaled(&o.re, z.im);
    }

    fn add_assign(&mut self, o: &CPoly, s: f64) {
        self.re.add_assign_scaled(&o.re, s);
        self.im.add_assign_scaled(&o.im, s);
    }
}

type CPolyMatrix = Vec<Vec<CPoly>>;

fn u_matrix(l: &VariableLayout) -> CPolyMatrix {
    (0..l.dim)
        .map(|i| (0..l.dim).map(|j| CPoly::from_slots(l.u_re(i, j), Some(l.u_im(i, j)), false)).collect())
        .collect()
}

fn sigma_matrix(l: &VariableLayout, k: usize, s: Sign) -> CPolyMatrix {
    (0..l.dim)
        .map(|i| {
            (0..l.dim)
                .map(|j| {
                    let (re, im) = l.sigma_slots(k, s, i, j);
                    CPoly::from_slots(re, im, i > j)
                })
                .collect()
        })
        .collect()
}

fn partial_transpose_a(m: &CPolyMatrix, bp: Bipartition) -> CPolyMatrix {
    let d = bp.dim();
    let mut out = vec![vec![CPoly::zero(); d]; d];
    for i1 in 0..bp.d1() {
        for i2 in 0..bp.d2() {
            for j1 in 0..bp.d1() {
                for j2 in 0..bp.d2() {
                    out[bp.index(i1, i2)][bp.index(j1, j2)] = m[bp.index(j1, i2)][bp.index(i1, j2)].clone();
                }
            }
        }
    }
    out
}

fn real_embedding(m: &CPolyMatrix) -> Result<PolyMatrix> {
    let n = m.len();
    let mut rows = vec![vec![Polynomial::zero(); 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            let z = &m[i][j];
            rows[i][j] = z.re.clone();
            rows[i + n][j + n] = z.re.clone();
            rows[i][j + n] = z.im.scale(-1.0);
            rows[i + n][j] = z.im.clone();
        }
    }
    PolyMatrix::from_rows(rows)
}

/// Independent real equations of a Hermitian polynomial matrix: the real
/// diagonal and the real and imaginary parts of the upper triangle.
fn hermitian_equations(m: &CPolyMatrix) -> Vec<Polynomial> {
    let n = m.len();
    let mut out = Vec::new();
    for i in 0..n {
        out.push(m[i][i].re.clone());
        for j in i + 1..n {
            out.push(m[i][j].re.clone());
            out.push(m[i][j].im.clone());
        }
    }
    out.retain(|p| !p.is_zero());
    out
}

/// `U U^dagger - 1` (or `U^dagger U - 1` when `left`).
fn unitarity_defect(u: &CPolyMatrix, left: bool) -> CPolyMatrix {
    let d = u.len();
    let mut out = vec![vec![CPoly::zero(); d]; d];
    for (a, row) in out.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            for c in 0..d {
                let t = if left {
                    u[c][a].conj().mul(&u[c][b])
                } else {
                    u[a][c].mul(&u[b][c].conj())
                };
                cell.add_assign(&t, 1.0);
            }
            if a == b {
                cell.re.add_term(Monomial::one(), -1.0);
            }
        }
    }
    out
}

/// `U rho U^dagger - sigma^+ + sigma^-`.
fn state_defect(u: &CPolyMatrix, rho: &CMatrix, sp: &CPolyMatrix, sm: &CPolyMatrix) -> CPolyMatrix {
    let d = u.len();
    let mut ur = vec![vec![CPoly::zero(); d]; d];
    for a in 0..d {
        for e in 0..d {
            for c in 0..d {
                if rho[(c, e)] != linalg::ZERO {
                    ur[a][e].add_scaled(&u[a][c], rho[(c, e)]);
                }
            }
        }
    }
    let mut out = vec![vec![CPoly::zero(); d]; d];
    for a in 0..d {
        for b in a..d {
            let mut cell = CPoly::zero();
            for e in 0..d {
                cell.add_assign(&ur[a][e].mul(&u[b][e].conj()), 1.0);
            }
            cell.add_assign(&sp[a][b], -1.0);
            cell.add_assign(&sm[a][b], 1.0);
            out[a][b] = cell;
        }
    }
    for a in 0..d {
        for b in 0..a {
            out[a][b] = out[b][a].conj();
        }
    }
    out
}

/// Assembles the relaxation for a state set.
pub fn build_negativity_relaxation(set: &StateSet, cfg: &RelaxationConfig) -> Result<SymbolicSdp> {
    if cfg.eq_deg < 1 {
        return Err(Error::InvalidConfig(
            "unitarity equalities need a localizing basis of degree at least 1".into(),
        ));
    }
    let bp = set.bipartition();
    let layout = VariableLayout::new(set.dim(), set.len());
    let rhos = set.density_matrices();
    let u = u_matrix(&layout);
    let u_vars = layout.u_vars();

    let mut objective = Polynomial::zero();
    for k in 0..set.len() {
        for i in 0..layout.dim {
            objective.add_term(Monomial::var(layout.sigma_slots(k, Sign::Minus, i, i).0), 1.0);
        }
    }

    let mut moment_bases = vec![polyopt::monomial_basis_over(&u_vars, cfg.moment_deg_u)];
    for k in 0..set.len() {
        for s in [Sign::Plus, Sign::Minus] {
            moment_bases.push(polyopt::monomial_basis_over(&layout.xi_vars(k, s), cfg.moment_deg_xi));
        }
    }

    let loc = polyopt::monomial_basis_over(&u_vars, cfg.loc_deg_u);
    let mut ineqs = Vec::new();
    let mut eqs = Vec::new();
    for (k, rho) in rhos.iter().enumerate() {
        let sp = sigma_matrix(&layout, k, Sign::Plus);
        let sm = sigma_matrix(&layout, k, Sign::Minus);
        for s in [&sp, &sm] {
            ineqs.push(Inequality::Psd(real_embedding(&partial_transpose_a(s, bp))?, loc.clone()));
            if cfg.include_sigma_psd {
                ineqs.push(Inequality::Psd(real_embedding(s)?, vec![Monomial::one()]));
            }
        }
        for h in hermitian_equations(&state_defect(&u, rho.matrix(), &sp, &sm)) {
            eqs.push((h, loc.clone()));
        }
    }

    let mut unit = hermitian_equations(&unitarity_defect(&u, false));
    if cfg.include_left_unitarity {
        unit.extend(hermitian_equations(&unitarity_defect(&u, true)));
    }
    for k in 0..set.len() {
        let mut vars: BTreeSet<usize> = u_vars.iter().copied().collect();
        vars.extend(layout.xi_vars(k, Sign::Plus));
        vars.extend(layout.xi_vars(k, Sign::Minus));
        let basis = polyopt::monomial_basis_over(&vars.into_iter().collect::<Vec<_>>(), cfg.eq_deg);
        for h in &unit {
            eqs.push((h.clone(), basis.clone()));
        }
    }

    let mut sdp = polyopt::assemble_relaxation(&objective, &ineqs, &eqs, &moment_bases)?;
    sdp.nvars = layout.nvars();
    Ok(sdp)
}

/// Splits `U rho U^dagger` into `sigma^+ - sigma^-` with `(sigma^+-)^{T_A}`
/// the positive and negative spectral parts of its partial transpose, so
/// `Tr sigma^-` is its negativity.
pub fn negativity_split(rotated: &CMatrix, bp: Bipartition) -> Result<(CMatrix, CMatrix)> {
    let pt = qstate::partial_transpose(rotated, bp)?;
    let (ev, vecs) = linalg::hermitian_eigh(&pt);
    let d = ev.len();
    let mut pos = CMatrix::zeros(d, d);
    let mut neg = CMatrix::zeros(d, d);
    for (i, &l) in ev.iter().enumerate() {
        let v = vecs.column(i);
        let p = v * v.adjoint();
        if l >= 0.0 {
            pos += p.scale(l);
        } else {
            neg += p.scale(-l);
        }
    }
    Ok((qstate::partial_transpose(&pos, bp)?, qstate::partial_transpose(&neg, bp)?))
}

/// Polynomial variables of the exact split of every state rotated by `u`.
pub fn feasible_point(set: &StateSet, u: &CMatrix) -> Result<Vec<f64>> {
    let layout = VariableLayout::new(set.dim(), set.len());
    let sigmas = set
        .density_matrices()
        .iter()
        .map(|r| negativity_split(&r.conjugated(u), set.bipartition()))
        .collect::<Result<Vec<_>>>()?;
    Ok(layout.point(u, &sigmas))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveMode {
    Internal,
    /// Write the problem to this `.dat-s` path (or `<label>.dat-s` inside it,
    /// if it is a directory) with a `.json` sidecar next to it.
    Export(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// `max(dual value, 0)`, using the dual value recomputed from `X` when
    /// the solution carries one.
    pub bound: f64,
    pub dual_value: f64,
    pub primal_value: f64,
    pub status: SdpStatus,
    pub certificate: CertificateReport,
    pub moments: usize,
    pub largest_block: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundOutcome {
    Solved(BoundReport),
    Exported { sdpa: PathBuf, sidecar: PathBuf },
}

/// Metadata written next to an exported problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub label: String,
    pub config: RelaxationConfig,
    pub layout: VariableLayout,
    /// Moment of every SDP variable as `[[var, power], ...]`, in order.
    pub moments: Vec<Vec<(u32, u32)>>,
    /// Variables at the identity unitary. Its moments are an exactly feasible
    /// primal point, usable as the primal half of an external certificate.
    pub feasible_point: Vec<f64>,
}

pub fn lower_bound_negativity(set: &StateSet, cfg: &RelaxationConfig, mode: &SolveMode) -> Result<BoundOutcome> {
    lower_bound_negativity_with(set, cfg, mode, &SizeBudget::default(), &SolverOptions::default())
}

pub fn lower_bound_negativity_with(
    set: &StateSet,
    cfg: &RelaxationConfig,
    mode: &SolveMode,
    budget: &SizeBudget,
    opts: &SolverOptions,
) -> Result<BoundOutcome> {
    let sdp = build_negativity_relaxation(set, cfg)?;
    let p = sdpcore::lower_numeric(&sdp);
    match mode {
        SolveMode::Internal => {
            budget.check(&p)?;
            let sol = sdpcore::solve_with(&p, opts)?;
            let certificate = sdpcore::check_certificate(&p, &sol)?;
            Ok(BoundOutcome::Solved(report(&p, &sol, certificate, sdp.variables.len())))
        }
        SolveMode::Export(dir) => {
            let (sdpa, sidecar) = export(set, cfg, &sdp, &p, dir)?;
            Ok(BoundOutcome::Exported { sdpa, sidecar })
        }
    }
}

fn report(p: &NumericSdp, sol: &SdpSolution, certificate: CertificateReport, moments: usize) -> BoundReport {
    // A recomputed dual value is authoritative over the claimed one.
    let dual_value = certificate.dual_value.unwrap_or(sol.dual_value);
    BoundReport {
        bound: dual_value.max(0.0),
        dual_value,
        primal_value: sol.primal_value,
        status: sol.status,
        certificate,
        moments,
        largest_block: p.largest_block(),
    }
}

fn file_stem(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    if s.is_empty() {
        "relaxation".into()
    } else {
        s
    }
}

fn export(set: &StateSet, cfg: &RelaxationConfig, sdp: &SymbolicSdp, p: &NumericSdp, target: &Path) -> Result<(PathBuf, PathBuf)> {
    let sdpa = if target.is_dir() {
        target.join(format!("{}.dat-s", file_stem(set.label())))
    } else {
        target.to_path_buf()
    };
    if let Some(parent) = sdpa.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let sidecar = sdpa.with_extension("json");
    std::fs::write(&sdpa, sdpcore::export_sdpa(p, &ExportOptions::default())).map_err(|e| Error::io(&sdpa, e))?;
    let meta = Sidecar {
        label: set.label().to_string(),
        config: *cfg,
        layout: VariableLayout::new(set.dim(), set.len()),
        moments: sdp.variables.iter().map(|m| m.powers().to_vec()).collect(),
        feasible_point: feasible_point(set, &CMatrix::identity(set.dim(), set.dim()))?,
    };
    std::fs::write(&sidecar, serde_json::to_string(&meta)?).map_err(|e| Error::io(&sidecar, e))?;
    Ok((sdpa, sidecar))
}

/// Validates an externally produced solution of an exported problem and
/// turns it into a bound.
pub fn bound_from_solution(p: &NumericSdp, sol: &SdpSolution) -> Result<BoundReport> {
    let certificate = sdpcore::check_certificate(p, sol)?;
    Ok(report(p, sol, certificate, p.nvars))
}

/// `f(N) = h((1 + sqrt(1 - 4 N^2)) / 2)`: least entanglement entropy of a pure
/// state with negativity `N` (two-qubit bound).
pub fn entropy_of_negativity(n: f64) -> Result<f64> {
    if !(0.0..=0.5 + 1e-12).contains(&n) {
        return Err(Error::OutOfRange(format!("negativity {n} outside [0, 1/2]")));
    }
    let n = n.min(0.5);
    Ok(binary_entropy((1.0 + (1.0 - 4.0 * n * n).max(0.0).sqrt()) / 2.0))
}

/// `K f(N / K)`.
pub fn entropy_lower_bound(n_lower: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Empty("state set"));
    }
    if n_lower < 0.0 {
        return Err(Error::OutOfRange(format!("negativity bound {n_lower} is negative")));
    }
    Ok(k as f64 * entropy_of_negativity(n_lower / k as f64)?)
}
