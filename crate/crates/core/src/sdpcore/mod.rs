//! Numeric semidefinite programs: a dense primal-dual interior-point solver,
//! sparse SDPA interchange and independent certificate checking.
//!
//! Problems have the form
//!
//! ```text
//! minimize    offset + c^T y
//! subject to  F_0 + sum_i y_i F_i  >= 0   (each block)
//!             A y = b
//! ```
//!
//! with dual `maximize offset - <F_0, X> + b^T l` subject to
//! `<F_i, X> + (A^T l)_i = c_i`, `X >= 0`.

mod ipm;
mod presolve;
pub mod random;
mod sdpa;

pub use sdpa::{export_sdpa, import_sdpa, ExportOptions};

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::min_eigenvalue_real;
use crate::polyopt::SymbolicSdp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Dense,
    Diagonal,
}

/// One PSD block `F_0 + sum_i y_i F_i`, stored as upper-triangle entries
/// keyed by `(matrix, row, col)` where matrix `0` is `F_0` and `i + 1` is `F_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpBlock {
    size: usize,
    kind: BlockKind,
    entries: BTreeMap<(usize, usize, usize), f64>,
}

impl SdpBlock {
    pub fn new(size: usize, kind: BlockKind) -> Self {
        Self {
            size,
            kind,
            entries: BTreeMap::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn kind(&self) -> BlockKind {
        self.kind
    }

    /// Adds `v` to entry `(i, j)` (and `(j, i)`) of matrix `matno`; `0` is `F_0`.
    pub fn add(&mut self, matno: usize, i: usize, j: usize, v: f64) -> Result<()> {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        if j >= self.size {
            return Err(Error::OutOfRange(format!(
                "entry ({i}, {j}) outside a block of size {}",
                self.size
            )));
        }
        if self.kind == BlockKind::Diagonal && i != j {
            return Err(Error::OutOfRange(format!("off-diagonal entry ({i}, {j}) in a diagonal block")));
        }
        if v == 0.0 {
            return Ok(());
        }
        let e = self.entries.entry((matno, i, j)).or_insert(0.0);
        *e += v;
        if *e == 0.0 {
            self.entries.remove(&(matno, i, j));
        }
        Ok(())
    }

    /// `(matno, i, j, value)` with `i <= j`, in SDPA order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(m, i, j), &v)| (m, i, j, v))
    }

    pub fn matrix_entries(&self, matno: usize) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries
            .range((matno, 0, 0)..(matno + 1, 0, 0))
            .map(|(&(_, i, j), &v)| (i, j, v))
    }

    /// Variables with a nonzero coefficient matrix in this block.
    pub fn variables(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.entries.keys().filter(|k| k.0 > 0).map(|k| k.0 - 1).collect();
        out.dedup();
        out
    }

    pub fn max_matno(&self) -> usize {
        self.entries.keys().map(|k| k.0).max().unwrap_or(0)
    }

    /// `F_0 + sum_i y_i F_i` as a dense symmetric matrix.
    pub fn eval(&self, y: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.size, self.size);
        for (&(k, i, j), &v) in &self.entries {
            let w = if k == 0 { v } else { v * y[k - 1] };
            m[(i, j)] += w;
            if i != j {
                m[(j, i)] += w;
            }
        }
        m
    }

    /// `<F_k, X>` for every matrix of the block, `X` symmetric.
    fn inner_products(&self, x: &DMatrix<f64>, out_const: &mut f64, out: &mut [f64]) {
        for (&(k, i, j), &v) in &self.entries {
            let ip = if i == j { v * x[(i, i)] } else { v * (x[(i, j)] + x[(j, i)]) };
            if k == 0 {
                *out_const += ip;
            } else {
                out[k - 1] += ip;
            }
        }
    }
}

/// Sparse linear equality `sum coeffs = rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl EqRow {
    /// Merges repeated variables and drops zeros.
    pub fn new(coeffs: impl IntoIterator<Item = (usize, f64)>, rhs: f64) -> Self {
        let mut map = BTreeMap::new();
        for (v, c) in coeffs {
            *map.entry(v).or_insert(0.0) += c;
        }
        Self {
            coeffs: map.into_iter().filter(|&(_, c)| c != 0.0).collect(),
            rhs,
        }
    }

    pub fn residual(&self, y: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, c)| c * y[v]).sum::<f64>() - self.rhs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericSdp {
    pub nvars: usize,
    pub c: Vec<f64>,
    pub offset: f64,
    pub blocks: Vec<SdpBlock>,
    pub equalities: Vec<EqRow>,
}

impl NumericSdp {
    pub fn new(nvars: usize) -> Self {
        Self {
            nvars,
            c: vec![0.0; nvars],
            offset: 0.0,
            blocks: Vec::new(),
            equalities: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c.len() != self.nvars {
            return Err(Error::DimensionMismatch {
                expected: self.nvars,
                got: self.c.len(),
            });
        }
        for b in &self.blocks {
            if b.max_matno() > self.nvars {
                return Err(Error::OutOfRange(format!(
                    "block references variable {} of {}",
                    b.max_matno(),
                    self.nvars
                )));
            }
        }
        for e in &self.equalities {
            if let Some(&(v, _)) = e.coeffs.iter().find(|(v, _)| *v >= self.nvars) {
                return Err(Error::OutOfRange(format!("equality references variable {} of {}", v + 1, self.nvars)));
            }
        }
        Ok(())
    }

    pub fn objective(&self, y: &[f64]) -> f64 {
        self.offset + self.c.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn largest_block(&self) -> usize {
        self.blocks.iter().map(SdpBlock::size).max().unwrap_or(0)
    }

    /// Variables occurring in some block; the others are eliminated through
    /// the equalities before the interior-point method runs.
    pub fn block_variable_count(&self) -> usize {
        let mut seen = vec![false; self.nvars];
        for b in &self.blocks {
            for v in b.variables() {
                seen[v] = true;
            }
        }
        seen.iter().filter(|&&s| s).count()
    }

    /// Dual objective `offset - <F_0, X>` without the equality part.
    fn dual_block_part(&self, x: &[DMatrix<f64>]) -> (f64, Vec<f64>) {
        let mut f0 = 0.0;
        let mut ax = vec![0.0; self.nvars];
        for (b, xb) in self.blocks.iter().zip(x) {
            b.inner_products(xb, &mut f0, &mut ax);
        }
        (self.offset - f0, ax)
    }
}

/// Maps every moment of the variable table to one slot; `y_0 = 1` becomes the
/// constant term.
pub fn lower_numeric(s: &SymbolicSdp) -> NumericSdp {
    let n = s.variables.len();
    let slot = |m: &crate::polyopt::Monomial| -> Option<usize> {
        if m.is_one() {
            None
        } else {
            Some(s.variable_index(m).expect("moment registered in the variable table"))
        }
    };
    let mut p = NumericSdp::new(n);
    for (m, c) in s.objective.terms() {
        match slot(m) {
            None => p.offset += c,
            Some(k) => p.c[k] += c,
        }
    }
    for pm in &s.blocks {
        let mut b = SdpBlock::new(pm.rows(), BlockKind::Dense);
        for i in 0..pm.rows() {
            for j in i..pm.cols() {
                for (m, c) in pm.get(i, j).terms() {
                    let matno = slot(m).map_or(0, |k| k + 1);
                    b.add(matno, i, j, c).expect("in range");
                }
            }
        }
        p.blocks.push(b);
    }
    for e in &s.equalities {
        let mut rhs = 0.0;
        let mut coeffs = Vec::new();
        for (m, c) in e.terms() {
            match slot(m) {
                None => rhs -= c,
                Some(k) => coeffs.push((k, c)),
            }
        }
        p.equalities.push(EqRow::new(coeffs, rhs));
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdpStatus {
    Optimal,
    MaxIter,
    InfeasibleSuspect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    pub y: Vec<f64>,
    pub primal_value: f64,
    pub dual_value: f64,
    pub status: SdpStatus,
    pub gap: f64,
    pub iterations: usize,
    /// Dual matrices per block: row-major `n x n` for dense blocks, the
    /// diagonal for diagonal ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<Vec<f64>>>,
    /// Equality multipliers with `c = A*(X) + A^T lambda`. When absent the
    /// certificate check fits them by least squares, which only scales to
    /// problems the internal solver handles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
}

impl SdpSolution {
    fn x_matrices(&self, p: &NumericSdp) -> Option<Result<Vec<DMatrix<f64>>>> {
        let x = self.x.as_ref()?;
        if x.len() != p.blocks.len() {
            return Some(Err(Error::DimensionMismatch {
                expected: p.blocks.len(),
                got: x.len(),
            }));
        }
        let mut out = Vec::with_capacity(x.len());
        for (b, v) in p.blocks.iter().zip(x) {
            let n = b.size();
            let m = match b.kind() {
                BlockKind::Dense if v.len() == n * n => DMatrix::from_row_slice(n, n, v),
                BlockKind::Diagonal if v.len() == n => DMatrix::from_diagonal(&DVector::from_column_slice(v)),
                _ => {
                    return Some(Err(Error::DimensionMismatch {
                        expected: if b.kind() == BlockKind::Dense { n * n } else { n },
                        got: v.len(),
                    }))
                }
            };
            out.push(m);
        }
        Some(Ok(out))
    }
}

/// Problems beyond these limits are not solved internally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeBudget {
    pub max_block: usize,
    pub max_vars: usize,
}

impl Default for SizeBudget {
    fn default() -> Self {
        Self {
            max_block: 600,
            max_vars: 40000,
        }
    }
}

impl SizeBudget {
    pub fn check(&self, p: &NumericSdp) -> Result<()> {
        let vars = p.block_variable_count();
        if p.largest_block() > self.max_block || vars > self.max_vars {
            return Err(Error::BudgetExceeded(format!(
                "largest block {} (limit {}), {} block variables (limit {})",
                p.largest_block(),
                self.max_block,
                vars,
                self.max_vars
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Target for the duality gap and the residual norms.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

pub fn solve(p: &NumericSdp, tol: f64) -> Result<SdpSolution> {
    solve_with(
        p,
        &SolverOptions {
            tol,
            ..Default::default()
        },
    )
}

pub fn solve_with(p: &NumericSdp, opts: &SolverOptions) -> Result<SdpSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::OutOfRange("solver tolerance must be positive".into()));
    }
    p.validate()?;
    let reduced = match presolve::presolve(p) {
        Ok(r) => r,
        Err(presolve::Infeasible) => {
            return Ok(SdpSolution {
                y: vec![0.0; p.nvars],
                primal_value: f64::NAN,
                dual_value: f64::NAN,
                status: SdpStatus::InfeasibleSuspect,
                gap: f64::INFINITY,
                iterations: 0,
                x: None,
                lambda: None,
            })
        }
    };
    let out = ipm::solve(&reduced.problem, opts);
    let y = reduced.recover(&out.y);
    let primal_value = p.objective(&y);
    let x = out.x.map(|xs| {
        xs.iter()
            .zip(&p.blocks)
            .map(|(m, b)| match b.kind() {
                BlockKind::Dense => {
                    let n = b.size();
                    (0..n * n).map(|k| m[(k / n, k % n)]).collect()
                }
                BlockKind::Diagonal => m.diagonal().iter().copied().collect(),
            })
            .collect()
    });
    Ok(SdpSolution {
        gap: (primal_value - out.dual_value).abs(),
        y,
        primal_value,
        dual_value: out.dual_value,
        status: out.status,
        iterations: out.iterations,
        x,
        lambda: None,
    })
}

/// Residual report of [`check_certificate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    /// Minimum eigenvalue of each block at `y`.
    pub block_min_eig: Vec<f64>,
    /// Euclidean norm of `A y - b`.
    pub equality_residual: f64,
    pub primal_value: f64,
    /// Minimum eigenvalue over the dual blocks, when `X` is supplied.
    pub dual_min_eig: Option<f64>,
    /// Norm of `c - A*(X) - A^T l` with the best `l`, when `X` is supplied.
    pub dual_residual: Option<f64>,
    pub dual_value: Option<f64>,
    pub pass: bool,
}

pub const CERT_TOL: f64 = 1e-8;

/// Recomputes feasibility of `y` (and of `X` when present) independently of
/// the solver's bookkeeping.
pub fn check_certificate(p: &NumericSdp, sol: &SdpSolution) -> Result<CertificateReport> {
    p.validate()?;
    if sol.y.len() != p.nvars {
        return Err(Error::DimensionMismatch {
            expected: p.nvars,
            got: sol.y.len(),
        });
    }
    let block_min_eig: Vec<f64> = p.blocks.iter().map(|b| min_eigenvalue_real(&b.eval(&sol.y))).collect();
    let equality_residual = p
        .equalities
        .iter()
        .map(|e| e.residual(&sol.y).powi(2))
        .sum::<f64>()
        .sqrt();
    let primal_value = p.objective(&sol.y);
    let mut pass = block_min_eig.iter().all(|&e| e >= -CERT_TOL)
        && equality_residual <= CERT_TOL
        && primal_value.is_finite();

    let (mut dual_min_eig, mut dual_residual, mut dual_value) = (None, None, None);
    if let Some(xs) = sol.x_matrices(p) {
        let xs = xs?;
        let me = xs.iter().map(min_eigenvalue_real).fold(f64::INFINITY, f64::min);
        let (res, val) = match &sol.lambda {
            Some(l) if l.len() != p.equalities.len() => {
                return Err(Error::DimensionMismatch {
                    expected: p.equalities.len(),
                    got: l.len(),
                })
            }
            Some(l) => explicit_dual_residual_and_value(p, &xs, l),
            None => dual_residual_and_value(p, &xs),
        };
        pass &= me >= -CERT_TOL && res <= CERT_TOL && val.is_finite();
        dual_min_eig = Some(me);
        dual_residual = Some(res);
        dual_value = Some(val);
    }
    Ok(CertificateReport {
        block_min_eig,
        equality_residual,
        primal_value,
        dual_min_eig,
        dual_residual,
        dual_value,
        pass,
    })
}

fn explicit_dual_residual_and_value(p: &NumericSdp, xs: &[DMatrix<f64>], lambda: &[f64]) -> (f64, f64) {
    let (block_val, ax) = p.dual_block_part(xs);
    let mut r: Vec<f64> = p.c.iter().zip(&ax).map(|(c, a)| c - a).collect();
    let mut val = block_val;
    for (e, &l) in p.equalities.iter().zip(lambda) {
        for &(v, a) in &e.coeffs {
            r[v] -= a * l;
        }
        val += e.rhs * l;
    }
    (r.iter().map(|v| v * v).sum::<f64>().sqrt(), val)
}

/// Dual residual with the least-squares multipliers of the presolved
/// equality system, which is equivalent to the original one.
fn dual_residual_and_value(p: &NumericSdp, xs: &[DMatrix<f64>]) -> (f64, f64) {
    let (block_val, ax) = p.dual_block_part(xs);
    let r: Vec<f64> = p.c.iter().zip(&ax).map(|(c, a)| c - a).collect();
    if p.equalities.is_empty() {
        return (r.iter().map(|v| v * v).sum::<f64>().sqrt(), block_val);
    }
    let reduced = match presolve::presolve(p) {
        Ok(r) => r,
        Err(_) => return (f64::INFINITY, f64::NAN),
    };
    reduced.dual_residual(p, &ax, block_val)
}

#[cfg(test)]
mod tests;
