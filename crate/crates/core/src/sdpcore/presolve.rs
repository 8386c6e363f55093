//! Equality presolve.
//!
//! Variables that occur in no block ("free") are eliminated by pivoting on
//! the equality rows that contain them, and the remaining rows are brought to
//! reduced row-echelon form so the interior-point KKT system has full row
//! rank. The reduced problem is equivalent to the original one.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};

use super::{EqRow, NumericSdp, SdpBlock};

#[derive(Debug)]
pub(crate) struct Infeasible;

type Row = (BTreeMap<usize, f64>, f64);

/// Relative size below which an updated coefficient counts as cancelled.
const CANCEL: f64 = 1e-12;
/// Threshold pivoting ratio.
const PIVOT_RATIO: f64 = 0.01;
/// Slack allowed on the right-hand side of a row that reduced to zero.
const RHS_TOL: f64 = 1e-9;

pub(crate) struct Reduced {
    pub problem: NumericSdp,
    nvars: usize,
    /// Original index of every variable of `problem`.
    block_vars: Vec<usize>,
    /// `(pivot, other coefficients, pivot coefficient, rhs)` in elimination order.
    substitutions: Vec<(usize, Vec<(usize, f64)>, f64, f64)>,
    /// Objective coefficients of free variables after elimination (should vanish).
    free_c: Vec<f64>,
}

impl Reduced {
    pub fn recover(&self, y_red: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nvars];
        for (k, &v) in self.block_vars.iter().enumerate() {
            y[v] = y_red[k];
        }
        for (p, others, cp, rhs) in self.substitutions.iter().rev() {
            let s: f64 = others.iter().map(|&(v, c)| c * y[v]).sum();
            y[*p] = (rhs - s) / cp;
        }
        y
    }

    /// `(residual, dual value)` of `X` on the reduced system given
    /// `ax = A*(X)` and `block_val = offset - <F_0, X>` of the original problem.
    pub fn dual_residual(&self, p: &NumericSdp, ax: &[f64], block_val: f64) -> (f64, f64) {
        let n = self.block_vars.len();
        let r = DVector::from_iterator(n, self.block_vars.iter().enumerate().map(|(k, &v)| self.problem.c[k] - ax[v]));
        let m = self.problem.equalities.len();
        let free: f64 = self.free_c.iter().map(|c| c * c).sum();
        if m == 0 {
            return ((r.norm_squared() + free).sqrt(), block_val - p.offset + self.problem.offset);
        }
        let a = self.dense_rows();
        let lambda = least_squares(&a, &r);
        let res = &r - a.transpose() * &lambda;
        let b: f64 = self.problem.equalities.iter().zip(lambda.iter()).map(|(e, l)| e.rhs * l).sum();
        ((res.norm_squared() + free).sqrt(), block_val - p.offset + self.problem.offset + b)
    }

    fn dense_rows(&self) -> DMatrix<f64> {
        let eq = &self.problem.equalities;
        let mut a = DMatrix::zeros(eq.len(), self.problem.nvars);
        for (i, e) in eq.iter().enumerate() {
            for &(v, c) in &e.coeffs {
                a[(i, v)] = c;
            }
        }
        a
    }
}

/// Minimizes `||A^T l - r||` through regularized normal equations with one
/// refinement step.
pub(crate) fn least_squares(a: &DMatrix<f64>, r: &DVector<f64>) -> DVector<f64> {
    let m = a.nrows();
    let mut g = a * a.transpose();
    let reg = 1e-14 * (1.0 + (0..m).map(|i| g[(i, i)]).fold(0.0, f64::max));
    for i in 0..m {
        g[(i, i)] += reg;
    }
    let Some(ch) = g.cholesky() else {
        return DVector::zeros(m);
    };
    let mut l = ch.solve(&(a * r));
    let res = r - a.transpose() * &l;
    l += ch.solve(&(a * res));
    l
}

fn cancel(row: &mut BTreeMap<usize, f64>, v: usize, delta: f64, old: f64) -> bool {
    let new = old + delta;
    if new.abs() <= CANCEL * old.abs().max(delta.abs()) {
        row.remove(&v);
        false
    } else {
        row.insert(v, new);
        true
    }
}

pub(crate) fn presolve(p: &NumericSdp) -> Result<Reduced, Infeasible> {
    let n = p.nvars;
    let mut in_block = vec![false; n];
    for b in &p.blocks {
        for v in b.variables() {
            in_block[v] = true;
        }
    }
    let mut c = p.c.clone();
    let mut offset = p.offset;

    let mut rows: Vec<Option<Row>> = p
        .equalities
        .iter()
        .map(|e| Some((e.coeffs.iter().copied().collect(), e.rhs)))
        .collect();
    let mut cols: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (i, r) in rows.iter().enumerate() {
        for &v in r.as_ref().expect("fresh").0.keys() {
            cols[v].insert(i);
        }
    }

    // Free-variable elimination, sparsest columns first.
    let mut free: Vec<usize> = (0..n).filter(|&v| !in_block[v] && !cols[v].is_empty()).collect();
    free.sort_by_key(|&v| (cols[v].len(), v));
    let mut substitutions = Vec::new();
    for &piv in &free {
        if cols[piv].is_empty() {
            continue;
        }
        let pr = choose_pivot_row(&rows, &cols[piv], piv);
        let (prow, prhs) = rows[pr].take().expect("active row");
        for &v in prow.keys() {
            cols[v].remove(&pr);
        }
        let cp = prow[&piv];
        let targets: Vec<usize> = cols[piv].iter().copied().collect();
        for q in targets {
            let (qrow, qrhs) = rows[q].as_mut().expect("active row");
            let f = qrow[&piv] / cp;
            for (&v, &a) in &prow {
                if v == piv {
                    continue;
                }
                let old = qrow.get(&v).copied().unwrap_or(0.0);
                let had = old != 0.0;
                let keep = cancel(qrow, v, -f * a, old);
                if keep && !had {
                    cols[v].insert(q);
                } else if !keep && had {
                    cols[v].remove(&q);
                }
            }
            qrow.remove(&piv);
            cols[piv].remove(&q);
            *qrhs -= f * prhs;
        }
        if c[piv] != 0.0 {
            let f = c[piv] / cp;
            offset += f * prhs;
            for (&v, &a) in &prow {
                if v != piv {
                    c[v] -= f * a;
                }
            }
            c[piv] = 0.0;
        }
        let others: Vec<(usize, f64)> = prow.iter().filter(|(&v, _)| v != piv).map(|(&v, &a)| (v, a)).collect();
        substitutions.push((piv, others, cp, prhs));
    }

    let cscale = 1.0 + p.c.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let free_c: Vec<f64> = (0..n).filter(|&v| !in_block[v]).map(|v| c[v]).collect();
    if free_c.iter().any(|x| x.abs() > 1e-9 * cscale) {
        // A free direction moves the objective: unbounded below.
        return Err(Infeasible);
    }

    // Reduced row-echelon form over block variables.
    let block_vars: Vec<usize> = (0..n).filter(|&v| in_block[v]).collect();
    let mut local = vec![usize::MAX; n];
    for (k, &v) in block_vars.iter().enumerate() {
        local[v] = k;
    }
    let mut echelon: Vec<(usize, BTreeMap<usize, f64>, f64)> = Vec::new();
    let mut pivot_of: BTreeMap<usize, usize> = BTreeMap::new();
    for (orig_row, orig_rhs) in rows.into_iter().flatten() {
        let scale = orig_row.values().fold(0.0f64, |a, b| a.max(b.abs()));
        let mut row: BTreeMap<usize, f64> = orig_row.iter().map(|(&v, &a)| (local[v], a)).collect();
        let mut rhs = orig_rhs;
        let hits: Vec<usize> = row.keys().filter(|k| pivot_of.contains_key(k)).copied().collect();
        for k in hits {
            let Some(&f) = row.get(&k) else { continue };
            let (_, prow, prhs) = &echelon[pivot_of[&k]];
            for (&v, &a) in prow {
                let old = row.get(&v).copied().unwrap_or(0.0);
                cancel(&mut row, v, -f * a, old);
            }
            row.remove(&k);
            rhs -= f * prhs;
        }
        row.retain(|_, a| a.abs() > CANCEL * scale);
        let Some((&pv, &pa)) = row.iter().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(a.0))) else {
            if rhs.abs() > RHS_TOL * (1.0 + orig_rhs.abs()) {
                return Err(Infeasible);
            }
            continue;
        };
        for a in row.values_mut() {
            *a /= pa;
        }
        row.insert(pv, 1.0);
        rhs /= pa;
        for (_, erow, erhs) in echelon.iter_mut() {
            if let Some(&f) = erow.get(&pv) {
                for (&v, &a) in &row {
                    let old = erow.get(&v).copied().unwrap_or(0.0);
                    cancel(erow, v, -f * a, old);
                }
                erow.remove(&pv);
                *erhs -= f * rhs;
            }
        }
        pivot_of.insert(pv, echelon.len());
        echelon.push((pv, row, rhs));
    }

    let mut problem = NumericSdp::new(block_vars.len());
    problem.offset = offset;
    for (k, &v) in block_vars.iter().enumerate() {
        problem.c[k] = c[v];
    }
    for b in &p.blocks {
        let mut nb = SdpBlock::new(b.size(), b.kind());
        for (m, i, j, a) in b.entries() {
            let matno = if m == 0 { 0 } else { local[m - 1] + 1 };
            nb.add(matno, i, j, a).expect("same shape");
        }
        problem.blocks.push(nb);
    }
    problem.equalities = echelon
        .into_iter()
        .map(|(_, row, rhs)| EqRow::new(row, rhs))
        .collect();

    Ok(Reduced {
        problem,
        nvars: n,
        block_vars,
        substitutions,
        free_c,
    })
}

fn choose_pivot_row(rows: &[Option<Row>], candidates: &BTreeSet<usize>, piv: usize) -> usize {
    let mut best: Option<(bool, usize, usize)> = None;
    for &r in candidates {
        let (row, _) = rows[r].as_ref().expect("active row");
        let max = row.values().fold(0.0f64, |a, b| a.max(b.abs()));
        let stable = row[&piv].abs() >= PIVOT_RATIO * max;
        let key = (!stable, row.len(), r);
        if best.is_none_or(|b| key < b) {
            best = Some(key);
        }
    }
    best.expect("nonempty column").2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdpcore::BlockKind;

    fn one_block(vars: &[usize], n: usize) -> NumericSdp {
        let mut p = NumericSdp::new(n);
        let mut b = SdpBlock::new(1, BlockKind::Dense);
        for &v in vars {
            b.add(v + 1, 0, 0, 1.0).unwrap();
        }
        p.blocks.push(b);
        p
    }

    #[test]
    fn free_variables_are_eliminated_and_recovered() {
        // y0 in a block; y1, y2 free with y1 + y2 = 3 and y2 - y0 = 1.
        let mut p = one_block(&[0], 3);
        p.c = vec![1.0, 2.0, 0.0];
        p.equalities.push(EqRow::new([(1, 1.0), (2, 1.0)], 3.0));
        p.equalities.push(EqRow::new([(2, 1.0), (0, -1.0)], 1.0));
        let r = presolve(&p).unwrap();
        assert_eq!(r.problem.nvars, 1);
        assert!(r.problem.equalities.is_empty());
        let y = r.recover(&[0.5]);
        for e in &p.equalities {
            assert!(e.residual(&y).abs() < 1e-15);
        }
        assert!((r.problem.objective(&[0.5]) - p.objective(&y)).abs() < 1e-15);
    }

    #[test]
    fn dependent_rows_are_dropped() {
        let mut p = one_block(&[0, 1], 2);
        p.equalities.push(EqRow::new([(0, 1.0), (1, 1.0)], 1.0));
        p.equalities.push(EqRow::new([(0, 2.0), (1, 2.0)], 2.0));
        let r = presolve(&p).unwrap();
        assert_eq!(r.problem.equalities.len(), 1);
        p.equalities.push(EqRow::new([(0, 1.0), (1, 1.0)], 1.5));
        assert!(presolve(&p).is_err());
    }

    #[test]
    fn unbounded_free_direction_is_reported() {
        let mut p = one_block(&[0], 2);
        p.c = vec![0.0, 1.0];
        assert!(presolve(&p).is_err());
    }
}
