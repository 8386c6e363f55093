//! Infeasible-start primal-dual path following with Nesterov-Todd scaling.
//!
//! Expects a presolved problem: every variable occurs in some block and the
//! equality rows are linearly independent.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{BlockKind, NumericSdp, SdpStatus, SolverOptions};

type Trip = (usize, usize, f64);

enum Cone {
    Dense {
        n: usize,
        f0: DMatrix<f64>,
        mats: Vec<(usize, Vec<Trip>)>,
    },
    Diag {
        n: usize,
        f0: DVector<f64>,
        mats: Vec<(usize, Vec<(usize, f64)>)>,
    },
}

#[derive(Clone)]
enum Mat {
    D(DMatrix<f64>),
    V(DVector<f64>),
}

impl Mat {
    fn dot(&self, o: &Mat) -> f64 {
        match (self, o) {
            (Mat::D(a), Mat::D(b)) => a.dot(b),
            (Mat::V(a), Mat::V(b)) => a.dot(b),
            _ => unreachable!("cone kinds match"),
        }
    }

    fn norm_sq(&self) -> f64 {
        match self {
            Mat::D(a) => a.norm_squared(),
            Mat::V(a) => a.norm_squared(),
        }
    }

    fn axpy(&mut self, a: f64, o: &Mat) {
        match (self, o) {
            (Mat::D(x), Mat::D(y)) => *x += y * a,
            (Mat::V(x), Mat::V(y)) => x.axpy(a, y, 1.0),
            _ => unreachable!("cone kinds match"),
        }
    }

    fn sub(&self, o: &Mat) -> Mat {
        let mut m = self.clone();
        m.axpy(-1.0, o);
        m
    }
}

impl Cone {
    fn size(&self) -> usize {
        match self {
            Cone::Dense { n, .. } | Cone::Diag { n, .. } => *n,
        }
    }

    fn vars(&self) -> Vec<usize> {
        match self {
            Cone::Dense { mats, .. } => mats.iter().map(|m| m.0).collect(),
            Cone::Diag { mats, .. } => mats.iter().map(|m| m.0).collect(),
        }
    }

    fn identity(&self, s: f64) -> Mat {
        match self {
            Cone::Dense { n, .. } => Mat::D(DMatrix::identity(*n, *n) * s),
            Cone::Diag { n, .. } => Mat::V(DVector::from_element(*n, s)),
        }
    }

    /// `sum_i y_i F_i`, plus `F_0` when `with_const`.
    fn apply(&self, y: &DVector<f64>, with_const: bool) -> Mat {
        match self {
            Cone::Dense { n, f0, mats } => {
                let mut m = if with_const { f0.clone() } else { DMatrix::zeros(*n, *n) };
                for (v, t) in mats {
                    let yv = y[*v];
                    if yv == 0.0 {
                        continue;
                    }
                    for &(i, j, a) in t {
                        m[(i, j)] += a * yv;
                        if i != j {
                            m[(j, i)] += a * yv;
                        }
                    }
                }
                Mat::D(m)
            }
            Cone::Diag { n, f0, mats } => {
                let mut m = if with_const { f0.clone() } else { DVector::zeros(*n) };
                for (v, t) in mats {
                    for &(i, a) in t {
                        m[i] += a * y[*v];
                    }
                }
                Mat::V(m)
            }
        }
    }

    /// `out_i += <F_i, X>`.
    fn adjoint(&self, x: &Mat, out: &mut DVector<f64>) {
        match (self, x) {
            (Cone::Dense { mats, .. }, Mat::D(x)) => {
                for (v, t) in mats {
                    out[*v] += sym_dot(t, x);
                }
            }
            (Cone::Diag { mats, .. }, Mat::V(x)) => {
                for (v, t) in mats {
                    out[*v] += t.iter().map(|&(i, a)| a * x[i]).sum::<f64>();
                }
            }
            _ => unreachable!("cone kinds match"),
        }
    }

    fn const_dot(&self, x: &Mat) -> f64 {
        match (self, x) {
            (Cone::Dense { f0, .. }, Mat::D(x)) => f0.dot(x),
            (Cone::Diag { f0, .. }, Mat::V(x)) => f0.dot(x),
            _ => unreachable!("cone kinds match"),
        }
    }

    fn max_norms(&self) -> (f64, f64) {
        match self {
            Cone::Dense { f0, mats, .. } => (
                f0.norm(),
                mats.iter()
                    .map(|(_, t)| {
                        t.iter()
                            .map(|&(i, j, a)| if i == j { a * a } else { 2.0 * a * a })
                            .sum::<f64>()
                            .sqrt()
                    })
                    .fold(0.0, f64::max),
            ),
            Cone::Diag { f0, mats, .. } => (
                f0.norm(),
                mats.iter()
                    .map(|(_, t)| t.iter().map(|p| p.1 * p.1).sum::<f64>().sqrt())
                    .fold(0.0, f64::max),
            ),
        }
    }
}

/// `<F, X>` for upper-triangle triplets of a symmetric `F`.
fn sym_dot(t: &[Trip], x: &DMatrix<f64>) -> f64 {
    t.iter()
        .map(|&(i, j, a)| if i == j { a * x[(i, i)] } else { a * (x[(i, j)] + x[(j, i)]) })
        .sum()
}

fn sym_dense(t: &[Trip], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for &(i, j, a) in t {
        m[(i, j)] += a;
        if i != j {
            m[(j, i)] += a;
        }
    }
    m
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// `L` with `m = L L^T`; falls back to a clamped eigendecomposition.
fn factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(c) = m.clone().cholesky() {
        return c.l();
    }
    let e = m.clone().symmetric_eigen();
    let mut v = e.eigenvectors;
    for (j, l) in e.eigenvalues.iter().enumerate() {
        let s = l.max(1e-300).sqrt();
        v.column_mut(j).scale_mut(s);
    }
    v
}

/// Largest `a` (possibly infinite) with `M + a D >= 0`, given `M = L L^T`.
fn max_step_dense(l: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    let n = l.nrows();
    let Some(li) = l.clone().try_inverse() else {
        return 0.0;
    };
    let mut t = &li * d * li.transpose();
    symmetrize(&mut t);
    let lmin = if n == 0 {
        0.0
    } else {
        t.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    };
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn max_step_diag(m: &DVector<f64>, d: &DVector<f64>) -> f64 {
    m.iter()
        .zip(d.iter())
        .filter(|(_, &di)| di < 0.0)
        .map(|(&mi, &di)| -mi / di)
        .fold(f64::INFINITY, f64::min)
}

/// Per-cone scaling data for one iteration.
enum Scaling {
    Dense {
        w: DMatrix<f64>,
        s_inv: DMatrix<f64>,
        ls: DMatrix<f64>,
        lx: DMatrix<f64>,
    },
    Diag {
        wsq: DVector<f64>,
        s_inv: DVector<f64>,
    },
}

impl Scaling {
    fn new(s: &Mat, x: &Mat) -> Self {
        match (s, x) {
            (Mat::D(s), Mat::D(x)) => {
                let ls = factor(s);
                let lx = factor(x);
                let svd = (lx.transpose() * &ls).svd(true, false);
                let u = svd.u.expect("requested");
                let mut ud = u.clone();
                for (j, d) in svd.singular_values.iter().enumerate() {
                    ud.column_mut(j).scale_mut(1.0 / d.max(1e-300));
                }
                let mut w = &lx * ud * u.transpose() * lx.transpose();
                symmetrize(&mut w);
                let s_inv = match s.clone().cholesky() {
                    Some(c) => c.inverse(),
                    None => s.clone().pseudo_inverse(1e-300).expect("svd converges"),
                };
                Scaling::Dense { w, s_inv, ls, lx }
            }
            (Mat::V(s), Mat::V(x)) => Scaling::Diag {
                wsq: x.component_div(s),
                s_inv: s.map(|v| 1.0 / v),
            },
            _ => unreachable!("cone kinds match"),
        }
    }

    /// `W M W`.
    fn wmw(&self, m: &Mat) -> Mat {
        match (self, m) {
            (Scaling::Dense { w, .. }, Mat::D(m)) => {
                let mut r = w * m * w;
                symmetrize(&mut r);
                Mat::D(r)
            }
            (Scaling::Diag { wsq, .. }, Mat::V(m)) => Mat::V(wsq.component_mul(m)),
            _ => unreachable!("cone kinds match"),
        }
    }

    fn s_inv(&self) -> Mat {
        match self {
            Scaling::Dense { s_inv, .. } => Mat::D(s_inv.clone()),
            Scaling::Diag { s_inv, .. } => Mat::V(s_inv.clone()),
        }
    }
}

/// Connected components of the variable-cone incidence; the Schur matrix is
/// block diagonal over them.
struct Components {
    members: Vec<Vec<usize>>,
    comp_of: Vec<usize>,
    pos: Vec<usize>,
}

impl Components {
    fn new(n: usize, cones: &[Cone]) -> Self {
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut a: usize) -> usize {
            while p[a] != a {
                p[a] = p[p[a]];
                a = p[a];
            }
            a
        }
        for c in cones {
            let vars = c.vars();
            for w in vars.windows(2) {
                let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut root_comp = vec![usize::MAX; n];
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut comp_of = vec![0; n];
        let mut pos = vec![0; n];
        for v in 0..n {
            let r = find(&mut parent, v);
            if root_comp[r] == usize::MAX {
                root_comp[r] = members.len();
                members.push(Vec::new());
            }
            let k = root_comp[r];
            comp_of[v] = k;
            pos[v] = members[k].len();
            members[k].push(v);
        }
        Self { members, comp_of, pos }
    }
}

pub(crate) struct IpmOutcome {
    pub y: Vec<f64>,
    pub x: Option<Vec<DMatrix<f64>>>,
    pub dual_value: f64,
    pub status: SdpStatus,
    pub iterations: usize,
}

struct Kkt {
    m: Vec<DMatrix<f64>>,
    chol: Vec<ScaledCholesky>,
    a: DMatrix<f64>,
    minv_at: DMatrix<f64>,
    schur: Option<ScaledCholesky>,
}

impl Kkt {
    fn minv(&self, comps: &Components, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for (k, mem) in comps.members.iter().enumerate() {
            let rhs = DVector::from_iterator(mem.len(), mem.iter().map(|&i| v[i]));
            let sol = self.chol[k].solve(&rhs);
            for (p, &i) in mem.iter().enumerate() {
                out[i] = sol[p];
            }
        }
        out
    }

    fn mul_m(&self, comps: &Components, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for (k, mem) in comps.members.iter().enumerate() {
            let x = DVector::from_iterator(mem.len(), mem.iter().map(|&i| v[i]));
            let r = &self.m[k] * x;
            for (p, &i) in mem.iter().enumerate() {
                out[i] = r[p];
            }
        }
        out
    }

    /// Solves `M dy - A^T dl = h`, `A dy = re`, refining
    /// against the unregularized system.
    fn solve(&self, comps: &Components, h: &DVector<f64>, re: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let (mut dy, mut dl) = self.solve_once(comps, h, re);
        let residual = |dy: &DVector<f64>, dl: &DVector<f64>| {
            let r1 = h - self.mul_m(comps, dy) + self.a.transpose() * dl;
            let r2 = re - &self.a * dy;
            let nrm = (r1.norm_squared() + r2.norm_squared()).sqrt();
            (r1, r2, nrm)
        };
        let (mut r1, mut r2, mut nrm) = residual(&dy, &dl);
        for _ in 0..8 {
            let (cy, cl) = self.solve_once(comps, &r1, &r2);
            let (ny, nl) = (&dy + cy, &dl + cl);
            let (s1, s2, snrm) = residual(&ny, &nl);
            if snrm >= 0.5 * nrm {
                if snrm < nrm {
                    (dy, dl) = (ny, nl);
                }
                break;
            }
            (dy, dl, r1, r2, nrm) = (ny, nl, s1, s2, snrm);
        }
        (dy, dl)
    }

    fn solve_once(&self, comps: &Components, h: &DVector<f64>, re: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let mh = self.minv(comps, h);
        match &self.schur {
            None => (mh, DVector::zeros(0)),
            Some(s) => {
                let dl = s.solve(&(re - &self.a * &mh));
                let dy = mh + &self.minv_at * &dl;
                (dy, dl)
            }
        }
    }
}

/// Cholesky factor of `D M D` with `D = diag(M)^-1/2`.
struct ScaledCholesky {
    d: DVector<f64>,
    ch: Cholesky<f64, Dyn>,
}

impl ScaledCholesky {
    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = self.ch.solve(&b.component_mul(&self.d));
        x.component_mul_assign(&self.d);
        x
    }
}

fn regularized_cholesky(mut m: DMatrix<f64>) -> Option<ScaledCholesky> {
    let n = m.nrows();
    let top = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max);
    let floor = 1e-300f64.max(1e-30 * top);
    let d = DVector::from_iterator(n, (0..n).map(|i| 1.0 / m[(i, i)].max(floor).sqrt()));
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] *= d[i] * d[j];
        }
    }
    let mut reg = 1e-14;
    for i in 0..n {
        m[(i, i)] += reg;
    }
    for _ in 0..8 {
        if let Some(ch) = m.clone().cholesky() {
            return Some(ScaledCholesky { d, ch });
        }
        for i in 0..n {
            m[(i, i)] += 99.0 * reg;
        }
        reg *= 100.0;
    }
    None
}

pub(crate) fn solve(p: &NumericSdp, opts: &SolverOptions) -> IpmOutcome {
    let n = p.nvars;
    let cones: Vec<Cone> = p
        .blocks
        .iter()
        .map(|b| {
            let size = b.size();
            let vars = b.variables();
            match b.kind() {
                BlockKind::Dense => Cone::Dense {
                    n: size,
                    f0: sym_dense(&b.matrix_entries(0).collect::<Vec<_>>(), size),
                    mats: vars.iter().map(|&v| (v, b.matrix_entries(v + 1).collect())).collect(),
                },
                BlockKind::Diagonal => Cone::Diag {
                    n: size,
                    f0: {
                        let mut f = DVector::zeros(size);
                        for (i, _, a) in b.matrix_entries(0) {
                            f[i] = a;
                        }
                        f
                    },
                    mats: vars
                        .iter()
                        .map(|&v| (v, b.matrix_entries(v + 1).map(|(i, _, a)| (i, a)).collect()))
                        .collect(),
                },
            }
        })
        .collect();
    let comps = Components::new(n, &cones);
    let m = p.equalities.len();
    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    for (i, e) in p.equalities.iter().enumerate() {
        for &(v, c) in &e.coeffs {
            a[(i, v)] = c;
        }
        b[i] = e.rhs;
    }
    let c = DVector::from_column_slice(&p.c);
    let big_n: usize = cones.iter().map(Cone::size).sum::<usize>().max(1);

    let mut y = DVector::zeros(n);
    let mut lam = DVector::zeros(m);
    let mut s = Vec::with_capacity(cones.len());
    let mut x = Vec::with_capacity(cones.len());
    let mut f0_norm = 0.0f64;
    for cone in &cones {
        let nj = cone.size() as f64;
        let (nf0, nfi) = cone.max_norms();
        f0_norm = f0_norm.max(nf0);
        let mut ratio: f64 = 0.0;
        match cone {
            Cone::Dense { mats, .. } => {
                for (v, t) in mats {
                    let fnorm = t.iter().map(|&(i, j, a)| if i == j { a * a } else { 2.0 * a * a }).sum::<f64>().sqrt();
                    ratio = ratio.max((1.0 + c[*v].abs()) / (1.0 + fnorm));
                }
            }
            Cone::Diag { mats, .. } => {
                for (v, t) in mats {
                    let fnorm = t.iter().map(|q| q.1 * q.1).sum::<f64>().sqrt();
                    ratio = ratio.max((1.0 + c[*v].abs()) / (1.0 + fnorm));
                }
            }
        }
        let xi = 10f64.max(nj.sqrt()).max(nj * ratio);
        let eta = 10f64.max(nj.sqrt()).max(nf0.max(nfi)) / nj.sqrt().max(1.0);
        x.push(cone.identity(xi));
        s.push(cone.identity(eta.max(1.0)));
    }
    let c_norm = c.norm();
    let b_norm = b.norm();

    let mut best: Option<(f64, DVector<f64>, Vec<Mat>, f64)> = None;
    let mut status = SdpStatus::MaxIter;
    let mut iterations = 0;
    let mut prev_alpha = 1.0f64;
    let mut stall = 0;

    for iter in 0..=opts.max_iter {
        iterations = iter;
        // Residuals.
        let rp: Vec<Mat> = cones.iter().zip(&s).map(|(cone, sj)| cone.apply(&y, true).sub(sj)).collect();
        let re = &b - &a * &y;
        let mut ax = DVector::zeros(n);
        for (cone, xj) in cones.iter().zip(&x) {
            cone.adjoint(xj, &mut ax);
        }
        let rd = &c - &ax - a.transpose() * &lam;
        let xs: f64 = x.iter().zip(&s).map(|(a, b)| a.dot(b)).sum();
        let mu = xs / big_n as f64;
        let pobj = p.offset + c.dot(&y);
        let f0x: f64 = cones.iter().zip(&x).map(|(cone, xj)| cone.const_dot(xj)).sum();
        let dobj = p.offset - f0x + b.dot(&lam);
        let pinf = (rp.iter().map(Mat::norm_sq).sum::<f64>() + re.norm_squared()).sqrt();
        let dinf = rd.norm();
        let err = (pobj - dobj).abs().max(pinf).max(dinf);
        let feas = pinf / (1.0 + f0_norm + b_norm);
        let feas = feas.max(dinf / (1.0 + c_norm));
        if !err.is_finite() {
            status = SdpStatus::InfeasibleSuspect;
            break;
        }
        if best.as_ref().is_none_or(|bst| err < bst.0) {
            best = Some((err, y.clone(), x.clone(), dobj));
            stall = 0;
        } else {
            stall += 1;
        }
        if err <= opts.tol {
            status = SdpStatus::Optimal;
            break;
        }
        // Past the attainable accuracy the iterates only drift.
        if stall >= 8 {
            break;
        }
        let blowup = y.amax().max(x.iter().map(|m| m.norm_sq().sqrt()).fold(0.0, f64::max));
        if blowup > 1e12 || iter == opts.max_iter {
            status = if blowup > 1e12 {
                SdpStatus::InfeasibleSuspect
            } else {
                SdpStatus::MaxIter
            };
            break;
        }

        // Scaling and Schur complement.
        let scal: Vec<Scaling> = s.iter().zip(&x).map(|(sj, xj)| Scaling::new(sj, xj)).collect();
        let mut mc: Vec<DMatrix<f64>> = comps.members.iter().map(|mem| DMatrix::zeros(mem.len(), mem.len())).collect();
        for (cone, sc) in cones.iter().zip(&scal) {
            schur_contribution(cone, sc, &comps, &mut mc);
        }
        let mut chol = Vec::with_capacity(mc.len());
        let mut failed = false;
        for mk in mc.iter_mut() {
            symmetrize(mk);
            match regularized_cholesky(mk.clone()) {
                Some(ch) => chol.push(ch),
                None => {
                    failed = true;
                    break;
                }
            }
        }
        if failed {
            status = SdpStatus::InfeasibleSuspect;
            break;
        }
        let mut kkt = Kkt {
            m: mc,
            chol,
            a: a.clone(),
            minv_at: DMatrix::zeros(n, m),
            schur: None,
        };
        if m > 0 {
            for i in 0..m {
                let col = kkt.minv(&comps, &a.row(i).transpose());
                kkt.minv_at.set_column(i, &col);
            }
            let mut sch = &a * &kkt.minv_at;
            symmetrize(&mut sch);
            match regularized_cholesky(sch) {
                Some(ch) => kkt.schur = Some(ch),
                None => {
                    status = SdpStatus::InfeasibleSuspect;
                    break;
                }
            }
        }

        let wrw: Vec<Mat> = scal.iter().zip(&rp).map(|(sc, r)| sc.wmw(r)).collect();
        let direction = |sigma: f64| {
            // Target for dX: sigma mu S^-1 - X - W Rp W.
            let mut base = Vec::with_capacity(cones.len());
            let mut h = DVector::zeros(n);
            for j in 0..cones.len() {
                let mut t = scal[j].s_inv();
                match &mut t {
                    Mat::D(m) => *m *= sigma * mu,
                    Mat::V(v) => *v *= sigma * mu,
                }
                t.axpy(-1.0, &x[j]);
                t.axpy(-1.0, &wrw[j]);
                cones[j].adjoint(&t, &mut h);
                base.push(t);
            }
            h -= &rd;
            let (dy, dl) = kkt.solve(&comps, &h, &re);
            let mut ds = Vec::with_capacity(cones.len());
            let mut dx = Vec::with_capacity(cones.len());
            for j in 0..cones.len() {
                let ady = cones[j].apply(&dy, false);
                let mut dxj = base[j].clone();
                dxj.axpy(-1.0, &scal[j].wmw(&ady));
                let mut dsj = ady;
                dsj.axpy(1.0, &rp[j]);
                if let Mat::D(mm) = &mut dxj {
                    symmetrize(mm);
                }
                ds.push(dsj);
                dx.push(dxj);
            }
            (dy, dl, ds, dx)
        };
        let steps = |ds: &[Mat], dx: &[Mat]| {
            let mut ap = f64::INFINITY;
            let mut ad = f64::INFINITY;
            for j in 0..cones.len() {
                match (&scal[j], &s[j], &x[j], &ds[j], &dx[j]) {
                    (Scaling::Dense { ls, lx, .. }, _, _, Mat::D(dsj), Mat::D(dxj)) => {
                        ap = ap.min(max_step_dense(ls, dsj));
                        ad = ad.min(max_step_dense(lx, dxj));
                    }
                    (Scaling::Diag { .. }, Mat::V(sj), Mat::V(xj), Mat::V(dsj), Mat::V(dxj)) => {
                        ap = ap.min(max_step_diag(sj, dsj));
                        ad = ad.min(max_step_diag(xj, dxj));
                    }
                    _ => unreachable!("cone kinds match"),
                }
            }
            (ap, ad)
        };

        // Predictor, then a centered step with a Mehrotra-style sigma.
        let (_, _, ds_a, dx_a) = direction(0.0);
        let (ap_a, ad_a) = steps(&ds_a, &dx_a);
        let (ap_a, ad_a) = (ap_a.min(1.0), ad_a.min(1.0));
        let mut mu_aff = 0.0;
        for j in 0..cones.len() {
            let mut sj = s[j].clone();
            sj.axpy(ap_a, &ds_a[j]);
            let mut xj = x[j].clone();
            xj.axpy(ad_a, &dx_a[j]);
            mu_aff += sj.dot(&xj);
        }
        mu_aff /= big_n as f64;
        let expo = 1f64.max(3.0 * ap_a.min(ad_a).powi(2));
        let sigma = (mu_aff / mu).max(0.0).powf(expo).min(1.0);
        let sigma = if feas > 1e-2 { sigma.max(0.1 * (1.0 - prev_alpha)) } else { sigma };

        let (dy, dl, ds, dx) = direction(sigma);
        let (ap, ad) = steps(&ds, &dx);
        let gamma = 0.9 + 0.09 * ap_a.min(ad_a);
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);
        prev_alpha = ap.min(ad);
        y.axpy(ap, &dy, 1.0);
        lam.axpy(ad, &dl, 1.0);
        for j in 0..cones.len() {
            s[j].axpy(ap, &ds[j]);
            x[j].axpy(ad, &dx[j]);
            if let (Mat::D(sm), Mat::D(xm)) = (&mut s[j], &mut x[j]) {
                symmetrize(sm);
                symmetrize(xm);
            }
        }
    }

    let (_, by, bx, bd) = best.unwrap_or((f64::INFINITY, y.clone(), x.clone(), f64::NAN));
    let (y, x, dual_value) = if status == SdpStatus::Optimal {
        let f0x: f64 = cones.iter().zip(&x).map(|(cone, xj)| cone.const_dot(xj)).sum();
        (y.clone(), x, p.offset - f0x + b.dot(&lam))
    } else {
        (by, bx, bd)
    };
    IpmOutcome {
        y: y.iter().copied().collect(),
        x: Some(
            x.into_iter()
                .map(|m| match m {
                    Mat::D(d) => d,
                    Mat::V(v) => DMatrix::from_diagonal(&v),
                })
                .collect(),
        ),
        dual_value,
        status,
        iterations,
    }
}

/// Adds `<F_i, W F_j W>` for the variables of one cone.
fn schur_contribution(cone: &Cone, sc: &Scaling, comps: &Components, mc: &mut [DMatrix<f64>]) {
    match (cone, sc) {
        (Cone::Dense { n, mats, .. }, Scaling::Dense { w, .. }) => {
            let n = *n;
            for (ii, (vi, ti)) in mats.iter().enumerate() {
                let g = if ti.len() > 2 * n {
                    let f = sym_dense(ti, n);
                    w * f * w
                } else {
                    let mut g = DMatrix::zeros(n, n);
                    for &(r, c, a) in ti {
                        let wr = w.column(r);
                        let wc = w.column(c);
                        g.ger(a, &wr, &wc, 1.0);
                        if r != c {
                            g.ger(a, &wc, &wr, 1.0);
                        }
                    }
                    g
                };
                let k = comps.comp_of[*vi];
                let pi = comps.pos[*vi];
                for (vj, tj) in &mats[ii..] {
                    let val = sym_dot(tj, &g);
                    let pj = comps.pos[*vj];
                    mc[k][(pi, pj)] += val;
                    if pi != pj {
                        mc[k][(pj, pi)] += val;
                    }
                }
            }
        }
        (Cone::Diag { n, mats, .. }, Scaling::Diag { wsq, .. }) => {
            let mut dense = vec![0.0; *n];
            for (ii, (vi, ti)) in mats.iter().enumerate() {
                for &(r, a) in ti {
                    dense[r] = a * wsq[r];
                }
                let k = comps.comp_of[*vi];
                let pi = comps.pos[*vi];
                for (vj, tj) in &mats[ii..] {
                    let val: f64 = tj.iter().map(|&(r, a)| a * dense[r]).sum();
                    let pj = comps.pos[*vj];
                    mc[k][(pi, pj)] += val;
                    if pi != pj {
                        mc[k][(pj, pi)] += val;
                    }
                }
                for &(r, _) in ti {
                    dense[r] = 0.0;
                }
            }
        }
        _ => unreachable!("cone kinds match"),
    }
}
