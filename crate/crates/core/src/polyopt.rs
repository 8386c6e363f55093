//! Moment relaxations of polynomial programs over real variables.
//!
//! A cell of a moment or localizing matrix is stored as a [`Polynomial`] `p`
//! and read as the linear form `y(p) = sum_a p_a y_a` in the moments.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `prod_i x_i^{a_i}`, stored sparsely as `(variable, power)` pairs sorted by variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial {
    powers: Vec<(u32, u32)>,
}

impl Monomial {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn var(i: usize) -> Self {
        Self {
            powers: vec![(i as u32, 1)],
        }
    }

    pub fn from_exponents(exps: &[u32]) -> Self {
        Self {
            powers: exps
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0)
                .map(|(i, &p)| (i as u32, p))
                .collect(),
        }
    }

    /// From `(variable, power)` pairs in any order; repeated variables add up.
    pub fn from_powers(pairs: &[(usize, u32)]) -> Self {
        let mut map = BTreeMap::new();
        for &(v, p) in pairs {
            *map.entry(v as u32).or_insert(0) += p;
        }
        Self {
            powers: map.into_iter().filter(|&(_, p)| p > 0).collect(),
        }
    }

    pub fn powers(&self) -> &[(u32, u32)] {
        &self.powers
    }

    pub fn is_one(&self) -> bool {
        self.powers.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.powers.iter().map(|p| p.1).sum()
    }

    /// One past the largest variable index present.
    pub fn var_bound(&self) -> usize {
        self.powers.last().map_or(0, |p| p.0 as usize + 1)
    }

    pub fn exponents(&self, nvars: usize) -> Vec<u32> {
        let mut e = vec![0; nvars];
        for &(v, p) in &self.powers {
            e[v as usize] = p;
        }
        e
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.powers, &other.powers);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial { powers: out }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.powers
            .iter()
            .map(|&(v, p)| x[v as usize].powi(p as i32))
            .product()
    }

    /// `y_{a1,...,an}`, or `1` for the constant monomial.
    pub fn moment_label(&self, nvars: usize) -> String {
        if self.is_one() {
            return "1".into();
        }
        let e: Vec<String> = self.exponents(nvars.max(self.var_bound())).iter().map(u32::to_string).collect();
        format!("y_{{{}}}", e.join(","))
    }
}

/// Graded lex: lower degree first; within a degree, larger exponent on the
/// lowest-indexed variable first (`x1^2, x1 x2, x2^2`).
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            for (a, b) in self.powers.iter().zip(&other.powers) {
                let o = a.0.cmp(&b.0).then(b.1.cmp(&a.1));
                if o != Ordering::Equal {
                    return o;
                }
            }
            other.powers.len().cmp(&self.powers.len())
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Real polynomial; zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::term(Monomial::one(), c)
    }

    pub fn var(i: usize) -> Self {
        Self::term(Monomial::var(i), 1.0)
    }

    pub fn term(m: Monomial, c: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, f64)>) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: f64) {
        if c == 0.0 {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = *e.get() + c;
                if s == 0.0 {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    /// Degree, with `0` for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn var_bound(&self) -> usize {
        self.terms.keys().map(Monomial::var_bound).max().unwrap_or(0)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, &c)| (m.clone(), c * s)))
    }

    pub fn add(&self, other: &Polynomial) -> Self {
        let mut p = self.clone();
        p.add_assign_scaled(other, 1.0);
        p
    }

    pub fn sub(&self, other: &Polynomial) -> Self {
        let mut p = self.clone();
        p.add_assign_scaled(other, -1.0);
        p
    }

    pub fn add_assign_scaled(&mut self, other: &Polynomial, s: f64) {
        for (m, &c) in &other.terms {
            self.add_term(m.clone(), s * c);
        }
    }

    pub fn mul(&self, other: &Polynomial) -> Self {
        let mut p = Self::zero();
        for (a, &ca) in &self.terms {
            for (b, &cb) in &other.terms {
                p.add_term(a.mul(b), ca * cb);
            }
        }
        p
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|(a, &c)| (a.mul(m), c))
                .collect(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(m, &c)| c * m.eval(x)).sum()
    }

    /// `y(p)` for a moment assignment; moments missing from `y` read as zero
    /// and `y_0 = 1`.
    pub fn eval_moments(&self, y: &HashMap<Monomial, f64>) -> f64 {
        self.terms
            .iter()
            .map(|(m, &c)| {
                if m.is_one() {
                    c
                } else {
                    c * y.get(m).copied().unwrap_or(0.0)
                }
            })
            .sum()
    }

    /// Renders `y(p)` with moment labels over `nvars` variables.
    pub fn moment_form(&self, nvars: usize) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut s = String::new();
        for (k, (m, &c)) in self.terms.iter().enumerate() {
            let label = m.moment_label(nvars);
            let neg = c < 0.0;
            if k == 0 {
                if neg {
                    s.push('-');
                }
            } else {
                s.push(if neg { '-' } else { '+' });
            }
            let a = c.abs();
            if a == 1.0 {
                s.push_str(&label);
            } else if m.is_one() {
                s.push_str(&format!("{a}"));
            } else {
                s.push_str(&format!("{a}*{label}"));
            }
        }
        s
    }

    /// Canonical bit-level key, for deduplication.
    fn key(&self) -> Vec<(Monomial, u64)> {
        self.terms.iter().map(|(m, c)| (m.clone(), c.to_bits())).collect()
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (k, (m, &c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}")?;
            for &(v, p) in m.powers() {
                match p {
                    1 => write!(f, "*x{}", v + 1)?,
                    _ => write!(f, "*x{}^{}", v + 1, p)?,
                }
            }
        }
        Ok(())
    }
}

/// Dense matrix of polynomials, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Polynomial>,
}

impl PolyMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![Polynomial::zero(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Polynomial) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self { rows, cols, entries }
    }

    /// Row-major entries.
    pub fn from_rows(rows: Vec<Vec<Polynomial>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch {
                expected: c,
                got: rows.iter().map(Vec::len).find(|&l| l != c).unwrap_or(0),
            });
        }
        Ok(Self {
            rows: r,
            cols: c,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Polynomial {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: Polynomial) {
        self.entries[i * self.cols + j] = p;
    }

    pub fn entries(&self) -> &[Polynomial] {
        &self.entries
    }

    pub fn first_asymmetry(&self) -> Option<(usize, usize)> {
        if self.rows != self.cols {
            return Some((0, 0));
        }
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                if self.get(i, j) != self.get(j, i) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    pub fn is_symmetric(&self) -> bool {
        self.first_asymmetry().is_none()
    }

    pub fn degree(&self) -> u32 {
        self.entries.iter().map(Polynomial::degree).max().unwrap_or(0)
    }

    pub fn var_bound(&self) -> usize {
        self.entries.iter().map(Polynomial::var_bound).max().unwrap_or(0)
    }

    /// Substitutes a point.
    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).eval(x))
    }

    pub fn eval_moments(&self, y: &HashMap<Monomial, f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).eval_moments(y))
    }

    /// One line per row, cells as moment forms separated by ` & `.
    pub fn moment_display(&self, nvars: usize) -> String {
        let mut s = String::new();
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self.get(i, j).moment_form(nvars)).collect();
            s.push_str(&row.join(" & "));
            s.push('\n');
        }
        s
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k.min(n));
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// All monomials in `nvars` variables of degree at most `degree`, in graded lex order.
pub fn monomial_basis(nvars: usize, degree: u32) -> Vec<Monomial> {
    let vars: Vec<usize> = (0..nvars).collect();
    monomial_basis_over(&vars, degree)
}

/// Like [`monomial_basis`] over an arbitrary subset of variable indices.
pub fn monomial_basis_over(vars: &[usize], degree: u32) -> Vec<Monomial> {
    let mut sorted: Vec<usize> = vars.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut out = Vec::with_capacity(binomial(sorted.len() + degree as usize, degree as usize));
    out.push(Monomial::one());
    // Degree-t monomials as nondecreasing index tuples, generated in lex order
    // of tuples, which is the required order within a degree.
    let mut prev: Vec<Vec<usize>> = vec![vec![]];
    for _ in 1..=degree {
        let mut next = Vec::new();
        for t in &prev {
            let start = t.last().copied().unwrap_or(0);
            for k in start..sorted.len() {
                let mut u = t.clone();
                u.push(k);
                next.push(u);
            }
        }
        for t in &next {
            let pairs: Vec<(usize, u32)> = t.iter().map(|&k| (sorted[k], 1)).collect();
            out.push(Monomial::from_powers(&pairs));
        }
        prev = next;
    }
    out
}

/// `M(X)`: cell `(i, j)` is `y(b_i b_j)`.
pub fn moment_matrix(basis: &[Monomial]) -> PolyMatrix {
    localizing_matrix_scalar(&Polynomial::constant(1.0), basis)
}

/// `M_g(X)`: cell `(i, j)` is `y(g b_i b_j)`.
pub fn localizing_matrix_scalar(g: &Polynomial, basis: &[Monomial]) -> PolyMatrix {
    let n = basis.len();
    let mut m = PolyMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let p = g.mul_monomial(&basis[i].mul(&basis[j]));
            if i != j {
                m.set(j, i, p.clone());
            }
            m.set(i, j, p);
        }
    }
    m
}

/// `M_G(X) = y(G (x) X^T X)` with the basis index outer and the `G` index
/// inner: cell `(i*r + a, j*r + b)` is `y(g_ab b_i b_j)`, `r = G.rows()`.
pub fn localizing_matrix_psd(g: &PolyMatrix, basis: &[Monomial]) -> Result<PolyMatrix> {
    if let Some((row, col)) = g.first_asymmetry() {
        return Err(Error::AsymmetricPolyMatrix { row, col });
    }
    let r = g.rows();
    let n = basis.len();
    let mut m = PolyMatrix::zeros(r * n, r * n);
    for i in 0..n {
        for j in i..n {
            let bij = basis[i].mul(&basis[j]);
            for a in 0..r {
                for b in 0..r {
                    let p = g.get(a, b).mul_monomial(&bij);
                    let (row, col) = (i * r + a, j * r + b);
                    if i != j {
                        m.set(col, row, p.clone());
                    }
                    m.set(row, col, p);
                }
            }
        }
    }
    Ok(m)
}

/// Distinct products `b_i b_j`, in graded order.
pub fn basis_products(basis: &[Monomial]) -> Vec<Monomial> {
    let mut set = BTreeSet::new();
    for i in 0..basis.len() {
        for j in i..basis.len() {
            set.insert(basis[i].mul(&basis[j]));
        }
    }
    set.into_iter().collect()
}

/// `y(h b) = 0` for every distinct product `b` of two basis elements.
pub fn localize_equality(h: &Polynomial, basis: &[Monomial]) -> Vec<Polynomial> {
    if h.is_zero() {
        return Vec::new();
    }
    basis_products(basis)
        .iter()
        .map(|b| h.mul_monomial(b))
        .collect()
}

/// A constraint `g(x) >= 0` or `G(x) >= 0` together with its localizing basis.
#[derive(Debug, Clone)]
pub enum Inequality {
    Scalar(Polynomial, Vec<Monomial>),
    Psd(PolyMatrix, Vec<Monomial>),
}

/// Moment SDP: minimize `y(objective)` subject to every block being PSD and
/// every equality vanishing, with `y_0 = 1`.
#[derive(Debug, Clone)]
pub struct SymbolicSdp {
    /// Number of polynomial variables `x_i`.
    pub nvars: usize,
    pub objective: Polynomial,
    pub blocks: Vec<PolyMatrix>,
    pub equalities: Vec<Polynomial>,
    /// Non-constant moments, in graded order; `y_0` is not listed.
    pub variables: Vec<Monomial>,
    index: HashMap<Monomial, usize>,
}

impl SymbolicSdp {
    pub fn new(nvars: usize, objective: Polynomial, blocks: Vec<PolyMatrix>, equalities: Vec<Polynomial>) -> Self {
        let mut set = BTreeSet::new();
        let mut collect = |p: &Polynomial| {
            for (m, _) in p.terms() {
                if !m.is_one() && !set.contains(m) {
                    set.insert(m.clone());
                }
            }
        };
        collect(&objective);
        for b in &blocks {
            b.entries().iter().for_each(&mut collect);
        }
        equalities.iter().for_each(&mut collect);
        let variables: Vec<Monomial> = set.into_iter().collect();
        let index = variables.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        Self {
            nvars,
            objective,
            blocks,
            equalities,
            variables,
            index,
        }
    }

    pub fn variable_index(&self, m: &Monomial) -> Option<usize> {
        self.index.get(m).copied()
    }

    /// Moments `y_a = x^a` of the point mass at `x`, in variable-table order.
    pub fn dirac_moments(&self, x: &[f64]) -> Vec<f64> {
        self.variables.iter().map(|m| m.eval(x)).collect()
    }

    /// Plain-text dump: variable table, blocks, equalities.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "nvars {}", self.nvars);
        let _ = writeln!(s, "moments {}", self.variables.len());
        for (i, m) in self.variables.iter().enumerate() {
            let e: Vec<String> = m.powers().iter().map(|(v, p)| format!("{v}^{p}")).collect();
            let _ = writeln!(s, "y{} {}", i + 1, e.join(" "));
        }
        let _ = writeln!(s, "objective {}", self.objective.moment_form(self.nvars));
        for (k, b) in self.blocks.iter().enumerate() {
            let _ = writeln!(s, "block {} {}x{}", k + 1, b.rows(), b.cols());
            s.push_str(&b.moment_display(self.nvars));
        }
        let _ = writeln!(s, "equalities {}", self.equalities.len());
        for e in &self.equalities {
            let _ = writeln!(s, "{} = 0", e.moment_form(self.nvars));
        }
        s
    }
}

/// Builds the moment relaxation. Every moment basis becomes a moment-matrix
/// block, every inequality a localizing block and every equality a set of
/// linear equalities; exact duplicate equalities are dropped.
pub fn assemble_relaxation(
    objective: &Polynomial,
    ineqs: &[Inequality],
    eqs: &[(Polynomial, Vec<Monomial>)],
    moment_bases: &[Vec<Monomial>],
) -> Result<SymbolicSdp> {
    let basis_deg = moment_bases
        .iter()
        .flat_map(|b| b.iter().map(Monomial::degree))
        .max()
        .unwrap_or(0);
    if objective.degree() > 2 * basis_deg {
        return Err(Error::DegreeViolation {
            objective: objective.degree(),
            basis: basis_deg,
        });
    }
    let mut nvars = objective.var_bound();
    let mut blocks = Vec::new();
    for b in moment_bases {
        if b.is_empty() {
            return Err(Error::Empty("moment basis"));
        }
        let m = moment_matrix(b);
        nvars = nvars.max(m.var_bound());
        blocks.push(m);
    }
    for ineq in ineqs {
        let m = match ineq {
            Inequality::Scalar(g, basis) => localizing_matrix_scalar(g, basis),
            Inequality::Psd(g, basis) => localizing_matrix_psd(g, basis)?,
        };
        nvars = nvars.max(m.var_bound());
        blocks.push(m);
    }
    let mut seen = std::collections::HashSet::new();
    let mut equalities = Vec::new();
    for (h, basis) in eqs {
        for e in localize_equality(h, basis) {
            if seen.insert(e.key()) {
                nvars = nvars.max(e.var_bound());
                equalities.push(e);
            }
        }
    }
    Ok(SymbolicSdp::new(nvars, objective.clone(), blocks, equalities))
}
