use super::*;
use super::random::random_feasible_sdp;
use crate::polyopt::{self, monomial_basis, Inequality, Polynomial};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scalar_problem() -> NumericSdp {
    // min y s.t. [[y]] >= 0
    let mut p = NumericSdp::new(1);
    p.c[0] = 1.0;
    let mut b = SdpBlock::new(1, BlockKind::Dense);
    b.add(1, 0, 0, 1.0).unwrap();
    p.blocks.push(b);
    p
}

fn two_by_two() -> NumericSdp {
    // min x s.t. [[x, 1], [1, x]] >= 0
    let mut p = NumericSdp::new(1);
    p.c[0] = 1.0;
    let mut b = SdpBlock::new(2, BlockKind::Dense);
    b.add(0, 0, 1, 1.0).unwrap();
    b.add(1, 0, 0, 1.0).unwrap();
    b.add(1, 1, 1, 1.0).unwrap();
    p.blocks.push(b);
    p
}

#[test]
fn trivial_problems() {
    let s = solve(&scalar_problem(), 1e-9).unwrap();
    assert_eq!(s.status, SdpStatus::Optimal);
    assert!(s.primal_value.abs() < 1e-7 && s.dual_value.abs() < 1e-7, "{s:?}");

    let s = solve(&two_by_two(), 1e-9).unwrap();
    assert_eq!(s.status, SdpStatus::Optimal);
    assert!((s.primal_value - 1.0).abs() < 1e-7, "{s:?}");
    assert!(check_certificate(&two_by_two(), &s).unwrap().pass);
}

#[test]
fn zero_variable_problem() {
    let sdp = polyopt::assemble_relaxation(&Polynomial::zero(), &[], &[], &[vec![polyopt::Monomial::one()]]).unwrap();
    let p = lower_numeric(&sdp);
    assert_eq!(p.nvars, 0);
    let s = solve(&p, 1e-9).unwrap();
    assert_eq!(s.status, SdpStatus::Optimal);
    assert!(check_certificate(&p, &s).unwrap().pass);
}

#[test]
fn certificate_examples() {
    let p = two_by_two();
    let exact = SdpSolution {
        y: vec![1.0],
        primal_value: 1.0,
        dual_value: 1.0,
        status: SdpStatus::Optimal,
        gap: 0.0,
        iterations: 0,
        x: Some(vec![vec![0.5, -0.5, -0.5, 0.5]]),
        lambda: None,
    };
    let r = check_certificate(&p, &exact).unwrap();
    assert!(r.pass, "{r:?}");
    assert!((r.dual_value.unwrap() - 1.0).abs() < 1e-15);

    let bad = SdpSolution {
        y: vec![1.0 - 1e-3],
        ..exact.clone()
    };
    let r = check_certificate(&p, &bad).unwrap();
    assert!(!r.pass);
    assert!(r.block_min_eig[0] < 0.0);

    // F_0 >= 0 and y = 0.
    let mut q = NumericSdp::new(2);
    let mut b = SdpBlock::new(2, BlockKind::Dense);
    b.add(0, 0, 0, 1.0).unwrap();
    b.add(0, 1, 1, 2.0).unwrap();
    b.add(1, 0, 1, 1.0).unwrap();
    b.add(2, 1, 1, -1.0).unwrap();
    q.blocks.push(b);
    let zero = SdpSolution {
        y: vec![0.0, 0.0],
        x: None,
        ..exact
    };
    assert!(check_certificate(&q, &zero).unwrap().pass);
}

#[test]
fn explicit_multipliers() {
    // min 2 y0 + y1 s.t. [[y0]] >= 0, y0 + y1 = 1; optimum 1 with X = 1, lambda = 1.
    let mut p = NumericSdp::new(2);
    p.c = vec![2.0, 1.0];
    let mut b = SdpBlock::new(1, BlockKind::Dense);
    b.add(1, 0, 0, 1.0).unwrap();
    p.blocks.push(b);
    p.equalities.push(EqRow::new([(0, 1.0), (1, 1.0)], 1.0));
    let sol = SdpSolution {
        y: vec![0.0, 1.0],
        primal_value: 1.0,
        dual_value: 1.0,
        status: SdpStatus::Optimal,
        gap: 0.0,
        iterations: 0,
        x: Some(vec![vec![1.0]]),
        lambda: Some(vec![1.0]),
    };
    let r = check_certificate(&p, &sol).unwrap();
    assert!(r.pass, "{r:?}");
    assert_eq!(r.dual_value, Some(1.0));
    let fitted = check_certificate(&p, &SdpSolution { lambda: None, ..sol.clone() }).unwrap();
    assert!(fitted.pass);
    assert!((fitted.dual_value.unwrap() - 1.0).abs() < 1e-12);
    let off = check_certificate(&p, &SdpSolution { lambda: Some(vec![0.9]), ..sol.clone() }).unwrap();
    assert!(!off.pass);
    assert!(check_certificate(&p, &SdpSolution { lambda: Some(vec![]), ..sol }).is_err());
}

#[test]
fn sdpa_golden_file() {
    let text = export_sdpa(&scalar_problem(), &ExportOptions::default());
    assert_eq!(text, include_str!("../../tests/golden/scalar.dat-s"));
    assert_eq!(text.lines().count(), 5);
    assert_eq!(import_sdpa(&text).unwrap(), scalar_problem());
}

#[test]
fn sdpa_import_tolerates_comments_and_separators() {
    let text = "\"a comment\n* another\n1 =mdim\n1\n{1}\n(1.0)\n1 1 1 1 1.0\n";
    let p = import_sdpa(text).unwrap();
    assert_eq!(p, scalar_problem());
}

#[test]
fn sdpa_reports_line_of_malformed_entry() {
    let text = "1\n1\n1\n1.0\n1 1 1 x 1.0\n";
    match import_sdpa(text) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
        other => panic!("{other:?}"),
    }
    assert!(import_sdpa("1\n1\n").is_err());
    assert!(import_sdpa("1\n1\n1\n1.0\n2 1 1 1 1.0\n").is_err());
    assert!(import_sdpa("1\n1\n-2\n1.0\n1 1 1 2 1.0\n").is_err());
}

#[test]
fn random_problems_solve_with_certificates() {
    let mut bad = Vec::new();
    for seed in 0..40 {
        let p = random_feasible_sdp(seed);
        let s = solve(&p, 1e-8).unwrap();
        if s.status != SdpStatus::Optimal || s.gap > 1e-7 {
            bad.push((seed, s.status, s.gap, s.iterations));
            continue;
        }
        assert!(s.dual_value <= s.primal_value + 1e-8, "seed {seed}");
        let r = check_certificate(&p, &s).unwrap();
        assert!(r.pass, "seed {seed}: {r:?}");
    }
    assert!(bad.is_empty(), "{bad:?}");
}

#[test]
fn sdpa_roundtrip_is_exact() {
    for seed in 0..40 {
        let p = random_feasible_sdp(seed);
        let text = export_sdpa(&p, &ExportOptions::default());
        let q = import_sdpa(&text).unwrap();
        assert_eq!(p, q, "seed {seed}");
        assert_eq!(export_sdpa(&q, &ExportOptions::default()), text);
        let blocks = tokens_of_line(&text, 1);
        assert_eq!(blocks, p.blocks.len() + usize::from(!p.equalities.is_empty()));
    }
}

fn tokens_of_line(text: &str, k: usize) -> usize {
    text.lines().filter(|l| !l.starts_with('*')).nth(k).unwrap().trim().parse().unwrap()
}

#[test]
fn strict_export_is_plain_sdpa() {
    let mut p = random_feasible_sdp(3);
    p.equalities.push(EqRow::new([(0, 1.0)], 0.25));
    let text = export_sdpa(&p, &ExportOptions { strict: true });
    assert!(!text.contains('*'));
    let q = import_sdpa(&text).unwrap();
    assert_eq!(q.blocks.len(), p.blocks.len() + 1);
    assert!(q.equalities.is_empty());
}

#[test]
fn solver_is_deterministic() {
    let p = random_feasible_sdp(11);
    let a = solve(&p, 1e-9).unwrap();
    let b = solve(&p, 1e-9).unwrap();
    assert_eq!(a, b);
}

fn x(i: usize) -> Polynomial {
    Polynomial::var(i)
}

fn relax_and_solve(
    obj: &Polynomial,
    ineqs: &[Inequality],
    eqs: &[(Polynomial, Vec<polyopt::Monomial>)],
    bases: &[Vec<polyopt::Monomial>],
) -> (NumericSdp, SdpSolution) {
    let sdp = polyopt::assemble_relaxation(obj, ineqs, eqs, bases).unwrap();
    let p = lower_numeric(&sdp);
    let s = solve(&p, 1e-8).unwrap();
    (p, s)
}

#[test]
fn relaxation_examples() {
    // min x1 s.t. x1^2 = 1
    let h = x(0).mul(&x(0)).sub(&Polynomial::constant(1.0));
    let (_, s) = relax_and_solve(&x(0), &[], &[(h, monomial_basis(1, 0))], &[monomial_basis(1, 1)]);
    assert_eq!(s.status, SdpStatus::Optimal);
    assert!((s.primal_value + 1.0).abs() < 1e-6, "{s:?}");

    // min x1^2
    let (_, s) = relax_and_solve(&x(0).mul(&x(0)), &[], &[], &[monomial_basis(1, 1)]);
    assert!(s.primal_value.abs() < 1e-6, "{s:?}");
}

#[test]
fn hierarchy_is_monotone_and_sound() {
    // min x1 x2 + x1 s.t. 1 - x1^2 - x2^2 >= 0
    let obj = x(0).mul(&x(1)).add(&x(0));
    let g = Polynomial::constant(1.0).sub(&x(0).mul(&x(0))).sub(&x(1).mul(&x(1)));
    let mut prev = f64::NEG_INFINITY;
    for m in 1..=3 {
        let loc = if m >= 1 { monomial_basis(2, m - 1) } else { monomial_basis(2, 0) };
        let (p, s) = relax_and_solve(&obj, &[Inequality::Scalar(g.clone(), loc)], &[], &[monomial_basis(2, m)]);
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!(check_certificate(&p, &s).unwrap().pass);
        assert!(s.dual_value >= prev - 1e-8, "degree {m}: {} < {prev}", s.dual_value);
        prev = s.dual_value;
        let mut rng = ChaCha8Rng::seed_from_u64(m as u64);
        for _ in 0..200 {
            let r: f64 = rng.random_range(0.0..1.0f64).sqrt();
            let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let pt = [r * t.cos(), r * t.sin()];
            assert!(obj.eval(&pt) >= s.dual_value - 1e-7);
        }
    }
}

#[test]
fn lowering_matches_symbolic_substitution() {
    let g = polyopt::PolyMatrix::from_rows(vec![vec![x(0), x(1)], vec![x(1), x(2)]]).unwrap();
    let sdp = polyopt::assemble_relaxation(
        &x(0),
        &[Inequality::Psd(g, monomial_basis(3, 1))],
        &[(x(0).sub(&x(2)), monomial_basis(3, 1))],
        &[monomial_basis(3, 2)],
    )
    .unwrap();
    let p = lower_numeric(&sdp);
    assert_eq!(p.nvars, sdp.variables.len());
    let pt = [0.3, -0.7, 1.1];
    let y = sdp.dirac_moments(&pt);
    for (b, pm) in p.blocks.iter().zip(&sdp.blocks) {
        let diff = (b.eval(&y) - pm.eval(&pt)).abs().max();
        assert!(diff < 1e-14);
    }
    for (e, pe) in p.equalities.iter().zip(&sdp.equalities) {
        assert!((e.residual(&y) - pe.eval(&pt)).abs() < 1e-14);
    }
    assert!((p.objective(&y) - 0.3).abs() < 1e-15);
}

#[test]
fn budget() {
    let p = random_feasible_sdp(0);
    assert!(SizeBudget::default().check(&p).is_ok());
    assert!(SizeBudget { max_block: 0, max_vars: 10 }.check(&p).is_err());
}
