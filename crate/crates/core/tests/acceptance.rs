//! Acceptance checks, one PASS/FAIL line each. Runs as a plain binary
//! (`harness = false`) so the lines come out in order and unbuffered.

use std::io::Read;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use aes_core::aesbound::{self, BoundOutcome, RelaxationConfig, SolveMode};
use aes_core::heuristic::{minimize_set_entanglement, sweep, Measure, MinimizeOptions, SweepPoint};
use aes_core::linalg::{self, min_eigenvalue_real};
use aes_core::polyopt::{
    localize_equality, localizing_matrix_psd, localizing_matrix_scalar, moment_matrix, monomial_basis, PolyMatrix,
    Polynomial,
};
use aes_core::qstate::{product_residual, Bipartition, PureState};
use aes_core::sdpcore::{self, random::random_feasible_sdp, ExportOptions, SdpSolution, SdpStatus};
use aes_core::sets::{self, candidate_max_set, FamilyKind, FamilyParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn opts(starts: usize) -> MinimizeOptions {
    MinimizeOptions {
        starts,
        ..Default::default()
    }
}

fn heuristic_set2(measure: Measure) -> f64 {
    minimize_set_entanglement(&candidate_max_set(), measure, &opts(50)).unwrap().value
}

fn reduced_bound() -> aesbound::BoundReport {
    match aesbound::lower_bound_negativity(&candidate_max_set(), &RelaxationConfig::reduced(), &SolveMode::Internal).unwrap() {
        BoundOutcome::Solved(r) => r,
        other => panic!("unexpected {other:?}"),
    }
}

fn c1() -> Outcome {
    let v = heuristic_set2(Measure::Negativity);
    ensure((v - 0.4609).abs() <= 5e-3, format!("value {v}"))?;
    Ok(format!("value {v:.6} (0.4609 +- 5e-3)"))
}

fn c2() -> Outcome {
    let bp = Bipartition::qubits();
    let point = |c: f64| SweepPoint {
        param: c,
        family: FamilyParams {
            kind: FamilyKind::OneParam,
            bp,
            c: Some(c),
            v: 1.0,
        },
    };
    let grid: Vec<f64> = (0..=9).map(|k| 0.5 + 0.05 * k as f64).collect();
    let rows = sweep(&grid.iter().map(|&c| point(c)).collect::<Vec<_>>(), Measure::Negativity, &opts(20)).unwrap();
    let mut notes = Vec::new();
    for row in &rows {
        let r = row.result.as_ref().map_err(|e| format!("c = {}: {e}", row.param))?;
        if row.param < 0.525 {
            ensure(r.value <= 1e-6, format!("c = 0.5 gives {}", r.value))?;
            continue;
        }
        ensure(r.value > 1e-4, format!("c = {} gives {}", row.param, r.value))?;
        let carrying = r.per_state.iter().filter(|&&n| n >= 1e-6).count();
        ensure(carrying == 1, format!("c = {}: per-state {:?}", row.param, r.per_state))?;
        notes.push(format!("{:.2}:{:.4}", row.param, r.value));
    }
    Ok(format!("c=0.50 -> {:.1e}; {}", rows[0].result.as_ref().unwrap().value, notes.join(" ")))
}

fn c3() -> Outcome {
    let at = |v: f64| {
        let set = sets::add_white_noise(&candidate_max_set(), v).unwrap();
        minimize_set_entanglement(&set, Measure::Negativity, &opts(20)).unwrap().value
    };
    let (lo, hi) = (at(0.55), at(0.95));
    ensure(lo <= 1e-4, format!("v = 0.55 gives {lo}"))?;
    ensure(hi >= 1e-2, format!("v = 0.95 gives {hi}"))?;
    Ok(format!("v=0.55 -> {lo:.2e}, v=0.95 -> {hi:.4}"))
}

fn c4() -> Outcome {
    let mut worst = (0.0f64, 0.0f64);
    for c21 in [0.1, 0.3, 0.5] {
        let (set, u) = sets::separability_unitary_appb(c21).map_err(|e| e.to_string())?;
        let defect = linalg::unitarity_defect(&u);
        ensure(defect <= 1e-10, format!("c21 = {c21}: defect {defect}"))?;
        for s in set.pure_states().unwrap() {
            let r = product_residual(&s.transformed(&u).unwrap(), set.bipartition()).unwrap();
            ensure(r <= 1e-9, format!("c21 = {c21}: residual {r}"))?;
            worst.1 = worst.1.max(r);
        }
        worst.0 = worst.0.max(defect);
    }
    Ok(format!("max defect {:.1e}, max residual {:.1e}", worst.0, worst.1))
}

fn c5() -> Outcome {
    let bp = Bipartition::qubits();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for t in 0..100 {
        let states: Vec<PureState> = (0..3)
            .map(|_| PureState::normalized(linalg::random_state(4, &mut rng)).unwrap())
            .collect();
        let u = sets::productizing_basis(&states, bp).map_err(|e| format!("triple {t}: {e}"))?;
        for s in &states {
            let r = product_residual(&s.transformed(&u).unwrap(), bp).unwrap();
            ensure(r <= 1e-9, format!("triple {t}: residual {r}"))?;
            worst = worst.max(r);
        }
    }
    Ok(format!("100 triples, max residual {worst:.1e}"))
}

fn c6() -> Outcome {
    let cases = [((2, 2), 0.5), ((2, 3), (1.0f64 / 3.0).sqrt()), ((3, 3), 2.0 / 3.0)];
    for ((a, b), want) in cases {
        let got = sets::threshold_amplitude(Bipartition::new(a, b).unwrap());
        ensure((got - want).abs() <= 1e-12, format!("({a},{b}): {got} vs {want}"))?;
    }
    Ok("0.5, sqrt(1/3), 2/3".into())
}

fn random_poly(rng: &mut ChaCha8Rng, nvars: usize, deg: u32) -> Polynomial {
    Polynomial::from_terms(
        monomial_basis(nvars, deg)
            .into_iter()
            .map(|m| (m, rng.random_range(-1.0..1.0))),
    )
}

fn c7() -> Outcome {
    let x = Polynomial::var;
    let m = moment_matrix(&monomial_basis(2, 2)).moment_display(2);
    ensure(m == include_str!("golden/moment_n2_m2.txt"), "moment matrix differs from golden")?;
    let g = x(0).add(&x(1).mul(&x(1)));
    let m = localizing_matrix_scalar(&g, &monomial_basis(2, 1)).moment_display(2);
    ensure(m == include_str!("golden/localizer_scalar.txt"), "scalar localizer differs from golden")?;
    let g = PolyMatrix::from_rows(vec![vec![x(0), x(1)], vec![x(1), x(2)]]).unwrap();
    let m = localizing_matrix_psd(&g, &monomial_basis(3, 1)).unwrap().moment_display(3);
    ensure(m == include_str!("golden/localizer_psd.txt"), "PSD localizer differs from golden")?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut min_eig, mut max_eq) = (f64::INFINITY, 0.0f64);
    for _ in 0..1000 {
        let n = rng.random_range(1..=3);
        let pt: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        let mut eigs = vec![min_eigenvalue_real(&moment_matrix(&monomial_basis(n, 2)).eval(&pt))];
        let deg = rng.random_range(0..=3);
        let mut g = random_poly(&mut rng, n, deg);
        if g.eval(&pt) < 0.0 {
            g = g.scale(-1.0);
        }
        eigs.push(min_eigenvalue_real(&localizing_matrix_scalar(&g, &monomial_basis(n, 1)).eval(&pt)));
        // A A^T with polynomial A is PSD everywhere; degree 2 entries.
        let a = PolyMatrix::from_fn(2, 2, |_, _| random_poly(&mut rng, n, 1));
        let gm = PolyMatrix::from_fn(2, 2, |i, j| a.get(i, 0).mul(a.get(j, 0)).add(&a.get(i, 1).mul(a.get(j, 1))));
        eigs.push(min_eigenvalue_real(&localizing_matrix_psd(&gm, &monomial_basis(n, 1)).unwrap().eval(&pt)));
        for e in eigs {
            min_eig = min_eig.min(e);
        }
        let deg = rng.random_range(1..=3);
        let h = random_poly(&mut rng, n, deg);
        let h = h.sub(&Polynomial::constant(h.eval(&pt)));
        for e in localize_equality(&h, &monomial_basis(n, 1)) {
            max_eq = max_eq.max(e.eval(&pt).abs());
        }
    }
    ensure(min_eig >= -1e-10, format!("min eigenvalue {min_eig}"))?;
    ensure(max_eq <= 1e-10, format!("equality residual {max_eq}"))?;
    Ok(format!("goldens identical; 1000 points, min eig {min_eig:.1e}, max eq residual {max_eq:.1e}"))
}

fn c8() -> Outcome {
    let mut worst_gap = 0.0f64;
    for seed in 0..200 {
        let p = random_feasible_sdp(seed);
        let text = sdpcore::export_sdpa(&p, &ExportOptions::default());
        let again = sdpcore::export_sdpa(&sdpcore::import_sdpa(&text).unwrap(), &ExportOptions::default());
        ensure(text == again, format!("seed {seed}: SDPA roundtrip differs"))?;
        let s = sdpcore::solve(&p, 1e-8).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(
            s.status == SdpStatus::Optimal && s.gap <= 1e-7,
            format!("seed {seed}: {:?} gap {}", s.status, s.gap),
        )?;
        let r = sdpcore::check_certificate(&p, &s).unwrap();
        ensure(r.pass, format!("seed {seed}: certificate {r:?}"))?;
        worst_gap = worst_gap.max(s.gap);
    }
    Ok(format!("200 problems, max gap {worst_gap:.1e}, roundtrips identical"))
}

fn c9() -> Outcome {
    let r = reduced_bound();
    let h = heuristic_set2(Measure::Negativity);
    ensure(r.certificate.pass, format!("certificate failed: {:?}", r.certificate))?;
    ensure(r.bound >= 0.0 && r.bound <= h + 1e-6, format!("bound {} vs heuristic {h}", r.bound))?;
    Ok(format!("bound {:.3e} <= heuristic {h:.6}, certificate ok", r.bound))
}

fn gunzip(path: &Path) -> Result<String, String> {
    let f = std::fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut s = String::new();
    flate2::read::GzDecoder::new(f)
        .read_to_string(&mut s)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(s)
}

fn c10() -> Outcome {
    let set = candidate_max_set();
    let sdp = aesbound::build_negativity_relaxation(&set, &RelaxationConfig::default()).unwrap();
    ensure(sdp.nvars == 160, format!("{} polynomial variables", sdp.nvars))?;
    ensure(sdp.blocks[0].rows() == 561, format!("u block has {} rows", sdp.blocks[0].rows()))?;

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let p = sdpcore::import_sdpa(&gunzip(&dir.join("set2_full.dat-s.gz"))?).map_err(|e| e.to_string())?;
    ensure(p == sdpcore::lower_numeric(&sdp), "fixture differs from the assembled relaxation")?;
    let sol: SdpSolution = serde_json::from_str(&gunzip(&dir.join("set2_full.solution.json.gz"))?).map_err(|e| e.to_string())?;
    let r = aesbound::bound_from_solution(&p, &sol).map_err(|e| e.to_string())?;
    ensure(r.certificate.pass, format!("certificate failed: {:?}", r.certificate))?;
    ensure((r.bound - 0.2213).abs() <= 0.01, format!("bound {}", r.bound))?;
    Ok(format!("160 variables, 561-row block; fixture bound {:.4} (0.2213 +- 0.01)", r.bound))
}

fn c11() -> Outcome {
    let f0 = aesbound::entropy_of_negativity(0.0).unwrap();
    let f5 = aesbound::entropy_of_negativity(0.5).unwrap();
    ensure(f0.abs() <= 1e-12 && (f5 - 1.0).abs() <= 1e-12, format!("f(0) = {f0}, f(0.5) = {f5}"))?;
    let set = candidate_max_set();
    let b = reduced_bound().bound;
    let lower = aesbound::entropy_lower_bound(b, set.len()).unwrap();
    let upper = heuristic_set2(Measure::Entropy);
    ensure(lower <= upper + 1e-6, format!("K f(b/K) = {lower} above heuristic entropy {upper}"))?;
    Ok(format!("K f(b/K) = {lower:.4e} <= {upper:.6}; f(0) = 0, f(0.5) = 1"))
}

fn main() {
    let checks: [(&str, fn() -> Outcome); 11] = [
        ("1 heuristic set2 value", c1),
        ("2 one-parameter sweep shape", c2),
        ("3 noise sweep shape", c3),
        ("4 four-state separable-basis unitaries", c4),
        ("5 productizing random triples", c5),
        ("6 threshold amplitudes", c6),
        ("7 moment goldens and Dirac suite", c7),
        ("8 random SDP suite", c8),
        ("9 reduced certified bound", c9),
        ("10 full certified bound replay", c10),
        ("11 entropy chain", c11),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in checks {
        let id = name.split(' ').next().unwrap();
        if !only.is_empty() && !only.iter().any(|o| o == id) {
            continue;
        }
        let t = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match out {
            Ok(m) => println!("PASS criterion {name}: {m} [{secs:.1}s]"),
            Err(m) => {
                failed += 1;
                println!("FAIL criterion {name}: {m} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
