//! Seeded random problems for solver tests.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BlockKind, EqRow, NumericSdp, SdpBlock};

fn random_sym(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Vec<(usize, usize, f64)> {
    let mut t = Vec::new();
    for i in 0..n {
        for j in i..n {
            if rng.random::<f64>() < density {
                t.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
    }
    t
}

fn random_pd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &g * g.transpose() + DMatrix::identity(n, n) * 0.5
}

/// A random problem with strictly feasible primal and dual points by
/// construction: up to 30 variables, up to 3 blocks of size up to 20 and
/// sometimes a few equalities. Deterministic in `seed`.
pub fn random_feasible_sdp(seed: u64) -> NumericSdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nvars = rng.random_range(1..=30);
    let nblocks = rng.random_range(1..=3);
    let y0: Vec<f64> = (0..nvars).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut p = NumericSdp::new(nvars);
    let mut xs = Vec::new();
    for _ in 0..nblocks {
        let diag = rng.random::<f64>() < 0.2;
        let n = rng.random_range(1..=20);
        let density = rng.random_range(0.2..1.0);
        let mut b = SdpBlock::new(n, if diag { BlockKind::Diagonal } else { BlockKind::Dense });
        let mut f = DMatrix::<f64>::zeros(n, n);
        for v in 0..nvars {
            let t = if diag {
                let mut t = Vec::new();
                for i in 0..n {
                    if rng.random::<f64>() < density {
                        t.push((i, i, rng.random_range(-1.0..1.0)));
                    }
                }
                t
            } else {
                random_sym(&mut rng, n, density)
            };
            for (i, j, a) in t {
                b.add(v + 1, i, j, a).unwrap();
                f[(i, j)] += a * y0[v];
                if i != j {
                    f[(j, i)] += a * y0[v];
                }
            }
        }
        let (s0, x0) = if diag {
            let s: DMatrix<f64> = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| rng.random_range(0.5..2.0)));
            let x: DMatrix<f64> = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| rng.random_range(0.5..2.0)));
            (s, x)
        } else {
            (random_pd(&mut rng, n), random_pd(&mut rng, n))
        };
        // F_0 = S_0 - sum y0_i F_i
        let f0 = s0 - f;
        for i in 0..n {
            for j in i..n {
                if !diag || i == j {
                    b.add(0, i, j, f0[(i, j)]).unwrap();
                }
            }
        }
        p.blocks.push(b);
        xs.push(x0);
    }
    let mut dummy = 0.0;
    let mut c = vec![0.0; nvars];
    for (b, x) in p.blocks.iter().zip(&xs) {
        b.inner_products(x, &mut dummy, &mut c);
    }
    if rng.random::<f64>() < 0.3 {
        let m = rng.random_range(1..=nvars.min(4));
        for _ in 0..m {
            let mut coeffs = Vec::new();
            for v in 0..nvars {
                if rng.random::<f64>() < 0.5 {
                    coeffs.push((v, rng.random_range(-1.0..1.0)));
                }
            }
            let row = EqRow::new(coeffs, 0.0);
            let rhs = row.coeffs.iter().map(|&(v, a)| a * y0[v]).sum();
            let l0: f64 = rng.random_range(-1.0..1.0);
            for &(v, a) in &row.coeffs {
                c[v] += a * l0;
            }
            p.equalities.push(EqRow { rhs, ..row });
        }
    }
    p.c = c;
    p.offset = rng.random_range(-1.0..1.0);
    p
}
