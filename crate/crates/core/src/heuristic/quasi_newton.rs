//! Derivative-free quasi-Newton descent: BFGS on central-difference gradients
//! with Armijo backtracking, falling back to coordinate search when the line
//! search stalls (the negativity objective has kinks).

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct QnOptions {
    pub max_iter: usize,
    pub grad_eps: f64,
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct QnOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;
const MIN_COORD_STEP: f64 = 1e-10;
/// Consecutive iterations with negligible decrease that count as stationary.
const STALL_ITERS: usize = 30;

pub fn central_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], eps: f64) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let xi = xp[i];
        xp[i] = xi + eps;
        let fp = f(&xp);
        xp[i] = xi - eps;
        let fm = f(&xp);
        xp[i] = xi;
        g[i] = (fp - fm) / (2.0 * eps);
    }
    g
}

/// Minimizes `f` from `x0`. `f` is assumed bounded below by `floor`; reaching
/// it ends the search.
pub fn minimize<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], floor: f64, opts: &QnOptions) -> QnOutcome {
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f(x.as_slice());
    let mut g = central_gradient(f, x.as_slice(), opts.grad_eps);
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut coord_step = 1e-2f64;
    let mut stall = 0;

    for _ in 0..opts.max_iter {
        if stall >= STALL_ITERS {
            return QnOutcome {
                x: x.as_slice().to_vec(),
                value: fx,
                converged: true,
            };
        }
        if fx <= floor || g.norm() <= opts.tol {
            return QnOutcome {
                x: x.as_slice().to_vec(),
                value: fx,
                converged: true,
            };
        }
        let mut p = -(&h_inv * &g);
        let mut slope = g.dot(&p);
        if slope >= 0.0 || !slope.is_finite() {
            h_inv.fill_with_identity();
            fresh = true;
            p = -g.clone();
            slope = g.dot(&p);
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= MIN_STEP {
            let trial = &x + &p * alpha;
            let ft = f(trial.as_slice());
            if ft <= fx + ARMIJO * alpha * slope {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }

        match accepted {
            Some((x_new, f_new)) => {
                let g_new = central_gradient(f, x_new.as_slice(), opts.grad_eps);
                let s = &x_new - &x;
                let y = &g_new - &g;
                let sy = s.dot(&y);
                if sy > 1e-12 * s.norm() * y.norm() {
                    if fresh {
                        // Shanno-Phua scaling of the initial inverse Hessian.
                        h_inv *= sy / y.dot(&y);
                        fresh = false;
                    }
                    let rho = 1.0 / sy;
                    let hy = &h_inv * &y;
                    let yhy = y.dot(&hy);
                    h_inv += (&s * s.transpose()) * (rho * rho * yhy + rho)
                        - (&hy * s.transpose() + &s * hy.transpose()) * rho;
                }
                if fx - f_new <= opts.tol * (1.0 + fx.abs()) {
                    stall += 1;
                } else {
                    stall = 0;
                }
                x = x_new;
                fx = f_new;
                g = g_new;
            }
            None if !fresh => {
                h_inv.fill_with_identity();
                fresh = true;
            }
            None => {
                // Steepest descent failed too: probe coordinate directions.
                match coordinate_search(f, &mut x, &mut fx, &mut coord_step) {
                    true => {
                        g = central_gradient(f, x.as_slice(), opts.grad_eps);
                        h_inv.fill_with_identity();
                        fresh = true;
                    }
                    false => {
                        return QnOutcome {
                            x: x.as_slice().to_vec(),
                            value: fx,
                            converged: true,
                        };
                    }
                }
            }
        }
    }
    QnOutcome {
        x: x.as_slice().to_vec(),
        value: fx,
        converged: false,
    }
}

/// Shrinking compass search; returns false once the step underflows without improvement.
fn coordinate_search<F: Fn(&[f64]) -> f64>(
    f: &F,
    x: &mut DVector<f64>,
    fx: &mut f64,
    step: &mut f64,
) -> bool {
    while *step >= MIN_COORD_STEP {
        let mut improved = false;
        for i in 0..x.len() {
            for sign in [1.0, -1.0] {
                let xi = x[i];
                x[i] = xi + sign * *step;
                let ft = f(x.as_slice());
                if ft < *fx {
                    *fx = ft;
                    improved = true;
                    break;
                }
                x[i] = xi;
            }
        }
        if improved {
            return true;
        }
        *step *= 0.25;
    }
    false
}

/// Damped Gauss-Newton on `r(x) = 0` with minimum-norm steps and a
/// central-difference Jacobian. Returns the final point and `max |r|`.
pub fn project_to_zero_set<R: Fn(&[f64]) -> Vec<f64>>(
    r: &R,
    x0: &[f64],
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut res = r(&x);
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut best = inf(&res);
    for _ in 0..max_iter {
        if best < 1e-15 || res.is_empty() {
            break;
        }
        let m = res.len();
        let h = 1e-7;
        let mut jac = DMatrix::<f64>::zeros(m, n);
        let mut xp = x.clone();
        for j in 0..n {
            let xj = xp[j];
            xp[j] = xj + h;
            let rp = r(&xp);
            xp[j] = xj - h;
            let rm = r(&xp);
            xp[j] = xj;
            for i in 0..m {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let jjt = &jac * jac.transpose();
        let damp = 1e-14 * (1.0 + jjt.diagonal().max());
        let mut reg = jjt.clone();
        for i in 0..m {
            reg[(i, i)] += damp;
        }
        let rv = DVector::from_vec(res.clone());
        let Some(w) = reg.lu().solve(&rv) else { break };
        let step = jac.transpose() * w;
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-4 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
            let rt = r(&trial);
            let nt = inf(&rt);
            if nt < best {
                x = trial;
                res = rt;
                best = nt;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (x, best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let out = minimize(
            &f,
            &[-1.2, 1.0],
            f64::NEG_INFINITY,
            &QnOptions {
                max_iter: 2000,
                grad_eps: 1e-6,
                tol: 1e-8,
            },
        );
        assert!(out.value < 1e-10, "{out:?}");
    }

    #[test]
    fn nonsmooth_sum_of_abs_reaches_kink() {
        let f = |x: &[f64]| (x[0] - 0.3).abs() + 2.0 * (x[1] + x[0]).abs() + 0.1 * x[2] * x[2];
        let out = minimize(
            &f,
            &[1.0, 1.0, 1.0],
            0.0,
            &QnOptions {
                max_iter: 2000,
                grad_eps: 1e-6,
                tol: 1e-10,
            },
        );
        assert!(out.value < 1e-5, "{out:?}");
    }

    #[test]
    fn gauss_newton_projection() {
        let r = |x: &[f64]| vec![x[0] * x[1] - 1.0, x[2] - x[0]];
        let (x, res) = project_to_zero_set(&r, &[2.0, 2.0, 0.0], 50);
        assert!(res < 1e-13, "{res}");
        assert!((x[0] * x[1] - 1.0).abs() < 1e-13);
    }
}
