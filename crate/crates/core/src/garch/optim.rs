//! Quasi-Newton minimizer (BFGS with backtracking Armijo line search).

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Gradient slack granted when the line search can no longer make progress.
const STALL_FACTOR: f64 = 1e3;
/// Relative decrease below which a step counts as no progress.
const F_TOL: f64 = 1e-14;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Minimizes `f`, which returns the value and gradient at a point.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: BfgsOptions) -> BfgsResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x);
    let mut hinv = identity(n);
    let mut iterations = 0;
    let mut fresh = true;
    let mut stalled = false;

    while iterations < opts.max_iter {
        if norm(&g) < opts.grad_tol {
            break;
        }
        iterations += 1;
        let mut p: Vec<f64> = (0..n).map(|i| -dot(&hinv[i], &g)).collect();
        let mut slope = dot(&p, &g);
        if slope >= 0.0 {
            hinv = identity(n);
            p = g.iter().map(|v| -v).collect();
            slope = dot(&p, &g);
            fresh = true;
        }
        // the first step after a reset is capped at unit length
        let mut step = if fresh { 1.0f64.min(1.0 / norm(&p)) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + step * b).collect();
            let (fn_, gn) = f(&xn);
            if fn_.is_finite() && fn_ <= fx + 1e-4 * step * slope {
                accepted = Some((xn, fn_, gn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            if fresh {
                stalled = true;
                break;
            }
            hinv = identity(n);
            fresh = true;
            continue;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if fresh {
                // scale the initial inverse Hessian
                let scale = sy / dot(&y, &y);
                hinv = identity(n)
                    .into_iter()
                    .map(|r| r.into_iter().map(|v| v * scale).collect())
                    .collect();
            }
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| dot(&hinv[i], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    hinv[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
            fresh = false;
        }
        let gain = fx - fn_;
        x = xn;
        fx = fn_;
        g = gn;
        // flat drift along a saturated coordinate, typically a boundary optimum
        if gain <= F_TOL * fx.abs().max(1.0) && norm(&g) < STALL_FACTOR * opts.grad_tol {
            stalled = true;
            break;
        }
    }
    let grad_norm = norm(&g);
    BfgsResult {
        x,
        f: fx,
        grad_norm,
        iterations,
        // A steepest-descent step that cannot lower `f` at all means the
        // point is stationary to working precision.
        converged: grad_norm < opts.grad_tol || (stalled && grad_norm < STALL_FACTOR * opts.grad_tol),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            (v, g)
        };
        let r = minimize(
            f,
            &[-1.2, 1.0],
            BfgsOptions {
                grad_tol: 1e-8,
                max_iter: 500,
            },
        );
        assert!(r.converged, "{r:?}");
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn quadratic_in_few_steps() {
        let f = |x: &[f64]| {
            let v = 3.0 * x[0] * x[0] + 0.5 * x[1] * x[1] + x[0] * x[1];
            (v, vec![6.0 * x[0] + x[1], x[1] + x[0]])
        };
        let r = minimize(
            f,
            &[4.0, -2.0],
            BfgsOptions {
                grad_tol: 1e-10,
                max_iter: 100,
            },
        );
        assert!(r.converged);
        assert!(r.iterations < 20);
    }
}
