//! Derivative-free minimization.

/// Result of [`nelder_mead`].
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Edge length of the initial simplex.
    pub step: f64,
    /// Stop when every vertex is within `x_tol` of the best one and the
    /// values agree to `f_tol`.
    pub x_tol: f64,
    pub f_tol: f64,
    pub max_evaluations: usize,
    /// Fresh simplices built around the current best point.
    pub restarts: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            step: 0.1,
            x_tol: 1e-6,
            f_tol: 1e-12,
            max_evaluations: 2000,
            restarts: 2,
        }
    }
}

fn run<F: FnMut(&[f64]) -> f64>(f: &mut F, x0: &[f64], opts: &SimplexOptions, budget: usize) -> Minimum {
    let n = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0, &mut evals)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += opts.step;
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }
    let mut converged = false;
    while evals < budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].clone();
        let spread = simplex
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&best.0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= opts.x_tol && (simplex[n].1 - best.1).abs() <= opts.f_tol.max(f64::EPSILON * best.1.abs()) {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|(x, _)| x[i]).sum::<f64>() / n as f64)
            .collect();
        let along = |c: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(m, w)| m + c * (m - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let x = along(0.5);
                let v = eval(&x, &mut evals);
                (x, v)
            } else {
                let x = along(-0.5);
                let v = eval(&x, &mut evals);
                (x, v)
            };
            if fc < fr.min(simplex[n].1) {
                simplex[n] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = vertex.0.iter().zip(&x0).map(|(a, b)| b + 0.5 * (a - b)).collect();
                    let v = eval(&x, &mut evals);
                    *vertex = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum {
        x,
        value,
        evaluations: evals,
        converged,
    }
}

/// Nelder-Mead simplex search with restarts. Restarts stop early once one
/// fails to improve on the best value.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: SimplexOptions) -> Minimum {
    let mut best = run(&mut f, x0, &opts, opts.max_evaluations);
    let mut evaluations = best.evaluations;
    for _ in 0..opts.restarts {
        if evaluations >= opts.max_evaluations {
            break;
        }
        let next = run(&mut f, &best.x, &opts, opts.max_evaluations - evaluations);
        evaluations += next.evaluations;
        let improved = next.value < best.value;
        if improved {
            best = next;
        }
        if !improved || best.converged {
            best.converged |= !improved;
            break;
        }
    }
    best.evaluations = evaluations;
    best
}
