//! One-dimensional quadrature: adaptive Gauss-Kronrod (7/15) and fixed
//! Gauss-Legendre rules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("adaptive quadrature did not converge on [{a}, {b}]: estimate {estimate}, error {error:e} after {intervals} intervals")]
    NotConverged {
        a: f64,
        b: f64,
        estimate: f64,
        error: f64,
        intervals: usize,
    },
    #[error("integrand is not finite at x = {0}")]
    NonFinite(f64),
}

// Kronrod abscissae on [0, 1]; even indices (1, 3, 5, 7) are the Gauss points.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Segment, QuadError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(QuadError::NonFinite(center));
    }
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = kronrod.abs();
    let mut values = [(0.0, 0.0); 7];
    for (j, item) in values.iter_mut().enumerate() {
        let dx = half * XGK[j];
        let (x1, x2) = (center - dx, center + dx);
        let (f1, f2) = (f(x1), f(x2));
        if !f1.is_finite() {
            return Err(QuadError::NonFinite(x1));
        }
        if !f2.is_finite() {
            return Err(QuadError::NonFinite(x2));
        }
        *item = (f1, f2);
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for (j, (f1, f2)) in values.iter().enumerate() {
        asc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
    }
    let value = kronrod * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Segment { a, b, value, error })
}

/// Globally adaptive Gauss-Kronrod integrator (bisects the worst interval).
#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 0.0,
            max_intervals: 4000,
        }
    }
}

impl Integrator {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<Quad, QuadError> {
        if a == b {
            return Ok(Quad {
                value: 0.0,
                error: 0.0,
                intervals: 0,
            });
        }
        let first = gk15(&f, a, b)?;
        let mut total = first.value;
        let mut total_err = first.error;
        let mut heap = BinaryHeap::new();
        heap.push(first);
        // Once the worst interval is at its roundoff limit, bisection gains nothing.
        let floor = |seg: &Segment| seg.error <= 50.0 * f64::EPSILON * seg.value.abs().max(1e-300);
        while total_err > self.abs_tol.max(self.rel_tol * total.abs()) {
            if heap.peek().is_some_and(floor) {
                break;
            }
            if heap.len() >= self.max_intervals {
                return Err(QuadError::NotConverged {
                    a,
                    b,
                    estimate: total,
                    error: total_err,
                    intervals: heap.len(),
                });
            }
            let worst = heap.pop().expect("heap is never empty");
            let mid = 0.5 * (worst.a + worst.b);
            let left = gk15(&f, worst.a, mid)?;
            let right = gk15(&f, mid, worst.b)?;
            total += left.value + right.value - worst.value;
            total_err += left.error + right.error - worst.error;
            heap.push(left);
            heap.push(right);
        }
        // Re-sum to avoid drift from the running updates.
        let segs = heap.into_sorted_vec();
        let mut sorted: Vec<_> = segs.iter().map(|s| (s.a, s.value)).collect();
        sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
        Ok(Quad {
            value: sorted.iter().map(|s| s.1).sum(),
            error: total_err,
            intervals: segs.len(),
        })
    }

    /// Integral over `[a, +inf)` through the map `x = a + s / (1 - s)`.
    pub fn integrate_to_infinity<F: Fn(f64) -> f64>(&self, f: F, a: f64) -> Result<Quad, QuadError> {
        self.integrate(
            |s| {
                let one_minus = 1.0 - s;
                let x = a + s / one_minus;
                let fx = f(x);
                if fx == 0.0 {
                    0.0
                } else {
                    fx / (one_minus * one_minus)
                }
            },
            0.0,
            1.0,
        )
    }

    /// Integral over `(-inf, b]`.
    pub fn integrate_from_neg_infinity<F: Fn(f64) -> f64>(&self, f: F, b: f64) -> Result<Quad, QuadError> {
        self.integrate_to_infinity(|y| f(-y), -b)
    }
}

/// Fixed n-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (c + h * x, h * w))
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
