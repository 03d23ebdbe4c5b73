//! Rotationally symmetric solutions of `sigma_2(A_u) = (3/2) e^{4u}` on R^4.
//!
//! In cylinder coordinates `tau = ln r`, `w = u + tau`, the equation reduces
//! to `w'' = -e^{4w} / (1 - w'^2)` with first integral
//! `H = v^2/2 - v^4/4 + e^{4w}/4` (`v = w'`). The heteroclinic orbit with
//! `v` running from `+a` to `-a` is the football with cone parameter
//! `a - 1` at both ends; `a = 1` is the round sphere.
//!
//! Profiles are parametrized by `xi` with `v = a tanh(xi)`, which turns the
//! logarithmic ends of `tau(v)` into a smooth integrand with a finite limit.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{GaussLegendre, Integrator, QuadError};

#[derive(Debug, Error)]
pub enum RadialError {
    #[error("cone parameter {0} is outside (-1, 0]")]
    BetaOutOfRange(f64),
    #[error("profile needs at least 16 samples, got {0}")]
    TooFewSamples(usize),
    #[error("endpoint margin must lie in (0, 1), got {0}")]
    BadMargin(f64),
    #[error("|v| = {0} leaves the elliptic cone (needs |v| < 1)")]
    ConeExit(f64),
    #[error("profile quadrature failed: {0}")]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Right-hand side of the cylinder equation, `w'' = -e^{4w}/(1 - v^2)`.
pub fn cylinder_rhs(w: f64, v: f64) -> Result<f64, RadialError> {
    if !(v.abs() < 1.0) {
        return Err(RadialError::ConeExit(v.abs()));
    }
    Ok(-(4.0 * w).exp() / (1.0 - v * v))
}

/// `H = v^2/2 - v^4/4 + e^{4w}/4`.
pub fn first_integral(w: f64, v: f64) -> f64 {
    let v2 = v * v;
    0.5 * v2 - 0.25 * v2 * v2 + 0.25 * (4.0 * w).exp()
}

/// Construction parameters for [`RadialSolution::football_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    pub n_samples: usize,
    /// Profiles stop at `|v| = a (1 - endpoint_margin)`.
    pub endpoint_margin: f64,
    pub abs_tol: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            n_samples: 2048,
            endpoint_margin: 1e-8,
            abs_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub xi: f64,
    pub tau: f64,
    pub w: f64,
    pub v: f64,
}

/// Full cylinder state at one point of the orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialState {
    pub xi: f64,
    pub tau: f64,
    pub w: f64,
    pub v: f64,
    /// `w''(tau)`.
    pub w2: f64,
    /// `e^{4w}`.
    pub e4w: f64,
    /// `dtau/dxi` (negative).
    pub dtau: f64,
    /// `dv/dxi`.
    pub dv: f64,
    /// `int_{-inf}^{tau} e^{4w} dtau'`, the normalized weighted volume of the
    /// super-level set through this point.
    pub inner_volume: f64,
}

/// Constant-sigma_2 profile with equal cone parameters at the origin and at
/// infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSolution {
    beta: f64,
    a: f64,
    b2: f64,
    h: f64,
    xi0: f64,
    dxi: f64,
    tau: Vec<f64>,
    inner: Vec<f64>,
    total_volume: f64,
    rule: GaussLegendre,
}

/// `ln sech(x)` without overflow.
fn ln_sech(x: f64) -> f64 {
    let ax = x.abs();
    -ax + std::f64::consts::LN_2 - (-2.0 * ax).exp().ln_1p()
}

fn sech2(x: f64) -> f64 {
    (2.0 * ln_sech(x)).exp()
}

impl RadialSolution {
    /// The round sphere `u = ln(2/(1+r^2))`.
    pub fn sphere() -> Self {
        Self::build(0.0, ProfileOptions::default()).expect("sphere profile always builds")
    }

    /// Football with cone parameter `beta` in `(-1, 0]`; `beta = 0` gives
    /// the sphere.
    pub fn football(beta: f64) -> Result<Self, RadialError> {
        Self::football_with(beta, ProfileOptions::default())
    }

    pub fn football_with(beta: f64, opts: ProfileOptions) -> Result<Self, RadialError> {
        if !(beta > -1.0 && beta <= 0.0) {
            return Err(RadialError::BetaOutOfRange(beta));
        }
        Self::build(beta, opts)
    }

    fn build(beta: f64, opts: ProfileOptions) -> Result<Self, RadialError> {
        if opts.n_samples < 16 {
            return Err(RadialError::TooFewSamples(opts.n_samples));
        }
        if !(opts.endpoint_margin > 0.0 && opts.endpoint_margin < 1.0) {
            return Err(RadialError::BadMargin(opts.endpoint_margin));
        }
        let a = 1.0 + beta;
        let b2 = 2.0 - a * a;
        let h = 0.25 * a * a * b2;
        let xi_max = (1.0 - opts.endpoint_margin).atanh();
        let n = opts.n_samples;
        let dxi = 2.0 * xi_max / (n - 1) as f64;
        let mut sol = Self {
            beta,
            a,
            b2,
            h,
            xi0: -xi_max,
            dxi,
            tau: vec![0.0; n],
            inner: vec![0.0; n],
            total_volume: 0.0,
            rule: GaussLegendre::new(10),
        };
        let integ = Integrator::with_abs_tol(opts.abs_tol);

        // tau = 0 at xi = 0, then accumulate outward in both directions.
        let mid = n / 2;
        let start = sol.node(mid);
        sol.tau[mid] = integ.integrate(|x| sol.dtau_dxi(x), 0.0, start)?.value;
        for k in mid + 1..n {
            let step = integ.integrate(|x| sol.dtau_dxi(x), sol.node(k - 1), sol.node(k))?;
            sol.tau[k] = sol.tau[k - 1] + step.value;
        }
        for k in (0..mid).rev() {
            let step = integ.integrate(|x| sol.dtau_dxi(x), sol.node(k + 1), sol.node(k))?;
            sol.tau[k] = sol.tau[k + 1] + step.value;
        }

        // Inner volume accumulates from the xi -> +inf end (u -> max).
        let tail = integ.integrate_to_infinity(|x| sol.volume_density(x), xi_max)?;
        sol.inner[n - 1] = tail.value;
        for k in (0..n - 1).rev() {
            let step = integ.integrate(|x| sol.volume_density(x), sol.node(k), sol.node(k + 1))?;
            sol.inner[k] = sol.inner[k + 1] + step.value;
        }
        let head = integ.integrate_from_neg_infinity(|x| sol.volume_density(x), -xi_max)?;
        sol.total_volume = sol.inner[0] + head.value;
        Ok(sol)
    }

    fn node(&self, k: usize) -> f64 {
        self.xi0 + k as f64 * self.dxi
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Asymptotic slope `a = 1 + beta`.
    pub fn slope(&self) -> f64 {
        self.a
    }

    /// First-integral constant `a^2/2 - a^4/4`.
    pub fn first_integral(&self) -> f64 {
        self.h
    }

    pub fn is_sphere(&self) -> bool {
        self.beta == 0.0
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn xi_range(&self) -> (f64, f64) {
        (self.xi0, -self.xi0)
    }

    /// `dtau/dxi = -(1 - v^2) / (a (b^2 - v^2))`.
    pub fn dtau_dxi(&self, xi: f64) -> f64 {
        if self.a == 1.0 {
            return -1.0;
        }
        let a2s = self.a * self.a * sech2(xi);
        -((1.0 - self.a * self.a) + a2s) / (self.a * ((self.b2 - self.a * self.a) + a2s))
    }

    /// `e^{4w} |dtau/dxi| = a sech^2(xi) (1 - v^2)`.
    fn volume_density(&self, xi: f64) -> f64 {
        let s = sech2(xi);
        self.a * s * ((1.0 - self.a * self.a) + self.a * self.a * s)
    }

    fn nearest_node(&self, xi: f64) -> usize {
        let k = ((xi - self.xi0) / self.dxi).round();
        k.clamp(0.0, (self.len() - 1) as f64) as usize
    }

    /// Integral of `f` from node `k` to `xi` using composite Gauss-Legendre
    /// on pieces no longer than one table spacing.
    fn extend_from_node<F: Fn(f64) -> f64>(&self, k: usize, xi: f64, f: F) -> f64 {
        let x0 = self.node(k);
        let span = xi - x0;
        let pieces = (span.abs() / self.dxi).ceil().max(1.0) as usize;
        let step = span / pieces as f64;
        (0..pieces)
            .map(|i| {
                let lo = x0 + i as f64 * step;
                self.rule.integrate(&f, lo, lo + step)
            })
            .sum()
    }

    pub fn tau_at(&self, xi: f64) -> f64 {
        if xi.abs() > -self.xi0 {
            // Closed form past the table: no long quadrature spans.
            let b = self.b2.sqrt();
            return -0.5 * (xi / self.a + (self.a / b * xi.tanh()).atanh() / b);
        }
        let k = self.nearest_node(xi);
        self.tau[k] + self.extend_from_node(k, xi, |x| self.dtau_dxi(x))
    }

    fn inner_at(&self, xi: f64) -> f64 {
        let k = self.nearest_node(xi);
        self.inner[k] - self.extend_from_node(k, xi, |x| self.volume_density(x))
    }

    /// `(w, v, w'', e^{4w}, dv/dxi)` at `xi`; no quadrature involved.
    fn pointwise(&self, xi: f64) -> (f64, f64, f64, f64, f64) {
        let a = self.a;
        let a2 = a * a;
        let s = sech2(xi);
        let outer = (self.b2 - a2) + a2 * s;
        let one_minus_v2 = (1.0 - a2) + a2 * s;
        let w = 0.5 * (a.ln() + ln_sech(xi)) + 0.25 * outer.ln();
        let e4w = a2 * s * outer;
        (w, a * xi.tanh(), -e4w / one_minus_v2, e4w, a * s)
    }

    /// Cylinder state at parameter `xi`.
    pub fn state_at(&self, xi: f64) -> RadialState {
        let (w, v, w2, e4w, dv) = self.pointwise(xi);
        RadialState {
            xi,
            tau: self.tau_at(xi),
            w,
            v,
            w2,
            e4w,
            dtau: self.dtau_dxi(xi),
            dv,
            inner_volume: self.inner_at(xi),
        }
    }

    /// Parameter `xi` at log-radius `tau`.
    pub fn xi_at_tau(&self, tau: f64) -> f64 {
        let n = self.len();
        // tau decreases along the table.
        let mut xi = if tau >= self.tau[0] {
            self.xi0 + (tau - self.tau[0]) * self.dtau_dxi(self.xi0).recip()
        } else if tau <= self.tau[n - 1] {
            -self.xi0 + (tau - self.tau[n - 1]) * self.dtau_dxi(-self.xi0).recip()
        } else {
            let k = self.tau.partition_point(|&x| x > tau);
            let (t0, t1) = (self.tau[k - 1], self.tau[k]);
            self.node(k - 1) + self.dxi * (t0 - tau) / (t0 - t1)
        };
        for _ in 0..50 {
            let step = (self.tau_at(xi) - tau) / self.dtau_dxi(xi);
            xi -= step;
            if step.abs() <= 1e-15 * (1.0 + xi.abs()) {
                break;
            }
        }
        xi
    }

    /// Parameter `xi` where the unscaled factor `w - tau` equals `level`.
    /// The level increases with `xi`.
    pub fn xi_at_level(&self, level: f64) -> f64 {
        let g = |xi: f64| {
            let (w, v, _, _, _) = self.pointwise(xi);
            (w - self.tau_at(xi) - level, (v - 1.0) * self.dtau_dxi(xi))
        };
        let n = self.len();
        let (lo, dlo) = g(self.xi0);
        let (hi, dhi) = g(-self.xi0);
        let mut xi = if lo >= 0.0 {
            self.xi0 - lo / dlo
        } else if hi <= 0.0 {
            -self.xi0 - hi / dhi
        } else {
            // Bracket on nodes; w - tau is increasing in the index.
            let (mut lo, mut hi) = (0usize, n - 1);
            while hi - lo > 1 {
                let m = (lo + hi) / 2;
                if g(self.node(m)).0 < 0.0 {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            let (f0, f1) = (g(self.node(lo)).0, g(self.node(hi)).0);
            self.node(lo) + self.dxi * (-f0) / (f1 - f0)
        };
        for _ in 0..50 {
            let (f, df) = g(xi);
            let step = f / df;
            xi -= step;
            if step.abs() <= 1e-15 * (1.0 + xi.abs()) {
                break;
            }
        }
        xi
    }

    /// `U(r), U'(r), U''(r)` for the Euclidean factor `U = w - ln r`.
    pub fn radial_derivatives(&self, r: f64) -> (f64, f64, f64) {
        if r <= 0.0 {
            // Smooth maximum for the sphere, cone point otherwise.
            return if self.is_sphere() {
                (std::f64::consts::LN_2, 0.0, -2.0)
            } else {
                (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY)
            };
        }
        let tau = r.ln();
        let (w, v, w2, _, _) = self.pointwise(self.xi_at_tau(tau));
        (w - tau, (v - 1.0) / r, (w2 - v + 1.0) / (r * r))
    }

    /// Table samples in increasing `xi` (decreasing `tau`).
    pub fn samples(&self) -> impl Iterator<Item = ProfileSample> + '_ {
        (0..self.len()).map(|k| {
            let st = self.state_at(self.node(k));
            ProfileSample {
                xi: st.xi,
                tau: self.tau[k],
                w: st.w,
                v: st.v,
            }
        })
    }

    /// `int e^{4w} dtau`, the normalized volume.
    pub fn volume(&self) -> f64 {
        self.total_volume
    }

    /// Largest `C = e^{4w}/4` along the orbit, located by golden-section
    /// search.
    pub fn capacity(&self) -> f64 {
        let c = |xi: f64| 0.25 * self.state_at(xi).e4w;
        let (xi, _) = golden_max(c, -1.0, 1.0, 1e-12);
        c(xi)
    }

    /// `1/4 - H`, the constant value of the level-set mass.
    pub fn mass(&self) -> f64 {
        0.25 - self.h
    }

    /// Exact level-set quantities at `xi` for the field
    /// `U(k|x|) + ln k + shift`.
    pub fn level_row(&self, xi: f64, scale: f64, shift: f64) -> LevelRow {
        level_row(&self.state_at(xi), scale, shift)
    }
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Closed-form level-set quantities on the round level set through a
/// radial state. Derivatives are with respect to the level `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub tau: f64,
    pub w: f64,
    pub v: f64,
    pub t: f64,
    /// Euclidean radius of the level set.
    pub radius: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub z: f64,
    pub d: f64,
    pub m: f64,
    pub e: f64,
    pub f1: f64,
    pub f2: f64,
    /// `|L(t)| / |S^3|`.
    pub perimeter: f64,
    /// Derivative of the `a` column.
    pub da: f64,
    /// `-(1/|S^3|) int_L e^{4t}/|grad u|`, evaluated on the round level set.
    pub da_coarea: f64,
    pub dc: f64,
    pub dz: f64,
    pub dm: f64,
    pub dc_da: f64,
}

pub(crate) fn level_row(st: &RadialState, scale: f64, shift: f64) -> LevelRow {
    let q = 1.0 - st.v;
    let r = st.tau.exp() / scale;
    let t = st.w - st.tau + scale.ln() + shift;
    let e4c = (4.0 * shift).exp();
    let b = 0.25 * r.powi(4);
    let c = 0.25 * e4c * st.e4w;
    let z = -q;
    let d = 1.5 * q * q - 0.5 * q * q * q;
    let f1 = (3.0 * q - 1.5 * q * q) * q;
    let f2 = -st.w2 * q;
    let m = 2.0 / 3.0 * d + 4.0 / 9.0 * d * z + z.powi(4) / 36.0 - c;

    // d/dt = (d/dxi) / (dt/dxi), with dt/dxi = (v - 1) dtau/dxi > 0.
    let dt = (st.v - 1.0) * st.dtau;
    let da = -e4c * st.dv * (1.0 - st.v * st.v) / dt;
    let da_coarea = -(4.0 * t).exp() * r.powi(4) / q;
    let dz = st.dv / dt;
    let dq = -dz;
    let dd = (3.0 * q - 1.5 * q * q) * dq;
    let dc = 4.0 * c * st.v * st.dtau / dt;
    let dm = 2.0 / 3.0 * dd + 4.0 / 9.0 * (dd * z + d * dz) + z.powi(3) * dz / 9.0 - dc;
    let e = (2.0 * z * da + 2.0 / 3.0 * dz * f1) / 3.0;
    LevelRow {
        tau: st.tau,
        w: st.w,
        v: st.v,
        t,
        radius: r,
        a: e4c * st.inner_volume,
        b,
        c,
        z,
        d,
        m,
        e,
        f1,
        f2,
        perimeter: r.powi(3),
        da,
        da_coarea,
        dc,
        dz,
        dm,
        dc_da: dc / da,
    }
}

/// Exact level-curve map on the profile samples (unscaled, unshifted).
pub fn radial_levelsets(sol: &RadialSolution) -> Vec<LevelRow> {
    (0..sol.len())
        .map(|k| sol.level_row(sol.node(k), 1.0, 0.0))
        .collect()
}

/// Profile export with columns `tau, w, v, t, A, B, C, z, D, M`.
pub fn write_profile_csv<W: Write>(rows: &[LevelRow], out: W) -> Result<(), RadialError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tau", "w", "v", "t", "A", "B", "C", "z", "D", "M"])?;
    for r in rows {
        w.write_record(
            [r.tau, r.w, r.v, r.t, r.a, r.b, r.c, r.z, r.d, r.m].map(|x| format!("{x}")),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Schouten eigenvalues `(lambda_radial, lambda_tangential)` at radius
/// `e^tau`, from the cylinder state.
pub fn schouten_eigenvalues(st: &RadialState) -> (f64, f64) {
    let r2 = (2.0 * st.tau).exp();
    let l2 = (1.0 - st.v * st.v) / (2.0 * r2);
    let l1 = -st.w2 / r2 - l2;
    (l1, l2)
}

/// Second-difference estimate of the Schouten eigenvalues of a radial
/// factor `u(r)` at radius `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialReductionOracle {
    pub radius: f64,
    pub step: f64,
    pub lambda_radial: f64,
    pub lambda_tangential: f64,
    pub u: f64,
}

impl RadialReductionOracle {
    pub fn new<F: Fn(f64) -> f64>(u: F, radius: f64, step: f64) -> Self {
        let (um, u0, up) = (u(radius - step), u(radius), u(radius + step));
        let du = (up - um) / (2.0 * step);
        let d2u = (up - 2.0 * u0 + um) / (step * step);
        Self {
            radius,
            step,
            lambda_radial: -d2u + 0.5 * du * du,
            lambda_tangential: -du / radius - 0.5 * du * du,
            u: u0,
        }
    }

    pub fn sigma1(&self) -> f64 {
        self.lambda_radial + 3.0 * self.lambda_tangential
    }

    pub fn sigma2(&self) -> f64 {
        3.0 * self.lambda_tangential * (self.lambda_radial + self.lambda_tangential)
    }

    /// `sigma_2 - (3/2) e^{4u}`.
    pub fn residual(&self) -> f64 {
        self.sigma2() - 1.5 * (4.0 * self.u).exp()
    }
}

/// One RK4 trajectory of the cylinder equation.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderTrajectory {
    pub tau: Vec<f64>,
    pub w: Vec<f64>,
    pub v: Vec<f64>,
}

impl CylinderTrajectory {
    /// Largest deviation of the first integral from its initial value.
    pub fn first_integral_drift(&self) -> f64 {
        let h0 = first_integral(self.w[0], self.v[0]);
        self.w
            .iter()
            .zip(&self.v)
            .map(|(&w, &v)| (first_integral(w, v) - h0).abs())
            .fold(0.0, f64::max)
    }
}

/// Integrates `w'' = -e^{4w}/(1-v^2)` from `tau = 0` to `tau_end` (either
/// sign) with classical RK4.
pub fn integrate_cylinder(
    w0: f64,
    v0: f64,
    tau_end: f64,
    step: f64,
) -> Result<CylinderTrajectory, RadialError> {
    let n = (tau_end.abs() / step).ceil().max(1.0) as usize;
    let hs = tau_end / n as f64;
    let f = |w: f64, v: f64| -> Result<(f64, f64), RadialError> { Ok((v, cylinder_rhs(w, v)?)) };
    let mut traj = CylinderTrajectory {
        tau: Vec::with_capacity(n + 1),
        w: Vec::with_capacity(n + 1),
        v: Vec::with_capacity(n + 1),
    };
    let (mut w, mut v) = (w0, v0);
    traj.tau.push(0.0);
    traj.w.push(w);
    traj.v.push(v);
    for i in 0..n {
        let k1 = f(w, v)?;
        let k2 = f(w + 0.5 * hs * k1.0, v + 0.5 * hs * k1.1)?;
        let k3 = f(w + 0.5 * hs * k2.0, v + 0.5 * hs * k2.1)?;
        let k4 = f(w + hs * k3.0, v + hs * k3.1)?;
        w += hs / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        v += hs / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        traj.tau.push((i + 1) as f64 * hs);
        traj.w.push(w);
        traj.v.push(v);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_w(tau: f64) -> f64 {
        std::f64::consts::LN_2 + tau - (2.0 * tau).exp().ln_1p()
    }

    #[test]
    fn rhs_examples() {
        assert_eq!(cylinder_rhs(0.0, 0.0).unwrap(), -1.0);
        assert!(cylinder_rhs(-10.0, 0.5).unwrap().abs() < 1e-17);
        assert!(matches!(cylinder_rhs(0.0, 1.0), Err(RadialError::ConeExit(_))));
    }

    #[test]
    fn sphere_matches_explicit_profile() {
        let s = RadialSolution::sphere();
        assert_eq!(s.first_integral(), 0.25);
        for p in s.samples().step_by(97) {
            assert!((p.w - sphere_w(p.tau)).abs() < 1e-12, "tau {}", p.tau);
            assert!((p.v + p.tau.tanh()).abs() < 1e-12);
        }
        let (u, _, _) = s.radial_derivatives(1.0);
        assert!(u.abs() < 1e-13);
    }

    #[test]
    fn half_football_constants() {
        let f = RadialSolution::football(-0.5).unwrap();
        assert_eq!(f.first_integral(), 7.0 / 64.0);
        assert!((f.mass() - 9.0 / 64.0).abs() < 1e-15);
        assert!((f.volume() - 11.0 / 12.0).abs() < 1e-12);
        assert!((f.capacity() - 7.0 / 64.0).abs() < 1e-14);
    }

    #[test]
    fn tau_is_odd_and_matches_partial_fractions() {
        let f = RadialSolution::football(-0.3).unwrap();
        let a: f64 = 0.7;
        let b = (2.0 - a * a).sqrt();
        for xi in [-6.0, -1.3, -0.2, 0.05, 0.9, 4.4] {
            let v = a * f64::tanh(xi);
            let closed = -0.5 * ((v / a).atanh() / a + (v / b).atanh() / b);
            assert!((f.tau_at(xi) - closed).abs() < 1e-11, "xi {xi}");
            assert!((f.tau_at(xi) + f.tau_at(-xi)).abs() < 1e-11);
        }
    }

    #[test]
    fn inversions_round_trip() {
        let f = RadialSolution::football(-0.6).unwrap();
        for xi in [-7.0, -2.0, 0.0, 0.3, 5.0, 11.0] {
            let st = f.state_at(xi);
            assert!((f.xi_at_tau(st.tau) - xi).abs() < 1e-9, "xi {xi}");
            assert!((f.xi_at_level(st.w - st.tau) - xi).abs() < 1e-9);
        }
    }

    #[test]
    fn level_row_identities_hold() {
        let f = RadialSolution::football(-0.4).unwrap();
        let d_inf = 1.5 * 0.16 - 0.5 * 0.064;
        for xi in [-3.0, -0.5, 0.0, 1.0, 2.5] {
            let row = f.level_row(xi, 1.0, 0.0);
            assert!((row.m - f.mass()).abs() < 1e-13);
            assert!(row.dm.abs() < 1e-12);
            assert!((row.e - 4.0 * row.c).abs() < 1e-12);
            assert!((row.dc_da - (row.z + 1.0)).abs() < 1e-12);
            assert!((row.a - 2.0 / 3.0 * (row.d - d_inf)).abs() < 1e-12);
        }
    }

    #[test]
    fn rk4_conserves_first_integral() {
        let a: f64 = 0.5;
        let w0 = 0.25 * (a * a * (2.0 - a * a)).ln();
        for end in [8.0, -8.0] {
            let traj = integrate_cylinder(w0, 0.0, end, 1e-3).unwrap();
            assert!(traj.first_integral_drift() < 1e-8);
        }
    }

    #[test]
    fn rejects_positive_beta() {
        assert!(RadialSolution::football(0.1).is_err());
        assert!(RadialSolution::football(-1.0).is_err());
        assert!(RadialSolution::football(0.0).unwrap().is_sphere());
    }
}
