//! Quantitative isoperimetry for star-shaped sets in R^4: volume, perimeter,
//! Fraenkel asymmetry and the isoperimetric deficit.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{OMEGA1, S3_AREA};
use crate::field::{dot, norm, ScalarField4D, Vec4};
use crate::optimize::{nelder_mead, SimplexOptions};
use crate::quadrature::GaussLegendre;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IsoError {
    #[error("radial function is not positive and finite in direction {direction:?} (value {value})")]
    NotPositive { direction: Vec4, value: f64 },
    #[error("level set is not star-shaped about the center along direction {direction:?}")]
    NotStarShaped { direction: Vec4 },
    #[error("level {level} is not reached within radius {radius} along direction {direction:?}")]
    Unbounded { level: f64, radius: f64, direction: Vec4 },
    #[error("center value {value} lies below the level {level}")]
    CenterOutside { value: f64, level: f64 },
    #[error("{quantity} did not converge under refinement: {coarse} vs {fine}")]
    NotConverged {
        quantity: &'static str,
        coarse: f64,
        fine: f64,
    },
    #[error("center search stopped at the edge of its region ({distance} from the barycenter, limit {limit})")]
    MinimizerAtBoundary { distance: f64, limit: f64 },
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
}

/// Product rule on S^3 in Hopf coordinates
/// `x = (cos h cos p, cos h sin p, sin h cos q, sin h sin q)`:
/// Gauss-Legendre in `sin^2 h`, uniform in both angles.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereRule {
    points: Vec<Vec4>,
    weights: Vec<f64>,
}

impl Default for SphereRule {
    fn default() -> Self {
        Self::hopf(24, 48)
    }
}

impl SphereRule {
    pub fn hopf(n_height: usize, n_angle: usize) -> Self {
        let gl = GaussLegendre::new(n_height);
        let tau = std::f64::consts::TAU;
        let da = tau / n_angle as f64;
        let mut points = Vec::with_capacity(n_height * n_angle * n_angle);
        let mut weights = Vec::with_capacity(points.capacity());
        for (s, w) in gl.mapped(0.0, 1.0) {
            let (sh, ch) = (s.sqrt(), (1.0 - s).sqrt());
            for i in 0..n_angle {
                let p = (i as f64 + 0.5) * da;
                for j in 0..n_angle {
                    let q = j as f64 * da;
                    points.push([ch * p.cos(), ch * p.sin(), sh * q.cos(), sh * q.sin()]);
                    weights.push(0.5 * w * da * da);
                }
            }
        }
        Self { points, weights }
    }

    /// Rule with `factor` times as many nodes along each coordinate.
    pub fn refined(n_height: usize, n_angle: usize, factor: usize) -> Self {
        Self::hopf(n_height * factor, n_angle * factor)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec4] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: Fn(&Vec4) -> f64>(&self, f: F) -> f64 {
        self.points.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }
}

/// Orthonormal tangent frame at a unit vector, from left multiplication by
/// the quaternion units.
pub fn tangent_frame(x: &Vec4) -> [Vec4; 3] {
    let [a, b, c, d] = *x;
    [[-b, a, -d, c], [-c, d, a, -b], [-d, -c, b, a]]
}

fn unit(x: &Vec4) -> Vec4 {
    let n = norm(x);
    [x[0] / n, x[1] / n, x[2] / n, x[3] / n]
}

pub type RadialFn = Arc<dyn Fn(&Vec4) -> f64 + Send + Sync>;
pub type Indicator = Arc<dyn Fn(&Vec4) -> bool + Send + Sync>;

/// Set `{ r theta : 0 <= r <= rho(theta) }` sampled on a [`SphereRule`].
#[derive(Clone)]
pub struct StarShapedSet {
    rule: Arc<SphereRule>,
    radial: RadialFn,
    indicator: Option<Indicator>,
    rho: Vec<f64>,
    /// `sqrt(1 + |grad rho|^2 / rho^2)` at each node.
    slant: Vec<f64>,
}

impl std::fmt::Debug for StarShapedSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StarShapedSet")
            .field("nodes", &self.rho.len())
            .field("volume", &self.volume())
            .finish()
    }
}

const GRADIENT_STEP: f64 = 1e-5;
const MIN_NODES: usize = 1000;

impl StarShapedSet {
    /// Samples `rho` on the rule; tangential gradients by central differences
    /// along geodesics.
    pub fn from_fn<F>(rule: Arc<SphereRule>, rho: F) -> Result<Self, IsoError>
    where
        F: Fn(&Vec4) -> f64 + Send + Sync + 'static,
    {
        if rule.len() < MIN_NODES {
            return Err(IsoError::TooFewSamples {
                min: MIN_NODES,
                got: rule.len(),
            });
        }
        let radial: RadialFn = Arc::new(rho);
        let samples: Result<Vec<(f64, f64)>, IsoError> = rule
            .points()
            .par_iter()
            .map(|x| {
                let r = radial(x);
                if !(r > 0.0 && r.is_finite()) {
                    return Err(IsoError::NotPositive { direction: *x, value: r });
                }
                let mut g2 = 0.0;
                for e in tangent_frame(x) {
                    let fwd = unit(&std::array::from_fn(|i| x[i] + GRADIENT_STEP * e[i]));
                    let bwd = unit(&std::array::from_fn(|i| x[i] - GRADIENT_STEP * e[i]));
                    // The chord maps to the geodesic angle atan(step).
                    let g = (radial(&fwd) - radial(&bwd)) / (2.0 * GRADIENT_STEP.atan());
                    g2 += g * g;
                }
                Ok((r, (1.0 + g2 / (r * r)).sqrt()))
            })
            .collect();
        let (rho, slant) = samples?.into_iter().unzip();
        Ok(Self {
            rule,
            radial,
            indicator: None,
            rho,
            slant,
        })
    }

    pub fn ball(rule: Arc<SphereRule>, radius: f64) -> Result<Self, IsoError> {
        Self::from_fn(rule, move |_| radius)
    }

    /// Ball `B_radius(center)` seen from the origin; needs `|center| < radius`.
    pub fn translated_ball(rule: Arc<SphereRule>, center: Vec4, radius: f64) -> Result<Self, IsoError> {
        let c2 = dot(&center, &center);
        Self::from_fn(rule, move |x| {
            let p = dot(x, &center);
            p + (p * p - c2 + radius * radius).sqrt()
        })
    }

    /// Axis-aligned ellipsoid with the given semi-axes.
    pub fn ellipsoid(rule: Arc<SphereRule>, axes: Vec4) -> Result<Self, IsoError> {
        Self::from_fn(rule, move |x| {
            let q: f64 = (0..4).map(|i| (x[i] / axes[i]).powi(2)).sum();
            1.0 / q.sqrt()
        })
    }

    /// Super-level set `{u >= level}` of a field, seen from `center`. Each ray
    /// is marched to `max_radius`; a ray that re-enters the set is rejected.
    pub fn from_level_set<F>(
        rule: Arc<SphereRule>,
        field: Arc<F>,
        level: f64,
        center: Vec4,
        max_radius: f64,
    ) -> Result<Self, IsoError>
    where
        F: ScalarField4D + 'static,
    {
        if rule.len() < MIN_NODES {
            return Err(IsoError::TooFewSamples {
                min: MIN_NODES,
                got: rule.len(),
            });
        }
        let u0 = field.value(&center);
        if !(u0 >= level) {
            return Err(IsoError::CenterOutside { value: u0, level });
        }
        let at = |x: &Vec4, r: f64| -> Vec4 { std::array::from_fn(|i| center[i] + r * x[i]) };
        const STEPS: usize = 128;
        let crossing = |x: &Vec4| -> Result<f64, IsoError> {
            let dr = max_radius / STEPS as f64;
            let mut found = None;
            for k in 1..=STEPS {
                let r = k as f64 * dr;
                let inside = field.value(&at(x, r)) >= level;
                match (found, inside) {
                    (None, false) => found = Some(r),
                    (Some(_), true) => return Err(IsoError::NotStarShaped { direction: *x }),
                    _ => {}
                }
            }
            let hi = found.ok_or(IsoError::Unbounded {
                level,
                radius: max_radius,
                direction: *x,
            })?;
            let (mut lo, mut hi) = (hi - dr, hi);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if field.value(&at(x, mid)) >= level {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(0.5 * (lo + hi))
        };
        let samples: Result<Vec<(f64, f64)>, IsoError> = rule
            .points()
            .par_iter()
            .map(|x| {
                let r = crossing(x)?;
                let s = field.sample(&at(x, r));
                let radial = dot(&s.gradient, x);
                if !(radial < 0.0) {
                    return Err(IsoError::NotStarShaped { direction: *x });
                }
                Ok((r, s.grad_norm() / radial.abs()))
            })
            .collect();
        let (rho, slant) = samples?.into_iter().unzip();
        let f = field.clone();
        let indicator: Indicator = Arc::new(move |y: &Vec4| {
            norm(y) <= max_radius && f.value(&std::array::from_fn(|i| center[i] + y[i])) >= level
        });
        let g = field;
        let radial: RadialFn = Arc::new(move |x: &Vec4| {
            let x = unit(x);
            let (mut lo, mut hi) = (0.0, max_radius);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if g.value(&std::array::from_fn(|i| center[i] + mid * x[i])) >= level {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        });
        Ok(Self {
            rule,
            radial,
            indicator: Some(indicator),
            rho,
            slant,
        })
    }

    /// The set scaled by `k` about the origin.
    pub fn scaled(&self, k: f64) -> Self {
        let radial = self.radial.clone();
        let indicator = self.indicator.clone().map(|ind| -> Indicator {
            Arc::new(move |y: &Vec4| ind(&std::array::from_fn(|i| y[i] / k)))
        });
        Self {
            rule: self.rule.clone(),
            radial: Arc::new(move |x| k * radial(x)),
            indicator,
            rho: self.rho.iter().map(|r| k * r).collect(),
            slant: self.slant.clone(),
        }
    }

    pub fn rule(&self) -> &SphereRule {
        &self.rule
    }

    pub fn radius_at(&self, direction: &Vec4) -> f64 {
        (self.radial)(&unit(direction))
    }

    pub fn contains(&self, y: &Vec4) -> bool {
        if let Some(ind) = &self.indicator {
            return ind(y);
        }
        let r = norm(y);
        r == 0.0 || r <= (self.radial)(&[y[0] / r, y[1] / r, y[2] / r, y[3] / r])
    }

    pub fn max_radius(&self) -> f64 {
        self.rho.iter().copied().fold(0.0, f64::max)
    }

    /// `(1/4) int rho^4`.
    pub fn volume(&self) -> f64 {
        0.25 * self.rule.weights().iter().zip(&self.rho).map(|(w, r)| w * r.powi(4)).sum::<f64>()
    }

    /// `int rho^3 sqrt(1 + |grad rho|^2 / rho^2)`.
    pub fn perimeter(&self) -> f64 {
        self.rule
            .weights()
            .iter()
            .zip(&self.rho)
            .zip(&self.slant)
            .map(|((w, r), s)| w * r.powi(3) * s)
            .sum()
    }

    pub fn barycenter(&self) -> Vec4 {
        let mut m = [0.0; 4];
        for ((x, w), r) in self.rule.points().iter().zip(self.rule.weights()).zip(&self.rho) {
            let f = 0.2 * w * r.powi(5);
            for i in 0..4 {
                m[i] += f * x[i];
            }
        }
        let v = self.volume();
        m.map(|c| c / v)
    }

    /// Radius of the ball with the same volume.
    pub fn equivalent_radius(&self) -> f64 {
        (self.volume() / OMEGA1).powf(0.25)
    }

    /// `(|dE| - |dB_r|) / |dB_r|`.
    pub fn deficit(&self) -> f64 {
        let ball = S3_AREA * self.equivalent_radius().powi(3);
        (self.perimeter() - ball) / ball
    }
}

/// Volume and perimeter on `coarse` and `fine`; fails when they disagree by
/// more than `rel_tol`.
pub fn converged_measures<F>(
    coarse: Arc<SphereRule>,
    fine: Arc<SphereRule>,
    rho: F,
    rel_tol: f64,
) -> Result<(f64, f64), IsoError>
where
    F: Fn(&Vec4) -> f64 + Send + Sync + Clone + 'static,
{
    let a = StarShapedSet::from_fn(coarse, rho.clone())?;
    let b = StarShapedSet::from_fn(fine, rho)?;
    for (quantity, c, f) in [("volume", a.volume(), b.volume()), ("perimeter", a.perimeter(), b.perimeter())] {
        if (c - f).abs() > rel_tol * f.abs() {
            return Err(IsoError::NotConverged {
                quantity,
                coarse: c,
                fine: f,
            });
        }
    }
    Ok((b.volume(), b.perimeter()))
}

/// Root of `x^5 = x + 1`; its inverse powers generate the additive
/// recurrence used for sampling.
const PHI4: f64 = 1.167_303_978_261_418_7;

/// Quasi-random points, uniform in the ball of radius `radius`: a shifted
/// Kronecker sequence in `[0,1)^4` mapped through the radius and Hopf
/// coordinates.
pub fn ball_samples(count: usize, radius: f64, seed: u64) -> Vec<Vec4> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>());
    let alpha: [f64; 4] = std::array::from_fn(|k| PHI4.powi(-(k as i32 + 1)).fract());
    let tau = std::f64::consts::TAU;
    (0..count)
        .into_par_iter()
        .map(|n| {
            let u: [f64; 4] = std::array::from_fn(|k| (shift[k] + n as f64 * alpha[k]).fract());
            let r = radius * u[0].powf(0.25);
            let (sh, ch) = (u[1].sqrt(), (1.0 - u[1]).sqrt());
            let (p, q) = (tau * u[2], tau * u[3]);
            [r * ch * p.cos(), r * ch * p.sin(), r * sh * q.cos(), r * sh * q.sin()]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryOptions {
    pub samples: usize,
    pub seed: u64,
    /// Center search region: distance from the barycenter, in units of the
    /// equivalent radius.
    pub search_radius: f64,
    /// Simplex size at convergence, in units of the equivalent radius.
    pub tolerance: f64,
    pub restarts: usize,
}

impl Default for AsymmetryOptions {
    fn default() -> Self {
        Self {
            samples: 1 << 20,
            seed: 0,
            search_radius: 0.5,
            tolerance: 1e-4,
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryReport {
    pub alpha: f64,
    pub deficit: f64,
    /// `alpha^2 / deficit`; not finite when the deficit vanishes.
    pub ratio: f64,
    pub center: Vec4,
    pub r: f64,
    pub volume: f64,
    pub perimeter: f64,
    pub samples: usize,
    pub evaluations: usize,
}

/// Fraenkel asymmetry `min_x |E delta B_r(x)| / |B_r|` with `|B_r| = |E|`.
/// The symmetric difference is counted on a fixed quasi-random sample of a
/// ball containing `E` and every candidate `B_r(x)`.
pub fn fraenkel_asymmetry(set: &StarShapedSet, opts: AsymmetryOptions) -> Result<AsymmetryReport, IsoError> {
    let volume = set.volume();
    let perimeter = set.perimeter();
    let r = set.equivalent_radius();
    let bary = set.barycenter();
    let limit = opts.search_radius * r;
    let bound = set.max_radius().max(norm(&bary) + limit + r) * (1.0 + 1e-9);
    let points = ball_samples(opts.samples, bound, opts.seed);
    let inside: Vec<bool> = points.par_iter().map(|y| set.contains(y)).collect();
    let sample_volume = OMEGA1 * bound.powi(4) / opts.samples as f64;
    let r2 = r * r;

    let objective = |c: &[f64]| -> f64 {
        let off: f64 = c.iter().zip(&bary).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if off > limit {
            return f64::INFINITY;
        }
        let count: u64 = points
            .par_chunks(1 << 14)
            .zip(inside.par_chunks(1 << 14))
            .map(|(ps, ins)| {
                ps.iter()
                    .zip(ins)
                    .filter(|(y, &e)| {
                        let d2: f64 = (0..4).map(|i| (y[i] - c[i]).powi(2)).sum();
                        (d2 <= r2) != e
                    })
                    .count() as u64
            })
            .sum();
        count as f64 * sample_volume / volume
    };
    let min = nelder_mead(
        objective,
        &bary,
        SimplexOptions {
            step: 0.05 * r,
            x_tol: opts.tolerance * r,
            f_tol: 0.0,
            max_evaluations: 1500,
            restarts: opts.restarts,
        },
    );
    let center: Vec4 = std::array::from_fn(|i| min.x[i]);
    let distance = norm(&std::array::from_fn(|i| center[i] - bary[i]));
    if distance > 0.99 * limit {
        return Err(IsoError::MinimizerAtBoundary { distance, limit });
    }
    let deficit = set.deficit();
    Ok(AsymmetryReport {
        alpha: min.value,
        deficit,
        ratio: min.value * min.value / deficit,
        center,
        r,
        volume,
        perimeter,
        samples: opts.samples,
        evaluations: min.evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeFunctional {
    /// `|S|^3 alpha(S)^2`.
    pub volume_asymmetry: f64,
    /// `(|L|/|S^3|)^4 - (4 |S| / |S^3|)^3`.
    pub isoperimetric_gap: f64,
    pub asymmetry: AsymmetryReport,
}

pub fn deficit_shape_functional(set: &StarShapedSet, opts: AsymmetryOptions) -> Result<ShapeFunctional, IsoError> {
    let asymmetry = fraenkel_asymmetry(set, opts)?;
    let b = asymmetry.volume / S3_AREA;
    Ok(ShapeFunctional {
        volume_asymmetry: asymmetry.volume.powi(3) * asymmetry.alpha.powi(2),
        isoperimetric_gap: (asymmetry.perimeter / S3_AREA).powi(4) - (4.0 * b).powi(3),
        asymmetry,
    })
}

/// Random near-ball: `rho = exp(sum a_j (x.v_j)^2 + b x.w)` with unit
/// `v_j, w` and amplitudes bounded by `amplitude`.
pub fn random_star_set(rule: Arc<SphereRule>, seed: u64, amplitude: f64) -> Result<StarShapedSet, IsoError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut direction = || -> Vec4 {
        let v: Vec4 = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        unit(&v)
    };
    let dirs: Vec<Vec4> = (0..4).map(|_| direction()).collect();
    let amps: Vec<f64> = (0..4).map(|_| rng.random_range(-amplitude..amplitude)).collect();
    StarShapedSet::from_fn(rule, move |x| {
        let mut e = amps[3] * dot(x, &dirs[3]);
        for j in 0..3 {
            e += amps[j] * dot(x, &dirs[j]).powi(2);
        }
        e.exp()
    })
}
