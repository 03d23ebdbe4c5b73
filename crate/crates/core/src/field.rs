//! Conformal factors on R^4 behind a common evaluation interface.

use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::radial::RadialSolution;

pub type Vec4 = [f64; 4];
pub type Mat4 = [[f64; 4]; 4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub value: f64,
    pub gradient: Vec4,
    pub hessian: Mat4,
}

impl FieldSample {
    pub fn grad_norm(&self) -> f64 {
        norm(&self.gradient)
    }

    /// `n^T (D^2 u) n` with `n = -grad u / |grad u|`; `None` at critical
    /// points.
    pub fn normal_second_derivative(&self) -> Option<f64> {
        let g2 = dot(&self.gradient, &self.gradient);
        if g2 == 0.0 {
            return None;
        }
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                s += self.gradient[i] * self.hessian[i][j] * self.gradient[j];
            }
        }
        Some(s / g2)
    }

    /// Mean curvature of the level set, `div n = (-Lap u + u_nn)/|grad u|`,
    /// positive on round spheres bounding super-level sets.
    pub fn mean_curvature(&self) -> Option<f64> {
        let unn = self.normal_second_derivative()?;
        let lap: f64 = (0..4).map(|i| self.hessian[i][i]).sum();
        Some((-lap + unn) / self.grad_norm())
    }

    /// Schouten-type tensor `-D^2u + du du - |du|^2/2 I`.
    pub fn schouten(&self) -> Mat4 {
        let g = &self.gradient;
        let half = 0.5 * dot(g, g);
        let mut a = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                a[i][j] = -self.hessian[i][j] + g[i] * g[j];
            }
            a[i][i] -= half;
        }
        a
    }

    /// `(sigma_1, sigma_2)` of the Schouten tensor.
    pub fn sigma(&self) -> (f64, f64) {
        let a = self.schouten();
        let tr: f64 = (0..4).map(|i| a[i][i]).sum();
        let mut tr2 = 0.0;
        for (i, row) in a.iter().enumerate() {
            for (j, aij) in row.iter().enumerate() {
                tr2 += aij * a[j][i];
            }
        }
        (tr, 0.5 * (tr * tr - tr2))
    }
}

pub(crate) fn dot(a: &Vec4, b: &Vec4) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

pub(crate) fn norm(a: &Vec4) -> f64 {
    dot(a, a).sqrt()
}

fn sub(a: &Vec4, b: &Vec4) -> Vec4 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularPoint {
    pub position: Vec4,
    pub beta: f64,
}

/// Upper bound `u(x) <= constant - decay * ln|x|` for `|x| >= radius`.
/// Bounds of the weak form `c - ln|x|` have `decay = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub constant: f64,
    pub decay: f64,
    pub radius: f64,
}

impl TailModel {
    /// Radius beyond which the bound keeps `u` below `t`.
    pub fn reach(&self, t: f64) -> f64 {
        ((self.constant - t) / self.decay).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquationClass {
    /// `sigma_2 = (3/2) e^{4u}` in the elliptic cone.
    Solution,
    /// `sigma_2 >= (3/2) e^{4u}` in the elliptic cone.
    Supersolution,
    Unknown,
}

/// Evaluation interface for conformal factors. Implementations must be
/// reentrant; grid sweeps call them from many threads.
pub trait ScalarField4D: Send + Sync {
    fn value(&self, x: &Vec4) -> f64 {
        self.sample(x).value
    }

    fn sample(&self, x: &Vec4) -> FieldSample;

    fn singular_points(&self) -> Vec<SingularPoint> {
        Vec::new()
    }

    fn tail(&self) -> Option<TailModel>;

    fn equation_class(&self) -> EquationClass {
        EquationClass::Unknown
    }
}

impl<F: ScalarField4D + ?Sized> ScalarField4D for &F {
    fn value(&self, x: &Vec4) -> f64 {
        (**self).value(x)
    }
    fn sample(&self, x: &Vec4) -> FieldSample {
        (**self).sample(x)
    }
    fn singular_points(&self) -> Vec<SingularPoint> {
        (**self).singular_points()
    }
    fn tail(&self) -> Option<TailModel> {
        (**self).tail()
    }
    fn equation_class(&self) -> EquationClass {
        (**self).equation_class()
    }
}

impl<F: ScalarField4D + ?Sized> ScalarField4D for Box<F> {
    fn value(&self, x: &Vec4) -> f64 {
        (**self).value(x)
    }
    fn sample(&self, x: &Vec4) -> FieldSample {
        (**self).sample(x)
    }
    fn singular_points(&self) -> Vec<SingularPoint> {
        (**self).singular_points()
    }
    fn tail(&self) -> Option<TailModel> {
        (**self).tail()
    }
    fn equation_class(&self) -> EquationClass {
        (**self).equation_class()
    }
}

/// Gradient and Hessian of a radial function from `u'(rho)`, `u''(rho)`.
fn radial_sample(rel: &Vec4, value: f64, du: f64, d2u: f64) -> FieldSample {
    let rho = norm(rel);
    let mut gradient = [0.0; 4];
    let mut hessian = [[0.0; 4]; 4];
    if rho == 0.0 {
        for (i, row) in hessian.iter_mut().enumerate() {
            row[i] = d2u;
        }
        return FieldSample {
            value,
            gradient,
            hessian,
        };
    }
    let n = rel.map(|c| c / rho);
    let tangential = du / rho;
    for i in 0..4 {
        gradient[i] = du * n[i];
        for j in 0..4 {
            hessian[i][j] = (d2u - tangential) * n[i] * n[j];
        }
        hessian[i][i] += tangential;
    }
    FieldSample {
        value,
        gradient,
        hessian,
    }
}

/// `U(k|x - x0|) + ln k + shift` for a radial profile `U`.
#[derive(Debug, Clone)]
pub struct RadialField {
    solution: Arc<RadialSolution>,
    center: Vec4,
    scale: f64,
    shift: f64,
}

impl RadialField {
    pub fn new(solution: Arc<RadialSolution>) -> Self {
        Self {
            solution,
            center: [0.0; 4],
            scale: 1.0,
            shift: 0.0,
        }
    }

    pub fn with_center(mut self, center: Vec4) -> Self {
        self.center = center;
        self
    }

    /// Conformal rescaling `u(x) -> u(kx) + ln k`.
    pub fn with_scale(mut self, scale: f64) -> Self {
        assert!(scale > 0.0, "scale must be positive");
        self.scale = scale;
        self
    }

    /// Constant shift `u -> u + c`.
    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    pub fn solution(&self) -> &RadialSolution {
        &self.solution
    }

    pub fn center(&self) -> Vec4 {
        self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }
}

impl ScalarField4D for RadialField {
    fn sample(&self, x: &Vec4) -> FieldSample {
        let rel = sub(x, &self.center);
        let rho = norm(&rel);
        let k = self.scale;
        let (u, du, d2u) = self.solution.radial_derivatives(k * rho);
        radial_sample(&rel, u + k.ln() + self.shift, k * du, k * k * d2u)
    }

    fn singular_points(&self) -> Vec<SingularPoint> {
        if self.solution.is_sphere() {
            Vec::new()
        } else {
            vec![SingularPoint {
                position: self.center,
                beta: self.solution.beta(),
            }]
        }
    }

    fn tail(&self) -> Option<TailModel> {
        // u + (1 + a) ln rho = w + a tau + shift - a ln k increases toward
        // its limit at the outer end of the profile.
        let a = self.solution.slope();
        let (_, xi_hi) = self.solution.xi_range();
        let st = self.solution.state_at(xi_hi);
        let limit = st.w + a * st.tau;
        Some(TailModel {
            constant: limit + 1e-9 + self.shift - a * self.scale.ln(),
            decay: 1.0 + a,
            radius: 0.0,
        })
    }

    fn equation_class(&self) -> EquationClass {
        if self.shift == 0.0 {
            EquationClass::Solution
        } else if self.shift < 0.0 {
            EquationClass::Supersolution
        } else {
            EquationClass::Unknown
        }
    }
}

/// Gaussian bump `amplitude * exp(-sum (x_i - c_i)^2 / s_i^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec4,
    pub widths: Vec4,
    pub amplitude: f64,
}

/// Round bubble `ln(2 lambda / (1 + lambda^2 |x - x0|^2)) - depth` plus
/// `eps * sum bumps`. With `eps = 0` and `depth = 0` it is the exact sphere
/// solution; small bumps on a lowered bubble stay strict supersolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedBubble {
    pub lambda: f64,
    pub center: Vec4,
    pub depth: f64,
    pub eps: f64,
    pub bumps: Vec<Bump>,
}

impl PerturbedBubble {
    pub fn sphere() -> Self {
        Self {
            lambda: 1.0,
            center: [0.0; 4],
            depth: 0.0,
            eps: 0.0,
            bumps: Vec::new(),
        }
    }

    /// Random member of the supersolution family used for inequality checks:
    /// depth 0.15, eps 0.02, three bumps with centers in `[-0.8, 0.8]^4`,
    /// widths in `[0.8, 1.5]` and amplitudes in `[-1, 1]`.
    pub fn random_supersolution(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bumps = (0..3)
            .map(|_| Bump {
                center: std::array::from_fn(|_| rng.random_range(-0.8..0.8)),
                widths: std::array::from_fn(|_| rng.random_range(0.8..1.5)),
                amplitude: rng.random_range(-1.0..1.0),
            })
            .collect();
        Self {
            lambda: 1.0,
            center: [0.0; 4],
            depth: 0.15,
            eps: 0.02,
            bumps,
        }
    }
}

impl ScalarField4D for PerturbedBubble {
    fn sample(&self, x: &Vec4) -> FieldSample {
        let l = self.lambda;
        let rel = sub(x, &self.center);
        let y = rel.map(|c| l * c);
        let r2 = dot(&y, &y);
        let den = 1.0 + r2;
        let mut value = (2.0 * l / den).ln() - self.depth;
        let mut gradient = [0.0; 4];
        let mut hessian = [[0.0; 4]; 4];
        for i in 0..4 {
            gradient[i] = -2.0 * l * y[i] / den;
            for j in 0..4 {
                hessian[i][j] = 4.0 * l * l * y[i] * y[j] / (den * den);
            }
            hessian[i][i] -= 2.0 * l * l / den;
        }
        for bump in &self.bumps {
            let d = sub(x, &bump.center);
            let s2 = bump.widths.map(|s| s * s);
            let e = self.eps
                * bump.amplitude
                * (-(0..4).map(|i| d[i] * d[i] / s2[i]).sum::<f64>()).exp();
            value += e;
            for i in 0..4 {
                gradient[i] -= 2.0 * d[i] / s2[i] * e;
                for j in 0..4 {
                    hessian[i][j] += 4.0 * d[i] * d[j] / (s2[i] * s2[j]) * e;
                }
                hessian[i][i] -= 2.0 / s2[i] * e;
            }
        }
        FieldSample {
            value,
            gradient,
            hessian,
        }
    }

    fn tail(&self) -> Option<TailModel> {
        let off_center = norm(&self.center) > 0.0;
        let bump_max: f64 = self.bumps.iter().map(|b| b.amplitude.abs()).sum::<f64>() * self.eps;
        Some(TailModel {
            // |x - x0| >= |x|/2 once |x| >= 2|x0|.
            constant: (2.0 / self.lambda).ln() - self.depth + bump_max + if off_center { 4f64.ln() } else { 0.0 },
            decay: 2.0,
            radius: 2.0 * norm(&self.center),
        })
    }

    fn equation_class(&self) -> EquationClass {
        if self.eps == 0.0 && self.depth == 0.0 {
            EquationClass::Solution
        } else if self.depth > 0.0 {
            // Lowering the bubble gives slack e^{4 depth} that small bumps
            // do not use up; see `random_supersolution`.
            EquationClass::Supersolution
        } else {
            EquationClass::Unknown
        }
    }
}

/// `u(x) = c . x`, with flat level sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearField {
    pub coefficients: Vec4,
}

impl ScalarField4D for LinearField {
    fn sample(&self, x: &Vec4) -> FieldSample {
        FieldSample {
            value: dot(&self.coefficients, x),
            gradient: self.coefficients,
            hessian: [[0.0; 4]; 4],
        }
    }

    fn tail(&self) -> Option<TailModel> {
        None
    }
}

/// Wraps a field and adds `offset * I` to its Hessian; gradient and value
/// are untouched.
#[derive(Debug, Clone)]
pub struct CorruptedHessian<F> {
    pub inner: F,
    pub offset: f64,
}

impl<F: ScalarField4D> ScalarField4D for CorruptedHessian<F> {
    fn value(&self, x: &Vec4) -> f64 {
        self.inner.value(x)
    }

    fn sample(&self, x: &Vec4) -> FieldSample {
        let mut s = self.inner.sample(x);
        for i in 0..4 {
            s.hessian[i][i] += self.offset;
        }
        s
    }

    fn singular_points(&self) -> Vec<SingularPoint> {
        self.inner.singular_points()
    }

    fn tail(&self) -> Option<TailModel> {
        self.inner.tail()
    }

    fn equation_class(&self) -> EquationClass {
        self.inner.equation_class()
    }
}

#[derive(Debug, Error)]
pub enum FieldFileError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("expected {expected} values, found {found}")]
    ValueCount { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const FIELD_MAGIC: &str = "sigma2lab-field v1";

/// Values on the vertex lattice `x_i = -R + i h`, `h = 2R/(N-1)`, per axis,
/// interpolated by tensor-product cubic Lagrange polynomials.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGridField {
    resolution: usize,
    radius: f64,
    values: Vec<f64>,
    tail: Option<TailModel>,
    singular: Vec<SingularPoint>,
    class: EquationClass,
}

impl SampledGridField {
    pub fn from_values(
        resolution: usize,
        radius: f64,
        values: Vec<f64>,
        tail: Option<TailModel>,
    ) -> Self {
        assert!(resolution >= 4, "cubic interpolation needs 4 nodes per axis");
        assert_eq!(values.len(), resolution.pow(4), "one value per lattice node");
        Self {
            resolution,
            radius,
            values,
            tail,
            singular: Vec::new(),
            class: EquationClass::Unknown,
        }
    }

    /// Samples `field` on the lattice.
    pub fn sample_from<F: ScalarField4D>(field: &F, resolution: usize, radius: f64) -> Self {
        let h = 2.0 * radius / (resolution - 1) as f64;
        let n = resolution;
        let mut values = Vec::with_capacity(n.pow(4));
        for i in 0..n.pow(4) {
            let idx = [i / (n * n * n), (i / (n * n)) % n, (i / n) % n, i % n];
            let x = idx.map(|k| -radius + k as f64 * h);
            values.push(field.value(&x));
        }
        let mut out = Self::from_values(resolution, radius, values, field.tail());
        out.singular = field.singular_points();
        out.class = field.equation_class();
        out
    }

    pub fn with_singular_points(mut self, points: Vec<SingularPoint>) -> Self {
        self.singular = points;
        self
    }

    pub fn with_class(mut self, class: EquationClass) -> Self {
        self.class = class;
        self
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn spacing(&self) -> f64 {
        2.0 * self.radius / (self.resolution - 1) as f64
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{FIELD_MAGIC}")?;
        writeln!(out, "resolution {}", self.resolution)?;
        writeln!(out, "radius {}", self.radius)?;
        if let Some(t) = self.tail {
            writeln!(out, "tail {} {} {}", t.constant, t.decay, t.radius)?;
        }
        for p in &self.singular {
            let [a, b, c, d] = p.position;
            writeln!(out, "singular {a} {b} {c} {d} {}", p.beta)?;
        }
        let class = match self.class {
            EquationClass::Solution => "solution",
            EquationClass::Supersolution => "supersolution",
            EquationClass::Unknown => "unknown",
        };
        writeln!(out, "class {class}")?;
        writeln!(out, "values")?;
        for chunk in self.values.chunks(self.resolution) {
            let line: Vec<String> = chunk.iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self, FieldFileError> {
        let bad = |line: usize, message: &str| FieldFileError::Format {
            line,
            message: message.to_string(),
        };
        let mut lines = input.lines().enumerate();
        let (_, first) = lines.next().ok_or_else(|| bad(1, "empty file"))?;
        if first?.trim() != FIELD_MAGIC {
            return Err(bad(1, "missing header"));
        }
        let mut resolution = None;
        let mut radius = None;
        let mut tail = None;
        let mut singular = Vec::new();
        let mut class = EquationClass::Unknown;
        let mut in_values = false;
        let mut values = Vec::new();
        for (i, line) in lines {
            let line = line?;
            let lineno = i + 1;
            if in_values {
                for tok in line.split_whitespace() {
                    values.push(tok.parse::<f64>().map_err(|_| bad(lineno, "bad value"))?);
                }
                continue;
            }
            let mut parts = line.split_whitespace();
            let Some(key) = parts.next() else { continue };
            let nums: Result<Vec<f64>, _> = parts.clone().map(str::parse::<f64>).collect();
            match key {
                "resolution" => {
                    let n: usize = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad(lineno, "bad resolution"))?;
                    if n < 4 {
                        return Err(bad(lineno, "resolution must be at least 4"));
                    }
                    resolution = Some(n);
                }
                "radius" => {
                    let r = nums.ok().and_then(|v| v.first().copied());
                    radius = Some(r.filter(|r| *r > 0.0).ok_or_else(|| bad(lineno, "bad radius"))?);
                }
                "tail" => match nums.as_deref() {
                    Ok([c, g, r]) if *g > 0.0 => {
                        tail = Some(TailModel {
                            constant: *c,
                            decay: *g,
                            radius: *r,
                        })
                    }
                    _ => return Err(bad(lineno, "tail needs constant, decay > 0, radius")),
                },
                "singular" => match nums.as_deref() {
                    Ok([a, b, c, d, beta]) => singular.push(SingularPoint {
                        position: [*a, *b, *c, *d],
                        beta: *beta,
                    }),
                    _ => return Err(bad(lineno, "singular needs 4 coordinates and beta")),
                },
                "class" => {
                    class = match parts.next() {
                        Some("solution") => EquationClass::Solution,
                        Some("supersolution") => EquationClass::Supersolution,
                        Some("unknown") => EquationClass::Unknown,
                        _ => return Err(bad(lineno, "unknown class")),
                    }
                }
                "values" => in_values = true,
                _ => return Err(bad(lineno, &format!("unknown key {key:?}"))),
            }
        }
        let n = resolution.ok_or_else(|| bad(0, "missing resolution"))?;
        let r = radius.ok_or_else(|| bad(0, "missing radius"))?;
        if values.len() != n.pow(4) {
            return Err(FieldFileError::ValueCount {
                expected: n.pow(4),
                found: values.len(),
            });
        }
        Ok(Self {
            resolution: n,
            radius: r,
            values,
            tail,
            singular,
            class,
        })
    }
}

/// Cubic Lagrange weights and their first two derivatives at offset `s`
/// from node 1 of the stencil `{-1, 0, 1, 2}`.
fn cubic_weights(s: f64) -> [[f64; 4]; 3] {
    let (a, b, c, d) = (s + 1.0, s, s - 1.0, s - 2.0);
    let w = [
        -b * c * d / 6.0,
        a * c * d / 2.0,
        -a * b * d / 2.0,
        a * b * c / 6.0,
    ];
    let dw = [
        -(c * d + b * d + b * c) / 6.0,
        (c * d + a * d + a * c) / 2.0,
        -(b * d + a * d + a * b) / 2.0,
        (b * c + a * c + a * b) / 6.0,
    ];
    let ddw = [
        -2.0 * (b + c + d) / 6.0,
        2.0 * (a + c + d) / 2.0,
        -2.0 * (a + b + d) / 2.0,
        2.0 * (a + b + c) / 6.0,
    ];
    [w, dw, ddw]
}

impl ScalarField4D for SampledGridField {
    fn sample(&self, x: &Vec4) -> FieldSample {
        let n = self.resolution;
        let h = self.spacing();
        let mut base = [0usize; 4];
        let mut weights = [[[0.0; 4]; 3]; 4];
        for ax in 0..4 {
            let p = (x[ax] + self.radius) / h;
            let k = (p.floor() as isize).clamp(1, n as isize - 3) as usize;
            base[ax] = k - 1;
            weights[ax] = cubic_weights(p - k as f64);
        }
        let mut value = 0.0;
        let mut gradient = [0.0; 4];
        let mut hessian = [[0.0; 4]; 4];
        let stride = [n * n * n, n * n, n, 1];
        for i0 in 0..4 {
            for i1 in 0..4 {
                for i2 in 0..4 {
                    for i3 in 0..4 {
                        let ii = [i0, i1, i2, i3];
                        let flat: usize = (0..4).map(|ax| (base[ax] + ii[ax]) * stride[ax]).sum();
                        let f = self.values[flat];
                        let w: [f64; 4] = std::array::from_fn(|ax| weights[ax][0][ii[ax]]);
                        let dw: [f64; 4] = std::array::from_fn(|ax| weights[ax][1][ii[ax]]);
                        let ddw: [f64; 4] = std::array::from_fn(|ax| weights[ax][2][ii[ax]]);
                        let all = w[0] * w[1] * w[2] * w[3];
                        value += f * all;
                        for a in 0..4 {
                            let mut g = dw[a];
                            for b in 0..4 {
                                if b != a {
                                    g *= w[b];
                                }
                            }
                            gradient[a] += f * g;
                            for b in a..4 {
                                let mut hh = 1.0;
                                for c in 0..4 {
                                    hh *= if a == b && c == a {
                                        ddw[c]
                                    } else if c == a || c == b {
                                        dw[c]
                                    } else {
                                        w[c]
                                    };
                                }
                                hessian[a][b] += f * hh;
                            }
                        }
                    }
                }
            }
        }
        for a in 0..4 {
            gradient[a] /= h;
            for b in a..4 {
                hessian[a][b] /= h * h;
                hessian[b][a] = hessian[a][b];
            }
        }
        FieldSample {
            value,
            gradient,
            hessian,
        }
    }

    fn singular_points(&self) -> Vec<SingularPoint> {
        self.singular.clone()
    }

    fn tail(&self) -> Option<TailModel> {
        self.tail
    }

    fn equation_class(&self) -> EquationClass {
        self.class
    }
}

/// Sup of `u(x) + ln|x|` over the annulus `r_in <= |x| <= r_out`, sampled on
/// `n_radii` log-spaced shells and a fixed set of directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub sup: f64,
    pub argmax_radius: f64,
    /// Per-shell maxima `(r, max_theta u + ln r)`.
    pub shells: Vec<(f64, f64)>,
    pub nonincreasing: bool,
}

pub fn decay_spotcheck<F: ScalarField4D>(field: &F, r_in: f64, r_out: f64, n_radii: usize) -> DecayReport {
    assert!(r_in > 0.0 && r_out > r_in && n_radii >= 2, "annulus needs 0 < r_in < r_out");
    let dirs = shell_directions();
    let shells: Vec<(f64, f64)> = (0..n_radii)
        .map(|i| {
            let r = r_in * (r_out / r_in).powf(i as f64 / (n_radii - 1) as f64);
            let best = dirs
                .iter()
                .map(|d| field.value(&d.map(|c| c * r)) + r.ln())
                .fold(f64::NEG_INFINITY, f64::max);
            (r, best)
        })
        .collect();
    let (argmax_radius, sup) = shells
        .iter()
        .copied()
        .fold((f64::NAN, f64::NEG_INFINITY), |acc, s| if s.1 > acc.1 { s } else { acc });
    DecayReport {
        sup,
        argmax_radius,
        nonincreasing: shells.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12),
        shells,
    }
}

/// Coordinate axes, their negatives, and the 16 diagonal directions.
fn shell_directions() -> Vec<Vec4> {
    let mut dirs = Vec::with_capacity(24);
    for ax in 0..4 {
        for s in [1.0, -1.0] {
            let mut d = [0.0; 4];
            d[ax] = s;
            dirs.push(d);
        }
    }
    for m in 0..16u32 {
        dirs.push(std::array::from_fn(|i| if m >> i & 1 == 1 { -0.5 } else { 0.5 }));
    }
    dirs
}
