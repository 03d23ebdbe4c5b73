//! Level-set curves `t -> (A, B, C, z, D, M, E, F1, F2)` of a conformal factor
//! and the identities and inequalities they satisfy.
//!
//! Two paths produce a [`LevelCurveTable`]: an exact one for radial fields,
//! and a grid sweep for arbitrary fields that turns surface integrals over
//! `L(t) = {u = t}` into volume sums with a smeared delta in the signed
//! distance `(u - t)/|grad u|`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{CAPACITY_CEILING, S3_AREA};
use crate::field::{norm, EquationClass, RadialField, ScalarField4D, SingularPoint, Vec4};
use crate::radial::LevelRow;

#[derive(Debug, Error)]
pub enum LevelsetError {
    #[error("grid resolution {0} is below the minimum of 16")]
    ResolutionTooSmall(usize),
    #[error("domain radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("the grid path needs a field with a tail model")]
    NoTailModel,
    #[error("level range [{t_min}, {t_max}] with {count} bins is empty or outside the field's range")]
    EmptyBins { t_min: f64, t_max: f64, count: usize },
    #[error("{excluded} of {total} nodes excluded (fraction {fraction:.3e} above {limit:.1e})")]
    TooManyExcluded {
        excluded: usize,
        total: usize,
        fraction: f64,
        limit: f64,
    },
    #[error("capacity peak at the edge of the level range (t = {t}); widen the bins")]
    PeakAtBoundary { t: f64 },
    #[error("table has fewer than three usable levels")]
    TooFewLevels,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Half-width `R` of the sampling ball `|x| <= R`.
    pub radius: f64,
    /// Nodes per axis.
    pub resolution: usize,
}

impl GridSpec {
    pub fn spacing(&self) -> f64 {
        2.0 * self.radius / self.resolution as f64
    }

    /// Cell-centered coordinate of index `i` along one axis.
    pub fn coordinate(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.spacing() - self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum BinSpec {
    /// Range chosen from the data: from the highest level touching the outer
    /// boundary to the level enclosing about 400 nodes.
    Auto { count: usize },
    Range { t_min: f64, t_max: f64, count: usize },
}

impl Default for BinSpec {
    fn default() -> Self {
        BinSpec::Auto { count: 200 }
    }
}

impl BinSpec {
    pub fn count(&self) -> usize {
        match *self {
            BinSpec::Auto { count } | BinSpec::Range { count, .. } => count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoareaOptions {
    /// Kernel half-width in units of the grid spacing.
    pub kernel_width: f64,
    pub max_excluded_fraction: f64,
    /// Nodes with `|grad u| < critical_threshold / h` are critical.
    pub critical_threshold: f64,
    /// Levels whose super-level set has equivalent radius below this many
    /// grid spacings are reported but not verified.
    pub trusted_radius: f64,
    /// Half-width of the derivative stencil, in grid cells crossed by the
    /// level set.
    pub derivative_cells: f64,
}

impl Default for CoareaOptions {
    fn default() -> Self {
        Self {
            kernel_width: 1.0,
            max_excluded_fraction: 1e-2,
            critical_threshold: 1e-8,
            trusted_radius: 4.0,
            derivative_cells: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TablePath {
    Analytic,
    Grid,
}

/// One level of a [`LevelCurveTable`]. Derivatives are in `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelEstimate {
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub z: f64,
    pub d: f64,
    pub m: f64,
    pub e: f64,
    pub f1: f64,
    pub f2: f64,
    pub dc_da: f64,
    /// `|L(t)| / |S^3|`.
    pub perimeter: f64,
    /// Derivative of the `a` column.
    pub da: f64,
    /// `-(1/|S^3|) int_L e^{4t} / |grad u|`.
    pub da_coarea: f64,
    pub dz: f64,
    pub dm: f64,
    /// The level set reaches the outer boundary of the grid.
    pub truncated: bool,
    /// Not truncated and resolved by enough grid cells.
    pub trusted: bool,
}

impl LevelEstimate {
    fn from_exact(row: &LevelRow) -> Self {
        Self {
            t: row.t,
            a: row.a,
            b: row.b,
            c: row.c,
            z: row.z,
            d: row.d,
            m: row.m,
            e: row.e,
            f1: row.f1,
            f2: row.f2,
            dc_da: row.dc_da,
            perimeter: row.perimeter,
            da: row.da,
            da_coarea: row.da_coarea,
            dz: row.dz,
            dm: row.dm,
            truncated: false,
            trusted: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub path: TablePath,
    pub grid: Option<GridSpec>,
    pub dt: f64,
    pub kernel_width: Option<f64>,
    pub nodes_in_domain: usize,
    pub excluded_singular: usize,
    pub excluded_critical: usize,
    /// Levels below this meet the outer boundary.
    pub boundary_level: Option<f64>,
    pub tail_corrected_levels: usize,
    /// `D(+inf) = (3/2) sum beta^2 - (1/2) sum |beta|^3` over the declared
    /// singular points.
    pub d_infinity: f64,
    pub class: EquationClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCurveTable {
    pub rows: Vec<LevelEstimate>,
    pub meta: TableMeta,
}

impl LevelCurveTable {
    pub fn levels(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn trusted_rows(&self) -> impl Iterator<Item = &LevelEstimate> {
        self.rows.iter().filter(|r| r.trusted)
    }
}

pub fn d_infinity(points: &[SingularPoint]) -> f64 {
    points
        .iter()
        .map(|p| 1.5 * p.beta * p.beta - 0.5 * p.beta.abs().powi(3))
        .sum()
}

fn level_grid(t_min: f64, t_max: f64, count: usize) -> Result<Vec<f64>, LevelsetError> {
    if count < 2 || !(t_max > t_min) || !t_min.is_finite() || !t_max.is_finite() {
        return Err(LevelsetError::EmptyBins { t_min, t_max, count });
    }
    let dt = (t_max - t_min) / count as f64;
    Ok((0..=count).map(|k| t_min + k as f64 * dt).collect())
}

/// Exact table for a radial field at the given levels.
pub fn analytic_rows(field: &RadialField, levels: &[f64]) -> Vec<LevelEstimate> {
    let sol = field.solution();
    let offset = field.scale().ln() + field.shift();
    levels
        .iter()
        .map(|&t| {
            let xi = sol.xi_at_level(t - offset);
            LevelEstimate::from_exact(&sol.level_row(xi, field.scale(), field.shift()))
        })
        .collect()
}

/// Exact path for radial fields. `Auto` bins span `xi` in `[-5, 5]`.
pub fn analytic_table(field: &RadialField, bins: BinSpec) -> Result<LevelCurveTable, LevelsetError> {
    let (t_min, t_max, count) = match bins {
        BinSpec::Auto { count } => {
            let sol = field.solution();
            let at = |xi: f64| {
                let st = sol.state_at(xi);
                st.w - st.tau + field.scale().ln() + field.shift()
            };
            (at(-5.0), at(5.0), count)
        }
        BinSpec::Range { t_min, t_max, count } => (t_min, t_max, count),
    };
    let levels = level_grid(t_min, t_max, count)?;
    Ok(LevelCurveTable {
        rows: analytic_rows(field, &levels),
        meta: TableMeta {
            path: TablePath::Analytic,
            grid: None,
            dt: levels[1] - levels[0],
            kernel_width: None,
            nodes_in_domain: 0,
            excluded_singular: 0,
            excluded_critical: 0,
            boundary_level: None,
            tail_corrected_levels: 0,
            d_infinity: d_infinity(&field.singular_points()),
            class: field.equation_class(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodeKind {
    Regular,
    Singular,
    Critical,
}

#[derive(Debug, Clone, Copy)]
struct NodeRecord {
    u: f64,
    g: f64,
    curvature: f64,
    unn: f64,
    kind: NodeKind,
}

struct SliceScan {
    nodes: Vec<NodeRecord>,
    boundary: f64,
    singular: usize,
    critical: usize,
    /// Nodes where the field is not finite; not stored.
    skipped: usize,
}

// Sum layout: two prefix-summed blocks shared by both kernel widths, then
// eight blocks per width.
const N_SUMS: usize = 18;
const FULL_A: usize = 0;
const FULL_B: usize = 1;
const WIDTH_BLOCK: usize = 8;
const PART_A: usize = 2;
const PART_B: usize = 3;
const S_G3: usize = 4;
const S_D: usize = 5;
const S_F1: usize = 6;
const S_F2: usize = 7;
const S_INV: usize = 8;
const S_ONE: usize = 9;

fn in_singular_cell(x: &Vec4, points: &[SingularPoint], half: f64) -> bool {
    points
        .iter()
        .any(|p| (0..4).all(|i| (x[i] - p.position[i]).abs() <= half))
}

fn scan_slice<F: ScalarField4D>(
    field: &F,
    grid: &GridSpec,
    i0: usize,
    points: &[SingularPoint],
    opts: &CoareaOptions,
) -> SliceScan {
    let n = grid.resolution;
    let h = grid.spacing();
    let r = grid.radius;
    let eps = opts.kernel_width * h;
    let shell = r - 2.0 * h;
    let mut out = SliceScan {
        nodes: Vec::new(),
        boundary: f64::NEG_INFINITY,
        singular: 0,
        critical: 0,
        skipped: 0,
    };
    let x0 = grid.coordinate(i0);
    for i1 in 0..n {
        let x1 = grid.coordinate(i1);
        for i2 in 0..n {
            let x2 = grid.coordinate(i2);
            for i3 in 0..n {
                let x: Vec4 = [x0, x1, x2, grid.coordinate(i3)];
                let rho = norm(&x);
                if rho > r {
                    continue;
                }
                let singular = in_singular_cell(&x, points, 0.5 * h);
                let s = field.sample(&x);
                if !s.value.is_finite() {
                    out.singular += 1;
                    out.skipped += 1;
                    continue;
                }
                let g = s.grad_norm();
                let kind = if singular {
                    out.singular += 1;
                    NodeKind::Singular
                } else if g < opts.critical_threshold / h {
                    out.critical += 1;
                    NodeKind::Critical
                } else {
                    NodeKind::Regular
                };
                let (curvature, unn) = match kind {
                    NodeKind::Regular => (
                        s.mean_curvature().unwrap_or(0.0),
                        s.normal_second_derivative().unwrap_or(0.0),
                    ),
                    _ => (0.0, 0.0),
                };
                if rho > shell {
                    let reach = if kind == NodeKind::Regular { s.value + 2.0 * eps * g } else { s.value };
                    out.boundary = out.boundary.max(reach);
                }
                out.nodes.push(NodeRecord {
                    u: s.value,
                    g,
                    curvature,
                    unn,
                    kind,
                });
            }
        }
    }
    out
}

/// Sums for the kernel half-widths `eps` and `2 eps`; the caller combines
/// them to cancel the leading `eps^2` error.
fn accumulate_slice(nodes: &[NodeRecord], levels: &[f64], eps: f64) -> Vec<f64> {
    let nl = levels.len();
    let t0 = levels[0];
    let dt = levels[1] - levels[0];
    let mut acc = vec![0.0; N_SUMS * (nl + 1)];
    let pi = std::f64::consts::PI;
    let widths = [eps, 2.0 * eps];
    for node in nodes {
        let e4u = (4.0 * node.u).exp();
        let (lo, hi) = match node.kind {
            NodeKind::Regular => (node.u - widths[1] * node.g, node.u + widths[1] * node.g),
            _ => (node.u, node.u),
        };
        // Levels k <= k_full lie entirely below the node.
        let k_full = ((lo - t0) / dt).floor();
        if k_full >= 0.0 {
            let end = (k_full as usize + 1).min(nl);
            acc[FULL_A * (nl + 1)] += e4u;
            acc[FULL_A * (nl + 1) + end] -= e4u;
            acc[FULL_B * (nl + 1)] += 1.0;
            acc[FULL_B * (nl + 1) + end] -= 1.0;
        }
        if node.kind != NodeKind::Regular {
            continue;
        }
        let first = (k_full + 1.0).max(0.0) as usize;
        let last = ((hi - t0) / dt).floor();
        if last < 0.0 {
            continue;
        }
        let last = (last as usize).min(nl - 1);
        let g = node.g;
        let hc = node.curvature;
        let surf = [
            g * g * g,
            2.0 * hc * g * g - 2.0 * g * g * g,
            (hc * g - 1.5 * g * g) * g,
            (hc / 3.0 * g - node.unn) * g,
            1.0 / g,
            1.0,
        ];
        for (k, &t) in levels.iter().enumerate().take(last + 1).skip(first) {
            let d = (node.u - t) / g;
            for (w, &width) in widths.iter().enumerate() {
                let base = w * WIDTH_BLOCK;
                if d >= width {
                    acc[(base + PART_A) * (nl + 1) + k] += e4u;
                    acc[(base + PART_B) * (nl + 1) + k] += 1.0;
                    continue;
                }
                if d <= -width {
                    continue;
                }
                let phase = pi * d / width;
                let heaviside = 0.5 * (1.0 + d / width + phase.sin() / pi);
                let delta = (1.0 + phase.cos()) / (2.0 * width);
                acc[(base + PART_A) * (nl + 1) + k] += heaviside * e4u;
                acc[(base + PART_B) * (nl + 1) + k] += heaviside;
                for (j, s) in surf.iter().enumerate() {
                    acc[(base + S_G3 + j) * (nl + 1) + k] += delta * s;
                }
            }
        }
    }
    acc
}

/// Slope of the least-squares line through rows `k - m ..= k + m`, clipped
/// to the table. With `m = 1` this is the centered difference in the interior
/// and the one-sided difference at the ends.
fn derivative(ts: &[f64], ys: &[f64], reach: &[usize]) -> Vec<f64> {
    let n = ys.len();
    (0..n)
        .map(|k| {
            let m = reach[k].max(1);
            let (i, j) = (k.saturating_sub(m), (k + m).min(n - 1));
            let len = (j - i + 1) as f64;
            let tm = ts[i..=j].iter().sum::<f64>() / len;
            let ym = ys[i..=j].iter().sum::<f64>() / len;
            let (mut num, mut den) = (0.0, 0.0);
            for q in i..=j {
                num += (ts[q] - tm) * (ys[q] - ym);
                den += (ts[q] - tm) * (ts[q] - tm);
            }
            num / den
        })
        .collect()
}

/// Grid coarea path. The sweep is parallel over slices of the first axis;
/// per-slice sums are merged in slice order, so the result does not depend
/// on the number of threads.
pub fn coarea_table<F: ScalarField4D>(
    field: &F,
    grid: GridSpec,
    bins: BinSpec,
    opts: CoareaOptions,
) -> Result<LevelCurveTable, LevelsetError> {
    if grid.resolution < 16 {
        return Err(LevelsetError::ResolutionTooSmall(grid.resolution));
    }
    if !(grid.radius > 0.0) {
        return Err(LevelsetError::BadRadius(grid.radius));
    }
    let tail = field.tail().ok_or(LevelsetError::NoTailModel)?;
    let points = field.singular_points();
    let h = grid.spacing();
    let eps = opts.kernel_width * h;

    let scans: Vec<SliceScan> = (0..grid.resolution)
        .into_par_iter()
        .map(|i0| scan_slice(field, &grid, i0, &points, &opts))
        .collect();
    let total: usize = scans.iter().map(|s| s.nodes.len()).sum();
    let singular: usize = scans.iter().map(|s| s.singular).sum();
    let critical: usize = scans.iter().map(|s| s.critical).sum();
    let domain = total + scans.iter().map(|s| s.skipped).sum::<usize>();
    let excluded = singular + critical;
    let fraction = excluded as f64 / domain.max(1) as f64;
    if fraction > opts.max_excluded_fraction {
        return Err(LevelsetError::TooManyExcluded {
            excluded,
            total: domain,
            fraction,
            limit: opts.max_excluded_fraction,
        });
    }
    let boundary = scans.iter().map(|s| s.boundary).fold(f64::NEG_INFINITY, f64::max);

    let (t_min, t_max, count) = match bins {
        BinSpec::Auto { count } => {
            let mut us: Vec<f64> = scans.iter().flat_map(|s| s.nodes.iter().map(|n| n.u)).collect();
            let rank = 400.min(us.len().saturating_sub(1));
            let (_, top, _) = us.select_nth_unstable_by(rank, |a, b| b.total_cmp(a));
            (boundary, *top, count)
        }
        BinSpec::Range { t_min, t_max, count } => (t_min, t_max, count),
    };
    let levels = level_grid(t_min, t_max, count)?;
    let nl = levels.len();

    let partials: Vec<Vec<f64>> = scans
        .par_iter()
        .map(|s| accumulate_slice(&s.nodes, &levels, eps))
        .collect();
    let mut sums = vec![0.0; N_SUMS * (nl + 1)];
    for p in &partials {
        for (a, b) in sums.iter_mut().zip(p) {
            *a += b;
        }
    }
    for which in [FULL_A, FULL_B] {
        let base = which * (nl + 1);
        for k in 1..nl {
            sums[base + k] += sums[base + k - 1];
        }
    }
    let at = |which: usize, k: usize| {
        let narrow = sums[which * (nl + 1) + k];
        if which < PART_A {
            return narrow;
        }
        let wide = sums[(which + WIDTH_BLOCK) * (nl + 1) + k];
        (4.0 * narrow - wide) / 3.0
    };

    let cell = h.powi(4) / S3_AREA;
    let mut tail_corrected = 0;
    let trusted_b = 0.25 * (opts.trusted_radius * h).powi(4);
    let mut rows: Vec<LevelEstimate> = levels
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mut a = (at(FULL_A, k) + at(PART_A, k)) * cell;
            let mut b = (at(FULL_B, k) + at(PART_B, k)) * cell;
            let truncated = t < boundary;
            if truncated && grid.radius >= tail.radius {
                let reach = tail.reach(t);
                if reach > grid.radius {
                    tail_corrected += 1;
                    let r = grid.radius;
                    b += 0.25 * (reach.powi(4) - r.powi(4));
                    let e4c = (4.0 * tail.constant).exp();
                    a += if (tail.decay - 1.0).abs() < 1e-12 {
                        e4c * (reach / r).ln()
                    } else {
                        let p = 4.0 - 4.0 * tail.decay;
                        e4c * (reach.powf(p) - r.powf(p)) / p
                    };
                }
            }
            let c = (4.0 * t).exp() * b;
            let z = -(at(S_G3, k) * cell).cbrt();
            let d = 0.25 * at(S_D, k) * cell;
            let inv = at(S_INV, k) * cell;
            LevelEstimate {
                t,
                a,
                b,
                c,
                z,
                d,
                m: 2.0 / 3.0 * d + 4.0 / 9.0 * d * z + z.powi(4) / 36.0 - c,
                e: f64::NAN,
                f1: at(S_F1, k) * cell,
                f2: at(S_F2, k) * cell,
                dc_da: 1.0 - 4.0 * b / inv,
                perimeter: at(S_ONE, k) * cell,
                da: f64::NAN,
                da_coarea: -(4.0 * t).exp() * inv,
                dz: f64::NAN,
                dm: f64::NAN,
                truncated,
                trusted: !truncated && b >= trusted_b,
            }
        })
        .collect();

    let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let col = |f: fn(&LevelEstimate) -> f64| -> Vec<f64> { rows.iter().map(f).collect() };
    // Lattice noise in the columns is resolved only once the level moves by
    // about one cell, i.e. over `|z| h` in t.
    let dt = ts[1] - ts[0];
    let reach: Vec<usize> = rows
        .iter()
        .map(|r| {
            let m = (opts.derivative_cells * r.z.abs() * h / dt).ceil();
            if m.is_finite() { (m as usize).clamp(1, nl / 4) } else { 1 }
        })
        .collect();
    // Rows whose stencil is clipped or touches an untrusted row are kept but
    // not trusted.
    let trusted: Vec<bool> = (0..nl)
        .map(|k| {
            let m = reach[k];
            k >= m && k + m < nl && rows[k - m..=k + m].iter().all(|r| r.trusted)
        })
        .collect();
    let da = derivative(&ts, &col(|r| r.a), &reach);
    let dz = derivative(&ts, &col(|r| r.z), &reach);
    let dm = derivative(&ts, &col(|r| r.m), &reach);
    for (k, row) in rows.iter_mut().enumerate() {
        row.da = da[k];
        row.dz = dz[k];
        row.dm = dm[k];
        row.trusted = trusted[k];
        row.e = (2.0 * row.z * row.da_coarea + 2.0 / 3.0 * row.dz * row.f1) / 3.0;
    }

    Ok(LevelCurveTable {
        rows,
        meta: TableMeta {
            path: TablePath::Grid,
            grid: Some(grid),
            dt: levels[1] - levels[0],
            kernel_width: Some(opts.kernel_width),
            nodes_in_domain: domain,
            excluded_singular: singular,
            excluded_critical: critical,
            boundary_level: Some(boundary),
            tail_corrected_levels: tail_corrected,
            d_infinity: d_infinity(&points),
            class: field.equation_class(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeakRefinement {
    Parabolic,
    GoldenSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityEstimate {
    #[serde(rename = "K")]
    pub capacity: f64,
    pub t_star: f64,
    pub refinement: PeakRefinement,
}

/// Largest `C` over the trusted levels, or over every untruncated level when
/// the trusted ones do not bracket the peak, refined by the parabola through
/// the peak and its neighbours.
pub fn capacity_estimate(table: &LevelCurveTable) -> Result<CapacityEstimate, LevelsetError> {
    let peak = |rows: &[&LevelEstimate]| {
        rows.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, r)| if r.c > acc.1 { (i, r.c) } else { acc })
            .0
    };
    let interior = |rows: &[&LevelEstimate], k: usize| k > 0 && k + 1 < rows.len();
    let mut rows: Vec<&LevelEstimate> = table.trusted_rows().collect();
    let mut k = peak(&rows);
    if !interior(&rows, k) {
        // On coarse grids the peak can sit among the small level sets that
        // are not trusted; C there is still a plain volume sum.
        rows = table.rows.iter().filter(|r| !r.truncated && r.c.is_finite()).collect();
        k = peak(&rows);
    }
    if rows.len() < 3 {
        return Err(LevelsetError::TooFewLevels);
    }
    if !interior(&rows, k) {
        return Err(LevelsetError::PeakAtBoundary { t: rows[k].t });
    }
    let (t0, t1, t2) = (rows[k - 1].t, rows[k].t, rows[k + 1].t);
    let (c0, c1, c2) = (rows[k - 1].c, rows[k].c, rows[k + 1].c);
    let denom = (t0 - t1) * (t0 - t2) * (t1 - t2);
    let p = (t2 * (c1 - c0) + t1 * (c0 - c2) + t0 * (c2 - c1)) / denom;
    let q = (t2 * t2 * (c0 - c1) + t1 * t1 * (c2 - c0) + t0 * t0 * (c1 - c2)) / denom;
    let r = (t1 * t2 * (t1 - t2) * c0 + t2 * t0 * (t2 - t0) * c1 + t0 * t1 * (t0 - t1) * c2) / denom;
    let (t_star, capacity) = if p < 0.0 {
        let ts = -q / (2.0 * p);
        (ts, p * ts * ts + q * ts + r)
    } else {
        (t1, c1)
    };
    Ok(CapacityEstimate {
        capacity,
        t_star,
        refinement: PeakRefinement::Parabolic,
    })
}

/// Capacity of a radial field, maximizing `C` along the exact profile.
pub fn analytic_capacity(field: &RadialField) -> CapacityEstimate {
    let sol = field.solution();
    let e4c = (4.0 * field.shift()).exp();
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let c = |xi: f64| 0.25 * e4c * sol.state_at(xi).e4w;
    let (mut lo, mut hi) = (-3.0f64, 3.0f64);
    while hi - lo > 1e-10 {
        let x1 = hi - ratio * (hi - lo);
        let x2 = lo + ratio * (hi - lo);
        if c(x1) < c(x2) {
            lo = x1;
        } else {
            hi = x2;
        }
    }
    let xi = 0.5 * (lo + hi);
    let st = sol.state_at(xi);
    CapacityEstimate {
        capacity: c(xi),
        t_star: st.w - st.tau + field.scale().ln() + field.shift(),
        refinement: PeakRefinement::GoldenSection,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckId {
    /// (i) `A' = -(1/|S^3|) int_L e^{4t}/|grad u|`.
    AprimeIdentity,
    /// (ii) `(1/3)(z^3)' = F2`.
    KeyEquality,
    /// (iii) `A = (2/3)(D - D(+inf))`.
    VolumeIdentity,
    /// (iv) `(A')^2 F1 F2 >= (3/2) e^{12t} (|L|/|S^3|)^4`.
    KeyInequality,
    /// (v) `dC/dA >= z + 1`.
    CapacitySlope,
    /// (vi) `C <= 4/3`.
    VolumeBound,
    /// (vii) `E^3 - (4C)^3 >= e^{12t}((|L|/|S^3|)^4 - (4B)^3)`.
    ChainEndpoint,
    /// `E = M' + 4C`.
    NewForm,
    /// `M' >= 0`.
    MassMonotone,
    /// `A` strictly decreasing.
    VolumeMonotone,
    /// `z` nondecreasing.
    SlopeMonotone,
}

impl CheckId {
    pub const ALL: [CheckId; 11] = [
        CheckId::AprimeIdentity,
        CheckId::KeyEquality,
        CheckId::VolumeIdentity,
        CheckId::KeyInequality,
        CheckId::CapacitySlope,
        CheckId::VolumeBound,
        CheckId::ChainEndpoint,
        CheckId::NewForm,
        CheckId::MassMonotone,
        CheckId::VolumeMonotone,
        CheckId::SlopeMonotone,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            CheckId::AprimeIdentity => "aprime",
            CheckId::KeyEquality => "key_equality",
            CheckId::VolumeIdentity => "volume_identity",
            CheckId::KeyInequality => "key_inequality",
            CheckId::CapacitySlope => "capacity_slope",
            CheckId::VolumeBound => "volume_bound",
            CheckId::ChainEndpoint => "chain_endpoint",
            CheckId::NewForm => "new_form",
            CheckId::MassMonotone => "mass_monotone",
            CheckId::VolumeMonotone => "volume_monotone",
            CheckId::SlopeMonotone => "slope_monotone",
        }
    }

    /// Failing this check breaks a bound that every table must satisfy.
    pub fn is_hard(&self) -> bool {
        matches!(self, CheckId::VolumeBound | CheckId::VolumeMonotone)
    }

    fn applies_to(&self, class: EquationClass) -> bool {
        match self {
            CheckId::AprimeIdentity
            | CheckId::KeyEquality
            | CheckId::CapacitySlope
            | CheckId::VolumeBound
            | CheckId::VolumeMonotone => true,
            CheckId::KeyInequality | CheckId::ChainEndpoint => class != EquationClass::Unknown,
            CheckId::VolumeIdentity | CheckId::NewForm | CheckId::MassMonotone | CheckId::SlopeMonotone => {
                class == EquationClass::Solution
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckMode {
    /// `|residual| <= tolerance`.
    Equality,
    /// `residual >= -tolerance`.
    Inequality,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative tolerance for (i), (ii), and `E = M' + 4C`; absolute for (iii).
    pub identity: f64,
    /// Equality tolerance for (iv) and (vii) when they are sharp.
    pub sharp: f64,
    /// Margin allowed on inequalities (iv), (v), (vii) and on `z`.
    pub inequality: f64,
    /// Equality tolerance for (v) when sharp.
    pub capacity_slope: f64,
    /// Allowed negative part of `M'`.
    pub mass_slope: f64,
}

impl Tolerances {
    pub fn analytic() -> Self {
        Self {
            identity: 1e-7,
            sharp: 1e-9,
            inequality: 1e-9,
            capacity_slope: 1e-6,
            mass_slope: 1e-6,
        }
    }

    pub fn grid() -> Self {
        Self {
            identity: 5e-2,
            sharp: 5e-2,
            inequality: 5e-2,
            capacity_slope: 5e-2,
            mass_slope: 5e-2,
        }
    }

    pub fn for_path(path: TablePath) -> Self {
        match path {
            TablePath::Analytic => Self::analytic(),
            TablePath::Grid => Self::grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: CheckId,
    pub applicable: bool,
    pub hard: bool,
    pub mode: CheckMode,
    pub tolerance: f64,
    /// Largest `|residual|` for equalities, smallest residual otherwise.
    pub worst: f64,
    pub worst_t: f64,
    pub rows: usize,
    pub pass: bool,
}

/// Per-level residuals; see [`CheckId`] for the normalizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowResiduals {
    pub t: f64,
    pub aprime: f64,
    pub key_equality: f64,
    pub volume_identity: f64,
    pub key_inequality: f64,
    pub capacity_slope: f64,
    pub volume_bound: f64,
    pub chain_endpoint: f64,
    pub new_form: f64,
    /// Both sides of (vii), kept for the sharp case.
    pub chain_lhs: f64,
    pub chain_rhs: f64,
}

pub fn row_residuals(row: &LevelEstimate, d_inf: f64) -> RowResiduals {
    let e12 = (12.0 * row.t).exp();
    let l4 = row.perimeter.powi(4);
    let key_lhs = row.da_coarea * row.da_coarea * row.f1 * row.f2;
    let key_rhs = 1.5 * e12 * l4;
    let c4 = 4.0 * row.c;
    let chain_lhs = row.e.powi(3) - c4.powi(3);
    let chain_rhs = e12 * (l4 - (4.0 * row.b).powi(3));
    let chain_scale = c4.powi(3).max(e12 * l4).max(f64::MIN_POSITIVE);
    RowResiduals {
        t: row.t,
        aprime: (row.da - row.da_coarea) / row.da_coarea.abs(),
        key_equality: (row.z * row.z * row.dz - row.f2) / row.f2.abs(),
        volume_identity: row.a - 2.0 / 3.0 * (row.d - d_inf),
        key_inequality: key_lhs / key_rhs - 1.0,
        capacity_slope: row.dc_da - (row.z + 1.0),
        volume_bound: row.c - CAPACITY_CEILING,
        chain_endpoint: (chain_lhs - chain_rhs) / chain_scale,
        new_form: (row.e - (row.dm + c4)) / c4,
        chain_lhs,
        chain_rhs,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub path: TablePath,
    pub class: EquationClass,
    /// Radial solution on the exact path: (iv), (v), (vii) are equalities.
    pub sharp: bool,
    pub tolerances: Tolerances,
    pub checked_levels: usize,
    pub checks: Vec<CheckResult>,
    pub residuals: Vec<RowResiduals>,
}

impl VerificationReport {
    pub fn check(&self, id: CheckId) -> &CheckResult {
        self.checks.iter().find(|c| c.id == id).expect("every check is reported")
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| !c.applicable || c.pass)
    }

    pub fn hard_failures(&self) -> Vec<CheckId> {
        self.checks
            .iter()
            .filter(|c| c.applicable && c.hard && !c.pass)
            .map(|c| c.id)
            .collect()
    }
}

struct Worst {
    value: f64,
    t: f64,
    rows: usize,
}

fn scan_worst<I: IntoIterator<Item = (f64, f64)>>(items: I, mode: CheckMode) -> Worst {
    let mut w = Worst {
        value: match mode {
            CheckMode::Equality => 0.0,
            CheckMode::Inequality => f64::INFINITY,
        },
        t: f64::NAN,
        rows: 0,
    };
    for (t, r) in items {
        w.rows += 1;
        let worse = match mode {
            CheckMode::Equality => !(r.abs() <= w.value),
            CheckMode::Inequality => !(r >= w.value),
        };
        if worse {
            w.value = match mode {
                CheckMode::Equality => r.abs(),
                CheckMode::Inequality => r,
            };
            w.t = t;
        }
    }
    w
}

/// Residuals of every identity and inequality on a table. On the grid path
/// only trusted interior levels are checked, except for the volume bound,
/// which is checked on every level.
pub fn verify_identities(table: &LevelCurveTable, tol: Tolerances) -> VerificationReport {
    let class = table.meta.class;
    let path = table.meta.path;
    let sharp = path == TablePath::Analytic && class == EquationClass::Solution;
    let residuals: Vec<RowResiduals> = table
        .rows
        .iter()
        .map(|r| row_residuals(r, table.meta.d_infinity))
        .collect();
    let n = table.rows.len();
    let checked: Vec<usize> = (0..n)
        .filter(|&k| {
            let r = &table.rows[k];
            match path {
                TablePath::Analytic => true,
                TablePath::Grid => {
                    r.trusted && k > 0 && k + 1 < n && table.rows[k - 1].trusted && table.rows[k + 1].trusted
                }
            }
        })
        .collect();
    let over = |f: fn(&RowResiduals) -> f64| -> Vec<(f64, f64)> {
        checked.iter().map(|&k| (residuals[k].t, f(&residuals[k]))).collect()
    };

    let checks = CheckId::ALL
        .iter()
        .map(|&id| {
            let (mode, tolerance, worst) = match id {
                CheckId::AprimeIdentity => {
                    (CheckMode::Equality, tol.identity, scan_worst(over(|r| r.aprime), CheckMode::Equality))
                }
                CheckId::KeyEquality => (
                    CheckMode::Equality,
                    tol.identity,
                    scan_worst(over(|r| r.key_equality), CheckMode::Equality),
                ),
                CheckId::VolumeIdentity => (
                    CheckMode::Equality,
                    tol.identity,
                    scan_worst(over(|r| r.volume_identity), CheckMode::Equality),
                ),
                CheckId::NewForm => {
                    (CheckMode::Equality, tol.identity, scan_worst(over(|r| r.new_form), CheckMode::Equality))
                }
                CheckId::KeyInequality if sharp => (
                    CheckMode::Equality,
                    tol.sharp,
                    scan_worst(over(|r| r.key_inequality), CheckMode::Equality),
                ),
                CheckId::KeyInequality => (
                    CheckMode::Inequality,
                    tol.inequality,
                    scan_worst(over(|r| r.key_inequality), CheckMode::Inequality),
                ),
                CheckId::ChainEndpoint if sharp => {
                    // Both sides vanish; compare each against the tolerance.
                    let w = scan_worst(
                        over(|r| if r.chain_lhs.abs() > r.chain_rhs.abs() { r.chain_lhs } else { r.chain_rhs }),
                        CheckMode::Equality,
                    );
                    (CheckMode::Equality, tol.sharp, w)
                }
                CheckId::ChainEndpoint => (
                    CheckMode::Inequality,
                    tol.inequality,
                    scan_worst(over(|r| r.chain_endpoint), CheckMode::Inequality),
                ),
                CheckId::CapacitySlope if path == TablePath::Analytic => (
                    CheckMode::Equality,
                    tol.capacity_slope,
                    scan_worst(over(|r| r.capacity_slope), CheckMode::Equality),
                ),
                CheckId::CapacitySlope => (
                    CheckMode::Inequality,
                    tol.capacity_slope,
                    scan_worst(over(|r| r.capacity_slope), CheckMode::Inequality),
                ),
                CheckId::VolumeBound => {
                    let all = residuals.iter().map(|r| (r.t, -r.volume_bound));
                    (CheckMode::Inequality, 0.0, scan_worst(all, CheckMode::Inequality))
                }
                CheckId::MassMonotone => {
                    let dm = checked.iter().map(|&k| (table.rows[k].t, table.rows[k].dm));
                    (CheckMode::Inequality, tol.mass_slope, scan_worst(dm, CheckMode::Inequality))
                }
                CheckId::VolumeMonotone => {
                    let steps = checked
                        .windows(2)
                        .filter(|w| w[1] == w[0] + 1)
                        .map(|w| (table.rows[w[1]].t, table.rows[w[0]].a - table.rows[w[1]].a));
                    let w = scan_worst(steps, CheckMode::Inequality);
                    // Strict decrease: the smallest step must be positive.
                    let w = Worst {
                        value: if w.value > 0.0 { 0.0 } else { w.value.min(-f64::MIN_POSITIVE) },
                        ..w
                    };
                    (CheckMode::Inequality, 0.0, w)
                }
                CheckId::SlopeMonotone => {
                    let allowance = match path {
                        TablePath::Analytic => 0.0,
                        TablePath::Grid => tol.inequality,
                    };
                    let steps = checked
                        .windows(2)
                        .filter(|w| w[1] == w[0] + 1)
                        .map(|w| (table.rows[w[1]].t, table.rows[w[1]].z - table.rows[w[0]].z));
                    (CheckMode::Inequality, allowance, scan_worst(steps, CheckMode::Inequality))
                }
            };
            let pass = match mode {
                CheckMode::Equality => worst.value <= tolerance,
                CheckMode::Inequality => worst.value >= -tolerance,
            } && (worst.rows > 0 || id == CheckId::VolumeMonotone);
            CheckResult {
                id,
                applicable: id.applies_to(class),
                hard: id.is_hard(),
                mode,
                tolerance,
                worst: worst.value,
                worst_t: worst.t,
                rows: worst.rows,
                pass,
            }
        })
        .collect();

    VerificationReport {
        path,
        class,
        sharp,
        tolerances: tol,
        checked_levels: checked.len(),
        checks,
        residuals,
    }
}

/// Table CSV: `t, A, B, C, z, D, M, E, F1, F2, dCdA, residual_*`.
pub fn write_table_csv<W: Write>(
    table: &LevelCurveTable,
    report: &VerificationReport,
    out: W,
) -> Result<(), LevelsetError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["t", "A", "B", "C", "z", "D", "M", "E", "F1", "F2", "dCdA"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for name in [
        "aprime",
        "key_equality",
        "volume_identity",
        "key_inequality",
        "capacity_slope",
        "volume_bound",
        "chain_endpoint",
        "new_form",
    ] {
        header.push(format!("residual_{name}"));
    }
    w.write_record(&header)?;
    for (row, res) in table.rows.iter().zip(&report.residuals) {
        let vals = [
            row.t,
            row.a,
            row.b,
            row.c,
            row.z,
            row.d,
            row.m,
            row.e,
            row.f1,
            row.f2,
            row.dc_da,
            res.aprime,
            res.key_equality,
            res.volume_identity,
            res.key_inequality,
            res.capacity_slope,
            res.volume_bound,
            res.chain_endpoint,
            res.new_form,
        ];
        w.write_record(vals.iter().map(|v| format!("{v}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Largest absolute difference per column between a grid table and the
/// exact rows at the same levels, over trusted levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnErrors {
    pub levels: usize,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub z: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "M")]
    pub m: f64,
}

impl ColumnErrors {
    pub fn as_array(&self) -> [f64; 6] {
        [self.a, self.b, self.c, self.z, self.d, self.m]
    }

    pub fn max(&self) -> f64 {
        self.as_array().into_iter().fold(0.0, f64::max)
    }
}

pub fn column_errors(table: &LevelCurveTable, exact: &[LevelEstimate]) -> ColumnErrors {
    let mut err = [0.0f64; 6];
    let mut levels = 0;
    for (g, e) in table.rows.iter().zip(exact) {
        if !g.trusted {
            continue;
        }
        levels += 1;
        let diffs = [g.a - e.a, g.b - e.b, g.c - e.c, g.z - e.z, g.d - e.d, g.m - e.m];
        for (slot, d) in err.iter_mut().zip(diffs) {
            *slot = slot.max(d.abs());
        }
    }
    let [a, b, c, z, d, m] = err;
    ColumnErrors { levels, a, b, c, z, d, m }
}

/// Certifies a grid table of a radial field against the exact path.
pub fn cross_validate(table: &LevelCurveTable, field: &RadialField) -> ColumnErrors {
    column_errors(table, &analytic_rows(field, &table.levels()))
}
