//! Scenario runners. Each writes its artifacts under the scenario's output
//! directory and returns the verdicts it checked.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use sigma2_core::divisor::{analyze_sequence, classify, classify_exact, ConformalDivisor, Criticality, DivisorError, DivisorReport};
use sigma2_core::field::{CorruptedHessian, FieldFileError, PerturbedBubble, RadialField, SampledGridField, ScalarField4D};
use sigma2_core::isoperimetry::{
    deficit_shape_functional, fraenkel_asymmetry, random_star_set, AsymmetryOptions, AsymmetryReport, IsoError,
    ShapeFunctional, SphereRule, StarShapedSet,
};
use sigma2_core::levelset::{
    analytic_capacity, analytic_table, capacity_estimate, coarea_table, cross_validate, verify_identities,
    write_table_csv, BinSpec, CapacityEstimate, CheckMode, CheckResult, CoareaOptions, ColumnErrors, GridSpec, LevelCurveTable,
    LevelsetError, TableMeta, Tolerances,
};
use sigma2_core::radial::{radial_levelsets, schouten_eigenvalues, write_profile_csv, ProfileOptions, RadialError, RadialSolution};

use crate::config::{
    BoundaryParams, ConfigError, EvalPath, FieldSource, IsoperimetryParams, LevelsetParams, Scenario, ScenarioKind,
    Schedule,
};
use crate::plot::{line_plot, Series};

#[derive(Debug, Error)]
pub enum LabError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Divisor(#[from] DivisorError),
    #[error(transparent)]
    Radial(#[from] RadialError),
    #[error(transparent)]
    Levelset(#[from] LevelsetError),
    #[error(transparent)]
    Isoperimetry(#[from] IsoError),
    #[error("field file: {0}")]
    FieldFile(#[from] FieldFileError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }

    /// `|value - target| <= tol`.
    fn close(name: &str, value: f64, target: f64, tol: f64) -> Self {
        let err = (value - target).abs();
        Self::new(name, err <= tol, format!("{value:.12} vs {target:.12} (|diff| {err:.2e}, tol {tol:.0e})"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub kind: ScenarioKind,
    pub verdicts: Vec<Verdict>,
    pub files: Vec<PathBuf>,
    /// Conditions worth knowing that do not change the verdicts.
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass() {
            0
        } else {
            2
        }
    }
}

struct Output {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self, LabError> {
        fs::create_dir_all(dir).map_err(|source| LabError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>, LabError> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|source| LabError::Io {
            path: path.clone(),
            source,
        })?;
        self.files.push(path);
        Ok(BufWriter::new(file))
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), LabError> {
        let path = self.dir.join(name);
        let mut w = self.create(name)?;
        w.write_all(body.as_bytes())
            .and_then(|_| w.flush())
            .map_err(|source| LabError::Io { path, source })
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), LabError> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.text(name, &body)
    }

    fn finish(self, kind: ScenarioKind, verdicts: Vec<Verdict>) -> Outcome {
        Outcome {
            kind,
            verdicts,
            files: self.files,
            warnings: Vec::new(),
        }
    }
}

pub fn run(scenario: &Scenario) -> Result<Outcome, LabError> {
    match scenario.kind {
        ScenarioKind::Classify => run_classify(scenario),
        ScenarioKind::Football => run_football(scenario),
        ScenarioKind::LevelsetVerify => run_levelset_verify(scenario),
        ScenarioKind::Isoperimetry => run_isoperimetry(scenario),
        ScenarioKind::BoundarySequence => run_boundary_sequence(scenario),
    }
}

#[derive(Serialize)]
struct ClassifyEntry {
    #[serde(flatten)]
    report: DivisorReport,
    exact_class: Criticality,
    /// 0-based indices of parameters outside (-1, 0].
    out_of_range: Vec<usize>,
}

fn run_classify(s: &Scenario) -> Result<Outcome, LabError> {
    let params = s.classify.clone().unwrap_or_default();
    let mut out = Output::new(&s.out_dir)?;
    let mut entries = Vec::new();
    let mut verdicts = Vec::new();
    let mut warnings = Vec::new();
    for betas in &params.divisors {
        let divisor = ConformalDivisor::new(betas.clone())?;
        let float = classify(&divisor, params.tolerance)?;
        let exact = classify_exact(&divisor);
        let label = format!("{betas:?}");
        verdicts.push(Verdict::new(
            format!("classify {label}"),
            float.class == exact.class,
            format!("{} (exact {})", float.class, exact.class),
        ));
        let out_of_range = divisor.out_of_range_points();
        if !out_of_range.is_empty() {
            warnings.push(format!(
                "{label}: parameters at indices {out_of_range:?} are positive; no radial model exists for them"
            ));
        }
        entries.push(ClassifyEntry {
            report: DivisorReport::new(&divisor, &float),
            exact_class: exact.class,
            out_of_range,
        });
    }
    out.json("classification.json", &entries)?;
    let mut csv = String::from("betas,gaps,class,exact_class,V\n");
    for e in &entries {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ");
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            join(&e.report.betas),
            join(&e.report.gaps),
            e.report.class,
            e.exact_class,
            e.report.volume
        ));
    }
    out.text("classification.csv", &csv)?;
    let mut outcome = out.finish(s.kind, verdicts);
    outcome.warnings = warnings;
    Ok(outcome)
}

#[derive(Serialize)]
struct FootballSummary {
    beta: f64,
    a: f64,
    b2: f64,
    #[serde(rename = "H")]
    first_integral: f64,
    volume: f64,
    capacity: f64,
    mass: f64,
    closed_form: ClosedForms,
    samples: usize,
    max_mass_deviation: f64,
    max_first_integral_drift: f64,
    max_factorization_error: f64,
    min_sigma1: f64,
    min_sigma2: f64,
}

#[derive(Serialize)]
struct ClosedForms {
    #[serde(rename = "H")]
    first_integral: f64,
    volume: f64,
    divisor_volume: f64,
    capacity: f64,
    mass: f64,
}

fn closed_forms(beta: f64) -> Result<ClosedForms, LabError> {
    let a = 1.0 + beta;
    let b2 = 2.0 - a * a;
    let h = a * a * b2 / 4.0;
    Ok(ClosedForms {
        first_integral: h,
        volume: 2.0 * a - 2.0 * a.powi(3) / 3.0,
        divisor_volume: ConformalDivisor::new(vec![beta, beta])?.normalized_total_volume(),
        capacity: h,
        mass: 0.25 * (beta * (2.0 + beta)).powi(2),
    })
}

fn run_football(s: &Scenario) -> Result<Outcome, LabError> {
    let params = s.football.clone().unwrap_or_default();
    let sol = if params.beta == 0.0 {
        RadialSolution::sphere()
    } else {
        RadialSolution::football_with(
            params.beta,
            ProfileOptions {
                n_samples: params.samples,
                ..ProfileOptions::default()
            },
        )?
    };
    let closed = closed_forms(params.beta)?;
    let a = 1.0 + params.beta;
    let b2 = 2.0 - a * a;
    let rows = radial_levelsets(&sol);
    let max_mass_deviation = rows.iter().map(|r| (r.m - closed.mass).abs()).fold(0.0, f64::max);
    let (mut drift, mut fact, mut s1, mut s2) = (0.0f64, 0.0f64, f64::INFINITY, f64::INFINITY);
    let mut prev: Option<(f64, f64)> = None;
    let mut v_monotone = true;
    for p in sol.samples() {
        let st = sol.state_at(p.xi);
        drift = drift.max((sigma2_core::radial::first_integral(st.w, st.v) - sol.first_integral()).abs());
        fact = fact.max((st.e4w - (a * a - st.v * st.v) * (b2 - st.v * st.v)).abs());
        let (l1, l2) = schouten_eigenvalues(&st);
        // Scale-free: multiply by r^2 so the tails do not underflow.
        let r2 = (2.0 * st.tau).exp();
        s1 = s1.min((l1 + 3.0 * l2) * r2);
        s2 = s2.min((3.0 * l1 * l2 + 3.0 * l2 * l2) * r2 * r2);
        // v is strictly decreasing in tau.
        if let Some((tau, v)) = prev {
            v_monotone &= (st.v - v) * (st.tau - tau) < 0.0;
        }
        v_monotone &= st.v.abs() <= a;
        prev = Some((st.tau, st.v));
    }
    let summary = FootballSummary {
        beta: params.beta,
        a,
        b2,
        first_integral: sol.first_integral(),
        volume: sol.volume(),
        capacity: sol.capacity(),
        mass: sol.mass(),
        samples: sol.len(),
        max_mass_deviation,
        max_first_integral_drift: drift,
        max_factorization_error: fact,
        min_sigma1: s1,
        min_sigma2: s2,
        closed_form: closed,
    };
    let c = &summary.closed_form;
    let verdicts = vec![
        Verdict::close("first integral", summary.first_integral, c.first_integral, 1e-12),
        Verdict::close("volume", summary.volume, c.volume, 1e-9),
        Verdict::close("gauss-bonnet two-path", summary.volume, c.divisor_volume, 1e-9),
        Verdict::close("capacity", summary.capacity, c.capacity, 1e-8),
        Verdict::new(
            "mass rigidity",
            max_mass_deviation <= 1e-8,
            format!("max |M - {:.12}| = {max_mass_deviation:.2e} (tol 1e-8)", c.mass),
        ),
        Verdict::new("first integral conserved", drift <= 1e-10, format!("max drift {drift:.2e} (tol 1e-10)")),
        Verdict::new(
            "algebraic factorization",
            fact <= 1e-10,
            format!("max |e^(4w) - (a^2-v^2)(b^2-v^2)| = {fact:.2e} (tol 1e-10)"),
        ),
        Verdict::new("v decreasing, |v| <= a", v_monotone, String::new()),
        Verdict::new(
            "elliptic cone",
            s1 > 0.0 && s2 > 0.0,
            format!("min r^2 sigma1 = {s1:.3e}, min r^4 sigma2 = {s2:.3e}"),
        ),
    ];
    let mut out = Output::new(&s.out_dir)?;
    out.json("football.json", &summary)?;
    let w = out.create("football_profile.csv")?;
    write_profile_csv(&rows, w)?;
    let svg = line_plot(
        &format!("football beta = {}", params.beta),
        "t",
        "M, C",
        &[
            Series {
                name: "M(t)",
                points: rows.iter().map(|r| (r.t, r.m)).collect(),
            },
            Series {
                name: "C(t)",
                points: rows.iter().map(|r| (r.t, r.c)).collect(),
            },
        ],
    );
    out.text("football.svg", &svg)?;
    Ok(out.finish(s.kind, verdicts))
}

#[derive(Serialize)]
struct LevelsetSummary<'a> {
    source: FieldSource,
    path: EvalPath,
    beta: Option<f64>,
    meta: &'a TableMeta,
    levels: usize,
    capacity: CapacityEstimate,
    exact_capacity: Option<f64>,
    cross_validation: Option<ColumnErrors>,
    checked_levels: usize,
    sharp: bool,
    checks: &'a [CheckResult],
}

fn radial_source(p: &LevelsetParams) -> Result<Option<RadialField>, LabError> {
    let sol = match p.source {
        FieldSource::Sphere => RadialSolution::sphere(),
        FieldSource::Football => {
            let beta = p
                .beta
                .ok_or_else(|| LabError::Usage("football source needs a cone parameter (--betas)".into()))?;
            if beta == 0.0 {
                RadialSolution::sphere()
            } else {
                RadialSolution::football(beta)?
            }
        }
        FieldSource::File => return Ok(None),
    };
    Ok(Some(RadialField::new(Arc::new(sol)).with_center(p.center)))
}

fn grid_table<F: ScalarField4D>(field: &F, p: &LevelsetParams, bins: BinSpec) -> Result<LevelCurveTable, LabError> {
    let grid = GridSpec {
        radius: p.domain_radius,
        resolution: p.resolution,
    };
    let opts = CoareaOptions::default();
    Ok(match p.hessian_offset {
        Some(offset) => coarea_table(&CorruptedHessian { inner: field, offset }, grid, bins, opts)?,
        None => coarea_table(field, grid, bins, opts)?,
    })
}

fn run_levelset_verify(s: &Scenario) -> Result<Outcome, LabError> {
    let p = s.levelset.clone().unwrap_or_default();
    let bins = match (p.t_min, p.t_max) {
        (Some(t_min), Some(t_max)) => BinSpec::Range {
            t_min,
            t_max,
            count: p.bins,
        },
        (None, None) => BinSpec::Auto { count: p.bins },
        _ => return Err(LabError::Usage("give both t_min and t_max, or neither".into())),
    };
    let radial = radial_source(&p)?;
    let table = match (p.path, &radial) {
        (EvalPath::Analytic, Some(field)) => {
            if p.hessian_offset.is_some() {
                return Err(LabError::Usage("Hessian corruption needs the grid path".into()));
            }
            analytic_table(field, bins)?
        }
        (EvalPath::Analytic, None) => {
            return Err(LabError::Usage("the analytic path needs a radial source".into()));
        }
        (EvalPath::Grid, Some(_)) if p.source == FieldSource::Sphere => {
            let bubble = PerturbedBubble {
                center: p.center,
                ..PerturbedBubble::sphere()
            };
            grid_table(&bubble, &p, bins)?
        }
        (EvalPath::Grid, Some(field)) => grid_table(field, &p, bins)?,
        (EvalPath::Grid, None) => {
            let path = p
                .field_file
                .clone()
                .ok_or_else(|| LabError::Usage("file source needs a field file".into()))?;
            let file = File::open(&path).map_err(|source| LabError::Io {
                path: path.clone(),
                source,
            })?;
            let field = SampledGridField::read_from(BufReader::new(file))?;
            grid_table(&field, &p, bins)?
        }
    };
    let report = verify_identities(&table, Tolerances::for_path(table.meta.path));
    let capacity = match (p.path, &radial) {
        (EvalPath::Analytic, Some(field)) => analytic_capacity(field),
        _ => capacity_estimate(&table)?,
    };
    let exact_capacity = radial.as_ref().map(|f| f.solution().first_integral());
    let cross_validation = match (&radial, p.path) {
        (Some(field), EvalPath::Grid) => Some(cross_validate(&table, field)),
        _ => None,
    };

    let mut verdicts: Vec<Verdict> = report
        .checks
        .iter()
        .filter(|c| c.applicable)
        .map(|c| {
            Verdict::new(
                c.id.label(),
                c.pass,
                format!(
                    "{} {:.3e} at t = {:.4} over {} levels (tol {:.0e})",
                    match c.mode {
                        CheckMode::Equality => "max |residual|",
                        CheckMode::Inequality => "min slack",
                    },
                    c.worst,
                    c.worst_t,
                    c.rows,
                    c.tolerance
                ),
            )
        })
        .collect();
    let capacity_tol = match p.path {
        EvalPath::Analytic => 1e-8,
        EvalPath::Grid => 2e-2,
    };
    if let Some(exact) = exact_capacity {
        verdicts.push(Verdict::close("capacity", capacity.capacity, exact, capacity_tol));
    }
    if let Some(errors) = &cross_validation {
        verdicts.push(Verdict::new(
            "grid vs exact columns",
            errors.max() <= Tolerances::grid().identity,
            format!("max |error| over A,B,C,z,D,M = {:.3e} on {} levels", errors.max(), errors.levels),
        ));
    }
    if let (Some(field), EvalPath::Analytic) = (&radial, p.path) {
        let mass = field.solution().mass();
        let dev = table.rows.iter().map(|r| (r.m - mass).abs()).fold(0.0, f64::max);
        verdicts.push(Verdict::new(
            "mass rigidity",
            dev <= 1e-8,
            format!("max |M - {mass:.12}| = {dev:.2e} (tol 1e-8)"),
        ));
    }

    let summary = LevelsetSummary {
        source: p.source,
        path: p.path,
        beta: p.beta,
        meta: &table.meta,
        levels: table.rows.len(),
        capacity,
        exact_capacity,
        cross_validation,
        checked_levels: report.checked_levels,
        sharp: report.sharp,
        checks: &report.checks,
    };
    let mut out = Output::new(&s.out_dir)?;
    let w = out.create("levelset_table.csv")?;
    write_table_csv(&table, &report, w)?;
    out.json("levelset_report.json", &summary)?;
    for (name, title, pick) in [
        ("levelset_M.svg", "mass M(t)", (|r: &sigma2_core::levelset::LevelEstimate| r.m) as fn(&_) -> f64),
        ("levelset_C.svg", "capacity curve C(t)", |r| r.c),
    ] {
        let svg = line_plot(
            title,
            "t",
            &title[..title.find(' ').unwrap_or(title.len())],
            &[Series {
                name: if name.contains("_M") { "M" } else { "C" },
                points: table.rows.iter().map(|r| (r.t, pick(r))).collect(),
            }],
        );
        out.text(name, &svg)?;
    }
    Ok(out.finish(s.kind, verdicts))
}

#[derive(Serialize)]
struct FamilyRow {
    eps: f64,
    #[serde(flatten)]
    shape: ShapeFunctional,
    /// `|S|^3 alpha^2` of the copy scaled by 1/2, times `2^12`.
    half_scale_volume_asymmetry: f64,
}

#[derive(Serialize)]
struct RandomRow {
    seed: u64,
    alpha: f64,
    deficit: f64,
    ratio: f64,
}

#[derive(Serialize)]
struct IsoperimetrySummary<'a> {
    samples: usize,
    seed: u64,
    rule_nodes: usize,
    ball: AsymmetryReport,
    family: &'a [FamilyRow],
    random_samples: usize,
    random_min_deficit: f64,
    random_max_ratio: f64,
}

fn run_isoperimetry(s: &Scenario) -> Result<Outcome, LabError> {
    let p: IsoperimetryParams = s.isoperimetry.clone().unwrap_or_default();
    let rule = Arc::new(SphereRule::hopf(p.rule[0], p.rule[1]));
    let opts = AsymmetryOptions {
        samples: p.samples,
        seed: s.seed,
        ..AsymmetryOptions::default()
    };
    let ball = fraenkel_asymmetry(&StarShapedSet::ball(rule.clone(), 1.0)?, opts)?;
    let mut family = Vec::new();
    for &eps in &p.eps {
        let set = StarShapedSet::ellipsoid(rule.clone(), [1.0, 1.0, 1.0, 1.0 + eps])?;
        let shape = deficit_shape_functional(&set, opts)?;
        let half = deficit_shape_functional(&set.scaled(0.5), opts)?;
        family.push(FamilyRow {
            eps,
            shape,
            half_scale_volume_asymmetry: half.volume_asymmetry * 4096.0,
        });
    }
    let random_opts = AsymmetryOptions {
        samples: p.samples.min(1 << 16),
        ..opts
    };
    let mut random = Vec::new();
    for k in 0..p.random_sets as u64 {
        let set = random_star_set(rule.clone(), s.seed.wrapping_add(k), p.amplitude)?;
        let rep = fraenkel_asymmetry(&set, random_opts)?;
        random.push(RandomRow {
            seed: s.seed.wrapping_add(k),
            alpha: rep.alpha,
            deficit: rep.deficit,
            ratio: rep.ratio,
        });
    }
    let random_min_deficit = random.iter().map(|r| r.deficit).fold(f64::INFINITY, f64::min);
    let random_max_ratio = random
        .iter()
        .filter(|r| r.deficit > 0.0)
        .map(|r| r.ratio)
        .fold(0.0, f64::max);

    let mut verdicts = vec![
        Verdict::new("ball asymmetry", ball.alpha.abs() <= 1e-3, format!("alpha = {:.3e} (tol 1e-3)", ball.alpha)),
        Verdict::new("ball deficit", ball.deficit.abs() <= 1e-3, format!("deficit = {:.3e} (tol 1e-3)", ball.deficit)),
    ];
    for pair in family.windows(2) {
        let (small, big) = (&pair[0], &pair[1]);
        if (big.eps - 2.0 * small.eps).abs() > 1e-12 {
            continue;
        }
        let ra = small.shape.asymmetry.alpha / big.shape.asymmetry.alpha;
        let rd = small.shape.asymmetry.deficit / big.shape.asymmetry.deficit;
        verdicts.push(Verdict::new(
            format!("alpha halves ({} -> {})", big.eps, small.eps),
            (ra - 0.5).abs() <= 0.2 * 0.5,
            format!("ratio {ra:.4} (target 0.5 +- 20%)"),
        ));
        verdicts.push(Verdict::new(
            format!("deficit quarters ({} -> {})", big.eps, small.eps),
            (rd - 0.25).abs() <= 0.3 * 0.25,
            format!("ratio {rd:.4} (target 0.25 +- 30%)"),
        ));
    }
    for row in &family {
        let rel = row.half_scale_volume_asymmetry / row.shape.volume_asymmetry - 1.0;
        verdicts.push(Verdict::new(
            format!("r^12 scaling (eps {})", row.eps),
            rel.abs() <= 1e-2,
            format!("relative deviation {rel:.3e} (tol 1e-2)"),
        ));
    }
    verdicts.push(Verdict::new(
        "isoperimetric inequality",
        random_min_deficit >= -1e-3,
        format!("min deficit {random_min_deficit:.3e} over {} sets (tol -1e-3)", random.len()),
    ));

    let mut out = Output::new(&s.out_dir)?;
    out.json(
        "isoperimetry.json",
        &IsoperimetrySummary {
            samples: opts.samples,
            seed: s.seed,
            rule_nodes: rule.len(),
            ball,
            family: &family,
            random_samples: random_opts.samples,
            random_min_deficit,
            random_max_ratio,
        },
    )?;
    let mut csv = String::from("eps,alpha,deficit,ratio,r,volume_asymmetry,isoperimetric_gap\n");
    for row in &family {
        let a = &row.shape.asymmetry;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.eps, a.alpha, a.deficit, a.ratio, a.r, row.shape.volume_asymmetry, row.shape.isoperimetric_gap
        ));
    }
    out.text("isoperimetry_family.csv", &csv)?;
    let mut csv = String::from("seed,alpha,deficit,ratio\n");
    for r in &random {
        csv.push_str(&format!("{},{},{},{}\n", r.seed, r.alpha, r.deficit, r.ratio));
    }
    out.text("isoperimetry_random.csv", &csv)?;
    Ok(out.finish(s.kind, verdicts))
}

#[derive(Serialize)]
struct BoundaryRow {
    l: usize,
    eps: f64,
    class: Criticality,
    gaps: Vec<f64>,
    #[serde(rename = "V")]
    volume: f64,
    volume_defect: f64,
    predicted_defect: f64,
}

#[derive(Serialize)]
struct LimitReport {
    beta: f64,
    #[serde(rename = "H")]
    first_integral: f64,
    capacity: f64,
    mass: f64,
    volume: f64,
}

#[derive(Serialize)]
struct BoundarySummary<'a> {
    params: &'a BoundaryParams,
    rows: &'a [BoundaryRow],
    tracked_index: usize,
    tracked_final_gap: f64,
    tracked_is_boundary_index: bool,
    boundary_indices: Vec<usize>,
    limit: LimitReport,
    /// Non-degeneracy at the limit: sum |beta_i| > 0.
    limit_abs_sum: f64,
    limit_nondegenerate: bool,
    /// Limit with every cone parameter zero, which the semicontinuity
    /// statement allows but the non-degeneracy condition excludes.
    limit_round: bool,
    min_nondegen_const: f64,
    flagged: bool,
}

pub fn schedule(p: &BoundaryParams) -> Result<Vec<f64>, LabError> {
    if !(p.beta > -1.0 && p.beta < 0.0) {
        return Err(LabError::Usage(format!("cone parameter {} is outside (-1, 0)", p.beta)));
    }
    if p.length < 2 {
        return Err(LabError::Usage("sequence needs at least two elements".into()));
    }
    if !(p.eps0 < 0.0) {
        return Err(LabError::Usage(format!("eps0 must be negative, got {}", p.eps0)));
    }
    let eps: Vec<f64> = (1..=p.length)
        .map(|l| {
            let l = l as f64;
            match p.schedule {
                Schedule::Harmonic => p.eps0 / l,
                Schedule::Quadratic => p.eps0 / (l * l),
                Schedule::Constant => p.eps0,
            }
        })
        .collect();
    if !eps.windows(2).all(|w| w[1] > w[0]) {
        return Err(LabError::Usage(
            "schedule not converging: eps_l must increase strictly toward 0".into(),
        ));
    }
    Ok(eps)
}

const BOUNDARY_GAP_TOL: f64 = 1e-3;

fn run_boundary_sequence(s: &Scenario) -> Result<Outcome, LabError> {
    let p = s.boundary_sequence.clone().unwrap_or_default();
    let eps = schedule(&p)?;
    if p.index == 0 || p.index > 3 {
        return Err(LabError::Usage(format!("tracked index {} is outside 1..=3", p.index)));
    }
    let seq: Vec<ConformalDivisor> = eps
        .iter()
        .map(|&e| ConformalDivisor::new(vec![p.beta, p.beta, e]))
        .collect::<Result<_, _>>()?;
    let tracked = analyze_sequence(&seq, p.index - 1, p.margin)?;
    let per_index: Vec<_> = (0..3)
        .map(|j| analyze_sequence(&seq, j, p.margin))
        .collect::<Result<_, _>>()?;
    let boundary_indices: Vec<usize> = per_index
        .iter()
        .filter(|r| r.gap_nonincreasing && r.final_gap().abs() < BOUNDARY_GAP_TOL)
        .map(|r| r.index + 1)
        .collect();

    let sol = RadialSolution::football(p.beta)?;
    let closed = closed_forms(p.beta)?;
    let rows: Vec<BoundaryRow> = seq
        .iter()
        .zip(&eps)
        .enumerate()
        .map(|(i, (d, &e))| {
            let class = classify_exact(d).class;
            let volume = d.normalized_total_volume();
            BoundaryRow {
                l: i + 1,
                eps: e,
                class,
                gaps: d.gaps(),
                volume,
                volume_defect: closed.volume - volume,
                predicted_defect: (2.0 / 3.0) * (e.powi(3) + 3.0 * e * e) / 2.0,
            }
        })
        .collect();

    let all_sub = rows.iter().all(|r| r.class == Criticality::Subcritical);
    let defect_err = rows
        .iter()
        .map(|r| (r.volume_defect - r.predicted_defect).abs())
        .fold(0.0, f64::max);
    let orders: Vec<f64> = rows.iter().map(|r| r.volume_defect / (r.eps * r.eps)).collect();
    let order_ok = orders.iter().all(|&c| c > 0.5 && c < 2.0);
    let last = rows.last().expect("length >= 2");
    let verdicts = vec![
        Verdict::new("all subcritical", all_sub, format!("{} divisors", rows.len())),
        Verdict::new(
            "boundary gap monotone to 0",
            !boundary_indices.is_empty(),
            format!(
                "indices {boundary_indices:?}; tracked G(D_{}, {}) = {:.6e}",
                rows.len(),
                p.index,
                tracked.final_gap()
            ),
        ),
        Verdict::close("limit capacity", sol.capacity(), closed.capacity, 1e-8),
        Verdict::new(
            "volume defect",
            defect_err <= 1e-12,
            format!("max |(V_inf - V_l) - (2/3)(eps^3 + 3 eps^2)/2| = {defect_err:.2e}"),
        ),
        Verdict::new(
            "defect is O(eps^2)",
            order_ok,
            format!("defect / eps^2 from {:.4} to {:.4}", orders[0], orders[orders.len() - 1]),
        ),
        Verdict::new(
            "volume converges",
            last.volume_defect.abs() <= 2.0 * last.eps * last.eps,
            format!("V(D_L) = {:.12}, football {:.12}", last.volume, closed.volume),
        ),
    ];

    let summary = BoundarySummary {
        params: &p,
        rows: &rows,
        tracked_index: p.index,
        tracked_final_gap: tracked.final_gap(),
        tracked_is_boundary_index: boundary_indices.contains(&p.index),
        boundary_indices: boundary_indices.clone(),
        limit: LimitReport {
            beta: p.beta,
            first_integral: sol.first_integral(),
            capacity: sol.capacity(),
            mass: sol.mass(),
            volume: sol.volume(),
        },
        limit_abs_sum: tracked.limit_abs_sum,
        limit_nondegenerate: tracked.limit_abs_sum > 0.0,
        limit_round: tracked.limit_betas.iter().all(|b| b.abs() < 1e-12),
        min_nondegen_const: tracked.min_nondegen_const,
        flagged: tracked.flagged(),
    };
    let mut out = Output::new(&s.out_dir)?;
    let w = out.create("boundary_sequence.csv")?;
    tracked.write_csv(w)?;
    out.json("boundary_sequence.json", &summary)?;
    Ok(out.finish(s.kind, verdicts))
}
