//! Command-line front end. Flags override the scenario file, which
//! overrides the built-in defaults.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{EvalPath, FieldSource, Scenario, ScenarioKind, Schedule};
use crate::run::{run, LabError, Outcome};

#[derive(Debug, Parser)]
#[command(name = "sigma2-lab", version, about = "Numerical laboratory for sigma_2 conic spheres")]
pub struct Cli {
    /// Scenario TOML file; its kind must match the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write the resolved scenario to stdout and exit.
    #[arg(long, global = true)]
    pub print_config: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify conformal divisors as sub-, super- or critical.
    Classify(ClassifyArgs),
    /// Profile and invariants of the rotationally symmetric football.
    Football(FootballArgs),
    /// Level-set quantities and the monotonicity identities they satisfy.
    LevelsetVerify(LevelsetArgs),
    /// Fraenkel asymmetry and isoperimetric deficit of 4-dimensional sets.
    Isoperimetry(IsoperimetryArgs),
    /// Subcritical divisor sequences converging to a boundary point.
    BoundarySequence(BoundaryArgs),
}

/// Comma-separated cone parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaList(pub Vec<f64>);

fn parse_betas(text: &str) -> Result<BetaList, String> {
    let betas = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BetaList(betas))
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// One divisor per occurrence, e.g. `--betas=-0.5,-0.5`.
    #[arg(long, value_parser = parse_betas, allow_hyphen_values = true)]
    pub betas: Vec<BetaList>,
}

#[derive(Debug, Args)]
pub struct FootballArgs {
    /// Cone parameter `beta`, or the pair `beta,beta`.
    #[arg(long, value_parser = parse_betas, allow_hyphen_values = true)]
    pub betas: Option<BetaList>,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SourceArg {
    Sphere,
    Football,
    File,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PathArg {
    Analytic,
    Grid,
}

#[derive(Debug, Args)]
pub struct LevelsetArgs {
    #[arg(long, value_enum)]
    pub source: Option<SourceArg>,
    /// Field file for `--source file`.
    #[arg(long)]
    pub field: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub path: Option<PathArg>,
    /// Cone parameter of the football source.
    #[arg(long, value_parser = parse_betas, allow_hyphen_values = true)]
    pub betas: Option<BetaList>,
    /// Grid nodes per axis.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Half-width of the cube `[-R, R]^4`, clipped to the ball of radius R.
    #[arg(long)]
    pub domain_radius: Option<f64>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub t_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t_max: Option<f64>,
    /// Adds `offset * I` to the Hessian before the table is built.
    #[arg(long, allow_hyphen_values = true)]
    pub hessian_offset: Option<f64>,
}

#[derive(Debug, Args)]
pub struct IsoperimetryArgs {
    /// Monte Carlo points per asymmetry estimate.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Number of random star-shaped sets.
    #[arg(long)]
    pub random_sets: Option<usize>,
    /// Ellipsoid elongations, comma-separated.
    #[arg(long, value_parser = parse_betas)]
    pub eps: Option<BetaList>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScheduleArg {
    Harmonic,
    Quadratic,
    Constant,
}

#[derive(Debug, Args)]
pub struct BoundaryArgs {
    /// Cone parameter of the two fixed points.
    #[arg(long, value_parser = parse_betas, allow_hyphen_values = true)]
    pub betas: Option<BetaList>,
    #[arg(long, allow_hyphen_values = true)]
    pub eps0: Option<f64>,
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleArg>,
    #[arg(long)]
    pub length: Option<usize>,
    /// Tracked point, 1-based.
    #[arg(long)]
    pub index: Option<usize>,
}

impl Command {
    fn kind(&self) -> ScenarioKind {
        match self {
            Command::Classify(_) => ScenarioKind::Classify,
            Command::Football(_) => ScenarioKind::Football,
            Command::LevelsetVerify(_) => ScenarioKind::LevelsetVerify,
            Command::Isoperimetry(_) => ScenarioKind::Isoperimetry,
            Command::BoundarySequence(_) => ScenarioKind::BoundarySequence,
        }
    }
}

/// The football divisor is `(beta, beta)`, so a pair must repeat itself.
fn single_beta(list: &BetaList) -> Result<f64, LabError> {
    match list.0.as_slice() {
        [b] => Ok(*b),
        [b, c] if b == c => Ok(*b),
        other => Err(LabError::Usage(format!(
            "expected one cone parameter or an equal pair, got {other:?}"
        ))),
    }
}

impl Cli {
    /// Scenario after applying the file and the flags.
    pub fn scenario(&self) -> Result<Scenario, LabError> {
        let kind = self.command.kind();
        let mut s = match &self.config {
            Some(path) => {
                let s = Scenario::load(path)?;
                s.expect_kind(kind)?;
                s
            }
            None => Scenario::new(kind),
        };
        if let Some(dir) = &self.out_dir {
            s.out_dir = dir.clone();
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        match &self.command {
            Command::Classify(a) => {
                let p = s.classify.get_or_insert_with(Default::default);
                if !a.betas.is_empty() {
                    p.divisors = a.betas.iter().map(|b| b.0.clone()).collect();
                }
            }
            Command::Football(a) => {
                let p = s.football.get_or_insert_with(Default::default);
                if let Some(b) = &a.betas {
                    p.beta = single_beta(b)?;
                }
                set(&mut p.samples, a.samples);
            }
            Command::LevelsetVerify(a) => {
                let p = s.levelset.get_or_insert_with(Default::default);
                if let Some(src) = a.source {
                    p.source = match src {
                        SourceArg::Sphere => FieldSource::Sphere,
                        SourceArg::Football => FieldSource::Football,
                        SourceArg::File => FieldSource::File,
                    };
                }
                if let Some(path) = a.path {
                    p.path = match path {
                        PathArg::Analytic => EvalPath::Analytic,
                        PathArg::Grid => EvalPath::Grid,
                    };
                }
                if let Some(b) = &a.betas {
                    p.beta = Some(single_beta(b)?);
                    if a.source.is_none() {
                        p.source = FieldSource::Football;
                    }
                }
                if let Some(f) = &a.field {
                    p.field_file = Some(f.clone());
                    if a.source.is_none() {
                        p.source = FieldSource::File;
                    }
                }
                set(&mut p.resolution, a.resolution);
                set(&mut p.domain_radius, a.domain_radius);
                set(&mut p.bins, a.bins);
                if a.t_min.is_some() {
                    p.t_min = a.t_min;
                }
                if a.t_max.is_some() {
                    p.t_max = a.t_max;
                }
                if a.hessian_offset.is_some() {
                    p.hessian_offset = a.hessian_offset;
                }
            }
            Command::Isoperimetry(a) => {
                let p = s.isoperimetry.get_or_insert_with(Default::default);
                set(&mut p.samples, a.samples);
                set(&mut p.random_sets, a.random_sets);
                if let Some(eps) = &a.eps {
                    p.eps = eps.0.clone();
                }
            }
            Command::BoundarySequence(a) => {
                let p = s.boundary_sequence.get_or_insert_with(Default::default);
                if let Some(b) = &a.betas {
                    p.beta = single_beta(b)?;
                }
                set(&mut p.eps0, a.eps0);
                if let Some(sch) = a.schedule {
                    p.schedule = match sch {
                        ScheduleArg::Harmonic => Schedule::Harmonic,
                        ScheduleArg::Quadratic => Schedule::Quadratic,
                        ScheduleArg::Constant => Schedule::Constant,
                    };
                }
                set(&mut p.length, a.length);
                set(&mut p.index, a.index);
            }
        }
        Ok(s)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

pub fn report<W: Write>(outcome: &Outcome, mut out: W) -> std::io::Result<()> {
    for v in &outcome.verdicts {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        if v.detail.is_empty() {
            writeln!(out, "{tag} {}", v.name)?;
        } else {
            writeln!(out, "{tag} {}: {}", v.name, v.detail)?;
        }
    }
    for f in &outcome.files {
        writeln!(out, "wrote {}", f.display())?;
    }
    Ok(())
}

/// Exit codes: 0 all verdicts pass, 2 some verdict fails, 1 usage,
/// configuration or runtime error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let scenario = match cli.scenario() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if cli.print_config {
        return match scenario.to_toml() {
            Ok(text) => {
                print!("{text}");
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        };
    }
    match run(&scenario) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            let _ = report(&outcome, std::io::stdout().lock());
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Scenario {
        Cli::try_parse_from(args).unwrap().scenario().unwrap()
    }

    #[test]
    fn repeated_betas_give_one_divisor_each() {
        let s = parse(&["sigma2-lab", "classify", "--betas", "-0.5,-0.5", "--betas=-0.1,-0.2,-0.3"]);
        assert_eq!(s.classify.unwrap().divisors, vec![vec![-0.5, -0.5], vec![-0.1, -0.2, -0.3]]);
    }

    #[test]
    fn flags_override_defaults() {
        let s = parse(&[
            "sigma2-lab",
            "levelset-verify",
            "--betas",
            "-0.5",
            "--resolution",
            "32",
            "--t-min",
            "-2",
            "--t-max",
            "-0.5",
            "--seed",
            "7",
        ]);
        let p = s.levelset.unwrap();
        assert_eq!(p.source, FieldSource::Football);
        assert_eq!((p.beta, p.resolution, p.t_min), (Some(-0.5), 32, Some(-2.0)));
        assert_eq!(s.seed, 7);
    }

    #[test]
    fn football_rejects_unequal_pair() {
        let cli = Cli::try_parse_from(["sigma2-lab", "football", "--betas", "-0.5,-0.4"]).unwrap();
        assert!(matches!(cli.scenario(), Err(LabError::Usage(_))));
    }
}
