//! Scenario files: one TOML document per experiment.
//!
//! ```toml
//! schema_version = 1
//! kind = "levelset-verify"
//! seed = 0
//! out_dir = "out"
//!
//! [levelset]
//! source = "sphere"
//! path = "grid"
//! resolution = 64
//! domain_radius = 6.0
//! bins = 200
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid scenario file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize scenario: {0}")]
    Print(#[from] toml::ser::Error),
    #[error("unsupported schema version {found} (expected {SCHEMA_VERSION})")]
    Version { found: u32 },
    #[error("scenario kind is {found}, but the {requested} subcommand was run")]
    KindMismatch { found: ScenarioKind, requested: ScenarioKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Classify,
    Football,
    LevelsetVerify,
    Isoperimetry,
    BoundarySequence,
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScenarioKind::Classify => "classify",
            ScenarioKind::Football => "football",
            ScenarioKind::LevelsetVerify => "levelset-verify",
            ScenarioKind::Isoperimetry => "isoperimetry",
            ScenarioKind::BoundarySequence => "boundary-sequence",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub kind: ScenarioKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classify: Option<ClassifyParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub football: Option<FootballParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levelset: Option<LevelsetParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isoperimetry: Option<IsoperimetryParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_sequence: Option<BoundaryParams>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyParams {
    /// One list of cone parameters per divisor.
    pub divisors: Vec<Vec<f64>>,
    pub tolerance: f64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        Self {
            divisors: vec![vec![-0.5, -0.5], vec![-0.5, -0.9], vec![-0.5, -0.5, -0.1]],
            tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FootballParams {
    pub beta: f64,
    pub samples: usize,
}

impl Default for FootballParams {
    fn default() -> Self {
        Self {
            beta: -0.5,
            samples: 2048,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldSource {
    Sphere,
    Football,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalPath {
    Analytic,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelsetParams {
    pub source: FieldSource,
    pub path: EvalPath,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_file: Option<PathBuf>,
    pub resolution: usize,
    pub domain_radius: f64,
    pub bins: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    /// Center of the radial source fields.
    pub center: [f64; 4],
    /// Adds `offset * I` to every Hessian; fault injection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hessian_offset: Option<f64>,
}

impl Default for LevelsetParams {
    fn default() -> Self {
        Self {
            source: FieldSource::Sphere,
            path: EvalPath::Grid,
            beta: None,
            field_file: None,
            resolution: 64,
            domain_radius: 6.0,
            bins: 200,
            t_min: None,
            t_max: None,
            center: [0.137, -0.071, 0.043, 0.011],
            hessian_offset: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsoperimetryParams {
    /// Ellipsoid family: semi-axes `(1, 1, 1, 1 + eps)`.
    pub eps: Vec<f64>,
    pub samples: usize,
    pub random_sets: usize,
    pub amplitude: f64,
    /// Rule nodes in `sin^2` of the Hopf height and per Hopf angle.
    pub rule: [usize; 2],
}

impl Default for IsoperimetryParams {
    fn default() -> Self {
        Self {
            eps: vec![0.05, 0.1, 0.2],
            samples: 1 << 20,
            random_sets: 50,
            amplitude: 0.15,
            rule: [24, 48],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// `eps_l = eps0 / l`
    Harmonic,
    /// `eps_l = eps0 / l^2`
    Quadratic,
    /// `eps_l = eps0`
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryParams {
    pub beta: f64,
    pub eps0: f64,
    pub schedule: Schedule,
    pub length: usize,
    /// Tracked point, 1-based.
    pub index: usize,
    /// Admissibility margin `beta > -1 + margin`.
    pub margin: f64,
}

impl Default for BoundaryParams {
    fn default() -> Self {
        Self {
            beta: -0.5,
            eps0: -0.1,
            schedule: Schedule::Harmonic,
            length: 20,
            index: 1,
            margin: 0.05,
        }
    }
}

impl Scenario {
    pub fn new(kind: ScenarioKind) -> Self {
        let mut s = Self {
            schema_version: SCHEMA_VERSION,
            kind,
            seed: 0,
            out_dir: default_out_dir(),
            classify: None,
            football: None,
            levelset: None,
            isoperimetry: None,
            boundary_sequence: None,
        };
        match kind {
            ScenarioKind::Classify => s.classify = Some(ClassifyParams::default()),
            ScenarioKind::Football => s.football = Some(FootballParams::default()),
            ScenarioKind::LevelsetVerify => s.levelset = Some(LevelsetParams::default()),
            ScenarioKind::Isoperimetry => s.isoperimetry = Some(IsoperimetryParams::default()),
            ScenarioKind::BoundarySequence => s.boundary_sequence = Some(BoundaryParams::default()),
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut s: Scenario = toml::from_str(text)?;
        if s.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Version {
                found: s.schema_version,
            });
        }
        // A missing section means defaults.
        let defaults = Scenario::new(s.kind);
        s.classify = s.classify.or(defaults.classify);
        s.football = s.football.or(defaults.football);
        s.levelset = s.levelset.or(defaults.levelset);
        s.isoperimetry = s.isoperimetry.or(defaults.isoperimetry);
        s.boundary_sequence = s.boundary_sequence.or(defaults.boundary_sequence);
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    pub fn expect_kind(&self, requested: ScenarioKind) -> Result<(), ConfigError> {
        if self.kind != requested {
            return Err(ConfigError::KindMismatch {
                found: self.kind,
                requested,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        for kind in [
            ScenarioKind::Classify,
            ScenarioKind::Football,
            ScenarioKind::LevelsetVerify,
            ScenarioKind::Isoperimetry,
            ScenarioKind::BoundarySequence,
        ] {
            let s = Scenario::new(kind);
            let text = s.to_toml().unwrap();
            assert_eq!(Scenario::parse(&text).unwrap(), s, "{text}");
        }
    }

    #[test]
    fn missing_section_takes_defaults() {
        let s = Scenario::parse("schema_version = 1\nkind = \"football\"\n").unwrap();
        assert_eq!(s.football, Some(FootballParams::default()));
        assert_eq!(s.out_dir, PathBuf::from("out"));
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        assert!(Scenario::parse("schema_version = 1\nkind = \"football\"\ncolour = 1\n").is_err());
        assert!(matches!(
            Scenario::parse("schema_version = 2\nkind = \"football\"\n"),
            Err(ConfigError::Version { found: 2 })
        ));
        assert!(Scenario::parse("schema_version = 1\nkind = \"bogus\"\n").is_err());
    }
}
