//! Numerical laboratory for constant sigma_2 curvature metrics with conic
//! singularities on S^4.

pub mod constants;
pub mod divisor;
pub mod field;
pub mod isoperimetry;
pub mod levelset;
pub mod optimize;
pub mod quadrature;
pub mod radial;

pub use constants::{CAPACITY_CEILING, OMEGA1, S3_AREA};
pub use divisor::{
    analyze_sequence, classify, classify_exact, ConformalDivisor, Criticality, CriticalityReport,
    DivisorReport, SequenceReport,
};
pub use radial::{radial_levelsets, LevelRow, RadialSolution};
pub use field::{EquationClass, RadialField, ScalarField4D};
pub use levelset::{
    analytic_table, coarea_table, verify_identities, BinSpec, CheckId, CoareaOptions, GridSpec, LevelCurveTable,
    Tolerances, VerificationReport,
};
pub use isoperimetry::{fraenkel_asymmetry, AsymmetryOptions, AsymmetryReport, SphereRule, StarShapedSet};
