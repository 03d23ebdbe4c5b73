//! Geometric constants of the unit 3-sphere in R^4.

use std::f64::consts::PI;

/// Area of the unit 3-sphere, `2 pi^2`.
pub const S3_AREA: f64 = 2.0 * PI * PI;

/// Volume of the unit 4-ball, `|S^3| / 4`.
pub const OMEGA1: f64 = S3_AREA / 4.0;

/// Upper bound on `C(t) = e^{4t}|{u >= t}|/|S^3|` for solutions with cone
/// parameters in `(-1, 0]`.
pub const CAPACITY_CEILING: f64 = 4.0 / 3.0;

/// Normalized mean over a surface: `(1/|S^3|) * integral`.
#[inline]
pub fn normalized(integral: f64) -> f64 {
    integral / S3_AREA
}
