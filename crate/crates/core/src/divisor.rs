//! Conformal divisors `D = sum beta_i p_i` on S^4 and the arithmetic that
//! classifies them for the sigma_2 problem.
//!
//! Indices in this module are zero-based; `j` selects the marked point whose
//! cone parameter is compared against the cube-root aggregate of the others.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DivisorError {
    #[error("cone parameter beta_{index} = {value} is not admissible (must be finite and > -1)")]
    InadmissibleBeta { index: usize, value: f64 },
    #[error("point index {index} out of range for a divisor with {len} points")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("classification tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("sequence is empty")]
    EmptySequence,
    #[error("divisor {position} has {found} points, expected {expected}")]
    MismatchedPointCount {
        position: usize,
        expected: usize,
        found: usize,
    },
    #[error("sequence margin eps must be positive, got {0}")]
    BadMargin(f64),
    #[error("cannot parse {0:?} as an exact rational")]
    Parse(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Cone parameters attached to marked points of S^4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalDivisor {
    betas: Vec<f64>,
    labels: Vec<String>,
}

impl ConformalDivisor {
    pub fn new(betas: Vec<f64>) -> Result<Self, DivisorError> {
        let labels = (1..=betas.len()).map(|i| format!("p{i}")).collect();
        Self::with_labels(betas, labels)
    }

    pub fn with_labels(betas: Vec<f64>, labels: Vec<String>) -> Result<Self, DivisorError> {
        for (index, &value) in betas.iter().enumerate() {
            if !value.is_finite() || value <= -1.0 {
                return Err(DivisorError::InadmissibleBeta { index, value });
            }
        }
        assert_eq!(betas.len(), labels.len(), "one label per marked point");
        Ok(Self { betas, labels })
    }

    /// The round sphere: no marked points.
    pub fn empty() -> Self {
        Self {
            betas: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    /// Indices whose parameter lies outside `(-1, 0]`. Such divisors are
    /// classified normally but cannot be realized by radial constructions.
    pub fn out_of_range_points(&self) -> Vec<usize> {
        self.betas
            .iter()
            .enumerate()
            .filter(|(_, &b)| b > 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    fn check_index(&self, j: usize) -> Result<(), DivisorError> {
        if j >= self.betas.len() {
            Err(DivisorError::IndexOutOfRange {
                index: j,
                len: self.betas.len(),
            })
        } else {
            Ok(())
        }
    }

    /// Real cube root of `sum_{i != j} beta_i^3`.
    pub fn beta_tilde(&self, j: usize) -> Result<f64, DivisorError> {
        self.check_index(j)?;
        let s: f64 = self
            .betas
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != j)
            .map(|(_, b)| b * b * b)
            .sum();
        Ok(s.cbrt())
    }

    /// `G(D, j)`; the divisor violates the subcritical inequality at `j`
    /// exactly when this is non-negative.
    pub fn criticality_gap(&self, j: usize) -> Result<f64, DivisorError> {
        let bt = self.beta_tilde(j)?;
        let bj = self.betas[j];
        let others_sq: f64 = self
            .betas
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != j)
            .map(|(_, b)| b * b)
            .sum();
        Ok(cone_energy(bj) - cone_energy(bt) - (bt + 1.5) * (others_sq - bt * bt))
    }

    pub fn gaps(&self) -> Vec<f64> {
        (0..self.len())
            .map(|j| self.criticality_gap(j).expect("index in range"))
            .collect()
    }

    /// `(1/|S^3|) * integral of e^{4u}` forced by `sigma_2 = 3/2`:
    /// `(2/3)(2 - sum (beta^3 + 3 beta^2)/2)`.
    pub fn normalized_total_volume(&self) -> f64 {
        2.0 / 3.0 * self.euler_defect()
    }

    /// `2 - sum (beta_i^3 + 3 beta_i^2)/2`, the non-degeneracy quantity.
    pub fn euler_defect(&self) -> f64 {
        2.0 - self
            .betas
            .iter()
            .map(|b| (b * b * b + 3.0 * b * b) / 2.0)
            .sum::<f64>()
    }

    /// Exact rational image of the parameters, read through their shortest
    /// round-trip decimal form (so `-0.1` becomes `-1/10`).
    pub fn to_exact(&self) -> ExactDivisor {
        ExactDivisor {
            betas: self
                .betas
                .iter()
                .map(|b| parse_rational(&format!("{b}")).expect("float formatting is decimal"))
                .collect(),
        }
    }
}

/// `(3/8) b^2 (b + 2)^2`.
#[inline]
fn cone_energy(b: f64) -> f64 {
    let s = b * (b + 2.0);
    0.375 * s * s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criticality {
    Subcritical,
    Critical,
    Supercritical,
}

impl fmt::Display for Criticality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criticality::Subcritical => "subcritical",
            Criticality::Critical => "critical",
            Criticality::Supercritical => "supercritical",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassificationMethod {
    Float,
    ExactRational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalityReport {
    pub gaps: Vec<f64>,
    pub class: Criticality,
    pub tolerance: f64,
    pub method: ClassificationMethod,
}

impl CriticalityReport {
    pub fn max_gap(&self) -> Option<f64> {
        self.gaps.iter().copied().reduce(f64::max)
    }
}

/// Float classification. Any gap above `tol` makes the divisor
/// supercritical, even when another index attains equality.
pub fn classify(divisor: &ConformalDivisor, tol: f64) -> Result<CriticalityReport, DivisorError> {
    if !(tol > 0.0) {
        return Err(DivisorError::BadTolerance(tol));
    }
    let gaps = divisor.gaps();
    let class = match gaps.iter().copied().reduce(f64::max) {
        None => Criticality::Subcritical,
        Some(g) if g > tol => Criticality::Supercritical,
        Some(g) if g.abs() <= tol => Criticality::Critical,
        Some(_) => Criticality::Subcritical,
    };
    Ok(CriticalityReport {
        gaps,
        class,
        tolerance: tol,
        method: ClassificationMethod::Float,
    })
}

/// Exact classification through [`ExactDivisor`]; gaps are still reported in
/// floating point.
pub fn classify_exact(divisor: &ConformalDivisor) -> CriticalityReport {
    let exact = divisor.to_exact();
    let signs: Vec<Ordering> = (0..exact.len()).map(|j| exact.gap_sign(j)).collect();
    let class = if signs.contains(&Ordering::Greater) {
        Criticality::Supercritical
    } else if signs.contains(&Ordering::Equal) {
        Criticality::Critical
    } else {
        Criticality::Subcritical
    };
    CriticalityReport {
        gaps: (0..exact.len()).map(|j| exact.gap_f64(j)).collect(),
        class,
        tolerance: 0.0,
        method: ClassificationMethod::ExactRational,
    }
}

/// Divisor with rational cone parameters.
///
/// Writing `c = beta_tilde_j` with `c^3 = s` rational, the gap collapses to
/// `G = X - c Y` with `X = (3/8) b_j^2 (b_j+2)^2 - s/2 - (3/2) P`,
/// `Y = (3/8) s + P` and `P = sum_{i != j} b_i^2`, so its sign is the sign of
/// `X^3 - s Y^3`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDivisor {
    betas: Vec<BigRational>,
}

impl ExactDivisor {
    pub fn new(betas: Vec<BigRational>) -> Self {
        Self { betas }
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn betas(&self) -> &[BigRational] {
        &self.betas
    }

    fn parts(&self, j: usize) -> (BigRational, BigRational, BigRational) {
        let mut s = BigRational::zero();
        let mut p = BigRational::zero();
        for (i, b) in self.betas.iter().enumerate() {
            if i != j {
                let b2 = b * b;
                s += &b2 * b;
                p += b2;
            }
        }
        let bj = &self.betas[j];
        let q = bj * (bj + rat(2, 1));
        let energy = rat(3, 8) * &q * &q;
        let x = energy - &s * rat(1, 2) - &p * rat(3, 2);
        let y = &s * rat(3, 8) + p;
        (x, y, s)
    }

    /// Exact sign of `G(D, j)`.
    pub fn gap_sign(&self, j: usize) -> Ordering {
        let (x, y, s) = self.parts(j);
        let lhs = &x * &x * &x;
        let rhs = &s * &y * &y * &y;
        lhs.cmp(&rhs)
    }

    /// `G(D, j) = X - cbrt(s) Y` with exact `X`, `Y`.
    pub fn gap_f64(&self, j: usize) -> f64 {
        let (x, y, s) = self.parts(j);
        to_f64(&x) - to_f64(&s).cbrt() * to_f64(&y)
    }
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn to_f64(r: &BigRational) -> f64 {
    // Plain numerator/denominator division is accurate enough for values
    // whose parts fit comfortably in f64 range, which holds for decimal input.
    let n: f64 = r.numer().to_string().parse().unwrap_or(f64::NAN);
    let d: f64 = r.denom().to_string().parse().unwrap_or(f64::NAN);
    if n.is_finite() && d.is_finite() {
        n / d
    } else {
        // Fall back to scaled long division for very large parts.
        let scale = BigInt::from(10u8).pow(30);
        let q = (r.numer() * &scale) / r.denom();
        q.to_string().parse::<f64>().unwrap_or(f64::NAN) / 1e30
    }
}

/// Parses `-0.125`, `3e-2`, `7/8` or `-2` as an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational, DivisorError> {
    let err = || DivisorError::Parse(text.to_string());
    let t = text.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| err())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(pos) => (&t[..pos], t[pos + 1..].parse::<i32>().map_err(|_| err())?),
        None => (t, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut numer = BigInt::from_str(if all_digits.is_empty() { "0" } else { &all_digits }).map_err(|_| err())?;
    if negative {
        numer = -numer;
    }
    let shift = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u8);
    let value = if shift >= 0 {
        BigRational::from_integer(numer * ten.pow(shift as u32))
    } else {
        BigRational::new(numer, ten.pow((-shift) as u32))
    };
    Ok(value)
}

/// Machine-readable classification summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisorReport {
    pub betas: Vec<f64>,
    pub gaps: Vec<f64>,
    pub class: Criticality,
    #[serde(rename = "V")]
    pub volume: f64,
}

impl DivisorReport {
    pub fn new(divisor: &ConformalDivisor, report: &CriticalityReport) -> Self {
        Self {
            betas: divisor.betas().to_vec(),
            gaps: report.gaps.clone(),
            class: report.class,
            volume: divisor.normalized_total_volume(),
        }
    }
}

/// One element of an analyzed divisor sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRow {
    /// 1-based position in the sequence.
    pub l: usize,
    pub betas: Vec<f64>,
    pub gap: f64,
    pub nondegen_const: f64,
    pub beta_tilde: f64,
    pub beta_tilde_margin_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub index: usize,
    pub eps: f64,
    pub rows: Vec<SequenceRow>,
    pub limit_betas: Vec<f64>,
    pub limit_abs_sum: f64,
    /// Largest parameter change between the last two elements.
    pub cauchy_increment: f64,
    pub gap_nonincreasing: bool,
    pub min_nondegen_const: f64,
    /// `beta_tilde_{l,j} > -1 + eps` for every element.
    pub beta_tilde_margin_ok: bool,
    /// Every parameter of every element stays above `-1 + eps`.
    pub admissibility_margin_ok: bool,
}

impl SequenceReport {
    pub fn flagged(&self) -> bool {
        !(self.beta_tilde_margin_ok && self.admissibility_margin_ok)
    }

    pub fn final_gap(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.gap)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DivisorError> {
        let mut w = csv::Writer::from_writer(out);
        let q = self.limit_betas.len();
        let mut header = vec!["l".to_string()];
        header.extend((1..=q).map(|i| format!("beta_{i}")));
        header.push("gap_j".into());
        header.push("nondegen_const".into());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.l.to_string()];
            rec.extend(row.betas.iter().map(|b| format!("{b}")));
            rec.push(format!("{}", row.gap));
            rec.push(format!("{}", row.nondegen_const));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Gap, non-degeneracy and margin diagnostics along a finite divisor
/// sequence. The limit is read off the last element.
pub fn analyze_sequence(
    seq: &[ConformalDivisor],
    j: usize,
    eps: f64,
) -> Result<SequenceReport, DivisorError> {
    if !(eps > 0.0) {
        return Err(DivisorError::BadMargin(eps));
    }
    let first = seq.first().ok_or(DivisorError::EmptySequence)?;
    let q = first.len();
    for (position, d) in seq.iter().enumerate() {
        if d.len() != q {
            return Err(DivisorError::MismatchedPointCount {
                position,
                expected: q,
                found: d.len(),
            });
        }
    }
    first.check_index(j)?;
    let floor = -1.0 + eps;
    let rows: Vec<SequenceRow> = seq
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let beta_tilde = d.beta_tilde(j).expect("checked index");
            SequenceRow {
                l: i + 1,
                betas: d.betas().to_vec(),
                gap: d.criticality_gap(j).expect("checked index"),
                nondegen_const: d.euler_defect(),
                beta_tilde,
                beta_tilde_margin_ok: beta_tilde > floor,
            }
        })
        .collect();
    let last = seq.last().expect("non-empty");
    let cauchy_increment = if seq.len() >= 2 {
        let prev = &seq[seq.len() - 2];
        last.betas()
            .iter()
            .zip(prev.betas())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    Ok(SequenceReport {
        index: j,
        eps,
        limit_betas: last.betas().to_vec(),
        limit_abs_sum: last.betas().iter().map(|b| b.abs()).sum(),
        cauchy_increment,
        gap_nonincreasing: rows.windows(2).all(|w| w[1].gap.abs() <= w[0].gap.abs()),
        min_nondegen_const: rows.iter().map(|r| r.nondegen_const).fold(f64::INFINITY, f64::min),
        beta_tilde_margin_ok: rows.iter().all(|r| r.beta_tilde_margin_ok),
        admissibility_margin_ok: seq.iter().all(|d| d.betas().iter().all(|&b| b > floor)),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(b: &[f64]) -> ConformalDivisor {
        ConformalDivisor::new(b.to_vec()).unwrap()
    }

    #[test]
    fn beta_tilde_is_real_cube_root() {
        assert_eq!(d(&[-0.5, -0.9]).beta_tilde(1).unwrap(), -0.5);
        let bt = d(&[-0.2, -0.2, -0.2]).beta_tilde(0).unwrap();
        assert!((bt - (-0.016f64).cbrt()).abs() < 1e-15);
        assert!(bt < 0.0);
        assert!(matches!(
            ConformalDivisor::empty().beta_tilde(0),
            Err(DivisorError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn gap_matches_split_form() {
        for betas in [[-0.5, -0.9, -0.1], [-0.2, -0.2, -0.2], [-0.7, -0.05, -0.33]] {
            let div = d(&betas);
            let ex = div.to_exact();
            for j in 0..3 {
                let g = div.criticality_gap(j).unwrap();
                assert!((g - ex.gap_f64(j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_sign_detects_equality() {
        let ex = d(&[-0.5, -0.5]).to_exact();
        assert_eq!(ex.gap_sign(0), Ordering::Equal);
        assert_eq!(classify_exact(&d(&[-0.5, -0.5])).class, Criticality::Critical);
        assert_eq!(classify_exact(&ConformalDivisor::empty()).class, Criticality::Subcritical);
    }

    #[test]
    fn rejects_inadmissible() {
        assert!(ConformalDivisor::new(vec![-1.0]).is_err());
        assert!(ConformalDivisor::new(vec![f64::NAN]).is_err());
        assert_eq!(d(&[0.3, -0.2]).out_of_range_points(), vec![0]);
        assert!(classify(&d(&[-0.5]), 0.0).is_err());
    }

    #[test]
    fn parses_rationals() {
        let r = parse_rational("-0.125").unwrap();
        assert_eq!(r, rat(-1, 8));
        assert_eq!(parse_rational("3/6").unwrap(), rat(1, 2));
        assert_eq!(parse_rational("2.5e-1").unwrap(), rat(1, 4));
        assert_eq!(parse_rational("1E2").unwrap(), rat(100, 1));
        assert_eq!(parse_rational(".5").unwrap(), rat(1, 2));
        for bad in ["", "-", "1/0", "abc", "1.2.3", "--1"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn sequence_csv_layout() {
        let seq: Vec<_> = (1..=3).map(|l| d(&[-0.5, -0.5, -0.1 / l as f64])).collect();
        let rep = analyze_sequence(&seq, 0, 1e-3).unwrap();
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("l,beta_1,beta_2,beta_3,gap_j,nondegen_const\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
