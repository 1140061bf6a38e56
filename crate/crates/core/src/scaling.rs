//! Ray scans of the generalized quotient and the matched/unmatched degree
//! classification of operator pairs.
//!
//! Along a ray `r -> r u0` the quotient scales as `r^s` with
//! `s = pairing_degree(F) - pairing_degree(G)`. The radius at which a fixed
//! eigen-relation holds moves with the opposite exponent, `p_G - p_F`; both
//! are reported.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::operators::OperatorSpec;
use crate::quotient::QuotientProblem;

/// Quotient exponents below this magnitude count as zero.
pub const ELEMENT_INDEPENDENCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    /// Log of the prefactor.
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
}

/// Ordinary least squares of `log y` against `log x`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument(
            "power-law fit needs at least two (x, y) pairs".into(),
        ));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "power-law fit needs strictly positive finite data".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("abscissae must not all coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let residual = (lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - exponent * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(PowerLawFit {
        exponent,
        intercept,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairClass {
    /// Equal pairing degrees: the quotient is constant along rays.
    Matched,
    /// `p_F > p_G`.
    FDominantScaling,
    /// `p_F < p_G`.
    GDominantScaling,
}

pub fn classify_pair(f: &OperatorSpec, g: &OperatorSpec) -> PairClass {
    let df = f.homogeneity_degree().pairing_degree;
    let dg = g.homogeneity_degree().pairing_degree;
    if df == dg {
        PairClass::Matched
    } else if df > dg {
        PairClass::FDominantScaling
    } else {
        PairClass::GDominantScaling
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    /// Fitted `s` in `Q(r u) = r^s Q(u)`.
    pub quotient_exponent: f64,
    /// `pairing_degree(F) - pairing_degree(G)`.
    pub predicted_exponent: f64,
    /// Exponent of `lambda(r) = lambda_0 r^(p_G - p_F)`, i.e. `-s`.
    pub eigen_radius_exponent: f64,
    pub element_independent: bool,
    pub classification: PairClass,
    pub fit_residual: f64,
    /// `(radius, quotient)` samples.
    pub samples: Vec<(f64, f64)>,
}

pub fn ray_scan(problem: &QuotientProblem, u0: &GridFunction, radii: &[f64]) -> Result<ScalingReport> {
    if u0.is_zero() {
        return Err(Error::ZeroFunction);
    }
    if radii.len() < 3 || radii.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
        return Err(Error::InvalidArgument(
            "ray scan needs at least three positive radii".into(),
        ));
    }
    let lo = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = radii.iter().cloned().fold(0.0, f64::max);
    if hi < 10.0 * lo * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument(
            "ray scan radii must span at least one decade".into(),
        ));
    }
    let mut samples = Vec::with_capacity(radii.len());
    for &r in radii {
        let q = problem.evaluate(&u0.scaled(r))?;
        samples.push((r, q));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let fit = loglog_fit(&xs, &ys)?;
    let predicted = problem.f().homogeneity_degree().pairing_degree
        - problem.g().homogeneity_degree().pairing_degree;
    Ok(ScalingReport {
        quotient_exponent: fit.exponent,
        predicted_exponent: predicted,
        eigen_radius_exponent: -fit.exponent,
        element_independent: fit.exponent.abs() <= ELEMENT_INDEPENDENCE_TOL,
        classification: classify_pair(problem.f(), problem.g()),
        fit_residual: fit.residual,
        samples,
    })
}

/// Eigenvalue carried along a ray: if `F(u) = lambda G(u)` then
/// `F(r u) = lambda r^(d_F - d_G) G(r u)` in operator degrees.
pub fn ray_eigenvalue(lambda: f64, f: &OperatorSpec, g: &OperatorSpec, r: f64) -> f64 {
    let df = f.homogeneity_degree().operator_degree;
    let dg = g.homogeneity_degree().operator_degree;
    lambda * r.powf(df - dg)
}
