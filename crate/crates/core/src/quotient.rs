//! Generalized Rayleigh quotient `Q(u) = <F(u), u> / <G(u), u>` and its
//! infimum over the unit sphere of the denominator-natural norm.

use serde::{Deserialize, Serialize};

use crate::descent::{DescentOutcome, Energy, RatioProblem};
use crate::error::{Error, Result};
use crate::grid::{gradient, lp_norm, GridFunction, Mesh};
use crate::operators::OperatorSpec;
use crate::scaling::{classify_pair, PairClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    LaplacianEigenfunction,
    Random,
    Supplied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeConfig {
    pub max_iter: usize,
    /// Stop once the relative quotient change stays below this.
    pub rel_tol: f64,
    /// Bound on the eigen-residual for pairs whose quotient is variational.
    pub residual_tol: f64,
    pub seed: u64,
    pub init: InitKind,
    /// Independent descents; the smallest value wins.
    pub restarts: usize,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        MinimizeConfig {
            max_iter: 5000,
            rel_tol: 1e-10,
            residual_tol: 1e-7,
            seed: 0,
            init: InitKind::LaplacianEigenfunction,
            restarts: 3,
        }
    }
}

impl MinimizeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", 0.0, "max_iter >= 1"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::param("rel_tol", self.rel_tol, "tolerance > 0"));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::param("residual_tol", self.residual_tol, "tolerance > 0"));
        }
        if self.restarts == 0 {
            return Err(Error::param("restarts", 0.0, "restarts >= 1"));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone)]
pub struct QuotientProblem {
    f: OperatorSpec,
    g: OperatorSpec,
    mesh: Mesh,
    normalization_exponent: f64,
}

impl QuotientProblem {
    /// Validates both operators on the mesh and checks that `G` pairs
    /// positively with the ground-state probe.
    pub fn new(f: OperatorSpec, g: OperatorSpec, mesh: Mesh) -> Result<Self> {
        f.validate_on(&mesh)?;
        g.validate_on(&mesh)?;
        let probe = GridFunction::ground_state(mesh);
        let d = g.pairing(&probe, &probe)?;
        if !(d > 0.0) {
            return Err(Error::DegenerateDenominator(d));
        }
        Ok(QuotientProblem {
            normalization_exponent: g.natural_norm_exponent(),
            f,
            g,
            mesh,
        })
    }

    pub fn with_normalization(mut self, exponent: f64) -> Result<Self> {
        if !(exponent >= 1.0) || !exponent.is_finite() {
            return Err(Error::param("normalization_norm", exponent, "exponent >= 1"));
        }
        self.normalization_exponent = exponent;
        Ok(self)
    }

    pub fn f(&self) -> &OperatorSpec {
        &self.f
    }

    pub fn g(&self) -> &OperatorSpec {
        &self.g
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn normalization_exponent(&self) -> f64 {
        self.normalization_exponent
    }

    pub fn classification(&self) -> PairClass {
        classify_pair(&self.f, &self.g)
    }

    fn ratio_problem(&self) -> RatioProblem {
        RatioProblem {
            num: Energy::Pairing(self.f),
            den: Energy::Pairing(self.g),
            mesh: self.mesh,
            sphere_exponent: self.normalization_exponent,
        }
    }

    pub fn evaluate(&self, u: &GridFunction) -> Result<f64> {
        if u.mesh() != &self.mesh {
            return Err(Error::MeshMismatch);
        }
        self.ratio_problem().ratio(u)
    }

    /// Euclidean gradient of `Q` with respect to the nodal values (the
    /// first variation paired with the unit vectors).
    pub fn first_variation(&self, u: &GridFunction) -> Result<Vec<f64>> {
        if u.mesh() != &self.mesh {
            return Err(Error::MeshMismatch);
        }
        Ok(self.ratio_problem().ratio_gradient(u)?.1)
    }

    /// `||F(u) - lambda G(u)||_2 / ||F(u)||_2`.
    pub fn eigen_residual(&self, lambda: f64, u: &GridFunction) -> Result<f64> {
        let fu = self.f.apply(u)?;
        let gu = self.g.apply(u)?;
        let r = fu.sub(&gu.scaled(lambda))?;
        Ok(r.norm_l2() / fu.norm_l2().max(f64::MIN_POSITIVE))
    }

    pub fn minimize(&self, config: &MinimizeConfig) -> Result<EigenResult> {
        let outcome = self.ratio_problem().minimize(config, None)?;
        self.finish(outcome)
    }

    pub fn minimize_from(&self, config: &MinimizeConfig, init: &GridFunction) -> Result<EigenResult> {
        let outcome = self.ratio_problem().minimize(config, Some(init))?;
        self.finish(outcome)
    }

    fn finish(&self, out: DescentOutcome) -> Result<EigenResult> {
        let residual = self.eigen_residual(out.value, &out.u)?;
        Ok(EigenResult {
            lambda: out.value,
            residual,
            stationarity: out.stationarity,
            iterations: out.iterations,
            converged: out.converged,
            ray_dependent: self.classification() != PairClass::Matched,
            best_restart: out.restart,
            history: out.history,
            minimizer: out.u,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenResult {
    /// Smallest quotient value found (power form).
    pub lambda: f64,
    #[serde(serialize_with = "serialize_values")]
    pub minimizer: GridFunction,
    /// `||F(u) - lambda G(u)||_2 / ||F(u)||_2` at the minimizer.
    pub residual: f64,
    /// Norm of the sphere gradient relative to its starting value.
    pub stationarity: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the pairing degrees differ and the value depends on the
    /// normalization radius.
    pub ray_dependent: bool,
    pub best_restart: usize,
    pub history: Vec<f64>,
}

fn serialize_values<S: serde::Serializer>(u: &GridFunction, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(u.values())
}

pub fn evaluate_quotient(problem: &QuotientProblem, u: &GridFunction) -> Result<f64> {
    problem.evaluate(u)
}

pub fn minimize_quotient(problem: &QuotientProblem, config: &MinimizeConfig) -> Result<EigenResult> {
    problem.minimize(config)
}

/// `lambda_{p0,p1}` in both bookkeeping forms.
#[derive(Debug, Clone, Serialize)]
pub struct FirstSpectrum {
    pub p0: f64,
    pub p1: f64,
    /// Infimum of `||grad u||_p^p / int |u|^p0 |grad u|^p1`.
    pub lambda_power: f64,
    /// `lambda_power^(1/p)`.
    pub lambda_root: f64,
    /// `||grad u||_p [int |u|^p0 |grad u|^p1]^(-1/p)` evaluated directly at the
    /// minimizer.
    pub direct_root: f64,
    pub result: EigenResult,
}

pub fn lambda_p0p1(p0: f64, p1: f64, mesh: Mesh, config: &MinimizeConfig) -> Result<FirstSpectrum> {
    let p = p0 + p1;
    let f = OperatorSpec::p_laplacian(p)?;
    let g = OperatorSpec::grad_weighted_power(p0, p1)?;
    let problem = QuotientProblem::new(f, g, mesh)?;
    let result = problem.minimize(config)?;
    let u = &result.minimizer;
    let grad_norm = lp_norm(&gradient(u), p)?;
    let weighted = g.pairing(u, u)?;
    Ok(FirstSpectrum {
        p0,
        p1,
        lambda_power: result.lambda,
        lambda_root: result.lambda.powf(1.0 / p),
        direct_root: grad_norm * weighted.powf(-1.0 / p),
        result,
    })
}

/// `v = |u|^((p-2)/2) u`, nodewise.
pub fn substitution_transform(u: &GridFunction, p: f64) -> Result<GridFunction> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::param("p", p, "p >= 2"));
    }
    let e = 0.5 * (p - 2.0);
    Ok(u.map(|x| if e == 0.0 { x } else { x.abs().powf(e) * x }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probes::{random_nodal, rng};
    use std::f64::consts::PI;

    fn linear_problem(mesh: Mesh) -> QuotientProblem {
        QuotientProblem::new(
            OperatorSpec::p_laplacian(2.0).unwrap(),
            OperatorSpec::power_identity(2.0).unwrap(),
            mesh,
        )
        .unwrap()
    }

    #[test]
    fn sine_quotient_is_pi_squared() {
        let mesh = Mesh::unit_interval(256).unwrap();
        let q = linear_problem(mesh).evaluate(&GridFunction::ground_state(mesh)).unwrap();
        assert!((q - PI * PI).abs() / (PI * PI) < 1e-2);
    }

    #[test]
    fn zero_and_foreign_inputs_are_rejected() {
        let mesh = Mesh::unit_interval(16).unwrap();
        let problem = linear_problem(mesh);
        assert_eq!(problem.evaluate(&GridFunction::zeros(mesh)), Err(Error::ZeroFunction));
        let other = GridFunction::ground_state(Mesh::unit_interval(17).unwrap());
        assert_eq!(problem.evaluate(&other), Err(Error::MeshMismatch));
    }

    #[test]
    fn quotient_unfolds_to_grid_primitives() {
        let mesh = Mesh::unit_interval(40).unwrap();
        let (p0, p1) = (2.5, 1.5);
        let p = p0 + p1;
        let problem = QuotientProblem::new(
            OperatorSpec::p_laplacian(p).unwrap(),
            OperatorSpec::grad_weighted_power(p0, p1).unwrap(),
            mesh,
        )
        .unwrap();
        let u = random_nodal(mesh, &mut rng(11), 1.0);
        let num = lp_norm(&gradient(&u), p).unwrap().powf(p);
        // nodal |grad u|^p1: mean over the two adjacent edges
        let g = gradient(&u);
        let mags = g.magnitudes();
        let h = mesh.spacing()[0];
        let den: f64 = u
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| h * v.abs().powf(p0) * 0.5 * (mags[i].powf(p1) + mags[i + 1].powf(p1)))
            .sum();
        let q = problem.evaluate(&u).unwrap();
        assert!((q - num / den).abs() <= 1e-12 * q);
    }

    #[test]
    fn substitution_cases() {
        let mesh = Mesh::unit_interval(9).unwrap();
        let u = random_nodal(mesh, &mut rng(12), 2.0);
        assert_eq!(substitution_transform(&u, 2.0).unwrap(), u);
        let pos = u.map(f64::abs);
        let v = substitution_transform(&pos, 4.0).unwrap();
        for (a, b) in v.values().iter().zip(pos.values()) {
            assert!((a - b * b).abs() <= 1e-14 * b * b);
        }
        let v = substitution_transform(&u, 3.3).unwrap();
        for (a, b) in v.values().iter().zip(u.values()) {
            assert_eq!(a.signum(), b.signum());
        }
        assert!(substitution_transform(&u, 1.5).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = MinimizeConfig::default();
        assert!(c.validate().is_ok());
        c.rel_tol = 0.0;
        assert!(c.validate().is_err());
        let c = MinimizeConfig {
            max_iter: 0,
            ..MinimizeConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
