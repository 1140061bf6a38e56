//! Numerical checks of the identities and inequalities relating the
//! relative first eigenvalues of the catalog operators.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::descent::{norm, Energy, LinearMap, RatioProblem};
use crate::error::{Error, Result};
use crate::grid::{gradient, lp_norm, neg_laplacian, GridFunction, Mesh};
use crate::linalg::PoissonSolver;
use crate::operators::OperatorSpec;
use crate::probes;
use crate::quotient::{lambda_p0p1, MinimizeConfig, QuotientProblem};

const PROP1_TOL: f64 = 0.02;
const ORDERING_SLACK: f64 = 1e-6;
const POWER_TOL: f64 = 1e-6;
const HOLDER_SLACK: f64 = 1e-12;
const COERCIVITY_SLACK: f64 = 1e-9;
const PROBE_COUNT: usize = 100;
const PROBE_MODES: usize = 8;
const POWER_ITER_MAX: usize = 500;
const POWER_ITER_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Equal,
    Geq,
    Leq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceKind {
    Absolute,
    Relative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub p: f64,
    pub p0: Option<f64>,
    pub p1: Option<f64>,
    pub mesh: Mesh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub relation: Relation,
    pub tolerance: f64,
    pub tolerance_kind: ToleranceKind,
    pub passed: bool,
    /// Every minimization behind `lhs` and `rhs` met its stopping rule.
    pub converged: bool,
    pub provenance: Provenance,
    /// Auxiliary quantities, report only.
    pub extras: BTreeMap<String, f64>,
}

impl RelationReport {
    fn new(
        name: &str,
        lhs: f64,
        rhs: f64,
        relation: Relation,
        tolerance: f64,
        tolerance_kind: ToleranceKind,
        provenance: Provenance,
    ) -> Self {
        RelationReport {
            name: name.to_string(),
            passed: holds(lhs, rhs, relation, tolerance, tolerance_kind),
            lhs,
            rhs,
            relation,
            tolerance,
            tolerance_kind,
            converged: true,
            provenance,
            extras: BTreeMap::new(),
        }
    }

    fn extra(mut self, key: &str, value: f64) -> Self {
        self.extras.insert(key.to_string(), value);
        self
    }

    fn converged_if(mut self, ok: bool) -> Self {
        self.converged &= ok;
        self
    }
}

/// Whether `lhs relation rhs` holds within the tolerance; relative
/// tolerances scale with `|rhs|`.
pub fn holds(lhs: f64, rhs: f64, relation: Relation, tolerance: f64, kind: ToleranceKind) -> bool {
    if !lhs.is_finite() || !rhs.is_finite() {
        return false;
    }
    let slack = match kind {
        ToleranceKind::Absolute => tolerance,
        ToleranceKind::Relative => tolerance * rhs.abs(),
    };
    match relation {
        Relation::Equal => (lhs - rhs).abs() <= slack,
        Relation::Geq => lhs >= rhs - slack,
        Relation::Leq => lhs <= rhs + slack,
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::param("p", p, "p >= 2"));
    }
    Ok(())
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn ratio_problem(num: Energy, den: Energy, mesh: Mesh, sphere_exponent: f64) -> RatioProblem {
    RatioProblem {
        num,
        den,
        mesh,
        sphere_exponent,
    }
}

fn lap_norm(p: f64, power: f64) -> Energy {
    Energy::NormPower {
        map: LinearMap::NegLaplacian,
        p,
        power,
    }
}

fn id_norm(p: f64, power: f64) -> Energy {
    Energy::NormPower {
        map: LinearMap::Identity,
        p,
        power,
    }
}

fn grad_norm(p: f64, power: f64) -> Energy {
    Energy::NormPower {
        map: LinearMap::Gradient,
        p,
        power,
    }
}

/// `inf ||grad v||_2 / ||v||_2` by inverse power iteration on the discrete
/// Dirichlet Laplacian.
pub fn linear_first_eigenvalue(mesh: Mesh) -> Result<f64> {
    let solver = PoissonSolver::new(mesh);
    let mut rng = probes::rng(0);
    let mut v = probes::perturbed_ground_state(mesh, &mut rng, 0.1);
    let mut prev = f64::INFINITY;
    for _ in 0..POWER_ITER_MAX {
        let w = solver.solve(&v)?;
        let nrm = w.norm_l2();
        if !(nrm > 0.0) || !nrm.is_finite() {
            return Err(Error::NoConvergence("inverse power iteration collapsed".into()));
        }
        v = w.scaled(1.0 / nrm);
        let rq = gradient(&v).dot(&gradient(&v))? / v.dot(&v)?;
        if (prev - rq).abs() <= POWER_ITER_TOL * rq {
            return Ok(rq.sqrt());
        }
        prev = rq;
    }
    Err(Error::NoConvergence(format!(
        "inverse power iteration did not settle in {POWER_ITER_MAX} steps"
    )))
}

/// `inf int |u|^(p-2)|grad u|^2 / int |u|^p` against `((2/p) lambda_1)^2`.
pub fn verify_prop1_part2(p: f64, mesh: Mesh, config: &MinimizeConfig) -> Result<RelationReport> {
    check_p(p)?;
    let problem = QuotientProblem::new(
        OperatorSpec::density_diffusion(p)?,
        OperatorSpec::power_identity(p)?,
        mesh,
    )?;
    let res = problem.minimize(config)?;
    let lin = linear_first_eigenvalue(mesh)?;
    let rhs = (2.0 / p * lin).powi(2);
    let lhs = res.lambda;
    Ok(RelationReport::new(
        "density_substitution",
        lhs,
        rhs,
        Relation::Equal,
        PROP1_TOL,
        ToleranceKind::Relative,
        Provenance {
            p,
            p0: Some(p),
            p1: None,
            mesh,
        },
    )
    .converged_if(res.converged)
    .extra("linear_first_eigenvalue", lin)
    .extra("lhs_minus_rhs", lhs - rhs)
    .extra("relative_discrepancy", (lhs - rhs) / rhs)
    .extra("stationarity", res.stationarity))
}

/// `lambda_{p0,p1} >= lambda_1(-Delta_p)`, both in root form.
pub fn verify_ineq_3_3(p0: f64, p1: f64, mesh: Mesh, config: &MinimizeConfig) -> Result<RelationReport> {
    let p = p0 + p1;
    check_p(p)?;
    if !(p0 > 0.0) {
        return Err(Error::param("p0", p0, "p0 > 0"));
    }
    let mixed = lambda_p0p1(p0, p1, mesh, config)?;
    let (base_root, base_power, base_ok) = if p1 == 0.0 {
        (mixed.lambda_root, mixed.lambda_power, mixed.result.converged)
    } else {
        let base = lambda_p0p1(p, 0.0, mesh, config)?;
        (base.lambda_root, base.lambda_power, base.result.converged)
    };
    // the Hölder-consistent ordering keeps the exponent p0/p
    let holder_bound = base_root.powf(p0 / p);
    Ok(RelationReport::new(
        "mixed_spectrum_ordering",
        mixed.lambda_root,
        base_root,
        Relation::Geq,
        ORDERING_SLACK,
        ToleranceKind::Absolute,
        Provenance {
            p,
            p0: Some(p0),
            p1: Some(p1),
            mesh,
        },
    )
    .converged_if(mixed.result.converged && base_ok)
    .extra("lhs_power", mixed.lambda_power)
    .extra("rhs_power", base_power)
    .extra("direct_root", mixed.direct_root)
    .extra("holder_bound", holder_bound)
    .extra("holder_bound_holds", flag(mixed.lambda_root >= holder_bound - ORDERING_SLACK)))
}

/// `inf ||Lu||_p^(p-1)/||u||_p^(p-1)` against `(inf ||Lu||_p/||u||_p)^(p-1)`
/// with `L` the negative Laplacian.
pub fn verify_fully_nonlinear_power(p: f64, mesh: Mesh, config: &MinimizeConfig) -> Result<RelationReport> {
    check_p(p)?;
    let powered = ratio_problem(lap_norm(p, p - 1.0), id_norm(p, p - 1.0), mesh, p);
    let plain = ratio_problem(lap_norm(p, 1.0), id_norm(p, 1.0), mesh, p);
    let a = powered.minimize(config, None)?;
    let b = plain.minimize(config, None)?;
    // both infima are taken over the same pooled candidate set
    let candidates = [&a.u, &b.u];
    let mut inf_powered = f64::INFINITY;
    let mut inf_plain = f64::INFINITY;
    for u in candidates {
        inf_powered = inf_powered.min(powered.ratio(u)?);
        inf_plain = inf_plain.min(plain.ratio(u)?);
    }
    let rhs = inf_plain.powf(p - 1.0);
    let doubled = powered.ratio(&a.u.scaled(2.0))?;
    Ok(RelationReport::new(
        "fully_nonlinear_power",
        inf_powered,
        rhs,
        Relation::Equal,
        POWER_TOL,
        ToleranceKind::Relative,
        Provenance {
            p,
            p0: None,
            p1: None,
            mesh,
        },
    )
    .converged_if(a.converged && b.converged)
    .extra("powered_minimum", a.value)
    .extra("plain_minimum", b.value)
    .extra("plain_minimum_raised", b.value.powf(p - 1.0))
    .extra("scale_change_at_2u", (doubled - a.value).abs() / a.value))
}

fn smooth_probes(mesh: Mesh, seed: u64, count: usize) -> Vec<GridFunction> {
    let mut rng = probes::rng(seed);
    (0..count)
        .map(|_| probes::random_smooth(mesh, &mut rng, PROBE_MODES))
        .collect()
}

/// `(p-1) inf ||Delta u||_p / ||grad u||_p`, compared with the bound
/// `(p-1)/c` where `c` is the largest probed `||grad u||_p / ||Delta u||_p`.
pub fn lambda_bilap_grad(p: f64, mesh: Mesh, config: &MinimizeConfig) -> Result<RelationReport> {
    check_p(p)?;
    let ratio = ratio_problem(lap_norm(p, 1.0), grad_norm(p, 1.0), mesh, p);
    let out = ratio.minimize(config, None)?;
    let value = (p - 1.0) * out.value;
    let mut c_est = 0.0f64;
    for u in smooth_probes(mesh, config.seed, PROBE_COUNT) {
        let c = norm(LinearMap::Gradient, p, &u) / norm(LinearMap::NegLaplacian, p, &u);
        if c.is_finite() {
            c_est = c_est.max(c);
        }
    }
    let rhs = (p - 1.0) / c_est;
    Ok(RelationReport::new(
        "bilap_grad",
        value,
        rhs,
        Relation::Leq,
        1e-9,
        ToleranceKind::Relative,
        Provenance {
            p,
            p0: None,
            p1: None,
            mesh,
        },
    )
    .converged_if(out.converged)
    .extra("ratio_minimum", out.value)
    .extra("c_estimate", c_est)
    .extra("paper_form_bound", (p - 1.0) * c_est)
    .extra("stationarity", out.stationarity))
}

/// `(1/(p-1)) ||Delta u||_p^p / (||u||_p^(p-2) ||grad u||_p^2)`.
fn holder_lower_bound(p: f64, u: &GridFunction) -> Result<f64> {
    let lap = lp_norm(&neg_laplacian(u), p)?.powf(p);
    let un = lp_norm(u, p)?;
    let gn = lp_norm(&gradient(u), p)?;
    Ok(lap / ((p - 1.0) * un.powf(p - 2.0) * gn * gn))
}

/// `(1/(p-1)) inf ||Delta u||_p^p / int |u|^(p-2)|grad u|^2` with the
/// Hölder lower bound checked at the minimizer and at seeded probes.
pub fn lambda_bilap_density(p: f64, mesh: Mesh, config: &MinimizeConfig) -> Result<RelationReport> {
    check_p(p)?;
    let density = OperatorSpec::density_diffusion(p)?;
    let ratio = ratio_problem(lap_norm(p, p), Energy::Pairing(density), mesh, p);
    let scaled = |u: &GridFunction| -> Result<f64> { Ok(ratio.ratio(u)? / (p - 1.0)) };
    let out = ratio.minimize(config, None)?;
    let value = out.value / (p - 1.0);
    let bound = holder_lower_bound(p, &out.u)?;

    let mut probe_min_slack = f64::INFINITY;
    let mut probes_ok = 0usize;
    let probes = smooth_probes(mesh, config.seed.wrapping_add(1), PROBE_COUNT);
    for u in &probes {
        let lhs = scaled(u)?;
        let rhs = holder_lower_bound(p, u)?;
        let slack = (lhs - rhs) / rhs.abs().max(f64::MIN_POSITIVE);
        probe_min_slack = probe_min_slack.min(slack);
        if slack >= -HOLDER_SLACK {
            probes_ok += 1;
        }
    }

    let aux = ratio_problem(lap_norm(p - 1.0, 1.0), id_norm(p - 1.0, 1.0), mesh, p - 1.0);
    let aux_value = aux.ratio(&out.u)?;
    let aux_min = aux.minimize(config, Some(&out.u)).map(|o| o.value).unwrap_or(aux_value);

    Ok(RelationReport::new(
        "bilap_density",
        value,
        bound,
        Relation::Geq,
        HOLDER_SLACK,
        ToleranceKind::Relative,
        Provenance {
            p,
            p0: Some(p),
            p1: None,
            mesh,
        },
    )
    .converged_if(out.converged)
    .extra("probe_count", probes.len() as f64)
    .extra("probes_holding", probes_ok as f64)
    .extra("probe_min_relative_slack", probe_min_slack)
    .extra("tightness", bound / value)
    .extra("aux_lap_over_norm_ratio", aux_min)
    .extra("stationarity", out.stationarity))
}

/// `<f_lambda(u), u> >= max(1 - lambda/lambda_disc, 0) ||grad u||_p^p` on
/// seeded trials normalized to `||grad u||_p = 1`; `minimizer`, when given,
/// is trial 0.
#[allow(clippy::too_many_arguments)]
pub fn verify_coercivity(
    p0: f64,
    p1: f64,
    lambda: f64,
    lambda_disc: f64,
    mesh: Mesh,
    trials: usize,
    seed: u64,
    minimizer: Option<&GridFunction>,
) -> Result<RelationReport> {
    let p = p0 + p1;
    check_p(p)?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::param("lambda", lambda, "lambda >= 0"));
    }
    if !(lambda_disc > 0.0) || !lambda_disc.is_finite() {
        return Err(Error::param("lambda_disc", lambda_disc, "lambda_disc > 0"));
    }
    if trials == 0 {
        return Err(Error::param("trials", 0.0, "trials >= 1"));
    }
    let f = OperatorSpec::p_laplacian(p)?;
    let g = OperatorSpec::grad_weighted_power(p0, p1)?;
    let constant = (1.0 - lambda / lambda_disc).max(0.0);

    let mut rng = probes::rng(seed);
    let mut worst = f64::INFINITY;
    let mut holding = 0usize;
    for k in 0..trials {
        let raw = match (k, minimizer) {
            (0, Some(u)) => u.clone(),
            _ => probes::random_nodal(mesh, &mut rng, 1.0),
        };
        let gn = lp_norm(&gradient(&raw), p)?;
        if !(gn > 0.0) {
            continue;
        }
        let u = raw.scaled(1.0 / gn);
        let energy = f.pairing(&u, &u)?;
        let coercive = energy - lambda * g.pairing(&u, &u)?;
        let margin = coercive - constant * energy;
        worst = worst.min(margin);
        if margin >= -COERCIVITY_SLACK {
            holding += 1;
        }
    }
    Ok(RelationReport::new(
        "coercivity",
        worst,
        0.0,
        Relation::Geq,
        COERCIVITY_SLACK,
        ToleranceKind::Absolute,
        Provenance {
            p,
            p0: Some(p0),
            p1: Some(p1),
            mesh,
        },
    )
    .extra("lambda", lambda)
    .extra("lambda_disc", lambda_disc)
    .extra("constant", constant)
    .extra("trials", trials as f64)
    .extra("trials_holding", holding as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Prop1,
    Ineq33,
    Power,
    BilapGrad,
    BilapDensity,
    Coercivity,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "prop1" => Suite::Prop1,
            "ineq33" => Suite::Ineq33,
            "power" => Suite::Power,
            "bilap_grad" => Suite::BilapGrad,
            "bilap_density" => Suite::BilapDensity,
            "coercivity" => Suite::Coercivity,
            "all" => Suite::All,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown suite '{other}' (expected prop1, ineq33, power, bilap_grad, bilap_density, coercivity or all)"
                )))
            }
        })
    }
}

/// Parameters of a suite run; unset exponents fall back to the default
/// sweep of each suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteParams {
    pub mesh: Mesh,
    pub p: Option<f64>,
    pub p0: Option<f64>,
    pub p1: Option<f64>,
    pub lambda_fraction: f64,
    pub trials: usize,
    pub config: MinimizeConfig,
}

impl SuiteParams {
    pub fn new(mesh: Mesh, config: MinimizeConfig) -> Self {
        SuiteParams {
            mesh,
            p: None,
            p0: None,
            p1: None,
            lambda_fraction: 0.5,
            trials: PROBE_COUNT,
            config,
        }
    }

    fn ps(&self, defaults: &[f64]) -> Vec<f64> {
        match self.p {
            Some(p) => vec![p],
            None => defaults.to_vec(),
        }
    }

    fn pairs(&self, defaults: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
        Ok(match (self.p0, self.p1, self.p) {
            (Some(p0), Some(p1), _) => vec![(p0, p1)],
            (Some(p0), None, Some(p)) => vec![(p0, p - p0)],
            (None, Some(p1), Some(p)) => vec![(p - p1, p1)],
            (Some(p0), None, None) => vec![(p0, 0.0)],
            (None, None, Some(p)) => {
                let matching: Vec<_> = defaults.iter().filter(|(a, b)| a + b == p).cloned().collect();
                if matching.is_empty() {
                    vec![(p, 0.0)]
                } else {
                    matching
                }
            }
            (None, Some(_), None) => {
                return Err(Error::InvalidArgument("p1 needs p0 or p".into()));
            }
            (None, None, None) => defaults.to_vec(),
        })
    }
}

/// Runs one suite sequentially in a fixed order.
pub fn run_suite(suite: Suite, params: &SuiteParams) -> Result<Vec<RelationReport>> {
    let mesh = params.mesh;
    let cfg = &params.config;
    let mut out = Vec::new();
    let all = suite == Suite::All;
    if all || suite == Suite::Prop1 {
        for p in params.ps(&[2.0, 3.0, 4.0]) {
            out.push(verify_prop1_part2(p, mesh, cfg)?);
        }
    }
    if all || suite == Suite::Ineq33 {
        for (p0, p1) in params.pairs(&[(2.0, 2.0), (3.0, 1.0), (4.0, 0.0)])? {
            out.push(verify_ineq_3_3(p0, p1, mesh, cfg)?);
        }
    }
    if all || suite == Suite::Power {
        for p in params.ps(&[2.0, 3.0]) {
            out.push(verify_fully_nonlinear_power(p, mesh, cfg)?);
        }
    }
    if all || suite == Suite::BilapGrad {
        for p in params.ps(&[2.0, 3.0]) {
            out.push(lambda_bilap_grad(p, mesh, cfg)?);
        }
    }
    if all || suite == Suite::BilapDensity {
        for p in params.ps(&[2.0, 4.0]) {
            out.push(lambda_bilap_density(p, mesh, cfg)?);
        }
    }
    if all || suite == Suite::Coercivity {
        for (p0, p1) in params.pairs(&[(2.0, 0.0), (2.0, 2.0)])? {
            let spectrum = lambda_p0p1(p0, p1, mesh, cfg)?;
            let disc = spectrum.lambda_power;
            let report = verify_coercivity(
                p0,
                p1,
                params.lambda_fraction * disc,
                disc,
                mesh,
                params.trials,
                cfg.seed,
                Some(&spectrum.result.minimizer),
            )?;
            out.push(report.converged_if(spectrum.result.converged));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cfg() -> MinimizeConfig {
        MinimizeConfig {
            restarts: 1,
            ..MinimizeConfig::default()
        }
    }

    #[test]
    fn holds_semantics() {
        use Relation::*;
        use ToleranceKind::*;
        assert!(holds(1.0, 1.0 + 1e-7, Equal, 1e-6, Absolute));
        assert!(!holds(1.0, 1.1, Equal, 1e-2, Relative));
        assert!(holds(0.9999999, 1.0, Geq, 1e-6, Absolute));
        assert!(!holds(0.99, 1.0, Geq, 1e-6, Absolute));
        assert!(holds(1.0, 2.0, Leq, 0.0, Absolute));
        assert!(!holds(f64::NAN, 2.0, Leq, 1.0, Absolute));
    }

    #[test]
    fn linear_eigenvalue_on_domains() {
        let one = linear_first_eigenvalue(Mesh::unit_interval(256).unwrap()).unwrap();
        assert!((one - PI).abs() / PI < 5e-3);
        let two = linear_first_eigenvalue(Mesh::interval(2.0, 256).unwrap()).unwrap();
        assert!((two - PI / 2.0).abs() / (PI / 2.0) < 5e-3);
        let sq = linear_first_eigenvalue(Mesh::unit_square(32).unwrap()).unwrap();
        let exact = PI * 2f64.sqrt();
        assert!((sq - exact).abs() / exact < 1e-2);
    }

    #[test]
    fn prop1_at_two_is_linear() {
        let r = verify_prop1_part2(2.0, Mesh::unit_interval(128).unwrap(), &cfg()).unwrap();
        assert!(r.passed);
        assert!((r.lhs - PI * PI).abs() / (PI * PI) < 2e-2);
        assert!(verify_prop1_part2(1.5, Mesh::unit_interval(8).unwrap(), &cfg()).is_err());
    }

    #[test]
    fn ordering_reduces_to_equality() {
        let r = verify_ineq_3_3(2.0, 0.0, Mesh::unit_interval(64).unwrap(), &cfg()).unwrap();
        assert!(r.passed);
        assert!((r.lhs - r.rhs).abs() <= 1e-10);
    }

    #[test]
    fn coercivity_at_zero_lambda_is_exact() {
        let mesh = Mesh::unit_interval(32).unwrap();
        let r = verify_coercivity(2.0, 1.0, 0.0, 5.0, mesh, 20, 3, None).unwrap();
        assert!(r.passed);
        assert!(r.lhs.abs() < 1e-12);
        assert!(verify_coercivity(2.0, 1.0, -1.0, 5.0, mesh, 20, 3, None).is_err());
    }

    #[test]
    fn holder_bound_at_sine_for_p4() {
        let mesh = Mesh::unit_interval(128).unwrap();
        let u = GridFunction::ground_state(mesh);
        let density = OperatorSpec::density_diffusion(4.0).unwrap();
        let value = norm(LinearMap::NegLaplacian, 4.0, &u).powi(4) / density.pairing(&u, &u).unwrap() / 3.0;
        let bound = holder_lower_bound(4.0, &u).unwrap();
        assert!(value > bound * (1.0 + 1e-3));
    }

    #[test]
    fn suite_names_parse() {
        assert_eq!("bilap_grad".parse::<Suite>().unwrap(), Suite::BilapGrad);
        assert!("nope".parse::<Suite>().is_err());
    }
}
