//! Minimization of scale-invariant ratios `N(u) / D(u)` on a Lebesgue
//! sphere: Sobolev-preconditioned descent with Armijo backtracking and
//! Polak-Ribiere+ conjugation, renormalizing after every step.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{gradient, gradient_transpose, lp_norm, neg_laplacian, GridFunction, Integrable, Mesh};
use crate::linalg::PoissonSolver;
use crate::operators::{abs_pow_derivative, OperatorSpec};
use crate::probes;
use crate::quotient::{InitKind, MinimizeConfig};

const ARMIJO_C: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
const NOISE_AMPLITUDE: f64 = 0.01;
const DEGENERATE_RESEEDS: u64 = 4;
const ROUNDOFF_SLACK: f64 = 8.0;
const STALL_WINDOW: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum LinearMap {
    Identity,
    Gradient,
    NegLaplacian,
}

/// A homogeneous functional with an assembled Euclidean gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Energy {
    /// `<Op(u), u>`
    Pairing(OperatorSpec),
    /// `||A u||_p^power`
    NormPower { map: LinearMap, p: f64, power: f64 },
}

impl Energy {
    pub fn value(&self, u: &GridFunction) -> Result<f64> {
        match self {
            Energy::Pairing(spec) => spec.pairing(u, u),
            Energy::NormPower { map, p, power } => Ok(norm_power_integral(*map, *p, u).powf(power / p)),
        }
    }

    pub fn gradient(&self, u: &GridFunction) -> Result<Vec<f64>> {
        match self {
            Energy::Pairing(spec) => spec.self_pairing_gradient(u),
            Energy::NormPower { map, p, power } => {
                let s = norm_power_integral(*map, *p, u);
                if s == 0.0 {
                    return Ok(vec![0.0; u.len()]);
                }
                let outer = power / p * s.powf(power / p - 1.0);
                let mesh = *u.mesh();
                let inner = match map {
                    LinearMap::Identity => u
                        .values()
                        .iter()
                        .map(|&x| mesh.node_weight() * abs_pow_derivative(x, *p))
                        .collect::<Vec<_>>(),
                    LinearMap::NegLaplacian => {
                        let lu = neg_laplacian(u);
                        let d = GridFunction::from_parts(
                            mesh,
                            lu.values()
                                .iter()
                                .map(|&x| mesh.node_weight() * abs_pow_derivative(x, *p))
                                .collect(),
                        );
                        neg_laplacian(&d).into_values()
                    }
                    LinearMap::Gradient => {
                        let g = gradient(u);
                        let factors: Vec<f64> = g
                            .magnitudes()
                            .iter()
                            .map(|&m| mesh.cell_weight() * magnitude_derivative_factor(m, *p))
                            .collect();
                        gradient_transpose(&g.scale_cells(&factors))
                    }
                };
                Ok(inner.into_iter().map(|v| outer * v).collect())
            }
        }
    }

    fn order(&self) -> u8 {
        match self {
            Energy::Pairing(spec) => spec.energy_order(),
            Energy::NormPower { map, .. } => match map {
                LinearMap::Identity => 0,
                LinearMap::Gradient => 1,
                LinearMap::NegLaplacian => 2,
            },
        }
    }
}

/// `p |g|^(p-2)`, floored below `p = 2`.
fn magnitude_derivative_factor(m: f64, p: f64) -> f64 {
    if p >= 2.0 {
        p * m.powf(p - 2.0)
    } else {
        p * (m * m + crate::operators::DERIVATIVE_FLOOR).powf(0.5 * (p - 2.0))
    }
}

pub(crate) fn norm_power_integral(map: LinearMap, p: f64, u: &GridFunction) -> f64 {
    match map {
        LinearMap::Identity => u.power_integral(p),
        LinearMap::Gradient => gradient(u).power_integral(p),
        LinearMap::NegLaplacian => neg_laplacian(u).power_integral(p),
    }
}

pub(crate) fn norm(map: LinearMap, p: f64, u: &GridFunction) -> f64 {
    norm_power_integral(map, p, u).powf(1.0 / p)
}

#[derive(Debug, Clone)]
enum Preconditioner {
    Identity,
    Sobolev { solver: PoissonSolver, power: i32 },
}

impl Preconditioner {
    fn for_order(mesh: Mesh, order: u8) -> Self {
        match order {
            0 => Preconditioner::Identity,
            o => Preconditioner::Sobolev {
                solver: PoissonSolver::new(mesh),
                power: o as i32,
            },
        }
    }

    /// Riesz representer of a Euclidean gradient.
    fn apply(&self, mesh: &Mesh, g: &[f64]) -> Vec<f64> {
        let inv_w = 1.0 / mesh.node_weight();
        let scaled: Vec<f64> = g.iter().map(|v| v * inv_w).collect();
        match self {
            Preconditioner::Identity => scaled,
            Preconditioner::Sobolev { solver, power } => solver.apply_inverse_power(&scaled, *power),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct RatioProblem {
    pub num: Energy,
    pub den: Energy,
    pub mesh: Mesh,
    pub sphere_exponent: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct DescentOutcome {
    pub value: f64,
    pub u: GridFunction,
    pub iterations: usize,
    pub history: Vec<f64>,
    pub converged: bool,
    pub stationarity: f64,
    pub restart: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl RatioProblem {
    pub fn ratio(&self, u: &GridFunction) -> Result<f64> {
        if u.is_zero() {
            return Err(Error::ZeroFunction);
        }
        let d = self.den.value(u)?;
        if !(d.abs() > f64::MIN_POSITIVE) || !d.is_finite() {
            return Err(Error::DegenerateDenominator(d));
        }
        Ok(self.num.value(u)? / d)
    }

    /// Ratio and its Euclidean gradient.
    pub fn ratio_gradient(&self, u: &GridFunction) -> Result<(f64, Vec<f64>)> {
        if u.is_zero() {
            return Err(Error::ZeroFunction);
        }
        let n = self.num.value(u)?;
        let d = self.den.value(u)?;
        if !(d.abs() > f64::MIN_POSITIVE) || !d.is_finite() {
            return Err(Error::DegenerateDenominator(d));
        }
        let q = n / d;
        let gn = self.num.gradient(u)?;
        let gd = self.den.gradient(u)?;
        let g = gn.iter().zip(&gd).map(|(a, b)| (a - q * b) / d).collect();
        Ok((q, g))
    }

    fn normalize(&self, u: &GridFunction) -> Option<GridFunction> {
        let nrm = lp_norm(u, self.sphere_exponent).ok()?;
        (nrm > 0.0 && nrm.is_finite()).then(|| u.scaled(1.0 / nrm))
    }

    /// Gradient of `x -> Q(x / ||x||_r)` at a point of the unit sphere.
    fn sphere_gradient(&self, u: &GridFunction, gq: &[f64]) -> Vec<f64> {
        let r = self.sphere_exponent;
        let w = u.mesh().node_weight();
        let radial = dot(gq, u.values());
        gq.iter()
            .zip(u.values())
            .map(|(g, &x)| g - radial * w * abs_pow_derivative(x, r) / r)
            .collect()
    }

    /// `||grad N - Q grad D|| / ||grad N||` restricted to the sphere; for a
    /// variational pair this is exactly the relative eigen-residual.
    /// Second-order energies are measured after one inverse Laplacian.
    fn stationarity(&self, u: &GridFunction, g_sphere: &[f64], smoother: Option<&PoissonSolver>) -> Result<f64> {
        let d = self.den.value(u)?;
        let gn = self.num.gradient(u)?;
        let (r, n) = match smoother {
            Some(s) => (s.apply_inverse_power(g_sphere, 1), s.apply_inverse_power(&gn, 1)),
            None => (g_sphere.to_vec(), gn),
        };
        let scale = dot(&n, &n).sqrt().max(f64::MIN_POSITIVE);
        Ok(dot(&r, &r).sqrt() * d.abs() / scale)
    }

    /// Directional derivative of `t -> Q(normalize(u + t d))`.
    fn line_slope(&self, u: &GridFunction, d: &[f64], t: f64) -> Option<(GridFunction, f64)> {
        let x: Vec<f64> = u.values().iter().zip(d).map(|(a, b)| a + t * b).collect();
        let x = GridFunction::from_parts(self.mesh, x);
        let nrm = lp_norm(&x, self.sphere_exponent).ok()?;
        let tu = self.normalize(&x)?;
        let (_, gq) = self.ratio_gradient(&tu).ok()?;
        let gs = self.sphere_gradient(&tu, &gq);
        Some((tu, dot(&gs, d) / nrm))
    }

    /// Secant zero of the line slope from `0` and `t`; kept when the value
    /// stays below `ceiling` and the slope shrinks.
    fn secant_step(&self, u: &GridFunction, d: &[f64], t: f64, slope: f64, ceiling: f64) -> Option<(GridFunction, f64)> {
        let (_, st) = self.line_slope(u, d, t)?;
        if !(st > slope) {
            return None;
        }
        let ts = t * slope / (slope - st);
        let (su, ss) = self.line_slope(u, d, ts)?;
        let sq = self.ratio(&su).ok()?;
        (ts.is_finite() && ts > 0.0 && sq.is_finite() && sq <= ceiling && ss.abs() < slope.abs()).then_some((su, sq))
    }

    /// One descent run from `init`.
    pub fn descend(&self, init: &GridFunction, config: &MinimizeConfig, restart: usize) -> Result<DescentOutcome> {
        let order = self.num.order().max(self.den.order());
        let precond = Preconditioner::for_order(self.mesh, order);
        let smoother = match (&precond, order) {
            (Preconditioner::Sobolev { solver, .. }, 2) => Some(solver),
            _ => None,
        };
        let mut u = self.normalize(init).ok_or(Error::ZeroFunction)?;
        let (mut q, gq) = self.ratio_gradient(&u)?;
        let mut g = self.sphere_gradient(&u, &gq);
        let mut stationarity = self.stationarity(&u, &g, smoother)?;
        let mut history = vec![q];
        let mut z = precond.apply(&self.mesh, &g);
        let mut d: Vec<f64> = z.iter().map(|v| -v).collect();
        let mut step: Option<f64> = None;
        let mut quiet = 0usize;
        let mut converged = stationarity <= config.residual_tol;
        let mut iterations = 0usize;

        while !converged && iterations < config.max_iter {
            iterations += 1;
            let mut slope = dot(&g, &d);
            if !(slope < 0.0) {
                d = z.iter().map(|v| -v).collect();
                slope = dot(&g, &d);
                if !(slope < 0.0) {
                    break;
                }
            }
            let dnorm = dot(&d, &d).sqrt();
            let unorm = dot(u.values(), u.values()).sqrt();
            let mut t = match step {
                Some(s) => s * 2.0,
                None => 0.1 * unorm / dnorm,
            };
            // quotient values closer than this are indistinguishable
            let noise = ROUNDOFF_SLACK * f64::EPSILON * q.abs();
            let mut accepted = None;
            for _ in 0..MAX_BACKTRACKS {
                let trial: Vec<f64> = u.values().iter().zip(&d).map(|(a, b)| a + t * b).collect();
                if let Some(tu) = self.normalize(&GridFunction::from_parts(self.mesh, trial)) {
                    if let Ok(tq) = self.ratio(&tu) {
                        if tq.is_finite() && tq <= q + ARMIJO_C * t * slope + noise {
                            accepted = Some((tu, tq));
                            break;
                        }
                    }
                }
                t *= BACKTRACK;
            }
            let Some((mut nu, mut nq)) = accepted else {
                break;
            };
            if nq > q + ARMIJO_C * t * slope {
                // accepted inside the round-off band: values no longer
                // rank the trials, so place the step by a secant on the slope
                if let Some((su, sq)) = self.secant_step(&u, &d, t, slope, q + noise) {
                    nu = su;
                    nq = sq;
                }
            }
            step = Some(t);
            let change = (q - nq).abs() / q.abs().max(f64::MIN_POSITIVE);
            u = nu;
            q = nq;
            history.push(q);
            let (_, gq_new) = self.ratio_gradient(&u)?;
            let g_new = self.sphere_gradient(&u, &gq_new);
            let z_new = precond.apply(&self.mesh, &g_new);
            let denom = dot(&g, &z);
            let beta = if denom > 0.0 {
                (dot(&g_new, &z_new) - dot(&g, &z_new)) / denom
            } else {
                0.0
            }
            .max(0.0);
            d = z_new.iter().zip(&d).map(|(zv, dv)| -zv + beta * dv).collect();
            g = g_new;
            z = z_new;
            stationarity = self.stationarity(&u, &g, smoother)?;
            converged = stationarity <= config.residual_tol;
            if change < config.rel_tol {
                quiet += 1;
                // the value has settled; accept once the first-order
                // condition is met to the looser square-root level
                if quiet >= STALL_WINDOW && stationarity <= config.residual_tol.sqrt() {
                    converged = true;
                }
            } else {
                quiet = 0;
            }
        }

        Ok(DescentOutcome {
            value: q,
            u,
            iterations,
            history,
            converged,
            stationarity,
            restart,
        })
    }

    fn start(&self, config: &MinimizeConfig, restart: usize, attempt: u64) -> GridFunction {
        let seed = config
            .seed
            .wrapping_add(restart as u64)
            .wrapping_add(attempt.wrapping_mul(1_000_003));
        let mut rng = probes::rng(seed);
        match config.init {
            InitKind::LaplacianEigenfunction if restart == 0 && attempt == 0 => {
                GridFunction::ground_state(self.mesh)
            }
            InitKind::LaplacianEigenfunction | InitKind::Supplied => {
                probes::perturbed_ground_state(self.mesh, &mut rng, NOISE_AMPLITUDE)
            }
            InitKind::Random => probes::random_nodal(self.mesh, &mut rng, 1.0),
        }
    }

    fn descend_with_reseed(
        &self,
        config: &MinimizeConfig,
        restart: usize,
        supplied: Option<&GridFunction>,
    ) -> Result<DescentOutcome> {
        let mut last_err = Error::ZeroFunction;
        for attempt in 0..DEGENERATE_RESEEDS {
            let init = match (supplied, restart, attempt) {
                (Some(u0), 0, 0) => u0.clone(),
                (Some(u0), _, _) => {
                    let mut rng = probes::rng(config.seed.wrapping_add(restart as u64 + 7919 * attempt));
                    let noise = probes::random_nodal(self.mesh, &mut rng, NOISE_AMPLITUDE);
                    let scale = u0.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    GridFunction::from_parts(
                        self.mesh,
                        u0.values()
                            .iter()
                            .zip(noise.values())
                            .map(|(a, b)| a + scale * b)
                            .collect(),
                    )
                }
                _ => self.start(config, restart, attempt),
            };
            match self.descend(&init, config, restart) {
                Ok(out) => return Ok(out),
                Err(e @ (Error::DegenerateDenominator(_) | Error::ZeroFunction)) => last_err = e,
                Err(e) => return Err(e),
            }
        }
        Err(last_err)
    }

    /// Runs `config.restarts` independent descents and keeps the smallest
    /// value, ties broken by restart index.
    pub fn minimize(&self, config: &MinimizeConfig, supplied: Option<&GridFunction>) -> Result<DescentOutcome> {
        config.validate()?;
        if let Some(u0) = supplied {
            if u0.mesh() != &self.mesh {
                return Err(Error::MeshMismatch);
            }
        }
        let runs: Vec<Result<DescentOutcome>> = (0..config.restarts.max(1))
            .into_par_iter()
            .map(|k| self.descend_with_reseed(config, k, supplied))
            .collect();
        let mut best: Option<DescentOutcome> = None;
        let mut first_err = None;
        for run in runs {
            match run {
                Ok(out) => {
                    let better = match &best {
                        None => true,
                        Some(b) => out.value < b.value,
                    };
                    if better {
                        best = Some(out);
                    }
                }
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        let mut best = best.ok_or_else(|| first_err.unwrap_or(Error::ZeroFunction))?;
        if best.u.values().iter().sum::<f64>() < 0.0 {
            best.u = best.u.scaled(-1.0);
        }
        Ok(best)
    }
}
