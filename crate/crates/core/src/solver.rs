//! The parameterized equation `F(u) - lambda G(u) = h` with
//! `F = PLaplacian(p)` and `G = GradWeightedPower(p0, p1)`, its fixed-point
//! form `u = lambda L^{-1} G(u)`, and a sampled admissibility test.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{gradient, lp_norm, GridFunction, Mesh};
use crate::linalg::{BandedMatrix, BandedSpd, PoissonSolver};
use crate::operators::OperatorSpec;
use crate::probes;
use crate::quotient::{lambda_p0p1, MinimizeConfig};

const FD_STEP: f64 = 1e-6;
const ARMIJO_C: f64 = 1e-4;
const MIN_DAMPING: f64 = 1.0 / 1024.0;
const MU_UP: f64 = 4.0;
const MU_DOWN: f64 = 1.0 / 3.0;
const MU_MAX: f64 = 1e16;
const RESEED_AMPLITUDE: f64 = 0.01;
const SWEEP_MARGIN: f64 = 0.05;
const FIXED_POINT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Converged when the scaled residual is at most this.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Noisy restarts after a stalled run.
    pub reseeds: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            tol: 1e-8,
            max_iter: 200,
            seed: 0,
            reseeds: 3,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::param("tol", self.tol, "tolerance > 0"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", 0.0, "max_iter >= 1"));
        }
        Ok(())
    }
}

/// Named right-hand sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Rhs {
    Zero,
    Constant { value: f64 },
    /// `scale` times the lowest sine mode.
    Mode { scale: f64 },
    /// Seeded uniform noise in `[-amplitude, amplitude]`.
    Noise { amplitude: f64, seed: u64 },
}

impl Rhs {
    pub fn build(&self, mesh: Mesh) -> GridFunction {
        match *self {
            Rhs::Zero => GridFunction::zeros(mesh),
            Rhs::Constant { value } => GridFunction::from_fn(mesh, |_| value),
            Rhs::Mode { scale } => GridFunction::ground_state(mesh).scaled(scale),
            Rhs::Noise { amplitude, seed } => probes::random_nodal(mesh, &mut probes::rng(seed), amplitude),
        }
    }

    pub fn tag(&self) -> String {
        match self {
            Rhs::Zero => "zero".into(),
            Rhs::Constant { value } => format!("constant:{value}"),
            Rhs::Mode { scale } => format!("mode:{scale}"),
            Rhs::Noise { amplitude, seed } => format!("noise:{amplitude}:{seed}"),
        }
    }
}

impl std::str::FromStr for Rhs {
    type Err = Error;

    /// `zero`, `constant[:c]`, `mode[:scale]`, `noise[:amplitude[:seed]]`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let kind = parts.next().unwrap_or("");
        let mut num = |default: f64| -> Result<f64> {
            match parts.next() {
                None => Ok(default),
                Some(v) => v
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad number '{v}' in right-hand side '{s}'"))),
            }
        };
        let rhs = match kind {
            "zero" => Rhs::Zero,
            "constant" => Rhs::Constant { value: num(1.0)? },
            "mode" => Rhs::Mode { scale: num(1.0)? },
            "noise" => {
                let amplitude = num(1.0)?;
                let seed = num(0.0)?;
                if seed < 0.0 || seed.fract() != 0.0 {
                    return Err(Error::InvalidArgument(format!("noise seed must be a nonnegative integer in '{s}'")));
                }
                Rhs::Noise {
                    amplitude,
                    seed: seed as u64,
                }
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown right-hand side '{s}' (expected zero, constant, mode or noise)"
                )))
            }
        };
        Ok(rhs)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub lambda: f64,
    pub rhs_tag: String,
    pub converged: bool,
    /// `||F(u) - lambda G(u) - h||_2 / (||h||_2 + 1)`.
    pub residual: f64,
    pub iterations: usize,
    #[serde(serialize_with = "serialize_values")]
    pub solution: GridFunction,
}

fn serialize_values<S: serde::Serializer>(u: &GridFunction, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(u.values())
}

#[derive(Debug, Clone)]
struct Equation {
    f: OperatorSpec,
    g: OperatorSpec,
    lambda: f64,
    h: GridFunction,
    h_scale: f64,
}

impl Equation {
    fn new(p0: f64, p1: f64, lambda: f64, h: &GridFunction) -> Result<Self> {
        let p = p0 + p1;
        if !(p >= 2.0) || !p.is_finite() {
            return Err(Error::param("p", p, "p = p0 + p1 >= 2"));
        }
        if !lambda.is_finite() {
            return Err(Error::param("lambda", lambda, "finite lambda"));
        }
        let f = OperatorSpec::p_laplacian(p)?;
        let g = OperatorSpec::grad_weighted_power(p0, p1)?;
        f.validate_on(h.mesh())?;
        g.validate_on(h.mesh())?;
        Ok(Equation {
            f,
            g,
            lambda,
            h_scale: h.norm_l2() + 1.0,
            h: h.clone(),
        })
    }

    fn mesh(&self) -> Mesh {
        *self.h.mesh()
    }

    fn residual_vec(&self, u: &GridFunction) -> Result<Vec<f64>> {
        let fu = self.f.apply(u)?;
        let gu = self.g.apply(u)?;
        Ok(fu
            .values()
            .iter()
            .zip(gu.values())
            .zip(self.h.values())
            .map(|((a, b), c)| a - self.lambda * b - c)
            .collect())
    }

    fn scaled_norm(&self, r: &[f64]) -> f64 {
        let w = self.mesh().node_weight();
        (w * r.iter().map(|v| v * v).sum::<f64>()).sqrt() / self.h_scale
    }

    fn residual(&self, u: &GridFunction) -> Result<f64> {
        Ok(self.scaled_norm(&self.residual_vec(u)?))
    }
}

/// Offsets `(di, dj)` of the nodes whose values enter the operators at a
/// node: two edges in 1D, the six triangles around a node in 2D.
fn footprint(dim: usize) -> &'static [(isize, isize)] {
    if dim == 1 {
        &[(-1, 0), (0, 0), (1, 0)]
    } else {
        &[(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1), (1, -1), (-1, 1)]
    }
}

fn node_ij(mesh: &Mesh, idx: usize) -> (isize, isize) {
    let nx = mesh.nodes_per_axis()[0];
    if mesh.dim() == 1 {
        (idx as isize, 0)
    } else {
        ((idx % nx) as isize, (idx / nx) as isize)
    }
}

fn node_at(mesh: &Mesh, i: isize, j: isize) -> Option<usize> {
    let n = mesh.nodes_per_axis();
    if i < 0 || i >= n[0] as isize {
        return None;
    }
    if mesh.dim() == 1 {
        return (j == 0).then_some(i as usize);
    }
    if j < 0 || j >= n[1] as isize {
        return None;
    }
    Some(i as usize + n[0] * j as usize)
}

fn color_of(mesh: &Mesh, idx: usize) -> usize {
    let (i, j) = node_ij(mesh, idx);
    if mesh.dim() == 1 {
        i.rem_euclid(3) as usize
    } else {
        (i.rem_euclid(3) + 3 * j.rem_euclid(3)) as usize
    }
}

/// Sparse Jacobian rows by colored central differences.
fn jacobian(eq: &Equation, u: &GridFunction) -> Result<Vec<Vec<(usize, f64)>>> {
    let mesh = eq.mesh();
    let n = u.len();
    let colors = if mesh.dim() == 1 { 3 } else { 9 };
    let scale = u.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let eps = FD_STEP * scale;
    let color: Vec<usize> = (0..n).map(|k| color_of(&mesh, k)).collect();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for c in 0..colors {
        if !color.contains(&c) {
            continue;
        }
        let shift = |sign: f64| {
            let vals = u
                .values()
                .iter()
                .zip(&color)
                .map(|(v, &k)| if k == c { v + sign * eps } else { *v })
                .collect();
            GridFunction::from_parts(mesh, vals)
        };
        let plus = eq.residual_vec(&shift(1.0))?;
        let minus = eq.residual_vec(&shift(-1.0))?;
        for (r, row) in rows.iter_mut().enumerate() {
            let (i, j) = node_ij(&mesh, r);
            for &(di, dj) in footprint(mesh.dim()) {
                if let Some(col) = node_at(&mesh, i + di, j + dj) {
                    if color[col] == c {
                        row.push((col, (plus[r] - minus[r]) / (2.0 * eps)));
                    }
                }
            }
        }
    }
    Ok(rows)
}

fn half_bandwidth(mesh: &Mesh) -> usize {
    if mesh.dim() == 1 {
        1
    } else {
        mesh.nodes_per_axis()[0]
    }
}

/// Solves `J d = -r`.
fn newton_step(rows: &[Vec<(usize, f64)>], r: &[f64], bw: usize) -> Result<Vec<f64>> {
    let mut a = BandedMatrix::zeros(r.len(), bw, bw);
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            a.add(i, j, v);
        }
    }
    let neg: Vec<f64> = r.iter().map(|v| -v).collect();
    Ok(a.factor()?.solve(&neg))
}

fn shifted(u: &GridFunction, step: &[f64], t: f64) -> GridFunction {
    GridFunction::from_parts(
        *u.mesh(),
        u.values().iter().zip(step).map(|(a, b)| a + t * b).collect(),
    )
}

/// Solves `(J^T J + mu I) d = -J^T r`.
fn lm_step(rows: &[Vec<(usize, f64)>], r: &[f64], mu: f64, bw: usize) -> Result<Vec<f64>> {
    let n = r.len();
    let mut a = BandedSpd::zeros(n, 2 * bw);
    let mut rhs = vec![0.0; n];
    for (row, &rv) in rows.iter().zip(r) {
        for &(ca, va) in row {
            rhs[ca] -= va * rv;
            for &(cb, vb) in row {
                if cb <= ca {
                    a.add(ca, cb, va * vb);
                }
            }
        }
    }
    for k in 0..n {
        a.add(k, k, mu);
    }
    Ok(a.factor()?.solve(&rhs))
}

fn diag_max(rows: &[Vec<(usize, f64)>], n: usize) -> f64 {
    let mut d = vec![0.0; n];
    for row in rows {
        for &(c, v) in row {
            d[c] += v * v;
        }
    }
    d.into_iter().fold(0.0, f64::max)
}

/// Best multiple of the Poisson solution `L^{-1} h` by a scalar search.
fn initial_guess(eq: &Equation) -> Result<GridFunction> {
    let w = PoissonSolver::new(eq.mesh()).solve(&eq.h)?;
    let eval = |t: f64| eq.residual(&w.scaled(t)).unwrap_or(f64::INFINITY);
    let mut best_t = 0.0;
    let mut best = eval(0.0);
    let mut t = 1.0 / 1024.0;
    while t <= 1024.0 {
        for s in [t, -t] {
            let v = eval(s);
            if v < best {
                best = v;
                best_t = s;
            }
        }
        t *= 2.0;
    }
    if best_t != 0.0 {
        // golden-section refinement inside the bracketing octave
        let (mut lo, mut hi) = if best_t > 0.0 {
            (best_t / 2.0, best_t * 2.0)
        } else {
            (best_t * 2.0, best_t / 2.0)
        };
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let a = hi - phi * (hi - lo);
            let b = lo + phi * (hi - lo);
            if eval(a) < eval(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        let mid = 0.5 * (lo + hi);
        if eval(mid) < best {
            best_t = mid;
        }
    }
    Ok(w.scaled(best_t))
}

struct LmOutcome {
    u: GridFunction,
    residual: f64,
    iterations: usize,
}

/// Damped Newton on the residual with backtracking; a Levenberg-Marquardt
/// step takes over when the Newton direction fails.
fn newton_lm(eq: &Equation, init: GridFunction, config: &SolveConfig) -> Result<LmOutcome> {
    let mesh = eq.mesh();
    let bw = half_bandwidth(&mesh);
    let mut u = init;
    let mut r = eq.residual_vec(&u)?;
    let mut res = eq.scaled_norm(&r);
    let mut mu: Option<f64> = None;
    let mut iterations = 0;
    while res > config.tol && iterations < config.max_iter {
        iterations += 1;
        let rows = jacobian(eq, &u)?;
        if let Ok(step) = newton_step(&rows, &r, bw) {
            let mut t = 1.0;
            let mut accepted = false;
            while t >= MIN_DAMPING {
                let trial = shifted(&u, &step, t);
                let tr = eq.residual_vec(&trial)?;
                let tres = eq.scaled_norm(&tr);
                if tres.is_finite() && tres <= (1.0 - ARMIJO_C * t) * res {
                    u = trial;
                    r = tr;
                    res = tres;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if accepted {
                continue;
            }
        }
        let base = diag_max(&rows, u.len()).max(f64::MIN_POSITIVE);
        let mut m = mu.unwrap_or(1e-8 * base);
        let mut improved = false;
        while m <= MU_MAX * base {
            let step = match lm_step(&rows, &r, m, bw) {
                Ok(s) => s,
                Err(_) => {
                    m *= MU_UP;
                    continue;
                }
            };
            let trial = shifted(&u, &step, 1.0);
            let tr = eq.residual_vec(&trial)?;
            let tres = eq.scaled_norm(&tr);
            if tres.is_finite() && tres < res {
                u = trial;
                r = tr;
                res = tres;
                mu = Some((m * MU_DOWN).max(1e-14 * base));
                improved = true;
                break;
            }
            m *= MU_UP;
        }
        if !improved {
            break;
        }
    }
    Ok(LmOutcome {
        u,
        residual: res,
        iterations,
    })
}

/// Least-squares solve of `F(u) - lambda G(u) = h` by Levenberg-Marquardt
/// with a finite-difference Jacobian. Non-convergence is reported in the
/// flag, not as an error.
pub fn solve_flambda(p0: f64, p1: f64, lambda: f64, h: &GridFunction, config: &SolveConfig) -> Result<SolveReport> {
    solve_tagged(p0, p1, lambda, h, "custom", config)
}

pub fn solve_tagged(
    p0: f64,
    p1: f64,
    lambda: f64,
    h: &GridFunction,
    rhs_tag: &str,
    config: &SolveConfig,
) -> Result<SolveReport> {
    config.validate()?;
    let eq = Equation::new(p0, p1, lambda, h)?;
    let mesh = eq.mesh();
    let mut best = if h.is_zero() {
        LmOutcome {
            u: GridFunction::zeros(mesh),
            residual: 0.0,
            iterations: 0,
        }
    } else {
        let init = initial_guess(&eq)?;
        newton_lm(&eq, init, config)?
    };
    let mut total = best.iterations;
    let mut attempt = 0;
    while best.residual > config.tol && attempt < config.reseeds {
        attempt += 1;
        let mut rng = probes::rng(config.seed.wrapping_add(attempt as u64));
        let amp = RESEED_AMPLITUDE * best.u.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let noise = probes::random_nodal(mesh, &mut rng, amp);
        let start = GridFunction::from_parts(
            mesh,
            best.u.values().iter().zip(noise.values()).map(|(a, b)| a + b).collect(),
        );
        let out = newton_lm(&eq, start, config)?;
        total += out.iterations;
        if out.residual < best.residual {
            best = out;
        }
    }
    // certify from a fresh assembly
    let residual = eq.residual(&best.u)?;
    Ok(SolveReport {
        lambda,
        rhs_tag: rhs_tag.to_string(),
        converged: residual <= config.tol,
        residual,
        iterations: total,
        solution: best.u,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub converged: bool,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMeta {
    pub p: f64,
    pub p0: f64,
    pub p1: f64,
    pub mesh: Mesh,
    pub rhs_tag: String,
    pub rhs_norm: f64,
    pub lambda_disc: f64,
    pub margin: f64,
    /// Every row below `lambda_disc (1 - margin)` converged.
    pub required_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub metadata: SweepMeta,
}

/// One solve per `lambda`, run in parallel and assembled in input order.
/// `lambda_disc` is computed with `eig_config` when not supplied.
#[allow(clippy::too_many_arguments)]
pub fn lambda_sweep(
    p0: f64,
    p1: f64,
    lambdas: &[f64],
    h: &GridFunction,
    rhs_tag: &str,
    lambda_disc: Option<f64>,
    config: &SolveConfig,
    eig_config: &MinimizeConfig,
) -> Result<SweepTable> {
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("lambda sweep needs at least one value".into()));
    }
    if lambdas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("sweep lambdas must be strictly increasing".into()));
    }
    config.validate()?;
    Equation::new(p0, p1, lambdas[0], h)?;
    let mesh = *h.mesh();
    let disc = match lambda_disc {
        Some(v) => v,
        None => lambda_p0p1(p0, p1, mesh, eig_config)?.lambda_power,
    };
    let reports: Vec<Result<SolveReport>> = lambdas
        .par_iter()
        .map(|&l| solve_tagged(p0, p1, l, h, rhs_tag, config))
        .collect();
    let mut rows = Vec::with_capacity(lambdas.len());
    for r in reports {
        let r = r?;
        rows.push(SweepRow {
            lambda: r.lambda,
            converged: r.converged,
            residual: r.residual,
            iterations: r.iterations,
        });
    }
    let threshold = disc * (1.0 - SWEEP_MARGIN);
    let required_ok = rows.iter().filter(|r| r.lambda < threshold).all(|r| r.converged);
    Ok(SweepTable {
        rows,
        metadata: SweepMeta {
            p: p0 + p1,
            p0,
            p1,
            mesh,
            rhs_tag: rhs_tag.to_string(),
            rhs_norm: h.norm_l2(),
            lambda_disc: disc,
            margin: SWEEP_MARGIN,
            required_ok,
        },
    })
}

/// `lambda L^{-1} G(v)` with `L` the discrete negative Laplacian.
pub fn fixed_point_map(lambda: f64, g: &OperatorSpec, v: &GridFunction) -> Result<GridFunction> {
    let gv = g.apply(v)?;
    Ok(PoissonSolver::new(*v.mesh()).solve(&gv)?.scaled(lambda))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedRay {
    /// `lambda` with `lambda L^{-1} G(v) = v` on the converged ray.
    pub lambda: f64,
    /// `||map(v) - v||_2` at the unit-norm ray element.
    pub defect: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Normalized power iteration for the ray on which the fixed-point map
/// acts as the identity, for degree-one `G`.
pub fn fixed_ray(g: &OperatorSpec, mesh: Mesh, seed: u64, max_iter: usize) -> Result<FixedRay> {
    let solver = PoissonSolver::new(mesh);
    let mut rng = probes::rng(seed);
    let mut v = probes::perturbed_ground_state(mesh, &mut rng, RESEED_AMPLITUDE);
    v = v.scaled(1.0 / v.norm_l2());
    let mut lambda = f64::NAN;
    let mut defect = f64::INFINITY;
    for it in 1..=max_iter.max(1) {
        let w = solver.solve(&g.apply(&v)?)?;
        let wn = w.norm_l2();
        if !(wn > 0.0) {
            return Err(Error::ZeroFunction);
        }
        lambda = v.dot(&v)? / w.dot(&v)?;
        defect = w.scaled(lambda).sub(&v)?.norm_l2();
        v = w.scaled(1.0 / wn);
        if defect <= FIXED_POINT_TOL {
            return Ok(FixedRay {
                lambda,
                defect,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(FixedRay {
        lambda,
        defect,
        iterations: max_iter,
        converged: false,
    })
}

/// Geometric decay rate of `v_{k+1} = map(v_k)` from a seeded random start,
/// fitted over the second half of `steps` iterations.
pub fn contraction_ratio(lambda: f64, g: &OperatorSpec, mesh: Mesh, seed: u64, steps: usize) -> Result<f64> {
    if steps < 4 {
        return Err(Error::param("steps", steps as f64, "steps >= 4"));
    }
    let mut v = probes::random_nodal(mesh, &mut probes::rng(seed), 1.0);
    let mut norms = vec![v.norm_l2()];
    for _ in 0..steps {
        v = fixed_point_map(lambda, g, &v)?;
        norms.push(v.norm_l2());
    }
    let k0 = steps / 2;
    let ratio = (norms[steps] / norms[k0]).powf(1.0 / (steps - k0) as f64);
    Ok(ratio)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    /// No sample violated the necessary condition.
    pub admissible: bool,
    /// `min <f_lambda(x), x> - <h, x>` over the samples.
    pub margin: f64,
    pub samples: usize,
    pub radius: f64,
}

/// Samples `+-x` on the sphere `||grad x||_p = radius` and tests
/// `<h, x> <= <f_lambda(x), x>`. Passing is necessary, never sufficient.
pub fn check_admissible(
    p0: f64,
    p1: f64,
    lambda: f64,
    h: &GridFunction,
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<Admissibility> {
    if samples == 0 {
        return Err(Error::param("samples", 0.0, "samples >= 1"));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::param("radius", radius, "radius > 0"));
    }
    let eq = Equation::new(p0, p1, lambda, h)?;
    let p = p0 + p1;
    let mesh = eq.mesh();
    let mut rng = probes::rng(seed);
    let mut margin = f64::INFINITY;
    let mut drawn = 0;
    while drawn < samples {
        let raw = probes::random_nodal(mesh, &mut rng, 1.0);
        let gn = lp_norm(&gradient(&raw), p)?;
        if !(gn > 0.0) {
            continue;
        }
        let x = raw.scaled(radius / gn);
        let coercive = eq.f.pairing(&x, &x)? - lambda * eq.g.pairing(&x, &x)?;
        let load = h.dot(&x)?;
        margin = margin.min(coercive - load.abs());
        drawn += 1;
    }
    Ok(Admissibility {
        admissible: margin >= 0.0,
        margin,
        samples,
        radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn footprint_coloring_separates_columns() {
        let mesh = Mesh::unit_square(7).unwrap();
        for r in 0..mesh.node_count() {
            let (i, j) = node_ij(&mesh, r);
            let cols: Vec<usize> = footprint(2)
                .iter()
                .filter_map(|&(di, dj)| node_at(&mesh, i + di, j + dj))
                .collect();
            let mut colors: Vec<usize> = cols.iter().map(|&c| color_of(&mesh, c)).collect();
            colors.sort();
            colors.dedup();
            assert_eq!(colors.len(), cols.len());
        }
    }

    #[test]
    fn jacobian_matches_linear_operator() {
        let mesh = Mesh::unit_square(6).unwrap();
        let h = GridFunction::zeros(mesh);
        let eq = Equation::new(2.0, 0.0, 1.5, &h).unwrap();
        let u = probes::random_nodal(mesh, &mut probes::rng(2), 1.0);
        let rows = jacobian(&eq, &u).unwrap();
        let e = GridFunction::sine_mode(mesh, &[1, 2]);
        let expected = eq.residual_vec(&e).unwrap();
        for (r, row) in rows.iter().enumerate() {
            let jv: f64 = row.iter().map(|&(c, v)| v * e.values()[c]).sum();
            assert!((jv - expected[r]).abs() < 1e-6 * (1.0 + expected[r].abs()));
        }
    }

    #[test]
    fn poisson_with_sine_load() {
        let mesh = Mesh::unit_interval(256).unwrap();
        let h = GridFunction::ground_state(mesh).scaled(PI * PI);
        let rep = solve_flambda(2.0, 0.0, 0.0, &h, &SolveConfig::default()).unwrap();
        assert!(rep.converged);
        assert!(rep.residual <= 1e-8);
        let exact = GridFunction::ground_state(mesh);
        assert!(rep.solution.sub(&exact).unwrap().norm_l2() < 1e-3);
    }

    #[test]
    fn zero_load_gives_zero() {
        let mesh = Mesh::unit_interval(32).unwrap();
        let rep = solve_flambda(2.0, 2.0, 3.0, &GridFunction::zeros(mesh), &SolveConfig::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.residual, 0.0);
        assert!(rep.solution.is_zero());
    }

    #[test]
    fn fixed_point_map_cases() {
        let mesh = Mesh::unit_interval(64).unwrap();
        let g = OperatorSpec::power_identity(2.0).unwrap();
        let v = GridFunction::ground_state(mesh);
        assert!(fixed_point_map(0.0, &g, &v).unwrap().is_zero());
        let ray = fixed_ray(&g, mesh, 1, 500).unwrap();
        assert!(ray.converged);
        let mapped = fixed_point_map(ray.lambda, &g, &v).unwrap();
        assert!(mapped.sub(&v).unwrap().norm_l2() < 1e-2 * v.norm_l2());
    }

    #[test]
    fn rhs_syntax() {
        assert_eq!("constant".parse::<Rhs>().unwrap(), Rhs::Constant { value: 1.0 });
        assert_eq!("mode:2.5".parse::<Rhs>().unwrap(), Rhs::Mode { scale: 2.5 });
        assert_eq!(
            "noise:0.1:4".parse::<Rhs>().unwrap(),
            Rhs::Noise { amplitude: 0.1, seed: 4 }
        );
        assert!("wave".parse::<Rhs>().is_err());
        assert!("noise:1:x".parse::<Rhs>().is_err());
    }

    #[test]
    fn sweep_validates_order() {
        let mesh = Mesh::unit_interval(16).unwrap();
        let h = GridFunction::from_fn(mesh, |_| 1.0);
        let cfg = SolveConfig::default();
        let eig = MinimizeConfig::default();
        assert!(lambda_sweep(2.0, 0.0, &[], &h, "c", Some(9.0), &cfg, &eig).is_err());
        assert!(lambda_sweep(2.0, 0.0, &[1.0, 1.0], &h, "c", Some(9.0), &cfg, &eig).is_err());
    }
}
