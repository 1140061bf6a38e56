//! Catalog of the nonlinear operators: strong-form evaluation, weak-form
//! duality pairing and homogeneity bookkeeping.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, gradient, gradient_transpose, neg_laplacian, CellField, GridFunction, Mesh};
use crate::scaling::loglog_fit;

/// Floor added under powers with negative exponent when assembling
/// derivatives.
pub const DERIVATIVE_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearTag {
    NegLaplacian,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorKind {
    /// `-div(|grad u|^(p-2) grad u)`
    PLaplacian { p: f64 },
    /// `|u|^(p0-2) u |grad u|^p1`
    GradWeightedPower { p0: f64, p1: f64 },
    /// `-div(|u|^(p-2) grad u)`
    DensityDiffusion { p: f64 },
    /// `|u|^(q-2) u`
    PowerIdentity { q: f64 },
    /// `|Lu|^(p-2) Lu`
    PoweredLinear { p: f64, linear: LinearTag },
    /// `-|Lap u|^(p-2) Lap u`, paired against `-Lap v`
    PoweredBilaplacian { p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    #[serde(flatten)]
    pub kind: OperatorKind,
    /// Asserted `F > G` order relation. Recorded, never checked.
    #[serde(default)]
    pub dominates: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityDegree {
    pub operator_degree: f64,
    pub pairing_degree: f64,
}

impl HomogeneityDegree {
    fn of(operator_degree: f64) -> Self {
        HomogeneityDegree {
            operator_degree,
            pairing_degree: operator_degree + 1.0,
        }
    }
}

/// `|x|^(s-2) x`, zero at the origin.
#[inline]
pub(crate) fn signed_pow(x: f64, s: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(s - 1.0).copysign(x)
    }
}

/// `d/dx |x|^s`, floored where `s < 2` so the origin stays finite.
#[inline]
pub(crate) fn abs_pow_derivative(x: f64, s: f64) -> f64 {
    if s == 0.0 || x == 0.0 {
        0.0
    } else if s >= 2.0 {
        s * signed_pow(x, s)
    } else {
        s * (x * x + DERIVATIVE_FLOOR).powf(0.5 * (s - 2.0)) * x
    }
}

/// `|v|^(s-2)` for a cell vector magnitude `m`, floored where `s < 2`.
#[inline]
fn magnitude_weight(m: f64, s: f64) -> f64 {
    if s >= 2.0 {
        m.powf(s - 2.0)
    } else {
        (m * m + DERIVATIVE_FLOOR).powf(0.5 * (s - 2.0))
    }
}

impl OperatorSpec {
    pub fn new(kind: OperatorKind) -> Result<Self> {
        let spec = OperatorSpec {
            kind,
            dominates: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn p_laplacian(p: f64) -> Result<Self> {
        Self::new(OperatorKind::PLaplacian { p })
    }

    pub fn grad_weighted_power(p0: f64, p1: f64) -> Result<Self> {
        Self::new(OperatorKind::GradWeightedPower { p0, p1 })
    }

    pub fn density_diffusion(p: f64) -> Result<Self> {
        Self::new(OperatorKind::DensityDiffusion { p })
    }

    pub fn power_identity(q: f64) -> Result<Self> {
        Self::new(OperatorKind::PowerIdentity { q })
    }

    pub fn powered_linear(p: f64, linear: LinearTag) -> Result<Self> {
        Self::new(OperatorKind::PoweredLinear { p, linear })
    }

    pub fn powered_bilaplacian(p: f64) -> Result<Self> {
        Self::new(OperatorKind::PoweredBilaplacian { p })
    }

    pub fn with_dominates(mut self, dominates: bool) -> Self {
        self.dominates = dominates;
        self
    }

    pub fn validate(&self) -> Result<()> {
        fn at_least(field: &str, v: f64, min: f64, constraint: &'static str) -> Result<()> {
            if v.is_finite() && v >= min {
                Ok(())
            } else {
                Err(Error::param(field, v, constraint))
            }
        }
        match self.kind {
            OperatorKind::PLaplacian { p }
            | OperatorKind::DensityDiffusion { p }
            | OperatorKind::PoweredLinear { p, .. }
            | OperatorKind::PoweredBilaplacian { p } => at_least("p", p, 2.0, "p >= 2"),
            OperatorKind::PowerIdentity { q } => at_least("q", q, 2.0, "q >= 2"),
            OperatorKind::GradWeightedPower { p0, p1 } => {
                at_least("p0", p0, 1.0, "p0 >= 1")?;
                at_least("p1", p1, 0.0, "p1 >= 0")?;
                at_least("p0+p1", p0 + p1, 2.0, "p = p0 + p1 >= 2")
            }
        }
    }

    /// Validates the exponents and that the mesh resolves the stencil.
    pub fn validate_on(&self, mesh: &Mesh) -> Result<()> {
        self.validate()?;
        if let OperatorKind::PoweredBilaplacian { .. } = self.kind {
            if mesh.nodes_per_axis().iter().any(|&n| n < 5) {
                return Err(Error::InvalidMesh(
                    "powered bilaplacian needs at least 5 interior nodes per axis".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn homogeneity_degree(&self) -> HomogeneityDegree {
        let d = match self.kind {
            OperatorKind::PLaplacian { p }
            | OperatorKind::DensityDiffusion { p }
            | OperatorKind::PoweredLinear { p, .. }
            | OperatorKind::PoweredBilaplacian { p } => p - 1.0,
            OperatorKind::PowerIdentity { q } => q - 1.0,
            OperatorKind::GradWeightedPower { p0, p1 } => p0 + p1 - 1.0,
        };
        HomogeneityDegree::of(d)
    }

    /// Exponent of the Lebesgue norm natural to this operator's pairing.
    pub fn natural_norm_exponent(&self) -> f64 {
        match self.kind {
            OperatorKind::PowerIdentity { q } => q,
            OperatorKind::GradWeightedPower { p0, p1 } => p0 + p1,
            OperatorKind::PLaplacian { p }
            | OperatorKind::DensityDiffusion { p }
            | OperatorKind::PoweredLinear { p, .. }
            | OperatorKind::PoweredBilaplacian { p } => p,
        }
    }

    /// Highest derivative order appearing in `<Op(u), u>`.
    pub fn energy_order(&self) -> u8 {
        match self.kind {
            OperatorKind::PowerIdentity { .. } => 0,
            OperatorKind::PoweredLinear {
                linear: LinearTag::Identity,
                ..
            } => 0,
            OperatorKind::GradWeightedPower { p1: 0.0, .. } => 0,
            OperatorKind::PLaplacian { .. }
            | OperatorKind::DensityDiffusion { .. }
            | OperatorKind::GradWeightedPower { .. } => 1,
            OperatorKind::PoweredLinear { .. } | OperatorKind::PoweredBilaplacian { .. } => 2,
        }
    }

    pub fn is_divergence_form(&self) -> bool {
        matches!(
            self.kind,
            OperatorKind::PLaplacian { .. } | OperatorKind::DensityDiffusion { .. }
        )
    }

    /// Discrete strong form `Op(u)` at the interior nodes.
    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        self.validate_on(u.mesh())?;
        let mesh = *u.mesh();
        let out = match self.kind {
            OperatorKind::PLaplacian { .. } | OperatorKind::DensityDiffusion { .. } => {
                return Ok(grid::divergence(&self.flux(u)).map(|v| -v));
            }
            OperatorKind::PowerIdentity { q } => u.values().iter().map(|&v| signed_pow(v, q)).collect(),
            OperatorKind::GradWeightedPower { p0, p1 } => {
                let m = nodal_gradient_power(u, p1);
                u.values()
                    .iter()
                    .zip(&m)
                    .map(|(&v, &mi)| signed_pow(v, p0) * mi)
                    .collect()
            }
            OperatorKind::PoweredLinear { p, linear } => {
                let lu = apply_linear(linear, u);
                lu.values().iter().map(|&v| signed_pow(v, p)).collect()
            }
            OperatorKind::PoweredBilaplacian { p } => {
                let lu = neg_laplacian(u);
                lu.values().iter().map(|&v| signed_pow(v, p)).collect()
            }
        };
        Ok(GridFunction::from_parts(mesh, out))
    }

    /// Cell flux of a divergence-form operator.
    fn flux(&self, u: &GridFunction) -> CellField {
        let g = gradient(u);
        match self.kind {
            OperatorKind::PLaplacian { p } => {
                let w: Vec<f64> = g.magnitudes().iter().map(|m| m.powf(p - 2.0)).collect();
                g.scale_cells(&w)
            }
            OperatorKind::DensityDiffusion { p } => g.scale_cells(&cell_density(u, p)),
            _ => unreachable!("flux requested for a non-divergence operator"),
        }
    }

    /// Duality pairing `<Op(u), v>`; weak form for divergence operators.
    pub fn pairing(&self, u: &GridFunction, v: &GridFunction) -> Result<f64> {
        u.ensure_same_mesh(v)?;
        self.validate_on(u.mesh())?;
        match self.kind {
            OperatorKind::PLaplacian { .. } | OperatorKind::DensityDiffusion { .. } => {
                self.flux(u).dot(&gradient(v))
            }
            OperatorKind::PoweredBilaplacian { .. } => self.apply(u)?.dot(&neg_laplacian(v)),
            _ => self.apply(u)?.dot(v),
        }
    }

    /// Euclidean gradient of `u -> <Op(u), u>` with respect to the nodal
    /// values.
    pub fn self_pairing_gradient(&self, u: &GridFunction) -> Result<Vec<f64>> {
        self.validate_on(u.mesh())?;
        let mesh = *u.mesh();
        let wn = mesh.node_weight();
        let grad = match self.kind {
            OperatorKind::PLaplacian { p } => {
                let flux = self.flux(u);
                let s = p * mesh.cell_weight();
                gradient_transpose(&flux).into_iter().map(|v| s * v).collect()
            }
            OperatorKind::DensityDiffusion { p } => {
                let g = gradient(u);
                let a = cell_density(u, p);
                let wc = mesh.cell_weight();
                let scaled = g.scale_cells(&a);
                let mut out: Vec<f64> = gradient_transpose(&scaled)
                    .into_iter()
                    .map(|v| 2.0 * wc * v)
                    .collect();
                let nv = mesh.vertices_per_cell() as f64;
                let mags = g.magnitudes();
                let vals = u.values();
                for (k, m) in mags.iter().enumerate() {
                    let st = mesh.cell_stencil(k);
                    let coeff = wc * m * m / nv;
                    for i in st.vertices.iter().flatten() {
                        out[*i] += coeff * abs_pow_derivative(vals[*i], p - 2.0);
                    }
                }
                out
            }
            OperatorKind::PowerIdentity { q } => u
                .values()
                .iter()
                .map(|&v| wn * q * signed_pow(v, q))
                .collect(),
            OperatorKind::GradWeightedPower { p0, p1 } => {
                let m = nodal_gradient_power(u, p1);
                let vals = u.values();
                let mut out: Vec<f64> = vals
                    .iter()
                    .zip(&m)
                    .map(|(&v, &mi)| wn * abs_pow_derivative(v, p0) * mi)
                    .collect();
                if p1 != 0.0 {
                    let g = gradient(u);
                    let mags = g.magnitudes();
                    let share = wn * mesh.cell_weight() / mesh.incident_cell_weight();
                    let factors: Vec<f64> = (0..mesh.cell_count())
                        .map(|k| {
                            let st = mesh.cell_stencil(k);
                            let beta: f64 = st
                                .vertices
                                .iter()
                                .flatten()
                                .map(|&i| vals[i].abs().powf(p0))
                                .sum();
                            share * beta * p1 * magnitude_weight(mags[k], p1)
                        })
                        .collect();
                    let extra = gradient_transpose(&g.scale_cells(&factors));
                    out.iter_mut().zip(extra).for_each(|(o, e)| *o += e);
                }
                out
            }
            OperatorKind::PoweredLinear { p, linear } => {
                let lu = apply_linear(linear, u);
                let vals = u.values();
                let inner: Vec<f64> = lu
                    .values()
                    .iter()
                    .zip(vals)
                    .map(|(&t, &x)| (p - 1.0) * t.abs().powf(p - 2.0) * x)
                    .collect();
                let back = apply_linear(linear, &GridFunction::from_parts(mesh, inner));
                lu.values()
                    .iter()
                    .zip(back.values())
                    .map(|(&t, &b)| wn * (signed_pow(t, p) + b))
                    .collect()
            }
            OperatorKind::PoweredBilaplacian { p } => {
                let lu = neg_laplacian(u);
                let f = GridFunction::from_parts(
                    mesh,
                    lu.values().iter().map(|&t| signed_pow(t, p)).collect(),
                );
                neg_laplacian(&f).values().iter().map(|&v| wn * p * v).collect()
            }
        };
        Ok(grad)
    }

    /// Least-squares slope of `log ||Op(tau u)||_2` against `log tau`.
    pub fn measure_homogeneity(&self, u: &GridFunction, scales: &[f64]) -> Result<f64> {
        if u.is_zero() {
            return Err(Error::ZeroFunction);
        }
        let mut distinct: Vec<f64> = scales.to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < 2 || distinct.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidArgument(
                "need at least two distinct positive scales".into(),
            ));
        }
        let mut xs = Vec::with_capacity(distinct.len());
        let mut ys = Vec::with_capacity(distinct.len());
        for &tau in &distinct {
            let norm = self.apply(&u.scaled(tau))?.norm_l2();
            if !(norm > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "operator vanishes on the scaled input (tau = {tau})"
                )));
            }
            xs.push(tau);
            ys.push(norm);
        }
        Ok(loglog_fit(&xs, &ys)?.exponent)
    }
}

fn apply_linear(linear: LinearTag, u: &GridFunction) -> GridFunction {
    match linear {
        LinearTag::NegLaplacian => neg_laplacian(u),
        LinearTag::Identity => u.clone(),
    }
}

/// Per-cell mean of `|u|^(p-2)` over the cell's vertices, boundary
/// vertices included with `u = 0`.
fn cell_density(u: &GridFunction, p: f64) -> Vec<f64> {
    let mesh = u.mesh();
    let nv = mesh.vertices_per_cell();
    let at_boundary = 0f64.powf(p - 2.0);
    let vals = u.values();
    (0..mesh.cell_count())
        .map(|k| {
            let st = mesh.cell_stencil(k);
            let s: f64 = st.vertices[..nv]
                .iter()
                .map(|v| match v {
                    Some(i) => vals[*i].abs().powf(p - 2.0),
                    None => at_boundary,
                })
                .sum();
            s / nv as f64
        })
        .collect()
}

/// Nodal `|grad u|^s`: the measure-weighted mean over the cells touching
/// each node.
pub(crate) fn nodal_gradient_power(u: &GridFunction, s: f64) -> Vec<f64> {
    let mesh = u.mesh();
    if s == 0.0 {
        return vec![1.0; mesh.node_count()];
    }
    let mags = gradient(u).magnitudes();
    let share = mesh.cell_weight() / mesh.incident_cell_weight();
    let mut out = vec![0.0; mesh.node_count()];
    for (k, m) in mags.iter().enumerate() {
        let st = mesh.cell_stencil(k);
        let contrib = share * m.powf(s);
        for i in st.vertices.iter().flatten() {
            out[*i] += contrib;
        }
    }
    out
}

impl fmt::Display for OperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            OperatorKind::PLaplacian { p } => write!(f, "plaplacian:p={p}")?,
            OperatorKind::GradWeightedPower { p0, p1 } => write!(f, "gradweighted:p0={p0},p1={p1}")?,
            OperatorKind::DensityDiffusion { p } => write!(f, "density:p={p}")?,
            OperatorKind::PowerIdentity { q } => write!(f, "power:q={q}")?,
            OperatorKind::PoweredLinear { p, linear } => {
                let l = match linear {
                    LinearTag::NegLaplacian => "laplacian",
                    LinearTag::Identity => "identity",
                };
                write!(f, "poweredlinear:p={p},l={l}")?
            }
            OperatorKind::PoweredBilaplacian { p } => write!(f, "bilaplacian:p={p}")?,
        }
        if self.dominates {
            write!(f, ",dominates=true")?;
        }
        Ok(())
    }
}

impl FromStr for OperatorSpec {
    type Err = Error;

    /// Accepts `kind:key=value,...` or `kind=<kind> key=value ...`.
    fn from_str(input: &str) -> Result<Self> {
        let syntax = |reason: String| Error::OperatorSyntax {
            input: input.to_string(),
            reason,
        };
        let trimmed = input.trim();
        let (kind_name, rest): (String, Vec<&str>) = if let Some(stripped) = trimmed.strip_prefix("kind=") {
            let mut parts = stripped.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty());
            let kind = parts.next().unwrap_or_default().to_string();
            (kind, parts.collect())
        } else {
            let (kind, tail) = trimmed.split_once(':').unwrap_or((trimmed, ""));
            (
                kind.to_string(),
                tail.split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|s| !s.is_empty())
                    .collect(),
            )
        };

        let mut params: Vec<(String, String)> = Vec::new();
        for item in rest {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| syntax(format!("expected key=value, got `{item}`")))?;
            params.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
        }
        let mut dominates = false;
        let mut numbers: Vec<(String, f64)> = Vec::new();
        let mut linear = LinearTag::NegLaplacian;
        for (k, v) in params {
            match k.as_str() {
                "dominates" => {
                    dominates = v
                        .parse()
                        .map_err(|_| syntax(format!("dominates must be true/false, got `{v}`")))?
                }
                "l" | "linear" => {
                    linear = match v.to_ascii_lowercase().as_str() {
                        "laplacian" | "neg_laplacian" | "-laplacian" => LinearTag::NegLaplacian,
                        "identity" | "id" => LinearTag::Identity,
                        other => return Err(syntax(format!("unknown linear operator `{other}`"))),
                    }
                }
                _ => {
                    let x: f64 = v
                        .parse()
                        .map_err(|_| syntax(format!("`{k}` must be a number, got `{v}`")))?;
                    numbers.push((k, x));
                }
            }
        }
        let take = |name: &str| -> Result<f64> {
            numbers
                .iter()
                .find(|(k, _)| k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| syntax(format!("missing parameter `{name}`")))
        };
        let allowed: &[&str] = match kind_name.to_ascii_lowercase().as_str() {
            "plaplacian" | "p_laplacian" | "density" | "density_diffusion" | "poweredlinear"
            | "powered_linear" | "bilaplacian" | "powered_bilaplacian" => &["p"],
            "power" | "power_identity" => &["q"],
            "gradweighted" | "grad_weighted_power" => &["p0", "p1"],
            other => return Err(syntax(format!("unknown operator kind `{other}`"))),
        };
        if let Some((k, _)) = numbers.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(syntax(format!("unexpected parameter `{k}`")));
        }
        let kind = match kind_name.to_ascii_lowercase().as_str() {
            "plaplacian" | "p_laplacian" => OperatorKind::PLaplacian { p: take("p")? },
            "density" | "density_diffusion" => OperatorKind::DensityDiffusion { p: take("p")? },
            "poweredlinear" | "powered_linear" => OperatorKind::PoweredLinear {
                p: take("p")?,
                linear,
            },
            "bilaplacian" | "powered_bilaplacian" => OperatorKind::PoweredBilaplacian { p: take("p")? },
            "power" | "power_identity" => OperatorKind::PowerIdentity { q: take("q")? },
            _ => OperatorKind::GradWeightedPower {
                p0: take("p0")?,
                p1: take("p1")?,
            },
        };
        Ok(OperatorSpec::new(kind)?.with_dominates(dominates))
    }
}
