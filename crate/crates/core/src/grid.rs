//! Dirichlet meshes on intervals and rectangles, staggered differences and
//! the quadrature they induce.
//!
//! Only interior nodes are stored; the boundary trace of every
//! [`GridFunction`] is zero by construction. Gradients live on cells: the
//! edges of the 1D grid, or the two right triangles each square of the 2D
//! grid splits into (lower-left and upper-right). Both components of the
//! gradient are constant on a triangle, so the Euclidean length of the
//! gradient is well defined per cell, and `-div grad` reduces to the
//! standard three- and five-point Laplacians.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest interior node count accepted per axis.
pub const MIN_NODES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    dim: usize,
    extent: [f64; 2],
    n: [usize; 2],
    h: [f64; 2],
}

impl Mesh {
    pub fn interval(length: f64, n: usize) -> Result<Self> {
        Self::build(1, [length, 1.0], [n, 1])
    }

    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::build(2, [lx, ly], [nx, ny])
    }

    pub fn unit_interval(n: usize) -> Result<Self> {
        Self::interval(1.0, n)
    }

    pub fn unit_square(n: usize) -> Result<Self> {
        Self::rectangle(1.0, 1.0, n, n)
    }

    fn build(dim: usize, extent: [f64; 2], n: [usize; 2]) -> Result<Self> {
        let mut h = [1.0; 2];
        for axis in 0..dim {
            if !(extent[axis].is_finite() && extent[axis] > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "extent along axis {axis} must be positive, got {}",
                    extent[axis]
                )));
            }
            if n[axis] < MIN_NODES {
                return Err(Error::InvalidMesh(format!(
                    "need at least {MIN_NODES} interior nodes along axis {axis}, got {}",
                    n[axis]
                )));
            }
            h[axis] = extent[axis] / (n[axis] + 1) as f64;
        }
        Ok(Mesh { dim, extent, n, h })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent[..self.dim]
    }

    pub fn nodes_per_axis(&self) -> &[usize] {
        &self.n[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h[..self.dim]
    }

    pub fn node_count(&self) -> usize {
        self.n[..self.dim].iter().product()
    }

    pub fn cell_count(&self) -> usize {
        match self.dim {
            1 => self.n[0] + 1,
            _ => 2 * (self.n[0] + 1) * (self.n[1] + 1),
        }
    }

    /// Quadrature weight of one interior node (trapezoidal rule).
    pub fn node_weight(&self) -> f64 {
        self.h[..self.dim].iter().product()
    }

    /// Measure of one cell.
    pub fn cell_weight(&self) -> f64 {
        match self.dim {
            1 => self.h[0],
            _ => 0.5 * self.h[0] * self.h[1],
        }
    }

    pub fn vertices_per_cell(&self) -> usize {
        self.dim + 1
    }

    /// Total measure of the cells touching an interior node.
    pub fn incident_cell_weight(&self) -> f64 {
        match self.dim {
            1 => 2.0 * self.h[0],
            _ => 3.0 * self.h[0] * self.h[1],
        }
    }

    /// Physical coordinates of interior node `idx` (second entry is 0 in 1D).
    pub fn node_coords(&self, idx: usize) -> [f64; 2] {
        match self.dim {
            1 => [(idx + 1) as f64 * self.h[0], 0.0],
            _ => {
                let (i, j) = (idx % self.n[0], idx / self.n[0]);
                [(i + 1) as f64 * self.h[0], (j + 1) as f64 * self.h[1]]
            }
        }
    }

    /// Storage index of the node at full-grid position `(i, j)`, where
    /// positions 0 and n+1 are on the boundary.
    fn interior(&self, i: usize, j: usize) -> Option<usize> {
        let (nx, ny) = (self.n[0], self.n[1]);
        if i == 0 || i > nx {
            return None;
        }
        if self.dim == 1 {
            return Some(i - 1);
        }
        if j == 0 || j > ny {
            return None;
        }
        Some((i - 1) + nx * (j - 1))
    }

    pub(crate) fn cell_stencil(&self, k: usize) -> CellStencil {
        if self.dim == 1 {
            let inv = 1.0 / self.h[0];
            return CellStencil {
                vertices: [self.interior(k, 0), self.interior(k + 1, 0), None],
                coeffs: [[-inv, inv, 0.0], [0.0; 3]],
            };
        }
        let (ix, iy) = (1.0 / self.h[0], 1.0 / self.h[1]);
        let square = k / 2;
        let (a, b) = (square % (self.n[0] + 1), square / (self.n[0] + 1));
        if k.is_multiple_of(2) {
            // lower-left triangle: (a,b), (a+1,b), (a,b+1)
            CellStencil {
                vertices: [
                    self.interior(a, b),
                    self.interior(a + 1, b),
                    self.interior(a, b + 1),
                ],
                coeffs: [[-ix, ix, 0.0], [-iy, 0.0, iy]],
            }
        } else {
            // upper-right triangle: (a+1,b+1), (a,b+1), (a+1,b)
            CellStencil {
                vertices: [
                    self.interior(a + 1, b + 1),
                    self.interior(a, b + 1),
                    self.interior(a + 1, b),
                ],
                coeffs: [[ix, -ix, 0.0], [iy, 0.0, -iy]],
            }
        }
    }

    pub fn describe(&self) -> String {
        match self.dim {
            1 => format!("(0,{}) n={}", self.extent[0], self.n[0]),
            _ => format!(
                "(0,{})x(0,{}) n={}x{}",
                self.extent[0], self.extent[1], self.n[0], self.n[1]
            ),
        }
    }
}

/// Vertices of one cell and the constant gradient coefficients
/// `coeffs[component][vertex]`. Boundary vertices are `None`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CellStencil {
    pub vertices: [Option<usize>; 3],
    pub coeffs: [[f64; 3]; 2],
}

/// Nodal values of a function vanishing on the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    mesh: Mesh,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(mesh: Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::InvalidArgument(format!(
                "expected {} nodal values, got {}",
                mesh.node_count(),
                values.len()
            )));
        }
        Ok(GridFunction { mesh, values })
    }

    pub fn zeros(mesh: Mesh) -> Self {
        GridFunction {
            values: vec![0.0; mesh.node_count()],
            mesh,
        }
    }

    /// Interpolates `f` at the interior nodes.
    pub fn from_fn(mesh: Mesh, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..mesh.node_count())
            .map(|idx| {
                let x = mesh.node_coords(idx);
                f(&x[..mesh.dim])
            })
            .collect();
        GridFunction { mesh, values }
    }

    /// Product of sines `sin(k_x pi x / L_x) sin(k_y pi y / L_y)`; an exact
    /// eigenvector of the discrete Dirichlet Laplacian.
    pub fn sine_mode(mesh: Mesh, modes: &[usize]) -> Self {
        let ext = mesh.extent;
        let k = [modes.first().copied().unwrap_or(1), modes.get(1).copied().unwrap_or(1)];
        Self::from_fn(mesh, |x| {
            x.iter()
                .enumerate()
                .map(|(axis, &xa)| (k[axis] as f64 * std::f64::consts::PI * xa / ext[axis]).sin())
                .product()
        })
    }

    /// First Dirichlet eigenfunction of the Laplacian, interpolated.
    pub fn ground_state(mesh: Mesh) -> Self {
        Self::sine_mode(mesh, &[1, 1])
    }

    pub(crate) fn from_parts(mesh: Mesh, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), mesh.node_count());
        GridFunction { mesh, values }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, tau: f64) -> Self {
        self.map(|v| tau * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        GridFunction {
            mesh: self.mesh,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn ensure_same_mesh(&self, other: &GridFunction) -> Result<()> {
        if self.mesh != other.mesh {
            return Err(Error::MeshMismatch);
        }
        Ok(())
    }

    /// Discrete L2 pairing with trapezoidal weights.
    pub fn dot(&self, other: &GridFunction) -> Result<f64> {
        self.ensure_same_mesh(other)?;
        Ok(self.mesh.node_weight() * dot(&self.values, &other.values))
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.ensure_same_mesh(other)?;
        Ok(GridFunction {
            mesh: self.mesh,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn norm_l2(&self) -> f64 {
        (self.mesh.node_weight() * dot(&self.values, &self.values)).sqrt()
    }
}

/// Per-cell vectors (one component per space dimension).
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    mesh: Mesh,
    values: Vec<f64>,
}

impl CellField {
    pub fn new(mesh: Mesh, values: Vec<f64>) -> Result<Self> {
        let expected = mesh.cell_count() * mesh.dim();
        if values.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "expected {expected} cell components, got {}",
                values.len()
            )));
        }
        Ok(CellField { mesh, values })
    }

    pub fn zeros(mesh: Mesh) -> Self {
        CellField {
            values: vec![0.0; mesh.cell_count() * mesh.dim()],
            mesh,
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// Flat storage, `dim` consecutive components per cell.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell(&self, k: usize) -> &[f64] {
        let d = self.mesh.dim();
        &self.values[k * d..(k + 1) * d]
    }

    /// Euclidean length of the vector on each cell.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values
            .chunks(self.mesh.dim())
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }

    /// Builds a field from per-cell scalars times an existing field.
    pub fn scale_cells(&self, factors: &[f64]) -> CellField {
        let d = self.mesh.dim();
        let values = self
            .values
            .chunks(d)
            .zip(factors)
            .flat_map(|(c, &s)| c.iter().map(move |v| s * v))
            .collect();
        CellField {
            mesh: self.mesh,
            values,
        }
    }

    /// Discrete pairing of two cell fields.
    pub fn dot(&self, other: &CellField) -> Result<f64> {
        if self.mesh != other.mesh {
            return Err(Error::MeshMismatch);
        }
        Ok(self.mesh.cell_weight() * dot(&self.values, &other.values))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// First-order differences of raw nodal data including both boundary
/// values: `out[k] = (full[k+1] - full[k]) / h`.
pub fn staggered_differences(full: &[f64], h: f64) -> Vec<f64> {
    full.windows(2).map(|w| (w[1] - w[0]) / h).collect()
}

pub fn gradient(u: &GridFunction) -> CellField {
    let mesh = u.mesh;
    let d = mesh.dim();
    let mut values = vec![0.0; mesh.cell_count() * d];
    for k in 0..mesh.cell_count() {
        let st = mesh.cell_stencil(k);
        for comp in 0..d {
            let mut g = 0.0;
            for (v, vertex) in st.vertices.iter().enumerate() {
                if let Some(i) = vertex {
                    g += st.coeffs[comp][v] * u.values[*i];
                }
            }
            values[k * d + comp] = g;
        }
    }
    CellField { mesh, values }
}

/// Euclidean transpose of the gradient map (no quadrature weights).
pub(crate) fn gradient_transpose(q: &CellField) -> Vec<f64> {
    let mesh = q.mesh;
    let d = mesh.dim();
    let mut out = vec![0.0; mesh.node_count()];
    for k in 0..mesh.cell_count() {
        let st = mesh.cell_stencil(k);
        for (v, vertex) in st.vertices.iter().enumerate() {
            if let Some(i) = vertex {
                let mut acc = 0.0;
                for comp in 0..d {
                    acc += st.coeffs[comp][v] * q.values[k * d + comp];
                }
                out[*i] += acc;
            }
        }
    }
    out
}

/// Discrete divergence, defined so that `<-div q, v> = <q, grad v>`
/// exactly for every grid function `v`.
pub fn divergence(q: &CellField) -> GridFunction {
    let mesh = q.mesh;
    let scale = -mesh.cell_weight() / mesh.node_weight();
    let mut values = gradient_transpose(q);
    values.iter_mut().for_each(|v| *v *= scale);
    GridFunction { mesh, values }
}

/// `-div grad u`: the three-point (1D) or five-point (2D) Dirichlet
/// Laplacian with the sign that makes it positive definite.
pub fn neg_laplacian(u: &GridFunction) -> GridFunction {
    let mut out = divergence(&gradient(u));
    out.values.iter_mut().for_each(|v| *v = -*v);
    out
}

/// Trapezoidal quadrature with zero boundary values.
pub fn integrate(u: &GridFunction) -> f64 {
    u.mesh.node_weight() * u.values.iter().sum::<f64>()
}

/// Quadrature of a scalar per cell.
pub fn integrate_cells(mesh: &Mesh, per_cell: &[f64]) -> f64 {
    mesh.cell_weight() * per_cell.iter().sum::<f64>()
}

/// Fields carrying a quadrature rule.
pub trait Integrable {
    /// `integral of |f|^p`, with `|.|` the Euclidean length on cell fields.
    fn power_integral(&self, p: f64) -> f64;
}

impl Integrable for GridFunction {
    fn power_integral(&self, p: f64) -> f64 {
        self.mesh.node_weight() * self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>()
    }
}

impl Integrable for CellField {
    fn power_integral(&self, p: f64) -> f64 {
        self.mesh.cell_weight() * self.magnitudes().iter().map(|m| m.powf(p)).sum::<f64>()
    }
}

pub fn lp_norm<F: Integrable + ?Sized>(f: &F, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::param("p", p, "lp_norm requires finite p >= 1"));
    }
    Ok(f.power_integral(p).powf(1.0 / p))
}
