//! Direct solvers: the Dirichlet Laplacian diagonalized in the discrete sine
//! basis, and banded Cholesky and pivoted LU factorizations for Newton systems.

#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};
use crate::grid::{GridFunction, Mesh};

/// Exact inverse of `-div grad` on a mesh through the separable sine basis.
#[derive(Debug, Clone)]
pub struct PoissonSolver {
    mesh: Mesh,
    // orthonormal DST-I matrices per axis (symmetric, self-inverse)
    bases: Vec<Vec<f64>>,
    eigenvalues: Vec<Vec<f64>>,
}

impl PoissonSolver {
    pub fn new(mesh: Mesh) -> Self {
        let mut bases = Vec::with_capacity(mesh.dim());
        let mut eigenvalues = Vec::with_capacity(mesh.dim());
        for axis in 0..mesh.dim() {
            let n = mesh.nodes_per_axis()[axis];
            let h = mesh.spacing()[axis];
            let norm = (2.0 / (n + 1) as f64).sqrt();
            let theta = std::f64::consts::PI / (n + 1) as f64;
            let mut s = vec![0.0; n * n];
            for j in 0..n {
                for k in 0..n {
                    s[j * n + k] = norm * (((j + 1) * (k + 1)) as f64 * theta).sin();
                }
            }
            bases.push(s);
            eigenvalues.push(
                (1..=n)
                    .map(|k| {
                        let half = 0.5 * k as f64 * theta;
                        4.0 / (h * h) * half.sin().powi(2)
                    })
                    .collect(),
            );
        }
        PoissonSolver {
            mesh,
            bases,
            eigenvalues,
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// Smallest eigenvalue of the discrete operator, in closed form.
    pub fn lowest_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().map(|ev| ev[0]).sum()
    }

    fn transform(&self, x: &mut [f64]) {
        let n = self.mesh.nodes_per_axis();
        match self.mesh.dim() {
            1 => {
                let y = apply_dense(&self.bases[0], n[0], x);
                x.copy_from_slice(&y);
            }
            _ => {
                let (nx, ny) = (n[0], n[1]);
                for row in x.chunks_mut(nx) {
                    let y = apply_dense(&self.bases[0], nx, row);
                    row.copy_from_slice(&y);
                }
                let mut col = vec![0.0; ny];
                for i in 0..nx {
                    for j in 0..ny {
                        col[j] = x[i + nx * j];
                    }
                    let y = apply_dense(&self.bases[1], ny, &col);
                    for j in 0..ny {
                        x[i + nx * j] = y[j];
                    }
                }
            }
        }
    }

    /// Applies `(-div grad)^(-power)` to raw nodal values.
    pub fn apply_inverse_power(&self, rhs: &[f64], power: i32) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.transform(&mut x);
        let n = self.mesh.nodes_per_axis();
        match self.mesh.dim() {
            1 => {
                for (v, lam) in x.iter_mut().zip(&self.eigenvalues[0]) {
                    *v /= lam.powi(power);
                }
            }
            _ => {
                for j in 0..n[1] {
                    for i in 0..n[0] {
                        let lam = self.eigenvalues[0][i] + self.eigenvalues[1][j];
                        x[i + n[0] * j] /= lam.powi(power);
                    }
                }
            }
        }
        self.transform(&mut x);
        x
    }

    /// Solves `-div grad u = f`.
    pub fn solve(&self, f: &GridFunction) -> Result<GridFunction> {
        if f.mesh() != &self.mesh {
            return Err(Error::MeshMismatch);
        }
        Ok(GridFunction::from_parts(
            self.mesh,
            self.apply_inverse_power(f.values(), 1),
        ))
    }
}

fn apply_dense(m: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    (0..n)
        .map(|j| m[j * n..(j + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// Symmetric positive definite band matrix, lower band stored row-wise:
/// `band[i * (bw + 1) + (bw - (i - j))]` holds entry `(i, j)` for
/// `i - bw <= j <= i`.
#[derive(Debug, Clone)]
pub struct BandedSpd {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSpd {
            n,
            bw,
            band: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (self.bw - (i - j))
    }

    /// Entry `(i, j)` of the symmetric matrix; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            return 0.0;
        }
        self.band[self.slot(i, j)]
    }

    /// Adds `value` to entry `(i, j)` (and its mirror).
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry ({i},{j}) outside band {}", self.bw);
        let s = self.slot(i, j);
        self.band[s] += value;
    }

    /// In-place Cholesky factorization `A = L L^T`.
    pub fn factor(mut self) -> Result<BandedCholesky> {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut sum = self.band[self.slot(i, j)];
                for k in k0..j {
                    sum -= self.band[self.slot(i, k)] * self.band[self.slot(j, k)];
                }
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return Err(Error::LinearSolve(format!(
                            "matrix not positive definite at pivot {i} ({sum:e})"
                        )));
                    }
                    let s = self.slot(i, i);
                    self.band[s] = sum.sqrt();
                } else {
                    let s = self.slot(i, j);
                    self.band[s] = sum / self.band[self.slot(j, j)];
                }
            }
        }
        Ok(BandedCholesky { factor: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    factor: BandedSpd,
}

impl BandedCholesky {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let l = &self.factor;
        let (n, bw) = (l.n, l.bw);
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= l.band[l.slot(i, k)] * y[k];
            }
            y[i] = s / l.band[l.slot(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n.min(i + bw + 1) {
                s -= l.band[l.slot(k, i)] * y[k];
            }
            y[i] = s / l.band[l.slot(i, i)];
        }
        y
    }
}

/// General band matrix with `kl` sub- and `ku` super-diagonals, with
/// room for the fill produced by partial pivoting.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    rows: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandedMatrix {
            n,
            kl,
            ku,
            width,
            rows: vec![0.0; n * width],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i},{j}) outside band ({}, {})",
            self.kl,
            self.ku
        );
        let s = self.slot(i, j);
        self.rows[s] += value;
    }

    /// LU factorization with partial pivoting.
    pub fn factor(mut self) -> Result<BandedLu> {
        let (n, kl) = (self.n, self.kl);
        let reach = self.ku + self.kl;
        let mut piv = vec![0usize; n];
        let scale = self.rows.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut best = k;
            for r in k + 1..=last {
                if self.rows[self.slot(r, k)].abs() > self.rows[self.slot(best, k)].abs() {
                    best = r;
                }
            }
            piv[k] = best;
            let pivot = self.rows[self.slot(best, k)];
            if !(pivot.abs() > f64::EPSILON * scale * 1e-4) || !pivot.is_finite() {
                return Err(Error::LinearSolve(format!("singular band matrix at column {k}")));
            }
            let cols = (k + reach).min(n - 1);
            if best != k {
                for j in k..=cols {
                    let (a, b) = (self.slot(k, j), self.slot(best, j));
                    self.rows.swap(a, b);
                }
            }
            for i in k + 1..=last {
                let s = self.slot(i, k);
                let m = self.rows[s] / pivot;
                self.rows[s] = m;
                if m != 0.0 {
                    for j in k + 1..=cols {
                        let (t, u) = (self.slot(i, j), self.slot(k, j));
                        self.rows[t] -= m * self.rows[u];
                    }
                }
            }
        }
        Ok(BandedLu { lu: self, piv })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    lu: BandedMatrix,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let a = &self.lu;
        let (n, kl) = (a.n, a.kl);
        let reach = a.ku + a.kl;
        let mut b = rhs.to_vec();
        for k in 0..n {
            b.swap(k, self.piv[k]);
            let bk = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= a.rows[a.slot(i, k)] * bk;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + reach).min(n - 1) {
                s -= a.rows[a.slot(k, j)] * b[j];
            }
            b[k] = s / a.rows[a.slot(k, k)];
        }
        b
    }
}
