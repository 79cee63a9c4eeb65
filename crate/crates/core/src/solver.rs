//! Per-cube quadratic program and its closed-form solution.
//!
//! For slot positions `c` the objective is
//!
//! ```text
//! ||Ob (c - c_t)||^2 + alpha ||O (c - c_s)||^2 + gamma c^T L c
//!     + beta sum_side ||D_side (c - W_side c_side)||^2
//! ```
//!
//! where `O` / `Ob` select missing / known slots and `D_side` keeps only the
//! rows that have a temporal partner. Its minimizer solves `A c = B` with
//! `A = Ob + alpha O + beta (D_prev + D_next) + gamma L`. More than two
//! sides are allowed; each adds its own `D` and `W` term.

use serde::{Deserialize, Serialize};

use crate::cube::Cube;
use crate::error::{Error, Result};
use crate::geometry::{Point, Vec3};
use crate::graph::{SpatialGraph, TemporalWeights};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.5,
            gamma: 0.5,
        }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Argument(format!("{name} must be a finite non-negative number")));
            }
        }
        Ok(())
    }
}

/// Temporal partners on one side: the 0/1 map and the inter-source points.
#[derive(Debug, Clone)]
pub struct TemporalTerm {
    pub weights: TemporalWeights,
    pub points: Vec<Point>,
}

impl TemporalTerm {
    /// Row `i` of `W c_side`, `None` for rows without a partner.
    pub fn partner(&self, i: usize) -> Option<Point> {
        self.weights.mapping[i].map(|j| self.points[j])
    }
}

/// Compressed sparse rows of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    fn from_diag_and_edges(diag: &[f64], edges: &[(usize, usize, f64)]) -> Self {
        let n = diag.len();
        let mut rows: Vec<Vec<(usize, f64)>> = (0..n).map(|i| vec![(i, diag[i])]).collect();
        for &(i, j, v) in edges {
            rows[i].push((j, v));
            rows[j].push((i, v));
        }
        let mut row_start = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_start.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_start.push(cols.len());
        }
        Self {
            n,
            row_start,
            cols,
            vals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_start[r]..self.row_start[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_start[r]..self.row_start[r + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *o = s;
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for k in self.row_start[r]..self.row_start[r + 1] {
                m[(r, self.cols[k])] = self.vals[k];
            }
        }
        m
    }
}

/// Assembled linear system of one cube plus everything needed to evaluate
/// its objective.
#[derive(Debug, Clone)]
pub struct CubeSystem {
    pub a: CsrMatrix,
    pub b: Vec<Vec3>,
    /// `true` for known slots (diagonal of `Ob`).
    pub known: Vec<bool>,
    pub target: Vec<Point>,
    pub intra: Vec<Point>,
    /// One term per adjacent frame that survived the search.
    pub temporal: Vec<TemporalTerm>,
    pub graph: SpatialGraph,
    pub weights: Weights,
}

pub fn assemble_system(
    target: &Cube,
    intra_partners: &[Point],
    temporal: Vec<TemporalTerm>,
    graph: SpatialGraph,
    weights: Weights,
) -> Result<CubeSystem> {
    weights.validate()?;
    let n = target.len();
    if intra_partners.len() != n || graph.n() != n {
        return Err(Error::Shape(format!(
            "cube has {n} slots, intra partners {}, graph {}",
            intra_partners.len(),
            graph.n()
        )));
    }
    for term in &temporal {
        if term.weights.mapping.len() != n || term.weights.m != term.points.len() {
            return Err(Error::Shape("temporal map does not fit the cube".into()));
        }
    }
    let Weights { alpha, beta, gamma } = weights;
    let known: Vec<bool> = target.slots.iter().map(|s| s.is_known()).collect();
    let target_pos = target.positions();
    let mut diag = vec![0.0; n];
    let mut b = vec![Vec3::zeros(); n];
    for i in 0..n {
        if known[i] {
            diag[i] += 1.0;
            b[i] += target_pos[i].coords;
        } else {
            diag[i] += alpha;
            b[i] += alpha * intra_partners[i].coords;
        }
        for term in &temporal {
            if let Some(p) = term.partner(i) {
                diag[i] += beta;
                b[i] += beta * p.coords;
            }
        }
    }
    check_definite(&diag, &graph, gamma)?;
    let mut edges = Vec::with_capacity(graph.edges().len());
    if gamma > 0.0 {
        for (i, d) in graph.degree().iter().enumerate() {
            diag[i] += gamma * d;
        }
        edges.extend(graph.edges().iter().map(|&(i, j, w)| (i, j, -gamma * w)));
    }
    Ok(CubeSystem {
        a: CsrMatrix::from_diag_and_edges(&diag, &edges),
        b,
        known,
        target: target_pos,
        intra: intra_partners.to_vec(),
        temporal,
        graph,
        weights,
    })
}

/// `A` is positive definite iff every graph component holds a slot with
/// positive mass outside the Laplacian.
fn check_definite(mass: &[f64], graph: &SpatialGraph, gamma: f64) -> Result<()> {
    let n = mass.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    if gamma > 0.0 {
        for &(i, j, _) in graph.edges() {
            let (a, b) = (root(&mut parent, i), root(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut anchored = vec![false; n];
    for i in 0..n {
        if mass[i] > 0.0 {
            let r = root(&mut parent, i);
            anchored[r] = true;
        }
    }
    for i in 0..n {
        let r = root(&mut parent, i);
        if !anchored[r] {
            return Err(Error::Singular { slot: i });
        }
    }
    Ok(())
}

impl CubeSystem {
    pub fn n(&self) -> usize {
        self.known.len()
    }

    /// Objective value at `c`, with unmatched temporal rows left out.
    pub fn objective(&self, c: &[Point]) -> f64 {
        self.evaluate(c, false)
    }

    /// Objective with every temporal row present; unmatched rows of
    /// `W c_side` are zero. Equals [`Self::objective`] under full coverage.
    pub fn objective_unmasked(&self, c: &[Point]) -> f64 {
        self.evaluate(c, true)
    }

    fn evaluate(&self, c: &[Point], unmasked: bool) -> f64 {
        let Weights { alpha, beta, gamma } = self.weights;
        let mut fidelity = 0.0;
        let mut intra = 0.0;
        let mut temporal = 0.0;
        for i in 0..self.n() {
            if self.known[i] {
                fidelity += (c[i] - self.target[i]).norm_squared();
            } else {
                intra += (c[i] - self.intra[i]).norm_squared();
            }
            for term in &self.temporal {
                match term.partner(i) {
                    Some(p) => temporal += (c[i] - p).norm_squared(),
                    None if unmasked => temporal += c[i].coords.norm_squared(),
                    None => {}
                }
            }
        }
        let smooth: f64 = self
            .graph
            .edges()
            .iter()
            .map(|&(i, j, w)| w * (c[i] - c[j]).norm_squared())
            .sum();
        fidelity + alpha * intra + gamma * smooth + beta * temporal
    }

    /// Largest per-coordinate relative residual `||A c - B|| / ||B||`.
    pub fn residual(&self, c: &[Point]) -> f64 {
        let n = self.n();
        let mut worst: f64 = 0.0;
        let mut ax = vec![0.0; n];
        for k in 0..3 {
            let x: Vec<f64> = c.iter().map(|p| p[k]).collect();
            self.a.mul_vec(&x, &mut ax);
            let (mut r2, mut b2) = (0.0, 0.0);
            for i in 0..n {
                r2 += (ax[i] - self.b[i][k]).powi(2);
                b2 += self.b[i][k].powi(2);
            }
            let rel = if b2 > 0.0 { (r2 / b2).sqrt() } else { r2.sqrt() };
            worst = worst.max(rel);
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub positions: Vec<Point>,
    /// Largest relative residual over the three coordinates.
    pub residual: f64,
    pub iterations: usize,
}

const RESIDUAL_BOUND: f64 = 1e-9;

/// Solves `A c = B` column-wise with Jacobi-preconditioned conjugate
/// gradients, starting from the data term's own fill.
pub fn solve_cube(system: &CubeSystem) -> Result<Solution> {
    let n = system.n();
    let inv_diag: Vec<f64> = system.a.diagonal().iter().map(|d| 1.0 / d).collect();
    let start: Vec<Point> = (0..n)
        .map(|i| if system.known[i] { system.target[i] } else { system.intra[i] })
        .collect();
    let mut positions = start.clone();
    let mut iterations = 0;
    for k in 0..3 {
        let b: Vec<f64> = system.b.iter().map(|v| v[k]).collect();
        let mut x: Vec<f64> = start.iter().map(|p| p[k]).collect();
        iterations = iterations.max(pcg(&system.a, &inv_diag, &b, &mut x));
        for (p, v) in positions.iter_mut().zip(&x) {
            p[k] = *v;
        }
    }
    let residual = system.residual(&positions);
    if !(residual <= RESIDUAL_BOUND) {
        return Err(Error::Solver(format!("relative residual {residual:.3e} after {iterations} iterations")));
    }
    Ok(Solution {
        positions,
        residual,
        iterations,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pcg(a: &CsrMatrix, inv_diag: &[f64], b: &[f64], x: &mut [f64]) -> usize {
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return 0;
    }
    let tol = 1e-15 * b_norm;
    let mut ax = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut best = x.to_vec();
    let mut best_norm = f64::INFINITY;
    let mut total = 0;
    // a few restarts from the true residual recover digits lost to drift
    for _ in 0..4 {
        a.mul_vec(x, &mut ax);
        for i in 0..n {
            r[i] = b[i] - ax[i];
        }
        let r_norm = dot(&r, &r).sqrt();
        if r_norm < best_norm {
            best_norm = r_norm;
            best.copy_from_slice(x);
        }
        if r_norm <= tol {
            break;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        for _ in 0..(2 * n + 20) {
            total += 1;
            a.mul_vec(&p, &mut ax);
            let pap = dot(&p, &ax);
            if !(pap > 0.0) {
                break;
            }
            let step = rz / pap;
            for i in 0..n {
                x[i] += step * p[i];
                r[i] -= step * ax[i];
            }
            if dot(&r, &r).sqrt() <= tol {
                break;
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_next = dot(&r, &z);
            let ratio = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + ratio * p[i];
            }
        }
    }
    a.mul_vec(x, &mut ax);
    let r_norm = b.iter().zip(&ax).map(|(bi, ai)| (bi - ai).powi(2)).sum::<f64>().sqrt();
    if r_norm > best_norm {
        x.copy_from_slice(&best);
    }
    total
}
