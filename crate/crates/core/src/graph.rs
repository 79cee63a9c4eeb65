//! Spatial k-NN graphs with Gaussian weights, their combinatorial
//! Laplacian, and the 0/1 temporal correspondence matrices.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cube::{Cube, SlotStatus};
use crate::error::{Error, Result};
use crate::geometry::{Point, Vec3};
use crate::spatial::SpatialIndex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub k: usize,
    pub sigma: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self { k: 8, sigma: 1.0 }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Argument("graph k must be at least 1".into()));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::Argument("sigma must be positive".into()));
        }
        Ok(())
    }

    pub fn weight(&self, distance: f64) -> f64 {
        (-distance * distance / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Undirected weighted graph over `n` slots.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGraph {
    n: usize,
    /// `(i, j, w)` with `i < j`, sorted.
    edges: Vec<(usize, usize, f64)>,
    degree: Vec<f64>,
}

impl SpatialGraph {
    /// Graph from explicit edges; duplicates are merged keeping the last weight.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, j, w) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::Graph(format!("invalid edge ({i}, {j}) for {n} nodes")));
            }
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::Graph(format!("edge weight {w} outside (0, 1]")));
            }
            map.insert((i.min(j), i.max(j)), w);
        }
        let edges: Vec<(usize, usize, f64)> = map.into_iter().map(|((i, j), w)| (i, j, w)).collect();
        let mut degree = vec![0.0; n];
        for &(i, j, w) in &edges {
            degree[i] += w;
            degree[j] += w;
        }
        Ok(Self { n, edges, degree })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    /// `L z` for a scalar signal.
    pub fn laplacian_apply(&self, z: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.degree.iter().zip(z).map(|(d, x)| d * x).collect();
        for &(i, j, w) in &self.edges {
            out[i] -= w * z[j];
            out[j] -= w * z[i];
        }
        out
    }

    /// `L` as a dense matrix.
    pub fn laplacian_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut l = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            l[(i, i)] = self.degree[i];
        }
        for &(i, j, w) in &self.edges {
            l[(i, j)] -= w;
            l[(j, i)] -= w;
        }
        l
    }

    /// Writes one `i j w` line per edge.
    pub fn write_edge_list(&self, mut out: impl Write) -> std::io::Result<()> {
        for &(i, j, w) in &self.edges {
            writeln!(out, "{i} {j} {w:.17e}")?;
        }
        Ok(())
    }
}

/// Directed k-NN over `positions`, symmetrized by union, with weights
/// `exp(-d^2 / (2 sigma^2))`. Edges whose weight underflows to zero are dropped.
pub fn build_knn_graph(positions: &[Point], cfg: &GraphConfig) -> Result<SpatialGraph> {
    cfg.validate()?;
    let n = positions.len();
    if n < 2 {
        return Err(Error::Graph(format!("need at least 2 slots, got {n}")));
    }
    let index = SpatialIndex::new(positions);
    let k = cfg.k.min(n - 1);
    let mut edges = Vec::with_capacity(n * k);
    for (i, p) in positions.iter().enumerate() {
        for (j, d) in index.nearest(p, k + 1)?.into_iter().filter(|&(j, _)| j != i).take(k) {
            let w = cfg.weight(d);
            if w > 0.0 {
                edges.push((i, j, w));
            }
        }
    }
    SpatialGraph::from_edges(n, edges)
}

/// `sum_{i~j} w_ij (z_i - z_j)^2` for a scalar signal.
pub fn smoothness_scalar(graph: &SpatialGraph, z: &[f64]) -> Result<f64> {
    check_len(graph, z.len())?;
    Ok(graph.edges.iter().map(|&(i, j, w)| w * (z[i] - z[j]).powi(2)).sum())
}

/// `sum_{i~j} w_ij ||z_i - z_j||^2`, i.e. `trace(Z^T L Z)`.
pub fn smoothness(graph: &SpatialGraph, z: &[Vec3]) -> Result<f64> {
    check_len(graph, z.len())?;
    Ok(graph.edges.iter().map(|&(i, j, w)| w * (z[i] - z[j]).norm_squared()).sum())
}

fn check_len(graph: &SpatialGraph, len: usize) -> Result<()> {
    if len != graph.n {
        return Err(Error::Shape(format!("signal of length {len} on a graph of {} nodes", graph.n)));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Previous,
    Next,
}

/// Sparse `n x m` 0/1 matrix with at most one entry per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalWeights {
    pub side: Side,
    /// Column of the single nonzero of each row, if any.
    pub mapping: Vec<Option<usize>>,
    /// Number of inter-source points (columns).
    pub m: usize,
}

impl TemporalWeights {
    pub fn empty(side: Side, n: usize) -> Self {
        Self {
            side,
            mapping: vec![None; n],
            m: 0,
        }
    }

    pub fn coverage(&self) -> f64 {
        if self.mapping.is_empty() {
            return 0.0;
        }
        self.mapping.iter().filter(|m| m.is_some()).count() as f64 / self.mapping.len() as f64
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.iter().all(Option::is_none)
    }

    pub fn dense(&self) -> nalgebra::DMatrix<f64> {
        let mut w = nalgebra::DMatrix::zeros(self.mapping.len(), self.m);
        for (r, c) in self.mapping.iter().enumerate() {
            if let Some(c) = c {
                w[(r, *c)] = 1.0;
            }
        }
        w
    }
}

/// Per-slot partner in the registered intra-source cube: known slots take
/// the nearest point by position, missing slots their donor.
pub fn intra_correspondents(target: &Cube, intra: &Cube) -> Result<Vec<Point>> {
    if intra.is_empty() {
        return Err(Error::Shape("intra-source cube is empty".into()));
    }
    let positions = intra.positions();
    let index = SpatialIndex::new(&positions);
    target
        .slots
        .iter()
        .map(|s| match s.status {
            SlotStatus::Known { .. } => Ok(positions[index.nearest_one(&s.position).expect("non-empty").0]),
            SlotStatus::Missing { donor } => positions
                .get(donor)
                .copied()
                .ok_or_else(|| Error::Shape(format!("donor {donor} outside the intra-source cube"))),
        })
        .collect()
}

/// Links each slot to its nearest inter-source point, queried at the slot's
/// own position (known) or its intra-source partner (missing). Links longer
/// than `max_dist` are dropped.
pub fn build_temporal_weights(
    side: Side,
    target: &Cube,
    intra_partners: &[Point],
    inter: &Cube,
    max_dist: f64,
) -> Result<TemporalWeights> {
    if intra_partners.len() != target.len() {
        return Err(Error::Shape(format!(
            "{} intra partners for {} slots",
            intra_partners.len(),
            target.len()
        )));
    }
    if !(max_dist > 0.0) {
        return Err(Error::Argument("temporal max distance must be positive".into()));
    }
    if inter.is_empty() {
        return Ok(TemporalWeights::empty(side, target.len()));
    }
    let positions = inter.positions();
    let index = SpatialIndex::new(&positions);
    let mapping = target
        .slots
        .iter()
        .zip(intra_partners)
        .map(|(s, partner)| {
            let q = if s.is_known() { s.position } else { *partner };
            index
                .nearest_one(&q)
                .filter(|&(_, d)| d <= max_dist)
                .map(|(j, _)| j)
        })
        .collect();
    Ok(TemporalWeights {
        side,
        mapping,
        m: positions.len(),
    })
}
