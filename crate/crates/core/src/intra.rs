//! Intra-source search: the cube of the same frame whose surface looks most
//! like the target's, judged by the mean normal (DC) and the anisotropic
//! graph total variation (AGTV) of the normals.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::cube::Cube;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::graph::{build_knn_graph, GraphConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeDescriptor {
    pub dc: Vec3,
    pub agtv: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptorWeights {
    pub dc: f64,
    pub agtv: f64,
}

impl Default for DescriptorWeights {
    fn default() -> Self {
        Self { dc: 1.0, agtv: 1.0 }
    }
}

const EPS_DIV: f64 = 1e-12;

/// Descriptor over the known slots of `cube`; `normals[i]` belongs to slot `i`.
pub fn cube_descriptor(cube: &Cube, normals: &[Vec3], graph: &GraphConfig) -> Result<CubeDescriptor> {
    if normals.len() != cube.len() {
        return Err(Error::Shape(format!("{} normals for {} slots", normals.len(), cube.len())));
    }
    let (positions, ns): (Vec<_>, Vec<_>) = cube
        .slots
        .iter()
        .zip(normals)
        .filter(|(s, _)| s.is_known())
        .map(|(s, n)| (s.position, *n))
        .unzip();
    if positions.len() < 2 {
        return Err(Error::Descriptor(format!("{} known slots, need 2", positions.len())));
    }
    let sum: Vec3 = ns.iter().sum();
    let norm = sum.norm();
    if !(norm > 0.0) {
        return Err(Error::Descriptor("normals cancel out".into()));
    }
    let g = build_knn_graph(&positions, graph)?;
    let agtv = g
        .edges()
        .iter()
        .map(|&(i, j, w)| w * (ns[i] - ns[j]).lp_norm(1))
        .sum();
    Ok(CubeDescriptor {
        dc: sum / norm,
        agtv,
        n_points: positions.len(),
    })
}

/// Combined distance; both terms lie in `[0, 2]`.
pub fn descriptor_distance(a: &CubeDescriptor, b: &CubeDescriptor, w: &DescriptorWeights) -> f64 {
    w.dc * (1.0 - a.dc.dot(&b.dc)) + w.agtv * (a.agtv - b.agtv).abs() / (a.agtv + b.agtv + EPS_DIV)
}

/// Picks the best candidate for `target`. Candidates overlapping the
/// target's box, hole cubes, and candidates without a descriptor are skipped.
/// Returns the position in `candidates` and the descriptor distance.
pub fn find_intra_source(
    target: &Cube,
    target_desc: &CubeDescriptor,
    candidates: &[Cube],
    descriptors: &[Option<CubeDescriptor>],
    hole_cubes: &BTreeSet<usize>,
    weights: &DescriptorWeights,
) -> Result<(usize, f64)> {
    if descriptors.len() != candidates.len() {
        return Err(Error::Shape("one descriptor slot per candidate expected".into()));
    }
    let mut best: Option<(f64, f64, usize, usize)> = None;
    for (k, (c, d)) in candidates.iter().zip(descriptors).enumerate() {
        let Some(d) = d else { continue };
        if hole_cubes.contains(&c.id) || c.intersects(target) {
            continue;
        }
        let key = (
            descriptor_distance(target_desc, d, weights),
            (c.center - target.center).norm(),
            c.id,
            k,
        );
        let better = match &best {
            None => true,
            Some(b) => key.0 < b.0 || (key.0 == b.0 && (key.1 < b.1 || (key.1 == b.1 && key.2 < b.2))),
        };
        if better {
            best = Some(key);
        }
    }
    best.map(|(dist, _, _, k)| (k, dist)).ok_or(Error::NoCandidate)
}
