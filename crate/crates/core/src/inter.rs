//! Inter-source search: the window of an adjacent frame that best explains
//! the target cube, found by a nearest-neighbour vote over a search box.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::cube::Cube;
use crate::error::{Error, Result};
use crate::geometry::{Point, PointCloud, Vec3};
use crate::registration::{structure_match, IcpParams, RegistrationInfo, RigidTransform};
use crate::spatial::SpatialIndex;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBox {
    pub center: Point,
    pub edge_length_box: f64,
    pub frame_id: usize,
}

impl SearchBox {
    /// Box of side `scale * edge` around the target's centre.
    pub fn around(target: &Cube, scale: f64, frame_id: usize) -> Result<Self> {
        if !(scale >= 1.0 && scale.is_finite()) {
            return Err(Error::Argument("box scale must be at least 1".into()));
        }
        Ok(Self {
            center: target.center,
            edge_length_box: scale * target.edge_length,
            frame_id,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoteResult {
    pub best_center: [f64; 3],
    pub votes: usize,
    pub total_queries: usize,
}

fn half_vec(h: f64) -> Vec3 {
    Vec3::new(h, h, h)
}

/// Points of `adjacent` inside the target's box, as a cube of that frame.
pub fn co_located_cube(target: &Cube, adjacent: &PointCloud, index: &SpatialIndex, frame_id: usize) -> Cube {
    let h = half_vec(target.half());
    let members = index.within_box(&(target.center - h), &(target.center + h));
    Cube::from_indices(
        target.id,
        frame_id,
        target.center,
        target.edge_length,
        target.voxel_pitch,
        &adjacent.points,
        members,
    )
}

/// Lattice offsets of candidate windows, in visiting order: nearest to the
/// box centre first, then lexicographic.
pub fn window_offsets(edge_length: f64, edge_length_box: f64, window_stride: f64) -> Result<Vec<Vector3<i64>>> {
    if !(window_stride > 0.0 && window_stride.is_finite()) {
        return Err(Error::Argument("window stride must be positive".into()));
    }
    if edge_length_box < edge_length {
        return Err(Error::Argument("search box is smaller than a cube".into()));
    }
    let reach = ((edge_length_box - edge_length) / 2.0 / window_stride * (1.0 + 1e-9)).floor() as i64;
    let mut offsets = Vec::with_capacity(((2 * reach + 1) as usize).pow(3));
    for x in -reach..=reach {
        for y in -reach..=reach {
            for z in -reach..=reach {
                offsets.push(Vector3::new(x, y, z));
            }
        }
    }
    offsets.sort_by_key(|j| (j.dot(j), j.x, j.y, j.z));
    Ok(offsets)
}

/// Finds the window of `adjacent` inside `search` that holds the most
/// relative-location nearest neighbours of the target's known slots.
///
/// The vote of window centre `u` counts the slots `s` whose nearest box
/// point to `u + s.relative` lies inside the window and no farther than
/// `vote_gate` from the query (`f64::INFINITY` disables the gate). The
/// search is exact: a window is abandoned as soon as it can no longer beat
/// the best vote.
pub fn search_inter_source(
    target: &Cube,
    adjacent: &PointCloud,
    index: &SpatialIndex,
    search: &SearchBox,
    window_stride: f64,
    vote_gate: f64,
) -> Result<(Cube, VoteResult)> {
    if !(vote_gate > 0.0) {
        return Err(Error::Argument("vote gate must be positive".into()));
    }
    let e = target.edge_length;
    let offsets = window_offsets(e, search.edge_length_box, window_stride)?;
    let hb = half_vec(search.edge_length_box / 2.0);
    let members = index.within_box(&(search.center - hb), &(search.center + hb));
    if members.is_empty() {
        return Err(Error::NoInterSource);
    }
    let box_points: Vec<Point> = members.iter().map(|&i| adjacent.points[i]).collect();
    let local = SpatialIndex::new(&box_points);

    // slots closest to the window boundary fail most often, so test them first
    let h = target.half();
    let mut rel: Vec<Vec3> = target.known().map(|s| s.relative).collect();
    rel.sort_by(|a, b| (h - a.amax()).total_cmp(&(h - b.amax())));
    let n = rel.len();

    let mut best: Option<(usize, Point)> = None;
    for j in &offsets {
        let u = search.center + j.cast::<f64>() * window_stride;
        let floor = best.map_or(0, |(v, _)| v + 1);
        if n < floor {
            break;
        }
        let mut misses = 0;
        let mut votes = 0;
        for r in &rel {
            let (k, d) = local.nearest_one(&(u + r)).expect("non-empty");
            if d <= vote_gate && (box_points[k] - u).amax() <= h {
                votes += 1;
            } else {
                misses += 1;
                if n - misses < floor {
                    break;
                }
            }
        }
        if votes >= floor {
            best = Some((votes, u));
        }
    }
    let (votes, u) = best.unwrap_or((0, search.center + offsets[0].cast::<f64>() * window_stride));
    let inside: Vec<usize> = (0..box_points.len())
        .filter(|&k| (box_points[k] - u).amax() <= h)
        .map(|k| members[k])
        .collect();
    let cube = Cube::from_indices(
        target.id,
        search.frame_id,
        u,
        e,
        target.voxel_pitch,
        &adjacent.points,
        inside,
    );
    Ok((
        cube,
        VoteResult {
            best_center: [u.x, u.y, u.z],
            votes,
            total_queries: n,
        },
    ))
}

/// Structure-matches the winning window onto the target.
pub fn match_inter_cube(
    raw: &Cube,
    target: &Cube,
    params: &IcpParams,
) -> Result<(Cube, RigidTransform, RegistrationInfo)> {
    structure_match(raw, target, params)
}
