//! Overlapping cube segmentation of a frame and per-cube slot bookkeeping.
//!
//! A cube is an axis-aligned box of side `edge_length`. Its slots are the
//! rows of every matrix built over the cube: known slots come from frame
//! points, missing slots are placeholders instantiated from a donor cube.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, PointCloud, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    pub edge_length: f64,
    pub stride: f64,
    pub voxel_pitch: f64,
}

impl SegmentationConfig {
    pub fn new(edge_length: f64, stride: f64, voxel_pitch: f64) -> Result<Self> {
        let cfg = Self {
            edge_length,
            stride,
            voxel_pitch,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default stride (half an edge) and voxel pitch (an eighth of an edge).
    pub fn from_edge(edge_length: f64) -> Result<Self> {
        Self::new(edge_length, edge_length / 2.0, edge_length / 8.0)
    }

    /// Picks the edge length so that a tiling of the cloud holds about
    /// `points_per_cube` points per non-empty cell.
    pub fn for_cloud(cloud: &PointCloud, points_per_cube: usize) -> Result<Self> {
        let bb = cloud
            .bounding_box()
            .ok_or_else(|| Error::Argument("cannot size cubes for an empty cloud".into()))?;
        let diag = bb.diagonal();
        if diag == 0.0 || cloud.len() <= points_per_cube {
            let edge = if diag == 0.0 { 1.0 } else { diag * 1.01 };
            return Self::from_edge(edge);
        }
        let occupancy = |edge: f64| {
            let mut cells = std::collections::HashSet::with_capacity(cloud.len());
            for p in &cloud.points {
                cells.insert((
                    ((p.x - bb.min.x) / edge).floor() as i64,
                    ((p.y - bb.min.y) / edge).floor() as i64,
                    ((p.z - bb.min.z) / edge).floor() as i64,
                ));
            }
            cloud.len() as f64 / cells.len() as f64
        };
        let target = points_per_cube as f64;
        let (mut lo, mut hi) = (diag * 1e-6, diag * 1.01);
        for _ in 0..48 {
            let mid = (lo * hi).sqrt();
            if occupancy(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Self::from_edge(hi)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.edge_length) || !ok(self.stride) || !ok(self.voxel_pitch) {
            return Err(Error::Argument("segmentation lengths must be positive".into()));
        }
        if self.stride > self.edge_length {
            return Err(Error::Argument("stride must not exceed the edge length".into()));
        }
        if self.voxel_pitch > self.edge_length / 4.0 * (1.0 + 1e-12) {
            return Err(Error::Argument("voxel pitch must be at most a quarter edge".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotStatus {
    /// Backed by point `source` of the cube's frame.
    Known { source: usize },
    /// Placeholder copied from slot `donor` of the registered intra-source cube.
    Missing { donor: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub position: Point,
    pub status: SlotStatus,
    /// `position - cube.center`.
    pub relative: Vec3,
}

impl Slot {
    pub fn is_known(&self) -> bool {
        matches!(self.status, SlotStatus::Known { .. })
    }

    pub fn source_index(&self) -> Option<usize> {
        match self.status {
            SlotStatus::Known { source } => Some(source),
            SlotStatus::Missing { .. } => None,
        }
    }
}

/// Voxel coordinates local to one cube's grid.
pub type Voxel = [i32; 3];
pub type VoxelSet = BTreeSet<Voxel>;

#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    pub id: usize,
    pub frame_id: usize,
    pub center: Point,
    pub edge_length: f64,
    pub voxel_pitch: f64,
    pub slots: Vec<Slot>,
}

impl Cube {
    /// A cube whose slots are the given frame points, all known.
    pub fn from_indices(
        id: usize,
        frame_id: usize,
        center: Point,
        edge_length: f64,
        voxel_pitch: f64,
        points: &[Point],
        indices: impl IntoIterator<Item = usize>,
    ) -> Self {
        let slots = indices
            .into_iter()
            .map(|i| Slot {
                position: points[i],
                status: SlotStatus::Known { source: i },
                relative: points[i] - center,
            })
            .collect();
        Self {
            id,
            frame_id,
            center,
            edge_length,
            voxel_pitch,
            slots,
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn half(&self) -> f64 {
        self.edge_length / 2.0
    }

    pub fn contains(&self, p: &Point) -> bool {
        let h = self.half();
        (p - self.center).iter().all(|d| d.abs() <= h)
    }

    /// True when the open interiors of the two boxes overlap.
    pub fn intersects(&self, other: &Cube) -> bool {
        let reach = (self.edge_length + other.edge_length) / 2.0 * (1.0 - 1e-9);
        (self.center - other.center).iter().all(|d| d.abs() < reach)
    }

    pub fn n_known(&self) -> usize {
        self.slots.iter().filter(|s| s.is_known()).count()
    }

    pub fn n_missing(&self) -> usize {
        self.len() - self.n_known()
    }

    pub fn known(&self) -> impl Iterator<Item = &Slot> {
        self.slots.iter().filter(|s| s.is_known())
    }

    pub fn positions(&self) -> Vec<Point> {
        self.slots.iter().map(|s| s.position).collect()
    }

    pub fn known_positions(&self) -> Vec<Point> {
        self.known().map(|s| s.position).collect()
    }

    /// Voxels per axis of the cube's own grid.
    pub fn grid_size(&self) -> i32 {
        ((self.edge_length / self.voxel_pitch) - 1e-9).ceil().max(1.0) as i32
    }

    /// Local voxel of a relative position, `None` outside the closed box.
    pub fn voxel_of(&self, relative: &Vec3) -> Option<Voxel> {
        let h = self.half();
        if relative.iter().any(|d| d.abs() > h) {
            return None;
        }
        let n = self.grid_size();
        let idx = |d: f64| (((d + h) / self.voxel_pitch).floor() as i32).clamp(0, n - 1);
        Some([idx(relative.x), idx(relative.y), idx(relative.z)])
    }

    /// Centre of a local voxel, relative to the cube centre.
    pub fn voxel_center(&self, v: &Voxel) -> Vec3 {
        let h = self.half();
        Vec3::new(
            -h + (v[0] as f64 + 0.5) * self.voxel_pitch,
            -h + (v[1] as f64 + 0.5) * self.voxel_pitch,
            -h + (v[2] as f64 + 0.5) * self.voxel_pitch,
        )
    }

    /// Voxels holding at least one known slot.
    pub fn occupied_voxels(&self) -> VoxelSet {
        self.known().filter_map(|s| self.voxel_of(&s.relative)).collect()
    }
}

/// Splits a frame into overlapping cubes whose centres lie on the lattice
/// `stride * Z^3`. Empty cubes are dropped; ids follow lattice order.
pub fn split_cubes(frame: &PointCloud, frame_id: usize, cfg: &SegmentationConfig) -> Result<Vec<Cube>> {
    cfg.validate()?;
    let half = cfg.edge_length / 2.0;
    let s = cfg.stride;
    let mut cells: BTreeMap<[i64; 3], Vec<usize>> = BTreeMap::new();
    for (i, p) in frame.points.iter().enumerate() {
        let range = |c: f64| {
            let lo = ((c - half) / s).ceil() as i64 - 1;
            let hi = ((c + half) / s).floor() as i64 + 1;
            (lo..=hi).filter(move |&k| (c - k as f64 * s).abs() <= half)
        };
        for kx in range(p.x) {
            for ky in range(p.y) {
                for kz in range(p.z) {
                    cells.entry([kx, ky, kz]).or_default().push(i);
                }
            }
        }
    }
    Ok(cells
        .into_iter()
        .enumerate()
        .map(|(id, (key, indices))| {
            let center = lattice_center(&key, s);
            Cube::from_indices(id, frame_id, center, cfg.edge_length, cfg.voxel_pitch, &frame.points, indices)
        })
        .collect())
}

pub(crate) fn lattice_center(key: &[i64; 3], stride: f64) -> Point {
    Point::new(key[0] as f64 * stride, key[1] as f64 * stride, key[2] as f64 * stride)
}

/// Appends a missing slot for every point of `registered_intra` that falls
/// inside one of `hole_voxels` of `target`. Existing slots are untouched.
pub fn instantiate_missing_slots(target: &Cube, registered_intra: &Cube, hole_voxels: &VoxelSet) -> Result<Cube> {
    let mut out = target.clone();
    if hole_voxels.is_empty() {
        return Ok(out);
    }
    for (donor, slot) in registered_intra.slots.iter().enumerate() {
        let rel = slot.position - target.center;
        if let Some(v) = target.voxel_of(&rel) {
            if hole_voxels.contains(&v) {
                out.slots.push(Slot {
                    position: target.center + rel,
                    status: SlotStatus::Missing { donor },
                    relative: rel,
                });
            }
        }
    }
    if out.len() == target.len() {
        return Err(Error::NoDonor);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(points: Vec<Point>) -> PointCloud {
        PointCloud::new(points)
    }

    #[test]
    fn single_point_single_cube() {
        let cfg = SegmentationConfig::new(1.0, 1.0, 0.25).unwrap();
        let cubes = split_cubes(&cloud(vec![Point::origin()]), 0, &cfg).unwrap();
        assert_eq!(cubes.len(), 1);
        assert_eq!(cubes[0].slots[0].source_index(), Some(0));
    }

    #[test]
    fn half_stride_gives_eight_memberships() {
        let cfg = SegmentationConfig::new(2.0, 1.0, 0.5).unwrap();
        let pts = vec![Point::new(0.3, 0.4, 0.45), Point::new(5.2, -3.7, 1.1)];
        let cubes = split_cubes(&cloud(pts), 0, &cfg).unwrap();
        for i in 0..2 {
            let n = cubes
                .iter()
                .filter(|c| c.slots.iter().any(|s| s.source_index() == Some(i)))
                .count();
            assert_eq!(n, 8);
        }
    }

    #[test]
    fn membership_matches_box_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Point> = (0..1000)
            .map(|_| Point::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let cfg = SegmentationConfig::new(1.5, 0.75, 0.375).unwrap();
        let cubes = split_cubes(&cloud(pts.clone()), 0, &cfg).unwrap();
        let mut counts = vec![0usize; pts.len()];
        for c in &cubes {
            let expect: Vec<usize> = (0..pts.len())
                .filter(|&i| (pts[i] - c.center).iter().all(|d| d.abs() <= 0.75))
                .collect();
            let got: Vec<usize> = c.slots.iter().filter_map(|s| s.source_index()).collect();
            assert_eq!(got, expect);
            for i in got {
                counts[i] += 1;
            }
            for s in &c.slots {
                assert!(c.contains(&s.position));
            }
        }
        assert!(counts.iter().all(|&n| n >= 1));
        // every lattice cube that contains a point was produced
        let total: usize = counts.iter().sum();
        let brute: usize = (-8..=8)
            .flat_map(|x| (-8..=8).flat_map(move |y| (-4..=4).map(move |z| [x, y, z])))
            .map(|k: [i64; 3]| {
                let c = lattice_center(&k, 0.75);
                pts.iter()
                    .filter(|p| (*p - c).iter().all(|d| d.abs() <= 0.75))
                    .count()
            })
            .sum();
        assert_eq!(total, brute);
    }

    #[test]
    fn density_adaptive_edge() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Point> = (0..20000)
            .map(|_| Point::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0), 0.0))
            .collect();
        let cfg = SegmentationConfig::for_cloud(&cloud(pts), 200).unwrap();
        // 2 points per unit area, so roughly 10 units per side
        assert!(cfg.edge_length > 8.0 && cfg.edge_length < 12.5, "{}", cfg.edge_length);
        assert_eq!(cfg.stride, cfg.edge_length / 2.0);
        assert_eq!(cfg.voxel_pitch, cfg.edge_length / 8.0);
    }

    #[test]
    fn invalid_configs() {
        assert!(SegmentationConfig::new(1.0, 2.0, 0.1).is_err());
        assert!(SegmentationConfig::new(1.0, 0.5, 0.5).is_err());
        assert!(SegmentationConfig::new(0.0, 0.0, 0.0).is_err());
    }

    fn unit_cube(points: &[Point]) -> Cube {
        Cube::from_indices(0, 0, Point::origin(), 4.0, 1.0, points, 0..points.len())
    }

    #[test]
    fn no_hole_voxels_is_identity() {
        let pts = vec![Point::new(0.5, 0.5, 0.5), Point::new(-1.0, 1.0, 0.0)];
        let target = unit_cube(&pts);
        let out = instantiate_missing_slots(&target, &target, &VoxelSet::new()).unwrap();
        assert_eq!(out, target);
    }

    #[test]
    fn one_hole_voxel_three_donors() {
        let target_pts = vec![Point::new(-1.5, -1.5, -1.5), Point::new(1.5, 1.5, 1.5)];
        let target = unit_cube(&target_pts);
        let donors = vec![
            Point::new(0.1, 0.2, 0.3),
            Point::new(0.9, 0.5, 0.5),
            Point::new(0.5, 0.99, 0.01),
            Point::new(1.2, 0.5, 0.5),
            Point::new(-1.5, -1.5, -1.5),
        ];
        let intra = unit_cube(&donors);
        let hole: VoxelSet = [target.voxel_of(&Vec3::new(0.5, 0.5, 0.5)).unwrap()].into();
        let out = instantiate_missing_slots(&target, &intra, &hole).unwrap();
        assert_eq!(out.n_missing(), 3);
        assert_eq!(out.n_known(), 2);
        assert_eq!(&out.slots[..2], &target.slots[..]);
        assert_eq!(out.slots[2].status, SlotStatus::Missing { donor: 0 });
        assert_eq!(out.slots[2].position, donors[0]);
    }

    #[test]
    fn donor_without_hole_points() {
        let target = unit_cube(&[Point::new(0.5, 0.5, 0.5)]);
        let intra = unit_cube(&[Point::new(-1.5, 0.5, 0.5)]);
        let hole: VoxelSet = [[3, 3, 3]].into();
        assert!(matches!(instantiate_missing_slots(&target, &intra, &hole), Err(Error::NoDonor)));
    }

    #[test]
    fn voxel_grid_edges() {
        let c = unit_cube(&[]);
        assert_eq!(c.grid_size(), 4);
        assert_eq!(c.voxel_of(&Vec3::new(-2.0, -2.0, -2.0)), Some([0, 0, 0]));
        assert_eq!(c.voxel_of(&Vec3::new(2.0, 2.0, 2.0)), Some([3, 3, 3]));
        assert_eq!(c.voxel_of(&Vec3::new(2.01, 0.0, 0.0)), None);
        assert_eq!(c.voxel_center(&[0, 0, 0]), Vec3::new(-1.5, -1.5, -1.5));
    }
}
