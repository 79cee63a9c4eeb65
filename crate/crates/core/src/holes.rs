//! Synthetic ball-shaped holes, their JSON mask, and hole detection.

use std::collections::BTreeSet;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cube::{Cube, Voxel, VoxelSet};
use crate::error::{Error, Result};
use crate::geometry::{FrameSequence, Point, PointCloud};
use crate::spatial::SpatialIndex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovedPoint {
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl RemovedPoint {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y, self.z)
    }
}

/// Removals of one frame. `frame` is the 0-based position in the sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameHoles {
    pub frame: usize,
    pub removed: Vec<RemovedPoint>,
    pub seeds: Vec<[f64; 3]>,
}

impl FrameHoles {
    pub fn locations(&self) -> Vec<Point> {
        self.removed.iter().map(RemovedPoint::position).collect()
    }

    pub fn seed_points(&self) -> Vec<Point> {
        self.seeds.iter().map(|s| Point::new(s[0], s[1], s[2])).collect()
    }
}

/// Ground truth of a synthetic corruption: one entry per frame.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HoleMask {
    pub frames: Vec<FrameHoles>,
}

impl HoleMask {
    pub fn frame(&self, f: usize) -> Option<&FrameHoles> {
        self.frames.iter().find(|h| h.frame == f)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mask: HoleMask = serde_json::from_str(text)?;
        for h in &mask.frames {
            let mut seen = BTreeSet::new();
            if let Some(r) = h.removed.iter().find(|r| !seen.insert(r.index)) {
                return Err(Error::Argument(format!(
                    "frame {} lists removed index {} twice",
                    h.frame, r.index
                )));
            }
        }
        Ok(mask)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

/// Removes every point within `radius` of `n_holes` seeds per frame.
///
/// Frame 0 seeds are drawn uniformly without replacement; each later frame
/// reuses the nearest point to the previous frame's seeds, so holes persist.
pub fn synthesize_holes(
    seq: &FrameSequence,
    n_holes: usize,
    radius: f64,
    rng_seed: u64,
) -> Result<(FrameSequence, HoleMask)> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::Argument("hole radius must be positive".into()));
    }
    if n_holes == 0 {
        return Err(Error::Argument("at least one hole is required".into()));
    }
    if let Some(f) = seq.frames.iter().position(|c| c.len() <= n_holes) {
        return Err(Error::Argument(format!(
            "frame {f} has no more than {n_holes} points"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut frames = Vec::with_capacity(seq.len());
    let mut mask = HoleMask::default();
    let mut seeds: Vec<Point> = Vec::new();
    for (f, cloud) in seq.frames.iter().enumerate() {
        let index = cloud.index();
        seeds = if f == 0 {
            rand::seq::index::sample(&mut rng, cloud.len(), n_holes)
                .into_iter()
                .map(|i| cloud.points[i])
                .collect()
        } else {
            seeds
                .iter()
                .map(|s| cloud.points[index.nearest_one(s).expect("non-empty").0])
                .collect()
        };
        let gone = ball_members(&index, &seeds, radius);
        let removed_count = gone.iter().filter(|&&g| g).count();
        if 2 * removed_count > cloud.len() {
            return Err(Error::CorruptionBudget {
                frame: f,
                removed: removed_count,
                total: cloud.len(),
            });
        }
        let removed = (0..cloud.len())
            .filter(|&i| gone[i])
            .map(|i| {
                let p = cloud.points[i];
                RemovedPoint {
                    index: i,
                    x: p.x,
                    y: p.y,
                    z: p.z,
                }
            })
            .collect();
        frames.push(keep(cloud, &gone));
        mask.frames.push(FrameHoles {
            frame: f,
            removed,
            seeds: seeds.iter().map(|s| [s.x, s.y, s.z]).collect(),
        });
    }
    Ok((FrameSequence::new(frames), mask))
}

/// Flags the indexed points lying within `radius` of any seed.
pub(crate) fn ball_members(index: &SpatialIndex, seeds: &[Point], radius: f64) -> Vec<bool> {
    let mut gone = vec![false; index.len()];
    for s in seeds {
        for i in index.within_radius(s, radius) {
            gone[i] = true;
        }
    }
    gone
}

fn keep(cloud: &PointCloud, gone: &[bool]) -> PointCloud {
    let points = cloud
        .points
        .iter()
        .zip(gone)
        .filter(|(_, &g)| !g)
        .map(|(p, _)| *p)
        .collect();
    let normals = cloud.normals.as_ref().map(|ns| {
        ns.iter()
            .zip(gone)
            .filter(|(_, &g)| !g)
            .map(|(n, _)| *n)
            .collect()
    });
    PointCloud { points, normals }
}

/// Reinserts the removed points at their original indices. Normals are
/// dropped from frames that had removals since the mask does not store them.
pub fn restore(corrupted: &FrameSequence, mask: &HoleMask) -> Result<FrameSequence> {
    let mut frames = Vec::with_capacity(corrupted.len());
    for (f, cloud) in corrupted.frames.iter().enumerate() {
        let Some(holes) = mask.frame(f).filter(|h| !h.removed.is_empty()) else {
            frames.push(cloud.clone());
            continue;
        };
        let total = cloud.len() + holes.removed.len();
        let mut slots: Vec<Option<Point>> = vec![None; total];
        for r in &holes.removed {
            if r.index >= total || slots[r.index].is_some() {
                return Err(Error::Argument(format!(
                    "frame {f}: removed index {} does not fit the corrupted frame",
                    r.index
                )));
            }
            slots[r.index] = Some(r.position());
        }
        let mut survivors = cloud.points.iter();
        let points = slots
            .into_iter()
            .map(|s| s.or_else(|| survivors.next().copied()).expect("counts match"))
            .collect();
        frames.push(PointCloud::new(points));
    }
    Ok(FrameSequence::new(frames))
}

/// Per-cube voxel occupancy of a frame, including a one-voxel ring around
/// the cube so that face neighbours of border voxels are known.
struct Occupancy {
    n: i32,
    cells: Vec<bool>,
}

impl Occupancy {
    fn new(cube: &Cube, frame: &[Point], index: &SpatialIndex) -> Self {
        let n = cube.grid_size();
        let side = (n + 2) as usize;
        let mut cells = vec![false; side * side * side];
        let h = cube.half();
        let v = cube.voxel_pitch;
        let reach = Point::new(h + v, h + v, h + v).coords;
        for i in index.within_box(&(cube.center - reach), &(cube.center + reach)) {
            let rel = frame[i] - cube.center;
            let idx = |d: f64| {
                if d.abs() <= h {
                    (((d + h) / v).floor() as i32).clamp(0, n - 1)
                } else {
                    (((d + h) / v).floor() as i32).clamp(-1, n)
                }
            };
            let vox = [idx(rel.x), idx(rel.y), idx(rel.z)];
            let k = Self::key(n, &vox);
            cells[k] = true;
        }
        Self { n, cells }
    }

    fn key(n: i32, v: &Voxel) -> usize {
        let side = (n + 2) as usize;
        let c = |a: i32| (a + 1) as usize;
        (c(v[0]) * side + c(v[1])) * side + c(v[2])
    }

    fn get(&self, v: &Voxel) -> bool {
        self.cells[Self::key(self.n, v)]
    }

    /// Empty cube voxels with at least 4 of 6 occupied face neighbours, plus
    /// the number of occupied cube voxels.
    fn interior_empty(&self) -> (VoxelSet, usize) {
        let mut holes = VoxelSet::new();
        let mut occupied = 0;
        for x in 0..self.n {
            for y in 0..self.n {
                for z in 0..self.n {
                    let v = [x, y, z];
                    if self.get(&v) {
                        occupied += 1;
                        continue;
                    }
                    let around = FACES
                        .iter()
                        .filter(|d| self.get(&[x + d[0], y + d[1], z + d[2]]))
                        .count();
                    if around >= 4 {
                        holes.insert(v);
                    }
                }
            }
        }
        (holes, occupied)
    }
}

const FACES: [[i32; 3]; 6] = [
    [1, 0, 0],
    [-1, 0, 0],
    [0, 1, 0],
    [0, -1, 0],
    [0, 0, 1],
    [0, 0, -1],
];

/// How hole regions are located.
#[derive(Debug, Clone, Copy)]
pub enum Detection<'a> {
    /// Interior-empty voxel fraction above `density_ratio`.
    Auto { density_ratio: f64 },
    /// Known removed locations of an evaluation run.
    Mask { removed: &'a [Point] },
}

/// Ids of the cubes that need inpainting.
pub fn detect_hole_cubes(frame: &PointCloud, cubes: &[Cube], detection: Detection<'_>) -> Vec<usize> {
    match detection {
        Detection::Mask { removed } => {
            if removed.is_empty() {
                return Vec::new();
            }
            let index = SpatialIndex::new(removed);
            cubes
                .iter()
                .filter(|c| {
                    let h = Point::new(c.half(), c.half(), c.half()).coords;
                    !index.within_box(&(c.center - h), &(c.center + h)).is_empty()
                })
                .map(|c| c.id)
                .collect()
        }
        Detection::Auto { density_ratio } => {
            let index = frame.index();
            cubes
                .iter()
                .filter(|c| {
                    let (holes, occupied) = Occupancy::new(c, &frame.points, &index).interior_empty();
                    let total = holes.len() + occupied;
                    total > 0 && holes.len() as f64 / total as f64 > density_ratio
                })
                .map(|c| c.id)
                .collect()
        }
    }
}

/// Voxels of `cube` where missing points should be created.
///
/// Seeds are the voxels holding removed locations (mask mode) or the
/// interior-empty voxels (auto mode). Seeds are grown `dilation` times into
/// 26-neighbours that hold no known point. When `core_half` is given, only
/// voxels whose centre lies strictly within that half-width of the cube
/// centre are kept, so that overlapping cubes never fill the same place.
pub fn hole_voxels(
    cube: &Cube,
    frame: &PointCloud,
    index: &SpatialIndex,
    detection: Detection<'_>,
    dilation: usize,
    core_half: Option<f64>,
) -> VoxelSet {
    let occupied = cube.occupied_voxels();
    let mut region: VoxelSet = match detection {
        Detection::Mask { removed } => removed
            .iter()
            .filter_map(|p| cube.voxel_of(&(p - cube.center)))
            .collect(),
        Detection::Auto { .. } => Occupancy::new(cube, &frame.points, index).interior_empty().0,
    };
    let n = cube.grid_size();
    for _ in 0..dilation {
        let mut grown = region.clone();
        for v in &region {
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let w = [v[0] + dx, v[1] + dy, v[2] + dz];
                        if w.iter().all(|&a| (0..n).contains(&a)) && !occupied.contains(&w) {
                            grown.insert(w);
                        }
                    }
                }
            }
        }
        region = grown;
    }
    if let Some(core) = core_half {
        region.retain(|v| cube.voxel_center(v).iter().all(|d| d.abs() < core));
    }
    region
}
