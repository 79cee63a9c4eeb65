//! Frame and sequence inpainting: segmentation, target detection, source
//! search, per-cube solve and write-back.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{InpaintConfig, Resolved};
use crate::cube::{instantiate_missing_slots, split_cubes, Cube};
use crate::error::{Error, Result};
use crate::geometry::{estimate_normals, FrameSequence, Point, PointCloud, Vec3};
use crate::graph::{build_knn_graph, build_temporal_weights, intra_correspondents, Side};
use crate::holes::{detect_hole_cubes, hole_voxels, Detection, HoleMask};
use crate::inter::{match_inter_cube, search_inter_source, SearchBox};
use crate::intra::{cube_descriptor, find_intra_source, CubeDescriptor};
use crate::registration::structure_match;
use crate::solver::{assemble_system, solve_cube, TemporalTerm};
use crate::spatial::SpatialIndex;

/// Outcome of the inter search toward one adjacent frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideRecord {
    /// Frame offset, negative for earlier frames.
    pub offset: i64,
    pub votes: Option<usize>,
    pub coverage: f64,
    pub dropped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeRecord {
    pub id: usize,
    pub n_known: usize,
    pub n_missing: usize,
    pub intra_source: Option<usize>,
    pub intra_distance: Option<f64>,
    /// Matched-pair RMS after aligning the intra source onto the target.
    pub intra_rms: Option<f64>,
    pub votes_prev: Option<usize>,
    pub votes_next: Option<usize>,
    pub coverage_prev: f64,
    pub coverage_next: f64,
    pub dropped_prev: bool,
    pub dropped_next: bool,
    pub objective_before: Option<f64>,
    pub objective_after: Option<f64>,
    pub residual: Option<f64>,
    pub sides: Vec<SideRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped_reason: Option<String>,
}

impl CubeRecord {
    fn new(cube: &Cube) -> Self {
        Self {
            id: cube.id,
            n_known: cube.n_known(),
            n_missing: 0,
            intra_source: None,
            intra_distance: None,
            intra_rms: None,
            votes_prev: None,
            votes_next: None,
            coverage_prev: 0.0,
            coverage_next: 0.0,
            dropped_prev: true,
            dropped_next: true,
            objective_before: None,
            objective_after: None,
            residual: None,
            sides: Vec::new(),
            skipped_reason: None,
        }
    }

    pub fn solved(&self) -> bool {
        self.skipped_reason.is_none()
    }
}

/// Report of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InpaintReport {
    pub f: usize,
    pub cubes: Vec<CubeRecord>,
    pub ms: f64,
}

impl InpaintReport {
    pub fn n_solved(&self) -> usize {
        self.cubes.iter().filter(|c| c.solved()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub frames: Vec<InpaintReport>,
}

impl SequenceReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Optional side outputs of a run.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory receiving one edge-list file per solved cube.
    pub graph_dump: Option<PathBuf>,
}

/// Inpaints frame `f` (0-based) of `seq`.
pub fn inpaint_frame(
    seq: &FrameSequence,
    f: usize,
    cfg: &InpaintConfig,
    mask: Option<&HoleMask>,
) -> Result<(PointCloud, InpaintReport)> {
    if f >= seq.len() {
        return Err(Error::Argument(format!("frame {f} out of range for {} frames", seq.len())));
    }
    let resolved = cfg.resolve(seq)?;
    let indices = build_indices(seq);
    run_frame(seq, &indices, f, &resolved, mask, &RunOptions::default())
}

/// Inpaints every frame against the original neighbouring frames.
pub fn inpaint_sequence(
    seq: &FrameSequence,
    cfg: &InpaintConfig,
    mask: Option<&HoleMask>,
) -> Result<(FrameSequence, SequenceReport)> {
    inpaint_sequence_with(seq, cfg, mask, &RunOptions::default())
}

pub fn inpaint_sequence_with(
    seq: &FrameSequence,
    cfg: &InpaintConfig,
    mask: Option<&HoleMask>,
    options: &RunOptions,
) -> Result<(FrameSequence, SequenceReport)> {
    if seq.is_empty() {
        return Err(Error::Argument("empty sequence".into()));
    }
    let resolved = cfg.resolve(seq)?;
    let indices = build_indices(seq);
    let results: Vec<(PointCloud, InpaintReport)> = (0..seq.len())
        .into_par_iter()
        .map(|f| run_frame(seq, &indices, f, &resolved, mask, options))
        .collect::<Result<_>>()?;
    let (frames, reports) = results.into_iter().unzip();
    Ok((FrameSequence::new(frames), SequenceReport { frames: reports }))
}

fn build_indices(seq: &FrameSequence) -> Vec<SpatialIndex> {
    seq.frames.par_iter().map(|f| f.index()).collect()
}

struct FrameContext<'a> {
    seq: &'a FrameSequence,
    indices: &'a [SpatialIndex],
    f: usize,
    cfg: &'a Resolved,
    cubes: Vec<Cube>,
    normals: Vec<Vec3>,
    holes: BTreeSet<usize>,
    descriptors: Vec<Option<CubeDescriptor>>,
    detection: Detection<'a>,
    options: &'a RunOptions,
}

struct CubeOutcome {
    record: CubeRecord,
    /// Solved positions of known slots, by frame point index.
    updates: Vec<(usize, Point)>,
    created: Vec<Point>,
}

fn run_frame(
    seq: &FrameSequence,
    indices: &[SpatialIndex],
    f: usize,
    cfg: &Resolved,
    mask: Option<&HoleMask>,
    options: &RunOptions,
) -> Result<(PointCloud, InpaintReport)> {
    let start = Instant::now();
    let frame = &seq.frames[f];
    let removed: Option<Vec<Point>> = mask.map(|m| m.frame(f).map(|h| h.locations()).unwrap_or_default());
    let detection = match &removed {
        Some(r) => Detection::Mask { removed: r },
        None => Detection::Auto {
            density_ratio: cfg.cfg.density_ratio,
        },
    };
    let cubes = if frame.is_empty() {
        Vec::new()
    } else {
        split_cubes(frame, f, &cfg.segmentation)?
    };
    let targets = detect_hole_cubes(frame, &cubes, detection);
    let mut outcomes = Vec::new();
    if !targets.is_empty() {
        let normals = match &frame.normals {
            Some(n) => n.clone(),
            None => estimate_normals(frame, cfg.cfg.k_normal)?.normals,
        };
        let holes: BTreeSet<usize> = targets.iter().copied().collect();
        let descriptors = cubes
            .par_iter()
            .map(|c| {
                if holes.contains(&c.id) {
                    None
                } else {
                    descriptor(c, &normals, cfg).ok()
                }
            })
            .collect();
        let ctx = FrameContext {
            seq,
            indices,
            f,
            cfg,
            cubes,
            normals,
            holes,
            descriptors,
            detection,
            options,
        };
        outcomes = targets
            .par_iter()
            .map(|&id| solve_target(&ctx, &ctx.cubes[id]))
            .collect::<Result<Vec<_>>>()?;
    }

    let mut sums = vec![(Vec3::zeros(), 0usize); frame.len()];
    let mut created = Vec::new();
    for o in &outcomes {
        for &(i, p) in &o.updates {
            sums[i].0 += p.coords;
            sums[i].1 += 1;
        }
        created.extend_from_slice(&o.created);
    }
    let mut points: Vec<Point> = frame
        .points
        .iter()
        .zip(&sums)
        .map(|(p, (s, n))| if *n == 0 { *p } else { Point::from(s / *n as f64) })
        .collect();
    let untouched = created.is_empty() && sums.iter().all(|s| s.1 == 0);
    points.extend(created);
    let cloud = if untouched {
        frame.clone()
    } else {
        PointCloud::new(points)
    };
    let ms = if cfg.cfg.timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    Ok((
        cloud,
        InpaintReport {
            f,
            cubes: outcomes.into_iter().map(|o| o.record).collect(),
            ms,
        },
    ))
}

fn descriptor(cube: &Cube, normals: &[Vec3], cfg: &Resolved) -> Result<CubeDescriptor> {
    let per_slot: Vec<Vec3> = cube
        .slots
        .iter()
        .map(|s| s.source_index().map_or(Vec3::zeros(), |i| normals[i]))
        .collect();
    cube_descriptor(cube, &per_slot, &cfg.descriptor_graph)
}

/// Solves one target cube. Algorithmic failures end up in the record;
/// only I/O errors propagate.
fn solve_target(ctx: &FrameContext<'_>, cube: &Cube) -> Result<CubeOutcome> {
    let mut record = CubeRecord::new(cube);
    let skip = |mut record: CubeRecord, reason: String| {
        record.skipped_reason = Some(reason);
        Ok(CubeOutcome {
            record,
            updates: Vec::new(),
            created: Vec::new(),
        })
    };
    let cfg = ctx.cfg;
    let frame = &ctx.seq.frames[ctx.f];
    let region = hole_voxels(
        cube,
        frame,
        &ctx.indices[ctx.f],
        ctx.detection,
        cfg.cfg.hole_dilation,
        Some(cfg.segmentation.stride / 2.0),
    );
    if region.is_empty() {
        return skip(record, "hole outside cube core".into());
    }
    let target_desc = match descriptor(cube, &ctx.normals, cfg) {
        Ok(d) => d,
        Err(e) => return skip(record, e.to_string()),
    };
    let (k, dist) = match find_intra_source(
        cube,
        &target_desc,
        &ctx.cubes,
        &ctx.descriptors,
        &ctx.holes,
        &cfg.cfg.descriptor,
    ) {
        Ok(found) => found,
        Err(e) => return skip(record, e.to_string()),
    };
    record.intra_source = Some(ctx.cubes[k].id);
    record.intra_distance = Some(dist);
    let intra = match structure_match(&ctx.cubes[k], cube, &cfg.icp) {
        Ok((moved, _, info)) => {
            record.intra_rms = Some(info.rms_final);
            moved
        }
        Err(e) => return skip(record, e.to_string()),
    };
    let target = match instantiate_missing_slots(cube, &intra, &region) {
        Ok(t) => t,
        Err(e) => return skip(record, e.to_string()),
    };
    record.n_missing = target.n_missing();
    let partners = match intra_correspondents(&target, &intra) {
        Ok(p) => p,
        Err(e) => return skip(record, e.to_string()),
    };

    let mut temporal = Vec::new();
    for d in 1..=cfg.cfg.temporal_radius as i64 {
        for offset in [-d, d] {
            let (side_record, term) = temporal_side(ctx, &target, &partners, offset);
            if offset == -1 {
                record.votes_prev = side_record.votes;
                record.coverage_prev = side_record.coverage;
                record.dropped_prev = side_record.dropped;
            } else if offset == 1 {
                record.votes_next = side_record.votes;
                record.coverage_next = side_record.coverage;
                record.dropped_next = side_record.dropped;
            }
            record.sides.push(side_record);
            temporal.extend(term);
        }
    }

    let positions = target.positions();
    let graph = match build_knn_graph(&positions, &cfg.cfg.graph) {
        Ok(g) => g,
        Err(e) => return skip(record, e.to_string()),
    };
    if let Some(dir) = &ctx.options.graph_dump {
        let path = dir.join(format!("frame{:04}_cube{:06}.txt", ctx.f, cube.id));
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        graph
            .write_edge_list(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(&path, e))?;
    }
    let system = match assemble_system(&target, &partners, temporal, graph, cfg.cfg.weights) {
        Ok(s) => s,
        Err(e) => return skip(record, e.to_string()),
    };
    let initial: Vec<Point> = (0..system.n())
        .map(|i| if system.known[i] { system.target[i] } else { system.intra[i] })
        .collect();
    let solution = match solve_cube(&system) {
        Ok(s) => s,
        Err(e) => return skip(record, e.to_string()),
    };
    record.objective_before = Some(system.objective(&initial));
    record.objective_after = Some(system.objective(&solution.positions));
    record.residual = Some(solution.residual);

    let mut updates = Vec::with_capacity(target.n_known());
    let mut created = Vec::with_capacity(target.n_missing());
    let core = cfg.segmentation.stride / 2.0;
    for (slot, p) in target.slots.iter().zip(&solution.positions) {
        match slot.source_index() {
            Some(i) => {
                if (frame.points[i] - cube.center).amax() <= core {
                    updates.push((i, *p));
                }
            }
            None => created.push(*p),
        }
    }
    Ok(CubeOutcome {
        record,
        updates,
        created,
    })
}

fn temporal_side(
    ctx: &FrameContext<'_>,
    target: &Cube,
    partners: &[Point],
    offset: i64,
) -> (SideRecord, Option<TemporalTerm>) {
    let mut rec = SideRecord {
        offset,
        votes: None,
        coverage: 0.0,
        dropped: true,
        reason: None,
    };
    let cfg = ctx.cfg;
    let g = ctx.f as i64 + offset;
    if g < 0 || g >= ctx.seq.len() as i64 {
        rec.reason = Some("outside sequence".into());
        return (rec, None);
    }
    if cfg.cfg.weights.beta == 0.0 {
        rec.reason = Some("beta is zero".into());
        return (rec, None);
    }
    let g = g as usize;
    let side = if offset < 0 { Side::Previous } else { Side::Next };
    let attempt = || -> Result<(usize, Option<TemporalTerm>)> {
        let search = SearchBox::around(target, cfg.cfg.box_scale, g)?;
        let (raw, vote) = search_inter_source(
            target,
            &ctx.seq.frames[g],
            &ctx.indices[g],
            &search,
            cfg.window_stride,
            cfg.vote_max_dist,
        )?;
        if (vote.votes as f64) < cfg.cfg.vote_threshold * target.n_known() as f64 {
            return Ok((vote.votes, None));
        }
        let (inter, _, _) = match_inter_cube(&raw, target, &cfg.icp)?;
        let weights = build_temporal_weights(side, target, partners, &inter, cfg.temporal_max_dist)?;
        Ok((
            vote.votes,
            Some(TemporalTerm {
                weights,
                points: inter.positions(),
            }),
        ))
    };
    match attempt() {
        Ok((votes, Some(term))) => {
            rec.votes = Some(votes);
            rec.coverage = term.weights.coverage();
            rec.dropped = false;
            (rec, Some(term))
        }
        Ok((votes, None)) => {
            rec.votes = Some(votes);
            rec.reason = Some("too few votes".into());
            (rec, None)
        }
        Err(e) => {
            rec.reason = Some(e.to_string());
            (rec, None)
        }
    }
}
