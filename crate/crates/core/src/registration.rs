//! Rigid structure matching of a source cube onto a target cube: centroid
//! alignment followed by a few nearest-neighbour / Kabsch iterations.

use nalgebra::{Matrix3, Rotation3};
use serde::{Deserialize, Serialize};

use crate::cube::{Cube, Slot};
use crate::error::{Error, Result};
use crate::geometry::{centroid, local_normal, Point, Vec3};
use crate::spatial::SpatialIndex;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64, translation: Vec3) -> Self {
        let r = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(*axis), angle);
        Self::new(*r.matrix(), translation)
    }

    pub fn apply(&self, p: &Point) -> Point {
        Point::from(self.rotation * p.coords + self.translation)
    }

    /// `self` applied after `first`.
    pub fn after(&self, first: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * first.rotation,
            translation: self.rotation * first.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Largest deviation of `R^T R` from the identity and of `det R` from 1.
    pub fn orthonormality_error(&self) -> f64 {
        let r = &self.rotation;
        let ortho = (r.transpose() * r - Matrix3::identity()).amax();
        ortho.max((r.determinant() - 1.0).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcpParams {
    pub max_iters: usize,
    /// Stop once an iteration improves the RMS by less than this.
    pub tol: f64,
    /// Fraction of closest pairs used for the rotation fit and the RMS;
    /// 1 keeps every pair.
    pub trim: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegistrationInfo {
    pub iterations: usize,
    /// Matched-pair RMS (over the kept pairs) right after centroid alignment.
    pub rms_initial: f64,
    pub rms_final: f64,
    /// The target was too degenerate for a rotation.
    pub translation_only: bool,
}

/// Rigidly aligns `source` onto the known slots of `target`. The returned
/// cube carries the moved source points, centred on the target's centre.
pub fn structure_match(
    source: &Cube,
    target: &Cube,
    params: &IcpParams,
) -> Result<(Cube, RigidTransform, RegistrationInfo)> {
    let src = source.positions();
    let dst = target.known_positions();
    if src.len() < 3 || dst.len() < 3 {
        return Err(Error::Registration(format!(
            "need at least 3 points on each side, got {} source and {} target",
            src.len(),
            dst.len()
        )));
    }
    let (transform, info) = register_points(&src, &dst, params)?;
    let slots = source
        .slots
        .iter()
        .map(|s| {
            let position = transform.apply(&s.position);
            Slot {
                position,
                status: s.status,
                relative: position - target.center,
            }
        })
        .collect();
    let moved = Cube {
        id: source.id,
        frame_id: source.frame_id,
        center: target.center,
        edge_length: source.edge_length,
        voxel_pitch: source.voxel_pitch,
        slots,
    };
    Ok((moved, transform, info))
}

/// Transform moving `src` onto `dst`.
pub fn register_points(src: &[Point], dst: &[Point], params: &IcpParams) -> Result<(RigidTransform, RegistrationInfo)> {
    if params.max_iters == 0 || !(params.tol >= 0.0) || !(params.trim > 0.0 && params.trim <= 1.0) {
        return Err(Error::Argument("ICP needs max_iters >= 1, tol >= 0 and trim in (0, 1]".into()));
    }
    let cs = centroid(src).ok_or_else(|| Error::Registration("empty source".into()))?;
    let cd = centroid(dst).ok_or_else(|| Error::Registration("empty target".into()))?;
    let mut transform = RigidTransform::new(Matrix3::identity(), cd - cs);
    let index = SpatialIndex::new(src);
    let translation_only = local_normal(dst).is_none();

    let keep = ((params.trim * dst.len() as f64).ceil() as usize).clamp(3.min(dst.len()), dst.len());
    // each target point paired with its nearest moved source point; the
    // `keep` closest pairs survive
    let matches = |t: &RigidTransform| -> (Vec<(Point, Point)>, f64) {
        let inv = t.inverse();
        let mut pairs: Vec<(f64, usize, Point, Point)> = dst
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let (j, _) = index.nearest_one(&inv.apply(q)).expect("non-empty");
                let p = t.apply(&src[j]);
                ((q - p).norm_squared(), i, p, *q)
            })
            .collect();
        if keep < pairs.len() {
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            pairs.truncate(keep);
        }
        let sq: f64 = pairs.iter().map(|x| x.0).sum();
        let rms = (sq / keep as f64).sqrt();
        (pairs.into_iter().map(|x| (x.2, x.3)).collect(), rms)
    };

    let (mut paired, mut rms) = matches(&transform);
    let rms_initial = rms;
    let mut iterations = 0;
    if !translation_only {
        while iterations < params.max_iters && rms > 0.0 {
            let (from, to): (Vec<Point>, Vec<Point>) = paired.iter().copied().unzip();
            let step = kabsch(&from, &to);
            let candidate = step.after(&transform);
            let (next_paired, next_rms) = matches(&candidate);
            if next_rms > rms {
                break;
            }
            iterations += 1;
            let improvement = rms - next_rms;
            transform = candidate;
            paired = next_paired;
            rms = next_rms;
            if improvement < params.tol {
                break;
            }
        }
    }
    Ok((
        transform,
        RegistrationInfo {
            iterations,
            rms_initial,
            rms_final: rms,
            translation_only,
        },
    ))
}

/// Least-squares rotation and translation taking `from[i]` to `to[i]`.
fn kabsch(from: &[Point], to: &[Point]) -> RigidTransform {
    let cf = centroid(from).expect("non-empty");
    let ct = centroid(to).expect("non-empty");
    let mut h = Matrix3::zeros();
    for (a, b) in from.iter().zip(to) {
        h += (a - cf) * (b - ct).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("requested");
    let v_t = svd.v_t.expect("requested");
    let d = (v_t.transpose() * u.transpose()).determinant().signum();
    let fix = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, if d == 0.0 { 1.0 } else { d }));
    let rotation = v_t.transpose() * fix * u.transpose();
    RigidTransform::new(rotation, ct.coords - rotation * cf.coords)
}
