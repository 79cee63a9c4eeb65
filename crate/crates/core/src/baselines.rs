//! Reference inpainters the proposed method is compared against.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{local_normal, FrameSequence, Point, PointCloud, Vec3};
use crate::holes::HoleMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Proposed,
    /// The proposed method without the temporal terms.
    IntraOnly,
    /// Leaves the holes as they are.
    NoneFill,
    /// Fits a plane to the ring around each hole and resamples it.
    PlaneFill,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Proposed, Method::IntraOnly, Method::NoneFill, Method::PlaneFill];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::IntraOnly => "intra-only",
            Method::NoneFill => "none-fill",
            Method::PlaneFill => "plane-fill",
        }
    }

    /// Parses a comma-separated list, keeping the given order.
    pub fn parse_list(text: &str) -> Result<Vec<Method>> {
        text.split(',').map(|s| s.trim().parse()).collect()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Method::Proposed),
            "intra-only" => Ok(Method::IntraOnly),
            "none-fill" => Ok(Method::NoneFill),
            "plane-fill" | "local-plane-fill" => Ok(Method::PlaneFill),
            other => Err(Error::Argument(format!("unknown method {other:?}"))),
        }
    }
}

/// Plane fill of every hole recorded in `mask`. Removed locations are
/// grouped by nearest seed; each group's plane is fitted to the surviving
/// points within `ring` beyond the group's radius and sampled on a square
/// grid of the given pitch, skipping spots that already hold a point.
pub fn plane_fill(corrupted: &FrameSequence, mask: &HoleMask, pitch: f64, ring: f64) -> Result<FrameSequence> {
    if !(pitch > 0.0 && ring > 0.0) {
        return Err(Error::Argument("pitch and ring width must be positive".into()));
    }
    let frames = corrupted
        .frames
        .par_iter()
        .enumerate()
        .map(|(f, frame)| {
            let Some(holes) = mask.frame(f) else {
                return frame.clone();
            };
            let seeds = holes.seed_points();
            if seeds.is_empty() || frame.is_empty() {
                return frame.clone();
            }
            let mut radius = vec![None::<f64>; seeds.len()];
            for r in holes.locations() {
                let (k, d) = seeds
                    .iter()
                    .enumerate()
                    .map(|(k, s)| (k, (r - s).norm()))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .expect("non-empty");
                radius[k] = Some(radius[k].map_or(d, |x: f64| x.max(d)));
            }
            let index = frame.index();
            let mut points = frame.points.clone();
            for (s, r) in seeds.iter().zip(radius) {
                let Some(r) = r else { continue };
                let ring_points: Vec<Point> = index
                    .within_radius(s, r + ring)
                    .into_iter()
                    .map(|i| frame.points[i])
                    .filter(|p| (p - s).norm() > r)
                    .collect();
                let Some((normal, origin)) = local_normal(&ring_points) else { continue };
                let center = s - normal * (s - origin).dot(&normal);
                let u = normal.cross(&least_aligned_axis(&normal)).normalize();
                let w = normal.cross(&u);
                let steps = (r / pitch).floor() as i64;
                for i in -steps..=steps {
                    for j in -steps..=steps {
                        let q = center + u * (i as f64 * pitch) + w * (j as f64 * pitch);
                        if (q - center).norm() > r {
                            continue;
                        }
                        let occupied = index.nearest_one(&q).is_some_and(|(_, d)| d < pitch / 2.0);
                        if !occupied {
                            points.push(q);
                        }
                    }
                }
            }
            PointCloud::new(points)
        })
        .collect();
    Ok(FrameSequence::new(frames))
}

fn least_aligned_axis(n: &Vec3) -> Vec3 {
    let a = n.abs();
    if a.x <= a.y && a.x <= a.z {
        Vec3::x()
    } else if a.y <= a.z {
        Vec3::y()
    } else {
        Vec3::z()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holes::synthesize_holes;
    use crate::synth::translated_plane;

    #[test]
    fn names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!(
            Method::parse_list("none-fill,proposed").unwrap(),
            vec![Method::NoneFill, Method::Proposed]
        );
        assert!(Method::parse_list("proposed,magic").is_err());
    }

    #[test]
    fn plane_fill_restores_a_flat_hole() {
        let seq = translated_plane(1, 30, Vec3::zeros());
        let (corrupted, mask) = synthesize_holes(&seq, 1, 4.0, 3).unwrap();
        let filled = plane_fill(&corrupted, &mask, 1.0, 2.0).unwrap();
        let out = &filled.frames[0];
        for r in mask.frames[0].locations() {
            let best = out.points.iter().map(|p| (p - r).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1.0, "removed {r:?} left uncovered ({best})");
        }
        for p in &out.points {
            assert!(p.z.abs() < 1e-9);
        }
    }

    #[test]
    fn no_holes_leaves_frames_alone() {
        let seq = translated_plane(2, 5, Vec3::zeros());
        let mask = HoleMask { frames: Vec::new() };
        assert_eq!(plane_fill(&seq, &mask, 1.0, 1.0).unwrap(), seq);
    }
}
