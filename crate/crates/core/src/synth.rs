//! Synthetic dynamic sequences: an ellipsoid, optionally ridged, that drifts and slowly
//! changes shape from frame to frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FrameSequence, Point, PointCloud, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub frames: usize,
    pub points: usize,
    pub semi_axes: [f64; 3],
    /// Relative height of the ridges running around the vertical axis.
    pub ridge_amplitude: f64,
    pub ridges: u32,
    /// Rigid drift per frame.
    pub translation: [f64; 3],
    /// Per-frame relative stretch of the first axis (the third shrinks by
    /// the same amount).
    pub deformation: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            frames: 5,
            points: 20_000,
            semi_axes: [40.0, 30.0, 26.0],
            ridge_amplitude: 0.0,
            ridges: 6,
            translation: [3.0, 1.5, 0.0],
            deformation: 0.003,
        }
    }
}

/// Generates the sequence. Every frame has the same number of points and
/// point `i` of every frame is the same material point.
pub fn synthetic_sequence(p: &SynthParams) -> Result<FrameSequence> {
    if p.frames == 0 || p.points < 4 {
        return Err(Error::Argument("need at least one frame and four points".into()));
    }
    if p.semi_axes.iter().any(|a| !(*a > 0.0)) || !(p.ridge_amplitude >= 0.0 && p.ridge_amplitude < 1.0) {
        return Err(Error::Argument("semi-axes must be positive and ridge amplitude in [0, 1)".into()));
    }
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let n = p.points;
    let directions: Vec<Vec3> = (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect();
    let frames = (0..p.frames)
        .map(|t| {
            let s = p.deformation * t as f64;
            let axes = Vec3::new(p.semi_axes[0] * (1.0 + s), p.semi_axes[1], p.semi_axes[2] * (1.0 - s));
            let shift = Vec3::from(p.translation) * t as f64;
            let points = directions
                .iter()
                .map(|d| {
                    let azimuth = d.y.atan2(d.x);
                    let rho = 1.0 + p.ridge_amplitude * (p.ridges as f64 * azimuth).sin() * (1.0 - d.z * d.z);
                    Point::from(d.component_mul(&axes) * rho + shift)
                })
                .collect();
            PointCloud::new(points)
        })
        .collect();
    Ok(FrameSequence::new(frames))
}

/// A flat square patch of `side x side` points at unit spacing, shifted by
/// `step` per frame.
pub fn translated_plane(frames: usize, side: usize, step: Vec3) -> FrameSequence {
    FrameSequence::new(
        (0..frames)
            .map(|t| {
                let shift = step * t as f64;
                PointCloud::new(
                    (0..side * side)
                        .map(|k| Point::new((k % side) as f64, (k / side) as f64, 0.0) + shift)
                        .collect(),
                )
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_follow_the_motion() {
        let p = SynthParams {
            points: 2000,
            deformation: 0.0,
            ..Default::default()
        };
        let seq = synthetic_sequence(&p).unwrap();
        assert_eq!(seq.len(), 5);
        let c0 = seq.frames[0].centroid().unwrap();
        let c4 = seq.frames[4].centroid().unwrap();
        assert!((c4 - c0 - Vec3::new(12.0, 6.0, 0.0)).norm() < 1e-9);
        for f in &seq.frames {
            assert_eq!(f.len(), 2000);
            f.validate().unwrap();
        }
    }

    #[test]
    fn points_lie_on_the_surface() {
        let p = SynthParams {
            points: 500,
            ridge_amplitude: 0.0,
            frames: 1,
            ..Default::default()
        };
        let seq = synthetic_sequence(&p).unwrap();
        for q in &seq.frames[0].points {
            let g = (q.x / 40.0).powi(2) + (q.y / 30.0).powi(2) + (q.z / 26.0).powi(2);
            assert!((g - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn plane_patch() {
        let seq = translated_plane(2, 4, Vec3::new(0.5, 0.0, 0.0));
        assert_eq!(seq.frames[1].points[5], Point::new(1.5, 1.0, 0.0));
    }
}
