//! Geometric quality metrics between a reference and a test cloud.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{estimate_normals, FrameSequence, Point, PointCloud, Vec3};
use crate::holes::HoleMask;
use crate::spatial::SpatialIndex;

pub const GPSNR_CAP_DB: f64 = 200.0;
/// Neighbours for reference normals when the reference carries none.
pub const METRIC_K_NORMAL: usize = 12;

/// A reference cloud prepared for repeated comparisons.
#[derive(Debug)]
pub struct Reference<'a> {
    pub cloud: &'a PointCloud,
    pub normals: Vec<Vec3>,
    pub index: SpatialIndex,
    pub diagonal: f64,
}

impl<'a> Reference<'a> {
    pub fn new(cloud: &'a PointCloud) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::Argument("empty reference cloud".into()));
        }
        let normals = match &cloud.normals {
            Some(n) => n.clone(),
            None => estimate_normals(cloud, METRIC_K_NORMAL)?.normals,
        };
        Ok(Self {
            cloud,
            normals,
            index: cloud.index(),
            diagonal: cloud.diagonal(),
        })
    }

    /// Point-to-plane mean squared errors, test-to-reference then
    /// reference-to-test, both along reference normals.
    pub fn plane_errors(&self, test: &PointCloud) -> Result<(f64, f64)> {
        if test.is_empty() {
            return Err(Error::Argument("empty test cloud".into()));
        }
        let test_index = test.index();
        let forward: f64 = test
            .points
            .iter()
            .map(|p| {
                let (j, _) = self.index.nearest_one(p).expect("non-empty");
                (p - self.cloud.points[j]).dot(&self.normals[j]).powi(2)
            })
            .sum::<f64>()
            / test.len() as f64;
        let backward: f64 = self
            .cloud
            .points
            .iter()
            .zip(&self.normals)
            .map(|(q, n)| {
                let (j, _) = test_index.nearest_one(q).expect("non-empty");
                (q - test.points[j]).dot(n).powi(2)
            })
            .sum::<f64>()
            / self.cloud.len() as f64;
        Ok((forward, backward))
    }

    pub fn gpsnr(&self, test: &PointCloud) -> Result<f64> {
        let (a, b) = self.plane_errors(test)?;
        Ok(psnr(self.diagonal, a.max(b)))
    }

    pub fn nshd(&self, test: &PointCloud) -> Result<f64> {
        if !(self.diagonal > 0.0) {
            return Err(Error::Argument("reference has a zero bounding-box diagonal".into()));
        }
        nshd_with_diagonal(self.cloud, test, self.diagonal)
    }
}

fn psnr(peak: f64, mse: f64) -> f64 {
    if mse < peak * peak * 1e-20 {
        GPSNR_CAP_DB
    } else {
        (10.0 * (peak * peak / mse).log10()).min(GPSNR_CAP_DB)
    }
}

/// Symmetric point-to-plane PSNR in dB, peak = reference diagonal.
pub fn gpsnr(reference: &PointCloud, test: &PointCloud) -> Result<f64> {
    Reference::new(reference)?.gpsnr(test)
}

/// Symmetric mean nearest-neighbour distance over twice the reference
/// diagonal.
pub fn nshd(reference: &PointCloud, test: &PointCloud) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::Argument("empty reference cloud".into()));
    }
    nshd_with_diagonal(reference, test, reference.diagonal())
}

/// [`nshd`] with an explicit normalizing diagonal.
pub fn nshd_with_diagonal(reference: &PointCloud, test: &PointCloud, diagonal: f64) -> Result<f64> {
    if reference.is_empty() || test.is_empty() {
        return Err(Error::Argument("empty cloud".into()));
    }
    if !(diagonal > 0.0) {
        return Err(Error::Argument("normalizing diagonal must be positive".into()));
    }
    let (a, b) = mean_nn_distances(&reference.points, &test.points);
    Ok((a + b) / (2.0 * diagonal))
}

/// Mean NN distance from `b` to `a` and from `a` to `b`.
fn mean_nn_distances(a: &[Point], b: &[Point]) -> (f64, f64) {
    let ia = SpatialIndex::new(a);
    let ib = SpatialIndex::new(b);
    let one_way = |from: &[Point], to: &SpatialIndex| {
        from.iter().map(|p| to.nearest_one(p).expect("non-empty").1).sum::<f64>() / from.len() as f64
    };
    (one_way(b, &ia), one_way(a, &ib))
}

/// Mean over consecutive frame pairs of the symmetric mean NN distance
/// between the points lying within `radius` of each frame's hole seeds,
/// over the frame's diagonal. Pairs where either side has no such point
/// are skipped; an error is returned if no pair remains.
pub fn temporal_consistency(seq: &FrameSequence, mask: &HoleMask, radius: f64) -> Result<f64> {
    if seq.len() < 2 {
        return Err(Error::Argument("temporal consistency needs at least two frames".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::Argument("neighbourhood radius must be positive".into()));
    }
    let near_seeds = |f: usize| -> Vec<Point> {
        let seeds = mask.frame(f).map(|h| h.seed_points()).unwrap_or_default();
        let frame = &seq.frames[f];
        if seeds.is_empty() || frame.is_empty() {
            return Vec::new();
        }
        let index = frame.index();
        let mut members: Vec<usize> = seeds.iter().flat_map(|s| index.within_radius(s, radius)).collect();
        members.sort_unstable();
        members.dedup();
        members.into_iter().map(|i| frame.points[i]).collect()
    };
    let regions: Vec<Vec<Point>> = (0..seq.len()).into_par_iter().map(near_seeds).collect();
    let values: Vec<f64> = (0..seq.len() - 1)
        .filter(|&f| !regions[f].is_empty() && !regions[f + 1].is_empty())
        .map(|f| {
            let (a, b) = mean_nn_distances(&regions[f], &regions[f + 1]);
            let diag = seq.frames[f].diagonal();
            let d = 0.5 * (a + b);
            if diag > 0.0 {
                d / diag
            } else {
                d
            }
        })
        .collect();
    if values.is_empty() {
        return Err(Error::Argument("no frame pair has points near its hole seeds".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}
