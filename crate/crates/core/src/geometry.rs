//! Point clouds, frame sequences and PCA normal estimation.

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{Error, Result};
use crate::spatial::SpatialIndex;

pub type Point = nalgebra::Point3<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;

pub fn is_finite(p: &Point) -> bool {
    p.x.is_finite() && p.y.is_finite() && p.z.is_finite()
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut bb = Aabb {
            min: first,
            max: first,
        };
        for p in it {
            bb.min = bb.min.inf(p);
            bb.max = bb.max.sup(p);
        }
        Some(bb)
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }
}

/// One frame of a dynamic point cloud.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
    /// Unit normals, one per point, when available.
    pub normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        Self {
            points,
            normals: None,
        }
    }

    pub fn with_normals(points: Vec<Point>, normals: Vec<Vec3>) -> Result<Self> {
        let cloud = Self {
            points,
            normals: Some(normals),
        };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bounding_box(&self) -> Option<Aabb> {
        Aabb::from_points(&self.points)
    }

    /// Bounding-box diagonal, zero for empty clouds.
    pub fn diagonal(&self) -> f64 {
        self.bounding_box().map(|b| b.diagonal()).unwrap_or(0.0)
    }

    pub fn centroid(&self) -> Option<Point> {
        centroid(&self.points)
    }

    /// Checks finiteness of every coordinate and the normal invariants.
    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.points.iter().position(|p| !is_finite(p)) {
            return Err(Error::Data {
                index: i,
                message: "non-finite coordinate".into(),
            });
        }
        if let Some(normals) = &self.normals {
            if normals.len() != self.points.len() {
                return Err(Error::Shape(format!(
                    "{} normals for {} points",
                    normals.len(),
                    self.points.len()
                )));
            }
            if let Some(i) = normals.iter().position(|n| (n.norm() - 1.0).abs() > 1e-6) {
                return Err(Error::Data {
                    index: i,
                    message: "normal is not unit length".into(),
                });
            }
        }
        Ok(())
    }

    pub fn index(&self) -> SpatialIndex {
        SpatialIndex::new(&self.points)
    }
}

/// Ordered frames `0..q` of a dynamic point cloud.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameSequence {
    pub frames: Vec<PointCloud>,
}

impl FrameSequence {
    pub fn new(frames: Vec<PointCloud>) -> Self {
        Self { frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

pub fn centroid(points: &[Point]) -> Option<Point> {
    if points.is_empty() {
        return None;
    }
    let sum = points.iter().fold(Vec3::zeros(), |acc, p| acc + p.coords);
    Some(Point::from(sum / points.len() as f64))
}

/// Result of [`estimate_normals`].
#[derive(Debug, Clone)]
pub struct NormalEstimate {
    pub normals: Vec<Vec3>,
    /// Points whose neighbourhood had rank <= 1; their normal is `+z`.
    pub degenerate: usize,
}

/// PCA normals over each point's `k` nearest neighbours (the point itself
/// included), oriented so that the normal points away from the global
/// centroid as seen from the neighbourhood centroid.
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<NormalEstimate> {
    if cloud.len() < 3 {
        return Err(Error::Shape(format!(
            "normal estimation needs at least 3 points, got {}",
            cloud.len()
        )));
    }
    if k < 3 {
        return Err(Error::Argument(format!("k_normal must be >= 3, got {k}")));
    }
    let index = cloud.index();
    let global = cloud.centroid().expect("non-empty");
    let mut normals = Vec::with_capacity(cloud.len());
    let mut degenerate = 0;
    for p in &cloud.points {
        let nbrs = index.nearest(p, k)?;
        let pts: Vec<Point> = nbrs.iter().map(|&(i, _)| cloud.points[i]).collect();
        match local_normal(&pts) {
            Some((n, local)) => {
                let n = if n.dot(&(global - local)) > 0.0 { -n } else { n };
                normals.push(n);
            }
            None => {
                degenerate += 1;
                normals.push(Vec3::z());
            }
        }
    }
    Ok(NormalEstimate {
        normals,
        degenerate,
    })
}

/// Smallest-eigenvalue eigenvector of the neighbourhood covariance, plus the
/// neighbourhood centroid. `None` when the neighbourhood spans less than a plane.
pub(crate) fn local_normal(points: &[Point]) -> Option<(Vec3, Point)> {
    let c = centroid(points)?;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - c;
        cov += d * d.transpose();
    }
    cov /= points.len() as f64;
    let eig = SymmetricEigen::new(cov);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let largest = eig.eigenvalues[idx[2]];
    let middle = eig.eigenvalues[idx[1]];
    if largest <= f64::MIN_POSITIVE || middle <= 1e-12 * largest {
        return None;
    }
    let n = eig.eigenvectors.column(idx[0]).into_owned();
    Some((n.normalize(), c))
}
