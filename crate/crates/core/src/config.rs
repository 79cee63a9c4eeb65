//! Every tunable of the pipeline, with the defaults used by the CLI.

use serde::{Deserialize, Serialize};

use crate::cube::SegmentationConfig;
use crate::error::{Error, Result};
use crate::geometry::FrameSequence;
use crate::graph::GraphConfig;
use crate::intra::DescriptorWeights;
use crate::registration::IcpParams;
use crate::solver::Weights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InpaintConfig {
    pub weights: Weights,
    /// Fixed cube geometry; `None` sizes cubes from the first frame.
    pub segmentation: Option<SegmentationConfig>,
    pub points_per_cube: usize,
    /// Spatial graph of the solve.
    pub graph: GraphConfig,
    /// K of the descriptor graph.
    pub k_graph: usize,
    /// Neighbours used for normal estimation when a frame has no normals.
    pub k_normal: usize,
    pub descriptor: DescriptorWeights,
    pub icp_iters: usize,
    /// ICP stopping tolerance as a fraction of the edge length.
    pub icp_tol: f64,
    /// Fraction of closest ICP pairs kept each iteration.
    pub icp_trim: f64,
    /// Search box edge over cube edge.
    pub box_scale: f64,
    /// Defaults to the voxel pitch.
    pub window_stride: Option<f64>,
    pub temporal_radius: usize,
    /// Inter-source cubes with fewer votes than this fraction of the known
    /// slots are discarded.
    pub vote_threshold: f64,
    /// Defaults to the voxel pitch.
    pub vote_max_dist: Option<f64>,
    /// Defaults to the voxel pitch.
    pub temporal_max_dist: Option<f64>,
    pub density_ratio: f64,
    /// Growth steps of the hole region into empty neighbouring voxels.
    pub hole_dilation: usize,
    /// Record per-frame wall time in reports.
    pub timing: bool,
}

impl Default for InpaintConfig {
    fn default() -> Self {
        Self {
            weights: Weights::default(),
            segmentation: None,
            points_per_cube: 200,
            graph: GraphConfig::default(),
            k_graph: 8,
            k_normal: 12,
            descriptor: DescriptorWeights::default(),
            icp_iters: 10,
            icp_tol: 1e-6,
            icp_trim: 0.4,
            box_scale: 2.0,
            window_stride: None,
            temporal_radius: 1,
            vote_threshold: 0.2,
            vote_max_dist: None,
            temporal_max_dist: None,
            density_ratio: 0.05,
            hole_dilation: 0,
            timing: true,
        }
    }
}

/// Configuration with every optional length filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub cfg: InpaintConfig,
    pub segmentation: SegmentationConfig,
    pub window_stride: f64,
    pub vote_max_dist: f64,
    pub temporal_max_dist: f64,
    pub icp: IcpParams,
    pub descriptor_graph: GraphConfig,
}

impl InpaintConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.graph.validate()?;
        if let Some(s) = &self.segmentation {
            s.validate()?;
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Argument(format!("{name} must be positive and finite, got {v}")))
            }
        };
        if !(self.icp_tol >= 0.0 && self.icp_tol.is_finite()) {
            return Err(Error::Argument("icp tolerance must be nonnegative".into()));
        }
        if !(self.icp_trim > 0.0 && self.icp_trim <= 1.0) {
            return Err(Error::Argument(format!("icp trim must lie in (0, 1], got {}", self.icp_trim)));
        }
        if self.box_scale < 1.0 || !self.box_scale.is_finite() {
            return Err(Error::Argument(format!("box scale must be >= 1, got {}", self.box_scale)));
        }
        if let Some(w) = self.window_stride {
            positive("window stride", w)?;
        }
        if let Some(d) = self.vote_max_dist {
            if !(d > 0.0) {
                return Err(Error::Argument(format!("vote max distance must be positive, got {d}")));
            }
        }
        if let Some(d) = self.temporal_max_dist {
            positive("temporal max distance", d)?;
        }
        if !(0.0..=1.0).contains(&self.vote_threshold) {
            return Err(Error::Argument(format!("vote threshold must lie in [0, 1], got {}", self.vote_threshold)));
        }
        if !(self.density_ratio > 0.0 && self.density_ratio < 1.0) {
            return Err(Error::Argument(format!("density ratio must lie in (0, 1), got {}", self.density_ratio)));
        }
        if self.temporal_radius == 0 {
            return Err(Error::Argument("temporal radius must be >= 1".into()));
        }
        if self.icp_iters == 0 || self.k_graph == 0 || self.k_normal < 3 || self.points_per_cube == 0 {
            return Err(Error::Argument("icp iterations, k-graph, points per cube must be >= 1 and k-normal >= 3".into()));
        }
        if self.descriptor.dc < 0.0 || self.descriptor.agtv < 0.0 {
            return Err(Error::Argument("descriptor weights must be nonnegative".into()));
        }
        Ok(())
    }

    /// Fills in the lengths left open, sizing cubes from the first frame.
    pub fn resolve(&self, seq: &FrameSequence) -> Result<Resolved> {
        self.validate()?;
        let segmentation = match self.segmentation {
            Some(s) => s,
            None => {
                let first = seq
                    .frames
                    .iter()
                    .find(|f| !f.is_empty())
                    .ok_or_else(|| Error::Argument("sequence has no points".into()))?;
                SegmentationConfig::for_cloud(first, self.points_per_cube)?
            }
        };
        let v = segmentation.voxel_pitch;
        Ok(Resolved {
            cfg: self.clone(),
            segmentation,
            window_stride: self.window_stride.unwrap_or(v),
            vote_max_dist: self.vote_max_dist.unwrap_or(v),
            temporal_max_dist: self.temporal_max_dist.unwrap_or(v),
            icp: IcpParams {
                max_iters: self.icp_iters,
                tol: self.icp_tol * segmentation.edge_length,
                trim: self.icp_trim,
            },
            descriptor_graph: GraphConfig {
                k: self.k_graph,
                ..self.graph
            },
        })
    }
}
