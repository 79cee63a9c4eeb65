//! Hole filling for dynamic point cloud sequences.
//!
//! Each frame is split into overlapping cubes. Cubes containing holes are
//! repaired by a small quadratic program that pulls missing points toward a
//! self-similar cube of the same frame, ties them to corresponding cubes in
//! the neighbouring frames, and keeps the result smooth on a k-NN graph.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod config;
pub mod cube;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod holes;
pub mod inter;
pub mod intra;
pub mod metrics;
pub mod pipeline;
pub mod ply;
pub mod registration;
pub mod sequence;
pub mod solver;
pub mod spatial;
pub mod synth;

pub use config::InpaintConfig;
pub use error::{Error, Result};
pub use geometry::{FrameSequence, Point, PointCloud, Vec3};
pub use pipeline::{inpaint_frame, inpaint_sequence, InpaintReport, SequenceReport};
