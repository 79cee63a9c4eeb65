//! Benchmark harness: corrupt a sequence once, run every method on the
//! same input and score the outputs against the original frames.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{plane_fill, Method};
use crate::config::InpaintConfig;
use crate::error::{Error, Result};
use crate::geometry::FrameSequence;
use crate::holes::{synthesize_holes, HoleMask};
use crate::metrics::{temporal_consistency, Reference};
use crate::pipeline::inpaint_sequence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleParams {
    pub n_holes: usize,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    pub f: usize,
    pub gpsnr_db: f64,
    pub nshd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub name: String,
    pub gpsnr_db: Option<f64>,
    pub nshd: Option<f64>,
    pub temporal_consistency: Option<f64>,
    pub seconds: f64,
    pub frames: Vec<FrameScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub methods: Vec<MethodRow>,
    pub n_holes: usize,
    pub radius: f64,
    pub seed: u64,
    pub removed_fraction: f64,
    pub edge_length: f64,
    pub voxel_pitch: f64,
}

impl BenchReport {
    pub fn row(&self, method: Method) -> Option<&MethodRow> {
        self.methods.iter().find(|r| r.name == method.name())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned text table, one row per method. NSHD is shown in units of 1e-7.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<12} {:>12} {:>14} {:>14} {:>9}",
            "method", "GPSNR (dB)", "NSHD (1e-7)", "temporal", "seconds"
        );
        let opt = |v: Option<f64>, scale: f64, prec: usize| match v {
            Some(v) => format!("{:.*}", prec, v * scale),
            None => "-".to_string(),
        };
        for r in &self.methods {
            let _ = writeln!(
                out,
                "{:<12} {:>12} {:>14} {:>14} {:>9.2}",
                r.name,
                opt(r.gpsnr_db, 1.0, 4),
                opt(r.nshd, 1e7, 1),
                opt(r.temporal_consistency, 1.0, 8),
                r.seconds
            );
        }
        out
    }
}

/// Published figures for full-size captured sequences, kept as context.
/// They are not reproducible with this crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedResults {
    pub reproducible: bool,
    pub note: String,
    pub results: Vec<PublishedResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedResult {
    pub sequence: String,
    pub method: String,
    pub gpsnr_db: f64,
    pub nshd: f64,
}

pub fn published_results() -> PublishedResults {
    serde_json::from_str(include_str!("../fixtures/published_results.json")).expect("valid fixture")
}

/// Runs `methods` in order on one shared corruption of `seq`.
pub fn run_benchmark(
    seq: &FrameSequence,
    cfg: &InpaintConfig,
    methods: &[Method],
    holes: HoleParams,
    rng_seed: u64,
) -> Result<BenchReport> {
    if seq.is_empty() {
        return Err(Error::Argument("empty sequence".into()));
    }
    let (corrupted, mask) = if holes.n_holes == 0 {
        let frames = (0..seq.len())
            .map(|f| crate::holes::FrameHoles {
                frame: f,
                removed: Vec::new(),
                seeds: Vec::new(),
            })
            .collect();
        (seq.clone(), HoleMask { frames })
    } else {
        synthesize_holes(seq, holes.n_holes, holes.radius, rng_seed)?
    };
    let resolved = cfg.resolve(&corrupted)?;
    let cfg = InpaintConfig {
        segmentation: Some(resolved.segmentation),
        ..cfg.clone()
    };
    let pitch = resolved.segmentation.voxel_pitch;
    let references: Vec<Reference<'_>> = seq.frames.par_iter().map(Reference::new).collect::<Result<_>>()?;
    let total: usize = seq.frames.iter().map(|f| f.len()).sum();
    let removed: usize = mask.frames.iter().map(|h| h.removed.len()).sum();

    let rows = methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let output = match method {
                Method::Proposed => inpaint_sequence(&corrupted, &cfg, Some(&mask)).map(|r| r.0),
                Method::IntraOnly => {
                    let mut c = cfg.clone();
                    c.weights.beta = 0.0;
                    inpaint_sequence(&corrupted, &c, Some(&mask)).map(|r| r.0)
                }
                Method::NoneFill => Ok(corrupted.clone()),
                Method::PlaneFill => plane_fill(&corrupted, &mask, pitch, 2.0 * pitch),
            };
            let seconds = if cfg.timing { start.elapsed().as_secs_f64() } else { 0.0 };
            let mut row = MethodRow {
                name: method.name().to_string(),
                gpsnr_db: None,
                nshd: None,
                temporal_consistency: None,
                seconds,
                frames: Vec::new(),
                error: None,
            };
            match output.and_then(|out| score(&references, &out, &mask, pitch).map(|s| (s, out))) {
                Ok(((frames, tc), _)) => {
                    let n = frames.len() as f64;
                    row.gpsnr_db = Some(frames.iter().map(|s| s.gpsnr_db).sum::<f64>() / n);
                    row.nshd = Some(frames.iter().map(|s| s.nshd).sum::<f64>() / n);
                    row.temporal_consistency = tc;
                    row.frames = frames;
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect();
    Ok(BenchReport {
        methods: rows,
        n_holes: holes.n_holes,
        radius: holes.radius,
        seed: rng_seed,
        removed_fraction: removed as f64 / total as f64,
        edge_length: resolved.segmentation.edge_length,
        voxel_pitch: pitch,
    })
}

fn score(
    references: &[Reference<'_>],
    output: &FrameSequence,
    mask: &HoleMask,
    pitch: f64,
) -> Result<(Vec<FrameScore>, Option<f64>)> {
    let frames = references
        .par_iter()
        .zip(&output.frames)
        .enumerate()
        .map(|(f, (r, out))| {
            Ok(FrameScore {
                f,
                gpsnr_db: r.gpsnr(out)?,
                nshd: r.nshd(out)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tc = if output.len() >= 2 {
        temporal_consistency(output, mask, 2.0 * pitch).ok()
    } else {
        None
    };
    Ok((frames, tc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::GPSNR_CAP_DB;
    use crate::synth::{synthetic_sequence, SynthParams};

    fn small() -> FrameSequence {
        synthetic_sequence(&SynthParams {
            frames: 2,
            points: 3000,
            semi_axes: [16.0, 12.0, 10.0],
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn uncorrupted_none_fill_is_perfect() {
        let seq = small();
        let r = run_benchmark(&seq, &InpaintConfig::default(), &[Method::NoneFill], HoleParams { n_holes: 0, radius: 1.0 }, 1)
            .unwrap();
        let row = r.row(Method::NoneFill).unwrap();
        assert_eq!(row.gpsnr_db, Some(GPSNR_CAP_DB));
        assert_eq!(row.nshd, Some(0.0));
        assert_eq!(r.removed_fraction, 0.0);
    }

    #[test]
    fn rows_follow_the_requested_order() {
        let seq = small();
        let methods = [Method::PlaneFill, Method::NoneFill];
        let r = run_benchmark(&seq, &InpaintConfig::default(), &methods, HoleParams { n_holes: 2, radius: 2.0 }, 5)
            .unwrap();
        let names: Vec<&str> = r.methods.iter().map(|m| m.name.as_str()).collect();
        assert_eq!(names, ["plane-fill", "none-fill"]);
        assert!(r.table().lines().count() == 3);
    }

    #[test]
    fn fixtures_are_marked_non_reproducible() {
        let p = published_results();
        assert!(!p.reproducible);
        assert_eq!(p.results.len(), 2);
    }
}
