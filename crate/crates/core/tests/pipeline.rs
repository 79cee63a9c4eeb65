use dpc_inpaint::geometry::{FrameSequence, Point, PointCloud, Vec3};
use dpc_inpaint::holes::{synthesize_holes, HoleMask};
use dpc_inpaint::synth::{synthetic_sequence, translated_plane, SynthParams};
use dpc_inpaint::{inpaint_frame, inpaint_sequence, InpaintConfig};

fn plane_with_hole(frames: usize) -> (FrameSequence, FrameSequence, HoleMask) {
    let seq = translated_plane(frames, 40, Vec3::new(0.5, 0.25, 0.0));
    let (corrupted, mask) = synthesize_holes(&seq, 1, 3.5, 11).unwrap();
    (seq, corrupted, mask)
}

fn small_ellipsoid() -> FrameSequence {
    synthetic_sequence(&SynthParams {
        frames: 3,
        points: 4000,
        semi_axes: [18.0, 14.0, 12.0],
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn no_targets_leaves_the_sequence_alone() {
    let seq = translated_plane(3, 20, Vec3::new(0.5, 0.0, 0.0));
    let (out, report) = inpaint_sequence(&seq, &InpaintConfig::default(), None).unwrap();
    assert_eq!(out, seq);
    assert!(report.frames.iter().all(|r| r.cubes.is_empty()));
}

#[test]
fn removed_points_are_covered_on_a_plane() {
    let (_, corrupted, mask) = plane_with_hole(3);
    let cfg = InpaintConfig::default();
    let pitch = cfg.resolve(&corrupted).unwrap().segmentation.voxel_pitch;
    let (out, report) = inpaint_sequence(&corrupted, &cfg, Some(&mask)).unwrap();
    for (f, frame) in out.frames.iter().enumerate() {
        assert!(report.frames[f].n_solved() > 0);
        for r in mask.frames[f].locations() {
            let best = frame.points.iter().map(|p| (p - r).norm()).fold(f64::INFINITY, f64::min);
            assert!(best <= 2.0 * pitch, "frame {f}: removed {r:?} is {best} from the output");
        }
        for p in &frame.points[corrupted.frames[f].len()..] {
            assert!(p.z.abs() < 0.05 * pitch, "created point {p:?} left the plane");
        }
    }
}

#[test]
fn interior_frames_use_both_neighbours() {
    let (_, corrupted, mask) = plane_with_hole(3);
    let (_, report) = inpaint_sequence(&corrupted, &InpaintConfig::default(), Some(&mask)).unwrap();
    let solved: Vec<_> = report.frames[1].cubes.iter().filter(|c| c.solved()).collect();
    assert!(!solved.is_empty());
    for c in solved {
        assert!(!c.dropped_prev && !c.dropped_next, "cube {} dropped a side", c.id);
        assert!(c.coverage_prev > 0.8 && c.coverage_next > 0.8, "cube {}: {c:?}", c.id);
    }
}

#[test]
fn first_frame_has_no_previous_side() {
    let (_, corrupted, mask) = plane_with_hole(2);
    let (_, report) = inpaint_frame(&corrupted, 0, &InpaintConfig::default(), Some(&mask)).unwrap();
    let solved: Vec<_> = report.cubes.iter().filter(|c| c.solved()).collect();
    assert!(!solved.is_empty());
    for c in solved {
        assert!(c.dropped_prev && c.votes_prev.is_none());
        assert_eq!(c.sides[0].reason.as_deref(), Some("outside sequence"));
        assert!(!c.dropped_next);
    }
}

#[test]
fn objective_never_increases() {
    let seq = small_ellipsoid();
    let (corrupted, mask) = synthesize_holes(&seq, 3, 2.5, 4).unwrap();
    let (_, report) = inpaint_sequence(&corrupted, &InpaintConfig::default(), Some(&mask)).unwrap();
    let mut solved = 0;
    for c in report.frames.iter().flat_map(|r| &r.cubes).filter(|c| c.solved()) {
        let (before, after) = (c.objective_before.unwrap(), c.objective_after.unwrap());
        assert!(after <= before + 1e-9 * before.max(1.0), "cube {}: {before} -> {after}", c.id);
        solved += 1;
    }
    assert!(solved > 0);
}

#[test]
fn single_frame_equals_the_beta_free_run() {
    let seq = small_ellipsoid();
    let one = FrameSequence::new(vec![seq.frames[1].clone()]);
    let (corrupted, mask) = synthesize_holes(&one, 3, 2.5, 9).unwrap();
    let full = inpaint_sequence(&corrupted, &InpaintConfig::default(), Some(&mask)).unwrap();
    let mut cfg = InpaintConfig::default();
    cfg.weights.beta = 0.0;
    let ablated = inpaint_sequence(&corrupted, &cfg, Some(&mask)).unwrap();
    assert_eq!(full.0, ablated.0);
    assert!(full.1.frames[0].n_solved() > 0);
}

#[test]
fn runs_are_deterministic() {
    let seq = small_ellipsoid();
    let (corrupted, mask) = synthesize_holes(&seq, 3, 2.5, 2).unwrap();
    let mut cfg = InpaintConfig::default();
    cfg.timing = false;
    let a = inpaint_sequence(&corrupted, &cfg, Some(&mask)).unwrap();
    let b = inpaint_sequence(&corrupted, &cfg, Some(&mask)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.1.to_json().unwrap(), b.1.to_json().unwrap());
}

#[test]
fn sequence_frames_match_single_frame_runs() {
    let seq = small_ellipsoid();
    let (corrupted, mask) = synthesize_holes(&seq, 2, 2.5, 6).unwrap();
    let mut cfg = InpaintConfig::default();
    cfg.timing = false;
    let (out, report) = inpaint_sequence(&corrupted, &cfg, Some(&mask)).unwrap();
    for f in 0..seq.len() {
        let (frame, r) = inpaint_frame(&corrupted, f, &cfg, Some(&mask)).unwrap();
        assert_eq!(frame, out.frames[f]);
        assert_eq!(r, report.frames[f]);
    }
}

#[test]
fn repeated_frames_give_repeated_outputs() {
    let base = small_ellipsoid().frames.remove(0);
    let one = FrameSequence::new(vec![base]);
    let (corrupted, mask) = synthesize_holes(&one, 2, 2.5, 8).unwrap();
    let frame = corrupted.frames[0].clone();
    let seq = FrameSequence::new(vec![frame.clone(), frame.clone(), frame]);
    let mask = HoleMask {
        frames: (0..3)
            .map(|f| {
                let mut h = mask.frames[0].clone();
                h.frame = f;
                h
            })
            .collect(),
    };
    let mut cfg = InpaintConfig::default();
    cfg.timing = false;
    let (out, _) = inpaint_sequence(&seq, &cfg, Some(&mask)).unwrap();
    // The middle frame sees both neighbours, the ends one each, so only the
    // two end frames are required to agree with each other exactly.
    assert_eq!(out.frames[0].len(), out.frames[2].len());
    for (a, b) in out.frames[0].points.iter().zip(&out.frames[2].points) {
        assert!((a - b).norm() < 1e-9);
    }
}

#[test]
fn out_of_range_frame_is_rejected() {
    let seq = FrameSequence::new(vec![PointCloud::new(vec![Point::origin()])]);
    assert!(inpaint_frame(&seq, 3, &InpaintConfig::default(), None).is_err());
}
