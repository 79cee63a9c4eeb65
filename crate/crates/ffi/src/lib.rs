//! C interface to `dpc-inpaint`.
//!
//! Every object crosses the boundary as an opaque handle created and freed
//! by this library. Functions return a [`DpcStatus`]; on failure the message
//! is available from [`dpc_last_error`] on the same thread. Panics are
//! caught and reported as `DPC_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use dpc_inpaint::holes::{synthesize_holes, HoleMask};
use dpc_inpaint::metrics;
use dpc_inpaint::ply::{load_ply, save_ply, PlyFormat};
use dpc_inpaint::{inpaint_sequence, Error, FrameSequence, InpaintConfig, Point, PointCloud};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Shape = 5,
    /// A stage of the algorithm could not proceed (no source, singular
    /// system, solver failure and the like).
    Algorithm = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// A point cloud.
pub struct DpcCloud(PointCloud);
/// An ordered list of frames.
pub struct DpcSequence(FrameSequence);
/// Pipeline settings.
pub struct DpcConfig(InpaintConfig);
/// Removed points and hole seeds per frame.
pub struct DpcMask(HoleMask);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(DpcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => DpcStatus::Io,
            Error::Parse { .. } | Error::Data { .. } | Error::Json(_) => DpcStatus::Parse,
            Error::Argument(_) | Error::CorruptionBudget { .. } => DpcStatus::InvalidArgument,
            Error::Shape(_) => DpcStatus::Shape,
            _ => DpcStatus::Algorithm,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DpcStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, turning errors and panics into a status plus last error.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> DpcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => DpcStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {message}"));
            DpcStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(DpcStatus::InvalidArgument, "path is not UTF-8".into()))?;
    Ok(Path::new(s))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(p))));
    }
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dpc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn dpc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Cloud from `n` interleaved x, y, z coordinates.
#[no_mangle]
pub unsafe extern "C" fn dpc_cloud_new(xyz: *const f64, n: usize, out: *mut *mut DpcCloud) -> DpcStatus {
    guard(|| {
        if xyz.is_null() && n > 0 {
            return Err(null("coordinates"));
        }
        let coords = if n == 0 { &[][..] } else { std::slice::from_raw_parts(xyz, 3 * n) };
        let cloud = PointCloud::new(coords.chunks_exact(3).map(|c| Point::new(c[0], c[1], c[2])).collect());
        cloud
            .validate()
            .map_err(|e| Failure(DpcStatus::InvalidArgument, e.to_string()))?;
        put(out, DpcCloud(cloud))
    })
}

#[no_mangle]
pub unsafe extern "C" fn dpc_cloud_load_ply(path: *const c_char, out: *mut *mut DpcCloud) -> DpcStatus {
    guard(|| put(out, DpcCloud(load_ply(path_arg(path)?)?)))
}

/// Writes binary little-endian PLY unless `ascii` is nonzero.
#[no_mangle]
pub unsafe extern "C" fn dpc_cloud_save_ply(cloud: *const DpcCloud, path: *const c_char, ascii: i32) -> DpcStatus {
    guard(|| {
        let format = if ascii != 0 { PlyFormat::Ascii } else { PlyFormat::BinaryLittleEndian };
        save_ply(&as_ref(cloud, "cloud")?.0, path_arg(path)?, format)?;
        Ok(())
    })
}

/// Number of points, 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dpc_cloud_len(cloud: *const DpcCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.0.len())
}

/// Copies the coordinates into `xyz`, which must hold `3 * len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dpc_cloud_points(cloud: *const DpcCloud, xyz: *mut f64, capacity: usize) -> DpcStatus {
    guard(|| {
        let c = &as_ref(cloud, "cloud")?.0;
        if xyz.is_null() {
            return Err(null("coordinate buffer"));
        }
        if capacity < 3 * c.len() {
            return Err(Failure(
                DpcStatus::BufferTooSmall,
                format!("need {} doubles, got {capacity}", 3 * c.len()),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(xyz, 3 * c.len());
        for (chunk, p) in dst.chunks_exact_mut(3).zip(&c.points) {
            chunk.copy_from_slice(&[p.x, p.y, p.z]);
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn dpc_cloud_free(cloud: *mut DpcCloud) {
    free(cloud)
}

#[no_mangle]
pub unsafe extern "C" fn dpc_sequence_new(out: *mut *mut DpcSequence) -> DpcStatus {
    guard(|| put(out, DpcSequence(FrameSequence::new(Vec::new()))))
}

/// Appends a copy of `cloud`.
#[no_mangle]
pub unsafe extern "C" fn dpc_sequence_push(seq: *mut DpcSequence, cloud: *const DpcCloud) -> DpcStatus {
    guard(|| {
        let c = as_ref(cloud, "cloud")?.0.clone();
        as_mut(seq, "sequence")?.0.frames.push(c);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn dpc_sequence_len(seq: *const DpcSequence) -> usize {
    seq.as_ref().map_or(0, |s| s.0.len())
}

/// Copy of frame `f` as a new cloud.
#[no_mangle]
pub unsafe extern "C" fn dpc_sequence_frame(seq: *const DpcSequence, f: usize, out: *mut *mut DpcCloud) -> DpcStatus {
    guard(|| {
        let s = &as_ref(seq, "sequence")?.0;
        let frame = s.frames.get(f).ok_or_else(|| {
            Failure(DpcStatus::InvalidArgument, format!("frame {f} out of range for {} frames", s.len()))
        })?;
        put(out, DpcCloud(frame.clone()))
    })
}

#[no_mangle]
pub unsafe extern "C" fn dpc_sequence_free(seq: *mut DpcSequence) {
    free(seq)
}

#[no_mangle]
pub unsafe extern "C" fn dpc_config_default(out: *mut *mut DpcConfig) -> DpcStatus {
    guard(|| put(out, DpcConfig(InpaintConfig::default())))
}

/// Configuration from a JSON object; missing fields take their defaults.
#[no_mangle]
pub unsafe extern "C" fn dpc_config_from_json(json: *const c_char, out: *mut *mut DpcConfig) -> DpcStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| Failure(DpcStatus::InvalidArgument, "json is not UTF-8".into()))?;
        let cfg: InpaintConfig = serde_json::from_str(text).map_err(Error::from)?;
        cfg.validate()?;
        put(out, DpcConfig(cfg))
    })
}

#[no_mangle]
pub unsafe extern "C" fn dpc_config_set_weights(cfg: *mut DpcConfig, alpha: f64, beta: f64, gamma: f64) -> DpcStatus {
    guard(|| {
        let c = &mut as_mut(cfg, "config")?.0;
        let mut w = c.weights;
        w.alpha = alpha;
        w.beta = beta;
        w.gamma = gamma;
        w.validate()?;
        c.weights = w;
        Ok(())
    })
}

/// Leaves wall-clock times out of reports when `enabled` is zero.
#[no_mangle]
pub unsafe extern "C" fn dpc_config_set_timing(cfg: *mut DpcConfig, enabled: i32) -> DpcStatus {
    guard(|| {
        as_mut(cfg, "config")?.0.timing = enabled != 0;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn dpc_config_free(cfg: *mut DpcConfig) {
    free(cfg)
}

#[no_mangle]
pub unsafe extern "C" fn dpc_mask_load(path: *const c_char, out: *mut *mut DpcMask) -> DpcStatus {
    guard(|| put(out, DpcMask(HoleMask::load(path_arg(path)?)?)))
}

#[no_mangle]
pub unsafe extern "C" fn dpc_mask_save(mask: *const DpcMask, path: *const c_char) -> DpcStatus {
    guard(|| {
        as_ref(mask, "mask")?.0.save(path_arg(path)?)?;
        Ok(())
    })
}

/// Total number of removed points over all frames.
#[no_mangle]
pub unsafe extern "C" fn dpc_mask_removed(mask: *const DpcMask) -> usize {
    mask.as_ref().map_or(0, |m| m.0.frames.iter().map(|h| h.removed.len()).sum())
}

#[no_mangle]
pub unsafe extern "C" fn dpc_mask_free(mask: *mut DpcMask) {
    free(mask)
}

/// Removes seeded balls of `radius` around `n_holes` points from every frame.
#[no_mangle]
pub unsafe extern "C" fn dpc_synthesize_holes(
    seq: *const DpcSequence,
    n_holes: usize,
    radius: f64,
    seed: u64,
    corrupted: *mut *mut DpcSequence,
    mask: *mut *mut DpcMask,
) -> DpcStatus {
    guard(|| {
        if corrupted.is_null() || mask.is_null() {
            return Err(null("output pointer"));
        }
        let (c, m) = synthesize_holes(&as_ref(seq, "sequence")?.0, n_holes, radius, seed)?;
        put(corrupted, DpcSequence(c))?;
        put(mask, DpcMask(m))
    })
}

/// Inpaints every frame. `mask` may be null, in which case holes are
/// detected from point density. When `report_json` is not null it receives
/// the per-cube report, to be released with [`dpc_string_free`].
#[no_mangle]
pub unsafe extern "C" fn dpc_inpaint_sequence(
    seq: *const DpcSequence,
    cfg: *const DpcConfig,
    mask: *const DpcMask,
    out: *mut *mut DpcSequence,
    report_json: *mut *mut c_char,
) -> DpcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let mask = mask.as_ref().map(|m| &m.0);
        let (result, report) = inpaint_sequence(&as_ref(seq, "sequence")?.0, &as_ref(cfg, "config")?.0, mask)?;
        if !report_json.is_null() {
            let text = CString::new(report.to_json()?).expect("JSON has no nul");
            *report_json = text.into_raw();
        }
        put(out, DpcSequence(result))
    })
}

#[no_mangle]
pub unsafe extern "C" fn dpc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Symmetric point-to-plane PSNR of `test` against `reference`, in dB.
#[no_mangle]
pub unsafe extern "C" fn dpc_gpsnr(reference: *const DpcCloud, test: *const DpcCloud, out: *mut f64) -> DpcStatus {
    guard(|| {
        let v = metrics::gpsnr(&as_ref(reference, "reference")?.0, &as_ref(test, "test")?.0)?;
        *as_mut(out, "output pointer")? = v;
        Ok(())
    })
}

/// Normalized symmetric mean nearest-neighbour distance.
#[no_mangle]
pub unsafe extern "C" fn dpc_nshd(reference: *const DpcCloud, test: *const DpcCloud, out: *mut f64) -> DpcStatus {
    guard(|| {
        let v = metrics::nshd(&as_ref(reference, "reference")?.0, &as_ref(test, "test")?.0)?;
        *as_mut(out, "output pointer")? = v;
        Ok(())
    })
}
