//! C ABI over the perception hot path: AOI ray casts, the gaze dwell
//! classifier and the streaming IMU classifier.
//!
//! Conventions, mirrored in the generated `include/tandem.h`:
//! - every fallible function returns a `TandemStatus`; 0 is success
//! - out parameters are written only on success
//! - handles come from the matching constructor and are released with
//!   the matching `_free`; freeing NULL is a no-op
//! - after a failing call, `tandem_last_error()` returns a message on
//!   the same thread, valid until that thread's next failing call
//! - vectors are `const double[3]`, IMU frames `const double[36]`

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};

use tandem_core::gaze::{cast_ray_idx, Aoi, AoiRole, GazeClassifier, GazePolicy, GazeSample};
use tandem_core::imu::lstm::WeightsIoError;
use tandem_core::imu::{load_weights, ImuClassifier, ImuFrame, FRAME_FEATURES};
use tandem_core::{geom, Aabb, IntentLabel, Vec3};

/// Result of every fallible call.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TandemStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// An argument failed validation (range, geometry, encoding).
    InvalidArgument = 2,
    /// The operating system reported an I/O failure.
    Io = 3,
    /// A file was readable but not in the expected format.
    Parse = 4,
    /// A streaming call broke the timeline contract (out-of-order or
    /// gapped timestamps).
    Stream = 5,
    /// An internal invariant failed; the handle should be freed.
    Panic = 6,
}

/// Binary intent label produced by both classifiers.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TandemLabel {
    Working = 0,
    Idle = 1,
}

impl From<IntentLabel> for TandemLabel {
    fn from(l: IntentLabel) -> Self {
        match l {
            IntentLabel::Working => TandemLabel::Working,
            IntentLabel::Idle => TandemLabel::Idle,
        }
    }
}

/// Role of an AOI box; decides which label side a gaze hit counts for.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TandemAoiRole {
    HumanWorkspace = 0,
    RobotArea = 1,
    PartsTable = 2,
}

/// An ordered collection of named AOI boxes.
pub struct TandemAoiSet {
    aois: Vec<Aoi>,
}

/// Streaming gaze classifier with dwell hysteresis.
pub struct TandemGaze {
    inner: GazeClassifier,
}

/// Streaming IMU window classifier.
pub struct TandemImu {
    inner: ImuClassifier,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: TandemStatus, msg: impl AsRef<str>) -> TandemStatus {
    let owned = msg.as_ref().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(owned).unwrap_or_default());
    status
}

fn weights_status(err: &WeightsIoError) -> TandemStatus {
    match err {
        WeightsIoError::Io(_) => TandemStatus::Io,
        _ => TandemStatus::Parse,
    }
}

macro_rules! require {
    ($ptr:expr) => {
        if $ptr.is_null() {
            return fail(TandemStatus::NullArgument, concat!(stringify!($ptr), " is null"));
        }
    };
}

/// Runs a body that may touch core code; a panic becomes a status
/// instead of unwinding across the C boundary.
fn guarded(body: impl FnOnce() -> TandemStatus) -> TandemStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(TandemStatus::Panic, "internal invariant failed"),
    }
}

unsafe fn read_vec3(p: *const f64) -> Vec3 {
    [*p, *p.add(1), *p.add(2)]
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tandem_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of this thread's most recent failing call; empty string if
/// none. The pointer stays valid until the next failing call on the
/// same thread.
#[no_mangle]
pub extern "C" fn tandem_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates an empty AOI set. Release with `tandem_aoi_set_free`.
#[no_mangle]
pub extern "C" fn tandem_aoi_set_new() -> *mut TandemAoiSet {
    Box::into_raw(Box::new(TandemAoiSet { aois: Vec::new() }))
}

/// Appends one axis-aligned box. `name` is UTF-8; `min`/`max` are 3
/// doubles each with min < max per axis; `role` is a `TandemAoiRole`
/// value.
#[no_mangle]
pub unsafe extern "C" fn tandem_aoi_set_add(
    set: *mut TandemAoiSet,
    name: *const c_char,
    min: *const f64,
    max: *const f64,
    role: i32,
) -> TandemStatus {
    require!(set);
    require!(name);
    require!(min);
    require!(max);
    let role = match role {
        0 => AoiRole::HumanWorkspace,
        1 => AoiRole::RobotArea,
        2 => AoiRole::PartsTable,
        other => return fail(TandemStatus::InvalidArgument, format!("unknown role {other}")),
    };
    let name = match CStr::from_ptr(name).to_str() {
        Ok(s) => s.to_owned(),
        Err(_) => return fail(TandemStatus::InvalidArgument, "name is not UTF-8"),
    };
    let bounds = match Aabb::new(read_vec3(min), read_vec3(max)) {
        Ok(b) => b,
        Err(e) => return fail(TandemStatus::InvalidArgument, e.to_string()),
    };
    let set = &mut *set;
    if set.aois.len() == i32::MAX as usize {
        return fail(TandemStatus::InvalidArgument, "AOI set is full");
    }
    set.aois.push(Aoi { name, bounds, role });
    TandemStatus::Ok
}

#[no_mangle]
pub unsafe extern "C" fn tandem_aoi_set_free(set: *mut TandemAoiSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Casts a ray against the set. On a hit writes the box index and the
/// entry distance in meters; on a clean miss writes -1 and NAN. The
/// direction need not be normalized, only nonzero.
#[no_mangle]
pub unsafe extern "C" fn tandem_cast_ray(
    set: *const TandemAoiSet,
    origin: *const f64,
    direction: *const f64,
    out_index: *mut i32,
    out_entry: *mut f64,
) -> TandemStatus {
    require!(set);
    require!(origin);
    require!(direction);
    require!(out_index);
    require!(out_entry);
    let origin = read_vec3(origin);
    let direction = match geom::normalize(read_vec3(direction)) {
        Some(d) => d,
        None => return fail(TandemStatus::InvalidArgument, "direction has no length"),
    };
    let set = &*set;
    guarded(|| {
        match cast_ray_idx(origin, direction, &set.aois) {
            Some((i, entry)) => {
                *out_index = i as i32;
                *out_entry = entry;
            }
            None => {
                *out_index = -1;
                *out_entry = f64::NAN;
            }
        }
        TandemStatus::Ok
    })
}

/// Builds a gaze classifier over a copy of the set. The set must hold
/// exactly one `HumanWorkspace` box and unique names; `dwell_s` is the
/// hysteresis in seconds. The initial label is Working.
#[no_mangle]
pub unsafe extern "C" fn tandem_gaze_new(
    set: *const TandemAoiSet,
    dwell_s: f64,
    out: *mut *mut TandemGaze,
) -> TandemStatus {
    require!(set);
    require!(out);
    let aois = (*set).aois.clone();
    let policy = GazePolicy { dwell_s, initial: IntentLabel::Working };
    match GazeClassifier::new(aois, policy) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(TandemGaze { inner }));
            TandemStatus::Ok
        }
        Err(e) => fail(TandemStatus::InvalidArgument, e.to_string()),
    }
}

/// Consumes one gaze ray and writes the current label. Timestamps must
/// be strictly increasing.
#[no_mangle]
pub unsafe extern "C" fn tandem_gaze_push(
    gaze: *mut TandemGaze,
    t: f64,
    origin: *const f64,
    direction: *const f64,
    out_label: *mut TandemLabel,
) -> TandemStatus {
    require!(gaze);
    require!(origin);
    require!(direction);
    require!(out_label);
    let origin = read_vec3(origin);
    let direction = match geom::normalize(read_vec3(direction)) {
        Some(d) => d,
        None => return fail(TandemStatus::InvalidArgument, "direction has no length"),
    };
    let sample = match GazeSample::new(t, origin, direction) {
        Ok(s) => s,
        Err(e) => return fail(TandemStatus::InvalidArgument, e.to_string()),
    };
    let gaze = &mut *gaze;
    guarded(|| match gaze.inner.push(&sample) {
        Ok(label) => {
            *out_label = label.into();
            TandemStatus::Ok
        }
        Err(e) => fail(TandemStatus::Stream, e.to_string()),
    })
}

#[no_mangle]
pub unsafe extern "C" fn tandem_gaze_free(gaze: *mut TandemGaze) {
    if !gaze.is_null() {
        drop(Box::from_raw(gaze));
    }
}

/// Loads trained weights from a UTF-8 `weights_path` and builds a
/// streaming classifier deciding every `stride` frames once 500 have
/// accumulated; `threshold` splits Idle probability into labels.
#[no_mangle]
pub unsafe extern "C" fn tandem_imu_new_from_file(
    weights_path: *const c_char,
    stride: usize,
    threshold: f64,
    out: *mut *mut TandemImu,
) -> TandemStatus {
    require!(weights_path);
    require!(out);
    let path = match CStr::from_ptr(weights_path).to_str() {
        Ok(s) => s,
        Err(_) => return fail(TandemStatus::InvalidArgument, "path is not UTF-8"),
    };
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) => return fail(TandemStatus::Io, format!("{path}: {e}")),
    };
    let params = match load_weights(BufReader::new(file)) {
        Ok(p) => p,
        Err(e) => return fail(weights_status(&e), format!("{path}: {e}")),
    };
    match ImuClassifier::new(params, stride, threshold) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(TandemImu { inner }));
            TandemStatus::Ok
        }
        Err(e) => fail(TandemStatus::InvalidArgument, e.to_string()),
    }
}

/// Consumes one 36-feature frame at time `t`. Frames must arrive on a
/// contiguous 30 Hz timeline. Writes whether a decision fired and, if
/// so, the label and Idle probability.
#[no_mangle]
pub unsafe extern "C" fn tandem_imu_push_frame(
    imu: *mut TandemImu,
    t: f64,
    features: *const f64,
    out_decided: *mut bool,
    out_label: *mut TandemLabel,
    out_prob: *mut f64,
) -> TandemStatus {
    require!(imu);
    require!(features);
    require!(out_decided);
    require!(out_label);
    require!(out_prob);
    let mut frame = ImuFrame { t, features: [0.0; FRAME_FEATURES] };
    frame.features.copy_from_slice(std::slice::from_raw_parts(features, FRAME_FEATURES));
    let imu = &mut *imu;
    guarded(|| match imu.inner.push_frame(&frame) {
        Ok(Some(decision)) => {
            *out_decided = true;
            *out_label = decision.label.into();
            *out_prob = decision.prob;
            TandemStatus::Ok
        }
        Ok(None) => {
            *out_decided = false;
            TandemStatus::Ok
        }
        Err(e) => fail(TandemStatus::Stream, e.to_string()),
    })
}

#[no_mangle]
pub unsafe extern "C" fn tandem_imu_free(imu: *mut TandemImu) {
    if !imu.is_null() {
        drop(Box::from_raw(imu));
    }
}
