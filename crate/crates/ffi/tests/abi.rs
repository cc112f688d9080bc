//! Drives the C entry points the way a foreign caller would: raw
//! pointers in, status codes out.

use std::ffi::{CStr, CString};
use std::io::Write;
use std::ptr;

use tandem_core::gaze::{cast_ray_idx, Aoi, AoiRole};
use tandem_core::imu::lstm::{save_weights, LstmParams};
use tandem_core::{Aabb, TICK_S};
use tandem_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(tandem_last_error()).to_str().unwrap().to_owned() }
}

/// Workspace box straight ahead, parts table off to the right.
unsafe fn desk_set() -> *mut TandemAoiSet {
    let set = tandem_aoi_set_new();
    let add = |set, name: &str, min: [f64; 3], max: [f64; 3], role: i32| {
        let name = c(name);
        let status =
            unsafe { tandem_aoi_set_add(set, name.as_ptr(), min.as_ptr(), max.as_ptr(), role) };
        assert_eq!(status, TandemStatus::Ok, "{}", last_error());
    };
    add(set, "bench", [-0.5, 0.5, 0.6], [0.5, 1.5, 1.4], 0);
    add(set, "tray", [1.5, -0.5, 0.6], [2.5, 0.5, 1.4], 2);
    set
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(tandem_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn cast_ray_matches_the_native_query() {
    unsafe {
        let set = desk_set();
        let native = [
            Aoi {
                name: "bench".into(),
                bounds: Aabb::new([-0.5, 0.5, 0.6], [0.5, 1.5, 1.4]).unwrap(),
                role: AoiRole::HumanWorkspace,
            },
            Aoi {
                name: "tray".into(),
                bounds: Aabb::new([1.5, -0.5, 0.6], [2.5, 0.5, 1.4]).unwrap(),
                role: AoiRole::PartsTable,
            },
        ];
        let origin = [0.0, -1.0, 1.0];
        for direction in [[0.0, 1.0, 0.0], [2.0, 1.0, 0.0], [0.0, -1.0, 0.0]] {
            let mut idx = i32::MIN;
            let mut entry = f64::MIN;
            let status = tandem_cast_ray(
                set,
                origin.as_ptr(),
                direction.as_ptr(),
                &mut idx,
                &mut entry,
            );
            assert_eq!(status, TandemStatus::Ok);
            let unit = tandem_core::geom::normalize(direction).unwrap();
            match cast_ray_idx(origin, unit, &native) {
                Some((i, t)) => {
                    assert_eq!(idx, i as i32);
                    assert!((entry - t).abs() < 1e-12);
                }
                None => {
                    assert_eq!(idx, -1);
                    assert!(entry.is_nan());
                }
            }
        }
        tandem_aoi_set_free(set);
    }
}

#[test]
fn null_arguments_are_rejected_with_a_message() {
    unsafe {
        let mut idx = 0i32;
        let mut entry = 0.0f64;
        let origin = [0.0; 3];
        let status =
            tandem_cast_ray(ptr::null(), origin.as_ptr(), origin.as_ptr(), &mut idx, &mut entry);
        assert_eq!(status, TandemStatus::NullArgument);
        assert!(last_error().contains("set"));
    }
}

#[test]
fn degenerate_boxes_bad_roles_and_zero_directions_are_invalid() {
    unsafe {
        let set = tandem_aoi_set_new();
        let name = c("flat");
        let min = [0.0, 0.0, 0.0];
        let max = [1.0, 0.0, 1.0];
        let status = tandem_aoi_set_add(set, name.as_ptr(), min.as_ptr(), max.as_ptr(), 0);
        assert_eq!(status, TandemStatus::InvalidArgument);

        let max = [1.0, 1.0, 1.0];
        let status = tandem_aoi_set_add(set, name.as_ptr(), min.as_ptr(), max.as_ptr(), 9);
        assert_eq!(status, TandemStatus::InvalidArgument);
        assert!(last_error().contains("role"));

        let status = tandem_aoi_set_add(set, name.as_ptr(), min.as_ptr(), max.as_ptr(), 0);
        assert_eq!(status, TandemStatus::Ok);
        let mut idx = 0i32;
        let mut entry = 0.0f64;
        let zero = [0.0; 3];
        let status = tandem_cast_ray(set, min.as_ptr(), zero.as_ptr(), &mut idx, &mut entry);
        assert_eq!(status, TandemStatus::InvalidArgument);
        tandem_aoi_set_free(set);
    }
}

#[test]
fn gaze_handle_flips_after_the_dwell_and_rejects_stale_timestamps() {
    unsafe {
        let set = desk_set();
        let mut gaze: *mut TandemGaze = ptr::null_mut();
        assert_eq!(tandem_gaze_new(set, 0.2, &mut gaze), TandemStatus::Ok);
        tandem_aoi_set_free(set);

        let origin = [0.0, -1.0, 1.0];
        let into_bench = [0.0, 2.0, 0.0];
        let into_tray = [2.0, 1.0, 0.0];
        let mut label = TandemLabel::Idle;
        let mut t = 0.0;
        for _ in 0..10 {
            let status =
                tandem_gaze_push(gaze, t, origin.as_ptr(), into_bench.as_ptr(), &mut label);
            assert_eq!(status, TandemStatus::Ok);
            assert_eq!(label, TandemLabel::Working);
            t += TICK_S;
        }
        let mut flipped_at = None;
        for i in 0..10 {
            let status =
                tandem_gaze_push(gaze, t, origin.as_ptr(), into_tray.as_ptr(), &mut label);
            assert_eq!(status, TandemStatus::Ok);
            if label == TandemLabel::Idle {
                flipped_at = Some(i);
                break;
            }
            t += TICK_S;
        }
        // dwell 0.2 s at 30 Hz: the seventh differing ray flips
        assert_eq!(flipped_at, Some(6));

        let status = tandem_gaze_push(gaze, 0.0, origin.as_ptr(), into_tray.as_ptr(), &mut label);
        assert_eq!(status, TandemStatus::Stream);
        tandem_gaze_free(gaze);
    }
}

#[test]
fn gaze_new_requires_exactly_one_workspace() {
    unsafe {
        let set = tandem_aoi_set_new();
        let name = c("tray");
        let min = [0.0, 0.0, 0.0];
        let max = [1.0, 1.0, 1.0];
        assert_eq!(
            tandem_aoi_set_add(set, name.as_ptr(), min.as_ptr(), max.as_ptr(), 2),
            TandemStatus::Ok
        );
        let mut gaze: *mut TandemGaze = ptr::null_mut();
        assert_eq!(tandem_gaze_new(set, 0.5, &mut gaze), TandemStatus::InvalidArgument);
        assert!(gaze.is_null());
        tandem_aoi_set_free(set);
    }
}

#[test]
fn imu_handle_decides_on_the_stride_grid() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.weights");
    let params = LstmParams::init(36, 4, 1, 0.3);
    save_weights(std::fs::File::create(&path).unwrap(), &params).unwrap();

    unsafe {
        let cpath = c(path.to_str().unwrap());
        let mut imu: *mut TandemImu = ptr::null_mut();
        let status = tandem_imu_new_from_file(cpath.as_ptr(), 10, 0.5, &mut imu);
        assert_eq!(status, TandemStatus::Ok, "{}", last_error());

        let features = [0.1f64; 36];
        let mut decisions = Vec::new();
        for i in 0..520usize {
            let mut decided = false;
            let mut label = TandemLabel::Working;
            let mut prob = f64::NAN;
            let status = tandem_imu_push_frame(
                imu,
                i as f64 * TICK_S,
                features.as_ptr(),
                &mut decided,
                &mut label,
                &mut prob,
            );
            assert_eq!(status, TandemStatus::Ok);
            if decided {
                assert!((0.0..=1.0).contains(&prob));
                decisions.push(i);
            }
        }
        assert_eq!(decisions, vec![499, 509, 519]);

        // a hole in the timeline breaks the stream contract
        let mut decided = false;
        let mut label = TandemLabel::Working;
        let mut prob = 0.0;
        let status = tandem_imu_push_frame(
            imu,
            520.0 * TICK_S + 1.0,
            features.as_ptr(),
            &mut decided,
            &mut label,
            &mut prob,
        );
        assert_eq!(status, TandemStatus::Stream);
        tandem_imu_free(imu);
    }
}

#[test]
fn imu_open_separates_io_parse_and_validation_failures() {
    let dir = tempfile::tempdir().unwrap();
    unsafe {
        let mut imu: *mut TandemImu = ptr::null_mut();

        let missing = c(dir.path().join("nope.weights").to_str().unwrap());
        assert_eq!(
            tandem_imu_new_from_file(missing.as_ptr(), 15, 0.5, &mut imu),
            TandemStatus::Io
        );

        let garbage = dir.path().join("garbage.weights");
        std::fs::write(&garbage, b"not a net").unwrap();
        let garbage = c(garbage.to_str().unwrap());
        assert_eq!(
            tandem_imu_new_from_file(garbage.as_ptr(), 15, 0.5, &mut imu),
            TandemStatus::Parse
        );

        // structurally sound weights with the wrong input width
        let narrow = dir.path().join("narrow.weights");
        let params = LstmParams::init(12, 4, 1, 0.3);
        let mut f = std::fs::File::create(&narrow).unwrap();
        save_weights(&mut f, &params).unwrap();
        f.flush().unwrap();
        let narrow = c(narrow.to_str().unwrap());
        assert_eq!(
            tandem_imu_new_from_file(narrow.as_ptr(), 15, 0.5, &mut imu),
            TandemStatus::InvalidArgument
        );
        assert!(imu.is_null());
    }
}

#[test]
fn freeing_null_handles_is_a_no_op() {
    unsafe {
        tandem_aoi_set_free(ptr::null_mut());
        tandem_gaze_free(ptr::null_mut());
        tandem_imu_free(ptr::null_mut());
    }
}
