use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use ridepool_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = rp_last_error();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn config(pairs: &[(&str, &str)]) -> *mut RpConfig {
    let mut cfg = ptr::null_mut();
    assert_eq!(rp_config_new(&mut cfg), RpStatus::Ok);
    for (k, v) in pairs {
        assert_eq!(rp_config_set(cfg, c(k).as_ptr(), c(v).as_ptr()), RpStatus::Ok, "{}", last_error());
    }
    cfg
}

unsafe fn metric(run: *const RpRun, name: &str) -> f64 {
    let mut v = f64::NAN;
    assert_eq!(rp_run_metric(run, c(name).as_ptr(), &mut v), RpStatus::Ok, "{}", last_error());
    v
}

#[test]
fn learn_and_run_through_handles() {
    unsafe {
        let cfg = config(&[("fleet_size", "40"), ("pipeline", "ARDL+CP+GIM"), ("seed", "2")]);
        let (mut map, mut today) = (ptr::null_mut(), ptr::null_mut());
        let name = c("common-direction");
        assert_eq!(rp_preset_generate(name.as_ptr(), 7, cfg, &mut map, &mut today), RpStatus::Ok);
        assert_eq!(rp_map_zone_count(map), 100);
        assert!(rp_trips_count(today) > 1000);

        let (mut m2, mut history) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(rp_preset_generate(name.as_ptr(), 8, cfg, &mut m2, &mut history), RpStatus::Ok);
        rp_map_free(m2);
        let days = [history as *const RpTrips];
        let mut values = ptr::null_mut();
        assert_eq!(rp_values_learn(map, cfg, days.as_ptr(), 1, &mut values), RpStatus::Ok);
        assert!(rp_last_error().is_null());

        let mut run = ptr::null_mut();
        assert_eq!(rp_run(cfg, map, today, values, &mut run), RpStatus::Ok, "{}", last_error());
        let requests = metric(run, "requests");
        assert_eq!(requests as usize, rp_trips_count(today));
        let rate = metric(run, "serving_rate");
        assert!((0.0..=1.0).contains(&rate));
        assert!(rp_run_event_count(run) > 0);

        // the trip handle is reusable and the run is deterministic
        let mut again = ptr::null_mut();
        assert_eq!(rp_run(cfg, map, today, values, &mut again), RpStatus::Ok);
        assert_eq!(metric(again, "serving_rate"), rate);
        assert_eq!(rp_run_event_count(again), rp_run_event_count(run));

        let mut v = 0.0;
        assert_eq!(rp_run_metric(run, c("happiness").as_ptr(), &mut v), RpStatus::UnknownMetric);
        assert!(last_error().contains("happiness"));

        rp_run_free(again);
        rp_run_free(run);
        rp_values_free(values);
        rp_trips_free(history);
        rp_trips_free(today);
        rp_map_free(map);
        rp_config_free(cfg);
    }
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    unsafe {
        let cfg = config(&[("fleet_size", "20"), ("pipeline", "SMW")]);
        let (mut map, mut trips) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(rp_preset_generate(c("hotspots").as_ptr(), 1, cfg, &mut map, &mut trips), RpStatus::Ok);
        let mut values = ptr::null_mut();
        let days = [trips as *const RpTrips];
        assert_eq!(rp_values_learn(map, cfg, days.as_ptr(), 1, &mut values), RpStatus::Ok);
        let vpath = c(d.join("values.csv").to_str().unwrap());
        assert_eq!(rp_values_save(values, vpath.as_ptr()), RpStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(rp_values_load(vpath.as_ptr(), &mut loaded), RpStatus::Ok, "{}", last_error());

        // SMW runs without a value table
        let mut run = ptr::null_mut();
        assert_eq!(rp_run(cfg, map, trips, ptr::null(), &mut run), RpStatus::Ok, "{}", last_error());
        let out = d.join("out");
        assert_eq!(rp_run_write(run, c(out.to_str().unwrap()).as_ptr()), RpStatus::Ok);
        for f in ["metrics.csv", "events.log", "effective_config.txt"] {
            assert!(out.join(f).is_file(), "{f}");
        }

        let mut echoed = ptr::null_mut();
        let echo = c(out.join("effective_config.txt").to_str().unwrap());
        assert_eq!(rp_config_load(echo.as_ptr(), &mut echoed), RpStatus::Ok);
        let mut rerun = ptr::null_mut();
        assert_eq!(rp_run(echoed, map, trips, loaded, &mut rerun), RpStatus::Ok);
        assert_eq!(metric(rerun, "served"), metric(run, "served"));

        for h in [run, rerun] {
            rp_run_free(h);
        }
        rp_config_free(echoed);
        rp_values_free(loaded);
        rp_values_free(values);
        rp_trips_free(trips);
        rp_map_free(map);
        rp_config_free(cfg);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(rp_config_load(c("/nonexistent/run.conf").as_ptr(), &mut cfg), RpStatus::Io);
        assert!(cfg.is_null());
        assert_eq!(rp_config_new(ptr::null_mut()), RpStatus::NullArgument);
        assert!(last_error().contains("out"));

        let cfg = config(&[]);
        assert_eq!(rp_config_set(cfg, c("theta_ctr").as_ptr(), c("7").as_ptr()), RpStatus::Config);
        assert!(last_error().contains("theta_ctr"));
        assert_eq!(rp_config_set(cfg, c("no_such_key").as_ptr(), c("1").as_ptr()), RpStatus::Config);
        let bad = [0xffu8, 0];
        assert_eq!(rp_config_set(cfg, bad.as_ptr().cast(), c("1").as_ptr()), RpStatus::InvalidUtf8);

        let mut map = ptr::null_mut();
        let mut trips = ptr::null_mut();
        assert_eq!(rp_preset_generate(c("nowhere").as_ptr(), 0, cfg, &mut map, &mut trips), RpStatus::Config);
        assert_eq!(rp_preset_generate(c("hotspots").as_ptr(), 0, cfg, &mut map, &mut trips), RpStatus::Ok);

        // ARDL needs a value table
        assert_eq!(rp_config_set(cfg, c("pipeline").as_ptr(), c("ARDL+CP").as_ptr()), RpStatus::Ok);
        let mut run = ptr::null_mut();
        assert_eq!(rp_run(cfg, map, trips, ptr::null(), &mut run), RpStatus::Config);
        assert!(run.is_null());
        assert_eq!(rp_run(cfg, ptr::null(), trips, ptr::null(), &mut run), RpStatus::NullArgument);

        let dir = tempfile::tempdir().unwrap();
        let bad_map = dir.path().join("map.csv");
        std::fs::write(&bad_map, "zone_id,centroid_x,centroid_y\n1,0,0\n1,1,1\n").unwrap();
        let mut m = ptr::null_mut();
        let status = rp_map_load(c(bad_map.to_str().unwrap()).as_ptr(), &mut m);
        assert!(matches!(status, RpStatus::Parse | RpStatus::InvalidMap), "{status:?}");

        assert_eq!(rp_map_zone_count(ptr::null()), 0);
        rp_map_free(ptr::null_mut());
        rp_trips_free(trips);
        rp_map_free(map);
        rp_config_free(cfg);
    }
}

#[test]
fn scalar_helpers() {
    assert!((rp_fare(10.0, 2.5, 0.2) - 10.0 * (-0.5f64).exp()).abs() < 1e-12);
    assert_eq!(rp_fare(8.0, 0.0, 0.3), 8.0);
    assert_eq!(rp_sd_ratio(6, 2.0), 2.0);
    assert_eq!(rp_sd_ratio(0, 0.0), 0.0);
    let v = unsafe { CStr::from_ptr(rp_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_abi() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/ridepool.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for decl in [
        "typedef struct RpRun RpRun;",
        "RP_STATUS_OK = 0",
        "RP_STATUS_PANIC = 12",
        "const char *rp_last_error(void);",
        "enum RpStatus rp_run(",
        "double rp_fare(double base, double extra_minutes, double lambda);",
        "void rp_values_free(struct RpValues *values);",
    ] {
        assert!(text.contains(decl), "missing {decl:?}");
    }

    // compile-check the header when a C compiler is around
    if let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .output()
    {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
