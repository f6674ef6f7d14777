//! C ABI over the ridepool simulator.
//!
//! Every object crosses the boundary as an opaque handle created by an
//! `rp_*_load`/`rp_*_new` function and released by the matching `rp_*_free`.
//! Fallible calls return an [`RpStatus`]; on failure the message is kept per
//! thread and can be read with [`rp_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use ridepool::harness::{learn_from_days, named_preset, write_run};
use ridepool::ingest::{self, demand_events, generate_synthetic, ColumnMap};
use ridepool::{CityMap, Error, PipelineConfig, RunOutput, TripRequest, ValueTable};

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RpStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Config = 5,
    InvalidMap = 6,
    UnknownZone = 7,
    OutOfRange = 8,
    Contract = 9,
    Invariant = 10,
    UnknownMetric = 11,
    Panic = 12,
}

pub struct RpConfig(PipelineConfig);
pub struct RpMap(CityMap);
pub struct RpTrips(Vec<TripRequest>);
pub struct RpValues(ValueTable);
pub struct RpRun(RunOutput);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RpStatus {
    match e {
        Error::Io { .. } => RpStatus::Io,
        Error::Parse { .. } => RpStatus::Parse,
        Error::Config { .. } => RpStatus::Config,
        Error::InvalidMap(_) => RpStatus::InvalidMap,
        Error::UnknownZone(_) => RpStatus::UnknownZone,
        Error::OutOfRange { .. } => RpStatus::OutOfRange,
        Error::Contract(_) => RpStatus::Contract,
        Error::Invariant { .. } => RpStatus::Invariant,
    }
}

struct Fail(RpStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

/// Runs `f`, turning errors and panics into a status plus a stored message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RpStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            RpStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(RpStatus::NullArgument, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(RpStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next `rp_*` call on the same thread.
#[no_mangle]
pub extern "C" fn rp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default configuration.
///
/// # Safety
/// `out` must be a valid pointer to write a handle into.
#[no_mangle]
pub unsafe extern "C" fn rp_config_new(out: *mut *mut RpConfig) -> RpStatus {
    guard(|| put(out, RpConfig(PipelineConfig::default())))
}

/// Configuration read from a `key = value` file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rp_config_load(path: *const c_char, out: *mut *mut RpConfig) -> RpStatus {
    guard(|| {
        let path = text(path, "path")?;
        put(out, RpConfig(PipelineConfig::load(path.as_ref())?))
    })
}

/// Sets one key, using the same names and value syntax as config files.
///
/// # Safety
/// `cfg` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn rp_config_set(cfg: *mut RpConfig, key: *const c_char, value: *const c_char) -> RpStatus {
    guard(|| {
        let cfg = borrow_mut(cfg, "cfg")?;
        let (key, value) = (text(key, "key")?, text(value, "value")?);
        let mut next = cfg.0.clone();
        next.set(key, value)?;
        next.scenario.validate()?;
        cfg.0 = next;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn rp_config_free(cfg: *mut RpConfig) {
    free(cfg)
}

/// Map from a zone-and-adjacency file as written by `ridepool generate`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rp_map_load(path: *const c_char, out: *mut *mut RpMap) -> RpStatus {
    guard(|| {
        let path = text(path, "path")?;
        put(out, RpMap(ingest::load_city_map(path.as_ref())?))
    })
}

/// Number of zones, or 0 for a null handle.
///
/// # Safety
/// `map` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rp_map_zone_count(map: *const RpMap) -> usize {
    map.as_ref().map_or(0, |m| m.0.len())
}

/// # Safety
/// `map` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn rp_map_free(map: *mut RpMap) {
    free(map)
}

/// Trips from a CSV file, filtered to the configured window and to zones of
/// `map`. `column_map` may be null for the default column names.
///
/// # Safety
/// Handles must be live, strings NUL-terminated (or null where allowed) and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rp_trips_load(
    path: *const c_char,
    map: *const RpMap,
    cfg: *const RpConfig,
    column_map: *const c_char,
    out: *mut *mut RpTrips,
) -> RpStatus {
    guard(|| {
        let path = text(path, "path")?;
        let map = borrow(map, "map")?;
        let cfg = borrow(cfg, "cfg")?;
        let columns = if column_map.is_null() {
            ColumnMap::default()
        } else {
            ColumnMap::parse(text(column_map, "column_map")?)?
        };
        let loaded = ingest::load_trips(path.as_ref(), &map.0, &cfg.0.scenario, &columns)?;
        put(out, RpTrips(loaded.requests))
    })
}

/// Number of trips, or 0 for a null handle.
///
/// # Safety
/// `trips` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rp_trips_count(trips: *const RpTrips) -> usize {
    trips.as_ref().map_or(0, |t| t.0.len())
}

/// # Safety
/// `trips` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn rp_trips_free(trips: *mut RpTrips) {
    free(trips)
}

/// Draws one day of a built-in synthetic scenario (`hotspots`,
/// `common-direction` or `downtown`), shaped by the cycle length and
/// patience of `cfg`.
///
/// # Safety
/// `name` must be NUL-terminated, `cfg` live and both out pointers valid.
#[no_mangle]
pub unsafe extern "C" fn rp_preset_generate(
    name: *const c_char,
    seed: u64,
    cfg: *const RpConfig,
    out_map: *mut *mut RpMap,
    out_trips: *mut *mut RpTrips,
) -> RpStatus {
    guard(|| {
        let name = text(name, "name")?;
        let cfg = borrow(cfg, "cfg")?;
        if out_map.is_null() || out_trips.is_null() {
            return Err(null("out"));
        }
        let spec = named_preset(name, seed)?.with_config(&cfg.0.scenario);
        let s = generate_synthetic(&spec)?;
        put(out_map, RpMap(s.map))?;
        put(out_trips, RpTrips(s.requests))
    })
}

/// Value table from a file written by `ridepool learn` or [`rp_values_save`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rp_values_load(path: *const c_char, out: *mut *mut RpValues) -> RpStatus {
    guard(|| {
        let path = text(path, "path")?;
        put(out, RpValues(ValueTable::load(path.as_ref())?))
    })
}

/// Learns a value table from `n_days` trip sets, one per historical day.
///
/// # Safety
/// `days` must point to `n_days` live trip handles; `map`, `cfg` must be live
/// and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rp_values_learn(
    map: *const RpMap,
    cfg: *const RpConfig,
    days: *const *const RpTrips,
    n_days: usize,
    out: *mut *mut RpValues,
) -> RpStatus {
    guard(|| {
        let map = borrow(map, "map")?;
        let cfg = borrow(cfg, "cfg")?;
        if days.is_null() && n_days > 0 {
            return Err(null("days"));
        }
        let handles = if n_days == 0 { &[][..] } else { std::slice::from_raw_parts(days, n_days) };
        let cycle_secs = cfg.0.scenario.cycle_secs();
        let mut events = Vec::with_capacity(n_days);
        for (i, &h) in handles.iter().enumerate() {
            let trips = borrow(h, &format!("days[{i}]"))?;
            events.push(demand_events(&trips.0, cycle_secs));
        }
        put(out, RpValues(learn_from_days(&events, &map.0, &cfg.0.scenario)?))
    })
}

/// # Safety
/// `values` must be live and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn rp_values_save(values: *const RpValues, path: *const c_char) -> RpStatus {
    guard(|| {
        let values = borrow(values, "values")?;
        let path = PathBuf::from(text(path, "path")?);
        Ok(values.0.save(&path)?)
    })
}

/// # Safety
/// `values` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn rp_values_free(values: *mut RpValues) {
    free(values)
}

/// Runs one simulation. `values` may be null for the SMW pipelines. The trip
/// handle is left untouched and can be reused.
///
/// # Safety
/// Handles must be live (or null where allowed) and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rp_run(
    cfg: *const RpConfig,
    map: *const RpMap,
    trips: *const RpTrips,
    values: *const RpValues,
    out: *mut *mut RpRun,
) -> RpStatus {
    guard(|| {
        let cfg = borrow(cfg, "cfg")?;
        let map = borrow(map, "map")?;
        let trips = borrow(trips, "trips")?;
        let values = values.as_ref().map(|v| &v.0);
        put(out, RpRun(ridepool::run(&cfg.0, &map.0, trips.0.clone(), values)?))
    })
}

/// Reads a summary metric by the name used in `metrics.csv`, e.g.
/// `serving_rate` or `poolability_2`.
///
/// # Safety
/// `run` must be live, `name` NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rp_run_metric(run: *const RpRun, name: *const c_char, out: *mut f64) -> RpStatus {
    guard(|| {
        let run = borrow(run, "run")?;
        let name = text(name, "name")?;
        let out = borrow_mut(out, "out")?;
        *out = run
            .0
            .summary
            .get(name)
            .ok_or_else(|| Fail(RpStatus::UnknownMetric, format!("unknown metric {name:?}")))?;
        Ok(())
    })
}

/// Number of events logged by the run, or 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rp_run_event_count(run: *const RpRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.events.len())
}

/// Writes `metrics.csv`, `events.log` and `effective_config.txt` into `dir`.
///
/// # Safety
/// `run` must be live and `dir` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn rp_run_write(run: *const RpRun, dir: *const c_char) -> RpStatus {
    guard(|| {
        let run = borrow(run, "run")?;
        let dir = PathBuf::from(text(dir, "dir")?);
        Ok(write_run(&run.0, &dir)?)
    })
}

/// # Safety
/// `run` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn rp_run_free(run: *mut RpRun) {
    free(run)
}

/// Rider fare after a pooling discount for `extra_minutes` of detour.
#[no_mangle]
pub extern "C" fn rp_fare(base: f64, extra_minutes: f64, lambda: f64) -> f64 {
    ridepool::metrics::fare(base, extra_minutes, lambda)
}

/// Supply-demand ratio of a zone with `requests` waiting and `vacant` taxis.
#[no_mangle]
pub extern "C" fn rp_sd_ratio(requests: usize, vacant: f64) -> f64 {
    ridepool::matching::sd_ratio(requests, vacant)
}
