//! City map and trip-file IO, plus reproducible synthetic scenarios.

use std::io::Write;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Poisson};

use crate::config::ScenarioConfig;
use crate::demand::DemandEvent;
use crate::error::{Error, Result};
use crate::model::{CityMap, RawCityMap, RequestId, TripRequest, Vec2, ZoneId};

pub const ZONES_HEADER: &str = "zone_id,centroid_x,centroid_y";
pub const EDGES_HEADER: &str = "zone_id_a,zone_id_b";
pub const TRIPS_HEADER: &str = "start_timestamp,pickup_zone,dropoff_zone,fare";
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

pub fn parse_city_map(text: &str, path: &Path) -> Result<RawCityMap> {
    let mut raw = RawCityMap::default();
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, h)) if h == ZONES_HEADER => {}
        Some((ln, _)) => return Err(Error::parse(path, ln, format!("expected header `{ZONES_HEADER}`"))),
        None => return Err(Error::parse(path, 0, "empty map file")),
    }
    let mut in_edges = false;
    for (ln, line) in lines {
        if line == EDGES_HEADER {
            if in_edges {
                return Err(Error::parse(path, ln, "duplicate edges header"));
            }
            in_edges = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if in_edges {
            let bad = || Error::parse(path, ln, "expected `zone_id_a,zone_id_b`");
            if f.len() != 2 {
                return Err(bad());
            }
            raw.edges.push((
                ZoneId(f[0].parse().map_err(|_| bad())?),
                ZoneId(f[1].parse().map_err(|_| bad())?),
            ));
        } else {
            let bad = || Error::parse(path, ln, "expected `zone_id,centroid_x,centroid_y`");
            if f.len() != 3 {
                return Err(bad());
            }
            raw.zones.push((
                ZoneId(f[0].parse().map_err(|_| bad())?),
                Vec2::new(f[1].parse().map_err(|_| bad())?, f[2].parse().map_err(|_| bad())?),
            ));
        }
    }
    if !in_edges {
        return Err(Error::parse(path, 0, format!("missing `{EDGES_HEADER}` section")));
    }
    Ok(raw)
}

pub fn load_raw_city_map(path: &Path) -> Result<RawCityMap> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_city_map(&text, path)
}

pub fn load_city_map(path: &Path) -> Result<CityMap> {
    CityMap::from_raw(&load_raw_city_map(path)?)
}

pub fn write_city_map(raw: &RawCityMap, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{ZONES_HEADER}")?;
    for (id, c) in &raw.zones {
        writeln!(w, "{id},{},{}", c.x, c.y)?;
    }
    writeln!(w, "{EDGES_HEADER}")?;
    for (a, b) in &raw.edges {
        writeln!(w, "{a},{b}")?;
    }
    Ok(())
}

pub fn save_city_map(map: &CityMap, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_city_map(&map.to_raw(), &mut buf).expect("in-memory write");
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Maps the logical trip columns onto the header names of a CSV export.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub start_timestamp: String,
    pub pickup_zone: String,
    pub dropoff_zone: String,
    pub fare: String,
    pub timestamp_format: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            start_timestamp: "start_timestamp".into(),
            pickup_zone: "pickup_zone".into(),
            dropoff_zone: "dropoff_zone".into(),
            fare: "fare".into(),
            timestamp_format: TIMESTAMP_FORMAT.into(),
        }
    }
}

impl ColumnMap {
    /// Parses `logical=Header Name` pairs separated by commas, e.g.
    /// `start_timestamp=Trip Start Timestamp,timestamp_format=%m/%d/%Y %I:%M:%S %p`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut m = ColumnMap::default();
        for item in spec.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::config("column-map", format!("{item:?}: expected name=column")))?;
            let v = v.trim().to_string();
            match k.trim() {
                "start_timestamp" => m.start_timestamp = v,
                "pickup_zone" => m.pickup_zone = v,
                "dropoff_zone" => m.dropoff_zone = v,
                "fare" => m.fare = v,
                "timestamp_format" => m.timestamp_format = v,
                other => return Err(Error::config("column-map", format!("unknown column {other:?}"))),
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SkipReport {
    pub out_of_window: usize,
    pub unknown_zone: usize,
}

impl SkipReport {
    pub fn total(&self) -> usize {
        self.out_of_window + self.unknown_zone
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedTrips {
    pub requests: Vec<TripRequest>,
    pub skipped: SkipReport,
}

/// Seconds of `ts` past the window start, if inside the window.
fn window_offset(ts: NaiveDateTime, cfg: &ScenarioConfig) -> Option<i64> {
    let offset = match cfg.window_date {
        Some(d) => (ts - d.and_time(cfg.window_start)).num_seconds(),
        None => ts.time().num_seconds_from_midnight() as i64 - cfg.window_start.num_seconds_from_midnight() as i64,
    };
    (0..cfg.window_secs()).contains(&offset).then_some(offset)
}

fn parse_zone(s: &str) -> Option<std::result::Result<ZoneId, ()>> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    Some(match s.parse::<u32>() {
        Ok(v) => Ok(ZoneId(v)),
        Err(_) => match s.parse::<f64>() {
            Ok(v) if v.fract() == 0.0 && v >= 0.0 && v <= u32::MAX as f64 => Ok(ZoneId(v as u32)),
            _ => Err(()),
        },
    })
}

/// Loads a trip export. Rows outside the configured window or naming
/// zones absent from the map are skipped and counted; malformed rows are
/// errors carrying their line number. Output is sorted by request time,
/// ties in file order, with ids assigned in that order.
pub fn load_trips(path: &Path, map: &CityMap, cfg: &ScenarioConfig, columns: &ColumnMap) -> Result<LoadedTrips> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::parse(path, 0, format!("{other:?}")),
        })?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(path, 1, format!("missing column {name:?}")))
    };
    let (c_ts, c_o, c_d) = (
        col(&columns.start_timestamp)?,
        col(&columns.pickup_zone)?,
        col(&columns.dropoff_zone)?,
    );
    let c_fare = headers.iter().position(|h| h == columns.fare);

    let mut skipped = SkipReport::default();
    let mut rows: Vec<(i64, usize, usize, Option<f64>)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(path, line, e.to_string()))?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let ts = NaiveDateTime::parse_from_str(field(c_ts), &columns.timestamp_format)
            .map_err(|e| Error::parse(path, line, format!("timestamp {:?}: {e}", field(c_ts))))?;
        let zone = |c: usize| -> Result<Option<usize>> {
            match parse_zone(field(c)) {
                None => Ok(None),
                Some(Err(())) => Err(Error::parse(path, line, format!("zone id {:?}", field(c)))),
                Some(Ok(id)) => Ok(map.index_of(id)),
            }
        };
        let (o, d) = (zone(c_o)?, zone(c_d)?);
        let fare = match c_fare.map(field).filter(|s| !s.is_empty()) {
            None => None,
            Some(s) => Some(
                s.trim_start_matches('$')
                    .parse::<f64>()
                    .ok()
                    .filter(|f| f.is_finite() && *f >= 0.0)
                    .ok_or_else(|| Error::parse(path, line, format!("fare {s:?}")))?,
            ),
        };
        let Some(t) = window_offset(ts, cfg) else {
            skipped.out_of_window += 1;
            continue;
        };
        let (Some(o), Some(d)) = (o, d) else {
            skipped.unknown_zone += 1;
            continue;
        };
        rows.push((t, o, d, fare));
    }

    rows.sort_by_key(|r| r.0);
    let requests = rows
        .into_iter()
        .enumerate()
        .map(|(i, (t, o, d, fare))| {
            let base = fare.unwrap_or_else(|| model_fare(cfg, map.hops(o, d)));
            TripRequest::new(RequestId(i as u64), t, o, d, cfg.patience_secs(), base)
        })
        .collect();
    Ok(LoadedTrips { requests, skipped })
}

pub fn model_fare(cfg: &ScenarioConfig, hops: u32) -> f64 {
    cfg.base_fare + cfg.per_hop_fare * hops as f64
}

/// Writes requests in the default trip format, dated `date` (or the
/// configured window date) at the configured window start.
pub fn write_trips(
    requests: &[TripRequest],
    map: &CityMap,
    cfg: &ScenarioConfig,
    date: NaiveDate,
    mut w: impl Write,
) -> std::io::Result<()> {
    let start = cfg.window_date.unwrap_or(date).and_time(cfg.window_start);
    writeln!(w, "{TRIPS_HEADER}")?;
    for r in requests {
        let ts = start + chrono::Duration::seconds(r.t);
        writeln!(
            w,
            "{},{},{},{}",
            ts.format(TIMESTAMP_FORMAT),
            map.id_of(r.origin),
            map.id_of(r.dest),
            r.base_fare
        )?;
    }
    Ok(())
}

pub fn save_trips(requests: &[TripRequest], map: &CityMap, cfg: &ScenarioConfig, date: NaiveDate, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_trips(requests, map, cfg, date, &mut buf).expect("in-memory write");
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// `(cycle, origin)` demand observations for value learning.
pub fn demand_events(requests: &[TripRequest], cycle_secs: i64) -> Vec<DemandEvent> {
    requests
        .iter()
        .map(|r| ((r.t / cycle_secs) as usize, r.origin))
        .collect()
}

/// Parameters of a generated scenario on a rectangular zone grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub width: usize,
    pub height: usize,
    pub cycles: usize,
    pub cycle_secs: i64,
    /// Expected requests per zone per cycle, row-major `cycles x zones`.
    pub rates: Vec<f64>,
    /// Destination distribution per origin, row-major `zones x zones`.
    pub destinations: Vec<f64>,
    pub base_fare: f64,
    pub per_hop_fare: f64,
    pub patience_secs: i64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn zones(&self) -> usize {
        self.width * self.height
    }

    /// Uniform rate everywhere with uniform destinations.
    pub fn uniform(width: usize, height: usize, cycles: usize, rate: f64, seed: u64) -> Self {
        let n = width * height;
        SyntheticSpec {
            width,
            height,
            cycles,
            cycle_secs: 180,
            rates: vec![rate; cycles * n],
            destinations: vec![1.0 / n as f64; n * n],
            base_fare: 3.25,
            per_hop_fare: 4.0,
            patience_secs: 1200,
            seed,
        }
    }

    pub fn with_config(mut self, cfg: &ScenarioConfig) -> Self {
        self.cycle_secs = cfg.cycle_secs();
        self.base_fare = cfg.base_fare;
        self.per_hop_fare = cfg.per_hop_fare;
        self.patience_secs = cfg.patience_secs();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.zones();
        if n == 0 {
            return Err(Error::config("grid", "empty zone grid"));
        }
        if self.cycle_secs <= 0 {
            return Err(Error::config("cycle_secs", "must be positive"));
        }
        if self.rates.len() != self.cycles * n {
            return Err(Error::config("rates", format!("{} entries for {}x{n}", self.rates.len(), self.cycles)));
        }
        if let Some(r) = self.rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::config("rates", format!("rate {r} must be >= 0")));
        }
        if self.destinations.len() != n * n {
            return Err(Error::config("destinations", "expected a zones x zones matrix"));
        }
        for (o, row) in self.destinations.chunks(n).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::config("destinations", format!("row {o} sums to {sum}, expected 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub map: CityMap,
    pub requests: Vec<TripRequest>,
}

/// Draws Poisson arrivals per zone and cycle with the given rates.
/// Deterministic for a fixed seed.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Scenario> {
    spec.validate()?;
    let map = CityMap::grid(spec.width, spec.height);
    let n = spec.zones();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pickers: Vec<WeightedIndex<f64>> = spec
        .destinations
        .chunks(n)
        .map(|row| WeightedIndex::new(row).expect("validated distribution"))
        .collect();

    let mut rows: Vec<(i64, usize, usize)> = Vec::new();
    for c in 0..spec.cycles {
        for (z, picker) in pickers.iter().enumerate() {
            let rate = spec.rates[c * n + z];
            if rate <= 0.0 {
                continue;
            }
            let k = Poisson::new(rate).expect("positive rate").sample(&mut rng) as usize;
            for _ in 0..k {
                let d = picker.sample(&mut rng);
                let t = c as i64 * spec.cycle_secs + rng.random_range(0..spec.cycle_secs);
                rows.push((t, z, d));
            }
        }
    }
    rows.sort_by_key(|r| r.0);
    let requests = rows
        .into_iter()
        .enumerate()
        .map(|(i, (t, o, d))| {
            let fare = spec.base_fare + spec.per_hop_fare * map.hops(o, d) as f64;
            TripRequest::new(RequestId(i as u64), t, o, d, spec.patience_secs, fare)
        })
        .collect();
    Ok(Scenario { map, requests })
}

/// Ready-made synthetic scenarios.
pub mod presets {
    use super::SyntheticSpec;

    fn gaussian(dx: f64, dy: f64, sigma: f64) -> f64 {
        (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
    }

    fn normalize_rows(m: &mut [f64], n: usize) {
        for row in m.chunks_mut(n) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= s);
        }
    }

    /// Heavy demand flowing toward one side of the grid: destinations lie
    /// in the right-hand third, so trip directions from most zones share a
    /// broad common heading.
    pub fn common_direction(width: usize, height: usize, cycles: usize, rate: f64, seed: u64) -> SyntheticSpec {
        let n = width * height;
        let mut spec = SyntheticSpec::uniform(width, height, cycles, rate, seed);
        let first = width - width.div_ceil(3);
        let mut dest = vec![0.0; n * n];
        for o in 0..n {
            for d in 0..n {
                let (dc, dr) = (d % width, d / width);
                let _ = dr;
                if dc >= first {
                    dest[o * n + d] = 1.0;
                }
            }
        }
        normalize_rows(&mut dest, n);
        spec.destinations = dest;
        spec
    }

    /// Demand concentrated around hotspots that move across the city over
    /// the day; destinations spread over the whole grid with a pull toward
    /// the current hotspots. Taxis that deliver into quiet areas end up far
    /// from the next requests.
    pub fn shifting_hotspots(width: usize, height: usize, cycles: usize, peak: f64, seed: u64) -> SyntheticSpec {
        let n = width * height;
        let mut spec = SyntheticSpec::uniform(width, height, cycles, 0.0, seed);
        let (w, h) = (width as f64 - 1.0, height as f64 - 1.0);
        // hotspot centers per phase, as fractions of the grid
        let phases = [
            [(0.2, 0.2), (0.7, 0.3)],
            [(0.5, 0.5), (0.2, 0.8)],
            [(0.8, 0.8), (0.3, 0.4)],
            [(0.8, 0.2), (0.5, 0.7)],
        ];
        let sigma = (width.max(height) as f64 / 6.0).max(0.75);
        let background = peak * 0.02;
        for c in 0..cycles {
            let phase = &phases[(c * phases.len() / cycles.max(1)).min(phases.len() - 1)];
            for z in 0..n {
                let (x, y) = ((z % width) as f64, (z / width) as f64);
                let heat: f64 = phase
                    .iter()
                    .map(|&(fx, fy)| gaussian(x - fx * w, y - fy * h, sigma))
                    .sum();
                spec.rates[c * n + z] = background + peak * heat;
            }
        }
        // destinations: uniform floor plus attraction to the grid center
        let mut dest = vec![0.0; n * n];
        for o in 0..n {
            for d in 0..n {
                let (x, y) = ((d % width) as f64, (d / width) as f64);
                dest[o * n + d] = 1.0 + 2.0 * gaussian(x - w / 2.0, y - h / 2.0, sigma * 1.5);
            }
        }
        normalize_rows(&mut dest, n);
        spec.destinations = dest;
        spec
    }
    /// A 7x11 grid (77 zones) with a dense downtown on the east edge and
    /// two residential districts. Volume peaks in the early evening, when
    /// trips increasingly start downtown; residential trips lean toward
    /// downtown and downtown trips head out. `volume` is the mean number
    /// of requests per cycle.
    pub fn downtown_city(cycles: usize, volume: f64, seed: u64) -> SyntheticSpec {
        let (width, height) = (7usize, 11usize);
        let n = width * height;
        let mut spec = SyntheticSpec::uniform(width, height, cycles, 0.0, seed);
        let xy = |z: usize| ((z % width) as f64, (z / width) as f64);
        let core: Vec<f64> = (0..n)
            .map(|z| {
                let (x, y) = xy(z);
                gaussian(x - 6.0, y - 5.0, 1.0)
            })
            .collect();
        let homes: Vec<f64> = (0..n)
            .map(|z| {
                let (x, y) = xy(z);
                0.2 + gaussian(x - 2.0, y - 2.0, 1.8) + gaussian(x - 2.0, y - 8.0, 1.8)
            })
            .collect();
        let norm = |v: &[f64]| {
            let s: f64 = v.iter().sum();
            v.iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        let (dn, rn) = (norm(&core), norm(&homes));

        let profile: Vec<f64> = (0..cycles)
            .map(|c| {
                let h = c as f64 / cycles.max(1) as f64;
                0.6 + 0.8 * gaussian(h - 0.5, 0.0, 0.15) + 0.3 * gaussian(h - 0.9, 0.0, 0.06)
            })
            .collect();
        let mean = profile.iter().sum::<f64>() / cycles.max(1) as f64;
        for (c, p) in profile.iter().enumerate() {
            let h = c as f64 / cycles.max(1) as f64;
            let share = 0.25 + 0.35 * h;
            let total = volume * p / mean;
            for z in 0..n {
                spec.rates[c * n + z] = total * (share * dn[z] + (1.0 - share) * rn[z]);
            }
        }
        for (o, &a) in core.iter().enumerate() {
            for d in 0..n {
                spec.destinations[o * n + d] = a * rn[d] + (1.0 - a) * (0.6 * dn[d] + 0.4 * rn[d]);
            }
        }
        normalize_rows(&mut spec.destinations, n);
        spec
    }
}
