//! Batch operations behind the command-line tool: learning value tables,
//! single runs, parameter sweeps and timing reports.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::{Pipeline, PipelineConfig, ScenarioConfig};
use crate::demand::{build_value_table_averaged, DemandEvent, ValueTable};
use crate::error::{Error, Result};
use crate::events::save_event_log;
use crate::ingest::{demand_events, generate_synthetic, load_trips, ColumnMap, SyntheticSpec};
use crate::model::{CityMap, TripRequest, ZoneId};
use crate::sim::{run, RunOutput};

pub const METRICS_FILE: &str = "metrics.csv";
pub const EVENTS_FILE: &str = "events.log";
pub const CONFIG_ECHO_FILE: &str = "effective_config.txt";

fn zone_ids(map: &CityMap) -> Vec<ZoneId> {
    (0..map.len()).map(|z| map.id_of(z)).collect()
}

/// Learns a value table from historical trip files, one file per day.
/// Skipped rows are reported once per file on stderr.
pub fn cmd_learn(trip_files: &[PathBuf], map: &CityMap, cfg: &ScenarioConfig, columns: &ColumnMap) -> Result<ValueTable> {
    let mut days: Vec<Vec<DemandEvent>> = Vec::with_capacity(trip_files.len());
    for path in trip_files {
        let loaded = load_trips(path, map, cfg, columns)?;
        report_skips(path, &loaded.skipped);
        days.push(demand_events(&loaded.requests, cfg.cycle_secs()));
    }
    learn_from_days(&days, map, cfg)
}

pub fn learn_from_days(days: &[Vec<DemandEvent>], map: &CityMap, cfg: &ScenarioConfig) -> Result<ValueTable> {
    build_value_table_averaged(days, cfg.gamma, cfg.horizon_cycles(), &zone_ids(map))
}

pub fn report_skips(path: &Path, skipped: &crate::ingest::SkipReport) {
    if skipped.total() > 0 {
        eprintln!(
            "{}: skipped {} rows ({} outside the window, {} with unknown zones)",
            path.display(),
            skipped.total(),
            skipped.out_of_window,
            skipped.unknown_zone
        );
    }
}

/// One full run; writes the metrics summary, event log and effective
/// configuration into `out_dir`.
pub fn cmd_simulate(
    cfg: &PipelineConfig,
    map: &CityMap,
    requests: Vec<TripRequest>,
    values: Option<&ValueTable>,
    out_dir: &Path,
) -> Result<RunOutput> {
    let out = run(cfg, map, requests, values)?;
    write_run(&out, out_dir)?;
    Ok(out)
}

/// Writes metrics, event log and effective config of a finished run.
pub fn write_run(out: &RunOutput, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    out.summary.save(&out_dir.join(METRICS_FILE))?;
    save_event_log(&out.events, &out_dir.join(EVENTS_FILE))?;
    let echo = out_dir.join(CONFIG_ECHO_FILE);
    std::fs::write(&echo, out.config.to_config_string()).map_err(|e| Error::io(&echo, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    FleetSize,
    ThetaCtr,
}

impl SweepParam {
    pub fn key(self) -> &'static str {
        match self {
            SweepParam::FleetSize => "fleet_size",
            SweepParam::ThetaCtr => "theta_ctr",
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "fleet_size" => Ok(SweepParam::FleetSize),
            "theta_ctr" => Ok(SweepParam::ThetaCtr),
            other => Err(Error::config("vary", format!("{other:?}: expected fleet_size or theta_ctr"))),
        }
    }
}

/// Where each sweep point gets its map, trips and value table.
#[derive(Debug, Clone)]
pub enum ScenarioSource {
    /// Fixed inputs; the seed only changes the initial fleet placement.
    Fixed {
        map: CityMap,
        requests: Vec<TripRequest>,
        values: Option<ValueTable>,
    },
    /// Trips drawn per seed; the value table is learned from
    /// `history_days` further draws of the same spec.
    Synthetic { spec: SyntheticSpec, history_days: usize },
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub map: CityMap,
    pub requests: Vec<TripRequest>,
    pub values: Option<ValueTable>,
}

/// Seed of the `day`-th history draw for an evaluation seed.
pub fn history_seed(seed: u64, day: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(day as u64 + 1)
}

impl ScenarioSource {
    pub fn prepare(&self, seed: u64, cfg: &ScenarioConfig) -> Result<Prepared> {
        match self {
            ScenarioSource::Fixed { map, requests, values } => Ok(Prepared {
                map: map.clone(),
                requests: requests.clone(),
                values: values.clone(),
            }),
            ScenarioSource::Synthetic { spec, history_days } => {
                let spec = spec.clone().with_config(cfg);
                if spec.cycles as i64 * spec.cycle_secs > cfg.window_secs() {
                    return Err(Error::config(
                        "window_minutes",
                        format!("shorter than the {} generated cycles", spec.cycles),
                    ));
                }
                let today = generate_synthetic(&SyntheticSpec { seed, ..spec.clone() })?;
                let days = (0..*history_days)
                    .map(|d| {
                        let s = SyntheticSpec {
                            seed: history_seed(seed, d),
                            ..spec.clone()
                        };
                        Ok(demand_events(&generate_synthetic(&s)?.requests, cfg.cycle_secs()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let values = learn_from_days(&days, &today.map, cfg)?;
                Ok(Prepared {
                    map: today.map,
                    requests: today.requests,
                    values: Some(values),
                })
            }
        }
    }
}

pub const PRESET_NAMES: &[&str] = &["hotspots", "common-direction", "downtown"];

/// Named synthetic scenarios used by the command-line tool and the
/// benchmark suite.
pub fn named_preset(name: &str, seed: u64) -> Result<SyntheticSpec> {
    use crate::ingest::presets;
    match name {
        "hotspots" => Ok(presets::shifting_hotspots(10, 10, 260, 0.5, seed)),
        "common-direction" => Ok(presets::common_direction(10, 10, 60, 6.0, seed)),
        "downtown" => Ok(presets::downtown_city(260, 154.0, seed)),
        other => Err(Error::config(
            "preset",
            format!("unknown preset {other:?} (expected one of {})", PRESET_NAMES.join(", ")),
        )),
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<u32>,
    pub pipelines: Vec<Pipeline>,
    pub seeds: Vec<u64>,
    pub base: ScenarioConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::config("values", "sweep needs at least one value"));
        }
        if self.pipelines.is_empty() {
            return Err(Error::config("pipelines", "sweep needs at least one pipeline"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "sweep needs at least one seed"));
        }
        for &v in &self.values {
            self.point_config(v, self.seeds[0]).validate()?;
        }
        Ok(())
    }

    pub fn point_config(&self, value: u32, seed: u64) -> ScenarioConfig {
        let mut c = self.base.clone();
        c.seed = seed;
        match self.param {
            SweepParam::FleetSize => c.fleet_size = value,
            SweepParam::ThetaCtr => c.theta_ctr = value,
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: u32,
    pub pipeline: Pipeline,
    pub seed: u64,
    pub outcome: std::result::Result<crate::metrics::MetricsSummary, String>,
}

/// Runs every (value, pipeline, seed) point on a pool of `workers`
/// threads. Failed points are kept as rows carrying their error.
pub fn cmd_sweep(spec: &SweepSpec, source: &ScenarioSource, workers: usize) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;

    pool.install(|| {
        let prepared: BTreeMap<u64, std::result::Result<Prepared, String>> = spec
            .seeds
            .par_iter()
            .map(|&seed| (seed, source.prepare(seed, &spec.base).map_err(|e| e.to_string())))
            .collect();
        let mut points = Vec::new();
        for &value in &spec.values {
            for &pipeline in &spec.pipelines {
                for &seed in &spec.seeds {
                    points.push((value, pipeline, seed));
                }
            }
        }
        let mut rows: Vec<SweepRow> = points
            .into_par_iter()
            .map(|(value, pipeline, seed)| {
                let outcome = prepared[&seed].clone().and_then(|p| {
                    let cfg = PipelineConfig {
                        pipeline,
                        scenario: spec.point_config(value, seed),
                    };
                    run(&cfg, &p.map, p.requests, p.values.as_ref())
                        .map(|o| o.summary)
                        .map_err(|e| e.to_string())
                });
                SweepRow {
                    value,
                    pipeline,
                    seed,
                    outcome,
                }
            })
            .collect();
        rows.sort_by_key(|r| (r.value, r.pipeline, r.seed));
        Ok(rows)
    })
}

pub fn write_sweep_csv(param: SweepParam, rows: &[SweepRow], mut w: impl Write) -> std::io::Result<()> {
    let names: Vec<String> = rows
        .iter()
        .find_map(|r| r.outcome.as_ref().ok())
        .map(|s| s.rows().into_iter().map(|(k, _)| k).collect())
        .unwrap_or_default();
    write!(w, "{param},pipeline,seed,status")?;
    for n in &names {
        write!(w, ",{n}")?;
    }
    writeln!(w)?;
    for r in rows {
        match &r.outcome {
            Ok(s) => {
                write!(w, "{},{},{},ok", r.value, r.pipeline, r.seed)?;
                for (_, v) in s.rows() {
                    write!(w, ",{v}")?;
                }
            }
            Err(e) => {
                let msg = e.replace([',', '\n'], ";");
                write!(w, "{},{},{},error: {msg}", r.value, r.pipeline, r.seed)?;
                for _ in &names {
                    write!(w, ",")?;
                }
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Mean of one metric over the seeds of each (value, pipeline) point;
/// failed rows are left out.
pub fn seed_means(rows: &[SweepRow], metric: &str) -> BTreeMap<(u32, Pipeline), f64> {
    let mut acc: BTreeMap<(u32, Pipeline), (f64, usize)> = BTreeMap::new();
    for r in rows {
        if let Some(v) = r.outcome.as_ref().ok().and_then(|s| s.get(metric)) {
            let e = acc.entry((r.value, r.pipeline)).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingReport {
    pub cycles: usize,
    pub cp_secs: f64,
    pub ardl_secs: f64,
    pub gim_secs: f64,
}

impl TimingReport {
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "algorithm,mean_seconds_per_cycle")?;
        writeln!(w, "CP,{}", self.cp_secs)?;
        writeln!(w, "ARDL,{}", self.ardl_secs)?;
        writeln!(w, "GIM,{}", self.gim_secs)?;
        writeln!(w, "cycles,{}", self.cycles)
    }
}

/// Per-cycle wall time of pooling, matching and relocation over one
/// full run of the complete pipeline.
pub fn cmd_timebench(
    cfg: &ScenarioConfig,
    map: &CityMap,
    requests: Vec<TripRequest>,
    values: &ValueTable,
) -> Result<TimingReport> {
    let cfg = PipelineConfig {
        pipeline: Pipeline::ArdlCpGim,
        scenario: cfg.clone(),
    };
    let out = run(&cfg, map, requests, Some(values))?;
    let t = out.timings;
    Ok(TimingReport {
        cycles: t.cycles,
        cp_secs: t.cp_per_cycle(),
        ardl_secs: t.matching_per_cycle(),
        gim_secs: t.gim_per_cycle(),
    })
}
