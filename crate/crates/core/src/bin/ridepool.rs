use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ridepool::harness::{
    self, cmd_learn, cmd_simulate, cmd_sweep, cmd_timebench, named_preset, report_skips, write_sweep_csv,
    ScenarioSource, SweepParam, SweepSpec,
};
use ridepool::ingest::{self, generate_synthetic, load_city_map, load_trips, ColumnMap, SyntheticSpec};
use ridepool::{CityMap, Error, Pipeline, PipelineConfig, Result, TripRequest, ValueTable};

#[derive(Parser)]
#[command(name = "ridepool", version, about = "Zone-level ride-pooling dispatch simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a demand value table from historical trip files (one per day).
    Learn(LearnArgs),
    /// Run one simulation and write metrics, event log and effective config.
    Simulate(SimulateArgs),
    /// Run a parameter sweep over pipelines and seeds.
    Sweep(SweepArgs),
    /// Report mean per-cycle wall time of pooling, matching and relocation.
    Timebench(TimebenchArgs),
    /// Write a synthetic scenario (map, trips, history days) to disk.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set fleet_size=200`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Map trip-file columns, e.g. `start_timestamp=Trip Start Timestamp,...`.
    #[arg(long = "column-map")]
    column_map: Option<String>,
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long)]
    trips: Option<PathBuf>,
    #[arg(long)]
    values: Option<PathBuf>,
    /// Use a built-in synthetic scenario instead of files.
    #[arg(long, conflicts_with_all = ["map", "trips"])]
    synthetic: Option<String>,
    /// History days drawn to learn values for a synthetic scenario.
    #[arg(long, default_value_t = 3)]
    history_days: usize,
}

#[derive(Args)]
struct LearnArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, required = true)]
    map: PathBuf,
    #[arg(long, required = true, num_args = 1..)]
    trips: Vec<PathBuf>,
    /// Output path of the value table.
    #[arg(long, required = true)]
    values: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    pipeline: Option<String>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    inputs: Inputs,
    /// Parameter to vary: fleet_size or theta_ctr.
    #[arg(long)]
    vary: String,
    /// Comma-separated parameter values.
    #[arg(long, value_delimiter = ',', required = true)]
    points: Vec<u32>,
    /// Comma-separated pipelines, or `all`.
    #[arg(long, default_value = "all")]
    pipelines: String,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TimebenchArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    preset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Extra days written as history_<n>.csv for value learning.
    #[arg(long, default_value_t = 3)]
    days: usize,
    #[arg(long, default_value = "scenario")]
    out_dir: PathBuf,
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    for o in &common.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::config(o, "expected KEY=VALUE"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = common.seed {
        cfg.scenario.seed = seed;
    }
    cfg.scenario.validate()?;
    Ok(cfg)
}

fn columns(common: &Common) -> Result<ColumnMap> {
    common.column_map.as_deref().map_or(Ok(ColumnMap::default()), ColumnMap::parse)
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::config(flag, format!("--{flag} is required unless --synthetic is given")))
}

fn load_inputs(
    inputs: &Inputs,
    common: &Common,
    cfg: &PipelineConfig,
) -> Result<(CityMap, Vec<TripRequest>, Option<ValueTable>)> {
    if let Some(name) = &inputs.synthetic {
        let source = ScenarioSource::Synthetic {
            spec: named_preset(name, 0)?,
            history_days: inputs.history_days,
        };
        let p = source.prepare(cfg.scenario.seed, &cfg.scenario)?;
        let values = match &inputs.values {
            Some(path) => Some(ValueTable::load(path)?),
            None => p.values,
        };
        return Ok((p.map, p.requests, values));
    }
    let map = load_city_map(require(&inputs.map, "map")?)?;
    let trips = require(&inputs.trips, "trips")?;
    let loaded = load_trips(trips, &map, &cfg.scenario, &columns(common)?)?;
    report_skips(trips, &loaded.skipped);
    let values = inputs.values.as_deref().map(ValueTable::load).transpose()?;
    Ok((map, loaded.requests, values))
}

fn parse_pipelines(s: &str) -> Result<Vec<Pipeline>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Pipeline::ALL.to_vec());
    }
    s.split(',').map(str::parse).collect()
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf).expect("in-memory write");
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Learn(a) => {
            let cfg = load_config(&a.common)?;
            let map = load_city_map(&a.map)?;
            let table = cmd_learn(&a.trips, &map, &cfg.scenario, &columns(&a.common)?)?;
            write_file(&a.values, |w| table.write_to(w))?;
            println!("wrote {}", a.values.display());
        }
        Command::Simulate(a) => {
            let mut cfg = load_config(&a.common)?;
            if let Some(p) = &a.pipeline {
                cfg.pipeline = p.parse()?;
            }
            let (map, requests, values) = load_inputs(&a.inputs, &a.common, &cfg)?;
            let out = cmd_simulate(&cfg, &map, requests, values.as_ref(), &a.out_dir)?;
            out.summary.write_to(std::io::stdout()).map_err(|e| Error::io("stdout", e))?;
        }
        Command::Sweep(a) => {
            let cfg = load_config(&a.common)?;
            let spec = SweepSpec {
                param: a.vary.parse::<SweepParam>()?,
                values: a.points.clone(),
                pipelines: parse_pipelines(&a.pipelines)?,
                seeds: a.seeds.clone(),
                base: cfg.scenario.clone(),
            };
            let source = match &a.inputs.synthetic {
                Some(name) => ScenarioSource::Synthetic {
                    spec: named_preset(name, 0)?,
                    history_days: a.inputs.history_days,
                },
                None => {
                    let (map, requests, values) = load_inputs(&a.inputs, &a.common, &cfg)?;
                    ScenarioSource::Fixed { map, requests, values }
                }
            };
            let rows = cmd_sweep(&spec, &source, a.workers)?;
            let path = a.out_dir.join("sweep.csv");
            write_file(&path, |w| write_sweep_csv(spec.param, &rows, w))?;
            let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
            println!("wrote {} ({} rows, {failed} failed)", path.display(), rows.len());
        }
        Command::Timebench(a) => {
            let cfg = load_config(&a.common)?;
            let (map, requests, values) = load_inputs(&a.inputs, &a.common, &cfg)?;
            let values = values.ok_or_else(|| Error::config("values", "timebench needs a value table"))?;
            let report = cmd_timebench(&cfg.scenario, &map, requests, &values)?;
            let path = a.out_dir.join("timing.csv");
            write_file(&path, |w| report.write_to(w))?;
            report.write_to(std::io::stdout()).map_err(|e| Error::io("stdout", e))?;
        }
        Command::Generate(a) => {
            let spec = named_preset(&a.preset, a.seed)?;
            let cfg = PipelineConfig::default().scenario;
            let date = chrono::NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date");
            let today = generate_synthetic(&spec)?;
            std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
            ingest::save_city_map(&today.map, &a.out_dir.join("map.csv"))?;
            ingest::save_trips(&today.requests, &today.map, &cfg, date, &a.out_dir.join("trips.csv"))?;
            for d in 0..a.days {
                let s = SyntheticSpec {
                    seed: harness::history_seed(a.seed, d),
                    ..spec.clone()
                };
                let day = generate_synthetic(&s)?;
                let path = a.out_dir.join(format!("history_{d}.csv"));
                ingest::save_trips(&day.requests, &day.map, &cfg, date, &path)?;
            }
            println!("wrote {} ({} requests)", a.out_dir.display(), today.requests.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
