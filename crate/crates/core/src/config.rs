//! Scenario configuration and its plain-text `key = value` format.
//!
//! Every key has a default, so an empty file is a valid configuration.
//! [`PipelineConfig::to_config_string`] writes the effective configuration
//! back out in the same format; re-parsing it yields an identical value.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveTime};

use crate::error::{Error, Result};
use crate::model::ZoneId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pipeline {
    Smw,
    SmwCp,
    ArdlCp,
    ArdlCpGim,
}

impl Pipeline {
    pub const ALL: [Pipeline; 4] = [
        Pipeline::Smw,
        Pipeline::SmwCp,
        Pipeline::ArdlCp,
        Pipeline::ArdlCpGim,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Smw => "SMW",
            Pipeline::SmwCp => "SMW+CP",
            Pipeline::ArdlCp => "ARDL+CP",
            Pipeline::ArdlCpGim => "ARDL+CP+GIM",
        }
    }

    pub fn pools(self) -> bool {
        !matches!(self, Pipeline::Smw)
    }

    pub fn uses_ardl(self) -> bool {
        matches!(self, Pipeline::ArdlCp | Pipeline::ArdlCpGim)
    }

    pub fn relocates(self) -> bool {
        matches!(self, Pipeline::ArdlCpGim)
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| c.to_ascii_uppercase())
            .collect();
        Pipeline::ALL
            .into_iter()
            .find(|p| p.name() == norm)
            .ok_or_else(|| {
                Error::config(
                    "pipeline",
                    format!("unknown pipeline {s:?} (expected SMW, SMW+CP, ARDL+CP or ARDL+CP+GIM)"),
                )
            })
    }
}

/// Simulation parameters. Defaults follow the reference parameter table:
/// 3 minute cycles, 70% driver share, $2 per cost unit, 4 seats,
/// 20 minute patience, λ = 0.2, φ_m = 0.1, α = 0.5, γ = 0.8, θ_CTR = 30°.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub cycle_minutes: f64,
    /// `C_d` for a hop to an adjacent zone.
    pub cost_move: f64,
    /// `C_d` for a cycle spent inside the current zone.
    pub cost_stay: f64,
    pub p_taxi: f64,
    pub money_per_cost: f64,
    pub taxi_capacity: u32,
    pub patience_minutes: f64,
    pub lambda: f64,
    pub phi_m: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub theta_ctr: u32,
    pub fleet_size: u32,
    pub seed: u64,
    /// Fare model used when a trip record carries no fare.
    pub base_fare: f64,
    pub per_hop_fare: f64,
    pub window_start: NaiveTime,
    pub window_minutes: u32,
    pub window_date: Option<NaiveDate>,
    /// SMW queue scale weights; zones not listed weigh 1.
    pub smw_weights: Vec<(ZoneId, f64)>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            cycle_minutes: 3.0,
            cost_move: 1.0,
            cost_stay: 0.5,
            p_taxi: 0.7,
            money_per_cost: 2.0,
            taxi_capacity: 4,
            patience_minutes: 20.0,
            lambda: 0.2,
            phi_m: 0.1,
            alpha: 0.5,
            gamma: 0.8,
            theta_ctr: 30,
            fleet_size: 316,
            seed: 0,
            base_fare: 3.25,
            per_hop_fare: 4.0,
            window_start: NaiveTime::from_hms_opt(11, 0, 0).unwrap(),
            window_minutes: 780,
            window_date: None,
            smw_weights: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    pub fn cycle_secs(&self) -> i64 {
        (self.cycle_minutes * 60.0).round() as i64
    }

    pub fn patience_secs(&self) -> i64 {
        (self.patience_minutes * 60.0).round() as i64
    }

    pub fn window_secs(&self) -> i64 {
        self.window_minutes as i64 * 60
    }

    /// Number of value-table timestamps covering the window.
    pub fn horizon_cycles(&self) -> usize {
        let c = self.cycle_secs();
        ((self.window_secs() + c - 1) / c) as usize
    }

    pub fn bucket_count(&self) -> usize {
        (360 / self.theta_ctr) as usize
    }

    pub fn validate(&self) -> Result<()> {
        fn unit(key: &str, v: f64) -> Result<()> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(key, format!("{v} not in [0, 1]")))
            }
        }
        fn non_negative(key: &str, v: f64) -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(key, format!("{v} must be a finite value >= 0")))
            }
        }

        let secs = self.cycle_minutes * 60.0;
        if !(secs >= 1.0 && secs.fract() == 0.0) {
            return Err(Error::config(
                "cycle_minutes",
                "must be positive and a whole number of seconds",
            ));
        }
        non_negative("cost_move", self.cost_move)?;
        non_negative("cost_stay", self.cost_stay)?;
        unit("p_taxi", self.p_taxi)?;
        non_negative("money_per_cost", self.money_per_cost)?;
        if self.taxi_capacity == 0 {
            return Err(Error::config("taxi_capacity", "must be at least 1"));
        }
        non_negative("patience_minutes", self.patience_minutes)?;
        non_negative("lambda", self.lambda)?;
        non_negative("phi_m", self.phi_m)?;
        unit("alpha", self.alpha)?;
        unit("gamma", self.gamma)?;
        if self.theta_ctr == 0 || self.theta_ctr > 360 || 360 % self.theta_ctr != 0 {
            return Err(Error::config(
                "theta_ctr",
                format!("{} does not evenly divide 360", self.theta_ctr),
            ));
        }
        non_negative("base_fare", self.base_fare)?;
        non_negative("per_hop_fare", self.per_hop_fare)?;
        if self.window_minutes == 0 {
            return Err(Error::config("window_minutes", "must be positive"));
        }
        for (z, w) in &self.smw_weights {
            if !(w.is_finite() && *w > 0.0) {
                return Err(Error::config("smw_weights", format!("zone {z}: weight must be > 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub pipeline: Pipeline,
    pub scenario: ScenarioConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            pipeline: Pipeline::ArdlCpGim,
            scenario: ScenarioConfig::default(),
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "pipeline",
    "cycle_minutes",
    "cost_move",
    "cost_stay",
    "p_taxi",
    "money_per_cost",
    "taxi_capacity",
    "patience_minutes",
    "lambda",
    "phi_m",
    "alpha",
    "gamma",
    "theta_ctr",
    "fleet_size",
    "seed",
    "base_fare",
    "per_hop_fare",
    "window_start",
    "window_minutes",
    "window_date",
    "smw_weights",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| Error::config(key, format!("{value:?}: {e}")))
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = PipelineConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, i + 1, "expected `key = value`"))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.scenario.validate()?;
        Ok(cfg)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(line, "expected `key = value`"))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.scenario.validate()?;
        Ok(cfg)
    }

    /// Applies one `key = value` assignment. Does not re-validate.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let s = &mut self.scenario;
        match key {
            "pipeline" => self.pipeline = value.parse()?,
            "cycle_minutes" => s.cycle_minutes = parse_value(key, value)?,
            "cost_move" => s.cost_move = parse_value(key, value)?,
            "cost_stay" => s.cost_stay = parse_value(key, value)?,
            "p_taxi" => s.p_taxi = parse_value(key, value)?,
            "money_per_cost" => s.money_per_cost = parse_value(key, value)?,
            "taxi_capacity" => s.taxi_capacity = parse_value(key, value)?,
            "patience_minutes" => s.patience_minutes = parse_value(key, value)?,
            "lambda" => s.lambda = parse_value(key, value)?,
            "phi_m" => s.phi_m = parse_value(key, value)?,
            "alpha" => s.alpha = parse_value(key, value)?,
            "gamma" => s.gamma = parse_value(key, value)?,
            "theta_ctr" => s.theta_ctr = parse_value(key, value)?,
            "fleet_size" => s.fleet_size = parse_value(key, value)?,
            "seed" => s.seed = parse_value(key, value)?,
            "base_fare" => s.base_fare = parse_value(key, value)?,
            "per_hop_fare" => s.per_hop_fare = parse_value(key, value)?,
            "window_start" => {
                s.window_start = NaiveTime::parse_from_str(value, "%H:%M:%S")
                    .map_err(|e| Error::config(key, format!("{value:?}: {e}")))?
            }
            "window_minutes" => s.window_minutes = parse_value(key, value)?,
            "window_date" => {
                s.window_date = if value.is_empty() {
                    None
                } else {
                    Some(
                        NaiveDate::parse_from_str(value, "%Y-%m-%d")
                            .map_err(|e| Error::config(key, format!("{value:?}: {e}")))?,
                    )
                }
            }
            "smw_weights" => {
                let mut weights = Vec::new();
                for item in value.split(',').map(str::trim).filter(|x| !x.is_empty()) {
                    let (z, w) = item
                        .split_once(':')
                        .ok_or_else(|| Error::config(key, format!("{item:?}: expected zone:weight")))?;
                    weights.push((ZoneId(parse_value(key, z.trim())?), parse_value(key, w.trim())?));
                }
                s.smw_weights = weights;
            }
            _ => return Err(Error::config(key, "unknown configuration key")),
        }
        Ok(())
    }

    pub fn to_config_string(&self) -> String {
        let s = &self.scenario;
        let weights: Vec<String> = s.smw_weights.iter().map(|(z, w)| format!("{z}:{w}")).collect();
        let lines = [
            format!("pipeline = {}", self.pipeline),
            format!("cycle_minutes = {}", s.cycle_minutes),
            format!("cost_move = {}", s.cost_move),
            format!("cost_stay = {}", s.cost_stay),
            format!("p_taxi = {}", s.p_taxi),
            format!("money_per_cost = {}", s.money_per_cost),
            format!("taxi_capacity = {}", s.taxi_capacity),
            format!("patience_minutes = {}", s.patience_minutes),
            format!("lambda = {}", s.lambda),
            format!("phi_m = {}", s.phi_m),
            format!("alpha = {}", s.alpha),
            format!("gamma = {}", s.gamma),
            format!("theta_ctr = {}", s.theta_ctr),
            format!("fleet_size = {}", s.fleet_size),
            format!("seed = {}", s.seed),
            format!("base_fare = {}", s.base_fare),
            format!("per_hop_fare = {}", s.per_hop_fare),
            format!("window_start = {}", s.window_start.format("%H:%M:%S")),
            format!("window_minutes = {}", s.window_minutes),
            format!(
                "window_date = {}",
                s.window_date.map(|d| d.format("%Y-%m-%d").to_string()).unwrap_or_default()
            ),
            format!("smw_weights = {}", weights.join(",")),
        ];
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}
