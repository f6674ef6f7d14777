//! Rider, driver and platform metrics.
//!
//! [`MetricsLedger`] is a fold over the event log: the engine feeds it the
//! same events it writes out, so rebuilding a ledger from a saved log gives
//! identical numbers. Money and time metrics are derived on demand from
//! the ledger and the fare parameters.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::events::Event;
use crate::model::{RequestId, TaxiId};

/// Discounted fare `F · e^(−λ·T_e)`, `T_e` in minutes.
pub fn fare(base: f64, extra_minutes: f64, lambda: f64) -> f64 {
    base * (-lambda * extra_minutes).exp()
}

/// Driver profit from the fares of riders they served and the cost units
/// they accumulated.
pub fn driver_profit(fares: &[f64], cost_units: f64, p_taxi: f64, money_per_cost: f64) -> f64 {
    fares.iter().map(|f| p_taxi * f).sum::<f64>() - cost_units * money_per_cost
}

/// `(T_total − T_idle) / T_total`.
pub fn utilization(total: f64, idle: f64) -> Result<f64> {
    if total <= 0.0 {
        return Err(Error::OutOfRange {
            what: "observation period",
            detail: "T_total must be positive".into(),
        });
    }
    Ok((total - idle) / total)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RequestRecord {
    pub id: RequestId,
    pub t: i64,
    pub release_cycle: usize,
    pub direct_hops: u32,
    pub base_fare: f64,
    pub match_cycle: Option<usize>,
    pub matched_at: Option<i64>,
    pub picked_up_at: Option<i64>,
    pub delivered_at: Option<i64>,
    pub taxi: Option<TaxiId>,
    /// Riders in the matched cluster.
    pub occupancy: usize,
    pub expired: bool,
}

impl RequestRecord {
    pub fn served(&self) -> bool {
        self.delivered_at.is_some()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DriverRecord {
    pub served: Vec<RequestId>,
    pub cost_units: f64,
    pub busy_cycles: usize,
    pub cycles: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsLedger {
    pub cycle_secs: i64,
    pub requests: BTreeMap<RequestId, RequestRecord>,
    pub drivers: BTreeMap<TaxiId, DriverRecord>,
    pub cycles: usize,
}

impl MetricsLedger {
    pub fn new(cycle_secs: i64) -> Self {
        MetricsLedger {
            cycle_secs,
            requests: BTreeMap::new(),
            drivers: BTreeMap::new(),
            cycles: 0,
        }
    }

    pub fn from_events<'a>(cycle_secs: i64, events: impl IntoIterator<Item = &'a Event>) -> Result<Self> {
        let mut ledger = Self::new(cycle_secs);
        for e in events {
            ledger.record(e)?;
        }
        Ok(ledger)
    }

    fn request(&mut self, id: RequestId) -> Result<&mut RequestRecord> {
        self.requests
            .get_mut(&id)
            .ok_or_else(|| Error::Contract(format!("event for unreleased request {id}")))
    }

    pub fn record(&mut self, event: &Event) -> Result<()> {
        match *event {
            Event::Release {
                cycle,
                request,
                t,
                direct_hops,
                base_fare,
                ..
            } => {
                self.requests.insert(
                    request,
                    RequestRecord {
                        id: request,
                        t,
                        release_cycle: cycle,
                        direct_hops,
                        base_fare,
                        ..Default::default()
                    },
                );
            }
            Event::Expire { request, .. } => self.request(request)?.expired = true,
            Event::Pool { .. } | Event::Relocate { .. } => {}
            Event::Match {
                cycle,
                taxi,
                issued_at,
                ref members,
                ..
            } => {
                let n = members.len();
                for &m in members {
                    let r = self.request(m)?;
                    r.match_cycle = Some(cycle);
                    r.matched_at = Some(issued_at);
                    r.taxi = Some(taxi);
                    r.occupancy = n;
                }
            }
            Event::Pickup { request, at, .. } => self.request(request)?.picked_up_at = Some(at),
            Event::Dropoff { taxi, request, at, .. } => {
                self.request(request)?.delivered_at = Some(at);
                self.drivers.entry(taxi).or_default().served.push(request);
            }
            Event::Taxi {
                cycle, taxi, cost, busy, ..
            } => {
                let d = self.drivers.entry(taxi).or_default();
                d.cost_units += cost;
                d.cycles += 1;
                d.busy_cycles += usize::from(busy);
                self.cycles = self.cycles.max(cycle + 1);
            }
        }
        Ok(())
    }

    pub fn total_requests(&self) -> usize {
        self.requests.len()
    }

    pub fn served_count(&self) -> usize {
        self.requests.values().filter(|r| r.served()).count()
    }

    pub fn expired_count(&self) -> usize {
        self.requests.values().filter(|r| r.expired).count()
    }

    /// Request-to-response latency in minutes, quantized to whole cycles.
    pub fn calling_time(&self, r: &RequestRecord) -> Option<f64> {
        r.match_cycle
            .map(|c| (c - r.release_cycle) as f64 * self.cycle_secs as f64 / 60.0)
    }

    /// Delay versus a direct solo ride, in minutes: pickup wait plus detour.
    pub fn extra_time(&self, r: &RequestRecord) -> Option<f64> {
        let (m, d) = (r.matched_at?, r.delivered_at?);
        let direct = r.direct_hops as i64 * self.cycle_secs;
        Some((d - m - direct) as f64 / 60.0)
    }

    pub fn rider_fare(&self, r: &RequestRecord, lambda: f64) -> f64 {
        match self.extra_time(r) {
            Some(te) if r.served() => fare(r.base_fare, te, lambda),
            _ => 0.0,
        }
    }

    /// Returns the rate and whether demand was empty (rate then reads 1).
    pub fn serving_rate(&self) -> (f64, bool) {
        let total = self.total_requests();
        if total == 0 {
            (1.0, true)
        } else {
            (self.served_count() as f64 / total as f64, false)
        }
    }

    pub fn platform_revenue(&self, lambda: f64, p_taxi: f64) -> f64 {
        self.requests
            .values()
            .filter(|r| r.served())
            .map(|r| (1.0 - p_taxi) * self.rider_fare(r, lambda))
            .sum()
    }

    pub fn driver_income(&self, taxi: TaxiId, lambda: f64, p_taxi: f64) -> f64 {
        self.drivers.get(&taxi).map_or(0.0, |d| {
            d.served
                .iter()
                .map(|id| p_taxi * self.rider_fare(&self.requests[id], lambda))
                .sum()
        })
    }

    pub fn driver_profit(&self, taxi: TaxiId, cfg: &ScenarioConfig) -> f64 {
        let Some(d) = self.drivers.get(&taxi) else {
            return 0.0;
        };
        let fares: Vec<f64> = d
            .served
            .iter()
            .map(|id| self.rider_fare(&self.requests[id], cfg.lambda))
            .collect();
        driver_profit(&fares, d.cost_units, cfg.p_taxi, cfg.money_per_cost)
    }

    /// Fleet average of per-taxi utilization.
    pub fn taxi_utilization(&self) -> Result<f64> {
        if self.drivers.is_empty() {
            return Err(Error::OutOfRange {
                what: "observation period",
                detail: "no taxis observed".into(),
            });
        }
        let mut acc = 0.0;
        for d in self.drivers.values() {
            acc += utilization(d.cycles as f64, (d.cycles - d.busy_cycles) as f64)?;
        }
        Ok(acc / self.drivers.len() as f64)
    }

    /// `|R⁺|_n` for `n = 1..=capacity`; index 0 is `n = 1`.
    pub fn occupancy_histogram(&self, capacity: usize) -> Vec<usize> {
        let mut h = vec![0; capacity];
        for r in self.requests.values().filter(|r| r.served()) {
            h[r.occupancy.clamp(1, capacity) - 1] += 1;
        }
        h
    }

    pub fn poolability(&self, n: usize, capacity: usize) -> Result<f64> {
        if n == 0 || n > capacity {
            return Err(Error::OutOfRange {
                what: "poolability level",
                detail: format!("{n} not in 1..={capacity}"),
            });
        }
        let total = self.total_requests();
        if total == 0 {
            return Ok(0.0);
        }
        Ok(self.occupancy_histogram(capacity)[n - 1] as f64 / total as f64)
    }

    pub fn summarize(&self, cfg: &ScenarioConfig) -> Result<MetricsSummary> {
        let capacity = cfg.taxi_capacity as usize;
        let served: Vec<&RequestRecord> = self.requests.values().filter(|r| r.served()).collect();
        let mean = |xs: &mut dyn Iterator<Item = f64>| {
            let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
            if n == 0 {
                0.0
            } else {
                s / n as f64
            }
        };
        let avg_calling = mean(&mut served.iter().filter_map(|r| self.calling_time(r)));
        let avg_extra = mean(&mut served.iter().filter_map(|r| self.extra_time(r)));
        let avg_fare = mean(&mut served.iter().map(|r| self.rider_fare(r, cfg.lambda)));
        let avg_savings = mean(&mut served.iter().map(|r| r.base_fare - self.rider_fare(r, cfg.lambda)));
        let profits: Vec<f64> = self.drivers.keys().map(|&t| self.driver_profit(t, cfg)).collect();
        let avg_profit = mean(&mut profits.iter().copied());
        let hours = self.cycles as f64 * self.cycle_secs as f64 / 3600.0;
        let (rate, zero_demand) = self.serving_rate();
        let poolability = (1..=capacity)
            .map(|n| self.poolability(n, capacity))
            .collect::<Result<Vec<_>>>()?;
        Ok(MetricsSummary {
            requests: self.total_requests(),
            served: served.len(),
            expired: self.expired_count(),
            serving_rate: rate,
            zero_demand,
            avg_calling_time_min: avg_calling,
            avg_extra_time_min: avg_extra,
            avg_fare,
            avg_savings,
            avg_driver_profit: avg_profit,
            avg_driver_profit_per_hour: if hours > 0.0 { avg_profit / hours } else { 0.0 },
            platform_revenue: self.platform_revenue(cfg.lambda, cfg.p_taxi),
            taxi_utilization: self.taxi_utilization().unwrap_or(0.0),
            poolability,
            cycles: self.cycles,
            fleet_size: self.drivers.len(),
            calling_time_quantum_min: self.cycle_secs as f64 / 60.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    pub requests: usize,
    pub served: usize,
    pub expired: usize,
    pub serving_rate: f64,
    pub zero_demand: bool,
    pub avg_calling_time_min: f64,
    pub avg_extra_time_min: f64,
    pub avg_fare: f64,
    pub avg_savings: f64,
    pub avg_driver_profit: f64,
    pub avg_driver_profit_per_hour: f64,
    pub platform_revenue: f64,
    pub taxi_utilization: f64,
    /// `poolability(n)` for `n = 1..=capacity`.
    pub poolability: Vec<f64>,
    pub cycles: usize,
    pub fleet_size: usize,
    /// Calling times are whole multiples of this many minutes.
    pub calling_time_quantum_min: f64,
}

impl MetricsSummary {
    pub fn rows(&self) -> Vec<(String, f64)> {
        let mut rows = vec![
            ("requests".to_string(), self.requests as f64),
            ("served".into(), self.served as f64),
            ("expired".into(), self.expired as f64),
            ("serving_rate".into(), self.serving_rate),
            ("zero_demand".into(), f64::from(u8::from(self.zero_demand))),
            ("avg_calling_time_min".into(), self.avg_calling_time_min),
            ("avg_extra_time_min".into(), self.avg_extra_time_min),
            ("avg_fare".into(), self.avg_fare),
            ("avg_savings".into(), self.avg_savings),
            ("avg_driver_profit".into(), self.avg_driver_profit),
            ("avg_driver_profit_per_hour".into(), self.avg_driver_profit_per_hour),
            ("platform_revenue".into(), self.platform_revenue),
            ("taxi_utilization".into(), self.taxi_utilization),
        ];
        for (i, p) in self.poolability.iter().enumerate() {
            rows.push((format!("poolability_{}", i + 1), *p));
        }
        rows.push(("cycles".into(), self.cycles as f64));
        rows.push(("fleet_size".into(), self.fleet_size as f64));
        rows.push(("calling_time_quantum_min".into(), self.calling_time_quantum_min));
        rows
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.rows().into_iter().find(|(k, _)| k == name).map(|(_, v)| v)
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        for (k, v) in self.rows() {
            writeln!(w, "{k},{v}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("in-memory write");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}
