//! Cycle-driven dispatch simulation.
//!
//! Cycle `c` is processed at `now = c·δ` and covers requests with
//! `t <= now` not yet released. Within a cycle the phases run in a fixed
//! order: release, expire, pool, match, move, relocate, dissolve. Taxis
//! move one zone hop per cycle along shortest paths; pickups and dropoffs
//! happen when a taxi is in the stop's zone, at the start (`now`) or end
//! (`now + δ`) of its movement step.

use std::collections::{HashMap, VecDeque};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::PipelineConfig;
use crate::demand::ValueTable;
use crate::error::{Error, Result};
use crate::events::Event;
use crate::matching::{ardl_match, MatchList, SupplySnapshot};
use crate::metrics::{MetricsLedger, MetricsSummary};
use crate::model::{
    CityMap, RequestId, RequestStatus, SimClock, Stop, StopAction, TaxiId, TaxiState, TripRequest, ZoneIx,
};
use crate::pooling::{pool_requests, singleton_table, IndexTable};
use crate::relocation::{find_base_zone, gim_decide, propagate};
use crate::smw::{smw_match, SmwQueues};

/// Wall time spent in the online algorithms, summed over the run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub cp: Duration,
    pub matching: Duration,
    pub gim: Duration,
    pub cycles: usize,
}

impl PhaseTimings {
    fn per_cycle(&self, d: Duration) -> f64 {
        if self.cycles == 0 {
            0.0
        } else {
            d.as_secs_f64() / self.cycles as f64
        }
    }

    pub fn cp_per_cycle(&self) -> f64 {
        self.per_cycle(self.cp)
    }

    pub fn matching_per_cycle(&self) -> f64 {
        self.per_cycle(self.matching)
    }

    pub fn gim_per_cycle(&self) -> f64 {
        self.per_cycle(self.gim)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: PipelineConfig,
    pub events: Vec<Event>,
    pub ledger: MetricsLedger,
    pub summary: MetricsSummary,
    pub timings: PhaseTimings,
    pub fleet: Vec<TaxiState>,
    pub requests: Vec<TripRequest>,
}

/// Route for an idle taxi serving one cluster: every pickup at the shared
/// origin, then dropoffs by nearest neighbor over hop counts, ties to the
/// lowest zone. Riders bound for the same zone are dropped together.
pub fn plan_route(taxi: &TaxiState, members: &[&TripRequest], map: &CityMap) -> Result<VecDeque<Stop>> {
    if !taxi.is_idle() {
        return Err(Error::Contract(format!("taxi {} is not idle", taxi.id)));
    }
    if members.len() > taxi.capacity as usize {
        return Err(Error::Contract(format!(
            "cluster of {} exceeds capacity {}",
            members.len(),
            taxi.capacity
        )));
    }
    let Some(first) = members.first() else {
        return Ok(VecDeque::new());
    };
    let origin = first.origin;
    if let Some(r) = members.iter().find(|r| r.origin != origin) {
        return Err(Error::Contract(format!("request {} does not share the cluster origin", r.id)));
    }
    let mut route: VecDeque<Stop> = members
        .iter()
        .map(|r| Stop {
            zone: origin,
            action: StopAction::Pickup(r.id),
        })
        .collect();
    let mut left: Vec<&TripRequest> = members.to_vec();
    let mut at = origin;
    while !left.is_empty() {
        let next = left
            .iter()
            .map(|r| r.dest)
            .min_by_key(|&d| (map.hops(at, d), d))
            .expect("nonempty");
        left.retain(|r| {
            if r.dest == next {
                route.push_back(Stop {
                    zone: next,
                    action: StopAction::Dropoff(r.id),
                });
                false
            } else {
                true
            }
        });
        at = next;
    }
    Ok(route)
}

pub struct Simulation<'a> {
    cfg: PipelineConfig,
    map: &'a CityMap,
    values: Option<&'a ValueTable>,
    clock: SimClock,
    requests: Vec<TripRequest>,
    by_id: HashMap<RequestId, usize>,
    next_release: usize,
    /// Outstanding request indices per origin zone, in release order.
    pending: Vec<Vec<usize>>,
    fleet: Vec<TaxiState>,
    events: Vec<Event>,
    ledger: MetricsLedger,
    timings: PhaseTimings,
    max_cycles: usize,
}

impl<'a> Simulation<'a> {
    /// Validates every input and places the fleet uniformly at random
    /// (seeded) over the zones.
    pub fn new(
        cfg: &PipelineConfig,
        map: &'a CityMap,
        requests: Vec<TripRequest>,
        values: Option<&'a ValueTable>,
    ) -> Result<Self> {
        let sc = &cfg.scenario;
        sc.validate()?;
        if map.is_empty() {
            return Err(Error::InvalidMap("map has no zones".into()));
        }
        if cfg.pipeline.uses_ardl() {
            let vt = values.ok_or_else(|| Error::config("values", format!("{} needs a value table", cfg.pipeline)))?;
            if vt.num_zones() != map.len() {
                return Err(Error::config(
                    "values",
                    format!("table covers {} zones, map has {}", vt.num_zones(), map.len()),
                ));
            }
        }
        for &(id, _) in &sc.smw_weights {
            map.resolve(id)?;
        }
        let window = sc.window_secs();
        let mut by_id = HashMap::with_capacity(requests.len());
        for (i, r) in requests.iter().enumerate() {
            let bad = |m: String| Err(Error::config("trips", format!("request {}: {m}", r.id)));
            if !(0..window).contains(&r.t) {
                return bad(format!("time {} outside [0, {window})", r.t));
            }
            if i > 0 && requests[i - 1].t > r.t {
                return bad("requests must be sorted by time".into());
            }
            if r.origin >= map.len() || r.dest >= map.len() {
                return bad("zone index out of range".into());
            }
            if r.status != RequestStatus::Pending || r.riders != 1 {
                return bad("must be a fresh single-rider request".into());
            }
            if !(r.base_fare.is_finite() && r.base_fare >= 0.0) || r.patience < 0 {
                return bad("fare and patience must be >= 0".into());
            }
            if by_id.insert(r.id, i).is_some() {
                return bad("duplicate id".into());
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
        let fleet = (0..sc.fleet_size)
            .map(|i| TaxiState::new(TaxiId(i), rng.random_range(0..map.len()), sc.taxi_capacity))
            .collect();

        let delta = sc.cycle_secs();
        let cap = sc.taxi_capacity as usize;
        let max_cycles = (window / delta) as usize
            + (sc.patience_secs() / delta) as usize
            + map.diameter() as usize * (cap + 1)
            + 4;
        Ok(Simulation {
            cfg: cfg.clone(),
            map,
            values,
            clock: SimClock::new(delta, 0, window),
            requests,
            by_id,
            next_release: 0,
            pending: vec![Vec::new(); map.len()],
            fleet,
            events: Vec::new(),
            ledger: MetricsLedger::new(delta),
            timings: PhaseTimings::default(),
            max_cycles,
        })
    }

    /// Replaces the random initial placement, one taxi per listed zone.
    pub fn with_fleet_at(mut self, zones: &[ZoneIx]) -> Result<Self> {
        if let Some(&z) = zones.iter().find(|&&z| z >= self.map.len()) {
            return Err(Error::config("fleet", format!("zone index {z} out of range")));
        }
        self.fleet = zones
            .iter()
            .enumerate()
            .map(|(i, &z)| TaxiState::new(TaxiId(i as u32), z, self.cfg.scenario.taxi_capacity))
            .collect();
        Ok(self)
    }

    pub fn clock(&self) -> &SimClock {
        &self.clock
    }

    pub fn fleet(&self) -> &[TaxiState] {
        &self.fleet
    }

    pub fn requests(&self) -> &[TripRequest] {
        &self.requests
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn ledger(&self) -> &MetricsLedger {
        &self.ledger
    }

    /// True once the window has passed, every request has been released,
    /// no rider is waiting and every taxi is idle.
    pub fn is_finished(&self) -> bool {
        !self.clock.in_window()
            && self.next_release == self.requests.len()
            && self.pending.iter().all(Vec::is_empty)
            && self.fleet.iter().all(TaxiState::is_idle)
    }

    pub fn run(mut self) -> Result<RunOutput> {
        while !self.is_finished() {
            self.step()?;
        }
        let summary = self.ledger.summarize(&self.cfg.scenario)?;
        Ok(RunOutput {
            config: self.cfg,
            events: self.events,
            ledger: self.ledger,
            summary,
            timings: self.timings,
            fleet: self.fleet,
            requests: self.requests,
        })
    }

    fn emit(&mut self, e: Event) -> Result<()> {
        self.ledger.record(&e)?;
        self.events.push(e);
        Ok(())
    }

    fn invariant(&self, message: impl Into<String>) -> Error {
        Error::Invariant {
            cycle: self.clock.cycle_index,
            message: message.into(),
        }
    }

    pub fn step(&mut self) -> Result<()> {
        let cycle = self.clock.cycle_index;
        if cycle >= self.max_cycles {
            return Err(self.invariant("simulation failed to drain"));
        }
        let now = self.clock.now();
        self.release(cycle, now)?;
        self.expire(cycle, now)?;

        let t0 = Instant::now();
        let tables = self.pool(cycle)?;
        self.timings.cp += t0.elapsed();

        let t0 = Instant::now();
        let lists = self.match_tables(&tables, cycle)?;
        self.timings.matching += t0.elapsed();
        self.assign(lists, cycle, now)?;

        self.move_fleet(cycle, now)?;

        if self.cfg.pipeline.relocates() {
            let t0 = Instant::now();
            self.relocate(cycle)?;
            self.timings.gim += t0.elapsed();
        }

        self.dissolve()?;
        self.check()?;
        self.timings.cycles += 1;
        self.clock.advance();
        Ok(())
    }

    fn release(&mut self, cycle: usize, now: i64) -> Result<()> {
        while let Some(r) = self.requests.get(self.next_release).filter(|r| r.t <= now) {
            let e = Event::Release {
                cycle,
                request: r.id,
                t: r.t,
                origin: self.map.id_of(r.origin),
                dest: self.map.id_of(r.dest),
                direct_hops: self.map.hops(r.origin, r.dest),
                base_fare: r.base_fare,
            };
            self.pending[r.origin].push(self.next_release);
            self.next_release += 1;
            self.emit(e)?;
        }
        Ok(())
    }

    fn expire(&mut self, cycle: usize, now: i64) -> Result<()> {
        for z in 0..self.pending.len() {
            let mut kept = Vec::with_capacity(self.pending[z].len());
            for i in std::mem::take(&mut self.pending[z]) {
                let r = &mut self.requests[i];
                if r.is_expired_at(now) {
                    r.transition(RequestStatus::Expired)?;
                    let id = r.id;
                    self.emit(Event::Expire { cycle, request: id })?;
                } else {
                    kept.push(i);
                }
            }
            self.pending[z] = kept;
        }
        Ok(())
    }

    fn pool(&mut self, cycle: usize) -> Result<Vec<IndexTable>> {
        let sc = &self.cfg.scenario;
        let mut tables = Vec::new();
        for z in 0..self.pending.len() {
            if self.pending[z].is_empty() {
                continue;
            }
            let reqs = self.pending[z].iter().map(|&i| &self.requests[i]);
            let table = if self.cfg.pipeline.pools() {
                pool_requests(z, reqs, sc.theta_ctr, sc.taxi_capacity as usize, self.map)?
            } else {
                singleton_table(z, reqs)
            };
            tables.push(table);
        }
        for table in &tables {
            for c in table.clusters() {
                for id in &c.members {
                    let i = self.by_id[id];
                    self.requests[i].transition(RequestStatus::Pooled)?;
                }
                self.emit(Event::Pool {
                    cycle,
                    zone: self.map.id_of(table.zone),
                    cluster: c.id,
                    bucket: c.bucket,
                    members: c.members.clone(),
                })?;
            }
        }
        Ok(tables)
    }

    fn match_tables(&self, tables: &[IndexTable], cycle: usize) -> Result<Vec<MatchList>> {
        let supply = SupplySnapshot::from_fleet(&self.fleet, self.map.len());
        if self.cfg.pipeline.uses_ardl() {
            let values = self.values.expect("checked at construction");
            let mut supply = supply;
            Ok(tables
                .iter()
                .map(|t| ardl_match(t, &mut supply, values, cycle, self.map))
                .collect())
        } else {
            let mut queues = SmwQueues::with_weights(supply, &self.cfg.scenario.smw_weights, self.map)?;
            Ok(tables.iter().map(|t| smw_match(t, &mut queues, self.map)).collect())
        }
    }

    fn assign(&mut self, lists: Vec<MatchList>, cycle: usize, now: i64) -> Result<()> {
        for list in lists {
            for pair in list.pairs {
                let ti = pair.taxi.0 as usize;
                let idx: Vec<usize> = pair.cluster.members.iter().map(|id| self.by_id[id]).collect();
                let route = {
                    let members: Vec<&TripRequest> = idx.iter().map(|&i| &self.requests[i]).collect();
                    plan_route(&self.fleet[ti], &members, self.map)?
                };
                for &i in &idx {
                    let r = &mut self.requests[i];
                    r.transition(RequestStatus::Matched)?;
                    r.matched_at = Some(now);
                }
                let taxi = &mut self.fleet[ti];
                taxi.route = route;
                taxi.relocate_to = None;
                let e = Event::Match {
                    cycle,
                    zone: self.map.id_of(list.zone),
                    taxi: pair.taxi,
                    supplier: self.map.id_of(pair.supplier),
                    issued_at: now,
                    members: pair.cluster.members,
                    scores: pair.scores.iter().map(|&(z, s)| (self.map.id_of(z), s)).collect(),
                };
                self.emit(e)?;
            }
        }
        Ok(())
    }

    /// Executes every stop at the front of the taxi's route that lies in
    /// its current zone.
    fn serve_stops(&mut self, ti: usize, cycle: usize, at: i64) -> Result<()> {
        loop {
            let taxi = &self.fleet[ti];
            let Some(&stop) = taxi.route.front().filter(|s| s.zone == taxi.zone) else {
                return Ok(());
            };
            let taxi_id = taxi.id;
            self.fleet[ti].route.pop_front();
            let e = match stop.action {
                StopAction::Pickup(id) => {
                    let r = &mut self.requests[self.by_id[&id]];
                    r.transition(RequestStatus::OnBoard)?;
                    r.picked_up_at = Some(at);
                    let taxi = &mut self.fleet[ti];
                    taxi.on_board += 1;
                    taxi.free_seats -= 1;
                    Event::Pickup {
                        cycle,
                        taxi: taxi_id,
                        request: id,
                        at,
                    }
                }
                StopAction::Dropoff(id) => {
                    let r = &mut self.requests[self.by_id[&id]];
                    r.transition(RequestStatus::Delivered)?;
                    r.delivered_at = Some(at);
                    let taxi = &mut self.fleet[ti];
                    taxi.on_board -= 1;
                    taxi.free_seats += 1;
                    Event::Dropoff {
                        cycle,
                        taxi: taxi_id,
                        request: id,
                        at,
                    }
                }
            };
            self.emit(e)?;
        }
    }

    fn move_fleet(&mut self, cycle: usize, now: i64) -> Result<()> {
        let sc = &self.cfg.scenario;
        let (cost_move, cost_stay, delta) = (sc.cost_move, sc.cost_stay, sc.cycle_secs());
        for ti in 0..self.fleet.len() {
            let busy = !self.fleet[ti].is_idle();
            self.serve_stops(ti, cycle, now)?;
            let taxi = &mut self.fleet[ti];
            let target = match (taxi.route.front(), taxi.relocate_to.take()) {
                (Some(stop), _) => Some(stop.zone),
                (None, Some(z)) => Some(z),
                (None, None) => None,
            };
            let mut cost = cost_stay;
            if let Some(target) = target.filter(|&z| z != taxi.zone) {
                taxi.zone = self.map.next_hop(taxi.zone, target);
                cost = cost_move;
            }
            taxi.odometer_cost += cost;
            taxi.busy_cycles += u32::from(busy);
            taxi.t = now + delta;
            self.serve_stops(ti, cycle, now + delta)?;
            let taxi = &self.fleet[ti];
            let e = Event::Taxi {
                cycle,
                taxi: taxi.id,
                zone: self.map.id_of(taxi.zone),
                cost,
                busy,
            };
            self.emit(e)?;
        }
        Ok(())
    }

    fn relocate(&mut self, cycle: usize) -> Result<()> {
        let leftover: Vec<usize> = self
            .pending
            .iter()
            .map(|q| {
                q.iter()
                    .filter(|&&i| self.requests[i].status == RequestStatus::Pooled)
                    .count()
            })
            .collect();
        let base = find_base_zone(&leftover);
        let values = self.values.expect("relocating pipelines carry a value table");
        let pv = propagate(values, cycle, base, self.cfg.scenario.alpha, self.map)?;
        let phi_m = self.cfg.scenario.phi_m;
        for ti in 0..self.fleet.len() {
            if !self.fleet[ti].is_idle() {
                continue;
            }
            let taxi = &self.fleet[ti];
            let to = gim_decide(taxi, &pv, phi_m, self.map)?;
            if to == taxi.zone {
                self.fleet[ti].relocate_to = None;
                continue;
            }
            let e = Event::Relocate {
                cycle,
                taxi: taxi.id,
                from: self.map.id_of(taxi.zone),
                to: self.map.id_of(to),
                delta: pv.get(to) - pv.get(taxi.zone),
            };
            self.fleet[ti].relocate_to = Some(to);
            self.emit(e)?;
        }
        Ok(())
    }

    /// Unmatched clusters fall apart; their riders wait as pending and are
    /// pooled afresh next cycle. Matched riders leave the wait lists.
    fn dissolve(&mut self) -> Result<()> {
        for z in 0..self.pending.len() {
            let mut kept = Vec::with_capacity(self.pending[z].len());
            for i in std::mem::take(&mut self.pending[z]) {
                let r = &mut self.requests[i];
                if r.status == RequestStatus::Pooled {
                    r.transition(RequestStatus::Pending)?;
                    kept.push(i);
                }
            }
            self.pending[z] = kept;
        }
        Ok(())
    }

    fn check(&self) -> Result<()> {
        let mut by_status = [0usize; RequestStatus::ALL.len()];
        for r in &self.requests[..self.next_release] {
            by_status[r.status.slot()] += 1;
        }
        let waiting: usize = self.pending.iter().map(Vec::len).sum();
        if by_status[RequestStatus::Pooled.slot()] != 0 || by_status[RequestStatus::Pending.slot()] != waiting {
            return Err(self.invariant("wait lists out of sync with request states"));
        }
        if by_status.iter().sum::<usize>() != self.next_release {
            return Err(self.invariant("request conservation broken"));
        }
        let mut on_board = 0;
        let mut assigned = 0;
        for taxi in &self.fleet {
            taxi.check().map_err(|m| self.invariant(m))?;
            on_board += (taxi.capacity - taxi.free_seats) as usize;
            assigned += taxi.pending_pickups() as usize;
        }
        if on_board != by_status[RequestStatus::OnBoard.slot()] {
            return Err(self.invariant("on-board riders not carried by exactly one taxi"));
        }
        if assigned != by_status[RequestStatus::Matched.slot()] {
            return Err(self.invariant("matched riders without a pickup stop"));
        }
        Ok(())
    }
}

/// Runs a scenario from cycle 0 until every rider is delivered or gone.
pub fn run(
    cfg: &PipelineConfig,
    map: &CityMap,
    requests: Vec<TripRequest>,
    values: Option<&ValueTable>,
) -> Result<RunOutput> {
    Simulation::new(cfg, map, requests, values)?.run()
}
