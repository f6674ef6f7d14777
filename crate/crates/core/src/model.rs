//! Shared domain vocabulary: zones and the city map, the simulation clock,
//! trip requests, taxi states and match responses.
//!
//! Space is zone-granular. Every algorithm addresses zones through their
//! dense index into [`CityMap`] (`ZoneIx`); the external [`ZoneId`] only
//! appears at file and log boundaries. Zones are stored sorted by id, so
//! "lowest index" and "lowest zone id" tie-breaks coincide.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use crate::error::{Error, Result};

/// External zone identifier as it appears in map and trip files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ZoneId(pub u32);

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Dense zone index into a [`CityMap`].
pub type ZoneIx = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct RequestId(pub u64);

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaxiId(pub u32);

impl fmt::Display for TaxiId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Planar 2-D vector in projected map units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_zero(self) -> bool {
        self.x == 0.0 && self.y == 0.0
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;

    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub id: ZoneId,
    pub centroid: Vec2,
    /// Neighbor indices, ascending. Never contains the zone itself.
    pub adjacent: Vec<ZoneIx>,
}

/// City map as read from a file, before validation. Edges are directed
/// entries; a well-formed map lists each adjacency in both directions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawCityMap {
    pub zones: Vec<(ZoneId, Vec2)>,
    pub edges: Vec<(ZoneId, ZoneId)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MapViolation {
    DuplicateZone(ZoneId),
    NonFiniteCentroid(ZoneId),
    /// An edge names a zone that has no centroid record.
    MissingCentroid(ZoneId),
    SelfLoop(ZoneId),
    AsymmetricAdjacency(ZoneId, ZoneId),
    Disconnected { unreachable: Vec<ZoneId> },
    Empty,
}

impl fmt::Display for MapViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapViolation::DuplicateZone(z) => write!(f, "duplicate zone {z}"),
            MapViolation::NonFiniteCentroid(z) => write!(f, "non-finite centroid for zone {z}"),
            MapViolation::MissingCentroid(z) => write!(f, "missing centroid for zone {z}"),
            MapViolation::SelfLoop(z) => write!(f, "self loop at zone {z}"),
            MapViolation::AsymmetricAdjacency(a, b) => {
                write!(f, "asymmetric adjacency: {a}->{b} without {b}->{a}")
            }
            MapViolation::Disconnected { unreachable } => {
                write!(f, "disconnected graph: {} zone(s) unreachable", unreachable.len())
            }
            MapViolation::Empty => write!(f, "no zones"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<MapViolation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks a parsed map for asymmetric edges, self loops, unknown endpoints
/// and connectivity. Report-style: never fails.
pub fn validate_city_map(raw: &RawCityMap) -> ValidationReport {
    let mut violations = Vec::new();
    if raw.zones.is_empty() {
        violations.push(MapViolation::Empty);
        return ValidationReport { violations };
    }

    let mut known: HashMap<ZoneId, usize> = HashMap::new();
    for (i, (id, c)) in raw.zones.iter().enumerate() {
        if known.insert(*id, i).is_some() {
            violations.push(MapViolation::DuplicateZone(*id));
        }
        if !c.x.is_finite() || !c.y.is_finite() {
            violations.push(MapViolation::NonFiniteCentroid(*id));
        }
    }

    let directed: BTreeSet<(ZoneId, ZoneId)> = raw.edges.iter().copied().collect();
    let mut missing = BTreeSet::new();
    for &(a, b) in &directed {
        for z in [a, b] {
            if !known.contains_key(&z) {
                missing.insert(z);
            }
        }
        if a == b {
            violations.push(MapViolation::SelfLoop(a));
        } else if !directed.contains(&(b, a)) {
            violations.push(MapViolation::AsymmetricAdjacency(a, b));
        }
    }
    violations.extend(missing.into_iter().map(MapViolation::MissingCentroid));

    // Connectivity over the undirected closure of known-zone edges.
    let n = raw.zones.len();
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in &directed {
        if let (Some(&ia), Some(&ib)) = (known.get(&a), known.get(&b)) {
            adj[ia].push(ib);
            adj[ib].push(ia);
        }
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    let mut unreachable: Vec<ZoneId> = raw
        .zones
        .iter()
        .zip(&seen)
        .filter(|(_, s)| !**s)
        .map(|((id, _), _)| *id)
        .collect();
    if !unreachable.is_empty() {
        unreachable.sort();
        violations.push(MapViolation::Disconnected { unreachable });
    }

    ValidationReport { violations }
}

/// Validated, connected zone graph with precomputed all-pairs hop counts
/// and shortest-path next hops.
#[derive(Debug, Clone)]
pub struct CityMap {
    zones: Vec<Zone>,
    index: HashMap<ZoneId, ZoneIx>,
    /// Row-major `n * n`; `hops[a * n + b]` is the BFS distance a -> b.
    hops: Vec<u32>,
    /// `next[a * n + b]` is the lowest-index neighbor of `a` on a shortest
    /// path toward `b` (or `a` itself when `a == b`).
    next: Vec<u32>,
}

impl CityMap {
    pub fn from_raw(raw: &RawCityMap) -> Result<Self> {
        let report = validate_city_map(raw);
        if !report.is_ok() {
            return Err(Error::InvalidMap(report.to_string()));
        }

        let mut sorted = raw.zones.clone();
        sorted.sort_by_key(|(id, _)| *id);
        let index: HashMap<ZoneId, ZoneIx> =
            sorted.iter().enumerate().map(|(i, (id, _))| (*id, i)).collect();
        let mut zones: Vec<Zone> = sorted
            .iter()
            .map(|&(id, centroid)| Zone {
                id,
                centroid,
                adjacent: Vec::new(),
            })
            .collect();
        for &(a, b) in &raw.edges {
            zones[index[&a]].adjacent.push(index[&b]);
        }
        for z in &mut zones {
            z.adjacent.sort_unstable();
            z.adjacent.dedup();
        }

        let n = zones.len();
        let mut hops = vec![u32::MAX; n * n];
        for src in 0..n {
            let row = &mut hops[src * n..(src + 1) * n];
            row[src] = 0;
            let mut queue = VecDeque::from([src]);
            while let Some(u) = queue.pop_front() {
                for &v in &zones[u].adjacent {
                    if row[v] == u32::MAX {
                        row[v] = row[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
        }
        let mut next = vec![0u32; n * n];
        for a in 0..n {
            for b in 0..n {
                next[a * n + b] = if a == b {
                    a as u32
                } else {
                    let want = hops[a * n + b] - 1;
                    // adjacency is ascending, so the first hit is the lowest index
                    *zones[a]
                        .adjacent
                        .iter()
                        .find(|&&v| hops[v * n + b] == want)
                        .expect("connected map") as u32
                };
            }
        }

        Ok(CityMap {
            zones,
            index,
            hops,
            next,
        })
    }

    /// Rectangular grid with 4-neighborhood adjacency. Zone ids run
    /// row-major from 0; centroids sit at `(col, row)`.
    pub fn grid(width: usize, height: usize) -> Self {
        CityMap::from_raw(&grid_raw(width, height)).expect("grid maps are valid")
    }

    pub fn len(&self) -> usize {
        self.zones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zones.is_empty()
    }

    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn zone(&self, ix: ZoneIx) -> &Zone {
        &self.zones[ix]
    }

    pub fn id_of(&self, ix: ZoneIx) -> ZoneId {
        self.zones[ix].id
    }

    pub fn index_of(&self, id: ZoneId) -> Option<ZoneIx> {
        self.index.get(&id).copied()
    }

    pub fn resolve(&self, id: ZoneId) -> Result<ZoneIx> {
        self.index_of(id).ok_or(Error::UnknownZone(id))
    }

    pub fn adjacent(&self, ix: ZoneIx) -> &[ZoneIx] {
        &self.zones[ix].adjacent
    }

    /// `O(z)`: the zone itself followed by its neighbors, ascending by index.
    pub fn neighborhood(&self, ix: ZoneIx) -> impl Iterator<Item = ZoneIx> + '_ {
        let adj = &self.zones[ix].adjacent;
        let split = adj.partition_point(|&v| v < ix);
        adj[..split]
            .iter()
            .copied()
            .chain(std::iter::once(ix))
            .chain(adj[split..].iter().copied())
    }

    pub fn hops(&self, from: ZoneIx, to: ZoneIx) -> u32 {
        self.hops[from * self.len() + to]
    }

    pub fn next_hop(&self, from: ZoneIx, to: ZoneIx) -> ZoneIx {
        self.next[from * self.len() + to] as ZoneIx
    }

    pub fn diameter(&self) -> u32 {
        self.hops.iter().copied().max().unwrap_or(0)
    }

    pub fn direction(&self, origin: ZoneIx, dest: ZoneIx) -> Result<Vec2> {
        let n = self.len();
        for z in [origin, dest] {
            if z >= n {
                return Err(Error::OutOfRange {
                    what: "zone index",
                    detail: format!("{z} >= {n}"),
                });
            }
        }
        Ok(self.zones[dest].centroid - self.zones[origin].centroid)
    }

    pub fn to_raw(&self) -> RawCityMap {
        RawCityMap {
            zones: self.zones.iter().map(|z| (z.id, z.centroid)).collect(),
            edges: self
                .zones
                .iter()
                .flat_map(|z| z.adjacent.iter().map(move |&b| (z.id, self.zones[b].id)))
                .collect(),
        }
    }
}

pub(crate) fn grid_raw(width: usize, height: usize) -> RawCityMap {
    let mut raw = RawCityMap::default();
    let id = |c: usize, r: usize| ZoneId((r * width + c) as u32);
    for r in 0..height {
        for c in 0..width {
            raw.zones.push((id(c, r), Vec2::new(c as f64, r as f64)));
            if c + 1 < width {
                raw.edges.push((id(c, r), id(c + 1, r)));
                raw.edges.push((id(c + 1, r), id(c, r)));
            }
            if r + 1 < height {
                raw.edges.push((id(c, r), id(c, r + 1)));
                raw.edges.push((id(c, r + 1), id(c, r)));
            }
        }
    }
    raw
}

/// Discrete simulation clock. Times are integer seconds from scenario start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimClock {
    pub cycle_index: usize,
    pub cycle_secs: i64,
    pub start_time: i64,
    /// End of the request-release window. The engine keeps cycling past it
    /// only to drain riders already in the system.
    pub end_time: i64,
}

impl SimClock {
    pub fn new(cycle_secs: i64, start_time: i64, end_time: i64) -> Self {
        SimClock {
            cycle_index: 0,
            cycle_secs,
            start_time,
            end_time,
        }
    }

    pub fn now(&self) -> i64 {
        self.start_time + self.cycle_index as i64 * self.cycle_secs
    }

    /// Half-open interval `[now, now + δ)` covered by the current cycle.
    pub fn cycle_span(&self) -> (i64, i64) {
        let now = self.now();
        (now, now + self.cycle_secs)
    }

    pub fn cycle_of(&self, t: i64) -> usize {
        ((t - self.start_time).max(0) / self.cycle_secs) as usize
    }

    pub fn in_window(&self) -> bool {
        self.now() < self.end_time
    }

    pub fn advance(&mut self) {
        self.cycle_index += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RequestStatus {
    Pending,
    Pooled,
    Matched,
    OnBoard,
    Delivered,
    Expired,
}

impl RequestStatus {
    pub const ALL: [RequestStatus; 6] = [
        RequestStatus::Pending,
        RequestStatus::Pooled,
        RequestStatus::Matched,
        RequestStatus::OnBoard,
        RequestStatus::Delivered,
        RequestStatus::Expired,
    ];

    /// Legal lifecycle edges. `Pooled -> Pending` is the dissolve of an
    /// unmatched cluster at cycle end.
    pub fn can_transition(self, next: RequestStatus) -> bool {
        use RequestStatus::*;
        matches!(
            (self, next),
            (Pending, Pooled)
                | (Pooled, Matched)
                | (Pooled, Pending)
                | (Matched, OnBoard)
                | (OnBoard, Delivered)
                | (Pending, Expired)
                | (Pooled, Expired)
        )
    }

    pub fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripRequest {
    pub id: RequestId,
    /// Request time, seconds from scenario start.
    pub t: i64,
    pub origin: ZoneIx,
    pub dest: ZoneIx,
    /// Patience in seconds.
    pub patience: i64,
    pub riders: u32,
    /// Solo-ride fare `F(r)`.
    pub base_fare: f64,
    pub status: RequestStatus,
    pub matched_at: Option<i64>,
    pub picked_up_at: Option<i64>,
    pub delivered_at: Option<i64>,
}

impl TripRequest {
    pub fn new(id: RequestId, t: i64, origin: ZoneIx, dest: ZoneIx, patience: i64, base_fare: f64) -> Self {
        TripRequest {
            id,
            t,
            origin,
            dest,
            patience,
            riders: 1,
            base_fare,
            status: RequestStatus::Pending,
            matched_at: None,
            picked_up_at: None,
            delivered_at: None,
        }
    }

    pub fn transition(&mut self, next: RequestStatus) -> Result<()> {
        if !self.status.can_transition(next) {
            return Err(Error::Contract(format!(
                "request {}: illegal transition {:?} -> {:?}",
                self.id, self.status, next
            )));
        }
        self.status = next;
        Ok(())
    }

    pub fn is_expired_at(&self, now: i64) -> bool {
        now - self.t > self.patience
    }
}

pub fn trip_direction(req: &TripRequest, map: &CityMap) -> Result<Vec2> {
    map.direction(req.origin, req.dest)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopAction {
    Pickup(RequestId),
    Dropoff(RequestId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stop {
    pub zone: ZoneIx,
    pub action: StopAction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaxiState {
    pub t: i64,
    pub id: TaxiId,
    pub zone: ZoneIx,
    pub capacity: u32,
    /// Remaining capacity `ca`: seats not occupied by riders on board.
    pub free_seats: u32,
    pub route: VecDeque<Stop>,
    pub on_board: u32,
    /// Accumulated operational cost units `C_d`.
    pub odometer_cost: f64,
    pub busy_cycles: u32,
    /// Pending idle-movement decision, applied on the next movement phase.
    pub relocate_to: Option<ZoneIx>,
}

impl TaxiState {
    pub fn new(id: TaxiId, zone: ZoneIx, capacity: u32) -> Self {
        TaxiState {
            t: 0,
            id,
            zone,
            capacity,
            free_seats: capacity,
            route: VecDeque::new(),
            on_board: 0,
            odometer_cost: 0.0,
            busy_cycles: 0,
            relocate_to: None,
        }
    }

    pub fn is_idle(&self) -> bool {
        self.route.is_empty()
    }

    /// Riders assigned to this taxi that are not yet picked up.
    pub fn pending_pickups(&self) -> u32 {
        self.route
            .iter()
            .filter(|s| matches!(s.action, StopAction::Pickup(_)))
            .count() as u32
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        if self.on_board + self.free_seats != self.capacity {
            return Err(format!("taxi {}: seat accounting broken", self.id));
        }
        if self.on_board + self.pending_pickups() > self.capacity {
            return Err(format!("taxi {}: more riders assigned than seats", self.id));
        }
        if self.is_idle() && self.on_board != 0 {
            return Err(format!("taxi {}: riders on board with an empty route", self.id));
        }
        let mut open: Vec<RequestId> = Vec::new();
        for s in &self.route {
            match s.action {
                StopAction::Pickup(r) => open.push(r),
                StopAction::Dropoff(r) => {
                    if let Some(p) = open.iter().position(|&x| x == r) {
                        open.swap_remove(p);
                    }
                }
            }
        }
        if !open.is_empty() {
            return Err(format!("taxi {}: pickup without dropoff", self.id));
        }
        Ok(())
    }
}

/// Notification pairing a request with the taxi that will serve it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchResponse {
    pub request_id: RequestId,
    pub taxi_id: TaxiId,
    pub issued_at: i64,
    pub issued_cycle: usize,
}
