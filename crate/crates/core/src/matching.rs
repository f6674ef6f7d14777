//! Adjacency ride-matching on the supply-demand ratio.
//!
//! For each cluster of a zone `z`, the supplier is the zone in
//! `O(z) = {z} ∪ adj(z)` with the largest `φ = X / (1 + V)`, where `X` is
//! the zone's idle taxi count and `V` its learned demand value at the
//! current cycle. When that zone has no taxis left, the zone's remaining
//! clusters stay unmatched this cycle.

use std::collections::BTreeSet;

use crate::demand::ValueTable;
use crate::model::{CityMap, TaxiId, TaxiState, ZoneIx};
use crate::pooling::{IndexTable, TupleCluster};

/// Idle taxis per zone at the current cycle, each set ascending by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupplySnapshot {
    zones: Vec<BTreeSet<TaxiId>>,
}

impl SupplySnapshot {
    pub fn empty(num_zones: usize) -> Self {
        SupplySnapshot {
            zones: vec![BTreeSet::new(); num_zones],
        }
    }

    pub fn from_fleet(fleet: &[TaxiState], num_zones: usize) -> Self {
        let mut s = Self::empty(num_zones);
        for taxi in fleet.iter().filter(|t| t.is_idle()) {
            s.zones[taxi.zone].insert(taxi.id);
        }
        s
    }

    pub fn add(&mut self, zone: ZoneIx, taxi: TaxiId) {
        self.zones[zone].insert(taxi);
    }

    pub fn count(&self, zone: ZoneIx) -> usize {
        self.zones[zone].len()
    }

    pub fn total(&self) -> usize {
        self.zones.iter().map(BTreeSet::len).sum()
    }

    pub fn ids(&self, zone: ZoneIx) -> impl Iterator<Item = TaxiId> + '_ {
        self.zones[zone].iter().copied()
    }

    /// Removes and returns the lowest taxi id in `zone`.
    pub fn pop(&mut self, zone: ZoneIx) -> Option<TaxiId> {
        self.zones[zone].pop_first()
    }

    pub fn num_zones(&self) -> usize {
        self.zones.len()
    }
}

/// `φ = x / (1 + v)`. Total for `x, v >= 0`.
pub fn sd_ratio(x: usize, v: f64) -> f64 {
    x as f64 / (1.0 + v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchPair {
    pub taxi: TaxiId,
    pub supplier: ZoneIx,
    pub cluster: TupleCluster,
    /// Scores of every candidate zone at decision time, in `O(z)` order.
    pub scores: Vec<(ZoneIx, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchList {
    pub zone: ZoneIx,
    pub pairs: Vec<MatchPair>,
}

/// First maximum in iteration order, which is ascending zone index.
pub(crate) fn argmax(scores: &[(ZoneIx, f64)]) -> ZoneIx {
    let mut best = scores[0];
    for &s in &scores[1..] {
        if s.1 > best.1 {
            best = s;
        }
    }
    best.0
}

pub fn ardl_match(
    table: &IndexTable,
    supply: &mut SupplySnapshot,
    values: &ValueTable,
    t: usize,
    map: &CityMap,
) -> MatchList {
    let row = values.row_clamped(t);
    let v = |z: ZoneIx| row.get(z).copied().unwrap_or(0.0);
    let mut pairs = Vec::new();
    for cluster in table.clusters() {
        let scores: Vec<(ZoneIx, f64)> = map
            .neighborhood(table.zone)
            .map(|z| (z, sd_ratio(supply.count(z), v(z))))
            .collect();
        let k = argmax(&scores);
        let Some(taxi) = supply.pop(k) else {
            break;
        };
        pairs.push(MatchPair {
            taxi,
            supplier: k,
            cluster: cluster.clone(),
            scores,
        });
    }
    MatchList {
        zone: table.zone,
        pairs,
    }
}
