//! Idle-taxi relocation.
//!
//! Each cycle the zone with the most unserved riders becomes the base of a
//! breadth-first propagation, `V'(z) = V(z) + α·V'(parent(z))`, with
//! `V'(base) = V(base)`. An idle taxi then looks at `V'` over its own zone
//! and the adjacent ones and moves one hop when the best neighbor beats its
//! current zone by at least `φ_m`.

use std::collections::VecDeque;

use crate::demand::ValueTable;
use crate::error::{Error, Result};
use crate::model::{CityMap, TaxiState, ZoneIx};

/// Zone with the most leftover riders; ties and the all-zero case resolve
/// to the lowest zone.
pub fn find_base_zone(leftover: &[usize]) -> ZoneIx {
    let mut best = 0;
    for (z, &c) in leftover.iter().enumerate() {
        if c > leftover[best] {
            best = z;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagatedValues {
    pub values: Vec<f64>,
    pub base: ZoneIx,
    pub alpha: f64,
    /// BFS parent per zone; `None` for the base.
    pub parent: Vec<Option<ZoneIx>>,
}

impl PropagatedValues {
    pub fn get(&self, z: ZoneIx) -> f64 {
        self.values[z]
    }
}

pub fn propagate(values: &ValueTable, t: usize, base: ZoneIx, alpha: f64, map: &CityMap) -> Result<PropagatedValues> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::OutOfRange {
            what: "alpha",
            detail: format!("{alpha} not in [0, 1]"),
        });
    }
    let n = map.len();
    if base >= n {
        return Err(Error::OutOfRange {
            what: "base zone",
            detail: format!("{base} >= {n}"),
        });
    }
    let row = values.row_clamped(t);
    let v = |z: ZoneIx| row.get(z).copied().unwrap_or(0.0);

    let mut out = vec![0.0; n];
    let mut parent = vec![None; n];
    let mut visited = vec![false; n];
    out[base] = v(base);
    visited[base] = true;
    let mut queue = VecDeque::from([base]);
    while let Some(q) = queue.pop_front() {
        for &z in map.adjacent(q) {
            if !visited[z] {
                out[z] = v(z) + alpha * out[q];
                parent[z] = Some(q);
                visited[z] = true;
                queue.push_back(z);
            }
        }
    }
    if let Some(z) = visited.iter().position(|s| !s) {
        return Err(Error::InvalidMap(format!(
            "zone {} unreachable from {}",
            map.id_of(z),
            map.id_of(base)
        )));
    }
    Ok(PropagatedValues {
        values: out,
        base,
        alpha,
        parent,
    })
}

/// Greedy idle movement: the zone the taxi should head to next.
pub fn gim_decide(taxi: &TaxiState, vprime: &PropagatedValues, phi_m: f64, map: &CityMap) -> Result<ZoneIx> {
    if !taxi.is_idle() {
        return Err(Error::Contract(format!("taxi {} is not idle", taxi.id)));
    }
    let here = taxi.zone;
    let mut best = here;
    for &z in map.adjacent(here) {
        if vprime.get(z) > vprime.get(best) {
            best = z;
        }
    }
    if best != here && vprime.get(best) - vprime.get(here) >= phi_m {
        Ok(best)
    } else {
        Ok(here)
    }
}
