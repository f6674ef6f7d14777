//! Scaled MaxWeight baseline: assign from the candidate queue in
//! `O(z)` with the largest scaled length `X(z) / w_z`.

use crate::error::{Error, Result};
use crate::matching::{argmax, MatchList, MatchPair, SupplySnapshot};
use crate::model::{CityMap, TaxiId, ZoneId, ZoneIx};
use crate::pooling::IndexTable;

#[derive(Debug, Clone, PartialEq)]
pub struct SmwQueues {
    pub queues: SupplySnapshot,
    weights: Vec<f64>,
}

impl SmwQueues {
    pub fn uniform(queues: SupplySnapshot) -> Self {
        let n = queues.num_zones();
        SmwQueues {
            queues,
            weights: vec![1.0; n],
        }
    }

    /// Weights keyed by external zone id; unlisted zones weigh 1.
    pub fn with_weights(queues: SupplySnapshot, weights: &[(ZoneId, f64)], map: &CityMap) -> Result<Self> {
        let mut q = Self::uniform(queues);
        for &(id, w) in weights {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::config("smw_weights", format!("zone {id}: weight must be > 0")));
            }
            q.weights[map.resolve(id)?] = w;
        }
        Ok(q)
    }

    pub fn weight(&self, zone: ZoneIx) -> f64 {
        self.weights[zone]
    }

    pub fn scaled_length(&self, zone: ZoneIx) -> f64 {
        self.queues.count(zone) as f64 / self.weights[zone]
    }
}

/// Chosen taxi, the zone whose queue it came from, and the scaled length
/// of every candidate queue.
pub type SmwChoice = (TaxiId, ZoneIx, Vec<(ZoneIx, f64)>);

/// One assignment for a request or cluster originating in `zone`.
/// Returns the taxi and the queue it came from, or `None` when every
/// candidate queue is empty.
pub fn smw_assign(zone: ZoneIx, queues: &mut SmwQueues, map: &CityMap) -> Option<SmwChoice> {
    let scores: Vec<(ZoneIx, f64)> = map
        .neighborhood(zone)
        .map(|z| (z, queues.scaled_length(z)))
        .collect();
    let k = argmax(&scores);
    queues.queues.pop(k).map(|taxi| (taxi, k, scores))
}

/// Applies [`smw_assign`] to each cluster of the table in order.
pub fn smw_match(table: &IndexTable, queues: &mut SmwQueues, map: &CityMap) -> MatchList {
    let mut pairs = Vec::new();
    for cluster in table.clusters() {
        // supply only shrinks within a cycle, so the first miss ends the zone
        let Some((taxi, supplier, scores)) = smw_assign(table.zone, queues, map) else {
            break;
        };
        pairs.push(MatchPair {
            taxi,
            supplier,
            cluster: cluster.clone(),
            scores,
        });
    }
    MatchList {
        zone: table.zone,
        pairs,
    }
}
