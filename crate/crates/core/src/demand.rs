//! Demand learning: a per-zone Markov reward process over `(cycle, zone)`
//! states whose only transition is `(t, z) -> (t + 1, z)`. The reward of a
//! state is its historical request count, so the value function reduces to
//! one backward sweep: `V(t, z) = R(t, z) + γ·V(t + 1, z)`, with
//! `V(T - 1, z) = R(T - 1, z)`.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ZoneId, ZoneIx};

/// A historical request observation: `(cycle index, zone index)`.
pub type DemandEvent = (usize, ZoneIx);

#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    horizon: usize,
    gamma: f64,
    zone_ids: Vec<ZoneId>,
    /// Row-major `horizon x zones`.
    counts: Vec<f64>,
    values: Vec<f64>,
}

/// Instrumentation from a build: how many states the sweep touched.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub state_visits: usize,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            what: "gamma",
            detail: format!("{gamma} not in [0, 1]"),
        })
    }
}

/// Tallies events into a dense `horizon x zones` count matrix.
pub fn count_events(history: &[DemandEvent], horizon: usize, num_zones: usize) -> Result<Vec<f64>> {
    let mut counts = vec![0.0; horizon * num_zones];
    for (i, &(t, z)) in history.iter().enumerate() {
        if t >= horizon || z >= num_zones {
            return Err(Error::OutOfRange {
                what: "demand event",
                detail: format!("event #{i} at (t={t}, zone index {z}) outside {horizon}x{num_zones}"),
            });
        }
        counts[t * num_zones + z] += 1.0;
    }
    Ok(counts)
}

pub fn build_value_table(
    history: &[DemandEvent],
    gamma: f64,
    horizon: usize,
    zone_ids: &[ZoneId],
) -> Result<ValueTable> {
    let counts = count_events(history, horizon, zone_ids.len())?;
    ValueTable::from_counts(counts, gamma, horizon, zone_ids.to_vec())
}

/// Several days of history: counts are averaged per state before the sweep.
pub fn build_value_table_averaged(
    days: &[Vec<DemandEvent>],
    gamma: f64,
    horizon: usize,
    zone_ids: &[ZoneId],
) -> Result<ValueTable> {
    let n = zone_ids.len();
    let mut total = vec![0.0; horizon * n];
    for day in days {
        for (acc, c) in total.iter_mut().zip(count_events(day, horizon, n)?) {
            *acc += c;
        }
    }
    if !days.is_empty() {
        let k = days.len() as f64;
        total.iter_mut().for_each(|c| *c /= k);
    }
    ValueTable::from_counts(total, gamma, horizon, zone_ids.to_vec())
}

impl ValueTable {
    pub fn from_counts(counts: Vec<f64>, gamma: f64, horizon: usize, zone_ids: Vec<ZoneId>) -> Result<Self> {
        Ok(Self::from_counts_with_stats(counts, gamma, horizon, zone_ids)?.0)
    }

    pub fn from_counts_with_stats(
        counts: Vec<f64>,
        gamma: f64,
        horizon: usize,
        zone_ids: Vec<ZoneId>,
    ) -> Result<(Self, BuildStats)> {
        check_gamma(gamma)?;
        let n = zone_ids.len();
        if counts.len() != horizon * n {
            return Err(Error::OutOfRange {
                what: "count matrix",
                detail: format!("{} entries for {horizon}x{n}", counts.len()),
            });
        }
        if let Some(bad) = counts.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::OutOfRange {
                what: "request count",
                detail: format!("{bad}"),
            });
        }

        let mut values = vec![0.0; horizon * n];
        let mut stats = BuildStats::default();
        for t in (0..horizon).rev() {
            for z in 0..n {
                let i = t * n + z;
                values[i] = if t == horizon - 1 {
                    counts[i]
                } else {
                    counts[i] + gamma * values[i + n]
                };
                stats.state_visits += 1;
            }
        }

        Ok((
            ValueTable {
                horizon,
                gamma,
                zone_ids,
                counts,
                values,
            },
            stats,
        ))
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn zone_ids(&self) -> &[ZoneId] {
        &self.zone_ids
    }

    pub fn num_zones(&self) -> usize {
        self.zone_ids.len()
    }

    pub fn lookup(&self, t: usize, z: ZoneIx) -> Result<f64> {
        if t >= self.horizon || z >= self.num_zones() {
            return Err(Error::OutOfRange {
                what: "value lookup",
                detail: format!("(t={t}, zone index {z}) outside {}x{}", self.horizon, self.num_zones()),
            });
        }
        Ok(self.values[t * self.num_zones() + z])
    }

    pub fn count(&self, t: usize, z: ZoneIx) -> Result<f64> {
        self.lookup(t, z)?;
        Ok(self.counts[t * self.num_zones() + z])
    }

    /// All zone values at cycle `t`, clamped into the horizon. Cycles past
    /// the end read the terminal row; an empty table reads as zero demand.
    pub fn row_clamped(&self, t: usize) -> &[f64] {
        if self.horizon == 0 {
            return &[];
        }
        let t = t.min(self.horizon - 1);
        let n = self.num_zones();
        &self.values[t * n..(t + 1) * n]
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "T,num_zones,gamma")?;
        writeln!(w, "{},{},{}", self.horizon, self.num_zones(), self.gamma)?;
        writeln!(w, "t,zone_id,count,value")?;
        let n = self.num_zones();
        for t in 0..self.horizon {
            for (z, id) in self.zone_ids.iter().enumerate() {
                let i = t * n + z;
                writeln!(w, "{t},{id},{},{}", self.counts[i], self.values[i])?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file), path)
    }

    pub fn read_from(r: impl BufRead, path: &Path) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let mut next = |expect: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i + 1, l)),
                Some((i, Err(e))) => Err(Error::parse(path, i + 1, e.to_string())),
                None => Err(Error::parse(path, 0, format!("unexpected end of file, expected {expect}"))),
            }
        };

        let (ln, header) = next("header")?;
        if header.trim() != "T,num_zones,gamma" {
            return Err(Error::parse(path, ln, "expected header `T,num_zones,gamma`"));
        }
        let (ln, dims) = next("dimensions")?;
        let f: Vec<&str> = dims.trim().split(',').collect();
        let bad = |ln| Error::parse(path, ln, "expected `T,num_zones,gamma` values");
        if f.len() != 3 {
            return Err(bad(ln));
        }
        let horizon: usize = f[0].parse().map_err(|_| bad(ln))?;
        let n: usize = f[1].parse().map_err(|_| bad(ln))?;
        let gamma: f64 = f[2].parse().map_err(|_| bad(ln))?;
        let (ln, header) = next("row header")?;
        if header.trim() != "t,zone_id,count,value" {
            return Err(Error::parse(path, ln, "expected header `t,zone_id,count,value`"));
        }

        let mut zone_ids = Vec::with_capacity(n);
        let mut counts = Vec::with_capacity(horizon * n);
        let mut values = Vec::with_capacity(horizon * n);
        for t in 0..horizon {
            for z in 0..n {
                let (ln, row) = next("value row")?;
                let f: Vec<&str> = row.trim().split(',').collect();
                let bad = || Error::parse(path, ln, "expected `t,zone_id,count,value`");
                if f.len() != 4 {
                    return Err(bad());
                }
                let rt: usize = f[0].parse().map_err(|_| bad())?;
                let id = ZoneId(f[1].parse().map_err(|_| bad())?);
                if rt != t {
                    return Err(Error::parse(path, ln, format!("expected t={t}, found {rt}")));
                }
                if t == 0 {
                    zone_ids.push(id);
                } else if zone_ids[z] != id {
                    return Err(Error::parse(path, ln, format!("zone order differs from t=0 at {id}")));
                }
                counts.push(f[2].parse::<f64>().map_err(|_| bad())?);
                values.push(f[3].parse::<f64>().map_err(|_| bad())?);
            }
        }
        if horizon == 0 {
            zone_ids = Vec::new();
        }
        check_gamma(gamma)?;
        Ok(ValueTable {
            horizon,
            gamma,
            zone_ids,
            counts,
            values,
        })
    }
}
