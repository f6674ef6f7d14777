//! Append-only simulation event log, one `cycle,kind,fields...` line per
//! event. Lists inside a field are `;`-separated. Floats are written in
//! shortest round-trip form so that parsing a log reproduces the events
//! bit for bit.

use std::fmt::{self, Write as _};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{RequestId, TaxiId, ZoneId};

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Release {
        cycle: usize,
        request: RequestId,
        t: i64,
        origin: ZoneId,
        dest: ZoneId,
        direct_hops: u32,
        base_fare: f64,
    },
    Expire {
        cycle: usize,
        request: RequestId,
    },
    Pool {
        cycle: usize,
        zone: ZoneId,
        cluster: usize,
        bucket: usize,
        members: Vec<RequestId>,
    },
    Match {
        cycle: usize,
        zone: ZoneId,
        taxi: TaxiId,
        supplier: ZoneId,
        issued_at: i64,
        members: Vec<RequestId>,
        scores: Vec<(ZoneId, f64)>,
    },
    Pickup {
        cycle: usize,
        taxi: TaxiId,
        request: RequestId,
        at: i64,
    },
    Dropoff {
        cycle: usize,
        taxi: TaxiId,
        request: RequestId,
        at: i64,
    },
    Relocate {
        cycle: usize,
        taxi: TaxiId,
        from: ZoneId,
        to: ZoneId,
        delta: f64,
    },
    /// End-of-movement record for one taxi in one cycle.
    Taxi {
        cycle: usize,
        taxi: TaxiId,
        zone: ZoneId,
        cost: f64,
        busy: bool,
    },
}

impl Event {
    pub fn cycle(&self) -> usize {
        match self {
            Event::Release { cycle, .. }
            | Event::Expire { cycle, .. }
            | Event::Pool { cycle, .. }
            | Event::Match { cycle, .. }
            | Event::Pickup { cycle, .. }
            | Event::Dropoff { cycle, .. }
            | Event::Relocate { cycle, .. }
            | Event::Taxi { cycle, .. } => *cycle,
        }
    }
}

fn join_ids(ids: &[RequestId]) -> String {
    let mut s = String::new();
    for (i, id) in ids.iter().enumerate() {
        if i > 0 {
            s.push(';');
        }
        write!(s, "{id}").unwrap();
    }
    s
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Release {
                cycle,
                request,
                t,
                origin,
                dest,
                direct_hops,
                base_fare,
            } => write!(f, "{cycle},release,{request},{t},{origin},{dest},{direct_hops},{base_fare}"),
            Event::Expire { cycle, request } => write!(f, "{cycle},expire,{request}"),
            Event::Pool {
                cycle,
                zone,
                cluster,
                bucket,
                members,
            } => write!(f, "{cycle},pool,{zone},{cluster},{bucket},{}", join_ids(members)),
            Event::Match {
                cycle,
                zone,
                taxi,
                supplier,
                issued_at,
                members,
                scores,
            } => {
                let scores: Vec<String> = scores.iter().map(|(z, s)| format!("{z}:{s}")).collect();
                write!(
                    f,
                    "{cycle},match,{zone},{taxi},{supplier},{issued_at},{},{}",
                    join_ids(members),
                    scores.join(";")
                )
            }
            Event::Pickup {
                cycle,
                taxi,
                request,
                at,
            } => write!(f, "{cycle},pickup,{taxi},{request},{at}"),
            Event::Dropoff {
                cycle,
                taxi,
                request,
                at,
            } => write!(f, "{cycle},dropoff,{taxi},{request},{at}"),
            Event::Relocate {
                cycle,
                taxi,
                from,
                to,
                delta,
            } => write!(f, "{cycle},relocate,{taxi},{from},{to},{delta}"),
            Event::Taxi {
                cycle,
                taxi,
                zone,
                cost,
                busy,
            } => write!(f, "{cycle},taxi,{taxi},{zone},{cost},{}", u8::from(*busy)),
        }
    }
}

pub fn write_event_log<'a>(events: impl IntoIterator<Item = &'a Event>, mut w: impl Write) -> std::io::Result<()> {
    for e in events {
        writeln!(w, "{e}")?;
    }
    Ok(())
}

pub fn save_event_log(events: &[Event], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_event_log(events, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

struct Fields<'a> {
    parts: std::str::Split<'a, char>,
    line: usize,
}

impl<'a> Fields<'a> {
    fn raw(&mut self) -> Result<&'a str> {
        self.parts
            .next()
            .ok_or_else(|| Error::parse("event log", self.line, "missing field"))
    }

    fn num<T: std::str::FromStr>(&mut self) -> Result<T> {
        let s = self.raw()?;
        s.parse()
            .map_err(|_| Error::parse("event log", self.line, format!("bad number {s:?}")))
    }

    fn ids(&mut self) -> Result<Vec<RequestId>> {
        let s = self.raw()?;
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split(';')
            .map(|x| {
                x.parse()
                    .map(RequestId)
                    .map_err(|_| Error::parse("event log", self.line, format!("bad id {x:?}")))
            })
            .collect()
    }
}

pub fn parse_event_line(line: &str, line_no: usize) -> Result<Event> {
    let mut f = Fields {
        parts: line.split(','),
        line: line_no,
    };
    let cycle: usize = f.num()?;
    let kind = f.raw()?;
    let ev = match kind {
        "release" => Event::Release {
            cycle,
            request: RequestId(f.num()?),
            t: f.num()?,
            origin: ZoneId(f.num()?),
            dest: ZoneId(f.num()?),
            direct_hops: f.num()?,
            base_fare: f.num()?,
        },
        "expire" => Event::Expire {
            cycle,
            request: RequestId(f.num()?),
        },
        "pool" => Event::Pool {
            cycle,
            zone: ZoneId(f.num()?),
            cluster: f.num()?,
            bucket: f.num()?,
            members: f.ids()?,
        },
        "match" => {
            let zone = ZoneId(f.num()?);
            let taxi = TaxiId(f.num()?);
            let supplier = ZoneId(f.num()?);
            let issued_at = f.num()?;
            let members = f.ids()?;
            let raw = f.raw()?;
            let mut scores = Vec::new();
            for item in raw.split(';').filter(|s| !s.is_empty()) {
                let bad = || Error::parse("event log", line_no, format!("bad score {item:?}"));
                let (z, s) = item.split_once(':').ok_or_else(bad)?;
                scores.push((ZoneId(z.parse().map_err(|_| bad())?), s.parse().map_err(|_| bad())?));
            }
            Event::Match {
                cycle,
                zone,
                taxi,
                supplier,
                issued_at,
                members,
                scores,
            }
        }
        "pickup" => Event::Pickup {
            cycle,
            taxi: TaxiId(f.num()?),
            request: RequestId(f.num()?),
            at: f.num()?,
        },
        "dropoff" => Event::Dropoff {
            cycle,
            taxi: TaxiId(f.num()?),
            request: RequestId(f.num()?),
            at: f.num()?,
        },
        "relocate" => Event::Relocate {
            cycle,
            taxi: TaxiId(f.num()?),
            from: ZoneId(f.num()?),
            to: ZoneId(f.num()?),
            delta: f.num()?,
        },
        "taxi" => Event::Taxi {
            cycle,
            taxi: TaxiId(f.num()?),
            zone: ZoneId(f.num()?),
            cost: f.num()?,
            busy: f.num::<u8>()? != 0,
        },
        other => return Err(Error::parse("event log", line_no, format!("unknown event kind {other:?}"))),
    };
    if f.parts.next().is_some() {
        return Err(Error::parse("event log", line_no, "trailing fields"));
    }
    Ok(ev)
}

pub fn parse_event_log(text: &str) -> Result<Vec<Event>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_event_line(l, i + 1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_event() -> impl Strategy<Value = Event> {
        let ids = prop::collection::vec(any::<u64>().prop_map(RequestId), 0..5);
        prop_oneof![
            (any::<usize>(), any::<u64>(), any::<i64>(), any::<u32>(), any::<u32>(), any::<u32>(), any::<f64>())
                .prop_filter("finite", |v| v.6.is_finite())
                .prop_map(|(cycle, r, t, o, d, h, fare)| Event::Release {
                    cycle,
                    request: RequestId(r),
                    t,
                    origin: ZoneId(o),
                    dest: ZoneId(d),
                    direct_hops: h,
                    base_fare: fare,
                }),
            (any::<usize>(), any::<u32>(), any::<usize>(), any::<usize>(), ids.clone()).prop_map(
                |(cycle, z, c, b, members)| Event::Pool {
                    cycle,
                    zone: ZoneId(z),
                    cluster: c,
                    bucket: b,
                    members,
                }
            ),
            (
                any::<usize>(),
                any::<u32>(),
                any::<u32>(),
                any::<i64>(),
                ids,
                prop::collection::vec((any::<u32>(), -1e9f64..1e9), 0..5)
            )
                .prop_map(|(cycle, z, taxi, at, members, scores)| Event::Match {
                    cycle,
                    zone: ZoneId(z),
                    taxi: TaxiId(taxi),
                    supplier: ZoneId(z),
                    issued_at: at,
                    members,
                    scores: scores.into_iter().map(|(z, s)| (ZoneId(z), s)).collect(),
                }),
            (any::<usize>(), any::<u32>(), any::<u32>(), -1e6f64..1e6, any::<bool>()).prop_map(
                |(cycle, taxi, z, cost, busy)| Event::Taxi {
                    cycle,
                    taxi: TaxiId(taxi),
                    zone: ZoneId(z),
                    cost,
                    busy,
                }
            ),
            (any::<usize>(), any::<u32>(), any::<u32>(), any::<u32>(), -1e6f64..1e6).prop_map(
                |(cycle, taxi, a, b, delta)| Event::Relocate {
                    cycle,
                    taxi: TaxiId(taxi),
                    from: ZoneId(a),
                    to: ZoneId(b),
                    delta,
                }
            ),
        ]
    }

    proptest! {
        #[test]
        fn lines_parse_back_exactly(events in prop::collection::vec(arb_event(), 0..20)) {
            let mut buf = Vec::new();
            write_event_log(&events, &mut buf).unwrap();
            let back = parse_event_log(std::str::from_utf8(&buf).unwrap()).unwrap();
            prop_assert_eq!(back, events);
        }
    }

    #[test]
    fn line_shapes() {
        let e = Event::Pickup {
            cycle: 3,
            taxi: TaxiId(7),
            request: RequestId(11),
            at: 540,
        };
        assert_eq!(e.to_string(), "3,pickup,7,11,540");
        let e = Event::Expire {
            cycle: 7,
            request: RequestId(0),
        };
        assert_eq!(parse_event_line(&e.to_string(), 1).unwrap(), e);
        assert!(parse_event_line("1,teleport,3", 9).is_err());
        assert!(parse_event_line("1,expire,3,4", 9).is_err());
    }
}
