//! Event records and the JSON-lines log format.
//!
//! Every line is one object: `{"schema":1,"step":..,"time":..,"event":<kind>, ...}`
//! with kind-specific fields:
//!
//! | event          | fields                                   |
//! |----------------|------------------------------------------|
//! | `spawn`        | `vehicle`, `kind`, `connection`, `speed` |
//! | `zone`         | `vehicle`, `zone`                        |
//! | `metric_entry` | `vehicle`                                |
//! | `departure`    | `vehicle`, `fuel_ml`                     |
//! | `collision`    | `a`, `b` (ordered ids)                   |
//! | `exit`         | `vehicle`                                |
//! | `control`      | `controller`, `vehicle` (optional), `action` |

use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use super::{VehicleId, VehicleKind};
use crate::geometry::Zone;

pub const EVENT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    Spawn {
        vehicle: VehicleId,
        kind: VehicleKind,
        connection: usize,
        speed: f64,
    },
    Zone {
        vehicle: VehicleId,
        zone: Zone,
    },
    MetricEntry {
        vehicle: VehicleId,
    },
    Departure {
        vehicle: VehicleId,
        fuel_ml: f64,
    },
    Collision {
        a: VehicleId,
        b: VehicleId,
    },
    Exit {
        vehicle: VehicleId,
    },
    Control {
        controller: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vehicle: Option<VehicleId>,
        action: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub step: u64,
    pub time: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Serialize, Deserialize)]
struct Line {
    schema: u32,
    #[serde(flatten)]
    event: Event,
}

pub fn write_jsonl<W: Write>(mut out: W, events: &[Event]) -> std::io::Result<()> {
    for e in events {
        let line = Line { schema: EVENT_SCHEMA_VERSION, event: e.clone() };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<Event>, serde_json::Error> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line.map_err(serde_json::Error::io)?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line)?;
        out.push(parsed.event);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_format() {
        let e = Event {
            step: 3,
            time: 0.6000000000000001,
            kind: EventKind::Collision { a: VehicleId(1), b: VehicleId(4) },
        };
        let mut buf = Vec::new();
        write_jsonl(&mut buf, std::slice::from_ref(&e)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "{\"schema\":1,\"step\":3,\"time\":0.6000000000000001,\"event\":\"collision\",\"a\":1,\"b\":4}\n"
        );
        assert_eq!(read_jsonl(&buf[..]).unwrap(), vec![e]);
    }
}
