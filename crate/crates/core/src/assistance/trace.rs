//! Episode trace records, one JSON object per line, each carrying `"v":1`.

use crate::env::{Agent, KeyLoc, Scenario, State};
use crate::inference::{BeliefSnapshot, HypothesisSummary};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const TRACE_VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceEvent {
    State {
        t: u32,
        human: [u16; 2],
        robot: [u16; 2],
        /// Door id to `"locked"` or `"unlocked"`.
        doors: BTreeMap<String, String>,
        /// Key id to `"floor"`, `"human"`, `"robot"` or `"used"`.
        keys: BTreeMap<String, String>,
        /// Goal gems not yet collected.
        gems: Vec<String>,
    },
    HumanAction {
        t: u32,
        action: String,
        args: Vec<String>,
    },
    RobotAction {
        t: u32,
        action: String,
        args: Vec<String>,
    },
    Utterance {
        t: u32,
        text: String,
    },
    Belief {
        t: u32,
        goals: BTreeMap<String, f64>,
        hypotheses: Vec<HypothesisSummary>,
    },
    Metric {
        t: u32,
        name: String,
        value: serde_json::Value,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub v: u8,
    #[serde(flatten)]
    pub event: TraceEvent,
}

impl TraceEvent {
    pub fn state(scn: &Scenario, s: &State) -> TraceEvent {
        let doors = scn
            .doors
            .iter()
            .enumerate()
            .map(|(d, door)| {
                let v = if s.door_locked(d) { "locked" } else { "unlocked" };
                (door.id.clone(), v.to_string())
            })
            .collect();
        let keys = scn
            .keys
            .iter()
            .enumerate()
            .map(|(k, key)| {
                let v = match s.key_loc(k) {
                    KeyLoc::Floor => "floor",
                    KeyLoc::Human => "human",
                    KeyLoc::Robot => "robot",
                    KeyLoc::Consumed => "used",
                };
                (key.id.clone(), v.to_string())
            })
            .collect();
        TraceEvent::State {
            t: s.t,
            human: [s.human.x, s.human.y],
            robot: [s.robot.x, s.robot.y],
            doors,
            keys,
            gems: scn
                .goals
                .iter()
                .filter(|&&g| !s.gem_collected(g))
                .map(|&g| scn.gems[g].id.clone())
                .collect(),
        }
    }

    pub fn action(scn: &Scenario, t: u32, agent: Agent, a: crate::env::Action) -> TraceEvent {
        let (name, args) = scn.action_to_wire(agent, a);
        let action = name.to_string();
        match agent {
            Agent::Human => TraceEvent::HumanAction { t, action, args },
            Agent::Robot => TraceEvent::RobotAction { t, action, args },
        }
    }

    pub fn belief(snap: BeliefSnapshot) -> TraceEvent {
        TraceEvent::Belief {
            t: snap.t,
            goals: snap.goals,
            hypotheses: snap.hypotheses,
        }
    }

    pub fn metric(t: u32, name: &str, value: serde_json::Value) -> TraceEvent {
        TraceEvent::Metric {
            t,
            name: name.to_string(),
            value,
        }
    }

    pub fn t(&self) -> u32 {
        match self {
            TraceEvent::State { t, .. }
            | TraceEvent::HumanAction { t, .. }
            | TraceEvent::RobotAction { t, .. }
            | TraceEvent::Utterance { t, .. }
            | TraceEvent::Belief { t, .. }
            | TraceEvent::Metric { t, .. } => *t,
        }
    }

    pub fn record(&self) -> Record {
        Record {
            v: TRACE_VERSION,
            event: self.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.record()).expect("trace events serialize")
    }
}

pub fn to_jsonl(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_json());
        out.push('\n');
    }
    out
}

/// Parse a trace file, rejecting unknown versions.
pub fn parse_jsonl(text: &str) -> Result<Vec<TraceEvent>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let r: Record = serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1))?;
            if r.v != TRACE_VERSION {
                return Err(format!("line {}: unsupported trace version {}", i + 1, r.v));
            }
            Ok(r.event)
        })
        .collect()
}
