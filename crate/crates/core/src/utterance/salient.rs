//! Salient actions: key pick-ups, unlocks and handovers, each tagged with the
//! colors of the objects it touches.

use super::command::{Arg, CmdAction, Verb, Who};
use crate::env::{Action, Agent, Color, ItemKind, ItemRef, KeyLoc, Pos, Scenario, State};
use std::collections::VecDeque;

/// One ground salient action with its `iscolor` annotations.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Salient {
    pub action: CmdAction,
    pub colors: Vec<(Arg, Color)>,
}

impl Salient {
    pub fn from_action(scn: &Scenario, agent: Agent, a: Action) -> Option<Salient> {
        let key_arg = |k: u8| Arg::Obj(ItemKind::Key, k);
        let (verb, key, door) = match a {
            Action::PickUp(ItemRef::Key(k)) => (Verb::PickUp, k, None),
            Action::Handover { key } => (Verb::Handover, key, None),
            Action::Unlock { door, key } => (Verb::Unlock, key, Some(door)),
            _ => return None,
        };
        let mut colors = vec![(key_arg(key), scn.key_color(key as usize))];
        if let Some(d) = door {
            colors.push((Arg::Obj(ItemKind::Door, d), scn.door_color(d as usize)));
        }
        Some(Salient {
            action: CmdAction {
                verb,
                actor: Who::of(agent),
                key: key_arg(key),
                door: door.map(|d| Arg::Obj(ItemKind::Door, d)),
            },
            colors,
        })
    }

    pub fn key(&self) -> u8 {
        match self.action.key {
            Arg::Obj(_, k) | Arg::Var(_, k) => k,
        }
    }
}

/// Filter a rollout down to salient actions, keeping first occurrences in order.
pub fn extract_salient_actions(scn: &Scenario, rollout: &[(Agent, Action)]) -> Vec<Salient> {
    let mut out: Vec<Salient> = Vec::new();
    for &(agent, a) in rollout {
        if let Some(s) = Salient::from_action(scn, agent, a) {
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }
    out
}

/// Every salient action the robot could take on its own from `s`: pick up a
/// key it can reach, hand over a key it holds or can reach, unlock a door it
/// can reach with a matching key. Doors the robot can open count as passable
/// when computing reach. Order: pick-ups, unlocks, handovers, by item index.
pub fn robot_salient_actions(scn: &Scenario, s: &State) -> Vec<Salient> {
    let mut unlocked = !s.locked;
    let obtainable = |region: &[bool]| -> Vec<usize> {
        (0..scn.keys.len())
            .filter(|&k| match s.key_loc(k) {
                KeyLoc::Robot => true,
                KeyLoc::Floor => region[scn.cell_index(scn.keys[k].pos)],
                _ => false,
            })
            .collect()
    };
    let (region, keys, openable) = loop {
        let region = reach(scn, s.robot, unlocked);
        let keys = obtainable(&region);
        let openable: Vec<usize> = (0..scn.doors.len())
            .filter(|&d| {
                s.door_locked(d)
                    && scn.open_neighbors(scn.doors[d].pos).any(|p| region[scn.cell_index(p)])
                    && keys.iter().any(|&k| scn.keys[k].color == scn.doors[d].color)
            })
            .collect();
        let mut grown = unlocked;
        for &d in &openable {
            grown |= 1 << d;
        }
        if grown == unlocked {
            break (region, keys, openable);
        }
        unlocked = grown;
    };
    let mut out = Vec::new();
    for k in 0..scn.keys.len() {
        if s.key_loc(k) == KeyLoc::Floor && region[scn.cell_index(scn.keys[k].pos)] {
            out.extend(Salient::from_action(
                scn,
                Agent::Robot,
                Action::PickUp(ItemRef::Key(k as u8)),
            ));
        }
    }
    for &d in &openable {
        for &k in &keys {
            if scn.keys[k].color == scn.doors[d].color {
                let a = Action::Unlock {
                    door: d as u8,
                    key: k as u8,
                };
                out.extend(Salient::from_action(scn, Agent::Robot, a));
            }
        }
    }
    for &k in &keys {
        out.extend(Salient::from_action(
            scn,
            Agent::Robot,
            Action::Handover { key: k as u8 },
        ));
    }
    out
}

/// Cells reachable from `from` when exactly the doors in `unlocked` are open.
fn reach(scn: &Scenario, from: Pos, unlocked: u32) -> Vec<bool> {
    let mut seen = vec![false; scn.num_cells()];
    let mut queue = VecDeque::from([from]);
    seen[scn.cell_index(from)] = true;
    while let Some(p) = queue.pop_front() {
        for q in scn.open_neighbors(p) {
            let i = scn.cell_index(q);
            let open = scn.door_at(q).is_none_or(|d| unlocked & (1 << d) != 0);
            if !seen[i] && open {
                seen[i] = true;
                queue.push_back(q);
            }
        }
    }
    seen
}
