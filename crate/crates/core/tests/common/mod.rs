//! Shared helpers for integration tests: random small maps and an exhaustive
//! optimal-value oracle.
#![allow(dead_code)]

use clips_core::env::{Action, Agent, CostProfile, Fingerprint, Scenario, State};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

pub fn parse(v: serde_json::Value) -> Scenario {
    Scenario::parse(&v.to_string()).unwrap()
}

/// A random map of at most `max_side`×`max_side` cells (border walls
/// included) with one or two goal gems and up to two keys and doors.
pub fn random_scenario(rng: &mut impl RngCore, max_side: u16) -> Scenario {
    loop {
        let w = rng.random_range(5..=max_side);
        let h = rng.random_range(4..=max_side);
        let mut grid = Vec::new();
        let mut free = Vec::new();
        for y in 0..h {
            let mut row = String::new();
            for x in 0..w {
                let border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
                if border || rng.random_bool(0.15) {
                    row.push('#');
                } else {
                    row.push('.');
                    free.push([x, y]);
                }
            }
            grid.push(row);
        }
        let gems = rng.random_range(1..=2usize);
        let keys = rng.random_range(0..=2usize);
        let doors = rng.random_range(0..=2usize);
        if free.len() < 2 + gems + keys + doors + 2 {
            continue;
        }
        free.shuffle(rng);
        let mut cells = free.into_iter();
        let mut items = serde_json::Map::new();
        let mut legend = serde_json::Map::new();
        items.insert("h".into(), serde_json::json!(cells.next().unwrap()));
        items.insert("r".into(), serde_json::json!(cells.next().unwrap()));
        let colors = ["red", "blue"];
        let mut goals = Vec::new();
        for (prefix, kind, n) in [("g", "gem", gems), ("k", "key", keys), ("D", "door", doors)] {
            for i in 1..=n {
                let id = format!("{prefix}{i}");
                let color = colors[rng.random_range(0..colors.len())];
                legend.insert(id.clone(), serde_json::json!({"kind": kind, "color": color}));
                items.insert(id.clone(), serde_json::json!(cells.next().unwrap()));
                if kind == "gem" {
                    goals.push(id);
                }
            }
        }
        let text = serde_json::json!({
            "name": "random", "grid": grid, "legend": legend, "items": items,
            "goals": goals, "true_goal": "g1", "cost_profiles": [0, 1, 2, 3]
        });
        if let Ok(scn) = Scenario::parse(&text.to_string()) {
            return scn;
        }
    }
}

/// A random map split by a wall column with one or two doors in it, so that
/// the goal gem usually lies behind a locked door.
pub fn random_locked_scenario(rng: &mut impl RngCore, max_side: u16) -> Scenario {
    loop {
        let w = rng.random_range(6..=max_side);
        let h = rng.random_range(4..=max_side);
        let split = rng.random_range(2..w - 2);
        let mut walls = vec![vec![false; w as usize]; h as usize];
        for y in 0..h {
            for x in 0..w {
                let border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
                walls[y as usize][x as usize] = border || x == split || rng.random_bool(0.1);
            }
        }
        let door_rows: Vec<u16> = {
            let mut rows: Vec<u16> = (1..h - 1).collect();
            rows.shuffle(rng);
            rows.truncate(rng.random_range(1..=2));
            rows
        };
        let colors = ["red", "blue"];
        let mut legend = serde_json::Map::new();
        let mut items = serde_json::Map::new();
        for (i, &y) in door_rows.iter().enumerate() {
            walls[y as usize][split as usize] = false;
            let id = format!("D{}", i + 1);
            legend.insert(
                id.clone(),
                serde_json::json!({"kind": "door", "color": colors[rng.random_range(0..2)]}),
            );
            items.insert(id, serde_json::json!([split, y]));
        }
        let free = |left: bool| -> Vec<[u16; 2]> {
            let mut out = Vec::new();
            for y in 1..h - 1 {
                for x in 1..w - 1 {
                    if !walls[y as usize][x as usize] && x != split && (x < split) == left {
                        out.push([x, y]);
                    }
                }
            }
            out
        };
        let (mut left, mut right) = (free(true), free(false));
        let keys = rng.random_range(1..=2usize);
        if left.len() < 2 + keys || right.is_empty() {
            continue;
        }
        left.shuffle(rng);
        right.shuffle(rng);
        items.insert("h".into(), serde_json::json!(left[0]));
        items.insert("r".into(), serde_json::json!(left[1]));
        for i in 0..keys {
            let id = format!("k{}", i + 1);
            legend.insert(
                id.clone(),
                serde_json::json!({"kind": "key", "color": colors[rng.random_range(0..2)]}),
            );
            items.insert(id, serde_json::json!(left[2 + i]));
        }
        legend.insert("g1".into(), serde_json::json!({"kind": "gem", "color": "red"}));
        items.insert("g1".into(), serde_json::json!(right[0]));
        let grid: Vec<String> = walls
            .iter()
            .map(|row| row.iter().map(|&w| if w { '#' } else { '.' }).collect())
            .collect();
        let text = serde_json::json!({
            "name": "random-locked", "grid": grid, "legend": legend, "items": items,
            "goals": ["g1"], "true_goal": "g1"
        });
        if let Ok(scn) = Scenario::parse(&text.to_string()) {
            return scn;
        }
    }
}

/// Exact optimal cost-to-go (in cost tenths) for every state reachable from
/// `start`, treating states where `gem` is collected as terminal. States that
/// cannot reach the goal are absent.
pub struct ValueOracle {
    pub values: HashMap<Fingerprint, u64>,
    /// Every state reachable from the start, goal states included.
    pub states: Vec<State>,
}

impl ValueOracle {
    pub fn new(scn: &Scenario, profile: &CostProfile, gem: usize, start: &State) -> ValueOracle {
        let mut index: HashMap<Fingerprint, usize> = HashMap::new();
        let mut states = vec![*start];
        index.insert(start.fingerprint(), 0);
        let mut preds: Vec<Vec<(usize, u64)>> = vec![Vec::new()];
        let mut i = 0;
        while i < states.len() {
            let s = states[i];
            if !s.gem_collected(gem) {
                for a in scn.legal_actions(&s, s.turn) {
                    let n = scn.apply(&s, a);
                    let c = profile.action_units(s.turn, a) as u64;
                    let j = *index.entry(n.fingerprint()).or_insert_with(|| {
                        states.push(n);
                        preds.push(Vec::new());
                        states.len() - 1
                    });
                    preds[j].push((i, c));
                }
            }
            i += 1;
        }
        let mut dist = vec![u64::MAX; states.len()];
        let mut heap = BinaryHeap::new();
        for (j, s) in states.iter().enumerate() {
            if s.gem_collected(gem) {
                dist[j] = 0;
                heap.push(Reverse((0u64, j)));
            }
        }
        while let Some(Reverse((d, j))) = heap.pop() {
            if d > dist[j] {
                continue;
            }
            for &(p, c) in &preds[j] {
                if d + c < dist[p] {
                    dist[p] = d + c;
                    heap.push(Reverse((d + c, p)));
                }
            }
        }
        let values = states
            .iter()
            .zip(&dist)
            .filter(|(_, d)| **d != u64::MAX)
            .map(|(s, d)| (s.fingerprint(), *d))
            .collect();
        ValueOracle { values, states }
    }

    /// Optimal value in game units, `f64::INFINITY` for dead ends.
    pub fn value(&self, s: &State) -> f64 {
        self.values
            .get(&s.fingerprint())
            .map_or(f64::INFINITY, |&v| v as f64 / 10.0)
    }
}

/// Cost of a sequence of actions in game units.
pub fn path_cost(profile: &CostProfile, steps: &[(Agent, Action)]) -> f64 {
    steps
        .iter()
        .map(|(ag, a)| profile.action_units(*ag, *a) as u64)
        .sum::<u64>() as f64
        / 10.0
}
