//! The Doors, Keys & Gems environment.
//!
//! Two agents share a grid and take turns: the human principal moves on odd
//! steps, the robot assistant on even steps. Keys open doors of the same color
//! and are consumed by use; only the human can collect gems.

mod cost;
mod rules;
mod scenario;

pub use cost::{ActionClass, CostProfile, COST_SCALE};
pub use rules::RuleError;
pub use scenario::{parse_scenario, LegendEntry, ScenarioError, ScenarioFile, ScriptEntry, ScriptEvent, ScriptKind};

use serde::{Deserialize, Serialize};
use std::fmt;

/// Grid cell, `x` is the column and `y` the row (row 0 at the top).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Pos {
    pub x: u16,
    pub y: u16,
}

impl Pos {
    pub const fn new(x: u16, y: u16) -> Self {
        Pos { x, y }
    }

    pub fn manhattan(self, other: Pos) -> u32 {
        (self.x.abs_diff(other.x) + self.y.abs_diff(other.y)) as u32
    }

    /// Orthogonally adjacent (distance exactly one).
    pub fn adjacent(self, other: Pos) -> bool {
        self.manhattan(other) == 1
    }
}

impl Serialize for Pos {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y].serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Pos {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let [x, y] = <[u16; 2]>::deserialize(de)?;
        Ok(Pos { x, y })
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agent {
    Human,
    Robot,
}

impl Agent {
    pub fn other(self) -> Agent {
        match self {
            Agent::Human => Agent::Robot,
            Agent::Robot => Agent::Human,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Agent::Human => "human",
            Agent::Robot => "robot",
        }
    }
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Red,
    Blue,
    Green,
    Yellow,
}

impl Color {
    pub const ALL: [Color; 4] = [Color::Red, Color::Blue, Color::Green, Color::Yellow];

    pub fn as_str(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Blue => "blue",
            Color::Green => "green",
            Color::Yellow => "yellow",
        }
    }

    pub fn parse(s: &str) -> Option<Color> {
        Color::ALL.into_iter().find(|c| c.as_str() == s)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemKind {
    Key,
    Door,
    Gem,
}

impl ItemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ItemKind::Key => "key",
            ItemKind::Door => "door",
            ItemKind::Gem => "gem",
        }
    }

    pub fn parse(s: &str) -> Option<ItemKind> {
        match s {
            "key" => Some(ItemKind::Key),
            "door" => Some(ItemKind::Door),
            "gem" => Some(ItemKind::Gem),
            _ => None,
        }
    }
}

impl fmt::Display for ItemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub kind: ItemKind,
    pub color: Color,
    pub pos: Pos,
}

/// Reference to a pick-up-able item by index into the scenario's sorted lists.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ItemRef {
    Key(u8),
    Gem(u8),
}

/// Action of the acting agent. Variant order is the tie-break order used by
/// every argmin in the crate; item indices follow lexicographic id order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    PickUp(ItemRef),
    Unlock {
        door: u8,
        key: u8,
    },
    /// The acting agent gives `key` to the other agent.
    Handover {
        key: u8,
    },
    Wait,
}

impl Action {
    pub const MOVES: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn class(self) -> ActionClass {
        match self {
            Action::Up | Action::Down | Action::Left | Action::Right => ActionClass::Move,
            Action::PickUp(_) => ActionClass::PickUp,
            Action::Unlock { .. } => ActionClass::Unlock,
            Action::Handover { .. } => ActionClass::Handover,
            Action::Wait => ActionClass::Wait,
        }
    }

    pub fn is_move(self) -> bool {
        self.class() == ActionClass::Move
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
            Action::PickUp(_) => "pickup",
            Action::Unlock { .. } => "unlock",
            Action::Handover { .. } => "handover",
            Action::Wait => "wait",
        }
    }

    pub(crate) fn delta(self) -> Option<(i32, i32)> {
        match self {
            Action::Up => Some((0, -1)),
            Action::Down => Some((0, 1)),
            Action::Left => Some((-1, 0)),
            Action::Right => Some((1, 0)),
            _ => None,
        }
    }
}

/// Where a key currently is. Floor keys never move, so the cell is implied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KeyLoc {
    Floor,
    Human,
    Robot,
    Consumed,
}

impl KeyLoc {
    fn bits(self) -> u64 {
        match self {
            KeyLoc::Floor => 0,
            KeyLoc::Human => 1,
            KeyLoc::Robot => 2,
            KeyLoc::Consumed => 3,
        }
    }

    fn from_bits(b: u64) -> KeyLoc {
        match b & 3 {
            0 => KeyLoc::Floor,
            1 => KeyLoc::Human,
            2 => KeyLoc::Robot,
            _ => KeyLoc::Consumed,
        }
    }

    pub fn held_by(agent: Agent) -> KeyLoc {
        match agent {
            Agent::Human => KeyLoc::Human,
            Agent::Robot => KeyLoc::Robot,
        }
    }
}

/// Full game configuration at one step. Small and `Copy`: door locks, key
/// locations and collected gems are packed bit sets indexed like the
/// scenario's item lists.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct State {
    pub t: u32,
    pub turn: Agent,
    pub human: Pos,
    pub robot: Pos,
    pub locked: u32,
    pub keys: u64,
    pub gems: u32,
}

/// State identity for value tables: everything except the step counter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint {
    pub human: Pos,
    pub robot: Pos,
    pub locked: u32,
    pub keys: u64,
    pub gems: u32,
    pub turn: Agent,
}

impl State {
    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint {
            human: self.human,
            robot: self.robot,
            locked: self.locked,
            keys: self.keys,
            gems: self.gems,
            turn: self.turn,
        }
    }

    pub fn pos(&self, agent: Agent) -> Pos {
        match agent {
            Agent::Human => self.human,
            Agent::Robot => self.robot,
        }
    }

    pub fn key_loc(&self, key: usize) -> KeyLoc {
        KeyLoc::from_bits(self.keys >> (2 * key))
    }

    pub fn set_key_loc(&mut self, key: usize, loc: KeyLoc) {
        self.keys = (self.keys & !(3u64 << (2 * key))) | (loc.bits() << (2 * key));
    }

    pub fn door_locked(&self, door: usize) -> bool {
        self.locked & (1 << door) != 0
    }

    pub fn gem_collected(&self, gem: usize) -> bool {
        self.gems & (1 << gem) != 0
    }

    pub fn holds(&self, agent: Agent, key: usize) -> bool {
        self.key_loc(key) == KeyLoc::held_by(agent)
    }
}

/// A goal hypothesis: which gem the principal wants and how they weigh costs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GoalSpec {
    /// Index into `Scenario::gems`.
    pub gem: usize,
    pub profile: u8,
}

/// A parsed and validated game definition. Items are kept sorted by id within
/// each kind so that index order equals lexicographic id order.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub width: u16,
    pub height: u16,
    walls: Vec<bool>,
    pub human_start: Pos,
    pub robot_start: Pos,
    pub keys: Vec<Item>,
    pub doors: Vec<Item>,
    pub gems: Vec<Item>,
    /// Gem indices eligible as goals, in file order.
    pub goals: Vec<usize>,
    pub true_goal: usize,
    pub true_profile: u8,
    pub cost_profiles: Vec<u8>,
    pub max_steps: u32,
    pub script: Vec<ScriptEvent>,
    door_at: Vec<Option<u8>>,
}

pub const MAX_ITEMS_PER_KIND: usize = 32;

impl Scenario {
    pub fn cell_index(&self, p: Pos) -> usize {
        p.y as usize * self.width as usize + p.x as usize
    }

    pub fn cell_pos(&self, idx: usize) -> Pos {
        Pos::new((idx % self.width as usize) as u16, (idx / self.width as usize) as u16)
    }

    pub fn num_cells(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn in_bounds(&self, x: i32, y: i32) -> bool {
        x >= 0 && y >= 0 && x < self.width as i32 && y < self.height as i32
    }

    pub fn is_wall(&self, p: Pos) -> bool {
        self.walls[self.cell_index(p)]
    }

    pub fn door_at(&self, p: Pos) -> Option<usize> {
        self.door_at[self.cell_index(p)].map(usize::from)
    }

    pub fn step(&self, p: Pos, a: Action) -> Option<Pos> {
        let (dx, dy) = a.delta()?;
        let (x, y) = (p.x as i32 + dx, p.y as i32 + dy);
        if !self.in_bounds(x, y) {
            return None;
        }
        let q = Pos::new(x as u16, y as u16);
        (!self.is_wall(q)).then_some(q)
    }

    /// Non-wall orthogonal neighbours, ignoring doors.
    pub fn open_neighbors(&self, p: Pos) -> impl Iterator<Item = Pos> + '_ {
        Action::MOVES.into_iter().filter_map(move |a| self.step(p, a))
    }

    pub fn key_index(&self, id: &str) -> Option<usize> {
        self.keys.iter().position(|k| k.id == id)
    }

    pub fn door_index(&self, id: &str) -> Option<usize> {
        self.doors.iter().position(|k| k.id == id)
    }

    pub fn gem_index(&self, id: &str) -> Option<usize> {
        self.gems.iter().position(|k| k.id == id)
    }

    pub fn item(&self, kind: ItemKind, idx: usize) -> &Item {
        match kind {
            ItemKind::Key => &self.keys[idx],
            ItemKind::Door => &self.doors[idx],
            ItemKind::Gem => &self.gems[idx],
        }
    }

    pub fn items(&self, kind: ItemKind) -> &[Item] {
        match kind {
            ItemKind::Key => &self.keys,
            ItemKind::Door => &self.doors,
            ItemKind::Gem => &self.gems,
        }
    }

    /// Find any item by id, returning its kind and index.
    pub fn find_item(&self, id: &str) -> Option<(ItemKind, usize)> {
        [ItemKind::Key, ItemKind::Door, ItemKind::Gem]
            .into_iter()
            .find_map(|k| self.items(k).iter().position(|i| i.id == id).map(|i| (k, i)))
    }

    pub fn is_goal_gem(&self, gem: usize) -> bool {
        self.goals.contains(&gem)
    }

    pub fn true_goal_spec(&self) -> GoalSpec {
        GoalSpec {
            gem: self.true_goal,
            profile: self.true_profile,
        }
    }

    /// Every (goal gem, cost profile) pair, goal-major.
    pub fn goal_specs(&self) -> Vec<GoalSpec> {
        self.goals
            .iter()
            .flat_map(|&gem| self.cost_profiles.iter().map(move |&profile| GoalSpec { gem, profile }))
            .collect()
    }

    pub fn initial_state(&self) -> State {
        State {
            t: 1,
            turn: Agent::Human,
            human: self.human_start,
            robot: self.robot_start,
            locked: if self.doors.is_empty() {
                0
            } else {
                u32::MAX >> (32 - self.doors.len())
            },
            keys: 0,
            gems: 0,
        }
    }

    pub fn is_goal(&self, s: &State, g: GoalSpec) -> bool {
        s.gem_collected(g.gem)
    }

    /// Human-readable action label using item ids, e.g. `unlock d1 k1`.
    pub fn describe(&self, agent: Agent, a: Action) -> String {
        let (name, args) = self.action_to_wire(agent, a);
        if args.is_empty() {
            name.to_string()
        } else {
            format!("{} {}", name, args.join(" "))
        }
    }

    /// Wire form: action name plus item/agent id arguments.
    pub fn action_to_wire(&self, agent: Agent, a: Action) -> (&'static str, Vec<String>) {
        let args = match a {
            Action::PickUp(ItemRef::Key(k)) => vec![self.keys[k as usize].id.clone()],
            Action::PickUp(ItemRef::Gem(g)) => vec![self.gems[g as usize].id.clone()],
            Action::Unlock { door, key } => {
                vec![self.doors[door as usize].id.clone(), self.keys[key as usize].id.clone()]
            }
            Action::Handover { key } => vec![
                agent.as_str().to_string(),
                agent.other().as_str().to_string(),
                self.keys[key as usize].id.clone(),
            ],
            _ => Vec::new(),
        };
        (a.name(), args)
    }

    /// Inverse of [`Scenario::action_to_wire`] for an action taken by `agent`.
    pub fn action_from_wire(&self, agent: Agent, name: &str, args: &[String]) -> Result<Action, RuleError> {
        let bad = |msg: String| RuleError::Malformed(msg);
        let key = |id: &str| {
            self.key_index(id)
                .map(|k| k as u8)
                .ok_or_else(|| bad(format!("unknown key '{id}'")))
        };
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(bad(format!("'{name}' takes {n} argument(s), got {}", args.len())))
            }
        };
        match name {
            "up" | "down" | "left" | "right" | "wait" => {
                arity(0)?;
                Ok(match name {
                    "up" => Action::Up,
                    "down" => Action::Down,
                    "left" => Action::Left,
                    "right" => Action::Right,
                    _ => Action::Wait,
                })
            }
            "pickup" => {
                arity(1)?;
                match self.find_item(&args[0]) {
                    Some((ItemKind::Key, k)) => Ok(Action::PickUp(ItemRef::Key(k as u8))),
                    Some((ItemKind::Gem, g)) => Ok(Action::PickUp(ItemRef::Gem(g as u8))),
                    _ => Err(bad(format!("'{}' is not a key or gem", args[0]))),
                }
            }
            "unlock" => {
                arity(2)?;
                let door = self
                    .door_index(&args[0])
                    .ok_or_else(|| bad(format!("unknown door '{}'", args[0])))?;
                Ok(Action::Unlock {
                    door: door as u8,
                    key: key(&args[1])?,
                })
            }
            "handover" => {
                let id = match args.len() {
                    1 => &args[0],
                    3 => {
                        if args[0] != agent.as_str() || args[1] != agent.other().as_str() {
                            return Err(bad(format!(
                                "handover by {agent} must be '{agent} {} <key>'",
                                agent.other()
                            )));
                        }
                        &args[2]
                    }
                    n => return Err(bad(format!("'handover' takes 1 or 3 arguments, got {n}"))),
                };
                Ok(Action::Handover { key: key(id)? })
            }
            other => Err(bad(format!("unknown action '{other}'"))),
        }
    }

    /// Parse a textual action such as `"pickup k1"` or `"right"`.
    pub fn parse_action(&self, agent: Agent, text: &str) -> Result<Action, RuleError> {
        let mut parts = text.split_whitespace();
        let name = parts.next().unwrap_or("").to_ascii_lowercase();
        let args: Vec<String> = parts.map(str::to_string).collect();
        self.action_from_wire(agent, &name, &args)
    }

    pub fn key_color(&self, key: usize) -> Color {
        self.keys[key].color
    }

    pub fn door_color(&self, door: usize) -> Color {
        self.doors[door].color
    }
}
