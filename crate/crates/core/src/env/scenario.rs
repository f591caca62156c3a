//! Scenario file format: a JSON object with a tokenized grid, a legend for
//! item tokens, goal declarations and an optional scripted prefix.

use super::{Action, Agent, Color, CostProfile, Item, ItemKind, Pos, Scenario, State, MAX_ITEMS_PER_KIND};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}, column {column}: {message}")]
pub struct ScenarioError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScriptKind {
    Action(Action),
    Utterance(String),
}

/// A scripted principal event at step `t` (always a human step).
#[derive(Clone, Debug, PartialEq)]
pub struct ScriptEvent {
    pub t: u32,
    pub kind: ScriptKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegendEntry {
    pub kind: String,
    pub color: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub t: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterance: Option<String>,
}

fn default_profiles() -> Vec<u8> {
    vec![0, 1, 2, 3]
}

fn default_max_steps() -> u32 {
    100
}

fn is_zero(v: &u8) -> bool {
    *v == 0
}

/// On-disk representation, convertible to and from [`Scenario`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub grid: Vec<String>,
    #[serde(default)]
    pub legend: BTreeMap<String, LegendEntry>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub items: BTreeMap<String, [u16; 2]>,
    pub goals: Vec<String>,
    pub true_goal: String,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub true_profile: u8,
    #[serde(default = "default_profiles")]
    pub cost_profiles: Vec<u8>,
    #[serde(default = "default_max_steps")]
    pub max_steps: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub script: Vec<ScriptEntry>,
}

/// 1-based line/column of the first occurrence of `needle` in `text`.
fn locate(text: &str, needle: &str) -> (usize, usize) {
    match text.find(needle) {
        Some(off) => {
            let before = &text[..off];
            let line = before.matches('\n').count() + 1;
            let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
            (line, column)
        }
        None => (0, 0),
    }
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn err_at(&self, needle: &str, message: impl Into<String>) -> ScenarioError {
        let (line, column) = locate(self.text, needle);
        ScenarioError {
            line,
            column,
            message: message.into(),
        }
    }

    fn quoted(&self, id: &str, message: impl Into<String>) -> ScenarioError {
        self.err_at(&format!("\"{id}\""), message)
    }
}

enum Token {
    Wall,
    Floor,
    Human,
    Robot,
    Item(String),
}

fn tokenize(row: &str, legend: &[&str]) -> Result<Vec<Token>, usize> {
    let chars: Vec<char> = row.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let rest: String = chars[i..].iter().collect();
        if let Some(tok) = legend.iter().find(|t| rest.starts_with(**t)) {
            out.push(Token::Item(tok.to_string()));
            i += tok.chars().count();
            continue;
        }
        out.push(match chars[i] {
            '#' => Token::Wall,
            '.' => Token::Floor,
            'h' => Token::Human,
            'r' => Token::Robot,
            _ => return Err(i),
        });
        i += 1;
    }
    Ok(out)
}

/// Parse and validate scenario text.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    Scenario::parse(text)
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        file.build_with_source(text)
    }

    pub fn to_file(&self) -> ScenarioFile {
        let mut legend = BTreeMap::new();
        let mut items = BTreeMap::new();
        let mut cell_token: BTreeMap<Pos, String> = BTreeMap::new();
        let all = self.keys.iter().chain(&self.doors).chain(&self.gems);
        for item in all {
            legend.insert(
                item.id.clone(),
                LegendEntry {
                    kind: item.kind.as_str().into(),
                    color: item.color.as_str().into(),
                },
            );
            // Items under an agent start, or whose id could be misread as a
            // grid token, are placed by coordinates.
            let grid_safe = item.pos != self.human_start
                && item.pos != self.robot_start
                && !item.id.starts_with(['#', '.', 'h', 'r'])
                && !cell_token.contains_key(&item.pos);
            if grid_safe {
                cell_token.insert(item.pos, item.id.clone());
            } else {
                items.insert(item.id.clone(), [item.pos.x, item.pos.y]);
            }
        }
        if self.robot_start == self.human_start {
            items.insert("r".to_string(), [self.robot_start.x, self.robot_start.y]);
        }
        let grid = (0..self.height)
            .map(|y| {
                (0..self.width)
                    .map(|x| {
                        let p = Pos::new(x, y);
                        if self.is_wall(p) {
                            "#".to_string()
                        } else if p == self.human_start {
                            "h".to_string()
                        } else if p == self.robot_start && p != self.human_start {
                            "r".to_string()
                        } else if let Some(tok) = cell_token.get(&p) {
                            tok.clone()
                        } else {
                            ".".to_string()
                        }
                    })
                    .collect::<String>()
            })
            .collect();
        let script = self
            .script
            .iter()
            .map(|ev| match &ev.kind {
                ScriptKind::Action(a) => {
                    let (name, args) = self.action_to_wire(Agent::Human, *a);
                    ScriptEntry {
                        t: ev.t,
                        action: Some(name.into()),
                        args,
                        utterance: None,
                    }
                }
                ScriptKind::Utterance(u) => ScriptEntry {
                    t: ev.t,
                    utterance: Some(u.clone()),
                    ..Default::default()
                },
            })
            .collect();
        ScenarioFile {
            name: self.name.clone(),
            grid,
            legend,
            items,
            goals: self.goals.iter().map(|&g| self.gems[g].id.clone()).collect(),
            true_goal: self.gems[self.true_goal].id.clone(),
            true_profile: self.true_profile,
            cost_profiles: self.cost_profiles.clone(),
            max_steps: self.max_steps,
            script,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serializes")
    }

    /// Replay the scripted prefix with the robot waiting on its turns.
    /// Returns the visited states (including the initial one).
    pub fn replay_script(&self) -> Result<Vec<State>, String> {
        let mut s = self.initial_state();
        let mut states = vec![s];
        let last = self.script.iter().map(|e| e.t).max().unwrap_or(0);
        while s.t <= last {
            let a = match s.turn {
                Agent::Human => self.script_action_at(s.t).unwrap_or(Action::Wait),
                Agent::Robot => Action::Wait,
            };
            // A trailing utterance without an action ends the prefix on the
            // human's turn; the action at that step is unobserved.
            if s.turn == Agent::Human && s.t == last && self.script_action_at(s.t).is_none() {
                break;
            }
            s = self
                .step_action(&s, a)
                .map_err(|e| format!("step {}: {} ({e})", s.t, self.describe(s.turn, a)))?;
            states.push(s);
        }
        Ok(states)
    }

    pub fn script_action_at(&self, t: u32) -> Option<Action> {
        self.script.iter().find_map(|e| match e.kind {
            ScriptKind::Action(a) if e.t == t => Some(a),
            _ => None,
        })
    }

    pub fn script_utterance_at(&self, t: u32) -> Option<&str> {
        self.script.iter().find_map(|e| match &e.kind {
            ScriptKind::Utterance(u) if e.t == t => Some(u.as_str()),
            _ => None,
        })
    }
}

impl ScenarioFile {
    pub fn build(&self) -> Result<Scenario, ScenarioError> {
        let text = serde_json::to_string_pretty(self).unwrap_or_default();
        self.build_with_source(&text)
    }

    fn build_with_source(&self, text: &str) -> Result<Scenario, ScenarioError> {
        let cx = Ctx { text };
        if self.grid.is_empty() {
            return Err(cx.err_at("\"grid\"", "grid is empty"));
        }
        // Longest tokens first so that e.g. `k10` wins over `k1`.
        let mut tokens: Vec<&str> = self.legend.keys().map(String::as_str).collect();
        tokens.sort_by_key(|t| std::cmp::Reverse(t.len()));
        for t in &tokens {
            if t.is_empty() {
                return Err(cx.err_at("\"legend\"", "empty legend token"));
            }
        }

        let mut width = None;
        let mut walls = Vec::new();
        let mut human = None;
        let mut robot = None;
        let mut placed: BTreeMap<String, Pos> = BTreeMap::new();
        for (y, row) in self.grid.iter().enumerate() {
            let (line, col0) = locate(text, &format!("\"{row}\""));
            let toks = tokenize(row, &tokens).map_err(|i| ScenarioError {
                line,
                column: col0 + 1 + i,
                message: format!(
                    "grid row {y}: unknown token '{}' at character {i}",
                    row.chars().nth(i).unwrap_or('?')
                ),
            })?;
            match width {
                None => width = Some(toks.len()),
                Some(w) if w != toks.len() => {
                    return Err(ScenarioError {
                        line,
                        column: col0,
                        message: format!("grid row {y} has {} cells, expected {w}", toks.len()),
                    })
                }
                _ => {}
            }
            for (x, tok) in toks.into_iter().enumerate() {
                let p = Pos::new(x as u16, y as u16);
                walls.push(matches!(tok, Token::Wall));
                match tok {
                    Token::Human if human.replace(p).is_some() => {
                        return Err(ScenarioError {
                            line,
                            column: col0,
                            message: "more than one 'h' in grid".into(),
                        })
                    }
                    Token::Robot if robot.replace(p).is_some() => {
                        return Err(ScenarioError {
                            line,
                            column: col0,
                            message: "more than one 'r' in grid".into(),
                        })
                    }
                    Token::Item(id) if placed.insert(id.clone(), p).is_some() => {
                        return Err(ScenarioError {
                            line,
                            column: col0,
                            message: format!("item '{id}' placed more than once"),
                        })
                    }
                    _ => {}
                }
            }
        }
        let width = width.unwrap_or(0);
        let height = self.grid.len();
        if width == 0 || width > u16::MAX as usize || height > u16::MAX as usize {
            return Err(cx.err_at("\"grid\"", "grid has no cells"));
        }
        // Agent starts may also be given by coordinates, e.g. when both
        // agents start on one cell.
        for (tok, slot) in [("h", &mut human), ("r", &mut robot)] {
            if let Some(&[x, y]) = self.items.get(tok) {
                if slot.replace(Pos::new(x, y)).is_some() {
                    return Err(cx.quoted(tok, format!("agent start '{tok}' given twice")));
                }
                if x as usize >= width || y as usize >= height || walls[y as usize * width + x as usize] {
                    return Err(cx.quoted(tok, format!("agent start '{tok}' is outside the map or on a wall")));
                }
            }
        }
        let human_start = human.ok_or_else(|| cx.err_at("\"grid\"", "grid has no human start 'h'"))?;
        let robot_start = robot.ok_or_else(|| cx.err_at("\"grid\"", "grid has no robot start 'r'"))?;

        for (id, [x, y]) in self.items.iter().filter(|(id, _)| !matches!(id.as_str(), "h" | "r")) {
            if !self.legend.contains_key(id) {
                return Err(cx.quoted(id, format!("item '{id}' is not in the legend")));
            }
            if placed.insert(id.clone(), Pos::new(*x, *y)).is_some() {
                return Err(cx.quoted(id, format!("item '{id}' placed both in the grid and by coordinates")));
            }
        }

        let mut keys = Vec::new();
        let mut doors = Vec::new();
        let mut gems = Vec::new();
        for (id, entry) in &self.legend {
            let kind = ItemKind::parse(&entry.kind)
                .ok_or_else(|| cx.quoted(id, format!("item '{id}': unknown kind '{}'", entry.kind)))?;
            let color = Color::parse(&entry.color)
                .ok_or_else(|| cx.quoted(id, format!("item '{id}': unknown color '{}'", entry.color)))?;
            let pos = *placed
                .get(id)
                .ok_or_else(|| cx.quoted(id, format!("legend item '{id}' is never placed")))?;
            if pos.x as usize >= width || pos.y as usize >= height || walls[pos.y as usize * width + pos.x as usize] {
                return Err(cx.quoted(id, format!("item '{id}' at {pos} is outside the map or on a wall")));
            }
            if kind == ItemKind::Door && (pos == human_start || pos == robot_start) {
                return Err(cx.quoted(id, format!("door '{id}' is on an agent start")));
            }
            let item = Item {
                id: id.clone(),
                kind,
                color,
                pos,
            };
            match kind {
                ItemKind::Key => keys.push(item),
                ItemKind::Door => doors.push(item),
                ItemKind::Gem => gems.push(item),
            }
        }
        for (list, kind) in [(&keys, "keys"), (&doors, "doors"), (&gems, "gems")] {
            if list.len() > MAX_ITEMS_PER_KIND {
                return Err(cx.err_at(
                    "\"legend\"",
                    format!("at most {MAX_ITEMS_PER_KIND} {kind} are supported"),
                ));
            }
        }
        {
            let mut cells: BTreeMap<Pos, &str> = BTreeMap::new();
            for item in keys.iter().chain(&doors).chain(&gems) {
                if let Some(other) = cells.insert(item.pos, &item.id) {
                    return Err(cx.quoted(
                        &item.id,
                        format!("items '{other}' and '{}' share cell {}", item.id, item.pos),
                    ));
                }
            }
        }
        // BTreeMap iteration already sorted ids within each kind.

        if self.goals.is_empty() {
            return Err(cx.err_at("\"goals\"", "goals must not be empty"));
        }
        let mut goals = Vec::new();
        for g in &self.goals {
            let idx = gems
                .iter()
                .position(|x| &x.id == g)
                .ok_or_else(|| cx.quoted(g, format!("goal '{g}' is not a gem in the legend")))?;
            if goals.contains(&idx) {
                return Err(cx.quoted(g, format!("goal '{g}' listed twice")));
            }
            goals.push(idx);
        }
        let true_goal = gems
            .iter()
            .position(|x| x.id == self.true_goal)
            .filter(|i| goals.contains(i))
            .ok_or_else(|| {
                cx.err_at(
                    "\"true_goal\"",
                    format!("true_goal '{}' is not one of the goals", self.true_goal),
                )
            })?;
        if self.cost_profiles.is_empty() {
            return Err(cx.err_at("\"cost_profiles\"", "cost_profiles must not be empty"));
        }
        for &p in self.cost_profiles.iter().chain(std::iter::once(&self.true_profile)) {
            if CostProfile::bundled(p).is_none() {
                return Err(cx.err_at("\"cost_profiles\"", format!("unknown cost profile {p}")));
            }
        }
        if self.max_steps < 1 {
            return Err(cx.err_at("\"max_steps\"", "max_steps must be at least 1"));
        }

        let mut door_at = vec![None; width * height];
        for (d, door) in doors.iter().enumerate() {
            door_at[door.pos.y as usize * width + door.pos.x as usize] = Some(d as u8);
        }
        let mut scn = Scenario {
            name: self.name.clone(),
            width: width as u16,
            height: height as u16,
            walls,
            human_start,
            robot_start,
            keys,
            doors,
            gems,
            goals,
            true_goal,
            true_profile: self.true_profile,
            cost_profiles: self.cost_profiles.clone(),
            max_steps: self.max_steps,
            script: Vec::new(),
            door_at,
        };

        let mut script = Vec::new();
        let mut last_action_t = 0;
        for entry in &self.script {
            let at = |msg: String| cx.err_at(&format!("\"t\": {}", entry.t), msg).or_line(&cx, entry.t);
            if entry.t % 2 == 0 {
                return Err(at(format!(
                    "script step {} is a robot turn; scripted events must be on odd steps",
                    entry.t
                )));
            }
            match (&entry.action, &entry.utterance) {
                (Some(name), None) => {
                    if entry.t <= last_action_t {
                        return Err(at(format!(
                            "script actions must have increasing steps (step {})",
                            entry.t
                        )));
                    }
                    last_action_t = entry.t;
                    let a = if entry.args.is_empty() && name.contains(' ') {
                        scn.parse_action(Agent::Human, name)
                    } else {
                        scn.action_from_wire(Agent::Human, name, &entry.args)
                    }
                    .map_err(|e| at(format!("script step {}: {e}", entry.t)))?;
                    script.push(ScriptEvent {
                        t: entry.t,
                        kind: ScriptKind::Action(a),
                    });
                }
                (None, Some(u)) => script.push(ScriptEvent {
                    t: entry.t,
                    kind: ScriptKind::Utterance(u.clone()),
                }),
                _ => {
                    return Err(at(format!(
                        "script step {}: need exactly one of action or utterance",
                        entry.t
                    )))
                }
            }
        }
        script.sort_by_key(|e| (e.t, matches!(e.kind, ScriptKind::Utterance(_))));
        scn.script = script;
        scn.replay_script()
            .map_err(|e| cx.err_at("\"script\"", format!("script is not playable: {e}")))?;
        Ok(scn)
    }
}

trait OrLine {
    fn or_line(self, cx: &Ctx<'_>, t: u32) -> Self;
}

impl OrLine for ScenarioError {
    fn or_line(self, cx: &Ctx<'_>, t: u32) -> Self {
        if self.line > 0 {
            return self;
        }
        let (line, column) = locate(cx.text, &format!("\"t\":{t}"));
        ScenarioError { line, column, ..self }
    }
}
