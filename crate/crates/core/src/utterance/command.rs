//! Lifted commands and their s-expression form, e.g.
//! `(pickup me ?key1) (unlock you ?key2 ?door1) where (iscolor ?key1 blue) (iscolor ?door1 green)`.

use crate::env::{Agent, Color, ItemKind, Scenario};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Agent indexical from the speaker's (human's) point of view.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Who {
    Me,
    You,
}

impl Who {
    pub fn of(agent: Agent) -> Who {
        match agent {
            Agent::Human => Who::Me,
            Agent::Robot => Who::You,
        }
    }

    pub fn agent(self) -> Agent {
        match self {
            Who::Me => Agent::Human,
            Who::You => Agent::Robot,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Who::Me => "me",
            Who::You => "you",
        }
    }

    fn other(self) -> Who {
        match self {
            Who::Me => Who::You,
            Who::You => Who::Me,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verb {
    PickUp,
    Unlock,
    Handover,
}

impl Verb {
    pub fn as_str(self) -> &'static str {
        match self {
            Verb::PickUp => "pickup",
            Verb::Unlock => "unlock",
            Verb::Handover => "handover",
        }
    }
}

/// A command argument: a typed variable (`?key1` is `Var(Key, 0)`) or, in
/// ground commands, a concrete scenario object index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arg {
    Var(ItemKind, u8),
    Obj(ItemKind, u8),
}

impl Arg {
    pub fn kind(self) -> ItemKind {
        match self {
            Arg::Var(k, _) | Arg::Obj(k, _) => k,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CmdAction {
    pub verb: Verb,
    /// The acting agent; for handovers, the giver.
    pub actor: Who,
    pub key: Arg,
    /// Only for unlocks.
    pub door: Option<Arg>,
}

impl CmdAction {
    pub fn args(&self) -> impl Iterator<Item = Arg> {
        std::iter::once(self.key).chain(self.door)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Command {
    pub actions: Vec<CmdAction>,
    /// `iscolor` constraints, in order of first mention.
    pub colors: Vec<(Arg, Color)>,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("cannot parse command: {0}")]
pub struct CommandParseError(pub String);

impl Command {
    /// Variables with their types, numbered per type by first appearance.
    pub fn vars(&self) -> Vec<Arg> {
        let mut out = Vec::new();
        for a in &self.actions {
            for arg in a.args() {
                if matches!(arg, Arg::Var(..)) && !out.contains(&arg) {
                    out.push(arg);
                }
            }
        }
        out
    }

    pub fn color_of(&self, arg: Arg) -> Option<Color> {
        self.colors.iter().find(|(a, _)| *a == arg).map(|(_, c)| *c)
    }

    pub fn verbs(&self) -> Vec<Verb> {
        let mut v: Vec<Verb> = self.actions.iter().map(|a| a.verb).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Replace every object with a typed variable, numbered per type by first
    /// appearance. Already lifted commands come back unchanged.
    pub fn lift(&self) -> Command {
        let mut map: Vec<(Arg, Arg)> = Vec::new();
        let mut counts = [0u8; 3];
        let mut rename = |arg: Arg, map: &mut Vec<(Arg, Arg)>| -> Arg {
            if let Some((_, v)) = map.iter().find(|(a, _)| *a == arg) {
                return *v;
            }
            let k = arg.kind();
            let slot = match k {
                ItemKind::Key => 0,
                ItemKind::Door => 1,
                ItemKind::Gem => 2,
            };
            let v = Arg::Var(k, counts[slot]);
            counts[slot] += 1;
            map.push((arg, v));
            v
        };
        let actions = self
            .actions
            .iter()
            .map(|a| CmdAction {
                key: rename(a.key, &mut map),
                door: a.door.map(|d| rename(d, &mut map)),
                ..*a
            })
            .collect();
        let mut colors = Vec::new();
        for (arg, c) in &self.colors {
            if let Some((_, v)) = map.iter().find(|(a, _)| a == arg) {
                if !colors.contains(&(*v, *c)) {
                    colors.push((*v, *c));
                }
            }
        }
        Command { actions, colors }
    }

    /// Text of a ground command using scenario ids.
    pub fn render(&self, scn: &Scenario) -> String {
        self.render_with(|arg| match arg {
            Arg::Obj(k, i) => scn.item(k, i as usize).id.clone(),
            v => var_name(v),
        })
    }

    fn render_with(&self, name: impl Fn(Arg) -> String) -> String {
        let mut out = Vec::new();
        for a in &self.actions {
            let s = match a.verb {
                Verb::PickUp => format!("(pickup {} {})", a.actor.as_str(), name(a.key)),
                Verb::Handover => {
                    format!(
                        "(handover {} {} {})",
                        a.actor.as_str(),
                        a.actor.other().as_str(),
                        name(a.key)
                    )
                }
                Verb::Unlock => format!(
                    "(unlock {} {} {})",
                    a.actor.as_str(),
                    name(a.key),
                    a.door.map(&name).unwrap_or_default()
                ),
            };
            out.push(s);
        }
        let mut text = out.join(" ");
        if !self.colors.is_empty() {
            text.push_str(" where");
            for (arg, c) in &self.colors {
                text.push_str(&format!(" (iscolor {} {})", name(*arg), c));
            }
        }
        text
    }

    /// Parse the lifted s-expression form.
    pub fn parse(text: &str) -> Result<Command, CommandParseError> {
        let err = |m: &str| CommandParseError(format!("{m} in '{text}'"));
        let (acts, preds) = match text.find(" where ") {
            Some(i) => (&text[..i], &text[i + 7..]),
            None => (text, ""),
        };
        let groups = |s: &str| -> Result<Vec<Vec<String>>, CommandParseError> {
            let mut out = Vec::new();
            let mut rest = s.trim();
            while !rest.is_empty() {
                if !rest.starts_with('(') {
                    return Err(err("expected '('"));
                }
                let end = rest.find(')').ok_or_else(|| err("unclosed '('"))?;
                out.push(rest[1..end].split_whitespace().map(str::to_string).collect());
                rest = rest[end + 1..].trim_start();
            }
            Ok(out)
        };
        let var = |s: &str| -> Result<Arg, CommandParseError> {
            let name = s.strip_prefix('?').ok_or_else(|| err("expected a variable"))?;
            let split = name
                .find(|c: char| c.is_ascii_digit())
                .ok_or_else(|| err("variable without number"))?;
            let kind = ItemKind::parse(&name[..split]).ok_or_else(|| err("unknown variable type"))?;
            let n: u8 = name[split..].parse().map_err(|_| err("bad variable number"))?;
            if n == 0 {
                return Err(err("variables are numbered from 1"));
            }
            Ok(Arg::Var(kind, n - 1))
        };
        let who = |s: &str| match s {
            "me" => Ok(Who::Me),
            "you" => Ok(Who::You),
            _ => Err(err("expected 'me' or 'you'")),
        };
        let mut actions = Vec::new();
        for g in groups(acts)? {
            let g: Vec<&str> = g.iter().map(String::as_str).collect();
            let a = match g.as_slice() {
                ["pickup", w, k] => CmdAction {
                    verb: Verb::PickUp,
                    actor: who(w)?,
                    key: var(k)?,
                    door: None,
                },
                ["handover", w, r, k] => {
                    let actor = who(w)?;
                    if who(r)? != actor.other() {
                        return Err(err("handover must go to the other agent"));
                    }
                    CmdAction {
                        verb: Verb::Handover,
                        actor,
                        key: var(k)?,
                        door: None,
                    }
                }
                ["unlock", w, k, d] => CmdAction {
                    verb: Verb::Unlock,
                    actor: who(w)?,
                    key: var(k)?,
                    door: Some(var(d)?),
                },
                _ => return Err(err("unknown action form")),
            };
            if a.key.kind() != ItemKind::Key || a.door.is_some_and(|d| d.kind() != ItemKind::Door) {
                return Err(err("argument of the wrong type"));
            }
            actions.push(a);
        }
        if actions.is_empty() {
            return Err(err("no actions"));
        }
        let mut colors = Vec::new();
        for g in groups(preds)? {
            let g: Vec<&str> = g.iter().map(String::as_str).collect();
            match g.as_slice() {
                ["iscolor", v, c] => {
                    colors.push((var(v)?, Color::parse(c).ok_or_else(|| err("unknown color"))?));
                }
                _ => return Err(err("unknown predicate")),
            }
        }
        let cmd = Command { actions, colors };
        let vars = cmd.vars();
        if cmd.colors.iter().any(|(a, _)| !vars.contains(a)) {
            return Err(err("predicate on a variable no action uses"));
        }
        Ok(cmd)
    }
}

fn var_name(arg: Arg) -> String {
    match arg {
        Arg::Var(k, n) => format!("?{}{}", k.as_str(), n + 1),
        Arg::Obj(k, n) => format!("{}#{}", k.as_str(), n),
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_with(var_name))
    }
}
