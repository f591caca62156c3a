//! Command enumeration: subsets of salient actions, pruned, lifted, deduplicated.

use super::command::{Command, Who};
use super::salient::Salient;
use std::collections::BTreeSet;

/// True if the subset survives pruning: at most two verbs, at least one
/// action for the listener, and no two actions touching the same key.
pub fn admissible(subset: &[&Salient]) -> bool {
    let mut verbs: Vec<_> = subset.iter().map(|s| s.action.verb).collect();
    verbs.sort();
    verbs.dedup();
    if verbs.len() > 2 {
        return false;
    }
    if subset.iter().all(|s| s.action.actor == Who::Me) {
        return false;
    }
    for (i, a) in subset.iter().enumerate() {
        if subset[i + 1..].iter().any(|b| b.key() == a.key()) {
            return false;
        }
    }
    true
}

/// Ground command for a subset, actions in rollout order.
pub fn ground_command(subset: &[&Salient]) -> Command {
    let mut colors = Vec::new();
    for s in subset {
        for c in &s.colors {
            if !colors.contains(c) {
                colors.push(*c);
            }
        }
    }
    Command {
        actions: subset.iter().map(|s| s.action).collect(),
        colors,
    }
}

/// All distinct lifted commands from subsets of at most `max_actions`
/// salient actions, sorted by their text.
pub fn enumerate_commands(salient: &[Salient], max_actions: usize) -> Vec<Command> {
    let mut seen: BTreeSet<(String, Command)> = BTreeSet::new();
    let mut chosen: Vec<&Salient> = Vec::with_capacity(max_actions);
    fn recurse<'a>(
        salient: &'a [Salient],
        start: usize,
        max: usize,
        chosen: &mut Vec<&'a Salient>,
        seen: &mut BTreeSet<(String, Command)>,
    ) {
        for i in start..salient.len() {
            chosen.push(&salient[i]);
            if admissible(chosen) {
                let c = ground_command(chosen).lift();
                seen.insert((c.to_string(), c));
            }
            // Pruning is not monotone in the speaker rule, so keep extending.
            if chosen.len() < max {
                recurse(salient, i + 1, max, chosen, seen);
            }
            chosen.pop();
        }
    }
    recurse(salient, 0, max_actions, &mut chosen, &mut seen);
    seen.into_iter().map(|(_, c)| c).collect()
}
