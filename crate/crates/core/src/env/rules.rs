use super::{Action, Agent, ItemRef, KeyLoc, Scenario, State};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuleError {
    #[error("it is the {expected}'s turn, not the {got}'s")]
    OutOfTurn { expected: Agent, got: Agent },
    #[error("the idle agent must wait")]
    IdleMustWait,
    #[error("cannot move {dir}: blocked")]
    Blocked { dir: &'static str },
    #[error("nothing to pick up there")]
    NothingToPickUp,
    #[error("only the human can collect gems, and only goal gems")]
    GemNotCollectable,
    #[error("agent does not hold that key")]
    KeyNotHeld,
    #[error("key and door colors differ")]
    ColorMismatch,
    #[error("door is not adjacent")]
    DoorNotAdjacent,
    #[error("door is already unlocked")]
    DoorUnlocked,
    #[error("agents are too far apart to hand over")]
    TooFar,
    #[error("item index out of range")]
    BadIndex,
    #[error("malformed action: {0}")]
    Malformed(String),
}

impl Scenario {
    fn passable(&self, s: &State, p: super::Pos) -> bool {
        match self.door_at(p) {
            Some(d) => !s.door_locked(d),
            None => true,
        }
    }

    /// Check that `agent` may take `a` in `s`, ignoring whose turn it is.
    pub fn check_action(&self, s: &State, agent: Agent, a: Action) -> Result<(), RuleError> {
        let me = s.pos(agent);
        match a {
            Action::Up | Action::Down | Action::Left | Action::Right => match self.step(me, a) {
                Some(q) if self.passable(s, q) => Ok(()),
                _ => Err(RuleError::Blocked { dir: a.name() }),
            },
            Action::PickUp(ItemRef::Key(k)) => {
                let k = k as usize;
                if k >= self.keys.len() {
                    return Err(RuleError::BadIndex);
                }
                if s.key_loc(k) == KeyLoc::Floor && self.keys[k].pos == me {
                    Ok(())
                } else {
                    Err(RuleError::NothingToPickUp)
                }
            }
            Action::PickUp(ItemRef::Gem(g)) => {
                let g = g as usize;
                if g >= self.gems.len() {
                    return Err(RuleError::BadIndex);
                }
                if agent != Agent::Human || !self.is_goal_gem(g) {
                    return Err(RuleError::GemNotCollectable);
                }
                if !s.gem_collected(g) && self.gems[g].pos == me {
                    Ok(())
                } else {
                    Err(RuleError::NothingToPickUp)
                }
            }
            Action::Unlock { door, key } => {
                let (d, k) = (door as usize, key as usize);
                if d >= self.doors.len() || k >= self.keys.len() {
                    return Err(RuleError::BadIndex);
                }
                if !s.door_locked(d) {
                    return Err(RuleError::DoorUnlocked);
                }
                if !s.holds(agent, k) {
                    return Err(RuleError::KeyNotHeld);
                }
                if self.keys[k].color != self.doors[d].color {
                    return Err(RuleError::ColorMismatch);
                }
                if !me.adjacent(self.doors[d].pos) {
                    return Err(RuleError::DoorNotAdjacent);
                }
                Ok(())
            }
            Action::Handover { key } => {
                let k = key as usize;
                if k >= self.keys.len() {
                    return Err(RuleError::BadIndex);
                }
                if !s.holds(agent, k) {
                    return Err(RuleError::KeyNotHeld);
                }
                if s.human.manhattan(s.robot) > 1 {
                    return Err(RuleError::TooFar);
                }
                Ok(())
            }
            Action::Wait => Ok(()),
        }
    }

    /// Legal actions of `agent` in `s`, in tie-break order. The idle agent may
    /// only wait.
    pub fn legal_actions(&self, s: &State, agent: Agent) -> Vec<Action> {
        let mut out = Vec::with_capacity(8);
        self.legal_actions_into(s, agent, &mut out);
        out
    }

    /// Allocation-free variant of [`Scenario::legal_actions`].
    pub fn legal_actions_into(&self, s: &State, agent: Agent, out: &mut Vec<Action>) {
        out.clear();
        if agent != s.turn {
            out.push(Action::Wait);
            return;
        }
        let me = s.pos(agent);
        for a in Action::MOVES {
            if let Some(q) = self.step(me, a) {
                if self.passable(s, q) {
                    out.push(a);
                }
            }
        }
        for (k, key) in self.keys.iter().enumerate() {
            if key.pos == me && s.key_loc(k) == KeyLoc::Floor {
                out.push(Action::PickUp(ItemRef::Key(k as u8)));
            }
        }
        if agent == Agent::Human {
            for (g, gem) in self.gems.iter().enumerate() {
                if gem.pos == me && !s.gem_collected(g) && self.is_goal_gem(g) {
                    out.push(Action::PickUp(ItemRef::Gem(g as u8)));
                }
            }
        }
        let held = KeyLoc::held_by(agent);
        for (d, door) in self.doors.iter().enumerate() {
            if s.door_locked(d) && me.adjacent(door.pos) {
                for (k, key) in self.keys.iter().enumerate() {
                    if key.color == door.color && s.key_loc(k) == held {
                        out.push(Action::Unlock {
                            door: d as u8,
                            key: k as u8,
                        });
                    }
                }
            }
        }
        if s.human.manhattan(s.robot) <= 1 {
            for k in 0..self.keys.len() {
                if s.key_loc(k) == held {
                    out.push(Action::Handover { key: k as u8 });
                }
            }
        }
        out.push(Action::Wait);
    }

    /// Successor after the acting agent takes `a`, without legality checks.
    pub fn apply(&self, s: &State, a: Action) -> State {
        let agent = s.turn;
        let mut n = *s;
        n.t += 1;
        n.turn = agent.other();
        match a {
            Action::Up | Action::Down | Action::Left | Action::Right => {
                if let Some(q) = self.step(s.pos(agent), a) {
                    match agent {
                        Agent::Human => n.human = q,
                        Agent::Robot => n.robot = q,
                    }
                }
            }
            Action::PickUp(ItemRef::Key(k)) => n.set_key_loc(k as usize, KeyLoc::held_by(agent)),
            Action::PickUp(ItemRef::Gem(g)) => n.gems |= 1 << g,
            Action::Unlock { door, key } => {
                n.locked &= !(1 << door);
                n.set_key_loc(key as usize, KeyLoc::Consumed);
            }
            Action::Handover { key } => n.set_key_loc(key as usize, KeyLoc::held_by(agent.other())),
            Action::Wait => {}
        }
        n
    }

    /// Checked single-agent step: `a` must be legal for the agent whose turn it is.
    pub fn step_action(&self, s: &State, a: Action) -> Result<State, RuleError> {
        self.check_action(s, s.turn, a)?;
        Ok(self.apply(s, a))
    }

    /// Joint transition `(aH, aR)`: the acting agent's action must be legal and
    /// the idle agent's action must be `Wait`.
    pub fn transition(&self, s: &State, a_h: Action, a_r: Action) -> Result<State, RuleError> {
        let (acting, idle) = match s.turn {
            Agent::Human => (a_h, a_r),
            Agent::Robot => (a_r, a_h),
        };
        if idle != Action::Wait {
            return Err(RuleError::IdleMustWait);
        }
        self.step_action(s, acting)
    }
}
