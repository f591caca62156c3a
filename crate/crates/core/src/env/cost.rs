use super::{Action, Agent};
use serde::{Deserialize, Serialize};

/// Costs are stored as integers in tenths so that path sums are exact and
/// equal-cost alternatives compare equal.
pub const COST_SCALE: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionClass {
    Move,
    PickUp,
    Unlock,
    Handover,
    Wait,
}

impl ActionClass {
    pub const ALL: [ActionClass; 5] = [
        ActionClass::Move,
        ActionClass::PickUp,
        ActionClass::Unlock,
        ActionClass::Handover,
        ActionClass::Wait,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

/// Per-agent, per-action-class cost table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CostProfile {
    pub id: u8,
    human: [u32; 5],
    robot: [u32; 5],
}

impl CostProfile {
    /// The four built-in profiles, indexed 0..=3.
    ///
    /// 0: human pick-up 5, robot pick-up 1, wait 0.6, everything else 1.
    /// 1: as 0, but the human's other actions cost 2.
    /// 2: as 0, plus robot unlock 5.
    /// 3: as 2, with the human's other actions at 2.
    pub fn bundled(id: u8) -> Option<CostProfile> {
        // order: move, pickup, unlock, handover, wait
        let (human, robot) = match id {
            0 => ([10, 50, 10, 10, 6], [10, 10, 10, 10, 6]),
            1 => ([20, 50, 20, 20, 6], [10, 10, 10, 10, 6]),
            2 => ([10, 50, 10, 10, 6], [10, 10, 50, 10, 6]),
            3 => ([20, 50, 20, 20, 6], [10, 10, 50, 10, 6]),
            _ => return None,
        };
        Some(CostProfile { id, human, robot })
    }

    /// Build a custom profile from real-valued costs (rounded to tenths).
    pub fn custom(id: u8, human: [f64; 5], robot: [f64; 5]) -> CostProfile {
        let conv = |v: [f64; 5]| v.map(|c| (c * COST_SCALE).round().max(0.0) as u32);
        CostProfile {
            id,
            human: conv(human),
            robot: conv(robot),
        }
    }

    /// Cost in tenths.
    pub fn units(&self, agent: Agent, class: ActionClass) -> u32 {
        match agent {
            Agent::Human => self.human[class.index()],
            Agent::Robot => self.robot[class.index()],
        }
    }

    pub fn action_units(&self, agent: Agent, a: Action) -> u32 {
        self.units(agent, a.class())
    }

    /// Cost of `a` taken by `agent`, in game units.
    pub fn action_cost(&self, agent: Agent, a: Action) -> f64 {
        self.action_units(agent, a) as f64 / COST_SCALE
    }

    /// Cheapest action of any class for `agent`, in tenths.
    pub fn min_units(&self, agent: Agent) -> u32 {
        ActionClass::ALL
            .iter()
            .map(|&c| self.units(agent, c))
            .min()
            .unwrap_or(0)
    }
}
