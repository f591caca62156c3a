//! Admissible and consistent lower bound on the remaining joint cost.
//!
//! The human has to walk to the gem and pick it up, and the robot acts between
//! every two human actions. Doors that separate the human from the gem must be
//! unlocked, which needs keys of their color; any shortfall in held keys must
//! be fetched from the floor, by the human (a detour through the key) or by the
//! robot (a walk to the key). Distances ignore doors, so they never overstate.

use super::domain::{Domain, UNREACHABLE};
use crate::env::{ActionClass, Agent, Color, CostProfile, KeyLoc, State};

/// Profile-derived constants, all in cost tenths.
#[derive(Clone, Copy, Debug)]
pub(crate) struct BoundCosts {
    human_move: f64,
    robot_min: f64,
    gem_pickup: f64,
    unlock: f64,
    key_pickup: f64,
}

impl BoundCosts {
    pub(crate) fn new(p: &CostProfile) -> BoundCosts {
        let robot_min = p.min_units(Agent::Robot);
        // An unlock or key pick-up done by the robot may replace one of the
        // robot turns already counted at `robot_min`.
        let marginal = |class| {
            p.units(Agent::Human, class)
                .min(p.units(Agent::Robot, class).saturating_sub(robot_min)) as f64
        };
        BoundCosts {
            human_move: p.units(Agent::Human, ActionClass::Move) as f64,
            robot_min: robot_min as f64,
            gem_pickup: p.units(Agent::Human, ActionClass::PickUp) as f64,
            unlock: marginal(ActionClass::Unlock),
            key_pickup: marginal(ActionClass::PickUp),
        }
    }

    /// Human walks `moves` steps; the robot takes at least `robot_turns` turns.
    fn walk(&self, moves: u32, robot_turns: u32) -> f64 {
        self.human_move * moves as f64 + self.robot_min * robot_turns as f64
    }
}

/// Lower bound in cost tenths; `f64::INFINITY` when the gem cannot be reached.
pub(crate) fn lower_bound(dom: &Domain, c: &BoundCosts, s: &State, gem: usize) -> f64 {
    if s.gem_collected(gem) {
        return 0.0;
    }
    let scn = &dom.scenario;
    let gem_pos = scn.gems[gem].pos;
    let to_gem = dom.dist_raw(s.human, gem_pos);
    if to_gem == UNREACHABLE {
        return f64::INFINITY;
    }
    let to_gem = to_gem as u32;
    let robot_turn = (s.turn == Agent::Robot) as u32;
    let needed_doors = dom.separating_doors(gem, s.human) & s.locked;

    let mut walk = c.walk(to_gem, to_gem + robot_turn);
    let mut fetches = 0u32;
    for color in Color::ALL {
        let need = (needed_doors & dom.doors_of_color[color.index()]).count_ones();
        if need == 0 {
            continue;
        }
        let mut held = 0;
        let mut floor = Vec::new();
        let mut keys = dom.keys_of_color[color.index()];
        while keys != 0 {
            let k = keys.trailing_zeros() as usize;
            keys &= keys - 1;
            match s.key_loc(k) {
                KeyLoc::Human | KeyLoc::Robot => held += 1,
                KeyLoc::Floor => floor.push(k),
                KeyLoc::Consumed => {}
            }
        }
        if need <= held {
            continue;
        }
        let deficit = need - held;
        if (floor.len() as u32) < deficit {
            return f64::INFINITY;
        }
        fetches += deficit;
        let mut best = f64::INFINITY;
        for k in floor {
            let kp = scn.keys[k].pos;
            let (hk, kg, rk) = (
                dom.dist_raw(s.human, kp),
                dom.dist_raw(kp, gem_pos),
                dom.dist_raw(s.robot, kp),
            );
            if hk != UNREACHABLE && kg != UNREACHABLE {
                let m = hk as u32 + kg as u32;
                best = best.min(c.walk(m, m + robot_turn));
            }
            if rk != UNREACHABLE {
                best = best.min(c.walk(to_gem, (to_gem + robot_turn).max(rk as u32 + 1)));
            }
        }
        walk = walk.max(best);
    }
    if walk.is_infinite() {
        return f64::INFINITY;
    }
    c.gem_pickup + walk + needed_doors.count_ones() as f64 * c.unlock + fetches as f64 * c.key_pickup
}
