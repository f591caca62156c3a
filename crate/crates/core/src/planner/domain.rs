use crate::env::{Color, Pos, Scenario};

pub(crate) const UNREACHABLE: u16 = u16::MAX;

/// Scenario plus static geometry shared by every planner on that map:
/// all-pairs maze distances with every door open, and per-gem sets of doors
/// that separate each cell from the gem.
#[derive(Debug)]
pub struct Domain {
    pub scenario: Scenario,
    n: usize,
    dist: Vec<u16>,
    /// `cut[gem][cell]`: doors lying on every path from `cell` to the gem.
    cut: Vec<Vec<u32>>,
    pub(crate) doors_of_color: [u32; 4],
    pub(crate) keys_of_color: [u64; 4],
}

impl Domain {
    pub fn new(scenario: Scenario) -> Domain {
        let n = scenario.num_cells();
        let mut dist = vec![UNREACHABLE; n * n];
        for src in 0..n {
            if scenario.is_wall(scenario.cell_pos(src)) {
                continue;
            }
            let row = bfs(&scenario, scenario.cell_pos(src), None);
            dist[src * n..(src + 1) * n].copy_from_slice(&row);
        }
        let mut cut = Vec::with_capacity(scenario.gems.len());
        for gem in &scenario.gems {
            let open = bfs(&scenario, gem.pos, None);
            let mut per_cell = vec![0u32; n];
            for (d, door) in scenario.doors.iter().enumerate() {
                let blocked = bfs(&scenario, gem.pos, Some(door.pos));
                for c in 0..n {
                    if open[c] != UNREACHABLE && blocked[c] == UNREACHABLE && c != scenario.cell_index(door.pos) {
                        per_cell[c] |= 1 << d;
                    }
                }
            }
            cut.push(per_cell);
        }
        let mut doors_of_color = [0u32; 4];
        for (d, door) in scenario.doors.iter().enumerate() {
            doors_of_color[door.color.index()] |= 1 << d;
        }
        let mut keys_of_color = [0u64; 4];
        for (k, key) in scenario.keys.iter().enumerate() {
            keys_of_color[key.color.index()] |= 1 << k;
        }
        Domain {
            scenario,
            n,
            dist,
            cut,
            doors_of_color,
            keys_of_color,
        }
    }

    /// Maze distance with all doors treated as open; `None` if disconnected.
    pub fn distance(&self, a: Pos, b: Pos) -> Option<u32> {
        let d = self.dist_raw(a, b);
        (d != UNREACHABLE).then_some(d as u32)
    }

    pub(crate) fn dist_raw(&self, a: Pos, b: Pos) -> u16 {
        self.dist[self.scenario.cell_index(a) * self.n + self.scenario.cell_index(b)]
    }

    /// Doors (bit set) that every path from `p` to `gem` must cross.
    pub fn separating_doors(&self, gem: usize, p: Pos) -> u32 {
        self.cut[gem][self.scenario.cell_index(p)]
    }

    pub fn doors_of_color(&self, c: Color) -> u32 {
        self.doors_of_color[c.index()]
    }
}

/// Breadth-first distances from `src` over non-wall cells, optionally with
/// one extra blocked cell.
fn bfs(scn: &Scenario, src: Pos, blocked: Option<Pos>) -> Vec<u16> {
    let n = scn.num_cells();
    let mut out = vec![UNREACHABLE; n];
    if Some(src) == blocked {
        return out;
    }
    let mut queue = std::collections::VecDeque::new();
    out[scn.cell_index(src)] = 0;
    queue.push_back(src);
    while let Some(p) = queue.pop_front() {
        let d = out[scn.cell_index(p)];
        for q in scn.open_neighbors(p) {
            if Some(q) == blocked {
                continue;
            }
            let qi = scn.cell_index(q);
            if out[qi] == UNREACHABLE {
                out[qi] = d + 1;
                queue.push_back(q);
            }
        }
    }
    out
}
