//! Goal formulas: conjunctions of predicates over scenario objects, with
//! optionally existentially quantified variables.

use crate::env::{Agent, Color, ItemKind, KeyLoc, Scenario, State};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    /// Index into `GoalFormula::vars`.
    Var(u8),
    Obj(ItemKind, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pred {
    /// The agent picked the key up from the floor at some point.
    PickedUpBy(Agent, Term),
    Has(Agent, Term),
    Unlocked(Term),
    IsColor(Term, Color),
    Collected(Term),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GoalFormula {
    pub vars: Vec<(String, ItemKind)>,
    pub conjuncts: Vec<Pred>,
}

/// State plus pick-up history, which `PickedUpBy` refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HistoryState {
    pub state: State,
    pub picked_by_human: u64,
    pub picked_by_robot: u64,
}

impl HistoryState {
    pub fn new(state: State) -> HistoryState {
        HistoryState {
            state,
            picked_by_human: 0,
            picked_by_robot: 0,
        }
    }
}

impl GoalFormula {
    pub fn collect_gem(gem: usize) -> GoalFormula {
        GoalFormula {
            vars: Vec::new(),
            conjuncts: vec![Pred::Collected(Term::Obj(ItemKind::Gem, gem))],
        }
    }

    /// Candidate objects per variable after applying the static color filters.
    fn domains(&self, scn: &Scenario) -> Vec<Vec<usize>> {
        self.vars
            .iter()
            .enumerate()
            .map(|(v, (_, kind))| {
                (0..scn.items(*kind).len())
                    .filter(|&o| {
                        self.conjuncts.iter().all(|p| match p {
                            Pred::IsColor(Term::Var(x), c) if *x as usize == v => scn.items(*kind)[o].color == *c,
                            _ => true,
                        })
                    })
                    .collect()
            })
            .collect()
    }

    /// True if the variables admit no assignment of distinct candidate objects,
    /// or a ground color constraint is false, so no state can satisfy the formula.
    pub fn trivially_unsatisfiable(&self, scn: &Scenario) -> bool {
        let ground_color_false = self.conjuncts.iter().any(|p| match p {
            Pred::IsColor(Term::Obj(kind, o), c) => scn.items(*kind)[*o].color != *c,
            _ => false,
        });
        ground_color_false || self.groundings(scn).is_empty()
    }

    pub fn satisfied(&self, scn: &Scenario, hs: &HistoryState) -> bool {
        let domains = self.domains(scn);
        let mut binding = vec![0usize; self.vars.len()];
        self.search(scn, hs, &domains, &mut binding, 0)
    }

    pub(crate) fn satisfied_with(&self, scn: &Scenario, hs: &HistoryState, domains: &[Vec<usize>]) -> bool {
        let mut binding = vec![0usize; self.vars.len()];
        self.search(scn, hs, domains, &mut binding, 0)
    }

    pub(crate) fn var_domains(&self, scn: &Scenario) -> Vec<Vec<usize>> {
        self.domains(scn)
    }

    fn search(&self, scn: &Scenario, hs: &HistoryState, dom: &[Vec<usize>], binding: &mut [usize], v: usize) -> bool {
        if v == binding.len() {
            return self.conjuncts.iter().all(|p| holds(scn, hs, p, binding));
        }
        for &o in &dom[v] {
            if self.clashes(binding, v, o) {
                continue;
            }
            binding[v] = o;
            if self.search(scn, hs, dom, binding, v + 1) {
                return true;
            }
        }
        false
    }

    /// Distinct variables of one type name distinct objects.
    fn clashes(&self, binding: &[usize], v: usize, o: usize) -> bool {
        let kind = self.vars[v].1;
        (0..v).any(|u| self.vars[u].1 == kind && binding[u] == o)
    }

    /// All variable-free instances, one per assignment of candidate objects.
    pub fn groundings(&self, scn: &Scenario) -> Vec<GoalFormula> {
        let domains = self.domains(scn);
        let mut out = Vec::new();
        let mut binding = vec![0usize; self.vars.len()];
        self.ground_rec(&domains, &mut binding, 0, &mut out);
        out
    }

    fn ground_rec(&self, dom: &[Vec<usize>], binding: &mut [usize], v: usize, out: &mut Vec<GoalFormula>) {
        if v == binding.len() {
            let subst = |t: Term| match t {
                Term::Var(x) => Term::Obj(self.vars[x as usize].1, binding[x as usize]),
                o => o,
            };
            let conjuncts = self
                .conjuncts
                .iter()
                .map(|p| match *p {
                    Pred::PickedUpBy(a, t) => Pred::PickedUpBy(a, subst(t)),
                    Pred::Has(a, t) => Pred::Has(a, subst(t)),
                    Pred::Unlocked(t) => Pred::Unlocked(subst(t)),
                    Pred::IsColor(t, c) => Pred::IsColor(subst(t), c),
                    Pred::Collected(t) => Pred::Collected(subst(t)),
                })
                .collect();
            out.push(GoalFormula {
                vars: Vec::new(),
                conjuncts,
            });
            return;
        }
        for &o in &dom[v] {
            if self.clashes(binding, v, o) {
                continue;
            }
            binding[v] = o;
            self.ground_rec(dom, binding, v + 1, out);
        }
    }

    /// Objects of `kind` named by ground terms (after grounding).
    pub fn objects(&self, kind: ItemKind) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .conjuncts
            .iter()
            .filter_map(|p| match *p {
                Pred::PickedUpBy(_, t)
                | Pred::Has(_, t)
                | Pred::Unlocked(t)
                | Pred::IsColor(t, _)
                | Pred::Collected(t) => match t {
                    Term::Obj(k, o) if k == kind => Some(o),
                    _ => None,
                },
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// PDDL-like rendering, e.g.
    /// `(exists (?key1 - key) (and (pickedup-by robot ?key1) (has human ?key1)))`.
    pub fn render(&self, scn: &Scenario) -> String {
        let term = |t: &Term| match t {
            Term::Var(v) => format!("?{}", self.vars[*v as usize].0),
            Term::Obj(k, o) => scn.items(*k)[*o].id.clone(),
        };
        let preds: Vec<String> = self
            .conjuncts
            .iter()
            .map(|p| match p {
                Pred::PickedUpBy(a, t) => format!("(pickedup-by {a} {})", term(t)),
                Pred::Has(a, t) => format!("(has {a} {})", term(t)),
                Pred::Unlocked(t) => format!("(unlocked {})", term(t)),
                Pred::IsColor(t, c) => format!("(iscolor {} {c})", term(t)),
                Pred::Collected(t) => format!("(collected human {})", term(t)),
            })
            .collect();
        let body = if preds.len() == 1 {
            preds[0].clone()
        } else {
            format!("(and {})", preds.join(" "))
        };
        if self.vars.is_empty() {
            body
        } else {
            let vars: Vec<String> = self.vars.iter().map(|(n, k)| format!("?{n} - {k}")).collect();
            format!("(exists ({}) {body})", vars.join(" "))
        }
    }
}

fn holds(scn: &Scenario, hs: &HistoryState, p: &Pred, binding: &[usize]) -> bool {
    let obj = |t: &Term| match *t {
        Term::Var(v) => binding[v as usize],
        Term::Obj(_, o) => o,
    };
    let kind = |t: &Term, formula_kind: ItemKind| match *t {
        Term::Obj(k, _) => k,
        Term::Var(_) => formula_kind,
    };
    let s = &hs.state;
    match p {
        Pred::PickedUpBy(a, t) => {
            let k = obj(t);
            let mask = match a {
                Agent::Human => hs.picked_by_human,
                Agent::Robot => hs.picked_by_robot,
            };
            mask & (1 << k) != 0
        }
        Pred::Has(a, t) => s.key_loc(obj(t)) == KeyLoc::held_by(*a),
        Pred::Unlocked(t) => !s.door_locked(obj(t)),
        Pred::IsColor(t, c) => match *t {
            // Variable colors were enforced when building the domains.
            Term::Var(_) => true,
            Term::Obj(k, o) => scn.items(kind(t, k))[o].color == *c,
        },
        Pred::Collected(t) => s.gem_collected(obj(t)),
    }
}
