//! Joint witness search over a rule's `in` slots.
//!
//! Each slot gets a candidate list of tuple copies, grouped so that copies
//! of one tuple are adjacent (ascending instance id). A solution picks, for
//! every slot, `count` candidates in increasing list position such that no
//! copy is used twice and all picks agree on one variable binding. The
//! solution returned is the first one in lexicographic order of positions,
//! slot by slot. Callers decide the group order (canonical, or shuffled by
//! the kernel RNG).

use std::collections::HashSet;

use crate::board::InstanceId;
use crate::tuple::{Binding, Template, Tuple};

/// One candidate copy. Virtual candidates (inferred through a backward
/// rule rather than stored) have no instance id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub tuple: Tuple,
    pub id: Option<InstanceId>,
}

pub struct Slot<'a> {
    pub template: &'a Template,
    pub count: usize,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub binding: Binding,
    /// Chosen candidates, per slot.
    pub picks: Vec<Vec<Candidate>>,
}

impl Witness {
    /// Instance ids per slot, the key used for refraction.
    pub fn key(&self) -> Vec<Vec<InstanceId>> {
        self.picks.iter().map(|p| p.iter().filter_map(|c| c.id).collect()).collect()
    }
}

pub struct Search<'a> {
    pub slots: Vec<Slot<'a>>,
    pub base: Binding,
    /// Witness keys that must not be returned again.
    pub refracted: Option<&'a HashSet<Vec<Vec<InstanceId>>>>,
    /// Extra acceptance test on a complete binding.
    pub accept: Option<&'a dyn Fn(&Binding) -> bool>,
}

impl<'a> Search<'a> {
    pub fn new(slots: Vec<Slot<'a>>) -> Search<'a> {
        Search { slots, base: Binding::new(), refracted: None, accept: None }
    }

    /// First solution, or `None`.
    pub fn first(&self) -> Option<Witness> {
        let mut out = None;
        self.visit(&mut |w| {
            out = Some(w);
            true
        });
        out
    }

    /// Every solution, up to tuple-level interchangeability of copies.
    pub fn all(&self) -> Vec<Witness> {
        let mut out = Vec::new();
        self.visit(&mut |w| {
            out.push(w);
            false
        });
        out
    }

    /// Calls `f` on solutions in order until it returns `true`.
    pub fn visit(&self, f: &mut dyn FnMut(Witness) -> bool) {
        let mut picks: Vec<Vec<usize>> = self.slots.iter().map(|_| Vec::new()).collect();
        let mut used: HashSet<Used> = HashSet::new();
        self.descend(0, 0, &self.base, &mut picks, &mut used, f);
    }

    /// Candidates equal as tuples are interchangeable unless refraction
    /// distinguishes copies.
    fn dedupe(&self) -> bool {
        self.refracted.is_none()
    }

    fn descend(
        &self,
        slot: usize,
        start: usize,
        env: &Binding,
        picks: &mut Vec<Vec<usize>>,
        used: &mut HashSet<Used>,
        f: &mut dyn FnMut(Witness) -> bool,
    ) -> bool {
        if slot == self.slots.len() {
            return self.complete(env, picks, f);
        }
        let s = &self.slots[slot];
        if picks[slot].len() == s.count {
            return self.descend(slot + 1, 0, env, picks, used, f);
        }
        let mut last_tried: Option<&Tuple> = None;
        for i in start..s.candidates.len() {
            let cand = &s.candidates[i];
            if used.contains(&Used::of(slot, i, cand)) {
                continue;
            }
            // only stored copies are interchangeable; virtual ones are distinct
            if self.dedupe() && cand.id.is_some() && last_tried == Some(&cand.tuple) {
                continue;
            }
            last_tried = cand.id.map(|_| &cand.tuple);
            let Some(next) = s.template.matches_open(&cand.tuple, env) else {
                continue;
            };
            picks[slot].push(i);
            used.insert(Used::of(slot, i, cand));
            if self.descend(slot, i + 1, &next, picks, used, f) {
                return true;
            }
            picks[slot].pop();
            used.remove(&Used::of(slot, i, cand));
        }
        false
    }

    fn complete(&self, env: &Binding, picks: &[Vec<usize>], f: &mut dyn FnMut(Witness) -> bool) -> bool {
        if let Some(accept) = self.accept {
            if !accept(env) {
                return false;
            }
        }
        let witness = Witness {
            binding: env.clone(),
            picks: picks
                .iter()
                .zip(&self.slots)
                .map(|(idx, s)| idx.iter().map(|&i| s.candidates[i].clone()).collect())
                .collect(),
        };
        if let Some(refracted) = self.refracted {
            if refracted.contains(&witness.key()) {
                return false;
            }
        }
        f(witness)
    }
}

/// Stored copies are exclusive across all slots; a virtual candidate only
/// within its own slot list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Used {
    Instance(InstanceId),
    Virtual(usize, usize),
}

impl Used {
    fn of(slot: usize, i: usize, cand: &Candidate) -> Used {
        match cand.id {
            Some(id) => Used::Instance(id),
            None => Used::Virtual(slot, i),
        }
    }
}

/// Groups `(tuple, ids)` into a flat candidate list, one entry per copy.
pub fn expand<'t>(groups: impl IntoIterator<Item = (&'t Tuple, &'t [InstanceId])>) -> Vec<Candidate> {
    groups
        .into_iter()
        .flat_map(|(t, ids)| ids.iter().map(move |id| Candidate { tuple: t.clone(), id: Some(*id) }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tup(s: &str) -> Tuple {
        s.parse().unwrap()
    }

    fn cands(items: &[(&str, u64)]) -> Vec<Candidate> {
        items.iter().map(|(t, id)| Candidate { tuple: tup(t), id: Some(InstanceId(*id)) }).collect()
    }

    #[test]
    fn join_on_shared_variable() {
        let a: Template = "<a, ?X>".parse().unwrap();
        let b: Template = "<b, ?X>".parse().unwrap();
        let search = Search::new(vec![
            Slot { template: &a, count: 1, candidates: cands(&[("<a, 1>", 1), ("<a, 2>", 2)]) },
            Slot { template: &b, count: 1, candidates: cands(&[("<b, 2>", 3)]) },
        ]);
        let w = search.first().unwrap();
        assert_eq!(w.binding.to_string(), "{X=2}");
        assert_eq!(w.key(), vec![vec![InstanceId(2)], vec![InstanceId(3)]]);
    }

    #[test]
    fn counted_slot_needs_distinct_copies() {
        let t: Template = "<t1>".parse().unwrap();
        let one = Search::new(vec![Slot { template: &t, count: 2, candidates: cands(&[("<t1>", 1)]) }]);
        assert!(one.first().is_none());
        let two = Search::new(vec![Slot { template: &t, count: 2, candidates: cands(&[("<t1>", 1), ("<t1>", 4)]) }]);
        assert_eq!(two.first().unwrap().key(), vec![vec![InstanceId(1), InstanceId(4)]]);
    }

    #[test]
    fn copies_are_not_shared_between_slots() {
        let t: Template = "?X".parse().unwrap();
        let c = cands(&[("<a>", 1)]);
        let s = Search::new(vec![
            Slot { template: &t, count: 1, candidates: c.clone() },
            Slot { template: &t, count: 1, candidates: c },
        ]);
        assert!(s.first().is_none());
    }

    #[test]
    fn refraction_skips_fired_combinations() {
        let t: Template = "?X".parse().unwrap();
        let mut fired = HashSet::new();
        fired.insert(vec![vec![InstanceId(1)]]);
        let mut s = Search::new(vec![Slot { template: &t, count: 1, candidates: cands(&[("<a>", 1), ("<a>", 2)]) }]);
        s.refracted = Some(&fired);
        assert_eq!(s.first().unwrap().key(), vec![vec![InstanceId(2)]]);
    }

    #[test]
    fn accept_filters_complete_bindings() {
        let t: Template = "<a, ?X>".parse().unwrap();
        let accept = |b: &Binding| b.to_string() == "{X=2}";
        let mut s = Search::new(vec![Slot { template: &t, count: 1, candidates: cands(&[("<a, 1>", 1), ("<a, 2>", 2)]) }]);
        s.accept = Some(&accept);
        assert_eq!(s.first().unwrap().binding.to_string(), "{X=2}");
    }
}
