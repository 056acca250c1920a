//! Backward reading: virtual presence and absence, and `get` through a
//! backward rule.

use std::collections::BTreeSet;

use super::forward::{effects, shuffled_candidates};
use super::{FiringRecord, Hosted, Kernel, KernelError};
use crate::board::BoardRef;
use crate::rule::RuleId;
use crate::tuple::{Binding, Field, Template, Tuple};
use crate::witness::{expand, Candidate, Search, Slot};

/// `template` with every use turned into a binder, for querying a board on
/// behalf of a rule slot.
pub(super) fn loosen(template: &Template) -> Template {
    match template {
        Template::Pattern(fields) => Template::Pattern(
            fields
                .iter()
                .map(|f| match f {
                    Field::Use(x) => Field::Bind(x.clone()),
                    other => other.clone(),
                })
                .collect(),
        ),
        Template::UseAll(x) => Template::BindAll(x.clone()),
        other => other.clone(),
    }
}

fn is_backward_in(h: &Hosted) -> bool {
    !h.rule.is_forward() && h.rule.rhs[0].is_in()
}

impl Kernel {
    pub(super) fn ask_on(&self, board: &str, query: &Template) -> Option<Binding> {
        if let Some((_, _, b)) = self.oldest_match(board, query) {
            return Some(b);
        }
        let found = self.virtual_tuples(board, query, self.config.chain_depth, &mut Vec::new(), true);
        found.first().and_then(|(t, _)| query.matches(t, &Binding::new()))
    }

    pub(super) fn nask_on(&self, board: &str, query: &Template) -> bool {
        if self.virtual_absence(board, query) {
            return true;
        }
        self.oldest_match(board, query).is_none()
            && self.virtual_tuples(board, query, self.config.chain_depth, &mut Vec::new(), true).is_empty()
    }

    pub(super) fn get_on(&mut self, board: &str, query: &Template) -> Result<Option<Binding>, KernelError> {
        if let Some((t, id, b)) = self.oldest_match(board, query) {
            self.remove(board, &t, id)?;
            self.settle_from(board)?;
            return Ok(Some(b));
        }
        self.consume_virtual(board, query)
    }

    /// Tuples that active backward rules hosted on `board` make virtually
    /// present and that `query` matches, with the rule responsible. Stored
    /// tuples are not included.
    pub fn virtual_presence(&self, board: &str, query: &Template) -> Result<Vec<(Binding, RuleId)>, KernelError> {
        self.board(board)?;
        let found = self.virtual_tuples(board, query, self.config.chain_depth, &mut Vec::new(), false);
        Ok(found
            .into_iter()
            .filter_map(|(t, id)| query.matches(&t, &Binding::new()).map(|b| (b, id)))
            .collect())
    }

    /// `path` holds the rules being evaluated further up, so a cycle of
    /// backward rules ends instead of recursing.
    fn virtual_tuples(
        &self,
        board: &str,
        query: &Template,
        depth: usize,
        path: &mut Vec<RuleId>,
        first_only: bool,
    ) -> Vec<(Tuple, RuleId)> {
        let mut out = Vec::new();
        for &id in &self.boards[board].hosted {
            let h = &self.rules[&id];
            if !is_backward_in(h) || path.contains(&id) {
                continue;
            }
            path.push(id);
            let slots = self.backward_slots(h, query, depth, path);
            path.pop();
            let Some(slots) = slots else { continue };
            let rhs = &h.rule.rhs[0].template;
            let accept = |b: &Binding| rhs.substitute(b).is_ok_and(|t| query.matches(&t, &Binding::new()).is_some());
            let mut search = Search::new(slots);
            search.accept = Some(&accept);
            let mut seen = BTreeSet::new();
            search.visit(&mut |w| {
                if let Ok(t) = rhs.substitute(&w.binding) {
                    if seen.insert(t.clone()) {
                        out.push((t, id));
                    }
                }
                first_only
            });
            if first_only && !out.is_empty() {
                break;
            }
        }
        out
    }

    /// Does an active backward `nin` rule hosted on `board` assert the
    /// absence of a tuple `query` matches?
    fn virtual_absence(&self, board: &str, query: &Template) -> bool {
        let mut path = Vec::new();
        self.boards[board].hosted.iter().any(|id| {
            let h = &self.rules[id];
            if h.rule.is_forward() || h.rule.rhs[0].is_in() {
                return false;
            }
            path.push(*id);
            let slots = self.backward_slots(h, query, self.config.chain_depth, &mut path);
            path.pop();
            let Some(slots) = slots else { return false };
            let rhs = &h.rule.rhs[0].template;
            let accept = |b: &Binding| rhs.substitute(b).is_ok_and(|t| query.matches(&t, &Binding::new()).is_some());
            let mut search = Search::new(slots);
            search.accept = Some(&accept);
            search.first().is_some()
        })
    }

    /// Candidate lists for the `in` slots of backward rule `h`, or `None`
    /// when the rule is not active. Local slots see stored copies plus, when
    /// the board hosts backward rules of its own, the tuples those make
    /// virtually present. Remote slots come from the installed snapshot.
    fn backward_slots<'a>(
        &'a self,
        h: &'a Hosted,
        query: &Template,
        depth: usize,
        path: &mut Vec<RuleId>,
    ) -> Option<Vec<Slot<'a>>> {
        let Some(lhs) = &h.lhs_local else {
            return self.remote_slots(h, query);
        };
        let b = &self.boards[lhs];
        let chain = depth > 0 && b.hosted.iter().any(|id| is_backward_in(&self.rules[id]));
        if !chain && !h.state.is_active() {
            return None;
        }
        let mut slots = Vec::new();
        for (k, p) in h.rule.lhs.iter().enumerate() {
            if !p.is_in() {
                if h.state.blackboard_vector[k] > 0 {
                    return None;
                }
                continue;
            }
            let mut candidates =
                expand(b.content.iter().filter(|(t, _)| p.template.covers(t)));
            if chain {
                let loose = loosen(&p.template);
                let mut seen = BTreeSet::new();
                for (t, _) in self.virtual_tuples(lhs, &loose, depth - 1, path, false) {
                    if seen.insert(t.clone()) {
                        candidates.push(Candidate { tuple: t, id: None });
                    }
                }
            }
            if candidates.len() < p.required() {
                return None;
            }
            slots.push(Slot { template: &p.template, count: p.required(), candidates });
        }
        Some(slots)
    }

    /// Removes, through an active unguarded backward rule, the stored
    /// tuples whose presence implies a tuple `query` matches.
    fn consume_virtual(&mut self, board: &str, query: &Template) -> Result<Option<Binding>, KernelError> {
        let hosted = self.boards[board].hosted.clone();
        for id in hosted {
            let h = &self.rules[&id];
            let consumable = is_backward_in(h)
                && !h.rule.rhs[0].guarded
                && h.rule.lhs.iter().filter(|p| p.is_in()).all(|p| !p.guarded);
            let Some(lhs) = h.lhs_local.clone() else { continue };
            if !consumable || !h.state.is_active() {
                continue;
            }
            let content = &self.boards[&lhs].content;
            let mut slots = Vec::new();
            for p in h.rule.lhs.iter().filter(|p| p.is_in()) {
                let candidates = shuffled_candidates(content, &p.template, &mut self.rng);
                slots.push(Slot { template: &p.template, count: p.required(), candidates });
            }
            let rhs = &h.rule.rhs[0].template;
            let accept = |b: &Binding| rhs.substitute(b).is_ok_and(|t| query.matches(&t, &Binding::new()).is_some());
            let mut search = Search::new(slots);
            search.accept = Some(&accept);
            let Some(witness) = search.first() else { continue };
            let fx = effects(&h.rule, &witness.binding, false)?;
            let implied = rhs.substitute(&witness.binding)?;
            let reply = query.matches(&implied, &Binding::new()).expect("accepted");
            let before = h.state.blackboard_vector.clone();

            let mut record = FiringRecord {
                rule: id,
                board: lhs.clone(),
                binding: witness.binding.clone(),
                consumed: Vec::new(),
                produced: Vec::new(),
                retracted: Vec::new(),
                before,
                time: 0,
            };
            for c in witness.picks.iter().flatten() {
                self.remove(&lhs, &c.tuple, c.id.expect("stored copy"))?;
                record.consumed.push(c.tuple.clone());
            }
            for t in fx.nin_products {
                self.insert(&lhs, t.clone());
                record.produced.push((BoardRef::local(lhs.clone()), t));
            }
            self.clock += 1;
            record.time = self.clock;
            self.log(record);
            self.settle_from(&lhs)?;
            return Ok(Some(reply));
        }
        Ok(None)
    }
}
