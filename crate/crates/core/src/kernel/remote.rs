//! Rules whose left-hand side lives on another node.
//!
//! The kernel never talks to the network. A caller asks which remote
//! queries an operation depends on ([`Kernel::remote_needs`]), fetches them
//! itself, installs the answers as a snapshot and then runs the operation.
//! Effects a forward rule has on remote boards collect in an outbox.

use super::{Hosted, Kernel, KernelError, Op};
use crate::board::BoardRef;
use crate::rule::{Presence, Rule, RuleId};
use crate::tuple::{Binding, Template, Tuple};
use crate::witness::{Candidate, Search, Slot};

/// Stored tuples of a remote board covered by a template.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RemoteQuery {
    pub board: BoardRef,
    pub template: Template,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RemoteEffect {
    Tell(BoardRef, Tuple),
    Retract(BoardRef, Tuple),
}

/// How to satisfy a `get` through a backward rule reading a remote board:
/// remove `take` there, tell `produce`, and reply with `binding`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemotePlan {
    pub rule: RuleId,
    pub binding: Binding,
    pub take: Vec<(BoardRef, Tuple)>,
    pub produce: Vec<(BoardRef, Tuple)>,
}

/// `[in(b, ?X)] ->b [in(c, !X)]` and its unguarded variants: the query can
/// be sent to the remote board as is.
fn passes_query_through(rule: &Rule) -> bool {
    match (&rule.lhs[..], &rule.rhs[..]) {
        ([l], [r]) => match (&l.template, &r.template) {
            (Template::BindAll(x), Template::UseAll(y)) => x == y && l.presence == Presence::In(1),
            _ => false,
        },
        _ => false,
    }
}

fn slot_query(rule: &Rule, slot: usize, query: &Template) -> RemoteQuery {
    let p = &rule.lhs[slot];
    let template = if passes_query_through(rule) { query.clone() } else { super::backward::loosen(&p.template) };
    RemoteQuery { board: p.board.clone(), template }
}

impl Kernel {
    /// Remote queries whose answers `op` may depend on.
    pub fn remote_needs(&self, op: &Op) -> Vec<RemoteQuery> {
        let (Op::Ask(_, t) | Op::Get(_, t) | Op::Nask(_, t)) = op else {
            return Vec::new();
        };
        let Ok(board) = self.resolve(op.board()) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        self.collect_needs(&board, t, self.config.chain_depth, &mut Vec::new(), &mut out);
        out
    }

    fn collect_needs(
        &self,
        board: &str,
        query: &Template,
        depth: usize,
        path: &mut Vec<RuleId>,
        out: &mut Vec<RemoteQuery>,
    ) {
        for &id in &self.boards[board].hosted {
            let h = &self.rules[&id];
            if h.rule.is_forward() || path.contains(&id) {
                continue;
            }
            match &h.lhs_local {
                None => {
                    for k in 0..h.rule.lhs.len() {
                        let q = slot_query(&h.rule, k, query);
                        if !out.contains(&q) {
                            out.push(q);
                        }
                    }
                }
                Some(lhs) if depth > 0 => {
                    path.push(id);
                    for p in h.rule.lhs.iter().filter(|p| p.is_in()) {
                        self.collect_needs(lhs, &super::backward::loosen(&p.template), depth - 1, path, out);
                    }
                    path.pop();
                }
                Some(_) => {}
            }
        }
    }

    /// Replaces the remote snapshot. A query without an entry counts as
    /// unreachable, which keeps the rules depending on it inactive.
    pub fn install_remote(&mut self, answers: impl IntoIterator<Item = (RemoteQuery, Vec<Tuple>)>) {
        self.snapshot = answers.into_iter().collect();
    }

    pub fn clear_remote(&mut self) {
        self.snapshot.clear();
    }

    /// True when some hosted rule reads a remote board.
    pub fn has_remote_rules(&self) -> bool {
        self.rules.values().any(|h| h.lhs_local.is_none())
    }

    /// Effects on remote boards produced since the last call.
    pub fn take_outbox(&mut self) -> Vec<super::RemoteEffect> {
        std::mem::take(&mut self.outbox)
    }

    pub(super) fn remote_slots<'a>(&'a self, h: &'a Hosted, query: &Template) -> Option<Vec<Slot<'a>>> {
        let mut slots = Vec::new();
        for (k, p) in h.rule.lhs.iter().enumerate() {
            let found = self.snapshot.get(&slot_query(&h.rule, k, query))?;
            if !p.is_in() {
                if found.iter().any(|t| p.template.covers(t)) {
                    return None;
                }
                continue;
            }
            let candidates: Vec<Candidate> = found
                .iter()
                .filter(|t| p.template.covers(t))
                .map(|t| Candidate { tuple: t.clone(), id: None })
                .collect();
            if candidates.len() < p.required() {
                return None;
            }
            slots.push(Slot { template: &p.template, count: p.required(), candidates });
        }
        Some(slots)
    }

    /// Plans a `get` on `board` served by an unguarded backward rule that
    /// reads a remote board, using the installed snapshot.
    pub fn plan_remote_get(&self, board: &BoardRef, query: &Template) -> Result<Option<RemotePlan>, KernelError> {
        let name = self.resolve(board)?;
        for &id in &self.boards[&name].hosted {
            let h = &self.rules[&id];
            let consumable = !h.rule.is_forward()
                && h.rule.rhs[0].is_in()
                && !h.rule.rhs[0].guarded
                && h.rule.lhs.iter().filter(|p| p.is_in()).all(|p| !p.guarded);
            if !consumable || h.lhs_local.is_some() {
                continue;
            }
            let Some(slots) = self.remote_slots(h, query) else { continue };
            let rhs = &h.rule.rhs[0].template;
            let accept = |b: &Binding| rhs.substitute(b).is_ok_and(|t| query.matches(&t, &Binding::new()).is_some());
            let mut search = Search::new(slots);
            search.accept = Some(&accept);
            let Some(witness) = search.first() else { continue };
            let implied = rhs.substitute(&witness.binding)?;
            let lhs = h.rule.lhs_board().clone();
            let mut produce = Vec::new();
            for p in h.rule.lhs.iter().filter(|p| !p.is_in() && !p.guarded) {
                produce.push((lhs.clone(), p.template.substitute(&witness.binding)?));
            }
            return Ok(Some(RemotePlan {
                rule: id,
                binding: query.matches(&implied, &Binding::new()).expect("accepted"),
                take: witness.picks.iter().flatten().map(|c| (lhs.clone(), c.tuple.clone())).collect(),
                produce,
            }));
        }
        Ok(None)
    }
}
