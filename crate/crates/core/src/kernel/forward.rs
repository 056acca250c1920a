//! Forward reading: the work queue and rule firing.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{FiringRecord, Kernel, KernelError, RemoteEffect, Work};
use crate::board::{BoardRef, InstanceId, Multiset};
use crate::rule::{Presence, Rule, RuleId};
use crate::tuple::{Template, Tuple};
use crate::witness::{expand, Candidate, Search, Slot};

/// Copies covered by `template`, grouped by tuple, groups shuffled.
pub(super) fn shuffled_candidates(content: &Multiset, template: &Template, rng: &mut impl Rng) -> Vec<Candidate> {
    let mut groups: Vec<(&Tuple, &[InstanceId])> = content.iter().filter(|(t, _)| template.covers(t)).collect();
    groups.shuffle(rng);
    expand(groups)
}

/// Substituted effects of one firing, computed before anything changes.
pub(super) struct Effects {
    pub nin_products: Vec<Tuple>,
    pub rhs: Vec<Work>,
}

pub(super) fn effects(rule: &Rule, binding: &crate::tuple::Binding, with_rhs: bool) -> Result<Effects, KernelError> {
    let mut nin_products = Vec::new();
    for p in rule.lhs.iter().filter(|p| !p.is_in() && !p.guarded) {
        nin_products.push(p.template.substitute(binding)?);
    }
    let mut rhs = Vec::new();
    if with_rhs {
        for p in &rule.rhs {
            let t = p.template.substitute(binding)?;
            match p.presence {
                Presence::In(c) => rhs.extend((0..c).map(|_| Work::Tell(p.board.clone(), t.clone()))),
                Presence::Nin => rhs.push(Work::Retract(p.board.clone(), t)),
            }
        }
    }
    Ok(Effects { nin_products, rhs })
}

impl Kernel {
    pub(super) fn settle_from(&mut self, board: &str) -> Result<(), KernelError> {
        if self.config.reactive {
            self.settle(VecDeque::from([Work::Fire(board.to_string())]))
        } else {
            Ok(())
        }
    }

    /// Drains the work queue. A top-level operation gets `config.fuel`
    /// firings; running out leaves the state as it is and drops the rest
    /// of the queue.
    pub(super) fn settle(&mut self, mut queue: VecDeque<Work>) -> Result<(), KernelError> {
        let mut fuel = self.config.fuel;
        while let Some(work) = queue.pop_front() {
            match work {
                Work::Tell(r, t) => match self.local_name(&r).filter(|n| self.boards.contains_key(n)) {
                    Some(name) => {
                        self.insert(&name, t);
                        if self.config.reactive {
                            queue.push_back(Work::Fire(name));
                        }
                    }
                    None => self.outbox.push(RemoteEffect::Tell(r, t)),
                },
                Work::Retract(r, t) => match self.local_name(&r).filter(|n| self.boards.contains_key(n)) {
                    Some(name) => {
                        let oldest = self.boards[&name].content.oldest(&t);
                        if let Some(id) = oldest {
                            self.remove(&name, &t, id)?;
                            if self.config.reactive {
                                queue.push_back(Work::Fire(name));
                            }
                        }
                    }
                    None => self.outbox.push(RemoteEffect::Retract(r, t)),
                },
                Work::Fire(name) => self.fire_board(&name, &mut fuel, &mut queue)?,
            }
        }
        Ok(())
    }

    /// Picks uniformly among the active forward rules of `board` and fires,
    /// until none is left. A rule whose counters say active but which has
    /// no consistent joint binding sits out until another firing changes
    /// the board.
    fn fire_board(&mut self, board: &str, fuel: &mut usize, queue: &mut VecDeque<Work>) -> Result<(), KernelError> {
        let mut excluded: Vec<RuleId> = Vec::new();
        loop {
            let active: Vec<RuleId> = self.boards[board]
                .hosted
                .iter()
                .copied()
                .filter(|id| {
                    let h = &self.rules[id];
                    h.rule.is_forward() && h.state.is_active() && !excluded.contains(id)
                })
                .collect();
            if active.is_empty() {
                return Ok(());
            }
            let pick = active[self.rng.gen_range(0..active.len())];
            if self.fire(pick, fuel, queue)? {
                excluded.clear();
            } else {
                excluded.push(pick);
            }
        }
    }

    fn fire(&mut self, id: RuleId, fuel: &mut usize, queue: &mut VecDeque<Work>) -> Result<bool, KernelError> {
        let h = &self.rules[&id];
        let content = &self.boards[&h.host].content;
        let mut slots = Vec::new();
        for p in h.rule.lhs.iter().filter(|p| p.is_in()) {
            let candidates = shuffled_candidates(content, &p.template, &mut self.rng);
            slots.push(Slot { template: &p.template, count: p.required(), candidates });
        }
        let mut search = Search::new(slots);
        if h.refract {
            search.refracted = Some(&h.fired);
        }
        let Some(witness) = search.first() else {
            return Ok(false);
        };
        let fx = effects(&h.rule, &witness.binding, true)?;
        if *fuel == 0 {
            return Err(KernelError::FuelExhausted(self.config.fuel));
        }
        *fuel -= 1;

        let rule = h.rule.clone();
        let host = h.host.clone();
        let before = h.state.blackboard_vector.clone();
        let h = self.rules.get_mut(&id).expect("installed");
        if h.refract {
            h.fired.insert(witness.key());
        }
        let mut record = FiringRecord {
            rule: id,
            board: host.clone(),
            binding: witness.binding.clone(),
            consumed: Vec::new(),
            produced: Vec::new(),
            retracted: Vec::new(),
            before,
            time: 0,
        };
        let ins = rule.lhs.iter().filter(|p| p.is_in());
        for (p, picks) in ins.zip(&witness.picks) {
            if p.guarded {
                continue;
            }
            for c in picks {
                self.remove(&host, &c.tuple, c.id.expect("stored copy"))?;
                record.consumed.push(c.tuple.clone());
            }
        }
        for t in fx.nin_products {
            self.insert(&host, t.clone());
            record.produced.push((BoardRef::local(host.clone()), t));
        }
        for w in fx.rhs {
            match &w {
                Work::Tell(b, t) => record.produced.push((b.clone(), t.clone())),
                Work::Retract(b, t) => record.retracted.push((b.clone(), t.clone())),
                Work::Fire(_) => {}
            }
            queue.push_back(w);
        }
        self.clock += 1;
        record.time = self.clock;
        self.log(record);
        Ok(true)
    }
}
