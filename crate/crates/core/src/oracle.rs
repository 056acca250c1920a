//! A reference engine with nothing cached.
//!
//! [`NaiveKernel`] recounts every rule slot by scanning the whole board and
//! enumerates witnesses directly, group by group. It follows the same
//! firing protocol as [`Kernel`](crate::kernel::Kernel) (same random draws
//! in the same order), so for a fixed seed the two must agree on every
//! reply, every activation state and every board. It only knows local
//! boards and never suspends.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::activation::ActivationState;
use crate::board::{BoardRef, InstanceId};
use crate::kernel::{Engine, FiringRecord, KernelConfig, KernelError, Op, Reply};
use crate::rule::{Presence, Rule, RuleId, RuleViolation};
use crate::tuple::{Binding, Field, Template, Tuple};

struct NaiveRule {
    id: RuleId,
    rule: Rule,
    canonical: Rule,
    host: String,
    refract: bool,
    fired: HashSet<Vec<Vec<InstanceId>>>,
}

/// Candidates of one slot: distinct tuples, each with its copies. A virtual
/// tuple is a group with a single copy and no id.
struct NSlot {
    template: Template,
    count: usize,
    groups: Vec<(Tuple, Vec<Option<InstanceId>>)>,
}

type Picks = Vec<Vec<(Tuple, Option<InstanceId>)>>;

enum Job {
    Tell(BoardRef, Tuple),
    Retract(BoardRef, Tuple),
    Fire(String),
}

pub struct NaiveKernel {
    config: KernelConfig,
    rng: ChaCha8Rng,
    boards: BTreeMap<String, Vec<(InstanceId, Tuple)>>,
    rules: Vec<NaiveRule>,
    next_instance: u64,
    next_rule: u64,
    clock: u64,
    firings: Vec<FiringRecord>,
}

fn loosen(template: &Template) -> Template {
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

fn is_backward_in(r: &Rule) -> bool {
    !r.is_forward() && r.rhs[0].is_in()
}

/// First (or every) solution over group sequences: each slot takes a
/// non-decreasing sequence of groups, each time the lowest copy not yet
/// taken.
fn grouped(slots: &[NSlot], env: &Binding, visit: &mut dyn FnMut(&Binding, &Picks) -> bool) {
    let mut picks: Picks = slots.iter().map(|_| Vec::new()).collect();
    let mut taken: Vec<(usize, usize, usize)> = Vec::new();
    grouped_at(slots, 0, 0, env, &mut picks, &mut taken, visit);
}

fn grouped_at(
    slots: &[NSlot],
    s: usize,
    from: usize,
    env: &Binding,
    picks: &mut Picks,
    taken: &mut Vec<(usize, usize, usize)>,
    visit: &mut dyn FnMut(&Binding, &Picks) -> bool,
) -> bool {
    if s == slots.len() {
        return visit(env, picks);
    }
    let slot = &slots[s];
    if picks[s].len() == slot.count {
        return grouped_at(slots, s + 1, 0, env, picks, taken, visit);
    }
    for g in from..slot.groups.len() {
        let (tuple, copies) = &slot.groups[g];
        let free = copies.iter().enumerate().find(|(c, id)| match id {
            Some(id) => !picks.iter().flatten().any(|(_, p)| *p == Some(*id)),
            None => !taken.contains(&(s, g, *c)),
        });
        let Some((c, id)) = free else { continue };
        let Some(next) = slot.template.matches_open(tuple, env) else { continue };
        picks[s].push((tuple.clone(), *id));
        taken.push((s, g, c));
        if grouped_at(slots, s, g, &next, picks, taken, visit) {
            return true;
        }
        picks[s].pop();
        taken.pop();
    }
    false
}

/// A slot flattened to single copies: template, required count, copies.
type FlatSlot = (Template, usize, Vec<(Tuple, InstanceId)>);

/// First solution over individual copies in list order, skipping refracted
/// combinations.
fn plain_first(
    slots: &[FlatSlot],
    refracted: &HashSet<Vec<Vec<InstanceId>>>,
) -> Option<(Binding, Picks)> {
    fn go(
        slots: &[FlatSlot],
        s: usize,
        from: usize,
        env: &Binding,
        chosen: &mut Vec<Vec<(Tuple, InstanceId)>>,
        refracted: &HashSet<Vec<Vec<InstanceId>>>,
    ) -> Option<Binding> {
        if s == slots.len() {
            let key: Vec<Vec<InstanceId>> = chosen.iter().map(|c| c.iter().map(|(_, i)| *i).collect()).collect();
            return (!refracted.contains(&key)).then(|| env.clone());
        }
        let (template, count, cands) = &slots[s];
        if chosen[s].len() == *count {
            return go(slots, s + 1, 0, env, chosen, refracted);
        }
        for (i, (t, id)) in cands.iter().enumerate().skip(from) {
            if chosen.iter().flatten().any(|(_, p)| p == id) {
                continue;
            }
            let Some(next) = template.matches_open(t, env) else { continue };
            chosen[s].push((t.clone(), *id));
            if let Some(b) = go(slots, s, i + 1, &next, chosen, refracted) {
                return Some(b);
            }
            chosen[s].pop();
        }
        None
    }
    let mut chosen = slots.iter().map(|_| Vec::new()).collect();
    let b = go(slots, 0, 0, &Binding::new(), &mut chosen, refracted)?;
    Some((b, chosen.into_iter().map(|c| c.into_iter().map(|(t, i)| (t, Some(i))).collect()).collect()))
}

fn key_of(picks: &Picks) -> Vec<Vec<InstanceId>> {
    picks.iter().map(|p| p.iter().filter_map(|(_, i)| *i).collect()).collect()
}

impl NaiveKernel {
    pub fn new(config: KernelConfig) -> NaiveKernel {
        NaiveKernel {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            boards: BTreeMap::new(),
            rules: Vec::new(),
            next_instance: 0,
            next_rule: 0,
            clock: 0,
            firings: Vec::new(),
        }
    }

    fn resolve(&self, r: &BoardRef) -> Result<String, KernelError> {
        if r.is_qualified() {
            return Err(KernelError::NotLocal(r.clone()));
        }
        if !self.boards.contains_key(&r.name) {
            return Err(KernelError::UnknownBlackboard(r.name.clone()));
        }
        Ok(r.name.clone())
    }

    fn rule_index(&self, id: RuleId) -> usize {
        self.rules.iter().position(|r| r.id == id).expect("installed")
    }

    fn hosted(&self, board: &str) -> Vec<RuleId> {
        self.rules.iter().filter(|r| r.host == board).map(|r| r.id).collect()
    }

    /// Copies covered by `template`, grouped by tuple in canonical order.
    fn groups(&self, board: &str, template: &Template) -> Vec<(Tuple, Vec<InstanceId>)> {
        let mut hits: Vec<(Tuple, InstanceId)> =
            self.boards[board].iter().filter(|(_, t)| template.covers(t)).map(|(i, t)| (t.clone(), *i)).collect();
        hits.sort();
        let mut out: Vec<(Tuple, Vec<InstanceId>)> = Vec::new();
        for (t, i) in hits {
            match out.last_mut() {
                Some((last, ids)) if *last == t => ids.push(i),
                _ => out.push((t, vec![i])),
            }
        }
        out
    }

    fn counts(&self, rule: &Rule) -> Vec<usize> {
        let board = &self.boards[&rule.lhs_board().name];
        rule.lhs.iter().map(|p| board.iter().filter(|(_, t)| p.template.covers(t)).count()).collect()
    }

    fn state(&self, r: &NaiveRule) -> ActivationState {
        let mut s = ActivationState::new(r.id, &r.rule);
        s.blackboard_vector = self.counts(&r.rule);
        s
    }

    fn active(&self, r: &NaiveRule) -> bool {
        self.state(r).is_active()
    }

    /// Refraction bookkeeping after `board` changed.
    fn touched(&mut self, board: &str, removed: Option<InstanceId>) {
        for i in 0..self.rules.len() {
            if self.rules[i].rule.lhs_board().name != board {
                continue;
            }
            let active = self.active(&self.rules[i]);
            let r = &mut self.rules[i];
            if !active {
                r.fired.clear();
            } else if let (true, Some(id)) = (r.refract, removed) {
                r.fired.retain(|key| !key.iter().flatten().any(|i| *i == id));
            }
        }
    }

    fn insert(&mut self, board: &str, tuple: Tuple) {
        let id = InstanceId(self.next_instance);
        self.next_instance += 1;
        self.boards.get_mut(board).expect("board").push((id, tuple));
        self.touched(board, None);
    }

    fn remove(&mut self, board: &str, id: InstanceId) {
        self.boards.get_mut(board).expect("board").retain(|(i, _)| *i != id);
        self.touched(board, Some(id));
    }

    /// Oldest copy of the canonically first tuple `template` matches.
    fn first_match(&self, board: &str, template: &Template) -> Option<(InstanceId, Binding)> {
        let mut hits: Vec<(&Tuple, InstanceId, Binding)> = self.boards[board]
            .iter()
            .filter_map(|(i, t)| template.matches(t, &Binding::new()).map(|b| (t, *i, b)))
            .collect();
        hits.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        hits.into_iter().next().map(|(_, i, b)| (i, b))
    }

    fn perform(&mut self, op: &Op) -> Result<Option<Reply>, KernelError> {
        let board = self.resolve(op.board())?;
        self.clock += 1;
        match op {
            Op::Tell(_, t) => {
                self.insert(&board, t.clone());
                self.run(VecDeque::from([Job::Fire(board)]))?;
                Ok(Some(Reply::Ack))
            }
            Op::Ask(_, t) => Ok(self.ask_on(&board, t).map(Reply::Bound)),
            Op::Get(_, t) => Ok(self.get_on(&board, t)?.map(Reply::Bound)),
            Op::Nask(_, t) => Ok(self.nask_on(&board, t).then_some(Reply::Ack)),
            Op::TellR(_, r) => Ok(Some(Reply::Rule(self.install(&board, r)?))),
            Op::AskR(_, r) => Ok(self.find_rule(&board, r).map(|_| Reply::Ack)),
            Op::GetR(_, r) => match self.find_rule(&board, r) {
                Some(id) => {
                    let i = self.rule_index(id);
                    self.rules.remove(i);
                    Ok(Some(Reply::Ack))
                }
                None => Ok(None),
            },
            Op::NaskR(_, r) => Ok(self.find_rule(&board, r).is_none().then_some(Reply::Ack)),
        }
    }

    fn find_rule(&self, board: &str, rule: &Rule) -> Option<RuleId> {
        let c = rule.canonical();
        self.rules.iter().find(|r| r.host == board && r.canonical == c).map(|r| r.id)
    }

    fn install(&mut self, board: &str, rule: &Rule) -> Result<RuleId, KernelError> {
        rule.validate()?;
        let host = rule.host_board();
        if host.is_qualified() || host.name != board {
            return Err(RuleViolation::HostMismatch { expected: host.to_string(), got: board.to_string() }.into());
        }
        for p in rule.lhs.iter().chain(&rule.rhs) {
            self.resolve(&p.board)?;
        }
        if let Some(id) = self.find_rule(board, rule) {
            return Ok(id);
        }
        let id = RuleId(self.next_rule);
        self.next_rule += 1;
        self.rules.push(NaiveRule {
            id,
            canonical: rule.canonical(),
            refract: rule.is_forward() && rule.lhs_in_fully_guarded(),
            host: board.to_string(),
            fired: HashSet::new(),
            rule: rule.clone(),
        });
        if rule.is_forward() {
            self.run(VecDeque::from([Job::Fire(board.to_string())]))?;
        }
        Ok(id)
    }

    fn run(&mut self, mut queue: VecDeque<Job>) -> Result<(), KernelError> {
        if !self.config.reactive {
            return Ok(());
        }
        let mut fuel = self.config.fuel;
        while let Some(job) = queue.pop_front() {
            match job {
                Job::Tell(b, t) => {
                    self.insert(&b.name, t);
                    queue.push_back(Job::Fire(b.name));
                }
                Job::Retract(b, t) => {
                    let oldest = self.boards[&b.name].iter().filter(|(_, s)| *s == t).map(|(i, _)| *i).min();
                    if let Some(id) = oldest {
                        self.remove(&b.name, id);
                        queue.push_back(Job::Fire(b.name));
                    }
                }
                Job::Fire(b) => {
                    let mut excluded: Vec<RuleId> = Vec::new();
                    loop {
                        let active: Vec<RuleId> = self
                            .rules
                            .iter()
                            .filter(|r| r.host == b && r.rule.is_forward() && !excluded.contains(&r.id))
                            .filter(|r| self.active(r))
                            .map(|r| r.id)
                            .collect();
                        if active.is_empty() {
                            break;
                        }
                        let pick = active[self.rng.gen_range(0..active.len())];
                        if self.fire(pick, &mut fuel, &mut queue)? {
                            excluded.clear();
                        } else {
                            excluded.push(pick);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn shuffled_slot(&mut self, board: &str, template: &Template, count: usize) -> NSlot {
        let mut groups = self.groups(board, template);
        groups.shuffle(&mut self.rng);
        NSlot {
            template: template.clone(),
            count,
            groups: groups.into_iter().map(|(t, ids)| (t, ids.into_iter().map(Some).collect())).collect(),
        }
    }

    fn fire(&mut self, id: RuleId, fuel: &mut usize, queue: &mut VecDeque<Job>) -> Result<bool, KernelError> {
        let idx = self.rule_index(id);
        let rule = self.rules[idx].rule.clone();
        let host = self.rules[idx].host.clone();
        let before = self.counts(&rule);
        let slots: Vec<NSlot> =
            rule.lhs.iter().filter(|p| p.is_in()).map(|p| self.shuffled_slot(&host, &p.template, p.required())).collect();
        let found = if self.rules[idx].refract {
            let flat: Vec<FlatSlot> = slots
                .iter()
                .map(|s| {
                    let copies =
                        s.groups.iter().flat_map(|(t, ids)| ids.iter().map(|i| (t.clone(), i.expect("stored")))).collect();
                    (s.template.clone(), s.count, copies)
                })
                .collect();
            plain_first(&flat, &self.rules[idx].fired)
        } else {
            let mut out = None;
            grouped(&slots, &Binding::new(), &mut |b, p| {
                out = Some((b.clone(), p.clone()));
                true
            });
            out
        };
        let Some((binding, picks)) = found else {
            return Ok(false);
        };
        let mut nin_products = Vec::new();
        for p in rule.lhs.iter().filter(|p| !p.is_in() && !p.guarded) {
            nin_products.push(p.template.substitute(&binding)?);
        }
        let mut jobs = Vec::new();
        for p in &rule.rhs {
            let t = p.template.substitute(&binding)?;
            match p.presence {
                Presence::In(c) => jobs.extend((0..c).map(|_| Job::Tell(p.board.clone(), t.clone()))),
                Presence::Nin => jobs.push(Job::Retract(p.board.clone(), t)),
            }
        }
        if *fuel == 0 {
            return Err(KernelError::FuelExhausted(self.config.fuel));
        }
        *fuel -= 1;
        if self.rules[idx].refract {
            self.rules[idx].fired.insert(key_of(&picks));
        }
        let mut record = FiringRecord {
            rule: id,
            board: host.clone(),
            binding,
            consumed: Vec::new(),
            produced: Vec::new(),
            retracted: Vec::new(),
            before,
            time: 0,
        };
        for (p, chosen) in rule.lhs.iter().filter(|p| p.is_in()).zip(&picks) {
            if p.guarded {
                continue;
            }
            for (t, i) in chosen {
                self.remove(&host, i.expect("stored"));
                record.consumed.push(t.clone());
            }
        }
        for t in nin_products {
            self.insert(&host, t.clone());
            record.produced.push((BoardRef::local(host.clone()), t));
        }
        for j in jobs {
            match &j {
                Job::Tell(b, t) => record.produced.push((b.clone(), t.clone())),
                Job::Retract(b, t) => record.retracted.push((b.clone(), t.clone())),
                Job::Fire(_) => {}
            }
            queue.push_back(j);
        }
        self.clock += 1;
        record.time = self.clock;
        self.firings.push(record);
        Ok(true)
    }

    fn backward_slots(&self, rule: &Rule, depth: usize, path: &mut Vec<RuleId>) -> Option<Vec<NSlot>> {
        let lhs = &rule.lhs_board().name;
        let chain = depth > 0 && self.rules.iter().any(|r| &r.host == lhs && is_backward_in(&r.rule));
        let counts = self.counts(rule);
        let mut slots = Vec::new();
        for (k, p) in rule.lhs.iter().enumerate() {
            if !p.is_in() {
                if counts[k] > 0 {
                    return None;
                }
                continue;
            }
            let mut groups: Vec<(Tuple, Vec<Option<InstanceId>>)> = self
                .groups(lhs, &p.template)
                .into_iter()
                .map(|(t, ids)| (t, ids.into_iter().map(Some).collect()))
                .collect();
            if chain {
                let mut seen = BTreeSet::new();
                for (t, _) in self.virtual_tuples(lhs, &loosen(&p.template), depth - 1, path, false) {
                    if seen.insert(t.clone()) {
                        groups.push((t, vec![None]));
                    }
                }
            }
            if groups.iter().map(|(_, c)| c.len()).sum::<usize>() < p.required() {
                return None;
            }
            slots.push(NSlot { template: p.template.clone(), count: p.required(), groups });
        }
        Some(slots)
    }

    fn virtual_tuples(
        &self,
        board: &str,
        query: &Template,
        depth: usize,
        path: &mut Vec<RuleId>,
        first_only: bool,
    ) -> Vec<(Tuple, RuleId)> {
        let mut out = Vec::new();
        for id in self.hosted(board) {
            let rule = &self.rules[self.rule_index(id)].rule;
            if !is_backward_in(rule) || path.contains(&id) {
                continue;
            }
            path.push(id);
            let slots = self.backward_slots(rule, depth, path);
            path.pop();
            let Some(slots) = slots else { continue };
            let rhs = &rule.rhs[0].template;
            let mut seen = BTreeSet::new();
            grouped(&slots, &Binding::new(), &mut |b, _| {
                let Ok(t) = rhs.substitute(b) else { return false };
                if query.matches(&t, &Binding::new()).is_none() {
                    return false;
                }
                if seen.insert(t.clone()) {
                    out.push((t, id));
                }
                first_only
            });
            if first_only && !out.is_empty() {
                break;
            }
        }
        out
    }

    fn ask_on(&self, board: &str, query: &Template) -> Option<Binding> {
        if let Some((_, b)) = self.first_match(board, query) {
            return Some(b);
        }
        let found = self.virtual_tuples(board, query, self.config.chain_depth, &mut Vec::new(), true);
        found.first().and_then(|(t, _)| query.matches(t, &Binding::new()))
    }

    fn nask_on(&self, board: &str, query: &Template) -> bool {
        for id in self.hosted(board) {
            let rule = &self.rules[self.rule_index(id)].rule;
            if rule.is_forward() || rule.rhs[0].is_in() {
                continue;
            }
            let mut path = vec![id];
            let Some(slots) = self.backward_slots(rule, self.config.chain_depth, &mut path) else { continue };
            let rhs = &rule.rhs[0].template;
            let mut hit = false;
            grouped(&slots, &Binding::new(), &mut |b, _| {
                hit = rhs.substitute(b).is_ok_and(|t| query.matches(&t, &Binding::new()).is_some());
                hit
            });
            if hit {
                return true;
            }
        }
        self.first_match(board, query).is_none()
            && self.virtual_tuples(board, query, self.config.chain_depth, &mut Vec::new(), true).is_empty()
    }

    fn get_on(&mut self, board: &str, query: &Template) -> Result<Option<Binding>, KernelError> {
        if let Some((id, b)) = self.first_match(board, query) {
            self.remove(board, id);
            self.run(VecDeque::from([Job::Fire(board.to_string())]))?;
            return Ok(Some(b));
        }
        for id in self.hosted(board) {
            let idx = self.rule_index(id);
            let rule = self.rules[idx].rule.clone();
            let consumable = is_backward_in(&rule)
                && !rule.rhs[0].guarded
                && rule.lhs.iter().filter(|p| p.is_in()).all(|p| !p.guarded);
            if !consumable || !self.active(&self.rules[idx]) {
                continue;
            }
            let lhs = rule.lhs_board().name.clone();
            let before = self.counts(&rule);
            let slots: Vec<NSlot> =
                rule.lhs.iter().filter(|p| p.is_in()).map(|p| self.shuffled_slot(&lhs, &p.template, p.required())).collect();
            let rhs = &rule.rhs[0].template;
            let mut found = None;
            grouped(&slots, &Binding::new(), &mut |b, p| {
                if rhs.substitute(b).is_ok_and(|t| query.matches(&t, &Binding::new()).is_some()) {
                    found = Some((b.clone(), p.clone()));
                    return true;
                }
                false
            });
            let Some((binding, picks)) = found else { continue };
            let mut nin_products = Vec::new();
            for p in rule.lhs.iter().filter(|p| !p.is_in() && !p.guarded) {
                nin_products.push(p.template.substitute(&binding)?);
            }
            let implied = rhs.substitute(&binding)?;
            let reply = query.matches(&implied, &Binding::new()).expect("accepted");
            let mut record = FiringRecord {
                rule: id,
                board: lhs.clone(),
                binding,
                consumed: Vec::new(),
                produced: Vec::new(),
                retracted: Vec::new(),
                before,
                time: 0,
            };
            for (t, i) in picks.iter().flatten() {
                self.remove(&lhs, i.expect("stored"));
                record.consumed.push(t.clone());
            }
            for t in nin_products {
                self.insert(&lhs, t.clone());
                record.produced.push((BoardRef::local(lhs.clone()), t));
            }
            self.clock += 1;
            record.time = self.clock;
            self.firings.push(record);
            self.run(VecDeque::from([Job::Fire(lhs)]))?;
            return Ok(Some(reply));
        }
        Ok(None)
    }
}

impl Engine for NaiveKernel {
    fn create_board(&mut self, name: &str) {
        self.boards.entry(name.to_string()).or_default();
    }

    fn try_op(&mut self, op: &Op) -> Result<Option<Reply>, KernelError> {
        self.perform(op)
    }

    fn activation_states(&self) -> Vec<ActivationState> {
        let mut states: Vec<ActivationState> = self.rules.iter().map(|r| self.state(r)).collect();
        states.sort_by_key(|s| s.rule);
        states
    }

    fn contents(&self) -> BTreeMap<String, BTreeMap<Tuple, usize>> {
        self.boards
            .iter()
            .map(|(n, b)| {
                let mut m = BTreeMap::new();
                for (_, t) in b {
                    *m.entry(t.clone()).or_insert(0) += 1;
                }
                (n.clone(), m)
            })
            .collect()
    }

    fn drain_firings(&mut self) -> Vec<FiringRecord> {
        std::mem::take(&mut self.firings)
    }
}
