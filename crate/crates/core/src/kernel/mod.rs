//! The blackboard kernel.
//!
//! A [`Kernel`] owns a set of local boards and the rules hosted on them. It
//! keeps one [`ActivationState`] per rule up to date on every insertion and
//! removal, fires forward rules through a bounded work queue, answers
//! `ask`/`get`/`nask` from stored tuples and from active backward rules, and
//! parks blocking operations until a later change satisfies them.

mod backward;
mod forward;
mod remote;

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::activation::ActivationState;
use crate::board::{BoardRef, InstanceId, Multiset};
use crate::rule::{Rule, RuleId, RuleViolation};
use crate::tuple::{Binding, SubstError, Template, Tuple};

pub use remote::{RemoteEffect, RemotePlan, RemoteQuery};

/// Firing records kept before the oldest are dropped.
const FIRING_LOG_CAP: usize = 1 << 16;

#[derive(Debug, Clone)]
pub struct KernelConfig {
    pub seed: u64,
    /// Firings allowed per top-level operation.
    pub fuel: usize,
    /// How many backward rules deep virtual presence is chased.
    pub chain_depth: usize,
    /// Host qualifiers that denote this kernel (`b@host` is then just `b`).
    pub local_hosts: Vec<String>,
    /// Fire forward rules as soon as they become active. When off, firing
    /// happens only through [`Kernel::fire_all`].
    pub reactive: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig { seed: 0, fuel: 10_000, chain_depth: 8, local_hosts: Vec::new(), reactive: true }
    }
}

/// A blackboard primitive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    Tell(BoardRef, Tuple),
    Ask(BoardRef, Template),
    Get(BoardRef, Template),
    Nask(BoardRef, Template),
    TellR(BoardRef, Rule),
    AskR(BoardRef, Rule),
    GetR(BoardRef, Rule),
    NaskR(BoardRef, Rule),
}

impl Op {
    pub fn board(&self) -> &BoardRef {
        match self {
            Op::Tell(b, _) | Op::Ask(b, _) | Op::Get(b, _) | Op::Nask(b, _) => b,
            Op::TellR(b, _) | Op::AskR(b, _) | Op::GetR(b, _) | Op::NaskR(b, _) => b,
        }
    }

    pub fn verb(&self) -> &'static str {
        match self {
            Op::Tell(..) => "tell",
            Op::Ask(..) => "ask",
            Op::Get(..) => "get",
            Op::Nask(..) => "nask",
            Op::TellR(..) => "tellr",
            Op::AskR(..) => "askr",
            Op::GetR(..) => "getr",
            Op::NaskR(..) => "naskr",
        }
    }

    /// `tell` and `tellr` always complete; everything else may suspend.
    pub fn may_block(&self) -> bool {
        !matches!(self, Op::Tell(..) | Op::TellR(..))
    }

    pub fn with_board(&self, board: BoardRef) -> Op {
        match self.clone() {
            Op::Tell(_, x) => Op::Tell(board, x),
            Op::Ask(_, x) => Op::Ask(board, x),
            Op::Get(_, x) => Op::Get(board, x),
            Op::Nask(_, x) => Op::Nask(board, x),
            Op::TellR(_, x) => Op::TellR(board, x),
            Op::AskR(_, x) => Op::AskR(board, x),
            Op::GetR(_, x) => Op::GetR(board, x),
            Op::NaskR(_, x) => Op::NaskR(board, x),
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::Tell(b, t) => write!(f, "tell({b}, {t})"),
            Op::Ask(b, t) | Op::Get(b, t) | Op::Nask(b, t) => write!(f, "{}({b}, {t})", self.verb()),
            Op::TellR(b, r) | Op::AskR(b, r) | Op::GetR(b, r) | Op::NaskR(b, r) => {
                write!(f, "{}({b}, {r})", self.verb())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reply {
    Ack,
    Bound(Binding),
    Rule(RuleId),
}

impl Reply {
    /// Bindings carried by the reply (empty unless `Bound`).
    pub fn binding(&self) -> Binding {
        match self {
            Reply::Bound(b) => b.clone(),
            _ => Binding::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ticket(pub u64);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Submitted {
    Ready(Reply),
    Pending(Ticket),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("unknown blackboard `{0}`")]
    UnknownBlackboard(String),
    #[error("{0}")]
    InvalidRule(#[from] RuleViolation),
    #[error("{0}")]
    Subst(#[from] SubstError),
    #[error("firing chain exceeded {0} firings")]
    FuelExhausted(usize),
    #[error("`{0}` is not a blackboard of this kernel")]
    NotLocal(BoardRef),
    #[error("counter underflow in {rule}, slot {slot}")]
    CounterUnderflow { rule: RuleId, slot: usize },
}

impl KernelError {
    pub fn name(&self) -> &'static str {
        match self {
            KernelError::UnknownBlackboard(_) => "UnknownBlackboard",
            KernelError::InvalidRule(v) => v.name(),
            KernelError::Subst(SubstError::UnboundVariable(_)) => "UnboundVariable",
            KernelError::Subst(SubstError::KindMismatch(_)) => "KindMismatch",
            KernelError::FuelExhausted(_) => "FuelExhausted",
            KernelError::NotLocal(_) => "NotLocal",
            KernelError::CounterUnderflow { .. } => "CounterUnderflow",
        }
    }
}

/// What one rule firing did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiringRecord {
    pub rule: RuleId,
    /// Board whose content enabled the firing.
    pub board: String,
    pub binding: Binding,
    pub consumed: Vec<Tuple>,
    pub produced: Vec<(BoardRef, Tuple)>,
    pub retracted: Vec<(BoardRef, Tuple)>,
    /// Blackboard vector just before the firing.
    pub before: Vec<usize>,
    pub time: u64,
}

/// The observable surface shared by [`Kernel`] and the full-scan oracle.
pub trait Engine {
    fn create_board(&mut self, name: &str);
    fn try_op(&mut self, op: &Op) -> Result<Option<Reply>, KernelError>;
    fn activation_states(&self) -> Vec<ActivationState>;
    fn contents(&self) -> BTreeMap<String, BTreeMap<Tuple, usize>>;
    fn drain_firings(&mut self) -> Vec<FiringRecord>;
}

struct Hosted {
    rule: Rule,
    canonical: Rule,
    host: String,
    /// The board the left-hand side reads, when it is local.
    lhs_local: Option<String>,
    state: ActivationState,
    refract: bool,
    fired: HashSet<Vec<Vec<InstanceId>>>,
}

#[derive(Default)]
struct Board {
    content: Multiset,
    hosted: Vec<RuleId>,
    /// Rules whose left-hand side reads this board.
    watchers: Vec<RuleId>,
    suspended: VecDeque<(Ticket, Op)>,
}

enum Work {
    Tell(BoardRef, Tuple),
    Retract(BoardRef, Tuple),
    Fire(String),
}

pub struct Kernel {
    config: KernelConfig,
    rng: ChaCha8Rng,
    boards: BTreeMap<String, Board>,
    rules: BTreeMap<RuleId, Hosted>,
    next_instance: u64,
    next_rule: u64,
    next_ticket: u64,
    clock: u64,
    completed: HashMap<Ticket, Result<Reply, KernelError>>,
    firings: VecDeque<FiringRecord>,
    outbox: Vec<RemoteEffect>,
    snapshot: HashMap<RemoteQuery, Vec<Tuple>>,
}

impl Kernel {
    pub fn new(config: KernelConfig) -> Kernel {
        Kernel {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            boards: BTreeMap::new(),
            rules: BTreeMap::new(),
            next_instance: 0,
            next_rule: 0,
            next_ticket: 0,
            clock: 0,
            completed: HashMap::new(),
            firings: VecDeque::new(),
            outbox: Vec::new(),
            snapshot: HashMap::new(),
        }
    }

    /// A kernel with the given boards and default settings.
    pub fn with_boards(names: &[&str]) -> Kernel {
        let mut k = Kernel::new(KernelConfig::default());
        for n in names {
            k.create_board(n);
        }
        k
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    /// Creates an empty board; existing boards are left alone.
    pub fn create_board(&mut self, name: &str) {
        self.boards.entry(name.to_string()).or_default();
    }

    pub fn has_board(&self, name: &str) -> bool {
        self.boards.contains_key(name)
    }

    pub fn board_names(&self) -> Vec<String> {
        self.boards.keys().cloned().collect()
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    /// Tuple multiplicities on `board`.
    pub fn snapshot(&self, board: &str) -> Result<BTreeMap<Tuple, usize>, KernelError> {
        self.board(board).map(|b| b.content.counts())
    }

    /// Stored tuples covered by `template`, one entry per copy, in canonical
    /// order. Backward rules are not consulted.
    pub fn matching(&self, board: &str, template: &Template) -> Result<Vec<Tuple>, KernelError> {
        let b = self.board(board)?;
        Ok(b.content
            .iter()
            .filter(|(t, _)| template.covers(t))
            .flat_map(|(t, ids)| std::iter::repeat_n(t.clone(), ids.len()))
            .collect())
    }

    /// Rules hosted on `board`, in installation order.
    pub fn rules_on(&self, board: &str) -> Result<Vec<(RuleId, Rule)>, KernelError> {
        Ok(self.board(board)?.hosted.iter().map(|id| (*id, self.rules[id].rule.clone())).collect())
    }

    pub fn rule(&self, id: RuleId) -> Option<&Rule> {
        self.rules.get(&id).map(|h| &h.rule)
    }

    pub fn activation(&self, id: RuleId) -> Option<&ActivationState> {
        self.rules.get(&id).map(|h| &h.state)
    }

    /// Runs one operation without suspending. `Ok(None)` means the operation
    /// would block. Parked operations are retried afterwards.
    pub fn try_op(&mut self, op: &Op) -> Result<Option<Reply>, KernelError> {
        let out = self.perform(op);
        if !matches!(out, Ok(None)) {
            self.resume_suspended();
        }
        out
    }

    /// Runs `op`, parking it if it blocks.
    pub fn submit(&mut self, op: Op) -> Result<Submitted, KernelError> {
        match self.try_op(&op)? {
            Some(reply) => Ok(Submitted::Ready(reply)),
            None => {
                let ticket = Ticket(self.next_ticket);
                self.next_ticket += 1;
                let name = self.resolve(op.board())?;
                self.boards.get_mut(&name).expect("resolved").suspended.push_back((ticket, op));
                Ok(Submitted::Pending(ticket))
            }
        }
    }

    /// Outcome of a parked operation once it has completed.
    pub fn take_completed(&mut self, ticket: Ticket) -> Option<Result<Reply, KernelError>> {
        self.completed.remove(&ticket)
    }

    /// Withdraws a parked operation. Returns the outcome instead if it
    /// completed in the meantime.
    pub fn cancel(&mut self, ticket: Ticket) -> Option<Result<Reply, KernelError>> {
        for board in self.boards.values_mut() {
            board.suspended.retain(|(t, _)| *t != ticket);
        }
        self.completed.remove(&ticket)
    }

    pub fn is_pending(&self, ticket: Ticket) -> bool {
        self.boards.values().any(|b| b.suspended.iter().any(|(t, _)| *t == ticket))
    }

    /// Parked operations, board by board in FIFO order.
    pub fn pending_ops(&self) -> Vec<(Ticket, Op)> {
        self.boards.values().flat_map(|b| b.suspended.iter().cloned()).collect()
    }

    /// Retries parked operations until a full pass makes no progress.
    pub fn resume_suspended(&mut self) {
        loop {
            let mut progressed = false;
            let names: Vec<String> =
                self.boards.iter().filter(|(_, b)| !b.suspended.is_empty()).map(|(n, _)| n.clone()).collect();
            for name in names {
                let queue = std::mem::take(&mut self.boards.get_mut(&name).expect("listed").suspended);
                let mut keep = VecDeque::new();
                for (ticket, op) in queue {
                    match self.perform(&op) {
                        Ok(None) => keep.push_back((ticket, op)),
                        Ok(Some(reply)) => {
                            self.completed.insert(ticket, Ok(reply));
                            progressed = true;
                        }
                        Err(e) => {
                            self.completed.insert(ticket, Err(e));
                            progressed = true;
                        }
                    }
                }
                self.boards.get_mut(&name).expect("listed").suspended = keep;
            }
            if !progressed {
                return;
            }
        }
    }

    pub fn tell(&mut self, board: &str, tuple: Tuple) -> Result<(), KernelError> {
        self.try_op(&Op::Tell(BoardRef::local(board), tuple)).map(|_| ())
    }

    pub fn ask(&mut self, board: &str, template: Template) -> Result<Option<Binding>, KernelError> {
        Ok(self.try_op(&Op::Ask(BoardRef::local(board), template))?.map(|r| r.binding()))
    }

    pub fn get(&mut self, board: &str, template: Template) -> Result<Option<Binding>, KernelError> {
        Ok(self.try_op(&Op::Get(BoardRef::local(board), template))?.map(|r| r.binding()))
    }

    pub fn nask(&mut self, board: &str, template: Template) -> Result<bool, KernelError> {
        Ok(self.try_op(&Op::Nask(BoardRef::local(board), template))?.is_some())
    }

    /// Installs `rule` on `board` and returns its id. Installing a rule
    /// that is already present returns the existing id.
    pub fn tellr(&mut self, board: &str, rule: Rule) -> Result<RuleId, KernelError> {
        match self.try_op(&Op::TellR(BoardRef::local(board), rule))? {
            Some(Reply::Rule(id)) => Ok(id),
            other => unreachable!("tellr replied {other:?}"),
        }
    }

    pub fn getr(&mut self, board: &str, rule: Rule) -> Result<bool, KernelError> {
        Ok(self.try_op(&Op::GetR(BoardRef::local(board), rule))?.is_some())
    }

    /// Fires active forward rules hosted on `board` until none is left,
    /// following the chain to other boards.
    pub fn fire_all(&mut self, board: &str) -> Result<Vec<FiringRecord>, KernelError> {
        self.board(board)?;
        let mark = self.firings.len();
        let out = self.settle(VecDeque::from([Work::Fire(board.to_string())]));
        let fired = self.firings.iter().skip(mark).cloned().collect();
        out.map(|_| fired)
    }

    /// Takes the log of firings since the last call.
    pub fn drain_firings(&mut self) -> Vec<FiringRecord> {
        self.firings.drain(..).collect()
    }

    pub fn activation_states(&self) -> Vec<ActivationState> {
        self.rules.values().map(|h| h.state.clone()).collect()
    }

    pub fn contents(&self) -> BTreeMap<String, BTreeMap<Tuple, usize>> {
        self.boards.iter().map(|(n, b)| (n.clone(), b.content.counts())).collect()
    }

    fn board(&self, name: &str) -> Result<&Board, KernelError> {
        self.boards.get(name).ok_or_else(|| KernelError::UnknownBlackboard(name.to_string()))
    }

    /// `r` with a local host qualifier dropped.
    fn localize(&self, r: &BoardRef) -> BoardRef {
        match &r.host {
            Some(h) if self.config.local_hosts.iter().any(|l| l == h) => r.unqualified(),
            _ => r.clone(),
        }
    }

    /// Name of the existing local board `r` denotes.
    fn resolve(&self, r: &BoardRef) -> Result<String, KernelError> {
        let r = self.localize(r);
        if r.is_qualified() {
            return Err(KernelError::NotLocal(r));
        }
        self.board(&r.name)?;
        Ok(r.name)
    }

    fn local_name(&self, r: &BoardRef) -> Option<String> {
        let r = self.localize(r);
        (!r.is_qualified()).then_some(r.name)
    }

    fn perform(&mut self, op: &Op) -> Result<Option<Reply>, KernelError> {
        let board = self.resolve(op.board())?;
        self.clock += 1;
        match op {
            Op::Tell(_, t) => {
                self.insert(&board, t.clone());
                self.settle_from(&board)?;
                Ok(Some(Reply::Ack))
            }
            Op::Ask(_, t) => Ok(self.ask_on(&board, t).map(Reply::Bound)),
            Op::Get(_, t) => Ok(self.get_on(&board, t)?.map(Reply::Bound)),
            Op::Nask(_, t) => Ok(self.nask_on(&board, t).then_some(Reply::Ack)),
            Op::TellR(_, r) => Ok(Some(Reply::Rule(self.install(&board, r)?))),
            Op::AskR(_, r) => Ok(self.find_rule(&board, r).map(|_| Reply::Ack)),
            Op::GetR(_, r) => match self.find_rule(&board, r) {
                Some(id) => {
                    self.uninstall(id);
                    Ok(Some(Reply::Ack))
                }
                None => Ok(None),
            },
            Op::NaskR(_, r) => Ok(self.find_rule(&board, r).is_none().then_some(Reply::Ack)),
        }
    }

    fn insert(&mut self, board: &str, tuple: Tuple) {
        let id = InstanceId(self.next_instance);
        self.next_instance += 1;
        let b = self.boards.get_mut(board).expect("existing board");
        for rid in &b.watchers {
            let h = self.rules.get_mut(rid).expect("watcher is installed");
            for (k, p) in h.rule.lhs.iter().enumerate() {
                if p.template.covers(&tuple) {
                    h.state.blackboard_vector[k] += 1;
                }
            }
            if !h.state.is_active() {
                h.fired.clear();
            }
        }
        b.content.insert(tuple, id);
    }

    fn remove(&mut self, board: &str, tuple: &Tuple, id: InstanceId) -> Result<(), KernelError> {
        let b = self.boards.get_mut(board).expect("existing board");
        let removed = b.content.remove_instance(tuple, id);
        debug_assert!(removed, "removing a copy that is not stored");
        for rid in &b.watchers {
            let h = self.rules.get_mut(rid).expect("watcher is installed");
            for (k, p) in h.rule.lhs.iter().enumerate() {
                if p.template.covers(tuple) {
                    let bc = &mut h.state.blackboard_vector[k];
                    *bc = bc.checked_sub(1).ok_or(KernelError::CounterUnderflow { rule: *rid, slot: k })?;
                }
            }
            if !h.state.is_active() {
                h.fired.clear();
            } else if h.refract {
                h.fired.retain(|key| !key.iter().flatten().any(|i| *i == id));
            }
        }
        Ok(())
    }

    fn oldest_match(&self, board: &str, template: &Template) -> Option<(Tuple, InstanceId, Binding)> {
        self.boards[board].content.iter().find_map(|(t, ids)| {
            template.matches(t, &Binding::new()).map(|b| (t.clone(), ids[0], b))
        })
    }

    fn install(&mut self, board: &str, rule: &Rule) -> Result<RuleId, KernelError> {
        rule.validate()?;
        let rule = rule.map_boards(|b| self.localize(b));
        let host = rule.host_board();
        if host.is_qualified() || host.name != board {
            return Err(RuleViolation::HostMismatch { expected: host.to_string(), got: board.to_string() }.into());
        }
        for p in rule.lhs.iter().chain(&rule.rhs) {
            if !p.board.is_qualified() {
                self.board(&p.board.name)?;
            }
        }
        if let Some(id) = self.find_rule(board, &rule) {
            return Ok(id);
        }
        let id = RuleId(self.next_rule);
        self.next_rule += 1;
        let lhs_local = self.local_name(rule.lhs_board());
        let mut state = ActivationState::new(id, &rule);
        if let Some(l) = &lhs_local {
            let content = &self.boards[l].content;
            for (k, p) in rule.lhs.iter().enumerate() {
                state.blackboard_vector[k] = content.count_covered(&p.template);
            }
            self.boards.get_mut(l).expect("checked").watchers.push(id);
        }
        self.boards.get_mut(board).expect("checked").hosted.push(id);
        let hosted = Hosted {
            canonical: rule.canonical(),
            refract: rule.is_forward() && rule.lhs_in_fully_guarded(),
            host: board.to_string(),
            lhs_local,
            state,
            fired: HashSet::new(),
            rule,
        };
        let forward = hosted.rule.is_forward();
        self.rules.insert(id, hosted);
        if forward {
            self.settle_from(board)?;
        }
        Ok(id)
    }

    fn find_rule(&self, board: &str, rule: &Rule) -> Option<RuleId> {
        let canonical = rule.map_boards(|b| self.localize(b)).canonical();
        self.boards[board].hosted.iter().copied().find(|id| self.rules[id].canonical == canonical)
    }

    fn uninstall(&mut self, id: RuleId) {
        let h = self.rules.remove(&id).expect("installed");
        self.boards.get_mut(&h.host).expect("host").hosted.retain(|r| *r != id);
        if let Some(l) = h.lhs_local {
            self.boards.get_mut(&l).expect("lhs board").watchers.retain(|r| *r != id);
        }
    }

    fn log(&mut self, record: FiringRecord) {
        if self.firings.len() == FIRING_LOG_CAP {
            self.firings.pop_front();
        }
        self.firings.push_back(record);
    }
}

impl Engine for Kernel {
    fn create_board(&mut self, name: &str) {
        Kernel::create_board(self, name)
    }

    fn try_op(&mut self, op: &Op) -> Result<Option<Reply>, KernelError> {
        Kernel::try_op(self, op)
    }

    fn activation_states(&self) -> Vec<ActivationState> {
        Kernel::activation_states(self)
    }

    fn contents(&self) -> BTreeMap<String, BTreeMap<Tuple, usize>> {
        Kernel::contents(self)
    }

    fn drain_firings(&mut self) -> Vec<FiringRecord> {
        Kernel::drain_firings(self)
    }
}

#[cfg(test)]
mod tests;
