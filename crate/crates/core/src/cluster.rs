//! Several kernels in one process, addressed as `board@node`.
//!
//! Remote reads are answered from the other kernel's stored tuples at the
//! moment of the operation, which is what a network node does too.

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::agent::{Dispatch, OpFailure};
use crate::board::BoardRef;
use crate::engage::{link_rule, shared_boards, Event, SYSTEM_BOARD};
use crate::kernel::{Kernel, KernelConfig, KernelError, Op, RemoteEffect, Reply};
use crate::rule::RuleId;
use crate::tuple::{Template, Tuple};

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("no node named `{0}`")]
    UnknownNode(String),
    #[error("node `{0}` already exists")]
    DuplicateNode(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

struct Member {
    kernel: Kernel,
    public: Vec<String>,
    /// Link rules installed here, per peer.
    links: BTreeMap<String, Vec<(String, RuleId)>>,
}

pub struct Cluster {
    base: KernelConfig,
    members: BTreeMap<String, Member>,
}

impl Cluster {
    pub fn new(base: KernelConfig) -> Cluster {
        Cluster { base, members: BTreeMap::new() }
    }

    /// Adds a node with the given public boards plus the system board.
    pub fn add_node(&mut self, name: &str, boards: &[String]) -> Result<(), ClusterError> {
        if self.members.contains_key(name) {
            return Err(ClusterError::DuplicateNode(name.into()));
        }
        let seed = self.base.seed.wrapping_add(self.members.len() as u64);
        let mut kernel = Kernel::new(KernelConfig { seed, local_hosts: vec![name.to_string()], ..self.base.clone() });
        kernel.create_board(SYSTEM_BOARD);
        for b in boards {
            kernel.create_board(b);
        }
        let public = boards.iter().filter(|b| *b != SYSTEM_BOARD).cloned().collect();
        self.members.insert(name.into(), Member { kernel, public, links: BTreeMap::new() });
        Ok(())
    }

    pub fn node_names(&self) -> Vec<String> {
        self.members.keys().cloned().collect()
    }

    pub fn kernel(&self, node: &str) -> Result<&Kernel, ClusterError> {
        self.members.get(node).map(|m| &m.kernel).ok_or_else(|| ClusterError::UnknownNode(node.into()))
    }

    pub fn kernel_mut(&mut self, node: &str) -> Result<&mut Kernel, ClusterError> {
        self.members.get_mut(node).map(|m| &mut m.kernel).ok_or_else(|| ClusterError::UnknownNode(node.into()))
    }

    pub fn is_connected(&self, a: &str, b: &str) -> bool {
        self.members.get(a).is_some_and(|m| m.links.contains_key(b))
    }

    /// Link rules `node` currently hosts for `peer`.
    pub fn link_rules(&self, node: &str, peer: &str) -> Vec<RuleId> {
        self.members
            .get(node)
            .and_then(|m| m.links.get(peer))
            .map(|l| l.iter().map(|(_, id)| *id).collect())
            .unwrap_or_default()
    }

    /// Runs `op` on `node` without blocking: `Ok(None)` if it would wait.
    pub fn attempt(&mut self, node: &str, op: &Op) -> Result<Option<Reply>, OpFailure> {
        let Some(member) = self.members.get(node) else {
            return Err(OpFailure::new("UnknownNode", format!("no node named `{node}`")));
        };
        if let Some(host) = &op.board().host {
            if !member.kernel.config().local_hosts.contains(host) {
                if !self.members.contains_key(host) {
                    return Err(OpFailure::new("PeerUnreachable", format!("no node named `{host}`")));
                }
                let local = op.with_board(BoardRef::local(op.board().name.clone()));
                return self.attempt(&host.clone(), &local);
            }
        }
        let answers: Vec<_> = member
            .kernel
            .remote_needs(op)
            .into_iter()
            .filter_map(|q| {
                let other = &self.members.get(q.board.host.as_deref()?)?.kernel;
                let found = other.matching(&q.board.name, &q.template).ok()?;
                Some((q, found))
            })
            .collect();
        let mut effects = VecDeque::new();
        let kernel = &mut self.members.get_mut(node).expect("checked").kernel;
        kernel.install_remote(answers);
        let mut reply = kernel.try_op(op);
        if let (Ok(None), Op::Get(board, template)) = (&reply, op) {
            if let Ok(Some(plan)) = kernel.plan_remote_get(board, template) {
                for (b, t) in plan.take {
                    effects.push_back(RemoteEffect::Retract(b, t));
                }
                for (b, t) in plan.produce {
                    effects.push_back(RemoteEffect::Tell(b, t));
                }
                reply = Ok(Some(Reply::Bound(plan.binding)));
            }
        }
        kernel.clear_remote();
        effects.extend(kernel.take_outbox());
        self.deliver(effects);
        reply.map_err(OpFailure::from)
    }

    /// Applies effects on remote boards, and whatever they cause in turn.
    /// Effects on unknown nodes are dropped, like messages to a host that
    /// has gone away.
    fn deliver(&mut self, mut effects: VecDeque<RemoteEffect>) {
        while let Some(e) = effects.pop_front() {
            let (RemoteEffect::Tell(b, _) | RemoteEffect::Retract(b, _)) = &e;
            let Some(m) = b.host.as_deref().and_then(|h| self.members.get_mut(h)) else {
                log::debug!("dropping {e:?}");
                continue;
            };
            let local = BoardRef::local(b.name.clone());
            let op = match e {
                RemoteEffect::Tell(_, t) => Op::Tell(local, t),
                RemoteEffect::Retract(_, t) => Op::Get(local, Template::from(t)),
            };
            if let Err(err) = m.kernel.try_op(&op) {
                log::debug!("remote effect `{op}` failed: {err}");
            }
            effects.extend(m.kernel.take_outbox());
        }
    }

    /// Engages `a` and `b`: each side announces the other on its system
    /// board and links every shared board to the peer's copy. Returns false
    /// if they were already engaged.
    pub fn connect(&mut self, a: &str, b: &str) -> Result<bool, ClusterError> {
        for n in [a, b] {
            self.kernel(n)?;
        }
        if self.is_connected(a, b) {
            return Ok(false);
        }
        let shared = shared_boards(&self.members[a].public, &self.members[b].public);
        for (me, peer) in [(a, b), (b, a)] {
            let m = self.members.get_mut(me).expect("checked");
            m.kernel.tell(SYSTEM_BOARD, Event::Connect.tuple(peer))?;
            let mut ids = Vec::new();
            for board in &shared {
                ids.push((board.clone(), m.kernel.tellr(board, link_rule(board, peer, board))?));
            }
            m.links.insert(peer.to_string(), ids);
        }
        Ok(true)
    }

    /// Removes the links between `a` and `b`. Returns false if they were
    /// not engaged.
    pub fn disconnect(&mut self, a: &str, b: &str) -> Result<bool, ClusterError> {
        for n in [a, b] {
            self.kernel(n)?;
        }
        if !self.is_connected(a, b) {
            return Ok(false);
        }
        for (me, peer) in [(a, b), (b, a)] {
            let m = self.members.get_mut(me).expect("checked");
            m.kernel.tell(SYSTEM_BOARD, Event::Disconnect.tuple(peer))?;
            for (board, _) in m.links.remove(peer).unwrap_or_default() {
                m.kernel.getr(&board, link_rule(&board, peer, &board))?;
            }
        }
        Ok(true)
    }

    pub fn tell(&mut self, node: &str, board: &str, tuple: Tuple) -> Result<(), OpFailure> {
        self.attempt(node, &Op::Tell(BoardRef::local(board), tuple)).map(|_| ())
    }
}

/// A cluster seen from one node, for running agents there.
pub struct At<'c> {
    pub cluster: &'c mut Cluster,
    pub node: String,
}

impl Dispatch for At<'_> {
    fn attempt(&mut self, op: &Op) -> Result<Option<Reply>, OpFailure> {
        self.cluster.attempt(&self.node, op)
    }
}
