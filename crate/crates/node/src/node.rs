use std::collections::BTreeMap;
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use bach_core::agent::{AgentExpr, AgentOutcome, Dispatch, Interpreter, OpFailure};
use bach_core::engage::{link_rule, shared_boards, Event, SYSTEM_BOARD};
use bach_core::kernel::RemoteEffect;
use bach_core::syntax::{parse_rule, parse_template, parse_tuple, BareVar};
use bach_core::{BoardRef, Kernel, KernelConfig, Op, Reply, RuleId, Template, Tuple};

use crate::client::{self, decode_reply, encode, encode_reply};
use crate::wire::{self, read_frame, write_frame, Body, Request, Response, Verb};
use crate::{NodeConfig, NodeError};

/// How often a blocked operation re-reads remote boards it depends on.
const REMOTE_POLL: Duration = Duration::from_millis(25);
/// Upper bound on a single condition-variable wait, so shutdown is noticed.
const WAIT_SLICE: Duration = Duration::from_millis(100);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkState {
    Connected,
    Disconnected,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeerLink {
    pub name: String,
    pub endpoint: SocketAddr,
    pub state: LinkState,
    /// Link rules hosted here, by board.
    pub local_rules: Vec<(String, RuleId)>,
    /// Link rules the peer hosts for us.
    pub remote_rules: Vec<RuleId>,
}

struct State {
    kernel: Kernel,
    /// Bumped on every change, so waiters can tell whether to look again.
    version: u64,
}

struct Shared {
    config: NodeConfig,
    state: Mutex<State>,
    changed: Condvar,
    peers: Mutex<BTreeMap<String, PeerLink>>,
    /// Outgoing calls in progress, by call id, with the host they target.
    inflight: Mutex<BTreeMap<u64, (String, TcpStream)>>,
    /// Accepted connections, closed on shutdown.
    conns: Mutex<Vec<TcpStream>>,
    next_call: AtomicU64,
    stopping: AtomicBool,
}

/// A running node. Dropping it stops the listener.
pub struct Node {
    shared: Arc<Shared>,
    accept: Option<JoinHandle<()>>,
}

impl Node {
    pub fn serve(config: NodeConfig) -> Result<Node, NodeError> {
        config.validate()?;
        let listener = TcpListener::bind(config.endpoint)
            .map_err(|source| NodeError::BindFailure { addr: config.endpoint, source })?;
        let endpoint = listener.local_addr().map_err(|source| NodeError::BindFailure { addr: config.endpoint, source })?;
        let config = NodeConfig { endpoint, ..config };
        let mut kernel = Kernel::new(KernelConfig {
            seed: config.seed,
            fuel: config.fuel,
            chain_depth: config.chain_depth,
            local_hosts: vec![config.name.clone(), endpoint.to_string()],
            reactive: true,
        });
        kernel.create_board(SYSTEM_BOARD);
        for b in &config.public {
            kernel.create_board(b);
        }
        let shared = Arc::new(Shared {
            config,
            state: Mutex::new(State { kernel, version: 0 }),
            changed: Condvar::new(),
            peers: Mutex::new(BTreeMap::new()),
            inflight: Mutex::new(BTreeMap::new()),
            conns: Mutex::new(Vec::new()),
            next_call: AtomicU64::new(0),
            stopping: AtomicBool::new(false),
        });
        let s = shared.clone();
        let accept = thread::Builder::new()
            .name(format!("{}-accept", s.config.name))
            .spawn(move || s.accept_loop(listener))
            .expect("spawn accept thread");
        log::info!("node {} listening on {endpoint}", shared.config.name);
        Ok(Node { shared, accept: Some(accept) })
    }

    pub fn name(&self) -> &str {
        &self.shared.config.name
    }

    pub fn endpoint(&self) -> SocketAddr {
        self.shared.config.endpoint
    }

    pub fn config(&self) -> &NodeConfig {
        &self.shared.config
    }

    /// Runs `f` on the kernel and wakes blocked operations afterwards.
    pub fn with_kernel<R>(&self, f: impl FnOnce(&mut Kernel) -> R) -> R {
        let mut st = self.shared.lock();
        let out = f(&mut st.kernel);
        self.shared.touch(st);
        out
    }

    /// Runs `op` without waiting: `Ok(None)` if it would block.
    pub fn try_call(&self, op: &Op) -> Result<Option<Reply>, NodeError> {
        self.shared.attempt(op)
    }

    /// Runs `op`, waiting up to `deadline` for it to become possible.
    pub fn call(&self, op: &Op, deadline: Duration) -> Result<Reply, NodeError> {
        self.shared.call(op, deadline)
    }

    /// Engages the node at `endpoint` and returns its name. Connecting to an
    /// engaged peer again changes nothing.
    pub fn connect_peer(&self, endpoint: SocketAddr) -> Result<String, NodeError> {
        self.shared.connect_peer(endpoint)
    }

    /// Disengages `peer`. Returns false if it was not engaged.
    pub fn disconnect_peer(&self, peer: &str) -> Result<bool, NodeError> {
        self.shared.disconnect_peer(peer)
    }

    pub fn peers(&self) -> Vec<PeerLink> {
        self.shared.peers.lock().expect("peers lock").values().cloned().collect()
    }

    pub fn peer(&self, name: &str) -> Option<PeerLink> {
        self.shared.peers.lock().expect("peers lock").get(name).cloned()
    }

    /// Runs an agent here, waiting up to `deadline` whenever it blocks.
    pub fn run_agent(&self, expr: &AgentExpr, seed: u64, fuel: usize, deadline: Duration) -> AgentOutcome {
        let end = Instant::now() + deadline;
        let mut it = Interpreter::new(expr, seed, fuel);
        loop {
            let seen = self.shared.lock().version;
            it.run(&mut At(&self.shared));
            if it.status().is_final() || Instant::now() >= end || self.shared.stopping.load(Ordering::SeqCst) {
                return it.outcome();
            }
            self.shared.wait_change(seen, end);
        }
    }

    pub fn shutdown(&mut self) {
        let Some(handle) = self.accept.take() else { return };
        self.shared.stopping.store(true, Ordering::SeqCst);
        // wake the accept loop
        let _ = TcpStream::connect_timeout(&self.endpoint(), Duration::from_millis(200));
        let _ = handle.join();
        for c in self.shared.conns.lock().expect("conns lock").drain(..) {
            let _ = c.shutdown(Shutdown::Both);
        }
        for (_, s) in self.shared.inflight.lock().expect("inflight lock").values() {
            let _ = s.shutdown(Shutdown::Both);
        }
        self.shared.changed.notify_all();
        log::info!("node {} stopped", self.name());
    }
}

impl Drop for Node {
    fn drop(&mut self) {
        self.shutdown();
    }
}

struct At<'a>(&'a Shared);

impl Dispatch for At<'_> {
    fn attempt(&mut self, op: &Op) -> Result<Option<Reply>, OpFailure> {
        self.0.attempt(op).map_err(|e| OpFailure::new(e.kind(), e.message()))
    }
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().expect("kernel lock")
    }

    fn touch(&self, mut st: MutexGuard<'_, State>) {
        st.version += 1;
        drop(st);
        self.changed.notify_all();
    }

    /// Sleeps until the kernel changes from version `seen`, or a poll
    /// interval passes when remote boards matter, or `end`.
    fn wait_change(&self, seen: u64, end: Instant) {
        let st = self.lock();
        let slice = if st.kernel.has_remote_rules() { REMOTE_POLL } else { WAIT_SLICE };
        let budget = end.saturating_duration_since(Instant::now()).min(slice);
        let _ = self.changed.wait_timeout_while(st, budget, |s| s.version == seen && !self.stopping.load(Ordering::SeqCst));
    }

    fn is_local(&self, host: &str) -> bool {
        host == self.config.name || host == self.config.endpoint.to_string()
    }

    fn resolve(&self, host: &str) -> Result<SocketAddr, NodeError> {
        if let Some(p) = self.peers.lock().expect("peers lock").get(host) {
            return Ok(p.endpoint);
        }
        host.parse().map_err(|_| NodeError::PeerUnreachable(format!("unknown host `{host}`")))
    }

    /// A request to another node, registered so that disengaging `host`
    /// can cut it short.
    fn remote(&self, host: &str, endpoint: SocketAddr, req: &Request, deadline: Instant) -> Result<String, NodeError> {
        let mut stream = client::open(endpoint, deadline)?;
        let call = self.next_call.fetch_add(1, Ordering::Relaxed);
        if let Ok(clone) = stream.try_clone() {
            self.inflight.lock().expect("inflight lock").insert(call, (host.to_string(), clone));
        }
        let out = client::exchange(&mut stream, req, deadline);
        self.inflight.lock().expect("inflight lock").remove(&call);
        out
    }

    fn remote_op(&self, host: &str, op: &Op, wait: Duration, deadline: Instant) -> Result<Reply, NodeError> {
        let endpoint = self.resolve(host)?;
        let (verb, payload) = encode(op);
        let board = BoardRef::local(op.board().name.clone());
        let req = Request { id: client::next_id(), verb, board: Some(board), wait: Some(wait.as_millis() as u64), payload };
        let payload = self.remote(host, endpoint, &req, deadline)?;
        decode_reply(verb, &payload)
    }

    /// Stored tuples on a remote board, or `None` if it cannot be read.
    fn read_remote(&self, board: &BoardRef, template: &Template) -> Option<Vec<Tuple>> {
        let host = board.host.as_deref()?;
        let endpoint = self.resolve(host).ok()?;
        let req = Request {
            id: client::next_id(),
            verb: Verb::Read,
            board: Some(BoardRef::local(board.name.clone())),
            wait: None,
            payload: template.to_string(),
        };
        match self.remote(host, endpoint, &req, Instant::now() + self.config.timeout) {
            Ok(payload) => bach_core::syntax::parse_tuples(&payload).ok(),
            Err(e) => {
                log::debug!("reading {board}: {e}");
                None
            }
        }
    }

    fn deliver(&self, effects: Vec<RemoteEffect>) {
        for e in effects {
            let (op, host) = match &e {
                RemoteEffect::Tell(b, t) => (Op::Tell(b.clone(), t.clone()), b.host.clone()),
                RemoteEffect::Retract(b, t) => (Op::Get(b.clone(), Template::from(t)), b.host.clone()),
            };
            let Some(host) = host else { continue };
            let deadline = Instant::now() + self.config.timeout;
            if let Err(err) = self.remote_op(&host, &op, Duration::ZERO, deadline) {
                log::warn!("remote effect {e:?} failed: {err}");
            }
        }
    }

    fn attempt(&self, op: &Op) -> Result<Option<Reply>, NodeError> {
        if let Some(host) = op.board().host.as_deref().filter(|h| !self.is_local(h)) {
            let deadline = Instant::now() + self.config.timeout;
            return match self.remote_op(host, op, Duration::ZERO, deadline) {
                Ok(r) => Ok(Some(r)),
                Err(NodeError::Remote { kind, .. }) if kind == "Blocked" => Ok(None),
                Err(e) => Err(e),
            };
        }
        let needs = self.lock().kernel.remote_needs(op);
        let answers: Vec<_> = needs
            .into_iter()
            .filter_map(|q| {
                let found = self.read_remote(&q.board, &q.template)?;
                Some((q, found))
            })
            .collect();
        let mut st = self.lock();
        st.kernel.install_remote(answers);
        let mut reply = st.kernel.try_op(op);
        let mut plan = None;
        if let (Ok(None), Op::Get(board, template)) = (&reply, op) {
            plan = st.kernel.plan_remote_get(board, template).ok().flatten();
        }
        st.kernel.clear_remote();
        let outbox = st.kernel.take_outbox();
        let changed = !matches!(reply, Ok(None)) || !outbox.is_empty();
        if changed {
            self.touch(st);
        } else {
            drop(st);
        }
        self.deliver(outbox);
        if let Some(plan) = plan {
            let deadline = Instant::now() + self.config.timeout;
            let mut taken = true;
            for (b, t) in &plan.take {
                let host = b.host.clone().unwrap_or_default();
                let get = Op::Get(b.clone(), Template::from(t));
                if self.remote_op(&host, &get, Duration::ZERO, deadline).is_err() {
                    taken = false;
                    break;
                }
            }
            if taken {
                self.deliver(plan.produce.into_iter().map(|(b, t)| RemoteEffect::Tell(b, t)).collect());
                reply = Ok(Some(Reply::Bound(plan.binding)));
            }
        }
        Ok(reply?)
    }

    fn call(&self, op: &Op, deadline: Duration) -> Result<Reply, NodeError> {
        let end = Instant::now() + deadline;
        if let Some(host) = op.board().host.as_deref().filter(|h| !self.is_local(h)) {
            return self.remote_op(host, op, deadline, end).map_err(|e| match e {
                NodeError::Timeout(_) => NodeError::Timeout(deadline),
                e => e,
            });
        }
        loop {
            let seen = self.lock().version;
            if let Some(r) = self.attempt(op)? {
                return Ok(r);
            }
            if self.stopping.load(Ordering::SeqCst) {
                return Err(NodeError::RemoteFailure("node is shutting down".into()));
            }
            if Instant::now() >= end {
                return Err(NodeError::Timeout(deadline));
            }
            self.wait_change(seen, end);
        }
    }

    fn connect_peer(&self, endpoint: SocketAddr) -> Result<String, NodeError> {
        if let Some(p) = self.peers.lock().expect("peers lock").values().find(|p| p.endpoint == endpoint) {
            if p.state == LinkState::Connected {
                return Ok(p.name.clone());
            }
        }
        let hello = Request {
            id: client::next_id(),
            verb: Verb::Hello,
            board: None,
            wait: None,
            payload: format!(
                "name={} endpoint={} boards={}",
                self.config.name,
                self.config.endpoint,
                self.config.public.join(",")
            ),
        };
        let reply = self.remote(&endpoint.to_string(), endpoint, &hello, Instant::now() + self.config.timeout)?;
        let (mut name, mut boards, mut remote_rules) = (String::new(), Vec::new(), Vec::new());
        for (k, v) in wire::fields(&reply) {
            match k {
                "name" => name = v.to_string(),
                "boards" => boards = wire::list(v),
                "rules" => {
                    remote_rules = wire::list(v).iter().filter_map(|r| r.strip_prefix('r')?.parse().ok()).map(RuleId).collect()
                }
                _ => {}
            }
        }
        if !bach_core::tuple::is_atom(&name) || name == self.config.name {
            return Err(NodeError::Protocol(format!("bad HELLO reply `{reply}`")));
        }
        match self.engage(&name, endpoint, &boards, remote_rules) {
            Ok(_) => Ok(name),
            Err(e) => {
                // the peer linked itself already; undo that
                let _ = self.send_bye(endpoint);
                Err(e)
            }
        }
    }

    /// Records `peer` as engaged and installs the local side of the links.
    /// Returns the local link rule ids.
    fn engage(&self, peer: &str, endpoint: SocketAddr, boards: &[String], remote_rules: Vec<RuleId>) -> Result<Vec<RuleId>, NodeError> {
        let mut peers = self.peers.lock().expect("peers lock");
        if let Some(p) = peers.get(peer).filter(|p| p.state == LinkState::Connected) {
            return Ok(p.local_rules.iter().map(|(_, id)| *id).collect());
        }
        let shared = shared_boards(&self.config.public, boards);
        let mut st = self.lock();
        let mut installed = Vec::new();
        for b in &shared {
            match st.kernel.tellr(b, link_rule(b, peer, b)) {
                Ok(id) => installed.push((b.clone(), id)),
                Err(e) => {
                    for (b, _) in &installed {
                        let _ = st.kernel.getr(b, link_rule(b, peer, b));
                    }
                    return Err(e.into());
                }
            }
        }
        st.kernel.tell(SYSTEM_BOARD, Event::Connect.tuple(peer))?;
        self.touch(st);
        let ids = installed.iter().map(|(_, id)| *id).collect();
        log::info!("{} engaged {peer} on {shared:?}", self.config.name);
        peers.insert(
            peer.to_string(),
            PeerLink { name: peer.to_string(), endpoint, state: LinkState::Connected, local_rules: installed, remote_rules },
        );
        Ok(ids)
    }

    /// Removes the local side of the links to `peer` and cuts its calls.
    fn disengage(&self, peer: &str) -> Result<bool, NodeError> {
        let mut peers = self.peers.lock().expect("peers lock");
        let Some(link) = peers.get_mut(peer).filter(|p| p.state == LinkState::Connected) else {
            return Ok(false);
        };
        let mut st = self.lock();
        st.kernel.tell(SYSTEM_BOARD, Event::Disconnect.tuple(peer))?;
        for (b, _) in link.local_rules.drain(..) {
            st.kernel.getr(&b, link_rule(&b, peer, &b))?;
        }
        link.remote_rules.clear();
        link.state = LinkState::Disconnected;
        self.touch(st);
        let endpoint = link.endpoint.to_string();
        drop(peers);
        for (host, s) in self.inflight.lock().expect("inflight lock").values() {
            if host == peer || *host == endpoint {
                let _ = s.shutdown(Shutdown::Both);
            }
        }
        log::info!("{} disengaged {peer}", self.config.name);
        Ok(true)
    }

    fn send_bye(&self, endpoint: SocketAddr) -> Result<String, NodeError> {
        let bye = Request {
            id: client::next_id(),
            verb: Verb::Bye,
            board: None,
            wait: None,
            payload: format!("name={}", self.config.name),
        };
        self.remote(&endpoint.to_string(), endpoint, &bye, Instant::now() + self.config.timeout)
    }

    fn disconnect_peer(&self, peer: &str) -> Result<bool, NodeError> {
        let endpoint = match self.peers.lock().expect("peers lock").get(peer) {
            Some(p) if p.state == LinkState::Connected => p.endpoint,
            _ => return Ok(false),
        };
        self.disengage(peer)?;
        // the peer removes its half on its own; an unreachable peer will
        // find the link gone when it next reads through it
        if let Err(e) = self.send_bye(endpoint) {
            log::warn!("BYE to {peer} failed: {e}");
        }
        Ok(true)
    }

    fn accept_loop(self: Arc<Self>, listener: TcpListener) {
        for conn in listener.incoming() {
            if self.stopping.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = conn else { continue };
            stream.set_nodelay(true).ok();
            if let Ok(c) = stream.try_clone() {
                let mut conns = self.conns.lock().expect("conns lock");
                conns.retain(|c| c.peer_addr().is_ok());
                conns.push(c);
            }
            let s = self.clone();
            let spawned = thread::Builder::new().name(format!("{}-conn", self.config.name)).spawn(move || s.serve_conn(stream));
            if let Err(e) = spawned {
                log::error!("cannot spawn connection thread: {e}");
            }
        }
    }

    fn serve_conn(&self, mut stream: TcpStream) {
        loop {
            let frame = match read_frame(&mut stream) {
                Ok(Some(f)) => f,
                Ok(None) => return,
                Err(e) => {
                    log::debug!("connection dropped: {e}");
                    return;
                }
            };
            let resp = match String::from_utf8(frame) {
                Err(_) => Response {
                    id: None,
                    body: Body::Err { kind: "ProtocolError".into(), message: "frame is not UTF-8".into() },
                },
                Ok(text) => match Request::parse(&text) {
                    Err(bad) => Response { id: bad.id, body: Body::Err { kind: bad.kind.into(), message: bad.message } },
                    Ok(req) => {
                        let body = match self.handle(&req) {
                            Ok(payload) => Body::Ok(payload),
                            Err(e) => Body::Err { kind: e.kind().to_string(), message: e.message() },
                        };
                        Response { id: Some(req.id), body }
                    }
                },
            };
            if write_frame(&mut stream, &resp.to_string()).is_err() {
                return;
            }
        }
    }

    fn local_board(&self, req: &Request) -> Result<String, NodeError> {
        let b = req.board.as_ref().ok_or_else(|| NodeError::Protocol("missing board".into()))?;
        match &b.host {
            Some(h) if !self.is_local(h) => Err(NodeError::Kernel(bach_core::KernelError::NotLocal(b.clone()))),
            _ => Ok(b.name.clone()),
        }
    }

    fn handle(&self, req: &Request) -> Result<String, NodeError> {
        let syntax = |e: bach_core::syntax::SyntaxError| NodeError::Protocol(format!("payload: {e}"));
        let wait = req.wait.map(Duration::from_millis).unwrap_or(self.config.timeout);
        let op = match req.verb {
            Verb::ListBoards => return Ok(self.config.public.join(" ")),
            Verb::Hello => return self.on_hello(&req.payload),
            Verb::Bye => {
                let name = wire::fields(&req.payload).find(|(k, _)| *k == "name").map(|(_, v)| v.to_string());
                let name = name.ok_or_else(|| NodeError::Protocol("BYE without name".into()))?;
                self.disengage(&name)?;
                return Ok(String::new());
            }
            Verb::AskCount | Verb::Read => {
                let board = self.local_board(req)?;
                let t = parse_template(&req.payload, BareVar::Bind).map_err(syntax)?;
                let found = self.lock().kernel.matching(&board, &t)?;
                return Ok(if req.verb == Verb::AskCount {
                    found.len().to_string()
                } else {
                    found.iter().map(Tuple::to_string).collect::<Vec<_>>().join(" ")
                });
            }
            verb => {
                let b = BoardRef::local(self.local_board(req)?);
                let template = || parse_template(&req.payload, BareVar::Bind).map_err(syntax);
                let rule = || parse_rule(&req.payload).map_err(syntax);
                match verb {
                    Verb::Tell => Op::Tell(b, parse_tuple(&req.payload).map_err(syntax)?),
                    Verb::Ask => Op::Ask(b, template()?),
                    Verb::Get => Op::Get(b, template()?),
                    Verb::Nask => Op::Nask(b, template()?),
                    Verb::TellR => Op::TellR(b, rule()?),
                    Verb::AskR => Op::AskR(b, rule()?),
                    Verb::GetR => Op::GetR(b, rule()?),
                    _ => Op::NaskR(b, rule()?),
                }
            }
        };
        let reply = if wait.is_zero() {
            self.attempt(&op)?.ok_or_else(|| NodeError::Remote {
                kind: "Blocked".into(),
                message: format!("{} would block", req.verb.name()),
            })?
        } else {
            self.call(&op, wait)?
        };
        Ok(encode_reply(&reply))
    }

    fn on_hello(&self, payload: &str) -> Result<String, NodeError> {
        let (mut name, mut endpoint, mut boards) = (None, None, Vec::new());
        for (k, v) in wire::fields(payload) {
            match k {
                "name" => name = Some(v.to_string()),
                "endpoint" => endpoint = v.parse::<SocketAddr>().ok(),
                "boards" => boards = wire::list(v),
                _ => {}
            }
        }
        let (Some(name), Some(endpoint)) = (name, endpoint) else {
            return Err(NodeError::Protocol("HELLO needs name and endpoint".into()));
        };
        if !bach_core::tuple::is_atom(&name) || name == self.config.name {
            return Err(NodeError::Protocol(format!("unacceptable peer name `{name}`")));
        }
        let ids = self.engage(&name, endpoint, &boards, Vec::new())?;
        let ids: Vec<String> = ids.iter().map(RuleId::to_string).collect();
        Ok(format!("name={} boards={} rules={}", self.config.name, self.config.public.join(","), ids.join(",")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(name: &str, boards: &[&str]) -> Node {
        let cfg = NodeConfig::new(name, "127.0.0.1:0".parse().unwrap()).with_boards(boards.iter().copied());
        Node::serve(cfg).unwrap()
    }

    #[test]
    fn unknown_verb_and_bad_payload_are_errors() {
        let n = node("a", &["b"]);
        let c = crate::Client::new(n.endpoint(), Duration::from_millis(500));
        assert_eq!(c.request(Verb::Tell, Some("b"), "<oops").unwrap_err().kind(), "ProtocolError");
        assert_eq!(c.request(Verb::Tell, Some("zz"), "<x>").unwrap_err().kind(), "UnknownBlackboard");
        assert_eq!(c.request(Verb::Tell, Some("b@elsewhere"), "<x>").unwrap_err().kind(), "NotLocal");
    }

    #[test]
    fn zero_wait_reports_blocked() {
        let n = node("a", &["b"]);
        let c = crate::Client::new(n.endpoint(), Duration::ZERO);
        let err = c.request(Verb::Get, Some("b"), "<x>");
        // a zero client deadline cannot even send
        assert!(err.is_err());
        let c = crate::Client::new(n.endpoint(), Duration::from_millis(300));
        let req = Request { id: 99, verb: Verb::Get, board: Some(BoardRef::local("b")), wait: Some(0), payload: "<x>".into() };
        let mut s = client::open(n.endpoint(), Instant::now() + c.timeout).unwrap();
        let err = client::exchange(&mut s, &req, Instant::now() + c.timeout).unwrap_err();
        assert_eq!(err.kind(), "Blocked");
    }
}
