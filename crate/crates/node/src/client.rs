//! Blocking client side of the protocol: one connection per call.

use std::io;
use std::net::{SocketAddr, TcpStream};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use bach_core::syntax::{parse_binding, parse_tuples};
use bach_core::{Binding, BoardRef, Op, Reply, Rule, RuleId, Template, Tuple};

use crate::wire::{read_frame, write_frame, Body, Request, Response, Verb};
use crate::NodeError;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

pub fn next_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

pub fn open(endpoint: SocketAddr, deadline: Instant) -> Result<TcpStream, NodeError> {
    let budget = deadline.saturating_duration_since(Instant::now()).max(Duration::from_millis(1));
    let stream = TcpStream::connect_timeout(&endpoint, budget)
        .map_err(|e| NodeError::PeerUnreachable(format!("{endpoint}: {e}")))?;
    stream.set_nodelay(true).ok();
    Ok(stream)
}

/// Sends `req` on `stream` and waits for its reply until `deadline`.
pub fn exchange(stream: &mut TcpStream, req: &Request, deadline: Instant) -> Result<String, NodeError> {
    let lost = |e: io::Error| NodeError::RemoteFailure(format!("connection lost: {e}"));
    write_frame(stream, &req.to_string()).map_err(lost)?;
    let started = Instant::now();
    let remaining = deadline.saturating_duration_since(started);
    if remaining.is_zero() {
        return Err(NodeError::Timeout(Duration::ZERO));
    }
    stream.set_read_timeout(Some(remaining)).map_err(lost)?;
    let frame = match read_frame(stream) {
        Ok(Some(f)) => f,
        Ok(None) => return Err(NodeError::RemoteFailure("connection closed before the reply".into())),
        Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
            return Err(NodeError::Timeout(remaining))
        }
        Err(e) => return Err(lost(e)),
    };
    let text = String::from_utf8(frame).map_err(|_| NodeError::Protocol("reply is not UTF-8".into()))?;
    let resp = Response::parse(&text).ok_or_else(|| NodeError::Protocol(format!("unreadable reply `{text}`")))?;
    if resp.id != Some(req.id) {
        return Err(NodeError::Protocol(format!("reply for {:?} to request {}", resp.id, req.id)));
    }
    match resp.body {
        Body::Ok(payload) => Ok(payload),
        Body::Err { kind, message } => Err(NodeError::from_wire(kind, message)),
    }
}

/// Wire verb and payload for a kernel operation.
pub fn encode(op: &Op) -> (Verb, String) {
    match op {
        Op::Tell(_, t) => (Verb::Tell, t.to_string()),
        Op::Ask(_, t) => (Verb::Ask, t.to_string()),
        Op::Get(_, t) => (Verb::Get, t.to_string()),
        Op::Nask(_, t) => (Verb::Nask, t.to_string()),
        Op::TellR(_, r) => (Verb::TellR, r.to_string()),
        Op::AskR(_, r) => (Verb::AskR, r.to_string()),
        Op::GetR(_, r) => (Verb::GetR, r.to_string()),
        Op::NaskR(_, r) => (Verb::NaskR, r.to_string()),
    }
}

/// Reply payload for a completed operation.
pub fn encode_reply(reply: &Reply) -> String {
    match reply {
        Reply::Ack => String::new(),
        Reply::Bound(b) => b.to_string(),
        Reply::Rule(id) => id.to_string(),
    }
}

pub fn decode_reply(verb: Verb, payload: &str) -> Result<Reply, NodeError> {
    let bad = |what: &str| NodeError::Protocol(format!("bad {what} `{payload}`"));
    match verb {
        Verb::Ask | Verb::Get => parse_binding(payload).map(Reply::Bound).map_err(|_| bad("binding")),
        Verb::TellR => payload
            .strip_prefix('r')
            .and_then(|n| n.parse().ok())
            .map(|n| Reply::Rule(RuleId(n)))
            .ok_or_else(|| bad("rule id")),
        _ => Ok(Reply::Ack),
    }
}

/// Runs `op` on the node at `endpoint`. The board is sent without its host
/// part; the server may hold a blocking operation for `wait`.
pub fn call_op(endpoint: SocketAddr, op: &Op, wait: Duration, deadline: Instant) -> Result<Reply, NodeError> {
    let (verb, payload) = encode(op);
    let board = BoardRef::local(op.board().name.clone());
    let req = Request { id: next_id(), verb, board: Some(board), wait: Some(wait.as_millis() as u64), payload };
    let mut stream = open(endpoint, deadline)?;
    let payload = exchange(&mut stream, &req, deadline)?;
    decode_reply(verb, &payload)
}

/// A client of one node, with a fixed deadline per call.
#[derive(Debug, Clone)]
pub struct Client {
    pub endpoint: SocketAddr,
    pub timeout: Duration,
}

impl Client {
    pub fn new(endpoint: SocketAddr, timeout: Duration) -> Client {
        Client { endpoint, timeout }
    }

    /// Sends a raw request and returns the OK payload.
    pub fn request(&self, verb: Verb, board: Option<&str>, payload: &str) -> Result<String, NodeError> {
        let board = match board {
            Some(b) => Some(bach_core::syntax::parse_board_ref(b).map_err(|e| NodeError::Protocol(e.to_string()))?),
            None => None,
        };
        let req = Request {
            id: next_id(),
            verb,
            board,
            wait: Some(self.timeout.as_millis() as u64),
            payload: payload.to_string(),
        };
        let deadline = Instant::now() + self.timeout;
        let mut stream = open(self.endpoint, deadline)?;
        exchange(&mut stream, &req, deadline)
    }

    pub fn op(&self, op: &Op) -> Result<Reply, NodeError> {
        call_op(self.endpoint, op, self.timeout, Instant::now() + self.timeout)
    }

    pub fn tell(&self, board: &str, tuple: Tuple) -> Result<(), NodeError> {
        self.op(&Op::Tell(BoardRef::local(board), tuple)).map(|_| ())
    }

    pub fn ask(&self, board: &str, template: Template) -> Result<Binding, NodeError> {
        self.op(&Op::Ask(BoardRef::local(board), template)).map(|r| r.binding())
    }

    pub fn get(&self, board: &str, template: Template) -> Result<Binding, NodeError> {
        self.op(&Op::Get(BoardRef::local(board), template)).map(|r| r.binding())
    }

    pub fn nask(&self, board: &str, template: Template) -> Result<(), NodeError> {
        self.op(&Op::Nask(BoardRef::local(board), template)).map(|_| ())
    }

    pub fn tellr(&self, board: &str, rule: Rule) -> Result<RuleId, NodeError> {
        match self.op(&Op::TellR(BoardRef::local(board), rule))? {
            Reply::Rule(id) => Ok(id),
            other => Err(NodeError::Protocol(format!("TELLR answered {other:?}"))),
        }
    }

    /// Stored tuples on `board` covered by `template`.
    pub fn ask_count(&self, board: &str, template: &Template) -> Result<usize, NodeError> {
        let payload = self.request(Verb::AskCount, Some(board), &template.to_string())?;
        payload.trim().parse().map_err(|_| NodeError::Protocol(format!("bad count `{payload}`")))
    }

    pub fn read(&self, board: &str, template: &Template) -> Result<Vec<Tuple>, NodeError> {
        let payload = self.request(Verb::Read, Some(board), &template.to_string())?;
        parse_tuples(&payload).map_err(|e| NodeError::Protocol(e.to_string()))
    }

    pub fn list_boards(&self) -> Result<Vec<String>, NodeError> {
        Ok(self.request(Verb::ListBoards, None, "")?.split_whitespace().map(String::from).collect())
    }
}
