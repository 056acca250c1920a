//! Where agents run: an in-process kernel or a node over the wire.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::time::{Duration, Instant};

use anyhow::Result;
use bach_core::agent::{AgentExpr, AgentOutcome, Dispatch, Interpreter, OpFailure};
use bach_core::{Kernel, KernelConfig, Op, Reply, Template, Tuple};
use bach_node::{client, Client, NodeError};

pub enum Target {
    Local(Box<Kernel>),
    Remote(Client),
}

impl Target {
    pub fn local(config: KernelConfig) -> Target {
        Target::Local(Box::new(Kernel::new(config)))
    }

    pub fn remote(endpoint: SocketAddr, timeout: Duration) -> Target {
        Target::Remote(Client::new(endpoint, timeout))
    }

    /// Creates, on a local kernel, every unqualified board `expr` mentions.
    pub fn prepare(&mut self, expr: &AgentExpr) {
        if let Target::Local(k) = self {
            let mut boards = Vec::new();
            collect_boards(expr, &mut boards);
            for b in boards {
                if !k.has_board(&b) {
                    k.create_board(&b);
                }
            }
        }
    }

    pub fn boards(&self) -> Result<Vec<String>> {
        Ok(match self {
            Target::Local(k) => k.board_names(),
            Target::Remote(c) => c.list_boards()?,
        })
    }

    pub fn snapshot(&self, board: &str) -> Result<BTreeMap<Tuple, usize>> {
        match self {
            Target::Local(k) => Ok(k.snapshot(board)?),
            Target::Remote(c) => {
                let mut out = BTreeMap::new();
                for t in c.read(board, &Template::BindAll("T".into()))? {
                    *out.entry(t).or_insert(0) += 1;
                }
                Ok(out)
            }
        }
    }

    pub fn resume(&mut self, it: &mut Interpreter, deadline: Duration) {
        let end = Instant::now() + deadline;
        loop {
            it.run(self);
            if it.status().is_final() || !matches!(self, Target::Remote(_)) || Instant::now() >= end {
                return;
            }
            std::thread::sleep(Duration::from_millis(20));
        }
    }
}

impl Dispatch for Target {
    fn attempt(&mut self, op: &Op) -> Result<Option<Reply>, OpFailure> {
        match self {
            Target::Local(k) => k.attempt(op),
            Target::Remote(c) => {
                match client::call_op(c.endpoint, op, Duration::ZERO, Instant::now() + c.timeout) {
                    Ok(r) => Ok(Some(r)),
                    Err(NodeError::Remote { kind, .. }) if kind == "Blocked" => Ok(None),
                    Err(e) => Err(OpFailure::new(e.kind(), e.to_string())),
                }
            }
        }
    }
}

fn collect_boards(expr: &AgentExpr, out: &mut Vec<String>) {
    match expr {
        AgentExpr::Prim(p) => {
            if p.board.host.is_none() && !out.contains(&p.board.name) {
                out.push(p.board.name.clone());
            }
        }
        AgentExpr::Seq(a, b) | AgentExpr::Par(a, b) | AgentExpr::Choice(a, b) => {
            collect_boards(a, out);
            collect_boards(b, out);
        }
    }
}

pub fn describe(outcome: &AgentOutcome) -> String {
    let mut s = outcome.status.name().to_string();
    if let bach_core::agent::Status::Failure(m) = &outcome.status {
        s.push_str(&format!(" ({m})"));
    }
    if !outcome.bindings.is_empty() {
        s.push_str(&format!(" {}", outcome.bindings));
    }
    s
}

pub fn format_snapshot(board: &str, content: &BTreeMap<Tuple, usize>) -> String {
    if content.is_empty() {
        return format!("{board}: empty");
    }
    let items: Vec<String> = content.iter().map(|(t, n)| format!("{t} x{n}")).collect();
    format!("{board}: {}", items.join(", "))
}
