//! A blackboard host reachable over TCP, with engagement between hosts.

pub mod client;
mod node;
pub mod wire;

use std::io;
use std::net::SocketAddr;
use std::time::Duration;

use thiserror::Error;

use bach_core::KernelError;

pub use client::Client;
pub use node::{LinkState, Node, PeerLink};

#[derive(Debug, Error)]
pub enum NodeError {
    #[error("cannot listen on {addr}: {source}")]
    BindFailure { addr: SocketAddr, source: io::Error },
    #[error("peer unreachable: {0}")]
    PeerUnreachable(String),
    #[error("no reply within {0:?}")]
    Timeout(Duration),
    #[error("remote failure: {0}")]
    RemoteFailure(String),
    /// An error reported by the other side, passed on unchanged.
    #[error("{kind}: {message}")]
    Remote { kind: String, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl NodeError {
    /// The error kind as sent on the wire.
    pub fn kind(&self) -> &str {
        match self {
            NodeError::BindFailure { .. } => "BindFailure",
            NodeError::PeerUnreachable(_) => "PeerUnreachable",
            NodeError::Timeout(_) => "Timeout",
            NodeError::RemoteFailure(_) => "RemoteFailure",
            NodeError::Remote { kind, .. } => kind,
            NodeError::Protocol(_) => "ProtocolError",
            NodeError::Kernel(e) => e.name(),
            NodeError::Config(_) => "ConfigError",
        }
    }

    /// Rebuilds an error from an `ERR <kind> <message>` reply.
    pub(crate) fn from_wire(kind: String, message: String) -> NodeError {
        match kind.as_str() {
            "Timeout" => NodeError::Timeout(Duration::ZERO),
            _ => NodeError::Remote { kind, message },
        }
    }

    fn message(&self) -> String {
        match self {
            NodeError::Remote { message, .. } => message.clone(),
            other => other.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NodeConfig {
    pub name: String,
    /// Port 0 picks a free port; [`Node::endpoint`] reports the real one.
    pub endpoint: SocketAddr,
    pub public: Vec<String>,
    /// Default deadline for remote calls and for blocking requests that
    /// carry no wait.
    pub timeout: Duration,
    pub seed: u64,
    pub chain_depth: usize,
    pub fuel: usize,
}

impl NodeConfig {
    pub fn new(name: impl Into<String>, endpoint: SocketAddr) -> NodeConfig {
        NodeConfig {
            name: name.into(),
            endpoint,
            public: Vec::new(),
            timeout: Duration::from_millis(2000),
            seed: 0,
            chain_depth: 8,
            fuel: 10_000,
        }
    }

    pub fn with_boards<S: Into<String>>(mut self, boards: impl IntoIterator<Item = S>) -> NodeConfig {
        self.public = boards.into_iter().map(Into::into).collect();
        self
    }

    pub fn validate(&self) -> Result<(), NodeError> {
        if !bach_core::tuple::is_atom(&self.name) {
            return Err(NodeError::Config(format!("node name `{}` is not an atom", self.name)));
        }
        if self.timeout.is_zero() {
            return Err(NodeError::Config("timeout must be positive".into()));
        }
        for b in &self.public {
            if !bach_core::tuple::is_atom(b) {
                return Err(NodeError::Config(format!("board name `{b}` is not an atom")));
            }
        }
        Ok(())
    }
}
