//! Agents: primitives composed with `;` (sequence), `||` (parallel) and `+`
//! (choice).

mod parse;
mod run;

use std::fmt;

use crate::board::BoardRef;
use crate::kernel::Op;
use crate::rule::Rule;
use crate::tuple::{Binding, SubstError, Template};

pub use parse::{parse_agent, parse_agent_file, AgentFileError};
pub use run::{run_agent, AgentOutcome, Dispatch, Interpreter, OpFailure, Status, TraceEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrimKind {
    Tell,
    Ask,
    Get,
    Nask,
    TellR,
    AskR,
    GetR,
    NaskR,
}

impl PrimKind {
    pub const ALL: [PrimKind; 8] = [
        PrimKind::Tell,
        PrimKind::Ask,
        PrimKind::Get,
        PrimKind::Nask,
        PrimKind::TellR,
        PrimKind::AskR,
        PrimKind::GetR,
        PrimKind::NaskR,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PrimKind::Tell => "tell",
            PrimKind::Ask => "ask",
            PrimKind::Get => "get",
            PrimKind::Nask => "nask",
            PrimKind::TellR => "tellr",
            PrimKind::AskR => "askr",
            PrimKind::GetR => "getr",
            PrimKind::NaskR => "naskr",
        }
    }

    pub fn from_name(s: &str) -> Option<PrimKind> {
        PrimKind::ALL.into_iter().find(|k| k.name() == s)
    }

    /// The `*r` kinds carry a rule rather than a tuple.
    pub fn takes_rule(self) -> bool {
        matches!(self, PrimKind::TellR | PrimKind::AskR | PrimKind::GetR | PrimKind::NaskR)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Data(Template),
    Rule(Rule),
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payload::Data(t) => write!(f, "{t}"),
            Payload::Rule(r) => write!(f, "{r}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prim {
    pub kind: PrimKind,
    pub board: BoardRef,
    pub payload: Payload,
}

impl Prim {
    /// The operation this primitive performs under `env`. Tells need every
    /// variable bound; queries keep unbound binders open.
    pub fn to_op(&self, env: &Binding) -> Result<Op, SubstError> {
        let b = self.board.clone();
        Ok(match (&self.payload, self.kind) {
            (Payload::Data(t), PrimKind::Tell) => Op::Tell(b, t.substitute(env)?),
            (Payload::Data(t), PrimKind::Ask) => Op::Ask(b, t.instantiate(env)?),
            (Payload::Data(t), PrimKind::Get) => Op::Get(b, t.instantiate(env)?),
            (Payload::Data(t), _) => Op::Nask(b, t.instantiate(env)?),
            (Payload::Rule(r), PrimKind::TellR) => Op::TellR(b, r.clone()),
            (Payload::Rule(r), PrimKind::AskR) => Op::AskR(b, r.clone()),
            (Payload::Rule(r), PrimKind::GetR) => Op::GetR(b, r.clone()),
            (Payload::Rule(r), _) => Op::NaskR(b, r.clone()),
        })
    }
}

impl fmt::Display for Prim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {})", self.kind.name(), self.board, self.payload)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentExpr {
    Prim(Prim),
    Seq(Box<AgentExpr>, Box<AgentExpr>),
    Par(Box<AgentExpr>, Box<AgentExpr>),
    Choice(Box<AgentExpr>, Box<AgentExpr>),
}

impl AgentExpr {
    pub fn seq(a: AgentExpr, b: AgentExpr) -> AgentExpr {
        AgentExpr::Seq(Box::new(a), Box::new(b))
    }

    pub fn par(a: AgentExpr, b: AgentExpr) -> AgentExpr {
        AgentExpr::Par(Box::new(a), Box::new(b))
    }

    pub fn choice(a: AgentExpr, b: AgentExpr) -> AgentExpr {
        AgentExpr::Choice(Box::new(a), Box::new(b))
    }

    /// Binding strength: `;` over `||` over `+`.
    fn level(&self) -> u8 {
        match self {
            AgentExpr::Choice(..) => 0,
            AgentExpr::Par(..) => 1,
            AgentExpr::Seq(..) => 2,
            AgentExpr::Prim(_) => 3,
        }
    }

    /// Number of primitive leaves.
    pub fn size(&self) -> usize {
        match self {
            AgentExpr::Prim(_) => 1,
            AgentExpr::Seq(a, b) | AgentExpr::Par(a, b) | AgentExpr::Choice(a, b) => a.size() + b.size(),
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &AgentExpr, min: u8) -> fmt::Result {
    if e.level() < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

/// Operators associate to the left, so a right operand of the same level
/// keeps its parentheses.
impl fmt::Display for AgentExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, op, b) = match self {
            AgentExpr::Prim(p) => return write!(f, "{p}"),
            AgentExpr::Seq(a, b) => (a, " ; ", b),
            AgentExpr::Par(a, b) => (a, " || ", b),
            AgentExpr::Choice(a, b) => (a, " + ", b),
        };
        let level = self.level();
        write_operand(f, a, level)?;
        f.write_str(op)?;
        write_operand(f, b, level + 1)
    }
}

pub fn format_agent(e: &AgentExpr) -> String {
    e.to_string()
}

#[cfg(test)]
mod tests;
