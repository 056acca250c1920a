//! Blackboard rules: `in`/`nin` conjuncts, the two readings, validation.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::board::BoardRef;
use crate::tuple::{Template, VarKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Presence {
    /// Presence of `count` matching instances.
    In(u32),
    /// Absence of any matching instance.
    Nin,
}

/// One conjunct of a rule.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RulePrimitive {
    pub presence: Presence,
    pub board: BoardRef,
    pub template: Template,
    /// `[in]` / `[nin]`: the conjunct is tested but neither consumes nor
    /// produces when the rule fires.
    pub guarded: bool,
}

impl RulePrimitive {
    pub fn new_in(board: BoardRef, template: Template) -> RulePrimitive {
        RulePrimitive { presence: Presence::In(1), board, template, guarded: false }
    }

    pub fn new_nin(board: BoardRef, template: Template) -> RulePrimitive {
        RulePrimitive { presence: Presence::Nin, board, template, guarded: false }
    }

    pub fn count(mut self, c: u32) -> RulePrimitive {
        self.presence = Presence::In(c);
        self
    }

    pub fn guarded(mut self) -> RulePrimitive {
        self.guarded = true;
        self
    }

    pub fn is_in(&self) -> bool {
        matches!(self.presence, Presence::In(_))
    }

    /// Required instance count; 0 for `nin`.
    pub fn required(&self) -> usize {
        match self.presence {
            Presence::In(c) => c as usize,
            Presence::Nin => 0,
        }
    }
}

impl fmt::Display for RulePrimitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let head = match self.presence {
            Presence::In(1) => "in".to_string(),
            Presence::In(c) => format!("in_{c}"),
            Presence::Nin => "nin".to_string(),
        };
        if self.guarded {
            write!(f, "[{head}({}, {})]", self.board, self.template)
        } else {
            write!(f, "{head}({}, {})", self.board, self.template)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rule {
    pub direction: Direction,
    pub lhs: Vec<RulePrimitive>,
    pub rhs: Vec<RulePrimitive>,
}

/// Opaque identity of an installed rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RuleId(pub u64);

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleViolation {
    #[error("EmptyLHS: a rule needs at least one left-hand conjunct")]
    EmptyLhs,
    #[error("ZeroCount: in_c requires c >= 1")]
    ZeroCount,
    #[error("MultiBoardLHS: all left-hand conjuncts must name the same blackboard")]
    MultiBoardLhs,
    #[error("BackwardRHSArity: a backward rule has exactly one right-hand conjunct")]
    BackwardRhsArity,
    #[error("CountedBackwardRHS: a backward right-hand side asserts a single instance")]
    CountedBackwardRhs,
    #[error("GuardedForwardRHS: guards on a forward right-hand side are not supported")]
    GuardedForwardRhs,
    #[error("UnboundUse: variable {0} is used but never bound by a left-hand `in`")]
    UnboundUse(String),
    #[error("VariableKind: variable {0} stands for both a field and a whole tuple")]
    VariableKind(String),
    #[error("HostMismatch: rule belongs on `{expected}`, not `{got}`")]
    HostMismatch { expected: String, got: String },
}

impl RuleViolation {
    /// Short constraint name.
    pub fn name(&self) -> &'static str {
        match self {
            RuleViolation::EmptyLhs => "EmptyLHS",
            RuleViolation::ZeroCount => "ZeroCount",
            RuleViolation::MultiBoardLhs => "MultiBoardLHS",
            RuleViolation::BackwardRhsArity => "BackwardRHSArity",
            RuleViolation::CountedBackwardRhs => "CountedBackwardRHS",
            RuleViolation::GuardedForwardRhs => "GuardedForwardRHS",
            RuleViolation::UnboundUse(_) => "UnboundUse",
            RuleViolation::VariableKind(_) => "VariableKind",
            RuleViolation::HostMismatch { .. } => "HostMismatch",
        }
    }
}

impl Rule {
    pub fn forward(lhs: Vec<RulePrimitive>, rhs: Vec<RulePrimitive>) -> Rule {
        Rule { direction: Direction::Forward, lhs, rhs }
    }

    pub fn backward(lhs: Vec<RulePrimitive>, rhs: RulePrimitive) -> Rule {
        Rule { direction: Direction::Backward, lhs, rhs: vec![rhs] }
    }

    pub fn is_forward(&self) -> bool {
        self.direction == Direction::Forward
    }

    /// The single blackboard the activation condition reads.
    pub fn lhs_board(&self) -> &BoardRef {
        &self.lhs[0].board
    }

    /// The blackboard a rule is installed on: the context board for the
    /// forward reading, the board receiving virtual tuples for the backward.
    pub fn host_board(&self) -> &BoardRef {
        match self.direction {
            Direction::Forward => &self.lhs[0].board,
            Direction::Backward => &self.rhs[0].board,
        }
    }

    /// True when every left-hand `in` is guarded, so firing never consumes.
    pub fn lhs_in_fully_guarded(&self) -> bool {
        self.lhs.iter().filter(|p| p.is_in()).all(|p| p.guarded)
    }

    /// Checks the structural restrictions on rules. Returns the first
    /// violated constraint.
    pub fn validate(&self) -> Result<(), RuleViolation> {
        if self.lhs.is_empty() {
            return Err(RuleViolation::EmptyLhs);
        }
        if self.lhs.iter().chain(&self.rhs).any(|p| p.presence == Presence::In(0)) {
            return Err(RuleViolation::ZeroCount);
        }
        let board = &self.lhs[0].board;
        if self.lhs.iter().any(|p| &p.board != board) {
            return Err(RuleViolation::MultiBoardLhs);
        }
        match self.direction {
            Direction::Backward => {
                if self.rhs.len() != 1 {
                    return Err(RuleViolation::BackwardRhsArity);
                }
                if matches!(self.rhs[0].presence, Presence::In(c) if c > 1) {
                    return Err(RuleViolation::CountedBackwardRhs);
                }
            }
            Direction::Forward => {
                if self.rhs.iter().any(|p| p.guarded) {
                    return Err(RuleViolation::GuardedForwardRhs);
                }
            }
        }

        let mut bound: BTreeMap<&str, VarKind> = BTreeMap::new();
        let mut kinds: BTreeMap<&str, VarKind> = BTreeMap::new();
        for prim in self.lhs.iter().chain(&self.rhs) {
            for var in prim.template.variables() {
                if let Some(k) = kinds.insert(var.name, var.kind) {
                    if k != var.kind {
                        return Err(RuleViolation::VariableKind(var.name.to_string()));
                    }
                }
            }
        }
        for prim in self.lhs.iter().filter(|p| p.is_in()) {
            for var in prim.template.variables().into_iter().filter(|v| v.binder) {
                bound.insert(var.name, var.kind);
            }
        }
        for prim in &self.lhs {
            for var in prim.template.variables().into_iter().filter(|v| !v.binder) {
                if !bound.contains_key(var.name) {
                    return Err(RuleViolation::UnboundUse(var.name.to_string()));
                }
            }
        }
        for prim in &self.rhs {
            for var in prim.template.variables() {
                if !bound.contains_key(var.name) {
                    return Err(RuleViolation::UnboundUse(var.name.to_string()));
                }
            }
        }
        Ok(())
    }

    /// The rule with variables renamed `V0, V1, ...` in order of first
    /// occurrence. Two rules are the same rule iff their canonical forms are
    /// equal.
    pub fn canonical(&self) -> Rule {
        let mut names: BTreeMap<String, String> = BTreeMap::new();
        let mut rename = |x: &str| {
            let n = names.len();
            names.entry(x.to_string()).or_insert_with(|| format!("V{n}")).clone()
        };
        let mut map = |p: &RulePrimitive| RulePrimitive { template: p.template.rename(&mut rename), ..p.clone() };
        Rule {
            direction: self.direction,
            lhs: self.lhs.iter().map(&mut map).collect(),
            rhs: self.rhs.iter().map(&mut map).collect(),
        }
    }

    /// Applies `f` to every board reference.
    pub fn map_boards(&self, mut f: impl FnMut(&BoardRef) -> BoardRef) -> Rule {
        let mut map = |p: &RulePrimitive| RulePrimitive { board: f(&p.board), ..p.clone() };
        Rule {
            direction: self.direction,
            lhs: self.lhs.iter().map(&mut map).collect(),
            rhs: self.rhs.iter().map(&mut map).collect(),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.lhs.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str(match self.direction {
            Direction::Forward => " ->f",
            Direction::Backward => " ->b",
        })?;
        for (i, p) in self.rhs.iter().enumerate() {
            f.write_str(if i == 0 { " " } else { ", " })?;
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

/// Ready-made rules for common board topologies.
pub mod library {
    use super::*;

    fn any() -> Template {
        Template::BindAll("X".into())
    }

    fn same() -> Template {
        Template::UseAll("X".into())
    }

    /// Redirects every tuple arriving on `from` to `to`.
    pub fn forward(from: &BoardRef, to: &BoardRef) -> Rule {
        Rule::forward(vec![RulePrimitive::new_in(from.clone(), any())], vec![RulePrimitive::new_in(to.clone(), same())])
    }

    /// Copies every tuple arriving on `from` to `to`, leaving it on `from`.
    pub fn copy(from: &BoardRef, to: &BoardRef) -> Rule {
        Rule::forward(
            vec![RulePrimitive::new_in(from.clone(), any()).guarded()],
            vec![RulePrimitive::new_in(to.clone(), same())],
        )
    }

    /// Moves every tuple arriving on `from` to each of `targets`.
    pub fn broadcast(from: &BoardRef, targets: &[BoardRef]) -> Rule {
        Rule::forward(
            vec![RulePrimitive::new_in(from.clone(), any())],
            targets.iter().map(|b| RulePrimitive::new_in(b.clone(), same())).collect(),
        )
    }

    /// One forwarding rule per source, all draining into `into`.
    pub fn merge(sources: &[BoardRef], into: &BoardRef) -> Vec<Rule> {
        sources.iter().map(|s| forward(s, into)).collect()
    }

    /// `heir` sees every tuple of `parent` without copying it.
    pub fn inherit(heir: &BoardRef, parent: &BoardRef) -> Rule {
        Rule::backward(
            vec![RulePrimitive::new_in(parent.clone(), any()).guarded()],
            RulePrimitive::new_in(heir.clone(), same()).guarded(),
        )
    }

    /// Forwarding that keeps a logical pointer back to the moved tuples.
    pub fn linked_forward(from: &BoardRef, to: &BoardRef) -> Vec<Rule> {
        vec![forward(from, to), inherit(from, to)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tuple::{Field, Value};

    fn b(s: &str) -> BoardRef {
        BoardRef::local(s)
    }

    fn ground(s: &str) -> Template {
        Template::Pattern(vec![Field::Lit(Value::Atom(s.into()))])
    }

    #[test]
    fn multi_board_lhs_rejected() {
        let r = Rule::forward(
            vec![RulePrimitive::new_in(b("b1"), ground("a")), RulePrimitive::new_in(b("b2"), ground("b"))],
            vec![],
        );
        assert_eq!(r.validate(), Err(RuleViolation::MultiBoardLhs));
    }

    #[test]
    fn backward_rhs_arity() {
        let r = Rule {
            direction: Direction::Backward,
            lhs: vec![RulePrimitive::new_in(b("b1"), ground("a"))],
            rhs: vec![RulePrimitive::new_in(b("b2"), ground("a")), RulePrimitive::new_in(b("b2"), ground("b"))],
        };
        assert_eq!(r.validate(), Err(RuleViolation::BackwardRhsArity));
    }

    #[test]
    fn guarded_forward_rhs_rejected() {
        let r = Rule::forward(
            vec![RulePrimitive::new_in(b("b1"), ground("a"))],
            vec![RulePrimitive::new_in(b("b2"), ground("a")).guarded()],
        );
        assert_eq!(r.validate(), Err(RuleViolation::GuardedForwardRhs));
    }

    #[test]
    fn unbound_rhs_use_rejected() {
        let r = Rule::forward(
            vec![RulePrimitive::new_in(b("b1"), ground("a"))],
            vec![RulePrimitive::new_in(b("b2"), Template::UseAll("X".into()))],
        );
        assert_eq!(r.validate(), Err(RuleViolation::UnboundUse("X".into())));
    }

    #[test]
    fn nin_binders_do_not_bind() {
        let r = Rule::forward(
            vec![
                RulePrimitive::new_in(b("b1"), ground("a")),
                RulePrimitive::new_nin(b("b1"), Template::Pattern(vec![Field::Bind("Y".into())])),
            ],
            vec![RulePrimitive::new_in(b("b2"), Template::Pattern(vec![Field::Use("Y".into())]))],
        );
        assert_eq!(r.validate(), Err(RuleViolation::UnboundUse("Y".into())));
    }

    #[test]
    fn kind_mismatch_rejected() {
        let r = Rule::forward(
            vec![RulePrimitive::new_in(b("b1"), Template::BindAll("X".into()))],
            vec![RulePrimitive::new_in(b("b2"), Template::Pattern(vec![Field::Use("X".into())]))],
        );
        assert_eq!(r.validate(), Err(RuleViolation::VariableKind("X".into())));
    }

    #[test]
    fn zero_count_rejected() {
        let r = Rule::forward(vec![RulePrimitive::new_in(b("b1"), ground("a")).count(0)], vec![]);
        assert_eq!(r.validate(), Err(RuleViolation::ZeroCount));
    }

    #[test]
    fn canonical_form_ignores_variable_names() {
        let r1 = library::forward(&b("b1"), &b("b2"));
        let r2 = r1.canonical();
        assert_ne!(r1, r2);
        assert_eq!(r1.canonical(), r2.canonical());
    }

    #[test]
    fn library_rules_are_valid() {
        let (b1, b2, b3) = (b("b1"), b("b2"), b("b3"));
        for r in [
            library::forward(&b1, &b2),
            library::copy(&b1, &b2),
            library::broadcast(&b1, &[b2.clone(), b3.clone()]),
            library::inherit(&b1, &b2),
        ]
        .into_iter()
        .chain(library::merge(&[b1.clone(), b2.clone()], &b3))
        .chain(library::linked_forward(&b1, &b2))
        {
            r.validate().unwrap();
        }
        assert_eq!(library::inherit(&b1, &b2).host_board(), &b1);
        assert_eq!(library::forward(&b1, &b2).host_board(), &b1);
    }
}
