//! Timed scenario scripts run against an in-process [`Cluster`].
//!
//! One step per line, `at <ms> <action>`, with `#` comments. An optional
//! `seed <n>` line comes first. Actions:
//!
//! ```text
//! node <name> <board>...
//! tell <node> <board> <tuple>
//! tellr <node> <board> <rule> [as <label>]
//! agent <node> <name> = <agent expression>
//! connect <node> <node>
//! disconnect <node> <node>
//! expect <node> <board> <template> present|absent
//! expect-content <node> <board> <tuple> <count>
//! expect-vector <node> <label> [<n>, ...]
//! expect-fired <node> <label> <count> [before [<n>, ...]]
//! expect-agent <name> success|failure|blocked|fuel-exhausted
//! expect-links <node> <peer> <count>
//! ```
//!
//! Times are logical: steps run in order, and after each one every blocked
//! agent is retried until none makes progress.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::agent::{parse_agent, AgentExpr, Interpreter};
use crate::board::BoardRef;
use crate::cluster::{At, Cluster};
use crate::kernel::{KernelConfig, Op};
use crate::rule::{Rule, RuleId};
use crate::syntax::{BareVar, Cursor, SyntaxError};
use crate::tuple::{Template, Tuple};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn perr(line: usize, message: impl fmt::Display) -> ScenarioError {
    ScenarioError::Parse { line, message: message.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Presence {
    Present,
    Absent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Node { name: String, boards: Vec<String> },
    Tell { node: String, board: BoardRef, tuple: Tuple },
    TellR { node: String, board: BoardRef, rule: Rule, label: Option<String> },
    Agent { node: String, name: String, expr: AgentExpr },
    Connect(String, String),
    Disconnect(String, String),
    Expect { node: String, board: BoardRef, template: Template, presence: Presence },
    ExpectContent { node: String, board: String, tuple: Tuple, count: usize },
    ExpectVector { node: String, label: String, vector: Vec<usize> },
    ExpectFired { node: String, label: String, count: usize, before: Option<Vec<usize>> },
    ExpectAgent { name: String, status: String },
    ExpectLinks { node: String, peer: String, count: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub line: usize,
    pub at: u64,
    pub text: String,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub seed: u64,
    pub steps: Vec<Step>,
}

fn word(s: &str) -> (&str, &str) {
    let s = s.trim_start();
    let end = s.find(char::is_whitespace).unwrap_or(s.len());
    (&s[..end], &s[end..])
}

fn words<'a, const N: usize>(s: &'a str, line: usize, what: &str) -> Result<([&'a str; N], &'a str), ScenarioError> {
    let mut out = [""; N];
    let mut rest = s;
    for slot in out.iter_mut() {
        let (w, r) = word(rest);
        if w.is_empty() {
            return Err(perr(line, format!("expected {what}")));
        }
        *slot = w;
        rest = r;
    }
    Ok((out, rest))
}

fn number<T: std::str::FromStr>(s: &str, line: usize) -> Result<T, ScenarioError> {
    s.parse().map_err(|_| perr(line, format!("`{s}` is not a number")))
}

fn syntax<'s, T>(line: usize, src: &'s str, f: impl FnOnce(&mut Cursor<'s>) -> Result<T, SyntaxError>) -> Result<T, ScenarioError> {
    crate::syntax::parse_all(src, f).map_err(|e| perr(line, e))
}

fn vector(c: &mut Cursor<'_>) -> Result<Vec<usize>, SyntaxError> {
    c.expect("[")?;
    let mut out = Vec::new();
    if c.eat("]") {
        return Ok(out);
    }
    loop {
        c.skip_ws();
        let start = c.pos();
        let mut digits = String::new();
        while let Some(d) = c.peek().filter(char::is_ascii_digit) {
            digits.push(d);
            c.bump();
        }
        match digits.parse() {
            Ok(n) => out.push(n),
            Err(_) => {
                let mut e = c.error(&["count"]);
                e.pos = start;
                return Err(e);
            }
        }
        if c.eat("]") {
            return Ok(out);
        }
        c.expect(",")?;
    }
}

fn parse_action(line: usize, src: &str) -> Result<Action, ScenarioError> {
    let (verb, rest) = word(src);
    let board = |s: &str| syntax(line, s, Cursor::board_ref);
    Ok(match verb {
        "node" => {
            let (name, rest) = word(rest);
            if name.is_empty() {
                return Err(perr(line, "expected node name"));
            }
            Action::Node { name: name.into(), boards: rest.split_whitespace().map(String::from).collect() }
        }
        "tell" => {
            let ([node, b], rest) = words(rest, line, "node and board")?;
            Action::Tell { node: node.into(), board: board(b)?, tuple: syntax(line, rest, Cursor::tuple)? }
        }
        "tellr" => {
            let ([node, b], rest) = words(rest, line, "node and board")?;
            let (rule, label) = syntax(line, rest, |c| {
                let rule = c.rule()?;
                let label = if c.eat("as") {
                    Some(c.ident().ok_or_else(|| c.error(&["label"]))?.to_string())
                } else {
                    None
                };
                Ok((rule, label))
            })?;
            Action::TellR { node: node.into(), board: board(b)?, rule, label }
        }
        "agent" => {
            let ([node, name, eq], rest) = words(rest, line, "node, name and `=`")?;
            if eq != "=" {
                return Err(perr(line, "expected `=` after the agent name"));
            }
            Action::Agent { node: node.into(), name: name.into(), expr: parse_agent(rest).map_err(|e| perr(line, e))? }
        }
        "connect" | "disconnect" => {
            let ([a, b], rest) = words(rest, line, "two node names")?;
            if !rest.trim().is_empty() {
                return Err(perr(line, "trailing input"));
            }
            if verb == "connect" {
                Action::Connect(a.into(), b.into())
            } else {
                Action::Disconnect(a.into(), b.into())
            }
        }
        "expect" => {
            let ([node, b], rest) = words(rest, line, "node and board")?;
            let (template, presence) = syntax(line, rest, |c| {
                let t = c.template(BareVar::Bind)?;
                let p = match c.ident() {
                    Some("present") => Presence::Present,
                    Some("absent") => Presence::Absent,
                    _ => return Err(c.error(&["`present`", "`absent`"])),
                };
                Ok((t, p))
            })?;
            Action::Expect { node: node.into(), board: board(b)?, template, presence }
        }
        "expect-content" => {
            let ([node, b], rest) = words(rest, line, "node and board")?;
            let (tuple, count) = syntax(line, rest, |c| {
                let t = c.tuple()?;
                c.skip_ws();
                let start = c.pos();
                let mut digits = String::new();
                while let Some(d) = c.peek().filter(char::is_ascii_digit) {
                    digits.push(d);
                    c.bump();
                }
                let n = digits.parse().map_err(|_| {
                    let mut e = c.error(&["count"]);
                    e.pos = start;
                    e
                })?;
                Ok((t, n))
            })?;
            Action::ExpectContent { node: node.into(), board: b.into(), tuple, count }
        }
        "expect-vector" => {
            let ([node, label], rest) = words(rest, line, "node and label")?;
            Action::ExpectVector { node: node.into(), label: label.into(), vector: syntax(line, rest, vector)? }
        }
        "expect-fired" => {
            let ([node, label, n], rest) = words(rest, line, "node, label and count")?;
            let before = if rest.trim().is_empty() {
                None
            } else {
                Some(syntax(line, rest, |c| {
                    if !c.eat("before") {
                        return Err(c.error(&["`before`"]));
                    }
                    vector(c)
                })?)
            };
            Action::ExpectFired { node: node.into(), label: label.into(), count: number(n, line)?, before }
        }
        "expect-agent" => {
            let ([name, status], _) = words(rest, line, "agent name and status")?;
            if !["success", "failure", "blocked", "fuel-exhausted"].contains(&status) {
                return Err(perr(line, format!("unknown agent status `{status}`")));
            }
            Action::ExpectAgent { name: name.into(), status: status.into() }
        }
        "expect-links" => {
            let ([node, peer, n], _) = words(rest, line, "node, peer and count")?;
            Action::ExpectLinks { node: node.into(), peer: peer.into(), count: number(n, line)? }
        }
        other => return Err(perr(line, format!("unknown action `{other}`"))),
    })
}

/// Drops a trailing `#` comment outside string literals.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

pub fn parse_scenario(src: &str) -> Result<Scenario, ScenarioError> {
    let mut seed = 0;
    let mut steps: Vec<Step> = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let text = strip_comment(raw).trim();
        if text.is_empty() {
            continue;
        }
        let (head, rest) = word(text);
        match head {
            "seed" if steps.is_empty() => seed = number(rest.trim(), line)?,
            "at" => {
                let (t, rest) = word(rest);
                let at: u64 = number(t, line)?;
                if steps.last().is_some_and(|s| s.at > at) {
                    return Err(perr(line, "time goes backwards"));
                }
                let action = parse_action(line, rest)?;
                steps.push(Step { line, at, text: rest.trim().to_string(), action });
            }
            _ => return Err(perr(line, "expected `at <ms> <action>`")),
        }
    }
    Ok(Scenario { seed, steps })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepReport {
    pub line: usize,
    pub at: u64,
    pub text: String,
    /// `None` when the step succeeded.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioReport {
    pub steps: Vec<StepReport>,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.steps.iter().all(|s| s.failure.is_none())
    }

    pub fn failures(&self) -> impl Iterator<Item = &StepReport> {
        self.steps.iter().filter(|s| s.failure.is_some())
    }
}

impl fmt::Display for ScenarioReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            match &s.failure {
                None => writeln!(f, "ok   {:>6} {}", s.at, s.text)?,
                Some(m) => writeln!(f, "FAIL {:>6} {} (line {}): {m}", s.at, s.text, s.line)?,
            }
        }
        let failed = self.failures().count();
        write!(f, "{} steps, {} failed", self.steps.len(), failed)
    }
}

struct Runner {
    cluster: Cluster,
    config: KernelConfig,
    labels: BTreeMap<(String, String), RuleId>,
    fired: BTreeMap<(String, RuleId), Vec<Vec<usize>>>,
    agents: Vec<(String, String, Interpreter)>,
}

impl Runner {
    fn collect_firings(&mut self) {
        for node in self.cluster.node_names() {
            let Ok(k) = self.cluster.kernel_mut(&node) else { continue };
            for f in k.drain_firings() {
                self.fired.entry((node.clone(), f.rule)).or_default().push(f.before);
            }
        }
    }

    /// Retries blocked agents until a full pass makes no progress.
    fn settle(&mut self) {
        loop {
            let mut progressed = false;
            for (node, _, it) in &mut self.agents {
                if it.status().is_final() {
                    continue;
                }
                let before = it.steps();
                it.run(&mut At { cluster: &mut self.cluster, node: node.clone() });
                progressed |= it.steps() > before || it.status().is_final();
            }
            self.collect_firings();
            if !progressed {
                return;
            }
        }
    }

    fn label(&self, node: &str, label: &str) -> Result<RuleId, String> {
        self.labels.get(&(node.to_string(), label.to_string())).copied().ok_or_else(|| format!("no rule labelled `{label}` on {node}"))
    }

    fn exec(&mut self, action: &Action) -> Result<(), String> {
        match action {
            Action::Node { name, boards } => self.cluster.add_node(name, boards).map_err(|e| e.to_string()),
            Action::Tell { node, board, tuple } => {
                self.cluster.attempt(node, &Op::Tell(board.clone(), tuple.clone())).map(|_| ()).map_err(|e| e.to_string())
            }
            Action::TellR { node, board, rule, label } => {
                let reply = self.cluster.attempt(node, &Op::TellR(board.clone(), rule.clone())).map_err(|e| e.to_string())?;
                if let (Some(label), Some(crate::kernel::Reply::Rule(id))) = (label, reply) {
                    self.labels.insert((node.clone(), label.clone()), id);
                }
                Ok(())
            }
            Action::Agent { node, name, expr } => {
                self.cluster.kernel(node).map_err(|e| e.to_string())?;
                let seed = self.config.seed.wrapping_add(self.agents.len() as u64);
                self.agents.push((node.clone(), name.clone(), Interpreter::new(expr, seed, self.config.fuel)));
                Ok(())
            }
            Action::Connect(a, b) => self.cluster.connect(a, b).map(|_| ()).map_err(|e| e.to_string()),
            Action::Disconnect(a, b) => self.cluster.disconnect(a, b).map(|_| ()).map_err(|e| e.to_string()),
            Action::Expect { node, board, template, presence } => {
                let op = match presence {
                    Presence::Present => Op::Ask(board.clone(), template.clone()),
                    Presence::Absent => Op::Nask(board.clone(), template.clone()),
                };
                match self.cluster.attempt(node, &op).map_err(|e| e.to_string())? {
                    Some(_) => Ok(()),
                    None => Err(format!("`{op}` would block")),
                }
            }
            Action::ExpectContent { node, board, tuple, count } => {
                let k = self.cluster.kernel(node).map_err(|e| e.to_string())?;
                let snap = k.snapshot(board).map_err(|e| e.to_string())?;
                let got = snap.get(tuple).copied().unwrap_or(0);
                if got == *count {
                    Ok(())
                } else {
                    Err(format!("{board} holds {got} of {tuple}, expected {count}"))
                }
            }
            Action::ExpectVector { node, label, vector } => {
                let id = self.label(node, label)?;
                let k = self.cluster.kernel(node).map_err(|e| e.to_string())?;
                let state = k.activation(id).ok_or_else(|| format!("{id} is not installed"))?;
                if state.blackboard_vector == *vector {
                    Ok(())
                } else {
                    Err(format!("vector is {:?}, expected {vector:?}", state.blackboard_vector))
                }
            }
            Action::ExpectFired { node, label, count, before } => {
                let id = self.label(node, label)?;
                let firings = self.fired.get(&(node.clone(), id)).map(Vec::as_slice).unwrap_or_default();
                if firings.len() != *count {
                    return Err(format!("{label} fired {} times, expected {count}", firings.len()));
                }
                match (before, firings.last()) {
                    (Some(want), Some(got)) if want != got => Err(format!("last firing saw {got:?}, expected {want:?}")),
                    (Some(_), None) => Err(format!("{label} never fired")),
                    _ => Ok(()),
                }
            }
            Action::ExpectAgent { name, status } => {
                let (_, _, it) = self
                    .agents
                    .iter()
                    .rev()
                    .find(|(_, n, _)| n == name)
                    .ok_or_else(|| format!("no agent named `{name}`"))?;
                match it.status() {
                    s if s.name() == status => Ok(()),
                    s => Err(format!("agent `{name}` is {}", describe(s))),
                }
            }
            Action::ExpectLinks { node, peer, count } => {
                let n = self.cluster.link_rules(node, peer).len();
                if n == *count {
                    Ok(())
                } else {
                    Err(format!("{node} holds {n} link rules for {peer}, expected {count}"))
                }
            }
        }
    }
}

fn describe(s: &crate::agent::Status) -> String {
    match s {
        crate::agent::Status::Failure(m) => format!("failure ({m})"),
        s => s.name().to_string(),
    }
}

/// Runs every step and reports each one; a failed step does not stop the
/// run.
pub fn run_scenario(scenario: &Scenario, base: &KernelConfig) -> ScenarioReport {
    let config = KernelConfig { seed: scenario.seed, ..base.clone() };
    let mut r = Runner {
        cluster: Cluster::new(config.clone()),
        config,
        labels: BTreeMap::new(),
        fired: BTreeMap::new(),
        agents: Vec::new(),
    };
    let mut steps = Vec::new();
    for s in &scenario.steps {
        let failure = r.exec(&s.action).err();
        r.collect_firings();
        r.settle();
        steps.push(StepReport { line: s.line, at: s.at, text: s.text.clone(), failure });
    }
    ScenarioReport { steps }
}
