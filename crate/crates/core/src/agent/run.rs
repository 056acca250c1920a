use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{AgentExpr, Prim};
use crate::kernel::{Kernel, KernelError, Op, Reply};
use crate::tuple::Binding;

/// A failed operation, as reported by whatever executes it.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind}: {message}")]
pub struct OpFailure {
    pub kind: String,
    pub message: String,
}

impl OpFailure {
    pub fn new(kind: impl Into<String>, message: impl Into<String>) -> OpFailure {
        OpFailure { kind: kind.into(), message: message.into() }
    }
}

impl From<KernelError> for OpFailure {
    fn from(e: KernelError) -> OpFailure {
        let text = e.to_string();
        let message = text.strip_prefix(e.name()).and_then(|m| m.strip_prefix(": ")).unwrap_or(&text);
        OpFailure::new(e.name(), message)
    }
}

/// Executes operations for an agent. `Ok(None)` means the operation would
/// block; it must then have had no effect.
pub trait Dispatch {
    fn attempt(&mut self, op: &Op) -> Result<Option<Reply>, OpFailure>;
}

impl Dispatch for Kernel {
    fn attempt(&mut self, op: &Op) -> Result<Option<Reply>, OpFailure> {
        self.try_op(op).map_err(OpFailure::from)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Success,
    Failure(String),
    FuelExhausted,
    /// Every runnable primitive blocks; running again may make progress.
    Blocked,
}

impl Status {
    pub fn is_final(&self) -> bool {
        !matches!(self, Status::Blocked)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Status::Success => "success",
            Status::Failure(_) => "failure",
            Status::FuelExhausted => "fuel-exhausted",
            Status::Blocked => "blocked",
        }
    }
}

/// A completed primitive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub op: Op,
    pub reply: Reply,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentOutcome {
    pub status: Status,
    pub trace: Vec<TraceEntry>,
    pub bindings: Binding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

impl Side {
    fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Debug, Clone)]
enum Proc {
    Prim(Prim, Binding),
    Done(Binding),
    Seq(Box<Proc>, AgentExpr),
    /// `next` is the side tried first on the following step: the one
    /// passed over last time.
    Par { left: Box<Proc>, right: Box<Proc>, next: Option<Side> },
    Choice(AgentExpr, AgentExpr, Binding),
}

fn start(e: &AgentExpr, env: Binding) -> Proc {
    match e {
        AgentExpr::Prim(p) => Proc::Prim(p.clone(), env),
        AgentExpr::Seq(a, b) => Proc::Seq(Box::new(start(a, env)), (**b).clone()),
        AgentExpr::Par(a, b) => {
            Proc::Par { left: Box::new(start(a, env.clone())), right: Box::new(start(b, env)), next: None }
        }
        AgentExpr::Choice(a, b) => Proc::Choice((**a).clone(), (**b).clone(), env),
    }
}

enum Step {
    Ran,
    Blocked,
    Failed(String),
    OutOfFuel,
}

struct Cx<'d> {
    dispatch: &'d mut dyn Dispatch,
    rng: &'d mut ChaCha8Rng,
    steps: &'d mut usize,
    fuel: usize,
    trace: &'d mut Vec<TraceEntry>,
}

/// Runs at most one primitive of `p`.
fn step(p: &mut Proc, cx: &mut Cx<'_>) -> Step {
    match p {
        Proc::Done(_) => Step::Blocked,
        Proc::Prim(prim, env) => {
            let op = match prim.to_op(env) {
                Ok(op) => op,
                Err(e) => return Step::Failed(format!("{prim}: {e}")),
            };
            if *cx.steps >= cx.fuel {
                return Step::OutOfFuel;
            }
            match cx.dispatch.attempt(&op) {
                Ok(None) => Step::Blocked,
                Err(e) => Step::Failed(format!("{op}: {e}")),
                Ok(Some(reply)) => {
                    *cx.steps += 1;
                    let merged = env.merge(&reply.binding());
                    cx.trace.push(TraceEntry { op, reply });
                    match merged {
                        Some(env) => {
                            *p = Proc::Done(env);
                            Step::Ran
                        }
                        None => Step::Failed(format!("{prim}: reply conflicts with bound variables")),
                    }
                }
            }
        }
        Proc::Seq(left, right) => {
            let s = step(left, cx);
            if let Proc::Done(env) = &**left {
                *p = start(right, env.clone());
            }
            s
        }
        Proc::Par { left, right, next } => {
            let order = match *next {
                Some(side) => [side, side.other()],
                None if cx.rng.gen_bool(0.5) => [Side::Left, Side::Right],
                None => [Side::Right, Side::Left],
            };
            let mut ran = None;
            for side in order {
                let proc = match side {
                    Side::Left => &mut **left,
                    Side::Right => &mut **right,
                };
                if matches!(proc, Proc::Done(_)) {
                    continue;
                }
                match step(proc, cx) {
                    Step::Ran => {
                        ran = Some(side);
                        break;
                    }
                    Step::Blocked => {}
                    other => return other,
                }
            }
            let Some(side) = ran else {
                *next = None;
                return Step::Blocked;
            };
            *next = Some(side.other());
            if let (Proc::Done(a), Proc::Done(b)) = (&**left, &**right) {
                match a.merge(b) {
                    Some(env) => *p = Proc::Done(env),
                    None => return Step::Failed("parallel branches bound a variable differently".into()),
                }
            }
            Step::Ran
        }
        Proc::Choice(a, b, env) => {
            let (a, b, env) = (a.clone(), b.clone(), env.clone());
            let mut sides = [&a, &b];
            if cx.rng.gen_bool(0.5) {
                sides.swap(0, 1);
            }
            let mut failures = Vec::new();
            for side in sides {
                let mut q = start(side, env.clone());
                match step(&mut q, cx) {
                    Step::Ran => {
                        *p = q;
                        return Step::Ran;
                    }
                    Step::Blocked => {}
                    Step::Failed(m) => failures.push(m),
                    Step::OutOfFuel => return Step::OutOfFuel,
                }
            }
            if failures.len() == 2 {
                Step::Failed(failures.join("; "))
            } else {
                Step::Blocked
            }
        }
    }
}

/// A resumable agent run. Each call to [`Interpreter::run`] proceeds until
/// the agent finishes or every runnable primitive blocks.
#[derive(Debug, Clone)]
pub struct Interpreter {
    proc: Proc,
    rng: ChaCha8Rng,
    fuel: usize,
    steps: usize,
    trace: Vec<TraceEntry>,
    status: Status,
}

impl Interpreter {
    pub fn new(expr: &AgentExpr, seed: u64, fuel: usize) -> Interpreter {
        Interpreter {
            proc: start(expr, Binding::new()),
            rng: ChaCha8Rng::seed_from_u64(seed),
            fuel,
            steps: 0,
            trace: Vec::new(),
            status: Status::Blocked,
        }
    }

    pub fn status(&self) -> &Status {
        &self.status
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    /// Primitives executed so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Runs a single primitive. Returns false when nothing could run.
    pub fn step(&mut self, dispatch: &mut dyn Dispatch) -> bool {
        if self.status.is_final() {
            return false;
        }
        if let Proc::Done(_) = self.proc {
            self.status = Status::Success;
            return false;
        }
        let mut cx = Cx {
            dispatch,
            rng: &mut self.rng,
            steps: &mut self.steps,
            fuel: self.fuel,
            trace: &mut self.trace,
        };
        match step(&mut self.proc, &mut cx) {
            Step::Ran => {
                if let Proc::Done(_) = self.proc {
                    self.status = Status::Success;
                }
                true
            }
            Step::Blocked => {
                self.status = Status::Blocked;
                false
            }
            Step::Failed(m) => {
                self.status = Status::Failure(m);
                false
            }
            Step::OutOfFuel => {
                self.status = Status::FuelExhausted;
                false
            }
        }
    }

    pub fn run(&mut self, dispatch: &mut dyn Dispatch) -> &Status {
        while self.step(dispatch) {}
        &self.status
    }

    pub fn outcome(&self) -> AgentOutcome {
        let bindings = match &self.proc {
            Proc::Done(env) => env.clone(),
            _ => Binding::new(),
        };
        AgentOutcome { status: self.status.clone(), trace: self.trace.clone(), bindings }
    }
}

/// Runs `expr` against a single kernel. Nothing else changes the kernel in
/// the meantime, so a blocked agent stays blocked.
pub fn run_agent(expr: &AgentExpr, kernel: &mut Kernel, seed: u64, fuel: usize) -> AgentOutcome {
    let mut it = Interpreter::new(expr, seed, fuel);
    it.run(kernel);
    it.outcome()
}
