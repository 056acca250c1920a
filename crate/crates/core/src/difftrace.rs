//! Random operation traces and lock-step comparison of two engines.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::board::BoardRef;
use crate::kernel::{Engine, Kernel, KernelConfig, Op};
use crate::oracle::NaiveKernel;
use crate::rule::{Direction, Rule, RulePrimitive};
use crate::tuple::{Field, Template, Tuple, Value};

pub const BOARDS: [&str; 3] = ["b1", "b2", "b3"];

#[derive(Debug, Clone)]
pub struct TraceConfig {
    pub seed: u64,
    pub ops: usize,
    /// Size of the rule pool the trace draws from.
    pub rules: usize,
    pub fuel: usize,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig { seed: 0, ops: 1000, rules: 10, fuel: 50 }
    }
}

/// First point where the engines disagree.
#[derive(Debug, Clone)]
pub struct Divergence {
    pub step: usize,
    pub op: Box<Op>,
    pub detail: String,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {} `{}`: {}", self.step, self.op, self.detail)
    }
}

struct Gen {
    rng: ChaCha8Rng,
}

const ATOMS: [&str; 3] = ["a", "b", "c"];
const VARS: [&str; 2] = ["X", "Y"];

impl Gen {
    fn board(&mut self) -> BoardRef {
        BoardRef::local(*BOARDS.choose(&mut self.rng).expect("non-empty"))
    }

    fn value(&mut self) -> Value {
        if self.rng.gen_bool(0.5) {
            Value::Atom(ATOMS.choose(&mut self.rng).expect("non-empty").to_string())
        } else {
            Value::Int(self.rng.gen_range(1..=2))
        }
    }

    fn tuple(&mut self) -> Tuple {
        let head = Value::Atom(ATOMS.choose(&mut self.rng).expect("non-empty").to_string());
        let mut fields = vec![head];
        if self.rng.gen_bool(0.6) {
            fields.push(self.value());
        }
        Tuple::new(fields).expect("non-empty")
    }

    /// A query template: literals and fresh binders.
    fn query(&mut self) -> Template {
        if self.rng.gen_bool(0.1) {
            return Template::BindAll("Q".into());
        }
        let t = self.tuple();
        Template::Pattern(
            t.fields()
                .iter()
                .enumerate()
                .map(|(i, v)| if self.rng.gen_bool(0.3) { Field::Bind(format!("Q{i}")) } else { Field::Lit(v.clone()) })
                .collect(),
        )
    }

    /// A rule-slot template with field variables drawn from a small pool,
    /// so slots join.
    fn slot_template(&mut self) -> Template {
        let t = self.tuple();
        Template::Pattern(
            t.fields()
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    if i > 0 && self.rng.gen_bool(0.5) {
                        Field::Bind(VARS.choose(&mut self.rng).expect("non-empty").to_string())
                    } else {
                        Field::Lit(v.clone())
                    }
                })
                .collect(),
        )
    }

    fn rhs_template(&mut self, bound: &[String]) -> Template {
        let t = self.tuple();
        Template::Pattern(
            t.fields()
                .iter()
                .enumerate()
                .map(|(i, v)| match bound.choose(&mut self.rng) {
                    Some(x) if i > 0 && self.rng.gen_bool(0.6) => Field::Use(x.clone()),
                    _ => Field::Lit(v.clone()),
                })
                .collect(),
        )
    }

    fn link_rule(&mut self) -> Rule {
        let from = self.board();
        let to = self.board();
        let guard = self.rng.gen_bool(0.5);
        let forward = self.rng.gen_bool(0.5);
        if forward && !downstream(&from, &to) && (guard || from != to) {
            return self.link_rule();
        }
        let mut lhs = RulePrimitive::new_in(from, Template::BindAll("X".into()));
        let mut rhs = RulePrimitive::new_in(to, Template::UseAll("X".into()));
        if !forward {
            if guard {
                lhs = lhs.guarded();
                rhs = rhs.guarded();
            }
            Rule::backward(vec![lhs], rhs)
        } else {
            if guard {
                lhs = lhs.guarded();
            }
            Rule::forward(vec![lhs], vec![rhs])
        }
    }

    fn rule(&mut self) -> Rule {
        if self.rng.gen_bool(0.15) {
            return self.link_rule();
        }
        let board = self.board();
        let mut lhs = Vec::new();
        let mut bound: Vec<String> = Vec::new();
        for k in 0..self.rng.gen_range(1..=3) {
            let is_in = k == 0 || self.rng.gen_bool(0.75);
            let mut template = self.slot_template();
            if let Template::Pattern(fields) = &mut template {
                for f in fields.iter_mut() {
                    let Field::Bind(x) = f else { continue };
                    let x = x.clone();
                    if bound.contains(&x) {
                        *f = Field::Use(x);
                    } else if is_in {
                        bound.push(x);
                    } else {
                        *f = Field::Lit(Value::Int(1));
                    }
                }
            }
            let mut p = if is_in {
                let c = if self.rng.gen_bool(0.2) { 2 } else { 1 };
                RulePrimitive::new_in(board.clone(), template).count(c)
            } else {
                RulePrimitive::new_nin(board.clone(), template)
            };
            if self.rng.gen_bool(0.4) {
                p = p.guarded();
            }
            lhs.push(p);
        }
        if self.rng.gen_bool(0.6) {
            let copies = lhs.iter().filter(|p| p.is_in()).all(|p| p.guarded);
            let mut rhs = Vec::new();
            let mut looped = false;
            for _ in 0..self.rng.gen_range(0..=2) {
                let template = self.rhs_template(&bound);
                let target = self.board();
                let c = if self.rng.gen_bool(0.1) { 2 } else { 1 };
                if self.rng.gen_bool(0.2) {
                    rhs.push(RulePrimitive::new_nin(target, template));
                } else if downstream(&board, &target) || (target == board && !copies && c == 1 && !looped) {
                    looped |= target == board;
                    rhs.push(RulePrimitive::new_in(target, template).count(c));
                }
            }
            Rule { direction: Direction::Forward, lhs, rhs }
        } else {
            let template = self.rhs_template(&bound);
            let target = self.board();
            let mut rhs = if self.rng.gen_bool(0.2) {
                RulePrimitive::new_nin(target, template)
            } else {
                RulePrimitive::new_in(target, template)
            };
            if self.rng.gen_bool(0.5) {
                rhs = rhs.guarded();
            }
            Rule::backward(lhs, rhs)
        }
    }

    fn valid_rule(&mut self) -> Rule {
        loop {
            let r = self.rule();
            if r.validate().is_ok() {
                return r;
            }
        }
    }
}

/// Forward rules only feed boards later in [`BOARDS`], or their own board
/// with a single tuple while consuming their witness. Otherwise a trace
/// would mostly measure loops growing a board by the fuel limit on every
/// tell.
fn downstream(from: &BoardRef, to: &BoardRef) -> bool {
    let pos = |b: &BoardRef| BOARDS.iter().position(|n| *n == b.name);
    pos(from) < pos(to)
}

/// A reproducible trace: a rule pool, then `ops` operations over the
/// boards in [`BOARDS`].
pub fn random_trace(cfg: &TraceConfig) -> Vec<Op> {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(cfg.seed) };
    let pool: Vec<Rule> = (0..cfg.rules).map(|_| g.valid_rule()).collect();
    let mut ops = Vec::with_capacity(cfg.ops);
    for _ in 0..cfg.ops {
        let roll = g.rng.gen_range(0..100);
        let op = match roll {
            0..=32 => Op::Tell(g.board(), g.tuple()),
            33..=59 => Op::Get(g.board(), g.query()),
            60..=69 => Op::Ask(g.board(), g.query()),
            70..=77 => Op::Nask(g.board(), g.query()),
            _ if pool.is_empty() => Op::Tell(g.board(), g.tuple()),
            78..=89 => {
                let r = pool.choose(&mut g.rng).expect("non-empty").clone();
                let host = if g.rng.gen_bool(0.05) { g.board() } else { r.host_board().clone() };
                Op::TellR(host, r)
            }
            90..=95 => {
                let r = pool.choose(&mut g.rng).expect("non-empty").clone();
                Op::GetR(r.host_board().clone(), r)
            }
            _ => {
                let r = pool.choose(&mut g.rng).expect("non-empty").clone();
                if g.rng.gen_bool(0.5) {
                    Op::AskR(r.host_board().clone(), r)
                } else {
                    Op::NaskR(r.host_board().clone(), r)
                }
            }
        };
        ops.push(op);
    }
    ops
}

/// What a trace exercised.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraceStats {
    pub ops: usize,
    pub firings: usize,
    pub blocked: usize,
    pub errors: usize,
}

/// Runs `ops` on both engines, comparing replies, firings, activation
/// states and contents after every step.
pub fn compare<A: Engine, B: Engine>(a: &mut A, b: &mut B, ops: &[Op]) -> Result<TraceStats, Divergence> {
    let mut stats = TraceStats { ops: ops.len(), ..TraceStats::default() };
    for name in BOARDS {
        a.create_board(name);
        b.create_board(name);
    }
    for (step, op) in ops.iter().enumerate() {
        let fail = |detail: String| Divergence { step, op: Box::new(op.clone()), detail };
        let ra = a.try_op(op);
        let rb = b.try_op(op);
        if ra != rb {
            return Err(fail(format!("replies differ: {ra:?} vs {rb:?}")));
        }
        match ra {
            Ok(None) => stats.blocked += 1,
            Err(_) => stats.errors += 1,
            Ok(Some(_)) => {}
        }
        let (fa, fb) = (a.drain_firings(), b.drain_firings());
        if fa != fb {
            return Err(fail(format!("firings differ: {fa:?} vs {fb:?}")));
        }
        stats.firings += fa.len();
        let (sa, sb) = (a.activation_states(), b.activation_states());
        if sa != sb {
            return Err(fail(format!("activation states differ: {sa:?} vs {sb:?}")));
        }
        let (ca, cb) = (a.contents(), b.contents());
        if ca != cb {
            return Err(fail(format!("contents differ: {ca:?} vs {cb:?}")));
        }
    }
    Ok(stats)
}

/// Generates a trace from `cfg` and compares [`Kernel`] against
/// [`NaiveKernel`] on it.
pub fn differential(cfg: &TraceConfig) -> Result<TraceStats, Divergence> {
    let ops = random_trace(cfg);
    let kc = KernelConfig { seed: cfg.seed, fuel: cfg.fuel, ..KernelConfig::default() };
    let mut fast = Kernel::new(kc.clone());
    let mut naive = NaiveKernel::new(kc);
    compare(&mut fast, &mut naive, &ops)
}
