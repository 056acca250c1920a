//! Synchronisation benchmark: one rule waits for `n` task tuples and
//! signals completion with `<task, final>`.

use std::fmt;
use std::time::{Duration, Instant};

use crate::board::BoardRef;
use crate::kernel::{Engine, Kernel, KernelConfig, Op};
use crate::oracle::NaiveKernel;
use crate::rule::{Rule, RulePrimitive};
use crate::tuple::{Template, Tuple, Value};

pub const BOARD: &str = "tasks";

fn task(i: Value) -> Tuple {
    Tuple::new(vec![Value::Atom("task".into()), i]).expect("two fields")
}

pub fn final_tuple() -> Tuple {
    task(Value::Atom("final".into()))
}

/// `in(<task,1>), ..., in(<task,n>) ->f in(<task,final>)`.
pub fn sync_rule(n: usize) -> Rule {
    let b = BoardRef::local(BOARD);
    let lhs = (1..=n).map(|i| RulePrimitive::new_in(b.clone(), Template::from(task(Value::Int(i as i64))))).collect();
    Rule::forward(lhs, vec![RulePrimitive::new_in(b, Template::from(final_tuple()))])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchRow {
    pub n: usize,
    pub incremental: Duration,
    pub naive: Duration,
    /// `<task, final>` copies each engine ended with.
    pub finals: (usize, usize),
    /// Both engines ended with identical contents.
    pub agree: bool,
}

impl BenchRow {
    pub fn correct(&self) -> bool {
        self.finals == (1, 1) && self.agree
    }

    /// Naive time over incremental time.
    pub fn ratio(&self) -> f64 {
        self.naive.as_secs_f64() / self.incremental.as_secs_f64().max(1e-9)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, n: usize) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,incremental_ms,naive_ms,ratio,correct\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.3},{:.3},{:.2},{}\n",
                r.n,
                r.incremental.as_secs_f64() * 1e3,
                r.naive.as_secs_f64() * 1e3,
                r.ratio(),
                r.correct()
            ));
        }
        out
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>5} {:>14} {:>12} {:>8} {:>8}", "n", "incremental ms", "naive ms", "ratio", "correct")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>5} {:>14.3} {:>12.3} {:>8.2} {:>8}",
                r.n,
                r.incremental.as_secs_f64() * 1e3,
                r.naive.as_secs_f64() * 1e3,
                r.ratio(),
                r.correct()
            )?;
        }
        Ok(())
    }
}

/// Installs the rule, tells the tasks in order and returns the elapsed time
/// and the final contents.
fn drive<E: Engine>(engine: &mut E, n: usize) -> (Duration, std::collections::BTreeMap<Tuple, usize>) {
    engine.create_board(BOARD);
    let b = BoardRef::local(BOARD);
    let start = Instant::now();
    engine.try_op(&Op::TellR(b.clone(), sync_rule(n))).expect("valid rule");
    for i in 1..=n {
        engine.try_op(&Op::Tell(b.clone(), task(Value::Int(i as i64)))).expect("board exists");
    }
    let elapsed = start.elapsed();
    let content = engine.contents().remove(BOARD).unwrap_or_default();
    (elapsed, content)
}

/// Times both engines for each `n`, keeping the fastest of `reps` runs.
pub fn bench_sync(ns: &[usize], seed: u64, reps: usize) -> BenchReport {
    let config = KernelConfig { seed, ..KernelConfig::default() };
    let mut rows = Vec::new();
    for &n in ns {
        let mut best = (Duration::MAX, Duration::MAX);
        let mut outcome = None;
        for _ in 0..reps.max(1) {
            let (ti, ci) = drive(&mut Kernel::new(config.clone()), n);
            let (tn, cn) = drive(&mut NaiveKernel::new(config.clone()), n);
            best = (best.0.min(ti), best.1.min(tn));
            outcome = Some((ci, cn));
        }
        let (ci, cn) = outcome.expect("ran at least once");
        let fin = final_tuple();
        rows.push(BenchRow {
            n,
            incremental: best.0,
            naive: best.1,
            finals: (ci.get(&fin).copied().unwrap_or(0), cn.get(&fin).copied().unwrap_or(0)),
            agree: ci == cn,
        });
    }
    BenchReport { rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sizes_signal_once() {
        let report = bench_sync(&[1, 2, 5], 0, 1);
        for r in &report.rows {
            assert!(r.correct(), "{r:?}");
        }
        assert!(report.to_csv().starts_with("n,incremental_ms"));
    }

    #[test]
    fn rule_has_one_slot_per_task() {
        let r = sync_rule(3);
        assert_eq!(r.lhs.len(), 3);
        assert_eq!(r.to_string(), "in(tasks, <task, 1>), in(tasks, <task, 2>), in(tasks, <task, 3>) ->f in(tasks, <task, final>)");
    }
}
