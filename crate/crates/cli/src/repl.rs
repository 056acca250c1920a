use std::io::{BufRead, Write};
use std::time::Duration;

use anyhow::Result;
use bach_core::agent::{parse_agent, Interpreter};

use crate::target::{describe, format_snapshot, Target};

const HELP: &str = "\
agent expressions run as typed, e.g. tell(b, <a>) ; ask(b, <a>)
  snapshot [board]   show stored tuples
  boards             list boards
  pending            list blocked agents
  help | quit";

pub struct Session {
    pub target: Target,
    pub seed: u64,
    pub fuel: usize,
    pending: Vec<(usize, Interpreter)>,
    count: usize,
}

impl Session {
    pub fn new(target: Target, seed: u64, fuel: usize) -> Session {
        Session { target, seed, fuel, pending: Vec::new(), count: 0 }
    }

    /// Handles one input line. Returns false on `quit`.
    pub fn line(&mut self, line: &str, out: &mut impl Write) -> Result<bool> {
        let line = line.trim();
        let (cmd, arg) = line.split_once(char::is_whitespace).map_or((line, ""), |(c, a)| (c, a.trim()));
        match cmd {
            "" => {}
            _ if cmd.starts_with('#') => {}
            "quit" | "exit" => return Ok(false),
            "help" => writeln!(out, "{HELP}")?,
            "boards" => match self.target.boards() {
                Ok(b) => writeln!(out, "{}", b.join(" "))?,
                Err(e) => writeln!(out, "error: {e}")?,
            },
            "pending" => {
                for (n, _) in &self.pending {
                    writeln!(out, "[{n}] blocked")?;
                }
            }
            "snapshot" => {
                let boards = if arg.is_empty() { self.target.boards().unwrap_or_default() } else { vec![arg.to_string()] };
                for b in boards {
                    match self.target.snapshot(&b) {
                        Ok(c) => writeln!(out, "{}", format_snapshot(&b, &c))?,
                        Err(e) => writeln!(out, "error: {e}")?,
                    }
                }
            }
            _ => match parse_agent(line) {
                Err(e) => writeln!(out, "error: {e}")?,
                Ok(expr) => {
                    self.count += 1;
                    let n = self.count;
                    self.target.prepare(&expr);
                    let mut it = Interpreter::new(&expr, self.seed.wrapping_add(n as u64), self.fuel);
                    // remote agents get no grace period here; they resume on later lines
                    self.target.resume(&mut it, Duration::ZERO);
                    writeln!(out, "[{n}] {}", describe(&it.outcome()))?;
                    if !it.status().is_final() {
                        self.pending.push((n, it));
                    }
                    self.retry(out)?;
                }
            },
        }
        Ok(true)
    }

    /// Gives blocked agents another chance after a change.
    fn retry(&mut self, out: &mut impl Write) -> Result<()> {
        let mut progress = true;
        while progress {
            progress = false;
            let mut still = Vec::new();
            for (n, mut it) in std::mem::take(&mut self.pending) {
                let before = it.steps();
                self.target.resume(&mut it, Duration::ZERO);
                if it.status().is_final() {
                    writeln!(out, "[{n}] resumed: {}", describe(&it.outcome()))?;
                    progress = true;
                } else {
                    progress |= it.steps() > before;
                    still.push((n, it));
                }
            }
            self.pending = still;
        }
        Ok(())
    }

    pub fn run(&mut self, input: impl BufRead, out: &mut impl Write, prompt: bool) -> Result<()> {
        if prompt {
            write!(out, "> ")?;
            out.flush()?;
        }
        for line in input.lines() {
            if !self.line(&line?, out)? {
                break;
            }
            if prompt {
                write!(out, "> ")?;
                out.flush()?;
            }
        }
        Ok(())
    }
}
