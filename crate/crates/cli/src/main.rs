mod repl;
mod target;

use std::io::{self, IsTerminal, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use bach_core::agent::parse_agent_file;
use bach_core::bench::bench_sync;
use bach_core::difftrace::{differential, TraceConfig};
use bach_core::scenario::{parse_scenario, run_scenario};
use bach_core::{KernelConfig, Reply};
use bach_node::{Node, NodeConfig};

use target::{describe, Target};

#[derive(Parser)]
#[command(name = "bach", version, about = "Blackboard coordination: nodes, agents, scenarios and benchmarks")]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Opts {
    /// Seed for rule witnesses and agent scheduling.
    #[arg(long, global = true, env = "BACH_SEED", default_value_t = 0)]
    seed: u64,
    /// Deadline in milliseconds for blocking and remote operations.
    #[arg(long, global = true, env = "BACH_TIMEOUT", default_value_t = 2000)]
    timeout: u64,
    /// Rule firings per operation, and steps per agent.
    #[arg(long, global = true, env = "BACH_FUEL", default_value_t = 10_000)]
    fuel: usize,
    /// How many backward rules deep virtual presence is followed.
    #[arg(long, global = true, env = "BACH_DEPTH", default_value_t = 8)]
    depth: usize,
}

impl Opts {
    fn kernel(&self) -> KernelConfig {
        KernelConfig { seed: self.seed, fuel: self.fuel, chain_depth: self.depth, ..KernelConfig::default() }
    }

    fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a node until interrupted.
    Serve {
        #[arg(long)]
        name: String,
        #[arg(long, default_value = "127.0.0.1:0")]
        listen: SocketAddr,
        /// Public board; repeat for several.
        #[arg(long = "board", required = true)]
        boards: Vec<String>,
        /// Engage this peer once listening; repeat for several.
        #[arg(long = "connect")]
        peers: Vec<SocketAddr>,
    },
    /// Run the agents of an agent file.
    Run {
        file: PathBuf,
        /// Run against this node instead of a fresh local kernel.
        #[arg(long)]
        node: Option<SocketAddr>,
        /// Run only these agents.
        #[arg(long = "agent")]
        agents: Vec<String>,
        /// Print every completed primitive.
        #[arg(long)]
        trace: bool,
    },
    /// Replay scenario files; fails if any expectation fails.
    Scenario {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Time the synchronisation rule on the incremental and naive engines.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "1,10,20,50,100,200")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// Print CSV instead of a table.
        #[arg(long)]
        csv: bool,
    },
    /// Compare the incremental engine against the naive one on random traces.
    Diff {
        #[arg(long, default_value_t = 100)]
        traces: u64,
        #[arg(long, default_value_t = 1000)]
        ops: usize,
        #[arg(long, default_value_t = 10)]
        rules: usize,
    },
    /// Read agent expressions line by line.
    Repl {
        #[arg(long)]
        node: Option<SocketAddr>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Ok(false) means the command ran but reported a failure.
fn dispatch(cli: Cli) -> Result<bool> {
    let opts = cli.opts;
    match cli.cmd {
        Cmd::Serve { name, listen, boards, peers } => serve(&opts, name, listen, boards, peers),
        Cmd::Run { file, node, agents, trace } => run(&opts, &file, node, &agents, trace),
        Cmd::Scenario { files } => scenario(&opts, &files),
        Cmd::Bench { n, reps, csv } => {
            if n.contains(&0) {
                bail!("n must be at least 1");
            }
            let report = bench_sync(&n, opts.seed, reps);
            if csv {
                print!("{}", report.to_csv());
            } else {
                println!("{report}");
            }
            Ok(report.rows.iter().all(|r| r.correct()))
        }
        Cmd::Diff { traces, ops, rules } => {
            let start = Instant::now();
            let mut firings = 0;
            for i in 0..traces {
                let cfg = TraceConfig { seed: opts.seed.wrapping_add(i), ops, rules, ..TraceConfig::default() };
                match differential(&cfg) {
                    Ok(stats) => firings += stats.firings,
                    Err(d) => {
                        println!("trace {} (seed {}): {d}", i, cfg.seed);
                        return Ok(false);
                    }
                }
            }
            println!("{traces} traces agree ({firings} firings, {:.2?})", start.elapsed());
            Ok(true)
        }
        Cmd::Repl { node } => {
            let target = match node {
                Some(addr) => Target::remote(addr, opts.timeout()),
                None => Target::local(opts.kernel()),
            };
            let mut session = repl::Session::new(target, opts.seed, opts.fuel);
            let stdin = io::stdin();
            let prompt = stdin.is_terminal();
            session.run(stdin.lock(), &mut io::stdout().lock(), prompt)?;
            Ok(true)
        }
    }
}

fn serve(opts: &Opts, name: String, listen: SocketAddr, boards: Vec<String>, peers: Vec<SocketAddr>) -> Result<bool> {
    let config = NodeConfig {
        seed: opts.seed,
        fuel: opts.fuel,
        chain_depth: opts.depth,
        timeout: opts.timeout(),
        ..NodeConfig::new(name, listen).with_boards(boards)
    };
    let node = Node::serve(config)?;
    println!("{} listening on {}", node.name(), node.endpoint());
    for p in peers {
        let peer = node.connect_peer(p).with_context(|| format!("connecting to {p}"))?;
        println!("engaged {peer} at {p}");
    }
    io::stdout().flush()?;
    loop {
        std::thread::park();
    }
}

fn run(opts: &Opts, file: &PathBuf, node: Option<SocketAddr>, only: &[String], trace: bool) -> Result<bool> {
    let src = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let mut agents = parse_agent_file(&src).with_context(|| format!("in {}", file.display()))?;
    if !only.is_empty() {
        for name in only {
            if !agents.iter().any(|(n, _)| n == name) {
                bail!("no agent `{name}` in {}", file.display());
            }
        }
        agents.retain(|(n, _)| only.contains(n));
    }
    let mut target = match node {
        Some(addr) => Target::remote(addr, opts.timeout()),
        None => Target::local(opts.kernel()),
    };
    // agents run in file order; blocked ones are retried until none moves
    let mut runs: Vec<_> = agents
        .iter()
        .enumerate()
        .map(|(i, (_, e))| {
            target.prepare(e);
            bach_core::agent::Interpreter::new(e, opts.seed.wrapping_add(i as u64), opts.fuel)
        })
        .collect();
    let grace = if node.is_some() { opts.timeout() } else { Duration::ZERO };
    loop {
        let mut moved = false;
        for it in runs.iter_mut().filter(|it| !it.status().is_final()) {
            let before = it.steps();
            target.resume(it, Duration::ZERO);
            moved |= it.steps() > before;
        }
        if !moved {
            break;
        }
    }
    for it in runs.iter_mut().filter(|it| !it.status().is_final()) {
        target.resume(it, grace);
    }
    let mut ok = true;
    for ((name, _), it) in agents.iter().zip(&runs) {
        let outcome = it.outcome();
        ok &= outcome.status == bach_core::agent::Status::Success;
        println!("{name}: {}", describe(&outcome));
        if trace {
            for e in &outcome.trace {
                let reply = match &e.reply {
                    Reply::Ack => "ok".to_string(),
                    Reply::Bound(b) => b.to_string(),
                    Reply::Rule(id) => id.to_string(),
                };
                println!("  {} -> {reply}", e.op);
            }
        }
    }
    if let Target::Local(k) = &target {
        for b in k.board_names() {
            println!("{}", target::format_snapshot(&b, &k.snapshot(&b)?));
        }
    }
    Ok(ok)
}

fn scenario(opts: &Opts, files: &[PathBuf]) -> Result<bool> {
    let mut ok = true;
    for f in files {
        let src = std::fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
        let sc = parse_scenario(&src).with_context(|| format!("in {}", f.display()))?;
        let report = run_scenario(&sc, &opts.kernel());
        println!("== {}", f.display());
        println!("{report}");
        ok &= report.passed();
    }
    Ok(ok)
}
