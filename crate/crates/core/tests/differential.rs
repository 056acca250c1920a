use bach_core::difftrace::{compare, differential, random_trace, TraceConfig, TraceStats};
use bach_core::{Kernel, KernelConfig};

#[test]
fn incremental_and_full_scan_engines_agree() {
    let mut total = TraceStats::default();
    for seed in 0..100 {
        let cfg = TraceConfig { seed, ..TraceConfig::default() };
        match differential(&cfg) {
            Ok(s) => {
                total.ops += s.ops;
                total.firings += s.firings;
                total.blocked += s.blocked;
                total.errors += s.errors;
            }
            Err(d) => panic!("seed {seed}: {d}"),
        }
    }
    assert_eq!(total.ops, 100_000);
    // the traces must actually drive the rule machinery
    assert!(total.firings > 10_000, "{total:?}");
    assert!(total.blocked > 1_000, "{total:?}");
    assert!(total.errors > 0, "{total:?}");
}

#[test]
fn comparison_detects_a_different_schedule() {
    // same trace, different firing seeds: some trace must tell them apart
    let diverged = (0..20).any(|seed| {
        let ops = random_trace(&TraceConfig { seed, ..TraceConfig::default() });
        let mut a = Kernel::new(KernelConfig { seed: 1, fuel: 50, ..KernelConfig::default() });
        let mut b = Kernel::new(KernelConfig { seed: 2, fuel: 50, ..KernelConfig::default() });
        compare(&mut a, &mut b, &ops).is_err()
    });
    assert!(diverged);
}

#[test]
fn traces_are_reproducible() {
    let cfg = TraceConfig { seed: 7, ops: 200, ..TraceConfig::default() };
    assert_eq!(random_trace(&cfg), random_trace(&cfg));
    assert_eq!(differential(&cfg).unwrap(), differential(&cfg).unwrap());
}
