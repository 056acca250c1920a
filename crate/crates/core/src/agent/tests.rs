use super::*;
use crate::kernel::{Kernel, KernelConfig};
use crate::syntax::parse_tuple;

fn p(s: &str) -> AgentExpr {
    parse_agent(s).unwrap_or_else(|e| panic!("{s}: {e}"))
}

fn count(k: &Kernel, board: &str, tuple: &str) -> usize {
    k.snapshot(board).unwrap().get(&parse_tuple(tuple).unwrap()).copied().unwrap_or(0)
}

#[test]
fn sequence_binds_tighter_than_choice() {
    let e = p("tell(b, <a>) + tell(b, <c>) ; tell(b, <d>)");
    let expected = AgentExpr::choice(p("tell(b, <a>)"), AgentExpr::seq(p("tell(b, <c>)"), p("tell(b, <d>)")));
    assert_eq!(e, expected);
    assert_eq!(e, p("(tell(b, <a>)) + ((tell(b, <c>)) ; tell(b, <d>))"));
}

#[test]
fn precedence_goldens() {
    let cases = [
        ("tell(b,<a>) ; tell(b,<c>) || tell(b,<d>)", "(tell(b,<a>) ; tell(b,<c>)) || tell(b,<d>)"),
        ("tell(b,<a>) || tell(b,<c>) + tell(b,<d>)", "(tell(b,<a>) || tell(b,<c>)) + tell(b,<d>)"),
        ("tell(b,<a>) + tell(b,<c>) + tell(b,<d>)", "(tell(b,<a>) + tell(b,<c>)) + tell(b,<d>)"),
        ("tell(b,<a>) ; tell(b,<c>) ; tell(b,<d>)", "(tell(b,<a>) ; tell(b,<c>)) ; tell(b,<d>)"),
        ("tell(b,<a>) || tell(b,<c>) ; tell(b,<d>)", "tell(b,<a>) || (tell(b,<c>) ; tell(b,<d>))"),
    ];
    for (src, explicit) in cases {
        assert_eq!(p(src), p(explicit), "{src}");
    }
}

#[test]
fn formatting_uses_minimal_parentheses() {
    assert_eq!(format_agent(&p("tell(b,<a,1>)")), "tell(b, <a, 1>)");
    let nested = p("(get(b,<a>) + tell(b,<x>)) ; ask(c@h, <y, ?Y>)");
    assert_eq!(format_agent(&nested), "(get(b, <a>) + tell(b, <x>)) ; ask(c@h, <y, ?Y>)");
    let right = p("tell(b,<a>) ; (tell(b,<c>) ; tell(b,<d>))");
    assert_eq!(format_agent(&right), "tell(b, <a>) ; (tell(b, <c>) ; tell(b, <d>))");
    assert_eq!(format_agent(&p("(tell(b,<a>) ; tell(b,<c>)) ; tell(b,<d>)")), "tell(b, <a>) ; tell(b, <c>) ; tell(b, <d>)");
    for e in [nested, right] {
        assert_eq!(p(&format_agent(&e)), e);
    }
}

#[test]
fn bare_variables_depend_on_the_primitive() {
    let e = p("get(b, <a, X>) ; tell(c, <b, X>)");
    assert_eq!(format_agent(&e), "get(b, <a, ?X>) ; tell(c, <b, !X>)");
}

#[test]
fn rule_payloads_parse_inline() {
    let e = p("tellr(b2, in(b1, ?X) ->f in(b2, !X)) ; getr(b2, in(b1, ?X) ->f in(b2, !X))");
    assert_eq!(p(&format_agent(&e)), e);
    let AgentExpr::Seq(a, _) = &e else { panic!() };
    let AgentExpr::Prim(prim) = &**a else { panic!() };
    assert!(matches!(prim.payload, Payload::Rule(_)));
}

#[test]
fn syntax_errors_report_position_and_expectations() {
    let e = parse_agent("tell(b,<a>").unwrap_err();
    assert_eq!(e.pos, 10);
    assert!(e.expected.contains(&"`)`".to_string()));
    let e = parse_agent("tell(b,<a>) ; ").unwrap_err();
    assert_eq!(e.pos, 14);
    assert!(e.expected.contains(&"primitive".to_string()));
    let e = parse_agent("tell(b,<a>) tell(b,<c>)").unwrap_err();
    assert_eq!(e.pos, 12);
    assert!(e.expected.contains(&"`;`".to_string()));
    let e = parse_agent("shout(b,<a>)").unwrap_err();
    assert_eq!(e.pos, 0);
}

#[test]
fn agent_files_skip_comments() {
    let src = "# two agents\nagent one = tell(b, <a>)  # trailing\n\nagent two = get(b, <\"#\">) + tell(b, <x>)\n";
    let defs = parse_agent_file(src).unwrap();
    assert_eq!(defs.len(), 2);
    assert_eq!(defs[0].0, "one");
    assert_eq!(defs[1].1, p("get(b, <\"#\">) + tell(b, <x>)"));
    let err = parse_agent_file("agent ok = tell(b,<a>)\nagent bad = tell(b,").unwrap_err();
    assert_eq!(err.line, 2);
    assert_eq!(err.source.pos, 19);
}

#[test]
fn sequence_of_tell_then_get_leaves_board_empty() {
    let mut k = Kernel::with_boards(&["b"]);
    let out = run_agent(&p("tell(b, <a>) ; get(b, <a>)"), &mut k, 1, 100);
    assert_eq!(out.status, Status::Success);
    assert_eq!(out.trace.len(), 2);
    assert!(k.snapshot("b").unwrap().is_empty());
}

#[test]
fn choice_takes_the_branch_that_can_start() {
    for seed in 0..20 {
        let mut k = Kernel::with_boards(&["b"]);
        let out = run_agent(&p("get(b,<a>) + tell(b,<x>)"), &mut k, seed, 100);
        assert_eq!(out.status, Status::Success);
        assert_eq!(out.trace.len(), 1);
        assert_eq!(count(&k, "b", "<x>"), 1);
    }
}

#[test]
fn choice_commits_after_first_primitive() {
    // whichever branch starts, the other never contributes
    let mut seen = [false; 2];
    for seed in 0..40 {
        let mut k = Kernel::with_boards(&["b"]);
        let out = run_agent(&p("tell(b,<l>) ; tell(b,<l2>) + tell(b,<r>) ; tell(b,<r2>)"), &mut k, seed, 100);
        assert_eq!(out.status, Status::Success);
        let left = count(&k, "b", "<l>") + count(&k, "b", "<l2>");
        let right = count(&k, "b", "<r>") + count(&k, "b", "<r2>");
        assert!(left == 0 || right == 0);
        seen[usize::from(left > 0)] = true;
    }
    assert_eq!(seen, [true, true]);
}

#[test]
fn choice_with_both_branches_blocked_suspends() {
    let mut k = Kernel::with_boards(&["b"]);
    let e = p("get(b,<a>) + get(b,<c>)");
    let mut it = Interpreter::new(&e, 3, 100);
    assert_eq!(it.run(&mut k), &Status::Blocked);
    k.tell("b", parse_tuple("<c>").unwrap()).unwrap();
    assert_eq!(it.run(&mut k), &Status::Success);
    assert!(k.snapshot("b").unwrap().is_empty());
}

#[test]
fn parallel_ask_waits_for_backward_rule() {
    for seed in 0..20 {
        let mut k = Kernel::with_boards(&["b1", "b2"]);
        let setup = p("tellr(b2, in_2(b1, <t1>), [in(b1, <t2>)] ->b [in(b2, <t2>)])");
        assert_eq!(run_agent(&setup, &mut k, seed, 10).status, Status::Success);
        let e = p("ask(b2,<t2>) || (tell(b1,<t1>);tell(b1,<t1>);tell(b1,<t2>))");
        let out = run_agent(&e, &mut k, seed, 100);
        assert_eq!(out.status, Status::Success, "seed {seed}");
        assert_eq!(out.trace.len(), 4);
        assert!(matches!(out.trace.last().unwrap().op, Op::Ask(..)));
        assert!(k.snapshot("b2").unwrap().is_empty());
    }
}

#[test]
fn bindings_flow_along_a_sequence() {
    let mut k = Kernel::with_boards(&["b", "c"]);
    k.tell("b", parse_tuple("<job, 7>").unwrap()).unwrap();
    let out = run_agent(&p("get(b, <job, ?N>) ; tell(c, <done, !N>)"), &mut k, 0, 10);
    assert_eq!(out.status, Status::Success);
    assert_eq!(count(&k, "c", "<done, 7>"), 1);
    assert_eq!(out.bindings.to_string(), "{N=7}");
}

#[test]
fn parallel_scopes_merge_or_fail() {
    let mut k = Kernel::with_boards(&["b"]);
    k.tell("b", parse_tuple("<x, 1>").unwrap()).unwrap();
    k.tell("b", parse_tuple("<y, 1>").unwrap()).unwrap();
    let out = run_agent(&p("ask(b, <x, ?N>) || ask(b, <y, ?M>)"), &mut k, 0, 10);
    assert_eq!(out.status, Status::Success);
    assert_eq!(out.bindings.to_string(), "{M=1, N=1}");

    k.tell("b", parse_tuple("<z, 2>").unwrap()).unwrap();
    let out = run_agent(&p("ask(b, <x, ?N>) || ask(b, <z, ?N>)"), &mut k, 0, 10);
    assert!(matches!(out.status, Status::Failure(_)));
}

#[test]
fn unbound_use_fails() {
    let mut k = Kernel::with_boards(&["b"]);
    let out = run_agent(&p("tell(b, <a, !N>)"), &mut k, 0, 10);
    assert!(matches!(out.status, Status::Failure(_)));
    assert!(out.trace.is_empty());
}

#[test]
fn unknown_board_fails() {
    let mut k = Kernel::with_boards(&["b"]);
    let out = run_agent(&p("tell(b, <a>) ; tell(nope, <a>)"), &mut k, 0, 10);
    let Status::Failure(msg) = out.status else { panic!() };
    assert!(msg.contains("UnknownBlackboard"), "{msg}");
    assert_eq!(out.trace.len(), 1);
}

#[test]
fn fuel_bounds_primitive_steps() {
    let mut k = Kernel::with_boards(&["b"]);
    let e = p("tell(b,<a>) ; tell(b,<a>) ; tell(b,<a>)");
    assert_eq!(run_agent(&e, &mut k, 0, 2).status, Status::FuelExhausted);
    assert_eq!(count(&k, "b", "<a>"), 2);
    let mut k = Kernel::with_boards(&["b"]);
    assert_eq!(run_agent(&e, &mut k, 0, 3).status, Status::Success);
}

#[test]
fn parallel_sides_alternate_while_both_ready() {
    let e = p("(tell(b,<l>);tell(b,<l>);tell(b,<l>);tell(b,<l>)) || (tell(b,<r>);tell(b,<r>);tell(b,<r>);tell(b,<r>))");
    for seed in 0..10 {
        let mut k = Kernel::new(KernelConfig { seed, ..KernelConfig::default() });
        k.create_board("b");
        let out = run_agent(&e, &mut k, seed, 100);
        let sides: Vec<String> = out.trace.iter().map(|t| t.op.to_string()).collect();
        for w in sides.windows(3) {
            assert!(!(w[0] == w[1] && w[1] == w[2]), "seed {seed}: {sides:?}");
        }
    }
}
