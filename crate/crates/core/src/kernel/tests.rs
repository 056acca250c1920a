use super::*;
use crate::rule;

fn t(s: &str) -> Tuple {
    s.parse().unwrap()
}

fn tp(s: &str) -> Template {
    s.parse().unwrap()
}

fn r(s: &str) -> Rule {
    s.parse().unwrap()
}

fn count(k: &Kernel, board: &str, tuple: &str) -> usize {
    k.snapshot(board).unwrap().get(&t(tuple)).copied().unwrap_or(0)
}

const COUNTED: &str = "in_2(b1, <t1>), [in(b1, <t2>)], nin(b1, <t3>) ->f in(b2, <t2>)";

#[test]
fn counted_rule_fires_once_and_leaves_one_one_one() {
    let mut k = Kernel::with_boards(&["b1", "b2"]);
    let id = k.tellr("b1", r(COUNTED)).unwrap();
    for s in ["<t1>", "<t1>", "<t4>", "<t1>"] {
        k.tell("b1", t(s)).unwrap();
        assert!(k.drain_firings().is_empty());
    }
    assert_eq!(k.activation(id).unwrap().blackboard_vector, vec![3, 0, 0]);
    k.tell("b1", t("<t2>")).unwrap();
    let fired = k.drain_firings();
    assert_eq!(fired.len(), 1);
    assert_eq!(fired[0].before, vec![3, 1, 0]);
    let st = k.activation(id).unwrap();
    assert_eq!(st.blackboard_vector, vec![1, 1, 1]);
    assert!(!st.is_active());
    assert_eq!(count(&k, "b2", "<t2>"), 1);
    assert_eq!(count(&k, "b1", "<t3>"), 1);
}

#[test]
fn counted_rule_vector_observable_without_reaction() {
    let mut k = Kernel::new(KernelConfig { reactive: false, ..KernelConfig::default() });
    k.create_board("b1");
    k.create_board("b2");
    let id = k.tellr("b1", r(COUNTED)).unwrap();
    for s in ["<t1>", "<t1>", "<t4>", "<t1>", "<t2>"] {
        k.tell("b1", t(s)).unwrap();
    }
    let st = k.activation(id).unwrap().clone();
    assert_eq!(st.blackboard_vector, vec![3, 1, 0]);
    assert_eq!(st.firing_count(), 3);
    assert_eq!(k.fire_all("b1").unwrap().len(), 1);
    assert_eq!(k.activation(id).unwrap().blackboard_vector, vec![1, 1, 1]);
}

#[test]
fn backward_ask_waits_then_reads_virtually() {
    let mut k = Kernel::with_boards(&["b1", "b2"]);
    let id = k.tellr("b2", r("in_2(b1, <t1>), [in(b1, <t2>)] ->b [in(b2, <t2>)]")).unwrap();
    let Submitted::Pending(ticket) = k.submit(Op::Ask(BoardRef::local("b2"), tp("<t2>"))).unwrap() else {
        panic!("ask should block");
    };
    k.tell("b1", t("<t1>")).unwrap();
    k.tell("b1", t("<t2>")).unwrap();
    assert!(k.take_completed(ticket).is_none());
    k.tell("b1", t("<t1>")).unwrap();
    assert_eq!(k.activation(id).unwrap().blackboard_vector, vec![2, 1]);
    assert_eq!(k.take_completed(ticket), Some(Ok(Reply::Bound(Binding::new()))));
    assert_eq!(count(&k, "b1", "<t1>"), 2);
    assert_eq!(count(&k, "b1", "<t2>"), 1);
    assert!(k.snapshot("b2").unwrap().is_empty());
}

#[test]
fn guarded_backward_rhs_cannot_be_consumed() {
    let mut k = Kernel::with_boards(&["b1", "b2"]);
    k.tellr("b2", r("in_2(b1, <t1>), [in(b1, <t2>)] ->b [in(b2, <t2>)]")).unwrap();
    for s in ["<t1>", "<t1>", "<t2>"] {
        k.tell("b1", t(s)).unwrap();
    }
    assert!(k.get("b2", tp("<t2>")).unwrap().is_none());
    assert!(k.ask("b2", tp("<t2>")).unwrap().is_some());
}

#[test]
fn unguarded_backward_get_consumes_witness() {
    let mut k = Kernel::with_boards(&["b1", "b2"]);
    k.tellr("b2", r("in(b1, <job, ?X>) ->b in(b2, <ready, !X>)")).unwrap();
    k.tell("b1", t("<job, 7>")).unwrap();
    let b = k.get("b2", tp("<ready, ?N>")).unwrap().unwrap();
    assert_eq!(b.to_string(), "{N=7}");
    assert!(k.snapshot("b1").unwrap().is_empty());
}

#[test]
fn forward_moves_and_copy_keeps() {
    let mut k = Kernel::with_boards(&["a", "b", "c"]);
    k.tellr("a", rule::library::forward(&BoardRef::local("a"), &BoardRef::local("b"))).unwrap();
    k.tellr("b", rule::library::copy(&BoardRef::local("b"), &BoardRef::local("c"))).unwrap();
    k.tell("a", t("<x, 1>")).unwrap();
    assert_eq!(count(&k, "a", "<x, 1>"), 0);
    assert_eq!(count(&k, "b", "<x, 1>"), 1);
    assert_eq!(count(&k, "c", "<x, 1>"), 1);
    k.tell("a", t("<x, 1>")).unwrap();
    assert_eq!(count(&k, "b", "<x, 1>"), 2);
    assert_eq!(count(&k, "c", "<x, 1>"), 2);
}

#[test]
fn inherit_chain_is_transitive() {
    let mut k = Kernel::with_boards(&["b1", "b2", "b3"]);
    let (b1, b2, b3) = (BoardRef::local("b1"), BoardRef::local("b2"), BoardRef::local("b3"));
    k.tellr("b1", rule::library::inherit(&b1, &b2)).unwrap();
    k.tellr("b2", rule::library::inherit(&b2, &b3)).unwrap();
    k.tell("b3", t("<deep>")).unwrap();
    assert!(k.ask("b1", tp("<deep>")).unwrap().is_some());
    assert!(!k.nask("b1", tp("<deep>")).unwrap());
    assert!(k.snapshot("b1").unwrap().is_empty());
    let found = k.virtual_presence("b1", &tp("?X")).unwrap();
    assert_eq!(found.len(), 1);
}

#[test]
fn inherit_cycle_terminates() {
    let mut k = Kernel::with_boards(&["a", "b"]);
    let (a, b) = (BoardRef::local("a"), BoardRef::local("b"));
    k.tellr("a", rule::library::inherit(&a, &b)).unwrap();
    k.tellr("b", rule::library::inherit(&b, &a)).unwrap();
    assert!(k.ask("a", tp("<none>")).unwrap().is_none());
    k.tell("b", t("<x>")).unwrap();
    assert!(k.ask("a", tp("<x>")).unwrap().is_some());
}

#[test]
fn nask_sees_virtual_absence() {
    let mut k = Kernel::with_boards(&["b1", "b2"]);
    k.tellr("b2", r("[in(b1, <off>)] ->b [nin(b2, <light>)]")).unwrap();
    k.tell("b2", t("<light>")).unwrap();
    assert!(!k.nask("b2", tp("<light>")).unwrap());
    k.tell("b1", t("<off>")).unwrap();
    assert!(k.nask("b2", tp("<light>")).unwrap());
    assert!(k.ask("b2", tp("<light>")).unwrap().is_some());
}

#[test]
fn rule_ops_are_structural() {
    let mut k = Kernel::with_boards(&["b1", "b2"]);
    let a = k.tellr("b1", r("in(b1, <a, ?X>) ->f in(b2, <b, !X>)")).unwrap();
    let b = k.tellr("b1", r("in(b1, <a, ?Y>) ->f in(b2, <b, !Y>)")).unwrap();
    assert_eq!(a, b);
    assert_eq!(k.rules_on("b1").unwrap().len(), 1);
    assert!(k.try_op(&Op::AskR(BoardRef::local("b1"), r("in(b1, <a, ?Z>) ->f in(b2, <b, !Z>)"))).unwrap().is_some());
    assert!(k.getr("b1", r("in(b1, <a, ?Z>) ->f in(b2, <b, !Z>)")).unwrap());
    assert!(k.rules_on("b1").unwrap().is_empty());
    assert!(k.try_op(&Op::NaskR(BoardRef::local("b1"), r("in(b1, <a, ?Z>) ->f in(b2, <b, !Z>)"))).unwrap().is_some());
}

#[test]
fn wrong_host_is_rejected() {
    let mut k = Kernel::with_boards(&["b1", "b2"]);
    let e = k.tellr("b2", r("in(b1, <a>) ->f in(b2, <a>)")).unwrap_err();
    assert_eq!(e.name(), "HostMismatch");
    let e = k.tellr("b1", r("in(b1, <a>) ->f in(nowhere, <a>)")).unwrap_err();
    assert_eq!(e, KernelError::UnknownBlackboard("nowhere".into()));
}

#[test]
fn divergent_chain_runs_out_of_fuel() {
    let mut k = Kernel::new(KernelConfig { fuel: 50, ..KernelConfig::default() });
    k.create_board("b");
    k.tellr("b", r("in(b, <p>) ->f in_2(b, <p>)")).unwrap();
    assert_eq!(k.tell("b", t("<p>")), Err(KernelError::FuelExhausted(50)));
    assert_eq!(k.drain_firings().len(), 50);
}

#[test]
fn join_without_consistent_binding_does_not_fire() {
    let mut k = Kernel::with_boards(&["b", "out"]);
    k.tellr("b", r("in(b, <a, ?X>), in(b, <b, !X>) ->f in(out, <ab, !X>)")).unwrap();
    k.tell("b", t("<a, 1>")).unwrap();
    k.tell("b", t("<b, 2>")).unwrap();
    assert!(k.snapshot("out").unwrap().is_empty());
    k.tell("b", t("<b, 1>")).unwrap();
    assert_eq!(count(&k, "out", "<ab, 1>"), 1);
    assert_eq!(count(&k, "b", "<b, 2>"), 1);
}

#[test]
fn cancel_withdraws_parked_op() {
    let mut k = Kernel::with_boards(&["b"]);
    let Submitted::Pending(ticket) = k.submit(Op::Get(BoardRef::local("b"), tp("<x>"))).unwrap() else {
        panic!()
    };
    assert!(k.is_pending(ticket));
    assert!(k.cancel(ticket).is_none());
    k.tell("b", t("<x>")).unwrap();
    assert_eq!(count(&k, "b", "<x>"), 1);
}

#[test]
fn parked_gets_complete_in_fifo_order() {
    let mut k = Kernel::with_boards(&["b"]);
    let q = |k: &mut Kernel| match k.submit(Op::Get(BoardRef::local("b"), tp("<x, ?N>"))).unwrap() {
        Submitted::Pending(t) => t,
        Submitted::Ready(_) => panic!(),
    };
    let first = q(&mut k);
    let second = q(&mut k);
    k.tell("b", t("<x, 1>")).unwrap();
    assert!(k.take_completed(first).is_some());
    assert!(k.is_pending(second));
}

#[test]
fn remote_link_reads_snapshot() {
    let mut k = Kernel::with_boards(&["bA"]);
    k.tellr("bA", r("[in(bB@peer, ?X)] ->b [in(bA, !X)]")).unwrap();
    let op = Op::Ask(BoardRef::local("bA"), tp("<v, ?N>"));
    let needs = k.remote_needs(&op);
    assert_eq!(needs.len(), 1);
    assert_eq!(needs[0].template, tp("<v, ?N>"));
    assert_eq!(k.try_op(&op).unwrap(), None);
    k.install_remote([(needs[0].clone(), vec![t("<v, 3>")])]);
    assert_eq!(k.try_op(&op).unwrap().unwrap().binding().to_string(), "{N=3}");
    assert!(k.snapshot("bA").unwrap().is_empty());
}

#[test]
fn forward_to_remote_board_goes_to_outbox() {
    let mut k = Kernel::with_boards(&["b"]);
    k.tellr("b", r("in(b, ?X) ->f in(c@far, !X)")).unwrap();
    k.tell("b", t("<m>")).unwrap();
    assert_eq!(k.take_outbox(), vec![RemoteEffect::Tell(BoardRef::remote("c", "far"), t("<m>"))]);
    assert!(k.snapshot("b").unwrap().is_empty());
}
