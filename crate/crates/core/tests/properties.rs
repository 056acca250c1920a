use std::collections::BTreeMap;

use proptest::prelude::*;

use bach_core::agent::{format_agent, parse_agent, run_agent, AgentExpr, Payload, Prim, PrimKind, Status};
use bach_core::activation::binomial;
use bach_core::rule::library;
use bach_core::syntax::{parse_rule, parse_tuple};
use bach_core::{Binding, BoardRef, Field, Kernel, KernelConfig, Op, Template, Tuple, Value};

fn atom() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,4}"
}

fn value() -> impl Strategy<Value = Value> {
    prop_oneof![
        atom().prop_map(Value::Atom),
        (-50i64..50).prop_map(Value::Int),
        "[a-z #\"\\\\]{0,5}".prop_map(Value::Str),
    ]
}

fn tuple() -> impl Strategy<Value = Tuple> {
    prop::collection::vec(value(), 1..4).prop_map(|v| Tuple::new(v).unwrap())
}

fn var() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["X", "Y", "Zed", "N_1"]).prop_map(String::from)
}

fn field() -> impl Strategy<Value = Field> {
    prop_oneof![
        3 => value().prop_map(Field::Lit),
        1 => var().prop_map(Field::Bind),
        1 => var().prop_map(Field::Use),
    ]
}

fn template() -> impl Strategy<Value = Template> {
    prop_oneof![
        6 => prop::collection::vec(field(), 1..4).prop_map(Template::Pattern),
        1 => var().prop_map(Template::BindAll),
        1 => var().prop_map(Template::UseAll),
    ]
}

fn board() -> impl Strategy<Value = BoardRef> {
    (atom(), prop::option::of(prop::sample::select(vec!["n1", "host-b", "10.0.0.2:7001"]))).prop_map(|(b, h)| match h {
        Some(h) => BoardRef::remote(b, h),
        None => BoardRef::local(b),
    })
}

const RULES: [&str; 4] = [
    "in(b1, ?X) ->f in(b2, !X)",
    "[in(b1, ?X)] ->b [in(b2, !X)]",
    "in_2(b1, <t1>), [in(b1, <t2>)], nin(b1, <t3>) ->f in(b2, <t2>)",
    "in(b1, <job, ?N>), nin(b1, <stop>) ->f in(b2@n1, <done, !N>), nin(b1, <job, !N>)",
];

fn prim() -> impl Strategy<Value = AgentExpr> {
    (prop::sample::select(PrimKind::ALL.to_vec()), board(), template(), prop::sample::select(RULES.to_vec())).prop_map(
        |(kind, board, t, r)| {
            let payload = if kind.takes_rule() { Payload::Rule(parse_rule(r).unwrap()) } else { Payload::Data(t) };
            AgentExpr::Prim(Prim { kind, board, payload })
        },
    )
}

fn agent() -> impl Strategy<Value = AgentExpr> {
    prim().prop_recursive(5, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| AgentExpr::seq(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| AgentExpr::par(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| AgentExpr::choice(a, b)),
        ]
    })
}

/// Agents over one local board whose primitives are all tells and gets of
/// two atoms.
fn local_agent() -> impl Strategy<Value = AgentExpr> {
    let leaf = (prop::bool::ANY, prop::sample::select(vec!["a", "b"])).prop_map(|(tell, a)| {
        let t = Template::from(parse_tuple(&format!("<{a}>")).unwrap());
        let kind = if tell { PrimKind::Tell } else { PrimKind::Get };
        AgentExpr::Prim(Prim { kind, board: BoardRef::local("b"), payload: Payload::Data(t) })
    });
    leaf.prop_recursive(4, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| AgentExpr::seq(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| AgentExpr::par(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| AgentExpr::choice(a, b)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn agent_format_parse_round_trip(e in agent()) {
        let text = format_agent(&e);
        let back = parse_agent(&text);
        prop_assert_eq!(back.as_ref(), Ok(&e), "{}", text);
    }
}

proptest! {
    #[test]
    fn tuple_text_round_trip(t in tuple()) {
        prop_assert_eq!(parse_tuple(&t.to_string()).unwrap(), t);
    }

    #[test]
    fn value_order_is_total_and_consistent(a in value(), b in value(), c in value()) {
        prop_assert_eq!(a.cmp(&b), b.cmp(&a).reverse());
        if a <= b && b <= c {
            prop_assert!(a <= c);
        }
        prop_assert_eq!(a == b, a.cmp(&b).is_eq());
    }

    #[test]
    fn abstracted_template_matches_its_tuple(t in tuple(), mask in prop::collection::vec(prop::bool::ANY, 4)) {
        let fields: Vec<Field> = t
            .fields()
            .iter()
            .enumerate()
            .map(|(i, v)| if mask[i] { Field::Bind(format!("V{i}")) } else { Field::Lit(v.clone()) })
            .collect();
        let template = Template::Pattern(fields);
        let env = template.matches(&t, &Binding::new());
        prop_assert!(env.is_some());
        prop_assert!(template.covers(&t));
        prop_assert_eq!(template.substitute(&env.unwrap()).unwrap(), t);
    }

    #[test]
    fn tells_and_gets_conserve_the_multiset(ops in prop::collection::vec((prop::bool::ANY, 0u8..3), 0..60)) {
        let mut k = Kernel::with_boards(&["b"]);
        let mut model: BTreeMap<Tuple, usize> = BTreeMap::new();
        for (tell, which) in ops {
            let t = parse_tuple(&format!("<v, {which}>")).unwrap();
            if tell {
                k.tell("b", t.clone()).unwrap();
                *model.entry(t).or_default() += 1;
            } else {
                let got = k.get("b", Template::from(&t)).unwrap();
                let have = model.get(&t).copied().unwrap_or(0);
                prop_assert_eq!(got.is_some(), have > 0);
                if have > 1 {
                    model.insert(t, have - 1);
                } else {
                    model.remove(&t);
                }
            }
        }
        prop_assert_eq!(k.snapshot("b").unwrap(), model);
    }

    #[test]
    fn asks_never_change_contents(
        tuples in prop::collection::vec((0usize..3, tuple()), 0..12),
        queries in prop::collection::vec((0usize..3, template()), 1..12),
    ) {
        let names = ["p", "q", "r"];
        let mut k = Kernel::with_boards(&names);
        let b = |i: usize| BoardRef::local(names[i]);
        k.tellr("q", library::inherit(&b(1), &b(0))).unwrap();
        k.tellr("r", parse_rule("in(q, <k, ?X>), nin(q, <stop>) ->b [in(r, <got, !X>)]").unwrap()).unwrap();
        for (i, t) in tuples {
            k.tell(names[i], t).unwrap();
        }
        let before = k.contents();
        for (i, q) in queries {
            let _ = k.try_op(&Op::Ask(b(i), q.clone()));
            let _ = k.try_op(&Op::Nask(b(i), q));
        }
        prop_assert_eq!(k.contents(), before);
    }

    #[test]
    fn agent_runs_are_deterministic(e in local_agent(), seed in 0u64..1000) {
        let go = || {
            let mut k = Kernel::new(KernelConfig { seed, ..KernelConfig::default() });
            k.create_board("b");
            let out = run_agent(&e, &mut k, seed, 50);
            (out, k.contents())
        };
        prop_assert_eq!(go(), go());
    }

    #[test]
    fn sequence_runs_left_before_right(a in local_agent(), b in local_agent(), seed in 0u64..100) {
        let mut k = Kernel::with_boards(&["b"]);
        let left = run_agent(&a, &mut k, seed, 200);
        let mut k2 = Kernel::with_boards(&["b"]);
        let both = run_agent(&AgentExpr::seq(a, b), &mut k2, seed, 200);
        // the left operand alone behaves as the prefix of the sequence
        if left.status == Status::Success {
            prop_assert_eq!(&both.trace[..left.trace.len()], &left.trace[..]);
        }
    }

    #[test]
    fn choice_runs_exactly_one_branch(seed in 0u64..500) {
        let e = parse_agent("(tell(b, <l>) ; tell(b, <l>)) + (tell(b, <r>) ; tell(b, <r>) ; tell(b, <r>))").unwrap();
        let mut k = Kernel::with_boards(&["b"]);
        let out = run_agent(&e, &mut k, seed, 50);
        prop_assert_eq!(&out.status, &Status::Success);
        let snap = k.snapshot("b").unwrap();
        prop_assert_eq!(snap.len(), 1);
        prop_assert!(out.trace.len() == 2 || out.trace.len() == 3);
    }

    #[test]
    fn ready_parallel_side_waits_at_most_two_steps(seed in 0u64..500, l in 1usize..6, r in 1usize..6) {
        let side = |name: &str, n: usize| vec![format!("tell(b, <{name}>)"); n].join(" ; ");
        let e = parse_agent(&format!("({}) || ({})", side("l", l), side("r", r))).unwrap();
        let mut k = Kernel::with_boards(&["b"]);
        let out = run_agent(&e, &mut k, seed, 50);
        prop_assert_eq!(&out.status, &Status::Success);
        let names: Vec<String> = out.trace.iter().map(|t| t.op.to_string()).collect();
        let (mut left_done, mut right_done) = (0, 0);
        let mut since = [0usize; 2];
        for n in &names {
            if n.contains("<l>") { left_done += 1; since = [0, since[1] + 1]; } else { right_done += 1; since = [since[0] + 1, 0]; }
            if left_done < l { prop_assert!(since[0] <= 1, "{:?}", names); }
            if right_done < r { prop_assert!(since[1] <= 1, "{:?}", names); }
        }
    }

    #[test]
    fn firing_count_is_a_product_of_binomials(slots in prop::collection::vec((1u64..5, 0u64..8), 1..5)) {
        let mut k = Kernel::new(KernelConfig { reactive: false, ..KernelConfig::default() });
        k.create_board("b");
        let lhs: Vec<String> = slots.iter().enumerate().map(|(i, (c, _))| format!("in_{c}(b, <s, {i}>)")).collect();
        let id = k.tellr("b", parse_rule(&format!("{} ->f in(b, <out>)", lhs.join(", "))).unwrap()).unwrap();
        for (i, (_, bc)) in slots.iter().enumerate() {
            for _ in 0..*bc {
                k.tell("b", parse_tuple(&format!("<s, {i}>")).unwrap()).unwrap();
            }
        }
        let expected: u128 = slots.iter().map(|(c, bc)| binomial(*bc, *c)).product();
        prop_assert_eq!(k.activation(id).unwrap().firing_count(), expected);
    }
}
