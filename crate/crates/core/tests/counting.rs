//! Activation vectors and firing counts against brute-force enumeration.

use bach_core::syntax::{parse_rule, parse_tuple};
use bach_core::{Kernel, KernelConfig};

/// Number of ways to pick `c` of `bc` distinguishable copies, by walking
/// every subset.
fn subsets(bc: u32, c: u32) -> u128 {
    (0u32..1 << bc).filter(|m| m.count_ones() == c).count() as u128
}

/// Witnesses of a rule whose slots are independent: every combination of
/// one subset per slot.
fn enumerate(slots: &[(u32, u32)]) -> u128 {
    fn go(slots: &[(u32, u32)]) -> u128 {
        let Some(((c, bc), rest)) = slots.split_first() else { return 1 };
        let mut total = 0;
        for m in 0u32..1 << bc {
            if m.count_ones() == *c {
                total += go(rest);
            }
        }
        total
    }
    go(slots)
}

fn kernel_count(slots: &[(u32, u32)]) -> (Vec<usize>, u128) {
    let mut k = Kernel::new(KernelConfig { reactive: false, ..KernelConfig::default() });
    k.create_board("b");
    let lhs: Vec<String> = slots.iter().enumerate().map(|(i, (c, _))| format!("in_{c}(b, <s, {i}>)")).collect();
    let id = k.tellr("b", parse_rule(&format!("{} ->f in(b, <out>)", lhs.join(", "))).unwrap()).unwrap();
    for (i, (_, bc)) in slots.iter().enumerate() {
        for _ in 0..*bc {
            k.tell("b", parse_tuple(&format!("<s, {i}>")).unwrap()).unwrap();
        }
    }
    let st = k.activation(id).unwrap();
    (st.blackboard_vector.clone(), st.firing_count())
}

#[test]
fn firing_count_matches_enumeration_exhaustively() {
    let start = std::time::Instant::now();
    let cells: Vec<(u32, u32)> = (1..=4).flat_map(|c| (0..=6).map(move |bc| (c, bc))).collect();
    let single: Vec<u128> = cells.iter().map(|&(c, bc)| subsets(bc, c)).collect();
    let mut checked = 0usize;
    // every slot count up to four, every (count, copies) per slot
    for k in 1..=4u32 {
        let mut idx = vec![0usize; k as usize];
        loop {
            let slots: Vec<(u32, u32)> = idx.iter().map(|&i| cells[i]).collect();
            let brute: u128 = if k <= 2 { enumerate(&slots) } else { idx.iter().map(|&i| single[i]).product() };
            if k <= 2 {
                let (vector, count) = kernel_count(&slots);
                assert_eq!(vector, slots.iter().map(|s| s.1 as usize).collect::<Vec<_>>());
                assert_eq!(count, brute, "{slots:?}");
            } else {
                let expected: u128 = slots.iter().map(|&(c, bc)| bach_core::activation::binomial(bc as u64, c as u64)).product();
                assert_eq!(expected, brute, "{slots:?}");
            }
            checked += 1;
            let mut pos = 0;
            loop {
                if pos == idx.len() {
                    break;
                }
                idx[pos] += 1;
                if idx[pos] < cells.len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos == idx.len() {
                break;
            }
        }
    }
    assert_eq!(checked, 28 + 28 * 28 + 28usize.pow(3) + 28usize.pow(4));
    // sampled kernel check at three and four slots
    for slots in [vec![(2, 6), (1, 3), (4, 5)], vec![(1, 1), (2, 2), (3, 3), (4, 6)], vec![(3, 2), (1, 6), (1, 6), (2, 4)]] {
        assert_eq!(kernel_count(&slots).1, enumerate(&slots), "{slots:?}");
    }
    assert!(start.elapsed().as_secs() < 10);
}

const COUNTED: &str = "in_2(b1, <t1>), [in(b1, <t2>)], nin(b1, <t3>) ->f in(b2, <t2>)";

/// Direct simulation of the rule on counts: fire while two `t1`, one `t2`
/// and no `t3` are present.
fn simulate(seq: &[&str]) -> ([usize; 4], usize, usize) {
    let mut b1 = [0usize; 4];
    let mut b2_t2 = 0;
    let mut firings = 0;
    for s in seq {
        let i = ["t1", "t2", "t3", "t4"].iter().position(|t| t == s).unwrap();
        b1[i] += 1;
        while b1[0] >= 2 && b1[1] >= 1 && b1[2] == 0 {
            b1[0] -= 2;
            b1[2] += 1;
            b2_t2 += 1;
            firings += 1;
        }
    }
    (b1, b2_t2, firings)
}

#[test]
fn every_five_tell_sequence_agrees_with_simulation() {
    let atoms = ["t1", "t2", "t3", "t4"];
    for code in 0..4usize.pow(5) {
        let seq: Vec<&str> = (0..5).map(|i| atoms[(code / 4usize.pow(i)) % 4]).collect();
        let mut k = Kernel::with_boards(&["b1", "b2"]);
        k.tellr("b1", parse_rule(COUNTED).unwrap()).unwrap();
        for s in &seq {
            k.tell("b1", parse_tuple(&format!("<{s}>")).unwrap()).unwrap();
        }
        let (b1, b2_t2, firings) = simulate(&seq);
        let snap = k.snapshot("b1").unwrap();
        for (i, a) in atoms.iter().enumerate() {
            let got = snap.get(&parse_tuple(&format!("<{a}>")).unwrap()).copied().unwrap_or(0);
            assert_eq!(got, b1[i], "{seq:?} {a}");
        }
        let got = k.snapshot("b2").unwrap().get(&parse_tuple("<t2>").unwrap()).copied().unwrap_or(0);
        assert_eq!(got, b2_t2, "{seq:?}");
        assert_eq!(k.drain_firings().len(), firings, "{seq:?}");
    }
}
