//! Activation and blackboard vectors for one rule.

use crate::rule::{Rule, RuleId};

/// Per-rule counters.
///
/// `activation_vector[k]` is the instance count an `in` slot requires (0 for
/// `nin` slots); `blackboard_vector[k]` is the number of instances currently
/// on the context board that the slot's template covers. Slots follow the
/// left-hand side order of the rule.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActivationState {
    pub rule: RuleId,
    pub activation_vector: Vec<usize>,
    pub blackboard_vector: Vec<usize>,
    /// Which slots are `in` slots.
    pub in_slots: Vec<bool>,
}

impl ActivationState {
    /// Zero counters for `rule`.
    pub fn new(id: RuleId, rule: &Rule) -> ActivationState {
        ActivationState {
            rule: id,
            activation_vector: rule.lhs.iter().map(|p| p.required()).collect(),
            blackboard_vector: vec![0; rule.lhs.len()],
            in_slots: rule.lhs.iter().map(|p| p.is_in()).collect(),
        }
    }

    /// Every `in` slot has at least its required count and every `nin`
    /// slot has none.
    pub fn is_active(&self) -> bool {
        self.in_slots
            .iter()
            .zip(self.activation_vector.iter().zip(&self.blackboard_vector))
            .all(|(&is_in, (&c, &bc))| if is_in { bc >= c } else { bc == 0 })
    }

    /// Number of distinct witness combinations: the product over `in` slots
    /// of `C(bc, c)`. Zero for an inactive state with a short `in` slot.
    pub fn firing_count(&self) -> u128 {
        self.in_slots
            .iter()
            .zip(self.activation_vector.iter().zip(&self.blackboard_vector))
            .filter(|(is_in, _)| **is_in)
            .fold(1u128, |acc, (_, (&c, &bc))| acc.saturating_mul(binomial(bc as u64, c as u64)))
    }
}

/// `n` choose `k`, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc * (n - i) is divisible by (i + 1)
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(act: &[usize], bb: &[usize], ins: &[bool]) -> ActivationState {
        ActivationState {
            rule: RuleId(0),
            activation_vector: act.to_vec(),
            blackboard_vector: bb.to_vec(),
            in_slots: ins.to_vec(),
        }
    }

    #[test]
    fn counted_rule_states() {
        let ins = [true, true, false];
        assert!(state(&[2, 1, 0], &[3, 1, 0], &ins).is_active());
        assert!(!state(&[2, 1, 0], &[1, 1, 1], &ins).is_active());
        assert_eq!(state(&[2, 1, 0], &[3, 1, 0], &ins).firing_count(), 3);
    }

    #[test]
    fn empty_board_never_active_with_in_slot() {
        assert!(!state(&[1], &[0], &[true]).is_active());
        assert!(state(&[0], &[0], &[false]).is_active());
    }

    #[test]
    fn unique_witness_set() {
        assert_eq!(state(&[2, 3, 1], &[2, 3, 1], &[true; 3]).firing_count(), 1);
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(2, 1), 2);
        assert_eq!(binomial(6, 0), 1);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(60, 30), 118_264_581_564_861_424);
    }
}
