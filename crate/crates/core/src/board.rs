//! Blackboard names and the instance-tracking multiset behind each board.

use std::collections::BTreeMap;
use std::fmt;

use crate::tuple::{Template, Tuple};

/// `name` or `name@host[:port]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BoardRef {
    pub name: String,
    pub host: Option<String>,
}

impl BoardRef {
    pub fn local(name: impl Into<String>) -> BoardRef {
        BoardRef { name: name.into(), host: None }
    }

    pub fn remote(name: impl Into<String>, host: impl Into<String>) -> BoardRef {
        BoardRef { name: name.into(), host: Some(host.into()) }
    }

    pub fn is_qualified(&self) -> bool {
        self.host.is_some()
    }

    /// The unqualified form.
    pub fn unqualified(&self) -> BoardRef {
        BoardRef::local(self.name.clone())
    }
}

impl fmt::Display for BoardRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.host {
            Some(h) => write!(f, "{}@{}", self.name, h),
            None => f.write_str(&self.name),
        }
    }
}

/// Identity of one stored copy of a tuple. Ids are never reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstanceId(pub u64);

/// Multiset of tuples where every copy carries its own [`InstanceId`].
///
/// Copies of one tuple are kept in ascending id order, so "the oldest copy"
/// is always the first one.
#[derive(Debug, Clone, Default)]
pub struct Multiset {
    entries: BTreeMap<Tuple, Vec<InstanceId>>,
    len: usize,
}

impl Multiset {
    pub fn new() -> Multiset {
        Multiset::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Ids must be handed out in increasing order.
    pub fn insert(&mut self, tuple: Tuple, id: InstanceId) {
        let ids = self.entries.entry(tuple).or_default();
        debug_assert!(ids.last().is_none_or(|last| *last < id));
        ids.push(id);
        self.len += 1;
    }

    pub fn remove_instance(&mut self, tuple: &Tuple, id: InstanceId) -> bool {
        let Some(ids) = self.entries.get_mut(tuple) else {
            return false;
        };
        let Some(pos) = ids.iter().position(|i| *i == id) else {
            return false;
        };
        ids.remove(pos);
        if ids.is_empty() {
            self.entries.remove(tuple);
        }
        self.len -= 1;
        true
    }

    /// Removes the oldest copy of `tuple`.
    pub fn remove_oldest(&mut self, tuple: &Tuple) -> Option<InstanceId> {
        let id = *self.entries.get(tuple)?.first()?;
        self.remove_instance(tuple, id);
        Some(id)
    }

    pub fn oldest(&self, tuple: &Tuple) -> Option<InstanceId> {
        self.entries.get(tuple).and_then(|ids| ids.first().copied())
    }

    pub fn count(&self, tuple: &Tuple) -> usize {
        self.entries.get(tuple).map_or(0, Vec::len)
    }

    pub fn contains(&self, tuple: &Tuple) -> bool {
        self.entries.contains_key(tuple)
    }

    /// Distinct tuples in canonical order with their copies.
    pub fn iter(&self) -> impl Iterator<Item = (&Tuple, &[InstanceId])> {
        self.entries.iter().map(|(t, ids)| (t, ids.as_slice()))
    }

    /// Number of copies covered by `template` (every variable treated as a
    /// binder). This is the blackboard-vector entry for one rule slot.
    pub fn count_covered(&self, template: &Template) -> usize {
        self.entries.iter().filter(|(t, _)| template.covers(t)).map(|(_, ids)| ids.len()).sum()
    }

    /// Tuple multiplicities, without instance identity.
    pub fn counts(&self) -> BTreeMap<Tuple, usize> {
        self.entries.iter().map(|(t, ids)| (t.clone(), ids.len())).collect()
    }

    /// Every copy in canonical order, one entry per copy.
    pub fn expanded(&self) -> Vec<Tuple> {
        self.entries.iter().flat_map(|(t, ids)| std::iter::repeat_n(t.clone(), ids.len())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tuple::Value;

    fn t(s: &str) -> Tuple {
        Tuple::new(vec![Value::Atom(s.into())]).unwrap()
    }

    #[test]
    fn multiplicities_track_insert_and_remove() {
        let mut m = Multiset::new();
        m.insert(t("a"), InstanceId(1));
        m.insert(t("a"), InstanceId(2));
        m.insert(t("b"), InstanceId(3));
        assert_eq!(m.len(), 3);
        assert_eq!(m.count(&t("a")), 2);
        assert_eq!(m.remove_oldest(&t("a")), Some(InstanceId(1)));
        assert_eq!(m.count(&t("a")), 1);
        assert!(m.remove_instance(&t("a"), InstanceId(2)));
        assert!(!m.contains(&t("a")));
        assert_eq!(m.remove_oldest(&t("a")), None);
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn board_ref_display() {
        assert_eq!(BoardRef::local("b1").to_string(), "b1");
        assert_eq!(BoardRef::remote("b1", "10.0.0.2:7000").to_string(), "b1@10.0.0.2:7000");
    }
}
