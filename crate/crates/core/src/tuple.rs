//! Ground tuples, templates and the matching/substitution algebra.
//!
//! Templates carry two kinds of variables: binders (`?X`) that capture a
//! field on a successful match, and uses (`!X`) that require an earlier
//! binding. A template may also be a single whole-tuple variable (`?X` in
//! place of `<...>`), which matches any tuple and binds it as a unit.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// A single tuple field.
///
/// Ordering is by kind first (atom < integer < string) and then by the
/// natural order of the payload, which gives multisets a canonical order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Atom(String),
    Int(i64),
    Str(String),
}

impl Value {
    /// Builds an atom, rejecting names outside `[a-z][A-Za-z0-9_]*`.
    pub fn atom(name: impl Into<String>) -> Result<Value, InvalidAtom> {
        let name = name.into();
        if is_atom(&name) {
            Ok(Value::Atom(name))
        } else {
            Err(InvalidAtom(name))
        }
    }

    pub fn int(v: i64) -> Value {
        Value::Int(v)
    }

    pub fn string(s: impl Into<String>) -> Value {
        Value::Str(s.into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("`{0}` is not a valid atom")]
pub struct InvalidAtom(pub String);

pub fn is_atom(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub fn is_variable(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Atom(a) => f.write_str(a),
            Value::Int(i) => write!(f, "{i}"),
            Value::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
        }
    }
}

/// A ground, non-empty, positional tuple.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tuple(Vec<Value>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("tuples must have at least one field")]
pub struct EmptyTuple;

impl Tuple {
    pub fn new(fields: Vec<Value>) -> Result<Tuple, EmptyTuple> {
        if fields.is_empty() {
            Err(EmptyTuple)
        } else {
            Ok(Tuple(fields))
        }
    }

    pub fn fields(&self) -> &[Value] {
        &self.0
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for Tuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(">")
    }
}

/// One position of a template.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Field {
    Lit(Value),
    /// `?X`: binds the field, or checks it against an existing binding.
    Bind(String),
    /// `!X`: the variable must already be bound.
    Use(String),
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Lit(v) => write!(f, "{v}"),
            Field::Bind(x) => write!(f, "?{x}"),
            Field::Use(x) => write!(f, "!{x}"),
        }
    }
}

/// A tuple pattern.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Template {
    Pattern(Vec<Field>),
    /// `?X` standing for an entire tuple.
    BindAll(String),
    /// `!X` standing for an entire, previously bound tuple.
    UseAll(String),
}

impl From<Tuple> for Template {
    fn from(t: Tuple) -> Template {
        Template::Pattern(t.0.into_iter().map(Field::Lit).collect())
    }
}

impl From<&Tuple> for Template {
    fn from(t: &Tuple) -> Template {
        Template::from(t.clone())
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Template::Pattern(fields) => {
                f.write_str("<")?;
                for (i, fld) in fields.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{fld}")?;
                }
                f.write_str(">")
            }
            Template::BindAll(x) => write!(f, "?{x}"),
            Template::UseAll(x) => write!(f, "!{x}"),
        }
    }
}

/// Where a variable occurs in a template.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Field,
    Whole,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarOccurrence<'a> {
    pub name: &'a str,
    pub kind: VarKind,
    pub binder: bool,
}

impl Template {
    pub fn is_ground(&self) -> bool {
        match self {
            Template::Pattern(fields) => fields.iter().all(|f| matches!(f, Field::Lit(_))),
            _ => false,
        }
    }

    /// Variables in order of occurrence.
    pub fn variables(&self) -> Vec<VarOccurrence<'_>> {
        match self {
            Template::Pattern(fields) => fields
                .iter()
                .filter_map(|f| match f {
                    Field::Lit(_) => None,
                    Field::Bind(x) => Some(VarOccurrence { name: x, kind: VarKind::Field, binder: true }),
                    Field::Use(x) => Some(VarOccurrence { name: x, kind: VarKind::Field, binder: false }),
                })
                .collect(),
            Template::BindAll(x) => vec![VarOccurrence { name: x, kind: VarKind::Whole, binder: true }],
            Template::UseAll(x) => vec![VarOccurrence { name: x, kind: VarKind::Whole, binder: false }],
        }
    }

    /// Matches `tuple` under `env`, returning the extended binding.
    ///
    /// Arity mismatch, literal mismatch, an inconsistent binder, or a use of
    /// an unbound variable all yield `None`.
    pub fn matches(&self, tuple: &Tuple, env: &Binding) -> Option<Binding> {
        self.match_with(tuple, env, false)
    }

    /// Like [`Template::matches`], but an unbound `!X` binds instead of
    /// failing. This is the per-slot counting semantics used by activation
    /// counters and the join over a rule's left-hand side.
    pub fn matches_open(&self, tuple: &Tuple, env: &Binding) -> Option<Binding> {
        self.match_with(tuple, env, true)
    }

    /// True when some binding makes the template match `tuple`, with every
    /// variable treated as a binder.
    pub fn covers(&self, tuple: &Tuple) -> bool {
        self.matches_open(tuple, &Binding::new()).is_some()
    }

    fn match_with(&self, tuple: &Tuple, env: &Binding, open_uses: bool) -> Option<Binding> {
        let mut out = env.clone();
        match self {
            Template::Pattern(fields) => {
                if fields.len() != tuple.0.len() {
                    return None;
                }
                for (field, value) in fields.iter().zip(&tuple.0) {
                    match field {
                        Field::Lit(lit) => {
                            if lit != value {
                                return None;
                            }
                        }
                        Field::Bind(x) => bind_value(&mut out, x, value)?,
                        Field::Use(x) => match out.get(x) {
                            Some(Bound::Value(v)) if v == value => {}
                            None if open_uses => {
                                out.0.insert(x.clone(), Bound::Value(value.clone()));
                            }
                            _ => return None,
                        },
                    }
                }
            }
            Template::BindAll(x) => bind_tuple(&mut out, x, tuple)?,
            Template::UseAll(x) => match out.get(x) {
                Some(Bound::Tuple(t)) if t == tuple => {}
                None if open_uses => {
                    out.0.insert(x.clone(), Bound::Tuple(tuple.clone()));
                }
                _ => return None,
            },
        }
        Some(out)
    }

    /// Replaces every variable by its binding.
    pub fn substitute(&self, env: &Binding) -> Result<Tuple, SubstError> {
        match self {
            Template::Pattern(fields) => {
                let mut values = Vec::with_capacity(fields.len());
                for field in fields {
                    values.push(match field {
                        Field::Lit(v) => v.clone(),
                        Field::Bind(x) | Field::Use(x) => match env.get(x) {
                            Some(Bound::Value(v)) => v.clone(),
                            Some(Bound::Tuple(_)) => return Err(SubstError::KindMismatch(x.clone())),
                            None => return Err(SubstError::UnboundVariable(x.clone())),
                        },
                    });
                }
                Ok(Tuple(values))
            }
            Template::BindAll(x) | Template::UseAll(x) => match env.get(x) {
                Some(Bound::Tuple(t)) => Ok(t.clone()),
                Some(Bound::Value(_)) => Err(SubstError::KindMismatch(x.clone())),
                None => Err(SubstError::UnboundVariable(x.clone())),
            },
        }
    }

    /// Specializes the template under `env`: bound variables become
    /// literals, unbound binders stay. An unbound use is an error.
    pub fn instantiate(&self, env: &Binding) -> Result<Template, SubstError> {
        match self {
            Template::Pattern(fields) => {
                let mut out = Vec::with_capacity(fields.len());
                for field in fields {
                    out.push(match field {
                        Field::Lit(v) => Field::Lit(v.clone()),
                        Field::Bind(x) | Field::Use(x) => match env.get(x) {
                            Some(Bound::Value(v)) => Field::Lit(v.clone()),
                            Some(Bound::Tuple(_)) => return Err(SubstError::KindMismatch(x.clone())),
                            None if matches!(field, Field::Bind(_)) => Field::Bind(x.clone()),
                            None => return Err(SubstError::UnboundVariable(x.clone())),
                        },
                    });
                }
                Ok(Template::Pattern(out))
            }
            Template::BindAll(x) | Template::UseAll(x) => match env.get(x) {
                Some(Bound::Tuple(t)) => Ok(Template::from(t)),
                Some(Bound::Value(_)) => Err(SubstError::KindMismatch(x.clone())),
                None if matches!(self, Template::BindAll(_)) => Ok(self.clone()),
                None => Err(SubstError::UnboundVariable(x.clone())),
            },
        }
    }

    /// Renames every variable through `rename`.
    pub fn rename(&self, rename: &mut impl FnMut(&str) -> String) -> Template {
        match self {
            Template::Pattern(fields) => Template::Pattern(
                fields
                    .iter()
                    .map(|f| match f {
                        Field::Lit(v) => Field::Lit(v.clone()),
                        Field::Bind(x) => Field::Bind(rename(x)),
                        Field::Use(x) => Field::Use(rename(x)),
                    })
                    .collect(),
            ),
            Template::BindAll(x) => Template::BindAll(rename(x)),
            Template::UseAll(x) => Template::UseAll(rename(x)),
        }
    }
}

fn bind_value(env: &mut Binding, x: &str, value: &Value) -> Option<()> {
    match env.get(x) {
        Some(Bound::Value(v)) if v == value => Some(()),
        Some(_) => None,
        None => {
            env.0.insert(x.to_string(), Bound::Value(value.clone()));
            Some(())
        }
    }
}

fn bind_tuple(env: &mut Binding, x: &str, tuple: &Tuple) -> Option<()> {
    match env.get(x) {
        Some(Bound::Tuple(t)) if t == tuple => Some(()),
        Some(_) => None,
        None => {
            env.0.insert(x.to_string(), Bound::Tuple(tuple.clone()));
            Some(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubstError {
    #[error("unbound variable {0}")]
    UnboundVariable(String),
    #[error("variable {0} used with the wrong kind (field vs whole tuple)")]
    KindMismatch(String),
}

/// What a variable is bound to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bound {
    Value(Value),
    Tuple(Tuple),
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Value(v) => write!(f, "{v}"),
            Bound::Tuple(t) => write!(f, "{t}"),
        }
    }
}

/// Variable environment. Entries are never overwritten once present.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Binding(BTreeMap<String, Bound>);

impl Binding {
    pub fn new() -> Binding {
        Binding(BTreeMap::new())
    }

    pub fn get(&self, name: &str) -> Option<&Bound> {
        self.0.get(name)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Bound)> {
        self.0.iter()
    }

    /// Adds `name ↦ value` unless it conflicts with an existing entry.
    pub fn bind(&mut self, name: impl Into<String>, value: Bound) -> bool {
        let name = name.into();
        match self.0.get(&name) {
            Some(existing) => *existing == value,
            None => {
                self.0.insert(name, value);
                true
            }
        }
    }

    /// Union of two environments, or `None` if they disagree on a variable.
    pub fn merge(&self, other: &Binding) -> Option<Binding> {
        let mut out = self.clone();
        for (k, v) in &other.0 {
            if !out.bind(k.clone(), v.clone()) {
                return None;
            }
        }
        Some(out)
    }

    /// Restriction to the variables occurring in `template`.
    pub fn restrict_to(&self, template: &Template) -> Binding {
        let mut out = Binding::new();
        for var in template.variables() {
            if let Some(b) = self.0.get(var.name) {
                out.0.insert(var.name.to_string(), b.clone());
            }
        }
        out
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(s: &str) -> Value {
        Value::Atom(s.into())
    }

    fn tup(vs: Vec<Value>) -> Tuple {
        Tuple::new(vs).unwrap()
    }

    #[test]
    fn binder_captures_field() {
        let t = Template::Pattern(vec![Field::Lit(a("taska")), Field::Bind("X".into())]);
        let got = t.matches(&tup(vec![a("taska"), Value::Int(7)]), &Binding::new()).unwrap();
        assert_eq!(got.get("X"), Some(&Bound::Value(Value::Int(7))));
        assert_eq!(got.len(), 1);
    }

    #[test]
    fn ground_identity() {
        let t = Template::from(tup(vec![a("a")]));
        assert_eq!(t.matches(&tup(vec![a("a")]), &Binding::new()), Some(Binding::new()));
    }

    #[test]
    fn use_of_unbound_variable_fails() {
        let t = Template::Pattern(vec![Field::Lit(a("taskc")), Field::Use("X".into()), Field::Use("Y".into())]);
        let mut env = Binding::new();
        env.bind("X", Bound::Value(Value::Int(1)));
        assert_eq!(t.matches(&tup(vec![a("taskc"), Value::Int(1), Value::Int(2)]), &env), None);
        // the open variant treats Y as a binder
        assert!(t.matches_open(&tup(vec![a("taskc"), Value::Int(1), Value::Int(2)]), &env).is_some());
    }

    #[test]
    fn arity_mismatch_is_no_match() {
        let t = Template::Pattern(vec![Field::Bind("X".into())]);
        assert_eq!(t.matches(&tup(vec![a("a"), a("b")]), &Binding::new()), None);
    }

    #[test]
    fn repeated_binder_must_agree() {
        let t = Template::Pattern(vec![Field::Lit(a("a")), Field::Bind("X".into()), Field::Bind("X".into())]);
        assert!(t.matches(&tup(vec![a("a"), Value::Int(1), Value::Int(1)]), &Binding::new()).is_some());
        assert!(t.matches(&tup(vec![a("a"), Value::Int(1), Value::Int(2)]), &Binding::new()).is_none());
    }

    #[test]
    fn substitute_fills_uses() {
        let t = Template::Pattern(vec![Field::Lit(a("taskc")), Field::Use("X".into()), Field::Use("Y".into())]);
        let mut env = Binding::new();
        env.bind("X", Bound::Value(Value::Int(1)));
        env.bind("Y", Bound::Value(Value::Int(2)));
        assert_eq!(t.substitute(&env).unwrap(), tup(vec![a("taskc"), Value::Int(1), Value::Int(2)]));
    }

    #[test]
    fn substitute_without_variables() {
        let t = Template::from(tup(vec![a("a"), Value::Int(5)]));
        assert_eq!(t.substitute(&Binding::new()).unwrap(), tup(vec![a("a"), Value::Int(5)]));
    }

    #[test]
    fn substitute_unbound() {
        let t = Template::Pattern(vec![Field::Lit(a("c")), Field::Use("Z".into())]);
        assert_eq!(t.substitute(&Binding::new()), Err(SubstError::UnboundVariable("Z".into())));
    }

    #[test]
    fn whole_tuple_variables() {
        let t = Template::BindAll("X".into());
        let u = tup(vec![a("a"), Value::Int(1)]);
        let env = t.matches(&u, &Binding::new()).unwrap();
        assert_eq!(Template::UseAll("X".into()).substitute(&env).unwrap(), u);
        assert_eq!(
            Template::Pattern(vec![Field::Use("X".into())]).substitute(&env),
            Err(SubstError::KindMismatch("X".into()))
        );
    }

    #[test]
    fn instantiate_keeps_unbound_binders() {
        let t = Template::Pattern(vec![Field::Use("X".into()), Field::Bind("Y".into())]);
        let mut env = Binding::new();
        env.bind("X", Bound::Value(Value::Int(3)));
        assert_eq!(
            t.instantiate(&env).unwrap(),
            Template::Pattern(vec![Field::Lit(Value::Int(3)), Field::Bind("Y".into())])
        );
        assert!(t.instantiate(&Binding::new()).is_err());
    }

    #[test]
    fn value_kind_order() {
        assert!(a("z") < Value::Int(-5));
        assert!(Value::Int(100) < Value::Str(String::new()));
        assert!(Value::Int(-1) < Value::Int(0));
    }

    #[test]
    fn string_escapes_render() {
        assert_eq!(Value::string("a\"b\\").to_string(), r#""a\"b\\""#);
    }
}
