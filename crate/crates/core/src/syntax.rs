//! Textual forms of values, tuples, templates, bindings, board names and
//! rules. Every `Display` impl in the crate prints something this module
//! parses back to an equal value.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::board::BoardRef;
use crate::rule::{Direction, Presence, Rule, RulePrimitive};
use crate::tuple::{is_atom, Binding, Bound, Field, Template, Tuple, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct SyntaxError {
    /// Byte offset into the source.
    pub pos: usize,
    pub expected: Vec<String>,
    pub found: Option<char>,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at offset {}: expected ", self.pos)?;
        match self.expected.as_slice() {
            [one] => write!(f, "{one}")?,
            many => write!(f, "one of {}", many.join(", "))?,
        }
        match self.found {
            Some(c) => write!(f, ", found `{c}`"),
            None => write!(f, ", found end of input"),
        }
    }
}

/// How a bare uppercase identifier is read inside a template.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BareVar {
    Bind,
    Use,
}

/// Character-level recursive-descent cursor shared by the rule and agent
/// grammars.
pub struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(src: &'a str) -> Cursor<'a> {
        Cursor { src, pos: 0 }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    pub fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    pub fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    pub fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    pub fn error(&self, expected: &[&str]) -> SyntaxError {
        SyntaxError {
            pos: self.pos,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek(),
        }
    }

    /// Skips whitespace and consumes `tok` if it is next.
    pub fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, tok: &str) -> Result<(), SyntaxError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.error(&[&format!("`{tok}`")]))
        }
    }

    pub fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos == self.src.len()
    }

    pub fn finish(&mut self) -> Result<(), SyntaxError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error(&["end of input"]))
        }
    }

    /// Identifier `[A-Za-z][A-Za-z0-9_]*`, without consuming it on failure.
    pub fn ident(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let rest = self.rest();
        let mut end = 0;
        for (i, c) in rest.char_indices() {
            let ok = if i == 0 { c.is_ascii_alphabetic() } else { c.is_ascii_alphanumeric() || c == '_' };
            if !ok {
                break;
            }
            end = i + c.len_utf8();
        }
        if end == 0 {
            return None;
        }
        self.pos += end;
        Some(&rest[..end])
    }

    pub fn peek_ident(&mut self) -> Option<&'a str> {
        let save = self.pos;
        let id = self.ident();
        self.pos = save;
        id
    }

    fn variable_name(&mut self) -> Result<String, SyntaxError> {
        let save = self.pos;
        match self.ident() {
            Some(id) if id.starts_with(|c: char| c.is_ascii_uppercase()) => Ok(id.to_string()),
            _ => {
                self.pos = save;
                Err(self.error(&["variable name"]))
            }
        }
    }

    pub fn value(&mut self) -> Result<Value, SyntaxError> {
        self.skip_ws();
        match self.peek() {
            Some('"') => self.string().map(Value::Str),
            Some(c) if c == '-' || c.is_ascii_digit() => self.integer().map(Value::Int),
            Some(c) if c.is_ascii_lowercase() => {
                let id = self.ident().expect("lowercase start");
                Ok(Value::Atom(id.to_string()))
            }
            _ => Err(self.error(&["atom", "integer", "string"])),
        }
    }

    fn integer(&mut self) -> Result<i64, SyntaxError> {
        let start = self.pos;
        if self.peek() == Some('-') {
            self.bump();
        }
        let digits = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.bump();
        }
        if self.pos == digits {
            self.pos = start;
            return Err(self.error(&["integer"]));
        }
        self.src[start..self.pos].parse().map_err(|_| {
            let mut e = self.error(&["integer in 64-bit range"]);
            e.pos = start;
            e
        })
    }

    fn string(&mut self) -> Result<String, SyntaxError> {
        self.expect("\"")?;
        let mut out = String::new();
        loop {
            match self.bump() {
                Some('"') => return Ok(out),
                Some('\\') => match self.bump() {
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some(c @ ('"' | '\\')) => out.push(c),
                    _ => return Err(self.error(&["escape sequence"])),
                },
                Some(c) => out.push(c),
                None => return Err(self.error(&["`\"`"])),
            }
        }
    }

    pub fn tuple(&mut self) -> Result<Tuple, SyntaxError> {
        self.expect("<")?;
        let mut values = vec![self.value()?];
        while self.eat(",") {
            values.push(self.value()?);
        }
        self.expect(">").map_err(|mut e| {
            e.expected.insert(0, "`,`".into());
            e
        })?;
        Ok(Tuple::new(values).expect("non-empty"))
    }

    fn field(&mut self, bare: BareVar) -> Result<Field, SyntaxError> {
        self.skip_ws();
        match self.peek() {
            Some('?') => {
                self.bump();
                Ok(Field::Bind(self.variable_name()?))
            }
            Some('!') => {
                self.bump();
                Ok(Field::Use(self.variable_name()?))
            }
            Some(c) if c.is_ascii_uppercase() => {
                let name = self.variable_name()?;
                Ok(match bare {
                    BareVar::Bind => Field::Bind(name),
                    BareVar::Use => Field::Use(name),
                })
            }
            _ => self.value().map(Field::Lit).map_err(|mut e| {
                e.expected.extend(["`?X`".to_string(), "`!X`".to_string()]);
                e
            }),
        }
    }

    pub fn template(&mut self, bare: BareVar) -> Result<Template, SyntaxError> {
        self.skip_ws();
        match self.peek() {
            Some('<') => {
                self.bump();
                let mut fields = vec![self.field(bare)?];
                while self.eat(",") {
                    fields.push(self.field(bare)?);
                }
                self.expect(">").map_err(|mut e| {
                    e.expected.insert(0, "`,`".into());
                    e
                })?;
                Ok(Template::Pattern(fields))
            }
            Some('?') => {
                self.bump();
                Ok(Template::BindAll(self.variable_name()?))
            }
            Some('!') => {
                self.bump();
                Ok(Template::UseAll(self.variable_name()?))
            }
            Some(c) if c.is_ascii_uppercase() => {
                let name = self.variable_name()?;
                Ok(match bare {
                    BareVar::Bind => Template::BindAll(name),
                    BareVar::Use => Template::UseAll(name),
                })
            }
            _ => Err(self.error(&["`<`", "`?X`", "`!X`"])),
        }
    }

    /// `atom ['@' host [':' port]]`
    pub fn board_ref(&mut self) -> Result<BoardRef, SyntaxError> {
        self.skip_ws();
        let save = self.pos;
        let name = match self.ident() {
            Some(id) if is_atom(id) => id.to_string(),
            _ => {
                self.pos = save;
                return Err(self.error(&["blackboard name"]));
            }
        };
        if self.peek() != Some('@') {
            return Ok(BoardRef::local(name));
        }
        self.bump();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_') {
            self.bump();
        }
        if self.pos == start {
            return Err(self.error(&["host name"]));
        }
        if self.peek() == Some(':') {
            self.bump();
            let digits = self.pos;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.bump();
            }
            if self.pos == digits {
                return Err(self.error(&["port number"]));
            }
        }
        Ok(BoardRef::remote(name, &self.src[start..self.pos]))
    }

    fn rule_primitive(&mut self, bare: BareVar) -> Result<RulePrimitive, SyntaxError> {
        let guarded = self.eat("[");
        self.skip_ws();
        let head_pos = self.pos;
        let presence = match self.ident() {
            Some("in") => Presence::In(1),
            Some("nin") => Presence::Nin,
            Some(h) if h.starts_with("in_") && h.len() > 3 && h[3..].bytes().all(|b| b.is_ascii_digit()) => {
                match h[3..].parse() {
                    Ok(c) => Presence::In(c),
                    Err(_) => {
                        self.pos = head_pos;
                        return Err(self.error(&["instance count"]));
                    }
                }
            }
            _ => {
                self.pos = head_pos;
                return Err(self.error(&["`in`", "`in_<count>`", "`nin`", "`[`"]));
            }
        };
        self.expect("(")?;
        let board = self.board_ref()?;
        self.expect(",")?;
        let template = self.template(bare)?;
        self.expect(")")?;
        if guarded {
            self.expect("]")?;
        }
        Ok(RulePrimitive { presence, board, template, guarded })
    }

    fn starts_rule_primitive(&mut self) -> bool {
        self.skip_ws();
        if self.peek() == Some('[') {
            return true;
        }
        matches!(self.peek_ident(), Some(h) if h == "in" || h == "nin" || h.starts_with("in_"))
    }

    /// `prim {, prim} (->f | ->b) [prim {, prim}]`; bare variables bind on
    /// the left and are uses on the right.
    pub fn rule(&mut self) -> Result<Rule, SyntaxError> {
        let mut lhs = vec![self.rule_primitive(BareVar::Bind)?];
        while self.eat(",") {
            lhs.push(self.rule_primitive(BareVar::Bind)?);
        }
        let direction = if self.eat("->f") {
            Direction::Forward
        } else if self.eat("->b") {
            Direction::Backward
        } else {
            return Err(self.error(&["`,`", "`->f`", "`->b`"]));
        };
        let mut rhs = Vec::new();
        if self.starts_rule_primitive() {
            rhs.push(self.rule_primitive(BareVar::Use)?);
            while self.eat(",") {
                rhs.push(self.rule_primitive(BareVar::Use)?);
            }
        }
        Ok(Rule { direction, lhs, rhs })
    }

    /// `{}` or `{X=v, Y=<...>}`
    pub fn binding(&mut self) -> Result<Binding, SyntaxError> {
        self.expect("{")?;
        let mut env = Binding::new();
        if self.eat("}") {
            return Ok(env);
        }
        loop {
            let name = self.variable_name()?;
            self.expect("=")?;
            self.skip_ws();
            let bound = if self.peek() == Some('<') { Bound::Tuple(self.tuple()?) } else { Bound::Value(self.value()?) };
            env.bind(name, bound);
            if self.eat("}") {
                return Ok(env);
            }
            self.expect(",").map_err(|mut e| {
                e.expected.push("`}`".into());
                e
            })?;
        }
    }
}

pub(crate) fn parse_all<'s, T>(src: &'s str, f: impl FnOnce(&mut Cursor<'s>) -> Result<T, SyntaxError>) -> Result<T, SyntaxError> {
    let mut c = Cursor::new(src);
    let out = f(&mut c)?;
    c.finish()?;
    Ok(out)
}

pub fn parse_value(src: &str) -> Result<Value, SyntaxError> {
    parse_all(src, Cursor::value)
}

pub fn parse_tuple(src: &str) -> Result<Tuple, SyntaxError> {
    parse_all(src, Cursor::tuple)
}

pub fn parse_template(src: &str, bare: BareVar) -> Result<Template, SyntaxError> {
    parse_all(src, |c| c.template(bare))
}

/// Whitespace-separated tuples, possibly none.
pub fn parse_tuples(src: &str) -> Result<Vec<Tuple>, SyntaxError> {
    let mut c = Cursor::new(src);
    let mut out = Vec::new();
    while !c.at_end() {
        out.push(c.tuple()?);
    }
    Ok(out)
}

pub fn parse_board_ref(src: &str) -> Result<BoardRef, SyntaxError> {
    parse_all(src, Cursor::board_ref)
}

pub fn parse_rule(src: &str) -> Result<Rule, SyntaxError> {
    parse_all(src, Cursor::rule)
}

pub fn parse_binding(src: &str) -> Result<Binding, SyntaxError> {
    parse_all(src, Cursor::binding)
}

impl FromStr for Tuple {
    type Err = SyntaxError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_tuple(s)
    }
}

/// Bare variables parse as binders.
impl FromStr for Template {
    type Err = SyntaxError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_template(s, BareVar::Bind)
    }
}

impl FromStr for BoardRef {
    type Err = SyntaxError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_board_ref(s)
    }
}

impl FromStr for Rule {
    type Err = SyntaxError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_rule(s)
    }
}

impl FromStr for Binding {
    type Err = SyntaxError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_binding(s)
    }
}
