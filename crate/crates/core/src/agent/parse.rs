use thiserror::Error;

use super::{AgentExpr, Payload, Prim, PrimKind};
use crate::syntax::{parse_all, BareVar, Cursor, SyntaxError};

const OPERATORS: [&str; 3] = ["`;`", "`||`", "`+`"];

fn choice(c: &mut Cursor<'_>) -> Result<AgentExpr, SyntaxError> {
    let mut e = par(c)?;
    while c.eat("+") {
        e = AgentExpr::choice(e, par(c)?);
    }
    Ok(e)
}

fn par(c: &mut Cursor<'_>) -> Result<AgentExpr, SyntaxError> {
    let mut e = seq(c)?;
    while c.eat("||") {
        e = AgentExpr::par(e, seq(c)?);
    }
    Ok(e)
}

fn seq(c: &mut Cursor<'_>) -> Result<AgentExpr, SyntaxError> {
    let mut e = atom(c)?;
    while c.eat(";") {
        e = AgentExpr::seq(e, atom(c)?);
    }
    Ok(e)
}

fn atom(c: &mut Cursor<'_>) -> Result<AgentExpr, SyntaxError> {
    if c.eat("(") {
        let e = choice(c)?;
        if !c.eat(")") {
            let mut expected = vec!["`)`"];
            expected.extend(OPERATORS);
            return Err(c.error(&expected));
        }
        return Ok(e);
    }
    prim(c).map(AgentExpr::Prim)
}

fn prim(c: &mut Cursor<'_>) -> Result<Prim, SyntaxError> {
    c.skip_ws();
    let Some(kind) = c.peek_ident().and_then(PrimKind::from_name) else {
        return Err(c.error(&["primitive", "`(`"]));
    };
    c.ident();
    c.expect("(")?;
    let board = c.board_ref()?;
    c.expect(",")?;
    let payload = match kind {
        PrimKind::Tell => Payload::Data(c.template(BareVar::Use)?),
        k if k.takes_rule() => Payload::Rule(c.rule()?),
        _ => Payload::Data(c.template(BareVar::Bind)?),
    };
    c.expect(")")?;
    Ok(Prim { kind, board, payload })
}

/// Parses an agent expression. `;` binds tightest, then `||`, then `+`;
/// all three associate to the left.
pub fn parse_agent(src: &str) -> Result<AgentExpr, SyntaxError> {
    parse_all(src, |c| {
        let e = choice(c)?;
        if !c.at_end() {
            let mut expected = OPERATORS.to_vec();
            expected.push("end of input");
            return Err(c.error(&expected));
        }
        Ok(e)
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {source}")]
pub struct AgentFileError {
    pub line: usize,
    #[source]
    pub source: SyntaxError,
}

/// Reads `agent <name> = <expr>` definitions, one per line; `#` starts a
/// comment.
pub fn parse_agent_file(src: &str) -> Result<Vec<(String, AgentExpr)>, AgentFileError> {
    let mut out = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let text = strip_comment(raw);
        if text.trim().is_empty() {
            continue;
        }
        let def = parse_all(text, |c| {
            if c.ident() != Some("agent") {
                return Err(c.error(&["`agent`"]));
            }
            c.skip_ws();
            let name = c.ident().ok_or_else(|| c.error(&["agent name"]))?.to_string();
            c.expect("=")?;
            let start = c.pos();
            let e = parse_agent(&text[start..]).map_err(|mut e| {
                e.pos += start;
                e
            })?;
            while c.peek().is_some() {
                c.bump();
            }
            Ok((name, e))
        });
        match def {
            Ok((name, e)) => out.push((name, e)),
            Err(source) => return Err(AgentFileError { line: i + 1, source }),
        }
    }
    Ok(out)
}

/// Drops a `#` comment, leaving `#` inside string literals alone.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}
