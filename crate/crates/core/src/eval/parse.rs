//! Token stream to statement lists. Name classes (array or function) are
//! resolved at evaluation time, so the parser only groups parentheses and
//! braces and classifies glyphs.

use std::sync::Arc;

use super::error::EvalError;
use super::value::Scalar;
use crate::lexer::{self, GlyphClass, GlyphInventory, NumberValue, Token, TokenKind};

pub(crate) const OPERATORS: &str = "/⌿\\⍀¨⍨∘.⍣⍤⌸⍥@⌺&";

#[derive(Debug, Clone)]
pub(crate) enum Item {
    Number(Scalar),
    Chars(String),
    Name(String),
    Alpha,
    Omega,
    Zilde,
    Prim(char),
    Op(char),
    Assign,
    Dfn(Arc<Dfn>),
    Paren(Vec<Item>),
}

#[derive(Debug)]
pub(crate) struct Dfn {
    pub statements: Vec<Vec<Item>>,
}

#[derive(Debug, Clone)]
pub(crate) enum Stmt {
    Expr(Vec<Item>),
    /// A statement starting with a control word, split at each control
    /// word: `:For e :In v` becomes `[(":For", [e]), (":In", [v])]`.
    Control(Vec<(String, Vec<Item>)>),
}

fn at(t: &Token) -> String {
    format!("line {}, column {}", t.span.line, t.span.column)
}

pub(crate) fn parse_program(source: &str) -> Result<Vec<Stmt>, EvalError> {
    let stream = lexer::lex(source);
    let tokens: Vec<&Token> = stream.code_tokens().collect();
    split_statements(&tokens)?
        .into_iter()
        .map(|stmt| parse_statement(&stmt))
        .collect()
}

fn is_open(t: &Token) -> bool {
    t.is_glyph('(') || t.is_glyph('{')
}

fn is_close(t: &Token) -> bool {
    t.is_glyph(')') || t.is_glyph('}')
}

/// Splits at separators outside parentheses and braces; drops empty statements.
fn split_statements<'a>(tokens: &[&'a Token]) -> Result<Vec<Vec<&'a Token>>, EvalError> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    let mut depth = 0usize;
    for t in tokens {
        if is_open(t) {
            depth += 1;
        } else if is_close(t) {
            depth = depth
                .checked_sub(1)
                .ok_or_else(|| EvalError::Syntax(format!("unbalanced {:?} at {}", t.lexeme, at(t))))?;
        }
        if t.kind == TokenKind::Separator && depth == 0 {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
        } else {
            current.push(*t);
        }
    }
    if depth != 0 {
        return Err(EvalError::Syntax("unclosed parenthesis or brace".into()));
    }
    if !current.is_empty() {
        out.push(current);
    }
    Ok(out)
}

fn parse_statement(tokens: &[&Token]) -> Result<Stmt, EvalError> {
    if tokens.first().is_some_and(|t| t.kind == TokenKind::ControlWord) {
        let mut parts: Vec<(String, Vec<Item>)> = Vec::new();
        let mut start = 0;
        for i in 1..=tokens.len() {
            if i == tokens.len() || tokens[i].kind == TokenKind::ControlWord {
                let word = tokens[start].lexeme.clone();
                parts.push((word, parse_items(&tokens[start + 1..i])?));
                start = i;
            }
        }
        return Ok(Stmt::Control(parts));
    }
    if let Some(t) = tokens.iter().find(|t| t.kind == TokenKind::ControlWord) {
        return Err(EvalError::Syntax(format!(
            "control word {} must start a statement ({})",
            t.lexeme,
            at(t)
        )));
    }
    Ok(Stmt::Expr(parse_items(tokens)?))
}

fn matching_close(tokens: &[&Token], open: usize) -> Result<usize, EvalError> {
    let mut depth = 0usize;
    for (i, t) in tokens.iter().enumerate().skip(open) {
        if is_open(t) {
            depth += 1;
        } else if is_close(t) {
            depth -= 1;
            if depth == 0 {
                let (o, c) = (tokens[open].lexeme.as_str(), t.lexeme.as_str());
                if (o == "(" && c != ")") || (o == "{" && c != "}") {
                    return Err(EvalError::Syntax(format!("mismatched {o} and {c} at {}", at(t))));
                }
                return Ok(i);
            }
        }
    }
    Err(EvalError::Syntax(format!("unclosed {:?} at {}", tokens[open].lexeme, at(tokens[open]))))
}

fn parse_items(tokens: &[&Token]) -> Result<Vec<Item>, EvalError> {
    let inventory = GlyphInventory::standard();
    let mut items = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let t = tokens[i];
        match t.kind {
            TokenKind::NumberLiteral => {
                if let Some(d) = &t.diagnostic {
                    return Err(EvalError::Syntax(format!("{d} at {}", at(t))));
                }
                let n = match lexer::parse_number(&t.lexeme) {
                    Some(NumberValue::Int(i)) => Scalar::Int(i),
                    Some(NumberValue::Real(r)) => Scalar::Real(r),
                    None => return Err(EvalError::Syntax(format!("bad number at {}", at(t)))),
                };
                items.push(Item::Number(n));
            }
            TokenKind::CharacterLiteral => {
                if let Some(d) = &t.diagnostic {
                    return Err(EvalError::Syntax(format!("{d} at {}", at(t))));
                }
                items.push(Item::Chars(lexer::unquote(&t.lexeme)));
            }
            TokenKind::Identifier => {
                if t.lexeme.starts_with('⎕') {
                    return Err(EvalError::Unsupported(format!("system name {}", t.lexeme)));
                }
                items.push(Item::Name(t.lexeme.clone()));
            }
            TokenKind::Glyph => {
                let c = t.first_char().expect("glyph tokens are one codepoint");
                match c {
                    '(' => {
                        let close = matching_close(tokens, i)?;
                        let inner = parse_items(&tokens[i + 1..close])?;
                        if inner.is_empty() {
                            return Err(EvalError::Syntax(format!("empty parentheses at {}", at(t))));
                        }
                        items.push(Item::Paren(inner));
                        i = close;
                    }
                    '{' => {
                        let close = matching_close(tokens, i)?;
                        let body = &tokens[i + 1..close];
                        let statements = split_statements(body)?
                            .into_iter()
                            .map(|s| parse_items(&s))
                            .collect::<Result<Vec<_>, _>>()?;
                        items.push(Item::Dfn(Arc::new(Dfn { statements })));
                        i = close;
                    }
                    ')' | '}' => return Err(EvalError::Syntax(format!("unexpected {c} at {}", at(t)))),
                    '←' => items.push(Item::Assign),
                    '⍺' => items.push(Item::Alpha),
                    '⍵' => items.push(Item::Omega),
                    '⍬' => items.push(Item::Zilde),
                    ':' => return Err(EvalError::Unsupported("dfn guards".into())),
                    '[' | ']' => return Err(EvalError::Unsupported("bracket indexing and axis specification".into())),
                    '∇' => return Err(EvalError::Unsupported("∇ self-reference".into())),
                    '→' => return Err(EvalError::Unsupported("branch (→)".into())),
                    '⍞' | '⎕' => return Err(EvalError::Unsupported(format!("{c} input/output"))),
                    c if OPERATORS.contains(c) => items.push(Item::Op(c)),
                    c if inventory.class_of(c) == Some(GlyphClass::PrimitiveFunction) => {
                        items.push(Item::Prim(c))
                    }
                    _ => {
                        return Err(EvalError::Syntax(format!("unexpected {:?} at {}", t.lexeme, at(t))));
                    }
                }
            }
            TokenKind::ControlWord => {
                return Err(EvalError::Syntax(format!("misplaced control word {} at {}", t.lexeme, at(t))));
            }
            TokenKind::Comment | TokenKind::Separator => {}
        }
        i += 1;
    }
    Ok(items)
}
