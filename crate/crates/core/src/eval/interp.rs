//! Right-to-left evaluation of parsed statements.

use std::collections::HashMap;
use std::sync::Arc;

use super::error::EvalError;
use super::parse::{parse_program, Dfn, Item, Stmt};
use super::primitives::{self as prim, Axis, SCALAR_DYADIC};
use super::value::{AplValue, Scalar};
use crate::header::{parse_definition_line, Definition, DefinitionKind, Valence};

const MAX_DEPTH: usize = 256;

#[derive(Debug, Clone)]
pub(crate) enum Function {
    Prim(char),
    Dfn(Arc<Dfn>),
    Tradfn(Arc<Tradfn>),
    Reduce(Box<Function>, Axis),
    Each(Box<Function>),
    Replicate(Axis),
}

#[derive(Debug, Clone)]
pub(crate) enum Binding {
    Value(AplValue),
    Function(Function),
}

#[derive(Debug)]
pub(crate) struct Tradfn {
    pub def: Definition,
    body: Vec<Node>,
}

#[derive(Debug)]
enum Node {
    Expr(Vec<Item>),
    For {
        var: String,
        source: Vec<Item>,
        body: Vec<Node>,
    },
    If {
        branches: Vec<(Vec<Item>, Vec<Node>)>,
        otherwise: Vec<Node>,
    },
    While {
        cond: Vec<Item>,
        body: Vec<Node>,
    },
    Leave,
    Continue,
    Return,
}

enum Flow {
    Normal,
    Leave,
    Continue,
    Return,
}

pub(crate) struct Frame<'p> {
    pub vars: HashMap<String, Binding>,
    alpha: Option<AplValue>,
    omega: Option<AplValue>,
    parent: Option<&'p Frame<'p>>,
    depth: usize,
}

impl<'p> Frame<'p> {
    pub fn root(vars: HashMap<String, Binding>, alpha: Option<AplValue>, omega: Option<AplValue>) -> Self {
        Self {
            vars,
            alpha,
            omega,
            parent: None,
            depth: 0,
        }
    }

    fn child<'c>(parent: &'c Frame<'c>, alpha: Option<AplValue>, omega: Option<AplValue>) -> Result<Frame<'c>, EvalError> {
        if parent.depth >= MAX_DEPTH {
            return Err(EvalError::Unsupported(format!("call depth beyond {MAX_DEPTH}")));
        }
        Ok(Frame {
            vars: HashMap::new(),
            alpha,
            omega,
            parent: Some(parent),
            depth: parent.depth + 1,
        })
    }

    fn lookup(&self, name: &str) -> Option<&Binding> {
        let mut frame = Some(self);
        while let Some(f) = frame {
            if let Some(b) = f.vars.get(name) {
                return Some(b);
            }
            frame = f.parent;
        }
        None
    }
}

fn syntax(msg: impl Into<String>) -> EvalError {
    EvalError::Syntax(msg.into())
}

#[derive(PartialEq, Eq)]
enum Class {
    Array,
    Function,
    Operator,
    Assign,
}

fn classify(item: &Item, frame: &Frame) -> Class {
    match item {
        Item::Number(_) | Item::Chars(_) | Item::Alpha | Item::Omega | Item::Zilde => Class::Array,
        Item::Name(n) => match frame.lookup(n) {
            Some(Binding::Function(_)) => Class::Function,
            _ => Class::Array,
        },
        Item::Prim(_) | Item::Dfn(_) => Class::Function,
        Item::Op(_) => Class::Operator,
        Item::Assign => Class::Assign,
        Item::Paren(inner) => {
            if is_function_phrase(inner, frame) {
                Class::Function
            } else {
                Class::Array
            }
        }
    }
}

fn is_function_phrase(items: &[Item], frame: &Frame) -> bool {
    match items.split_first() {
        Some((first, rest)) => {
            classify(first, frame) == Class::Function
                && rest.iter().all(|i| matches!(i, Item::Op(_)))
        }
        None => false,
    }
}

fn apply_operator(op: char, f: Function) -> Result<Function, EvalError> {
    match op {
        '/' => Ok(Function::Reduce(Box::new(f), Axis::Last)),
        '⌿' => Ok(Function::Reduce(Box::new(f), Axis::First)),
        '¨' => Ok(Function::Each(Box::new(f))),
        other => Err(EvalError::Unsupported(format!("operator {other}"))),
    }
}

/// Reads a function phrase starting at `i`; returns it and the next index.
fn parse_function(items: &[Item], i: usize, has_left: bool, frame: &Frame) -> Result<(Function, usize), EvalError> {
    let mut f = match &items[i] {
        Item::Prim(c) => Function::Prim(*c),
        Item::Dfn(d) => Function::Dfn(d.clone()),
        Item::Name(n) => match frame.lookup(n) {
            Some(Binding::Function(f)) => f.clone(),
            _ => return Err(syntax(format!("{n} is not a function"))),
        },
        Item::Paren(inner) if is_function_phrase(inner, frame) => parse_function(inner, 0, false, frame)?.0,
        Item::Op(c @ ('/' | '⌿')) if has_left => Function::Replicate(if *c == '/' { Axis::Last } else { Axis::First }),
        Item::Op(c) => {
            return Err(if "/⌿¨".contains(*c) {
                syntax(format!("operator {c} has no operand"))
            } else {
                EvalError::Unsupported(format!("operator {c}"))
            })
        }
        Item::Assign => return Err(syntax("misplaced ←")),
        _ => return Err(syntax("expected a function")),
    };
    let mut j = i + 1;
    while let Some(Item::Op(c)) = items.get(j) {
        f = apply_operator(*c, f)?;
        j += 1;
    }
    Ok((f, j))
}

fn modified_assignment_split(items: &[Item], frame: &Frame) -> Option<usize> {
    if !matches!(items.first(), Some(Item::Name(_))) {
        return None;
    }
    let j = items.iter().position(|i| matches!(i, Item::Assign))?;
    (j >= 2 && is_function_phrase(&items[1..j], frame)).then_some(j)
}

/// Runs one statement. Function assignments yield `None`.
pub(crate) fn exec_statement(items: &[Item], frame: &mut Frame) -> Result<Option<AplValue>, EvalError> {
    if let [Item::Name(n), Item::Assign, rest @ ..] = items {
        if is_function_phrase(rest, frame) {
            let (f, _) = parse_function(rest, 0, false, frame)?;
            frame.vars.insert(n.clone(), Binding::Function(f));
            return Ok(None);
        }
    }
    eval_items(items, frame).map(Some)
}

fn is_assignment(items: &[Item], frame: &Frame) -> bool {
    matches!(items, [Item::Name(_) | Item::Alpha, Item::Assign, ..]) || modified_assignment_split(items, frame).is_some()
}

pub(crate) fn eval_items(items: &[Item], frame: &mut Frame) -> Result<AplValue, EvalError> {
    if items.is_empty() {
        return Err(syntax("empty expression"));
    }
    if let [Item::Name(n), Item::Assign, rest @ ..] = items {
        if rest.is_empty() {
            return Err(syntax(format!("nothing to assign to {n}")));
        }
        let v = eval_items(rest, frame)?;
        frame.vars.insert(n.clone(), Binding::Value(v.clone()));
        return Ok(v);
    }
    if let Some(j) = modified_assignment_split(items, frame) {
        let Item::Name(n) = &items[0] else { unreachable!() };
        let old = match frame.lookup(n) {
            Some(Binding::Value(v)) => v.clone(),
            _ => return Err(EvalError::Value(format!("{n} is undefined"))),
        };
        let (f, _) = parse_function(&items[1..j], 0, false, frame)?;
        let rhs = eval_items(&items[j + 1..], frame)?;
        let new = apply(&f, Some(old), rhs, frame)?;
        frame.vars.insert(n.clone(), Binding::Value(new.clone()));
        return Ok(new);
    }

    let mut i = 0;
    while i < items.len() && classify(&items[i], frame) == Class::Array {
        if matches!(items.get(i + 1), Some(Item::Assign)) {
            return Err(syntax("assignment inside a strand"));
        }
        i += 1;
    }
    if i == items.len() {
        return strand(items, frame);
    }
    let (f, next) = parse_function(items, i, i > 0, frame)?;
    if next == items.len() {
        return Err(syntax("function has no right argument"));
    }
    let right = eval_items(&items[next..], frame)?;
    let left = if i > 0 { Some(strand(&items[..i], frame)?) } else { None };
    apply(&f, left, right, frame)
}

fn eval_atom(item: &Item, frame: &mut Frame) -> Result<AplValue, EvalError> {
    match item {
        Item::Number(n) => Ok(AplValue::scalar(n.clone())),
        Item::Chars(s) => {
            let mut chars = s.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Ok(AplValue::chr(c)),
                _ => Ok(AplValue::char_vector(s)),
            }
        }
        Item::Zilde => Ok(AplValue::empty_numeric()),
        Item::Alpha => frame.alpha.clone().ok_or_else(|| EvalError::Value("⍺ is undefined".into())),
        Item::Omega => frame.omega.clone().ok_or_else(|| EvalError::Value("⍵ is undefined".into())),
        Item::Name(n) => match frame.lookup(n) {
            Some(Binding::Value(v)) => Ok(v.clone()),
            Some(Binding::Function(_)) => Err(syntax(format!("{n} is a function"))),
            None => Err(EvalError::Value(format!("{n} is undefined"))),
        },
        Item::Paren(inner) => eval_items(inner, frame),
        _ => Err(syntax("expected an array")),
    }
}

fn strand(items: &[Item], frame: &mut Frame) -> Result<AplValue, EvalError> {
    if items.len() == 1 {
        return eval_atom(&items[0], frame);
    }
    let mut values = Vec::with_capacity(items.len());
    for item in items.iter().rev() {
        values.push(eval_atom(item, frame)?);
    }
    values.reverse();
    let elements = values.into_iter().map(into_item).collect::<Result<Vec<_>, _>>()?;
    AplValue::new(vec![elements.len()], elements)
}

/// A value as an item of a containing array: scalars stay, others are boxed.
fn into_item(v: AplValue) -> Result<Scalar, EvalError> {
    if v.is_scalar() {
        Ok(v.into_elements().pop().expect("scalar"))
    } else if v.is_simple() {
        Ok(Scalar::Boxed(Arc::new(v)))
    } else {
        Err(EvalError::Unsupported("nesting deeper than one level".into()))
    }
}

fn disclose(s: &Scalar) -> AplValue {
    match s {
        Scalar::Boxed(inner) => (**inner).clone(),
        s => AplValue::scalar(s.clone()),
    }
}

pub(crate) fn apply(f: &Function, left: Option<AplValue>, right: AplValue, frame: &mut Frame) -> Result<AplValue, EvalError> {
    match f {
        Function::Prim(c) => apply_primitive(*c, left.as_ref(), &right),
        Function::Dfn(d) => call_dfn(d, left, right, frame),
        Function::Tradfn(t) => call_tradfn(t, left, right, frame),
        Function::Reduce(g, axis) => {
            if left.is_some() {
                return Err(EvalError::Unsupported("n-wise reduction".into()));
            }
            reduce(g, *axis, &right, frame)
        }
        Function::Each(g) => each(g, left.as_ref(), &right, frame),
        Function::Replicate(axis) => {
            let left = left.ok_or_else(|| syntax("replicate needs a left argument"))?;
            prim::replicate(&left, &right, *axis)
        }
    }
}

fn apply_primitive(c: char, left: Option<&AplValue>, right: &AplValue) -> Result<AplValue, EvalError> {
    let unsupported = |what: &str| Err(EvalError::Unsupported(format!("{what} {c}")));
    match (c, left) {
        (c, Some(l)) if SCALAR_DYADIC.contains(c) => prim::dyadic_scalar_fn(c, l, right),
        ('+' | '-' | '×' | '÷' | '⌈' | '⌊', None) => prim::monadic_scalar_fn(c, right),
        ('⍳', None) => prim::iota(right),
        ('⍳', Some(l)) => index_of(l, right),
        ('⍴', None) => Ok(prim::shape_of(right)),
        ('⍴', Some(l)) => prim::reshape(l, right),
        ('⍉', None) => prim::transpose(right),
        ('≢', None) => Ok(prim::tally(right)),
        ('∊', None) => prim::enlist(right),
        ('∊', Some(l)) => prim::member(l, right),
        (',', None) => prim::ravel(right),
        (',', Some(l)) => prim::catenate(l, right),
        ('⊂', None) => prim::enclose(right),
        ('⊃', None) => Ok(prim::first(right)),
        ('⊃', Some(l)) => prim::pick(l, right),
        (_, None) => unsupported("monadic"),
        (_, Some(_)) => unsupported("dyadic"),
    }
}

/// Dyadic ⍳ on a vector left argument, 1-origin; misses give 1+≢left.
fn index_of(left: &AplValue, right: &AplValue) -> Result<AplValue, EvalError> {
    if left.rank() != 1 {
        return Err(EvalError::Rank {
            primitive: "⍳".into(),
            operands: super::error::Operands {
                left: Some(left.shape().to_vec()),
                right: right.shape().to_vec(),
            },
        });
    }
    let elements = right
        .elements()
        .iter()
        .map(|e| {
            let pos = left.elements().iter().position(|x| x == e).unwrap_or(left.len());
            Scalar::Int(pos as i64 + 1)
        })
        .collect();
    AplValue::new(right.shape().to_vec(), elements)
}

fn reduce(f: &Function, axis: Axis, v: &AplValue, frame: &mut Frame) -> Result<AplValue, EvalError> {
    if v.is_scalar() {
        return Ok(v.clone());
    }
    let ax = axis.index(v.rank());
    let (outer, len, inner) = prim::axis_layout(v, ax);
    let mut shape = v.shape().to_vec();
    shape.remove(ax);
    let glyph = match f {
        Function::Prim(c) => Some(*c),
        _ => None,
    };
    let mut elements = Vec::with_capacity(outer * inner);
    for o in 0..outer {
        for i in 0..inner {
            let at = |k: usize| &v.elements()[(o * len + k) * inner + i];
            if len == 0 {
                let id = glyph.and_then(prim::reduction_identity).ok_or_else(|| EvalError::Domain {
                    primitive: format!("{}{}", glyph.map(String::from).unwrap_or_default(), axis.glyph()),
                    operands: super::error::Operands {
                        left: None,
                        right: v.shape().to_vec(),
                    },
                    detail: Some("reduction of an empty axis has no identity".into()),
                })?;
                elements.push(id);
                continue;
            }
            let mut acc = at(len - 1).clone();
            for k in (0..len - 1).rev() {
                let x = at(k);
                acc = match glyph {
                    Some(c) if SCALAR_DYADIC.contains(c) && !matches!(x, Scalar::Boxed(_)) && !matches!(acc, Scalar::Boxed(_)) => {
                        prim::scalar_dyadic(c, x, &acc).map_err(|e| match e {
                            EvalError::Domain { detail, .. } => EvalError::Domain {
                                primitive: format!("{c}{}", axis.glyph()),
                                operands: super::error::Operands {
                                    left: None,
                                    right: v.shape().to_vec(),
                                },
                                detail,
                            },
                            other => other,
                        })?
                    }
                    _ => into_item(apply(f, Some(disclose(x)), disclose(&acc), frame)?)?,
                };
            }
            elements.push(acc);
        }
    }
    AplValue::with_prototype(shape, elements, v.kind())
}

fn each(f: &Function, left: Option<&AplValue>, right: &AplValue, frame: &mut Frame) -> Result<AplValue, EvalError> {
    let results: Vec<AplValue> = match left {
        None => right
            .elements()
            .iter()
            .map(|e| apply(f, None, disclose(e), frame))
            .collect::<Result<_, _>>()?,
        Some(l) => {
            let (shape_src, pairs): (&AplValue, Vec<(&Scalar, &Scalar)>) = if l.shape() == right.shape() {
                (right, l.elements().iter().zip(right.elements()).collect())
            } else if right.len() == 1 {
                let r = &right.elements()[0];
                (l, l.elements().iter().map(|x| (x, r)).collect())
            } else if l.len() == 1 {
                let x = &l.elements()[0];
                (right, right.elements().iter().map(|r| (x, r)).collect())
            } else {
                let operands = super::error::Operands {
                    left: Some(l.shape().to_vec()),
                    right: right.shape().to_vec(),
                };
                return Err(if l.rank() != right.rank() {
                    EvalError::Rank {
                        primitive: "¨".into(),
                        operands,
                    }
                } else {
                    EvalError::Length {
                        primitive: "¨".into(),
                        operands,
                    }
                });
            };
            let results = pairs
                .into_iter()
                .map(|(a, b)| apply(f, Some(disclose(a)), disclose(b), frame))
                .collect::<Result<Vec<_>, _>>()?;
            return AplValue::new(
                shape_src.shape().to_vec(),
                results.into_iter().map(into_item).collect::<Result<_, _>>()?,
            );
        }
    };
    AplValue::new(
        right.shape().to_vec(),
        results.into_iter().map(into_item).collect::<Result<_, _>>()?,
    )
}

fn call_dfn(d: &Dfn, left: Option<AplValue>, right: AplValue, frame: &mut Frame) -> Result<AplValue, EvalError> {
    let mut child = Frame::child(frame, left, Some(right))?;
    let mut last = None;
    for stmt in &d.statements {
        if let [Item::Alpha, Item::Assign, rest @ ..] = stmt.as_slice() {
            if child.alpha.is_none() {
                child.alpha = Some(eval_items(rest, &mut child)?);
            }
            continue;
        }
        if is_assignment(stmt, &child) {
            if let Some(v) = exec_statement(stmt, &mut child)? {
                last = Some(v);
            }
            continue;
        }
        return eval_items(stmt, &mut child);
    }
    last.ok_or_else(|| EvalError::Value("dfn produced no result".into()))
}

fn call_tradfn(t: &Tradfn, left: Option<AplValue>, right: AplValue, frame: &mut Frame) -> Result<AplValue, EvalError> {
    let def = &t.def;
    if left.is_some() && def.valence != Valence::Dyadic {
        return Err(syntax(format!("{} is not dyadic", def.name)));
    }
    let mut child = Frame::child(frame, None, None)?;
    if let (Some(name), Some(v)) = (&def.left, left) {
        child.vars.insert(name.clone(), Binding::Value(v));
    }
    if let Some(name) = &def.right {
        child.vars.insert(name.clone(), Binding::Value(right));
    }
    exec_block(&t.body, &mut child)?;
    let result = def
        .result
        .as_ref()
        .ok_or_else(|| EvalError::Value(format!("{} has no result", def.name)))?;
    match child.vars.get(result) {
        Some(Binding::Value(v)) => Ok(v.clone()),
        _ => Err(EvalError::Value(format!("result {result} of {} was not set", def.name))),
    }
}

fn condition(items: &[Item], frame: &mut Frame) -> Result<bool, EvalError> {
    let v = eval_items(items, frame)?;
    if v.len() == 1 {
        if let Some(b) = v.elements()[0].as_bool() {
            return Ok(b);
        }
    }
    Err(EvalError::Domain {
        primitive: ":If".into(),
        operands: super::error::Operands {
            left: None,
            right: v.shape().to_vec(),
        },
        detail: Some("condition must be a single boolean".into()),
    })
}

fn exec_block(nodes: &[Node], frame: &mut Frame) -> Result<Flow, EvalError> {
    for node in nodes {
        let flow = match node {
            Node::Expr(items) => {
                exec_statement(items, frame)?;
                Flow::Normal
            }
            Node::For { var, source, body } => {
                let src = eval_items(source, frame)?;
                let mut flow = Flow::Normal;
                for e in src.elements() {
                    frame.vars.insert(var.clone(), Binding::Value(disclose(e)));
                    match exec_block(body, frame)? {
                        Flow::Leave => break,
                        Flow::Return => {
                            flow = Flow::Return;
                            break;
                        }
                        Flow::Normal | Flow::Continue => {}
                    }
                }
                flow
            }
            Node::While { cond, body } => {
                let mut flow = Flow::Normal;
                while condition(cond, frame)? {
                    match exec_block(body, frame)? {
                        Flow::Leave => break,
                        Flow::Return => {
                            flow = Flow::Return;
                            break;
                        }
                        Flow::Normal | Flow::Continue => {}
                    }
                }
                flow
            }
            Node::If { branches, otherwise } => {
                let mut taken = None;
                for (cond, body) in branches {
                    if condition(cond, frame)? {
                        taken = Some(body);
                        break;
                    }
                }
                exec_block(taken.unwrap_or(otherwise), frame)?
            }
            Node::Leave => Flow::Leave,
            Node::Continue => Flow::Continue,
            Node::Return => Flow::Return,
        };
        if !matches!(flow, Flow::Normal) {
            return Ok(flow);
        }
    }
    Ok(Flow::Normal)
}

fn control_word(word: &str) -> String {
    word.to_ascii_lowercase()
}

/// Builds nodes until one of `until` (lowercase control words) is met.
fn build_block(stmts: &[Stmt], pos: &mut usize, until: &[&str]) -> Result<(Vec<Node>, Option<String>), EvalError> {
    let mut nodes = Vec::new();
    while *pos < stmts.len() {
        let stmt = &stmts[*pos];
        *pos += 1;
        let parts = match stmt {
            Stmt::Expr(items) => {
                nodes.push(Node::Expr(items.clone()));
                continue;
            }
            Stmt::Control(parts) => parts,
        };
        let word = control_word(&parts[0].0);
        if until.contains(&word.as_str()) {
            *pos -= 1;
            return Ok((nodes, Some(word)));
        }
        let no_tail = |parts: &[(String, Vec<Item>)]| -> Result<(), EvalError> {
            if parts.len() != 1 || !parts[0].1.is_empty() {
                return Err(syntax(format!("unexpected text after {}", parts[0].0)));
            }
            Ok(())
        };
        match word.as_str() {
            ":for" => {
                let [(_, var), (in_word, source)] = parts.as_slice() else {
                    return Err(syntax(":For needs the form :For name :In expression"));
                };
                let [Item::Name(var)] = var.as_slice() else {
                    return Err(EvalError::Unsupported(":For with multiple control variables".into()));
                };
                if control_word(in_word) != ":in" {
                    return Err(EvalError::Unsupported(format!("{in_word} in :For")));
                }
                let (body, end) = build_block(stmts, pos, &[":endfor", ":end"])?;
                close(end, ":For")?;
                *pos += 1;
                nodes.push(Node::For {
                    var: var.clone(),
                    source: source.clone(),
                    body,
                });
            }
            ":if" => {
                let mut branches = Vec::new();
                let mut cond = single_part(parts)?;
                let mut otherwise = Vec::new();
                loop {
                    let (body, end) = build_block(stmts, pos, &[":elseif", ":else", ":endif", ":end"])?;
                    branches.push((cond, body));
                    let end = close(end, ":If")?;
                    let Stmt::Control(end_parts) = &stmts[*pos] else { unreachable!() };
                    *pos += 1;
                    match end.as_str() {
                        ":elseif" => cond = single_part(end_parts)?,
                        ":else" => {
                            no_tail(end_parts)?;
                            let (body, end) = build_block(stmts, pos, &[":endif", ":end"])?;
                            close(end, ":If")?;
                            *pos += 1;
                            otherwise = body;
                            break;
                        }
                        _ => break,
                    }
                }
                nodes.push(Node::If { branches, otherwise });
            }
            ":while" => {
                let cond = single_part(parts)?;
                let (body, end) = build_block(stmts, pos, &[":endwhile", ":end"])?;
                close(end, ":While")?;
                *pos += 1;
                nodes.push(Node::While { cond, body });
            }
            ":leave" => {
                no_tail(parts)?;
                nodes.push(Node::Leave);
            }
            ":continue" => {
                no_tail(parts)?;
                nodes.push(Node::Continue);
            }
            ":return" => {
                no_tail(parts)?;
                nodes.push(Node::Return);
            }
            ":endfor" | ":endif" | ":endwhile" | ":end" | ":else" | ":elseif" | ":in" => {
                return Err(syntax(format!("unmatched {}", parts[0].0)));
            }
            _ => return Err(EvalError::Unsupported(format!("control word {}", parts[0].0))),
        }
    }
    Ok((nodes, None))
}

fn single_part(parts: &[(String, Vec<Item>)]) -> Result<Vec<Item>, EvalError> {
    match parts {
        [(_, cond)] if !cond.is_empty() => Ok(cond.clone()),
        _ => Err(syntax(format!("{} needs one condition expression", parts[0].0))),
    }
}

fn close(end: Option<String>, opener: &str) -> Result<String, EvalError> {
    end.ok_or_else(|| syntax(format!("{opener} is not closed")))
}

/// Parses a tradfn: a definition line followed by body lines.
pub(crate) fn parse_tradfn(source: &str) -> Result<Tradfn, EvalError> {
    let mut lines = source.lines().filter(|l| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('⍝') && t != "∇"
    });
    let header = lines.next().ok_or_else(|| syntax("empty function definition"))?;
    let def = parse_definition_line(header).map_err(|e| syntax(format!("function header: {e}")))?;
    if def.kind != DefinitionKind::Tradfn {
        return Err(syntax("expected a tradfn header line"));
    }
    let body_text: Vec<&str> = lines.map(|l| l.trim_end().trim_end_matches('∇')).collect();
    let stmts = parse_program(&body_text.join("\n"))?;
    let mut pos = 0;
    let (body, end) = build_block(&stmts, &mut pos, &[])?;
    debug_assert!(end.is_none());
    Ok(Tradfn { def, body })
}
