//! APL type headers and definition lines, and their C# signatures.
//!
//! A type header is a comment of the form
//!
//! ```text
//! ⍝ [⍺ : TYPE] ⍵ : TYPE → TYPE        TYPE = BASE | BASE[] | BASE[,]
//! ```
//!
//! The left-argument part is optional; its absence makes the function
//! monadic. Niladic functions and multiple results have no header form.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexer::{self, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HeaderError {
    #[error("column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error("column {column}: unsupported type {name:?}")]
    UnsupportedType { column: usize, name: String },
    #[error("column {column}: rank {rank} exceeds the supported maximum of 2")]
    UnsupportedRank { column: usize, rank: usize },
    #[error("niladic function {0:?} has no signature form")]
    Niladic(String),
    #[error("{name:?}: definition is {definition} but the type header is {header}")]
    ValenceMismatch {
        name: String,
        definition: Valence,
        header: Valence,
    },
    #[error("{0:?} is not a legal identifier in both APL and C#")]
    IllegalName(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BaseKind {
    Int,
    Bool,
    Char,
    Double,
    String,
}

impl BaseKind {
    pub const ALL: [BaseKind; 5] = [
        BaseKind::Int,
        BaseKind::Bool,
        BaseKind::Char,
        BaseKind::Double,
        BaseKind::String,
    ];

    pub fn apl_name(self) -> &'static str {
        match self {
            BaseKind::Int => "INT",
            BaseKind::Bool => "BOOL",
            BaseKind::Char => "CHAR",
            BaseKind::Double => "DOUBLE",
            BaseKind::String => "STRING",
        }
    }

    pub fn csharp_name(self) -> &'static str {
        match self {
            BaseKind::Int => "int",
            BaseKind::Bool => "bool",
            BaseKind::Char => "char",
            BaseKind::Double => "double",
            BaseKind::String => "string",
        }
    }

    pub fn from_csharp(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.csharp_name() == name)
    }
}

/// Maps header type names to base kinds. Names not registered are rejected.
#[derive(Debug, Clone)]
pub struct TypeRegistry {
    names: HashMap<String, BaseKind>,
}

impl Default for TypeRegistry {
    fn default() -> Self {
        Self {
            names: BaseKind::ALL
                .into_iter()
                .map(|k| (k.apl_name().to_string(), k))
                .collect(),
        }
    }
}

impl TypeRegistry {
    pub fn register(&mut self, name: impl Into<String>, kind: BaseKind) {
        self.names.insert(name.into(), kind);
    }

    pub fn lookup(&self, name: &str) -> Option<BaseKind> {
        self.names.get(name).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Rank {
    Scalar,
    Vector,
    Matrix,
}

impl Rank {
    pub const ALL: [Rank; 3] = [Rank::Scalar, Rank::Vector, Rank::Matrix];

    pub fn as_usize(self) -> usize {
        self as usize
    }

    pub fn from_usize(rank: usize) -> Option<Self> {
        Self::ALL.get(rank).copied()
    }

    /// Ranks `0..=self`.
    pub fn up_to(self) -> impl Iterator<Item = Rank> {
        Self::ALL.into_iter().take(self.as_usize() + 1)
    }

    fn csharp_suffix(self) -> &'static str {
        match self {
            Rank::Scalar => "",
            Rank::Vector => "[]",
            Rank::Matrix => "[,]",
        }
    }
}

impl From<Rank> for u8 {
    fn from(r: Rank) -> u8 {
        r as u8
    }
}

impl TryFrom<u8> for Rank {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        Rank::from_usize(v as usize).ok_or_else(|| format!("rank {v} exceeds 2"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArgType {
    pub base: BaseKind,
    pub rank: Rank,
}

impl ArgType {
    pub fn new(base: BaseKind, rank: Rank) -> Self {
        Self { base, rank }
    }

    pub fn csharp(&self) -> String {
        format!("{}{}", self.base.csharp_name(), self.rank.csharp_suffix())
    }
}

impl fmt::Display for ArgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let suffix = match self.rank {
            Rank::Scalar => "",
            Rank::Vector => "[]",
            Rank::Matrix => "[,]",
        };
        write!(f, "{}{}", self.base.apl_name(), suffix)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Valence {
    Niladic,
    Monadic,
    Dyadic,
}

impl fmt::Display for Valence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Valence::Niladic => "niladic",
            Valence::Monadic => "monadic",
            Valence::Dyadic => "dyadic",
        })
    }
}

/// The typed part of a header comment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HeaderTypes {
    pub left: Option<ArgType>,
    pub right: ArgType,
    pub result: ArgType,
}

impl HeaderTypes {
    pub fn valence(&self) -> Valence {
        if self.left.is_some() {
            Valence::Dyadic
        } else {
            Valence::Monadic
        }
    }
}

pub const DEFAULT_LEFT_NAME: &str = "y";
pub const DEFAULT_RIGHT_NAME: &str = "x";
pub const DEFAULT_RESULT_NAME: &str = "r";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FunctionHeader {
    pub name: String,
    pub valence: Valence,
    pub left: Option<ArgType>,
    pub right: ArgType,
    pub result: ArgType,
    pub left_name: String,
    pub right_name: String,
    pub result_name: String,
}

impl FunctionHeader {
    /// Builds a header with the default argument names.
    pub fn new(name: &str, types: HeaderTypes) -> Result<Self, HeaderError> {
        if !is_shared_identifier(name) {
            return Err(HeaderError::IllegalName(name.to_string()));
        }
        Ok(Self {
            name: name.to_string(),
            valence: types.valence(),
            left: types.left,
            right: types.right,
            result: types.result,
            left_name: DEFAULT_LEFT_NAME.into(),
            right_name: DEFAULT_RIGHT_NAME.into(),
            result_name: DEFAULT_RESULT_NAME.into(),
        })
    }

    /// Combines a definition line with a type header, taking argument names
    /// from the definition where it has them.
    pub fn from_parts(def: &Definition, types: HeaderTypes) -> Result<Self, HeaderError> {
        if def.valence == Valence::Niladic {
            return Err(HeaderError::Niladic(def.name.clone()));
        }
        if def.valence != types.valence() {
            return Err(HeaderError::ValenceMismatch {
                name: def.name.clone(),
                definition: def.valence,
                header: types.valence(),
            });
        }
        let mut h = Self::new(&def.name, types)?;
        for (slot, name) in [
            (&mut h.left_name, &def.left),
            (&mut h.right_name, &def.right),
            (&mut h.result_name, &def.result),
        ] {
            if let Some(n) = name {
                if !is_shared_identifier(n) {
                    return Err(HeaderError::IllegalName(n.clone()));
                }
                *slot = n.clone();
            }
        }
        Ok(h)
    }

    pub fn types(&self) -> HeaderTypes {
        HeaderTypes {
            left: self.left,
            right: self.right,
            result: self.result,
        }
    }

    /// Parameter types in C# declaration order (left first).
    pub fn params(&self) -> Vec<(ArgType, &str)> {
        let mut ps = Vec::with_capacity(2);
        if let Some(l) = self.left {
            ps.push((l, self.left_name.as_str()));
        }
        ps.push((self.right, self.right_name.as_str()));
        ps
    }

    pub fn class_name(&self) -> String {
        format!("{}Util", self.name)
    }
}

/// Legal as an APL name and as a C# identifier.
pub fn is_shared_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

struct HeaderCursor<'a> {
    chars: Vec<char>,
    pos: usize,
    registry: &'a TypeRegistry,
}

impl HeaderCursor<'_> {
    fn column(&self) -> usize {
        self.pos + 1
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn syntax(&self, message: impl Into<String>) -> HeaderError {
        HeaderError::Syntax {
            column: self.column(),
            message: message.into(),
        }
    }

    fn expect(&mut self, want: char) -> Result<(), HeaderError> {
        match self.peek() {
            Some(c) if c == want => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => Err(self.syntax(format!("expected {want:?}, found {c:?}"))),
            None => Err(self.syntax(format!("expected {want:?}, found end of line"))),
        }
    }

    fn arg_type(&mut self) -> Result<ArgType, HeaderError> {
        self.skip_ws();
        let start = self.column();
        let mut name = String::new();
        while let Some(&c) = self.chars.get(self.pos) {
            if !(c.is_alphanumeric() || c == '_') {
                break;
            }
            name.push(c);
            self.pos += 1;
        }
        if name.is_empty() {
            return Err(self.syntax("expected a type name"));
        }
        let base = self
            .registry
            .lookup(&name)
            .ok_or_else(|| HeaderError::UnsupportedType {
                column: start,
                name: name.clone(),
            })?;
        let mut rank = 0;
        if self.chars.get(self.pos) == Some(&'[') {
            let open = self.column();
            self.pos += 1;
            rank = 1;
            loop {
                match self.chars.get(self.pos) {
                    Some(',') => rank += 1,
                    Some(']') => break,
                    Some(c) if c.is_whitespace() => {}
                    Some(c) => return Err(self.syntax(format!("unexpected {c:?} in rank suffix"))),
                    None => {
                        return Err(HeaderError::Syntax {
                            column: open,
                            message: "unclosed '['".into(),
                        })
                    }
                }
                self.pos += 1;
            }
            self.pos += 1;
            if rank > 2 {
                return Err(HeaderError::UnsupportedRank { column: open, rank });
            }
        }
        Ok(ArgType::new(base, Rank::from_usize(rank).expect("rank checked")))
    }

    fn annotation(&mut self, symbol: char) -> Result<ArgType, HeaderError> {
        self.expect(symbol)?;
        self.expect(':')?;
        self.arg_type()
    }
}

/// Parses a `⍝ [⍺ : T] ⍵ : T → T` comment line.
pub fn parse_header(line: &str) -> Result<HeaderTypes, HeaderError> {
    parse_header_with(line, &TypeRegistry::default())
}

pub fn parse_header_with(line: &str, registry: &TypeRegistry) -> Result<HeaderTypes, HeaderError> {
    let mut cur = HeaderCursor {
        chars: line.chars().collect(),
        pos: 0,
        registry,
    };
    cur.expect('⍝')?;
    let left = if cur.peek() == Some('⍺') {
        Some(cur.annotation('⍺')?)
    } else {
        None
    };
    let right = cur.annotation('⍵')?;
    cur.expect('→')?;
    let result = cur.arg_type()?;
    if let Some(c) = cur.peek() {
        return Err(cur.syntax(format!("unexpected {c:?} after result type")));
    }
    Ok(HeaderTypes {
        left,
        right,
        result,
    })
}

/// True for comment lines that look like type headers (contain `⍵ :` and `→`).
pub fn looks_like_header(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with('⍝') && t.contains('⍵') && t.contains('→') && t.contains(':')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefinitionKind {
    Tradfn,
    Dfn,
}

/// What a tradfn header line or dfn assignment says about a function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Definition {
    pub name: String,
    pub kind: DefinitionKind,
    pub valence: Valence,
    pub left: Option<String>,
    pub right: Option<String>,
    pub result: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub locals: Vec<String>,
}

fn definition_error(message: impl Into<String>) -> HeaderError {
    HeaderError::Syntax {
        column: 1,
        message: message.into(),
    }
}

/// Parses `r ← y Name x`, `r←Name x`, `Name x`, or `Name ← { … }`.
pub fn parse_definition_line(line: &str) -> Result<Definition, HeaderError> {
    let trimmed = line.trim().trim_start_matches('∇').trim_end_matches('∇').trim();
    if trimmed.is_empty() {
        return Err(definition_error("empty definition line"));
    }
    if let Some((lhs, rhs)) = trimmed.split_once('←') {
        if rhs.trim_start().starts_with('{') {
            let name = lhs.trim();
            if !is_apl_name(name) {
                return Err(definition_error(format!("missing or invalid function name {name:?}")));
            }
            let valence = if rhs.contains('⍺') {
                Valence::Dyadic
            } else {
                Valence::Monadic
            };
            return Ok(Definition {
                name: name.to_string(),
                kind: DefinitionKind::Dfn,
                valence,
                left: None,
                right: None,
                result: None,
                locals: Vec::new(),
            });
        }
    }

    let (signature, locals) = match trimmed.split_once(';') {
        Some((sig, rest)) => (
            sig,
            rest.split(';').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
        ),
        None => (trimmed, Vec::new()),
    };
    let (result, call) = match signature.split_once('←') {
        Some((r, call)) => {
            let r = r.trim();
            if !is_apl_name(r) {
                return Err(definition_error(format!("unsupported result form {r:?}")));
            }
            (Some(r.to_string()), call)
        }
        None => (None, signature),
    };
    let stream = lexer::lex(call);
    let mut names = Vec::new();
    for t in stream.code_tokens() {
        match t.kind {
            TokenKind::Identifier => names.push(t.lexeme.clone()),
            // optional-left-argument braces: {y} f x
            TokenKind::Glyph if t.is_glyph('{') || t.is_glyph('}') => {}
            _ => {
                return Err(HeaderError::Syntax {
                    column: t.span.column,
                    message: format!("unexpected {:?} in definition line", t.lexeme),
                })
            }
        }
    }
    let (left, name, right, valence) = match names.as_slice() {
        [] => return Err(definition_error("missing function name")),
        [n] => (None, n.clone(), None, Valence::Niladic),
        [n, r] => (None, n.clone(), Some(r.clone()), Valence::Monadic),
        [l, n, r] => (Some(l.clone()), n.clone(), Some(r.clone()), Valence::Dyadic),
        _ => return Err(definition_error("ambiguous definition line: too many names")),
    };
    Ok(Definition {
        name,
        kind: DefinitionKind::Tradfn,
        valence,
        left,
        right,
        result,
        locals,
    })
}

fn is_apl_name(s: &str) -> bool {
    let stream = lexer::lex(s);
    matches!(stream.tokens.as_slice(), [t] if t.kind == TokenKind::Identifier && !t.lexeme.starts_with('⎕'))
}

/// Rendering options for C# signatures.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SignatureStyle {
    pub is_static: bool,
}

/// `public bool xMsInt(int y, int[] x)`.
pub fn render_csharp_signature(header: &FunctionHeader) -> String {
    render_csharp_signature_with(header, SignatureStyle::default())
}

pub fn render_csharp_signature_with(header: &FunctionHeader, style: SignatureStyle) -> String {
    let params: Vec<String> = header
        .params()
        .into_iter()
        .map(|(t, n)| format!("{} {}", t.csharp(), n))
        .collect();
    format!(
        "public {}{} {}({})",
        if style.is_static { "static " } else { "" },
        header.result.csharp(),
        header.name,
        params.join(", ")
    )
}

/// A method signature recognised from C# text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsSignature {
    pub is_static: bool,
    pub result: ArgType,
    pub name: String,
    pub params: Vec<(ArgType, String)>,
}

fn parse_cs_type(text: &str) -> Option<ArgType> {
    let text: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let (base, rank) = if let Some(b) = text.strip_suffix("[,]") {
        (b, Rank::Matrix)
    } else if let Some(b) = text.strip_suffix("[]") {
        (b, Rank::Vector)
    } else {
        (text.as_str(), Rank::Scalar)
    };
    BaseKind::from_csharp(base).map(|b| ArgType::new(b, rank))
}

/// Recognises `public [static] T Name(T a, T b)` for the supported types.
pub fn parse_csharp_signature(text: &str) -> Option<CsSignature> {
    let text = text.trim().trim_end_matches(';').trim();
    let open = text.find('(')?;
    let close = text.rfind(')')?;
    if close < open || !text[close + 1..].trim().is_empty() {
        return None;
    }
    let mut head: Vec<&str> = text[..open].split_whitespace().collect();
    let name = head.pop()?.to_string();
    let result = parse_cs_type(head.pop()?)?;
    let mut is_static = false;
    for m in head {
        match m {
            "public" => {}
            "static" => is_static = true,
            _ => return None,
        }
    }
    let inner = text[open + 1..close].trim();
    let mut params = Vec::new();
    if !inner.is_empty() {
        // `T[,] name` contains a comma inside brackets, so split manually.
        let mut depth = 0;
        let mut start = 0;
        let bytes: Vec<char> = inner.chars().collect();
        let mut pieces = Vec::new();
        for (i, c) in bytes.iter().enumerate() {
            match c {
                '[' => depth += 1,
                ']' => depth -= 1,
                ',' if depth == 0 => {
                    pieces.push(bytes[start..i].iter().collect::<String>());
                    start = i + 1;
                }
                _ => {}
            }
        }
        pieces.push(bytes[start..].iter().collect::<String>());
        for piece in pieces {
            let piece = piece.trim();
            let split = piece.rfind(char::is_whitespace)?;
            let ty = parse_cs_type(&piece[..split])?;
            params.push((ty, piece[split..].trim().to_string()));
        }
    }
    Some(CsSignature {
        is_static,
        result,
        name,
        params,
    })
}

/// How an overload's result type follows from its argument types.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultRule {
    /// Result has this base kind and the left argument's rank.
    FollowLeft(BaseKind),
    /// Result has this base kind and the right argument's rank.
    FollowRight(BaseKind),
    /// Result has this base kind and the larger of the two ranks.
    MaxRank(BaseKind),
    Fixed(ArgType),
}

impl ResultRule {
    fn apply(self, left: Rank, right: Rank) -> ArgType {
        match self {
            ResultRule::FollowLeft(b) => ArgType::new(b, left),
            ResultRule::FollowRight(b) => ArgType::new(b, right),
            ResultRule::MaxRank(b) => ArgType::new(b, left.max(right)),
            ResultRule::Fixed(t) => t,
        }
    }
}

/// A rank-bounded family of dyadic overloads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverloadSpec {
    pub name: String,
    pub left: BaseKind,
    pub right: BaseKind,
    pub result: ResultRule,
    pub max_rank: Rank,
    /// (left, right) rank pairs left out of the family.
    pub omit: Vec<(Rank, Rank)>,
}

impl OverloadSpec {
    pub fn new(name: &str, left: BaseKind, right: BaseKind, result: ResultRule, max_rank: Rank) -> Self {
        Self {
            name: name.to_string(),
            left,
            right,
            result,
            max_rank,
            omit: Vec::new(),
        }
    }

    /// Membership (`y ∊ x`): boolean result shaped like the left argument.
    /// The scalar/scalar pair is left out whenever other pairs exist, which
    /// is the published eight-overload set for rank ≤ 2.
    pub fn membership(name: &str, base: BaseKind, max_rank: Rank) -> Self {
        let mut spec = Self::new(name, base, base, ResultRule::FollowLeft(BaseKind::Bool), max_rank);
        if max_rank > Rank::Scalar {
            spec.omit.push((Rank::Scalar, Rank::Scalar));
        }
        spec
    }
}

/// One header per (left rank, right rank) pair, ordered by left then right rank.
pub fn expand_overloads(spec: &OverloadSpec) -> Vec<FunctionHeader> {
    let mut out = Vec::new();
    for l in spec.max_rank.up_to() {
        for r in spec.max_rank.up_to() {
            if spec.omit.contains(&(l, r)) {
                continue;
            }
            out.push(FunctionHeader {
                name: spec.name.clone(),
                valence: Valence::Dyadic,
                left: Some(ArgType::new(spec.left, l)),
                right: ArgType::new(spec.right, r),
                result: spec.result.apply(l, r),
                left_name: DEFAULT_LEFT_NAME.into(),
                right_name: DEFAULT_RIGHT_NAME.into(),
                result_name: DEFAULT_RESULT_NAME.into(),
            });
        }
    }
    out
}

fn pattern_var(name: &str, rank: Rank) -> String {
    let suffix = match rank {
        Rank::Scalar => "s",
        Rank::Vector => "a",
        Rank::Matrix => "m",
    };
    format!("{name}{suffix}")
}

/// Single `object`-typed method that switches on runtime argument types,
/// the alternative to emitting one overload per rank pair.
pub fn render_dispatch_method(spec: &OverloadSpec) -> String {
    let mut out = format!(
        "public static object {}(object {}, object {})\n{{\n    switch ({}, {})\n    {{\n",
        spec.name, DEFAULT_LEFT_NAME, DEFAULT_RIGHT_NAME, DEFAULT_LEFT_NAME, DEFAULT_RIGHT_NAME
    );
    for h in expand_overloads(spec) {
        let left = h.left.expect("overloads are dyadic");
        out.push_str(&format!(
            "        case ({} {}, {} {}): throw new NotImplementedException(); // returns {}\n",
            left.csharp(),
            pattern_var(DEFAULT_LEFT_NAME, left.rank),
            h.right.csharp(),
            pattern_var(DEFAULT_RIGHT_NAME, h.right.rank),
            h.result.csharp()
        ));
    }
    out.push_str("        default: throw new ArgumentException(\"unsupported argument types\");\n");
    out.push_str("    }\n}\n");
    out
}

/// A `<Name>Util` class of static method stubs for the given headers.
pub fn render_util_class(headers: &[FunctionHeader]) -> Option<String> {
    let first = headers.first()?;
    let mut out = format!("public class {}\n{{\n", first.class_name());
    for h in headers {
        out.push_str("    ");
        out.push_str(&render_csharp_signature_with(h, SignatureStyle { is_static: true }));
        out.push_str("\n    {\n        throw new NotImplementedException();\n    }\n");
    }
    out.push_str("}\n");
    Some(out)
}

/// A function located in an APL source file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoundFunction {
    /// 1-based line of the definition.
    pub line: usize,
    pub definition: Definition,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub types: Option<HeaderTypes>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub header: Option<FunctionHeader>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

fn is_dfn_assignment(line: &str) -> bool {
    line.split_once('←')
        .is_some_and(|(l, r)| is_apl_name(l.trim()) && r.trim_start().starts_with('{'))
}

/// Finds tradfn and dfn definitions and their type headers.
///
/// Tradfns start at a `∇` line or at the first code line of the file; dfns
/// start at `Name ← {`. A type header is the
/// nearest header-shaped comment in the comment block directly above or
/// directly below the definition line.
pub fn find_functions(source: &str) -> Vec<FoundFunction> {
    let lines: Vec<&str> = source.lines().collect();
    let is_comment = |l: &str| l.trim_start().starts_with('⍝');
    let mut starts = Vec::new();
    for (i, l) in lines.iter().enumerate() {
        let t = l.trim();
        if (t.starts_with('∇') && !t.trim_start_matches('∇').trim().is_empty()) || is_dfn_assignment(t) {
            starts.push(i);
        }
    }
    if let Some(i) = lines.iter().position(|l| !l.trim().is_empty() && !is_comment(l)) {
        if !starts.contains(&i) && parse_definition_line(lines[i]).is_ok() {
            starts.insert(0, i);
        }
    }
    let mut found = Vec::new();
    for i in starts {
        let mut diagnostics = Vec::new();
        let definition = match parse_definition_line(lines[i]) {
            Ok(d) => d,
            Err(e) => {
                log::debug!("line {}: {e}", i + 1);
                continue;
            }
        };
        let below = lines[i + 1..].iter().take_while(|l| is_comment(l));
        let above = lines[..i].iter().rev().take_while(|l| is_comment(l));
        let header_line = below.chain(above).find(|l| looks_like_header(l));
        let mut types = None;
        let mut header = None;
        match header_line.map(|l| parse_header(l.trim())) {
            Some(Ok(t)) => {
                types = Some(t);
                match FunctionHeader::from_parts(&definition, t) {
                    Ok(h) => header = Some(h),
                    Err(e) => diagnostics.push(e.to_string()),
                }
            }
            Some(Err(e)) => diagnostics.push(format!("type header: {e}")),
            None if definition.valence == Valence::Niladic => {
                diagnostics.push(HeaderError::Niladic(definition.name.clone()).to_string())
            }
            None => diagnostics.push("no type header".into()),
        }
        found.push(FoundFunction {
            line: i + 1,
            definition,
            types,
            header,
            diagnostics,
        });
    }
    found
}
