//! Glyph-aware lexing of APL source and tokenizer-efficiency analysis.
//!
//! Lexing is total: every input produces a token stream, and the stream
//! reconstructs the source exactly (`TokenStream::reconstruct`). Problems
//! such as unknown codepoints or malformed numbers become diagnostics on
//! the affected token instead of errors.

mod glyphs;
mod tokenizer;

pub use glyphs::{GlyphClass, GlyphInventory};
pub use tokenizer::{
    round_trip_check, tokenizer_metrics, tokenizer_metrics_with, IdentityTokenizer, Tokenizer,
    TokenizerError, TokenizerReport, VocabTokenizer,
};

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenKind {
    Glyph,
    NumberLiteral,
    CharacterLiteral,
    Identifier,
    ControlWord,
    Comment,
    Separator,
}

/// Position of a token; line and column are 1-based and count codepoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Span {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub span: Span,
    /// Whitespace between the previous token (or start of input) and this one.
    #[serde(skip_serializing_if = "String::is_empty")]
    pub leading: String,
    /// Set for glyph tokens whose codepoint is not in the inventory.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub unknown: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl Token {
    pub fn is_glyph(&self, c: char) -> bool {
        self.kind == TokenKind::Glyph && self.lexeme.chars().eq(std::iter::once(c))
    }

    pub fn first_char(&self) -> Option<char> {
        self.lexeme.chars().next()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TokenStream {
    pub tokens: Vec<Token>,
    /// Whitespace after the last token.
    pub trailing: String,
}

impl TokenStream {
    /// Rebuilds the exact source text.
    pub fn reconstruct(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(&t.leading);
            out.push_str(&t.lexeme);
        }
        out.push_str(&self.trailing);
        out
    }

    pub fn diagnostics(&self) -> impl Iterator<Item = (&Span, &str)> {
        self.tokens
            .iter()
            .filter_map(|t| t.diagnostic.as_deref().map(|d| (&t.span, d)))
    }

    /// Tokens other than comments.
    pub fn code_tokens(&self) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(|t| t.kind != TokenKind::Comment)
    }
}

fn is_name_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '∆' || c == '⍙'
}

fn is_name_continue(c: char) -> bool {
    is_name_start(c) || c.is_ascii_digit() || c == '¯'
}

fn is_trivia(c: char) -> bool {
    c != '\n' && c.is_whitespace()
}

struct Cursor<'a> {
    chars: &'a [char],
    pos: usize,
    line: usize,
    column: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> char {
        let c = self.chars[self.pos];
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        c
    }

    fn take_while(&mut self, mut pred: impl FnMut(char) -> bool) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if !pred(c) {
                break;
            }
            s.push(self.bump());
        }
        s
    }
}

/// Lexes APL source into a lossless token stream.
pub fn lex(source: &str) -> TokenStream {
    lex_with(source, &GlyphInventory::standard())
}

pub fn lex_with(source: &str, inventory: &GlyphInventory) -> TokenStream {
    let chars: Vec<char> = source.chars().collect();
    let mut cur = Cursor {
        chars: &chars,
        pos: 0,
        line: 1,
        column: 1,
    };
    let mut tokens = Vec::new();
    loop {
        let leading = cur.take_while(is_trivia);
        let Some(c) = cur.peek() else {
            return TokenStream {
                tokens,
                trailing: leading,
            };
        };
        let (line, column) = (cur.line, cur.column);
        let mut diagnostic = None;
        let mut unknown = false;
        let (kind, lexeme) = if c == '\n' || c == '⋄' {
            cur.bump();
            (TokenKind::Separator, c.to_string())
        } else if c == '⍝' {
            (TokenKind::Comment, cur.take_while(|c| c != '\n'))
        } else if c == '\'' {
            let (text, diag) = lex_string(&mut cur);
            diagnostic = diag;
            (TokenKind::CharacterLiteral, text)
        } else if starts_number(&cur) {
            let (text, diag) = lex_number(&mut cur);
            diagnostic = diag;
            (TokenKind::NumberLiteral, text)
        } else if c == ':' && cur.peek_at(1).is_some_and(|n| n.is_alphabetic()) {
            let mut s = String::from(cur.bump());
            s.push_str(&cur.take_while(|c| c.is_alphanumeric()));
            (TokenKind::ControlWord, s)
        } else if c == '⎕' && cur.peek_at(1).is_some_and(|n| n.is_alphabetic()) {
            let mut s = String::from(cur.bump());
            s.push_str(&cur.take_while(|c| c.is_alphanumeric()));
            (TokenKind::Identifier, s)
        } else if is_name_start(c) {
            (TokenKind::Identifier, cur.take_while(is_name_continue))
        } else {
            cur.bump();
            if !inventory.contains(c) {
                unknown = true;
                diagnostic = Some(format!("unknown codepoint U+{:04X}", c as u32));
            }
            (TokenKind::Glyph, c.to_string())
        };
        let length = lexeme.chars().count();
        tokens.push(Token {
            kind,
            lexeme,
            span: Span {
                line,
                column,
                length,
            },
            leading,
            unknown,
            diagnostic,
        });
    }
}

fn starts_number(cur: &Cursor) -> bool {
    match cur.peek() {
        Some(c) if c.is_ascii_digit() => true,
        Some('¯') => true,
        Some('.') => cur.peek_at(1).is_some_and(|c| c.is_ascii_digit()),
        _ => false,
    }
}

fn lex_number(cur: &mut Cursor) -> (String, Option<String>) {
    let mut text = String::new();
    if cur.peek() == Some('¯') {
        text.push(cur.bump());
    }
    text.push_str(&cur.take_while(|c| c.is_ascii_digit() || c == '.'));
    let has_exponent = matches!(cur.peek(), Some('e' | 'E'))
        && (cur.peek_at(1).is_some_and(|c| c.is_ascii_digit())
            || (cur.peek_at(1) == Some('¯') && cur.peek_at(2).is_some_and(|c| c.is_ascii_digit())));
    if has_exponent {
        text.push(cur.bump());
        if cur.peek() == Some('¯') {
            text.push(cur.bump());
        }
        text.push_str(&cur.take_while(|c| c.is_ascii_digit()));
    }
    let diag = if parse_number(&text).is_none() {
        Some(format!("malformed numeric literal {text:?}"))
    } else {
        None
    };
    (text, diag)
}

fn lex_string(cur: &mut Cursor) -> (String, Option<String>) {
    let mut text = String::from(cur.bump());
    loop {
        match cur.peek() {
            None | Some('\n') => return (text, Some("unterminated character literal".into())),
            Some('\'') => {
                text.push(cur.bump());
                if cur.peek() == Some('\'') {
                    text.push(cur.bump());
                } else {
                    return (text, None);
                }
            }
            Some(_) => text.push(cur.bump()),
        }
    }
}

/// Numeric value of an APL number literal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NumberValue {
    Int(i64),
    Real(f64),
}

/// Parses an APL numeric literal (`¯` is the negative sign).
pub fn parse_number(text: &str) -> Option<NumberValue> {
    let ascii = text.replace('¯', "-");
    let (mantissa, exponent) = match ascii.find(['e', 'E']) {
        Some(i) => (&ascii[..i], Some(&ascii[i + 1..])),
        None => (ascii.as_str(), None),
    };
    let digits = mantissa.trim_start_matches('-');
    if digits.is_empty()
        || digits.matches('.').count() > 1
        || !digits.chars().any(|c| c.is_ascii_digit())
        || mantissa.matches('-').count() > 1
    {
        return None;
    }
    if let Some(e) = exponent {
        let e = e.strip_prefix('-').unwrap_or(e);
        if e.is_empty() || !e.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
    }
    if exponent.is_none() && !mantissa.contains('.') {
        if let Ok(i) = mantissa.parse::<i64>() {
            return Some(NumberValue::Int(i));
        }
    }
    ascii.parse::<f64>().ok().map(NumberValue::Real)
}

/// Decodes the contents of a character literal, including its quotes.
pub fn unquote(lexeme: &str) -> String {
    let inner = lexeme.strip_prefix('\'').unwrap_or(lexeme);
    let inner = inner.strip_suffix('\'').unwrap_or(inner);
    inner.replace("''", "'")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kinds_and_lexemes(src: &str) -> Vec<(TokenKind, String)> {
        lex(src)
            .tokens
            .into_iter()
            .map(|t| (t.kind, t.lexeme))
            .collect()
    }

    #[test]
    fn reduction_example() {
        use TokenKind::*;
        let got = kinds_and_lexemes("×/ 3 7 2 5");
        let want: Vec<(TokenKind, String)> = [
            (Glyph, "×"),
            (Glyph, "/"),
            (NumberLiteral, "3"),
            (NumberLiteral, "7"),
            (NumberLiteral, "2"),
            (NumberLiteral, "5"),
        ]
        .into_iter()
        .map(|(k, s)| (k, s.to_string()))
        .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn empty_input() {
        let s = lex("");
        assert!(s.tokens.is_empty());
        assert_eq!(s.reconstruct(), "");
    }

    #[test]
    fn header_comment_is_one_token() {
        let s = lex("⍝ ⍺ : INT[]");
        assert_eq!(s.tokens.len(), 1);
        assert_eq!(s.tokens[0].kind, TokenKind::Comment);
        assert_eq!(s.tokens[0].lexeme, "⍝ ⍺ : INT[]");
        assert_eq!(s.tokens[0].span.length, 11);
    }

    #[test]
    fn tradfn_tokens() {
        let s = lex(":For e :In v\n    r∨←e\n:EndFor");
        let kinds: Vec<_> = s.tokens.iter().map(|t| t.kind).collect();
        use TokenKind::*;
        assert_eq!(
            kinds,
            vec![
                ControlWord,
                Identifier,
                ControlWord,
                Identifier,
                Separator,
                Identifier,
                Glyph,
                Glyph,
                Identifier,
                Separator,
                ControlWord
            ]
        );
        assert_eq!(s.tokens[5].span, Span { line: 2, column: 5, length: 1 });
    }

    #[test]
    fn strings_and_escapes() {
        let s = lex("'it''s' 'ABCDE'");
        assert_eq!(s.tokens[0].kind, TokenKind::CharacterLiteral);
        assert_eq!(unquote(&s.tokens[0].lexeme), "it's");
        assert_eq!(unquote(&s.tokens[1].lexeme), "ABCDE");
        let bad = lex("'open");
        assert!(bad.tokens[0].diagnostic.is_some());
    }

    #[test]
    fn numbers() {
        assert_eq!(parse_number("¯3"), Some(NumberValue::Int(-3)));
        assert_eq!(parse_number("2.5"), Some(NumberValue::Real(2.5)));
        assert_eq!(parse_number("1E¯2"), Some(NumberValue::Real(0.01)));
        assert_eq!(parse_number(".5"), Some(NumberValue::Real(0.5)));
        assert_eq!(parse_number("1.2.3"), None);
        let s = lex("1.2.3 ¯");
        assert_eq!(s.tokens.len(), 2);
        assert!(s.tokens.iter().all(|t| t.diagnostic.is_some()));
    }

    #[test]
    fn unknown_codepoints_are_flagged() {
        let s = lex("a ☃ b");
        assert_eq!(s.tokens[1].kind, TokenKind::Glyph);
        assert!(s.tokens[1].unknown);
        assert_eq!(s.diagnostics().count(), 1);
    }

    proptest! {
        #[test]
        fn lexing_is_lossless(src in "[ a-z0-9⍳⍴⍉∊⌈⌊×÷+/⌿¨⊂⊃≢∨∧←⍺⍵⍝⋄{}()'¯.:\n\t=☃]{0,60}") {
            prop_assert_eq!(lex(&src).reconstruct(), src);
        }

        #[test]
        fn lexing_is_lossless_for_any_text(src in any::<String>()) {
            prop_assert_eq!(lex(&src).reconstruct(), src);
        }
    }
}
