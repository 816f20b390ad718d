//! The APL glyph inventory used by the lexer and by tokenizer analysis.

use std::collections::BTreeMap;

use serde::Serialize;

/// Syntactic role of a glyph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlyphClass {
    PrimitiveFunction,
    Operator,
    Structural,
    ArgumentSymbol,
    Assignment,
    CommentMarker,
}

const PRIMITIVE_FUNCTIONS: &str = "+-×÷⌈⌊*⍟|!○~?∊⍷⍳⍸⍴,⍪⌽⊖⍉↑↓⊂⊃⊆⌷≡≢∪∩<≤=≥>≠∨∧⍱⍲⍋⍒⊥⊤⌹⊣⊢⍎⍕⍬⎕⍞";
const OPERATORS: &str = "/⌿\\⍀¨⍨∘.⍣⍤⌸⍥@⌺&";
const STRUCTURAL: &str = "{}()[];⋄:∇¯'→";
const ARGUMENT_SYMBOLS: &str = "⍺⍵⍶⍹";
const ASSIGNMENT: &str = "←";
const COMMENT_MARKERS: &str = "⍝";

/// Set of known glyphs keyed by codepoint.
#[derive(Debug, Clone)]
pub struct GlyphInventory {
    entries: BTreeMap<char, GlyphClass>,
}

impl GlyphInventory {
    /// The standard inventory: Dyalog-style primitives, operators and syntax.
    pub fn standard() -> Self {
        let groups = [
            (PRIMITIVE_FUNCTIONS, GlyphClass::PrimitiveFunction),
            (OPERATORS, GlyphClass::Operator),
            (STRUCTURAL, GlyphClass::Structural),
            (ARGUMENT_SYMBOLS, GlyphClass::ArgumentSymbol),
            (ASSIGNMENT, GlyphClass::Assignment),
            (COMMENT_MARKERS, GlyphClass::CommentMarker),
        ];
        let mut entries = BTreeMap::new();
        for (chars, class) in groups {
            for c in chars.chars() {
                let prev = entries.insert(c, class);
                debug_assert!(prev.is_none(), "duplicate glyph {c}");
            }
        }
        Self { entries }
    }

    pub fn class_of(&self, c: char) -> Option<GlyphClass> {
        self.entries.get(&c).copied()
    }

    pub fn contains(&self, c: char) -> bool {
        self.entries.contains_key(&c)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (char, GlyphClass)> + '_ {
        self.entries.iter().map(|(c, k)| (*c, *k))
    }

    /// All glyphs concatenated in codepoint order.
    pub fn all_glyphs(&self) -> String {
        self.entries.keys().collect()
    }
}

impl Default for GlyphInventory {
    fn default() -> Self {
        Self::standard()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contains_every_common_glyph() {
        let inv = GlyphInventory::standard();
        for c in "⍳⍴⍉∊⌈⌊×÷+-/⌿¨⊂⊃≢∨∧←⍺⍵⍝⋄{}=".chars() {
            assert!(inv.contains(c), "missing {c}");
        }
    }

    #[test]
    fn no_duplicate_codepoints_across_groups() {
        let total: usize = [
            PRIMITIVE_FUNCTIONS,
            OPERATORS,
            STRUCTURAL,
            ARGUMENT_SYMBOLS,
            ASSIGNMENT,
            COMMENT_MARKERS,
        ]
        .iter()
        .map(|s| s.chars().count())
        .sum();
        assert_eq!(total, GlyphInventory::standard().len());
    }

    #[test]
    fn classes() {
        let inv = GlyphInventory::standard();
        assert_eq!(inv.class_of('⌿'), Some(GlyphClass::Operator));
        assert_eq!(inv.class_of('⍵'), Some(GlyphClass::ArgumentSymbol));
        assert_eq!(inv.class_of('←'), Some(GlyphClass::Assignment));
        assert_eq!(inv.class_of('⍝'), Some(GlyphClass::CommentMarker));
        assert_eq!(inv.class_of('a'), None);
    }
}
