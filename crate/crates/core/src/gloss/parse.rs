use std::fmt;

use thiserror::Error;

use super::{Compound, GlossAnnotation, GlossToken, GlossUnit};

/// Token class the parser was looking for when it failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expected {
    GlossWord,
    /// `(?)` or `(<n>)` with `n >= 1`
    Modifier,
    /// `'+'`, a modifier, `(=` or the end of the token
    UnitContinuation,
    /// `'='` or `')'` inside a homosign group
    HomosignContinuation,
    EndOfToken,
    Annotation,
}

impl fmt::Display for Expected {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Expected::GlossWord => "gloss word",
            Expected::Modifier => "modifier '(?)' or '(<number>)'",
            Expected::UnitContinuation => "'+', modifier, '(=' or end of token",
            Expected::HomosignContinuation => "'=' or ')'",
            Expected::EndOfToken => "end of token",
            Expected::Annotation => "at least one gloss",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    EmptyAnnotation,
    EmptyBase,
    EmptyHomosignMember,
    UnbalancedParen,
    InvalidModifier,
    DuplicateModifier,
    DuplicateHomosignMember,
    UnexpectedChar,
}

/// Parse failure located by token index and byte offset into the raw input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind:?} in token {token_index} at byte {offset}: expected {expected}, found {found:?}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// Zero-based index of the whitespace-separated token.
    pub token_index: usize,
    /// Byte offset into the raw annotation.
    pub offset: usize,
    pub expected: Expected,
    /// The offending substring (rest of the token from `offset`).
    pub found: String,
}

struct TokenParser<'a> {
    src: &'a str,
    pos: usize,
    token_start: usize,
    token_index: usize,
}

const RESERVED: [char; 4] = ['+', '(', ')', '='];

impl<'a> TokenParser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn error(&self, kind: ParseErrorKind, expected: Expected) -> ParseError {
        self.error_at(self.pos, kind, expected)
    }

    fn error_at(&self, pos: usize, kind: ParseErrorKind, expected: Expected) -> ParseError {
        ParseError {
            kind,
            token_index: self.token_index,
            offset: self.token_start + pos,
            expected,
            found: self.src[pos..].to_string(),
        }
    }

    fn token(&mut self) -> Result<GlossToken, ParseError> {
        let first = self.compound(false)?;
        if !self.rest().starts_with("(=") {
            return if self.rest().is_empty() {
                Ok(GlossToken::Compound(first))
            } else {
                let kind = if self.rest().starts_with(')') {
                    ParseErrorKind::UnbalancedParen
                } else {
                    ParseErrorKind::UnexpectedChar
                };
                Err(self.error(kind, Expected::UnitContinuation))
            };
        }
        self.pos += 2;
        let mut members = vec![first];
        loop {
            let member_pos = self.pos;
            let m = self.compound(true)?;
            if members.contains(&m) {
                return Err(self.error_at(
                    member_pos,
                    ParseErrorKind::DuplicateHomosignMember,
                    Expected::GlossWord,
                ));
            }
            members.push(m);
            match self.rest().chars().next() {
                Some('=') => self.pos += 1,
                Some(')') => {
                    self.pos += 1;
                    break;
                }
                None => {
                    return Err(self.error(
                        ParseErrorKind::UnbalancedParen,
                        Expected::HomosignContinuation,
                    ))
                }
                Some(_) => {
                    return Err(self.error(
                        ParseErrorKind::UnexpectedChar,
                        Expected::HomosignContinuation,
                    ))
                }
            }
        }
        if !self.rest().is_empty() {
            return Err(self.error(ParseErrorKind::UnexpectedChar, Expected::EndOfToken));
        }
        Ok(GlossToken::Homosign(members))
    }

    fn compound(&mut self, in_group: bool) -> Result<Compound, ParseError> {
        let mut units = vec![self.unit(in_group)?];
        while self.rest().starts_with('+') {
            self.pos += 1;
            units.push(self.unit(in_group)?);
        }
        Ok(Compound::new(units))
    }

    fn unit(&mut self, in_group: bool) -> Result<GlossUnit, ParseError> {
        let rest = self.rest();
        let len = rest.find(RESERVED).unwrap_or(rest.len());
        if len == 0 {
            let kind = if in_group {
                ParseErrorKind::EmptyHomosignMember
            } else {
                ParseErrorKind::EmptyBase
            };
            return Err(self.error(kind, Expected::GlossWord));
        }
        let mut unit = GlossUnit::plain(&rest[..len]);
        self.pos += len;
        while self.rest().starts_with('(') && !self.rest().starts_with("(=") {
            let at = self.pos;
            let rest = self.rest();
            let Some(close) = rest.find(')') else {
                return Err(self.error(ParseErrorKind::UnbalancedParen, Expected::Modifier));
            };
            let inner = &rest[1..close];
            if inner == "?" {
                if unit.ill_performed {
                    return Err(self.error_at(at, ParseErrorKind::DuplicateModifier, Expected::Modifier));
                }
                unit.ill_performed = true;
            } else if !inner.is_empty() && inner.bytes().all(|b| b.is_ascii_digit()) {
                let n = inner
                    .parse::<u32>()
                    .ok()
                    .filter(|&n| n >= 1)
                    .ok_or_else(|| self.error_at(at, ParseErrorKind::InvalidModifier, Expected::Modifier))?;
                if unit.variant.is_some() {
                    return Err(self.error_at(at, ParseErrorKind::DuplicateModifier, Expected::Modifier));
                }
                unit.variant = Some(n);
            } else {
                let kind = if inner.contains('(') {
                    ParseErrorKind::UnbalancedParen
                } else {
                    ParseErrorKind::InvalidModifier
                };
                return Err(self.error(kind, Expected::Modifier));
            }
            self.pos += close + 1;
        }
        Ok(unit)
    }
}

/// Parses a whitespace-separated gloss annotation.
pub fn parse(raw: &str) -> Result<GlossAnnotation, ParseError> {
    let mut tokens = Vec::new();
    let mut index = 0;
    let mut offset = 0;
    for piece in raw.split_inclusive(char::is_whitespace) {
        let start = offset;
        offset += piece.len();
        let tok = piece.trim_end_matches(char::is_whitespace);
        if tok.is_empty() {
            continue;
        }
        let mut p = TokenParser {
            src: tok,
            pos: 0,
            token_start: start,
            token_index: index,
        };
        tokens.push(p.token()?);
        index += 1;
    }
    if tokens.is_empty() {
        return Err(ParseError {
            kind: ParseErrorKind::EmptyAnnotation,
            token_index: 0,
            offset: 0,
            expected: Expected::Annotation,
            found: raw.to_string(),
        });
    }
    Ok(GlossAnnotation {
        tokens,
        raw: raw.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gloss::render_tokens;
    use proptest::prelude::*;

    fn unit(base: &str, ill: bool, variant: Option<u32>) -> GlossUnit {
        GlossUnit {
            base: base.into(),
            ill_performed: ill,
            variant,
        }
    }

    fn c(units: &[&str]) -> Compound {
        Compound::new(units.iter().map(|u| GlossUnit::plain(*u)).collect())
    }

    #[test]
    fn plain_token() {
        assert_eq!(parse("天氣").unwrap().tokens, vec![GlossToken::Compound(c(&["天氣"]))]);
    }

    #[test]
    fn all_forms() {
        let ann = parse("A+B C(?) D(2) E(=F=G)").unwrap();
        assert_eq!(
            ann.tokens,
            vec![
                GlossToken::Compound(c(&["A", "B"])),
                GlossToken::Compound(Compound::new(vec![unit("C", true, None)])),
                GlossToken::Compound(Compound::new(vec![unit("D", false, Some(2))])),
                GlossToken::Homosign(vec![c(&["E"]), c(&["F"]), c(&["G"])]),
            ]
        );
        assert_eq!(ann.render(), "A+B C(?) D(2) E(=F=G)");
    }

    #[test]
    fn stacked_modifiers_any_order() {
        let a = parse("X(?)(3)").unwrap();
        let b = parse("X(3)(?)").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tokens, vec![GlossToken::Compound(Compound::new(vec![unit("X", true, Some(3))]))]);
    }

    #[test]
    fn modifiers_inside_groups_and_compounds() {
        let ann = parse("A(1)+B(?)(=C+D(2)=E)").unwrap();
        let GlossToken::Homosign(m) = &ann.tokens[0] else { panic!() };
        assert_eq!(m.len(), 3);
        assert_eq!(m[0].units[0].variant, Some(1));
        assert_eq!(m[1].units[1].variant, Some(2));
    }

    fn err(raw: &str) -> ParseError {
        parse(raw).unwrap_err()
    }

    #[test]
    fn error_positions() {
        let e = err("A(");
        assert_eq!((e.kind, e.offset, e.token_index), (ParseErrorKind::UnbalancedParen, 1, 0));
        assert_eq!(e.found, "(");

        let e = err("好 A+");
        assert_eq!((e.kind, e.token_index), (ParseErrorKind::EmptyBase, 1));
        assert_eq!(e.offset, "好 A+".len());

        let e = err("X(=Y=)");
        assert_eq!((e.kind, e.offset), (ParseErrorKind::EmptyHomosignMember, 5));

        let e = err("X(=Y");
        assert_eq!(e.kind, ParseErrorKind::UnbalancedParen);
        assert_eq!(e.expected, Expected::HomosignContinuation);

        assert_eq!(err("A)").kind, ParseErrorKind::UnbalancedParen);
        assert_eq!(err("A(x)").kind, ParseErrorKind::InvalidModifier);
        assert_eq!(err("A(0)").kind, ParseErrorKind::InvalidModifier);
        assert_eq!(err("A(1)(2)").kind, ParseErrorKind::DuplicateModifier);
        assert_eq!(err("A(?)(?)").kind, ParseErrorKind::DuplicateModifier);
        assert_eq!(err("A=B").kind, ParseErrorKind::UnexpectedChar);
        assert_eq!(err("A(=B)C").kind, ParseErrorKind::UnexpectedChar);
        assert_eq!(err("A(=A)").kind, ParseErrorKind::DuplicateHomosignMember);
        assert_eq!(err("(?)").kind, ParseErrorKind::EmptyBase);
        assert_eq!(err("").kind, ParseErrorKind::EmptyAnnotation);
        assert_eq!(err(" \t ").kind, ParseErrorKind::EmptyAnnotation);
    }

    #[test]
    fn whitespace_is_not_significant() {
        assert_eq!(parse("  A\t B+C \n").unwrap(), parse("A B+C").unwrap());
        let e = err("A\u{3000}B(");
        assert_eq!(e.offset, "A\u{3000}B".len());
    }

    fn base() -> impl Strategy<Value = String> {
        "[A-Za-z天氣溫度百分比?1-9]{1,4}"
    }

    fn unit_strategy() -> impl Strategy<Value = GlossUnit> {
        (base(), any::<bool>(), proptest::option::of(1u32..30)).prop_map(|(b, ill, v)| unit(&b, ill, v))
    }

    fn compound_strategy() -> impl Strategy<Value = Compound> {
        proptest::collection::vec(unit_strategy(), 1..4).prop_map(Compound::new)
    }

    pub(crate) fn token_strategy() -> impl Strategy<Value = GlossToken> {
        prop_oneof![
            3 => compound_strategy().prop_map(GlossToken::Compound),
            1 => proptest::collection::vec(compound_strategy(), 2..5).prop_filter_map("distinct members", |mut m| {
                let mut seen = Vec::new();
                m.retain(|x| if seen.contains(x) { false } else { seen.push(x.clone()); true });
                (m.len() >= 2).then_some(GlossToken::Homosign(m))
            }),
        ]
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(tokens in proptest::collection::vec(token_strategy(), 1..8)) {
            let text = render_tokens(&tokens);
            let parsed = parse(&text).unwrap();
            prop_assert_eq!(&parsed.tokens, &tokens);
            prop_assert_eq!(parsed.render(), text);
        }

        #[test]
        fn never_panics(s in "\\PC{0,24}") {
            let _ = parse(&s);
        }
    }
}
