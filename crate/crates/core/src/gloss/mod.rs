//! Gloss annotation grammar and its post-processing into flat gloss
//! sequences.
//!
//! Annotators write one token per sign, separated by whitespace:
//!
//! ```text
//! token    := compound homolist?
//! compound := unit ('+' unit)*
//! unit     := base ( '(?)' | '(' digits ')' )*
//! homolist := '(=' compound ('=' compound)* ')'
//! ```
//!
//! `X+Y` is a compound sign, `X(?)` an ill-performed sign, `X(2)` a numbered
//! variant and `X(=Y=Z)` a homosign group whose first member is `X`.
//! Post-processing strips modifiers, resolves homosign groups to a
//! representative and splits compounds into their units, in that order.

mod parse;
mod registry;

pub use parse::{parse, Expected, ParseError, ParseErrorKind};
pub use registry::{choose_representative, HomosignClass, HomosignRegistry, RegistryError};

use std::fmt;

/// One sign word with its annotation modifiers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GlossUnit {
    pub base: String,
    pub ill_performed: bool,
    pub variant: Option<u32>,
}

impl GlossUnit {
    pub fn plain(base: impl Into<String>) -> Self {
        GlossUnit {
            base: base.into(),
            ill_performed: false,
            variant: None,
        }
    }

    pub fn normalized(&self) -> Self {
        GlossUnit::plain(self.base.clone())
    }
}

impl fmt::Display for GlossUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.base)?;
        if let Some(v) = self.variant {
            write!(f, "({v})")?;
        }
        if self.ill_performed {
            f.write_str("(?)")?;
        }
        Ok(())
    }
}

/// `X+Y+...`; a single unit is a plain sign.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Compound {
    pub units: Vec<GlossUnit>,
}

impl Compound {
    pub fn new(units: Vec<GlossUnit>) -> Self {
        assert!(!units.is_empty(), "compound needs at least one unit");
        Compound { units }
    }

    pub fn plain(base: impl Into<String>) -> Self {
        Compound::new(vec![GlossUnit::plain(base)])
    }

    /// Builds a modifier-free compound from `+`-joined text.
    pub fn from_plain_text(text: &str) -> Self {
        Compound::new(text.split('+').map(GlossUnit::plain).collect())
    }

    pub fn normalized(&self) -> Self {
        Compound {
            units: self.units.iter().map(GlossUnit::normalized).collect(),
        }
    }

    pub fn render(&self) -> String {
        self.to_string()
    }

    /// Concatenation `self+other`.
    pub fn join(&self, other: &Compound) -> Compound {
        Compound::new(self.units.iter().chain(&other.units).cloned().collect())
    }
}

impl fmt::Display for Compound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, u) in self.units.iter().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            write!(f, "{u}")?;
        }
        Ok(())
    }
}

/// Number of units in a compound (`A+B+C` counts three).
pub fn compound_count(c: &Compound) -> usize {
    c.units.len()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GlossToken {
    Compound(Compound),
    /// At least two members; the first is the one written before `(=`.
    Homosign(Vec<Compound>),
}

impl fmt::Display for GlossToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GlossToken::Compound(c) => write!(f, "{c}"),
            GlossToken::Homosign(members) => {
                write!(f, "{}(", members[0])?;
                for m in &members[1..] {
                    write!(f, "={m}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct GlossAnnotation {
    pub tokens: Vec<GlossToken>,
    pub raw: String,
}

impl PartialEq for GlossAnnotation {
    /// Annotations are equal when their token structure is; whitespace in
    /// `raw` is not significant.
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens
    }
}

impl GlossAnnotation {
    /// Canonical text form: tokens separated by single spaces.
    pub fn render(&self) -> String {
        render_tokens(&self.tokens)
    }

    pub fn homosign_groups(&self) -> impl Iterator<Item = &[Compound]> {
        self.tokens.iter().filter_map(|t| match t {
            GlossToken::Homosign(m) => Some(m.as_slice()),
            GlossToken::Compound(_) => None,
        })
    }
}

pub fn render_tokens(tokens: &[GlossToken]) -> String {
    tokens
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Clears ill-performed flags and variant numbers everywhere.
///
/// Homosign members that become identical are merged (first occurrence
/// kept); a group left with one member becomes a plain compound.
pub fn normalize_units(ann: &GlossAnnotation) -> GlossAnnotation {
    let tokens = ann
        .tokens
        .iter()
        .map(|t| match t {
            GlossToken::Compound(c) => GlossToken::Compound(c.normalized()),
            GlossToken::Homosign(members) => {
                let mut uniq: Vec<Compound> = Vec::with_capacity(members.len());
                for m in members.iter().map(Compound::normalized) {
                    if !uniq.contains(&m) {
                        uniq.push(m);
                    }
                }
                if uniq.len() == 1 {
                    GlossToken::Compound(uniq.pop().unwrap())
                } else {
                    GlossToken::Homosign(uniq)
                }
            }
        })
        .collect::<Vec<_>>();
    GlossAnnotation {
        raw: render_tokens(&tokens),
        tokens,
    }
}

#[derive(Debug, Clone, Copy)]
pub enum SequenceMode<'a> {
    /// Each homosign group resolves to its own representative.
    Train,
    /// Compounds in any registry class resolve to the class representative.
    Test(&'a HomosignRegistry),
}

/// Flat gloss sequence used as a recognition target.
pub fn to_training_sequence(ann: &GlossAnnotation, mode: SequenceMode<'_>) -> Vec<String> {
    let norm = normalize_units(ann);
    let mut out = Vec::new();
    for token in &norm.tokens {
        let resolved: Compound = match (token, mode) {
            (GlossToken::Compound(c), SequenceMode::Train) => c.clone(),
            (GlossToken::Homosign(m), SequenceMode::Train) => choose_representative(m).clone(),
            (GlossToken::Compound(c), SequenceMode::Test(reg)) => {
                reg.representative(c).unwrap_or(c).clone()
            }
            (GlossToken::Homosign(m), SequenceMode::Test(reg)) => m
                .iter()
                .find_map(|c| reg.representative(c))
                .unwrap_or_else(|| choose_representative(m))
                .clone(),
        };
        out.extend(resolved.units.into_iter().map(|u| u.base));
    }
    out
}

/// Replaces every gloss belonging to a registry class with the class
/// representative, identically in hypothesis and reference.
pub fn canonicalize_for_scoring(
    hyp: &[String],
    reference: &[String],
    reg: &HomosignRegistry,
) -> (Vec<String>, Vec<String>) {
    let map = |seq: &[String]| -> Vec<String> {
        seq.iter()
            .map(|g| match reg.representative(&Compound::plain(g.as_str())) {
                Some(rep) => rep.render(),
                None => g.clone(),
            })
            .collect()
    };
    (map(hyp), map(reference))
}
