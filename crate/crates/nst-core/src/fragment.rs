//! Named theory fragments: a constant signature plus labelled sentences.
//!
//! Basic set theory (classical logic with equality plus extensionality) is
//! implicit and never listed among the axioms.

use crate::parser::{self, ParseError};
use crate::syntax::{classify_uc, free_vars, mark_constants, Formula, UcShape};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Axiom {
    pub label: String,
    pub formula: Formula,
}

/// An extension of basic set theory by finitely many sentences over a
/// constant signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TheoryFragment {
    pub name: String,
    pub constants: Vec<String>,
    pub axioms: Vec<Axiom>,
}

#[derive(Debug, Error)]
pub enum FragmentError {
    #[error("axiom `{label}`: undeclared constant or free variable `{name}`")]
    Undeclared { label: String, name: String },
    #[error("duplicate axiom label `{0}`")]
    DuplicateLabel(String),
    #[error("duplicate constant `{0}`")]
    DuplicateConstant(String),
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
}

impl TheoryFragment {
    pub fn new(name: impl Into<String>) -> Self {
        TheoryFragment {
            name: name.into(),
            constants: Vec::new(),
            axioms: Vec::new(),
        }
    }

    pub fn push(&mut self, label: impl Into<String>, formula: Formula) {
        self.axioms.push(Axiom {
            label: label.into(),
            formula,
        });
    }

    pub fn axiom(&self, label: &str) -> Option<&Axiom> {
        self.axioms.iter().find(|a| a.label == label)
    }

    /// Appends another fragment's constants and axioms, skipping exact
    /// duplicates of constants.
    pub fn merge(&mut self, other: &TheoryFragment) {
        for c in &other.constants {
            if !self.constants.contains(c) {
                self.constants.push(c.clone());
            }
        }
        for ax in &other.axioms {
            self.axioms.push(ax.clone());
        }
    }

    /// Returns a copy extended by one labelled sentence.
    pub fn with_axiom(&self, label: &str, formula: Formula) -> TheoryFragment {
        let mut t = self.clone();
        t.push(label, formula);
        t
    }

    /// Checks the fragment invariants: unique labels, declared constants,
    /// every axiom a sentence over the signature.
    pub fn validate(&self) -> Result<(), FragmentError> {
        let mut seen = BTreeSet::new();
        for c in &self.constants {
            if !seen.insert(c.clone()) {
                return Err(FragmentError::DuplicateConstant(c.clone()));
            }
        }
        let mut labels = BTreeSet::new();
        for ax in &self.axioms {
            if !labels.insert(ax.label.clone()) {
                return Err(FragmentError::DuplicateLabel(ax.label.clone()));
            }
            for c in ax.formula.constants() {
                if !self.constants.contains(&c) {
                    return Err(FragmentError::Undeclared {
                        label: ax.label.clone(),
                        name: c,
                    });
                }
            }
            if let Some(v) = free_vars(&ax.formula).into_iter().next() {
                return Err(FragmentError::Undeclared {
                    label: ax.label.clone(),
                    name: v,
                });
            }
        }
        Ok(())
    }

    /// The axioms that are comprehension instances, with their shapes.
    pub fn uc_instances(&self) -> Vec<(&Axiom, UcShape)> {
        self.axioms
            .iter()
            .filter_map(|ax| classify_uc(&ax.formula).map(|s| (ax, s)))
            .collect()
    }

    /// Parses the `.nst` fragment format produced by [`fmt::Display`]:
    /// optional `# fragment:` / `# constants:` headers, optional
    /// `# label:` comments, one sentence per line.
    pub fn parse(text: &str) -> Result<TheoryFragment, FragmentError> {
        let mut name = String::from("fragment");
        let mut constants: Vec<String> = Vec::new();
        let mut pending_label: Option<String> = None;
        let mut axioms: Vec<(Option<String>, usize, String)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if let Some(rest) = trimmed.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("fragment:") {
                    name = v.trim().to_string();
                } else if let Some(v) = rest.strip_prefix("constants:") {
                    constants = v.split_whitespace().map(String::from).collect();
                } else if let Some(v) = rest.strip_prefix("label:") {
                    pending_label = Some(v.trim().to_string());
                }
                continue;
            }
            if trimmed.is_empty() {
                continue;
            }
            let stripped = match line.find('#') {
                Some(p) => &line[..p],
                None => line,
            };
            axioms.push((pending_label.take(), i + 1, stripped.to_string()));
        }
        let const_set: BTreeSet<String> = constants.iter().cloned().collect();
        let mut frag = TheoryFragment {
            name,
            constants,
            axioms: Vec::new(),
        };
        for (idx, (label, line_no, text)) in axioms.into_iter().enumerate() {
            let f = parser::parse(&text).map_err(|e| ParseError {
                line: line_no,
                ..e
            })?;
            let f = mark_constants(&f, &const_set);
            frag.push(label.unwrap_or_else(|| format!("ax{idx}")), f);
        }
        frag.validate()?;
        Ok(frag)
    }
}

impl fmt::Display for TheoryFragment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# fragment: {}", self.name)?;
        if !self.constants.is_empty() {
            writeln!(f, "# constants: {}", self.constants.join(" "))?;
        }
        for ax in &self.axioms {
            writeln!(f, "# label: {}", ax.label)?;
            writeln!(f, "{}", ax.formula)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;
    use crate::syntax::Term;

    #[test]
    fn roundtrip_with_constants() {
        let mut frag = TheoryFragment::new("demo");
        frag.constants.push("D+".into());
        let f = parse("forall x. (x in D+ <-> x = D+)").unwrap();
        let f = mark_constants(&f, &["D+".to_string()].into_iter().collect());
        frag.push("d-def", f.clone());
        frag.validate().unwrap();
        let text = frag.to_string();
        let back = TheoryFragment::parse(&text).unwrap();
        assert_eq!(back, frag);
        // The constant really is a constant after the round trip.
        assert!(back.axioms[0].formula.constants().contains("D+"));
        assert_eq!(
            back.axioms[0].formula,
            crate::syntax::forall(
                "x",
                crate::syntax::iff(
                    crate::syntax::mem(Term::var("x"), Term::cons("D+")),
                    crate::syntax::eq(Term::var("x"), Term::cons("D+")),
                )
            )
        );
    }

    #[test]
    fn validate_rejects_undeclared() {
        let mut frag = TheoryFragment::new("bad");
        frag.push("a", parse("c in c").unwrap());
        assert!(frag.validate().is_err());
    }
}
