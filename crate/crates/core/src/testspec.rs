//! Hypothesis strings such as `rel(X) _||_ Y | Z`.
//!
//! ```text
//! spec := var "_||_" var [ "|" var ]
//! var  := NAME | "rel(" NAME ")"
//! ```
//!
//! `rel(NAME)` denotes the attribute over a node's direct neighbors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{NirdError, Result};
use crate::graph::PathPredicate;

/// Exact kernel matrices or random Fourier features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Rff,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::Rff => "rff",
        })
    }
}

impl FromStr for Method {
    type Err = NirdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(Method::Exact),
            "rff" => Ok(Method::Rff),
            _ => Err(NirdError::BadParams(format!(
                "unknown method `{s}` (expected `exact` or `rff`)"
            ))),
        }
    }
}

/// An attribute, optionally lifted to a relational variable by a path
/// predicate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VariableRef {
    pub column: String,
    pub predicate: Option<PathPredicate>,
}

impl VariableRef {
    pub fn prop(column: impl Into<String>) -> Self {
        VariableRef {
            column: column.into(),
            predicate: None,
        }
    }

    pub fn rel(column: impl Into<String>) -> Self {
        VariableRef {
            column: column.into(),
            predicate: Some(PathPredicate::DirectNeighbors),
        }
    }

    pub fn is_relational(&self) -> bool {
        self.predicate.is_some()
    }
}

impl fmt::Display for VariableRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.predicate {
            Some(PathPredicate::DirectNeighbors) => write!(f, "rel({})", self.column),
            None => f.write_str(&self.column),
        }
    }
}

/// A marginal (`given == None`) or conditional independence hypothesis.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TestSpec {
    pub lhs: VariableRef,
    pub rhs: VariableRef,
    pub given: Option<VariableRef>,
}

impl TestSpec {
    pub fn marginal(lhs: VariableRef, rhs: VariableRef) -> Self {
        TestSpec {
            lhs,
            rhs,
            given: None,
        }
    }

    pub fn conditional(lhs: VariableRef, rhs: VariableRef, given: VariableRef) -> Self {
        TestSpec {
            lhs,
            rhs,
            given: Some(given),
        }
    }

    pub fn is_conditional(&self) -> bool {
        self.given.is_some()
    }

    /// Whether the permutation null shuffles the left-hand side. The
    /// right-hand side is shuffled unless it is relational and the left is
    /// not.
    pub fn permutes_lhs(&self) -> bool {
        self.rhs.is_relational() && !self.lhs.is_relational()
    }

    pub fn columns(&self) -> impl Iterator<Item = &str> {
        [Some(&self.lhs), Some(&self.rhs), self.given.as_ref()]
            .into_iter()
            .flatten()
            .map(|v| v.column.as_str())
    }
}

impl fmt::Display for TestSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} _||_ {}", self.lhs, self.rhs)?;
        if let Some(z) = &self.given {
            write!(f, " | {z}")?;
        }
        Ok(())
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn error(&self, message: impl Into<String>) -> NirdError {
        let column = self.src[..self.pos].chars().count() + 1;
        NirdError::parse(1, column, message)
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<()> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{token}`")))
        }
    }

    fn name(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.rest().chars().next() {
            let ident = c.is_alphanumeric() || matches!(c, '_' | '.' | '-');
            if !ident || self.rest().starts_with("_||_") {
                break;
            }
            self.pos += c.len_utf8();
        }
        if self.pos == start {
            return Err(self.error("expected a column name"));
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn variable(&mut self) -> Result<VariableRef> {
        self.skip_ws();
        let save = self.pos;
        if self.eat("rel") {
            if self.eat("(") {
                let column = self.name()?;
                self.expect(")")?;
                return Ok(VariableRef::rel(column));
            }
            self.pos = save;
        }
        Ok(VariableRef::prop(self.name()?))
    }

    fn spec(&mut self) -> Result<TestSpec> {
        let lhs = self.variable()?;
        self.expect("_||_")?;
        let rhs = self.variable()?;
        let given = if self.eat("|") {
            Some(self.variable()?)
        } else {
            None
        };
        self.skip_ws();
        if !self.rest().is_empty() {
            return Err(self.error("unexpected trailing input"));
        }
        Ok(TestSpec { lhs, rhs, given })
    }
}

impl FromStr for TestSpec {
    type Err = NirdError;

    fn from_str(s: &str) -> Result<Self> {
        Parser { src: s, pos: 0 }.spec()
    }
}
