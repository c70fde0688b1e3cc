//! Value models: named value dimensions, each an expression over the
//! built-in run measures.
//!
//! A value-model file has one dimension per line:
//!
//! ```text
//! # comment
//! <name> <violation|compliance> = <expression>
//! ```
//!
//! Violation dimensions are reported as-is (lower is better). Compliance
//! dimensions (1 is best) are reported as `1 - value` so every reported
//! score is a violation score.

mod measures;
mod parser;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

pub use measures::{derive_measures, is_builtin, MeasureError, MeasureTable, PATIENT_MEASURES, RUN_MEASURES};
pub use parser::{parse, BinOp, Func, SyntaxError, ValueExpr};

/// The reference value model: original and refined safety, and fairness.
pub const DEFAULT_MODEL: &str = include_str!("../../data/values.default");
/// The reference model plus path efficiency.
pub const EXTENDED_MODEL: &str = include_str!("../../data/values.extended");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreOrientation {
    /// Lower is better.
    Violation,
    /// Higher is better, 1 is optimal.
    Compliance,
}

impl fmt::Display for ScoreOrientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Violation => "violation",
            Self::Compliance => "compliance",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dimension {
    pub name: String,
    pub expression: ValueExpr,
    pub orientation: ScoreOrientation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueModel {
    dimensions: Vec<Dimension>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValueModelError {
    #[error("line {line}: {source}")]
    Syntax { line: usize, source: SyntaxError },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("duplicate dimension {0:?}")]
    DuplicateDimension(String),
    #[error("dimension {dimension:?}: unknown measure {measure:?}")]
    UnknownMeasure { dimension: String, measure: String },
}

impl ValueModel {
    pub fn new(dimensions: Vec<Dimension>) -> Result<Self, ValueModelError> {
        let mut seen = BTreeSet::new();
        for d in &dimensions {
            if !seen.insert(d.name.clone()) {
                return Err(ValueModelError::DuplicateDimension(d.name.clone()));
            }
            for m in d.expression.references() {
                if !is_builtin(&m) {
                    return Err(ValueModelError::UnknownMeasure { dimension: d.name.clone(), measure: m });
                }
            }
        }
        Ok(Self { dimensions })
    }

    pub fn default_model() -> Self {
        Self::parse(DEFAULT_MODEL).expect("shipped default model parses")
    }

    pub fn extended_model() -> Self {
        Self::parse(EXTENDED_MODEL).expect("shipped extended model parses")
    }

    pub fn parse(text: &str) -> Result<Self, ValueModelError> {
        let mut dims = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (head, expr) = content
                .split_once('=')
                .ok_or_else(|| ValueModelError::Format { line, message: "expected '<name> <orientation> = <expr>'".into() })?;
            let mut words = head.split_whitespace();
            let (Some(name), Some(orient), None) = (words.next(), words.next(), words.next()) else {
                return Err(ValueModelError::Format { line, message: "expected '<name> <orientation>' before '='".into() });
            };
            let orientation = match orient {
                "violation" => ScoreOrientation::Violation,
                "compliance" => ScoreOrientation::Compliance,
                other => {
                    return Err(ValueModelError::Format { line, message: format!("unknown orientation {other:?}") })
                }
            };
            let expression = parse(expr).map_err(|source| ValueModelError::Syntax { line, source })?;
            dims.push(Dimension { name: name.to_owned(), expression, orientation });
        }
        Self::new(dims)
    }

    pub fn dimensions(&self) -> &[Dimension] {
        &self.dimensions
    }

    pub fn names(&self) -> Vec<String> {
        self.dimensions.iter().map(|d| d.name.clone()).collect()
    }

    /// Violation-oriented score per dimension; `None` marks a division by
    /// zero (undefined for this run).
    pub fn evaluate(&self, table: &MeasureTable) -> Result<Vec<Option<f64>>, MeasureError> {
        self.dimensions
            .iter()
            .map(|d| {
                let raw = eval(&d.expression, table)?;
                Ok(raw.map(|v| match d.orientation {
                    ScoreOrientation::Violation => v,
                    ScoreOrientation::Compliance => 1.0 - v,
                }))
            })
            .collect()
    }
}

impl fmt::Display for ValueModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.dimensions {
            writeln!(f, "{} {} = {}", d.name, d.orientation, d.expression)?;
        }
        Ok(())
    }
}

/// Evaluate an expression; `Ok(None)` when a division by zero occurs.
pub fn eval(expr: &ValueExpr, table: &MeasureTable) -> Result<Option<f64>, MeasureError> {
    Ok(match expr {
        ValueExpr::Number(v) => Some(*v),
        ValueExpr::Measure(name) => Some(table.get(name)?),
        ValueExpr::Count(kind) => Some(table.get(&format!("count({kind})"))?),
        ValueExpr::Neg(a) => eval(a, table)?.map(|v| -v),
        ValueExpr::Binary(op, a, b) => {
            let (a, b) = (eval(a, table)?, eval(b, table)?);
            match (a, b) {
                (Some(a), Some(b)) => match op {
                    BinOp::Add => Some(a + b),
                    BinOp::Sub => Some(a - b),
                    BinOp::Mul => Some(a * b),
                    BinOp::Div if b == 0.0 => None,
                    BinOp::Div => Some(a / b),
                },
                _ => None,
            }
        }
        ValueExpr::Call(func, a, b) => {
            let (a, b) = (eval(a, table)?, eval(b, table)?);
            match (a, b) {
                (Some(a), Some(b)) => Some(match func {
                    Func::Min => a.min(b),
                    Func::Max => a.max(b),
                }),
                _ => None,
            }
        }
    })
}
