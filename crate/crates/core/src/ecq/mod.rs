//! Ethical compliance quantification: score runs against a value model,
//! aggregate per policy, and compare policies.
//!
//! Changing the value model only needs `score_runs` + `summarize` on the
//! stored protocols; no re-simulation is involved.

mod stats;

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

pub use stats::{average_ranks, bootstrap_mean_ci, spearman, BoxStats};

use crate::engine::protocol::RunProtocol;
use crate::iat::Policy;
use crate::valuelang::{derive_measures, MeasureError, ValueModel};
use crate::world::FloorPlan;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EcqError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("score matrix is empty")]
    EmptyMatrix,
    #[error("unknown dimension {0:?}")]
    UnknownDimension(String),
    #[error("need at least 3 policies, got {0}")]
    TooFewPolicies(usize),
    #[error("duplicate row {0}")]
    DuplicateRow(String),
    #[error("invalid value profile: {0}")]
    InvalidProfile(String),
    #[error("no policy has a defined score on every weighted dimension")]
    NoDefinedScore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub policy: Policy,
    pub run_id: String,
    /// One entry per dimension; `None` is undefined (division by zero).
    pub scores: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub dimensions: Vec<String>,
    pub rows: Vec<ScoreRow>,
}

impl ScoreMatrix {
    pub fn column(&self, dimension: &str) -> Result<usize, EcqError> {
        self.dimensions
            .iter()
            .position(|d| d == dimension)
            .ok_or_else(|| EcqError::UnknownDimension(dimension.to_owned()))
    }

    /// Policies in order of first appearance.
    pub fn policies(&self) -> Vec<Policy> {
        let mut out = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.policy) {
                out.push(r.policy);
            }
        }
        out
    }

    /// Defined scores of one policy on one dimension, in row order.
    pub fn values(&self, policy: Policy, dimension: &str) -> Result<Vec<f64>, EcqError> {
        let c = self.column(dimension)?;
        Ok(self
            .rows
            .iter()
            .filter(|r| r.policy == policy)
            .filter_map(|r| r.scores[c])
            .collect())
    }

    pub fn undefined_count(&self) -> usize {
        self.rows.iter().map(|r| r.scores.iter().filter(|s| s.is_none()).count()).sum()
    }

    /// Per-run scores as CSV: `policy,run_id,<dimensions...>`, empty cells
    /// for undefined scores.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("policy,run_id");
        for d in &self.dimensions {
            out.push(',');
            out.push_str(d);
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{}", r.policy, r.run_id));
            for s in &r.scores {
                out.push(',');
                if let Some(v) = s {
                    out.push_str(&format_sig(*v, 6));
                }
            }
            out.push('\n');
        }
        out
    }
}

impl ScoreMatrix {
    /// Read back the per-run table written by [`ScoreMatrix::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or("empty score table")?;
        let mut cols = header.split(',');
        if cols.next() != Some("policy") || cols.next() != Some("run_id") {
            return Err("score table must start with policy,run_id".into());
        }
        let dimensions: Vec<String> = cols.map(str::to_owned).collect();
        let mut rows = Vec::new();
        for (i, line) in lines {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != dimensions.len() + 2 {
                return Err(format!("line {}: expected {} fields", i + 1, dimensions.len() + 2));
            }
            let scores = f[2..]
                .iter()
                .map(|s| {
                    if s.is_empty() {
                        Ok(None)
                    } else {
                        s.parse().map(Some).map_err(|e| format!("line {}: {s:?}: {e}", i + 1))
                    }
                })
                .collect::<Result<_, _>>()?;
            rows.push(ScoreRow { policy: f[0].parse()?, run_id: f[1].to_owned(), scores });
        }
        Ok(Self { dimensions, rows })
    }
}

/// Score every protocol against the value model.
pub fn score_runs(protocols: &[RunProtocol], plan: &FloorPlan, model: &ValueModel) -> Result<ScoreMatrix, EcqError> {
    let rows = protocols
        .par_iter()
        .map(|p| {
            let table = derive_measures(p, plan)?;
            Ok(ScoreRow { policy: p.policy, run_id: p.run_id.clone(), scores: model.evaluate(&table)? })
        })
        .collect::<Result<Vec<_>, EcqError>>()?;
    let mut seen = std::collections::BTreeSet::new();
    for r in &rows {
        if !seen.insert((r.policy.code(), r.run_id.as_str())) {
            return Err(EcqError::DuplicateRow(r.run_id.clone()));
        }
    }
    Ok(ScoreMatrix { dimensions: model.names(), rows })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    pub config_digest: String,
    pub master_seed: u64,
    pub runs_per_policy: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcqResult {
    pub policies: Vec<Policy>,
    pub dimensions: Vec<String>,
    /// `stats[policy][dimension]`, same order as the two lists.
    pub stats: Vec<Vec<BoxStats>>,
    pub provenance: Provenance,
}

/// Per-(policy, dimension) box statistics.
pub fn summarize(matrix: &ScoreMatrix) -> Result<EcqResult, EcqError> {
    if matrix.rows.is_empty() {
        return Err(EcqError::EmptyMatrix);
    }
    let policies = matrix.policies();
    let stats = policies
        .iter()
        .map(|&p| {
            (0..matrix.dimensions.len())
                .map(|c| {
                    let col: Vec<Option<f64>> =
                        matrix.rows.iter().filter(|r| r.policy == p).map(|r| r.scores[c]).collect();
                    BoxStats::from_scores(&col)
                })
                .collect()
        })
        .collect();
    Ok(EcqResult { policies, dimensions: matrix.dimensions.clone(), stats, provenance: Provenance::default() })
}

impl EcqResult {
    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn dimension_index(&self, dimension: &str) -> Result<usize, EcqError> {
        self.dimensions
            .iter()
            .position(|d| d == dimension)
            .ok_or_else(|| EcqError::UnknownDimension(dimension.to_owned()))
    }

    pub fn stats_for(&self, policy: Policy, dimension: &str) -> Option<&BoxStats> {
        let d = self.dimension_index(dimension).ok()?;
        let p = self.policies.iter().position(|&q| q == policy)?;
        Some(&self.stats[p][d])
    }

    /// Mean violation per policy for one dimension.
    pub fn means(&self, dimension: &str) -> Result<Vec<f64>, EcqError> {
        let d = self.dimension_index(dimension)?;
        Ok(self.stats.iter().map(|row| row[d].mean).collect())
    }

    /// Restrict to a subset of policies, in the given order.
    pub fn subset(&self, policies: &[Policy]) -> EcqResult {
        let mut out = EcqResult {
            policies: Vec::new(),
            dimensions: self.dimensions.clone(),
            stats: Vec::new(),
            provenance: self.provenance.clone(),
        };
        for p in policies {
            if let Some(i) = self.policies.iter().position(|q| q == p) {
                out.policies.push(*p);
                out.stats.push(self.stats[i].clone());
            }
        }
        out
    }
}

/// Policies not dominated on the given dimensions (per-policy means, lower
/// is better), in declaration order.
pub fn pareto_front(result: &EcqResult, dims: &[&str]) -> Result<Vec<Policy>, EcqError> {
    let cols: Vec<Vec<f64>> = dims.iter().map(|d| result.means(d)).collect::<Result<_, _>>()?;
    let point = |i: usize| -> Vec<f64> { cols.iter().map(|c| c[i]).collect() };
    let n = result.policies.len();
    let front = (0..n)
        .filter(|&i| {
            let pi = point(i);
            !(0..n).any(|j| {
                let pj = point(j);
                j != i
                    && pj.iter().zip(&pi).all(|(a, b)| a <= b)
                    && pj.iter().zip(&pi).any(|(a, b)| a < b)
            })
        })
        .map(|i| result.policies[i])
        .collect();
    Ok(front)
}

pub const DEFAULT_CONFLICT_THRESHOLD: f64 = -0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ConflictReport {
    pub dim_a: String,
    pub dim_b: String,
    /// `None` when either per-policy series is constant.
    pub rho: Option<f64>,
    pub conflicting: bool,
    pub undefined: bool,
}

/// Spearman correlation of per-policy mean violations; a conflict is
/// `rho <= threshold`.
pub fn detect_conflict_with(
    result: &EcqResult,
    dim_a: &str,
    dim_b: &str,
    threshold: f64,
) -> Result<ConflictReport, EcqError> {
    if result.policies.len() < 3 {
        return Err(EcqError::TooFewPolicies(result.policies.len()));
    }
    let a = result.means(dim_a)?;
    let b = result.means(dim_b)?;
    let rho = if a.iter().chain(&b).any(|v| v.is_nan()) { None } else { spearman(&a, &b) };
    Ok(ConflictReport {
        dim_a: dim_a.to_owned(),
        dim_b: dim_b.to_owned(),
        rho,
        conflicting: rho.is_some_and(|r| r <= threshold),
        undefined: rho.is_none(),
    })
}

pub fn detect_conflict(result: &EcqResult, dim_a: &str, dim_b: &str) -> Result<ConflictReport, EcqError> {
    detect_conflict_with(result, dim_a, dim_b, DEFAULT_CONFLICT_THRESHOLD)
}

/// Stakeholder weights over value dimensions, normalized to sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueProfile {
    pub name: String,
    weights: BTreeMap<String, f64>,
}

impl ValueProfile {
    pub fn new<S: Into<String>>(name: &str, weights: impl IntoIterator<Item = (S, f64)>) -> Result<Self, EcqError> {
        let weights: BTreeMap<String, f64> = weights.into_iter().map(|(k, v)| (k.into(), v)).collect();
        if let Some((k, w)) = weights.iter().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
            return Err(EcqError::InvalidProfile(format!("weight for {k:?} is {w}")));
        }
        let total: f64 = weights.values().sum();
        if total <= 0.0 {
            return Err(EcqError::InvalidProfile("at least one weight must be positive".into()));
        }
        Ok(Self {
            name: name.to_owned(),
            weights: weights.into_iter().map(|(k, w)| (k, w / total)).collect(),
        })
    }

    pub fn weights(&self) -> &BTreeMap<String, f64> {
        &self.weights
    }

    pub fn positive_dimensions(&self) -> Vec<&str> {
        self.weights.iter().filter(|(_, w)| **w > 0.0).map(|(k, _)| k.as_str()).collect()
    }
}

/// Policy minimizing the weighted mean violation; ties go to the policy
/// declared first.
pub fn select_policy(result: &EcqResult, profile: &ValueProfile) -> Result<(Policy, f64), EcqError> {
    let mut columns = Vec::new();
    for (dim, w) in profile.weights() {
        columns.push((result.means(dim)?, *w));
    }
    let mut best: Option<(Policy, f64)> = None;
    for (i, &policy) in result.policies.iter().enumerate() {
        let score: f64 = columns
            .iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|(means, w)| w * means[i])
            .sum();
        if score.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, s)| score < s) {
            best = Some((policy, score));
        }
    }
    best.ok_or(EcqError::NoDefinedScore)
}

/// `%g`-style formatting with `sig` significant digits.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let m = trim_zeros(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_owned()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
