//! Built-in per-run measures derived from a run protocol.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::engine::protocol::{AgentRef, Event, EventKind, RunProtocol};
use crate::world::FloorPlan;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("unknown measure {0:?}")]
    UnknownMeasure(String),
    #[error("malformed protocol: {0}")]
    MalformedProtocol(String),
}

/// Patient-level measures. Unsuffixed names sum over all patients; the
/// `<name>.p<i>` form reads a single patient.
pub const PATIENT_MEASURES: [&str; 5] =
    ["time_disoriented", "time_disoriented_unguided", "time_guided", "distance_traveled", "straight_line"];

pub const RUN_MEASURES: [&str; 4] = ["total_time", "nurse_time_guidance", "nurse_time_other", "nurse_time_total"];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasureTable {
    values: BTreeMap<String, f64>,
}

impl MeasureTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: f64) {
        self.values.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Result<f64, MeasureError> {
        self.values
            .get(name)
            .copied()
            .ok_or_else(|| MeasureError::UnknownMeasure(name.to_owned()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.values.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Whether `name` is a measure every derived table provides, given the
/// number of patients in the run.
pub fn is_builtin(name: &str) -> bool {
    if RUN_MEASURES.contains(&name) || PATIENT_MEASURES.contains(&name) {
        return true;
    }
    if let Some(kind) = name.strip_prefix("count(").and_then(|r| r.strip_suffix(')')) {
        return kind.parse::<EventKind>().is_ok();
    }
    if let Some((base, who)) = name.split_once('.') {
        return PATIENT_MEASURES.contains(&base) && matches!(who.parse(), Ok(AgentRef::Patient(_)));
    }
    false
}

/// Half-open tick intervals, merged.
fn union_length(mut intervals: Vec<(u32, u32)>) -> u32 {
    intervals.sort_unstable();
    let mut total = 0;
    let mut current: Option<(u32, u32)> = None;
    for (s, e) in intervals.into_iter().filter(|(s, e)| e > s) {
        match current {
            Some((cs, ce)) if s <= ce => current = Some((cs, ce.max(e))),
            Some((cs, ce)) => {
                total += ce - cs;
                current = Some((s, e));
            }
            None => current = Some((s, e)),
        }
    }
    if let Some((cs, ce)) = current {
        total += ce - cs;
    }
    total
}

fn overlap(a: &[(u32, u32)], b: &[(u32, u32)]) -> u32 {
    let mut pieces = Vec::new();
    for &(s1, e1) in a {
        for &(s2, e2) in b {
            let s = s1.max(s2);
            let e = e1.min(e2);
            if e > s {
                pieces.push((s, e));
            }
        }
    }
    union_length(pieces)
}

fn event_patient(e: &Event) -> Option<AgentRef> {
    match e.agent {
        AgentRef::Patient(_) => Some(e.agent),
        AgentRef::Watch(i) => Some(AgentRef::Patient(i)),
        _ => e.payload.get("patient")?.as_str()?.parse().ok(),
    }
}

/// Compute every built-in measure for one protocol.
///
/// Disorientation intervals run from `Disoriented` to `Reoriented`,
/// guidance intervals from `GuidanceStarted` to `GuidanceEnded`; both are
/// half-open in ticks and close at the patient's arrival or the run's end.
pub fn derive_measures(protocol: &RunProtocol, plan: &FloorPlan) -> Result<MeasureTable, MeasureError> {
    protocol
        .validate()
        .map_err(|e| MeasureError::MalformedProtocol(e.to_string()))?;
    let end = protocol.terminal_tick();
    let cell_size = plan.cell_size();
    let mut table = MeasureTable::new();
    table.insert("total_time", f64::from(end));

    let mut sums: BTreeMap<&str, f64> = PATIENT_MEASURES.iter().map(|&m| (m, 0.0)).collect();
    for info in &protocol.patients {
        let mut disoriented = Vec::new();
        let mut guided = Vec::new();
        let mut dis_since = None;
        let mut guide_since = None;
        let mut closed_at = end;
        let mut moves = 0u32;
        for e in protocol.events.iter().filter(|e| event_patient(e) == Some(info.id)) {
            match e.kind {
                EventKind::Moved if e.agent == info.id => moves += 1,
                EventKind::Disoriented => dis_since = Some(e.tick),
                EventKind::Reoriented => {
                    if let Some(s) = dis_since.take() {
                        disoriented.push((s, e.tick));
                    }
                }
                EventKind::GuidanceStarted => guide_since = Some(e.tick),
                EventKind::GuidanceEnded => {
                    if let Some(s) = guide_since.take() {
                        guided.push((s, e.tick));
                    }
                }
                EventKind::ReachedDestination => closed_at = e.tick,
                _ => {}
            }
        }
        if let Some(s) = dis_since {
            disoriented.push((s, closed_at));
        }
        if let Some(s) = guide_since {
            guided.push((s, closed_at));
        }
        let time_disoriented = union_length(disoriented.clone());
        let time_guided = union_length(guided.clone());
        let unguided = time_disoriented - overlap(&disoriented, &guided);
        let straight = plan
            .straight_line_distance(info.start, info.destination)
            .map_err(|e| MeasureError::MalformedProtocol(e.to_string()))?;
        let values = [
            ("time_disoriented", f64::from(time_disoriented)),
            ("time_disoriented_unguided", f64::from(unguided)),
            ("time_guided", f64::from(time_guided)),
            ("distance_traveled", f64::from(moves) * cell_size),
            ("straight_line", straight),
        ];
        for (name, v) in values {
            table.insert(format!("{name}.{}", info.id), v);
            *sums.get_mut(name).expect("known measure") += v;
        }
    }
    for (name, v) in sums {
        table.insert(name, v);
    }

    let guidance: usize = protocol
        .nurses
        .iter()
        .map(|n| n.activity.iter().filter(|a| a.is_guidance()).count())
        .sum();
    let total: usize = protocol.nurses.iter().map(|n| n.activity.len()).sum();
    table.insert("nurse_time_guidance", guidance as f64);
    table.insert("nurse_time_other", (total - guidance) as f64);
    table.insert("nurse_time_total", total as f64);

    for kind in EventKind::ALL {
        table.insert(format!("count({kind})"), protocol.count(kind) as f64);
    }
    Ok(table)
}
