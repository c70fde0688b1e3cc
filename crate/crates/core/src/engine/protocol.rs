//! Run protocols: the timestamped event log of one simulation run.
//!
//! On disk a protocol is line-delimited JSON. The first line is a header
//! record, every event is one record with the fixed field order
//! `run_id, tick, agent, kind, payload`, and one `activity` record per nurse
//! closes the file with the nurse's per-tick activity, run-length encoded.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::iat::Policy;
use crate::world::Position;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    Moved,
    WrongTurn,
    Disoriented,
    Reoriented,
    Detected,
    PromptIssued,
    PromptSucceeded,
    PromptFailed,
    NurseCalled,
    NurseArrived,
    GuidanceStarted,
    GuidanceEnded,
    ReachedDestination,
    Timeout,
}

impl EventKind {
    pub const ALL: [EventKind; 14] = [
        Self::Moved,
        Self::WrongTurn,
        Self::Disoriented,
        Self::Reoriented,
        Self::Detected,
        Self::PromptIssued,
        Self::PromptSucceeded,
        Self::PromptFailed,
        Self::NurseCalled,
        Self::NurseArrived,
        Self::GuidanceStarted,
        Self::GuidanceEnded,
        Self::ReachedDestination,
        Self::Timeout,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Moved => "Moved",
            Self::WrongTurn => "WrongTurn",
            Self::Disoriented => "Disoriented",
            Self::Reoriented => "Reoriented",
            Self::Detected => "Detected",
            Self::PromptIssued => "PromptIssued",
            Self::PromptSucceeded => "PromptSucceeded",
            Self::PromptFailed => "PromptFailed",
            Self::NurseCalled => "NurseCalled",
            Self::NurseArrived => "NurseArrived",
            Self::GuidanceStarted => "GuidanceStarted",
            Self::GuidanceEnded => "GuidanceEnded",
            Self::ReachedDestination => "ReachedDestination",
            Self::Timeout => "Timeout",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Self::ReachedDestination | Self::Timeout)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown event kind {s:?}"))
    }
}

/// Who emitted an event. Serialized as `p<i>`, `n<i>`, `w<i>` or `sim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AgentRef {
    Patient(u32),
    Nurse(u32),
    /// The smart watch worn by patient `i`.
    Watch(u32),
    Sim,
}

impl fmt::Display for AgentRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Patient(i) => write!(f, "p{i}"),
            Self::Nurse(i) => write!(f, "n{i}"),
            Self::Watch(i) => write!(f, "w{i}"),
            Self::Sim => f.write_str("sim"),
        }
    }
}

impl FromStr for AgentRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "sim" {
            return Ok(Self::Sim);
        }
        let bad = || format!("malformed agent id {s:?}");
        let mut chars = s.chars();
        let tag = chars.next().ok_or_else(bad)?;
        let index: u32 = chars.as_str().parse().map_err(|_| bad())?;
        match tag {
            'p' => Ok(Self::Patient(index)),
            'n' => Ok(Self::Nurse(index)),
            'w' => Ok(Self::Watch(index)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for AgentRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AgentRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An event before the engine stamps it with a tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Emitted {
    pub agent: AgentRef,
    pub kind: EventKind,
    pub payload: Value,
}

impl Emitted {
    pub fn new(agent: AgentRef, kind: EventKind) -> Self {
        Self { agent, kind, payload: Value::Object(Map::new()) }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        if let Value::Object(map) = &mut self.payload {
            map.insert(key.to_owned(), value.into());
        }
        self
    }

    pub fn at(self, pos: Position) -> Self {
        self.with("x", pos.x).with("y", pos.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub tick: u32,
    pub agent: AgentRef,
    pub kind: EventKind,
    pub payload: Value,
}

impl Event {
    pub fn stamp(tick: u32, e: Emitted) -> Self {
        Self { tick, agent: e.agent, kind: e.kind, payload: e.payload }
    }

    fn payload_patient(&self) -> Option<u32> {
        let s = self.payload.get("patient")?.as_str()?;
        match s.parse().ok()? {
            AgentRef::Patient(i) => Some(i),
            _ => None,
        }
    }

    fn payload_position(&self) -> Option<Position> {
        let x = self.payload.get("x")?.as_u64()?;
        let y = self.payload.get("y")?.as_u64()?;
        Some(Position::new(x as usize, y as usize))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    ReachedDestination,
    Timeout,
}

/// What a nurse spent one tick on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NurseActivity {
    Other,
    Patrolling,
    Responding,
    Guiding,
}

impl NurseActivity {
    pub fn code(self) -> char {
        match self {
            Self::Other => 'O',
            Self::Patrolling => 'P',
            Self::Responding => 'R',
            Self::Guiding => 'G',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            'O' => Some(Self::Other),
            'P' => Some(Self::Patrolling),
            'R' => Some(Self::Responding),
            'G' => Some(Self::Guiding),
            _ => None,
        }
    }

    /// Responding and guiding both keep the nurse from other care.
    pub fn is_guidance(self) -> bool {
        matches!(self, Self::Responding | Self::Guiding)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientInfo {
    pub id: AgentRef,
    pub start: Position,
    pub destination: Position,
    pub dis_level: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NurseTrack {
    pub id: AgentRef,
    /// Activity for ticks `1..=terminal_tick`, index 0 is tick 1.
    pub activity: Vec<NurseActivity>,
}

/// One point of a patient trajectory: where the patient was at the end of a
/// tick, and whether they were oriented.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectoryPoint {
    pub tick: u32,
    pub position: Position,
    pub oriented: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunProtocol {
    pub run_id: String,
    pub policy: Policy,
    pub seed: u64,
    pub t_max: u32,
    pub tick_seconds: f64,
    pub cell_size: f64,
    pub patients: Vec<PatientInfo>,
    pub events: Vec<Event>,
    pub outcome: Outcome,
    pub nurses: Vec<NurseTrack>,
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("protocol has no header record")]
    MissingHeader,
    #[error("invalid protocol: {0}")]
    Invalid(String),
}

#[derive(Serialize, Deserialize)]
struct HeaderRecord {
    record: String,
    run_id: String,
    policy: Policy,
    seed: u64,
    outcome: Outcome,
    t_max: u32,
    tick_seconds: f64,
    cell_size: f64,
    patients: Vec<PatientInfo>,
}

#[derive(Serialize)]
struct EventRecord<'a> {
    run_id: &'a str,
    tick: u32,
    agent: AgentRef,
    kind: EventKind,
    payload: &'a Value,
}

#[derive(Deserialize)]
struct EventRecordOwned {
    tick: u32,
    agent: AgentRef,
    kind: EventKind,
    payload: Value,
}

#[derive(Serialize, Deserialize)]
struct ActivityRecord {
    record: String,
    run_id: String,
    agent: AgentRef,
    ticks: String,
}

fn encode_activity(activity: &[NurseActivity]) -> String {
    let mut out = String::new();
    let mut iter = activity.iter().peekable();
    while let Some(&a) = iter.next() {
        let mut run = 1;
        while iter.peek() == Some(&&a) {
            iter.next();
            run += 1;
        }
        if !out.is_empty() {
            out.push(',');
        }
        out.push(a.code());
        out.push_str(&run.to_string());
    }
    out
}

fn decode_activity(text: &str) -> Option<Vec<NurseActivity>> {
    let mut out = Vec::new();
    if text.is_empty() {
        return Some(out);
    }
    for chunk in text.split(',') {
        let mut chars = chunk.chars();
        let a = NurseActivity::from_code(chars.next()?)?;
        let run: usize = chars.as_str().parse().ok()?;
        out.extend(std::iter::repeat_n(a, run));
    }
    Some(out)
}

impl RunProtocol {
    pub fn terminal_tick(&self) -> u32 {
        self.events.last().map_or(0, |e| e.tick)
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// Per-tick trajectory for a patient, rebuilt from `Moved` events and
    /// orientation changes. Point `i` is the state at the end of tick `i`.
    pub fn trajectory(&self, patient: AgentRef) -> Option<Vec<TrajectoryPoint>> {
        let info = self.patients.iter().find(|p| p.id == patient)?;
        let end = self.terminal_tick();
        let mut points = Vec::with_capacity(end as usize + 1);
        let mut position = info.start;
        let mut oriented = true;
        let mut events = self.events.iter().filter(|e| e.agent == patient).peekable();
        for tick in 0..=end {
            while let Some(e) = events.next_if(|e| e.tick == tick) {
                match e.kind {
                    EventKind::Moved => {
                        if let Some(p) = e.payload_position() {
                            position = p;
                        }
                    }
                    EventKind::Disoriented => oriented = false,
                    EventKind::Reoriented => oriented = true,
                    _ => {}
                }
            }
            points.push(TrajectoryPoint { tick, position, oriented });
        }
        Some(points)
    }

    /// Serialize to line-delimited JSON. Byte-identical for identical input.
    pub fn to_log(&self) -> String {
        let mut out = String::new();
        let header = HeaderRecord {
            record: "header".into(),
            run_id: self.run_id.clone(),
            policy: self.policy,
            seed: self.seed,
            outcome: self.outcome,
            t_max: self.t_max,
            tick_seconds: self.tick_seconds,
            cell_size: self.cell_size,
            patients: self.patients.clone(),
        };
        out.push_str(&serde_json::to_string(&header).expect("header serializes"));
        out.push('\n');
        for e in &self.events {
            let rec = EventRecord {
                run_id: &self.run_id,
                tick: e.tick,
                agent: e.agent,
                kind: e.kind,
                payload: &e.payload,
            };
            out.push_str(&serde_json::to_string(&rec).expect("event serializes"));
            out.push('\n');
        }
        for n in &self.nurses {
            let rec = ActivityRecord {
                record: "activity".into(),
                run_id: self.run_id.clone(),
                agent: n.id,
                ticks: encode_activity(&n.activity),
            };
            out.push_str(&serde_json::to_string(&rec).expect("activity serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_log(text: &str) -> Result<Self, ProtocolError> {
        let mut header: Option<HeaderRecord> = None;
        let mut events = Vec::new();
        let mut nurses = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let perr = |e: serde_json::Error| ProtocolError::Parse { line: line_no, message: e.to_string() };
            let value: Value = serde_json::from_str(line).map_err(perr)?;
            match value.get("record").and_then(Value::as_str) {
                Some("header") => header = Some(serde_json::from_value(value).map_err(perr)?),
                Some("activity") => {
                    let rec: ActivityRecord = serde_json::from_value(value).map_err(perr)?;
                    let activity = decode_activity(&rec.ticks).ok_or_else(|| ProtocolError::Parse {
                        line: line_no,
                        message: format!("malformed activity string {:?}", rec.ticks),
                    })?;
                    nurses.push(NurseTrack { id: rec.agent, activity });
                }
                Some(other) => {
                    return Err(ProtocolError::Parse {
                        line: line_no,
                        message: format!("unknown record type {other:?}"),
                    })
                }
                None => {
                    let rec: EventRecordOwned = serde_json::from_value(value).map_err(perr)?;
                    events.push(Event {
                        tick: rec.tick,
                        agent: rec.agent,
                        kind: rec.kind,
                        payload: rec.payload,
                    });
                }
            }
        }
        let h = header.ok_or(ProtocolError::MissingHeader)?;
        Ok(Self {
            run_id: h.run_id,
            policy: h.policy,
            seed: h.seed,
            t_max: h.t_max,
            tick_seconds: h.tick_seconds,
            cell_size: h.cell_size,
            patients: h.patients,
            events,
            outcome: h.outcome,
            nurses,
        })
    }

    /// Check the event grammar. Returns the first violation found.
    pub fn validate(&self) -> Result<(), ProtocolError> {
        validate(self).map_err(ProtocolError::Invalid)
    }
}

#[derive(Default)]
struct PatientState {
    disoriented: bool,
    arrived: bool,
    guided_by: Option<u32>,
}

#[derive(Default)]
struct WatchState {
    tracking: bool,
    escalated: bool,
    open_prompt: bool,
    failures: u32,
}

fn validate(p: &RunProtocol) -> Result<(), String> {
    let last = p.events.last().ok_or("protocol has no events")?;
    if !last.kind.is_terminal() {
        return Err(format!("last event is {}, not a terminal event", last.kind));
    }
    if last.tick > p.t_max {
        return Err(format!("terminal tick {} exceeds t_max {}", last.tick, p.t_max));
    }
    let expected_outcome = match last.kind {
        EventKind::Timeout => Outcome::Timeout,
        _ => Outcome::ReachedDestination,
    };
    if p.outcome != expected_outcome {
        return Err(format!("outcome {:?} disagrees with terminal event {}", p.outcome, last.kind));
    }
    let end = last.tick;
    for n in &p.nurses {
        if n.activity.len() != end as usize {
            return Err(format!("nurse {} has {} activity ticks, expected {end}", n.id, n.activity.len()));
        }
    }

    let patient_ids: BTreeSet<u32> = p
        .patients
        .iter()
        .filter_map(|i| match i.id {
            AgentRef::Patient(k) => Some(k),
            _ => None,
        })
        .collect();
    let mut patients: BTreeMap<u32, PatientState> =
        patient_ids.iter().map(|&k| (k, PatientState::default())).collect();
    let mut watches: BTreeMap<u32, WatchState> = BTreeMap::new();
    let mut responding: BTreeMap<u32, u32> = BTreeMap::new();
    let mut guiding: BTreeMap<u32, u32> = BTreeMap::new();
    let mut pending_calls: BTreeMap<u32, u32> = BTreeMap::new();
    let watch_n = match p.policy {
        Policy::Watch(n) => Some(n),
        _ => None,
    };

    let mut prev_tick = 0;
    let mut pending_wrong_turn: Option<(u32, u32)> = None;
    for (idx, e) in p.events.iter().enumerate() {
        let here = || format!("event {idx} ({} {} at tick {})", e.agent, e.kind, e.tick);
        if e.tick < prev_tick {
            return Err(format!("{}: ticks decrease", here()));
        }
        prev_tick = e.tick;
        if e.kind.is_terminal() && idx + 1 != p.events.len() && e.kind == EventKind::Timeout {
            return Err(format!("{}: Timeout before end of protocol", here()));
        }
        if let Some((pid, tick)) = pending_wrong_turn.take() {
            let ok = e.kind == EventKind::Disoriented && e.agent == AgentRef::Patient(pid) && e.tick == tick;
            if !ok {
                return Err(format!("{}: WrongTurn not followed by Disoriented", here()));
            }
        }
        match (p.policy, e.kind) {
            (Policy::NoHelp, EventKind::Detected | EventKind::NurseCalled)
            | (Policy::NoHelp | Policy::NurseOnly, EventKind::PromptIssued)
            | (Policy::NoHelp | Policy::NurseOnly, EventKind::PromptSucceeded)
            | (Policy::NoHelp | Policy::NurseOnly, EventKind::PromptFailed)
            | (Policy::NurseOnly, EventKind::NurseCalled) => {
                return Err(format!("{}: not allowed under {}", here(), p.policy));
            }
            _ => {}
        }
        let patient_of_event = match e.agent {
            AgentRef::Patient(k) | AgentRef::Watch(k) => Some(k),
            AgentRef::Nurse(_) => e.payload_patient(),
            AgentRef::Sim => None,
        };
        if let Some(k) = patient_of_event {
            if !patients.contains_key(&k) {
                return Err(format!("{}: unknown patient p{k}", here()));
            }
            if patients[&k].arrived && e.kind != EventKind::Timeout {
                return Err(format!("{}: event after p{k} reached its destination", here()));
            }
        }
        match e.kind {
            EventKind::Moved => {
                if e.payload_position().is_none() {
                    return Err(format!("{}: Moved without position", here()));
                }
            }
            EventKind::WrongTurn => {
                let k = patient_of_event.ok_or_else(|| format!("{}: WrongTurn by non-patient", here()))?;
                if patients[&k].disoriented {
                    return Err(format!("{}: WrongTurn while already disoriented", here()));
                }
                pending_wrong_turn = Some((k, e.tick));
            }
            EventKind::Disoriented => {
                let k = patient_of_event.ok_or_else(|| format!("{}: Disoriented by non-patient", here()))?;
                let st = patients.get_mut(&k).expect("checked");
                if st.disoriented {
                    return Err(format!("{}: already disoriented", here()));
                }
                st.disoriented = true;
            }
            EventKind::Reoriented => {
                let k = patient_of_event.ok_or_else(|| format!("{}: Reoriented by non-patient", here()))?;
                let st = patients.get_mut(&k).expect("checked");
                if !st.disoriented {
                    return Err(format!("{}: Reoriented while oriented", here()));
                }
                st.disoriented = false;
                let w = watches.entry(k).or_default();
                *w = WatchState::default();
            }
            EventKind::Detected => {
                let k = patient_of_event.ok_or_else(|| format!("{}: Detected without patient", here()))?;
                if !patients[&k].disoriented {
                    return Err(format!("{}: detected an oriented patient", here()));
                }
                if let AgentRef::Watch(_) = e.agent {
                    let w = watches.entry(k).or_default();
                    if w.tracking || w.escalated {
                        return Err(format!("{}: detected twice in one episode", here()));
                    }
                    w.tracking = true;
                }
            }
            EventKind::PromptIssued => {
                let k = patient_of_event.ok_or_else(|| format!("{}: prompt without wearer", here()))?;
                let w = watches.entry(k).or_default();
                if !w.tracking || w.escalated || w.open_prompt {
                    return Err(format!("{}: prompt outside a tracked episode", here()));
                }
                w.open_prompt = true;
            }
            EventKind::PromptSucceeded | EventKind::PromptFailed => {
                let k = patient_of_event.ok_or_else(|| format!("{}: prompt outcome without wearer", here()))?;
                let w = watches.entry(k).or_default();
                if !w.open_prompt {
                    return Err(format!("{}: prompt outcome without PromptIssued", here()));
                }
                w.open_prompt = false;
                if e.kind == EventKind::PromptFailed {
                    w.failures += 1;
                }
            }
            EventKind::NurseCalled => {
                let k = patient_of_event.ok_or_else(|| format!("{}: call without patient", here()))?;
                let w = watches.entry(k).or_default();
                if !w.tracking || w.escalated || w.open_prompt {
                    return Err(format!("{}: call outside a tracked episode", here()));
                }
                if let Some(n) = watch_n {
                    if w.failures != n {
                        return Err(format!(
                            "{}: call after {} failed prompts, policy waits for {n}",
                            here(),
                            w.failures
                        ));
                    }
                }
                w.escalated = true;
                *pending_calls.entry(k).or_default() += 1;
            }
            EventKind::NurseArrived => {
                let AgentRef::Nurse(n) = e.agent else {
                    return Err(format!("{}: arrival by non-nurse", here()));
                };
                let k = patient_of_event.ok_or_else(|| format!("{}: arrival without patient", here()))?;
                let calls = pending_calls.entry(k).or_default();
                if *calls == 0 {
                    return Err(format!("{}: arrival without a call", here()));
                }
                *calls -= 1;
                responding.insert(n, k);
            }
            EventKind::GuidanceStarted => {
                let AgentRef::Nurse(n) = e.agent else {
                    return Err(format!("{}: guidance by non-nurse", here()));
                };
                let k = patient_of_event.ok_or_else(|| format!("{}: guidance without patient", here()))?;
                if guiding.contains_key(&n) {
                    return Err(format!("{}: nurse already guiding", here()));
                }
                let st = patients.get_mut(&k).expect("checked");
                if st.guided_by.is_some() {
                    return Err(format!("{}: patient already guided", here()));
                }
                st.guided_by = Some(n);
                responding.remove(&n);
                guiding.insert(n, k);
            }
            EventKind::GuidanceEnded => {
                let AgentRef::Nurse(n) = e.agent else {
                    return Err(format!("{}: guidance by non-nurse", here()));
                };
                let k = patient_of_event.ok_or_else(|| format!("{}: guidance without patient", here()))?;
                if guiding.remove(&n) != Some(k) {
                    return Err(format!("{}: GuidanceEnded without GuidanceStarted", here()));
                }
                patients.get_mut(&k).expect("checked").guided_by = None;
                watches.remove(&k);
            }
            EventKind::ReachedDestination => {
                let k = patient_of_event.ok_or_else(|| format!("{}: arrival by non-patient", here()))?;
                let st = patients.get_mut(&k).expect("checked");
                if st.guided_by.is_some() {
                    return Err(format!("{}: reached destination while still guided", here()));
                }
                st.arrived = true;
                let all_done = patients.values().all(|s| s.arrived);
                let is_last = idx + 1 == p.events.len();
                if all_done != is_last {
                    return Err(format!("{}: run must end exactly when every patient has arrived", here()));
                }
            }
            EventKind::Timeout => {
                if e.agent != AgentRef::Sim {
                    return Err(format!("{}: Timeout must be emitted by sim", here()));
                }
                if e.tick != p.t_max {
                    return Err(format!("{}: Timeout before t_max {}", here(), p.t_max));
                }
            }
        }
    }
    if let Some(w) = watches.values().find(|w| w.open_prompt) {
        let _ = w;
        return Err("prompt left without outcome".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn ev(tick: u32, agent: AgentRef, kind: EventKind) -> Event {
        Event { tick, agent, kind, payload: json!({}) }
    }

    fn moved(tick: u32, x: usize) -> Event {
        Event { tick, agent: AgentRef::Patient(0), kind: EventKind::Moved, payload: json!({"x": x, "y": 0}) }
    }

    fn corridor_protocol() -> RunProtocol {
        let mut events: Vec<Event> = (1..=3).map(|t| moved(t, t as usize)).collect();
        events.push(ev(3, AgentRef::Patient(0), EventKind::ReachedDestination));
        RunProtocol {
            run_id: "nohelp-0000".into(),
            policy: Policy::NoHelp,
            seed: 7,
            t_max: 10,
            tick_seconds: 1.0,
            cell_size: 1.0,
            patients: vec![PatientInfo {
                id: AgentRef::Patient(0),
                start: Position::new(0, 0),
                destination: Position::new(3, 0),
                dis_level: 0.0,
            }],
            events,
            outcome: Outcome::ReachedDestination,
            nurses: vec![NurseTrack { id: AgentRef::Nurse(0), activity: vec![NurseActivity::Other; 3] }],
        }
    }

    #[test]
    fn agent_ref_round_trip() {
        for a in [AgentRef::Patient(3), AgentRef::Nurse(0), AgentRef::Watch(12), AgentRef::Sim] {
            assert_eq!(a.to_string().parse::<AgentRef>().unwrap(), a);
        }
        assert!("x1".parse::<AgentRef>().is_err());
        assert!("p".parse::<AgentRef>().is_err());
    }

    #[test]
    fn event_kind_names_are_stable() {
        for k in EventKind::ALL {
            assert_eq!(k.name().parse::<EventKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
    }

    #[test]
    fn log_round_trip_and_field_order() {
        let p = corridor_protocol();
        let log = p.to_log();
        let second = log.lines().nth(1).unwrap();
        assert_eq!(
            second,
            r#"{"run_id":"nohelp-0000","tick":1,"agent":"p0","kind":"Moved","payload":{"x":1,"y":0}}"#
        );
        assert_eq!(log.lines().last().unwrap(), r#"{"record":"activity","run_id":"nohelp-0000","agent":"n0","ticks":"O3"}"#);
        let back = RunProtocol::from_log(&log).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn activity_codec() {
        use NurseActivity::*;
        let a = vec![Other, Other, Responding, Guiding, Guiding, Other];
        assert_eq!(encode_activity(&a), "O2,R1,G2,O1");
        assert_eq!(decode_activity("O2,R1,G2,O1").unwrap(), a);
        assert_eq!(decode_activity("").unwrap(), vec![]);
        assert!(decode_activity("X1").is_none());
    }

    #[test]
    fn trajectory_rebuild() {
        let p = corridor_protocol();
        let t = p.trajectory(AgentRef::Patient(0)).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t[0].position, Position::new(0, 0));
        assert_eq!(t[3].position, Position::new(3, 0));
        assert!(t.iter().all(|pt| pt.oriented));
    }

    #[test]
    fn validator_accepts_simple_run() {
        corridor_protocol().validate().unwrap();
    }

    #[test]
    fn validator_rejections() {
        let mut p = corridor_protocol();
        p.events.pop();
        assert!(p.validate().is_err(), "missing terminal");

        let mut p = corridor_protocol();
        p.events.swap(0, 1);
        assert!(p.validate().is_err(), "decreasing ticks");

        let mut p = corridor_protocol();
        p.events.insert(0, ev(1, AgentRef::Watch(0), EventKind::PromptIssued));
        assert!(p.validate().is_err(), "prompt under NoHelp");

        let mut p = corridor_protocol();
        p.policy = Policy::Watch(2);
        p.events.insert(0, ev(1, AgentRef::Patient(0), EventKind::Disoriented));
        p.events.insert(1, ev(1, AgentRef::Watch(0), EventKind::Detected));
        p.events.insert(2, ev(1, AgentRef::Watch(0), EventKind::NurseCalled));
        let err = p.validate().unwrap_err().to_string();
        assert!(err.contains("0 failed prompts"), "{err}");

        let mut p = corridor_protocol();
        p.outcome = Outcome::Timeout;
        assert!(p.validate().is_err(), "outcome mismatch");

        let mut p = corridor_protocol();
        p.nurses[0].activity.pop();
        assert!(p.validate().is_err(), "short activity track");

        let mut p = corridor_protocol();
        p.events.insert(0, ev(1, AgentRef::Patient(0), EventKind::WrongTurn));
        assert!(p.validate().is_err(), "WrongTurn without Disoriented");
    }
}
