//! The smart-watch assistive device and the policy family it runs under.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::protocol::{AgentRef, Emitted, EventKind};

/// Assistance strategy for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    /// Nobody helps a disoriented patient.
    NoHelp,
    /// No device; patrolling nurses must find disoriented patients themselves.
    NurseOnly,
    /// Smart watch that calls a nurse after `n_help` failed prompts.
    Watch(u32),
}

impl Policy {
    /// The strategy set of the reference experiment, in plotting order.
    pub fn default_set() -> Vec<Policy> {
        let mut v = vec![Policy::NoHelp, Policy::NurseOnly];
        v.extend((0..=5).map(Policy::Watch));
        v
    }

    /// Stable ordinal used for seed derivation and canonical ordering.
    pub fn code(self) -> u64 {
        match self {
            Self::NoHelp => 0,
            Self::NurseOnly => 1,
            Self::Watch(n) => 2 + u64::from(n),
        }
    }

    pub fn slug(self) -> String {
        match self {
            Self::NoHelp => "nohelp".into(),
            Self::NurseOnly => "nurseonly".into(),
            Self::Watch(n) => format!("watch{n}"),
        }
    }

    /// Human-readable label for figures.
    pub fn label(self) -> String {
        match self {
            Self::NoHelp => "No Help".into(),
            Self::NurseOnly => "Nurse Only".into(),
            Self::Watch(n) => format!("N_help={n}"),
        }
    }

    /// Parse a comma-separated policy list. `Watch(a..b)` expands to an
    /// inclusive range.
    pub fn parse_list(text: &str) -> Result<Vec<Policy>, String> {
        let mut out = Vec::new();
        for item in split_top_level(text) {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            if let Some((lo, hi)) = item
                .strip_prefix("Watch(")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|r| r.split_once(".."))
            {
                let lo: u32 = lo.trim().parse().map_err(|_| format!("bad range in {item:?}"))?;
                let hi: u32 = hi.trim().parse().map_err(|_| format!("bad range in {item:?}"))?;
                if lo > hi {
                    return Err(format!("empty range in {item:?}"));
                }
                out.extend((lo..=hi).map(Policy::Watch));
            } else {
                out.push(item.parse()?);
            }
        }
        if out.is_empty() {
            return Err("empty policy list".into());
        }
        for (i, p) in out.iter().enumerate() {
            if out[..i].contains(p) {
                return Err(format!("policy {p} listed twice"));
            }
        }
        Ok(out)
    }
}

fn split_top_level(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&text[start..]);
    parts
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoHelp => f.write_str("NoHelp"),
            Self::NurseOnly => f.write_str("NurseOnly"),
            Self::Watch(n) => write!(f, "Watch({n})"),
        }
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "NoHelp" => return Ok(Self::NoHelp),
            "NurseOnly" => return Ok(Self::NurseOnly),
            _ => {}
        }
        s.strip_prefix("Watch(")
            .and_then(|r| r.strip_suffix(')'))
            .and_then(|n| n.trim().parse().ok())
            .map(Self::Watch)
            .ok_or_else(|| format!("unknown policy {s:?} (expected NoHelp, NurseOnly or Watch(n))"))
    }
}

impl Serialize for Policy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Policy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WatchPhase {
    Idle,
    Tracking,
    Escalated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WatchAction {
    None,
    /// A prompt was issued; `success` tells whether the wearer reoriented.
    Prompt { success: bool },
    CallNurse,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IatError {
    #[error("smart watch stepped under policy {0}")]
    PolicyMismatch(Policy),
    #[error("{name} must lie in [0, 1], got {value}")]
    InvalidProbability { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmartWatch {
    /// Wearer index; watch events are emitted as `w<wearer>`.
    pub wearer: u32,
    pub p_detect: f64,
    pub p_intervene: f64,
    pub n_help: u32,
    pub prompt_cooldown: u32,
    fail_count: u32,
    phase: WatchPhase,
    since_prompt: u32,
}

impl SmartWatch {
    pub fn new(
        wearer: u32,
        p_detect: f64,
        p_intervene: f64,
        n_help: u32,
        prompt_cooldown: u32,
    ) -> Result<Self, IatError> {
        for (name, value) in [("p_detect", p_detect), ("p_intervene", p_intervene)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(IatError::InvalidProbability { name, value });
            }
        }
        Ok(Self {
            wearer,
            p_detect,
            p_intervene,
            n_help,
            prompt_cooldown: prompt_cooldown.max(1),
            fail_count: 0,
            phase: WatchPhase::Idle,
            since_prompt: 0,
        })
    }

    pub fn phase(&self) -> WatchPhase {
        self.phase
    }

    pub fn fail_count(&self) -> u32 {
        self.fail_count
    }

    fn agent(&self) -> AgentRef {
        AgentRef::Watch(self.wearer)
    }

    /// Back to `Idle` with a clean failure count; parameters are untouched.
    pub fn reset_episode(&mut self) {
        self.phase = WatchPhase::Idle;
        self.fail_count = 0;
        self.since_prompt = 0;
    }

    /// One tick of sensing and acting.
    ///
    /// Detection is a Bernoulli trial per tick while the wearer is
    /// disoriented; once tracking, the watch either calls a nurse (after
    /// `n_help` failed prompts) or prompts, at most once per cooldown.
    pub fn watch_step<R: Rng + ?Sized>(
        &mut self,
        policy: Policy,
        wearer_disoriented: bool,
        rng: &mut R,
        out: &mut Vec<Emitted>,
    ) -> Result<WatchAction, IatError> {
        match policy {
            Policy::Watch(n) if n == self.n_help => {}
            other => return Err(IatError::PolicyMismatch(other)),
        }
        if !wearer_disoriented {
            self.reset_episode();
            return Ok(WatchAction::None);
        }
        match self.phase {
            WatchPhase::Escalated => return Ok(WatchAction::None),
            WatchPhase::Idle => {
                if rng.random::<f64>() >= self.p_detect {
                    return Ok(WatchAction::None);
                }
                self.phase = WatchPhase::Tracking;
                self.since_prompt = self.prompt_cooldown;
                out.push(Emitted::new(self.agent(), EventKind::Detected).with("patient", format!("p{}", self.wearer)));
            }
            WatchPhase::Tracking => self.since_prompt = self.since_prompt.saturating_add(1),
        }

        if self.fail_count >= self.n_help {
            self.phase = WatchPhase::Escalated;
            out.push(
                Emitted::new(self.agent(), EventKind::NurseCalled)
                    .with("patient", format!("p{}", self.wearer))
                    .with("failed_prompts", self.fail_count),
            );
            return Ok(WatchAction::CallNurse);
        }
        if self.since_prompt < self.prompt_cooldown {
            return Ok(WatchAction::None);
        }
        self.since_prompt = 0;
        let attempt = self.fail_count + 1;
        out.push(Emitted::new(self.agent(), EventKind::PromptIssued).with("attempt", attempt));
        let success = rng.random::<f64>() < self.p_intervene;
        if success {
            out.push(Emitted::new(self.agent(), EventKind::PromptSucceeded).with("attempt", attempt));
            self.reset_episode();
        } else {
            self.fail_count += 1;
            out.push(Emitted::new(self.agent(), EventKind::PromptFailed).with("attempt", attempt));
        }
        Ok(WatchAction::Prompt { success })
    }
}
