//! Simulation configuration, read from a JSON document.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EngineError;
use crate::iat::Policy;
use crate::world::{FloorPlan, Position};

/// A cell given either by destination letter or by `[x, y]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Place {
    Named(String),
    Cell([usize; 2]),
}

impl Place {
    pub fn resolve(&self, plan: &FloorPlan) -> Result<Position, EngineError> {
        let pos = match self {
            Place::Named(name) => plan
                .destination(name)
                .ok_or_else(|| EngineError::InvalidConfig(format!("unknown destination {name:?}")))?,
            Place::Cell([x, y]) => Position::new(*x, *y),
        };
        if !plan.is_walkable(pos) {
            return Err(EngineError::InvalidConfig(format!("{pos} is not a walkable cell")));
        }
        Ok(pos)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatientConfig {
    pub start: Place,
    /// Name of the destination marker (a letter on the plan).
    pub destination: String,
    #[serde(default = "defaults::dis_level")]
    pub dis_level: f64,
    #[serde(default)]
    pub p_self: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NurseConfig {
    pub station: Place,
    #[serde(default = "defaults::sight_radius")]
    pub sight_radius: u32,
    #[serde(default)]
    pub patrol_route: Vec<Place>,
    /// Cells per tick when walking alone to a patient.
    #[serde(default = "defaults::nurse_speed")]
    pub speed: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WatchConfig {
    #[serde(default = "defaults::p_detect")]
    pub p_detect: f64,
    #[serde(default = "defaults::p_intervene")]
    pub p_intervene: f64,
    #[serde(default = "defaults::prompt_cooldown")]
    pub prompt_cooldown: u32,
}

impl Default for WatchConfig {
    fn default() -> Self {
        Self {
            p_detect: defaults::p_detect(),
            p_intervene: defaults::p_intervene(),
            prompt_cooldown: defaults::prompt_cooldown(),
        }
    }
}

/// Calibration defaults. None of these are published reference values.
pub mod defaults {
    pub fn dis_level() -> f64 {
        0.2
    }
    pub fn sight_radius() -> u32 {
        3
    }
    pub fn nurse_speed() -> u32 {
        1
    }
    pub fn p_detect() -> f64 {
        0.8
    }
    pub fn p_intervene() -> f64 {
        0.5
    }
    pub fn prompt_cooldown() -> u32 {
        1
    }
    pub fn t_max() -> u32 {
        2000
    }
    pub fn tick_seconds() -> f64 {
        1.0
    }
    pub fn cell_size() -> f64 {
        1.0
    }
    pub fn policy() -> crate::iat::Policy {
        crate::iat::Policy::NoHelp
    }
}

/// The on-disk form. `plan` is a path relative to the config file, or the
/// map itself when it contains a newline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub plan: String,
    #[serde(default = "defaults::cell_size")]
    pub cell_size: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patient: Option<PatientConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub patients: Vec<PatientConfig>,
    #[serde(default)]
    pub nurses: Vec<NurseConfig>,
    #[serde(default)]
    pub watch: WatchConfig,
    #[serde(default = "defaults::policy")]
    pub policy: Policy,
    #[serde(default = "defaults::t_max")]
    pub t_max: u32,
    #[serde(default = "defaults::tick_seconds")]
    pub tick_seconds: f64,
    #[serde(default)]
    pub speed_jitter: Option<f64>,
}

/// A validated configuration with its floor plan loaded.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub plan: Arc<FloorPlan>,
    pub patients: Vec<PatientConfig>,
    pub nurses: Vec<NurseConfig>,
    pub watch: WatchConfig,
    pub policy: Policy,
    pub t_max: u32,
    pub tick_seconds: f64,
    pub speed_jitter: Option<f64>,
    /// Self-contained form (plan inlined) used for digests and copies.
    source: ConfigFile,
}

fn check_probability(name: &str, v: f64) -> Result<(), EngineError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(EngineError::InvalidConfig(format!("{name} must lie in [0, 1], got {v}")))
    }
}

impl SimConfig {
    pub fn from_path(path: &Path) -> Result<Self, EngineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EngineError::InvalidConfig(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_json(&text, base)
    }

    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, EngineError> {
        let file: ConfigFile =
            serde_json::from_str(text).map_err(|e| EngineError::InvalidConfig(format!("config: {e}")))?;
        Self::from_file(file, base_dir)
    }

    pub fn from_file(mut file: ConfigFile, base_dir: &Path) -> Result<Self, EngineError> {
        if !file.plan.contains('\n') {
            let path = base_dir.join(&file.plan);
            file.plan = std::fs::read_to_string(&path)
                .map_err(|e| EngineError::InvalidConfig(format!("plan {}: {e}", path.display())))?;
        }
        let plan = FloorPlan::parse(&file.plan, file.cell_size)
            .map_err(|e| EngineError::InvalidConfig(format!("plan: {e}")))?;
        let mut patients = file.patients.clone();
        if let Some(p) = file.patient.take() {
            patients.insert(0, p);
            file.patients = patients.clone();
        }
        Self::build(plan, patients, file)
    }

    /// Build directly from an already-loaded plan.
    pub fn new(plan: FloorPlan, patient: PatientConfig, nurses: Vec<NurseConfig>, policy: Policy) -> Result<Self, EngineError> {
        let file = ConfigFile {
            plan: plan.to_ascii(),
            cell_size: plan.cell_size(),
            patient: None,
            patients: vec![patient.clone()],
            nurses,
            watch: WatchConfig::default(),
            policy,
            t_max: defaults::t_max(),
            tick_seconds: defaults::tick_seconds(),
            speed_jitter: None,
        };
        Self::build(plan, vec![patient], file)
    }

    fn build(plan: FloorPlan, patients: Vec<PatientConfig>, file: ConfigFile) -> Result<Self, EngineError> {
        let cfg = Self {
            plan: Arc::new(plan),
            patients,
            nurses: file.nurses.clone(),
            watch: file.watch.clone(),
            policy: file.policy,
            t_max: file.t_max,
            tick_seconds: file.tick_seconds,
            speed_jitter: file.speed_jitter,
            source: file,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Re-check every invariant; call after mutating public fields.
    pub fn validate(&self) -> Result<(), EngineError> {
        let invalid = |m: String| Err(EngineError::InvalidConfig(m));
        if self.t_max < 1 {
            return invalid("t_max must be at least 1".into());
        }
        if !(self.tick_seconds.is_finite() && self.tick_seconds > 0.0) {
            return invalid(format!("tick_seconds must be positive, got {}", self.tick_seconds));
        }
        if let Some(sd) = self.speed_jitter {
            if !(sd.is_finite() && sd >= 0.0) {
                return invalid(format!("speed_jitter must be a non-negative number, got {sd}"));
            }
        }
        if self.patients.is_empty() {
            return invalid("at least one patient is required".into());
        }
        for p in &self.patients {
            check_probability("dis_level", p.dis_level)?;
            check_probability("p_self", p.p_self)?;
            p.start.resolve(&self.plan)?;
            if self.plan.destination(&p.destination).is_none() {
                return invalid(format!("unknown destination {:?}", p.destination));
            }
        }
        for n in &self.nurses {
            n.station.resolve(&self.plan)?;
            for w in &n.patrol_route {
                w.resolve(&self.plan)?;
            }
        }
        check_probability("p_detect", self.watch.p_detect)?;
        check_probability("p_intervene", self.watch.p_intervene)?;
        Ok(())
    }

    /// Self-contained JSON with the floor plan inlined and the current
    /// field values.
    pub fn to_json(&self) -> String {
        let mut file = self.source.clone();
        file.plan = self.plan.to_ascii();
        file.cell_size = self.plan.cell_size();
        file.patient = None;
        file.patients = self.patients.clone();
        file.nurses = self.nurses.clone();
        file.watch = self.watch.clone();
        file.policy = self.policy;
        file.t_max = self.t_max;
        file.tick_seconds = self.tick_seconds;
        file.speed_jitter = self.speed_jitter;
        serde_json::to_string_pretty(&file).expect("config serializes")
    }

    /// SHA-256 of the self-contained JSON form, hex encoded.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_json().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn with_policy(&self, policy: Policy) -> Self {
        let mut c = self.clone();
        c.policy = policy;
        c
    }
}
