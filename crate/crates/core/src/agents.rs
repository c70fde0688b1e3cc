//! Stochastic stakeholder models: patients with dementia and nurses.

use std::collections::VecDeque;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::engine::protocol::{AgentRef, Emitted, EventKind, NurseActivity};
use crate::world::{FloorPlan, Position};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("unknown destination {0:?}")]
    UnknownDestination(String),
    #[error("nurse n{nurse} targets missing patient p{patient}")]
    TargetPatientMissing { nurse: u32, patient: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Oriented,
    Disoriented,
}

/// Step length below which a jittered tick is spent standing still.
const HALF_CELL: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct PatientAgent {
    pub id: u32,
    pub location: Position,
    pub destination: String,
    pub destination_pos: Position,
    pub orientation: Orientation,
    /// Probability of a wrong turn at each decision point.
    pub dis_level: f64,
    /// Per-tick probability of regaining orientation unaided.
    pub p_self: f64,
    /// Standard deviation of the sampled step length, in cells.
    pub speed_jitter: Option<f64>,
    route: Vec<Position>,
    route_idx: usize,
    prev_cell: Option<Position>,
    guided_by: Option<u32>,
    arrived: bool,
    episodes: u32,
}

impl PatientAgent {
    /// A patient at `start`, oriented, with a fresh route to `destination`.
    pub fn new(
        id: u32,
        plan: &FloorPlan,
        start: Position,
        destination: &str,
        dis_level: f64,
    ) -> Result<Self, AgentError> {
        let destination_pos = plan
            .destination(destination)
            .ok_or_else(|| AgentError::UnknownDestination(destination.to_owned()))?;
        let route = plan
            .shortest_path(start, destination_pos)
            .map_err(|_| AgentError::UnknownDestination(destination.to_owned()))?
            .into_cells();
        Ok(Self {
            id,
            location: start,
            destination: destination.to_owned(),
            destination_pos,
            orientation: Orientation::Oriented,
            dis_level: dis_level.clamp(0.0, 1.0),
            p_self: 0.0,
            speed_jitter: None,
            route,
            route_idx: 0,
            prev_cell: None,
            episodes: 0,
            guided_by: None,
            arrived: false,
        })
    }

    pub fn agent(&self) -> AgentRef {
        AgentRef::Patient(self.id)
    }

    pub fn is_disoriented(&self) -> bool {
        self.orientation == Orientation::Disoriented
    }

    /// Number of disorientation episodes so far.
    pub fn episodes(&self) -> u32 {
        self.episodes
    }

    pub fn has_arrived(&self) -> bool {
        self.arrived
    }

    pub fn guided_by(&self) -> Option<u32> {
        self.guided_by
    }

    /// Remaining planned cells, starting with the current one.
    pub fn remaining_route(&self) -> &[Position] {
        &self.route[self.route_idx..]
    }

    pub fn prev_cell(&self) -> Option<Position> {
        self.prev_cell
    }

    fn move_to(&mut self, next: Position, out: &mut Vec<Emitted>) {
        self.prev_cell = Some(self.location);
        self.location = next;
        out.push(Emitted::new(self.agent(), EventKind::Moved).at(next));
    }

    fn arrive(&mut self, out: &mut Vec<Emitted>) {
        self.arrived = true;
        out.push(Emitted::new(self.agent(), EventKind::ReachedDestination).at(self.location));
    }

    /// Replan from the current cell and mark the patient oriented.
    pub fn reorient(&mut self, plan: &FloorPlan, cause: &str, out: &mut Vec<Emitted>) -> Result<(), AgentError> {
        let target = plan
            .destination(&self.destination)
            .ok_or_else(|| AgentError::UnknownDestination(self.destination.clone()))?;
        self.destination_pos = target;
        self.route = plan
            .shortest_path(self.location, target)
            .map_err(|_| AgentError::UnknownDestination(self.destination.clone()))?
            .into_cells();
        self.route_idx = 0;
        if self.orientation == Orientation::Disoriented {
            self.orientation = Orientation::Oriented;
            out.push(Emitted::new(self.agent(), EventKind::Reoriented).with("cause", cause));
        }
        Ok(())
    }

    /// One tick of unaided behaviour.
    ///
    /// Oriented patients follow their route but, at a decision point, take a
    /// wrong turn with probability `dis_level` and become disoriented.
    /// Disoriented patients random-walk without immediate backtracking.
    /// Guided patients stand still here; the escorting nurse moves them.
    pub fn patient_step<R: Rng + ?Sized>(&mut self, plan: &FloorPlan, rng: &mut R, out: &mut Vec<Emitted>) {
        if self.arrived || self.guided_by.is_some() {
            return;
        }
        if self.location == self.destination_pos {
            self.arrive(out);
            return;
        }
        if let Some(sd) = self.speed_jitter.filter(|sd| *sd > 0.0) {
            let length = Normal::new(1.0, sd).expect("positive finite sd").sample(rng);
            if length < HALF_CELL {
                return;
            }
        }
        if self.is_disoriented() && self.p_self > 0.0 && rng.random::<f64>() < self.p_self {
            self.reorient(plan, "self", out).expect("destination was valid at construction");
        }

        match self.orientation {
            Orientation::Oriented => {
                let next = self.route[self.route_idx + 1];
                if plan.is_decision_point(self.location) && rng.random::<f64>() < self.dis_level {
                    let behind = self.route_idx.checked_sub(1).map(|i| self.route[i]);
                    let options: Vec<Position> = plan
                        .successors(self.location)
                        .expect("patient stands on a walkable cell")
                        .into_iter()
                        .filter(|&c| c != next && Some(c) != behind)
                        .collect();
                    let &wrong = options.choose(rng).expect("junction has an off-route neighbour");
                    out.push(
                        Emitted::new(self.agent(), EventKind::WrongTurn)
                            .at(self.location)
                            .with("to", vec![wrong.x, wrong.y]),
                    );
                    out.push(Emitted::new(self.agent(), EventKind::Disoriented));
                    self.episodes += 1;
                    self.orientation = Orientation::Disoriented;
                    self.move_to(wrong, out);
                } else {
                    self.route_idx += 1;
                    self.move_to(next, out);
                }
            }
            Orientation::Disoriented => {
                let all = plan.successors(self.location).expect("patient stands on a walkable cell");
                let forward: Vec<Position> =
                    all.iter().copied().filter(|&c| Some(c) != self.prev_cell).collect();
                let options = if forward.is_empty() { &all } else { &forward };
                let &next = options.choose(rng).expect("connected plan has a neighbour");
                self.move_to(next, out);
            }
        }
        if self.location == self.destination_pos {
            self.arrive(out);
        }
    }

    /// Escorted move: one cell along the shortest path to the destination.
    fn escort_step(&mut self, plan: &FloorPlan, out: &mut Vec<Emitted>) {
        if self.location != self.destination_pos {
            let next = plan.next_step_towards(self.location, self.destination_pos);
            self.move_to(next, out);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NurseMode {
    OtherDuties,
    Responding(u32),
    Guiding(u32),
    Patrolling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NurseAgent {
    pub id: u32,
    pub location: Position,
    pub station: Position,
    pub mode: NurseMode,
    /// Detection range in BFS cells while patrolling.
    pub sight_radius: u32,
    /// Waypoints visited cyclically while patrolling.
    pub patrol_route: Vec<Position>,
    /// Cells per tick when walking alone to a patient.
    pub speed: u32,
    patrol_idx: usize,
}

impl NurseAgent {
    pub fn new(id: u32, station: Position, sight_radius: u32, patrol_route: Vec<Position>, speed: u32) -> Self {
        Self {
            id,
            location: station,
            station,
            mode: NurseMode::OtherDuties,
            sight_radius,
            patrol_route,
            speed: speed.max(1),
            patrol_idx: 0,
        }
    }

    /// Start on patrol instead of at the station.
    pub fn patrolling(mut self) -> Self {
        self.mode = NurseMode::Patrolling;
        self
    }

    pub fn agent(&self) -> AgentRef {
        AgentRef::Nurse(self.id)
    }

    fn returns_to_patrol(&self) -> bool {
        !self.patrol_route.is_empty()
    }

    fn walk_towards(&mut self, plan: &FloorPlan, target: Position, cells: u32) {
        for _ in 0..cells {
            if self.location == target {
                break;
            }
            self.location = plan.next_step_towards(self.location, target);
        }
    }

    fn begin_guidance(&mut self, patient: &mut PatientAgent, out: &mut Vec<Emitted>) {
        out.push(Emitted::new(self.agent(), EventKind::GuidanceStarted).with("patient", patient.agent().to_string()));
        self.mode = NurseMode::Guiding(patient.id);
        patient.guided_by = Some(self.id);
    }

    fn patient_mut<'a>(&self, patients: &'a mut [PatientAgent], pid: u32) -> Result<&'a mut PatientAgent, AgentError> {
        patients
            .iter_mut()
            .find(|p| p.id == pid)
            .ok_or(AgentError::TargetPatientMissing { nurse: self.id, patient: pid })
    }

    /// One tick of nurse behaviour. Returns what the tick was spent on.
    pub fn nurse_step<R: Rng + ?Sized>(
        &mut self,
        plan: &FloorPlan,
        call_queue: &mut VecDeque<u32>,
        patients: &mut [PatientAgent],
        _rng: &mut R,
        out: &mut Vec<Emitted>,
    ) -> Result<NurseActivity, AgentError> {
        if self.mode == NurseMode::OtherDuties {
            // Calls for patients who already made it are dropped.
            while let Some(pid) = call_queue.pop_front() {
                if !self.patient_mut(patients, pid)?.has_arrived() {
                    self.mode = NurseMode::Responding(pid);
                    break;
                }
            }
        }
        match self.mode {
            NurseMode::OtherDuties => {
                self.walk_towards(plan, self.station, 1);
                Ok(NurseActivity::Other)
            }
            NurseMode::Patrolling => {
                let sight = self.sight_radius;
                let here = self.location;
                let spotted = patients.iter_mut().find(|p| {
                    p.is_disoriented()
                        && !p.has_arrived()
                        && p.guided_by.is_none()
                        && plan.grid_distance_unchecked(here, p.location) <= sight
                });
                if let Some(patient) = spotted {
                    out.push(
                        Emitted::new(self.agent(), EventKind::Detected).with("patient", patient.agent().to_string()),
                    );
                    self.begin_guidance(patient, out);
                    let target = patient.location;
                    self.walk_towards(plan, target, self.speed);
                    return Ok(NurseActivity::Guiding);
                }
                if let Some(&waypoint) = self.patrol_route.get(self.patrol_idx) {
                    if self.location == waypoint {
                        self.patrol_idx = (self.patrol_idx + 1) % self.patrol_route.len();
                    }
                    let waypoint = self.patrol_route[self.patrol_idx];
                    self.walk_towards(plan, waypoint, 1);
                }
                Ok(NurseActivity::Patrolling)
            }
            NurseMode::Responding(pid) => {
                let speed = self.speed;
                let nurse = self.agent();
                let patient = self.patient_mut(patients, pid)?;
                if patient.has_arrived() || patient.guided_by.is_some() {
                    self.mode = NurseMode::OtherDuties;
                    self.walk_towards(plan, self.station, 1);
                    return Ok(NurseActivity::Other);
                }
                let target = patient.location;
                self.walk_towards(plan, target, speed);
                if self.location == target {
                    let patient = self.patient_mut(patients, pid)?;
                    out.push(Emitted::new(nurse, EventKind::NurseArrived).with("patient", patient.agent().to_string()));
                    self.begin_guidance(patient, out);
                }
                Ok(NurseActivity::Responding)
            }
            NurseMode::Guiding(pid) => {
                let speed = self.speed;
                let nurse = self.agent();
                let after = if self.returns_to_patrol() { NurseMode::Patrolling } else { NurseMode::OtherDuties };
                let patient = self.patient_mut(patients, pid)?;
                let target = patient.location;
                if self.location != target {
                    // Still walking over to a patient spotted on patrol.
                    self.walk_towards(plan, target, speed);
                    return Ok(NurseActivity::Guiding);
                }
                patient.escort_step(plan, out);
                self.location = patient.location;
                if patient.location == patient.destination_pos {
                    out.push(
                        Emitted::new(nurse, EventKind::GuidanceEnded).with("patient", patient.agent().to_string()),
                    );
                    patient.guided_by = None;
                    patient.reorient(plan, "nurse", out)?;
                    self.mode = after;
                }
                Ok(NurseActivity::Guiding)
            }
        }
    }
}
