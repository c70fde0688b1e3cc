//! Tick-by-tick simulation, seeded batches and run-level expectations.
//!
//! Within a tick the order is fixed: every patient acts, then every watch,
//! then every nurse, each group in id order. All randomness for a run comes
//! from one ChaCha8 stream seeded with the run seed, so a protocol is a pure
//! function of `(config, seed)`.

pub mod config;
pub mod protocol;

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

pub use config::{ConfigFile, NurseConfig, PatientConfig, Place, SimConfig, WatchConfig};
pub use protocol::{AgentRef, Emitted, Event, EventKind, NurseActivity, Outcome, RunProtocol};

use crate::agents::{AgentError, NurseAgent, PatientAgent};
use crate::iat::{IatError, Policy, SmartWatch, WatchAction};
use crate::valuelang::{self, MeasureError};
use crate::world::FloorPlan;
use protocol::{NurseTrack, PatientInfo};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Iat(#[from] IatError),
    #[error("cannot average over an empty protocol list")]
    EmptyProtocols,
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based seed for one run of a batch.
///
/// Depends only on the master seed, the policy's stable code and the run
/// index, so the seed of a run does not change with list order or
/// scheduling.
pub fn derive_seed(master_seed: u64, policy: Policy, run_index: u64) -> u64 {
    let a = mix64(master_seed.wrapping_add(GOLDEN_GAMMA));
    let b = mix64(a ^ policy.code().wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    mix64(b ^ run_index.wrapping_add(1).wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn run_id(policy: Policy, run_index: u64) -> String {
    format!("{}-{run_index:04}", policy.slug())
}

/// Simulate one run.
pub fn run(config: &SimConfig, seed: u64) -> Result<RunProtocol, EngineError> {
    run_with_id(config, seed, format!("{}-s{seed}", config.policy.slug()))
}

pub fn run_with_id(config: &SimConfig, seed: u64, run_id: String) -> Result<RunProtocol, EngineError> {
    config.validate()?;
    let plan: &FloorPlan = &config.plan;
    let policy = config.policy;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut patients = Vec::with_capacity(config.patients.len());
    let mut infos = Vec::with_capacity(config.patients.len());
    for (i, pc) in config.patients.iter().enumerate() {
        let start = pc.start.resolve(plan)?;
        let mut p = PatientAgent::new(i as u32, plan, start, &pc.destination, pc.dis_level)?;
        p.p_self = pc.p_self;
        p.speed_jitter = config.speed_jitter;
        infos.push(PatientInfo { id: p.agent(), start, destination: p.destination_pos, dis_level: pc.dis_level });
        patients.push(p);
    }
    let mut watches = match policy {
        Policy::Watch(n) => patients
            .iter()
            .map(|p| {
                SmartWatch::new(p.id, config.watch.p_detect, config.watch.p_intervene, n, config.watch.prompt_cooldown)
            })
            .collect::<Result<Vec<_>, _>>()?,
        _ => Vec::new(),
    };
    let mut nurses = Vec::with_capacity(config.nurses.len());
    for (i, nc) in config.nurses.iter().enumerate() {
        let station = nc.station.resolve(plan)?;
        let patrol = match policy {
            Policy::NurseOnly => nc.patrol_route.iter().map(|w| w.resolve(plan)).collect::<Result<Vec<_>, _>>()?,
            _ => Vec::new(),
        };
        let nurse = NurseAgent::new(i as u32, station, nc.sight_radius, patrol, nc.speed);
        nurses.push(if policy == Policy::NurseOnly { nurse.patrolling() } else { nurse });
    }
    let mut seen_episode = vec![0u32; patients.len()];
    let mut tracks: Vec<NurseTrack> = nurses
        .iter()
        .map(|n| NurseTrack { id: n.agent(), activity: Vec::with_capacity(256) })
        .collect();

    let mut events: Vec<Event> = Vec::new();
    let mut queue: VecDeque<u32> = VecDeque::new();
    let mut buf: Vec<Emitted> = Vec::new();
    let mut outcome = Outcome::Timeout;

    'ticks: for tick in 1..=config.t_max {
        for p in patients.iter_mut() {
            p.patient_step(plan, &mut rng, &mut buf);
        }
        events.extend(buf.drain(..).map(|e| Event::stamp(tick, e)));
        if patients.iter().all(PatientAgent::has_arrived) {
            for (track, nurse) in tracks.iter_mut().zip(&nurses) {
                track.activity.push(mode_activity(nurse));
            }
            outcome = Outcome::ReachedDestination;
            break 'ticks;
        }

        for ((w, p), seen) in watches.iter_mut().zip(patients.iter_mut()).zip(seen_episode.iter_mut()) {
            if p.has_arrived() {
                continue;
            }
            // Reoriented and lost again within one patient step: a new episode.
            if *seen != p.episodes() {
                *seen = p.episodes();
                w.reset_episode();
            }
            match w.watch_step(policy, p.is_disoriented(), &mut rng, &mut buf)? {
                WatchAction::Prompt { success: true } => p.reorient(plan, "prompt", &mut buf)?,
                WatchAction::CallNurse => queue.push_back(p.id),
                _ => {}
            }
        }

        for (nurse, track) in nurses.iter_mut().zip(tracks.iter_mut()) {
            let was_guiding = nurse.mode;
            let activity = nurse.nurse_step(plan, &mut queue, &mut patients, &mut rng, &mut buf)?;
            track.activity.push(activity);
            if let crate::agents::NurseMode::Guiding(pid) = was_guiding {
                if nurse.mode != was_guiding {
                    if let Some(w) = watches.iter_mut().find(|w| w.wearer == pid) {
                        w.reset_episode();
                    }
                }
            }
        }
        events.extend(buf.drain(..).map(|e| Event::stamp(tick, e)));
    }
    if outcome == Outcome::Timeout {
        events.push(Event::stamp(config.t_max, Emitted::new(AgentRef::Sim, EventKind::Timeout)));
    }

    Ok(RunProtocol {
        run_id,
        policy,
        seed,
        t_max: config.t_max,
        tick_seconds: config.tick_seconds,
        cell_size: plan.cell_size(),
        patients: infos,
        events,
        outcome,
        nurses: tracks,
    })
}

fn mode_activity(nurse: &NurseAgent) -> NurseActivity {
    use crate::agents::NurseMode::*;
    match nurse.mode {
        OtherDuties => NurseActivity::Other,
        Patrolling => NurseActivity::Patrolling,
        Responding(_) => NurseActivity::Responding,
        Guiding(_) => NurseActivity::Guiding,
    }
}

/// Run `runs_per_policy` seeded runs for every policy.
///
/// Output is ordered by (policy position, run index) whatever the thread
/// count; `jobs = None` uses rayon's global pool.
pub fn batch(
    config: &SimConfig,
    policies: &[Policy],
    runs_per_policy: usize,
    master_seed: u64,
    jobs: Option<usize>,
) -> Result<Vec<RunProtocol>, EngineError> {
    if runs_per_policy == 0 {
        return Err(EngineError::InvalidConfig("runs_per_policy must be at least 1".into()));
    }
    config.validate()?;
    let configs: Vec<SimConfig> = policies.iter().map(|&p| config.with_policy(p)).collect();
    let jobs_list: Vec<(usize, u64)> = (0..policies.len())
        .flat_map(|pi| (0..runs_per_policy as u64).map(move |ri| (pi, ri)))
        .collect();
    let work = || {
        jobs_list
            .par_iter()
            .map(|&(pi, ri)| {
                let cfg = &configs[pi];
                let seed = derive_seed(master_seed, cfg.policy, ri);
                run_with_id(cfg, seed, run_id(cfg.policy, ri))
            })
            .collect::<Result<Vec<_>, _>>()
    };
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| EngineError::ThreadPool(e.to_string()))?
            .install(work),
        None => work(),
    }
}

/// Mean of a named measure over a set of protocols.
pub fn expected_measure(protocols: &[RunProtocol], plan: &FloorPlan, measure: &str) -> Result<f64, EngineError> {
    if protocols.is_empty() {
        return Err(EngineError::EmptyProtocols);
    }
    let mut sum = 0.0;
    for p in protocols {
        let table = valuelang::derive_measures(p, plan)?;
        sum += table.get(measure)?;
    }
    Ok(sum / protocols.len() as f64)
}
