//! Monte Carlo simulation of a wayfinding-assistance scenario in a care
//! home, plus quantification of how well each assistance policy complies
//! with a set of ethical value dimensions.
//!
//! The pipeline: a [`world::FloorPlan`] and an [`engine::SimConfig`] drive
//! seeded runs ([`engine::run`], [`engine::batch`]) that each yield a
//! [`engine::protocol::RunProtocol`]. Protocols are scored against a
//! [`valuelang::ValueModel`] ([`ecq::score_runs`]) and summarized per policy
//! ([`ecq::summarize`]) for comparison, plotting and export.

pub mod agents;
pub mod ecq;
pub mod engine;
pub mod iat;
pub mod report;
pub mod valuelang;
pub mod world;

pub use ecq::{EcqResult, ScoreMatrix};
pub use engine::protocol::RunProtocol;
pub use engine::SimConfig;
pub use iat::Policy;
pub use valuelang::ValueModel;
pub use world::{FloorPlan, Position};
