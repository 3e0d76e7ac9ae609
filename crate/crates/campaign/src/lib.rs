//! Persistent optimization campaigns: an operator declares bounds, a target
//! response and monotonicity hints, then alternates between asking for the
//! next experiment and recording its measured outcome.
//!
//! Each campaign is an append-only event log; [`model::CampaignState`] is
//! rebuilt by replaying it. [`service::CampaignService`] serializes writes
//! per campaign, [`http::router`] exposes it over HTTP and [`cli`] from the
//! command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod http;
pub mod model;
pub mod service;
pub mod store;

pub use error::{CampaignError, Result};
