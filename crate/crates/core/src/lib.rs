//! Building blocks for turning subtitled, sign-interpreted broadcast video
//! into a continuous sign language corpus, and for scoring recognition and
//! translation output against it.
//!
//! The pipeline runs per episode: [`signal`] finds active signing runs and
//! subtitle transitions, [`subtitle`] averages, recognizes and regroups
//! subtitle clips, and [`align`] pairs sign runs with subtitle groups.
//! Annotators' glosses go through [`gloss`]; [`corpus`] splits and
//! summarizes the result and [`metrics`] scores model output.

pub mod align;
pub mod corpus;
pub mod distance;
pub mod gloss;
pub mod metrics;
pub mod signal;
pub mod subtitle;
pub mod synth;
pub mod tsv;
