//! Command-line workbench over the jetcas toolkit: per-check runners, the
//! embedded problem corpus and the self-test.

pub mod checks;
pub mod corpus;
pub mod report;
