//! Batch experiment driver for in-motion coarse alignment: configuration,
//! single runs, Monte Carlo aggregation, and diagnostics. The `inflight-align`
//! binary is a thin front end over [`config`] and [`harness`].

pub mod config;
pub mod harness;
