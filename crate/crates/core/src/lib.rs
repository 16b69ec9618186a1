//! Detection and removal of secret-dependent completion-latency channels in
//! clocked register-transfer designs.
//!
//! The flow: parse a mini-HDL module ([`hdl`]), run a conservative taint
//! pre-check ([`taint`]), enumerate every reachable completion latency with a
//! bounded model checker that blocks already-found latencies one by one
//! ([`enumerate`]), then splice a counter-based compensator onto the design
//! so that `done` fires at the worst-case latency for every input
//! ([`compensator`]). [`sim`] provides the cycle-accurate interpreter that
//! every solver witness is replayed on, plus an exhaustive brute-force oracle.

pub mod bench;
pub mod bmc;
pub mod compensator;
pub mod enumerate;
pub mod hdl;
pub mod ir;
pub mod report;
pub mod sat;
pub mod sim;
pub mod taint;
