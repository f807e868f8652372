//! Deterministic discrete-event lab for OpenFlow topology discovery.

// `!(x > 0.0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacks;
pub mod discovery;
pub mod lldp;
pub mod openflow;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod topology;
pub mod world;
