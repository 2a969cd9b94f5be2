//! Evaluation workloads: traces, replay, load injection and deployments.

pub mod ddos;
pub mod deploy;
pub mod replay;
pub mod roam;
pub mod site;
pub mod stats;
pub mod trace;
