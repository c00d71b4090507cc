//! Analytic model, election simulator and Expected Scheduler Delay (ESD)
//! routing for 802.16 mesh distributed coordinated scheduling.
//!
//! The crate is layered bottom-up:
//!
//! * [`topology`] – static mesh graph and 2-hop neighborhoods.
//! * [`analytic`] – holdoff times and the contention fixed point `E[S]`, `E[tau]`.
//! * [`election`] – deterministic slot-by-slot pseudo-random election.
//! * [`metric`] – flow descriptors and ESD link/path costs.
//! * [`dissemination`] – piggybacked state-table deltas on control messages.
//! * [`routing`] – Bellman-Ford source routes under ESD or hop count.
//! * [`engine`] – frame/slot discrete-event simulator measuring delay, RTT and throughput.
//! * [`harness`] – scenario configs, sweeps and the CSV-emitting CLI.

pub mod analytic;
pub mod dissemination;
pub mod election;
pub mod engine;
pub mod harness;
pub mod metric;
pub mod parallel;
pub mod routing;
pub mod topology;

pub use analytic::{ExpectedSchedule, NeighborhoodKnowledge, SchedulerConfig};
pub use routing::{MetricKind, SourceRoute};
pub use topology::{MeshGraph, NodeId};
