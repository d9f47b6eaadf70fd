//! Trace-driven simulator for MOESI snooping caches with switchable
//! invalidate/update write policies.
//!
//! The pieces fit together as follows: [`generators`] produce synthetic
//! multicore traces in the [`trace`] text format, [`engine`] replays a trace
//! against one private cache per core under a [`scheme`], [`metrics`] counts
//! the resulting bus requests, and [`sweep`] runs the whole
//! workload × core-count × scheme matrix.

pub mod engine;
pub mod error;
pub mod generators;
pub mod metrics;
pub mod scheme;
pub mod sweep;
pub mod trace;
pub mod types;

pub use engine::{run, run_refs, Engine, Violation, ViolationKind};
pub use error::{ConfigError, SimError, TraceError};
pub use metrics::{CoreCounts, MetricsTable, ReportFormat, RunConfig};
pub use scheme::{decide, PolicyDecision, Scheme, SchemeConfig, WriteContext};
pub use types::{
    BusTransaction, CacheGeometry, CacheLine, CoherenceState, CoreId, MemoryRef, Op, TxnKind,
};
