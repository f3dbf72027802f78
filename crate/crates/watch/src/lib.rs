//! Periodic structural monitoring of web pages.
//!
//! [`fetch`] retrieves pages, [`store`] keeps one trusted baseline per URL,
//! and [`monitor`] compares fresh fetches against it and raises alerts when
//! the normalized structural difference exceeds a threshold.

pub mod fetch;
pub mod monitor;
pub mod store;
#[cfg(feature = "testkit")]
pub mod testkit;

pub use crate::fetch::{Fetch, FetchConfig, FetchError, FetchResult, HttpFetcher};
pub use crate::monitor::{
    check_once, run_watch, validate_specs, AlertEvent, AlertSink, CheckOutcome, Clock,
    SimulatedClock, StopSignal, SystemClock, TaskStats, WatchError, WatchSpec,
};
pub use crate::store::{BaselineRecord, BaselineStore, StagedWrite, StoreError};
