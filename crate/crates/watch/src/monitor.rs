//! The watch loop: fetch, fingerprint, compare with the baseline, alert.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::process::{Command, Stdio};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use hdna_core::{analyze, diff, quick_changed, ChangeEntry, DiffReport};
use log::{debug, error, info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fetch::Fetch;
use crate::store::{BaselineRecord, BaselineStore};

pub const DEFAULT_THRESHOLD: f64 = 0.1;
pub const DEFAULT_INTERVAL_S: u64 = 300;
/// Alert payloads carry at most this many change entries.
pub const ALERT_ENTRY_CAP: usize = 50;

fn default_interval() -> u64 {
    DEFAULT_INTERVAL_S
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WatchSpec {
    pub url: String,
    #[serde(default = "default_interval")]
    pub interval_s: u64,
    /// Alert when the normalized score is strictly above this.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub update_baseline_on_alert: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alert_command: Option<String>,
}

impl WatchSpec {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            interval_s: DEFAULT_INTERVAL_S,
            threshold: DEFAULT_THRESHOLD,
            update_baseline_on_alert: false,
            alert_command: None,
        }
    }

    pub fn validate(&self) -> Result<(), WatchError> {
        let bad = |reason: &str| {
            Err(WatchError::InvalidSpec {
                url: self.url.clone(),
                reason: reason.to_owned(),
            })
        };
        if !(self.url.starts_with("http://") || self.url.starts_with("https://")) {
            return bad("url must start with http:// or https://");
        }
        if self.interval_s < 1 {
            return bad("interval_s must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad("threshold must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WatchError {
    #[error("no URLs to watch")]
    NoSpecs,
    #[error("{0} is listed more than once")]
    DuplicateUrl(String),
    #[error("{url}: {reason}")]
    InvalidSpec { url: String, reason: String },
}

pub fn validate_specs(specs: &[WatchSpec]) -> Result<(), WatchError> {
    if specs.is_empty() {
        return Err(WatchError::NoSpecs);
    }
    let mut seen = HashSet::new();
    for spec in specs {
        spec.validate()?;
        if !seen.insert(spec.url.as_str()) {
            return Err(WatchError::DuplicateUrl(spec.url.clone()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertEvent {
    pub url: String,
    pub timestamp: DateTime<Utc>,
    pub raw_score: f64,
    pub normalized_score: f64,
    pub threshold: f64,
    pub entries: Vec<ChangeEntry>,
    pub old_digest: String,
    pub new_digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CheckOutcome {
    BaselineCreated {
        digest: String,
    },
    Unchanged {
        digest: String,
    },
    ChangedBelowThreshold {
        report: DiffReport,
        old_digest: String,
        new_digest: String,
    },
    Alert(AlertEvent),
    FetchFailed {
        cause: String,
    },
}

impl CheckOutcome {
    pub fn kind(&self) -> &'static str {
        match self {
            CheckOutcome::BaselineCreated { .. } => "BaselineCreated",
            CheckOutcome::Unchanged { .. } => "Unchanged",
            CheckOutcome::ChangedBelowThreshold { .. } => "ChangedBelowThreshold",
            CheckOutcome::Alert(_) => "Alert",
            CheckOutcome::FetchFailed { .. } => "FetchFailed",
        }
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckOutcome::BaselineCreated { digest } | CheckOutcome::Unchanged { digest } => {
                write!(f, "{} {}", self.kind(), digest)
            }
            CheckOutcome::ChangedBelowThreshold { report, .. } => write!(
                f,
                "{} normalized_score={:.6} entries={}",
                self.kind(),
                report.normalized_score,
                report.entries.len()
            ),
            CheckOutcome::Alert(e) => write!(
                f,
                "{} normalized_score={:.6} threshold={} entries={}",
                self.kind(),
                e.normalized_score,
                e.threshold,
                e.entries.len()
            ),
            CheckOutcome::FetchFailed { cause } => write!(f, "{} {}", self.kind(), cause),
        }
    }
}

/// One fetch-and-compare round for `spec`. Every failure along the way
/// becomes [`CheckOutcome::FetchFailed`]; it never produces an alert.
pub fn check_once(spec: &WatchSpec, store: &BaselineStore, fetcher: &dyn Fetch) -> CheckOutcome {
    let failed = |cause: String| CheckOutcome::FetchFailed { cause };

    let page = match fetcher.fetch(&spec.url) {
        Ok(p) => p,
        Err(e) => return failed(format!("fetch: {e}")),
    };
    let current = match analyze(&page.body, spec.url.clone()) {
        Ok(a) => a,
        Err(e) => return failed(format!("preprocess: {e}")),
    };
    let baseline = match store.load(&spec.url) {
        Ok(b) => b,
        Err(e) => return failed(format!("store: {e}")),
    };
    let fresh = BaselineRecord::from_analysis(spec.url.clone(), &current, page.fetched_at);

    let Some(baseline) = baseline else {
        return match store.save(&fresh) {
            Ok(()) => CheckOutcome::BaselineCreated {
                digest: fresh.digest,
            },
            Err(e) => failed(format!("store: {e}")),
        };
    };

    let old_fp = match baseline.fingerprint() {
        Ok(fp) => fp,
        Err(e) => return failed(format!("store: {e}")),
    };
    match quick_changed(&old_fp, &current.fingerprint) {
        Ok(false) => {
            return CheckOutcome::Unchanged {
                digest: fresh.digest,
            }
        }
        Ok(true) => {}
        Err(e) => return failed(format!("compare: {e}")),
    }

    let old_nodes = match baseline.weighted_nodes() {
        Ok(n) => n,
        Err(e) => return failed(format!("store: {e}")),
    };
    let report = diff(&old_nodes, &current.nodes);
    let alert = report.normalized_score > spec.threshold;

    if !alert || spec.update_baseline_on_alert {
        if let Err(e) = store.save(&fresh) {
            error!("{}: could not refresh baseline: {e}", spec.url);
        }
    }

    if alert {
        CheckOutcome::Alert(AlertEvent {
            url: spec.url.clone(),
            timestamp: page.fetched_at,
            raw_score: report.raw_score,
            normalized_score: report.normalized_score,
            threshold: spec.threshold,
            entries: report.top_entries(ALERT_ENTRY_CAP),
            old_digest: baseline.digest,
            new_digest: fresh.digest,
        })
    } else {
        CheckOutcome::ChangedBelowThreshold {
            report,
            old_digest: baseline.digest,
            new_digest: fresh.digest,
        }
    }
}

/// Shared, cloneable stop flag that also wakes sleeping tasks.
#[derive(Debug, Clone, Default)]
pub struct StopSignal {
    inner: Arc<(Mutex<bool>, Condvar)>,
}

impl StopSignal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stop(&self) {
        let (lock, cvar) = &*self.inner;
        *lock.lock().unwrap() = true;
        cvar.notify_all();
    }

    pub fn is_stopped(&self) -> bool {
        *self.inner.0.lock().unwrap()
    }

    /// Waits up to `timeout`; true if the signal fired.
    pub fn wait_timeout(&self, timeout: Duration) -> bool {
        let (lock, cvar) = &*self.inner;
        let guard = lock.lock().unwrap();
        let (guard, _) = cvar
            .wait_timeout_while(guard, timeout, |stopped| !*stopped)
            .unwrap();
        *guard
    }
}

/// Time source for the scheduler. Deadlines are offsets from the start of
/// the watch.
pub trait Clock: Send + Sync {
    /// Blocks until `deadline`. Returns false if the task should stop
    /// instead of running its next check.
    fn sleep_until(&self, deadline: Duration, stop: &StopSignal) -> bool;
}

pub struct SystemClock {
    start: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self {
            start: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn sleep_until(&self, deadline: Duration, stop: &StopSignal) -> bool {
        loop {
            if stop.is_stopped() {
                return false;
            }
            let now = self.start.elapsed();
            if now >= deadline {
                return true;
            }
            if stop.wait_timeout(deadline - now) {
                return false;
            }
        }
    }
}

/// Simulated time: every sleep returns at once, and the watch ends when a
/// task would have to wait past `horizon`.
pub struct SimulatedClock {
    horizon: Duration,
}

impl SimulatedClock {
    pub fn new(horizon: Duration) -> Self {
        Self { horizon }
    }
}

impl Clock for SimulatedClock {
    fn sleep_until(&self, deadline: Duration, stop: &StopSignal) -> bool {
        deadline < self.horizon && !stop.is_stopped()
    }
}

/// Append-only JSON Lines sink shared by all watch tasks.
pub struct AlertSink {
    out: Mutex<Box<dyn Write + Send>>,
}

impl AlertSink {
    pub fn new(out: Box<dyn Write + Send>) -> Self {
        Self {
            out: Mutex::new(out),
        }
    }

    pub fn stdout() -> Self {
        Self::new(Box::new(std::io::stdout()))
    }

    pub fn emit(&self, event: &AlertEvent) -> std::io::Result<()> {
        let mut line = serde_json::to_string(event).expect("alert serializes");
        line.push('\n');
        let mut out = self.out.lock().unwrap();
        out.write_all(line.as_bytes())?;
        out.flush()
    }
}

/// Runs `command` through the shell with the event JSON on its stdin.
/// Failures are logged and otherwise ignored.
pub fn run_alert_command(command: &str, event: &AlertEvent) {
    let json = serde_json::to_string(event).expect("alert serializes");
    let mut cmd = if cfg!(windows) {
        let mut c = Command::new("cmd");
        c.arg("/C").arg(command);
        c
    } else {
        let mut c = Command::new("sh");
        c.arg("-c").arg(command);
        c
    };
    let child = cmd.stdin(Stdio::piped()).stdout(Stdio::null()).spawn();
    let mut child = match child {
        Ok(c) => c,
        Err(e) => {
            error!("{}: cannot start alert command: {e}", event.url);
            return;
        }
    };
    if let Some(mut stdin) = child.stdin.take() {
        // A command that ignores its input may close the pipe early.
        let _ = stdin.write_all(json.as_bytes());
        let _ = stdin.write_all(b"\n");
    }
    match child.wait() {
        Ok(status) if status.success() => {}
        Ok(status) => warn!("{}: alert command exited with {status}", event.url),
        Err(e) => error!("{}: alert command: {e}", event.url),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaskStats {
    pub url: String,
    pub checks: usize,
    pub alerts: usize,
    pub suppressed: usize,
    pub failures: usize,
}

/// Watches every spec on its own thread until `stop` fires or the clock
/// runs out. Checks run on a fixed grid (`t = 0, interval, 2 * interval,
/// ...`); a check that overruns its slot is followed immediately by the next.
pub fn run_watch(
    specs: &[WatchSpec],
    store: &BaselineStore,
    fetcher: &dyn Fetch,
    clock: &dyn Clock,
    sink: &AlertSink,
    stop: &StopSignal,
) -> Result<Vec<TaskStats>, WatchError> {
    validate_specs(specs)?;
    let stats = thread::scope(|scope| {
        let handles: Vec<_> = specs
            .iter()
            .map(|spec| scope.spawn(move || watch_one(spec, store, fetcher, clock, sink, stop)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("watch task panicked"))
            .collect()
    });
    Ok(stats)
}

fn watch_one(
    spec: &WatchSpec,
    store: &BaselineStore,
    fetcher: &dyn Fetch,
    clock: &dyn Clock,
    sink: &AlertSink,
    stop: &StopSignal,
) -> TaskStats {
    let interval = Duration::from_secs(spec.interval_s);
    let mut stats = TaskStats {
        url: spec.url.clone(),
        ..TaskStats::default()
    };
    let mut last_alerted: Option<String> = None;
    let mut next = Duration::ZERO;

    while clock.sleep_until(next, stop) {
        let outcome = check_once(spec, store, fetcher);
        stats.checks += 1;
        match &outcome {
            CheckOutcome::Alert(event) => {
                if last_alerted.as_deref() == Some(event.new_digest.as_str()) {
                    stats.suppressed += 1;
                    info!(
                        "{}: still serving alerted content {}",
                        spec.url, event.new_digest
                    );
                } else {
                    stats.alerts += 1;
                    warn!("{}: {outcome}", spec.url);
                    if let Err(e) = sink.emit(event) {
                        error!("{}: cannot write alert: {e}", spec.url);
                    }
                    if let Some(cmd) = &spec.alert_command {
                        run_alert_command(cmd, event);
                    }
                    last_alerted = Some(event.new_digest.clone());
                }
            }
            CheckOutcome::FetchFailed { .. } => {
                stats.failures += 1;
                error!("{}: {outcome}", spec.url);
            }
            _ => {
                last_alerted = None;
                debug!("{}: {outcome}", spec.url);
            }
        }
        next += interval;
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_defaults_and_validation() {
        let spec: WatchSpec = serde_json::from_str(r#"{"url": "https://a.example/"}"#).unwrap();
        assert_eq!(spec, WatchSpec::new("https://a.example/"));
        assert!(spec.validate().is_ok());

        let mut bad = spec.clone();
        bad.interval_s = 0;
        assert!(bad.validate().is_err());
        let mut bad = spec.clone();
        bad.threshold = 1.5;
        assert!(bad.validate().is_err());
        bad.threshold = f64::NAN;
        assert!(bad.validate().is_err());
        let mut bad = spec.clone();
        bad.url = "a.example".into();
        assert!(bad.validate().is_err());

        assert!(
            serde_json::from_str::<WatchSpec>(r#"{"url": "http://a/", "treshold": 0.2}"#).is_err()
        );
    }

    #[test]
    fn spec_list_rules() {
        assert_eq!(validate_specs(&[]), Err(WatchError::NoSpecs));
        let a = WatchSpec::new("http://a/");
        assert_eq!(
            validate_specs(&[a.clone(), a.clone()]),
            Err(WatchError::DuplicateUrl("http://a/".into()))
        );
        assert!(validate_specs(&[a, WatchSpec::new("http://b/")]).is_ok());
    }

    #[test]
    fn simulated_clock_stops_at_horizon() {
        let clock = SimulatedClock::new(Duration::from_secs(3));
        let stop = StopSignal::new();
        assert!(clock.sleep_until(Duration::ZERO, &stop));
        assert!(clock.sleep_until(Duration::from_millis(2999), &stop));
        assert!(!clock.sleep_until(Duration::from_secs(3), &stop));
        stop.stop();
        assert!(!clock.sleep_until(Duration::ZERO, &stop));
    }

    #[test]
    fn system_clock_wakes_on_stop() {
        let clock = SystemClock::new();
        let stop = StopSignal::new();
        let s2 = stop.clone();
        let t = thread::spawn(move || {
            thread::sleep(Duration::from_millis(50));
            s2.stop();
        });
        let started = Instant::now();
        assert!(!clock.sleep_until(Duration::from_secs(60), &stop));
        assert!(started.elapsed() < Duration::from_secs(5));
        t.join().unwrap();
    }
}
