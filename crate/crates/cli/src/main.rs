use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use hdna_core::batch::{analyze_all, Execution};
use hdna_core::{analyze, diff, Analysis, DotOptions, Fingerprint, RawHtml};
use hdna_watch::monitor::run_alert_command;
use hdna_watch::{
    check_once, run_watch, validate_specs, AlertSink, BaselineStore, CheckOutcome, Fetch,
    FetchConfig, HttpFetcher, StopSignal, SystemClock, WatchSpec,
};
use log::info;
use serde::Serialize;

const EXIT_DIFFERENT: u8 = 2;
const EX_USAGE: u8 = 64;
const EX_DATAERR: u8 = 65;
const EX_NOINPUT: u8 = 66;
const EX_UNAVAILABLE: u8 = 68;
const EX_IOERR: u8 = 74;

#[derive(Parser)]
#[command(
    name = "hdna",
    version,
    about = "Structural fingerprints, diffs and defacement monitoring for HTML pages"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the canonical string, digest and node count of a page
    Fingerprint {
        /// File path, stored canonical (`hdna1|...`), or http(s) URL
        input: String,
        #[arg(long)]
        json: bool,
        /// Also list every node with its weight
        #[arg(long)]
        weights: bool,
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Compare two pages node by node. Exits 2 when they differ
    Diff {
        old: String,
        new: String,
        #[arg(long)]
        json: bool,
        /// Exit 2 only when the normalized score is above this
        #[arg(long, value_parser = unit_interval)]
        threshold: Option<f64>,
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Write the page tree as a Graphviz digraph
    Dot {
        input: String,
        /// Output file (default: stdout)
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Add rounded weights to vertex labels
        #[arg(long)]
        weights: bool,
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Watch the URLs listed in a JSON config and alert on structural change
    Watch {
        /// JSON array of watch specs
        config: PathBuf,
        /// Baseline directory
        #[arg(long, env = "HDNA_STORE")]
        store: PathBuf,
        /// Check every URL once and exit (2 if any alert)
        #[arg(long)]
        once: bool,
        /// Override interval_s for every spec
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        interval: Option<u64>,
        /// Override threshold for every spec
        #[arg(long, value_parser = unit_interval)]
        threshold: Option<f64>,
        /// Override update_baseline_on_alert for every spec
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        update_baseline_on_alert: Option<bool>,
        /// Override alert_command for every spec
        #[arg(long)]
        alert_command: Option<String>,
        /// Append alerts as JSON lines to this file (default: stdout)
        #[arg(long)]
        alerts: Option<PathBuf>,
        #[command(flatten)]
        fetch: FetchArgs,
    },
    /// Fingerprint every .html file in a directory
    Corpus {
        dir: PathBuf,
        /// Directory for the per-page .json and .dot files
        #[arg(long)]
        out: PathBuf,
        /// Decode every page with this charset unless it has a BOM
        #[arg(long)]
        charset: Option<String>,
    },
}

#[derive(Args)]
struct SourceArgs {
    /// Charset for inputs that do not declare one reliably
    #[arg(long)]
    charset: Option<String>,
    #[command(flatten)]
    fetch: FetchArgs,
}

#[derive(Args)]
struct FetchArgs {
    #[arg(long, default_value_t = hdna_watch::fetch::DEFAULT_TIMEOUT_MS)]
    timeout_ms: u64,
    #[arg(long, default_value_t = hdna_watch::fetch::DEFAULT_MAX_REDIRECTS)]
    max_redirects: usize,
    #[arg(long, default_value_t = hdna_watch::fetch::DEFAULT_MAX_BODY_BYTES)]
    max_body_bytes: u64,
    #[arg(long)]
    user_agent: Option<String>,
    /// Do not verify TLS certificates
    #[arg(long)]
    insecure: bool,
}

impl FetchArgs {
    fn fetcher(&self) -> Result<HttpFetcher, Failure> {
        HttpFetcher::new(FetchConfig {
            timeout_ms: self.timeout_ms,
            max_redirects: self.max_redirects,
            max_body_bytes: self.max_body_bytes,
            user_agent: self
                .user_agent
                .clone()
                .unwrap_or_else(hdna_watch::fetch::default_user_agent),
            insecure: self.insecure,
        })
        .map_err(|e| Failure::Fetch(e.to_string()))
    }
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err("must be between 0 and 1".into())
    }
}

enum Failure {
    Usage(String),
    Data(String),
    NoInput(String),
    Fetch(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EX_USAGE,
            Failure::Data(_) => EX_DATAERR,
            Failure::NoInput(_) => EX_NOINPUT,
            Failure::Fetch(_) => EX_UNAVAILABLE,
            Failure::Io(_) => EX_IOERR,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m)
            | Failure::Data(m)
            | Failure::NoInput(m)
            | Failure::Fetch(m)
            | Failure::Io(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EX_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    // html5ever warns about foster parenting even though it performs it
    let default_level = if matches!(cli.command, Command::Watch { .. }) {
        "info,html5ever=error"
    } else {
        "warn,html5ever=error"
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default_level))
        .init();

    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("hdna: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Fingerprint {
            input,
            json,
            weights,
            source,
        } => cmd_fingerprint(&input, json, weights, &source),
        Command::Diff {
            old,
            new,
            json,
            threshold,
            source,
        } => cmd_diff(&old, &new, json, threshold, &source),
        Command::Dot {
            input,
            out,
            weights,
            source,
        } => cmd_dot(&input, out.as_deref(), weights, &source),
        Command::Watch {
            config,
            store,
            once,
            interval,
            threshold,
            update_baseline_on_alert,
            alert_command,
            alerts,
            fetch,
        } => {
            let overrides = Overrides {
                interval,
                threshold,
                update_baseline_on_alert,
                alert_command,
            };
            cmd_watch(&config, &store, once, &overrides, alerts.as_deref(), &fetch)
        }
        Command::Corpus { dir, out, charset } => cmd_corpus(&dir, &out, charset.as_deref()),
    }
}

fn is_url(input: &str) -> bool {
    input.starts_with("http://") || input.starts_with("https://")
}

/// Reads a page from a URL or a file. Files holding a stored canonical
/// string are rebuilt from it instead of being parsed as HTML.
fn load(input: &str, source: &SourceArgs) -> Result<Analysis, Failure> {
    let raw = if is_url(input) {
        let page = source
            .fetch
            .fetcher()?
            .fetch(input)
            .map_err(|e| Failure::Fetch(e.to_string()))?;
        page.body
    } else {
        let bytes = fs::read(input).map_err(|e| Failure::NoInput(format!("{input}: {e}")))?;
        if bytes.starts_with(b"hdna1|") {
            return from_canonical(input, &bytes);
        }
        RawHtml::new(bytes)
    };
    let raw = match &source.charset {
        Some(label) => raw.with_charset(label.clone()),
        None => raw,
    };
    analyze(&raw, input).map_err(|e| Failure::Data(format!("{input}: {e}")))
}

fn from_canonical(input: &str, bytes: &[u8]) -> Result<Analysis, Failure> {
    let bad = |e: &dyn std::fmt::Display| Failure::Data(format!("{input}: {e}"));
    let text = std::str::from_utf8(bytes).map_err(|e| bad(&e))?;
    let fp = Fingerprint::from_canonical(text.trim_end()).map_err(|e| bad(&e))?;
    let tree = fp.to_tree(input).map_err(|e| bad(&e))?;
    Ok(Analysis::from_tree(tree))
}

fn emit(text: &str) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Failure::Io(format!("stdout: {e}")))
}

#[derive(Serialize)]
struct NodeJson<'a> {
    n: usize,
    a: &'a str,
    d: usize,
    depth: usize,
    weight: f64,
}

#[derive(Serialize)]
struct FingerprintJson<'a> {
    source: &'a str,
    version: &'a str,
    canonical: &'a str,
    digest: &'a str,
    node_count: usize,
    total_weight: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    nodes: Option<Vec<NodeJson<'a>>>,
}

fn fingerprint_json(source: &str, a: &Analysis, with_nodes: bool) -> String {
    let fp = &a.fingerprint;
    let nodes = with_nodes.then(|| {
        a.nodes
            .iter()
            .map(|w| NodeJson {
                n: w.triple.n,
                a: &w.triple.a,
                d: w.triple.d,
                depth: w.depth,
                weight: w.weight,
            })
            .collect()
    });
    let doc = FingerprintJson {
        source,
        version: &fp.version,
        canonical: &fp.canonical,
        digest: &fp.digest,
        node_count: a.nodes.len(),
        total_weight: a.total_weight(),
        nodes,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
    s.push('\n');
    s
}

fn weight_table(a: &Analysis) -> String {
    let mut out = format!(
        "{:>6}  {:<16}  {:>6}  {:>5}  {:>12}\n",
        "n", "a", "d", "depth", "weight"
    );
    for w in &a.nodes {
        out.push_str(&format!(
            "{:>6}  {:<16}  {:>6}  {:>5}  {:>12.6}\n",
            w.triple.n, w.triple.a, w.triple.d, w.depth, w.weight
        ));
    }
    out
}

fn cmd_fingerprint(
    input: &str,
    json: bool,
    weights: bool,
    source: &SourceArgs,
) -> Result<u8, Failure> {
    let a = load(input, source)?;
    if json {
        emit(&fingerprint_json(input, &a, weights))?;
    } else {
        let mut text = format!(
            "canonical: {}\ndigest: {}\nnodes: {}\n",
            a.fingerprint.canonical,
            a.fingerprint.digest,
            a.nodes.len()
        );
        if weights {
            text.push('\n');
            text.push_str(&weight_table(&a));
        }
        emit(&text)?;
    }
    Ok(0)
}

fn cmd_diff(
    old: &str,
    new: &str,
    json: bool,
    threshold: Option<f64>,
    source: &SourceArgs,
) -> Result<u8, Failure> {
    let a = load(old, source)?;
    let b = load(new, source)?;
    let report = diff(&a.nodes, &b.nodes);
    if json {
        let mut s = serde_json::to_string_pretty(&report).expect("serializable");
        s.push('\n');
        emit(&s)?;
    } else {
        emit(&format!(
            "old: {} {}\nnew: {} {}\n{}",
            old,
            a.fingerprint.digest,
            new,
            b.fingerprint.digest,
            report.to_table()
        ))?;
    }
    let flagged = match threshold {
        _ if report.identical => false,
        Some(t) => report.normalized_score > t,
        None => true,
    };
    Ok(if flagged { EXIT_DIFFERENT } else { 0 })
}

fn cmd_dot(
    input: &str,
    out: Option<&Path>,
    weights: bool,
    source: &SourceArgs,
) -> Result<u8, Failure> {
    let a = load(input, source)?;
    let dot = a.to_dot(DotOptions {
        show_weights: weights,
    });
    match out {
        Some(path) => {
            fs::write(path, dot).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?
        }
        None => emit(&dot)?,
    }
    Ok(0)
}

struct Overrides {
    interval: Option<u64>,
    threshold: Option<f64>,
    update_baseline_on_alert: Option<bool>,
    alert_command: Option<String>,
}

fn read_specs(config: &Path, overrides: &Overrides) -> Result<Vec<WatchSpec>, Failure> {
    let text = fs::read_to_string(config)
        .map_err(|e| Failure::Usage(format!("config {}: {e}", config.display())))?;
    let mut specs: Vec<WatchSpec> = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("config {}: {e}", config.display())))?;
    for spec in &mut specs {
        if let Some(v) = overrides.interval {
            spec.interval_s = v;
        }
        if let Some(v) = overrides.threshold {
            spec.threshold = v;
        }
        if let Some(v) = overrides.update_baseline_on_alert {
            spec.update_baseline_on_alert = v;
        }
        if let Some(v) = &overrides.alert_command {
            spec.alert_command = Some(v.clone());
        }
    }
    validate_specs(&specs)
        .map_err(|e| Failure::Usage(format!("config {}: {e}", config.display())))?;
    Ok(specs)
}

fn cmd_watch(
    config: &Path,
    store: &Path,
    once: bool,
    overrides: &Overrides,
    alerts: Option<&Path>,
    fetch: &FetchArgs,
) -> Result<u8, Failure> {
    let specs = read_specs(config, overrides)?;
    let store = BaselineStore::open(store).map_err(|e| Failure::Io(e.to_string()))?;
    let fetcher = fetch.fetcher()?;
    let sink = match alerts {
        Some(path) => {
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            AlertSink::new(Box::new(file))
        }
        None => AlertSink::stdout(),
    };

    if once {
        return watch_once(&specs, &store, &fetcher, &sink);
    }

    let stop = StopSignal::new();
    {
        let stop = stop.clone();
        ctrlc::set_handler(move || stop.stop())
            .map_err(|e| Failure::Io(format!("cannot install signal handler: {e}")))?;
    }
    info!("watching {} url(s)", specs.len());
    let stats = run_watch(&specs, &store, &fetcher, &SystemClock::new(), &sink, &stop)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    for s in stats {
        info!(
            "{}: {} checks, {} alerts, {} suppressed, {} failed",
            s.url, s.checks, s.alerts, s.suppressed, s.failures
        );
    }
    Ok(0)
}

fn watch_once(
    specs: &[WatchSpec],
    store: &BaselineStore,
    fetcher: &dyn Fetch,
    sink: &AlertSink,
) -> Result<u8, Failure> {
    let mut alerted = false;
    for spec in specs {
        let outcome = check_once(spec, store, fetcher);
        emit(&format!("{}\t{outcome}\n", spec.url))?;
        if let CheckOutcome::Alert(event) = &outcome {
            alerted = true;
            sink.emit(event)
                .map_err(|e| Failure::Io(format!("alert sink: {e}")))?;
            if let Some(cmd) = &spec.alert_command {
                run_alert_command(cmd, event);
            }
        }
    }
    Ok(if alerted { EXIT_DIFFERENT } else { 0 })
}

fn cmd_corpus(dir: &Path, out: &Path, charset: Option<&str>) -> Result<u8, Failure> {
    let entries =
        fs::read_dir(dir).map_err(|e| Failure::NoInput(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?
            .path();
        if path.is_file()
            && path
                .extension()
                .is_some_and(|x| x.eq_ignore_ascii_case("html"))
        {
            files.push(path);
        }
    }
    files.sort();

    let mut pages = Vec::with_capacity(files.len());
    for path in &files {
        let bytes =
            fs::read(path).map_err(|e| Failure::NoInput(format!("{}: {e}", path.display())))?;
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let raw = RawHtml::new(bytes);
        pages.push((
            name,
            match charset {
                Some(label) => raw.with_charset(label),
                None => raw,
            },
        ));
    }
    fs::create_dir_all(out).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;

    let results = analyze_all(&pages, Execution::Parallel);
    let mut table = format!(
        "{:<28}  {:>6}  {:>14}  {}\n",
        "file", "nodes", "total_weight", "digest"
    );
    let mut failed = false;
    for ((name, _), (path, result)) in pages.iter().zip(files.iter().zip(results)) {
        let a = match result {
            Ok(a) => a,
            Err(e) => {
                eprintln!("hdna: {name}: {e}");
                failed = true;
                continue;
            }
        };
        let stem = path.file_stem().unwrap().to_string_lossy();
        let write = |ext: &str, body: String| {
            let target = out.join(format!("{stem}.{ext}"));
            fs::write(&target, body).map_err(|e| Failure::Io(format!("{}: {e}", target.display())))
        };
        write("json", fingerprint_json(name, &a, true))?;
        write("dot", a.to_dot(DotOptions { show_weights: true }))?;
        table.push_str(&format!(
            "{:<28}  {:>6}  {:>14.6}  {}\n",
            name,
            a.nodes.len(),
            a.total_weight(),
            a.fingerprint.digest
        ));
    }
    emit(&table)?;
    Ok(if failed { EX_DATAERR } else { 0 })
}
