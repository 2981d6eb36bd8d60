//! Command-line front end. [`run`] parses arguments, writes results to
//! `out` and diagnostics to `err`, and returns the process exit code:
//! 0 on success, 1 on a runtime error, 2 on a usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analytics::{
    cooccurrence_graph, daily_counts, default_range, detect_peaks, louvain, most_connected_users, popular_messages,
    to_export, to_graphml, top_recent_terms, user_graph, TrendWindow, DEFAULT_RECENT_TERMS,
};
use crate::ingest::{ingest, load_watchlists, IngestOptions, SourceDescriptor};
use crate::metrics::ueq::read_responses_csv;
use crate::metrics::{
    benchmark_all, read_events_jsonl, session_breakdown, sessions_csv, summarize_logs, ueq_score, BenchmarkConfig,
    ItemMap,
};
use crate::model::{ActivityEvent, DateRange, Watchlist, WeightedGraph};
use crate::retrieval::{build_index_with, load_pairs, suggest_in, IdfMode, TfIdfIndex, DEFAULT_K};
use crate::service::{Accounts, AppState, ServiceConfig};
use crate::store::{open_store, OpenMode, StoreHandle};

type CliResult = Result<(), String>;

#[derive(Parser, Debug)]
#[command(name = "hatewatch", version, about = "Hate-term monitoring and counter-narrative suggestion")]
struct Cli {
    /// Store directory.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for randomized steps (Louvain node order).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Replay a JSONL file into the store, keeping watchlist matches.
    Ingest {
        #[arg(long)]
        source: PathBuf,
        /// Watchlist JSON file; repeatable. Defaults to the example hashtags.
        #[arg(long)]
        watchlist: Vec<PathBuf>,
        #[arg(long)]
        lang: Option<String>,
    },
    /// Build retrieval indexes.
    Index {
        #[command(subcommand)]
        command: IndexCommand,
    },
    /// Suggest counter-narratives for a message.
    Suggest {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        text: String,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        /// Defaults to the index language.
        #[arg(long)]
        lang: Option<String>,
    },
    /// Term frequency analytics.
    Trends {
        #[command(subcommand)]
        command: TrendsCommand,
    },
    /// Hashtag and user networks.
    Network {
        #[command(subcommand)]
        command: NetworkCommand,
    },
    /// Summarize an activity log.
    Report {
        /// JSONL activity log; the store's log is used when absent.
        #[arg(long)]
        logs: Option<PathBuf>,
        /// Index artifacts for relevance figures; repeatable.
        #[arg(long)]
        index: Vec<PathBuf>,
        /// Directory for summary.json and sessions.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score questionnaire responses.
    Ueq {
        #[arg(long)]
        responses: PathBuf,
        /// Item map JSON; the standard 26-item map when absent.
        #[arg(long)]
        item_map: Option<PathBuf>,
        /// Benchmark thresholds JSON (scale -> cut points).
        #[arg(long)]
        benchmark: Option<PathBuf>,
        /// Responses are on the 1..7 scale rather than -3..3.
        #[arg(long)]
        seven_point: bool,
    },
    /// Operator accounts.
    Account {
        #[command(subcommand)]
        command: AccountCommand,
    },
    /// Run the HTTP API.
    Serve {
        /// TOML service config; HATEWATCH_* variables override it
        #[arg(long)]
        config: Option<PathBuf>,
        /// Index artifact; repeatable. Built from pairs when absent.
        #[arg(long)]
        index: Vec<PathBuf>,
        /// Seed pair corpus (CSV or JSONL); repeatable.
        #[arg(long)]
        pairs: Vec<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum IndexCommand {
    Build {
        /// Pair corpus (CSV or JSONL).
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long)]
        lang: String,
        #[arg(long)]
        out: PathBuf,
        /// Use ln(1 + N/df) instead of ln(N/df).
        #[arg(long)]
        smooth_idf: bool,
    },
}

#[derive(Args, Debug)]
struct RangeArgs {
    /// First day (YYYY-MM-DD).
    #[arg(long)]
    from: Option<NaiveDate>,
    /// Last day (YYYY-MM-DD). Defaults to the latest stored day.
    #[arg(long)]
    to: Option<NaiveDate>,
}

#[derive(Subcommand, Debug)]
enum TrendsCommand {
    /// Daily counts for a term.
    Series {
        #[arg(long)]
        term: String,
        #[command(flatten)]
        range: RangeArgs,
        /// Print `date,count,is_peak` CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Peak days for a term.
    Peaks {
        #[arg(long)]
        term: String,
        #[command(flatten)]
        range: RangeArgs,
        #[arg(long)]
        csv: bool,
    },
    /// Most recently used watchlist terms.
    Recent {
        #[arg(long, default_value_t = DEFAULT_RECENT_TERMS)]
        k: usize,
        /// Reference time (RFC 3339); defaults to the current time.
        #[arg(long)]
        now: Option<DateTime<Utc>>,
        #[arg(long)]
        watchlist: Vec<PathBuf>,
    },
    /// Most retweeted messages containing a term.
    Popular {
        #[arg(long)]
        term: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[command(flatten)]
        range: RangeArgs,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GraphFormat {
    Json,
    Graphml,
}

#[derive(Subcommand, Debug)]
enum NetworkCommand {
    /// Hashtag co-occurrence network around a term, with communities.
    Hashtags {
        #[arg(long)]
        term: String,
        #[command(flatten)]
        range: RangeArgs,
        #[arg(long, default_value_t = 1)]
        min_weight: u32,
        #[arg(long, value_enum, default_value_t = GraphFormat::Json)]
        format: GraphFormat,
    },
    /// Retweet/reply network, with communities.
    Users {
        #[command(flatten)]
        range: RangeArgs,
        #[arg(long, value_enum, default_value_t = GraphFormat::Json)]
        format: GraphFormat,
    },
    /// Users ranked by degree in the retweet/reply network.
    TopUsers {
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[command(flatten)]
        range: RangeArgs,
    },
}

#[derive(Subcommand, Debug)]
enum AccountCommand {
    /// Provision (or reset) an operator account in the store.
    Add {
        #[arg(long)]
        operator: String,
        #[arg(long)]
        secret: String,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => 0,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> CliResult {
    match &cli.command {
        Command::Ingest { source, watchlist, lang } => cmd_ingest(cli, out, source, watchlist, lang.clone()),
        Command::Index { command: IndexCommand::Build { pairs, lang, out: dest, smooth_idf } } => {
            cmd_index_build(cli, out, pairs.as_deref(), lang, dest, *smooth_idf)
        }
        Command::Suggest { index, text, k, lang } => cmd_suggest(out, index, text, *k, lang.as_deref()),
        Command::Trends { command } => cmd_trends(cli, out, command),
        Command::Network { command } => cmd_network(cli, out, command),
        Command::Report { logs, index, out: dir } => cmd_report(cli, out, logs.as_deref(), index, dir.as_deref()),
        Command::Ueq { responses, item_map, benchmark, seven_point } => {
            cmd_ueq(cli, out, responses, item_map.as_deref(), benchmark.as_deref(), *seven_point)
        }
        Command::Account { command: AccountCommand::Add { operator, secret } } => {
            cmd_account_add(cli, out, operator, secret)
        }
        Command::Serve { config, index, pairs } => cmd_serve(cli, out, config.as_deref(), index, pairs),
    }
}

fn store_path(cli: &Cli) -> Result<&Path, String> {
    cli.store.as_deref().ok_or_else(|| "--store is required for this command".to_string())
}

fn open(cli: &Cli, mode: OpenMode) -> Result<StoreHandle, String> {
    open_store(store_path(cli)?, mode).map_err(|e| e.to_string())
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    writeln!(out, "{text}").map_err(|e| e.to_string())
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult {
    out.write_all(text.as_bytes()).map_err(|e| e.to_string())
}

fn watchlists(paths: &[PathBuf]) -> Result<Vec<Watchlist>, String> {
    if paths.is_empty() {
        return Ok(Watchlist::example_hashtags());
    }
    let mut all = Vec::new();
    for p in paths {
        all.extend(load_watchlists(p).map_err(|e| e.to_string())?);
    }
    Ok(all)
}

fn cmd_ingest(cli: &Cli, out: &mut dyn Write, source: &Path, paths: &[PathBuf], lang: Option<String>) -> CliResult {
    let store = open(cli, OpenMode::ReadWrite)?;
    let lists = watchlists(paths)?;
    let stats = ingest(&SourceDescriptor::file(source), &lists, &store, &IngestOptions { language: lang })
        .map_err(|e| e.to_string())?;
    if cli.json {
        return emit_json(out, &stats);
    }
    let mut text = String::from("language  original  replies  retweets  total\n");
    for (lang, c) in &stats.languages {
        text += &format!("{lang:<8}  {:>8}  {:>7}  {:>8}  {:>5}\n", c.original, c.replies, c.retweets, c.total);
    }
    let t = stats.totals();
    text += &format!("{:<8}  {:>8}  {:>7}  {:>8}  {:>5}\n", "all", t.original, t.replies, t.retweets, t.total);
    text += &format!(
        "stored {}  duplicates {}  rejected {}  parse errors {}\n",
        stats.stored, stats.duplicates, stats.rejected_no_match, stats.parse_errors
    );
    emit(out, &text)
}

fn cmd_index_build(
    cli: &Cli,
    out: &mut dyn Write,
    pairs: Option<&Path>,
    lang: &str,
    dest: &Path,
    smooth: bool,
) -> CliResult {
    let mut corpus = match pairs {
        Some(p) => load_pairs(p).map_err(|e| e.to_string())?,
        None => Vec::new(),
    };
    let mut source_version = None;
    if cli.store.is_some() {
        let store = open(cli, OpenMode::Read)?;
        let snap = store.snapshot();
        let stored = snap.pairs().map_err(|e| e.to_string())?;
        for p in stored {
            if !corpus.iter().any(|c| c.triple() == p.triple()) {
                corpus.push(p.clone());
            }
        }
        source_version = Some(snap.pairs_version());
    } else if pairs.is_none() {
        return Err("give --pairs, --store, or both".into());
    }
    let mode = if smooth { IdfMode::Smooth } else { IdfMode::Plain };
    let mut index = build_index_with(&corpus, lang, mode).map_err(|e| e.to_string())?;
    if let Some(v) = source_version {
        index = index.with_source_version(v);
    }
    index.save(dest).map_err(|e| e.to_string())?;
    let summary = serde_json::json!({
        "language": index.language,
        "documents": index.doc_count,
        "vocabulary": index.vocabulary.len(),
        "source_version": index.source_version,
        "out": dest.display().to_string(),
    });
    if cli.json {
        emit_json(out, &summary)
    } else {
        emit(
            out,
            &format!(
                "indexed {} {} pairs, {} terms -> {}\n",
                index.doc_count,
                index.language,
                index.vocabulary.len(),
                dest.display()
            ),
        )
    }
}

fn cmd_suggest(out: &mut dyn Write, index: &Path, text: &str, k: usize, lang: Option<&str>) -> CliResult {
    let index = TfIdfIndex::load(index).map_err(|e| e.to_string())?;
    let lang = lang.unwrap_or(&index.language).to_string();
    let suggestions = suggest_in(&lang, text, &index, k).map_err(|e| e.to_string())?;
    emit_json(out, &suggestions)
}

fn range_for(store: &StoreHandle, range: &RangeArgs) -> Result<DateRange, String> {
    let snap = store.snapshot();
    let tweets = snap.tweets().map_err(|e| e.to_string())?;
    default_range(tweets, range.from, range.to, Utc::now().date_naive()).map_err(|e| e.to_string())
}

fn cmd_trends(cli: &Cli, out: &mut dyn Write, command: &TrendsCommand) -> CliResult {
    let store = open(cli, OpenMode::Read)?;
    let snap = store.snapshot();
    let tweets = snap.tweets().map_err(|e| e.to_string())?;
    match command {
        TrendsCommand::Series { term, range, csv } | TrendsCommand::Peaks { term, range, csv } => {
            let counts = daily_counts(tweets, term, range_for(&store, range)?);
            let peaks_only = matches!(command, TrendsCommand::Peaks { .. });
            if !peaks_only && !*csv && cli.json {
                return emit_json(out, &counts);
            }
            let report = detect_peaks(&counts.series).map_err(|e| e.to_string())?;
            if *csv {
                emit(out, &report.to_csv())
            } else if cli.json {
                emit_json(out, &report)
            } else if peaks_only {
                let mut text = format!(
                    "mean {:.4}  sd {:.4}  threshold {:.4}\n",
                    report.mean, report.sd, report.threshold
                );
                for d in &report.peak_dates {
                    text += &format!("{d}\n");
                }
                emit(out, &text)
            } else {
                let mut text = String::new();
                for (d, c) in &report.series.buckets {
                    text += &format!("{d}  {c:>6}{}\n", if report.is_peak(*d) { "  *" } else { "" });
                }
                if !counts.term_seen {
                    text += &format!("note: '{term}' does not occur in the store\n");
                }
                emit(out, &text)
            }
        }
        TrendsCommand::Recent { k, now, watchlist } => {
            let lists = watchlists(watchlist)?;
            let terms = top_recent_terms(tweets, &lists, now.unwrap_or_else(Utc::now), *k);
            if cli.json {
                return emit_json(out, &terms);
            }
            let text: String = terms.iter().map(|t| format!("{}  {}\n", t.last_seen.to_rfc3339(), t.term)).collect();
            emit(out, &text)
        }
        TrendsCommand::Popular { term, k, range } => {
            let msgs = popular_messages(tweets, term, range_for(&store, range)?, *k);
            if cli.json {
                return emit_json(out, &msgs);
            }
            let text: String =
                msgs.iter().map(|m| format!("{:>6}  {}  @{}  {}\n", m.retweet_count, m.id, m.author, m.text)).collect();
            emit(out, &text)
        }
    }
}

fn emit_graph(out: &mut dyn Write, graph: &WeightedGraph, seed: u64, format: GraphFormat) -> CliResult {
    let partition = louvain(graph, seed);
    match format {
        GraphFormat::Json => emit_json(out, &to_export(graph, Some(&partition))),
        GraphFormat::Graphml => emit(out, &to_graphml(graph, Some(&partition))),
    }
}

fn cmd_network(cli: &Cli, out: &mut dyn Write, command: &NetworkCommand) -> CliResult {
    let store = open(cli, OpenMode::Read)?;
    let snap = store.snapshot();
    let tweets = snap.tweets().map_err(|e| e.to_string())?;
    match command {
        NetworkCommand::Hashtags { term, range, min_weight, format } => {
            let r = range_for(&store, range)?;
            let window = TrendWindow::new(term, r.start, r.end).map_err(|e| e.to_string())?;
            emit_graph(out, &cooccurrence_graph(tweets, &window, *min_weight), cli.seed, *format)
        }
        NetworkCommand::Users { range, format } => {
            emit_graph(out, &user_graph(tweets, range_for(&store, range)?), cli.seed, *format)
        }
        NetworkCommand::TopUsers { k, range } => {
            let ranking = most_connected_users(&user_graph(tweets, range_for(&store, range)?), *k);
            if cli.json {
                return emit_json(out, &ranking);
            }
            let text: String = ranking
                .iter()
                .map(|u| format!("{:<20}  {:>4}  {:>8.1}\n", u.user, u.degree, u.weighted_degree))
                .collect();
            emit(out, &text)
        }
    }
}

fn cmd_report(cli: &Cli, out: &mut dyn Write, logs: Option<&Path>, index: &[PathBuf], dir: Option<&Path>) -> CliResult {
    let events: Vec<ActivityEvent> = match logs {
        Some(p) => {
            let data = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            read_events_jsonl(&data).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => {
            let store = open(cli, OpenMode::Read)?;
            let snap = store.snapshot();
            snap.events().map_err(|e| e.to_string())?.to_vec()
        }
    };
    let indexes = index
        .iter()
        .map(|p| TfIdfIndex::load(p).map_err(|e| format!("{}: {e}", p.display())))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&TfIdfIndex> = indexes.iter().collect();
    let summary = summarize_logs(&events, &refs).map_err(|e| e.to_string())?;
    let rows = session_breakdown(&events).map_err(|e| e.to_string())?;
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
        let json = serde_json::to_string_pretty(&summary).map_err(|e| e.to_string())?;
        std::fs::write(dir.join("summary.json"), json + "\n").map_err(|e| e.to_string())?;
        std::fs::write(dir.join("sessions.csv"), sessions_csv(&rows)).map_err(|e| e.to_string())?;
    }
    emit_json(out, &summary)
}

fn cmd_ueq(
    cli: &Cli,
    out: &mut dyn Write,
    responses: &Path,
    item_map: Option<&Path>,
    benchmark: Option<&Path>,
    seven_point: bool,
) -> CliResult {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()));
    let map: ItemMap = match item_map {
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))?,
        None => ItemMap::standard(),
    };
    let file = std::fs::File::open(responses).map_err(|e| format!("{}: {e}", responses.display()))?;
    let mut rows = read_responses_csv(file, map.items.len()).map_err(|e| e.to_string())?;
    if seven_point {
        rows.iter_mut().flatten().for_each(|v| *v -= 4.0);
    }
    let result = ueq_score(&rows, &map).map_err(|e| e.to_string())?;
    let categories = match benchmark {
        Some(p) => {
            let cfg: BenchmarkConfig = serde_json::from_str(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))?;
            Some(benchmark_all(&result, &cfg).map_err(|e| e.to_string())?)
        }
        None => None,
    };
    if cli.json {
        return emit_json(out, &serde_json::json!({ "result": result, "benchmark": categories }));
    }
    let mut text = String::from("scale           mean      sd  category\n");
    for (scale, stat) in &result.scales {
        let cat = categories
            .as_ref()
            .and_then(|c| c.get(scale))
            .map(|c| serde_json::to_value(c).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
            .unwrap_or_default();
        let name = serde_json::to_value(scale).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        text += &format!("{name:<14}  {:>6.3}  {:>6.3}  {cat}\n", stat.mean, stat.sd);
    }
    text += &format!(
        "pragmatic {:.3}  hedonic {:.3}  kept {}  discarded {}\n",
        result.pragmatic_quality, result.hedonic_quality, result.n_kept, result.n_discarded
    );
    emit(out, &text)
}

fn cmd_account_add(cli: &Cli, out: &mut dyn Write, operator: &str, secret: &str) -> CliResult {
    let root = store_path(cli)?;
    std::fs::create_dir_all(root).map_err(|e| e.to_string())?;
    let mut accounts = Accounts::load(root).map_err(|e| e.to_string())?;
    accounts.provision(operator, secret);
    accounts.save(root).map_err(|e| e.to_string())?;
    if cli.json {
        emit_json(out, &serde_json::json!({ "operator_id": operator }))
    } else {
        emit(out, &format!("provisioned {operator}\n"))
    }
}

fn cmd_serve(cli: &Cli, out: &mut dyn Write, config: Option<&Path>, index: &[PathBuf], pairs: &[PathBuf]) -> CliResult {
    let mut cfg = ServiceConfig::load(config).map_err(|e| e.to_string())?;
    cfg.seed = cli.seed;
    let store = open(cli, OpenMode::ReadWrite)?;
    let indexes = index
        .iter()
        .map(|p| TfIdfIndex::load(p).map_err(|e| format!("{}: {e}", p.display())))
        .collect::<Result<Vec<_>, _>>()?;
    let mut base = Vec::new();
    for p in pairs {
        base.extend(load_pairs(p).map_err(|e| format!("{}: {e}", p.display()))?);
    }
    let addr: std::net::SocketAddr =
        format!("{}:{}", cfg.bind, cfg.port).parse().map_err(|e| format!("bad bind address: {e}"))?;
    let state = AppState::builder(cfg, store).indexes(indexes).base_pairs(base).build().map_err(|e| e.to_string())?;
    let _ = writeln!(out, "listening on http://{addr}");
    let _ = out.flush();
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(crate::service::serve(state, addr, async {
        let _ = tokio::signal::ctrl_c().await;
    }))
    .map_err(|e| e.to_string())
}
