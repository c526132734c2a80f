//! `routeback` — pipeline driver for the route-reversal benchmark.
//!
//! The pipeline is a chain of deterministic file stages:
//!
//! ```text
//! generate -> dataset.jsonl + summary.json
//! prompt   -> prompts.jsonl
//! collect  -> responses.jsonl          (live HTTP or offline replay)
//! score    -> trials.jsonl + report.csv + report.json
//! report   -> report.csv + report.json (re-aggregation of trials.jsonl)
//! build    -> GeoJSON LineString       (one instruction text -> geometry)
//! selftest -> pass/fail table of the built-in verification suites
//! ```
//!
//! Every command is deterministic given its config, seed, and input files.

mod live;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use routeback_core::config::RunConfig;
use routeback_core::dataset::{Dataset, Difficulty, RouteRecord};
use routeback_core::eval::{
    aggregate, build_prompts, collect_responses, evaluate_trial_set, group_responses,
    prompts_from_jsonl, prompts_to_jsonl, report_to_csv, report_to_json, responses_from_jsonl,
    responses_to_jsonl, robustness_sigma, LlmClient, ModelResponse, ReplayClient,
    RouteEvaluation, TrialResult,
};
use routeback_core::geo::{GeoPoint, Polyline};
use routeback_core::graph::{build_grid, load_graph, GraphFormat, RoadGraph};
use routeback_core::pathbuilder::{build, BuildError};
use routeback_core::selftest;

const EXIT_ERROR: u8 = 1;
const EXIT_MISSING_INPUT: u8 = 2;
const EXIT_NO_INITIAL_BEARING: u8 = 3;

const EXIT_HELP: &str = "Exit codes:
  0  success
  1  any processing or validation error
  2  a required input file (graph, config, or stage file) is missing
  3  the instruction text opens with a relative motion and carries no
     absolute initial direction (build only)";

#[derive(Parser)]
#[command(
    name = "routeback",
    version,
    about = "Turn-by-turn route reversal benchmark pipeline",
    after_help = EXIT_HELP
)]
struct Cli {
    /// Run-configuration TOML; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the dataset seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for trial scoring (default: one per CPU).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Output format, for commands that support more than one.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Jsonl,
    Geojson,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generates the route dataset and its tier summary.
    Generate {
        /// Directory receiving dataset.jsonl and summary.json.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Converts a dataset into per-route prompt bundles.
    Prompt {
        #[arg(long, default_value = "dataset.jsonl")]
        dataset: PathBuf,
        #[arg(long, default_value = "prompts.jsonl")]
        out: PathBuf,
    },
    /// Collects model answers for every prompt, live or replayed.
    Collect {
        #[arg(long, default_value = "prompts.jsonl")]
        prompts: PathBuf,
        /// Previously recorded responses to replay (offline mode).
        #[arg(long)]
        replay: Option<PathBuf>,
        /// Model to query; repeatable. Defaults to every model present in
        /// the replay file.
        #[arg(long)]
        model: Vec<String>,
        #[arg(long, default_value = "responses.jsonl")]
        out: PathBuf,
    },
    /// Rebuilds geometry from one instruction text as GeoJSON.
    Build {
        /// Instruction text file, or '-' for standard input.
        #[arg(long)]
        instructions: String,
        /// Start coordinate as "lat,lon".
        #[arg(long)]
        start: String,
        /// Output path, or '-' for standard output.
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Scores responses against the dataset and writes the report.
    Score {
        #[arg(long, default_value = "dataset.jsonl")]
        dataset: PathBuf,
        #[arg(long, default_value = "responses.jsonl")]
        responses: PathBuf,
        /// Directory receiving trials.jsonl, report.csv, and report.json.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Re-aggregates a trials file into the CSV/JSON reports.
    Report {
        #[arg(long, default_value = "trials.jsonl")]
        trials: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Runs the built-in verification suites.
    Selftest,
}

// ---------------------------------------------------------------------------
// Error plumbing: every failure maps to one documented exit code.
// ---------------------------------------------------------------------------

#[derive(Debug)]
enum CliError {
    MissingInput(PathBuf),
    MissingInitialBearing,
    Other(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::MissingInput(_) => EXIT_MISSING_INPUT,
            CliError::MissingInitialBearing => EXIT_NO_INITIAL_BEARING,
            CliError::Other(_) => EXIT_ERROR,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::MissingInput(p) => format!("missing input file: {}", p.display()),
            CliError::MissingInitialBearing => {
                "instructions open with a relative motion: no absolute initial direction \
                 (flag: missing_initial_absolute_direction)"
                    .to_string()
            }
            CliError::Other(m) => m.clone(),
        }
    }
}

fn other(e: impl std::fmt::Display) -> CliError {
    CliError::Other(e.to_string())
}

fn read_input(path: &Path) -> Result<String, CliError> {
    match std::fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(CliError::MissingInput(path.to_path_buf()))
        }
        Err(e) => Err(other(format!("reading {}: {e}", path.display()))),
    }
}

fn write_output(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .map_err(|e| other(format!("creating {}: {e}", dir.display())))?;
        }
    }
    std::fs::write(path, content).map_err(|e| other(format!("writing {}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli)?;
    expect_format(
        cli.format,
        match cli.cmd {
            Cmd::Build { .. } => Format::Geojson,
            Cmd::Report { .. } => Format::Csv,
            _ => Format::Jsonl,
        },
    )?;
    match cli.cmd {
        Cmd::Generate { out_dir } => cmd_generate(&cfg, &out_dir),
        Cmd::Prompt { dataset, out } => cmd_prompt(&dataset, &out),
        Cmd::Collect {
            prompts,
            replay,
            model,
            out,
        } => cmd_collect(&cfg, &prompts, replay.as_deref(), &model, &out),
        Cmd::Build {
            instructions,
            start,
            out,
        } => cmd_build(&cfg, &instructions, &start, &out),
        Cmd::Score {
            dataset,
            responses,
            out_dir,
        } => cmd_score(&cfg, cli.jobs, &dataset, &responses, &out_dir),
        Cmd::Report { trials, out_dir } => cmd_report(&cfg, &trials, &out_dir),
        Cmd::Selftest => cmd_selftest(),
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            if !path.exists() {
                return Err(CliError::MissingInput(path.clone()));
            }
            RunConfig::from_path(path).map_err(other)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.dataset.seed = seed;
    }
    Ok(cfg)
}

/// The global --format flag is validated against what the invoked command
/// actually writes, so a typo fails loudly instead of silently emitting the
/// wrong thing.
fn expect_format(given: Option<Format>, supported: Format) -> Result<(), CliError> {
    match given {
        None => Ok(()),
        Some(f) if f == supported => Ok(()),
        Some(_) => Err(other(format!(
            "this command only writes {}",
            match supported {
                Format::Jsonl => "jsonl",
                Format::Geojson => "geojson",
                Format::Csv => "csv",
            }
        ))),
    }
}

fn load_road_graph(cfg: &RunConfig) -> Result<RoadGraph, CliError> {
    if cfg.graph.is_grid() {
        let origin = cfg.graph.origin_point().map_err(other)?;
        build_grid(
            cfg.graph.rows,
            cfg.graph.cols,
            cfg.graph.spacing_m,
            cfg.graph.jitter_m,
            cfg.graph.grid_seed,
            origin,
        )
        .map_err(other)
    } else {
        let path = Path::new(&cfg.graph.source);
        if !path.exists() {
            return Err(CliError::MissingInput(path.to_path_buf()));
        }
        let format = GraphFormat::from_name(&cfg.graph.format).map_err(other)?;
        load_graph(path, format).map_err(other)
    }
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

#[derive(serde::Serialize)]
struct TierSummary {
    difficulty: String,
    routes: usize,
    mean_length_m: f64,
    mean_turns: f64,
    mean_turn_density_per_km: f64,
    mean_complexity: f64,
}

#[derive(serde::Serialize)]
struct DatasetSummary {
    seed: u64,
    requested: usize,
    kept: usize,
    discarded: usize,
    turn_density_min: f64,
    turn_density_max: f64,
    tiers: Vec<TierSummary>,
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn tier_summary(records: &[&RouteRecord], difficulty: Difficulty) -> TierSummary {
    let n = records.len().max(1) as f64;
    TierSummary {
        difficulty: difficulty.to_string(),
        routes: records.len(),
        mean_length_m: round4(records.iter().map(|r| r.length_m).sum::<f64>() / n),
        mean_turns: round4(records.iter().map(|r| r.turns as f64).sum::<f64>() / n),
        mean_turn_density_per_km: round4(
            records.iter().map(|r| r.turn_density() * 1000.0).sum::<f64>() / n,
        ),
        mean_complexity: round4(records.iter().map(|r| r.complexity).sum::<f64>() / n),
    }
}

fn cmd_generate(cfg: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    let g = load_road_graph(cfg)?;
    let city = cfg.city.to_spec().map_err(other)?;
    let ds = routeback_core::dataset::generate_dataset_with(
        &city,
        cfg.dataset.n_routes,
        cfg.dataset.seed,
        &g,
        &cfg.dataset.gen_options(),
    )
    .map_err(other)?;

    let tiers = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard]
        .into_iter()
        .map(|d| {
            let members: Vec<&RouteRecord> = ds
                .records
                .iter()
                .filter(|r| r.difficulty == Some(d))
                .collect();
            tier_summary(&members, d)
        })
        .collect();
    let summary = DatasetSummary {
        seed: ds.seed,
        requested: cfg.dataset.n_routes,
        kept: ds.records.len(),
        discarded: ds.discarded.len(),
        turn_density_min: ds.d_min,
        turn_density_max: ds.d_max,
        tiers,
    };

    write_output(&out_dir.join("dataset.jsonl"), &ds.to_jsonl())?;
    let mut summary_json = serde_json::to_string_pretty(&summary).map_err(other)?;
    summary_json.push('\n');
    write_output(&out_dir.join("summary.json"), &summary_json)?;
    eprintln!(
        "generated {} routes ({} discarded in buffer zones) -> {}",
        ds.records.len(),
        ds.discarded.len(),
        out_dir.join("dataset.jsonl").display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// prompt
// ---------------------------------------------------------------------------

fn cmd_prompt(dataset: &Path, out: &Path) -> Result<(), CliError> {
    let ds = Dataset::from_jsonl(&read_input(dataset)?).map_err(other)?;
    let mut bundles = Vec::with_capacity(ds.records.len());
    for r in &ds.records {
        bundles.push(build_prompts(r).map_err(|e| other(format!("route {}: {e}", r.id)))?);
    }
    write_output(out, &prompts_to_jsonl(&bundles))?;
    eprintln!("wrote {} prompt bundles -> {}", bundles.len(), out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// collect
// ---------------------------------------------------------------------------

fn cmd_collect(
    cfg: &RunConfig,
    prompts: &Path,
    replay: Option<&Path>,
    models: &[String],
    out: &Path,
) -> Result<(), CliError> {
    let bundles = prompts_from_jsonl(&read_input(prompts)?).map_err(other)?;

    let mut models = models.to_vec();
    let mut client: Box<dyn LlmClient> = match replay {
        Some(path) => {
            let text = read_input(path)?;
            if models.is_empty() {
                // Default to every model the replay file knows about.
                let recorded = responses_from_jsonl(&text).map_err(other)?;
                let names: BTreeSet<String> = recorded.iter().map(|r| r.model.clone()).collect();
                models = names.into_iter().collect();
            }
            Box::new(ReplayClient::from_jsonl(&text).map_err(other)?)
        }
        None => {
            if cfg.client.endpoint == "replay" {
                return Err(other(
                    "no live endpoint configured: pass --replay <file> or set [client] endpoint",
                ));
            }
            if models.is_empty() {
                return Err(other("live collection needs at least one --model"));
            }
            Box::new(live::LiveClient::new(&cfg.client).map_err(other)?)
        }
    };
    if models.is_empty() {
        return Err(other("no models to query"));
    }

    let trials = cfg.evaluation.trials;
    let mut responses: Vec<ModelResponse> = Vec::new();
    for model in &models {
        for bundle in &bundles {
            let set = collect_responses(client.as_mut(), bundle, model, trials)
                .map_err(|e| other(format!("collecting {model} on {}: {e}", bundle.route_id)))?;
            responses.extend(set.responses);
        }
    }
    write_output(out, &responses_to_jsonl(&responses))?;
    eprintln!(
        "collected {} responses ({} models x {} routes x {} trials) -> {}",
        responses.len(),
        models.len(),
        bundles.len(),
        trials,
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// build
// ---------------------------------------------------------------------------

fn parse_start(s: &str) -> Result<GeoPoint, CliError> {
    let (lat, lon) = s
        .split_once(',')
        .ok_or_else(|| other(format!("--start must be \"lat,lon\", got {s:?}")))?;
    let lat: f64 = lat.trim().parse().map_err(|e| other(format!("latitude: {e}")))?;
    let lon: f64 = lon.trim().parse().map_err(|e| other(format!("longitude: {e}")))?;
    GeoPoint::new(lat, lon).map_err(other)
}

fn polyline_coords(p: &Polyline) -> Vec<[f64; 2]> {
    p.points().iter().map(|q| [q.lon, q.lat]).collect()
}

fn cmd_build(cfg: &RunConfig, instructions: &str, start: &str, out: &str) -> Result<(), CliError> {
    let text = if instructions == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| other(format!("reading stdin: {e}")))?;
        buf
    } else {
        read_input(Path::new(instructions))?
    };
    let start = parse_start(start)?;
    let g = load_road_graph(cfg)?;

    let built = build(&text, start, &g).map_err(|e| match e {
        BuildError::MissingInitialBearing => CliError::MissingInitialBearing,
        e => other(e),
    })?;

    let feature = serde_json::json!({
        "type": "Feature",
        "geometry": {
            "type": "LineString",
            "coordinates": polyline_coords(&built.geometry),
        },
        "properties": {
            "snapped_nodes": built.snapped,
            "off_network_waypoints": built.diagnostics.off_network,
            "unreachable_pairs": built.diagnostics.unreachable_pairs,
            "clean": built.diagnostics.clean(),
            "raw_trail": polyline_coords(&built.raw),
            "length_m": round4(built.geometry.length_m()),
        },
    });
    let mut body = serde_json::to_string_pretty(&feature).map_err(other)?;
    body.push('\n');
    if out == "-" {
        print!("{body}");
        Ok(())
    } else {
        write_output(Path::new(out), &body)
    }
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

fn cmd_score(
    cfg: &RunConfig,
    jobs: Option<usize>,
    dataset: &Path,
    responses: &Path,
    out_dir: &Path,
) -> Result<(), CliError> {
    let ds = Dataset::from_jsonl(&read_input(dataset)?).map_err(other)?;
    let resp = responses_from_jsonl(&read_input(responses)?).map_err(other)?;
    let g = load_road_graph(cfg)?;
    let params = cfg.eval_params();

    let by_id: BTreeMap<&str, &RouteRecord> =
        ds.records.iter().map(|r| (r.id.as_str(), r)).collect();

    let (sets, problems) = group_responses(resp, params.trials);
    for p in &problems {
        eprintln!("warning: {p}");
    }
    // Uncovered routes are listed per model, not fatal.
    let models: BTreeSet<String> = sets.iter().map(|s| s.model.clone()).collect();
    for model in &models {
        let covered: BTreeSet<&str> = sets
            .iter()
            .filter(|s| &s.model == model)
            .map(|s| s.route_id.as_str())
            .collect();
        for r in &ds.records {
            if !covered.contains(r.id.as_str()) {
                eprintln!("warning: model {model} has no complete trial set for route {}", r.id);
            }
        }
    }
    let sets: Vec<_> = sets
        .into_iter()
        .filter(|s| {
            let known = by_id.contains_key(s.route_id.as_str());
            if !known {
                eprintln!(
                    "warning: responses for {} reference unknown route {}",
                    s.model, s.route_id
                );
            }
            known
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0)) // 0 = one per CPU
        .build()
        .map_err(other)?;
    let evals: Vec<RouteEvaluation> = pool.install(|| {
        sets.par_iter()
            .map(|set| evaluate_trial_set(by_id[set.route_id.as_str()], set, &g, &params))
            .collect()
    });

    let mut trials_jsonl = String::new();
    for eval in &evals {
        for t in &eval.trials {
            let line = serde_json::to_string(t).map_err(other)?;
            let _ = writeln!(trials_jsonl, "{line}");
        }
    }
    let report = aggregate(&evals);
    write_output(&out_dir.join("trials.jsonl"), &trials_jsonl)?;
    write_output(&out_dir.join("report.csv"), &report_to_csv(&report))?;
    write_output(&out_dir.join("report.json"), &report_to_json(&report))?;
    eprintln!(
        "scored {} trial sets over {} models -> {}",
        evals.len(),
        models.len(),
        out_dir.join("report.csv").display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

fn cmd_report(cfg: &RunConfig, trials: &Path, out_dir: &Path) -> Result<(), CliError> {
    let text = read_input(trials)?;
    let mut parsed: Vec<TrialResult> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        parsed.push(
            serde_json::from_str(line)
                .map_err(|e| other(format!("{} line {}: {e}", trials.display(), i + 1)))?,
        );
    }

    let params = cfg.eval_params();
    let mut grouped: BTreeMap<(String, String), Vec<TrialResult>> = BTreeMap::new();
    for t in parsed {
        grouped
            .entry((t.model.clone(), t.route_id.clone()))
            .or_default()
            .push(t);
    }
    let evals: Vec<RouteEvaluation> = grouped
        .into_iter()
        .map(|((model, route_id), mut trials)| {
            trials.sort_by_key(|t| t.trial);
            let geoms: Vec<&Polyline> = trials.iter().filter_map(|t| t.geometry.as_ref()).collect();
            let sigma = robustness_sigma(&geoms, &params.metric, &params.weights)
                .ok()
                .map(|(s, _)| s);
            RouteEvaluation {
                difficulty: trials[0].difficulty,
                model,
                route_id,
                trials,
                sigma,
            }
        })
        .collect();

    let report = aggregate(&evals);
    write_output(&out_dir.join("report.csv"), &report_to_csv(&report))?;
    write_output(&out_dir.join("report.json"), &report_to_json(&report))?;
    eprintln!(
        "aggregated {} route evaluations -> {}",
        evals.len(),
        out_dir.join("report.csv").display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// selftest
// ---------------------------------------------------------------------------

fn cmd_selftest() -> Result<(), CliError> {
    let results = selftest::run_all();
    let mut failed = 0;
    for r in &results {
        println!(
            "{:<24} {}  {:>6} ms  {}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.millis,
            r.detail
        );
        if !r.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(other(format!("{failed} verification suite(s) failed")));
    }
    println!("all {} suites passed", results.len());
    Ok(())
}

// ---------------------------------------------------------------------------

// Sanity coverage for pure CLI helpers; end-to-end behavior is exercised by
// the integration suite.
#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_start_accepts_lat_lon() {
        let p = parse_start("43.65, -79.38").unwrap();
        assert!((p.lat - 43.65).abs() < 1e-12);
        assert!((p.lon + 79.38).abs() < 1e-12);
    }

    #[test]
    fn parse_start_rejects_garbage() {
        assert!(parse_start("fifty north").is_err());
        assert!(parse_start("95.0,10.0").is_err());
    }

    #[test]
    fn errors_map_to_documented_exit_codes() {
        assert_eq!(CliError::MissingInput("x".into()).code(), 2);
        assert_eq!(CliError::MissingInitialBearing.code(), 3);
        assert_eq!(CliError::Other("boom".into()).code(), 1);
    }
}
