//! Route-reversal evaluation: prompt assembly, response collection, per-trial
//! scoring against the reversed ground truth, answer-consistency and
//! confidence measures, failure-mode detectors, and report aggregation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Difficulty, RouteRecord};
use crate::geo::{
    circular_diff_deg, format_dms, haversine_distance, initial_bearing, Bearing, Compass8,
    GeoError, GeoPoint, Polyline,
};
use crate::graph::RoadGraph;
use crate::instr::{parse_instructions, Command, DepartDirection, ParseDiagnostics, TurnClass};
use crate::metrics::{
    deviation_angle, return_success, similarity_with, ComponentScores, MetricError, MetricParams,
    MetricVector, SimilarityWeights, RETURN_TOL_M,
};
use crate::pathbuilder::{build_from_commands, dead_reckon, BuildDiagnostics, BuildError};

/// Trials requested per route.
pub const DEFAULT_TRIALS: usize = 6;
/// Net dead-reckoned displacement below this leaves the compass sector
/// undefined.
pub const MIN_NET_DISPLACEMENT_M: f64 = 20.0;
/// Cardinal half-width used when naming the net-displacement sector.
pub const SECTOR_CARDINAL_HALF_WIDTH_DEG: f64 = 15.0;
/// Index-aligned match ratio at or above which a response is flagged as a
/// naive semantic inversion.
pub const INVERSION_FLAG_THRESHOLD: f64 = 0.8;
/// Relative distance tolerance used when matching continue commands.
pub const INVERSION_DISTANCE_REL_TOL: f64 = 0.1;
/// Unparseable-line ratio above which a response is flagged.
pub const UNPARSEABLE_FLAG_RATIO: f64 = 0.2;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("route {route_id} has {got} trial responses, expected {want}")]
    FixtureMissing {
        route_id: String,
        got: usize,
        want: usize,
    },
    #[error("no replayed response for model {model}, route {route_id}, trial {trial}")]
    ReplayMissing {
        model: String,
        route_id: String,
        trial: usize,
    },
    #[error("record has no instructions")]
    EmptyInstructions,
    #[error("robustness needs at least 2 built trials, got {0}")]
    InsufficientTrials(usize),
    #[error("net displacement below {min_m} m leaves the sector undefined")]
    NetDisplacementTooSmall { min_m: f64 },
    #[error("response line {line}: {msg}")]
    ResponseParse { line: usize, msg: String },
    #[error("transport: {0}")]
    Transport(String),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

// ---------------------------------------------------------------------------
// Prompts
// ---------------------------------------------------------------------------

/// System-style guide prompt; `{city}` is replaced with the record's city
/// display name ("City, Country").
pub const GUIDE_PROMPT_TEMPLATE: &str = r#"Generate a road network for {city} based on your knowledge.

The following task involves reversing a navigation route from destination (D) back to start point (S). Follow these key requirements:

1. Start with absolute direction. Use precise cardinal directions (North, South, East, West). Avoid ambiguous terms like "head backward".
2. No simple inversion. Understand the route thoroughly and create logical return directions rather than merely reversing steps.
3. Maintain consistent format. Use standard navigation terms ("head", "turn", "continue", "arrive") as in the original directions.
4. Reference landmarks. Include nearby points of interest (POI) to demonstrate geographical context.
5. Begin with absolute direction. The first instruction must specify an absolute direction (non-negotiable).

Example: ......"#;

/// The two texts sent to a model for one route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub route_id: String,
    pub city: String,
    pub guide: String,
    pub instruction: String,
}

/// Assembles the guide and instruction prompts for one route: the guide
/// from the template, the instruction as a DMS start point followed by the
/// numbered forward instructions.
pub fn build_prompts(record: &RouteRecord) -> Result<PromptBundle, EvalError> {
    if record.instructions.is_empty() {
        return Err(EvalError::EmptyInstructions);
    }
    let guide = GUIDE_PROMPT_TEMPLATE.replace("{city}", &record.city);
    let mut instruction = format!("Start Point: {}\n", format_dms(record.start));
    for (i, line) in record.instructions.iter().enumerate() {
        instruction.push('\n');
        instruction.push_str(&format!("{}. {}", i + 1, line));
    }
    Ok(PromptBundle {
        route_id: record.id.clone(),
        city: record.city.clone(),
        guide,
        instruction,
    })
}

pub fn prompts_to_jsonl(bundles: &[PromptBundle]) -> String {
    let mut out = String::new();
    for b in bundles {
        out.push_str(&serde_json::to_string(b).expect("bundle serializes"));
        out.push('\n');
    }
    out
}

pub fn prompts_from_jsonl(text: &str) -> Result<Vec<PromptBundle>, EvalError> {
    parse_jsonl(text)
}

// ---------------------------------------------------------------------------
// Responses
// ---------------------------------------------------------------------------

/// One model answer for one trial of one route. `logprobs`, when present,
/// pairs each generated token with its log probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub model: String,
    pub route_id: String,
    pub trial: usize,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprobs: Option<Vec<(String, f64)>>,
}

/// All trials collected for one (model, route) pair, ordered by trial index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSet {
    pub model: String,
    pub route_id: String,
    pub responses: Vec<ModelResponse>,
}

pub fn responses_to_jsonl(responses: &[ModelResponse]) -> String {
    let mut out = String::new();
    for r in responses {
        out.push_str(&serde_json::to_string(r).expect("response serializes"));
        out.push('\n');
    }
    out
}

pub fn responses_from_jsonl(text: &str) -> Result<Vec<ModelResponse>, EvalError> {
    parse_jsonl(text)
}

fn parse_jsonl<T: serde::de::DeserializeOwned>(text: &str) -> Result<Vec<T>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(line).map_err(|e| EvalError::ResponseParse {
                line: i + 1,
                msg: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

/// Groups loose responses into per-route trial sets. Sets whose trials are
/// incomplete or duplicated are reported as errors and skipped, not fatal.
pub fn group_responses(
    responses: Vec<ModelResponse>,
    want: usize,
) -> (Vec<TrialSet>, Vec<EvalError>) {
    let mut by_key: BTreeMap<(String, String), Vec<ModelResponse>> = BTreeMap::new();
    for r in responses {
        by_key
            .entry((r.model.clone(), r.route_id.clone()))
            .or_default()
            .push(r);
    }
    let mut sets = Vec::new();
    let mut problems = Vec::new();
    for ((model, route_id), mut rs) in by_key {
        rs.sort_by_key(|r| r.trial);
        let trials_ok = rs.len() == want && rs.iter().enumerate().all(|(i, r)| r.trial == i);
        if !trials_ok {
            problems.push(EvalError::FixtureMissing {
                route_id,
                got: rs.len(),
                want,
            });
            continue;
        }
        sets.push(TrialSet {
            model,
            route_id,
            responses: rs,
        });
    }
    (sets, problems)
}

// ---------------------------------------------------------------------------
// Clients
// ---------------------------------------------------------------------------

/// Anything that can answer a reversal prompt. Implementations include the
/// offline replay client here and live HTTP clients in the CLI.
pub trait LlmClient {
    fn complete(
        &mut self,
        model: &str,
        bundle: &PromptBundle,
        trial: usize,
    ) -> Result<(String, Option<Vec<(String, f64)>>), EvalError>;
}

/// Replays previously recorded responses keyed by (model, route, trial);
/// the offline backend for deterministic runs.
#[derive(Debug, Default, Clone)]
pub struct ReplayClient {
    responses: BTreeMap<(String, String, usize), ModelResponse>,
}

impl ReplayClient {
    pub fn from_responses(responses: Vec<ModelResponse>) -> Self {
        let mut map = BTreeMap::new();
        for r in responses {
            map.insert((r.model.clone(), r.route_id.clone(), r.trial), r);
        }
        ReplayClient { responses: map }
    }

    pub fn from_jsonl(text: &str) -> Result<Self, EvalError> {
        Ok(Self::from_responses(responses_from_jsonl(text)?))
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl LlmClient for ReplayClient {
    fn complete(
        &mut self,
        model: &str,
        bundle: &PromptBundle,
        trial: usize,
    ) -> Result<(String, Option<Vec<(String, f64)>>), EvalError> {
        let key = (model.to_string(), bundle.route_id.clone(), trial);
        match self.responses.get(&key) {
            Some(r) => Ok((r.text.clone(), r.logprobs.clone())),
            None => Err(EvalError::ReplayMissing {
                model: model.to_string(),
                route_id: bundle.route_id.clone(),
                trial,
            }),
        }
    }
}

/// Collects `trials` responses for one route through a client.
pub fn collect_responses(
    client: &mut dyn LlmClient,
    bundle: &PromptBundle,
    model: &str,
    trials: usize,
) -> Result<TrialSet, EvalError> {
    let mut responses = Vec::with_capacity(trials);
    for trial in 0..trials {
        let (text, logprobs) = client.complete(model, bundle, trial)?;
        responses.push(ModelResponse {
            model: model.to_string(),
            route_id: bundle.route_id.clone(),
            trial,
            text,
            logprobs,
        });
    }
    Ok(TrialSet {
        model: model.to_string(),
        route_id: bundle.route_id.clone(),
        responses,
    })
}

// ---------------------------------------------------------------------------
// Trial evaluation
// ---------------------------------------------------------------------------

/// Evaluation knobs; defaults mirror the module constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalParams {
    pub trials: usize,
    pub metric: MetricParams,
    pub weights: SimilarityWeights,
    pub return_tol_m: f64,
    pub inversion_threshold: f64,
    pub unparseable_threshold: f64,
    pub min_net_displacement_m: f64,
    /// Replay responses that open with a relative motion from a due-north
    /// heading instead of discarding them (they stay flagged as misaligned).
    pub assume_north_when_relative: bool,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            trials: DEFAULT_TRIALS,
            metric: MetricParams::default(),
            weights: SimilarityWeights::default(),
            return_tol_m: RETURN_TOL_M,
            inversion_threshold: INVERSION_FLAG_THRESHOLD,
            unparseable_threshold: UNPARSEABLE_FLAG_RATIO,
            min_net_displacement_m: MIN_NET_DISPLACEMENT_M,
            assume_north_when_relative: true,
        }
    }
}

/// Instruction-hygiene failure modes, each detectable from parse
/// diagnostics alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MisalignmentFlags {
    /// The response has motion but opens with a relative motion instead of
    /// an absolute direction.
    pub missing_initial_absolute_direction: bool,
    /// More than the tolerated share of instruction lines failed to parse.
    pub excessive_unparseable_lines: bool,
    /// No motion commands at all.
    pub zero_motion_commands: bool,
    /// No distance-bearing movement (zero continue commands).
    pub non_navigational: bool,
}

impl MisalignmentFlags {
    pub fn any(&self) -> bool {
        self.missing_initial_absolute_direction
            || self.excessive_unparseable_lines
            || self.zero_motion_commands
            || self.non_navigational
    }

    /// The flag set recorded for responses that never parsed at all.
    pub fn unparsed() -> Self {
        MisalignmentFlags {
            missing_initial_absolute_direction: false,
            excessive_unparseable_lines: false,
            zero_motion_commands: true,
            non_navigational: true,
        }
    }
}

/// Reads the failure-mode flags off parse diagnostics.
pub fn detect_misalignment(diag: &ParseDiagnostics, unparseable_threshold: f64) -> MisalignmentFlags {
    let motion = diag.motion_commands();
    MisalignmentFlags {
        missing_initial_absolute_direction: motion > 0 && !diag.first_motion_absolute,
        excessive_unparseable_lines: diag.unparseable_ratio() > unparseable_threshold,
        zero_motion_commands: motion == 0,
        non_navigational: diag.continues == 0,
    }
}

/// Everything measured about one model answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub model: String,
    pub route_id: String,
    pub trial: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<Difficulty>,
    pub built: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<Polyline>,
    /// Combined similarity against the reversed ground truth; 0 when the
    /// answer could not be built.
    pub similarity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<ComponentScores>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_metrics: Option<MetricVector>,
    /// Whether the built path ends within tolerance of the original start.
    pub returned: bool,
    /// Destination-anchored bearing error of the achieved endpoint, degrees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deviation_deg: Option<f64>,
    pub misaligned: bool,
    pub flags: MisalignmentFlags,
    pub inversion: bool,
    pub inversion_ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<BuildDiagnostics>,
}

/// Scores one response: parse, flag, rebuild from the record's destination,
/// and compare against the reversed recorded geometry. Unbuildable answers
/// score 0 and count as misaligned rather than erroring.
pub fn evaluate_trial(
    record: &RouteRecord,
    resp: &ModelResponse,
    g: &RoadGraph,
    params: &EvalParams,
) -> TrialResult {
    let truth = record.geometry.reversed();
    let fallback = params
        .assume_north_when_relative
        .then(|| Bearing::new(0.0));

    let (commands, flags) = match parse_instructions(&resp.text) {
        Ok((commands, diag)) => {
            let flags = detect_misalignment(&diag, params.unparseable_threshold);
            (commands, flags)
        }
        Err(_) => (Vec::new(), MisalignmentFlags::unparsed()),
    };

    let forward_commands = parse_instructions(&record.instruction_text())
        .map(|(c, _)| c)
        .unwrap_or_default();
    let (inversion_ratio, inversion) = detect_semantic_inversion(
        &commands,
        &forward_commands,
        params.inversion_threshold,
    );
    let confidence = confidence(resp);

    let base = TrialResult {
        model: resp.model.clone(),
        route_id: resp.route_id.clone(),
        trial: resp.trial,
        difficulty: record.difficulty,
        built: false,
        geometry: None,
        similarity: 0.0,
        components: None,
        raw_metrics: None,
        returned: false,
        deviation_deg: None,
        misaligned: true,
        flags,
        inversion,
        inversion_ratio,
        confidence,
        diagnostics: None,
    };

    if commands.is_empty() {
        return base;
    }
    let built = match build_from_commands(&commands, record.end, g, fallback) {
        Ok(b) => b,
        Err(_) => return base,
    };
    let score = match similarity_with(&params.metric, &built.geometry, &truth, &params.weights) {
        Ok(s) => s,
        Err(_) => {
            return TrialResult {
                built: true,
                diagnostics: Some(built.diagnostics),
                ..base
            }
        }
    };

    let returned = return_success(&built.geometry, record.start, params.return_tol_m);
    let deviation = deviation_angle(record.end, record.start, built.geometry.last()).ok();
    TrialResult {
        built: true,
        similarity: score.value,
        components: Some(score.components),
        raw_metrics: Some(score.raw),
        returned,
        deviation_deg: deviation,
        misaligned: flags.any(),
        geometry: Some(built.geometry),
        diagnostics: Some(built.diagnostics),
        ..base
    }
}

/// One route's trials plus the consistency spread over the built answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteEvaluation {
    pub model: String,
    pub route_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<Difficulty>,
    pub trials: Vec<TrialResult>,
    /// Pairwise-similarity standard deviation over built trials; absent
    /// with fewer than two built.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

/// Evaluates every trial of a set and the cross-trial consistency spread.
pub fn evaluate_trial_set(
    record: &RouteRecord,
    set: &TrialSet,
    g: &RoadGraph,
    params: &EvalParams,
) -> RouteEvaluation {
    let trials: Vec<TrialResult> = set
        .responses
        .iter()
        .map(|r| evaluate_trial(record, r, g, params))
        .collect();
    let geoms: Vec<&Polyline> = trials.iter().filter_map(|t| t.geometry.as_ref()).collect();
    let sigma = robustness_sigma(&geoms, &params.metric, &params.weights)
        .ok()
        .map(|(s, _)| s);
    RouteEvaluation {
        model: set.model.clone(),
        route_id: set.route_id.clone(),
        difficulty: record.difficulty,
        trials,
        sigma,
    }
}

pub fn evaluations_to_jsonl(evals: &[RouteEvaluation]) -> String {
    let mut out = String::new();
    for e in evals {
        out.push_str(&serde_json::to_string(e).expect("evaluation serializes"));
        out.push('\n');
    }
    out
}

pub fn evaluations_from_jsonl(text: &str) -> Result<Vec<RouteEvaluation>, EvalError> {
    parse_jsonl(text)
}

// ---------------------------------------------------------------------------
// Robustness (answer consistency)
// ---------------------------------------------------------------------------

/// Pairwise similarities over the unique unordered pairs of `geometries`,
/// in (i, j) order with i < j.
pub fn pairwise_similarities(
    geometries: &[&Polyline],
    params: &MetricParams,
    weights: &SimilarityWeights,
) -> Result<Vec<f64>, EvalError> {
    if geometries.len() < 2 {
        return Err(EvalError::InsufficientTrials(geometries.len()));
    }
    let mut sims = Vec::with_capacity(geometries.len() * (geometries.len() - 1) / 2);
    for i in 0..geometries.len() {
        for j in i + 1..geometries.len() {
            sims.push(similarity_with(params, geometries[i], geometries[j], weights)?.value);
        }
    }
    Ok(sims)
}

/// Population-style spread over unique-pair similarities:
/// `sqrt( (2 / (N(N-1))) * sum_{i<j} (sim_ij - mean)^2 )`. With
/// `P = N(N-1)/2` pairs this is exactly `sqrt(sum (x - mean)^2 / P)`.
pub fn pairwise_sigma(pair_sims: &[f64]) -> f64 {
    if pair_sims.is_empty() {
        return 0.0;
    }
    let p = pair_sims.len() as f64;
    let mean = pair_sims.iter().sum::<f64>() / p;
    (pair_sims.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / p).sqrt()
}

/// The consistency spread of a trial set: pairwise similarities over built
/// geometries, reduced to their sigma. Returns the sigma and the pair sims.
pub fn robustness_sigma(
    geometries: &[&Polyline],
    params: &MetricParams,
    weights: &SimilarityWeights,
) -> Result<(f64, Vec<f64>), EvalError> {
    let sims = pairwise_similarities(geometries, params, weights)?;
    Ok((pairwise_sigma(&sims), sims))
}

/// Min-max normalization of a route's sigma against the run extrema:
/// `100 * (1 - (sigma - min) / (max - min))`, so the most consistent route
/// in the run reads 100. A degenerate spread reads as fully consistent.
pub fn normalize_robustness(sigma: f64, sigma_min: f64, sigma_max: f64) -> f64 {
    if !(sigma_max > sigma_min) {
        return 100.0;
    }
    (100.0 * (1.0 - (sigma - sigma_min) / (sigma_max - sigma_min))).clamp(0.0, 100.0)
}

// ---------------------------------------------------------------------------
// Confidence
// ---------------------------------------------------------------------------

const DIRECTION_WORDS: [&str; 11] = [
    "north",
    "south",
    "east",
    "west",
    "northeast",
    "northwest",
    "southeast",
    "southwest",
    "left",
    "right",
    "straight",
];
const TRIGGER_WORDS: [&str; 3] = ["turn", "head", "keep"];
const MODIFIER_WORDS: [&str; 4] = ["slight", "slightly", "sharp", "sharply"];
const CARDINAL_FRAGMENTS: [&str; 4] = ["north", "south", "east", "west"];

fn token_core(tok: &str) -> String {
    tok.chars()
        .filter(|c| c.is_ascii_alphabetic())
        .collect::<String>()
        .to_ascii_lowercase()
}

/// Mean probability of the direction tokens in a token-logprob stream,
/// scaled to 0-100. A direction token is a compass word or left/right/
/// straight following a "turn"/"head"/"keep" trigger (modifiers like
/// "slight" may intervene). When the tokenizer splits a compass word, only
/// the first sub-token's probability counts. `None` when the stream holds
/// no direction tokens.
pub fn direction_confidence(logprobs: &[(String, f64)]) -> Option<f64> {
    let mut probs: Vec<f64> = Vec::new();
    let mut armed = false;
    let mut i = 0;
    while i < logprobs.len() {
        let core = token_core(&logprobs[i].0);
        if core.is_empty() {
            // Punctuation and whitespace tokens neither trigger nor disarm.
            i += 1;
            continue;
        }
        if armed && DIRECTION_WORDS.contains(&core.as_str()) {
            probs.push(logprobs[i].1.exp());
            armed = false;
            // Skip glued continuation fragments of a split compass word:
            // ["north", "east"] with no leading whitespace is one word.
            let mut j = i + 1;
            while j < logprobs.len() {
                let tok = &logprobs[j].0;
                let c = token_core(tok);
                if !tok.starts_with(char::is_whitespace)
                    && !c.is_empty()
                    && CARDINAL_FRAGMENTS.contains(&c.as_str())
                {
                    j += 1;
                } else {
                    break;
                }
            }
            i = j;
            continue;
        }
        if TRIGGER_WORDS.contains(&core.as_str()) {
            armed = true;
        } else if !MODIFIER_WORDS.contains(&core.as_str()) {
            armed = false;
        }
        i += 1;
    }
    if probs.is_empty() {
        None
    } else {
        Some(100.0 * probs.iter().sum::<f64>() / probs.len() as f64)
    }
}

/// [`direction_confidence`] over a response's recorded logprobs; absent
/// when the response carries none.
pub fn confidence(resp: &ModelResponse) -> Option<f64> {
    resp.logprobs.as_deref().and_then(direction_confidence)
}

// ---------------------------------------------------------------------------
// Semantic-inversion detection
// ---------------------------------------------------------------------------

/// Word-level opposite of a motion command: compass directions oppose,
/// turn classes mirror, distances stay.
pub fn flip_command(c: &Command) -> Command {
    match c {
        Command::Depart { direction } => Command::Depart {
            direction: match direction {
                DepartDirection::Wind(w) => DepartDirection::Wind(w.opposite()),
                DepartDirection::Degrees(d) => {
                    DepartDirection::Degrees((d + 180.0).rem_euclid(360.0))
                }
            },
        },
        Command::Turn { class } => Command::Turn {
            class: class.mirrored(),
        },
        other => other.clone(),
    }
}

/// Constructs the command sequence a naive inverter would produce from the
/// forward route: step order reversed, each opener's direction word flipped,
/// step distances kept with their (flipped) opener.
pub fn naive_inversion(forward: &[Command]) -> Vec<Command> {
    // A step is an opener (depart/turn) plus its continue commands.
    let mut steps: Vec<(Option<Command>, Vec<Command>)> = Vec::new();
    for c in forward {
        match c {
            Command::Depart { .. } | Command::Turn { .. } => {
                steps.push((Some(c.clone()), Vec::new()));
            }
            Command::Continue { .. } => match steps.last_mut() {
                Some(last) => last.1.push(c.clone()),
                None => steps.push((None, vec![c.clone()])),
            },
            Command::Arrive => {}
        }
    }
    let mut out = Vec::new();
    for (opener, continues) in steps.iter().rev() {
        if let Some(op) = opener {
            out.push(flip_command(op));
        }
        out.extend(continues.iter().cloned());
    }
    out.push(Command::Arrive);
    out
}

/// Renders a command sequence in the canonical line style; used to
/// synthesize naive-inversion response fixtures. Street names are dropped
/// (a naive inverter has no map).
pub fn commands_to_text(commands: &[Command]) -> String {
    let mut lines: Vec<String> = Vec::new();
    let mut pending: Option<String> = None;
    let flush = |pending: &mut Option<String>, lines: &mut Vec<String>| {
        if let Some(p) = pending.take() {
            lines.push(format!("{p}."));
        }
    };
    for c in commands {
        match c {
            Command::Depart { direction } => {
                flush(&mut pending, &mut lines);
                let word = match direction {
                    DepartDirection::Wind(w) => w.name().to_string(),
                    DepartDirection::Degrees(d) => {
                        Compass8::nearest(Bearing::new(*d)).name().to_string()
                    }
                };
                pending = Some(format!("Head {word}"));
            }
            Command::Turn { class } => {
                flush(&mut pending, &mut lines);
                let opener = match class {
                    TurnClass::UTurn => "Make a U-turn".to_string(),
                    TurnClass::KeepLeft => "Keep left".to_string(),
                    TurnClass::KeepRight => "Keep right".to_string(),
                    other => format!("Turn {}", other.phrase()),
                };
                pending = Some(opener);
            }
            Command::Continue { distance_m, .. } => {
                let clause = format!("continue for {distance_m:.1} meters");
                match pending.take() {
                    Some(p) => lines.push(format!("{p}, {clause}.")),
                    None => lines.push(format!(
                        "{}{}.",
                        clause[..1].to_uppercase(),
                        &clause[1..]
                    )),
                }
            }
            Command::Arrive => {
                flush(&mut pending, &mut lines);
                lines.push("Straight ahead, then arrive at your destination.".to_string());
            }
        }
    }
    flush(&mut pending, &mut lines);
    lines.join("\n")
}

fn command_matches(a: &Command, b: &Command, rel_tol: f64) -> bool {
    match (a, b) {
        (Command::Depart { direction: x }, Command::Depart { direction: y }) => {
            circular_diff_deg(x.degrees(), y.degrees()) < 1e-6
        }
        (Command::Turn { class: x }, Command::Turn { class: y }) => x == y,
        (
            Command::Continue { distance_m: da, .. },
            Command::Continue { distance_m: db, .. },
        ) => {
            let m = da.max(*db);
            m <= 0.0 || (da - db).abs() <= rel_tol * m
        }
        (Command::Arrive, Command::Arrive) => true,
        _ => false,
    }
}

/// Fraction of index-aligned commands where the response equals the naive
/// inversion of the forward route (continue distances within a relative
/// tolerance), over the longer of the two sequences.
pub fn inversion_match_ratio(response: &[Command], forward: &[Command]) -> f64 {
    if response.is_empty() || forward.is_empty() {
        return 0.0;
    }
    let naive = naive_inversion(forward);
    let n = response.len().max(naive.len());
    let matches = response
        .iter()
        .zip(&naive)
        .filter(|(a, b)| command_matches(a, b, INVERSION_DISTANCE_REL_TOL))
        .count();
    matches as f64 / n as f64
}

/// Flags a response whose command stream tracks the naive inversion of the
/// forward instructions. Returns (match ratio, flagged).
pub fn detect_semantic_inversion(
    response: &[Command],
    forward: &[Command],
    threshold: f64,
) -> (f64, bool) {
    let ratio = inversion_match_ratio(response, forward);
    (ratio, ratio >= threshold)
}

// ---------------------------------------------------------------------------
// Net-bearing oracle
// ---------------------------------------------------------------------------

/// Dead-reckons a command sequence and names the compass sector of the net
/// start-to-end displacement; the reference answer for "which way does this
/// route really go" disputes. Cardinal sectors are narrowed to
/// [`SECTOR_CARDINAL_HALF_WIDTH_DEG`] so mostly-diagonal displacements read
/// as diagonals.
pub fn net_bearing_oracle(
    commands: &[Command],
    start: GeoPoint,
    min_net_m: f64,
) -> Result<Compass8, EvalError> {
    let trail = dead_reckon(commands, start)?;
    let end = *trail.last().expect("dead reckoning yields waypoints");
    if haversine_distance(start, end) < min_net_m {
        return Err(EvalError::NetDisplacementTooSmall { min_m: min_net_m });
    }
    let net = initial_bearing(start, end)?;
    Ok(Compass8::sector(net, SECTOR_CARDINAL_HALF_WIDTH_DEG))
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

/// One aggregate line of the benchmark report: a (model, difficulty) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    /// "easy" | "medium" | "hard" | "overall".
    pub difficulty: String,
    pub routes: usize,
    pub trials: usize,
    pub built: usize,
    /// Mean similarity over all trials; unbuildable trials count as 0.
    pub mean_similarity: f64,
    /// Standard error of the similarity mean (sample std over sqrt n).
    pub se_similarity: f64,
    /// Mean similarity over built trials only; the transparency column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_similarity_built: Option<f64>,
    pub return_rate_pct: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_deviation_deg: Option<f64>,
    /// Mean min-max-normalized consistency over routes with a spread.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robustness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_confidence: Option<f64>,
    pub misalignment_pct: f64,
    pub inversion_pct: f64,
}

/// The aggregated benchmark: per-cell rows plus the sigma extrema the
/// robustness normalization used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<ReportRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_max: Option<f64>,
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

fn sample_se(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

fn difficulty_rank(d: Option<Difficulty>) -> u8 {
    match d {
        Some(Difficulty::Easy) => 0,
        Some(Difficulty::Medium) => 1,
        Some(Difficulty::Hard) => 2,
        None => 3,
    }
}

fn rank_label(rank: u8) -> &'static str {
    match rank {
        0 => "easy",
        1 => "medium",
        2 => "hard",
        _ => "overall",
    }
}

/// Rolls route evaluations up into per-(model, difficulty) rows plus an
/// overall row per model. Robustness is min-max normalized against the
/// whole run's sigma extrema.
pub fn aggregate(evals: &[RouteEvaluation]) -> BenchmarkReport {
    let sigmas: Vec<f64> = evals.iter().filter_map(|e| e.sigma).collect();
    let (sigma_min, sigma_max) = if sigmas.is_empty() {
        (None, None)
    } else {
        (
            Some(sigmas.iter().copied().fold(f64::INFINITY, f64::min)),
            Some(sigmas.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        )
    };

    #[derive(Default)]
    struct Bucket<'a> {
        routes: usize,
        trials: Vec<&'a TrialResult>,
        route_robustness: Vec<f64>,
    }

    let mut buckets: BTreeMap<(String, u8), Bucket> = BTreeMap::new();
    for e in evals {
        let r = e
            .sigma
            .map(|s| normalize_robustness(s, sigma_min.unwrap(), sigma_max.unwrap()));
        let mut ranks = vec![3u8];
        if e.difficulty.is_some() {
            ranks.push(difficulty_rank(e.difficulty));
        }
        for rank in ranks {
            let b = buckets.entry((e.model.clone(), rank)).or_default();
            b.routes += 1;
            b.trials.extend(e.trials.iter());
            if let Some(r) = r {
                b.route_robustness.push(r);
            }
        }
    }

    let mut rows = Vec::with_capacity(buckets.len());
    for ((model, rank), b) in buckets {
        let sims: Vec<f64> = b.trials.iter().map(|t| t.similarity).collect();
        let n = b.trials.len();
        let built: Vec<&&TrialResult> = b.trials.iter().filter(|t| t.built).collect();
        rows.push(ReportRow {
            model,
            difficulty: rank_label(rank).to_string(),
            routes: b.routes,
            trials: n,
            built: built.len(),
            mean_similarity: mean_of(sims.iter().copied()).unwrap_or(0.0),
            se_similarity: sample_se(&sims),
            mean_similarity_built: mean_of(built.iter().map(|t| t.similarity)),
            return_rate_pct: if n == 0 {
                0.0
            } else {
                100.0 * b.trials.iter().filter(|t| t.returned).count() as f64 / n as f64
            },
            mean_deviation_deg: mean_of(b.trials.iter().filter_map(|t| t.deviation_deg)),
            robustness: mean_of(b.route_robustness.iter().copied()),
            mean_confidence: mean_of(b.trials.iter().filter_map(|t| t.confidence)),
            misalignment_pct: if n == 0 {
                0.0
            } else {
                100.0 * b.trials.iter().filter(|t| t.misaligned).count() as f64 / n as f64
            },
            inversion_pct: if n == 0 {
                0.0
            } else {
                100.0 * b.trials.iter().filter(|t| t.inversion).count() as f64 / n as f64
            },
        });
    }

    BenchmarkReport {
        rows,
        sigma_min,
        sigma_max,
    }
}

fn csv_num(x: f64) -> String {
    format!("{x:.4}")
}

fn csv_opt(x: Option<f64>) -> String {
    x.map(csv_num).unwrap_or_else(|| "N/A".to_string())
}

/// Renders the report as CSV with one row per (model, difficulty) cell.
/// Absent measures (no logprobs, no spread) print as "N/A".
pub fn report_to_csv(report: &BenchmarkReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "model",
        "difficulty",
        "routes",
        "trials",
        "built",
        "mean_similarity",
        "se_similarity",
        "mean_similarity_built",
        "return_rate_pct",
        "mean_deviation_deg",
        "robustness",
        "mean_confidence",
        "misalignment_pct",
        "inversion_pct",
    ])
    .expect("header writes");
    for r in &report.rows {
        w.write_record([
            r.model.clone(),
            r.difficulty.clone(),
            r.routes.to_string(),
            r.trials.to_string(),
            r.built.to_string(),
            csv_num(r.mean_similarity),
            csv_num(r.se_similarity),
            csv_opt(r.mean_similarity_built),
            csv_num(r.return_rate_pct),
            csv_opt(r.mean_deviation_deg),
            csv_opt(r.robustness),
            csv_opt(r.mean_confidence),
            csv_num(r.misalignment_pct),
            csv_num(r.inversion_pct),
        ])
        .expect("row writes");
    }
    String::from_utf8(w.into_inner().expect("csv flushes")).expect("csv is utf-8")
}

pub fn report_to_json(report: &BenchmarkReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}
