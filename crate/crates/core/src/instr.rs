//! The navigation mini-language: turn-by-turn walking instructions.
//!
//! This module renders route geometry into instruction text, normalizes
//! free-form instruction text into a canonical shape, and parses canonical
//! text back into [`Command`] sequences.
//!
//! Canonical line grammar (EBNF):
//!
//! ```text
//! line        = head-line | turn-line | keep-line | uturn-line | arrive-line ;
//! head-line   = "Head " direction [street-clause] continue-clause "." ;
//! turn-line   = "Turn " ["slight " | "sharp "] side [street-clause] continue-clause "." ;
//! keep-line   = "Keep " side [street-clause] continue-clause "." ;
//! uturn-line  = "Make a U-turn" [street-clause] continue-clause "." ;
//! arrive-line = "Straight ahead, then arrive at your destination." ;
//! continue-clause = ", continue for " distance " meters" ;
//! street-clause   = ", along " street-name ;
//! direction   = compass-8 | compass-16 | bearing-degrees ;
//! side        = "left" | "right" ;
//! distance    = decimal with one fractional digit ;
//! ```
//!
//! The parser is tolerant: it accepts synonym phrasings handled by
//! [`normalize_text`], numbered-list prefixes, and extra landmark clauses,
//! and reports anything unparseable per line.

use crate::geo::{
    compass_word_to_degrees, haversine_distance, initial_bearing, turn_angle, Bearing, Compass8,
    GeoPoint, Polyline,
};
use crate::graph::RoadGraph;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::LazyLock;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LangError {
    #[error("route is too short to describe")]
    DegenerateRoute,
    #[error("unparseable instruction line: {0:?}")]
    UnparseableLine(String),
    #[error("empty response text")]
    EmptyResponse,
}

// ---------------------------------------------------------------------------
// Turn classification
// ---------------------------------------------------------------------------

/// Deflection-angle band edges, in degrees. The defaults classify
/// `|δ| < 11` as straight, `11..45` as slight, `45..136` as a plain turn,
/// `136..=170` as sharp, and anything beyond as a U-turn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TurnBands {
    pub straight_below: f64,
    pub slight_below: f64,
    pub turn_below: f64,
    pub sharp_upto: f64,
}

impl Default for TurnBands {
    fn default() -> Self {
        TurnBands {
            straight_below: 11.0,
            slight_below: 45.0,
            turn_below: 136.0,
            sharp_upto: 170.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TurnClass {
    Straight,
    SlightLeft,
    SlightRight,
    Left,
    Right,
    SharpLeft,
    SharpRight,
    UTurn,
    KeepLeft,
    KeepRight,
}

impl TurnClass {
    /// The nominal deflection assumed when reconstructing geometry from a
    /// turn of this class (sign: right is positive).
    pub fn representative_deflection(self) -> f64 {
        match self {
            TurnClass::Straight => 0.0,
            TurnClass::SlightLeft => -27.5,
            TurnClass::SlightRight => 27.5,
            TurnClass::Left => -90.0,
            TurnClass::Right => 90.0,
            TurnClass::SharpLeft => -153.0,
            TurnClass::SharpRight => 153.0,
            TurnClass::UTurn => 180.0,
            TurnClass::KeepLeft => -20.0,
            TurnClass::KeepRight => 20.0,
        }
    }

    /// Left/right mirror image; straight and U-turn are self-mirrored.
    pub fn mirrored(self) -> TurnClass {
        match self {
            TurnClass::SlightLeft => TurnClass::SlightRight,
            TurnClass::SlightRight => TurnClass::SlightLeft,
            TurnClass::Left => TurnClass::Right,
            TurnClass::Right => TurnClass::Left,
            TurnClass::SharpLeft => TurnClass::SharpRight,
            TurnClass::SharpRight => TurnClass::SharpLeft,
            TurnClass::KeepLeft => TurnClass::KeepRight,
            TurnClass::KeepRight => TurnClass::KeepLeft,
            other => other,
        }
    }

    pub fn phrase(self) -> &'static str {
        match self {
            TurnClass::Straight => "straight",
            TurnClass::SlightLeft => "slight left",
            TurnClass::SlightRight => "slight right",
            TurnClass::Left => "left",
            TurnClass::Right => "right",
            TurnClass::SharpLeft => "sharp left",
            TurnClass::SharpRight => "sharp right",
            TurnClass::UTurn => "u-turn",
            TurnClass::KeepLeft => "keep left",
            TurnClass::KeepRight => "keep right",
        }
    }
}

/// Classifies a signed deflection angle with the default bands.
pub fn classify_turn(deflection_deg: f64) -> TurnClass {
    classify_turn_with(&TurnBands::default(), deflection_deg)
}

/// Classifies a signed deflection angle. The angle is normalized into
/// `(-180, 180]` first, so the function is total.
pub fn classify_turn_with(bands: &TurnBands, deflection_deg: f64) -> TurnClass {
    let d = crate::geo::normalize_signed_deg(deflection_deg);
    let mag = d.abs();
    let right = d >= 0.0;
    if mag < bands.straight_below {
        TurnClass::Straight
    } else if mag < bands.slight_below {
        if right { TurnClass::SlightRight } else { TurnClass::SlightLeft }
    } else if mag < bands.turn_below {
        if right { TurnClass::Right } else { TurnClass::Left }
    } else if mag <= bands.sharp_upto {
        if right { TurnClass::SharpRight } else { TurnClass::SharpLeft }
    } else {
        TurnClass::UTurn
    }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// An initial absolute direction: an 8-wind compass word or a numeric
/// bearing (which also covers the 16-wind words).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DepartDirection {
    Wind(Compass8),
    Degrees(f64),
}

impl DepartDirection {
    pub fn degrees(self) -> f64 {
        match self {
            DepartDirection::Wind(w) => w.bearing().degrees(),
            DepartDirection::Degrees(d) => Bearing::new(d).degrees(),
        }
    }

    fn from_degrees(deg: f64) -> DepartDirection {
        let norm = Bearing::new(deg).degrees();
        if norm.rem_euclid(45.0) == 0.0 {
            DepartDirection::Wind(Compass8::nearest(Bearing::new(norm)))
        } else {
            DepartDirection::Degrees(norm)
        }
    }
}

/// One atomic navigation command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Command {
    Depart { direction: DepartDirection },
    Turn { class: TurnClass },
    Continue { distance_m: f64, street: Option<String> },
    Arrive,
}

impl Command {
    pub fn is_motion(&self) -> bool {
        !matches!(self, Command::Arrive)
    }
}

/// Compares command sequences: variants must match exactly, continue
/// distances within `dist_tol_m`.
pub fn commands_approx_eq(a: &[Command], b: &[Command], dist_tol_m: f64) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| match (x, y) {
            (
                Command::Continue { distance_m: da, street: sa },
                Command::Continue { distance_m: db, street: sb },
            ) => (da - db).abs() <= dist_tol_m && sa == sb,
            _ => x == y,
        })
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// How the initial heading is written. Only 8-wind compass words today.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadingStyle {
    Compass8,
}

/// Rendered instructions plus the parsed command cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionSet {
    pub lines: Vec<String>,
    pub start: GeoPoint,
    pub commands: Vec<Command>,
}

impl InstructionSet {
    pub fn text(&self) -> String {
        self.lines.join("\n")
    }

    /// Number of turn commands (the `n_t` of the difficulty measure).
    pub fn turn_count(&self) -> usize {
        self.commands
            .iter()
            .filter(|c| matches!(c, Command::Turn { .. }))
            .count()
    }
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Renders a route into instruction text with the default turn bands.
pub fn render_instructions(
    route: &Polyline,
    graph: &RoadGraph,
    style: HeadingStyle,
) -> Result<InstructionSet, LangError> {
    render_instructions_with(&TurnBands::default(), route, graph, style)
}

/// Renders a route into instruction text.
///
/// Consecutive near-straight segments merge into a single step; each
/// non-straight vertex opens a new step line. Street names are looked up
/// from the graph edge under the first segment of each step.
pub fn render_instructions_with(
    bands: &TurnBands,
    route: &Polyline,
    graph: &RoadGraph,
    style: HeadingStyle,
) -> Result<InstructionSet, LangError> {
    let HeadingStyle::Compass8 = style;
    if route.length_m() < 0.05 {
        return Err(LangError::DegenerateRoute);
    }
    let pts = route.points();

    // Split vertices into steps at every non-straight deflection.
    let mut steps: Vec<(TurnClass, usize, usize)> = Vec::new(); // (entry class, first seg, last seg)
    let mut step_start = 0usize;
    let mut entry = TurnClass::Straight;
    for v in 1..pts.len() - 1 {
        let delta = turn_angle(pts[v - 1], pts[v], pts[v + 1])
            .expect("polyline vertices are distinct");
        let class = classify_turn_with(bands, delta);
        if class != TurnClass::Straight {
            steps.push((entry, step_start, v - 1));
            entry = class;
            step_start = v;
        }
    }
    steps.push((entry, step_start, pts.len() - 2));

    // Street lookup: map a segment to the graph edge joining its endpoints,
    // if the route actually runs along graph nodes.
    let street_of = |seg: usize| -> Option<String> {
        let a = graph.nearest_node(pts[seg]).ok()?;
        let b = graph.nearest_node(pts[seg + 1]).ok()?;
        if haversine_distance(a.point, pts[seg]) > 0.5
            || haversine_distance(b.point, pts[seg + 1]) > 0.5
        {
            return None;
        }
        graph.edge_name(&a.id, &b.id).map(|s| s.to_string())
    };

    let mut lines = Vec::with_capacity(steps.len() + 1);
    let mut commands = Vec::with_capacity(2 * steps.len() + 2);
    for (i, &(class, first_seg, last_seg)) in steps.iter().enumerate() {
        let dist: f64 = (first_seg..=last_seg)
            .map(|s| haversine_distance(pts[s], pts[s + 1]))
            .sum();
        let dist = round1(dist).max(0.1);
        let street = street_of(first_seg);
        let along = street
            .as_deref()
            .map(|s| format!("along {s}, "))
            .unwrap_or_default();
        if i == 0 {
            let wind = Compass8::nearest(
                initial_bearing(pts[first_seg], pts[first_seg + 1])
                    .expect("polyline vertices are distinct"),
            );
            lines.push(format!("Head {wind}, {along}continue for {dist:.1} meters."));
            commands.push(Command::Depart {
                direction: DepartDirection::Wind(wind),
            });
        } else if class == TurnClass::UTurn {
            lines.push(format!("Make a U-turn, {along}continue for {dist:.1} meters."));
            commands.push(Command::Turn { class });
        } else if matches!(class, TurnClass::KeepLeft | TurnClass::KeepRight) {
            let side = if class == TurnClass::KeepLeft { "left" } else { "right" };
            lines.push(format!("Keep {side}, {along}continue for {dist:.1} meters."));
            commands.push(Command::Turn { class });
        } else {
            lines.push(format!(
                "Turn {}, {along}continue for {dist:.1} meters.",
                class.phrase()
            ));
            commands.push(Command::Turn { class });
        }
        commands.push(Command::Continue {
            distance_m: dist,
            street,
        });
    }
    lines.push("Straight ahead, then arrive at your destination.".to_string());
    commands.push(Command::Arrive);

    Ok(InstructionSet {
        lines,
        start: pts[0],
        commands,
    })
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// Canonicalized line text plus side-channel annotations (stripped
/// parentheticals and landmark clauses).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Normalized {
    pub text: String,
    pub annotations: Vec<String>,
}

static RE_WS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+").unwrap());
static RE_PAREN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\(([^)]*)\)").unwrap());
static RE_LANDMARK: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)[,;]?\s*(?:near|past|passing|beside|opposite|you(?:'|\u{2019})?ll see|you will see)\b[^,.]*",
    )
    .unwrap()
});
static RE_VOCAB: LazyLock<Regex> = LazyLock::new(|| {
    let words = [
        // verbs and connectives
        "head", "turn", "turns", "continue", "keep", "stay", "go", "walk", "proceed", "move",
        "travel", "make", "face", "then", "and", "for", "to", "at", "your", "a", "the",
        "along", "straight", "ahead", "left", "right", "slight", "slightly", "sharp",
        "sharply", "around", "back", "arrive", "arrived", "destination", "u-turn",
        // units
        "meters", "meter", "metres", "metre", "m", "km", "kilometers", "kilometres",
        "kilometer", "kilometre", "degrees", "degree",
        // compass (16 winds; longest first so compounds win)
        "north-northeast", "north-northwest", "south-southeast", "south-southwest",
        "east-northeast", "east-southeast", "west-northwest", "west-southwest",
        "northeast", "northwest", "southeast", "southwest", "north", "south", "east", "west",
    ];
    Regex::new(&format!(r"(?i)\b(?:{})\b", words.join("|"))).unwrap()
});
static RE_HEAD_TOWARDS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bhead towards?\b").unwrap());
static RE_TURN_AROUND: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bturn around\b").unwrap());
static RE_GO_STRAIGHT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(?:go|walk|proceed|move|travel) straight(?: ahead)?\b").unwrap()
});
static RE_CONT_STRAIGHT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bcontinue straight(?: ahead)?\b").unwrap());
static RE_STRAIGHT_FOR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bstraight ahead for\b").unwrap());
static RE_VERB_DIST: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(?:go|walk|proceed|move|travel)\s+(?:for\s+)?(\d)").unwrap()
});
static RE_CONT_NO_FOR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bcontinue\s+(?:for\s+)?(\d)").unwrap());
static RE_AND_CONT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\s+(?:and|then)\s+continue\b").unwrap());
static RE_KM: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(\d+(?:\.\d+)?)\s*(?:km|kilometers?|kilometres?)\b").unwrap()
});
static RE_M: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(\d+(?:\.\d+)?)\s*(?:meters?|metres?|m)\b").unwrap());
static RE_NUM_BEFORE_METERS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(\d+(?:\.\d+)?) meters").unwrap());
static RE_SPACE_PUNCT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+([,.])").unwrap());
static RE_COMMA_RUN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r",\s*,+").unwrap());
static RE_COMMA_SPACE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r",(\S)").unwrap());

fn normalize_line(raw: &str, annotations: &mut Vec<String>) -> String {
    let mut s = RE_WS.replace_all(raw.trim(), " ").to_string();

    // Parentheticals become annotations.
    while let Some(c) = RE_PAREN.captures(&s) {
        let inner = c.get(1).unwrap().as_str().trim().to_string();
        if !inner.is_empty() {
            annotations.push(inner);
        }
        let range = c.get(0).unwrap().range();
        s.replace_range(range, " ");
        s = RE_WS.replace_all(s.trim(), " ").to_string();
    }

    // Trailing landmark clauses become annotations, but never at the start
    // of the line (that would eat the whole instruction).
    if let Some(m) = RE_LANDMARK.find(&s) {
        if m.start() > 0 {
            let clause = s[m.range()].trim_matches([',', ';', ' ']).to_string();
            if !clause.is_empty() {
                annotations.push(clause);
            }
            s.replace_range(m.range(), "");
            s = RE_WS.replace_all(s.trim(), " ").to_string();
        }
    }

    // Case-fold the controlled vocabulary; everything else (street names,
    // landmarks) keeps its casing.
    s = RE_VOCAB
        .replace_all(&s, |c: &regex::Captures| c[0].to_lowercase())
        .to_string();

    // Synonyms, most specific first.
    s = RE_HEAD_TOWARDS.replace_all(&s, "head").to_string();
    s = RE_TURN_AROUND.replace_all(&s, "make a u-turn").to_string();
    s = RE_GO_STRAIGHT.replace_all(&s, "continue").to_string();
    s = RE_CONT_STRAIGHT.replace_all(&s, "continue").to_string();
    s = RE_STRAIGHT_FOR.replace_all(&s, "continue for").to_string();
    s = RE_VERB_DIST.replace_all(&s, "continue for $1").to_string();
    s = RE_CONT_NO_FOR.replace_all(&s, "continue for $1").to_string();
    s = RE_AND_CONT.replace_all(&s, ", continue").to_string();

    // Units: kilometers fold into meters; bare "m" expands.
    s = RE_KM
        .replace_all(&s, |c: &regex::Captures| {
            let v: f64 = c[1].parse().unwrap_or(0.0);
            format!("{:.1} meters", v * 1000.0)
        })
        .to_string();
    s = RE_M.replace_all(&s, "$1 meters").to_string();

    // Distances get exactly one decimal.
    s = RE_NUM_BEFORE_METERS
        .replace_all(&s, |c: &regex::Captures| {
            let v: f64 = c[1].parse().unwrap_or(0.0);
            format!("{v:.1} meters")
        })
        .to_string();

    // Punctuation: tighten spaces, collapse comma runs, terminal period.
    s = RE_SPACE_PUNCT.replace_all(&s, "$1").to_string();
    s = RE_COMMA_RUN.replace_all(&s, ",").to_string();
    s = RE_COMMA_SPACE.replace_all(&s, ", $1").to_string();
    let mut s = s.trim().to_string();
    while s.ends_with(",") {
        s.pop();
    }
    if !s.is_empty() && !s.ends_with(['.', '!', '?']) {
        s.push('.');
    }
    while s.ends_with("..") {
        s.pop();
    }

    // Sentence case.
    if let Some(pos) = s.find(|c: char| c.is_ascii_alphabetic()) {
        let upper = s[pos..pos + 1].to_uppercase();
        s.replace_range(pos..pos + 1, &upper);
    }
    s
}

/// Canonicalizes instruction text: whitespace, synonym folding, unit and
/// number formatting, punctuation, and sentence case. Parentheticals and
/// landmark clauses are stripped into `annotations`. Idempotent on its own
/// output. Multi-line input is normalized line by line.
pub fn normalize_text(raw: &str) -> Normalized {
    let mut annotations = Vec::new();
    let lines: Vec<String> = raw
        .lines()
        .map(|l| normalize_line(l, &mut annotations))
        .collect();
    Normalized {
        text: lines.join("\n").trim_matches('\n').to_string(),
        annotations,
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

static RE_LIST_MARKER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*(?:\d{1,3}\s*[.):\]]|step\s+\d{1,3}\s*[.:]?|[-*\u{2022}+])\s*").unwrap()
});
static RE_DEPART_WORD: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^(?:head|face|turn to face|turn to|turn)\s+([a-z][a-z-]*(?:[ -][a-z]+)?)")
        .unwrap()
});
static RE_DEPART_DEG: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^(?:head|face|turn to face|turn to|turn)\s+(?:to\s+)?(\d+(?:\.\d+)?)\s*(?:\u{b0}|degrees?)")
        .unwrap()
});
static RE_TURN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^turn\s+(slightly|slight|sharply|sharp)?\s*(left|right)\b").unwrap()
});
static RE_UTURN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(?:make\s+a\s+)?u-?turn\b").unwrap());
static RE_KEEP: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(?:keep|stay)\s+(left|right)\b").unwrap());
static RE_DISTANCE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(\d+(?:\.\d+)?)\s*meters?\b").unwrap());
static RE_STREET: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\balong\s+([^,.]+)").unwrap());
static RE_ARRIVE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\barriv\w*\b").unwrap());

/// Parses one canonical instruction line into its commands.
///
/// A line may yield a direction command (`Depart`, `Turn`) plus a
/// `Continue`, and/or `Arrive`. Lines with no recognizable content fail with
/// [`LangError::UnparseableLine`], keeping the text for misalignment
/// accounting.
pub fn parse_instruction(line: &str) -> Result<Vec<Command>, LangError> {
    let s = line.trim();
    if s.is_empty() {
        return Err(LangError::UnparseableLine(line.to_string()));
    }
    let mut cmds = Vec::new();
    let mut consumed_prefix = 0usize;

    if let Some(c) = RE_DEPART_DEG.captures(s) {
        let deg: f64 = c[1].parse().unwrap();
        cmds.push(Command::Depart {
            direction: DepartDirection::from_degrees(deg),
        });
        consumed_prefix = c.get(0).unwrap().end();
    } else if let Some(c) = RE_DEPART_WORD.captures(s) {
        // Only a depart if the captured word is a compass direction;
        // otherwise fall through to the turn patterns.
        if let Some(deg) = compass_word_to_degrees(&c[1]) {
            cmds.push(Command::Depart {
                direction: DepartDirection::from_degrees(deg),
            });
            consumed_prefix = c.get(0).unwrap().end();
        }
    }
    if cmds.is_empty() {
        if let Some(c) = RE_TURN.captures(s) {
            let side_right = c[2].eq_ignore_ascii_case("right");
            let class = match c.get(1).map(|m| m.as_str().to_lowercase()) {
                Some(q) if q.starts_with("slight") => {
                    if side_right { TurnClass::SlightRight } else { TurnClass::SlightLeft }
                }
                Some(q) if q.starts_with("sharp") => {
                    if side_right { TurnClass::SharpRight } else { TurnClass::SharpLeft }
                }
                _ => {
                    if side_right { TurnClass::Right } else { TurnClass::Left }
                }
            };
            cmds.push(Command::Turn { class });
            consumed_prefix = c.get(0).unwrap().end();
        } else if let Some(m) = RE_UTURN.find(s) {
            cmds.push(Command::Turn { class: TurnClass::UTurn });
            consumed_prefix = m.end();
        } else if let Some(c) = RE_KEEP.captures(s) {
            let class = if c[1].eq_ignore_ascii_case("right") {
                TurnClass::KeepRight
            } else {
                TurnClass::KeepLeft
            };
            cmds.push(Command::Turn { class });
            consumed_prefix = c.get(0).unwrap().end();
        }
    }

    // Distance clause anywhere after the prefix.
    let rest = &s[consumed_prefix..];
    if let Some(c) = RE_DISTANCE.captures(rest) {
        let d: f64 = c[1].parse().unwrap();
        if d > 0.0 {
            let street = RE_STREET
                .captures(s)
                .map(|sc| sc[1].trim().to_string())
                .filter(|v| !v.is_empty());
            cmds.push(Command::Continue {
                distance_m: d,
                street,
            });
        }
    }

    if RE_ARRIVE.is_match(s) {
        cmds.push(Command::Arrive);
    }

    if cmds.is_empty() {
        return Err(LangError::UnparseableLine(line.to_string()));
    }
    Ok(cmds)
}

/// An instruction line the parser could not interpret.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnparseableLine {
    pub line_no: usize,
    pub text: String,
}

/// What the parser saw while reading a whole response.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    /// Instruction-bearing lines the parser attempted (blank lines and
    /// prose preambles excluded).
    pub attempted_lines: usize,
    pub unparseable: Vec<UnparseableLine>,
    /// Annotations stripped during normalization (landmarks, coordinates).
    pub annotations: Vec<String>,
    /// True when the first motion command is a `Depart` (i.e. the response
    /// opens with an absolute direction).
    pub first_motion_absolute: bool,
    pub departs: usize,
    pub turns: usize,
    pub continues: usize,
    pub has_arrive: bool,
}

impl ParseDiagnostics {
    pub fn motion_commands(&self) -> usize {
        self.departs + self.turns + self.continues
    }

    pub fn unparseable_ratio(&self) -> f64 {
        if self.attempted_lines == 0 {
            0.0
        } else {
            self.unparseable.len() as f64 / self.attempted_lines as f64
        }
    }
}

///// Parses a whole response: strips list markers and prose preambles,
/// normalizes each line, and concatenates per-line commands.
///
/// Only an entirely blank input is an error; responses where every line is
/// noise come back as an empty command list with the diagnostics to match.
pub fn parse_instructions(text: &str) -> Result<(Vec<Command>, ParseDiagnostics), LangError> {
    if text.trim().is_empty() {
        return Err(LangError::EmptyResponse);
    }
    let mut commands = Vec::new();
    let mut diag = ParseDiagnostics::default();
    let mut first_motion_seen = false;
    for (i, raw) in text.lines().enumerate() {
        let stripped = RE_LIST_MARKER.replace(raw, "");
        let stripped = stripped.trim();
        if stripped.is_empty() {
            continue;
        }
        // Prose preamble ("Here are the reversed directions:") — skipped,
        // not counted against the response.
        if stripped.ends_with(':') || stripped.chars().all(|c| !c.is_alphanumeric()) {
            continue;
        }
        let mut annotations = Vec::new();
        let line = normalize_line(stripped, &mut annotations);
        diag.annotations.append(&mut annotations);
        diag.attempted_lines += 1;
        match parse_instruction(&line) {
            Ok(cmds) => {
                for c in &cmds {
                    match c {
                        Command::Depart { .. } => {
                            if !first_motion_seen {
                                diag.first_motion_absolute = true;
                                first_motion_seen = true;
                            }
                            diag.departs += 1;
                        }
                        Command::Turn { .. } => {
                            first_motion_seen = true;
                            diag.turns += 1;
                        }
                        Command::Continue { .. } => {
                            first_motion_seen = true;
                            diag.continues += 1;
                        }
                        Command::Arrive => diag.has_arrive = true,
                    }
                }
                commands.extend(cmds);
            }
            Err(LangError::UnparseableLine(_)) => {
                diag.unparseable.push(UnparseableLine {
                    line_no: i + 1,
                    text: raw.trim().to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok((commands, diag))
}
