//! From navigation language back to geometry.
//!
//! A parsed command sequence is replayed by dead reckoning — the stated
//! initial compass heading, one representative deflection per turn class,
//! and the stated distances — yielding a queue of waypoints. The queue is
//! then snapped onto a road graph and consecutive snaps are joined with
//! shortest paths, producing a graph-constrained polyline that the scoring
//! metrics can compare against a ground-truth route.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{
    destination_point, haversine_distance, Bearing, GeoError, GeoPoint, Polyline,
};
use crate::graph::{GraphError, RoadGraph};
use crate::instr::{parse_instructions, Command, LangError, ParseDiagnostics};

/// Waypoints farther than this from every graph node stay off-network
/// (flagged and skipped) instead of snapping to some far-away vertex.
pub const SNAP_CAP_M: f64 = 250.0;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("command sequence contains no motion commands")]
    EmptyCommandSequence,
    #[error("response yields no traversable path")]
    EmptyResponse,
    #[error("first motion command carries no absolute direction")]
    MissingInitialBearing,
    #[error(transparent)]
    Language(#[from] LangError),
    #[error(transparent)]
    Geometry(#[from] GeoError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

// ---------------------------------------------------------------------------
// Dead reckoning
// ---------------------------------------------------------------------------

/// Mutable dead-reckoning cursor: current position, current heading, and the
/// trail of waypoints visited so far (always beginning at the start point).
#[derive(Debug, Clone)]
pub struct DeadReckonState {
    pub position: GeoPoint,
    pub heading: Bearing,
    pub waypoints: Vec<GeoPoint>,
}

impl DeadReckonState {
    pub fn new(start: GeoPoint, heading: Bearing) -> Self {
        DeadReckonState {
            position: start,
            heading,
            waypoints: vec![start],
        }
    }

    /// Advances the cursor by one command: departs reset the heading, turns
    /// rotate it by the class's representative deflection, continues move the
    /// position along the heading and record a waypoint, arrive is a no-op.
    pub fn apply_command(&mut self, c: &Command) -> Result<(), GeoError> {
        match c {
            Command::Depart { direction } => {
                self.heading = Bearing::new(direction.degrees());
            }
            Command::Turn { class } => {
                self.heading =
                    Bearing::new(self.heading.degrees() + class.representative_deflection());
            }
            Command::Continue { distance_m, .. } => {
                if *distance_m > 0.0 {
                    self.position = destination_point(self.position, self.heading, *distance_m)?;
                }
                self.waypoints.push(self.position);
            }
            Command::Arrive => {}
        }
        Ok(())
    }
}

/// Initial bearing stated by a departure command.
pub fn heading_of(depart: &Command) -> Result<Bearing, BuildError> {
    match depart {
        Command::Depart { direction } => Ok(Bearing::new(direction.degrees())),
        _ => Err(BuildError::MissingInitialBearing),
    }
}

/// Replays `commands` from `start` and returns the waypoint queue.
///
/// The first motion command must be a departure: everything downstream of a
/// relative opener ("turn left, ...") would live in a coordinate frame the
/// text never fixes, so such sequences are rejected rather than guessed at.
pub fn dead_reckon(commands: &[Command], start: GeoPoint) -> Result<Vec<GeoPoint>, BuildError> {
    reckon(commands, start, None)
}

/// Like [`dead_reckon`], but a sequence that opens with a relative motion is
/// replayed anyway, starting on `fallback` (callers flag such responses as
/// misaligned instead of discarding them).
pub fn dead_reckon_with_fallback(
    commands: &[Command],
    start: GeoPoint,
    fallback: Bearing,
) -> Result<Vec<GeoPoint>, BuildError> {
    reckon(commands, start, Some(fallback))
}

fn reckon(
    commands: &[Command],
    start: GeoPoint,
    fallback: Option<Bearing>,
) -> Result<Vec<GeoPoint>, BuildError> {
    let Some(first) = commands.iter().find(|c| c.is_motion()) else {
        return Err(BuildError::EmptyCommandSequence);
    };
    let heading = match heading_of(first) {
        Ok(h) => h,
        Err(e) => match fallback {
            Some(h) => h,
            None => return Err(e),
        },
    };
    let mut state = DeadReckonState::new(start, heading);
    for c in commands {
        state.apply_command(c)?;
    }
    Ok(state.waypoints)
}

// ---------------------------------------------------------------------------
// Graph connection
// ---------------------------------------------------------------------------

/// What went sideways while snapping a dead-reckoned trail onto the graph.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildDiagnostics {
    /// Waypoint indices farther than [`SNAP_CAP_M`] from every node.
    pub off_network: Vec<usize>,
    /// Snapped node pairs with no connecting path; bridged by straight
    /// chords in the output geometry.
    pub unreachable_pairs: Vec<(String, String)>,
}

impl BuildDiagnostics {
    /// True when the geometry lies entirely on the graph.
    pub fn clean(&self) -> bool {
        self.off_network.is_empty() && self.unreachable_pairs.is_empty()
    }
}

/// A reconstructed path: the dead-reckoned trail, the node ids it snapped
/// to, and the graph-constrained geometry walked between those nodes.
#[derive(Debug, Clone)]
pub struct BuiltPath {
    pub raw: Polyline,
    pub snapped: Vec<String>,
    pub geometry: Polyline,
    pub diagnostics: BuildDiagnostics,
}

/// Snaps each waypoint to its nearest node, collapses consecutive duplicate
/// snaps, and joins the survivors with shortest paths.
///
/// Unreachable node pairs are kept as straight chords and flagged; if fewer
/// than two waypoints snap onto the network at all, the dead-reckoned trail
/// itself is returned as the geometry (with every skipped index flagged).
pub fn connect_path(waypoints: &[GeoPoint], g: &RoadGraph) -> Result<BuiltPath, BuildError> {
    if waypoints.len() < 2 {
        return Err(BuildError::EmptyResponse);
    }
    let raw = Polyline::new(waypoints.to_vec())?;

    let mut diagnostics = BuildDiagnostics::default();
    let mut snapped: Vec<String> = Vec::with_capacity(waypoints.len());
    for (i, &w) in waypoints.iter().enumerate() {
        let node = g.nearest_node(w)?;
        if haversine_distance(w, node.point) > SNAP_CAP_M {
            diagnostics.off_network.push(i);
            continue;
        }
        if snapped.last().map(String::as_str) != Some(node.id.as_str()) {
            snapped.push(node.id.clone());
        }
    }

    if snapped.len() < 2 {
        // Nothing (or a single node) on-network: the raw trail is the best
        // geometry available. The diagnostics make the situation visible.
        if diagnostics.off_network.is_empty() {
            // Everything collapsed onto one node: the reply never really
            // leaves its start as far as the network is concerned.
            return Err(BuildError::EmptyResponse);
        }
        return Ok(BuiltPath {
            geometry: raw.clone(),
            raw,
            snapped,
            diagnostics,
        });
    }

    let mut geom: Vec<GeoPoint> = Vec::new();
    geom.push(g.node(&snapped[0]).expect("snapped ids exist").point);
    for pair in snapped.windows(2) {
        let (u, v) = (&pair[0], &pair[1]);
        match g.shortest_path(u, v) {
            Ok(rp) => {
                for id in &rp.nodes[1..] {
                    geom.push(g.node(id).expect("path ids exist").point);
                }
            }
            Err(GraphError::Unreachable { .. }) => {
                diagnostics
                    .unreachable_pairs
                    .push((u.clone(), v.clone()));
                geom.push(g.node(v).expect("snapped ids exist").point);
            }
            Err(e) => return Err(e.into()),
        }
    }

    let geometry = Polyline::new(geom)?;
    Ok(BuiltPath {
        raw,
        snapped,
        geometry,
        diagnostics,
    })
}

// ---------------------------------------------------------------------------
// End-to-end build
// ---------------------------------------------------------------------------

/// Full pipeline: normalize and parse the instruction text, dead-reckon the
/// commands from `start`, and constrain the trail to the graph.
pub fn build(instructions: &str, start: GeoPoint, g: &RoadGraph) -> Result<BuiltPath, BuildError> {
    build_full(instructions, start, g, None).map(|(p, _)| p)
}

/// [`build`] plus parse diagnostics, with an optional fallback heading for
/// responses that open with a relative motion (see
/// [`dead_reckon_with_fallback`]).
pub fn build_full(
    instructions: &str,
    start: GeoPoint,
    g: &RoadGraph,
    fallback_heading: Option<Bearing>,
) -> Result<(BuiltPath, ParseDiagnostics), BuildError> {
    let (commands, diag) = parse_instructions(instructions)?;
    let built = build_from_commands(&commands, start, g, fallback_heading)?;
    Ok((built, diag))
}

/// Substep length used when replaying a "continue" leg off-network: the
/// cursor advances at most this far before looking for a node to re-anchor
/// on, so positional error cannot build up along the leg.
pub const RECKON_SUBSTEP_M: f64 = 100.0;

/// An off-network reckoning substep only re-anchors onto a node this close
/// to the dead-reckoned point. The radius is deliberately tight: anchoring
/// exists to cancel small drift, not to yank the cursor onto whatever
/// happens to be nearby (which, mid-edge on a long block, would be the node
/// just departed, stalling the walk).
pub const ANCHOR_RADIUS_M: f64 = 40.0;

/// While the cursor sits on a node, a "continue" follows the incident edge
/// whose bearing lies within this tolerance of the current heading. The
/// value must absorb the worst gap between a turn class's representative
/// deflection and a true deflection inside the same band (just under 46°
/// for the plain left/right band); anything farther off than that is not
/// plausibly the street the text meant, and the cursor leaves the network
/// instead.
pub const EDGE_FOLLOW_TOL_DEG: f64 = 50.0;

/// Builds from an already-parsed command sequence, skipping the text stage.
///
/// Reckoning here is graph-assisted. Headings follow the stated commands —
/// opening compass direction plus one representative deflection per turn —
/// but whenever the cursor sits on a node, a "continue" walks actual edges
/// (picking the incident edge best aligned with the heading) and the
/// heading is re-read from each street walked. That feedback is what keeps
/// the discretization error of a turn class local: a "slight right" whose
/// representative angle overshoots the street by 15° would otherwise carry
/// that 15° through every later leg until the trail drifts a whole block
/// sideways. Where no edge plausibly matches (or the start is nowhere near
/// the network), the cursor degrades to substepped open-loop reckoning and
/// may re-anchor onto the network when it passes close to a node.
pub fn build_from_commands(
    commands: &[Command],
    start: GeoPoint,
    g: &RoadGraph,
    fallback_heading: Option<Bearing>,
) -> Result<BuiltPath, BuildError> {
    if !commands.iter().any(|c| c.is_motion()) {
        return Err(BuildError::EmptyResponse);
    }
    let waypoints = reckon_on_graph(commands, start, g, fallback_heading)?;
    if waypoints.len() < 2 || Polyline::new(waypoints.clone()).is_err() {
        // Includes trails whose every leg collapsed back onto the start:
        // the reply never meaningfully leaves its origin.
        return Err(BuildError::EmptyResponse);
    }
    connect_path(&waypoints, g)
}

/// Where the reckoning cursor currently stands: on a network node, or at a
/// free point off the network.
enum Cursor {
    OnNode(String),
    Free(GeoPoint),
}

impl Cursor {
    fn point(&self, g: &RoadGraph) -> GeoPoint {
        match self {
            Cursor::OnNode(id) => g.node(id).expect("cursor node exists").point,
            Cursor::Free(p) => *p,
        }
    }
}

/// Dead reckoning with edge-following and position re-anchoring (see
/// [`build_from_commands`]).
fn reckon_on_graph(
    commands: &[Command],
    start: GeoPoint,
    g: &RoadGraph,
    fallback: Option<Bearing>,
) -> Result<Vec<GeoPoint>, BuildError> {
    let Some(first) = commands.iter().find(|c| c.is_motion()) else {
        return Err(BuildError::EmptyCommandSequence);
    };
    let mut heading = match heading_of(first) {
        Ok(h) => h,
        Err(e) => match fallback {
            Some(h) => h,
            None => return Err(e),
        },
    };
    let near = g.nearest_node(start)?;
    let mut cursor = if haversine_distance(start, near.point) <= ANCHOR_RADIUS_M {
        Cursor::OnNode(near.id.clone())
    } else {
        Cursor::Free(start)
    };
    let mut waypoints = vec![start];
    for c in commands {
        match c {
            Command::Depart { direction } => {
                heading = Bearing::new(direction.degrees());
            }
            Command::Turn { class } => {
                heading = Bearing::new(heading.degrees() + class.representative_deflection());
            }
            Command::Continue { distance_m, .. } => {
                walk_leg(g, &mut cursor, &mut heading, *distance_m)?;
                waypoints.push(cursor.point(g));
            }
            Command::Arrive => {}
        }
    }
    Ok(waypoints)
}

/// No single stated leg is replayed farther than this. Benchmark routes are
/// a few kilometers end to end; a reply claiming dozens of kilometers in
/// one stride is noise, and replaying it literally would only grind through
/// substeps to land equally far off the network.
pub const MAX_LEG_M: f64 = 50_000.0;

/// Advances the cursor by one "continue" leg of `distance` meters.
fn walk_leg(
    g: &RoadGraph,
    cursor: &mut Cursor,
    heading: &mut Bearing,
    distance: f64,
) -> Result<(), BuildError> {
    let mut remaining = distance.min(MAX_LEG_M);
    // Each off-network substep consumes distance and each edge walked
    // consumes at least half an edge, so the loop terminates; the guard is
    // belt-and-braces against degenerate graphs full of hair's-width edges.
    let mut guard = 4096 + (distance / RECKON_SUBSTEP_M) as usize * 4;
    while remaining > 1e-9 {
        if guard == 0 {
            *cursor = Cursor::Free(destination_point(cursor.point(g), *heading, remaining)?);
            break;
        }
        guard -= 1;
        match cursor {
            Cursor::OnNode(id) => {
                let here = g.node(id).expect("cursor node exists").point;
                // The incident edge best aligned with the heading; ties
                // resolve to the smallest neighbor id (adjacency order).
                let mut best: Option<(&crate::graph::RoadNode, f64, f64)> = None;
                for (nbr, len) in g.neighbors(id)? {
                    let b = crate::geo::initial_bearing(here, nbr.point)?;
                    let diff = crate::geo::circular_diff_deg(b.degrees(), heading.degrees());
                    if diff <= EDGE_FOLLOW_TOL_DEG
                        && best.map_or(true, |(_, _, d)| diff < d)
                    {
                        best = Some((nbr, len, diff));
                    }
                }
                match best {
                    // Walk the edge when the leftover distance rounds onto
                    // its far node rather than back onto this one.
                    Some((nbr, len, _)) if remaining >= len / 2.0 => {
                        *heading = crate::geo::initial_bearing(here, nbr.point)?;
                        remaining -= len;
                        *cursor = Cursor::OnNode(nbr.id.clone());
                    }
                    // No street to follow: leave the network and reckon the
                    // remainder freely (it may re-anchor along the way).
                    _ => *cursor = Cursor::Free(here),
                }
            }
            Cursor::Free(p) => {
                let step = remaining.min(RECKON_SUBSTEP_M);
                let target = destination_point(*p, *heading, step)?;
                let node = g.nearest_node(target)?;
                *cursor = if haversine_distance(target, node.point) <= ANCHOR_RADIUS_M {
                    Cursor::OnNode(node.id.clone())
                } else {
                    Cursor::Free(target)
                };
                remaining -= step;
            }
        }
    }
    Ok(())
}
