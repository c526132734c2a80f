//! Route dataset generation: sample start/end pairs around a city center,
//! route them on the graph, render instructions, score route complexity
//! from turn density, and split the result into difficulty tiers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{destination_point, Bearing, GeoError, GeoPoint, Polyline};
use crate::graph::{GraphError, RoadGraph};
use crate::instr::{render_instructions, HeadingStyle, LangError};

/// Accepted route length bounds, in meters.
pub const MIN_ROUTE_LENGTH_M: f64 = 500.0;
pub const MAX_ROUTE_LENGTH_M: f64 = 2500.0;
/// Records closer than this to a tier boundary are discarded by the split.
pub const SPLIT_BUFFER: f64 = 5.0;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid city spec: {0}")]
    InvalidCity(String),
    #[error("equal turn-density extrema leave the complexity scale undefined")]
    DegenerateExtrema,
    #[error("difficulty tier {0} is empty after the split")]
    InsufficientRecords(&'static str),
    #[error("need at least 30 routes, requested {0}")]
    TargetTooSmall(usize),
    #[error("graph accepts too few routes: {accepted} of {attempts} attempts")]
    GraphTooSmall { accepted: usize, attempts: usize },
    #[error("dataset line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Language(#[from] LangError),
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Where and how widely to sample routes. `name` is the display form used
/// in prompts (typically "City, Country").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitySpec {
    pub name: String,
    pub center: GeoPoint,
    pub sigma_m: f64,
    pub r_min_m: f64,
    pub r_max_m: f64,
}

impl CitySpec {
    pub fn new(name: impl Into<String>, center: GeoPoint) -> Self {
        CitySpec {
            name: name.into(),
            center,
            sigma_m: 2_000.0,
            r_min_m: 400.0,
            r_max_m: 2_600.0,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if !(self.sigma_m > 0.0) {
            return Err(DatasetError::InvalidCity(format!(
                "sigma must be positive, got {}",
                self.sigma_m
            )));
        }
        if !(0.0 < self.r_min_m && self.r_min_m < self.r_max_m) {
            return Err(DatasetError::InvalidCity(format!(
                "need 0 < r_min < r_max, got {} and {}",
                self.r_min_m, self.r_max_m
            )));
        }
        Ok(())
    }
}

/// Draws a start point from an isotropic 2D Gaussian (std dev `sigma_m`
/// meters) around the city center.
pub fn sample_start(city: &CitySpec, rng: &mut impl Rng) -> GeoPoint {
    let normal = Normal::new(0.0, city.sigma_m).expect("validated sigma");
    let dn: f64 = normal.sample(rng);
    let de: f64 = normal.sample(rng);
    offset_point(city.center, dn, de)
}

/// Draws an endpoint uniformly by area over the annulus
/// `r_min..r_max` meters around `start`.
pub fn sample_end(start: GeoPoint, r_min_m: f64, r_max_m: f64, rng: &mut impl Rng) -> GeoPoint {
    let u: f64 = rng.random_range(0.0..1.0);
    let r = (u * (r_max_m * r_max_m - r_min_m * r_min_m) + r_min_m * r_min_m).sqrt();
    let theta: f64 = rng.random_range(0.0..360.0);
    destination_point(start, Bearing::new(theta), r).expect("positive radius")
}

fn offset_point(origin: GeoPoint, north_m: f64, east_m: f64) -> GeoPoint {
    let north = if north_m >= 0.0 {
        Bearing::new(0.0)
    } else {
        Bearing::new(180.0)
    };
    let east = if east_m >= 0.0 {
        Bearing::new(90.0)
    } else {
        Bearing::new(270.0)
    };
    let p = destination_point(origin, north, north_m.abs()).expect("non-negative distance");
    destination_point(p, east, east_m.abs()).expect("non-negative distance")
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl std::fmt::Display for Difficulty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        })
    }
}

/// One accepted route. `start`/`end` are the snapped node coordinates the
/// geometry actually runs between; `complexity` is the post-orientation
/// score used by the split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteRecord {
    pub id: String,
    pub city: String,
    pub start: GeoPoint,
    pub end: GeoPoint,
    pub geometry: Polyline,
    pub instructions: Vec<String>,
    pub length_m: f64,
    pub turns: usize,
    pub complexity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<Difficulty>,
}

impl RouteRecord {
    pub fn instruction_text(&self) -> String {
        self.instructions.join("\n")
    }

    /// Turns per meter — the quantity the complexity score normalizes.
    pub fn turn_density(&self) -> f64 {
        self.turns as f64 / self.length_m
    }
}

/// A route before dataset-level scoring: everything that can be known from
/// the pair alone.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteSketch {
    pub start: GeoPoint,
    pub end: GeoPoint,
    pub geometry: Polyline,
    pub instructions: Vec<String>,
    pub length_m: f64,
    pub turns: usize,
}

/// Snaps a sampled pair to the graph and routes between the nodes.
/// Returns `None` (a counted rejection, not an error) when the endpoints
/// collapse onto one node, the pair is unreachable, or the route length
/// falls outside the accepted band.
pub fn generate_record(s: GeoPoint, d: GeoPoint, g: &RoadGraph) -> Option<RouteSketch> {
    generate_record_with(s, d, g, MIN_ROUTE_LENGTH_M, MAX_ROUTE_LENGTH_M)
}

pub fn generate_record_with(
    s: GeoPoint,
    d: GeoPoint,
    g: &RoadGraph,
    min_length_m: f64,
    max_length_m: f64,
) -> Option<RouteSketch> {
    let a = g.nearest_node(s).ok()?;
    let b = g.nearest_node(d).ok()?;
    if a.id == b.id {
        return None;
    }
    let path = match g.shortest_path(&a.id, &b.id) {
        Ok(p) => p,
        Err(GraphError::Unreachable { .. }) => return None,
        Err(_) => return None,
    };
    if path.length_m < min_length_m || path.length_m > max_length_m {
        return None;
    }
    let geometry = g.node_path_to_polyline(&path.nodes).ok()?;
    let set = render_instructions(&geometry, g, HeadingStyle::Compass8).ok()?;
    let turns = set.turn_count();
    Some(RouteSketch {
        start: geometry.first(),
        end: geometry.last(),
        length_m: path.length_m,
        turns,
        instructions: set.lines,
        geometry,
    })
}

// ---------------------------------------------------------------------------
// Complexity scoring
// ---------------------------------------------------------------------------

/// Which way the 0–100 complexity scale points.
///
/// The literal normalization assigns LOW scores to turn-dense routes; the
/// ascending orientation (the default) flips it so dense, hard routes score
/// high.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComplexityOrientation {
    Literal,
    #[default]
    TurnDensityAscending,
}

/// Linear normalization of turn density onto 0–100:
/// `(d_max − n_t/l) / (d_max − d_min) × 100`, clamped.
pub fn complexity(n_t: usize, l: f64, d_min: f64, d_max: f64) -> Result<f64, DatasetError> {
    if !(d_max > d_min) {
        return Err(DatasetError::DegenerateExtrema);
    }
    let density = n_t as f64 / l;
    Ok(((d_max - density) / (d_max - d_min) * 100.0).clamp(0.0, 100.0))
}

/// Applies the configured orientation to a literal complexity value.
pub fn effective_complexity(literal: f64, orientation: ComplexityOrientation) -> f64 {
    match orientation {
        ComplexityOrientation::Literal => literal,
        ComplexityOrientation::TurnDensityAscending => 100.0 - literal,
    }
}

// ---------------------------------------------------------------------------
// Dataset assembly
// ---------------------------------------------------------------------------

/// A generated dataset: the surviving labeled records, the buffer-zone
/// discards, and the turn-density extrema the scores were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<RouteRecord>,
    pub discarded: Vec<RouteRecord>,
    pub seed: u64,
    pub d_min: f64,
    pub d_max: f64,
}

impl Dataset {
    /// One record per line; only surviving labeled records are exported.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Reads records back from JSONL; extrema are recomputed from the
    /// surviving records (the generation-time extrema are not stored).
    pub fn from_jsonl(text: &str) -> Result<Dataset, DatasetError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: RouteRecord =
                serde_json::from_str(line).map_err(|e| DatasetError::ParseError {
                    line: i + 1,
                    msg: e.to_string(),
                })?;
            records.push(r);
        }
        let densities: Vec<f64> = records.iter().map(RouteRecord::turn_density).collect();
        let d_min = densities.iter().copied().fold(f64::INFINITY, f64::min);
        let d_max = densities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Dataset {
            records,
            discarded: Vec::new(),
            seed: 0,
            d_min,
            d_max,
        })
    }
}

/// Knobs for dataset generation beyond the city spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenOptions {
    pub min_length_m: f64,
    pub max_length_m: f64,
    pub orientation: ComplexityOrientation,
    pub split_buffer: f64,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            min_length_m: MIN_ROUTE_LENGTH_M,
            max_length_m: MAX_ROUTE_LENGTH_M,
            orientation: ComplexityOrientation::default(),
            split_buffer: SPLIT_BUFFER,
        }
    }
}

/// Rejection-samples pairs until `n_target` routes are accepted, scores
/// them against the dataset turn-density extrema, and splits into tiers.
/// Fully deterministic for a fixed seed.
pub fn generate_dataset(
    city: &CitySpec,
    n_target: usize,
    seed: u64,
    g: &RoadGraph,
) -> Result<Dataset, DatasetError> {
    generate_dataset_with(city, n_target, seed, g, &GenOptions::default())
}

pub fn generate_dataset_with(
    city: &CitySpec,
    n_target: usize,
    seed: u64,
    g: &RoadGraph,
    opts: &GenOptions,
) -> Result<Dataset, DatasetError> {
    city.validate()?;
    if n_target < 30 {
        return Err(DatasetError::TargetTooSmall(n_target));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut sketches: Vec<RouteSketch> = Vec::with_capacity(n_target);
    let mut attempts = 0usize;
    while sketches.len() < n_target {
        attempts += 1;
        let s = sample_start(city, &mut rng);
        let d = sample_end(s, city.r_min_m, city.r_max_m, &mut rng);
        if let Some(sketch) =
            generate_record_with(s, d, g, opts.min_length_m, opts.max_length_m)
        {
            sketches.push(sketch);
        }
        if attempts >= 10 * n_target
            && (sketches.len() as f64) < 0.001 * attempts as f64
        {
            return Err(DatasetError::GraphTooSmall {
                accepted: sketches.len(),
                attempts,
            });
        }
    }

    let densities: Vec<f64> = sketches
        .iter()
        .map(|s| s.turns as f64 / s.length_m)
        .collect();
    let d_min = densities.iter().copied().fold(f64::INFINITY, f64::min);
    let d_max = densities.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut records = Vec::with_capacity(n_target);
    for (i, sketch) in sketches.into_iter().enumerate() {
        let literal = complexity(sketch.turns, sketch.length_m, d_min, d_max)?;
        records.push(RouteRecord {
            id: format!("r{i:05}"),
            city: city.name.clone(),
            start: sketch.start,
            end: sketch.end,
            geometry: sketch.geometry,
            instructions: sketch.instructions,
            length_m: sketch.length_m,
            turns: sketch.turns,
            complexity: effective_complexity(literal, opts.orientation),
            difficulty: None,
        });
    }

    let (records, discarded) = split(records, opts.split_buffer)?;
    Ok(Dataset {
        records,
        discarded,
        seed,
        d_min,
        d_max,
    })
}

/// Buckets records into thirds of the 0–100 score range, discards those
/// within `buffer` points of a boundary, and labels the buckets so mean
/// turn density increases easy → medium → hard.
pub fn split(
    records: Vec<RouteRecord>,
    buffer: f64,
) -> Result<(Vec<RouteRecord>, Vec<RouteRecord>), DatasetError> {
    let lo = 100.0 / 3.0;
    let hi = 200.0 / 3.0;
    let mut buckets: [Vec<RouteRecord>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut discarded = Vec::new();
    for r in records {
        let c = r.complexity;
        if (c - lo).abs() <= buffer || (c - hi).abs() <= buffer {
            discarded.push(r);
        } else if c < lo {
            buckets[0].push(r);
        } else if c < hi {
            buckets[1].push(r);
        } else {
            buckets[2].push(r);
        }
    }

    let names = ["easy", "medium", "hard"];
    for (i, b) in buckets.iter().enumerate() {
        if b.is_empty() {
            return Err(DatasetError::InsufficientRecords(names[i]));
        }
    }

    // Label buckets in ascending mean turn density, whatever direction the
    // score scale happens to point.
    let mean_density = |b: &[RouteRecord]| -> f64 {
        b.iter().map(RouteRecord::turn_density).sum::<f64>() / b.len() as f64
    };
    let mut order: Vec<usize> = vec![0, 1, 2];
    order.sort_by(|&a, &b| {
        mean_density(&buckets[a])
            .partial_cmp(&mean_density(&buckets[b]))
            .expect("finite densities")
    });

    let labels = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];
    let mut kept = Vec::new();
    for (rank, &bucket_idx) in order.iter().enumerate() {
        for mut r in std::mem::take(&mut buckets[bucket_idx]) {
            r.difficulty = Some(labels[rank]);
            kept.push(r);
        }
    }
    kept.sort_by(|a, b| a.id.cmp(&b.id));
    Ok((kept, discarded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{haversine_distance, EARTH_RADIUS_M};
    use crate::graph::build_grid;
    use crate::instr::parse_instructions;

    fn center() -> GeoPoint {
        GeoPoint::new(43.6465, -79.4637).unwrap()
    }

    fn north_offset_m(c: GeoPoint, p: GeoPoint) -> f64 {
        (p.lat - c.lat).to_radians() * EARTH_RADIUS_M
    }

    fn east_offset_m(c: GeoPoint, p: GeoPoint) -> f64 {
        (p.lon - c.lon).to_radians() * EARTH_RADIUS_M * c.lat.to_radians().cos()
    }

    #[test]
    fn sample_start_sigma_zero_limit_is_center() {
        let mut city = CitySpec::new("t", center());
        city.sigma_m = 1e-6;
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let p = sample_start(&city, &mut rng);
        assert!(haversine_distance(center(), p) < 0.01);
    }

    #[test]
    fn sample_start_is_deterministic() {
        let city = CitySpec::new("t", center());
        let a = sample_start(&city, &mut ChaCha12Rng::seed_from_u64(9));
        let b = sample_start(&city, &mut ChaCha12Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn sample_start_mean_converges_to_center() {
        let city = CitySpec::new("t", center());
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let n = 10_000usize;
        let (mut sn, mut se) = (0.0, 0.0);
        for _ in 0..n {
            let p = sample_start(&city, &mut rng);
            sn += north_offset_m(center(), p);
            se += east_offset_m(center(), p);
        }
        let bound = 3.0 * city.sigma_m / (n as f64).sqrt();
        assert!((sn / n as f64).abs() < bound, "north mean {}", sn / n as f64);
        assert!((se / n as f64).abs() < bound, "east mean {}", se / n as f64);
    }

    #[test]
    fn sample_end_respects_annulus() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let p = sample_end(center(), 400.0, 2600.0, &mut rng);
            let d = haversine_distance(center(), p);
            assert!((400.0 - 1e-6..=2600.0 + 1e-6).contains(&d), "{d}");
        }
    }

    #[test]
    fn sample_end_radius_is_area_uniform() {
        // Kolmogorov-Smirnov against the analytic CDF
        // F(r) = (r^2 - r_min^2) / (r_max^2 - r_min^2).
        let (r_min, r_max) = (400.0f64, 2600.0f64);
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let n = 5000usize;
        let mut radii: Vec<f64> = (0..n)
            .map(|_| haversine_distance(center(), sample_end(center(), r_min, r_max, &mut rng)))
            .collect();
        radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let cdf = |r: f64| (r * r - r_min * r_min) / (r_max * r_max - r_min * r_min);
        let mut d_stat = 0.0f64;
        for (i, r) in radii.iter().enumerate() {
            let f = cdf(*r);
            d_stat = d_stat
                .max((f - i as f64 / n as f64).abs())
                .max(((i + 1) as f64 / n as f64 - f).abs());
        }
        // 1.95/sqrt(n) is the alpha ~= 0.001 critical value.
        assert!(d_stat < 1.95 / (n as f64).sqrt(), "KS statistic {d_stat}");
    }

    #[test]
    fn complexity_boundary_values() {
        let (d_min, d_max) = (0.002, 0.010);
        // density = d_max -> 0
        let c = complexity(10, 1000.0, d_min, d_max).unwrap();
        assert!((c - 0.0).abs() < 1e-9);
        // density = d_min -> 100
        let c = complexity(2, 1000.0, d_min, d_max).unwrap();
        assert!((c - 100.0).abs() < 1e-9);
        // midpoint -> 50
        let c = complexity(6, 1000.0, d_min, d_max).unwrap();
        assert!((c - 50.0).abs() < 1e-9);
        assert!(matches!(
            complexity(5, 1000.0, 0.004, 0.004),
            Err(DatasetError::DegenerateExtrema)
        ));
    }

    #[test]
    fn complexity_is_affine_in_density() {
        let (d_min, d_max) = (0.001, 0.009);
        let c = |nt: usize, l: f64| complexity(nt, l, d_min, d_max).unwrap();
        // Equal density steps give equal score steps.
        let s1 = c(2, 1000.0) - c(4, 1000.0);
        let s2 = c(4, 1000.0) - c(6, 1000.0);
        assert!((s1 - s2).abs() < 1e-9);
    }

    #[test]
    fn orientation_flip() {
        assert_eq!(effective_complexity(30.0, ComplexityOrientation::Literal), 30.0);
        assert_eq!(
            effective_complexity(30.0, ComplexityOrientation::TurnDensityAscending),
            70.0
        );
    }

    fn rec(id: &str, complexity: f64, turns: usize, length_m: f64) -> RouteRecord {
        let a = center();
        let b = destination_point(a, Bearing::new(90.0), length_m).unwrap();
        RouteRecord {
            id: id.into(),
            city: "t".into(),
            start: a,
            end: b,
            geometry: Polyline::new(vec![a, b]).unwrap(),
            instructions: vec!["Head east, continue for 1.0 meters.".into()],
            length_m,
            turns,
            complexity,
            difficulty: None,
        }
    }

    #[test]
    fn split_labels_clear_scores() {
        // Scores 10/50/90 with density tracking score: straightforward
        // easy/medium/hard.
        let records = vec![
            rec("a", 10.0, 1, 1000.0),
            rec("b", 50.0, 5, 1000.0),
            rec("c", 90.0, 9, 1000.0),
        ];
        let (kept, discarded) = split(records, 5.0).unwrap();
        assert!(discarded.is_empty());
        let by_id = |id: &str| kept.iter().find(|r| r.id == id).unwrap().difficulty;
        assert_eq!(by_id("a"), Some(Difficulty::Easy));
        assert_eq!(by_id("b"), Some(Difficulty::Medium));
        assert_eq!(by_id("c"), Some(Difficulty::Hard));
    }

    #[test]
    fn split_discards_buffer_zone() {
        let records = vec![
            rec("a", 10.0, 1, 1000.0),
            rec("b", 33.4, 3, 1000.0), // within 5 of 33.33
            rec("c", 50.0, 5, 1000.0),
            rec("d", 63.0, 6, 1000.0), // within 5 of 66.67
            rec("e", 90.0, 9, 1000.0),
        ];
        let (kept, discarded) = split(records, 5.0).unwrap();
        let ids: Vec<&str> = discarded.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, vec!["b", "d"]);
        assert_eq!(kept.len(), 3);
    }

    #[test]
    fn split_orders_labels_by_turn_density() {
        // Literal-orientation style scores: high score = LOW density. The
        // labels must still come out density-ascending.
        let records = vec![
            rec("dense", 10.0, 20, 1000.0),
            rec("mid", 50.0, 10, 1000.0),
            rec("sparse", 90.0, 2, 1000.0),
        ];
        let (kept, _) = split(records, 5.0).unwrap();
        let by_id = |id: &str| kept.iter().find(|r| r.id == id).unwrap().difficulty;
        assert_eq!(by_id("sparse"), Some(Difficulty::Easy));
        assert_eq!(by_id("mid"), Some(Difficulty::Medium));
        assert_eq!(by_id("dense"), Some(Difficulty::Hard));
    }

    #[test]
    fn split_requires_every_tier() {
        let records = vec![rec("a", 10.0, 1, 1000.0), rec("b", 12.0, 1, 1000.0)];
        assert!(matches!(
            split(records, 5.0),
            Err(DatasetError::InsufficientRecords(_))
        ));
    }

    #[test]
    fn generate_record_rejects_short_routes() {
        let g = build_grid(6, 6, 100.0, 0.0, 1, center()).unwrap();
        let a = g.node("n000-000").unwrap().point;
        let b = g.node("n000-003").unwrap().point; // ~300 m
        assert!(generate_record(a, b, &g).is_none());
    }

    #[test]
    fn generate_record_accepts_valid_routes() {
        let g = build_grid(12, 12, 100.0, 0.0, 1, center()).unwrap();
        let a = g.node("n000-000").unwrap().point;
        let b = g.node("n005-005").unwrap().point; // ~1000 m
        let sketch = generate_record(a, b, &g).unwrap();
        assert!((500.0..=2500.0).contains(&sketch.length_m));
        let (cmds, diag) = parse_instructions(&sketch.instructions.join("\n")).unwrap();
        assert!(!cmds.is_empty());
        assert!(diag.unparseable.is_empty());
        assert_eq!(sketch.start, sketch.geometry.first());
        assert_eq!(sketch.end, sketch.geometry.last());
    }

    #[test]
    fn generate_dataset_is_deterministic_and_tiered() {
        let g = build_grid(24, 24, 100.0, 8.0, 5, center()).unwrap();
        let mut city = CitySpec::new("Gridtown, Nowhere", center());
        city.sigma_m = 600.0;
        let ds1 = generate_dataset(&city, 60, 11, &g).unwrap();
        let ds2 = generate_dataset(&city, 60, 11, &g).unwrap();
        assert_eq!(ds1, ds2);
        assert_eq!(ds1.to_jsonl(), ds2.to_jsonl());

        assert_eq!(ds1.records.len() + ds1.discarded.len(), 60);
        assert!(ds1.d_min < ds1.d_max);
        for r in &ds1.records {
            assert!((500.0..=2500.0).contains(&r.length_m));
            assert!(r.difficulty.is_some());
        }
        // Mean turn density must rise with difficulty.
        let mean = |d: Difficulty| {
            let v: Vec<f64> = ds1
                .records
                .iter()
                .filter(|r| r.difficulty == Some(d))
                .map(RouteRecord::turn_density)
                .collect();
            assert!(!v.is_empty(), "{d} tier empty");
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(mean(Difficulty::Easy) < mean(Difficulty::Medium));
        assert!(mean(Difficulty::Medium) < mean(Difficulty::Hard));
    }

    #[test]
    fn generate_dataset_complexity_recomputes() {
        let g = build_grid(24, 24, 100.0, 8.0, 5, center()).unwrap();
        let mut city = CitySpec::new("Gridtown, Nowhere", center());
        city.sigma_m = 600.0;
        let ds = generate_dataset(&city, 60, 11, &g).unwrap();
        for r in ds.records.iter().chain(&ds.discarded) {
            let literal = complexity(r.turns, r.length_m, ds.d_min, ds.d_max).unwrap();
            let expect =
                effective_complexity(literal, ComplexityOrientation::TurnDensityAscending);
            assert!((r.complexity - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn generate_dataset_round_trips_jsonl() {
        let g = build_grid(24, 24, 100.0, 8.0, 5, center()).unwrap();
        let mut city = CitySpec::new("Gridtown, Nowhere", center());
        city.sigma_m = 600.0;
        let ds = generate_dataset(&city, 60, 11, &g).unwrap();
        let text = ds.to_jsonl();
        let back = Dataset::from_jsonl(&text).unwrap();
        assert_eq!(back.records, ds.records);
    }

    #[test]
    fn generate_dataset_rejects_tiny_graphs() {
        // A 2x2 grid 100 m apart cannot host any 500 m route.
        let g = build_grid(2, 2, 100.0, 0.0, 1, center()).unwrap();
        let city = CitySpec::new("t", center());
        assert!(matches!(
            generate_dataset(&city, 30, 1, &g),
            Err(DatasetError::GraphTooSmall { .. })
        ));
    }

    #[test]
    fn generate_dataset_validates_target() {
        let g = build_grid(4, 4, 100.0, 0.0, 1, center()).unwrap();
        let city = CitySpec::new("t", center());
        assert!(matches!(
            generate_dataset(&city, 10, 1, &g),
            Err(DatasetError::TargetTooSmall(10))
        ));
    }
}
