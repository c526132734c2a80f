//! Geometric comparison of a reconstructed path against its ground truth.
//!
//! Seven component metrics (length ratio, Hausdorff, discrete Fréchet,
//! point-sequence edit distance, buffered Jaccard overlap, bearing
//! divergence, and mean coordinate offset) are each normalized onto a 0–100
//! scale and combined as a weighted sum into a single similarity score.
//! Return success and deviation angle cover the "did it actually get back"
//! side of scoring.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

use crate::geo::{
    circular_diff_deg, haversine_distance, initial_bearing, GeoError, GeoPoint, Polyline,
    COINCIDENT_EPS_M, EARTH_RADIUS_M,
};

/// Spacing used when densifying polylines for point-set metrics.
pub const DENSIFY_STEP_M: f64 = 5.0;
/// Two densified points count as "the same" for edit distance within this.
pub const EDIT_MATCH_TOL_M: f64 = 20.0;
/// Half-width of the corridor drawn around a polyline for the Jaccard
/// overlap.
pub const JACCARD_BUFFER_M: f64 = 20.0;
/// Raster cell size for the Jaccard overlap.
pub const JACCARD_CELL_M: f64 = 5.0;
/// Exponential-decay scales turning meter-valued metrics into subscores.
pub const LAMBDA_HAUSDORFF_M: f64 = 150.0;
pub const LAMBDA_FRECHET_M: f64 = 250.0;
pub const LAMBDA_COORD_OFFSET_M: f64 = 150.0;
/// Endpoint tolerance for a successful return.
pub const RETURN_TOL_M: f64 = 20.0;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("reference polyline has zero length")]
    ZeroLengthReference,
    #[error("both buffered regions are empty")]
    EmptyUnion,
    #[error("route too degenerate for bearing comparison")]
    DegenerateRoute,
    #[error("coincident points leave the angle undefined")]
    CoincidentPoints,
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error("similarity weights must sum to 1, got {0}")]
    BadWeights(f64),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

// ---------------------------------------------------------------------------
// Raw component metrics
// ---------------------------------------------------------------------------

/// The seven raw component values for one pair of polylines, plus the raw
/// coordinate-offset sum (the mean is what gets normalized; the sum is kept
/// for reporting).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub length_ratio: f64,
    pub hausdorff_m: f64,
    pub frechet_m: f64,
    pub edit_distance: usize,
    pub jaccard: f64,
    pub angle_deg: f64,
    pub coord_offset_m: f64,
    pub coord_offset_sum_m: f64,
}

/// Tuning knobs shared by the component metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricParams {
    pub densify_step_m: f64,
    pub edit_match_tol_m: f64,
    pub jaccard_buffer_m: f64,
    pub jaccard_cell_m: f64,
    pub lambda_hausdorff_m: f64,
    pub lambda_frechet_m: f64,
    pub lambda_coord_offset_m: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams {
            densify_step_m: DENSIFY_STEP_M,
            edit_match_tol_m: EDIT_MATCH_TOL_M,
            jaccard_buffer_m: JACCARD_BUFFER_M,
            jaccard_cell_m: JACCARD_CELL_M,
            lambda_hausdorff_m: LAMBDA_HAUSDORFF_M,
            lambda_frechet_m: LAMBDA_FRECHET_M,
            lambda_coord_offset_m: LAMBDA_COORD_OFFSET_M,
        }
    }
}

/// Pairwise haversine distances between two densified point sequences;
/// computed once and shared by the point-set metrics.
struct DistMatrix {
    m: usize,
    d: Vec<f64>,
}

impl DistMatrix {
    fn new(a: &[GeoPoint], b: &[GeoPoint]) -> Self {
        let mut d = Vec::with_capacity(a.len() * b.len());
        for &p in a {
            for &q in b {
                d.push(haversine_distance(p, q));
            }
        }
        DistMatrix { m: b.len(), d }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.m + j]
    }
}

/// Ratio of `a`'s length to `b`'s. Direction matters; reporting treats `b`
/// as the ground truth.
pub fn length_ratio(a: &Polyline, b: &Polyline) -> Result<f64, MetricError> {
    let lb = b.length_m();
    if lb <= 0.0 {
        return Err(MetricError::ZeroLengthReference);
    }
    Ok(a.length_m() / lb)
}

fn directed_hausdorff(dm: &DistMatrix, n: usize, m: usize, from_a: bool) -> f64 {
    let (outer, inner) = if from_a { (n, m) } else { (m, n) };
    let mut worst: f64 = 0.0;
    for i in 0..outer {
        let mut best = f64::INFINITY;
        for j in 0..inner {
            let d = if from_a { dm.at(i, j) } else { dm.at(j, i) };
            if d < best {
                best = d;
                if best <= worst {
                    // This point cannot raise the maximum; skip the rest.
                    break;
                }
            }
        }
        if best > worst && best.is_finite() {
            worst = best;
        }
    }
    worst
}

/// Symmetric Hausdorff distance over polylines densified at `step_m`.
pub fn hausdorff(a: &Polyline, b: &Polyline, step_m: f64) -> f64 {
    let da = a.densify(step_m);
    let db = b.densify(step_m);
    let dm = DistMatrix::new(&da, &db);
    hausdorff_from(&dm, da.len(), db.len())
}

fn hausdorff_from(dm: &DistMatrix, n: usize, m: usize) -> f64 {
    directed_hausdorff(dm, n, m, true).max(directed_hausdorff(dm, n, m, false))
}

/// Discrete Fréchet distance over polylines densified at `step_m`.
pub fn discrete_frechet(a: &Polyline, b: &Polyline, step_m: f64) -> f64 {
    let da = a.densify(step_m);
    let db = b.densify(step_m);
    let dm = DistMatrix::new(&da, &db);
    frechet_from(&dm, da.len(), db.len())
}

fn frechet_from(dm: &DistMatrix, n: usize, m: usize) -> f64 {
    // Rolling-row dynamic program over the coupling lattice.
    let mut prev = vec![0.0f64; m];
    let mut cur = vec![0.0f64; m];
    for j in 0..m {
        let d = dm.at(0, j);
        prev[j] = if j == 0 { d } else { d.max(prev[j - 1]) };
    }
    for i in 1..n {
        cur[0] = dm.at(i, 0).max(prev[0]);
        for j in 1..m {
            let reach = prev[j].min(prev[j - 1]).min(cur[j - 1]);
            cur[j] = dm.at(i, j).max(reach);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m - 1]
}

/// Edit distance between densified point sequences; points match when
/// within `match_tol_m`.
pub fn polyline_edit_distance(
    a: &Polyline,
    b: &Polyline,
    step_m: f64,
    match_tol_m: f64,
) -> usize {
    let da = a.densify(step_m);
    let db = b.densify(step_m);
    let dm = DistMatrix::new(&da, &db);
    edit_from(&dm, da.len(), db.len(), match_tol_m)
}

fn edit_from(dm: &DistMatrix, n: usize, m: usize, tol: f64) -> usize {
    // Two-row Levenshtein; substitution is free for matching points.
    let mut prev: Vec<usize> = (0..=m).collect();
    let mut cur = vec![0usize; m + 1];
    for i in 1..=n {
        cur[0] = i;
        for j in 1..=m {
            let sub = prev[j - 1] + usize::from(dm.at(i - 1, j - 1) > tol);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

/// Corridor overlap: each polyline buffered by `buffer_m`, rasterized onto
/// a local `cell_m` grid, scored as intersection over union of cells.
pub fn jaccard(
    a: &Polyline,
    b: &Polyline,
    buffer_m: f64,
    cell_m: f64,
) -> Result<f64, MetricError> {
    assert!(buffer_m > 0.0 && cell_m > 0.0);
    // Local tangent-plane projection about a shared reference point keeps
    // the raster metrically square.
    let ref_pt = a.first();
    let cells_a = raster_cells(a, ref_pt, buffer_m, cell_m);
    let cells_b = raster_cells(b, ref_pt, buffer_m, cell_m);
    let union = cells_a.union(&cells_b).count();
    if union == 0 {
        return Err(MetricError::EmptyUnion);
    }
    let inter = cells_a.intersection(&cells_b).count();
    Ok(inter as f64 / union as f64)
}

fn to_local_xy(p: GeoPoint, origin: GeoPoint) -> (f64, f64) {
    let klat = EARTH_RADIUS_M.to_radians();
    let klon = EARTH_RADIUS_M.to_radians() * origin.lat.to_radians().cos();
    ((p.lon - origin.lon) * klon, (p.lat - origin.lat) * klat)
}

fn raster_cells(
    p: &Polyline,
    origin: GeoPoint,
    buffer_m: f64,
    cell_m: f64,
) -> HashSet<(i64, i64)> {
    let mut cells = HashSet::new();
    let r2 = buffer_m * buffer_m;
    let reach = (buffer_m / cell_m).ceil() as i64 + 1;
    for pt in p.densify(cell_m.min(buffer_m)) {
        let (x, y) = to_local_xy(pt, origin);
        let ci = (x / cell_m).floor() as i64;
        let cj = (y / cell_m).floor() as i64;
        for i in ci - reach..=ci + reach {
            for j in cj - reach..=cj + reach {
                let cx = (i as f64 + 0.5) * cell_m;
                let cy = (j as f64 + 0.5) * cell_m;
                let dx = cx - x;
                let dy = cy - y;
                if dx * dx + dy * dy <= r2 {
                    cells.insert((i, j));
                }
            }
        }
    }
    cells
}

/// Number of matched positions used when two polylines are resampled for
/// position-wise comparison at `step_m`.
fn matched_count(a: &Polyline, b: &Polyline, step_m: f64) -> usize {
    let longest = a.length_m().max(b.length_m());
    ((longest / step_m).ceil() as usize + 1).max(2)
}

/// Mean absolute difference of segment bearings after resampling both
/// polylines to the same number of arc-length positions; degrees in
/// [0, 180].
pub fn bearing_divergence(a: &Polyline, b: &Polyline, step_m: f64) -> Result<f64, MetricError> {
    let n = matched_count(a, b, step_m);
    let ra = a.resample(n);
    let rb = b.resample(n);
    let mut sum = 0.0;
    let mut used = 0usize;
    for k in 0..n - 1 {
        let seg_a = (ra[k], ra[k + 1]);
        let seg_b = (rb[k], rb[k + 1]);
        if haversine_distance(seg_a.0, seg_a.1) < COINCIDENT_EPS_M
            || haversine_distance(seg_b.0, seg_b.1) < COINCIDENT_EPS_M
        {
            continue;
        }
        let ba = initial_bearing(seg_a.0, seg_a.1)?;
        let bb = initial_bearing(seg_b.0, seg_b.1)?;
        sum += circular_diff_deg(ba.degrees(), bb.degrees());
        used += 1;
    }
    if used == 0 {
        return Err(MetricError::DegenerateRoute);
    }
    Ok(sum / used as f64)
}

/// Mean (and raw sum) of distances between matched resampled positions.
pub fn coord_offset(a: &Polyline, b: &Polyline, step_m: f64) -> (f64, f64) {
    let n = matched_count(a, b, step_m);
    let ra = a.resample(n);
    let rb = b.resample(n);
    let sum: f64 = ra
        .iter()
        .zip(&rb)
        .map(|(p, q)| haversine_distance(*p, *q))
        .sum();
    (sum / n as f64, sum)
}

/// All seven raw components with the given parameters.
pub fn metric_vector_with(
    params: &MetricParams,
    a: &Polyline,
    b: &Polyline,
) -> Result<MetricVector, MetricError> {
    let da = a.densify(params.densify_step_m);
    let db = b.densify(params.densify_step_m);
    let dm = DistMatrix::new(&da, &db);
    let (mean_off, sum_off) = coord_offset(a, b, params.densify_step_m);
    Ok(MetricVector {
        length_ratio: length_ratio(a, b)?,
        hausdorff_m: hausdorff_from(&dm, da.len(), db.len()),
        frechet_m: frechet_from(&dm, da.len(), db.len()),
        edit_distance: edit_from(&dm, da.len(), db.len(), params.edit_match_tol_m),
        jaccard: jaccard(a, b, params.jaccard_buffer_m, params.jaccard_cell_m)?,
        angle_deg: bearing_divergence(a, b, params.densify_step_m)?,
        coord_offset_m: mean_off,
        coord_offset_sum_m: sum_off,
    })
}

/// All seven raw components with default parameters.
pub fn metric_vector(a: &Polyline, b: &Polyline) -> Result<MetricVector, MetricError> {
    metric_vector_with(&MetricParams::default(), a, b)
}

// ---------------------------------------------------------------------------
// Normalization and the combined score
// ---------------------------------------------------------------------------

/// Identifies one of the seven component metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricId {
    LengthRatio,
    Hausdorff,
    Frechet,
    EditDistance,
    Jaccard,
    Angle,
    CoordOffset,
}

impl MetricId {
    pub const ALL: [MetricId; 7] = [
        MetricId::LengthRatio,
        MetricId::Hausdorff,
        MetricId::Frechet,
        MetricId::EditDistance,
        MetricId::Jaccard,
        MetricId::Angle,
        MetricId::CoordOffset,
    ];

    /// Accepts both the short column labels and the long snake-case names.
    pub fn from_name(name: &str) -> Result<MetricId, MetricError> {
        match name.to_ascii_lowercase().as_str() {
            "lr" | "length_ratio" => Ok(MetricId::LengthRatio),
            "hd" | "hausdorff" => Ok(MetricId::Hausdorff),
            "fd" | "frechet" => Ok(MetricId::Frechet),
            "ed" | "edit_distance" => Ok(MetricId::EditDistance),
            "ji" | "jaccard" => Ok(MetricId::Jaccard),
            "a" | "angle" => Ok(MetricId::Angle),
            "sco" | "coord_offset" => Ok(MetricId::CoordOffset),
            other => Err(MetricError::UnknownMetric(other.to_string())),
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            MetricId::LengthRatio => "LR",
            MetricId::Hausdorff => "HD",
            MetricId::Frechet => "FD",
            MetricId::EditDistance => "ED",
            MetricId::Jaccard => "JI",
            MetricId::Angle => "A",
            MetricId::CoordOffset => "SCO",
        }
    }
}

/// Everything normalization needs beyond the raw value: the decay scales
/// and the longest densified sequence (the edit-distance ceiling).
#[derive(Debug, Clone, PartialEq)]
pub struct NormContext {
    pub lambda_hausdorff_m: f64,
    pub lambda_frechet_m: f64,
    pub lambda_coord_offset_m: f64,
    pub ed_max_len: usize,
}

impl NormContext {
    pub fn new(params: &MetricParams, ed_max_len: usize) -> Self {
        NormContext {
            lambda_hausdorff_m: params.lambda_hausdorff_m,
            lambda_frechet_m: params.lambda_frechet_m,
            lambda_coord_offset_m: params.lambda_coord_offset_m,
            ed_max_len: ed_max_len.max(1),
        }
    }
}

/// Maps one raw metric value onto the shared 0–100 scale (100 = identical).
pub fn normalize_component(id: MetricId, raw: f64, ctx: &NormContext) -> f64 {
    let score = match id {
        MetricId::LengthRatio => {
            if raw <= 0.0 {
                0.0
            } else {
                100.0 * raw.min(1.0 / raw)
            }
        }
        MetricId::Hausdorff => 100.0 * (-raw / ctx.lambda_hausdorff_m).exp(),
        MetricId::Frechet => 100.0 * (-raw / ctx.lambda_frechet_m).exp(),
        MetricId::CoordOffset => 100.0 * (-raw / ctx.lambda_coord_offset_m).exp(),
        MetricId::EditDistance => 100.0 * (1.0 - raw / ctx.ed_max_len as f64),
        MetricId::Jaccard => 100.0 * raw,
        MetricId::Angle => 100.0 * (1.0 - raw / 180.0),
    };
    score.clamp(0.0, 100.0)
}

/// Per-component weights for the combined score; must sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimilarityWeights {
    pub length_ratio: f64,
    pub hausdorff: f64,
    pub frechet: f64,
    pub edit_distance: f64,
    pub jaccard: f64,
    pub angle: f64,
    pub coord_offset: f64,
}

impl SimilarityWeights {
    /// Equal weighting across all seven components.
    pub fn equal() -> Self {
        let w = 1.0 / 7.0;
        SimilarityWeights {
            length_ratio: w,
            hausdorff: w,
            frechet: w,
            edit_distance: w,
            jaccard: w,
            angle: w,
            coord_offset: 1.0 - 6.0 * w,
        }
    }

    pub fn as_array(&self) -> [f64; 7] {
        [
            self.length_ratio,
            self.hausdorff,
            self.frechet,
            self.edit_distance,
            self.jaccard,
            self.angle,
            self.coord_offset,
        ]
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        let sum: f64 = self.as_array().iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.as_array().iter().any(|w| *w < 0.0) {
            return Err(MetricError::BadWeights(sum));
        }
        Ok(())
    }
}

impl Default for SimilarityWeights {
    fn default() -> Self {
        SimilarityWeights::equal()
    }
}

/// Normalized subscores, one per component, each in [0, 100].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentScores {
    pub length_ratio: f64,
    pub hausdorff: f64,
    pub frechet: f64,
    pub edit_distance: f64,
    pub jaccard: f64,
    pub angle: f64,
    pub coord_offset: f64,
}

impl ComponentScores {
    pub fn as_array(&self) -> [f64; 7] {
        [
            self.length_ratio,
            self.hausdorff,
            self.frechet,
            self.edit_distance,
            self.jaccard,
            self.angle,
            self.coord_offset,
        ]
    }
}

/// The combined similarity: the weighted value, its subscores, and the raw
/// components they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub value: f64,
    pub components: ComponentScores,
    pub raw: MetricVector,
}

/// Weighted similarity between a candidate polyline and a reference, with
/// explicit parameters.
pub fn similarity_with(
    params: &MetricParams,
    a: &Polyline,
    b: &Polyline,
    weights: &SimilarityWeights,
) -> Result<SimilarityScore, MetricError> {
    weights.validate()?;
    let da_len = a.densify(params.densify_step_m).len();
    let db_len = b.densify(params.densify_step_m).len();
    let raw = metric_vector_with(params, a, b)?;
    let ctx = NormContext::new(params, da_len.max(db_len));
    let components = ComponentScores {
        length_ratio: normalize_component(MetricId::LengthRatio, raw.length_ratio, &ctx),
        hausdorff: normalize_component(MetricId::Hausdorff, raw.hausdorff_m, &ctx),
        frechet: normalize_component(MetricId::Frechet, raw.frechet_m, &ctx),
        edit_distance: normalize_component(
            MetricId::EditDistance,
            raw.edit_distance as f64,
            &ctx,
        ),
        jaccard: normalize_component(MetricId::Jaccard, raw.jaccard, &ctx),
        angle: normalize_component(MetricId::Angle, raw.angle_deg, &ctx),
        coord_offset: normalize_component(MetricId::CoordOffset, raw.coord_offset_m, &ctx),
    };
    let value = weights
        .as_array()
        .iter()
        .zip(components.as_array())
        .map(|(w, c)| w * c)
        .sum();
    Ok(SimilarityScore {
        value,
        components,
        raw,
    })
}

/// Weighted similarity with default parameters.
pub fn similarity(
    a: &Polyline,
    b: &Polyline,
    weights: &SimilarityWeights,
) -> Result<SimilarityScore, MetricError> {
    similarity_with(&MetricParams::default(), a, b, weights)
}

// ---------------------------------------------------------------------------
// Return checks
// ---------------------------------------------------------------------------

/// True when the reconstructed path ends within `tol_m` of where the
/// original route began.
pub fn return_success(reversed: &Polyline, original_start: GeoPoint, tol_m: f64) -> bool {
    haversine_distance(reversed.last(), original_start) <= tol_m
}

/// Bearing error at the destination: how far the reconstructed endpoint
/// direction strays from the true return direction, in [0, 180] degrees.
/// `destination` anchors both bearings (it is where the reversal starts).
pub fn deviation_angle(
    destination: GeoPoint,
    original_start: GeoPoint,
    reversed_end: GeoPoint,
) -> Result<f64, MetricError> {
    let truth = initial_bearing(destination, original_start)
        .map_err(|_| MetricError::CoincidentPoints)?;
    let got = initial_bearing(destination, reversed_end)
        .map_err(|_| MetricError::CoincidentPoints)?;
    Ok(circular_diff_deg(truth.degrees(), got.degrees()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{destination_point, Bearing};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn east_line(start: GeoPoint, len_m: f64, pieces: usize) -> Polyline {
        let east = Bearing::new(90.0);
        let mut pts = vec![start];
        for i in 1..=pieces {
            pts.push(destination_point(start, east, len_m * i as f64 / pieces as f64).unwrap());
        }
        Polyline::new(pts).unwrap()
    }

    fn translated(p: &Polyline, bearing_deg: f64, dist_m: f64) -> Polyline {
        let b = Bearing::new(bearing_deg);
        Polyline::new(
            p.points()
                .iter()
                .map(|&q| destination_point(q, b, dist_m).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn random_polyline(rng: &mut ChaCha12Rng, max_pts: usize, span_m: f64) -> Polyline {
        let start = pt(
            43.0 + rng.random_range(-0.01..0.01),
            -79.0 + rng.random_range(-0.01..0.01),
        );
        let n = rng.random_range(2..=max_pts);
        let mut pts = vec![start];
        let mut cur = start;
        for _ in 1..n {
            let bearing = Bearing::new(rng.random_range(0.0..360.0));
            let d = rng.random_range(span_m * 0.1..span_m);
            cur = destination_point(cur, bearing, d).unwrap();
            pts.push(cur);
        }
        Polyline::new(pts).unwrap()
    }

    // -- length ratio -------------------------------------------------------

    #[test]
    fn length_ratio_basics() {
        let a = east_line(pt(0.0, 0.0), 1000.0, 4);
        assert!((length_ratio(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let b = east_line(pt(0.0, 0.0), 2000.0, 4);
        assert!((length_ratio(&b, &a).unwrap() - 2.0).abs() < 1e-9);
        assert!((length_ratio(&a, &b).unwrap() - 0.5).abs() < 1e-9);
    }

    // -- hausdorff ----------------------------------------------------------

    #[test]
    fn hausdorff_identical_is_zero() {
        let a = east_line(pt(43.0, -79.0), 500.0, 3);
        assert_eq!(hausdorff(&a, &a, 5.0), 0.0);
    }

    #[test]
    fn hausdorff_parallel_offset_segments() {
        let a = east_line(pt(0.0, 0.0), 1000.0, 2);
        let b = translated(&a, 0.0, 100.0);
        let hd = hausdorff(&a, &b, 5.0);
        assert!((hd - 100.0).abs() < 1.0, "{hd}");
    }

    /// Independent re-computation: max over all points of the min distance
    /// to the other densified set, written as plain loops over fresh
    /// haversine calls.
    fn hausdorff_oracle(a: &Polyline, b: &Polyline, step: f64) -> f64 {
        let pa = a.densify(step);
        let pb = b.densify(step);
        let directed = |xs: &[GeoPoint], ys: &[GeoPoint]| -> f64 {
            xs.iter()
                .map(|x| {
                    ys.iter()
                        .map(|y| haversine_distance(*x, *y))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max)
        };
        directed(&pa, &pb).max(directed(&pb, &pa))
    }

    #[test]
    fn hausdorff_matches_brute_force() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..60 {
            let a = random_polyline(&mut rng, 8, 150.0);
            let b = random_polyline(&mut rng, 8, 150.0);
            let got = hausdorff(&a, &b, 25.0);
            let want = hausdorff_oracle(&a, &b, 25.0);
            assert_eq!(got, want);
        }
    }

    // -- frechet ------------------------------------------------------------

    #[test]
    fn frechet_identical_is_zero() {
        let a = east_line(pt(43.0, -79.0), 500.0, 3);
        assert_eq!(discrete_frechet(&a, &a, 5.0), 0.0);
    }

    #[test]
    fn frechet_reversed_line_is_large() {
        let a = east_line(pt(0.0, 0.0), 1000.0, 5);
        let fd = discrete_frechet(&a, &a.reversed(), 5.0);
        assert!(fd > 900.0, "{fd}");
    }

    /// Pure exponential recursion straight off the coupling definition.
    fn frechet_oracle(pa: &[GeoPoint], pb: &[GeoPoint]) -> f64 {
        fn rec(pa: &[GeoPoint], pb: &[GeoPoint], i: usize, j: usize) -> f64 {
            let d = haversine_distance(pa[i], pb[j]);
            let reach = match (i, j) {
                (0, 0) => return d,
                (0, _) => rec(pa, pb, 0, j - 1),
                (_, 0) => rec(pa, pb, i - 1, 0),
                _ => rec(pa, pb, i - 1, j)
                    .min(rec(pa, pb, i - 1, j - 1))
                    .min(rec(pa, pb, i, j - 1)),
            };
            d.max(reach)
        }
        rec(pa, pb, pa.len() - 1, pb.len() - 1)
    }

    #[test]
    fn frechet_matches_recursive_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        for _ in 0..30 {
            let a = random_polyline(&mut rng, 7, 120.0);
            let b = random_polyline(&mut rng, 7, 120.0);
            // A step far beyond the span keeps densify from adding points,
            // so both sides see the raw vertices.
            let got = discrete_frechet(&a, &b, 1e9);
            let want = frechet_oracle(a.points(), b.points());
            assert_eq!(got, want);
        }
    }

    #[test]
    fn frechet_dominates_hausdorff() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let a = random_polyline(&mut rng, 6, 100.0);
            let b = random_polyline(&mut rng, 6, 100.0);
            let hd = hausdorff(&a, &b, 40.0);
            let fd = discrete_frechet(&a, &b, 40.0);
            assert!(fd >= hd - 1e-9, "fd {fd} < hd {hd}");
        }
    }

    // -- edit distance ------------------------------------------------------

    #[test]
    fn edit_distance_identical_is_zero() {
        let a = east_line(pt(43.0, -79.0), 400.0, 4);
        assert_eq!(polyline_edit_distance(&a, &a, 5.0, 20.0), 0);
    }

    #[test]
    fn edit_distance_disjoint_is_max_len() {
        let a = east_line(pt(0.0, 0.0), 200.0, 2);
        let b = translated(&a, 0.0, 5_000.0);
        let da = a.densify(5.0).len();
        let db = b.densify(5.0).len();
        let ed = polyline_edit_distance(&a, &b, 5.0, 20.0);
        assert_eq!(ed, da.max(db));
    }

    /// Textbook full-matrix Wagner-Fischer, recomputing distances directly.
    fn edit_oracle(pa: &[GeoPoint], pb: &[GeoPoint], tol: f64) -> usize {
        let (n, m) = (pa.len(), pb.len());
        let mut dp = vec![vec![0usize; m + 1]; n + 1];
        for i in 0..=n {
            dp[i][0] = i;
        }
        for j in 0..=m {
            dp[0][j] = j;
        }
        for i in 1..=n {
            for j in 1..=m {
                let cost = usize::from(haversine_distance(pa[i - 1], pb[j - 1]) > tol);
                dp[i][j] = (dp[i - 1][j - 1] + cost)
                    .min(dp[i - 1][j] + 1)
                    .min(dp[i][j - 1] + 1);
            }
        }
        dp[n][m]
    }

    #[test]
    fn edit_distance_matches_independent_dp() {
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        for _ in 0..50 {
            let a = random_polyline(&mut rng, 8, 120.0);
            let b = random_polyline(&mut rng, 8, 120.0);
            let got = polyline_edit_distance(&a, &b, 30.0, 20.0);
            let want = edit_oracle(&a.densify(30.0), &b.densify(30.0), 20.0);
            assert_eq!(got, want);
        }
    }

    // -- jaccard ------------------------------------------------------------

    #[test]
    fn jaccard_identical_is_one() {
        let a = east_line(pt(43.0, -79.0), 600.0, 3);
        let ji = jaccard(&a, &a, 20.0, 5.0).unwrap();
        assert_eq!(ji, 1.0);
    }

    #[test]
    fn jaccard_disjoint_is_zero() {
        let a = east_line(pt(0.0, 0.0), 500.0, 2);
        let b = translated(&a, 0.0, 10_000.0);
        assert_eq!(jaccard(&a, &b, 20.0, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn jaccard_half_overlap_is_about_a_third() {
        // Equal-length collinear segments sharing half their extent: the
        // union covers 1.5 L of corridor, the intersection 0.5 L.
        let l = 1000.0;
        let a = east_line(pt(0.0, 0.0), l, 2);
        let b_start = destination_point(pt(0.0, 0.0), Bearing::new(90.0), l / 2.0).unwrap();
        let b = east_line(b_start, l, 2);
        let ji = jaccard(&a, &b, 20.0, 5.0).unwrap();
        assert!((ji - 1.0 / 3.0).abs() < 0.05, "{ji}");
    }

    // -- bearing divergence -------------------------------------------------

    #[test]
    fn bearing_divergence_identical_is_zero() {
        let a = east_line(pt(43.0, -79.0), 500.0, 4);
        assert!(bearing_divergence(&a, &a, 5.0).unwrap() < 1e-9);
    }

    #[test]
    fn bearing_divergence_reversed_is_180() {
        let a = east_line(pt(0.0, 0.0), 500.0, 2);
        let d = bearing_divergence(&a, &a.reversed(), 5.0).unwrap();
        assert!((d - 180.0).abs() < 1e-6, "{d}");
    }

    #[test]
    fn bearing_divergence_perpendicular_is_90() {
        let origin = pt(0.0, 0.0);
        let a = east_line(origin, 300.0, 2);
        let north = Polyline::new(vec![
            origin,
            destination_point(origin, Bearing::new(0.0), 300.0).unwrap(),
        ])
        .unwrap();
        let d = bearing_divergence(&a, &north, 5.0).unwrap();
        assert!((d - 90.0).abs() < 1e-6, "{d}");
    }

    // -- coordinate offset --------------------------------------------------

    #[test]
    fn coord_offset_identical_is_zero() {
        let a = east_line(pt(43.0, -79.0), 500.0, 4);
        let (mean, sum) = coord_offset(&a, &a, 5.0);
        assert_eq!(mean, 0.0);
        assert_eq!(sum, 0.0);
    }

    #[test]
    fn coord_offset_uniform_lateral_shift() {
        let a = east_line(pt(0.0, 0.0), 800.0, 4);
        let b = translated(&a, 0.0, 100.0);
        let (mean, _) = coord_offset(&a, &b, 5.0);
        assert!((mean - 100.0).abs() < 1.0, "{mean}");
    }

    #[test]
    fn coord_offset_invariant_under_joint_reversal() {
        let mut rng = ChaCha12Rng::seed_from_u64(15);
        let a = random_polyline(&mut rng, 6, 200.0);
        let b = random_polyline(&mut rng, 6, 200.0);
        let (m1, _) = coord_offset(&a, &b, 10.0);
        let (m2, _) = coord_offset(&a.reversed(), &b.reversed(), 10.0);
        assert!((m1 - m2).abs() < 1e-6);
    }

    // -- normalization ------------------------------------------------------

    #[test]
    fn normalization_anchor_values() {
        let ctx = NormContext::new(&MetricParams::default(), 100);
        assert_eq!(normalize_component(MetricId::Jaccard, 1.0, &ctx), 100.0);
        assert_eq!(normalize_component(MetricId::Angle, 180.0, &ctx), 0.0);
        let hd = normalize_component(MetricId::Hausdorff, 150.0, &ctx);
        assert!((hd - 100.0 / std::f64::consts::E).abs() < 1e-9);
        assert_eq!(normalize_component(MetricId::EditDistance, 100.0, &ctx), 0.0);
        assert_eq!(normalize_component(MetricId::EditDistance, 0.0, &ctx), 100.0);
        assert_eq!(normalize_component(MetricId::LengthRatio, 1.0, &ctx), 100.0);
        let lr = normalize_component(MetricId::LengthRatio, 2.0, &ctx);
        assert!((lr - 50.0).abs() < 1e-9);
    }

    #[test]
    fn metric_names_round_trip() {
        for id in MetricId::ALL {
            assert_eq!(MetricId::from_name(id.short_name()).unwrap(), id);
        }
        assert_eq!(
            MetricId::from_name("length_ratio").unwrap(),
            MetricId::LengthRatio
        );
        assert!(matches!(
            MetricId::from_name("banana"),
            Err(MetricError::UnknownMetric(_))
        ));
    }

    // -- similarity ---------------------------------------------------------

    #[test]
    fn similarity_identical_is_100() {
        let a = east_line(pt(43.0, -79.0), 900.0, 5);
        let s = similarity(&a, &a, &SimilarityWeights::equal()).unwrap();
        assert!((s.value - 100.0).abs() < 1e-9, "{}", s.value);
    }

    #[test]
    fn similarity_value_is_weighted_sum() {
        let mut rng = ChaCha12Rng::seed_from_u64(16);
        let a = random_polyline(&mut rng, 6, 300.0);
        let b = random_polyline(&mut rng, 6, 300.0);
        let w = SimilarityWeights::equal();
        let s = similarity(&a, &b, &w).unwrap();
        let dot: f64 = w
            .as_array()
            .iter()
            .zip(s.components.as_array())
            .map(|(w, c)| w * c)
            .sum();
        assert!((s.value - dot).abs() < 1e-9);
        for c in s.components.as_array() {
            assert!((0.0..=100.0).contains(&c));
        }
        assert!((0.0..=100.0).contains(&s.value));
    }

    #[test]
    fn similarity_symmetric_with_default_weights() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..5 {
            let a = random_polyline(&mut rng, 5, 250.0);
            let b = random_polyline(&mut rng, 5, 250.0);
            let sab = similarity(&a, &b, &SimilarityWeights::equal()).unwrap();
            let sba = similarity(&b, &a, &SimilarityWeights::equal()).unwrap();
            assert!(
                (sab.value - sba.value).abs() < 1e-6,
                "{} vs {}",
                sab.value,
                sba.value
            );
        }
    }

    #[test]
    fn similarity_far_translation_reads_distinct() {
        let a = east_line(pt(43.0, -79.0), 1000.0, 4);
        let b = translated(&a, 90.0, 5_000.0);
        let s = similarity(&a, &b, &SimilarityWeights::equal()).unwrap();
        assert!(s.value < 30.0, "{}", s.value);
    }

    #[test]
    fn similarity_small_truncation_reads_strong() {
        // Chop the last 10% off a route; what remains should still read as
        // strongly the same path.
        let full = east_line(pt(43.0, -79.0), 800.0, 10);
        let truncated = Polyline::new(full.resample(11)[..10].to_vec()).unwrap();
        let s = similarity(&truncated, &full, &SimilarityWeights::equal()).unwrap();
        assert!(s.value > 80.0, "{}", s.value);
    }

    #[test]
    fn similarity_degrades_monotonically_with_offset() {
        let a = east_line(pt(43.0, -79.0), 1000.0, 4);
        let mut last = f64::INFINITY;
        for d in [0.0, 25.0, 50.0, 100.0, 200.0, 400.0] {
            let b = if d == 0.0 { a.clone() } else { translated(&a, 0.0, d) };
            let s = similarity(&a, &b, &SimilarityWeights::equal()).unwrap();
            assert!(s.value <= last + 1e-9, "offset {d}: {} > {last}", s.value);
            last = s.value;
        }
    }

    #[test]
    fn weights_must_sum_to_one() {
        let mut w = SimilarityWeights::equal();
        w.jaccard += 0.1;
        assert!(matches!(w.validate(), Err(MetricError::BadWeights(_))));
        assert!(SimilarityWeights::equal().validate().is_ok());
    }

    // -- return checks ------------------------------------------------------

    #[test]
    fn return_success_tolerance_boundary() {
        let start = pt(43.0, -79.0);
        let mk = |d: f64| {
            let end = destination_point(start, Bearing::new(45.0), d).unwrap();
            let prev = destination_point(end, Bearing::new(180.0), 500.0).unwrap();
            Polyline::new(vec![prev, end]).unwrap()
        };
        assert!(return_success(&mk(0.0), start, 20.0));
        assert!(return_success(&mk(19.0), start, 20.0));
        assert!(!return_success(&mk(25.0), start, 20.0));
    }

    #[test]
    fn deviation_angle_cases() {
        let d = pt(0.0, 0.0);
        let s = destination_point(d, Bearing::new(0.0), 1000.0).unwrap();
        assert_eq!(deviation_angle(d, s, s).unwrap(), 0.0);
        let east = destination_point(d, Bearing::new(90.0), 800.0).unwrap();
        let ang = deviation_angle(d, s, east).unwrap();
        assert!((ang - 90.0).abs() < 1e-6);
        let south = destination_point(d, Bearing::new(180.0), 700.0).unwrap();
        let ang = deviation_angle(d, s, south).unwrap();
        assert!((ang - 180.0).abs() < 1e-6);
        assert!(matches!(
            deviation_angle(d, d, s),
            Err(MetricError::CoincidentPoints)
        ));
    }
}
