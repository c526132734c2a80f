//! Spherical geometry primitives used everywhere else in the crate.
//!
//! All computations treat the Earth as a sphere of radius [`EARTH_RADIUS_M`].
//! Coordinates are WGS84-style latitude/longitude in decimal degrees;
//! distances are meters; bearings are compass degrees clockwise from north.

use serde::de::{self, SeqAccess, Visitor};
use serde::ser::SerializeTuple;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use thiserror::Error;

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Two points closer than this (meters) are treated as coincident.
pub const COINCIDENT_EPS_M: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum GeoError {
    #[error("invalid coordinate: lat {lat}, lon {lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("points are coincident; bearing is undefined")]
    CoincidentPoints,
    #[error("polyline needs at least 2 distinct points, got {0}")]
    DegeneratePolyline(usize),
    #[error("distance must be non-negative, got {0}")]
    NegativeDistance(f64),
}

/// A latitude/longitude pair in decimal degrees.
///
/// Serialized as a two-element `[lat, lon]` array so route records and
/// config files stay compact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    /// Validates the coordinate ranges (`lat` in ±90, `lon` in ±180, finite).
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() || !lon.is_finite() || lat.abs() > 90.0 || lon.abs() > 180.0 {
            return Err(GeoError::InvalidCoordinate { lat, lon });
        }
        Ok(GeoPoint { lat, lon })
    }

    /// Construction shorthand for coordinates already known to be valid.
    ///
    /// Panics on out-of-range input; use [`GeoPoint::new`] for untrusted data.
    pub fn raw(lat: f64, lon: f64) -> Self {
        GeoPoint::new(lat, lon).expect("coordinate out of range")
    }
}

impl Serialize for GeoPoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut tup = serializer.serialize_tuple(2)?;
        tup.serialize_element(&self.lat)?;
        tup.serialize_element(&self.lon)?;
        tup.end()
    }
}

impl<'de> Deserialize<'de> for GeoPoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct PairVisitor;
        impl<'de> Visitor<'de> for PairVisitor {
            type Value = GeoPoint;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a [lat, lon] pair")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<GeoPoint, A::Error> {
                let lat: f64 = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let lon: f64 = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(1, &self))?;
                if seq.next_element::<f64>()?.is_some() {
                    return Err(de::Error::invalid_length(3, &self));
                }
                GeoPoint::new(lat, lon).map_err(de::Error::custom)
            }
        }
        deserializer.deserialize_tuple(2, PairVisitor)
    }
}

/// A compass bearing normalized to `[0, 360)` degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bearing(f64);

impl Bearing {
    pub fn new(degrees: f64) -> Self {
        Bearing(degrees.rem_euclid(360.0))
    }

    pub fn degrees(self) -> f64 {
        self.0
    }

    /// The reciprocal bearing (this bearing rotated by 180 degrees).
    pub fn opposite(self) -> Self {
        Bearing::new(self.0 + 180.0)
    }

    /// Signed shortest rotation from `other` to `self`, in `(-180, 180]`.
    pub fn signed_diff(self, other: Bearing) -> f64 {
        normalize_signed_deg(self.0 - other.0)
    }
}

/// Normalizes an angle difference into the half-open interval `(-180, 180]`.
pub fn normalize_signed_deg(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Absolute circular difference between two bearings, in `[0, 180]`.
pub fn circular_diff_deg(a: f64, b: f64) -> f64 {
    normalize_signed_deg(a - b).abs()
}

/// Great-circle distance between two points, in meters (haversine form).
pub fn haversine_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlam = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlam / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

fn is_coincident(a: GeoPoint, b: GeoPoint) -> bool {
    haversine_distance(a, b) < COINCIDENT_EPS_M
}

/// Forward azimuth at `a` of the great circle from `a` to `b`, in `[0, 360)`.
///
/// Errors with [`GeoError::CoincidentPoints`] when the two points are closer
/// than [`COINCIDENT_EPS_M`].
pub fn initial_bearing(a: GeoPoint, b: GeoPoint) -> Result<Bearing, GeoError> {
    if is_coincident(a, b) {
        return Err(GeoError::CoincidentPoints);
    }
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dlam = (b.lon - a.lon).to_radians();
    let y = dlam.sin() * phi2.cos();
    let x = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlam.cos();
    Ok(Bearing::new(y.atan2(x).to_degrees()))
}

/// Azimuth of the arc `a -> b` measured at the *arrival* point `b`.
pub fn final_bearing(a: GeoPoint, b: GeoPoint) -> Result<Bearing, GeoError> {
    Ok(initial_bearing(b, a)?.opposite())
}

/// Solves the direct problem: the point reached from `origin` after
/// travelling `distance_m` meters on the given initial bearing.
pub fn destination_point(
    origin: GeoPoint,
    bearing: Bearing,
    distance_m: f64,
) -> Result<GeoPoint, GeoError> {
    if !(distance_m >= 0.0) {
        return Err(GeoError::NegativeDistance(distance_m));
    }
    let delta = distance_m / EARTH_RADIUS_M;
    let theta = bearing.degrees().to_radians();
    let phi1 = origin.lat.to_radians();
    let lam1 = origin.lon.to_radians();
    let phi2 = (phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos()).asin();
    let lam2 = lam1
        + (theta.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * phi2.sin());
    let lat = phi2.to_degrees();
    let mut lon = lam2.to_degrees();
    // Wrap longitude to [-180, 180].
    lon = (lon + 540.0).rem_euclid(360.0) - 180.0;
    GeoPoint::new(lat.clamp(-90.0, 90.0), lon)
}

/// Signed deflection at `b` when walking `a -> b -> c`, in `(-180, 180]`
/// degrees. Positive is a right (clockwise) turn, negative a left turn.
pub fn turn_angle(a: GeoPoint, b: GeoPoint, c: GeoPoint) -> Result<f64, GeoError> {
    let incoming = final_bearing(a, b)?;
    let outgoing = initial_bearing(b, c)?;
    Ok(outgoing.signed_diff(incoming))
}

/// Sum of great-circle segment lengths along `points`, in meters.
pub fn path_length_m(points: &[GeoPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| haversine_distance(w[0], w[1]))
        .sum()
}

// ---------------------------------------------------------------------------
// Polylines
// ---------------------------------------------------------------------------

/// An ordered sequence of at least two distinct vertices.
///
/// Construction drops consecutive duplicates (closer than
/// [`COINCIDENT_EPS_M`]); non-consecutive repeats are allowed so loops and
/// out-and-back routes stay representable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<GeoPoint>", into = "Vec<GeoPoint>")]
pub struct Polyline {
    points: Vec<GeoPoint>,
}

impl TryFrom<Vec<GeoPoint>> for Polyline {
    type Error = GeoError;
    fn try_from(points: Vec<GeoPoint>) -> Result<Self, GeoError> {
        Polyline::new(points)
    }
}

impl From<Polyline> for Vec<GeoPoint> {
    fn from(p: Polyline) -> Vec<GeoPoint> {
        p.points
    }
}

impl Polyline {
    pub fn new(points: Vec<GeoPoint>) -> Result<Self, GeoError> {
        let mut dedup: Vec<GeoPoint> = Vec::with_capacity(points.len());
        for p in points {
            if dedup.last().map_or(true, |last| !is_coincident(*last, p)) {
                dedup.push(p);
            }
        }
        if dedup.len() < 2 {
            return Err(GeoError::DegeneratePolyline(dedup.len()));
        }
        Ok(Polyline { points: dedup })
    }

    pub fn points(&self) -> &[GeoPoint] {
        &self.points
    }

    pub fn first(&self) -> GeoPoint {
        self.points[0]
    }

    pub fn last(&self) -> GeoPoint {
        *self.points.last().unwrap()
    }

    pub fn reversed(&self) -> Polyline {
        let mut points = self.points.clone();
        points.reverse();
        Polyline { points }
    }

    pub fn length_m(&self) -> f64 {
        path_length_m(&self.points)
    }

    /// Vertices plus interpolated points so that no gap exceeds `step_m`.
    /// Original vertices are always retained.
    pub fn densify(&self, step_m: f64) -> Vec<GeoPoint> {
        assert!(step_m > 0.0, "densify step must be positive");
        let mut out = Vec::new();
        out.push(self.points[0]);
        for w in self.points.windows(2) {
            let (a, b) = (w[0], w[1]);
            let len = haversine_distance(a, b);
            let pieces = (len / step_m).ceil().max(1.0) as usize;
            if pieces > 1 {
                let bearing = initial_bearing(a, b).expect("polyline vertices are distinct");
                for i in 1..pieces {
                    let d = len * i as f64 / pieces as f64;
                    out.push(destination_point(a, bearing, d).unwrap());
                }
            }
            out.push(b);
        }
        out
    }

    /// Exactly `n` points evenly spaced by arc-length fraction, including
    /// both endpoints. `n` must be at least 2.
    pub fn resample(&self, n: usize) -> Vec<GeoPoint> {
        assert!(n >= 2, "resample needs at least 2 points");
        let total = self.length_m();
        let mut cum = Vec::with_capacity(self.points.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for w in self.points.windows(2) {
            acc += haversine_distance(w[0], w[1]);
            cum.push(acc);
        }
        let mut out = Vec::with_capacity(n);
        out.push(self.points[0]);
        let mut seg = 0usize;
        for i in 1..n - 1 {
            let target = total * i as f64 / (n - 1) as f64;
            while seg + 2 < cum.len() && cum[seg + 1] < target {
                seg += 1;
            }
            let within = target - cum[seg];
            let a = self.points[seg];
            let b = self.points[seg + 1];
            if within <= 0.0 {
                out.push(a);
            } else {
                let bearing = initial_bearing(a, b).expect("polyline vertices are distinct");
                out.push(destination_point(a, bearing, within).unwrap());
            }
        }
        out.push(self.points[self.points.len() - 1]);
        out
    }
}

// ---------------------------------------------------------------------------
// Compass
// ---------------------------------------------------------------------------

/// The eight principal compass winds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Compass8 {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

pub const COMPASS8: [Compass8; 8] = [
    Compass8::N,
    Compass8::NE,
    Compass8::E,
    Compass8::SE,
    Compass8::S,
    Compass8::SW,
    Compass8::W,
    Compass8::NW,
];

impl Compass8 {
    pub fn bearing(self) -> Bearing {
        Bearing::new(self.index() as f64 * 45.0)
    }

    fn index(self) -> usize {
        COMPASS8.iter().position(|c| *c == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            Compass8::N => "north",
            Compass8::NE => "northeast",
            Compass8::E => "east",
            Compass8::SE => "southeast",
            Compass8::S => "south",
            Compass8::SW => "southwest",
            Compass8::W => "west",
            Compass8::NW => "northwest",
        }
    }

    pub fn opposite(self) -> Compass8 {
        COMPASS8[(self.index() + 4) % 8]
    }

    /// Nearest wind under uniform 45-degree bins; used when *rendering* a
    /// heading as text.
    pub fn nearest(bearing: Bearing) -> Compass8 {
        let idx = (bearing.degrees() / 45.0).round() as usize % 8;
        COMPASS8[idx]
    }

    /// Wind sector with narrowed cardinals: a bearing within
    /// `cardinal_half_width_deg` of due N/E/S/W maps to that cardinal, and
    /// everything else in the quadrant maps to the diagonal wind. Summaries
    /// of *net* displacement use this, so a mostly-diagonal offset is not
    /// rounded away to a cardinal.
    pub fn sector(bearing: Bearing, cardinal_half_width_deg: f64) -> Compass8 {
        assert!(
            (0.0..22.5).contains(&cardinal_half_width_deg) || cardinal_half_width_deg == 22.5,
            "cardinal half-width must be in (0, 22.5]"
        );
        let deg = bearing.degrees();
        let cardinal_idx = ((deg / 90.0).round() as usize % 4) * 2;
        let cardinal = COMPASS8[cardinal_idx];
        if circular_diff_deg(deg, cardinal.bearing().degrees()) <= cardinal_half_width_deg {
            return cardinal;
        }
        // Strictly inside a quadrant: pick its diagonal.
        let quadrant = (deg / 90.0).floor() as usize % 4;
        COMPASS8[quadrant * 2 + 1]
    }
}

impl fmt::Display for Compass8 {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Maps a compass word (8- or 16-wind, with space/hyphen variants) to its
/// bearing in degrees. Returns `None` for anything else.
pub fn compass_word_to_degrees(word: &str) -> Option<f64> {
    const WINDS16: [(&str, f64); 16] = [
        ("north", 0.0),
        ("north-northeast", 22.5),
        ("northeast", 45.0),
        ("east-northeast", 67.5),
        ("east", 90.0),
        ("east-southeast", 112.5),
        ("southeast", 135.0),
        ("south-southeast", 157.5),
        ("south", 180.0),
        ("south-southwest", 202.5),
        ("southwest", 225.0),
        ("west-southwest", 247.5),
        ("west", 270.0),
        ("west-northwest", 292.5),
        ("northwest", 315.0),
        ("north-northwest", 337.5),
    ];
    let key = word.trim().to_ascii_lowercase().replace([' ', '_'], "-");
    WINDS16
        .iter()
        .find(|(name, _)| *name == key)
        .map(|(_, deg)| *deg)
}

// ---------------------------------------------------------------------------
// Coordinate formatting
// ---------------------------------------------------------------------------

fn format_dms_axis(value: f64, pos: char, neg: char) -> String {
    let hemi = if value < 0.0 { neg } else { pos };
    let v = value.abs();
    let mut deg = v.floor();
    let mut min = ((v - deg) * 60.0).floor();
    // Seconds to one decimal, with carry on round-up to 60.0.
    let mut sec = ((v - deg) * 60.0 - min) * 60.0;
    sec = (sec * 10.0).round() / 10.0;
    if sec >= 60.0 {
        sec = 0.0;
        min += 1.0;
    }
    if min >= 60.0 {
        min = 0.0;
        deg += 1.0;
    }
    let sec_str = if sec == sec.trunc() {
        format!("{}", sec as u64)
    } else {
        format!("{sec:.1}")
    };
    format!("{}\u{b0}{}'{}''{}", deg as u64, min as u64, sec_str, hemi)
}

/// Formats a point in the degrees-minutes-seconds style used by the
/// evaluation prompts, e.g. `43°38'47''N, 79°26'11.5''W`.
pub fn format_dms(p: GeoPoint) -> String {
    format!(
        "{}, {}",
        format_dms_axis(p.lat, 'N', 'S'),
        format_dms_axis(p.lon, 'E', 'W')
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// One degree of arc on the sphere, in meters.
    const DEG_M: f64 = 111_194.92664455873;

    // --- independent oracles ------------------------------------------------

    /// Spherical law of cosines; numerically distinct route from haversine.
    fn distance_oracle(a: GeoPoint, b: GeoPoint) -> f64 {
        let phi1 = a.lat.to_radians();
        let phi2 = b.lat.to_radians();
        let dlam = (b.lon - a.lon).to_radians();
        let c = phi1.sin() * phi2.sin() + phi1.cos() * phi2.cos() * dlam.cos();
        EARTH_RADIUS_M * c.clamp(-1.0, 1.0).acos()
    }

    /// Azimuth via 3-D unit vectors: project the chord onto the local
    /// east/north frame at `a`.
    fn bearing_oracle(a: GeoPoint, b: GeoPoint) -> f64 {
        fn ecef(p: GeoPoint) -> [f64; 3] {
            let phi = p.lat.to_radians();
            let lam = p.lon.to_radians();
            [phi.cos() * lam.cos(), phi.cos() * lam.sin(), phi.sin()]
        }
        let va = ecef(a);
        let vb = ecef(b);
        let phi = a.lat.to_radians();
        let lam = a.lon.to_radians();
        let north = [
            -phi.sin() * lam.cos(),
            -phi.sin() * lam.sin(),
            phi.cos(),
        ];
        let east = [-lam.sin(), lam.cos(), 0.0];
        let dot = va[0] * vb[0] + va[1] * vb[1] + va[2] * vb[2];
        let t = [vb[0] - dot * va[0], vb[1] - dot * va[1], vb[2] - dot * va[2]];
        let e = t[0] * east[0] + t[1] * east[1] + t[2] * east[2];
        let n = t[0] * north[0] + t[1] * north[1] + t[2] * north[2];
        e.atan2(n).to_degrees().rem_euclid(360.0)
    }

    #[test]
    fn haversine_one_degree_meridian() {
        let d = haversine_distance(GeoPoint::raw(0.0, 0.0), GeoPoint::raw(0.0, 1.0));
        assert_abs_diff_eq!(d, 111_195.0, epsilon = 1.0);
        assert_abs_diff_eq!(d, DEG_M, epsilon = 1e-6);
    }

    #[test]
    fn haversine_agrees_with_law_of_cosines() {
        let pts = [
            (43.65, -79.38),
            (43.70, -79.40),
            (35.68, 139.76),
            (48.14, 11.58),
            (-33.86, 151.21),
            (0.5, 0.5),
        ];
        for &(la, lo) in &pts {
            for &(lb, lob) in &pts {
                let a = GeoPoint::raw(la, lo);
                let b = GeoPoint::raw(lb, lob);
                let d = haversine_distance(a, b);
                if d > 10.0 {
                    let rel = (d - distance_oracle(a, b)).abs() / d;
                    assert!(rel < 1e-9, "rel err {rel} at {a:?}->{b:?}");
                }
            }
        }
    }

    #[test]
    fn bearing_east_at_midlatitude() {
        let b = initial_bearing(GeoPoint::raw(43.0, -79.0), GeoPoint::raw(43.0, -78.0)).unwrap();
        assert_abs_diff_eq!(b.degrees(), 89.66, epsilon = 0.05);
        assert_abs_diff_eq!(
            b.degrees(),
            bearing_oracle(GeoPoint::raw(43.0, -79.0), GeoPoint::raw(43.0, -78.0)),
            epsilon = 1e-6
        );
    }

    #[test]
    fn bearing_matches_vector_oracle() {
        let pts = [
            (43.65, -79.38),
            (43.66, -79.40),
            (43.60, -79.30),
            (-12.0, 77.0),
            (51.5, -0.12),
        ];
        for &(la, lo) in &pts {
            for &(lb, lob) in &pts {
                let a = GeoPoint::raw(la, lo);
                let b = GeoPoint::raw(lb, lob);
                if haversine_distance(a, b) < 1.0 {
                    continue;
                }
                let got = initial_bearing(a, b).unwrap().degrees();
                let want = bearing_oracle(a, b);
                assert!(
                    circular_diff_deg(got, want) < 1e-6,
                    "bearing mismatch {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn bearing_rejects_coincident_points() {
        let p = GeoPoint::raw(10.0, 10.0);
        assert_eq!(initial_bearing(p, p), Err(GeoError::CoincidentPoints));
    }

    #[test]
    fn destination_east_one_degree() {
        let p = destination_point(GeoPoint::raw(0.0, 0.0), Bearing::new(90.0), DEG_M).unwrap();
        assert_abs_diff_eq!(p.lat, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.lon, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn destination_round_trips_with_distance_and_bearing() {
        let origin = GeoPoint::raw(43.6532, -79.3832);
        for bdeg in [0.0, 37.0, 90.0, 123.4, 180.0, 271.0, 359.0] {
            for d in [5.0, 120.0, 1_000.0, 25_000.0] {
                let q = destination_point(origin, Bearing::new(bdeg), d).unwrap();
                assert_abs_diff_eq!(haversine_distance(origin, q), d, epsilon = 1e-6 * d + 1e-6);
                let back = initial_bearing(origin, q).unwrap();
                assert!(circular_diff_deg(back.degrees(), bdeg) < 1e-6);
            }
        }
    }

    #[test]
    fn destination_rejects_negative_distance() {
        let err = destination_point(GeoPoint::raw(0.0, 0.0), Bearing::new(0.0), -1.0);
        assert_eq!(err, Err(GeoError::NegativeDistance(-1.0)));
    }

    #[test]
    fn turn_angle_right_angle_grid_corner() {
        // North leg then east leg: a right turn of +90.
        let a = GeoPoint::raw(0.0, 0.0);
        let b = GeoPoint::raw(0.001, 0.0);
        let c = GeoPoint::raw(0.001, 0.001);
        assert_abs_diff_eq!(turn_angle(a, b, c).unwrap(), 90.0, epsilon = 1e-6);
        // Mirrored: a left turn of -90.
        let c2 = GeoPoint::raw(0.001, -0.001);
        assert_abs_diff_eq!(turn_angle(a, b, c2).unwrap(), -90.0, epsilon = 1e-6);
    }

    #[test]
    fn turn_angle_straight_through_is_zero() {
        let a = GeoPoint::raw(0.0, 0.0);
        let b = GeoPoint::raw(0.0, 0.001);
        let c = GeoPoint::raw(0.0, 0.002);
        assert_abs_diff_eq!(turn_angle(a, b, c).unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn turn_angle_u_turn_is_180() {
        let a = GeoPoint::raw(0.0, 0.0);
        let b = GeoPoint::raw(0.0, 0.001);
        assert_abs_diff_eq!(turn_angle(a, b, a).unwrap(), 180.0, epsilon = 1e-9);
    }

    #[test]
    fn normalize_signed_half_open_interval() {
        assert_abs_diff_eq!(normalize_signed_deg(190.0), -170.0, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_signed_deg(-190.0), 170.0, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_signed_deg(180.0), 180.0, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_signed_deg(-180.0), 180.0, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_signed_deg(540.0), 180.0, epsilon = 1e-12);
    }

    #[test]
    fn polyline_dedups_consecutive_only() {
        let p = GeoPoint::raw(0.0, 0.0);
        let q = GeoPoint::raw(0.0, 0.001);
        let line = Polyline::new(vec![p, p, q, q, p]).unwrap();
        assert_eq!(line.points().len(), 3); // p, q, p — the loop-back survives
        assert!(Polyline::new(vec![p, p]).is_err());
    }

    #[test]
    fn polyline_reversed_preserves_length() {
        let line = Polyline::new(vec![
            GeoPoint::raw(0.0, 0.0),
            GeoPoint::raw(0.001, 0.0),
            GeoPoint::raw(0.001, 0.002),
        ])
        .unwrap();
        let rev = line.reversed();
        assert_abs_diff_eq!(line.length_m(), rev.length_m(), epsilon = 1e-9);
        assert_eq!(rev.first(), line.last());
    }

    #[test]
    fn densify_caps_gap_and_keeps_vertices() {
        let line = Polyline::new(vec![GeoPoint::raw(0.0, 0.0), GeoPoint::raw(0.0, 0.001)]).unwrap();
        let len = line.length_m(); // ~111.2 m
        let dense = line.densify(5.0);
        assert_eq!(dense[0], line.first());
        assert_eq!(*dense.last().unwrap(), line.last());
        for w in dense.windows(2) {
            assert!(haversine_distance(w[0], w[1]) <= 5.0 + 1e-6);
        }
        assert_abs_diff_eq!(path_length_m(&dense), len, epsilon = 1e-6);
    }

    #[test]
    fn resample_even_spacing() {
        let line = Polyline::new(vec![
            GeoPoint::raw(0.0, 0.0),
            GeoPoint::raw(0.0, 0.001),
            GeoPoint::raw(0.001, 0.001),
        ])
        .unwrap();
        let pts = line.resample(9);
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0], line.first());
        assert_eq!(pts[8], line.last());
        let gap = line.length_m() / 8.0;
        for w in pts.windows(2) {
            assert_abs_diff_eq!(haversine_distance(w[0], w[1]), gap, epsilon = 0.01);
        }
    }

    #[test]
    fn compass_nearest_uses_uniform_bins() {
        assert_eq!(Compass8::nearest(Bearing::new(0.0)), Compass8::N);
        assert_eq!(Compass8::nearest(Bearing::new(22.4)), Compass8::N);
        assert_eq!(Compass8::nearest(Bearing::new(22.5)), Compass8::NE);
        assert_eq!(Compass8::nearest(Bearing::new(89.0)), Compass8::E);
        assert_eq!(Compass8::nearest(Bearing::new(337.4)), Compass8::NW);
        assert_eq!(Compass8::nearest(Bearing::new(338.0)), Compass8::N);
    }

    #[test]
    fn compass_sector_narrows_cardinals() {
        // 341.57 is 18.4 degrees from north: outside the 15-degree cardinal
        // band, so the quadrant diagonal wins.
        assert_eq!(Compass8::sector(Bearing::new(341.57), 15.0), Compass8::NW);
        assert_eq!(Compass8::sector(Bearing::new(352.0), 15.0), Compass8::N);
        assert_eq!(Compass8::sector(Bearing::new(10.0), 15.0), Compass8::N);
        assert_eq!(Compass8::sector(Bearing::new(44.0), 15.0), Compass8::NE);
        assert_eq!(Compass8::sector(Bearing::new(75.0), 15.0), Compass8::E);
        assert_eq!(Compass8::sector(Bearing::new(200.0), 15.0), Compass8::SW);
        assert_eq!(Compass8::sector(Bearing::new(190.0), 15.0), Compass8::S);
    }

    #[test]
    fn compass_words_cover_8_and_16_winds() {
        assert_eq!(compass_word_to_degrees("west"), Some(270.0));
        assert_eq!(compass_word_to_degrees("North"), Some(0.0));
        assert_eq!(compass_word_to_degrees("south-southwest"), Some(202.5));
        assert_eq!(compass_word_to_degrees("south southwest"), Some(202.5));
        assert_eq!(compass_word_to_degrees("upward"), None);
    }

    #[test]
    fn dms_formatting_matches_prompt_style() {
        let p = GeoPoint::raw(43.0 + 38.0 / 60.0 + 47.0 / 3600.0, -(79.0 + 26.0 / 60.0 + 11.5 / 3600.0));
        assert_eq!(format_dms(p), "43\u{b0}38'47''N, 79\u{b0}26'11.5''W");
        let q = GeoPoint::raw(-0.5, 0.25);
        assert_eq!(format_dms(q), "0\u{b0}30'0''S, 0\u{b0}15'0''E");
    }

    #[test]
    fn dms_carries_rounding_into_minutes() {
        // 59.97'' rounds to 60.0 and must carry.
        let p = GeoPoint::raw(10.0 + (59.0 * 60.0 + 59.97) / 3600.0, 0.0);
        assert_eq!(format_dms_axis(p.lat, 'N', 'S'), "11\u{b0}0'0''N");
    }
}
