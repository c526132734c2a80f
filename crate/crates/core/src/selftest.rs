//! Runtime self-checks: independent reference implementations (oracles) of
//! the distance metrics, plus arithmetic spot-checks of the scoring and
//! consistency math, runnable from the CLI on any installation.
//!
//! These deliberately duplicate logic that also lives in unit tests: the
//! point is to re-verify the shipped binary on the machine it runs on.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::eval::{direction_confidence, normalize_robustness, pairwise_sigma};
use crate::geo::{destination_point, haversine_distance, Bearing, GeoPoint, Polyline};
use crate::graph::build_grid;
use crate::instr::{render_instructions, HeadingStyle};
use crate::metrics::{
    discrete_frechet, hausdorff, polyline_edit_distance, similarity, SimilarityWeights,
};
use crate::pathbuilder::build;

/// Outcome of one self-check suite.
#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub millis: u128,
}

/// Runs every suite and reports per-suite outcomes.
pub fn run_all() -> Vec<SuiteResult> {
    let suites: [(&'static str, fn() -> Result<String, String>); 7] = [
        ("hausdorff-oracle", suite_hausdorff_oracle),
        ("frechet-oracle", suite_frechet_oracle),
        ("edit-distance-oracle", suite_edit_oracle),
        ("geometry-round-trip", suite_round_trip),
        ("similarity-calibration", suite_calibration),
        ("consistency-arithmetic", suite_consistency),
        ("confidence-arithmetic", suite_confidence),
    ];
    suites
        .into_iter()
        .map(|(name, f)| {
            let t0 = Instant::now();
            let outcome = f();
            let millis = t0.elapsed().as_millis();
            match outcome {
                Ok(detail) => SuiteResult {
                    name,
                    passed: true,
                    detail,
                    millis,
                },
                Err(detail) => SuiteResult {
                    name,
                    passed: false,
                    detail,
                    millis,
                },
            }
        })
        .collect()
}

pub fn all_passed(results: &[SuiteResult]) -> bool {
    results.iter().all(|r| r.passed)
}

// ---------------------------------------------------------------------------
// Shared fixtures
// ---------------------------------------------------------------------------

fn center() -> GeoPoint {
    GeoPoint::new(43.6465, -79.4637).unwrap()
}

fn random_polyline(rng: &mut ChaCha12Rng, max_pts: usize) -> Polyline {
    let n = rng.random_range(2..=max_pts);
    let mut p = destination_point(
        center(),
        Bearing::new(rng.random_range(0.0..360.0)),
        rng.random_range(0.0..500.0),
    )
    .unwrap();
    let mut pts = vec![p];
    for _ in 1..n {
        p = destination_point(
            p,
            Bearing::new(rng.random_range(0.0..360.0)),
            rng.random_range(30.0..150.0),
        )
        .unwrap();
        pts.push(p);
    }
    Polyline::new(pts).unwrap()
}

// Huge step: densification keeps only the raw vertices, so oracle inputs
// stay small.
const RAW_VERTICES_STEP_M: f64 = 1e9;

// ---------------------------------------------------------------------------
// Metric oracles
// ---------------------------------------------------------------------------

fn brute_hausdorff(a: &[GeoPoint], b: &[GeoPoint]) -> f64 {
    let directed = |xs: &[GeoPoint], ys: &[GeoPoint]| {
        xs.iter()
            .map(|x| {
                ys.iter()
                    .map(|y| haversine_distance(*x, *y))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0f64, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

fn suite_hausdorff_oracle() -> Result<String, String> {
    let mut rng = ChaCha12Rng::seed_from_u64(101);
    for case in 0..60 {
        let a = random_polyline(&mut rng, 8);
        let b = random_polyline(&mut rng, 8);
        let got = hausdorff(&a, &b, RAW_VERTICES_STEP_M);
        let want = brute_hausdorff(a.points(), b.points());
        if got != want {
            return Err(format!("case {case}: got {got}, oracle {want}"));
        }
    }
    Ok("60/60 pairs exact vs brute force".into())
}

fn frechet_rec(d: &[Vec<f64>], i: usize, j: usize) -> f64 {
    let dij = d[i][j];
    if i == 0 && j == 0 {
        dij
    } else if i == 0 {
        dij.max(frechet_rec(d, 0, j - 1))
    } else if j == 0 {
        dij.max(frechet_rec(d, i - 1, 0))
    } else {
        let reach = frechet_rec(d, i - 1, j)
            .min(frechet_rec(d, i - 1, j - 1))
            .min(frechet_rec(d, i, j - 1));
        dij.max(reach)
    }
}

/// Plain exponential recursion straight off the coupling definition.
pub fn frechet_oracle(a: &[GeoPoint], b: &[GeoPoint]) -> f64 {
    let d: Vec<Vec<f64>> = a
        .iter()
        .map(|x| b.iter().map(|y| haversine_distance(*x, *y)).collect())
        .collect();
    frechet_rec(&d, a.len() - 1, b.len() - 1)
}

fn suite_frechet_oracle() -> Result<String, String> {
    let mut rng = ChaCha12Rng::seed_from_u64(102);
    for case in 0..40 {
        let a = random_polyline(&mut rng, 7);
        let b = random_polyline(&mut rng, 7);
        let got = discrete_frechet(&a, &b, RAW_VERTICES_STEP_M);
        let want = frechet_oracle(a.points(), b.points());
        if got != want {
            return Err(format!("case {case}: got {got}, oracle {want}"));
        }
    }
    // The Fréchet distance dominates the Hausdorff distance.
    for case in 0..300 {
        let a = random_polyline(&mut rng, 6);
        let b = random_polyline(&mut rng, 6);
        let fd = discrete_frechet(&a, &b, 40.0);
        let hd = hausdorff(&a, &b, 40.0);
        if fd < hd - 1e-9 {
            return Err(format!("case {case}: frechet {fd} below hausdorff {hd}"));
        }
    }
    Ok("40/40 pairs exact vs recursion; dominance held on 300 pairs".into())
}

fn edit_oracle(a: &[GeoPoint], b: &[GeoPoint], tol: f64) -> usize {
    let (n, m) = (a.len(), b.len());
    let mut dp = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in dp.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        dp[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let cost = usize::from(haversine_distance(a[i - 1], b[j - 1]) > tol);
            dp[i][j] = (dp[i - 1][j - 1] + cost)
                .min(dp[i - 1][j] + 1)
                .min(dp[i][j - 1] + 1);
        }
    }
    dp[n][m]
}

fn suite_edit_oracle() -> Result<String, String> {
    let mut rng = ChaCha12Rng::seed_from_u64(103);
    for case in 0..30 {
        let a = random_polyline(&mut rng, 8);
        let b = random_polyline(&mut rng, 8);
        let got = polyline_edit_distance(&a, &b, 40.0, 20.0);
        let da = a.densify(40.0);
        let db = b.densify(40.0);
        let want = edit_oracle(&da, &db, 20.0);
        if got != want {
            return Err(format!("case {case}: got {got}, oracle {want}"));
        }
    }
    Ok("30/30 pairs exact vs full-matrix dynamic program".into())
}

// ---------------------------------------------------------------------------
// End-to-end and arithmetic checks
// ---------------------------------------------------------------------------

fn suite_round_trip() -> Result<String, String> {
    let g = build_grid(12, 12, 100.0, 8.0, 21, center()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha12Rng::seed_from_u64(104);
    let weights = SimilarityWeights::equal();
    let mut checked = 0usize;
    let mut cleared = 0usize;
    let mut min_sim = f64::INFINITY;
    while checked < 20 {
        let a = format!(
            "n{:03}-{:03}",
            rng.random_range(0..12),
            rng.random_range(0..12)
        );
        let b = format!(
            "n{:03}-{:03}",
            rng.random_range(0..12),
            rng.random_range(0..12)
        );
        let Ok(path) = g.shortest_path(&a, &b) else {
            continue;
        };
        if path.length_m < 400.0 {
            continue;
        }
        let route = g
            .node_path_to_polyline(&path.nodes)
            .map_err(|e| e.to_string())?;
        let set = render_instructions(&route, &g, HeadingStyle::Compass8)
            .map_err(|e| e.to_string())?;
        let rebuilt = build(&set.text(), route.first(), &g).map_err(|e| e.to_string())?;
        let sim = similarity(&rebuilt.geometry, &route, &weights)
            .map_err(|e| e.to_string())?
            .value;
        checked += 1;
        min_sim = min_sim.min(sim);
        if sim >= 85.0 {
            cleared += 1;
        }
    }
    if (cleared as f64) < 0.95 * checked as f64 {
        return Err(format!(
            "only {cleared}/{checked} routes cleared 85 (min {min_sim:.2})"
        ));
    }
    Ok(format!(
        "{cleared}/{checked} routes cleared 85; minimum similarity {min_sim:.2}"
    ))
}

fn suite_calibration() -> Result<String, String> {
    let weights = SimilarityWeights::equal();
    let start = center();
    // 800 m east-west line; resample(11)[..10] below cuts exactly 10% off.
    let pts: Vec<GeoPoint> = (0..=8)
        .map(|i| destination_point(start, Bearing::new(90.0), 100.0 * i as f64).unwrap())
        .collect();
    let line = Polyline::new(pts).unwrap();

    let identical = similarity(&line, &line, &weights).map_err(|e| e.to_string())?.value;
    if (identical - 100.0).abs() > 1e-6 {
        return Err(format!("identical polylines scored {identical}"));
    }

    let shifted = Polyline::new(
        line.points()
            .iter()
            .map(|p| destination_point(*p, Bearing::new(0.0), 5_000.0).unwrap())
            .collect(),
    )
    .unwrap();
    let far = similarity(&shifted, &line, &weights).map_err(|e| e.to_string())?.value;
    if far >= 30.0 {
        return Err(format!("5 km offset scored {far}, expected < 30"));
    }

    let truncated = Polyline::new(line.resample(11)[..10].to_vec()).unwrap();
    let trunc = similarity(&truncated, &line, &weights)
        .map_err(|e| e.to_string())?
        .value;
    if trunc <= 80.0 {
        return Err(format!("10% truncation scored {trunc}, expected > 80"));
    }

    Ok(format!(
        "identical {identical:.4}, 5 km offset {far:.2}, truncation {trunc:.2}"
    ))
}

fn suite_consistency() -> Result<String, String> {
    let sym = pairwise_sigma(&[100.0, 0.0]);
    if sym != 50.0 {
        return Err(format!("sigma of {{100, 0}} = {sym}, expected 50"));
    }
    let idn = pairwise_sigma(&vec![87.5; 15]);
    if idn != 0.0 {
        return Err(format!("sigma of identical sims = {idn}, expected 0"));
    }
    if normalize_robustness(idn, 0.0, 0.0) != 100.0 {
        return Err("degenerate spread did not normalize to 100".into());
    }
    let hand = pairwise_sigma(&[90.0, 80.0, 70.0]);
    let want = (200.0f64 / 3.0).sqrt();
    if (hand - want).abs() > 1e-9 {
        return Err(format!("sigma {hand}, hand computation {want}"));
    }
    Ok("pairwise sigma matches hand computations; degenerate spread reads 100".into())
}

fn suite_confidence() -> Result<String, String> {
    let toks = |ps: &[(&str, f64)]| -> Vec<(String, f64)> {
        ps.iter().map(|(t, p)| (t.to_string(), p.ln())).collect()
    };
    let two = direction_confidence(&toks(&[
        ("Head", 0.99),
        (" north", 0.9),
        (" then", 0.4),
        (" turn", 0.9),
        (" left", 0.7),
    ]))
    .ok_or("two-token stream produced no confidence")?;
    if (two - 80.0).abs() > 1e-9 {
        return Err(format!("mean of 0.9 and 0.7 scored {two}, expected 80"));
    }
    let one = direction_confidence(&toks(&[("Head", 0.9), (" north", 0.8)]))
        .ok_or("single-token stream produced no confidence")?;
    if (one - 80.0).abs() > 1e-9 {
        return Err(format!("single 0.8 scored {one}, expected 80"));
    }
    if direction_confidence(&toks(&[("walk", 0.9), (" on", 0.9)])).is_some() {
        return Err("directionless stream produced a confidence".into());
    }
    Ok("direction-token means match hand computations; absent cases absent".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_passes() {
        let results = run_all();
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
        assert!(all_passed(&results));
        assert_eq!(results.len(), 7);
    }
}
