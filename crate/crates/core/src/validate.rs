//! Finite-sample accuracy studies for the score transformation: exact
//! moments of the score at a given stream position, bias-constant solving,
//! averaged empirical CDFs, and per-path goodness of fit.
//!
//! The n-th sequential rank of an i.i.d. stream is uniform on 1..n, so the
//! exact moments of the n-th score follow from plain enumeration over the n
//! equally likely ranks. All deterministic numbers here come from that
//! enumeration; Monte Carlo only enters the ECDF and goodness-of-fit
//! studies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::normal::{anderson_darling_n01, inv_cdf, phi_raw, AdResult};
use crate::score::{IndividualScorer, ScoringConvention};
use crate::{Error, Result};

/// Row indices of the reference accuracy table.
pub const TABLE_INDICES: [u64; 12] = [2, 3, 4, 5, 10, 20, 30, 31, 32, 100, 1000, 5000];

/// Exact standard deviation of the score at stream position `i` under bias
/// constant `b` (with a = b/2), by enumeration over the uniform rank
/// distribution. The mean is exactly zero by symmetry, so this is the RMS.
pub fn exact_score_sd(i: u64, b: f64) -> Result<f64> {
    if i < 2 {
        return Err(Error::InvalidParameter {
            name: "i",
            value: i as f64,
        });
    }
    if !b.is_finite() || b <= 0.0 {
        return Err(Error::InvalidParameter { name: "b", value: b });
    }
    let fi = i as f64;
    let denom = fi - 1.0 + b;
    let half_b = 0.5 * b;
    let mut acc = 0.0;
    for r in 1..=i {
        let z = inv_cdf((r as f64 - 1.0 + half_b) / denom);
        acc += z * z;
    }
    Ok((acc / fi).sqrt())
}

/// The bias constant b at which the score's exact standard deviation equals
/// one, found by bisection on (0.05, 2).
pub fn solve_b_for_unit_sd(i: u64) -> Result<f64> {
    let (mut lo, mut hi) = (0.05, 2.0);
    // sd decreases in b: small b stretches the extreme ranks outward
    let f_lo = exact_score_sd(i, lo)? - 1.0;
    let f_hi = exact_score_sd(i, hi)? - 1.0;
    if f_lo < 0.0 || f_hi > 0.0 {
        return Err(Error::Bracketing(format!(
            "sd - 1 has no sign change on (0.05, 2) at i = {i}"
        )));
    }
    let mut mid = 0.5 * (lo + hi);
    while hi - lo > 1e-8 {
        mid = 0.5 * (lo + hi);
        if exact_score_sd(i, mid)? > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    debug_assert!((exact_score_sd(i, mid)? - 1.0).abs() <= 1e-6);
    Ok(mid)
}

/// Closed-form approximation b(i) = 0.824 - 0.792/i to the unit-sd bias
/// constant (within 1% on the sd for i > 2).
pub fn b_approximation(i: u64) -> f64 {
    0.824 - 0.792 / i as f64
}

/// One row of the sd-versus-b reference table.
#[derive(Debug, Clone)]
pub struct ScoreSdRow {
    pub i: u64,
    /// Exact sd with b = 1.
    pub sd_b1: f64,
    /// b solving sd = 1.
    pub b_for_unit_sd: f64,
    /// The closed-form approximation.
    pub b_approx: f64,
    /// Exact sd when the approximation is used.
    pub sd_with_b_approx: f64,
}

/// Regenerates the reference table for the given stream positions.
pub fn score_sd_table(indices: &[u64]) -> Result<Vec<ScoreSdRow>> {
    indices
        .iter()
        .map(|&i| {
            let b_approx = b_approximation(i);
            Ok(ScoreSdRow {
                i,
                sd_b1: exact_score_sd(i, 1.0)?,
                b_for_unit_sd: solve_b_for_unit_sd(i)?,
                b_approx,
                sd_with_b_approx: exact_score_sd(i, b_approx)?,
            })
        })
        .collect()
}

/// Averaged empirical CDF of the first `n` scores over many simulated
/// streams.
#[derive(Debug, Clone)]
pub struct EcdfSummary {
    pub grid: Vec<f64>,
    pub mean_ecdf: Vec<f64>,
    pub n: usize,
    pub replications: usize,
    /// Largest absolute deviation from the standard normal CDF on the grid.
    pub max_abs_dev: f64,
}

/// 401 evaluation points on [-4, 4].
pub fn default_grid() -> Vec<f64> {
    (0..=400).map(|k| -4.0 + k as f64 * 0.02).collect()
}

/// Simulates i.i.d. streams, scores them individually (rankit), and averages
/// the empirical CDFs of the first `n` scores on `grid`.
///
/// Counts are accumulated as integers, so the result does not depend on the
/// degree of parallelism.
pub fn mean_ecdf_study(
    n: usize,
    replications: usize,
    grid: &[f64],
    seed: u64,
) -> Result<EcdfSummary> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: 0.0,
        });
    }
    if replications < 100 {
        return Err(Error::InvalidParameter {
            name: "replications",
            value: replications as f64,
        });
    }
    let counts: Vec<u64> = (0..replications as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep);
            let mut scorer = IndividualScorer::new(ScoringConvention::Rankit);
            let mut scores: Vec<f64> = (0..n)
                .map(|_| {
                    let x: f64 = rng.sample(StandardNormal);
                    scorer.score(x).map(|sv| sv.z.get())
                })
                .collect::<Result<_>>()?;
            scores.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            // per-grid-point count of scores <= x, two-pointer over the sorted scores
            let mut local = vec![0u64; grid.len()];
            let mut idx = 0usize;
            for (g, &x) in grid.iter().enumerate() {
                while idx < n && scores[idx] <= x {
                    idx += 1;
                }
                local[g] = idx as u64;
            }
            Ok(local)
        })
        .reduce(
            || Ok(vec![0u64; grid.len()]),
            |a, b| {
                let (mut a, b) = (a?, b?);
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
                Ok(a)
            },
        )?;

    let total = (replications * n) as f64;
    let mean_ecdf: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();
    let max_abs_dev = grid
        .iter()
        .zip(&mean_ecdf)
        .map(|(&x, &e)| (e - phi_raw(x)).abs())
        .fold(0.0f64, f64::max);

    Ok(EcdfSummary {
        grid: grid.to_vec(),
        mean_ecdf,
        n,
        replications,
        max_abs_dev,
    })
}

/// Scores one simulated path and runs the goodness-of-fit test on the scores
/// accumulated up to each checkpoint.
pub fn path_gof_study(checkpoints: &[usize], seed: u64) -> Result<Vec<AdResult>> {
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(
            "checkpoints must be strictly increasing".into(),
        ));
    }
    let n = *checkpoints.last().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scorer = IndividualScorer::new(ScoringConvention::Rankit);
    let scores: Vec<f64> = (0..n)
        .map(|_| {
            let x: f64 = rng.sample(StandardNormal);
            scorer.score(x).map(|sv| sv.z.get())
        })
        .collect::<Result<_>>()?;
    checkpoints
        .iter()
        .map(|&cp| anderson_darling_n01(&scores[..cp]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_sd_reference_points() {
        // i = 2, b = 1: the two scores are the quartiles, sd = Phi^-1(0.75)
        let sd = exact_score_sd(2, 1.0).unwrap();
        assert!((sd - 0.674_489_750_196_081_7).abs() < 1e-12);
        assert!((exact_score_sd(10, 1.0).unwrap() - 0.937_969_795).abs() < 1e-6);
        assert!((exact_score_sd(5000, 1.0).unwrap() - 0.999_868_5).abs() < 1e-6);
        assert!(exact_score_sd(1, 1.0).is_err());
        assert!(exact_score_sd(5, 0.0).is_err());
    }

    #[test]
    fn unit_sd_roots_match_enumeration_oracle() {
        // frozen from an independent high-precision enumeration + Brent solve
        for (i, expect) in [(2u64, 0.464_795), (30, 0.799_927), (5000, 0.914_814)] {
            let b = solve_b_for_unit_sd(i).unwrap();
            assert!((b - expect).abs() < 1e-4, "b({i}) = {b}");
            assert!((exact_score_sd(i, b).unwrap() - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn b_approximation_values() {
        assert!((b_approximation(4) - 0.626).abs() < 1e-12);
        assert!((b_approximation(2) - 0.428).abs() < 1e-12);
        let sd2 = exact_score_sd(2, b_approximation(2)).unwrap();
        assert!((sd2 - 1.037).abs() < 5e-4, "sd = {sd2}");
        let sd100 = exact_score_sd(100, b_approximation(100)).unwrap();
        assert!((sd100 - 1.001).abs() < 6e-4, "sd = {sd100}");
    }

    #[test]
    fn sd_under_b1_increases_toward_one() {
        let mut prev = 0.0;
        for &i in &TABLE_INDICES {
            let sd = exact_score_sd(i, 1.0).unwrap();
            assert!(sd < 1.0, "sd({i}) = {sd} not below 1");
            assert!(sd >= prev, "sd not nondecreasing at i = {i}");
            prev = sd;
        }
    }

    #[test]
    fn table_has_all_columns() {
        let rows = score_sd_table(&[2, 10]).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].b_for_unit_sd > 0.0 && rows[0].b_for_unit_sd < 1.0);
        assert!(rows[1].sd_with_b_approx > 0.9);
    }

    #[test]
    fn mean_ecdf_is_monotone_and_centered() {
        let grid = default_grid();
        let s = mean_ecdf_study(20, 200, &grid, 41).unwrap();
        assert_eq!(s.grid.len(), 401);
        for w in s.mean_ecdf.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!(s.mean_ecdf.iter().all(|&p| (0.0..=1.0).contains(&p)));
        // rank symmetry pins the median: F(0-) <= 1/2 <= F(0+)
        let below = s.mean_ecdf[199]; // x = -0.02
        let above = s.mean_ecdf[201]; // x = +0.02
        assert!(below <= 0.5 + 1e-9 && above >= 0.5 - 1e-9);
        assert!(s.max_abs_dev < 0.2);
    }

    #[test]
    fn mean_ecdf_same_result_single_threaded() {
        let grid = [-1.0, 0.0, 1.0];
        let a = mean_ecdf_study(10, 150, &grid, 4).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| mean_ecdf_study(10, 150, &grid, 4)).unwrap();
        assert_eq!(a.mean_ecdf, b.mean_ecdf);
    }

    #[test]
    fn central_jump_shrinks_with_length() {
        // the score distribution has an atom at zero that fades as the
        // stream grows
        let grid = [-1e-9, 1e-9];
        let short = mean_ecdf_study(10, 400, &grid, 43).unwrap();
        let long = mean_ecdf_study(100, 400, &grid, 43).unwrap();
        let jump_short = short.mean_ecdf[1] - short.mean_ecdf[0];
        let jump_long = long.mean_ecdf[1] - long.mean_ecdf[0];
        assert!(
            jump_long < jump_short,
            "jump at 0: n=10 gives {jump_short}, n=100 gives {jump_long}"
        );
    }

    #[test]
    fn path_gof_reports_each_checkpoint() {
        let results = path_gof_study(&[100, 300, 1000], 47).unwrap();
        assert_eq!(results.len(), 3);
        for r in &results {
            assert!(r.statistic >= 0.0);
            assert!((0.0..=1.0).contains(&r.p_value));
        }
        assert!(path_gof_study(&[100, 100], 1).is_err());
        assert!(path_gof_study(&[], 1).is_err());
    }

    #[test]
    fn gof_machinery_accepts_exact_normal_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let draws: Vec<f64> = (0..2000).map(|_| rng.sample(StandardNormal)).collect();
        let r = anderson_darling_n01(&draws).unwrap();
        assert!(r.p_value > 0.01, "p = {}", r.p_value);
    }

    #[test]
    fn gof_detects_injected_shift() {
        // diagnostic: a mid-path level shift drives the p-value down
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let mut scorer = IndividualScorer::new(ScoringConvention::Rankit);
        let n = 2000;
        let scores: Vec<f64> = (0..n)
            .map(|t| {
                let mut x: f64 = rng.sample(StandardNormal);
                if t >= n / 2 {
                    x += 3.0;
                }
                scorer.score(x).unwrap().z.get()
            })
            .collect();
        let shifted = anderson_darling_n01(&scores).unwrap();
        assert!(shifted.p_value < 0.01, "p = {}", shifted.p_value);
    }
}
