//! Timing harness: per-evaluation cost of the streaming scorer versus naive
//! re-ranking baselines as the stream grows.
//!
//! The baselines are deliberately naive reference implementations that serve
//! only as cost yardsticks — a change-point scan that re-ranks the whole
//! stream at every split, and a reference-vs-window two-sample statistic that
//! re-ranks its pooled sample from scratch. Their statistical output is
//! smoke-tested against hand counts on tiny inputs, nothing more.
//!
//! All timings use a monotonic clock, report the median over the requested
//! repeats, and discard one warm-up run when more than one repeat is asked
//! for. Measurements are single-threaded.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::score::{IndividualScorer, ScoringConvention};
use crate::{Error, Result};

/// The change-point scan is capped here; beyond it the harness reports an
/// explicit infeasibility instead of running for hours.
pub const MW_FEASIBLE_CAP: usize = 10_000;

/// Reference-sample and window sizes for the two-sample baseline.
pub const LEPAGE_SAMPLE: usize = 500;

/// One timing measurement.
#[derive(Debug, Clone)]
pub struct BenchResult {
    pub method: String,
    /// Stream length at which the statistic was evaluated.
    pub n: usize,
    /// Median seconds for one evaluation at length n; None when the method
    /// is infeasible at this length.
    pub median_secs: Option<f64>,
    pub repeats: usize,
    /// For the streaming scorer: median seconds to ingest the whole stream.
    pub cumulative_secs: Option<f64>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn random_stream(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

fn check_bench_args(n: usize, repeats: usize) -> Result<()> {
    if n < 100 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n as f64,
        });
    }
    if repeats == 0 {
        return Err(Error::InvalidParameter {
            name: "repeats",
            value: 0.0,
        });
    }
    Ok(())
}

/// Times the individual scorer: total stream ingest plus the incremental
/// cost of one more update once `n` observations are in.
pub fn bench_sns(n: usize, repeats: usize, seed: u64, window: Option<usize>) -> Result<BenchResult> {
    check_bench_args(n, repeats)?;
    // per-update samples taken after the full ingest; enough of them to
    // make the median stable against clock granularity
    let probe = 1_000.min(n / 10).max(16);
    let data = random_stream(n + probe, seed);

    let runs = if repeats > 1 { repeats + 1 } else { repeats };
    let mut totals = Vec::with_capacity(repeats);
    let mut updates = Vec::with_capacity(repeats);
    for run in 0..runs {
        let mut scorer = match window {
            Some(w) => IndividualScorer::with_window(ScoringConvention::Rankit, w)?,
            None => IndividualScorer::new(ScoringConvention::Rankit),
        };
        let t0 = Instant::now();
        let mut acc = 0.0;
        for &x in &data[..n] {
            acc += scorer.score(x)?.z.get();
        }
        let total = t0.elapsed().as_secs_f64();
        std::hint::black_box(acc);

        let mut samples = Vec::with_capacity(probe);
        for &x in &data[n..] {
            let t1 = Instant::now();
            let sv = scorer.score(x)?;
            samples.push(t1.elapsed().as_secs_f64());
            std::hint::black_box(sv.z.get());
        }
        if repeats > 1 && run == 0 {
            continue; // warm-up discarded
        }
        totals.push(total);
        updates.push(median(samples));
    }

    Ok(BenchResult {
        method: match window {
            Some(w) => format!("sns-w{w}"),
            None => "sns".to_string(),
        },
        n,
        median_secs: Some(median(updates)),
        repeats,
        cumulative_secs: Some(median(totals)),
    })
}

/// Times one evaluation of the reference-vs-window two-sample statistic
/// (rank sum plus dispersion ranks, re-ranked from scratch).
pub fn bench_baseline_lepage(n: usize, repeats: usize, seed: u64) -> Result<BenchResult> {
    check_bench_args(n, repeats)?;
    if n < 2 * LEPAGE_SAMPLE {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n as f64,
        });
    }
    let data = random_stream(n, seed);
    let reference = &data[..LEPAGE_SAMPLE];
    let window = &data[n - LEPAGE_SAMPLE..];

    let runs = if repeats > 1 { repeats + 1 } else { repeats };
    let mut times = Vec::with_capacity(repeats);
    for run in 0..runs {
        let t0 = Instant::now();
        let stat = lepage_stat(reference, window);
        let dt = t0.elapsed().as_secs_f64();
        std::hint::black_box(stat);
        if repeats > 1 && run == 0 {
            continue;
        }
        times.push(dt);
    }

    Ok(BenchResult {
        method: "lepage-ref".to_string(),
        n,
        median_secs: Some(median(times)),
        repeats,
        cumulative_secs: None,
    })
}

/// Times one full change-point scan (max standardized rank-sum statistic
/// over all split points, fully re-ranked per split). Lengths beyond
/// [`MW_FEASIBLE_CAP`] report infeasibility.
pub fn bench_baseline_mw(n: usize, repeats: usize, seed: u64) -> Result<BenchResult> {
    check_bench_args(n, repeats)?;
    if n > MW_FEASIBLE_CAP {
        return Ok(BenchResult {
            method: "mw-changepoint".to_string(),
            n,
            median_secs: None,
            repeats,
            cumulative_secs: None,
        });
    }
    let data = random_stream(n, seed);

    let runs = if repeats > 1 { repeats + 1 } else { repeats };
    let mut times = Vec::with_capacity(repeats);
    for run in 0..runs {
        let t0 = Instant::now();
        let stat = mw_changepoint_stat(&data);
        let dt = t0.elapsed().as_secs_f64();
        std::hint::black_box(stat);
        if repeats > 1 && run == 0 {
            continue;
        }
        times.push(dt);
    }

    Ok(BenchResult {
        method: "mw-changepoint".to_string(),
        n,
        median_secs: Some(median(times)),
        repeats,
        cumulative_secs: None,
    })
}

// midranks of `values` within the pooled sorted sample
fn pooled_midranks(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut pooled: Vec<(f64, usize)> = a
        .iter()
        .map(|&v| (v, 0usize))
        .chain(b.iter().map(|&v| (v, 1usize)))
        .collect();
    pooled.sort_unstable_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut ranks = vec![0.0; pooled.len()];
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i + 1;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let mid = (i + 1 + j) as f64 / 2.0;
        for r in ranks.iter_mut().take(j).skip(i) {
            *r = mid;
        }
        i = j;
    }
    let mut ra = Vec::with_capacity(a.len());
    let mut rb = Vec::with_capacity(b.len());
    for ((_, who), r) in pooled.iter().zip(&ranks) {
        if *who == 0 {
            ra.push(*r);
        } else {
            rb.push(*r);
        }
    }
    (ra, rb)
}

/// Two-sample location + dispersion statistic: the sum of the squared
/// standardized Wilcoxon rank-sum and Ansari-Bradley statistics of `window`
/// against `reference`. No tie corrections (it is a cost yardstick).
pub fn lepage_stat(reference: &[f64], window: &[f64]) -> f64 {
    let (n1, n2) = (reference.len() as f64, window.len() as f64);
    let n = n1 + n2;
    let (_, rw) = pooled_midranks(reference, window);

    let w: f64 = rw.iter().sum();
    let e_w = n2 * (n + 1.0) / 2.0;
    let var_w = n1 * n2 * (n + 1.0) / 12.0;
    let z_w = (w - e_w) / var_w.sqrt();

    // Ansari-Bradley scores: min(r, n + 1 - r)
    let ab: f64 = rw.iter().map(|&r| r.min(n + 1.0 - r)).sum();
    let (e_a, var_a) = if (reference.len() + window.len()) % 2 == 0 {
        (
            n2 * (n + 2.0) / 4.0,
            n1 * n2 * (n + 2.0) * (n - 2.0) / (48.0 * (n - 1.0)),
        )
    } else {
        (
            n2 * (n + 1.0) * (n + 1.0) / (4.0 * n),
            n1 * n2 * (n + 1.0) * (3.0 + n * n) / (48.0 * n * n),
        )
    };
    let z_a = (ab - e_a) / var_a.sqrt();

    z_w * z_w + z_a * z_a
}

/// Max over all splits of the |standardized rank-sum statistic| between the
/// prefix and suffix, re-ranking the whole sequence for every split.
pub fn mw_changepoint_stat(data: &[f64]) -> f64 {
    let n = data.len();
    let mut best = 0.0f64;
    for t in 1..n {
        let (ra, _) = pooled_midranks(&data[..t], &data[t..]);
        let r1: f64 = ra.iter().sum();
        let (n1, n2) = (t as f64, (n - t) as f64);
        let u = r1 - n1 * (n1 + 1.0) / 2.0;
        let e = n1 * n2 / 2.0;
        let sd = (n1 * n2 * (n1 + n2 + 1.0) / 12.0).sqrt();
        let z = ((u - e) / sd).abs();
        if z > best {
            best = z;
        }
    }
    best
}
