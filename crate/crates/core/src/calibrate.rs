//! Monte-Carlo average-run-length (ARL) estimation and control-limit search.
//!
//! Replications are embarrassingly parallel. Each replication draws from its
//! own counter-indexed ChaCha stream derived from the master seed, and the
//! per-replication run lengths are collected in replication order, so results
//! are bit-identical regardless of the degree of parallelism. Raw values for
//! score-transformed streams are produced by inverse-CDF sampling from common
//! uniforms, which makes rank sequences (and therefore run lengths) exactly
//! invariant across input distributions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::chart::ChartSpec;
use crate::normal::inv_cdf;
use crate::score::ScorerSpec;
use crate::{Error, Result};

/// Continuous input distributions for score-transformed streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputDistribution {
    Normal,
    Exponential,
    Uniform,
    /// Heavy-tailed stress case.
    Cauchy,
}

impl InputDistribution {
    /// Quantile (inverse CDF) of a uniform draw in (0, 1).
    pub fn quantile(self, u: f64) -> f64 {
        match self {
            InputDistribution::Normal => inv_cdf(u),
            InputDistribution::Exponential => -(1.0 - u).ln(),
            InputDistribution::Uniform => u,
            InputDistribution::Cauchy => (std::f64::consts::PI * (u - 0.5)).tan(),
        }
    }
}

impl std::str::FromStr for InputDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(InputDistribution::Normal),
            "exponential" => Ok(InputDistribution::Exponential),
            "uniform" => Ok(InputDistribution::Uniform),
            "cauchy" => Ok(InputDistribution::Cauchy),
            other => Err(Error::Config(format!("unknown distribution `{other}`"))),
        }
    }
}

/// What the chart consumes.
#[derive(Debug, Clone)]
pub enum StreamModel {
    /// Scores are exact standard-normal draws.
    ExactNormal,
    /// Raw draws from `distribution` pushed through `scorer`.
    Sns {
        distribution: InputDistribution,
        scorer: ScorerSpec,
    },
}

/// Sustained change injected into the raw stream from a known step on
/// (an out-of-control run-length study; reports, not assertions).
#[derive(Debug, Clone, Copy)]
pub struct Disturbance {
    /// First chart step at which the change applies (1-based).
    pub at_step: u64,
    pub shift: f64,
    pub scale: f64,
}

/// Monte-Carlo run-length summary.
#[derive(Debug, Clone)]
pub struct ArlEstimate {
    pub mean_rl: f64,
    pub std_error: f64,
    pub replications: usize,
    pub truncation_cap: u64,
    /// Fraction of replications that hit the cap without signaling
    /// (censored at the cap).
    pub censored_fraction: f64,
}

impl ArlEstimate {
    /// An estimate with 5% or more censored runs is not trustworthy.
    pub fn is_valid(&self) -> bool {
        self.censored_fraction < 0.05
    }
}

fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

#[inline]
fn draw_open01(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

fn run_one(
    chart: &ChartSpec,
    model: &StreamModel,
    disturbance: Option<Disturbance>,
    cap: u64,
    seed: u64,
    rep: u64,
) -> Result<(u64, bool)> {
    let mut rng = replication_rng(seed, rep);
    let mut engine = chart.build()?;
    let width = chart.step_width();

    let mut scorer = match model {
        StreamModel::ExactNormal => None,
        StreamModel::Sns { scorer, .. } => {
            if scorer.variant.step_width() != width {
                return Err(Error::Config(format!(
                    "scorer produces {} scores per step but the chart consumes {width}",
                    scorer.variant.step_width()
                )));
            }
            Some(scorer.build()?)
        }
    };

    let mut raw = vec![0.0f64; width];
    let mut scores = vec![0.0f64; width];
    for step in 1..=cap {
        match model {
            StreamModel::ExactNormal => {
                for s in scores.iter_mut() {
                    *s = rng.sample(StandardNormal);
                }
            }
            StreamModel::Sns { distribution, .. } => {
                for r in raw.iter_mut() {
                    let mut x = distribution.quantile(draw_open01(&mut rng));
                    if let Some(d) = disturbance {
                        if step >= d.at_step {
                            x = x * d.scale + d.shift;
                        }
                    }
                    *r = x;
                }
                let scored = scorer.as_mut().expect("scorer built").score_step(&raw)?;
                for (s, sv) in scores.iter_mut().zip(&scored) {
                    *s = sv.z.get();
                }
            }
        }
        if let Some(d) = disturbance {
            // Exact-normal streams take the disturbance in score space.
            if matches!(model, StreamModel::ExactNormal) && step >= d.at_step {
                for s in scores.iter_mut() {
                    *s = *s * d.scale + d.shift;
                }
            }
        }
        let pt = engine.step(&scores)?;
        if pt.signal {
            return Ok((step, false));
        }
    }
    Ok((cap, true))
}

/// Per-replication run lengths (capped runs report the cap).
pub fn run_lengths(
    chart: &ChartSpec,
    model: &StreamModel,
    replications: usize,
    cap: u64,
    seed: u64,
) -> Result<Vec<u64>> {
    run_lengths_with(chart, model, None, replications, cap, seed)
}

pub fn run_lengths_with(
    chart: &ChartSpec,
    model: &StreamModel,
    disturbance: Option<Disturbance>,
    replications: usize,
    cap: u64,
    seed: u64,
) -> Result<Vec<u64>> {
    if replications < 100 {
        return Err(Error::InvalidParameter {
            name: "replications",
            value: replications as f64,
        });
    }
    if cap == 0 {
        return Err(Error::InvalidParameter {
            name: "cap",
            value: 0.0,
        });
    }
    let outcomes: Vec<(u64, bool)> = (0..replications as u64)
        .into_par_iter()
        .map(|rep| run_one(chart, model, disturbance, cap, seed, rep))
        .collect::<Result<Vec<_>>>()?;
    Ok(outcomes.into_iter().map(|(len, _)| len).collect())
}

/// Estimates the in-control (or disturbed) ARL of a chart configuration.
pub fn estimate_arl(
    chart: &ChartSpec,
    model: &StreamModel,
    replications: usize,
    cap: u64,
    seed: u64,
) -> Result<ArlEstimate> {
    estimate_arl_with(chart, model, None, replications, cap, seed)
}

pub fn estimate_arl_with(
    chart: &ChartSpec,
    model: &StreamModel,
    disturbance: Option<Disturbance>,
    replications: usize,
    cap: u64,
    seed: u64,
) -> Result<ArlEstimate> {
    if replications < 100 {
        return Err(Error::InvalidParameter {
            name: "replications",
            value: replications as f64,
        });
    }
    if cap == 0 {
        return Err(Error::InvalidParameter {
            name: "cap",
            value: 0.0,
        });
    }
    let outcomes: Vec<(u64, bool)> = (0..replications as u64)
        .into_par_iter()
        .map(|rep| run_one(chart, model, disturbance, cap, seed, rep))
        .collect::<Result<Vec<_>>>()?;

    let n = outcomes.len() as f64;
    let mean = outcomes.iter().map(|&(l, _)| l as f64).sum::<f64>() / n;
    let var = outcomes
        .iter()
        .map(|&(l, _)| (l as f64 - mean) * (l as f64 - mean))
        .sum::<f64>()
        / (n - 1.0);
    let censored = outcomes.iter().filter(|&&(_, c)| c).count();

    Ok(ArlEstimate {
        mean_rl: mean,
        std_error: (var / n).sqrt(),
        replications,
        truncation_cap: cap,
        censored_fraction: censored as f64 / n,
    })
}

/// A chart with one free control limit, searched over its magnitude.
#[derive(Debug, Clone)]
pub enum ChartTemplate {
    /// Free limit: the decision interval h > 0.
    CusumMean { side: crate::chart::CusumSide, k: f64 },
    /// Free limit: |h|; the applied limit is -|h|.
    CusumVariance { k: f64, m: usize },
    /// Free limit: the multiplier rho.
    Ewma { lambda: f64, m: usize },
}

impl ChartTemplate {
    pub fn with_limit(&self, limit: f64) -> ChartSpec {
        match *self {
            ChartTemplate::CusumMean { side, k } => ChartSpec::CusumMean { side, k, h: limit },
            ChartTemplate::CusumVariance { k, m } => ChartSpec::CusumVariance { k, h: -limit, m },
            ChartTemplate::Ewma { lambda, m } => ChartSpec::Ewma {
                lambda,
                rho: limit,
                m,
            },
        }
    }

    /// Sign convention of the reported limit (-1 for the downward variance
    /// CUSUM, whose decision interval is negative).
    pub fn limit_sign(&self) -> f64 {
        match self {
            ChartTemplate::CusumVariance { .. } => -1.0,
            _ => 1.0,
        }
    }
}

/// Target for the control-limit search.
#[derive(Debug, Clone)]
pub struct CalibrationTarget {
    pub chart: ChartTemplate,
    pub target_arl0: f64,
    pub stream: StreamModel,
    /// Relative tolerance on the achieved ARL (default 0.02).
    pub tolerance: f64,
    pub replications: usize,
    pub cap: u64,
    /// Initial bracket for the limit magnitude.
    pub bracket: (f64, f64),
}

impl CalibrationTarget {
    pub fn new(chart: ChartTemplate, target_arl0: f64, stream: StreamModel) -> Result<Self> {
        if !(target_arl0 > 1.0) {
            return Err(Error::InvalidParameter {
                name: "target_arl0",
                value: target_arl0,
            });
        }
        Ok(CalibrationTarget {
            chart,
            target_arl0,
            stream,
            tolerance: 0.02,
            replications: 10_000,
            cap: (target_arl0 * 50.0).ceil() as u64,
            bracket: (0.5, 10.0),
        })
    }
}

/// Bisection search for the control limit achieving the target in-control
/// ARL. Every evaluation reuses the same seed (common random numbers), which
/// makes the estimated ARL monotone in the limit and the search stable.
///
/// Returns the signed limit together with its final run-length estimate.
pub fn calibrate_limit(target: &CalibrationTarget, seed: u64) -> Result<(f64, ArlEstimate)> {
    let eval = |limit: f64| -> Result<ArlEstimate> {
        estimate_arl(
            &target.chart.with_limit(limit),
            &target.stream,
            target.replications,
            target.cap,
            seed,
        )
    };

    let (mut lo, mut hi) = target.bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Bracketing(format!(
            "invalid initial bracket ({lo}, {hi})"
        )));
    }

    let mut arl_lo = eval(lo)?.mean_rl;
    let mut expansions = 0;
    while arl_lo > target.target_arl0 {
        if expansions >= 12 {
            return Err(Error::Bracketing(format!(
                "lower bracket {lo} still gives ARL {arl_lo:.1} > target {}",
                target.target_arl0
            )));
        }
        lo /= 2.0;
        arl_lo = eval(lo)?.mean_rl;
        expansions += 1;
    }
    let mut arl_hi = eval(hi)?.mean_rl;
    expansions = 0;
    while arl_hi < target.target_arl0 {
        if expansions >= 12 {
            return Err(Error::Bracketing(format!(
                "upper bracket {hi} still gives ARL {arl_hi:.1} < target {}",
                target.target_arl0
            )));
        }
        hi *= 2.0;
        arl_hi = eval(hi)?.mean_rl;
        expansions += 1;
    }

    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        let est = eval(mid)?;
        let rel = (est.mean_rl - target.target_arl0).abs() / target.target_arl0;
        if rel <= target.tolerance {
            return Ok((target.chart.limit_sign() * mid, est));
        }
        if est.mean_rl < target.target_arl0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) / hi < 1e-12 {
            break;
        }
    }
    Err(Error::Bracketing(format!(
        "no limit in ({lo}, {hi}) reaches ARL {} within {:.1}%",
        target.target_arl0,
        target.tolerance * 100.0
    )))
}

/// Paired estimates: the same chart on exact-normal scores and on
/// score-transformed draws from `distribution`.
#[derive(Debug, Clone)]
pub struct ArlComparison {
    pub exact_normal: ArlEstimate,
    pub sns: ArlEstimate,
    /// sns over exact-normal mean run length.
    pub ratio: f64,
}

pub fn compare_sns_vs_normal(
    chart: &ChartSpec,
    distribution: InputDistribution,
    scorer: &ScorerSpec,
    replications: usize,
    cap: u64,
    seed: u64,
) -> Result<ArlComparison> {
    let exact = estimate_arl(chart, &StreamModel::ExactNormal, replications, cap, seed)?;
    let sns = estimate_arl(
        chart,
        &StreamModel::Sns {
            distribution,
            scorer: scorer.clone(),
        },
        replications,
        cap,
        seed,
    )?;
    let ratio = sns.mean_rl / exact.mean_rl;
    Ok(ArlComparison {
        exact_normal: exact,
        sns,
        ratio,
    })
}
