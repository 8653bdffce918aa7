//! The four streaming scorer variants that turn raw observations into
//! sequential normal scores.
//!
//! Every variant follows the same template. A new observation x receives a
//! sequential rank R against its comparison set (past observations only,
//! never batch-mates), the rank becomes a cumulative-probability estimate
//!
//! ```text
//! P = (R - 1 + a) / (N - 1 + b),    b = 2a,
//! ```
//!
//! where N is the effective comparison count including x itself, and the
//! score is Z = Phi^-1(P). With the default rankit constants (a = 0.5,
//! b = 1) this is P = (R - 0.5) / N. Ties get the average rank
//! R = 1 + count_lt + 0.5 * count_eq.
//!
//! The conditional variants split the stream at a known quantile theta and
//! rank each side separately, splicing the side estimate through the known
//! F(theta):
//!
//! ```text
//! P = F(theta) * P_side             if x <= theta
//! P = F(theta) + (1 - F(theta)) * P_side   otherwise.
//! ```
//!
//! Earlier scores never change when new data arrive, which is what makes the
//! transformation cheap enough for long streams.

use std::str::FromStr;

use crate::normal::{phi_inverse, NormalScore, Probability};
use crate::rank_store::RankStore;
use crate::{Error, Result};

/// Bias-constant policy for the probability estimate. All presets keep
/// b = 2a, which centers the scores at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoringConvention {
    /// a = 1/2, b = 1 (the default; most accurate across sample sizes).
    Rankit,
    /// a = 1, b = 2.
    VanDerWaerden,
    /// a = 5/8, b = 5/4.
    Blom,
    /// a = 2/3, b = 4/3.
    Tukey,
    /// A caller-supplied a with b = 2a.
    Fixed { a: f64 },
    /// b(i) = 0.824 - 0.792/i for i >= 2 (unit-variance correction),
    /// falling back to rankit at i = 1.
    AdaptiveB,
}

impl ScoringConvention {
    /// Fixed convention with b = 2a.
    pub fn fixed(a: f64) -> Result<Self> {
        if !a.is_finite() || a <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "a",
                value: a,
            });
        }
        Ok(ScoringConvention::Fixed { a })
    }

    /// The (a, b) pair evaluated at effective comparison count `i`.
    pub fn params_at(self, i: u64) -> (f64, f64) {
        match self {
            ScoringConvention::Rankit => (0.5, 1.0),
            ScoringConvention::VanDerWaerden => (1.0, 2.0),
            ScoringConvention::Blom => (0.625, 1.25),
            ScoringConvention::Tukey => (2.0 / 3.0, 4.0 / 3.0),
            ScoringConvention::Fixed { a } => (a, 2.0 * a),
            ScoringConvention::AdaptiveB => {
                if i < 2 {
                    (0.5, 1.0)
                } else {
                    let b = 0.824 - 0.792 / i as f64;
                    (0.5 * b, b)
                }
            }
        }
    }
}

impl FromStr for ScoringConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rankit" => Ok(ScoringConvention::Rankit),
            "vdw" => Ok(ScoringConvention::VanDerWaerden),
            "blom" => Ok(ScoringConvention::Blom),
            "tukey" => Ok(ScoringConvention::Tukey),
            "adaptive-b" => Ok(ScoringConvention::AdaptiveB),
            other => {
                if let Some(a) = other.strip_prefix("fixed:") {
                    let a: f64 = a
                        .parse()
                        .map_err(|_| Error::UnknownConvention(other.to_string()))?;
                    ScoringConvention::fixed(a)
                } else {
                    Err(Error::UnknownConvention(other.to_string()))
                }
            }
        }
    }
}

/// A scored observation.
#[derive(Debug, Clone, Copy)]
pub struct ScoredValue {
    /// 1-based position in the stream.
    pub index: u64,
    /// (batch number, position within the batch), batched variants only.
    pub batch: Option<(u64, usize)>,
    pub raw: f64,
    /// Sequential rank; fractional when ties are averaged.
    pub rank: f64,
    pub p: Probability,
    pub z: NormalScore,
}

fn midrank(store: &RankStore, x: f64) -> Result<f64> {
    Ok(1.0 + store.count_lt(x)? as f64 + 0.5 * store.count_eq(x)? as f64)
}

fn probability_from_rank(rank: f64, eff: u64, convention: ScoringConvention) -> f64 {
    let (a, b) = convention.params_at(eff);
    (rank - 1.0 + a) / (eff as f64 - 1.0 + b)
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(x))
    }
}

fn check_batch(batch: &[f64], m: usize) -> Result<()> {
    if batch.len() != m {
        return Err(Error::BatchLength {
            expected: m,
            got: batch.len(),
        });
    }
    for &x in batch {
        check_finite(x)?;
    }
    Ok(())
}

/// Self-starting scorer for individual observations.
#[derive(Debug, Clone)]
pub struct IndividualScorer {
    store: RankStore,
    seen: u64,
    convention: ScoringConvention,
}

impl IndividualScorer {
    pub fn new(convention: ScoringConvention) -> Self {
        IndividualScorer {
            store: RankStore::new(),
            seen: 0,
            convention,
        }
    }

    /// Compares each observation only against the `window` most recent ones.
    pub fn with_window(convention: ScoringConvention, window: usize) -> Result<Self> {
        Ok(IndividualScorer {
            store: RankStore::with_window(window)?,
            seen: 0,
            convention,
        })
    }

    /// Observations scored so far.
    pub fn count(&self) -> u64 {
        self.seen
    }

    pub fn score(&mut self, x: f64) -> Result<ScoredValue> {
        check_finite(x)?;
        let rank = midrank(&self.store, x)?;
        // Effective count: the comparison set plus x itself. Without a
        // window this is exactly the stream position i.
        let eff = self.store.len() as u64 + 1;
        let p = Probability::new(probability_from_rank(rank, eff, self.convention))?;
        let z = phi_inverse(p);
        self.store.insert(x)?;
        self.seen += 1;
        Ok(ScoredValue {
            index: self.seen,
            batch: None,
            raw: x,
            rank,
            p,
            z,
        })
    }
}

/// Scorer for batched (subgroup) observations. The first batch is ranked
/// within itself; later batches are ranked against completed batches only,
/// never against batch-mates.
#[derive(Debug, Clone)]
pub struct BatchScorer {
    store: RankStore,
    batches: u64,
    seen: u64,
    m: usize,
    convention: ScoringConvention,
}

impl BatchScorer {
    pub fn new(m: usize, convention: ScoringConvention) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidParameter {
                name: "m",
                value: m as f64,
            });
        }
        Ok(BatchScorer {
            store: RankStore::new(),
            batches: 0,
            seen: 0,
            m,
            convention,
        })
    }

    pub fn with_window(m: usize, convention: ScoringConvention, window: usize) -> Result<Self> {
        let mut s = Self::new(m, convention)?;
        s.store = RankStore::with_window(window)?;
        Ok(s)
    }

    pub fn batch_size(&self) -> usize {
        self.m
    }

    /// Completed batches.
    pub fn count(&self) -> u64 {
        self.batches
    }

    pub fn score_batch(&mut self, batch: &[f64]) -> Result<Vec<ScoredValue>> {
        check_batch(batch, self.m)?;
        let i = self.batches + 1;
        let mut out = Vec::with_capacity(self.m);
        if i == 1 {
            // Within-batch midranks; effective count is the batch size.
            for (j, &x) in batch.iter().enumerate() {
                let lt = batch.iter().filter(|&&v| v < x).count();
                let eq = batch.iter().filter(|&&v| v == x).count(); // includes x
                let rank = lt as f64 + 0.5 * (eq as f64 + 1.0);
                let p =
                    Probability::new(probability_from_rank(rank, self.m as u64, self.convention))?;
                out.push(ScoredValue {
                    index: self.seen + j as u64 + 1,
                    batch: Some((i, j)),
                    raw: x,
                    rank,
                    p,
                    z: phi_inverse(p),
                });
            }
        } else {
            for (j, &x) in batch.iter().enumerate() {
                let rank = midrank(&self.store, x)?;
                let eff = self.store.len() as u64 + 1;
                let p = Probability::new(probability_from_rank(rank, eff, self.convention))?;
                out.push(ScoredValue {
                    index: self.seen + j as u64 + 1,
                    batch: Some((i, j)),
                    raw: x,
                    rank,
                    p,
                    z: phi_inverse(p),
                });
            }
        }
        // The batch joins the comparison set only after all scores are out.
        for &x in batch {
            self.store.insert(x)?;
        }
        self.batches = i;
        self.seen += self.m as u64;
        Ok(out)
    }
}

/// Scorer for individual observations with a known quantile theta and its
/// probability F(theta).
#[derive(Debug, Clone)]
pub struct ConditionalScorer {
    theta: f64,
    f_theta: f64,
    lower: RankStore,
    upper: RankStore,
    n_minus: u64,
    n_plus: u64,
    seen: u64,
    convention: ScoringConvention,
}

impl ConditionalScorer {
    pub fn new(theta: f64, f_theta: f64, convention: ScoringConvention) -> Result<Self> {
        check_finite(theta)?;
        if !(f_theta > 0.0 && f_theta < 1.0) {
            return Err(Error::ProbabilityRange(f_theta));
        }
        Ok(ConditionalScorer {
            theta,
            f_theta,
            lower: RankStore::new(),
            upper: RankStore::new(),
            n_minus: 0,
            n_plus: 0,
            seen: 0,
            convention,
        })
    }

    /// Window applies to each side's comparison store separately.
    pub fn with_window(
        theta: f64,
        f_theta: f64,
        convention: ScoringConvention,
        window: usize,
    ) -> Result<Self> {
        let mut s = Self::new(theta, f_theta, convention)?;
        s.lower = RankStore::with_window(window)?;
        s.upper = RankStore::with_window(window)?;
        Ok(s)
    }

    /// Observations at or below theta so far.
    pub fn n_minus(&self) -> u64 {
        self.n_minus
    }

    /// Observations above theta so far.
    pub fn n_plus(&self) -> u64 {
        self.n_plus
    }

    pub fn score(&mut self, x: f64) -> Result<ScoredValue> {
        check_finite(x)?;
        // x equal to theta counts as the lower side.
        let below = x <= self.theta;
        let side = if below { &self.lower } else { &self.upper };
        let rank = midrank(side, x)?;
        let eff = side.len() as u64 + 1;
        let side_p = probability_from_rank(rank, eff, self.convention);
        let p = if below {
            self.f_theta * side_p
        } else {
            self.f_theta + (1.0 - self.f_theta) * side_p
        };
        let p = Probability::new(p)?;
        let z = phi_inverse(p);
        if below {
            self.lower.insert(x)?;
            self.n_minus += 1;
        } else {
            self.upper.insert(x)?;
            self.n_plus += 1;
        }
        self.seen += 1;
        Ok(ScoredValue {
            index: self.seen,
            batch: None,
            raw: x,
            rank,
            p,
            z,
        })
    }
}

/// Scorer for batched observations with a known quantile theta.
///
/// Batch 1 ranks each side within itself (denominators are that batch's side
/// counts). Batch i >= 2 ranks against prior batches only; the denominators
/// are the prior side counts plus one, so a value on a previously empty side
/// is still well defined (its side estimate is (a) / (b), i.e. 0.5 for
/// rankit).
#[derive(Debug, Clone)]
pub struct ConditionalBatchScorer {
    theta: f64,
    f_theta: f64,
    lower: RankStore,
    upper: RankStore,
    m: usize,
    batches: u64,
    seen: u64,
    convention: ScoringConvention,
}

impl ConditionalBatchScorer {
    pub fn new(m: usize, theta: f64, f_theta: f64, convention: ScoringConvention) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidParameter {
                name: "m",
                value: m as f64,
            });
        }
        check_finite(theta)?;
        if !(f_theta > 0.0 && f_theta < 1.0) {
            return Err(Error::ProbabilityRange(f_theta));
        }
        Ok(ConditionalBatchScorer {
            theta,
            f_theta,
            lower: RankStore::new(),
            upper: RankStore::new(),
            m,
            batches: 0,
            seen: 0,
            convention,
        })
    }

    pub fn with_window(
        m: usize,
        theta: f64,
        f_theta: f64,
        convention: ScoringConvention,
        window: usize,
    ) -> Result<Self> {
        let mut s = Self::new(m, theta, f_theta, convention)?;
        s.lower = RankStore::with_window(window)?;
        s.upper = RankStore::with_window(window)?;
        Ok(s)
    }

    pub fn batch_size(&self) -> usize {
        self.m
    }

    pub fn count(&self) -> u64 {
        self.batches
    }

    pub fn score_batch(&mut self, batch: &[f64]) -> Result<Vec<ScoredValue>> {
        check_batch(batch, self.m)?;
        let i = self.batches + 1;
        let mut out = Vec::with_capacity(self.m);
        if i == 1 {
            let n_lower = batch.iter().filter(|&&v| v <= self.theta).count() as u64;
            let n_upper = self.m as u64 - n_lower;
            for (j, &x) in batch.iter().enumerate() {
                let below = x <= self.theta;
                let mates: Vec<f64> = batch
                    .iter()
                    .copied()
                    .filter(|&v| (v <= self.theta) == below)
                    .collect();
                let lt = mates.iter().filter(|&&v| v < x).count();
                let eq = mates.iter().filter(|&&v| v == x).count(); // includes x
                let rank = lt as f64 + 0.5 * (eq as f64 + 1.0);
                let eff = if below { n_lower } else { n_upper };
                let side_p = probability_from_rank(rank, eff, self.convention);
                let p = if below {
                    self.f_theta * side_p
                } else {
                    self.f_theta + (1.0 - self.f_theta) * side_p
                };
                let p = Probability::new(p)?;
                out.push(ScoredValue {
                    index: self.seen + j as u64 + 1,
                    batch: Some((i, j)),
                    raw: x,
                    rank,
                    p,
                    z: phi_inverse(p),
                });
            }
        } else {
            for (j, &x) in batch.iter().enumerate() {
                let below = x <= self.theta;
                let side = if below { &self.lower } else { &self.upper };
                let rank = midrank(side, x)?;
                let eff = side.len() as u64 + 1;
                let side_p = probability_from_rank(rank, eff, self.convention);
                let p = if below {
                    self.f_theta * side_p
                } else {
                    self.f_theta + (1.0 - self.f_theta) * side_p
                };
                let p = Probability::new(p)?;
                out.push(ScoredValue {
                    index: self.seen + j as u64 + 1,
                    batch: Some((i, j)),
                    raw: x,
                    rank,
                    p,
                    z: phi_inverse(p),
                });
            }
        }
        for &x in batch {
            if x <= self.theta {
                self.lower.insert(x)?;
            } else {
                self.upper.insert(x)?;
            }
        }
        self.batches = i;
        self.seen += self.m as u64;
        Ok(out)
    }
}

/// Exact variance of the probability estimate P_i at stream position i,
/// (i^2 - 1) / (12 (i - 1 + b)^2).
pub fn variance_of_p(i: u64, b: f64) -> Result<f64> {
    if i < 2 {
        return Err(Error::InvalidParameter {
            name: "i",
            value: i as f64,
        });
    }
    if !b.is_finite() || b <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "b",
            value: b,
        });
    }
    let i = i as f64;
    Ok((i * i - 1.0) / (12.0 * (i - 1.0 + b) * (i - 1.0 + b)))
}

/// Which of the four scorer variants to run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VariantSpec {
    Individual,
    Batched { m: usize },
    ConditionalIndividual { theta: f64, f_theta: f64 },
    ConditionalBatched { m: usize, theta: f64, f_theta: f64 },
}

impl VariantSpec {
    /// Observations consumed per scoring step (1 for individual variants).
    pub fn step_width(&self) -> usize {
        match *self {
            VariantSpec::Individual | VariantSpec::ConditionalIndividual { .. } => 1,
            VariantSpec::Batched { m } | VariantSpec::ConditionalBatched { m, .. } => m,
        }
    }
}

/// Full scorer configuration, buildable into a running scorer.
#[derive(Debug, Clone)]
pub struct ScorerSpec {
    pub variant: VariantSpec,
    pub convention: ScoringConvention,
    pub window: Option<usize>,
}

impl ScorerSpec {
    pub fn individual() -> Self {
        ScorerSpec {
            variant: VariantSpec::Individual,
            convention: ScoringConvention::Rankit,
            window: None,
        }
    }

    pub fn build(&self) -> Result<AnyScorer> {
        let c = self.convention;
        Ok(match (self.variant, self.window) {
            (VariantSpec::Individual, None) => AnyScorer::Individual(IndividualScorer::new(c)),
            (VariantSpec::Individual, Some(w)) => {
                AnyScorer::Individual(IndividualScorer::with_window(c, w)?)
            }
            (VariantSpec::Batched { m }, None) => AnyScorer::Batched(BatchScorer::new(m, c)?),
            (VariantSpec::Batched { m }, Some(w)) => {
                AnyScorer::Batched(BatchScorer::with_window(m, c, w)?)
            }
            (VariantSpec::ConditionalIndividual { theta, f_theta }, None) => {
                AnyScorer::ConditionalIndividual(ConditionalScorer::new(theta, f_theta, c)?)
            }
            (VariantSpec::ConditionalIndividual { theta, f_theta }, Some(w)) => {
                AnyScorer::ConditionalIndividual(ConditionalScorer::with_window(
                    theta, f_theta, c, w,
                )?)
            }
            (VariantSpec::ConditionalBatched { m, theta, f_theta }, None) => {
                AnyScorer::ConditionalBatched(ConditionalBatchScorer::new(m, theta, f_theta, c)?)
            }
            (VariantSpec::ConditionalBatched { m, theta, f_theta }, Some(w)) => {
                AnyScorer::ConditionalBatched(ConditionalBatchScorer::with_window(
                    m, theta, f_theta, c, w,
                )?)
            }
        })
    }
}

/// A built scorer of any variant behind one interface.
#[derive(Debug, Clone)]
pub enum AnyScorer {
    Individual(IndividualScorer),
    Batched(BatchScorer),
    ConditionalIndividual(ConditionalScorer),
    ConditionalBatched(ConditionalBatchScorer),
}

impl AnyScorer {
    /// Observations consumed per scoring step.
    pub fn step_width(&self) -> usize {
        match self {
            AnyScorer::Individual(_) | AnyScorer::ConditionalIndividual(_) => 1,
            AnyScorer::Batched(s) => s.batch_size(),
            AnyScorer::ConditionalBatched(s) => s.batch_size(),
        }
    }

    /// Scores one step's worth of observations (length must equal
    /// `step_width`).
    pub fn score_step(&mut self, values: &[f64]) -> Result<Vec<ScoredValue>> {
        match self {
            AnyScorer::Individual(s) => {
                if values.len() != 1 {
                    return Err(Error::BatchLength {
                        expected: 1,
                        got: values.len(),
                    });
                }
                Ok(vec![s.score(values[0])?])
            }
            AnyScorer::ConditionalIndividual(s) => {
                if values.len() != 1 {
                    return Err(Error::BatchLength {
                        expected: 1,
                        got: values.len(),
                    });
                }
                Ok(vec![s.score(values[0])?])
            }
            AnyScorer::Batched(s) => s.score_batch(values),
            AnyScorer::ConditionalBatched(s) => s.score_batch(values),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal::inv_cdf;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const WALKTHROUGH: [f64; 10] = [4.6, 5.1, 3.9, 4.4, 4.8, 6.6, 5.3, 8.3, 4.7, 5.0];

    fn round4(x: f64) -> f64 {
        (x * 1e4).round() / 1e4
    }

    #[test]
    fn walkthrough_ranks_p_and_z() {
        let mut s = IndividualScorer::new(ScoringConvention::Rankit);
        let expected_ranks = [1.0, 2.0, 1.0, 2.0, 4.0, 6.0, 6.0, 8.0, 4.0, 6.0];
        let expected_p = [
            0.5000, 0.7500, 0.1667, 0.3750, 0.7000, 0.9167, 0.7857, 0.9375, 0.3889, 0.5500,
        ];
        let expected_z = [
            0.0000, 0.6745, -0.9674, -0.3186, 0.5244, 1.3830, 0.7916, 1.5341, -0.2822, 0.1257,
        ];
        for (i, &x) in WALKTHROUGH.iter().enumerate() {
            let sv = s.score(x).unwrap();
            assert_eq!(sv.rank, expected_ranks[i], "rank at {}", i + 1);
            assert_eq!(round4(sv.p.get()), expected_p[i], "P at {}", i + 1);
            assert_eq!(round4(sv.z.get()), expected_z[i], "Z at {}", i + 1);
            assert_eq!(sv.index, i as u64 + 1);
        }
    }

    #[test]
    fn first_observation_scores_zero() {
        let mut s = IndividualScorer::new(ScoringConvention::Rankit);
        let sv = s.score(123.456).unwrap();
        assert_eq!(sv.p.get(), 0.5);
        assert_eq!(sv.z.get(), 0.0);
    }

    #[test]
    fn tie_gets_average_rank() {
        let mut s = IndividualScorer::new(ScoringConvention::Rankit);
        s.score(1.0).unwrap();
        let sv = s.score(1.0).unwrap();
        assert_eq!(sv.rank, 1.5);
        assert_eq!(sv.p.get(), 0.5);
        assert_eq!(sv.z.get(), 0.0);
    }

    #[test]
    fn rejects_non_finite_observation() {
        let mut s = IndividualScorer::new(ScoringConvention::Rankit);
        assert!(s.score(f64::NAN).is_err());
        assert!(s.score(f64::NEG_INFINITY).is_err());
        assert_eq!(s.count(), 0);
    }

    #[test]
    fn batch_one_uses_within_batch_ranks() {
        let mut s = BatchScorer::new(3, ScoringConvention::Rankit).unwrap();
        let out = s.score_batch(&[5.0, 3.0, 4.0]).unwrap();
        let ranks: Vec<f64> = out.iter().map(|v| v.rank).collect();
        assert_eq!(ranks, vec![3.0, 1.0, 2.0]);
        let p: Vec<f64> = out.iter().map(|v| round4(v.p.get())).collect();
        assert_eq!(p, vec![0.8333, 0.1667, 0.5000]);
    }

    #[test]
    fn later_batches_rank_against_prior_batches_only() {
        let mut s = BatchScorer::new(3, ScoringConvention::Rankit).unwrap();
        s.score_batch(&[5.0, 3.0, 4.0]).unwrap();
        let out = s.score_batch(&[4.5, 2.0, 6.0]).unwrap();
        let ranks: Vec<f64> = out.iter().map(|v| v.rank).collect();
        assert_eq!(ranks, vec![3.0, 1.0, 4.0]);
        let p: Vec<f64> = out.iter().map(|v| v.p.get()).collect();
        assert_eq!(p, vec![0.625, 0.125, 0.875]);
        assert_eq!(out[0].batch, Some((2, 0)));
        assert_eq!(out[0].index, 4);
    }

    #[test]
    fn batch_minimum_gets_first_rank() {
        let mut s = BatchScorer::new(4, ScoringConvention::Rankit).unwrap();
        s.score_batch(&[2.0, 3.0, 4.0, 5.0]).unwrap();
        let out = s.score_batch(&[1.0, 3.5, 4.5, 5.5]).unwrap();
        assert_eq!(out[0].rank, 1.0);
        assert_eq!(out[0].p.get(), 0.5 / 5.0);
    }

    #[test]
    fn batch_rejects_wrong_length_and_small_m() {
        let mut s = BatchScorer::new(3, ScoringConvention::Rankit).unwrap();
        assert!(matches!(
            s.score_batch(&[1.0, 2.0]),
            Err(Error::BatchLength {
                expected: 3,
                got: 2
            })
        ));
        assert!(BatchScorer::new(1, ScoringConvention::Rankit).is_err());
    }

    #[test]
    fn conditional_first_observations() {
        let mut s = ConditionalScorer::new(1.0, 0.5, ScoringConvention::Rankit).unwrap();
        let sv = s.score(2.0).unwrap();
        assert_eq!(s.n_plus(), 1);
        assert_eq!(sv.rank, 1.0);
        assert_eq!(sv.p.get(), 0.75);
        assert_eq!(round4(sv.z.get()), 0.6745);

        let mut s = ConditionalScorer::new(1.0, 0.5, ScoringConvention::Rankit).unwrap();
        let sv = s.score(0.3).unwrap();
        assert_eq!(sv.p.get(), 0.25);
        assert_eq!(round4(sv.z.get()), -0.6745);
    }

    #[test]
    fn conditional_sign_forcing() {
        // theta = 0, F(theta) = 0.5, all values above: every score positive
        let mut s = ConditionalScorer::new(0.0, 0.5, ScoringConvention::Rankit).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let sv = s.score(rng.gen::<f64>() + 0.001).unwrap();
            assert!(sv.p.get() > 0.5 && sv.p.get() < 1.0);
            assert!(sv.z.get() > 0.0);
        }
        assert_eq!(s.n_minus(), 0);
    }

    #[test]
    fn conditional_value_at_theta_goes_lower() {
        let mut s = ConditionalScorer::new(1.0, 0.5, ScoringConvention::Rankit).unwrap();
        s.score(1.0).unwrap();
        assert_eq!(s.n_minus(), 1);
        assert_eq!(s.n_plus(), 0);
    }

    #[test]
    fn conditional_rejects_bad_f_theta() {
        assert!(ConditionalScorer::new(0.0, 0.0, ScoringConvention::Rankit).is_err());
        assert!(ConditionalScorer::new(0.0, 1.0, ScoringConvention::Rankit).is_err());
        assert!(ConditionalScorer::new(f64::NAN, 0.5, ScoringConvention::Rankit).is_err());
    }

    #[test]
    fn conditional_batch_one() {
        let mut s =
            ConditionalBatchScorer::new(4, 0.0, 0.5, ScoringConvention::Rankit).unwrap();
        let out = s.score_batch(&[-1.0, -2.0, 3.0, 4.0]).unwrap();
        let p: Vec<f64> = out.iter().map(|v| v.p.get()).collect();
        assert_eq!(p, vec![0.375, 0.125, 0.625, 0.875]);
    }

    #[test]
    fn conditional_batch_two_denominators() {
        let mut s =
            ConditionalBatchScorer::new(4, 0.0, 0.5, ScoringConvention::Rankit).unwrap();
        s.score_batch(&[-1.0, -2.0, 3.0, 4.0]).unwrap();
        let out = s.score_batch(&[-3.0, -0.5, 5.0, 3.5]).unwrap();
        // x = -3 ranks first among prior lower values; denominator N2- + 1 = 3
        assert_eq!(out[0].rank, 1.0);
        let expect = 0.5 * (0.5 / 3.0);
        assert!((out[0].p.get() - expect).abs() < 1e-15);
        // largest upper value so far: rank K + 1 with K = 2 prior upper values
        assert_eq!(out[2].rank, 3.0);
        assert!((out[2].p.get() - (0.5 + 0.5 * 2.5 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn conditional_batch_empty_side_still_defined() {
        // batch 1 entirely above theta: the lower-side formula is never
        // evaluated, and a later first lower value gets side estimate 0.5
        let mut s =
            ConditionalBatchScorer::new(2, 0.0, 0.5, ScoringConvention::Rankit).unwrap();
        let out = s.score_batch(&[1.0, 2.0]).unwrap();
        assert!(out.iter().all(|v| v.z.get() > 0.0));
        let out = s.score_batch(&[-1.0, 3.0]).unwrap();
        // first-ever lower value: P = F(theta) * 0.5
        assert!((out[0].p.get() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn variance_of_p_values() {
        assert!((variance_of_p(2, 1.0).unwrap() - 0.0625).abs() < 1e-15);
        // limit 1/12 as i grows with b = 1
        assert!((variance_of_p(10_000_000, 1.0).unwrap() - 1.0 / 12.0).abs() < 1e-7);
        // b = 1 - i + sqrt(i^2 - 1) gives exactly 1/12
        for i in [2u64, 5, 17, 100] {
            let fi = i as f64;
            let b = 1.0 - fi + (fi * fi - 1.0).sqrt();
            assert!((variance_of_p(i, b).unwrap() - 1.0 / 12.0).abs() < 1e-14);
        }
        assert!(variance_of_p(1, 1.0).is_err());
    }

    #[test]
    fn variance_of_p_matches_enumeration() {
        // brute-force variance of P over uniform ranks
        for &(i, b) in &[(2u64, 1.0), (5, 1.0), (7, 0.7), (30, 1.25), (100, 2.0)] {
            let a = b / 2.0;
            let fi = i as f64;
            let ps: Vec<f64> = (1..=i)
                .map(|r| (r as f64 - 1.0 + a) / (fi - 1.0 + b))
                .collect();
            let mean = ps.iter().sum::<f64>() / fi;
            let var = ps.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / fi;
            assert!(
                (variance_of_p(i, b).unwrap() - var).abs() <= 1e-12,
                "i={i} b={b}"
            );
        }
    }

    #[test]
    fn mean_zero_over_uniform_ranks() {
        let conventions = [
            ScoringConvention::Rankit,
            ScoringConvention::VanDerWaerden,
            ScoringConvention::Blom,
            ScoringConvention::Tukey,
            ScoringConvention::AdaptiveB,
            ScoringConvention::fixed(0.37).unwrap(),
        ];
        for conv in conventions {
            for i in (1u64..=50).chain([200, 1000]) {
                let (a, b) = conv.params_at(i);
                let sum: f64 = (1..=i)
                    .map(|r| inv_cdf((r as f64 - 1.0 + a) / (i as f64 - 1.0 + b)))
                    .sum();
                assert!(
                    (sum / i as f64).abs() <= 1e-10,
                    "nonzero mean {sum:e} at i={i}, {conv:?}"
                );
            }
        }
    }

    #[test]
    fn windowed_scorer_uses_effective_count() {
        let mut s = IndividualScorer::with_window(ScoringConvention::Rankit, 3).unwrap();
        for x in [1.0, 2.0, 3.0, 4.0] {
            s.score(x).unwrap();
        }
        // window now {2, 3, 4}; a new maximum ranks 4 of effective 4
        let sv = s.score(5.0).unwrap();
        assert_eq!(sv.rank, 4.0);
        assert_eq!(sv.p.get(), 3.5 / 4.0);
        assert_eq!(sv.index, 5);
    }

    #[test]
    fn adaptive_b_matches_formula() {
        let (a, b) = ScoringConvention::AdaptiveB.params_at(4);
        assert!((b - (0.824 - 0.792 / 4.0)).abs() < 1e-15);
        assert_eq!(a, b / 2.0);
        assert_eq!(ScoringConvention::AdaptiveB.params_at(1), (0.5, 1.0));
    }

    #[test]
    fn convention_names_parse() {
        assert_eq!(
            "rankit".parse::<ScoringConvention>().unwrap(),
            ScoringConvention::Rankit
        );
        assert_eq!(
            "vdw".parse::<ScoringConvention>().unwrap(),
            ScoringConvention::VanDerWaerden
        );
        assert!(matches!(
            "fixed:0.5".parse::<ScoringConvention>().unwrap(),
            ScoringConvention::Fixed { .. }
        ));
        assert!("bogus".parse::<ScoringConvention>().is_err());
        assert!("fixed:-1".parse::<ScoringConvention>().is_err());
    }

    #[test]
    fn spec_builds_all_variants() {
        let specs = [
            VariantSpec::Individual,
            VariantSpec::Batched { m: 5 },
            VariantSpec::ConditionalIndividual {
                theta: 0.0,
                f_theta: 0.4,
            },
            VariantSpec::ConditionalBatched {
                m: 3,
                theta: 0.0,
                f_theta: 0.4,
            },
        ];
        for variant in specs {
            let spec = ScorerSpec {
                variant,
                convention: ScoringConvention::Rankit,
                window: Some(100),
            };
            let mut scorer = spec.build().unwrap();
            let w = scorer.step_width();
            assert_eq!(w, variant.step_width());
            let vals = vec![0.5; w];
            let out = scorer.score_step(&vals).unwrap();
            assert_eq!(out.len(), w);
        }
    }

    proptest! {
        // Ranks depend only on order, so any strictly increasing transform
        // of the stream leaves rank, P, and Z untouched.
        #[test]
        fn scores_invariant_under_monotone_transform(
            raw in proptest::collection::vec(-50.0f64..50.0, 2..60)
        ) {
            let mut a = IndividualScorer::new(ScoringConvention::Rankit);
            let mut b = IndividualScorer::new(ScoringConvention::Rankit);
            for &x in &raw {
                let sa = a.score(x).unwrap();
                let sb = b.score((x * 0.1).exp()).unwrap();
                prop_assert_eq!(sa.rank, sb.rank);
                prop_assert_eq!(sa.p.get(), sb.p.get());
                prop_assert_eq!(sa.z.get(), sb.z.get());
            }
        }

        // Within a fixed state, a larger raw value never gets a smaller P.
        #[test]
        fn larger_value_never_scores_lower(
            history in proptest::collection::vec(-10.0f64..10.0, 0..40),
            x in -12.0f64..12.0,
            bump in 0.0f64..5.0,
        ) {
            let mut base = IndividualScorer::new(ScoringConvention::Rankit);
            for &v in &history {
                base.score(v).unwrap();
            }
            let p_low = base.clone().score(x).unwrap().p.get();
            let p_high = base.clone().score(x + bump).unwrap().p.get();
            prop_assert!(p_high >= p_low);
        }
    }
}
