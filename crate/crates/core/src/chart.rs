//! Control-chart engines consuming normal scores: tabular CUSUM for the
//! mean, a one-sided CUSUM for subgroup variance, and EWMA for subgroup
//! means with time-varying limits.
//!
//! Engines are pure step functions: replaying a recorded stream reproduces
//! the identical statistic path. They report the first limit crossing but
//! keep accumulating if fed more data (no automatic reset), so a full
//! trajectory past the signal can be plotted.

use crate::{Error, Result};

/// One step of a chart trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPoint {
    /// 1-based step (observation or batch number).
    pub step: u64,
    /// The plotted statistic after this step.
    pub value: f64,
    /// The control limit the statistic is compared against (signed).
    pub limit: f64,
    /// Whether the limit is breached at this step.
    pub signal: bool,
}

/// Accumulated outcome of running a chart over a stream.
#[derive(Debug, Clone)]
pub struct ChartVerdict {
    pub signaled: bool,
    /// First step at which a limit was breached.
    pub signal_step: Option<u64>,
    pub statistic_path: Vec<ChartPoint>,
}

impl ChartVerdict {
    pub fn from_path(path: Vec<ChartPoint>) -> Self {
        let signal_step = path.iter().find(|p| p.signal).map(|p| p.step);
        ChartVerdict {
            signaled: signal_step.is_some(),
            signal_step,
            statistic_path: path,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CusumSide {
    Upper,
    Lower,
    TwoSided,
}

/// Tabular CUSUM for the mean of standardized scores.
///
/// Upper recursion: C+ <- max(0, C+ + z - k), signal when C+ > h.
/// Lower recursion: C- <- min(0, C- + z + k), signal when C- < -h.
#[derive(Debug, Clone)]
pub struct CusumMean {
    side: CusumSide,
    k: f64,
    h: f64,
    c_plus: f64,
    c_minus: f64,
    t: u64,
    last_zero_plus: u64,
    last_zero_minus: u64,
    first_signal: Option<u64>,
}

impl CusumMean {
    pub fn new(side: CusumSide, k: f64, h: f64) -> Result<Self> {
        if !k.is_finite() || k < 0.0 {
            return Err(Error::InvalidParameter { name: "k", value: k });
        }
        if !h.is_finite() || h <= 0.0 {
            return Err(Error::InvalidParameter { name: "h", value: h });
        }
        Ok(CusumMean {
            side,
            k,
            h,
            c_plus: 0.0,
            c_minus: 0.0,
            t: 0,
            last_zero_plus: 0,
            last_zero_minus: 0,
            first_signal: None,
        })
    }

    pub fn step(&mut self, z: f64) -> ChartPoint {
        self.t += 1;
        let mut signal = false;
        if self.side != CusumSide::Lower {
            self.c_plus = (self.c_plus + z - self.k).max(0.0);
            if self.c_plus == 0.0 {
                self.last_zero_plus = self.t;
            }
            signal |= self.c_plus > self.h;
        }
        if self.side != CusumSide::Upper {
            self.c_minus = (self.c_minus + z + self.k).min(0.0);
            if self.c_minus == 0.0 {
                self.last_zero_minus = self.t;
            }
            signal |= self.c_minus < -self.h;
        }
        if signal && self.first_signal.is_none() {
            self.first_signal = Some(self.t);
        }
        // Two-sided charts report whichever side is currently more extreme.
        let (value, limit) = match self.side {
            CusumSide::Upper => (self.c_plus, self.h),
            CusumSide::Lower => (self.c_minus, -self.h),
            CusumSide::TwoSided => {
                if self.c_plus >= -self.c_minus {
                    (self.c_plus, self.h)
                } else {
                    (self.c_minus, -self.h)
                }
            }
        };
        ChartPoint {
            step: self.t,
            value,
            limit,
            signal,
        }
    }

    pub fn c_plus(&self) -> f64 {
        self.c_plus
    }

    pub fn c_minus(&self) -> f64 {
        self.c_minus
    }

    /// Most recent step at which the upper sum sat at zero (change-point
    /// estimate for an upward shift).
    pub fn last_zero_plus(&self) -> u64 {
        self.last_zero_plus
    }

    pub fn last_zero_minus(&self) -> u64 {
        self.last_zero_minus
    }

    pub fn first_signal_step(&self) -> Option<u64> {
        self.first_signal
    }
}

/// One-sided CUSUM for a downward change in subgroup variance:
/// C- <- min(0, C- + s^2 - k), signal when C- < h (h negative). The sample
/// variance uses divisor m - 1.
#[derive(Debug, Clone)]
pub struct CusumVariance {
    k: f64,
    h: f64,
    m: usize,
    c: f64,
    i: u64,
    last_zero: u64,
    first_signal: Option<u64>,
}

impl CusumVariance {
    pub fn new(k: f64, h: f64, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidParameter {
                name: "m",
                value: m as f64,
            });
        }
        if !k.is_finite() || k <= 0.0 {
            return Err(Error::InvalidParameter { name: "k", value: k });
        }
        if !h.is_finite() || h >= 0.0 {
            return Err(Error::InvalidParameter { name: "h", value: h });
        }
        Ok(CusumVariance {
            k,
            h,
            m,
            c: 0.0,
            i: 0,
            last_zero: 0,
            first_signal: None,
        })
    }

    pub fn step(&mut self, scores: &[f64]) -> Result<ChartPoint> {
        if scores.len() != self.m {
            return Err(Error::BatchLength {
                expected: self.m,
                got: scores.len(),
            });
        }
        let s2 = sample_variance(scores);
        self.i += 1;
        self.c = (self.c + s2 - self.k).min(0.0);
        if self.c == 0.0 {
            self.last_zero = self.i;
        }
        let signal = self.c < self.h;
        if signal && self.first_signal.is_none() {
            self.first_signal = Some(self.i);
        }
        Ok(ChartPoint {
            step: self.i,
            value: self.c,
            limit: self.h,
            signal,
        })
    }

    pub fn c_minus(&self) -> f64 {
        self.c
    }

    /// Greatest step with the cumulative sum at zero: the natural
    /// change-point estimate once the chart signals.
    pub fn change_point(&self) -> u64 {
        self.last_zero
    }

    pub fn first_signal_step(&self) -> Option<u64> {
        self.first_signal
    }
}

fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

/// Reference value for the downward variance CUSUM, optimal for detecting a
/// standard-deviation change from sigma0 to sigma1:
///
/// ```text
/// k = | 2 ln(sigma0/sigma1) sigma0^2 sigma1^2 / (sigma1^2 - sigma0^2) |
/// ```
///
/// The magnitude is returned; the recursion subtracts it.
pub fn cusum_variance_k(sigma0: f64, sigma1: f64) -> Result<f64> {
    for (name, v) in [("sigma0", sigma0), ("sigma1", sigma1)] {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::InvalidParameter { name, value: v });
        }
    }
    if sigma0 == sigma1 {
        return Err(Error::InvalidParameter {
            name: "sigma1",
            value: sigma1,
        });
    }
    let (v0, v1) = (sigma0 * sigma0, sigma1 * sigma1);
    Ok((2.0 * (sigma0 / sigma1).ln() * v0 * v1 / (v1 - v0)).abs())
}

/// Two-sided EWMA of subgroup means with time-varying limits.
///
/// U <- lambda * mean(batch) + (1 - lambda) * U, starting from 0; the limit
/// at batch i is rho * sqrt(lambda/(2 - lambda) * (1 - (1 - lambda)^(2i)))
/// * sigma / sqrt(m) with sigma = 1 for normal scores.
#[derive(Debug, Clone)]
pub struct Ewma {
    lambda: f64,
    rho: f64,
    m: usize,
    u: f64,
    i: u64,
    first_signal: Option<u64>,
}

impl Ewma {
    pub fn new(lambda: f64, rho: f64, m: usize) -> Result<Self> {
        if !lambda.is_finite() || lambda <= 0.0 || lambda > 1.0 {
            return Err(Error::InvalidParameter {
                name: "lambda",
                value: lambda,
            });
        }
        if !rho.is_finite() || rho < 0.0 {
            return Err(Error::InvalidParameter {
                name: "rho",
                value: rho,
            });
        }
        if m < 1 {
            return Err(Error::InvalidParameter {
                name: "m",
                value: m as f64,
            });
        }
        Ok(Ewma {
            lambda,
            rho,
            m,
            u: 0.0,
            i: 0,
            first_signal: None,
        })
    }

    /// Control limit at batch `i` (1-based).
    pub fn limit(&self, i: u64) -> f64 {
        let one_minus = 1.0 - self.lambda;
        let factor = self.lambda / (2.0 - self.lambda) * (1.0 - one_minus.powf(2.0 * i as f64));
        self.rho * factor.sqrt() / (self.m as f64).sqrt()
    }

    pub fn step(&mut self, scores: &[f64]) -> Result<ChartPoint> {
        if scores.len() != self.m {
            return Err(Error::BatchLength {
                expected: self.m,
                got: scores.len(),
            });
        }
        let mean = scores.iter().sum::<f64>() / self.m as f64;
        self.u = self.lambda * mean + (1.0 - self.lambda) * self.u;
        self.i += 1;
        let limit = self.limit(self.i);
        let signal = self.u.abs() > limit;
        if signal && self.first_signal.is_none() {
            self.first_signal = Some(self.i);
        }
        Ok(ChartPoint {
            step: self.i,
            value: self.u,
            limit,
            signal,
        })
    }

    pub fn statistic(&self) -> f64 {
        self.u
    }

    pub fn first_signal_step(&self) -> Option<u64> {
        self.first_signal
    }
}

/// Chart parameterization, buildable into a running engine.
#[derive(Debug, Clone, PartialEq)]
pub enum ChartSpec {
    CusumMean { side: CusumSide, k: f64, h: f64 },
    CusumVariance { k: f64, h: f64, m: usize },
    Ewma { lambda: f64, rho: f64, m: usize },
}

impl ChartSpec {
    /// Scores consumed per chart step.
    pub fn step_width(&self) -> usize {
        match *self {
            ChartSpec::CusumMean { .. } => 1,
            ChartSpec::CusumVariance { m, .. } | ChartSpec::Ewma { m, .. } => m,
        }
    }

    pub fn build(&self) -> Result<ChartEngine> {
        Ok(match *self {
            ChartSpec::CusumMean { side, k, h } => ChartEngine::Mean(CusumMean::new(side, k, h)?),
            ChartSpec::CusumVariance { k, h, m } => {
                ChartEngine::Variance(CusumVariance::new(k, h, m)?)
            }
            ChartSpec::Ewma { lambda, rho, m } => ChartEngine::Ewma(Ewma::new(lambda, rho, m)?),
        })
    }
}

/// A built chart engine of any kind behind one stepping interface.
#[derive(Debug, Clone)]
pub enum ChartEngine {
    Mean(CusumMean),
    Variance(CusumVariance),
    Ewma(Ewma),
}

impl ChartEngine {
    /// Consumes the scores for one step: length 1 for the mean CUSUM, the
    /// subgroup size otherwise.
    pub fn step(&mut self, scores: &[f64]) -> Result<ChartPoint> {
        match self {
            ChartEngine::Mean(c) => {
                if scores.len() != 1 {
                    return Err(Error::BatchLength {
                        expected: 1,
                        got: scores.len(),
                    });
                }
                Ok(c.step(scores[0]))
            }
            ChartEngine::Variance(c) => c.step(scores),
            ChartEngine::Ewma(c) => c.step(scores),
        }
    }

    pub fn first_signal_step(&self) -> Option<u64> {
        match self {
            ChartEngine::Mean(c) => c.first_signal_step(),
            ChartEngine::Variance(c) => c.first_signal_step(),
            ChartEngine::Ewma(c) => c.first_signal_step(),
        }
    }

    /// Change-point estimate (last zero of the active sum), when the engine
    /// tracks one.
    pub fn change_point(&self) -> Option<u64> {
        match self {
            ChartEngine::Mean(c) => Some(match c.side {
                CusumSide::Upper => c.last_zero_plus(),
                CusumSide::Lower => c.last_zero_minus(),
                CusumSide::TwoSided => c.last_zero_plus().max(c.last_zero_minus()),
            }),
            ChartEngine::Variance(c) => Some(c.change_point()),
            ChartEngine::Ewma(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WALKTHROUGH_Z: [f64; 10] = [
        0.0000, 0.6745, -0.9674, -0.3186, 0.5244, 1.3830, 0.7916, 1.5341, -0.2822, 0.1257,
    ];

    #[test]
    fn cusum_mean_walkthrough_path() {
        let mut c = CusumMean::new(CusumSide::Upper, 0.25, 7.267).unwrap();
        let expected = [
            0.0, 0.4245, 0.0, 0.0, 0.2744, 1.4074, 1.9490, 3.2331, 2.7009, 2.5766,
        ];
        for (i, &z) in WALKTHROUGH_Z.iter().enumerate() {
            let pt = c.step(z);
            assert!(
                (pt.value - expected[i]).abs() < 1e-9,
                "step {}: {} vs {}",
                i + 1,
                pt.value,
                expected[i]
            );
            assert!(!pt.signal);
        }
        assert_eq!(c.first_signal_step(), None);
    }

    #[test]
    fn cusum_mean_stays_at_zero_on_zero_stream() {
        let mut c = CusumMean::new(CusumSide::TwoSided, 0.5, 4.0).unwrap();
        for _ in 0..100 {
            let pt = c.step(0.0);
            assert_eq!(pt.value, 0.0);
            assert!(!pt.signal);
        }
        assert_eq!(c.last_zero_plus(), 100);
    }

    #[test]
    fn cusum_mean_single_step_exceedance() {
        let mut c = CusumMean::new(CusumSide::Upper, 0.25, 5.0).unwrap();
        let pt = c.step(5.0 + 0.25 + 1.0);
        assert!(pt.signal);
        assert_eq!(c.first_signal_step(), Some(1));
    }

    #[test]
    fn cusum_mean_lower_side_mirrors_upper() {
        let mut up = CusumMean::new(CusumSide::Upper, 0.3, 4.0).unwrap();
        let mut lo = CusumMean::new(CusumSide::Lower, 0.3, 4.0).unwrap();
        let stream = [0.4, -1.2, 2.0, 0.3, -0.6, 1.9, 2.2, 0.1];
        for &z in &stream {
            let a = up.step(z);
            let b = lo.step(-z);
            assert!((a.value + b.value).abs() < 1e-12);
            assert_eq!(a.signal, b.signal);
        }
    }

    #[test]
    fn cusum_mean_two_sided_mirror_paths() {
        // with k = 0 the two-sided sums on a stream and its negation swap
        let stream = [0.7, -0.2, 1.4, -2.0, 0.9, 0.4, -1.1];
        let mut a = CusumMean::new(CusumSide::TwoSided, 0.0, 10.0).unwrap();
        let mut b = CusumMean::new(CusumSide::TwoSided, 0.0, 10.0).unwrap();
        for &z in &stream {
            a.step(z);
            b.step(-z);
            let da = a.c_plus() + a.c_minus();
            let db = b.c_plus() + b.c_minus();
            assert!((da + db).abs() < 1e-12);
        }
    }

    #[test]
    fn cusum_mean_rejects_bad_parameters() {
        assert!(CusumMean::new(CusumSide::Upper, -0.1, 1.0).is_err());
        assert!(CusumMean::new(CusumSide::Upper, 0.5, 0.0).is_err());
        assert!(CusumMean::new(CusumSide::Upper, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn variance_cusum_identical_scores_drop_by_k() {
        let mut c = CusumVariance::new(0.5, -3.0, 4).unwrap();
        let pt = c.step(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!((pt.value - (-0.5)).abs() < 1e-15);
    }

    #[test]
    fn variance_cusum_signals_after_three_flat_batches() {
        let mut c = CusumVariance::new(0.793, -1.645, 3).unwrap();
        let flat = [2.0, 2.0, 2.0];
        let p1 = c.step(&flat).unwrap();
        assert!(!p1.signal);
        let p2 = c.step(&flat).unwrap();
        assert!(!p2.signal, "c = {} at batch 2", p2.value);
        let p3 = c.step(&flat).unwrap();
        assert!((p3.value - (-2.379)).abs() < 1e-12);
        assert!(p3.signal);
        assert_eq!(c.first_signal_step(), Some(3));
    }

    #[test]
    fn variance_cusum_zero_increment_holds_value() {
        let k = 0.6;
        let mut c = CusumVariance::new(k, -2.0, 2).unwrap();
        // s^2 of (a, -a) with m = 2 is 2 a^2; choose a so s^2 = k
        let a = (k / 2.0).sqrt();
        c.step(&[3.0, 3.0]).unwrap(); // drop to -k
        let before = c.c_minus();
        for _ in 0..5 {
            c.step(&[a, -a]).unwrap();
            assert!((c.c_minus() - before).abs() < 1e-12);
        }
    }

    #[test]
    fn variance_cusum_change_point_tracks_last_zero() {
        let k = 0.4;
        let a = (k / 2.0).sqrt();
        let hold = [a, -a]; // s^2 = k exactly, so the sum stays put at 0
        let mut c = CusumVariance::new(k, -1.0, 2).unwrap();
        for _ in 0..16 {
            c.step(&hold).unwrap();
        }
        for _ in 0..3 {
            c.step(&[0.0, 0.0]).unwrap();
        }
        assert_eq!(c.change_point(), 16);
        assert_eq!(c.first_signal_step(), Some(19));
    }

    #[test]
    fn variance_cusum_rejects_bad_input() {
        assert!(CusumVariance::new(0.5, -1.0, 1).is_err());
        assert!(CusumVariance::new(0.5, 1.0, 4).is_err());
        let mut c = CusumVariance::new(0.5, -1.0, 3).unwrap();
        assert!(c.step(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn variance_k_reproduces_published_allowance() {
        let k = cusum_variance_k(1.0, 0.8).unwrap();
        assert!((k - 0.793).abs() < 5e-4, "k = {k}");
        // swapping the sigmas leaves the magnitude unchanged
        assert!((cusum_variance_k(0.8, 1.0).unwrap() - k).abs() < 1e-15);
        // limiting value as the change vanishes is sigma^2
        let eps = 1e-6;
        let sigma: f64 = 1.3;
        let lim = cusum_variance_k(sigma * (1.0 + eps), sigma).unwrap();
        assert!((lim - sigma * sigma).abs() < 1e-4, "limit {lim}");
        assert!(cusum_variance_k(1.0, 1.0).is_err());
        assert!(cusum_variance_k(0.0, 1.0).is_err());
    }

    #[test]
    fn ewma_limit_asymptote() {
        let e = Ewma::new(0.1, 2.714, 10).unwrap();
        let asymptote = 2.714 * (0.1f64 / 1.9).sqrt() / 10f64.sqrt();
        assert!((asymptote - 0.19689).abs() < 5e-5);
        assert!((e.limit(100_000) - asymptote).abs() < 1e-12);
        // limits widen monotonically and converge by i = 500
        let mut prev = 0.0;
        for i in 1..=500 {
            let l = e.limit(i);
            assert!(l > prev);
            prev = l;
        }
        assert!((e.limit(500) - asymptote).abs() < 1e-12);
    }

    #[test]
    fn ewma_lambda_one_is_batch_mean() {
        let mut e = Ewma::new(1.0, 3.0, 4).unwrap();
        let batch = [0.5, 1.5, -0.5, 0.5];
        let pt = e.step(&batch).unwrap();
        assert!((pt.value - 0.5).abs() < 1e-15);
        assert!((pt.limit - 3.0 / 2.0).abs() < 1e-15);
        let pt = e.step(&[0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(pt.value, 0.0);
    }

    #[test]
    fn ewma_zero_scores_never_signal() {
        let mut e = Ewma::new(0.2, 2.5, 5).unwrap();
        for _ in 0..200 {
            let pt = e.step(&[0.0; 5]).unwrap();
            assert_eq!(pt.value, 0.0);
            assert!(!pt.signal);
        }
    }

    #[test]
    fn ewma_rejects_bad_parameters() {
        assert!(Ewma::new(0.0, 1.0, 5).is_err());
        assert!(Ewma::new(1.1, 1.0, 5).is_err());
        assert!(Ewma::new(0.1, -1.0, 5).is_err());
        assert!(Ewma::new(0.1, 1.0, 0).is_err());
    }

    #[test]
    fn engines_replay_identically() {
        let spec = ChartSpec::Ewma {
            lambda: 0.1,
            rho: 2.7,
            m: 3,
        };
        let stream: Vec<[f64; 3]> = (0..50)
            .map(|i| {
                let x = (i as f64 * 0.77).sin();
                [x, -x * 0.5, x * 0.2]
            })
            .collect();
        let run = |spec: &ChartSpec| -> Vec<ChartPoint> {
            let mut engine = spec.build().unwrap();
            stream.iter().map(|b| engine.step(b).unwrap()).collect()
        };
        assert_eq!(run(&spec), run(&spec));
    }

    #[test]
    fn constant_conditional_scores_signal_at_closed_form_step() {
        // a constant positive score z feeds c+ by (z - k) per step
        let z = 0.6745; // conditional score of a constant stream above theta
        let (k, h) = (0.25, 2.0);
        let mut c = CusumMean::new(CusumSide::Upper, k, h).unwrap();
        let mut signal_step = None;
        for _ in 0..100 {
            let pt = c.step(z);
            if pt.signal {
                signal_step = Some(pt.step);
                break;
            }
        }
        let expect = (h / (z - k)).ceil() as u64;
        assert_eq!(signal_step, Some(expect));
    }
}
