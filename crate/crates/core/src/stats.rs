//! Ensemble statistics and exponential-rate fitting.

use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::rng;

/// Per-time ensemble summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub alive: Vec<usize>,
}

/// Column means and standard errors of the replica matrix `values[r][g]`.
pub fn ensemble(t: &[f64], values: &[Vec<f64>]) -> Series {
    let g = t.len();
    let r = values.len();
    let mut mean = vec![0.0; g];
    let mut se = vec![0.0; g];
    for v in values {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= r.max(1) as f64);
    if r > 1 {
        for v in values {
            for ((s, x), m) in se.iter_mut().zip(v).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        for s in se.iter_mut() {
            *s = (*s / (r - 1) as f64 / r as f64).sqrt();
        }
    }
    Series { t: t.to_vec(), mean, std_error: se, alive: vec![r; g] }
}

/// Weighted least squares of `log(mean)` on `t`, weights `mean² / se²`
/// (the delta-method inverse variance of `log(mean)`). Falls back to equal
/// weights when any standard error is zero. Returns `(rate, intercept)`.
pub fn wls_log_rate(t: &[f64], mean: &[f64], se: &[f64]) -> Result<(f64, f64)> {
    if t.len() < 2 || t.len() != mean.len() || t.len() != se.len() {
        return Err(Error::InvalidArgument("need at least two matching points to fit".into()));
    }
    if let Some(i) = mean.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::Statistical(format!(
            "non-positive ensemble mean {} at t = {}",
            mean[i], t[i]
        )));
    }
    let equal = se.iter().any(|&s| !(s > 0.0));
    let w: Vec<f64> = if equal {
        vec![1.0; t.len()]
    } else {
        mean.iter().zip(se).map(|(m, s)| (m / s).powi(2)).collect()
    };
    let y: Vec<f64> = mean.iter().map(|m| m.ln()).collect();
    let sw: f64 = w.iter().sum();
    let tb = w.iter().zip(t).map(|(w, t)| w * t).sum::<f64>() / sw;
    let yb = w.iter().zip(&y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for i in 0..t.len() {
        sxy += w[i] * (t[i] - tb) * (y[i] - yb);
        sxx += w[i] * (t[i] - tb) * (t[i] - tb);
    }
    let rate = sxy / sxx;
    Ok((rate, yb - rate * tb))
}

pub fn t_quantile(df: f64, p: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).expect("valid t distribution").inverse_cdf(p)
}

/// Fitted rate with a two-sided confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl RateFit {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }
    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

/// Rate from the full ensemble with a batch-means interval: replicas are split
/// into `batches` contiguous groups, each group is fitted on its own, and the
/// spread of the group rates gives a Student-t interval around the full fit.
pub fn fit_batch_means(t: &[f64], values: &[Vec<f64>], batches: usize, level: f64) -> Result<RateFit> {
    let s = ensemble(t, values);
    let (rate, _) = wls_log_rate(t, &s.mean, &s.std_error)?;
    let b = batches.min(values.len());
    if b < 2 {
        return Err(Error::InvalidArgument("batch means need at least two batches".into()));
    }
    let per = values.len() / b;
    let mut rates = Vec::with_capacity(b);
    for i in 0..b {
        let chunk = &values[i * per..(i + 1) * per];
        let cs = ensemble(t, chunk);
        rates.push(wls_log_rate(t, &cs.mean, &cs.std_error)?.0);
    }
    let mb = rates.iter().sum::<f64>() / b as f64;
    let var = rates.iter().map(|r| (r - mb).powi(2)).sum::<f64>() / (b - 1) as f64;
    let half = t_quantile((b - 1) as f64, 0.5 + level / 2.0) * (var / b as f64).sqrt();
    Ok(RateFit { rate, ci_low: rate - half, ci_high: rate + half })
}

/// Rate from the full ensemble with a percentile bootstrap interval over
/// replicas. Deterministic for a given `seed`.
pub fn fit_bootstrap(t: &[f64], values: &[Vec<f64>], resamples: usize, level: f64, seed: u64) -> Result<RateFit> {
    let s = ensemble(t, values);
    let (rate, _) = wls_log_rate(t, &s.mean, &s.std_error)?;
    let r = values.len();
    let g = t.len();
    let mut stream = rng::stream(seed, 0xB007);
    let mut rates = Vec::with_capacity(resamples);
    let mut counts = vec![0u32; r];
    let mut sum = vec![0.0; g];
    let mut sumsq = vec![0.0; g];
    for _ in 0..resamples {
        counts.fill(0);
        for _ in 0..r {
            counts[stream.random_range(0..r)] += 1;
        }
        sum.fill(0.0);
        sumsq.fill(0.0);
        for (v, &c) in values.iter().zip(&counts) {
            if c == 0 {
                continue;
            }
            let c = c as f64;
            for ((s, q), x) in sum.iter_mut().zip(sumsq.iter_mut()).zip(v) {
                *s += c * x;
                *q += c * x * x;
            }
        }
        let rf = r as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / rf).collect();
        let se: Vec<f64> = sumsq
            .iter()
            .zip(&mean)
            .map(|(q, m)| ((q / rf - m * m).max(0.0) * rf / (rf - 1.0) / rf).sqrt())
            .collect();
        match wls_log_rate(t, &mean, &se) {
            Ok((x, _)) => rates.push(x),
            Err(Error::Statistical(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    if rates.len() < resamples * 9 / 10 {
        return Err(Error::Statistical("too many bootstrap resamples had non-positive means".into()));
    }
    rates.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&rates, (1.0 - level) / 2.0);
    let hi = quantile_sorted(&rates, (1.0 + level) / 2.0);
    Ok(RateFit { rate, ci_low: lo.min(rate), ci_high: hi.max(rate) })
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(x: &[f64], p: f64) -> f64 {
    let pos = p.clamp(0.0, 1.0) * (x.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(x.len() - 1);
    let f = pos - i as f64;
    x[i] * (1.0 - f) + x[j] * f
}

/// Mean and standard error of a sample.
pub fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}
