//! Chain health numbers backing the `diagnose` subcommand: acceptance rates,
//! a split-mean convergence z-score, and effective sample size.

use crate::error::{Error, Result};
use crate::trace::Trace;

#[derive(Debug, Clone)]
pub struct ChainDiagnostics {
    pub seed: u64,
    pub iterations: usize,
    pub theta_accept: f64,
    pub row_accept: f64,
    pub p0_accept: f64,
    pub rj_attempt_rate: f64,
    pub rj_accept_rate: f64,
    /// Convergence z-scores comparing the first 10% of the retained chain
    /// against the last 50%, for the joint log density and for C.
    pub z_log_joint: f64,
    pub z_c: f64,
    pub ess_log_joint: f64,
}

pub fn diagnose(trace: &Trace) -> Result<ChainDiagnostics> {
    if trace.scalars.is_empty() {
        return Err(Error::EmptyTrace("no post-burn-in iterations".into()));
    }
    let n = trace.scalars.len();
    let mean_of = |f: &dyn Fn(&crate::trace::ScalarRecord) -> Option<f64>| {
        let vals: Vec<f64> = trace.scalars.iter().filter_map(|r| f(r)).collect();
        if vals.is_empty() {
            f64::NAN
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    };

    let theta_accept = mean_of(&|r| Some(r.theta_accept));
    let row_accept = mean_of(&|r| r.row_accept);
    let p0_accept = mean_of(&|r| Some(r.p0_accept as u8 as f64));
    let attempts = trace.scalars.iter().filter(|r| r.rj_attempted).count();
    let accepts = trace.scalars.iter().filter(|r| r.rj_accepted).count();
    let rj_attempt_rate = attempts as f64 / n as f64;
    let rj_accept_rate = if attempts == 0 {
        f64::NAN
    } else {
        accepts as f64 / attempts as f64
    };

    let lj: Vec<f64> = trace.scalars.iter().map(|r| r.log_joint).collect();
    let cs: Vec<f64> = trace.scalars.iter().map(|r| r.c as f64).collect();
    Ok(ChainDiagnostics {
        seed: trace.meta.seed,
        iterations: trace.meta.iterations,
        theta_accept,
        row_accept,
        p0_accept,
        rj_attempt_rate,
        rj_accept_rate,
        z_log_joint: split_mean_z(&lj),
        z_c: split_mean_z(&cs),
        ess_log_joint: effective_sample_size(&lj),
    })
}

/// z-score for equality of means between the first 10% and last 50% of a
/// series, with batch-means variance to absorb autocorrelation.
pub fn split_mean_z(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 40 {
        return f64::NAN;
    }
    let a = &series[..n / 10];
    let b = &series[n / 2..];
    let (ma, va) = batch_mean_var(a);
    let (mb, vb) = batch_mean_var(b);
    let denom = (va + vb).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (ma - mb) / denom
    }
}

/// (mean, variance of the mean) via nonoverlapping batch means.
pub fn batch_mean_var(series: &[f64]) -> (f64, f64) {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let batches = (n as f64).sqrt().floor().max(2.0) as usize;
    let len = n / batches;
    if len == 0 {
        return (mean, f64::NAN);
    }
    let mut bvar = 0.0;
    for b in 0..batches {
        let m: f64 = series[b * len..(b + 1) * len].iter().sum::<f64>() / len as f64;
        bvar += (m - mean) * (m - mean);
    }
    bvar /= (batches - 1) as f64;
    (mean, bvar / batches as f64)
}

/// Effective sample size via the initial positive sequence of autocovariance
/// pair sums.
pub fn effective_sample_size(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 10 {
        return f64::NAN;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var: f64 = series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return n as f64;
    }
    let autocov = |lag: usize| -> f64 {
        (0..n - lag)
            .map(|i| (series[i] - mean) * (series[i + lag] - mean))
            .sum::<f64>()
            / n as f64
    };
    let mut weight = 1.0;
    let mut lag = 1;
    while lag + 1 < n {
        let pair = autocov(lag) + autocov(lag + 1);
        if pair <= 0.0 {
            break;
        }
        weight += 2.0 * pair / var;
        lag += 2;
    }
    n as f64 / weight
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ess_of_white_noise_is_near_n() {
        use rand::rngs::SmallRng;
        use rand::{Rng, SeedableRng};
        let mut rng = SmallRng::seed_from_u64(1);
        let series: Vec<f64> = (0..4000).map(|_| rng.random::<f64>()).collect();
        let ess = effective_sample_size(&series);
        assert!(ess > 2500.0, "{ess}");
    }

    #[test]
    fn ess_of_constant_is_n() {
        let series = vec![2.0; 100];
        assert_eq!(effective_sample_size(&series), 100.0);
    }

    #[test]
    fn split_z_small_for_stationary_series() {
        use rand::rngs::SmallRng;
        use rand::{Rng, SeedableRng};
        let mut rng = SmallRng::seed_from_u64(2);
        let series: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        assert!(split_mean_z(&series).abs() < 4.0);
    }

    #[test]
    fn split_z_flags_drift() {
        let series: Vec<f64> = (0..5000).map(|i| i as f64).collect();
        assert!(split_mean_z(&series).abs() > 10.0);
    }
}
