//! Synthetic data generation with known ground truth, including the built-in
//! benchmark scenario: 100 SNVs, four nested haplotypes plus background
//! noise, and per-sample Dirichlet weights over a shuffled abundance ladder.

use crate::data::CountData;
use crate::error::{Error, Result};
use crate::model::{FeatureMatrix, WeightMatrix};
use crate::summary::FitSummary;
use rand::Rng;
use rand_distr::{Beta as BetaDist, Binomial, Distribution, Gamma as GammaDist};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Ground truth behind a simulated data set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimTruth {
    pub z_true: FeatureMatrix,
    pub w_true: WeightMatrix,
    pub p0_true: f64,
    /// When set, SNV s uses this rate in place of the w_t0*p0 background
    /// term (the SNV-specific noise variant).
    pub per_snv_noise: Option<Vec<f64>>,
    /// Total reads per cell.
    pub depth: u32,
}

/// The benchmark Z: four nested haplotypes covering prefixes of 15%, 20%,
/// 85% and 90% of the SNVs. At the reference size S=100 that is exactly
/// 15/20/85/90, so SNVs 1-15 sit in every haplotype and SNVs 91-100 in none.
pub fn benchmark_z(s_count: usize) -> FeatureMatrix {
    assert!(s_count >= 1);
    let fractions = [0.15f64, 0.20, 0.85, 0.90];
    let mut z = FeatureMatrix::zeros(s_count, 4);
    for (c, &frac) in fractions.iter().enumerate() {
        let len = (s_count as f64 * frac).round() as usize;
        for s in 0..len.min(s_count) {
            z.set(s, c, true);
        }
    }
    z
}

/// Per-sample weights w_t ~ Dir(0.2, shuffle of (8, 6, 3, 1)), realized by
/// normalized Gamma draws.
pub fn benchmark_weights(t_samples: usize, rng: &mut impl Rng) -> Result<WeightMatrix> {
    if t_samples == 0 {
        return Err(Error::argument("need at least one sample"));
    }
    let ladder = [8.0f64, 6.0, 3.0, 1.0];
    let mut w = Vec::with_capacity(t_samples * 5);
    for _ in 0..t_samples {
        let mut shape = ladder;
        // Fisher-Yates shuffle of the ladder
        for i in (1..shape.len()).rev() {
            let j = rng.random_range(0..=i);
            shape.swap(i, j);
        }
        let mut row = Vec::with_capacity(5);
        let mut sum = 0.0;
        for a in std::iter::once(0.2).chain(shape.iter().copied()) {
            let g: f64 = GammaDist::new(a, 1.0)
                .expect("valid shape")
                .sample(rng)
                .max(1e-300);
            sum += g;
            row.push(g);
        }
        for v in row {
            w.push(v / sum);
        }
    }
    WeightMatrix::new(t_samples, 5, w)
}

impl SimTruth {
    /// The full benchmark scenario at its reference size: S=100, T as given,
    /// C=4, p0=0.01.
    pub fn benchmark(t_samples: usize, depth: u32, rng: &mut impl Rng) -> Result<SimTruth> {
        SimTruth::benchmark_sized(100, t_samples, depth, 0.01, rng)
    }

    pub fn benchmark_sized(
        s_count: usize,
        t_samples: usize,
        depth: u32,
        p0: f64,
        rng: &mut impl Rng,
    ) -> Result<SimTruth> {
        if s_count == 0 {
            return Err(Error::argument("need at least one SNV"));
        }
        if !(p0 > 0.0 && p0 < 1.0) {
            return Err(Error::argument("p0 must lie in (0,1)"));
        }
        Ok(SimTruth {
            z_true: benchmark_z(s_count),
            w_true: benchmark_weights(t_samples, rng)?,
            p0_true: p0,
            per_snv_noise: None,
            depth,
        })
    }

    /// Swap the shared background term for SNV-specific noise rates drawn
    /// from Be(3, 297) (mean 0.01); pass `rates` to override the draw.
    pub fn with_snv_noise(mut self, rates: Option<Vec<f64>>, rng: &mut impl Rng) -> Result<Self> {
        let s = self.z_true.n_rows();
        let noise = match rates {
            Some(v) => {
                if v.len() != s {
                    return Err(Error::dimension("noise vector must have one rate per SNV"));
                }
                if !v.iter().all(|&e| (0.0..1.0).contains(&e)) {
                    return Err(Error::argument("noise rates must lie in [0,1)"));
                }
                v
            }
            None => {
                let beta = BetaDist::new(3.0, 297.0).expect("valid shapes");
                (0..s).map(|_| beta.sample(rng)).collect()
            }
        };
        self.per_snv_noise = Some(noise);
        Ok(self)
    }

    pub fn n_snvs(&self) -> usize {
        self.z_true.n_rows()
    }

    pub fn n_samples(&self) -> usize {
        self.w_true.n_samples()
    }

    /// True success probability of a cell.
    pub fn p_true(&self, s: usize, t: usize) -> f64 {
        let c = self.z_true.n_cols();
        let mut p = match &self.per_snv_noise {
            Some(eps) => eps[s],
            None => self.w_true.get(t, 0) * self.p0_true,
        };
        for j in 0..c {
            if self.z_true.get(s, j) {
                p += self.w_true.get(t, j + 1);
            }
        }
        // the SNV-specific variant can push the sum past 1 in pathological
        // draws; binomial sampling needs a proper probability
        p.min(1.0 - 1e-12)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<SimTruth> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

/// Draw counts n_st ~ Binom(depth, p_true_st) with constant depth.
pub fn simulate_counts(truth: &SimTruth, rng: &mut impl Rng) -> Result<CountData> {
    let (s_count, t_count) = (truth.n_snvs(), truth.n_samples());
    let mut n = Vec::with_capacity(s_count * t_count);
    for s in 0..s_count {
        for t in 0..t_count {
            let p = truth.p_true(s, t);
            let draw = if p <= 0.0 {
                0
            } else {
                Binomial::new(truth.depth as u64, p)
                    .map_err(|e| Error::argument(format!("bad binomial parameter: {e}")))?
                    .sample(rng) as u32
            };
            n.push(draw);
        }
    }
    CountData::from_matrices(s_count, t_count, n, vec![truth.depth; s_count * t_count])
}

/// Error statistics of fitted cell probabilities against the truth.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub mean: f64,
    pub sd: f64,
    pub mean_abs: f64,
    /// Histogram over [-0.5, 0.5] in 50 bins: (bin center, count).
    pub histogram: Vec<(f64, usize)>,
}

/// Compare p_hat_st = p0*·w*_t0 + sum_c w*_tc z*_sc against the truth.
pub fn error_report(truth: &SimTruth, summary: &FitSummary) -> Result<ErrorReport> {
    let (s_count, t_count) = (truth.n_snvs(), truth.n_samples());
    if summary.z_star.n_rows() != s_count || summary.w_star.n_samples() != t_count {
        return Err(Error::dimension(format!(
            "summary shape {}x{} does not match truth {}x{}",
            summary.z_star.n_rows(),
            summary.w_star.n_samples(),
            s_count,
            t_count
        )));
    }
    let c_star = summary.z_star.n_cols();
    let mut errors = Vec::with_capacity(s_count * t_count);
    for s in 0..s_count {
        for t in 0..t_count {
            let mut p_hat = summary.p0_star * summary.w_star.get(t, 0);
            for c in 0..c_star {
                if summary.z_star.get(s, c) {
                    p_hat += summary.w_star.get(t, c + 1);
                }
            }
            errors.push(p_hat - truth.p_true(s, t));
        }
    }
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    let mean_abs = errors.iter().map(|e| e.abs()).sum::<f64>() / n;

    let bins = 50usize;
    let width = 1.0 / bins as f64;
    let mut histogram: Vec<(f64, usize)> = (0..bins)
        .map(|i| (-0.5 + (i as f64 + 0.5) * width, 0))
        .collect();
    for e in &errors {
        let idx = (((e + 0.5) / width).floor() as isize).clamp(0, bins as isize - 1) as usize;
        histogram[idx].1 += 1;
    }
    Ok(ErrorReport {
        mean,
        sd: var.sqrt(),
        mean_abs,
        histogram,
    })
}
