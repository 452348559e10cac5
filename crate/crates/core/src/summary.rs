//! Posterior summarization: the empirical distribution of C, its mode, a
//! permutation-aligned point estimate of Z, and weight estimates conditional
//! on both.

use crate::assignment::{lexmin_optimal_assignment, min_cost_assignment};
use crate::error::{Error, Result};
use crate::model::{FeatureMatrix, WeightMatrix};
use crate::trace::Trace;
use std::collections::BTreeMap;

/// Point summary of a fit.
#[derive(Debug, Clone)]
pub struct FitSummary {
    pub posterior_c: BTreeMap<usize, f64>,
    pub c_star: usize,
    pub z_star: FeatureMatrix,
    pub w_star: WeightMatrix,
    pub p0_star: f64,
    /// Posterior-mean distance of Z_star to the retained samples.
    pub alignment_cost: f64,
}

/// Empirical distribution of C over every post-burn-in iteration, pooled
/// across the given traces.
pub fn posterior_of_c(traces: &[Trace]) -> Result<BTreeMap<usize, f64>> {
    let total: usize = traces.iter().map(|t| t.scalars.len()).sum();
    if total == 0 {
        return Err(Error::argument(
            "no post-burn-in iterations; run the chain longer",
        ));
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for trace in traces {
        for c in trace.c_values() {
            *counts.entry(c).or_insert(0) += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|(c, n)| (c, n as f64 / total as f64))
        .collect())
}

/// MAP estimate of C; ties break toward smaller C.
pub fn map_c(posterior: &BTreeMap<usize, f64>) -> usize {
    let mut best_c = 0usize;
    let mut best_p = f64::NEG_INFINITY;
    for (&c, &p) in posterior {
        if p > best_p {
            best_p = p;
            best_c = c;
        }
    }
    best_c
}

/// Entry-wise column-matching cost D_{cc'} between two equal-shape matrices.
fn cost_matrix(a: &FeatureMatrix, b: &FeatureMatrix) -> Vec<Vec<i64>> {
    let c = a.n_cols();
    let s = a.n_rows();
    let mut cost = vec![vec![0i64; c]; c];
    for i in 0..c {
        for j in 0..c {
            let mut d = 0i64;
            for row in 0..s {
                d += (a.get(row, i) != b.get(row, j)) as i64;
            }
            cost[i][j] = d;
        }
    }
    cost
}

/// Distance between binary matrices: the minimum over column permutations of
/// the summed entry-wise disagreements, solved exactly by optimal assignment.
pub fn z_distance(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<u64> {
    if a.n_rows() != b.n_rows() || a.n_cols() != b.n_cols() {
        return Err(Error::dimension(format!(
            "cannot compare {}x{} with {}x{}",
            a.n_rows(),
            a.n_cols(),
            b.n_rows(),
            b.n_cols()
        )));
    }
    let (_, total) = min_cost_assignment(&cost_matrix(a, b));
    Ok(total as u64)
}

/// The permutation pi achieving z_distance(sample, target): column c of
/// `sample` is matched to column pi[c] of `target`. Ties break to the
/// lexicographically smallest permutation.
pub fn align_columns(sample: &FeatureMatrix, target: &FeatureMatrix) -> Result<Vec<usize>> {
    if sample.n_rows() != target.n_rows() || sample.n_cols() != target.n_cols() {
        return Err(Error::dimension("alignment requires equal shapes"));
    }
    let (perm, _) = lexmin_optimal_assignment(&cost_matrix(sample, target));
    Ok(perm)
}

/// Retained Z samples at a fixed C, deduplicated with multiplicities.
fn distinct_z_at(traces: &[Trace], c_star: usize) -> Vec<(FeatureMatrix, usize)> {
    let mut counts: BTreeMap<Vec<u8>, (FeatureMatrix, usize)> = BTreeMap::new();
    for trace in traces {
        for snap in &trace.states {
            if snap.state.n_haplotypes() != c_star {
                continue;
            }
            let z = snap.state.z();
            let key: Vec<u8> = (0..z.n_rows())
                .flat_map(|s| z.row(s).iter().copied().collect::<Vec<_>>())
                .collect();
            counts
                .entry(key)
                .and_modify(|e| e.1 += 1)
                .or_insert_with(|| (z.clone(), 1));
        }
    }
    counts.into_values().collect()
}

/// Point estimate of Z given C*: the sampled matrix minimizing the average
/// distance to the retained samples, together with that average.
pub fn point_estimate_z(traces: &[Trace], c_star: usize) -> Result<(FeatureMatrix, f64)> {
    let distinct = distinct_z_at(traces, c_star);
    if distinct.is_empty() {
        return Err(Error::EmptyTrace(format!(
            "no retained states with C = {c_star}; run more iterations or thin less"
        )));
    }
    let total: usize = distinct.iter().map(|(_, n)| n).sum();
    let mut best_idx = 0usize;
    let mut best_cost = f64::INFINITY;
    for (i, (z_i, _)) in distinct.iter().enumerate() {
        let mut acc = 0.0;
        for (z_j, n_j) in &distinct {
            acc += *n_j as f64 * z_distance(z_i, z_j)? as f64;
        }
        let mean = acc / total as f64;
        if mean < best_cost {
            best_cost = mean;
            best_idx = i;
        }
    }
    Ok((distinct[best_idx].0.clone(), best_cost))
}

/// Weight and background-rate estimates conditional on C* and Z*: each
/// retained sample's haplotype columns are permuted into Z*'s frame, the
/// normalized weights averaged, and the rows re-normalized.
pub fn point_estimate_weights(
    traces: &[Trace],
    c_star: usize,
    z_star: &FeatureMatrix,
) -> Result<(WeightMatrix, f64)> {
    let mut acc: Option<Vec<f64>> = None;
    let mut p0_acc = 0.0;
    let mut count = 0usize;
    let mut t_count = 0usize;

    for trace in traces {
        for snap in &trace.states {
            let state = &snap.state;
            if state.n_haplotypes() != c_star {
                continue;
            }
            let perm = align_columns(state.z(), z_star)?;
            let w = state.weights();
            t_count = w.n_samples();
            let k = c_star + 1;
            let acc = acc.get_or_insert_with(|| vec![0.0; t_count * k]);
            for t in 0..t_count {
                acc[t * k] += w.get(t, 0);
                for c in 0..c_star {
                    // sample column c lines up with target column perm[c]
                    acc[t * k + perm[c] + 1] += w.get(t, c + 1);
                }
            }
            p0_acc += state.p0();
            count += 1;
        }
    }

    let mut acc = acc.ok_or_else(|| {
        Error::EmptyTrace(format!(
            "no retained states with C = {c_star}; run more iterations or thin less"
        ))
    })?;
    let k = c_star + 1;
    for t in 0..t_count {
        let row = &mut acc[t * k..(t + 1) * k];
        let sum: f64 = row.iter().sum();
        for v in row {
            *v /= sum;
        }
    }
    Ok((
        WeightMatrix::new(t_count, k, acc)?,
        p0_acc / count as f64,
    ))
}

/// Full summarization pipeline over one or more chains of the same fit.
pub fn summarize(traces: &[Trace]) -> Result<FitSummary> {
    if traces.is_empty() {
        return Err(Error::argument("no traces to summarize"));
    }
    let data_hash = traces[0].meta.data_hash;
    let hp_hash = traces[0].meta.hyperparams_hash;
    for t in traces {
        if t.meta.data_hash != data_hash || t.meta.hyperparams_hash != hp_hash {
            return Err(Error::validation(
                "traces come from different data or hyperparameters",
            ));
        }
    }
    let posterior_c = posterior_of_c(traces)?;
    let c_star = map_c(&posterior_c);
    let (z_star, alignment_cost) = point_estimate_z(traces, c_star)?;
    let (w_star, p0_star) = point_estimate_weights(traces, c_star, &z_star)?;
    Ok(FitSummary {
        posterior_c,
        c_star,
        z_star,
        w_star,
        p0_star,
        alignment_cost,
    })
}
