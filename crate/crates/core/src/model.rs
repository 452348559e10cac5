//! Model types and the log densities they compose.
//!
//! The sampling model is binomial: n_st ~ Binom(N_st, p_st) with
//! p_st = w_t0·p0 + Σ_c w_tc·z_sc, where w_t is the row-normalization of the
//! unscaled abundances θ_t. Haplotype inclusion indicators z_sc carry a
//! Beta-Bernoulli prior whose per-haplotype selection probabilities are
//! integrated out analytically, the abundances are Gamma, the background rate
//! p0 is Beta, and the haplotype count C is Geometric on {1, 2, ...}.
//!
//! Everything here is a pure function of its arguments; no random state.

use crate::data::{CountData, Fnv};
use crate::error::{Error, Result};
use crate::numerics::{ln_beta, ln_beta_pdf, ln_binom_pmf, ln_gamma_pdf};
use crate::sampler::McmcConfig;
use serde::{Deserialize, Serialize};

/// S×C binary inclusion matrix: rows are SNVs, columns are haplotypes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    s: usize,
    c: usize,
    bits: Vec<u8>,
}

impl FeatureMatrix {
    pub fn zeros(s: usize, c: usize) -> Self {
        FeatureMatrix {
            s,
            c,
            bits: vec![0; s * c],
        }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let s = rows.len();
        if s == 0 {
            return Err(Error::argument("feature matrix needs at least one row"));
        }
        let c = rows[0].len();
        let mut bits = Vec::with_capacity(s * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::dimension("ragged feature matrix rows"));
            }
            for &b in row {
                if b > 1 {
                    return Err(Error::argument("feature matrix entries must be 0 or 1"));
                }
                bits.push(b);
            }
        }
        Ok(FeatureMatrix { s, c, bits })
    }

    pub fn n_rows(&self) -> usize {
        self.s
    }

    pub fn n_cols(&self) -> usize {
        self.c
    }

    #[inline]
    pub fn get(&self, s: usize, c: usize) -> bool {
        self.bits[s * self.c + c] == 1
    }

    #[inline]
    pub fn set(&mut self, s: usize, c: usize, value: bool) {
        self.bits[s * self.c + c] = value as u8;
    }

    pub fn row(&self, s: usize) -> &[u8] {
        &self.bits[s * self.c..(s + 1) * self.c]
    }

    /// m_c: number of SNVs included in column c.
    pub fn col_sum(&self, c: usize) -> usize {
        (0..self.s).map(|s| self.get(s, c) as usize).sum()
    }

    /// New matrix whose column j is column perm[j] of self.
    pub fn permute_cols(&self, perm: &[usize]) -> FeatureMatrix {
        assert_eq!(perm.len(), self.c);
        let mut out = FeatureMatrix::zeros(self.s, self.c);
        for s in 0..self.s {
            for (j, &src) in perm.iter().enumerate() {
                out.set(s, j, self.get(s, src));
            }
        }
        out
    }

}

/// Model hyperparameters plus the nested sampler tuning block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Geometric prior success probability for C; E(C) = 1/r.
    pub r: f64,
    /// Mass parameter of the feature allocation prior.
    pub alpha: f64,
    /// Gamma shape for haplotype abundances.
    pub a: f64,
    /// Gamma shape for the background abundance.
    pub a0: f64,
    /// Beta shapes for the background variant rate p0.
    pub a00: f64,
    pub b00: f64,
    /// Hard upper bound on C.
    pub c_max: usize,
    pub mcmc: McmcConfig,
}

impl Hyperparams {
    /// Preset used throughout the simulation study:
    /// r=0.2, α=3, a0=a=0.5, a00=1, b00=100.
    pub fn simulation_preset() -> Self {
        Hyperparams {
            r: 0.2,
            alpha: 3.0,
            a: 0.5,
            a0: 0.5,
            a00: 1.0,
            b00: 100.0,
            c_max: 15,
            mcmc: McmcConfig::default(),
        }
    }

    /// Preset used for the real-data exome analyses:
    /// r=0.2, α=1, a=a0=1, a00=5, b00=95.
    pub fn exome_preset() -> Self {
        Hyperparams {
            r: 0.2,
            alpha: 1.0,
            a: 1.0,
            a0: 1.0,
            a00: 5.0,
            b00: 95.0,
            c_max: 15,
            mcmc: McmcConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(Error::argument("r must lie in (0,1)"));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("a", self.a),
            ("a0", self.a0),
            ("a00", self.a00),
            ("b00", self.b00),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::argument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.c_max < 1 {
            return Err(Error::argument("c_max must be at least 1"));
        }
        self.mcmc.validate()
    }

    pub(crate) fn content_hash(&self) -> u64 {
        let mut h = Fnv::new();
        for v in [self.r, self.alpha, self.a, self.a0, self.a00, self.b00] {
            h.write_f64(v);
        }
        h.write_usize(self.c_max);
        h.finish()
    }
}

/// One point in parameter space: (C, Z, θ, p0).
///
/// θ is stored T×(C+1) row-major; column 0 is the background haplotype.
/// Weights are derived by row normalization, never stored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelState {
    z: FeatureMatrix,
    theta: Vec<f64>,
    t: usize,
    p0: f64,
}

impl ModelState {
    pub fn new(z: FeatureMatrix, theta: Vec<f64>, t: usize, p0: f64) -> Result<Self> {
        let c = z.n_cols();
        if c < 1 {
            return Err(Error::argument("need at least one haplotype column"));
        }
        if theta.len() != t * (c + 1) {
            return Err(Error::dimension(format!(
                "theta must be {t}x{} for C={c}, got {} entries",
                c + 1,
                theta.len()
            )));
        }
        if !theta.iter().all(|&v| v > 0.0 && v.is_finite()) {
            return Err(Error::argument("theta entries must be strictly positive"));
        }
        if !(p0 > 0.0 && p0 < 1.0) {
            return Err(Error::argument("p0 must lie in (0,1)"));
        }
        Ok(ModelState { z, theta, t, p0 })
    }

    pub fn n_haplotypes(&self) -> usize {
        self.z.n_cols()
    }

    pub fn n_snvs(&self) -> usize {
        self.z.n_rows()
    }

    pub fn n_samples(&self) -> usize {
        self.t
    }

    pub fn z(&self) -> &FeatureMatrix {
        &self.z
    }

    pub fn z_mut(&mut self) -> &mut FeatureMatrix {
        &mut self.z
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn set_p0(&mut self, p0: f64) {
        debug_assert!(p0 > 0.0 && p0 < 1.0);
        self.p0 = p0;
    }

    /// Unscaled abundance θ_tc; c ranges over 0..=C with 0 the background.
    #[inline]
    pub fn theta(&self, t: usize, c: usize) -> f64 {
        self.theta[t * (self.z.c + 1) + c]
    }

    #[inline]
    pub fn set_theta(&mut self, t: usize, c: usize, value: f64) {
        debug_assert!(value > 0.0);
        self.theta[t * (self.z.c + 1) + c] = value;
    }

    pub fn theta_raw(&self) -> &[f64] {
        &self.theta
    }

    #[inline]
    pub fn theta_row_sum(&self, t: usize) -> f64 {
        let k = self.z.c + 1;
        self.theta[t * k..(t + 1) * k].iter().sum()
    }

    /// Row-normalized weights.
    pub fn weights(&self) -> WeightMatrix {
        let k = self.z.c + 1;
        let mut w = Vec::with_capacity(self.t * k);
        for t in 0..self.t {
            let sum = self.theta_row_sum(t);
            for c in 0..k {
                w.push(self.theta(t, c) / sum);
            }
        }
        WeightMatrix { t: self.t, k, w }
    }

    pub fn validate(&self) -> Result<()> {
        // reconstructing through the constructor re-checks every invariant
        ModelState::new(self.z.clone(), self.theta.clone(), self.t, self.p0).map(|_| ())
    }

}

/// T×(C+1) matrix of weights; each row lies on the simplex.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightMatrix {
    t: usize,
    k: usize,
    w: Vec<f64>,
}

impl WeightMatrix {
    pub fn new(t: usize, k: usize, w: Vec<f64>) -> Result<Self> {
        if w.len() != t * k {
            return Err(Error::dimension("weight matrix shape mismatch"));
        }
        let m = WeightMatrix { t, k, w };
        for t_i in 0..t {
            let row = m.row(t_i);
            if row.iter().any(|&v| v < 0.0) {
                return Err(Error::argument("weights must be nonnegative"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::argument(format!(
                    "weight row {t_i} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(m)
    }

    pub fn n_samples(&self) -> usize {
        self.t
    }

    /// C+1: background plus haplotype columns.
    pub fn n_components(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, t: usize, c: usize) -> f64 {
        self.w[t * self.k + c]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.w[t * self.k..(t + 1) * self.k]
    }
}

/// Success probability p_st = w_t0·p0 + Σ_c w_tc·z_sc.
pub fn success_prob(state: &ModelState, s: usize, t: usize) -> Result<f64> {
    if s >= state.n_snvs() || t >= state.n_samples() {
        return Err(Error::argument(format!(
            "index ({s},{t}) out of range for {}x{} state",
            state.n_snvs(),
            state.n_samples()
        )));
    }
    let c = state.n_haplotypes();
    let mut dot = state.theta(t, 0) * state.p0;
    for j in 0..c {
        if state.z.get(s, j) {
            dot += state.theta(t, j + 1);
        }
    }
    Ok(dot / state.theta_row_sum(t))
}

/// Full binomial log likelihood over all cells, coefficient included.
pub fn log_likelihood(data: &CountData, state: &ModelState) -> Result<f64> {
    if data.n_snvs() != state.n_snvs() || data.n_samples() != state.n_samples() {
        return Err(Error::dimension(format!(
            "data is {}x{} but state is {}x{}",
            data.n_snvs(),
            data.n_samples(),
            state.n_snvs(),
            state.n_samples()
        )));
    }
    let mut acc = 0.0;
    for s in 0..data.n_snvs() {
        for t in 0..data.n_samples() {
            let total = data.total(s, t);
            if total == 0 {
                continue;
            }
            let p = success_prob(state, s, t)?;
            acc += ln_binom_pmf(data.n(s, t) as u64, total as u64, p);
        }
    }
    Ok(acc)
}

/// log p(Z | C) with the per-haplotype selection probabilities integrated out:
/// Σ_c [ log B(m_c + α/C, S − m_c + 1) − log B(α/C, 1) ].
pub fn log_prior_z_collapsed(z: &FeatureMatrix, alpha: f64) -> Result<f64> {
    let c = z.n_cols();
    if c < 1 {
        return Err(Error::argument("C must be at least 1"));
    }
    if !(alpha > 0.0) {
        return Err(Error::argument("alpha must be positive"));
    }
    let s = z.n_rows() as f64;
    let ac = alpha / c as f64;
    let base = ln_beta(ac, 1.0);
    let mut acc = 0.0;
    for j in 0..c {
        let m = z.col_sum(j) as f64;
        acc += ln_beta(m + ac, s - m + 1.0) - base;
    }
    Ok(acc)
}

/// log p(Z | μ, C) with explicit selection probabilities. Kept alongside the
/// collapsed form so the marginalization can be cross-checked by integration.
pub fn log_prior_z_given_mu(z: &FeatureMatrix, mu: &[f64]) -> Result<f64> {
    if mu.len() != z.n_cols() {
        return Err(Error::dimension("mu length must equal column count"));
    }
    if !mu.iter().all(|&m| m > 0.0 && m < 1.0) {
        return Err(Error::argument("mu entries must lie in (0,1)"));
    }
    let s = z.n_rows() as f64;
    let mut acc = 0.0;
    for (j, &m_j) in mu.iter().enumerate() {
        let m = z.col_sum(j) as f64;
        acc += m * m_j.ln() + (s - m) * (-m_j).ln_1p();
    }
    Ok(acc)
}

/// Gamma(a0,1) log density for the background column plus Gamma(a,1) for the
/// haplotype columns.
pub fn log_prior_theta(state: &ModelState, a: f64, a0: f64) -> Result<f64> {
    if !(a > 0.0 && a0 > 0.0) {
        return Err(Error::argument("gamma shapes must be positive"));
    }
    let mut acc = 0.0;
    for t in 0..state.n_samples() {
        for c in 0..=state.n_haplotypes() {
            let v = state.theta(t, c);
            if !(v > 0.0) {
                return Err(Error::argument("theta entries must be strictly positive"));
            }
            acc += ln_gamma_pdf(v, if c == 0 { a0 } else { a });
        }
    }
    Ok(acc)
}

/// Beta(a00, b00) log density of the background rate.
pub fn log_prior_p0(p0: f64, a00: f64, b00: f64) -> Result<f64> {
    if !(a00 > 0.0 && b00 > 0.0) {
        return Err(Error::argument("beta shapes must be positive"));
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::argument(format!("p0 must lie in (0,1), got {p0}")));
    }
    Ok(ln_beta_pdf(p0, a00, b00))
}

/// Geometric prior on C with support {1, 2, ...} so that E(C) = 1/r.
pub fn log_prior_c(c: usize, r: f64) -> Result<f64> {
    if c < 1 {
        return Err(Error::argument("C must be at least 1"));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::argument("r must lie in (0,1)"));
    }
    Ok(r.ln() + (c as f64 - 1.0) * (-r).ln_1p())
}

/// Joint log density: likelihood plus all priors, C prior included.
pub fn log_joint(data: &CountData, state: &ModelState, hp: &Hyperparams) -> Result<f64> {
    Ok(log_likelihood(data, state)?
        + log_prior_z_collapsed(state.z(), hp.alpha)?
        + log_prior_theta(state, hp.a, hp.a0)?
        + log_prior_p0(state.p0(), hp.a00, hp.b00)?
        + log_prior_c(state.n_haplotypes(), hp.r)?)
}
