//! Posterior simulation.
//!
//! Within a fixed C the chain targets the full posterior through Gibbs
//! transitions on the inclusion indicators (with the selection probabilities
//! collapsed out), a joint Metropolis-Hastings row update on alternating
//! sweeps, log-scale random walks on the abundances, and a logit-scale walk
//! on the background rate.
//!
//! Moves across C use a reversible-jump step built on a fractional data
//! split: each cell's likelihood is raised to a training exponent b_st once
//! per fit, the complementary exponent 1-b_st forms the test likelihood, a
//! short inner chain on the training-weighted posterior generates the
//! cross-dimension proposal, and the test likelihood decides acceptance. The
//! training-posterior proposal density is treated as cancelling against the
//! training-posterior factor of the target, so the resulting transition is an
//! approximation; its quality is checked empirically by the prior-recovery
//! and simulation-recovery suites rather than corrected analytically.

use crate::data::CountData;
use crate::error::{Error, Result};
use crate::model::{
    log_joint, log_prior_c, FeatureMatrix, Hyperparams, ModelState,
};
use crate::numerics::{ln_beta, ln_beta_pdf, ln_binom_coef, ln_gamma_pdf};
use crate::trace::{ScalarRecord, StateSnapshot, Trace, TraceMeta};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta as BetaDist, Distribution, Gamma as GammaDist};
use serde::{Deserialize, Serialize};

const THETA_MIN: f64 = 1e-300;
const THETA_MAX: f64 = 1e300;

/// Sampler tuning knobs, nested inside `Hyperparams`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    /// Stride between retained state snapshots.
    pub thin: usize,
    /// Log-scale random-walk sd for theta proposals.
    pub theta_step: f64,
    /// Logit-scale random-walk sd for p0 proposals.
    pub p0_step: f64,
    /// Per-entry flip probability of the joint row proposal.
    pub row_flip_prob: f64,
    /// Sweeps of the inner training-posterior chain per RJ proposal.
    pub rj_inner_iters: usize,
    /// Per-sweep probability of attempting an RJ move.
    pub rj_prob: f64,
    /// Beta parameters of the per-cell training fractions.
    pub train_shape1: f64,
    pub train_shape2: f64,
    /// C used for the default initialization.
    pub init_c: usize,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            iterations: 25_000,
            burn_in: 10_000,
            thin: 10,
            theta_step: 0.5,
            p0_step: 0.5,
            row_flip_prob: 0.1,
            rj_inner_iters: 50,
            rj_prob: 0.35,
            train_shape1: 25.0,
            train_shape2: 975.0,
            init_c: 1,
            seed: 1,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(Error::argument(format!(
                "burn_in {} must be below iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::argument("thin must be at least 1"));
        }
        for (name, v) in [
            ("theta_step", self.theta_step),
            ("p0_step", self.p0_step),
            ("train_shape1", self.train_shape1),
            ("train_shape2", self.train_shape2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::argument(format!("{name} must be positive")));
            }
        }
        if !(self.row_flip_prob > 0.0 && self.row_flip_prob <= 1.0) {
            return Err(Error::argument("row_flip_prob must lie in (0,1]"));
        }
        if !(0.0..=1.0).contains(&self.rj_prob) {
            return Err(Error::argument("rj_prob must lie in [0,1]"));
        }
        if self.rj_inner_iters == 0 {
            return Err(Error::argument("rj_inner_iters must be at least 1"));
        }
        if self.init_c == 0 {
            return Err(Error::argument("init_c must be at least 1"));
        }
        Ok(())
    }
}

/// Per-cell training fractions b_st, drawn once per fit.
#[derive(Debug, Clone)]
pub struct TrainTestSplit {
    s: usize,
    t: usize,
    b: Vec<f64>,
}

impl TrainTestSplit {
    #[inline]
    pub fn train_frac(&self, s: usize, t: usize) -> f64 {
        self.b[s * self.t + t]
    }

    pub fn n_snvs(&self) -> usize {
        self.s
    }

    pub fn n_samples(&self) -> usize {
        self.t
    }

    /// A split whose training share is zero everywhere, so the test
    /// likelihood coincides with the full likelihood.
    pub fn all_test(s: usize, t: usize) -> Self {
        TrainTestSplit {
            s,
            t,
            b: vec![0.0; s * t],
        }
    }
}

pub fn draw_split(
    s: usize,
    t: usize,
    shape1: f64,
    shape2: f64,
    rng: &mut impl Rng,
) -> Result<TrainTestSplit> {
    if !(shape1 > 0.0 && shape2 > 0.0) {
        return Err(Error::argument("split shapes must be positive"));
    }
    let beta = BetaDist::new(shape1, shape2)
        .map_err(|e| Error::argument(format!("bad split shapes: {e}")))?;
    let b = (0..s * t)
        .map(|_| beta.sample(rng).clamp(1e-12, 1.0 - 1e-12))
        .collect();
    Ok(TrainTestSplit { s, t, b })
}

/// Which fractional exponent weights the likelihood in a transition.
#[derive(Clone, Copy)]
pub enum LikWeight<'a> {
    /// Exponent 1 per cell: training and test shares combined.
    Full,
    /// Training share b_st, used by the inner RJ chain.
    Train(&'a TrainTestSplit),
    /// Test share 1-b_st, used by the RJ acceptance ratio.
    Test(&'a TrainTestSplit),
}

impl LikWeight<'_> {
    #[inline]
    fn exponent(&self, s: usize, t: usize) -> f64 {
        match self {
            LikWeight::Full => 1.0,
            LikWeight::Train(split) => split.train_frac(s, t),
            LikWeight::Test(split) => 1.0 - split.train_frac(s, t),
        }
    }
}

/// Weighted log-likelihood-ratio contribution of one cell, coefficient-free.
#[inline]
fn cell_delta(n: u32, total: u32, p_new: f64, p_old: f64, weight: f64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let mut d = 0.0;
    if n > 0 {
        d += n as f64 * (p_new / p_old).ln();
    }
    if n < total {
        d += (total - n) as f64 * ((1.0 - p_new) / (1.0 - p_old)).ln();
    }
    weight * d
}

/// Weighted log likelihood without binomial coefficients.
fn weighted_core_loglik(data: &CountData, state: &ModelState, lik: LikWeight) -> f64 {
    let mut acc = 0.0;
    for s in 0..data.n_snvs() {
        for t in 0..data.n_samples() {
            let total = data.total(s, t);
            if total == 0 {
                continue;
            }
            let p = cell_prob(state, s, t);
            let n = data.n(s, t);
            let mut v = 0.0;
            if n > 0 {
                v += n as f64 * p.ln();
            }
            if n < total {
                v += (total - n) as f64 * (-p).ln_1p();
            }
            acc += lik.exponent(s, t) * v;
        }
    }
    acc
}

#[inline]
fn cell_prob(state: &ModelState, s: usize, t: usize) -> f64 {
    let c = state.n_haplotypes();
    let mut dot = state.theta(t, 0) * state.p0();
    for j in 0..c {
        if state.z().get(s, j) {
            dot += state.theta(t, j + 1);
        }
    }
    dot / state.theta_row_sum(t)
}

/// Gibbs update of a single inclusion indicator from its full conditional:
/// collapsed Beta-Bernoulli predictive odds times the weighted likelihood
/// ratio between inclusion and exclusion.
pub fn gibbs_update_z(
    state: &mut ModelState,
    data: &CountData,
    lik: LikWeight,
    hp: &Hyperparams,
    s: usize,
    c: usize,
    rng: &mut impl Rng,
) {
    let n_snvs = state.n_snvs();
    let n_c = state.n_haplotypes();
    assert!(s < n_snvs && c < n_c, "index out of range");

    let current = state.z().get(s, c);
    let m_minus = state.z().col_sum(c) - current as usize;
    let ac = hp.alpha / n_c as f64;
    // predictive odds of inclusion given the other rows of the column
    let mut log_odds = (ac + m_minus as f64).ln() - (n_snvs as f64 - m_minus as f64).ln();

    let theta_c = |t: usize| state.theta(t, c + 1);
    for t in 0..state.n_samples() {
        let total = data.total(s, t);
        if total == 0 {
            continue;
        }
        let rowsum = state.theta_row_sum(t);
        let mut base = state.theta(t, 0) * state.p0();
        for j in 0..n_c {
            if j != c && state.z().get(s, j) {
                base += state.theta(t, j + 1);
            }
        }
        let p_in = (base + theta_c(t)) / rowsum;
        let p_out = base / rowsum;
        log_odds += cell_delta(data.n(s, t), total, p_in, p_out, lik.exponent(s, t));
    }

    let p_include = 1.0 / (1.0 + (-log_odds).exp());
    let new = rng.random::<f64>() < p_include;
    if new != current {
        state.z_mut().set(s, c, new);
    }
}

/// Joint Metropolis-Hastings update of an entire row of Z. Each entry is
/// independently proposed flipped, which makes the proposal symmetric, so
/// acceptance uses only the collapsed-prior and weighted-likelihood ratio.
/// Returns whether the proposal was accepted.
pub fn mh_update_row(
    state: &mut ModelState,
    data: &CountData,
    lik: LikWeight,
    hp: &Hyperparams,
    s: usize,
    rng: &mut impl Rng,
) -> bool {
    let n_c = state.n_haplotypes();
    let n_snvs = state.n_snvs();
    assert!(s < n_snvs, "row out of range");

    let flips: Vec<usize> =
        (0..n_c).filter(|_| rng.random::<f64>() < hp.mcmc.row_flip_prob).collect();
    if flips.is_empty() {
        return true; // identity proposal, ratio 1
    }

    let ac = hp.alpha / n_c as f64;
    let s_f = n_snvs as f64;
    let mut log_ratio = 0.0;
    for &c in &flips {
        let m = state.z().col_sum(c) as f64;
        let m_new = if state.z().get(s, c) { m - 1.0 } else { m + 1.0 };
        log_ratio += ln_beta(m_new + ac, s_f - m_new + 1.0) - ln_beta(m + ac, s_f - m + 1.0);
    }

    for t in 0..state.n_samples() {
        let total = data.total(s, t);
        if total == 0 {
            continue;
        }
        let rowsum = state.theta_row_sum(t);
        let mut dot_old = state.theta(t, 0) * state.p0();
        let mut dot_new = dot_old;
        for j in 0..n_c {
            let included = state.z().get(s, j);
            let flipped = flips.contains(&j);
            if included {
                dot_old += state.theta(t, j + 1);
            }
            if included != flipped {
                dot_new += state.theta(t, j + 1);
            }
        }
        log_ratio += cell_delta(
            data.n(s, t),
            total,
            dot_new / rowsum,
            dot_old / rowsum,
            lik.exponent(s, t),
        );
    }

    let accept = log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp();
    if accept {
        for &c in &flips {
            let v = state.z().get(s, c);
            state.z_mut().set(s, c, !v);
        }
    }
    accept
}

/// Log-normal random-walk update of one abundance. The acceptance ratio
/// combines the Gamma prior, the weighted likelihood, and the log-scale
/// Jacobian theta'/theta. Returns whether the proposal was accepted.
pub fn mh_update_theta(
    state: &mut ModelState,
    data: &CountData,
    lik: LikWeight,
    hp: &Hyperparams,
    t: usize,
    c: usize,
    rng: &mut impl Rng,
) -> bool {
    assert!(t < state.n_samples() && c <= state.n_haplotypes());
    let old = state.theta(t, c);
    let xi: f64 = sample_std_normal(rng);
    let new = old * (hp.mcmc.theta_step * xi).exp();
    if !(THETA_MIN..=THETA_MAX).contains(&new) {
        return false;
    }

    let shape = if c == 0 { hp.a0 } else { hp.a };
    let mut log_ratio = ln_gamma_pdf(new, shape) - ln_gamma_pdf(old, shape) + (new / old).ln();

    let rowsum_old = state.theta_row_sum(t);
    let rowsum_new = rowsum_old - old + new;
    for s in 0..state.n_snvs() {
        let total = data.total(s, t);
        if total == 0 {
            continue;
        }
        let mut dot_old = state.theta(t, 0) * state.p0();
        for j in 0..state.n_haplotypes() {
            if state.z().get(s, j) {
                dot_old += state.theta(t, j + 1);
            }
        }
        let dot_new = if c == 0 {
            dot_old + (new - old) * state.p0()
        } else if state.z().get(s, c - 1) {
            dot_old + new - old
        } else {
            dot_old
        };
        log_ratio += cell_delta(
            data.n(s, t),
            total,
            dot_new / rowsum_new,
            dot_old / rowsum_old,
            lik.exponent(s, t),
        );
    }

    let accept = log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp();
    if accept {
        state.set_theta(t, c, new);
    }
    accept
}

/// Logit-scale random-walk update of the background rate with Beta prior
/// and Jacobian p'(1-p')/(p(1-p)). Returns whether the proposal was accepted.
pub fn mh_update_p0(
    state: &mut ModelState,
    data: &CountData,
    lik: LikWeight,
    hp: &Hyperparams,
    rng: &mut impl Rng,
) -> bool {
    let old = state.p0();
    let logit = (old / (1.0 - old)).ln() + hp.mcmc.p0_step * sample_std_normal(rng);
    let new = 1.0 / (1.0 + (-logit).exp());
    if !(new > 0.0 && new < 1.0) {
        return false;
    }

    let mut log_ratio = ln_beta_pdf(new, hp.a00, hp.b00) - ln_beta_pdf(old, hp.a00, hp.b00)
        + (new * (1.0 - new)).ln()
        - (old * (1.0 - old)).ln();

    for t in 0..state.n_samples() {
        let rowsum = state.theta_row_sum(t);
        let theta0 = state.theta(t, 0);
        for s in 0..state.n_snvs() {
            let total = data.total(s, t);
            if total == 0 {
                continue;
            }
            let mut dot = 0.0;
            for j in 0..state.n_haplotypes() {
                if state.z().get(s, j) {
                    dot += state.theta(t, j + 1);
                }
            }
            log_ratio += cell_delta(
                data.n(s, t),
                total,
                (theta0 * new + dot) / rowsum,
                (theta0 * old + dot) / rowsum,
                lik.exponent(s, t),
            );
        }
    }

    let accept = log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp();
    if accept {
        state.set_p0(new);
    }
    accept
}

/// Statistics from one within-model sweep.
#[derive(Debug, Clone, Copy, Default)]
pub struct SweepStats {
    pub theta_accepted: usize,
    pub theta_proposed: usize,
    pub p0_accepted: bool,
    /// (accepted, proposed) when this sweep used joint row updates.
    pub row: Option<(usize, usize)>,
}

/// One within-model sweep: every abundance, the background rate, then every
/// inclusion indicator (per-entry Gibbs on even sweeps, joint row proposals
/// on odd sweeps). Abundances go first so that a chain started from a
/// structurally good Z with prior-drawn abundances adapts the weights before
/// the indicator conditionals can react to them.
pub fn sweep_within_model(
    state: &mut ModelState,
    data: &CountData,
    lik: LikWeight,
    hp: &Hyperparams,
    sweep_index: usize,
    rng: &mut impl Rng,
) -> SweepStats {
    let mut stats = SweepStats::default();
    for t in 0..state.n_samples() {
        for c in 0..=state.n_haplotypes() {
            stats.theta_accepted += mh_update_theta(state, data, lik, hp, t, c, rng) as usize;
            stats.theta_proposed += 1;
        }
    }
    stats.p0_accepted = mh_update_p0(state, data, lik, hp, rng);
    if sweep_index % 2 == 0 {
        for s in 0..state.n_snvs() {
            for c in 0..state.n_haplotypes() {
                gibbs_update_z(state, data, lik, hp, s, c, rng);
            }
        }
    } else {
        let mut accepted = 0;
        for s in 0..state.n_snvs() {
            accepted += mh_update_row(state, data, lik, hp, s, rng) as usize;
        }
        stats.row = Some((accepted, state.n_snvs()));
    }
    stats
}

/// Abundance-only passes that let prior-drawn weights adapt to the current Z
/// before any indicator update reacts to them. Run at chain start and at the
/// start of every RJ inner chain, where Z begins structurally informed but
/// theta begins at prior draws.
fn warm_up_theta(
    state: &mut ModelState,
    data: &CountData,
    lik: LikWeight,
    hp: &Hyperparams,
    passes: usize,
    rng: &mut impl Rng,
) {
    for _ in 0..passes {
        for t in 0..state.n_samples() {
            for c in 0..=state.n_haplotypes() {
                mh_update_theta(state, data, lik, hp, t, c, rng);
            }
        }
        mh_update_p0(state, data, lik, hp, rng);
    }
}

const THETA_WARMUP_PASSES: usize = 60;

/// Outcome of one reversible-jump attempt.
#[derive(Debug, Clone, Copy)]
pub struct RjOutcome {
    pub proposed_c: usize,
    pub accepted: bool,
    /// Set when the inner chain produced a non-finite density and the move
    /// was rejected outright.
    pub inner_failure: bool,
}

/// Trans-dimensional move. Proposes C' = C +- 1 (reflecting into a
/// self-proposal at 1 and c_max), builds a proposal state by running the
/// within-model kernels against the training-weighted likelihood from a
/// fresh heuristic initialization, and accepts on the test-likelihood ratio
/// together with the C prior and proposal asymmetry.
pub fn rj_move(
    state: &mut ModelState,
    data: &CountData,
    split: &TrainTestSplit,
    hp: &Hyperparams,
    rng: &mut impl Rng,
) -> RjOutcome {
    let c = state.n_haplotypes();
    debug_assert!(c >= 1 && c <= hp.c_max);

    // symmetric +-1 proposal; out-of-range proposals reflect to C itself
    let up = rng.random::<f64>() < 0.5;
    let c_new = if up {
        if c + 1 <= hp.c_max { c + 1 } else { c }
    } else if c > 1 {
        c - 1
    } else {
        c
    };
    // q(a -> b) for b = a-1, a, a+1 under the reflecting scheme
    let log_q = |from: usize, to: usize| -> f64 {
        if to == from {
            let mut q: f64 = 0.0;
            if from == 1 {
                q += 0.5;
            }
            if from == hp.c_max {
                q += 0.5;
            }
            q.ln()
        } else {
            0.5f64.ln()
        }
    };

    // proposal from the training-fraction posterior at c_new
    let mut proposal = initialize_state(data, c_new, hp, rng);
    warm_up_theta(
        &mut proposal,
        data,
        LikWeight::Train(split),
        hp,
        THETA_WARMUP_PASSES,
        rng,
    );
    for i in 0..hp.mcmc.rj_inner_iters {
        sweep_within_model(&mut proposal, data, LikWeight::Train(split), hp, i, rng);
    }

    let test_new = weighted_core_loglik(data, &proposal, LikWeight::Test(split));
    let test_old = weighted_core_loglik(data, state, LikWeight::Test(split));
    let prior_new = log_prior_c(c_new, hp.r).expect("valid C");
    let prior_old = log_prior_c(c, hp.r).expect("valid C");
    let log_ratio = test_new - test_old + prior_new - prior_old + log_q(c_new, c) - log_q(c, c_new);

    if std::env::var_os("HAPDECON_RJ_DEBUG").is_some() {
        eprintln!(
            "rj {c}->{c_new}: test_new={test_new:.1} test_old={test_old:.1} ratio={log_ratio:.1}"
        );
    }

    if !log_ratio.is_finite() && !(log_ratio == f64::NEG_INFINITY) {
        return RjOutcome {
            proposed_c: c_new,
            accepted: false,
            inner_failure: true,
        };
    }

    let accepted = log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp();
    if accepted {
        *state = proposal;
    }
    RjOutcome {
        proposed_c: c_new,
        accepted,
        inner_failure: false,
    }
}

/// Deterministic Z initialization from observed proportions plus prior draws
/// for theta and p0. Column j of Z includes SNV s when the mean VAF of s
/// clears the fraction (j + 0.5)/C of the largest mean VAF; SNVs with no
/// variant reads join no haplotype.
pub fn initialize_state(
    data: &CountData,
    c: usize,
    hp: &Hyperparams,
    rng: &mut impl Rng,
) -> ModelState {
    assert!(c >= 1, "C must be at least 1");
    let s_count = data.n_snvs();
    let t_count = data.n_samples();

    let vafs: Vec<f64> = (0..s_count).map(|s| data.mean_vaf(s)).collect();
    let v_max = vafs.iter().cloned().fold(0.0f64, f64::max);
    let mut z = FeatureMatrix::zeros(s_count, c);
    for s in 0..s_count {
        if vafs[s] <= 0.0 {
            continue;
        }
        for j in 0..c {
            let cut = (j as f64 + 0.5) / c as f64 * v_max;
            if vafs[s] >= cut {
                z.set(s, j, true);
            }
        }
    }

    let gamma_bg = GammaDist::new(hp.a0, 1.0).expect("valid shape");
    let gamma_hap = GammaDist::new(hp.a, 1.0).expect("valid shape");
    let mut theta = Vec::with_capacity(t_count * (c + 1));
    for _ in 0..t_count {
        theta.push(gamma_bg.sample(rng).max(THETA_MIN));
        for _ in 0..c {
            theta.push(gamma_hap.sample(rng).max(THETA_MIN));
        }
    }
    let p0 = BetaDist::new(hp.a00, hp.b00)
        .expect("valid shapes")
        .sample(rng)
        .clamp(1e-12, 1.0 - 1e-12);

    ModelState::new(z, theta, t_count, p0).expect("constructed state is valid")
}

/// Run one chain: alternating within-model sweeps plus randomly attempted
/// RJ moves, recording scalars each post-burn-in iteration and a state
/// snapshot every `thin` iterations. Deterministic given the seed.
pub fn run_chain(
    data: &CountData,
    hp: &Hyperparams,
    init: Option<ModelState>,
) -> Result<Trace> {
    hp.validate()?;
    let cfg = &hp.mcmc;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let split = draw_split(
        data.n_snvs(),
        data.n_samples(),
        cfg.train_shape1,
        cfg.train_shape2,
        &mut rng,
    )?;

    let mut state = match init {
        Some(st) => {
            if st.n_snvs() != data.n_snvs() || st.n_samples() != data.n_samples() {
                return Err(Error::dimension("initial state does not match data shape"));
            }
            if st.n_haplotypes() > hp.c_max {
                return Err(Error::argument("initial C exceeds c_max"));
            }
            st
        }
        None => initialize_state(data, cfg.init_c.min(hp.c_max), hp, &mut rng),
    };

    let lj0 = log_joint(data, &state, hp)?;
    if !lj0.is_finite() {
        return Err(Error::Init(format!(
            "joint log density at the initial state is {lj0}; check the data and hyperparameters"
        )));
    }

    // per-cell binomial coefficients, reused by every recorded iteration
    let coef: Vec<f64> = (0..data.n_snvs())
        .flat_map(|s| {
            (0..data.n_samples()).map(move |t| (s, t))
        })
        .map(|(s, t)| {
            let total = data.total(s, t);
            if total == 0 {
                0.0
            } else {
                ln_binom_coef(total as u64, data.n(s, t) as u64)
            }
        })
        .collect();
    let coef_full: f64 = coef.iter().sum();
    let coef_test: f64 = coef
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let (s, t) = (i / data.n_samples(), i % data.n_samples());
            (1.0 - split.train_frac(s, t)) * v
        })
        .sum();

    warm_up_theta(
        &mut state,
        data,
        LikWeight::Full,
        hp,
        THETA_WARMUP_PASSES,
        &mut rng,
    );

    let mut scalars = Vec::with_capacity(cfg.iterations - cfg.burn_in);
    let mut states = Vec::new();
    for iter in 0..cfg.iterations {
        let stats = sweep_within_model(&mut state, data, LikWeight::Full, hp, iter, &mut rng);
        let (rj_attempted, rj_accepted) = if rng.random::<f64>() < cfg.rj_prob {
            let outcome = rj_move(&mut state, data, &split, hp, &mut rng);
            if outcome.inner_failure {
                eprintln!(
                    "iteration {iter}: RJ proposal at C={} produced a non-finite \
                     density; move rejected",
                    outcome.proposed_c
                );
            }
            (true, outcome.accepted)
        } else {
            (false, false)
        };

        if iter >= cfg.burn_in {
            let core_full = weighted_core_loglik(data, &state, LikWeight::Full);
            let core_test = weighted_core_loglik(data, &state, LikWeight::Test(&split));
            let log_prior = log_joint_prior_part(&state, hp)?;
            scalars.push(ScalarRecord {
                iter,
                c: state.n_haplotypes(),
                log_joint: core_full + coef_full + log_prior,
                test_loglik: core_test + coef_test,
                row_accept: stats.row.map(|(a, n)| a as f64 / n as f64),
                theta_accept: stats.theta_accepted as f64 / stats.theta_proposed as f64,
                p0_accept: stats.p0_accepted,
                rj_attempted,
                rj_accepted,
            });
            if (iter - cfg.burn_in) % cfg.thin == 0 {
                states.push(StateSnapshot {
                    iter,
                    state: state.clone(),
                });
            }
        }
    }

    Ok(Trace {
        meta: TraceMeta {
            seed: cfg.seed,
            hyperparams_hash: hp.content_hash(),
            data_hash: data.content_hash(),
            n_snvs: data.n_snvs(),
            n_samples: data.n_samples(),
            iterations: cfg.iterations,
            burn_in: cfg.burn_in,
            thin: cfg.thin,
        },
        scalars,
        states,
    })
}

fn log_joint_prior_part(state: &ModelState, hp: &Hyperparams) -> Result<f64> {
    use crate::model::{log_prior_p0, log_prior_theta, log_prior_z_collapsed};
    Ok(log_prior_z_collapsed(state.z(), hp.alpha)?
        + log_prior_theta(state, hp.a, hp.a0)?
        + log_prior_p0(state.p0(), hp.a00, hp.b00)?
        + log_prior_c(state.n_haplotypes(), hp.r)?)
}

#[inline]
fn sample_std_normal(rng: &mut impl Rng) -> f64 {
    use rand_distr::StandardNormal;
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::success_prob;

    fn tiny_hp() -> Hyperparams {
        let mut hp = Hyperparams::simulation_preset();
        hp.alpha = 1.0;
        hp.a = 1.0;
        hp.a0 = 1.0;
        hp.a00 = 1.0;
        hp.b00 = 9.0;
        hp
    }

    fn toy_state(z: u8, theta: Vec<f64>, p0: f64) -> ModelState {
        let zm = FeatureMatrix::from_rows(&[vec![z]]).unwrap();
        ModelState::new(zm, theta, 1, p0).unwrap()
    }

    #[test]
    fn split_has_requested_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let split = draw_split(250, 400, 25.0, 975.0, &mut rng).unwrap();
        let cells = 250 * 400;
        let mean: f64 = (0..250)
            .flat_map(|s| (0..400).map(move |t| (s, t)))
            .map(|(s, t)| split.train_frac(s, t))
            .sum::<f64>()
            / cells as f64;
        // Var of Be(25,975) ~ 2.4e-5, so 3 SE over 1e5 cells ~ 5e-5
        let se = (0.025 * 0.975 / 1001.0_f64 / cells as f64).sqrt();
        assert!((mean - 0.025).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn split_symmetric_shapes_center_at_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let split = draw_split(100, 100, 5.0, 5.0, &mut rng).unwrap();
        let mean: f64 = (0..100)
            .flat_map(|s| (0..100).map(move |t| (s, t)))
            .map(|(s, t)| split.train_frac(s, t))
            .sum::<f64>()
            / 1e4;
        assert!((mean - 0.5).abs() < 0.01);
    }

    #[test]
    fn split_is_deterministic_given_seed() {
        let a = draw_split(5, 7, 25.0, 975.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = draw_split(5, 7, 25.0, 975.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.b, b.b);
    }

    #[test]
    fn split_rejects_bad_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(draw_split(1, 1, 0.0, 1.0, &mut rng).is_err());
        assert!(draw_split(1, 1, 1.0, -2.0, &mut rng).is_err());
    }

    #[test]
    fn gibbs_no_data_recovers_prior_predictive() {
        // with zero coverage the conditional reduces to the collapsed prior
        let data = CountData::from_matrices(2, 1, vec![0, 0], vec![0, 0]).unwrap();
        let hp = tiny_hp();
        let zm = FeatureMatrix::from_rows(&[vec![1], vec![0]]).unwrap();
        let mut state = ModelState::new(zm, vec![1.0, 1.0], 1, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // row 1 given row 0 fixed at 1: P(z=1) = (alpha/C + 1) / (S + alpha/C) = 2/3
        let mut ones = 0usize;
        let draws = 200_000;
        for _ in 0..draws {
            state.z_mut().set(1, 0, false);
            gibbs_update_z(&mut state, &data, LikWeight::Full, &hp, 1, 0, &mut rng);
            ones += state.z().get(1, 0) as usize;
        }
        let freq = ones as f64 / draws as f64;
        let expect = 2.0 / 3.0;
        let se = (expect * (1.0 - expect) / draws as f64).sqrt();
        assert!((freq - expect).abs() < 4.0 * se, "freq {freq}");
    }

    #[test]
    fn gibbs_dominated_by_overwhelming_data() {
        let data = CountData::from_matrices(1, 1, vec![999_000], vec![1_000_000]).unwrap();
        let hp = tiny_hp();
        let mut state = toy_state(0, vec![0.02, 0.98], 0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            gibbs_update_z(&mut state, &data, LikWeight::Full, &hp, 0, 0, &mut rng);
            assert!(state.z().get(0, 0), "inclusion must dominate");
        }
    }

    #[test]
    fn gibbs_matches_exact_two_point_conditional() {
        // S=1, T=1, C=1 with fixed theta and p0: enumerate both states
        let data = CountData::from_matrices(1, 1, vec![6], vec![10]).unwrap();
        let hp = tiny_hp();
        let mut state = toy_state(0, vec![0.5, 1.0], 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(5);

        // exact conditional: odds = alpha * lik(z=1)/lik(z=0)
        let lik = |z: u8| {
            let st = toy_state(z, vec![0.5, 1.0], 0.05);
            let p = success_prob(&st, 0, 0).unwrap();
            6.0 * p.ln() + 4.0 * (1.0 - p).ln()
        };
        let log_odds = hp.alpha.ln() + lik(1) - lik(0);
        let expect = 1.0 / (1.0 + (-log_odds).exp());

        let draws = 400_000;
        let mut ones = 0usize;
        for _ in 0..draws {
            gibbs_update_z(&mut state, &data, LikWeight::Full, &hp, 0, 0, &mut rng);
            ones += state.z().get(0, 0) as usize;
        }
        let freq = ones as f64 / draws as f64;
        let se = (expect * (1.0 - expect) / draws as f64).sqrt();
        assert!((freq - expect).abs() < 4.0 * se, "freq {freq} expect {expect}");
    }

    #[test]
    fn row_update_identity_proposal_accepts() {
        // flip probability so small that the empty flip set dominates; the
        // accept flag must be true whenever nothing flips
        let data = CountData::from_matrices(1, 1, vec![3], vec![10]).unwrap();
        let mut hp = tiny_hp();
        hp.mcmc.row_flip_prob = 1e-12;
        let mut state = toy_state(1, vec![0.5, 1.0], 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            assert!(mh_update_row(&mut state, &data, LikWeight::Full, &hp, 0, &mut rng));
            assert!(state.z().get(0, 0));
        }
    }

    #[test]
    fn row_update_satisfies_detailed_balance_on_two_state_toy() {
        let data = CountData::from_matrices(1, 1, vec![6], vec![10]).unwrap();
        let mut hp = tiny_hp();
        hp.mcmc.row_flip_prob = 0.35;
        let mut state = toy_state(0, vec![0.5, 1.0], 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(7);

        // stationary two-point law computed by direct enumeration
        let lik = |z: u8| {
            let st = toy_state(z, vec![0.5, 1.0], 0.05);
            let p = success_prob(&st, 0, 0).unwrap();
            6.0 * p.ln() + 4.0 * (1.0 - p).ln()
        };
        let w1 = (hp.alpha.ln() + lik(1) - lik(0)).exp();
        let pi1 = w1 / (1.0 + w1);

        let draws = 400_000usize;
        let mut count1 = 0usize;
        let mut trans_01 = 0usize;
        let mut trans_10 = 0usize;
        let mut prev = false;
        for _ in 0..draws {
            mh_update_row(&mut state, &data, LikWeight::Full, &hp, 0, &mut rng);
            let cur = state.z().get(0, 0);
            match (prev, cur) {
                (false, true) => trans_01 += 1,
                (true, false) => trans_10 += 1,
                _ => {}
            }
            count1 += cur as usize;
            prev = cur;
        }
        let freq1 = count1 as f64 / draws as f64;
        assert!((freq1 - pi1).abs() < 0.01, "freq {freq1} expect {pi1}");
        // flow balance: transitions in each direction must match closely
        let imbalance = (trans_01 as f64 - trans_10 as f64).abs();
        assert!(
            imbalance < 3.0 * (trans_01 as f64 + trans_10 as f64).sqrt() + 3.0,
            "{trans_01} vs {trans_10}"
        );
    }

    #[test]
    fn theta_update_with_tiny_step_always_accepts() {
        let data = CountData::from_matrices(1, 1, vec![3], vec![10]).unwrap();
        let mut hp = tiny_hp();
        hp.mcmc.theta_step = 1e-9;
        let mut state = toy_state(1, vec![0.5, 1.0], 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut accepted = 0;
        for _ in 0..500 {
            accepted += mh_update_theta(&mut state, &data, LikWeight::Full, &hp, 0, 1, &mut rng)
                as usize;
        }
        assert!(accepted >= 499, "{accepted}");
    }

    #[test]
    fn theta_update_recovers_gamma_prior_without_data() {
        let data = CountData::from_matrices(1, 1, vec![0], vec![0]).unwrap();
        let mut hp = tiny_hp();
        hp.a = 1.7;
        let mut state = toy_state(1, vec![0.5, 1.0], 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(9);

        let total = 400_000usize;
        let thin = 40usize;
        let mut kept = Vec::with_capacity(total / thin);
        for i in 0..total {
            mh_update_theta(&mut state, &data, LikWeight::Full, &hp, 0, 1, &mut rng);
            if i % thin == 0 {
                kept.push(state.theta(0, 1));
            }
        }
        kept.sort_by(|a, b| a.partial_cmp(b).unwrap());
        use statrs::distribution::{ContinuousCDF, Gamma};
        let gamma = Gamma::new(1.7, 1.0).unwrap();
        let n = kept.len() as f64;
        let mut d_max: f64 = 0.0;
        for (i, &x) in kept.iter().enumerate() {
            let cdf = gamma.cdf(x);
            let emp_hi = (i + 1) as f64 / n;
            let emp_lo = i as f64 / n;
            d_max = d_max.max((cdf - emp_hi).abs()).max((cdf - emp_lo).abs());
        }
        // KS critical value at the 1e-3 level; thinning keeps samples
        // close to independent
        let crit = 1.949 / n.sqrt();
        assert!(d_max < crit, "KS statistic {d_max} vs {crit}");
    }

    #[test]
    fn theta_update_matches_quadrature_posterior() {
        // one cell, z fixed at 1, only theta_1 updated: compare the long-run
        // distribution against numerical integration of the 1-d posterior
        let data = CountData::from_matrices(1, 1, vec![7], vec![20]).unwrap();
        let hp = tiny_hp();
        let theta0 = 0.8;
        let p0 = 0.03;
        let mut state = toy_state(1, vec![theta0, 1.0], p0);
        let mut rng = ChaCha8Rng::seed_from_u64(10);

        let total = 600_000usize;
        let thin = 20usize;
        let mut kept = Vec::with_capacity(total / thin);
        for i in 0..total {
            mh_update_theta(&mut state, &data, LikWeight::Full, &hp, 0, 1, &mut rng);
            if i % thin == 0 {
                kept.push(state.theta(0, 1));
            }
        }
        kept.sort_by(|a, b| a.partial_cmp(b).unwrap());

        // quadrature over theta_1 on a fine grid
        let log_target = |th: f64| -> f64 {
            let p = (theta0 * p0 + th) / (theta0 + th);
            ln_gamma_pdf(th, hp.a) + 7.0 * p.ln() + 13.0 * (1.0 - p).ln()
        };
        let grid_n = 400_000usize;
        let hi = 60.0;
        let step = hi / grid_n as f64;
        let mut weights = Vec::with_capacity(grid_n);
        let mut max_lw = f64::NEG_INFINITY;
        for i in 0..grid_n {
            let th = (i as f64 + 0.5) * step;
            let lw = log_target(th);
            max_lw = max_lw.max(lw);
            weights.push(lw);
        }
        let mut cum = Vec::with_capacity(grid_n);
        let mut acc = 0.0;
        for lw in &weights {
            acc += (lw - max_lw).exp();
            cum.push(acc);
        }
        let norm = acc;

        // sup distance between the empirical CDF and the quadrature CDF
        let mut d_max: f64 = 0.0;
        for (i, &x) in kept.iter().enumerate() {
            let gi = ((x / step) as usize).min(grid_n - 1);
            let cdf = cum[gi] / norm;
            let emp = (i + 1) as f64 / kept.len() as f64;
            d_max = d_max.max((cdf - emp).abs());
        }
        assert!(d_max < 0.02, "distribution distance {d_max}");
    }

    #[test]
    fn p0_update_recovers_beta_prior_without_data() {
        let data = CountData::from_matrices(1, 1, vec![0], vec![0]).unwrap();
        let hp = tiny_hp(); // a00=1, b00=9
        let mut state = toy_state(1, vec![0.5, 1.0], 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let total = 400_000usize;
        let thin = 40usize;
        let mut kept = Vec::with_capacity(total / thin);
        for i in 0..total {
            mh_update_p0(&mut state, &data, LikWeight::Full, &hp, &mut rng);
            if i % thin == 0 {
                kept.push(state.p0());
            }
        }
        kept.sort_by(|a, b| a.partial_cmp(b).unwrap());
        use statrs::distribution::{Beta, ContinuousCDF};
        let beta = Beta::new(1.0, 9.0).unwrap();
        let n = kept.len() as f64;
        let mut d_max: f64 = 0.0;
        for (i, &x) in kept.iter().enumerate() {
            let cdf = beta.cdf(x);
            d_max = d_max
                .max((cdf - (i + 1) as f64 / n).abs())
                .max((cdf - i as f64 / n).abs());
        }
        let crit = 1.949 / n.sqrt();
        assert!(d_max < crit, "KS statistic {d_max} vs {crit}");
    }

    #[test]
    fn p0_update_with_tiny_step_always_accepts() {
        let data = CountData::from_matrices(1, 1, vec![3], vec![10]).unwrap();
        let mut hp = tiny_hp();
        hp.mcmc.p0_step = 1e-9;
        let mut state = toy_state(1, vec![0.5, 1.0], 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            assert!(mh_update_p0(&mut state, &data, LikWeight::Full, &hp, &mut rng));
        }
    }

    #[test]
    fn rj_degenerate_support_refreshes_in_place() {
        // c_max = 1: every proposal is C itself; with no data the test
        // likelihood is flat so the move is always accepted
        let data = CountData::from_matrices(3, 2, vec![0; 6], vec![0; 6]).unwrap();
        let mut hp = tiny_hp();
        hp.c_max = 1;
        hp.mcmc.rj_inner_iters = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let split = draw_split(3, 2, 25.0, 975.0, &mut rng).unwrap();
        let mut state = initialize_state(&data, 1, &hp, &mut rng);
        for _ in 0..20 {
            let before_p0 = state.p0();
            let out = rj_move(&mut state, &data, &split, &hp, &mut rng);
            assert_eq!(out.proposed_c, 1);
            assert!(out.accepted);
            assert_eq!(state.n_haplotypes(), 1);
            // accepted refresh replaces the continuous part of the state
            assert_ne!(state.p0(), before_p0);
        }
    }

    #[test]
    fn initialize_all_zero_counts_gives_empty_z() {
        let data = CountData::from_matrices(4, 3, vec![0; 12], vec![50; 12]).unwrap();
        let hp = tiny_hp();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let state = initialize_state(&data, 3, &hp, &mut rng);
        for s in 0..4 {
            for c in 0..3 {
                assert!(!state.z().get(s, c));
            }
        }
    }

    #[test]
    fn initialize_z_is_deterministic_given_data() {
        let data =
            CountData::from_matrices(3, 2, vec![50, 48, 25, 26, 1, 0], vec![50; 6]).unwrap();
        let hp = tiny_hp();
        let a = initialize_state(&data, 2, &hp, &mut ChaCha8Rng::seed_from_u64(1));
        let b = initialize_state(&data, 2, &hp, &mut ChaCha8Rng::seed_from_u64(999));
        assert_eq!(a.z(), b.z());
        // high-VAF SNVs belong to every column, noise SNVs to none
        assert!(a.z().get(0, 0) && a.z().get(0, 1));
        assert!(!a.z().get(2, 1));
    }

    #[test]
    fn run_chain_is_deterministic_given_seed() {
        let data =
            CountData::from_matrices(4, 2, vec![10, 2, 8, 1, 9, 0, 3, 3], vec![20; 8]).unwrap();
        let mut hp = tiny_hp();
        hp.c_max = 3;
        hp.mcmc.iterations = 300;
        hp.mcmc.burn_in = 100;
        hp.mcmc.thin = 10;
        hp.mcmc.rj_prob = 0.3;
        hp.mcmc.rj_inner_iters = 5;
        hp.mcmc.seed = 77;
        let a = run_chain(&data, &hp, None).unwrap();
        let b = run_chain(&data, &hp, None).unwrap();
        assert_eq!(a.scalars.len(), b.scalars.len());
        for (x, y) in a.scalars.iter().zip(&b.scalars) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn run_chain_respects_c_max() {
        let data = CountData::from_matrices(2, 1, vec![5, 0], vec![10, 10]).unwrap();
        let mut hp = tiny_hp();
        hp.c_max = 2;
        hp.mcmc.iterations = 200;
        hp.mcmc.burn_in = 50;
        hp.mcmc.rj_prob = 1.0;
        hp.mcmc.rj_inner_iters = 2;
        let trace = run_chain(&data, &hp, None).unwrap();
        assert!(trace.c_values().all(|c| (1..=2).contains(&c)));
    }

    #[test]
    fn run_chain_rejects_bad_config() {
        let data = CountData::from_matrices(1, 1, vec![1], vec![2]).unwrap();
        let mut hp = tiny_hp();
        hp.mcmc.burn_in = hp.mcmc.iterations;
        assert!(run_chain(&data, &hp, None).is_err());
    }

    #[test]
    fn no_data_sweeps_recover_feature_count_prior() {
        // with alpha/C = 1 the collapsed prior over a column's count m is
        // uniform on {0..S}; run full sweeps (Gibbs and row proposals both)
        // against empty data and check the marginal of m
        let (s_count, c) = (6usize, 2usize);
        let data = CountData::from_matrices(s_count, 1, vec![0; 6], vec![0; 6]).unwrap();
        let mut hp = tiny_hp();
        hp.alpha = 2.0; // alpha / C = 1
        let zm = FeatureMatrix::zeros(s_count, c);
        let mut state = ModelState::new(zm, vec![1.0; c + 1], 1, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);

        let sweeps = 120_000usize;
        let mut counts = vec![0usize; s_count + 1];
        let mut series: Vec<usize> = Vec::with_capacity(sweeps);
        for i in 0..sweeps {
            sweep_within_model(&mut state, &data, LikWeight::Full, &hp, i, &mut rng);
            let m = state.z().col_sum(0);
            counts[m] += 1;
            series.push(m);
        }
        let expect = 1.0 / (s_count + 1) as f64;
        let batches = 100usize;
        let len = sweeps / batches;
        for (m, &count) in counts.iter().enumerate() {
            let freq = count as f64 / sweeps as f64;
            let mut var = 0.0;
            for b in 0..batches {
                let bm = series[b * len..(b + 1) * len]
                    .iter()
                    .filter(|&&v| v == m)
                    .count() as f64
                    / len as f64;
                var += (bm - freq) * (bm - freq);
            }
            let se = (var / (batches - 1) as f64 / batches as f64).sqrt();
            assert!(
                (freq - expect).abs() <= 4.0 * se.max(5e-4),
                "P(m={m}) = {freq:.4}, expected {expect:.4} (se {se:.5})"
            );
        }
    }

    #[test]
    fn split_exponents_partition_full_likelihood() {
        let data =
            CountData::from_matrices(3, 2, vec![4, 0, 9, 2, 7, 5], vec![10, 3, 12, 9, 9, 5])
                .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let split = draw_split(3, 2, 25.0, 975.0, &mut rng).unwrap();
        let zm = FeatureMatrix::from_rows(&[vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap();
        let state = ModelState::new(zm, vec![0.4, 1.0, 0.7, 1.1, 0.2, 0.9], 2, 0.02).unwrap();
        let full = weighted_core_loglik(&data, &state, LikWeight::Full);
        let train = weighted_core_loglik(&data, &state, LikWeight::Train(&split));
        let test = weighted_core_loglik(&data, &state, LikWeight::Test(&split));
        assert!((full - train - test).abs() < 1e-10);
    }
}
