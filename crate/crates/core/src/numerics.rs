//! Log-space density primitives shared across the crate.
//!
//! Everything is evaluated through `ln_gamma` so that counts at sequencing
//! depth never overflow.

use statrs::function::gamma::ln_gamma;

/// log Beta(a, b) = lnΓ(a) + lnΓ(b) − lnΓ(a+b)
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// log C(n, k) for integer counts.
pub fn ln_binom_coef(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// log Binom(k; n, p), including the coefficient. n = 0 contributes 0.
pub fn ln_binom_pmf(k: u64, n: u64, p: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    ln_binom_coef(n, k) + ln_binom_core(k, n, p)
}

/// k·ln p + (n−k)·ln(1−p): the part of the binomial log-pmf that depends on p.
/// Ratios of pmfs at fixed (k, n) only need this term.
pub fn ln_binom_core(k: u64, n: u64, p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let mut v = 0.0;
    if k > 0 {
        v += k as f64 * p.ln();
    }
    if k < n {
        v += (n - k) as f64 * (-p).ln_1p();
    }
    v
}

/// log density of Gamma(shape, rate = 1) at x > 0.
pub fn ln_gamma_pdf(x: f64, shape: f64) -> f64 {
    debug_assert!(x > 0.0 && shape > 0.0);
    (shape - 1.0) * x.ln() - x - ln_gamma(shape)
}

/// log density of Beta(a, b) at x ∈ (0, 1).
pub fn ln_beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    debug_assert!(x > 0.0 && x < 1.0);
    (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binom_pmf_matches_direct_evaluation() {
        // 10 * 0.5^5
        let expect = (10.0f64 * 0.5f64.powi(5)).ln();
        assert!((ln_binom_pmf(3, 5, 0.5) - expect).abs() < 1e-12);
    }

    #[test]
    fn beta_pdf_uniform_is_zero() {
        assert!(ln_beta_pdf(0.37, 1.0, 1.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_pdf_unit_exponential() {
        // Gamma(1,1) is Exp(1): log f(x) = -x
        assert!((ln_gamma_pdf(2.5, 1.0) + 2.5).abs() < 1e-12);
    }

    #[test]
    fn binom_pmf_sums_to_one() {
        let n = 17;
        let p = 0.23;
        let total: f64 = (0..=n).map(|k| ln_binom_pmf(k, n, p).exp()).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }
}
