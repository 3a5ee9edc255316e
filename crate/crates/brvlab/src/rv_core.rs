//! Regularly varying marginals with exact Pareto tails.
//!
//! A marginal is the Pareto law with survival function
//!
//! ```text
//! survival(y) = (sigma / y)^alpha   for y >= sigma,   1 otherwise,
//! ```
//!
//! so the tail is regularly varying with index -alpha and the quantile-type
//! normalization `U(x) = (1/survival)^{<-}(x) = sigma * x^(1/alpha)` is available
//! in closed form. Everything downstream scales thresholds by `U`.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Pareto marginal: exact power tail, scale `sigma`, index `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RVMarginal {
    alpha: f64,
    sigma: f64,
}

impl RVMarginal {
    pub fn new(alpha: f64, sigma: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::invalid("alpha", format!("must be finite and > 0, got {alpha}")));
        }
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::invalid("sigma", format!("must be finite and > 0, got {sigma}")));
        }
        Ok(RVMarginal { alpha, sigma })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Tail probability P[X > y]. Total on finite arguments: returns 1 below the scale.
    pub fn survival(&self, y: f64) -> f64 {
        if y <= self.sigma {
            1.0
        } else {
            (self.sigma / y).powf(self.alpha)
        }
    }

    /// Distribution function P[X <= y].
    pub fn cdf(&self, y: f64) -> f64 {
        1.0 - self.survival(y)
    }

    /// Normalization `U(x) = sigma * x^(1/alpha)`, the generalized inverse of
    /// `1/survival`. Satisfies `1/survival(U(x)) = x` exactly for `x >= 1`.
    pub fn normalization_u(&self, x: f64) -> Result<f64> {
        if !x.is_finite() || x <= 0.0 {
            return Err(Error::invalid("x", format!("normalization requires x > 0, got {x}")));
        }
        Ok(self.sigma * x.powf(1.0 / self.alpha))
    }

    /// Upper and lower Matuszewska indices of the tail. For an exact power tail
    /// both equal `alpha`.
    pub fn matuszewska_indices(&self) -> (f64, f64) {
        (self.alpha, self.alpha)
    }

    /// Quantile function: the unique y with `cdf(y) = u` for `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        debug_assert!((0.0..1.0).contains(&u));
        self.sigma * (1.0 - u).powf(-1.0 / self.alpha)
    }

    /// Draw one value. Inversion of the survival function; `1 - gen::<f64>()`
    /// lies in (0, 1] so the draw is finite.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        self.sigma * (1.0 - u).powf(-1.0 / self.alpha)
    }

    /// E[X 1{X > t}], finite only for `alpha > 1`. For `t <= sigma` this is the
    /// full mean `alpha * sigma / (alpha - 1)`.
    pub fn tail_mean(&self, t: f64) -> Result<f64> {
        if self.alpha <= 1.0 {
            return Err(Error::AssumptionViolation(format!(
                "tail mean requires alpha > 1, got alpha = {}",
                self.alpha
            )));
        }
        let t = t.max(self.sigma);
        Ok(self.alpha / (self.alpha - 1.0) * t * self.survival(t))
    }
}

/// Classical Hill estimator of the tail index from the top `k` order statistics:
/// the reciprocal of the mean of `ln X_(i) - ln X_(k+1)`, `i = 1..k`, where
/// `X_(1) >= X_(2) >= ...`. Consistent for `alpha` on Pareto input.
pub fn hill_estimate(samples: &[f64], k: usize) -> Result<f64> {
    let n = samples.len();
    if k < 2 || k >= n {
        return Err(Error::invalid("k", format!("need 2 <= k < len (k = {k}, len = {n})")));
    }
    if samples.iter().any(|&v| !v.is_finite() || v <= 0.0) {
        return Err(Error::invalid("samples", "all samples must be finite and > 0"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    let baseline = sorted[k].ln();
    let mean: f64 = sorted[..k].iter().map(|v| v.ln() - baseline).sum::<f64>() / k as f64;
    if mean <= 0.0 {
        return Err(Error::DegenerateEstimate(
            "top-k log-spacings are all zero; tail index is unidentified".into(),
        ));
    }
    Ok(1.0 / mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn survival_is_exact_power() {
        let m = RVMarginal::new(2.0, 1.0).unwrap();
        assert!((m.survival(10.0) - 1e-2).abs() < 1e-17);
        assert_eq!(m.survival(0.5), 1.0);
        let m = RVMarginal::new(3.0, 2.0).unwrap();
        assert!((m.survival(20.0) - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn normalization_inverts_reciprocal_survival() {
        let m = RVMarginal::new(2.0, 1.0).unwrap();
        assert!((m.normalization_u(100.0).unwrap() - 10.0).abs() < 1e-12);
        for &alpha in &[0.7, 1.0, 2.0, 3.5] {
            for &sigma in &[0.5, 1.0, 4.0] {
                let m = RVMarginal::new(alpha, sigma).unwrap();
                for &x in &[1.0, 3.0, 1e3, 1e8] {
                    let u = m.normalization_u(x).unwrap();
                    assert!(
                        (x * m.survival(u) - 1.0).abs() <= 1e-12,
                        "alpha={alpha} sigma={sigma} x={x}"
                    );
                }
            }
        }
    }

    #[test]
    fn normalization_rejects_nonpositive() {
        let m = RVMarginal::new(2.0, 1.0).unwrap();
        assert!(m.normalization_u(0.0).is_err());
        assert!(m.normalization_u(-3.0).is_err());
    }

    #[test]
    fn normalization_scales_with_sigma_and_is_monotone() {
        let a = RVMarginal::new(1.7, 1.0).unwrap();
        let b = RVMarginal::new(1.7, 3.0).unwrap();
        let mut prev = 0.0;
        for &x in &[1.0, 2.0, 10.0, 1e4] {
            let ua = a.normalization_u(x).unwrap();
            let ub = b.normalization_u(x).unwrap();
            assert!((ub / ua - 3.0).abs() < 1e-12);
            assert!(ua > prev);
            prev = ua;
        }
    }

    #[test]
    fn matuszewska_indices_collapse_to_alpha() {
        let m = RVMarginal::new(2.5, 1.0).unwrap();
        assert_eq!(m.matuszewska_indices(), (2.5, 2.5));
    }

    #[test]
    fn constructor_rejects_bad_parameters() {
        assert!(RVMarginal::new(0.0, 1.0).is_err());
        assert!(RVMarginal::new(-1.0, 1.0).is_err());
        assert!(RVMarginal::new(2.0, 0.0).is_err());
        assert!(RVMarginal::new(f64::NAN, 1.0).is_err());
        assert!(RVMarginal::new(2.0, f64::INFINITY).is_err());
    }

    #[test]
    fn tail_mean_closed_form() {
        let m = RVMarginal::new(2.0, 1.0).unwrap();
        // E[X 1{X>t}] = alpha/(alpha-1) t^{1-alpha} sigma^alpha
        assert!((m.tail_mean(10.0).unwrap() - 0.2).abs() < 1e-15);
        assert!((m.tail_mean(0.5).unwrap() - 2.0).abs() < 1e-15);
        assert!(RVMarginal::new(1.0, 1.0).unwrap().tail_mean(10.0).is_err());
    }

    #[test]
    fn hill_recovers_alpha_on_pareto_sample() {
        let m = RVMarginal::new(2.0, 1.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_0001);
        let samples: Vec<f64> = (0..1_000_000).map(|_| m.sample(&mut rng)).collect();
        let est = hill_estimate(&samples, 10_000).unwrap();
        assert!((est - 2.0).abs() <= 0.1, "hill estimate {est}");
    }

    #[test]
    fn hill_on_geometric_grid_matches_order_statistic_formula() {
        // y_i = 2^i: every log-spacing from the (k+1)-th largest is a multiple of
        // ln 2, the mean is (k+1) ln2 / 2, so the estimate is 2 / ((k+1) ln 2).
        let samples: Vec<f64> = (1..=12).map(|i| (2.0f64).powi(i)).collect();
        for k in [2usize, 3, 6] {
            let est = hill_estimate(&samples, k).unwrap();
            let expected = 2.0 / ((k as f64 + 1.0) * std::f64::consts::LN_2);
            assert!((est - expected).abs() < 1e-12, "k={k}: {est} vs {expected}");
        }
    }

    #[test]
    fn hill_on_unit_alpha() {
        let m = RVMarginal::new(1.0, 1.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_0002);
        let n = 200_000;
        let samples: Vec<f64> = (0..n).map(|_| m.sample(&mut rng)).collect();
        let est = hill_estimate(&samples, n - 1).unwrap();
        assert!((est - 1.0).abs() <= 0.1, "hill estimate {est}");
    }

    #[test]
    fn hill_rejects_bad_k_and_bad_samples() {
        let samples = vec![1.0, 2.0, 3.0, 4.0];
        assert!(hill_estimate(&samples, 1).is_err());
        assert!(hill_estimate(&samples, 4).is_err());
        assert!(hill_estimate(&[1.0, -2.0, 3.0], 2).is_err());
        assert!(hill_estimate(&[5.0, 5.0, 5.0, 5.0], 2).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        let m = RVMarginal::new(1.5, 2.0).unwrap();
        for &u in &[0.0, 0.3, 0.9, 0.999] {
            let y = m.quantile(u);
            assert!((m.cdf(y) - u).abs() < 1e-12);
        }
    }
}
