//! Exact limit objects on the normalized scale.
//!
//! Tail probabilities are measured through the normalizing functions: a level
//! `x` corresponds to the thresholds `U_F(x) p` and `U_G(x) q`, so that
//! `x * P[...]` converges. The limits evaluated here:
//!
//! * `mu_bar`: base measure of `[p, inf] x [q, inf]` for one pair `(X, Y)`,
//!   equal to `w_bar * min(p^-alpha, q^-beta)`.
//! * `corner_mass_product`: the same corner for the weighted pair
//!   `(Theta X, Delta Y)`, which picks up the joint factor:
//!   `E[g(Theta, Delta) * min((Theta/p)^alpha, (Delta/q)^beta)] * w_bar`.
//! * `mu_hat_product_box`: measure of the complement of `[0, p) x [0, q)`,
//!   assembled by inclusion-exclusion from the two weighted marginal terms
//!   minus the corner.
//! * `mu_hat_sum_box` / `corner_mass_sum`: per-index sums of the above for a
//!   finite horizon of pairs.
//! * `mu_tilde_stopped_box`: the randomly stopped sum multiplies the one-pair
//!   box by the expected number of terms.
//!
//! The corner integrand has a kink along `delta = q (theta/p)^(alpha/beta)`.
//! Every integration below splits at that curve, so adaptive quadrature only
//! ever sees smooth pieces and the homogeneity identity
//! `corner(lambda^(1/alpha) p, lambda^(1/beta) q) = corner(p, q) / lambda`
//! holds to rounding error, not just to quadrature tolerance.

use std::cell::Cell;

use serde::Serialize;

use crate::dep_families::{DependenceFamily, FamilySequence, StoppingLaw, WeightLaw};
use crate::error::{Error, Result};
use crate::quadrature::Quadrature;

/// The three numbers that pin down the base limit measure of one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitMeasureSpec {
    pub alpha: f64,
    pub beta: f64,
    pub w_bar: f64,
}

impl LimitMeasureSpec {
    pub fn of(fam: &DependenceFamily) -> Self {
        LimitMeasureSpec { alpha: fam.alpha(), beta: fam.beta(), w_bar: fam.w_bar() }
    }

    /// Measure of `[x, inf] x [y, inf]` under the base limit measure.
    pub fn mu_bar(&self, x: f64, y: f64) -> Result<f64> {
        check_coord("x", x)?;
        check_coord("y", y)?;
        Ok(self.w_bar * x.powf(-self.alpha).min(y.powf(-self.beta)))
    }
}

fn check_coord(name: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::invalid(name, format!("corner coordinate must be finite and > 0, got {v}")));
    }
    Ok(())
}

/// Base measure of `[x, inf] x [y, inf]` for one family.
pub fn mu_bar(fam: &DependenceFamily, x: f64, y: f64) -> Result<f64> {
    LimitMeasureSpec::of(fam).mu_bar(x, y)
}

/// Joint tail mass of the weighted pair at the corner `[p, inf] x [q, inf]`:
/// the limit of `x * P[Theta X > U_F(x) p, Delta Y > U_G(x) q]`, equal to
/// `w_bar * E[g(Theta, Delta) * min((Theta/p)^alpha, (Delta/q)^beta)]`.
pub fn corner_mass_product(fam: &DependenceFamily, p: f64, q: f64) -> Result<f64> {
    check_coord("p", p)?;
    check_coord("q", q)?;
    let w_bar = fam.w_bar();
    if w_bar == 0.0 {
        return Ok(0.0);
    }
    let (i1, i2) = corner_components(fam, p, q)?;
    Ok(w_bar * (p.powf(-fam.alpha()) * i1 + q.powf(-fam.beta()) * i2))
}

/// Purely relative budget: subdivision decisions are then invariant when the
/// integrand is rescaled, which `corner_mass_product` relies on.
fn corner_quadrature() -> Quadrature {
    Quadrature { abs_tol: 0.0, rel_tol: 1e-13, max_depth: 60 }
}

/// The two halves of the corner expectation, split along the exchange curve
/// `delta_star(theta) = q (theta/p)^(alpha/beta)`:
///
/// * `I1 = E[g Theta^alpha ; Delta >= delta_star(Theta)]`
/// * `I2 = E[g Delta^beta  ; Delta <  delta_star(Theta)]`
///
/// The scale factors `p^-alpha`, `q^-beta` stay outside. The curve itself is
/// invariant under `(p, q) -> (l^(1/alpha) p, l^(1/beta) q)`, so both
/// integrals are too, and the homogeneity of the corner reduces to a single
/// explicit power each: exact to rounding, independent of quadrature
/// tolerances.
fn corner_components(fam: &DependenceFamily, p: f64, q: f64) -> Result<(f64, f64)> {
    let alpha = fam.alpha();
    let beta = fam.beta();
    let i1 = split_expect(fam, p, q, Region::Above, |t, _| t.powf(alpha))?;
    let i2 = split_expect(fam, p, q, Region::Below, |_, d| d.powf(beta))?;
    Ok((i1, i2))
}

/// Side of the exchange curve an expectation is restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Region {
    /// `delta >= delta_star(theta)`: the x branch of the minimum is active.
    Above,
    /// `delta < delta_star(theta)`: the y branch is active.
    Below,
}

/// `E[g(Theta, Delta) f(Theta, Delta) ; (Theta, Delta) in region]` where the
/// region boundary is the exchange curve of the `(p, q)` corner. All the
/// integration kinks introduced by the region indicator are split explicitly,
/// so adaptive quadrature only sees smooth pieces.
pub(crate) fn split_expect<F>(
    fam: &DependenceFamily,
    p: f64,
    q: f64,
    region: Region,
    f: F,
) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    let alpha = fam.alpha();
    let beta = fam.beta();
    let delta_star = move |t: f64| q * (t / p).powf(alpha / beta);
    // Inverse curve: the theta at which a fixed delta switches sides.
    let theta_star = move |d: f64| p * (d / q).powf(beta / alpha);

    let quad = corner_quadrature();
    match (fam.theta_law().clone(), fam.delta_law().clone()) {
        (WeightLaw::Discrete { atoms: ta }, WeightLaw::Discrete { atoms: da }) => {
            let mut total = 0.0;
            for &(t, pt) in &ta {
                let cut = delta_star(t);
                for &(d, pd) in &da {
                    let inside = match region {
                        Region::Above => d >= cut,
                        Region::Below => d < cut,
                    };
                    if inside {
                        total += pt * pd * fam.g_raw(t, d) * f(t, d);
                    }
                }
            }
            Ok(total)
        }
        (WeightLaw::Discrete { atoms: ta }, WeightLaw::Uniform { lo, hi }) => {
            let density = 1.0 / (hi - lo);
            let mut total = 0.0;
            for &(t, pt) in &ta {
                let cut = delta_star(t).clamp(lo, hi);
                let (a, b) = match region {
                    Region::Above => (cut, hi),
                    Region::Below => (lo, cut),
                };
                total += pt * quad.integrate(|d| fam.g_raw(t, d) * f(t, d) * density, a, b)?;
            }
            Ok(total)
        }
        (WeightLaw::Uniform { lo, hi }, WeightLaw::Discrete { atoms: da }) => {
            let density = 1.0 / (hi - lo);
            // Each atom switches sides at its own theta; between switch points
            // the atom set in the region is fixed and the integrand smooth.
            let kinks: Vec<f64> = da.iter().map(|&(d, _)| theta_star(d)).collect();
            let integrand = |t: f64| {
                let cut = delta_star(t);
                let mut acc = 0.0;
                for &(d, pd) in &da {
                    let inside = match region {
                        Region::Above => d >= cut,
                        Region::Below => d < cut,
                    };
                    if inside {
                        acc += pd * fam.g_raw(t, d) * f(t, d);
                    }
                }
                acc * density
            };
            quad.integrate_split(integrand, lo, hi, &kinks)
        }
        (WeightLaw::Uniform { lo: tl, hi: th }, WeightLaw::Uniform { lo: dl, hi: dh }) => {
            let td = 1.0 / (th - tl);
            let dd = 1.0 / (dh - dl);
            let inner_failed = Cell::new(false);
            let outer = |t: f64| {
                let cut = delta_star(t).clamp(dl, dh);
                let (a, b) = match region {
                    Region::Above => (cut, dh),
                    Region::Below => (dl, cut),
                };
                match quad.integrate(|d| fam.g_raw(t, d) * f(t, d) * dd, a, b) {
                    Ok(v) => v * td,
                    Err(_) => {
                        inner_failed.set(true);
                        0.0
                    }
                }
            };
            // The clamp kinks where the curve crosses the delta support edges.
            let kinks = [if dl > 0.0 { theta_star(dl) } else { tl }, theta_star(dh)];
            let v = quad.integrate_split(outer, tl, th, &kinks)?;
            if inner_failed.get() {
                return Err(Error::QuadratureFailure("inner corner integral did not converge".into()));
            }
            Ok(v)
        }
    }
}

/// Limit mass of the complement of the open box `[0, p) x [0, q)` for one
/// weighted pair: the two marginal terms minus the corner counted twice.
pub fn mu_hat_product_box(fam: &DependenceFamily, p: f64, q: f64) -> Result<f64> {
    check_coord("p", p)?;
    check_coord("q", q)?;
    let x_term = fam.theta_moment(fam.alpha())? / p.powf(fam.alpha());
    let y_term = fam.delta_moment(fam.beta())? / q.powf(fam.beta());
    Ok(x_term + y_term - corner_mass_product(fam, p, q)?)
}

/// Sum of per-index corners over a finite horizon.
pub fn corner_mass_sum(seq: &FamilySequence, p: f64, q: f64) -> Result<f64> {
    let mut total = 0.0;
    for fam in seq.iter() {
        total += corner_mass_product(fam, p, q)?;
    }
    Ok(total)
}

/// Box mass for the pair of randomly weighted sums over a finite horizon:
/// per-index terms add because distinct indices never share a tail event.
pub fn mu_hat_sum_box(seq: &FamilySequence, p: f64, q: f64) -> Result<f64> {
    let mut total = 0.0;
    for fam in seq.iter() {
        total += mu_hat_product_box(fam, p, q)?;
    }
    Ok(total)
}

/// Box mass for sums stopped at an independent random number of terms, all
/// indices sharing one family: the one-pair box scales by E[N].
pub fn mu_tilde_stopped_box(
    fam: &DependenceFamily,
    stopping: &StoppingLaw,
    p: f64,
    q: f64,
) -> Result<f64> {
    Ok(stopping.mean() * mu_hat_product_box(fam, p, q)?)
}
