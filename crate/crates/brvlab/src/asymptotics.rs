//! Closed-form limit coefficients for the downstream risk quantities.
//!
//! Everything here is a finite expectation over the weight laws, evaluated by
//! exact summation or quadrature. The simulation side of each formula lives
//! in `risk_sim`; tests compare the two.

use serde::Serialize;

use crate::dep_families::{DependenceFamily, FamilySequence, WeightLaw};
use crate::error::{Error, Result};
use crate::limit_measure::{
    corner_mass_product, corner_mass_sum, mu_hat_sum_box, split_expect, Region,
};
use crate::rv_core::RVMarginal;

/// E[W^alpha h(W)]: the constant by which an independent bounded weight
/// rescales a regularly varying tail, generalized to carry the conditional
/// tail factor `h`. Exact for discrete laws, adaptive quadrature otherwise.
pub fn breiman_constant<H>(law: &WeightLaw, h: H, alpha: f64) -> Result<f64>
where
    H: Fn(f64) -> f64,
{
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::invalid("alpha", format!("must be finite and > 0, got {alpha}")));
    }
    law.expect(|w| w.powf(alpha) * h(w))
}

/// Limit of the conditional tail ratio `P[X-sum exceeds p | Y-sum exceeds q]`
/// at matched levels: the summed corner against the summed conditioning tail.
pub fn cr_limit(seq: &FamilySequence, p: f64, q: f64) -> Result<f64> {
    let beta = seq.beta();
    let corner = corner_mass_sum(seq, p, q)?;
    let mut conditioning = 0.0;
    for fam in seq.iter() {
        conditioning += fam.delta_moment(beta)?;
    }
    Ok(q.powf(beta) * corner / conditioning)
}

/// The ruin events over a finite horizon with capital split `(p, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RuinKind {
    /// Both lines ruined somewhere in the horizon, not necessarily together.
    And,
    /// At least one line ruined.
    Or,
    /// Both lines below zero at the same instant.
    Simultaneous,
}

/// First-order ruin approximation `psi(x) ~ coefficient * survival(x)` where
/// `survival` is the common claim marginal. The `And` and `Simultaneous`
/// events share one coefficient: at this order, once both lines are ruined
/// the culprit is a single joint claim, which ruins them at the same instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuinAsymptote {
    pub kind: RuinKind,
    pub coefficient: f64,
    marginal: RVMarginal,
}

impl RuinAsymptote {
    pub fn psi(&self, x: f64) -> f64 {
        self.coefficient * self.marginal.survival(x)
    }
}

/// Ruin coefficient over the horizon for initial capital `x` split as
/// `(p x, q x)`. Needs identically distributed claims on both lines and a
/// genuine two-line split.
pub fn ruin_asymptote(
    seq: &FamilySequence,
    p: f64,
    q: f64,
    kind: RuinKind,
) -> Result<RuinAsymptote> {
    if seq.marginal_x() != seq.marginal_y() {
        return Err(Error::AssumptionViolation(
            "ruin asymptotics need the same claim marginal on both lines".into(),
        ));
    }
    for (name, v) in [("p", p), ("q", q)] {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::invalid(name, format!("capital share must be finite and > 0, got {v}")));
        }
    }
    if (p + q - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("p", format!("capital shares must sum to 1, got {}", p + q)));
    }
    let coefficient = match kind {
        RuinKind::And | RuinKind::Simultaneous => corner_mass_sum(seq, p, q)?,
        RuinKind::Or => mu_hat_sum_box(seq, p, q)?,
    };
    Ok(RuinAsymptote { kind, coefficient, marginal: *seq.marginal_x() })
}

/// Scale factor of the joint expected shortfall at matched tail levels,
/// relative to the marginal quantile `U_F(x)`:
///
/// `E[X | X > U_F(x) , Y > U_G(x)] ~ factor * U_F(x)`.
///
/// The factor is `1 + integral of corner(s, 1) over s in [1, inf) divided by
/// corner(1, 1)`. The inner integral over `s` collapses in closed form, so
/// only a weight-law expectation remains, split along the same exchange curve
/// as the corner itself:
///
/// * on `delta >= delta_star(theta)` the x branch integrates to
///   `theta^alpha / (alpha - 1)`,
/// * below it, to `alpha/(alpha-1) theta delta^(beta - beta/alpha) - delta^beta`.
///
/// Needs `alpha > 1` (a finite claim mean) and a family with positive joint
/// tail mass at the corner.
pub fn jes_factor(fam: &DependenceFamily) -> Result<f64> {
    let alpha = fam.alpha();
    let beta = fam.beta();
    if alpha <= 1.0 {
        return Err(Error::AssumptionViolation(
            "joint shortfall needs alpha > 1; the claim mean is infinite".into(),
        ));
    }
    let corner11 = corner_mass_product(fam, 1.0, 1.0)?;
    if corner11 <= 0.0 {
        return Err(Error::AssumptionViolation(
            "family has no joint tail mass at the corner; the shortfall ratio degenerates".into(),
        ));
    }
    let k = alpha / (alpha - 1.0);
    let above = split_expect(fam, 1.0, 1.0, Region::Above, |t, _| t.powf(alpha) / (alpha - 1.0))?;
    let below = split_expect(fam, 1.0, 1.0, Region::Below, |t, d| {
        k * t * d.powf(beta - beta / alpha) - d.powf(beta)
    })?;
    Ok(1.0 + fam.w_bar() * (above + below) / corner11)
}
