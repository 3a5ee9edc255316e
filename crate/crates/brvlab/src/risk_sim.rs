//! Path simulation of the two-line risk process and the shortfall ratio.
//!
//! A model runs the horizon period by period: period `i` draws its claim pair
//! from family `i`, each line pays a deterministic premium, and ruin means the
//! accumulated net loss of a line exceeds its share of the initial capital.
//! Everything is estimated from whole simulated paths; the closed-form
//! counterparts live in `asymptotics` and `limit_measure`.

use rand::Rng;
use serde::Serialize;

use crate::asymptotics::RuinKind;
use crate::dep_families::{DependenceFamily, FamilySequence, StoppingLaw, Variant};
use crate::error::{Error, Result};
use crate::mc_engine::{estimate_indicator, map_blocks, Estimate, StreamSpec};

/// Two-line risk process: claims minus per-period premiums.
#[derive(Debug, Clone)]
pub struct NetLossModel {
    seq: FamilySequence,
    premium_x: f64,
    premium_y: f64,
}

impl NetLossModel {
    pub fn new(seq: FamilySequence, premium_x: f64, premium_y: f64) -> Result<Self> {
        for (name, v) in [("premium_x", premium_x), ("premium_y", premium_y)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(name, format!("premium must be finite and >= 0, got {v}")));
            }
        }
        Ok(NetLossModel { seq, premium_x, premium_y })
    }

    pub fn seq(&self) -> &FamilySequence {
        &self.seq
    }

    pub fn horizon(&self) -> usize {
        self.seq.len()
    }

    /// Walk one path and record which ruin events occurred within the horizon.
    pub fn run_path<R: Rng + ?Sized>(
        &self,
        capital_x: f64,
        capital_y: f64,
        rng: &mut R,
    ) -> RuinIndicators {
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut out = RuinIndicators { line_x: false, line_y: false, simultaneous: false };
        for fam in self.seq.iter() {
            let s = fam.sample_joint(rng);
            sx += s.theta * s.x - self.premium_x;
            sy += s.delta * s.y - self.premium_y;
            let over_x = sx > capital_x;
            let over_y = sy > capital_y;
            out.line_x |= over_x;
            out.line_y |= over_y;
            out.simultaneous |= over_x && over_y;
        }
        out
    }
}

/// Which ruin events one path realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuinIndicators {
    pub line_x: bool,
    pub line_y: bool,
    /// Both lines below zero at some common instant.
    pub simultaneous: bool,
}

impl RuinIndicators {
    pub fn both(&self) -> bool {
        self.line_x && self.line_y
    }

    pub fn either(&self) -> bool {
        self.line_x || self.line_y
    }

    pub fn matches(&self, kind: RuinKind) -> bool {
        match kind {
            RuinKind::And => self.both(),
            RuinKind::Or => self.either(),
            RuinKind::Simultaneous => self.simultaneous,
        }
    }
}

/// Event counts over a batch of simulated paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RuinCounts {
    pub n: u64,
    pub line_x: u64,
    pub line_y: u64,
    pub both: u64,
    pub either: u64,
    pub simultaneous: u64,
    /// Pathwise consistency observed on every path: simultaneous ruin implies
    /// both lines ruined implies either line ruined.
    pub inclusions_ok: bool,
}

/// Count all ruin events of interest over `n_paths` simulated paths with
/// capital `x` split as `(p x, q x)`.
pub fn simulate_paths(
    model: &NetLossModel,
    x: f64,
    p: f64,
    q: f64,
    n_paths: u64,
    stream: &StreamSpec,
) -> Result<RuinCounts> {
    check_capital(x, p, q)?;
    if n_paths == 0 {
        return Err(Error::invalid("n_paths", "need at least one path"));
    }
    let (cx, cy) = (p * x, q * x);
    let parts = map_blocks(stream, n_paths, |rng, size| {
        let mut c = RuinCounts {
            n: size,
            line_x: 0,
            line_y: 0,
            both: 0,
            either: 0,
            simultaneous: 0,
            inclusions_ok: true,
        };
        for _ in 0..size {
            let ind = model.run_path(cx, cy, rng);
            c.line_x += u64::from(ind.line_x);
            c.line_y += u64::from(ind.line_y);
            c.both += u64::from(ind.both());
            c.either += u64::from(ind.either());
            c.simultaneous += u64::from(ind.simultaneous);
            if ind.simultaneous && !ind.both() {
                c.inclusions_ok = false;
            }
        }
        c
    });
    Ok(parts.iter().fold(
        RuinCounts { n: 0, line_x: 0, line_y: 0, both: 0, either: 0, simultaneous: 0, inclusions_ok: true },
        |a, b| RuinCounts {
            n: a.n + b.n,
            line_x: a.line_x + b.line_x,
            line_y: a.line_y + b.line_y,
            both: a.both + b.both,
            either: a.either + b.either,
            simultaneous: a.simultaneous + b.simultaneous,
            inclusions_ok: a.inclusions_ok && b.inclusions_ok,
        },
    ))
}

/// Ruin probability of the chosen event by plain path counting.
pub fn estimate_psi(
    model: &NetLossModel,
    x: f64,
    p: f64,
    q: f64,
    kind: RuinKind,
    n_paths: u64,
    stream: &StreamSpec,
) -> Result<Estimate> {
    check_capital(x, p, q)?;
    let (cx, cy) = (p * x, q * x);
    estimate_indicator(stream, n_paths, |rng| model.run_path(cx, cy, rng).matches(kind))
}

/// How close the running-maximum ruin event sits to its positive-part upper
/// bound: the conditional probability of actual two-line ruin given that the
/// summed positive parts of the net losses exceed both capital shares. The
/// numerator event is contained in the denominator event path by path, the
/// ratio tends to 1 as capital grows, and with zero premiums the two events
/// coincide exactly.
pub fn positive_part_gap(
    model: &NetLossModel,
    x: f64,
    p: f64,
    q: f64,
    n_paths: u64,
    stream: &StreamSpec,
) -> Result<Estimate> {
    check_capital(x, p, q)?;
    if n_paths == 0 {
        return Err(Error::invalid("n_paths", "need at least one path"));
    }
    let (cx, cy) = (p * x, q * x);
    let parts = map_blocks(stream, n_paths, |rng, size| {
        let mut num = 0u64;
        let mut den = 0u64;
        for _ in 0..size {
            let mut sx = 0.0;
            let mut sy = 0.0;
            let mut px = 0.0;
            let mut py = 0.0;
            let mut ruin_x = false;
            let mut ruin_y = false;
            for fam in model.seq.iter() {
                let s = fam.sample_joint(rng);
                let lx = s.theta * s.x - model.premium_x;
                let ly = s.delta * s.y - model.premium_y;
                sx += lx;
                sy += ly;
                px += lx.max(0.0);
                py += ly.max(0.0);
                ruin_x |= sx > cx;
                ruin_y |= sy > cy;
            }
            if px > cx && py > cy {
                den += 1;
                if ruin_x && ruin_y {
                    num += 1;
                }
            }
        }
        (num, den)
    });
    let (num, den) = parts.iter().fold((0u64, 0u64), |(a, b), &(c, d)| (a + c, b + d));
    if den == 0 {
        return Err(Error::DegenerateEstimate("positive-part bound was never exceeded".into()));
    }
    let r = num as f64 / den as f64;
    let se = (r * (1.0 - r) / den as f64).sqrt();
    Ok(Estimate { point: r, stderr: se, n: n_paths, hits: Some(num) })
}

/// Draw a random number of pairs from one family and return the two weighted
/// sums.
pub fn sample_stopped_sums<R: Rng + ?Sized>(
    fam: &DependenceFamily,
    stopping: &StoppingLaw,
    rng: &mut R,
) -> (f64, f64) {
    let n = stopping.sample(rng);
    let mut sx = 0.0;
    let mut sy = 0.0;
    for _ in 0..n {
        let s = fam.sample_joint(rng);
        sx += s.theta * s.x;
        sy += s.delta * s.y;
    }
    (sx, sy)
}

/// Estimate of `x * P[stopped X-sum > U_F(x) p, stopped Y-sum > U_G(x) q]`.
pub fn estimate_stopped_corner(
    fam: &DependenceFamily,
    stopping: &StoppingLaw,
    p: f64,
    q: f64,
    x: f64,
    n_paths: u64,
    stream: &StreamSpec,
) -> Result<Estimate> {
    if !x.is_finite() || x <= 1.0 {
        return Err(Error::invalid("x", format!("tail level must be finite and > 1, got {x}")));
    }
    let tx = fam.marginal_x().normalization_u(x)? * p;
    let ty = fam.marginal_y().normalization_u(x)? * q;
    let est = estimate_indicator(stream, n_paths, |rng| {
        let (sx, sy) = sample_stopped_sums(fam, stopping, rng);
        sx > tx && sy > ty
    })?;
    Ok(est.scale(x))
}

/// Empirical joint expected shortfall at level `x`, normalized by `U_F(x)`:
/// an estimate of `E[Theta X | Theta X > U_F(x), Delta Y > U_G(x)] / U_F(x)`.
///
/// The claims are integrated out in closed form per weight draw, so the only
/// randomness left is the weights: with degenerate weight laws the ratio is
/// exact up to rounding. `independent_share` reports the fraction of the
/// shortfall numerator contributed by the independent branch of the mixture;
/// it tends to zero as `x` grows.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct JesEmpirical {
    pub estimate: Estimate,
    pub independent_share: f64,
}

pub fn jes_empirical(
    fam: &DependenceFamily,
    x: f64,
    n: u64,
    stream: &StreamSpec,
) -> Result<JesEmpirical> {
    if !x.is_finite() || x <= 1.0 {
        return Err(Error::invalid("x", format!("tail level must be finite and > 1, got {x}")));
    }
    if n == 0 {
        return Err(Error::invalid("samples", "need at least one sample"));
    }
    let alpha = fam.alpha();
    let beta = fam.beta();
    if alpha <= 1.0 {
        return Err(Error::AssumptionViolation(
            "joint shortfall needs alpha > 1; the claim mean is infinite".into(),
        ));
    }
    if matches!(fam.variant(), Variant::MarginalTilt { .. }) || fam.w_bar() == 0.0 {
        return Err(Error::AssumptionViolation(
            "family has no joint tail mass at the corner; the shortfall ratio degenerates".into(),
        ));
    }
    let ux = fam.marginal_x().normalization_u(x)?;
    let uy = fam.marginal_y().normalization_u(x)?;
    let sigma_x = fam.marginal_x().sigma();
    let sigma_y = fam.marginal_y().sigma();

    let mixing_w = |theta: f64, delta: f64| match fam.variant() {
        Variant::Independence { base_mix } => *base_mix,
        Variant::JointMixture { mixing } => mixing.eval(theta, delta),
        Variant::MarginalTilt { .. } => unreachable!(),
    };

    // Per draw: u = E[Theta X ; both exceed | weights], v = P[both | weights],
    // w = the independent-branch part of u.
    let parts = map_blocks(stream, n, |rng, size| {
        let (mut su, mut sv, mut suu, mut svv, mut suv, mut sind) =
            (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..size {
            let theta = fam.theta_law().sample(rng);
            let delta = fam.delta_law().sample(rng);
            let z1 = ux / theta;
            let z2 = uy / delta;
            let w = mixing_w(theta, delta);
            // Comonotone branch: one Pareto draw drives both coordinates; the
            // y threshold maps back to z2' on the x scale.
            let z2p = sigma_x * (z2 / sigma_y).powf(beta / alpha);
            let common = fam.marginal_x().tail_mean(z1.max(z2p))?;
            let split = fam.marginal_x().tail_mean(z1)? * fam.marginal_y().survival(z2);
            let u = theta * (w * common + (1.0 - w) * split);
            let ind = theta * (1.0 - w) * split;
            let v = fam.joint_cond_survival(z1, z2, theta, delta);
            su += u;
            sv += v;
            suu += u * u;
            svv += v * v;
            suv += u * v;
            sind += ind;
        }
        Ok::<_, Error>((su, sv, suu, svv, suv, sind, size))
    });
    let (mut su, mut sv, mut suu, mut svv, mut suv, mut sind, mut nn) =
        (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0u64);
    for part in parts {
        let (a, b, c, d, e, f, m) = part?;
        su += a;
        sv += b;
        suu += c;
        svv += d;
        suv += e;
        sind += f;
        nn += m;
    }
    if sv <= 0.0 || su <= 0.0 {
        return Err(Error::DegenerateEstimate("joint tail mass is numerically zero at this level".into()));
    }
    let nf = nn as f64;
    let r = su / sv;
    let resid = ((suu - 2.0 * r * suv + r * r * svv) / (nf - 1.0).max(1.0)).max(0.0);
    let se = (resid / nf).sqrt() / (sv / nf);
    let estimate = Estimate { point: r, stderr: se, n: nn, hits: None }.scale(1.0 / ux);
    Ok(JesEmpirical { estimate, independent_share: sind / su })
}

fn check_capital(x: f64, p: f64, q: f64) -> Result<()> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::invalid("x", format!("capital must be finite and > 0, got {x}")));
    }
    for (name, v) in [("p", p), ("q", q)] {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::invalid(name, format!("capital share must be finite and > 0, got {v}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::{jes_factor, ruin_asymptote};
    use crate::dep_families::{MixingFn, WeightLaw};
    use crate::limit_measure::corner_mass_product;
    use crate::mc_engine::estimate_scaled_corner;
    use crate::rv_core::RVMarginal;

    fn comonotone_unit(alpha: f64) -> DependenceFamily {
        DependenceFamily::new(
            RVMarginal::new(alpha, 1.0).unwrap(),
            RVMarginal::new(alpha, 1.0).unwrap(),
            WeightLaw::degenerate(1.0).unwrap(),
            WeightLaw::degenerate(1.0).unwrap(),
            Variant::JointMixture { mixing: MixingFn::constant(1.0) },
        )
        .unwrap()
    }

    fn half_mixture() -> DependenceFamily {
        DependenceFamily::new(
            RVMarginal::new(2.0, 1.0).unwrap(),
            RVMarginal::new(2.0, 1.0).unwrap(),
            WeightLaw::uniform(0.0, 2.0).unwrap(),
            WeightLaw::uniform(0.0, 2.0).unwrap(),
            Variant::JointMixture { mixing: MixingFn::constant(0.5) },
        )
        .unwrap()
    }

    #[test]
    fn zero_premium_makes_and_equal_simultaneous() {
        // Without premiums the net loss paths are nondecreasing, so both-lines
        // ruin can only happen at the horizon end, together.
        let seq = FamilySequence::iid(half_mixture(), 3).unwrap();
        let model = NetLossModel::new(seq, 0.0, 0.0).unwrap();
        let stream = StreamSpec::new(0x5eed_3001);
        let and = estimate_psi(&model, 50.0, 0.5, 0.5, RuinKind::And, 200_000, &stream).unwrap();
        let sim =
            estimate_psi(&model, 50.0, 0.5, 0.5, RuinKind::Simultaneous, 200_000, &stream).unwrap();
        assert_eq!(and.point.to_bits(), sim.point.to_bits());
        assert_eq!(and.hits, sim.hits);
        assert!(and.hits.unwrap() > 0);
    }

    #[test]
    fn path_counts_satisfy_event_algebra() {
        let seq = FamilySequence::iid(half_mixture(), 2).unwrap();
        let model = NetLossModel::new(seq, 0.5, 0.5).unwrap();
        let stream = StreamSpec::new(0x5eed_3002);
        let counts = simulate_paths(&model, 20.0, 0.5, 0.5, 300_000, &stream).unwrap();
        assert!(counts.inclusions_ok);
        assert_eq!(counts.n, 300_000);
        // Inclusion-exclusion is an exact identity on counts.
        assert_eq!(counts.either + counts.both, counts.line_x + counts.line_y);
        assert!(counts.simultaneous <= counts.both);
        assert!(counts.both <= counts.line_x.min(counts.line_y));
        assert!(counts.either >= counts.line_x.max(counts.line_y));
        assert!(counts.simultaneous > 0);
    }

    #[test]
    fn ruin_probability_approaches_its_asymptote() {
        // Heavy single-claim regime: alpha = 1, unit comonotone weights, two
        // periods, no premiums. The coefficient is 2 periods x min(2, 2) = 4.
        let seq = FamilySequence::iid(comonotone_unit(1.0), 2).unwrap();
        let asy = ruin_asymptote(&seq, 0.5, 0.5, RuinKind::And).unwrap();
        assert!((asy.coefficient - 4.0).abs() < 1e-12);
        let model = NetLossModel::new(seq, 0.0, 0.0).unwrap();
        let stream = StreamSpec::new(0x5eed_3003);
        let x = 1e3;
        let est = estimate_psi(&model, x, 0.5, 0.5, RuinKind::And, 2_000_000, &stream).unwrap();
        let target = asy.psi(x);
        assert!(est.hits.unwrap() > 1000);
        assert!(
            (est.point - target).abs() < 4.0 * est.stderr + 0.05 * target,
            "psi {} +- {} vs {}",
            est.point,
            est.stderr,
            target
        );
    }

    #[test]
    fn either_line_ruin_dominates_and_matches_inclusion_exclusion() {
        let seq = FamilySequence::iid(comonotone_unit(1.0), 2).unwrap();
        let model = NetLossModel::new(seq.clone(), 0.0, 0.0).unwrap();
        let stream = StreamSpec::new(0x5eed_3004);
        let x = 500.0;
        let counts = simulate_paths(&model, x, 0.5, 0.5, 1_000_000, &stream).unwrap();
        let or_asy = ruin_asymptote(&seq, 0.5, 0.5, RuinKind::Or).unwrap();
        let p_or = counts.either as f64 / counts.n as f64;
        let target = or_asy.psi(x);
        let se = (p_or * (1.0 - p_or) / counts.n as f64).sqrt();
        assert!((p_or - target).abs() < 4.0 * se + 0.1 * target, "{p_or} vs {target}");
    }

    #[test]
    fn positive_part_gap_is_exactly_one_without_premiums() {
        let seq = FamilySequence::iid(half_mixture(), 3).unwrap();
        let model = NetLossModel::new(seq, 0.0, 0.0).unwrap();
        let stream = StreamSpec::new(0x5eed_3005);
        let est = positive_part_gap(&model, 30.0, 0.5, 0.5, 100_000, &stream).unwrap();
        assert_eq!(est.point, 1.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn positive_part_gap_closes_as_capital_grows() {
        // sigma below the premium makes negative increments possible, so the
        // running sums genuinely lag the positive-part sums.
        let fam = DependenceFamily::new(
            RVMarginal::new(1.0, 0.5).unwrap(),
            RVMarginal::new(1.0, 0.5).unwrap(),
            WeightLaw::uniform(0.5, 1.5).unwrap(),
            WeightLaw::uniform(0.5, 1.5).unwrap(),
            Variant::JointMixture { mixing: MixingFn::constant(0.75) },
        )
        .unwrap();
        let seq = FamilySequence::iid(fam, 3).unwrap();
        let model = NetLossModel::new(seq, 1.0, 1.0).unwrap();
        let stream = StreamSpec::new(0x5eed_3006);
        let lo = positive_part_gap(&model, 1e2, 0.5, 0.5, 2_000_000, &stream).unwrap();
        let hi = positive_part_gap(&model, 1e3, 0.5, 0.5, 2_000_000, &stream).unwrap();
        assert!(lo.point < 1.0);
        assert!(hi.point > lo.point - 2.0 * (lo.stderr + hi.stderr), "{} -> {}", lo.point, hi.point);
        assert!(hi.point > 0.8, "gap still wide at depth: {}", hi.point);
    }

    #[test]
    fn stopped_corner_scales_by_expected_count() {
        let fam = half_mixture();
        let stopping = StoppingLaw::uniform_1_to(3).unwrap();
        let stream = StreamSpec::new(0x5eed_3007);
        let x = 1e4;
        let est = estimate_stopped_corner(&fam, &stopping, 1.0, 1.0, x, 4_000_000, &stream).unwrap();
        let single = corner_mass_product(&fam, 1.0, 1.0).unwrap();
        let target = 2.0 * single;
        assert!(
            (est.point - target).abs() < 3.0 * est.stderr + 0.05 * target,
            "stopped corner {} +- {} vs {}",
            est.point,
            est.stderr,
            target
        );
    }

    #[test]
    fn stopped_sums_with_unit_stopping_match_single_pairs() {
        let fam = half_mixture();
        let stopping = StoppingLaw::new(&[(1, 1.0)]).unwrap();
        let stream = StreamSpec::new(0x5eed_3008);
        let x = 100.0;
        let stopped =
            estimate_stopped_corner(&fam, &stopping, 1.0, 1.0, x, 1_000_000, &stream).unwrap();
        let direct = estimate_scaled_corner(&fam, 1.0, 1.0, x, 1_000_000, &stream).unwrap();
        assert!(
            (stopped.point - direct.point).abs() < 3.0 * (stopped.stderr + direct.stderr),
            "stopped {} vs direct {}",
            stopped.point,
            direct.point
        );
    }

    #[test]
    fn shortfall_ratio_is_exact_for_degenerate_weights() {
        for alpha in [1.5, 2.0, 3.0] {
            let fam = comonotone_unit(alpha);
            let stream = StreamSpec::new(0x5eed_3009);
            let jes = jes_empirical(&fam, 1e4, 1_000, &stream).unwrap();
            let expect = alpha / (alpha - 1.0);
            assert!(
                (jes.estimate.point - expect).abs() <= 1e-12 * expect,
                "alpha {alpha}: {} vs {expect}",
                jes.estimate.point
            );
            // All draws are identical, so only summation rounding is left.
            assert!(jes.estimate.stderr < 1e-10 * expect);
            assert_eq!(jes.independent_share, 0.0);
        }
    }

    #[test]
    fn shortfall_ratio_converges_to_its_factor() {
        let fam = DependenceFamily::new(
            RVMarginal::new(3.0, 1.0).unwrap(),
            RVMarginal::new(3.0, 1.0).unwrap(),
            WeightLaw::uniform(0.5, 1.5).unwrap(),
            WeightLaw::uniform(0.5, 1.5).unwrap(),
            Variant::JointMixture { mixing: MixingFn::constant(0.6) },
        )
        .unwrap();
        let factor = jes_factor(&fam).unwrap();
        let stream = StreamSpec::new(0x5eed_300a);
        let jes = jes_empirical(&fam, 1e6, 400_000, &stream).unwrap();
        assert!(
            (jes.estimate.point - factor).abs() < 3.0 * jes.estimate.stderr + 0.01 * factor,
            "empirical {} +- {} vs factor {}",
            jes.estimate.point,
            jes.estimate.stderr,
            factor
        );
        assert!(jes.independent_share < 0.1, "share {}", jes.independent_share);
        // The independent branch matters more at shallow levels.
        let shallow = jes_empirical(&fam, 10.0, 400_000, &stream).unwrap();
        assert!(shallow.independent_share > jes.independent_share);
    }

    #[test]
    fn shortfall_rejects_undefined_regimes() {
        assert!(jes_empirical(&comonotone_unit(1.0), 1e4, 100, &StreamSpec::new(1)).is_err());
        let tilt = DependenceFamily::new(
            RVMarginal::new(2.0, 1.0).unwrap(),
            RVMarginal::new(2.0, 1.0).unwrap(),
            WeightLaw::uniform(0.0, 2.0).unwrap(),
            WeightLaw::uniform(0.0, 2.0).unwrap(),
            Variant::MarginalTilt { a1: 0.5, a2: 0.5 },
        )
        .unwrap();
        assert!(jes_empirical(&tilt, 1e4, 100, &StreamSpec::new(1)).is_err());
        let model = NetLossModel::new(FamilySequence::iid(half_mixture(), 1).unwrap(), 0.0, 0.0).unwrap();
        assert!(estimate_psi(&model, -1.0, 0.5, 0.5, RuinKind::And, 10, &StreamSpec::new(1)).is_err());
        assert!(NetLossModel::new(FamilySequence::iid(half_mixture(), 1).unwrap(), -0.1, 0.0).is_err());
    }
}
