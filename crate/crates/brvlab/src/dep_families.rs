//! Constructive interdependence families over a pair of Pareto marginals.
//!
//! Each family fixes a joint law for `(X, Y, Theta, Delta)` in which the
//! conditional tail factors are available in closed form:
//!
//! * `h1(theta) = lim P[X > x | Theta = theta] / P[X > x]`, and `h2` likewise
//!   for `(Y, Delta)`; both are bounded and integrate to one.
//! * `g(theta, delta)` is the same ratio for the joint tail of `(X, Y)` given
//!   `(Theta, Delta) = (theta, delta)`; bounded, mean one.
//!
//! Three variants:
//!
//! * `Independence`: weights independent of `(X, Y)`; `h1 = h2 = g = 1`. The
//!   pair `(X, Y)` itself is a comonotone/independent mixture with fixed
//!   weight `base_mix` (0 gives fully independent marginals).
//! * `MarginalTilt`: each weight is coupled to its own claim through an FGM
//!   copula with strength `a1` (resp. `a2`); `X` and `Y` are conditionally
//!   independent given the weights, so the joint tail is product-order and the
//!   asymptotic-dependence mass is zero.
//! * `JointMixture`: weights drawn first; with probability `w(theta, delta)`
//!   the claims are comonotone (one Pareto draw drives both coordinates),
//!   otherwise independent. `h1 = h2 = 1` while `g = w / E[w]`.
//!
//! All three preserve the Pareto marginals exactly, which the tests check by
//! probability-integral transform.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::Quadrature;
use crate::rv_core::{hill_estimate, RVMarginal};

/// Law of a weight: bounded, non-negative, not degenerate at zero.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightLaw {
    /// Uniform on `[lo, hi]`, `0 <= lo < hi`.
    Uniform { lo: f64, hi: f64 },
    /// Finitely many atoms with positive values and probabilities.
    Discrete { atoms: Vec<(f64, f64)> },
}

impl WeightLaw {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo >= hi {
            return Err(Error::invalid("uniform support", format!("need 0 <= lo < hi, got [{lo}, {hi}]")));
        }
        Ok(WeightLaw::Uniform { lo, hi })
    }

    pub fn discrete(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("atoms", "discrete law needs at least one atom"));
        }
        let mut sum = 0.0;
        for &(v, p) in atoms {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::invalid("atoms", format!("atom value must be finite and > 0, got {v}")));
            }
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::invalid("atoms", format!("atom probability must be > 0, got {p}")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("atoms", format!("probabilities sum to {sum}, expected 1")));
        }
        let mut atoms: Vec<(f64, f64)> = atoms.iter().map(|&(v, p)| (v, p / sum)).collect();
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if atoms.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("atoms", "atom values must be distinct"));
        }
        Ok(WeightLaw::Discrete { atoms })
    }

    /// A single atom with probability one.
    pub fn degenerate(value: f64) -> Result<Self> {
        WeightLaw::discrete(&[(value, 1.0)])
    }

    pub fn min_support(&self) -> f64 {
        match self {
            WeightLaw::Uniform { lo, .. } => *lo,
            WeightLaw::Discrete { atoms } => atoms[0].0,
        }
    }

    pub fn max_support(&self) -> f64 {
        match self {
            WeightLaw::Uniform { hi, .. } => *hi,
            WeightLaw::Discrete { atoms } => atoms[atoms.len() - 1].0,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        match self {
            WeightLaw::Uniform { lo, hi } => v >= *lo && v <= *hi,
            WeightLaw::Discrete { atoms } => atoms.iter().any(|&(a, _)| a == v),
        }
    }

    /// E[W^r], closed form. `r > -1` for uniform laws touching zero.
    pub fn moment(&self, r: f64) -> f64 {
        match self {
            WeightLaw::Uniform { lo, hi } => {
                (hi.powf(r + 1.0) - lo.powf(r + 1.0)) / ((r + 1.0) * (hi - lo))
            }
            WeightLaw::Discrete { atoms } => atoms.iter().map(|&(v, p)| p * v.powf(r)).sum(),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            WeightLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
            WeightLaw::Discrete { atoms } => atoms.iter().map(|&(v, p)| p * v).sum(),
        }
    }

    /// Mid-distribution rank `(P[W < v] + P[W <= v]) / 2`. For continuous laws
    /// this is the plain CDF; the mid-CDF convention makes the rank of a draw
    /// have mean exactly 1/2 for discrete laws too.
    pub fn mean_rank(&self, v: f64) -> f64 {
        match self {
            WeightLaw::Uniform { lo, hi } => ((v - lo) / (hi - lo)).clamp(0.0, 1.0),
            WeightLaw::Discrete { atoms } => {
                let mut below = 0.0;
                let mut at = 0.0;
                for &(a, p) in atoms {
                    if a < v {
                        below += p;
                    } else if a == v {
                        at = p;
                    }
                }
                below + 0.5 * at
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            WeightLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
            WeightLaw::Discrete { atoms } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for &(v, p) in atoms {
                    acc += p;
                    if u < acc {
                        return v;
                    }
                }
                atoms[atoms.len() - 1].0
            }
        }
    }

    /// E[f(W)] by exact summation or adaptive quadrature.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        match self {
            WeightLaw::Uniform { lo, hi } => {
                let density = 1.0 / (hi - lo);
                Quadrature::default().integrate(|t| f(t) * density, *lo, *hi)
            }
            WeightLaw::Discrete { atoms } => Ok(atoms.iter().map(|&(v, p)| p * f(v)).sum()),
        }
    }
}

/// Mixing probability for the joint-mixture variant, affine in the weights:
/// `w(theta, delta) = c0 + c_theta * theta + c_delta * delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixingFn {
    pub c0: f64,
    pub c_theta: f64,
    pub c_delta: f64,
}

impl MixingFn {
    pub fn constant(w: f64) -> Self {
        MixingFn { c0: w, c_theta: 0.0, c_delta: 0.0 }
    }

    pub fn eval(&self, theta: f64, delta: f64) -> f64 {
        self.c0 + self.c_theta * theta + self.c_delta * delta
    }

    /// E[w(Theta, Delta)] for independent weights; affine, so only first moments enter.
    fn mean(&self, theta_law: &WeightLaw, delta_law: &WeightLaw) -> f64 {
        self.c0 + self.c_theta * theta_law.mean() + self.c_delta * delta_law.mean()
    }

    /// Range over the support rectangle. Affine in each argument, so the
    /// extrema sit at corners.
    fn range(&self, theta_law: &WeightLaw, delta_law: &WeightLaw) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &t in &[theta_law.min_support(), theta_law.max_support()] {
            for &d in &[delta_law.min_support(), delta_law.max_support()] {
                let w = self.eval(t, d);
                lo = lo.min(w);
                hi = hi.max(w);
            }
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Variant {
    Independence { base_mix: f64 },
    MarginalTilt { a1: f64, a2: f64 },
    JointMixture { mixing: MixingFn },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    Comonotone,
    Independent,
}

#[derive(Debug, Clone, Copy)]
pub struct JointSample {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub delta: f64,
    pub branch: Branch,
}

/// One interdependent pair `(X, Y, Theta, Delta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DependenceFamily {
    marginal_x: RVMarginal,
    marginal_y: RVMarginal,
    theta_law: WeightLaw,
    delta_law: WeightLaw,
    variant: Variant,
}

impl DependenceFamily {
    pub fn new(
        marginal_x: RVMarginal,
        marginal_y: RVMarginal,
        theta_law: WeightLaw,
        delta_law: WeightLaw,
        variant: Variant,
    ) -> Result<Self> {
        match &variant {
            Variant::Independence { base_mix } => {
                if !(0.0..=1.0).contains(base_mix) {
                    return Err(Error::invalid("base_mix", format!("must lie in [0, 1], got {base_mix}")));
                }
            }
            Variant::MarginalTilt { a1, a2 } => {
                for (name, a) in [("a1", a1), ("a2", a2)] {
                    if !(-1.0..=1.0).contains(a) {
                        return Err(Error::invalid(name, format!("FGM strength must lie in [-1, 1], got {a}")));
                    }
                }
            }
            Variant::JointMixture { mixing } => {
                let (w_min, w_max) = mixing.range(&theta_law, &delta_law);
                if w_min <= 0.0 {
                    return Err(Error::invalid(
                        "mixing",
                        format!("mixing probability reaches {w_min} <= 0 on the weight support; the factor bound would be unattainable"),
                    ));
                }
                if w_max > 1.0 {
                    return Err(Error::invalid(
                        "mixing",
                        format!("mixing probability reaches {w_max} > 1 on the weight support"),
                    ));
                }
            }
        }
        Ok(DependenceFamily { marginal_x, marginal_y, theta_law, delta_law, variant })
    }

    pub fn marginal_x(&self) -> &RVMarginal {
        &self.marginal_x
    }

    pub fn marginal_y(&self) -> &RVMarginal {
        &self.marginal_y
    }

    pub fn theta_law(&self) -> &WeightLaw {
        &self.theta_law
    }

    pub fn delta_law(&self) -> &WeightLaw {
        &self.delta_law
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    pub fn alpha(&self) -> f64 {
        self.marginal_x.alpha()
    }

    pub fn beta(&self) -> f64 {
        self.marginal_y.alpha()
    }

    fn h1_unchecked(&self, theta: f64) -> f64 {
        match &self.variant {
            Variant::MarginalTilt { a1, .. } => 1.0 + a1 * (2.0 * self.theta_law.mean_rank(theta) - 1.0),
            _ => 1.0,
        }
    }

    fn h2_unchecked(&self, delta: f64) -> f64 {
        match &self.variant {
            Variant::MarginalTilt { a2, .. } => 1.0 + a2 * (2.0 * self.delta_law.mean_rank(delta) - 1.0),
            _ => 1.0,
        }
    }

    /// `g` without the support check, for integration over the support.
    pub(crate) fn g_raw(&self, theta: f64, delta: f64) -> f64 {
        self.g_unchecked(theta, delta)
    }

    fn g_unchecked(&self, theta: f64, delta: f64) -> f64 {
        match &self.variant {
            Variant::Independence { .. } => 1.0,
            Variant::MarginalTilt { .. } => self.h1_unchecked(theta) * self.h2_unchecked(delta),
            Variant::JointMixture { mixing } => mixing.eval(theta, delta) / self.w_bar(),
        }
    }

    /// Conditional-to-unconditional tail ratio factor for `(X, Theta)`.
    pub fn h1(&self, theta: f64) -> Result<f64> {
        if !self.theta_law.contains(theta) {
            return Err(Error::OutOfSupport(format!("theta = {theta} not in the Theta support")));
        }
        Ok(self.h1_unchecked(theta))
    }

    /// Conditional-to-unconditional tail ratio factor for `(Y, Delta)`.
    pub fn h2(&self, delta: f64) -> Result<f64> {
        if !self.delta_law.contains(delta) {
            return Err(Error::OutOfSupport(format!("delta = {delta} not in the Delta support")));
        }
        Ok(self.h2_unchecked(delta))
    }

    /// Joint conditional-to-unconditional tail ratio factor.
    pub fn g(&self, theta: f64, delta: f64) -> Result<f64> {
        if !self.theta_law.contains(theta) {
            return Err(Error::OutOfSupport(format!("theta = {theta} not in the Theta support")));
        }
        if !self.delta_law.contains(delta) {
            return Err(Error::OutOfSupport(format!("delta = {delta} not in the Delta support")));
        }
        Ok(self.g_unchecked(theta, delta))
    }

    /// Uniform bound on `h1`.
    pub fn h1_bound(&self) -> f64 {
        match &self.variant {
            Variant::MarginalTilt { a1, .. } => 1.0 + a1.abs(),
            _ => 1.0,
        }
    }

    /// Uniform bound on `h2`.
    pub fn h2_bound(&self) -> f64 {
        match &self.variant {
            Variant::MarginalTilt { a2, .. } => 1.0 + a2.abs(),
            _ => 1.0,
        }
    }

    /// Uniform bound on `g`.
    pub fn g_bound(&self) -> f64 {
        match &self.variant {
            Variant::Independence { .. } => 1.0,
            Variant::MarginalTilt { a1, a2 } => (1.0 + a1.abs()) * (1.0 + a2.abs()),
            Variant::JointMixture { mixing } => {
                let (_, w_max) = mixing.range(&self.theta_law, &self.delta_law);
                w_max / self.w_bar()
            }
        }
    }

    /// Weight of the comonotone component of `(X, Y)`: the total mass of
    /// asymptotic dependence. Zero for the marginal-tilt variant.
    pub fn w_bar(&self) -> f64 {
        match &self.variant {
            Variant::Independence { base_mix } => *base_mix,
            Variant::MarginalTilt { .. } => 0.0,
            Variant::JointMixture { mixing } => mixing.mean(&self.theta_law, &self.delta_law),
        }
    }

    /// E[Theta^r h1(Theta)] by exact summation or quadrature.
    pub fn theta_moment(&self, r: f64) -> Result<f64> {
        self.theta_law.expect(|t| t.powf(r) * self.h1_unchecked(t))
    }

    /// E[Delta^r h2(Delta)] by exact summation or quadrature.
    pub fn delta_moment(&self, r: f64) -> Result<f64> {
        self.delta_law.expect(|d| d.powf(r) * self.h2_unchecked(d))
    }

    /// E[g(Theta, Delta) f(Theta, Delta)] for independent weights.
    pub fn g_expect<F: Fn(f64, f64) -> f64>(&self, f: F) -> Result<f64> {
        self.theta_law
            .expect(|t| self.delta_law.expect(|d| self.g_unchecked(t, d) * f(t, d)).unwrap())
    }

    // --- exact conditional laws ---------------------------------------------

    /// P[X > x | Theta = theta].
    pub fn cond_survival_x(&self, x: f64, theta: f64) -> f64 {
        let u = self.marginal_x.survival(x);
        match &self.variant {
            Variant::MarginalTilt { .. } => {
                let h = self.h1_unchecked(theta);
                u * (u + h * (1.0 - u))
            }
            _ => u,
        }
    }

    /// P[Y > y | Delta = delta].
    pub fn cond_survival_y(&self, y: f64, delta: f64) -> f64 {
        let u = self.marginal_y.survival(y);
        match &self.variant {
            Variant::MarginalTilt { .. } => {
                let h = self.h2_unchecked(delta);
                u * (u + h * (1.0 - u))
            }
            _ => u,
        }
    }

    fn mixture_joint_survival(&self, w: f64, x: f64, y: f64) -> f64 {
        let sx = self.marginal_x.survival(x);
        let sy = self.marginal_y.survival(y);
        w * sx.min(sy) + (1.0 - w) * sx * sy
    }

    /// P[X > x, Y > y | Theta = theta, Delta = delta].
    pub fn joint_cond_survival(&self, x: f64, y: f64, theta: f64, delta: f64) -> f64 {
        match &self.variant {
            Variant::Independence { base_mix } => self.mixture_joint_survival(*base_mix, x, y),
            Variant::MarginalTilt { .. } => {
                self.cond_survival_x(x, theta) * self.cond_survival_y(y, delta)
            }
            Variant::JointMixture { mixing } => {
                self.mixture_joint_survival(mixing.eval(theta, delta), x, y)
            }
        }
    }

    /// Unconditional P[X > x, Y > y]. For the marginal-tilt variant the
    /// weight-averaged product collapses to independence because the factors
    /// have mean one.
    pub fn joint_survival(&self, x: f64, y: f64) -> f64 {
        match &self.variant {
            Variant::MarginalTilt { .. } => {
                self.marginal_x.survival(x) * self.marginal_y.survival(y)
            }
            _ => self.mixture_joint_survival(self.w_bar(), x, y),
        }
    }

    // --- sampling -----------------------------------------------------------

    fn sample_comonotone<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let z = self.marginal_x.sample(rng);
        // Same quantile level on both coordinates.
        let y = self.marginal_y.sigma() * (z / self.marginal_x.sigma()).powf(self.alpha() / self.beta());
        (z, y)
    }

    /// FGM conditional quantile: solves `(1+d) F - d F^2 = v` for the
    /// conditional CDF level, with `d = a (1 - 2 rank)`. Written in the
    /// conjugate form, which is stable as `d -> 0`.
    fn fgm_conditional_draw<R: Rng + ?Sized>(
        &self,
        marginal: &RVMarginal,
        a: f64,
        rank: f64,
        rng: &mut R,
    ) -> f64 {
        let v: f64 = rng.gen();
        let d = a * (1.0 - 2.0 * rank);
        let f = if d == 0.0 {
            v
        } else {
            2.0 * v / ((1.0 + d) + ((1.0 + d) * (1.0 + d) - 4.0 * d * v).sqrt())
        };
        marginal.quantile(f.clamp(0.0, 1.0 - 1e-16))
    }

    /// Draw `(X, Y, Theta, Delta)` and the mixture branch that produced it.
    pub fn sample_joint<R: Rng + ?Sized>(&self, rng: &mut R) -> JointSample {
        let theta = self.theta_law.sample(rng);
        let delta = self.delta_law.sample(rng);
        match &self.variant {
            Variant::Independence { base_mix } => {
                let comonotone = rng.gen::<f64>() < *base_mix;
                let (x, y) = if comonotone {
                    self.sample_comonotone(rng)
                } else {
                    (self.marginal_x.sample(rng), self.marginal_y.sample(rng))
                };
                JointSample {
                    x,
                    y,
                    theta,
                    delta,
                    branch: if comonotone { Branch::Comonotone } else { Branch::Independent },
                }
            }
            Variant::MarginalTilt { a1, a2 } => {
                let x = self.fgm_conditional_draw(&self.marginal_x, *a1, self.theta_law.mean_rank(theta), rng);
                let y = self.fgm_conditional_draw(&self.marginal_y, *a2, self.delta_law.mean_rank(delta), rng);
                JointSample { x, y, theta, delta, branch: Branch::Independent }
            }
            Variant::JointMixture { mixing } => {
                let comonotone = rng.gen::<f64>() < mixing.eval(theta, delta);
                let (x, y) = if comonotone {
                    self.sample_comonotone(rng)
                } else {
                    (self.marginal_x.sample(rng), self.marginal_y.sample(rng))
                };
                JointSample {
                    x,
                    y,
                    theta,
                    delta,
                    branch: if comonotone { Branch::Comonotone } else { Branch::Independent },
                }
            }
        }
    }

    /// Runtime check of the structural assumptions: mean-one factor identities
    /// by quadrature, bounded moment margins, and empirical conditional tail
    /// ratios against the closed-form factors. `x_grid` entries are scale
    /// levels: the probes sit at `U_F(x)` and `U_G(x)` so both coordinates are
    /// tested at tail probability `1/x`.
    pub fn verify_assumptions<R: Rng + ?Sized>(
        &self,
        sample_count: u64,
        x_grid: &[f64],
        epsilon: f64,
        rng: &mut R,
    ) -> Result<AssumptionReport> {
        if sample_count < 1_000 {
            return Err(Error::invalid("sample_count", "need at least 1000 samples"));
        }
        if x_grid.is_empty() || x_grid.iter().any(|&x| !x.is_finite() || x <= 1.0) {
            return Err(Error::invalid("x_grid", "need a nonempty grid of levels > 1"));
        }
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(Error::invalid("epsilon", "moment margin must be > 0"));
        }

        let e_h1 = self.theta_law.expect(|t| self.h1_unchecked(t))?;
        let e_h2 = self.delta_law.expect(|d| self.h2_unchecked(d))?;
        let e_g = self
            .theta_law
            .expect(|t| self.delta_law.expect(|d| self.g_unchecked(t, d)).unwrap())?;
        let theta_margin = self.theta_moment(self.alpha() + epsilon)?;
        let delta_margin = self.delta_moment(self.beta() + epsilon)?;

        let thr_x: Vec<f64> = x_grid.iter().map(|&x| self.marginal_x.normalization_u(x)).collect::<Result<_>>()?;
        let thr_y: Vec<f64> = x_grid.iter().map(|&x| self.marginal_y.normalization_u(x)).collect::<Result<_>>()?;

        let theta_probes = probe_bins(&self.theta_law);
        let delta_probes = probe_bins(&self.delta_law);
        let n_pairs = theta_probes.len().min(3) * delta_probes.len().min(3);
        let nx = x_grid.len();

        let mut theta_counts = vec![0u64; theta_probes.len()];
        let mut delta_counts = vec![0u64; delta_probes.len()];
        let mut pair_counts = vec![0u64; n_pairs];
        let mut h1_hits = vec![0u64; theta_probes.len() * nx];
        let mut h2_hits = vec![0u64; delta_probes.len() * nx];
        let mut g_hits = vec![0u64; n_pairs * nx];

        let mut xs = Vec::with_capacity(sample_count as usize);
        let mut ys = Vec::with_capacity(sample_count as usize);
        for _ in 0..sample_count {
            let s = self.sample_joint(rng);
            xs.push(s.x);
            ys.push(s.y);
            let ti = theta_probes.iter().position(|b| b.member(s.theta));
            let di = delta_probes.iter().position(|b| b.member(s.delta));
            if let Some(i) = ti {
                theta_counts[i] += 1;
                for (t, &thr) in thr_x.iter().enumerate() {
                    if s.x > thr {
                        h1_hits[i * nx + t] += 1;
                    }
                }
            }
            if let Some(i) = di {
                delta_counts[i] += 1;
                for (t, &thr) in thr_y.iter().enumerate() {
                    if s.y > thr {
                        h2_hits[i * nx + t] += 1;
                    }
                }
            }
            if let (Some(i), Some(j)) = (ti, di) {
                if i < 3 && j < 3 && delta_probes.len().min(3) > 0 {
                    let pair = i * delta_probes.len().min(3) + j;
                    if pair < n_pairs {
                        pair_counts[pair] += 1;
                        for t in 0..nx {
                            if s.x > thr_x[t] && s.y > thr_y[t] {
                                g_hits[pair * nx + t] += 1;
                            }
                        }
                    }
                }
            }
        }

        let mut checks = Vec::new();
        for (i, bin) in theta_probes.iter().enumerate() {
            for t in 0..nx {
                if let Some(c) = ratio_check(
                    FactorKind::H1,
                    (bin.center, None),
                    x_grid[t],
                    h1_hits[i * nx + t],
                    theta_counts[i],
                    self.marginal_x.survival(thr_x[t]),
                    self.h1_unchecked(bin.center),
                ) {
                    checks.push(c);
                }
            }
        }
        for (i, bin) in delta_probes.iter().enumerate() {
            for t in 0..nx {
                if let Some(c) = ratio_check(
                    FactorKind::H2,
                    (bin.center, None),
                    x_grid[t],
                    h2_hits[i * nx + t],
                    delta_counts[i],
                    self.marginal_y.survival(thr_y[t]),
                    self.h2_unchecked(bin.center),
                ) {
                    checks.push(c);
                }
            }
        }
        let dcap = delta_probes.len().min(3);
        for (i, tp) in theta_probes.iter().take(3).enumerate() {
            for (j, dp) in delta_probes[..dcap].iter().enumerate() {
                let pair = i * dcap + j;
                let (tc, dc) = (tp.center, dp.center);
                for t in 0..nx {
                    if let Some(c) = ratio_check(
                        FactorKind::G,
                        (tc, Some(dc)),
                        x_grid[t],
                        g_hits[pair * nx + t],
                        pair_counts[pair],
                        self.joint_survival(thr_x[t], thr_y[t]),
                        self.g_unchecked(tc, dc),
                    ) {
                        checks.push(c);
                    }
                }
            }
        }

        let k = ((sample_count / 100).max(10) as usize).min(xs.len() - 1);
        let hill_x = hill_estimate(&xs, k)?;
        let hill_y = hill_estimate(&ys, k)?;

        let flagged = checks.iter().any(|c| c.deviation_sigmas() > 5.0);
        Ok(AssumptionReport {
            e_h1,
            e_h2,
            e_g,
            epsilon,
            theta_moment_margin: theta_margin,
            delta_moment_margin: delta_margin,
            hill_x,
            hill_y,
            matuszewska_x: self.marginal_x.matuszewska_indices(),
            matuszewska_y: self.marginal_y.matuszewska_indices(),
            ratio_checks: checks,
            flagged,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FactorKind {
    H1,
    H2,
    G,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioCheck {
    pub kind: FactorKind,
    /// Probe location: weight value (and the second weight for joint checks).
    pub location: (f64, Option<f64>),
    /// Scale level of the threshold.
    pub x: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub expected: f64,
    /// Conditioning count behind the empirical ratio.
    pub count: u64,
}

impl RatioCheck {
    pub fn deviation_sigmas(&self) -> f64 {
        (self.empirical - self.expected).abs() / self.stderr
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    /// Quadrature values of E[h1], E[h2], E[g]; all must equal 1.
    pub e_h1: f64,
    pub e_h2: f64,
    pub e_g: f64,
    pub epsilon: f64,
    /// E[Theta^(alpha+eps) h1(Theta)] and the Delta-side analogue; finite
    /// because weight supports are bounded, reported for the record.
    pub theta_moment_margin: f64,
    pub delta_moment_margin: f64,
    /// Tail-index diagnostics recovered from the simulated sample.
    pub hill_x: f64,
    pub hill_y: f64,
    pub matuszewska_x: (f64, f64),
    pub matuszewska_y: (f64, f64),
    pub ratio_checks: Vec<RatioCheck>,
    /// True when some empirical ratio sits more than 5 standard errors from
    /// its closed-form factor.
    pub flagged: bool,
}

impl AssumptionReport {
    pub fn mean_one_error(&self) -> f64 {
        (self.e_h1 - 1.0)
            .abs()
            .max((self.e_h2 - 1.0).abs())
            .max((self.e_g - 1.0).abs())
    }
}

struct ProbeBin {
    lo: f64,
    hi: f64,
    center: f64,
    discrete: bool,
}

impl ProbeBin {
    fn member(&self, v: f64) -> bool {
        if self.discrete {
            v == self.center
        } else {
            v >= self.lo && v < self.hi
        }
    }
}

/// Conditioning cells: for continuous laws, 4 of the 64 equal-width bins
/// spread across the support; for discrete laws, the atoms themselves.
fn probe_bins(law: &WeightLaw) -> Vec<ProbeBin> {
    match law {
        WeightLaw::Uniform { lo, hi } => {
            let width = (hi - lo) / 64.0;
            [8usize, 24, 40, 56]
                .iter()
                .map(|&i| {
                    let a = lo + i as f64 * width;
                    ProbeBin { lo: a, hi: a + width, center: a + 0.5 * width, discrete: false }
                })
                .collect()
        }
        WeightLaw::Discrete { atoms } => atoms
            .iter()
            .take(8)
            .map(|&(v, _)| ProbeBin { lo: v, hi: v, center: v, discrete: true })
            .collect(),
    }
}

fn ratio_check(
    kind: FactorKind,
    location: (f64, Option<f64>),
    x: f64,
    hits: u64,
    count: u64,
    denom: f64,
    expected: f64,
) -> Option<RatioCheck> {
    if count == 0 || denom <= 0.0 {
        return None;
    }
    let p = hits as f64 / count as f64;
    // Agresti-Coull shrinkage keeps the standard error honest in sparse
    // cells: a zero-hit cell whose expected hit count is a handful must not
    // read as a many-sigma violation.
    let p_se = (hits as f64 + 2.0) / (count as f64 + 4.0);
    let se = (p_se * (1.0 - p_se) / count as f64).sqrt() / denom;
    Some(RatioCheck { kind, location, x, empirical: p / denom, stderr: se, expected, count })
}

/// A finite horizon of per-index families sharing both marginals.
#[derive(Debug, Clone)]
pub struct FamilySequence {
    families: Vec<DependenceFamily>,
}

impl FamilySequence {
    pub fn new(families: Vec<DependenceFamily>) -> Result<Self> {
        if families.is_empty() {
            return Err(Error::invalid("families", "sequence must be nonempty"));
        }
        let first = &families[0];
        for f in &families[1..] {
            if f.marginal_x() != first.marginal_x() || f.marginal_y() != first.marginal_y() {
                return Err(Error::AssumptionViolation(
                    "per-index families must share both marginals (same alpha, beta and scales)".into(),
                ));
            }
        }
        Ok(FamilySequence { families })
    }

    /// `n` independent copies of the same family.
    pub fn iid(family: DependenceFamily, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "horizon must be >= 1"));
        }
        Ok(FamilySequence { families: vec![family; n] })
    }

    pub fn len(&self) -> usize {
        self.families.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, i: usize) -> &DependenceFamily {
        &self.families[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DependenceFamily> {
        self.families.iter()
    }

    pub fn alpha(&self) -> f64 {
        self.families[0].alpha()
    }

    pub fn beta(&self) -> f64 {
        self.families[0].beta()
    }

    pub fn marginal_x(&self) -> &RVMarginal {
        self.families[0].marginal_x()
    }

    pub fn marginal_y(&self) -> &RVMarginal {
        self.families[0].marginal_y()
    }
}

/// Bounded integer law of the number of summands.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingLaw {
    atoms: Vec<(u32, f64)>,
}

impl StoppingLaw {
    pub fn new(atoms: &[(u32, f64)]) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("atoms", "stopping law needs at least one atom"));
        }
        let mut sum = 0.0;
        for &(_, p) in atoms {
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::invalid("atoms", format!("atom probability must be > 0, got {p}")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("atoms", format!("probabilities sum to {sum}, expected 1")));
        }
        let mut atoms: Vec<(u32, f64)> = atoms.iter().map(|&(v, p)| (v, p / sum)).collect();
        atoms.sort_by_key(|&(v, _)| v);
        if atoms.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("atoms", "atom values must be distinct"));
        }
        if atoms.iter().all(|&(v, _)| v == 0) {
            return Err(Error::invalid("atoms", "stopping number degenerate at zero"));
        }
        Ok(StoppingLaw { atoms })
    }

    /// Uniform on `{1, ..., m}`.
    pub fn uniform_1_to(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("m", "upper end must be >= 1"));
        }
        let p = 1.0 / m as f64;
        StoppingLaw::new(&(1..=m).map(|v| (v, p)).collect::<Vec<_>>())
    }

    pub fn atoms(&self) -> &[(u32, f64)] {
        &self.atoms
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|&(v, p)| v as f64 * p).sum()
    }

    pub fn max_value(&self) -> u32 {
        self.atoms[self.atoms.len() - 1].0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for &(v, p) in &self.atoms {
            acc += p;
            if u < acc {
                return v;
            }
        }
        self.max_value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn pareto(alpha: f64) -> RVMarginal {
        RVMarginal::new(alpha, 1.0).unwrap()
    }

    fn tilt_family() -> DependenceFamily {
        DependenceFamily::new(
            pareto(2.0),
            pareto(2.0),
            WeightLaw::uniform(0.0, 2.0).unwrap(),
            WeightLaw::uniform(0.0, 1.0).unwrap(),
            Variant::MarginalTilt { a1: 0.5, a2: -0.5 },
        )
        .unwrap()
    }

    fn mixture_family() -> DependenceFamily {
        DependenceFamily::new(
            pareto(2.0),
            pareto(2.0),
            WeightLaw::uniform(0.0, 2.0).unwrap(),
            WeightLaw::uniform(0.0, 2.0).unwrap(),
            Variant::JointMixture {
                mixing: MixingFn { c0: 0.25, c_theta: 0.125, c_delta: 0.125 },
            },
        )
        .unwrap()
    }

    #[test]
    fn h1_matches_fgm_tilt() {
        let fam = tilt_family();
        assert!((fam.h1(2.0).unwrap() - 1.5).abs() < 1e-15);
        assert!((fam.h1(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((fam.h1(0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(fam.h1(3.0).is_err());
    }

    #[test]
    fn h2_matches_fgm_tilt_with_negative_strength() {
        let fam = tilt_family();
        assert!((fam.h2(0.0).unwrap() - 1.5).abs() < 1e-15);
        assert!((fam.h2(1.0).unwrap() - 0.5).abs() < 1e-15);
        let ind = DependenceFamily::new(
            pareto(2.0),
            pareto(2.0),
            WeightLaw::uniform(0.0, 2.0).unwrap(),
            WeightLaw::uniform(0.0, 1.0).unwrap(),
            Variant::Independence { base_mix: 0.5 },
        )
        .unwrap();
        assert_eq!(ind.h1(1.3).unwrap(), 1.0);
        assert_eq!(ind.h2(0.2).unwrap(), 1.0);
    }

    #[test]
    fn g_of_joint_mixture_is_normalized_mixing() {
        let fam = mixture_family();
        // E[w] = 0.25 + 0.125 * (1 + 1) = 0.5; w(2,2) = 0.75.
        assert!((fam.w_bar() - 0.5).abs() < 1e-15);
        assert!((fam.g(2.0, 2.0).unwrap() - 1.5).abs() < 1e-15);
        let e_g = fam
            .theta_law()
            .expect(|t| fam.delta_law().expect(|d| fam.g(t, d).unwrap()).unwrap())
            .unwrap();
        assert!((e_g - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn factors_have_mean_one_for_all_variants() {
        for fam in [
            tilt_family(),
            mixture_family(),
            DependenceFamily::new(
                pareto(2.0),
                pareto(3.0),
                WeightLaw::discrete(&[(0.5, 0.25), (1.0, 0.5), (2.0, 0.25)]).unwrap(),
                WeightLaw::uniform(0.2, 0.9).unwrap(),
                Variant::MarginalTilt { a1: -1.0, a2: 0.7 },
            )
            .unwrap(),
        ] {
            let e_h1 = fam.theta_law().expect(|t| fam.h1(t).unwrap()).unwrap();
            let e_h2 = fam.delta_law().expect(|d| fam.h2(d).unwrap()).unwrap();
            assert!((e_h1 - 1.0).abs() <= 1e-10, "E[h1] = {e_h1}");
            assert!((e_h2 - 1.0).abs() <= 1e-10, "E[h2] = {e_h2}");
        }
    }

    #[test]
    fn factors_respect_their_bounds() {
        let fam = tilt_family();
        for i in 0..=100 {
            let t = 2.0 * i as f64 / 100.0;
            assert!(fam.h1(t).unwrap() <= fam.h1_bound() + 1e-15);
            let d = i as f64 / 100.0;
            assert!(fam.h2(d).unwrap() <= fam.h2_bound() + 1e-15);
        }
        let fam = mixture_family();
        // w_max = 0.75, w_bar = 0.5
        assert!((fam.g_bound() - 1.5).abs() < 1e-15);
        for i in 0..=20 {
            for j in 0..=20 {
                let (t, d) = (0.1 * i as f64, 0.1 * j as f64);
                assert!(fam.g(t, d).unwrap() <= fam.g_bound() + 1e-15);
            }
        }
    }

    #[test]
    fn mixture_rejects_vanishing_or_excess_probability() {
        let bad = DependenceFamily::new(
            pareto(2.0),
            pareto(2.0),
            WeightLaw::uniform(0.0, 2.0).unwrap(),
            WeightLaw::uniform(0.0, 2.0).unwrap(),
            Variant::JointMixture { mixing: MixingFn { c0: 0.0, c_theta: 0.25, c_delta: 0.0 } },
        );
        assert!(bad.is_err());
        let bad = DependenceFamily::new(
            pareto(2.0),
            pareto(2.0),
            WeightLaw::uniform(0.0, 2.0).unwrap(),
            WeightLaw::uniform(0.0, 2.0).unwrap(),
            Variant::JointMixture { mixing: MixingFn { c0: 0.5, c_theta: 0.25, c_delta: 0.25 } },
        );
        assert!(bad.is_err());
    }

    #[test]
    fn weight_law_moments_closed_form() {
        let u = WeightLaw::uniform(0.0, 2.0).unwrap();
        assert!((u.moment(2.0) - 4.0 / 3.0).abs() < 1e-14);
        assert!((u.moment(1.0) - 1.0).abs() < 1e-14);
        let d = WeightLaw::discrete(&[(1.0, 0.25), (3.0, 0.75)]).unwrap();
        assert!((d.moment(2.0) - (0.25 + 0.75 * 9.0)).abs() < 1e-14);
        assert!((d.mean() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn mean_rank_has_expectation_half() {
        for law in [
            WeightLaw::uniform(0.3, 1.7).unwrap(),
            WeightLaw::discrete(&[(0.5, 0.2), (1.0, 0.3), (2.0, 0.5)]).unwrap(),
            WeightLaw::degenerate(1.0).unwrap(),
        ] {
            let m = law.expect(|v| law.mean_rank(v)).unwrap();
            assert!((m - 0.5).abs() <= 1e-12, "E[rank] = {m}");
        }
    }

    #[test]
    fn weight_law_rejects_bad_input() {
        assert!(WeightLaw::uniform(-0.1, 1.0).is_err());
        assert!(WeightLaw::uniform(1.0, 1.0).is_err());
        assert!(WeightLaw::discrete(&[]).is_err());
        assert!(WeightLaw::discrete(&[(0.0, 1.0)]).is_err());
        assert!(WeightLaw::discrete(&[(1.0, 0.4)]).is_err());
        assert!(WeightLaw::discrete(&[(1.0, 0.5), (1.0, 0.5)]).is_err());
    }

    fn ks_statistic_vs_uniform(mut u: Vec<f64>) -> f64 {
        u.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let n = u.len() as f64;
        u.iter()
            .enumerate()
            .map(|(i, &v)| {
                let low = v - i as f64 / n;
                let high = (i + 1) as f64 / n - v;
                low.max(high)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn marginals_survive_the_dependence_exactly() {
        // Probability-integral transform of each coordinate is uniform; reject
        // at the 1% KS level.
        let n = 100_000;
        let critical = 1.63 / (n as f64).sqrt();
        for (label, fam) in [
            ("independence", DependenceFamily::new(
                pareto(2.0),
                pareto(3.0),
                WeightLaw::uniform(0.0, 2.0).unwrap(),
                WeightLaw::uniform(0.0, 1.0).unwrap(),
                Variant::Independence { base_mix: 0.5 },
            )
            .unwrap()),
            ("tilt", tilt_family()),
            ("mixture", mixture_family()),
        ] {
            let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_100b);
            let mut ux = Vec::with_capacity(n);
            let mut uy = Vec::with_capacity(n);
            for _ in 0..n {
                let s = fam.sample_joint(&mut rng);
                ux.push(fam.marginal_x().survival(s.x));
                uy.push(fam.marginal_y().survival(s.y));
            }
            let dx = ks_statistic_vs_uniform(ux);
            let dy = ks_statistic_vs_uniform(uy);
            assert!(dx < critical, "{label}: KS X = {dx} >= {critical}");
            assert!(dy < critical, "{label}: KS Y = {dy} >= {critical}");
        }
    }

    #[test]
    fn tilt_dependence_sign_follows_strength() {
        // Correlation between survival(X) and rank(Theta): negative when a1 > 0
        // (large theta drags X up, pushing its survival down).
        let n = 100_000;
        for (a1, expect_negative) in [(0.8, true), (-0.8, false)] {
            let fam = DependenceFamily::new(
                pareto(2.0),
                pareto(2.0),
                WeightLaw::uniform(0.0, 2.0).unwrap(),
                WeightLaw::uniform(0.0, 2.0).unwrap(),
                Variant::MarginalTilt { a1, a2: 0.0 },
            )
            .unwrap();
            let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_1002);
            let (mut su, mut sr, mut suu, mut srr, mut sur) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for _ in 0..n {
                let s = fam.sample_joint(&mut rng);
                let u = fam.marginal_x().survival(s.x);
                let r = fam.theta_law().mean_rank(s.theta);
                su += u;
                sr += r;
                suu += u * u;
                srr += r * r;
                sur += u * r;
            }
            let nf = n as f64;
            let cov = sur / nf - (su / nf) * (sr / nf);
            let corr = cov / ((suu / nf - (su / nf).powi(2)).sqrt() * (srr / nf - (sr / nf).powi(2)).sqrt());
            assert!(corr.abs() > 0.05, "a1={a1}: correlation too weak ({corr})");
            assert_eq!(corr < 0.0, expect_negative, "a1={a1}: corr = {corr}");
        }
    }

    #[test]
    fn conditional_survival_matches_tilt_factor_at_depth() {
        let fam = tilt_family();
        // At large thresholds the conditional/unconditional ratio approaches h1.
        let x = 1e4;
        let ratio = fam.cond_survival_x(x, 2.0) / fam.marginal_x().survival(x);
        assert!((ratio - 1.5).abs() < 1e-3, "ratio = {ratio}");
        // Exact second-order form: u (u + h (1 - u)).
        let u = fam.marginal_x().survival(7.0);
        let exact = u * (u + 1.5 * (1.0 - u));
        assert!((fam.cond_survival_x(7.0, 2.0) - exact).abs() < 1e-15);
    }

    #[test]
    fn fgm_conditional_law_is_a_valid_distribution() {
        // The conditional draw inverts (1+d)F - dF^2 = v; push draws back
        // through the conditional CDF and check uniformity.
        let fam = tilt_family();
        let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_1003);
        let n = 50_000;
        let theta = 1.8;
        let h = fam.h1(theta).unwrap();
        let d = 1.0 - h;
        let mut vs = Vec::with_capacity(n);
        for _ in 0..n {
            let x = fam.fgm_conditional_draw(fam.marginal_x(), 0.5, fam.theta_law().mean_rank(theta), &mut rng);
            let f = fam.marginal_x().cdf(x);
            vs.push((1.0 + d) * f - d * f * f);
        }
        let ks = ks_statistic_vs_uniform(vs);
        assert!(ks < 1.63 / (n as f64).sqrt(), "KS = {ks}");
    }

    #[test]
    fn joint_mixture_joint_tail_given_weights() {
        let fam = mixture_family();
        // Comonotone part dominates: P[X>x, Y>y | t, d] = w min(sx, sy) + (1-w) sx sy.
        let (x, y, t, d) = (50.0, 80.0, 2.0, 2.0);
        let sx = fam.marginal_x().survival(x);
        let sy = fam.marginal_y().survival(y);
        let w = 0.75;
        let expect = w * sx.min(sy) + (1.0 - w) * sx * sy;
        assert!((fam.joint_cond_survival(x, y, t, d) - expect).abs() < 1e-15);
        // Empirical check at moderate thresholds; the formula is exact at all
        // levels and affine in w, so the cell-averaged target is exact too.
        let (x, y) = (5.0, 8.0);
        let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_1004);
        let n = 2_000_000u64;
        let mut hits = 0u64;
        let mut cell = 0u64;
        for _ in 0..n {
            let s = fam.sample_joint(&mut rng);
            if s.theta > 1.9 && s.delta > 1.9 {
                cell += 1;
                if s.x > x && s.y > y {
                    hits += 1;
                }
            }
        }
        let emp = hits as f64 / cell as f64;
        let target = fam.joint_cond_survival(x, y, 1.95, 1.95);
        let se = (target * (1.0 - target) / cell as f64).sqrt();
        assert!((emp - target).abs() < 5.0 * se, "emp {emp} vs {target}");
    }

    #[test]
    fn verify_assumptions_reports_clean_families() {
        let fam = tilt_family();
        let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_1005);
        let report = fam.verify_assumptions(200_000, &[20.0, 100.0], 1.0, &mut rng).unwrap();
        assert!(report.mean_one_error() <= 1e-10, "mean-one error {}", report.mean_one_error());
        // Frozen oracle: E[Theta^3 h1(Theta)] = (1/2) int_0^2 t^3 (0.5 + 0.5 t) dt = 13/5.
        assert!((report.theta_moment_margin - 2.6).abs() < 1e-10);
        assert!(!report.flagged, "clean family flagged: {:?}", report.ratio_checks.iter().map(|c| c.deviation_sigmas()).collect::<Vec<_>>());
        assert!((report.hill_x - 2.0).abs() < 0.5, "hill_x = {}", report.hill_x);
        assert_eq!(report.matuszewska_x, (2.0, 2.0));
    }

    #[test]
    fn verify_assumptions_rejects_bad_arguments() {
        let fam = tilt_family();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        assert!(fam.verify_assumptions(10, &[20.0], 1.0, &mut rng).is_err());
        assert!(fam.verify_assumptions(2_000, &[], 1.0, &mut rng).is_err());
        assert!(fam.verify_assumptions(2_000, &[0.5], 1.0, &mut rng).is_err());
        assert!(fam.verify_assumptions(2_000, &[20.0], 0.0, &mut rng).is_err());
    }

    #[test]
    fn family_sequence_demands_shared_marginals() {
        let a = tilt_family();
        let mut families = vec![a.clone(), a.clone()];
        assert_eq!(FamilySequence::new(families.clone()).unwrap().len(), 2);
        families.push(
            DependenceFamily::new(
                pareto(3.0),
                pareto(2.0),
                WeightLaw::uniform(0.0, 2.0).unwrap(),
                WeightLaw::uniform(0.0, 1.0).unwrap(),
                Variant::MarginalTilt { a1: 0.5, a2: -0.5 },
            )
            .unwrap(),
        );
        assert!(FamilySequence::new(families).is_err());
        assert!(FamilySequence::iid(a, 0).is_err());
    }

    #[test]
    fn stopping_law_mean_and_validation() {
        let n = StoppingLaw::new(&[(1, 0.9), (10, 0.1)]).unwrap();
        assert!((n.mean() - 1.9).abs() < 1e-14);
        assert_eq!(n.max_value(), 10);
        let u = StoppingLaw::uniform_1_to(3).unwrap();
        assert!((u.mean() - 2.0).abs() < 1e-14);
        assert!(StoppingLaw::new(&[]).is_err());
        assert!(StoppingLaw::new(&[(0, 1.0)]).is_err());
        assert!(StoppingLaw::new(&[(1, 0.5)]).is_err());
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..100 {
            let v = u.sample(&mut rng);
            assert!((1..=3).contains(&v));
        }
    }

    #[test]
    fn comonotone_branch_has_equal_quantile_levels() {
        let fam = DependenceFamily::new(
            pareto(2.0),
            RVMarginal::new(3.0, 2.0).unwrap(),
            WeightLaw::degenerate(1.0).unwrap(),
            WeightLaw::degenerate(1.0).unwrap(),
            Variant::Independence { base_mix: 1.0 },
        )
        .unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_1006);
        for _ in 0..100 {
            let s = fam.sample_joint(&mut rng);
            assert_eq!(s.branch, Branch::Comonotone);
            let lx = fam.marginal_x().survival(s.x);
            let ly = fam.marginal_y().survival(s.y);
            assert!((lx - ly).abs() < 1e-12, "levels {lx} vs {ly}");
        }
    }
}
