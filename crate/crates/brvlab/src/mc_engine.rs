//! Seeded, reproducible Monte-Carlo estimation.
//!
//! Work is cut into fixed blocks of at most 2^16 samples. Block `i` draws
//! from its own counter-derived ChaCha stream, blocks run on whatever rayon
//! pool is installed, and the per-block summaries are pooled in block order.
//! The estimate therefore depends only on `(seed, sample count)`: changing
//! the worker count reassigns blocks to threads but cannot change a single
//! drawn number or the order they are folded in.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dep_families::{DependenceFamily, FamilySequence};
use crate::error::{Error, Result};

/// Upper bound on samples per scheduling block.
pub const TASK_CHUNK: u64 = 1 << 16;

/// Point estimate with its standard error. `hits` carries the raw exceedance
/// count for indicator-type estimates, so "estimated zero because nothing was
/// observed" stays distinguishable from a genuinely tiny positive estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub point: f64,
    pub stderr: f64,
    pub n: u64,
    pub hits: Option<u64>,
}

impl Estimate {
    pub fn ci95(&self) -> (f64, f64) {
        let half = 1.959963984540054 * self.stderr;
        (self.point - half, self.point + half)
    }

    /// No observed exceedance at all: the point estimate is exactly zero and
    /// the standard error is uninformative.
    pub fn is_degenerate(&self) -> bool {
        self.hits == Some(0)
    }

    /// Fewer hits than the rule-of-thumb floor for a usable relative error.
    pub fn low_hits(&self) -> bool {
        matches!(self.hits, Some(h) if h < 50)
    }

    /// Rescale the estimated quantity by a known constant.
    pub fn scale(self, c: f64) -> Estimate {
        Estimate { point: self.point * c, stderr: self.stderr * c.abs(), ..self }
    }
}

/// Pool independent partial estimates. The point is the sample-size-weighted
/// mean; the variance adds as `sum (n_i se_i)^2 / N^2`, which is exact for
/// independent parts and supports a ragged final block.
pub fn merge(parts: &[Estimate]) -> Result<Estimate> {
    let n: u64 = parts.iter().map(|e| e.n).sum();
    if n == 0 {
        return Err(Error::EmptyMerge);
    }
    let nf = n as f64;
    let mut point = 0.0;
    let mut var = 0.0;
    let mut hits = Some(0u64);
    for e in parts {
        point += e.n as f64 * e.point;
        var += (e.n as f64 * e.stderr).powi(2);
        hits = match (hits, e.hits) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
    }
    Ok(Estimate { point: point / nf, stderr: var.sqrt() / nf, n, hits })
}

// --- deterministic stream derivation -----------------------------------------

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Address of one random stream: a master seed plus a task counter. `child`
/// derives an unrelated master for a separate purpose (so adding samples to
/// one estimator can never shift another's draws); `task` selects the block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StreamSpec {
    master: u64,
    task: u64,
}

impl StreamSpec {
    pub fn new(seed: u64) -> Self {
        StreamSpec { master: seed, task: 0 }
    }

    pub fn child(&self, tag: u64) -> Self {
        let m = mix(self.master.wrapping_add(GOLDEN) ^ mix(tag ^ 0xC2B2_AE3D_27D4_EB4F));
        StreamSpec { master: m, task: 0 }
    }

    pub fn task(&self, index: u64) -> Self {
        StreamSpec { master: self.master, task: index }
    }

    /// Expand `(master, task)` into a full 256-bit ChaCha seed.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut state = self.master ^ mix(self.task.wrapping_mul(GOLDEN).wrapping_add(1));
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            state = state.wrapping_add(GOLDEN);
            chunk.copy_from_slice(&mix(state).to_le_bytes());
        }
        ChaCha12Rng::from_seed(seed)
    }
}

/// Near-equal block sizes: `ceil(n / TASK_CHUNK)` blocks, none tiny.
fn block_sizes(n: u64) -> Vec<u64> {
    let k = n.div_ceil(TASK_CHUNK).max(1);
    let base = n / k;
    let rem = n % k;
    (0..k).map(|i| base + u64::from(i < rem)).collect()
}

/// Run one closure per block on the current rayon pool and return the results
/// in block order.
pub(crate) fn map_blocks<B, F>(stream: &StreamSpec, n_total: u64, per_block: F) -> Vec<B>
where
    B: Send,
    F: Fn(&mut ChaCha12Rng, u64) -> B + Sync,
{
    block_sizes(n_total)
        .par_iter()
        .enumerate()
        .map(|(i, &size)| {
            let mut rng = stream.task(i as u64).rng();
            per_block(&mut rng, size)
        })
        .collect()
}

fn check_samples(n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("samples", "need at least one sample"));
    }
    Ok(())
}

/// Mean of a bounded-variance sampler.
pub fn estimate_values<F>(stream: &StreamSpec, n_total: u64, sampler: F) -> Result<Estimate>
where
    F: Fn(&mut ChaCha12Rng) -> f64 + Sync,
{
    check_samples(n_total)?;
    let parts = map_blocks(stream, n_total, |rng, size| {
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..size {
            let v = sampler(rng);
            sum += v;
            sumsq += v * v;
        }
        let n = size as f64;
        let mean = sum / n;
        let var = if size > 1 { ((sumsq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
        Estimate { point: mean, stderr: (var / n).sqrt(), n: size, hits: None }
    });
    merge(&parts)
}

/// Probability of an event, with the raw hit count retained.
pub fn estimate_indicator<F>(stream: &StreamSpec, n_total: u64, event: F) -> Result<Estimate>
where
    F: Fn(&mut ChaCha12Rng) -> bool + Sync,
{
    check_samples(n_total)?;
    let parts = map_blocks(stream, n_total, |rng, size| {
        let mut hits = 0u64;
        for _ in 0..size {
            if event(rng) {
                hits += 1;
            }
        }
        let n = size as f64;
        let p = hits as f64 / n;
        Estimate { point: p, stderr: (p * (1.0 - p) / n).sqrt(), n: size, hits: Some(hits) }
    });
    merge(&parts)
}

fn check_level(x: f64) -> Result<()> {
    if !x.is_finite() || x <= 1.0 {
        return Err(Error::invalid("x", format!("tail level must be finite and > 1, got {x}")));
    }
    Ok(())
}

fn check_coord(name: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::invalid(name, format!("must be finite and > 0, got {v}")));
    }
    Ok(())
}

/// Estimate of `x * P[Theta X > U_F(x) p, Delta Y > U_G(x) q]` for one pair.
///
/// The claims are integrated out exactly: each sample draws only the weights
/// and evaluates the closed-form conditional joint survival at the weighted
/// thresholds. All Monte-Carlo noise comes from the weight laws, so the
/// standard error stays bounded as `x` grows.
pub fn estimate_scaled_corner(
    fam: &DependenceFamily,
    p: f64,
    q: f64,
    x: f64,
    n: u64,
    stream: &StreamSpec,
) -> Result<Estimate> {
    check_level(x)?;
    check_coord("p", p)?;
    check_coord("q", q)?;
    let tx = fam.marginal_x().normalization_u(x)? * p;
    let ty = fam.marginal_y().normalization_u(x)? * q;
    let est = estimate_values(stream, n, |rng| {
        let theta = fam.theta_law().sample(rng);
        let delta = fam.delta_law().sample(rng);
        fam.joint_cond_survival(tx / theta, ty / delta, theta, delta)
    })?;
    Ok(est.scale(x))
}

/// Which marginal sum a tail estimate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    X,
    Y,
}

/// Estimate of `x * P[sum_i Theta_i X_i > U(x) c]` for the chosen side, where
/// `U` is that side's normalizing function and `c` the corner coordinate.
///
/// A single-term sum integrates the claim out exactly as in
/// `estimate_scaled_corner`; longer horizons walk whole paths and count
/// exceedances.
pub fn estimate_marginal_sum_tail(
    seq: &FamilySequence,
    side: Side,
    c: f64,
    x: f64,
    n: u64,
    stream: &StreamSpec,
) -> Result<Estimate> {
    check_level(x)?;
    check_coord("c", c)?;
    let marginal = match side {
        Side::X => seq.marginal_x(),
        Side::Y => seq.marginal_y(),
    };
    let threshold = marginal.normalization_u(x)? * c;
    let est = if seq.len() == 1 {
        let fam = seq.get(0);
        estimate_values(stream, n, |rng| match side {
            Side::X => {
                let theta = fam.theta_law().sample(rng);
                fam.cond_survival_x(threshold / theta, theta)
            }
            Side::Y => {
                let delta = fam.delta_law().sample(rng);
                fam.cond_survival_y(threshold / delta, delta)
            }
        })?
    } else {
        estimate_indicator(stream, n, |rng| {
            let mut acc = 0.0;
            for fam in seq.iter() {
                let s = fam.sample_joint(rng);
                acc += match side {
                    Side::X => s.theta * s.x,
                    Side::Y => s.delta * s.y,
                };
            }
            acc > threshold
        })?
    };
    Ok(est.scale(x))
}

/// Estimate of `x * P[sum Theta_i X_i > U_F(x) p, sum Delta_i Y_i > U_G(x) q]`
/// by plain path simulation over the horizon.
pub fn estimate_scaled_sum_corner(
    seq: &FamilySequence,
    p: f64,
    q: f64,
    x: f64,
    n_paths: u64,
    stream: &StreamSpec,
) -> Result<Estimate> {
    check_level(x)?;
    check_coord("p", p)?;
    check_coord("q", q)?;
    let tx = seq.marginal_x().normalization_u(x)? * p;
    let ty = seq.marginal_y().normalization_u(x)? * q;
    let est = estimate_indicator(stream, n_paths, |rng| {
        let mut sx = 0.0;
        let mut sy = 0.0;
        for fam in seq.iter() {
            let s = fam.sample_joint(rng);
            sx += s.theta * s.x;
            sy += s.delta * s.y;
        }
        sx > tx && sy > ty
    })?;
    Ok(est.scale(x))
}

/// Conditional tail ratio `P[X-sum exceeds | Y-sum exceeds]` at level `x`:
/// numerator event `sum Theta_i X_i > U_F(x) p` inside the conditioning event
/// `sum Delta_i Y_i > U_G(x) q`.
///
/// A single-term horizon integrates both claims out per weight draw and uses
/// the delta-method error for the ratio of means; longer horizons count the
/// two events pathwise and treat the numerator as binomial within the
/// conditioning hits.
pub fn estimate_cr(
    seq: &FamilySequence,
    p: f64,
    q: f64,
    x: f64,
    n: u64,
    stream: &StreamSpec,
) -> Result<Estimate> {
    check_level(x)?;
    check_coord("p", p)?;
    check_coord("q", q)?;
    check_samples(n)?;
    let tx = seq.marginal_x().normalization_u(x)? * p;
    let ty = seq.marginal_y().normalization_u(x)? * q;

    if seq.len() == 1 {
        let fam = seq.get(0);
        // Per weight draw: u = joint conditional survival, v = conditional
        // survival of the conditioning side.
        let parts = map_blocks(stream, n, |rng, size| {
            let (mut su, mut sv, mut suu, mut svv, mut suv) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for _ in 0..size {
                let theta = fam.theta_law().sample(rng);
                let delta = fam.delta_law().sample(rng);
                let u = fam.joint_cond_survival(tx / theta, ty / delta, theta, delta);
                let v = fam.cond_survival_y(ty / delta, delta);
                su += u;
                sv += v;
                suu += u * u;
                svv += v * v;
                suv += u * v;
            }
            (su, sv, suu, svv, suv, size)
        });
        let (mut su, mut sv, mut suu, mut svv, mut suv, mut nn) = (0.0, 0.0, 0.0, 0.0, 0.0, 0u64);
        for (a, b, c, d, e, m) in parts {
            su += a;
            sv += b;
            suu += c;
            svv += d;
            suv += e;
            nn += m;
        }
        if sv <= 0.0 {
            return Err(Error::DegenerateEstimate("conditioning tail mass is numerically zero".into()));
        }
        let nf = nn as f64;
        let r = su / sv;
        let resid = ((suu - 2.0 * r * suv + r * r * svv) / (nf - 1.0).max(1.0)).max(0.0);
        let se = (resid / nf).sqrt() / (sv / nf);
        return Ok(Estimate { point: r, stderr: se, n: nn, hits: None });
    }

    let parts = map_blocks(stream, n, |rng, size| {
        let mut den = 0u64;
        let mut num = 0u64;
        for _ in 0..size {
            let mut sx = 0.0;
            let mut sy = 0.0;
            for fam in seq.iter() {
                let s = fam.sample_joint(rng);
                sx += s.theta * s.x;
                sy += s.delta * s.y;
            }
            if sy > ty {
                den += 1;
                if sx > tx {
                    num += 1;
                }
            }
        }
        (num, den)
    });
    let (num, den) = parts.iter().fold((0u64, 0u64), |(a, b), &(c, d)| (a + c, b + d));
    if den == 0 {
        return Err(Error::DegenerateEstimate("no conditioning exceedances observed".into()));
    }
    let r = num as f64 / den as f64;
    let se = (r * (1.0 - r) / den as f64).sqrt();
    Ok(Estimate { point: r, stderr: se, n, hits: Some(num) })
}
