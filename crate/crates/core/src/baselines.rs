//! Single-partition product partition baselines.
//!
//! * [`run_lcia05`]: one partition shared by mean and variance, with a
//!   Normal-Inverse-Gamma prior per block integrated out in the scan.
//! * [`run_bh93`]: one partition for the mean, block means
//!   `mu* ~ N(mu0, sigma0sq / n_j)`, one variance shared by all instants and a
//!   change probability restricted to `(0, p_max)`.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::gibbs::{scan_indicators, validate_data, McmcConfig};
use crate::normal::{draw_beta, draw_inv_gamma, draw_normal, floor_variance, sample_p, LN_2PI};
use crate::partition::{ChangeIndicators, Partition, YaoPrior};
use crate::rng::chain_rng;
use crate::samples::{Draw, ModelKind, PosteriorSamples};

/// Normal-Inverse-Gamma block prior: `sigma2* ~ IG(d/2, a/2)`,
/// `mu* | sigma2* ~ N(m, v sigma2*)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NigHyper {
    pub m: f64,
    pub v: f64,
    pub a: f64,
    pub d: f64,
}

impl NigHyper {
    pub fn new(m: f64, v: f64, a: f64, d: f64) -> Result<Self> {
        let h = Self { m, v, a, d };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.m.is_finite() {
            return Err(Error::domain(format!("m must be finite, got {}", self.m)));
        }
        for (name, value) in [("v", self.v), ("a", self.a), ("d", self.d)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::domain(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for NigHyper {
    fn default() -> Self {
        Self {
            m: 0.0,
            v: 2.0,
            a: 0.1,
            d: 2.1,
        }
    }
}

/// Posterior NIG parameters of a block from its count, mean and centred sum of squares.
struct NigPosterior {
    kappa_n: f64,
    mean_n: f64,
    shape: f64,
    scale: f64,
}

fn nig_posterior(n: f64, mean: f64, ss: f64, h: &NigHyper) -> NigPosterior {
    let kappa0 = 1.0 / h.v;
    let kappa_n = kappa0 + n;
    NigPosterior {
        kappa_n,
        mean_n: (kappa0 * h.m + n * mean) / kappa_n,
        shape: (h.d + n) / 2.0,
        scale: (h.a + ss.max(0.0) + kappa0 * n * (mean - h.m).powi(2) / kappa_n) / 2.0,
    }
}

fn nig_log_marginal(
    n: f64,
    mean: f64,
    ss: f64,
    h: &NigHyper,
    lgamma_shape: f64,
    lgamma_half_d: f64,
) -> f64 {
    let post = nig_posterior(n, mean, ss, h);
    let kappa0 = 1.0 / h.v;
    -0.5 * n * LN_2PI + 0.5 * (kappa0 / post.kappa_n).ln() + h.d / 2.0 * (h.a / 2.0).ln()
        - post.shape * post.scale.ln()
        + lgamma_shape
        - lgamma_half_d
}

fn check_block(n: usize, block: &Range<usize>) -> Result<()> {
    if block.is_empty() {
        return Err(Error::EmptyBlock);
    }
    if block.end > n {
        return Err(Error::domain(format!(
            "block {}..{} outside series of length {n}",
            block.start, block.end
        )));
    }
    Ok(())
}

/// `log f(X_S)` with both block parameters integrated out under [`NigHyper`].
pub fn log_marginal_nig_cluster(x: &[f64], block: Range<usize>, hyper: &NigHyper) -> Result<f64> {
    check_block(x.len(), &block)?;
    let xs = &x[block];
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    Ok(nig_log_marginal(
        n,
        mean,
        ss,
        hyper,
        ln_gamma((hyper.d + n) / 2.0),
        ln_gamma(hyper.d / 2.0),
    ))
}

/// Prefix sums of shifted data and squares.
#[derive(Clone, Debug)]
struct MomentPrefix {
    shift: f64,
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl MomentPrefix {
    fn new(x: &[f64]) -> Self {
        let shift = x.iter().sum::<f64>() / x.len() as f64;
        let mut s1 = Vec::with_capacity(x.len() + 1);
        let mut s2 = Vec::with_capacity(x.len() + 1);
        let (mut a, mut b) = (0.0, 0.0);
        s1.push(0.0);
        s2.push(0.0);
        for &xi in x {
            let y = xi - shift;
            a += y;
            b += y * y;
            s1.push(a);
            s2.push(b);
        }
        Self { shift, s1, s2 }
    }

    /// `(count, mean, centred sum of squares)` of a block.
    #[inline]
    fn stats(&self, block: &Range<usize>) -> (f64, f64, f64) {
        let n = block.len() as f64;
        let sum = self.s1[block.end] - self.s1[block.start];
        let sq = self.s2[block.end] - self.s2[block.start];
        let mean = sum / n;
        (n, mean + self.shift, (sq - sum * mean).max(0.0))
    }
}

fn empty_state(n: usize) -> (ChangeIndicators, Vec<usize>) {
    (ChangeIndicators::none_changed(n), Vec::with_capacity(n))
}

/// Gibbs sampler for the shared-partition Normal-Inverse-Gamma model.
///
/// Each sweep draws `p` from its Beta full conditional, scans the indicators
/// with both block parameters integrated out and then draws `(mu*, sigma2*)`
/// per block from the joint posterior for the output.
pub fn run_lcia05(
    x: &[f64],
    hyper: &NigHyper,
    yao: &YaoPrior,
    config: &McmcConfig,
) -> Result<PosteriorSamples> {
    validate_data(x)?;
    hyper.validate()?;
    yao.validate()?;
    config.validate()?;
    let n = x.len();
    let mut rng = chain_rng(config.seed);
    let prefix = MomentPrefix::new(x);
    let lgamma_shape: Vec<f64> = (0..=n)
        .map(|m| ln_gamma((hyper.d + m as f64) / 2.0))
        .collect();
    let lgamma_half_d = ln_gamma(hyper.d / 2.0);
    let log_marginal = |r: Range<usize>| {
        let m = r.len();
        let (cnt, mean, ss) = prefix.stats(&r);
        nig_log_marginal(cnt, mean, ss, hyper, lgamma_shape[m], lgamma_half_d)
    };

    let (mut u, mut right_end) = empty_state(n);
    if config.init == crate::gibbs::InitMode::AllChanged {
        u = ChangeIndicators::all_changed(n);
    }
    let mut samples = PosteriorSamples::new(ModelKind::Lcia05, n);
    samples.draws.reserve(config.retained());
    for t in 0..config.warmup + config.iterations {
        let b = u.num_changes() + 1;
        let p = draw_beta(
            yao.alpha + (b - 1) as f64,
            (n - b) as f64 + yao.beta,
            &mut rng,
        );
        let odds = (-p).ln_1p() - p.ln();
        scan_indicators(&mut u, &mut right_end, odds, log_marginal, &mut rng);
        let rho = u.to_partition();
        let mut mu = Vec::with_capacity(rho.num_blocks());
        let mut s2 = Vec::with_capacity(rho.num_blocks());
        for block in rho.blocks() {
            let (cnt, mean, ss) = prefix.stats(&block);
            let post = nig_posterior(cnt, mean, ss, hyper);
            let v = draw_inv_gamma(post.shape, post.scale, &mut rng);
            mu.push(draw_normal(
                post.mean_n,
                (v / post.kappa_n).sqrt(),
                &mut rng,
            ));
            s2.push(v);
        }
        if t >= config.warmup && (t - config.warmup) % config.thin == config.thin - 1 {
            samples.draws.push(Draw {
                mean_partition: rho.clone(),
                mean_values: mu,
                var_partition: rho,
                var_values: s2,
                p1: p,
                p2: None,
            });
        }
    }
    Ok(samples)
}

/// Prior on the shared variance of the mean-change baseline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SharedVariance {
    /// Known variance.
    Fixed { sigma2: f64 },
    /// `sigma2 ~ IG(d/2, a/2)`, updated by Gibbs.
    InverseGamma { a: f64, d: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bh93Hyper {
    pub mu0: f64,
    pub sigma0sq: f64,
    pub sigma2: SharedVariance,
    pub p_max: f64,
}

impl Bh93Hyper {
    /// Data-driven defaults: `mu0` the sample mean, `sigma0sq` the sample
    /// variance, `sigma2 ~ IG(2.1/2, 0.1/2)` and `p_max = 0.05`.
    pub fn from_data(x: &[f64]) -> Result<Self> {
        validate_data(x)?;
        let (mean, var) = sample_mean_var(x);
        Ok(Self {
            mu0: mean,
            sigma0sq: if var > 0.0 { var } else { 1.0 },
            sigma2: SharedVariance::InverseGamma { a: 0.1, d: 2.1 },
            p_max: 0.05,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu0.is_finite() {
            return Err(Error::domain(format!(
                "mu0 must be finite, got {}",
                self.mu0
            )));
        }
        if !(self.sigma0sq > 0.0 && self.sigma0sq.is_finite()) {
            return Err(Error::domain(format!(
                "sigma0sq must be positive, got {}",
                self.sigma0sq
            )));
        }
        check_p_max(self.p_max)?;
        match self.sigma2 {
            SharedVariance::Fixed { sigma2 } if !(sigma2 > 0.0 && sigma2.is_finite()) => Err(
                Error::domain(format!("sigma2 must be positive, got {sigma2}")),
            ),
            SharedVariance::InverseGamma { a, d }
                if !(a > 0.0 && d > 0.0 && a.is_finite() && d.is_finite()) =>
            {
                Err(Error::domain(format!(
                    "a and d must be positive, got ({a}, {d})"
                )))
            }
            _ => Ok(()),
        }
    }
}

fn check_p_max(p_max: f64) -> Result<()> {
    if !(p_max > 0.0 && p_max <= 1.0) {
        return Err(Error::domain(format!(
            "p_max must lie in (0, 1], got {p_max}"
        )));
    }
    Ok(())
}

fn sample_mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = if x.len() > 1 {
        x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// One draw from `Beta(alpha + b - 1, n + beta - b)` restricted to `(0, p_max)`,
/// by inverting the regularized incomplete beta function.
pub fn sample_p_truncated<R: Rng + ?Sized>(
    b: usize,
    n: usize,
    alpha: f64,
    beta: f64,
    p_max: f64,
    rng: &mut R,
) -> Result<f64> {
    check_p_max(p_max)?;
    if p_max == 1.0 {
        return sample_p(b, n, alpha, beta, rng);
    }
    if b == 0 || b > n {
        return Err(Error::domain(format!("block count {b} outside 1..={n}")));
    }
    if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(Error::domain(format!(
            "Beta parameters must be positive, got ({alpha}, {beta})"
        )));
    }
    let (a, bb) = (alpha + (b - 1) as f64, (n - b) as f64 + beta);
    let top = beta_reg(a, bb, p_max);
    if !(top > 0.0) {
        // No representable mass below p_max: the restricted law sits at its edge.
        return Ok(p_max * (1.0 - f64::EPSILON));
    }
    let target = rng.random::<f64>() * top;
    let (mut lo, mut hi) = (0.0_f64, p_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, bb, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = 0.5 * (lo + hi);
    Ok(if p > 0.0 {
        p.min(p_max * (1.0 - f64::EPSILON))
    } else {
        f64::MIN_POSITIVE
    })
}

/// One draw of the shared variance from `IG((n + d)/2, (sum (x_i - mu_i)^2 + a)/2)`.
pub fn sample_shared_variance<R: Rng + ?Sized>(
    x: &[f64],
    mu: &[f64],
    a: f64,
    d: f64,
    rng: &mut R,
) -> f64 {
    let ss: f64 = x.iter().zip(mu).map(|(xi, m)| (xi - m).powi(2)).sum();
    draw_inv_gamma((x.len() as f64 + d) / 2.0, (ss + a) / 2.0, rng)
}

/// Log marginal of a block under `mu* ~ N(mu0, sigma0sq / m)` and a known
/// common variance `sigma2`, for `m` points with mean `mean` and centred sum
/// of squares `ss`.
fn bh93_log_marginal(m: f64, mean: f64, ss: f64, sigma2: f64, h: &Bh93Hyper) -> f64 {
    -0.5 * m * (LN_2PI + sigma2.ln())
        - 0.5 * (h.sigma0sq / sigma2).ln_1p()
        - 0.5 * (ss / sigma2 + m * (mean - h.mu0).powi(2) / (sigma2 + h.sigma0sq))
}

/// Gibbs sampler for the mean-change baseline.
///
/// Each sweep draws `p` from its truncated Beta full conditional, scans the
/// indicators with the block means integrated out given the shared variance,
/// draws the block means and finally the shared variance.
pub fn run_bh93(x: &[f64], hyper: &Bh93Hyper, config: &McmcConfig) -> Result<PosteriorSamples> {
    validate_data(x)?;
    hyper.validate()?;
    config.validate()?;
    let n = x.len();
    let mut rng = chain_rng(config.seed);
    let prefix = MomentPrefix::new(x);

    let mut sigma2 = match hyper.sigma2 {
        SharedVariance::Fixed { sigma2 } => sigma2,
        SharedVariance::InverseGamma { .. } => {
            let (_, var) = sample_mean_var(x);
            floor_variance(if var > 0.0 { var } else { 1.0 })
        }
    };
    let (mut u, mut right_end) = empty_state(n);
    if config.init == crate::gibbs::InitMode::AllChanged {
        u = ChangeIndicators::all_changed(n);
    }
    let mut mu_full = vec![0.0; n];
    let mut samples = PosteriorSamples::new(ModelKind::Bh93, n);
    samples.draws.reserve(config.retained());
    for t in 0..config.warmup + config.iterations {
        let b = u.num_changes() + 1;
        let p = sample_p_truncated(b, n, 1.0, 1.0, hyper.p_max, &mut rng)?;
        let odds = (-p).ln_1p() - p.ln();
        let s2 = sigma2;
        scan_indicators(
            &mut u,
            &mut right_end,
            odds,
            |r| {
                let (m, mean, ss) = prefix.stats(&r);
                bh93_log_marginal(m, mean, ss, s2, hyper)
            },
            &mut rng,
        );
        let rho: Partition = u.to_partition();
        let mut mu = Vec::with_capacity(rho.num_blocks());
        for block in rho.blocks() {
            let (m, mean, _) = prefix.stats(&block);
            let precision = m / sigma2 + m / hyper.sigma0sq;
            let centre = (m * mean / sigma2 + m * hyper.mu0 / hyper.sigma0sq) / precision;
            let value = draw_normal(centre, (1.0 / precision).sqrt(), &mut rng);
            mu_full[block.clone()].fill(value);
            mu.push(value);
        }
        if let SharedVariance::InverseGamma { a, d } = hyper.sigma2 {
            sigma2 = sample_shared_variance(x, &mu_full, a, d, &mut rng);
        }
        if t >= config.warmup && (t - config.warmup) % config.thin == config.thin - 1 {
            samples.draws.push(Draw {
                mean_partition: rho,
                mean_values: mu,
                var_partition: Partition::single_block(n),
                var_values: vec![sigma2],
                p1: p,
                p2: None,
            });
        }
    }
    Ok(samples)
}
