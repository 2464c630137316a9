//! Normal likelihood with block-wise unknown mean and variance.
//!
//! Mean blocks carry `mu* ~ N(mu0, sigma0sq)`; variance blocks carry
//! `sigma2* ~ IG(shape d/2, scale a/2)`, i.e. density proportional to
//! `x^-(d/2+1) exp(-a/(2x))`. Each family is integrated out in closed form
//! given the other parameter vector.

use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::partition::Partition;

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Smallest variance used inside logarithms.
pub const VARIANCE_FLOOR: f64 = 1e-300;

static CLAMPED: AtomicU64 = AtomicU64::new(0);

/// Number of times a variance has been raised to [`VARIANCE_FLOOR`] in this process.
pub fn clamped_evaluations() -> u64 {
    CLAMPED.load(Ordering::Relaxed)
}

#[inline]
pub(crate) fn floor_variance(v: f64) -> f64 {
    if v < VARIANCE_FLOOR {
        CLAMPED.fetch_add(1, Ordering::Relaxed);
        VARIANCE_FLOOR
    } else {
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalHyper {
    pub mu0: f64,
    pub sigma0sq: f64,
    pub a: f64,
    pub d: f64,
}

impl NormalHyper {
    pub fn new(mu0: f64, sigma0sq: f64, a: f64, d: f64) -> Result<Self> {
        let h = Self {
            mu0,
            sigma0sq,
            a,
            d,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu0.is_finite() {
            return Err(Error::domain(format!(
                "mu0 must be finite, got {}",
                self.mu0
            )));
        }
        for (name, v) in [("sigma0sq", self.sigma0sq), ("a", self.a), ("d", self.d)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for NormalHyper {
    /// The reasonably flat simulation-study prior `(0, 100, 0.1, 2.1)`.
    fn default() -> Self {
        Self {
            mu0: 0.0,
            sigma0sq: 100.0,
            a: 0.1,
            d: 2.1,
        }
    }
}

/// Length-`n` mean and variance vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaState {
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
}

impl ThetaState {
    pub fn new(mu: Vec<f64>, sigma2: Vec<f64>) -> Result<Self> {
        if mu.len() != sigma2.len() {
            return Err(Error::LengthMismatch(mu.len(), sigma2.len()));
        }
        check_positive(&sigma2, 0..sigma2.len())?;
        Ok(Self { mu, sigma2 })
    }

    pub fn from_blocks(
        rho1: &Partition,
        mu_star: &[f64],
        rho2: &Partition,
        sigma2_star: &[f64],
    ) -> Result<Self> {
        if rho1.n() != rho2.n() {
            return Err(Error::LengthMismatch(rho1.n(), rho2.n()));
        }
        if mu_star.len() != rho1.num_blocks() || sigma2_star.len() != rho2.num_blocks() {
            return Err(Error::domain("one value per block is required"));
        }
        Self::new(rho1.expand(mu_star), rho2.expand(sigma2_star))
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Checks that `mu` is constant on the blocks of `rho1` and `sigma2` on those of `rho2`.
    pub fn check_block_constant(&self, rho1: &Partition, rho2: &Partition) -> Result<()> {
        for (values, rho, name) in [(&self.mu, rho1, "mu"), (&self.sigma2, rho2, "sigma2")] {
            if rho.n() != values.len() {
                return Err(Error::LengthMismatch(rho.n(), values.len()));
            }
            for block in rho.blocks() {
                let first = values[block.start];
                if values[block.clone()].iter().any(|&v| v != first) {
                    return Err(Error::domain(format!(
                        "{name} is not constant on block {}..{}",
                        block.start + 1,
                        block.end
                    )));
                }
            }
        }
        check_positive(&self.sigma2, 0..self.sigma2.len())
    }
}

fn check_block(x_len: usize, block: &Range<usize>) -> Result<()> {
    if block.is_empty() {
        return Err(Error::EmptyBlock);
    }
    if block.end > x_len {
        return Err(Error::domain(format!(
            "block {}..{} exceeds series length {x_len}",
            block.start, block.end
        )));
    }
    Ok(())
}

fn check_positive(sigma2: &[f64], block: Range<usize>) -> Result<()> {
    for i in block {
        let v = sigma2[i];
        if !(v > 0.0) {
            return Err(Error::NonPositiveVariance { index: i, value: v });
        }
    }
    Ok(())
}

/// `(Q1, Q2)` of the Normal full conditional of a mean block.
fn mean_precision_terms(
    x: &[f64],
    block: &Range<usize>,
    sigma2: &[f64],
    hyper: &NormalHyper,
) -> (f64, f64) {
    let mut q1 = 1.0 / hyper.sigma0sq;
    let mut q2 = hyper.mu0 / hyper.sigma0sq;
    for i in block.clone() {
        let w = 1.0 / floor_variance(sigma2[i]);
        q1 += w;
        q2 += w * x[i];
    }
    (q1, q2)
}

/// `log f(X_S | sigma)` with the block mean integrated out.
///
/// The block is cut into maximal runs of equal variance; each run enters
/// only through its count, sum and sum of squares. Run sums are taken over
/// sorted values, so reordering observations inside a run leaves the result
/// bit-identical.
pub fn log_marginal_mean_cluster(
    x: &[f64],
    block: Range<usize>,
    sigma2: &[f64],
    hyper: &NormalHyper,
) -> Result<f64> {
    check_block(x.len(), &block)?;
    check_positive(sigma2, block.clone())?;
    let n = block.len() as f64;
    let mut q1 = 1.0 / hyper.sigma0sq;
    let mut q2 = hyper.mu0 / hyper.sigma0sq;
    let mut wxx = hyper.mu0 * hyper.mu0 / hyper.sigma0sq;
    let mut log_var = 0.0;
    let mut run: Vec<f64> = Vec::new();
    let mut start = block.start;
    while start < block.end {
        let v = sigma2[start];
        let end = (start..block.end)
            .find(|&i| sigma2[i] != v)
            .unwrap_or(block.end);
        run.clear();
        run.extend_from_slice(&x[start..end]);
        run.sort_by(f64::total_cmp);
        let count = (end - start) as f64;
        let sum: f64 = run.iter().sum();
        let sq: f64 = run.iter().map(|y| y * y).sum();
        let v = floor_variance(v);
        q1 += count / v;
        q2 += sum / v;
        wxx += sq / v;
        log_var += count * v.ln();
        start = end;
    }
    Ok(-0.5 * n * LN_2PI
        - 0.5 * log_var
        - 0.5 * (hyper.sigma0sq * q1).ln()
        - 0.5 * (wxx - q2 * q2 / q1))
}

/// `log f(X_S | mu)` with the block variance integrated out.
pub fn log_marginal_var_cluster(
    x: &[f64],
    block: Range<usize>,
    mu: &[f64],
    hyper: &NormalHyper,
) -> Result<f64> {
    check_block(x.len(), &block)?;
    let n = block.len() as f64;
    let ss: f64 = block.map(|i| (x[i] - mu[i]).powi(2)).sum();
    Ok(log_var_marginal_from_ss(
        n,
        ss,
        hyper,
        ln_gamma((n + hyper.d) / 2.0),
    ))
}

#[inline]
fn log_var_marginal_from_ss(n: f64, ss: f64, hyper: &NormalHyper, lgamma_shape: f64) -> f64 {
    let half_d = hyper.d / 2.0;
    -0.5 * n * LN_2PI + half_d * (hyper.a / 2.0).ln() + lgamma_shape
        - ln_gamma(half_d)
        - (n + hyper.d) / 2.0 * ((ss + hyper.a) / 2.0).ln()
}

/// One draw from `N(Q2/Q1, 1/Q1)`.
pub fn sample_mu_star<R: Rng + ?Sized>(
    x: &[f64],
    block: Range<usize>,
    sigma2: &[f64],
    hyper: &NormalHyper,
    rng: &mut R,
) -> Result<f64> {
    check_block(x.len(), &block)?;
    check_positive(sigma2, block.clone())?;
    let (q1, q2) = mean_precision_terms(x, &block, sigma2, hyper);
    Ok(draw_normal(q2 / q1, (1.0 / q1).sqrt(), rng))
}

/// One draw from `IG(shape (n_S+d)/2, scale (SS+a)/2)`.
pub fn sample_sigma2_star<R: Rng + ?Sized>(
    x: &[f64],
    block: Range<usize>,
    mu: &[f64],
    hyper: &NormalHyper,
    rng: &mut R,
) -> Result<f64> {
    check_block(x.len(), &block)?;
    let n = block.len() as f64;
    let ss: f64 = block.map(|i| (x[i] - mu[i]).powi(2)).sum();
    Ok(draw_inv_gamma(
        (n + hyper.d) / 2.0,
        (ss + hyper.a) / 2.0,
        rng,
    ))
}

/// One draw from `Beta(alpha + b - 1, n + beta - b)`.
pub fn sample_p<R: Rng + ?Sized>(
    b: usize,
    n: usize,
    alpha: f64,
    beta: f64,
    rng: &mut R,
) -> Result<f64> {
    if b == 0 || b > n {
        return Err(Error::domain(format!("block count {b} outside 1..={n}")));
    }
    if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(Error::domain(format!(
            "Beta parameters must be positive, got ({alpha}, {beta})"
        )));
    }
    Ok(draw_beta(
        alpha + (b - 1) as f64,
        (n - b) as f64 + beta,
        rng,
    ))
}

/// `sum_i log N(x_i; mu_i, sigma2_i)`.
pub fn loglik_full(x: &[f64], theta: &ThetaState) -> Result<f64> {
    if x.len() != theta.len() {
        return Err(Error::LengthMismatch(x.len(), theta.len()));
    }
    check_positive(&theta.sigma2, 0..x.len())?;
    Ok(x.iter()
        .zip(&theta.mu)
        .zip(&theta.sigma2)
        .map(|((&xi, &m), &v)| {
            let v = floor_variance(v);
            -0.5 * (LN_2PI + v.ln() + (xi - m).powi(2) / v)
        })
        .sum())
}

pub(crate) fn draw_normal<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> f64 {
    Normal::new(mean, sd)
        .expect("finite normal parameters")
        .sample(rng)
}

pub(crate) fn draw_inv_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0 / scale)
        .expect("positive gamma parameters")
        .sample(rng);
    floor_variance(1.0 / g)
}

pub(crate) fn draw_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    Beta::new(a, b)
        .expect("positive beta parameters")
        .sample(rng)
}

/// Prefix sums over precision-weighted data for O(1) mean-block marginals,
/// valid while the variance vector is held fixed.
#[derive(Clone, Debug)]
pub struct MeanClusterCache {
    shift: f64,
    hyper: NormalHyper,
    w: Vec<f64>,
    wx: Vec<f64>,
    wxx: Vec<f64>,
    log_var: Vec<f64>,
}

impl MeanClusterCache {
    pub fn new(x: &[f64], sigma2: &[f64], hyper: &NormalHyper) -> Self {
        let mut cache = Self {
            shift: 0.0,
            hyper: *hyper,
            w: Vec::with_capacity(x.len() + 1),
            wx: Vec::with_capacity(x.len() + 1),
            wxx: Vec::with_capacity(x.len() + 1),
            log_var: Vec::with_capacity(x.len() + 1),
        };
        cache.rebuild(x, sigma2);
        cache
    }

    pub fn rebuild(&mut self, x: &[f64], sigma2: &[f64]) {
        debug_assert_eq!(x.len(), sigma2.len());
        // Location equivariance: shifting data and mu0 together leaves every
        // marginal unchanged and keeps the prefix sums well conditioned.
        self.shift = if x.is_empty() {
            0.0
        } else {
            x.iter().sum::<f64>() / x.len() as f64
        };
        for v in [&mut self.w, &mut self.wx, &mut self.wxx, &mut self.log_var] {
            v.clear();
            v.push(0.0);
        }
        let (mut w, mut wx, mut wxx, mut lv) = (0.0, 0.0, 0.0, 0.0);
        for (&xi, &s) in x.iter().zip(sigma2) {
            let s = floor_variance(s);
            let y = xi - self.shift;
            w += 1.0 / s;
            wx += y / s;
            wxx += y * y / s;
            lv += s.ln();
            self.w.push(w);
            self.wx.push(wx);
            self.wxx.push(wxx);
            self.log_var.push(lv);
        }
    }

    #[inline]
    fn terms(&self, block: &Range<usize>) -> (f64, f64, f64, f64) {
        let (s, e) = (block.start, block.end);
        let m0 = self.hyper.mu0 - self.shift;
        let q1 = self.w[e] - self.w[s] + 1.0 / self.hyper.sigma0sq;
        let q2 = self.wx[e] - self.wx[s] + m0 / self.hyper.sigma0sq;
        let wxx = self.wxx[e] - self.wxx[s] + m0 * m0 / self.hyper.sigma0sq;
        let lv = self.log_var[e] - self.log_var[s];
        (q1, q2, wxx, lv)
    }

    #[inline]
    pub fn log_marginal(&self, block: Range<usize>) -> f64 {
        let n = block.len() as f64;
        let (q1, q2, wxx, lv) = self.terms(&block);
        -0.5 * n * LN_2PI
            - 0.5 * lv
            - 0.5 * (self.hyper.sigma0sq * q1).ln()
            - 0.5 * (wxx - q2 * q2 / q1)
    }

    /// Mean and variance of the block mean's full conditional.
    pub fn posterior(&self, block: Range<usize>) -> (f64, f64) {
        let (q1, q2, _, _) = self.terms(&block);
        (q2 / q1 + self.shift, 1.0 / q1)
    }
}

/// Prefix sums of squared residuals for O(1) variance-block marginals,
/// valid while the mean vector is held fixed.
#[derive(Clone, Debug)]
pub struct VarClusterCache {
    hyper: NormalHyper,
    ss: Vec<f64>,
    /// `ln_gamma((m + d)/2)` for `m = 0..=n`.
    lgamma_shape: Vec<f64>,
    lgamma_half_d: f64,
}

impl VarClusterCache {
    pub fn new(x: &[f64], mu: &[f64], hyper: &NormalHyper) -> Self {
        let lgamma_shape = (0..=x.len())
            .map(|m| ln_gamma((m as f64 + hyper.d) / 2.0))
            .collect();
        let mut cache = Self {
            hyper: *hyper,
            ss: Vec::with_capacity(x.len() + 1),
            lgamma_shape,
            lgamma_half_d: ln_gamma(hyper.d / 2.0),
        };
        cache.rebuild(x, mu);
        cache
    }

    pub fn rebuild(&mut self, x: &[f64], mu: &[f64]) {
        self.ss.clear();
        self.ss.push(0.0);
        let mut acc = 0.0;
        for (&xi, &m) in x.iter().zip(mu) {
            acc += (xi - m) * (xi - m);
            self.ss.push(acc);
        }
    }

    #[inline]
    fn block_ss(&self, block: &Range<usize>) -> f64 {
        (self.ss[block.end] - self.ss[block.start]).max(0.0)
    }

    #[inline]
    pub fn log_marginal(&self, block: Range<usize>) -> f64 {
        let m = block.len();
        let n = m as f64;
        let h = &self.hyper;
        -0.5 * n * LN_2PI + h.d / 2.0 * (h.a / 2.0).ln() + self.lgamma_shape[m]
            - self.lgamma_half_d
            - (n + h.d) / 2.0 * ((self.block_ss(&block) + h.a) / 2.0).ln()
    }

    /// `(shape, scale)` of the block variance's Inverse-Gamma full conditional.
    pub fn posterior(&self, block: Range<usize>) -> (f64, f64) {
        let n = block.len() as f64;
        let ss = self.block_ss(&block);
        ((n + self.hyper.d) / 2.0, (ss + self.hyper.a) / 2.0)
    }
}
