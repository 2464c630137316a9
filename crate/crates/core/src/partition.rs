//! Contiguous partitions of the time axis and their geometric product prior.
//!
//! Time indices are 1-based in the data model: block `j` of a partition with
//! end points `0 = i_0 < i_1 < ... < i_b = n` covers `{i_{j-1}+1, ..., i_j}`.
//! In code the same block is the half-open 0-based range `i_{j-1}..i_j`.
//!
//! The indicator representation stores `bits[i]` (0-based, `i < n-1`) for the
//! pair of 1-based instants `(i+1, i+2)`: `true` when they share a value,
//! `false` when `i+1` is an end point.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Ordered end points `0 = i_0 < ... < i_b = n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawPartition")]
pub struct Partition {
    n: usize,
    endpoints: Vec<usize>,
}

#[derive(Deserialize)]
struct RawPartition {
    n: usize,
    endpoints: Vec<usize>,
}

impl TryFrom<RawPartition> for Partition {
    type Error = Error;

    fn try_from(raw: RawPartition) -> Result<Self> {
        Partition::new(raw.n, raw.endpoints)
    }
}

impl Partition {
    pub fn new(n: usize, endpoints: Vec<usize>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPartition(
                "series length must be positive".into(),
            ));
        }
        if endpoints.first() != Some(&0) || endpoints.last() != Some(&n) {
            return Err(Error::InvalidPartition(format!(
                "end points must start at 0 and end at {n}: {endpoints:?}"
            )));
        }
        if endpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPartition(format!(
                "end points must be strictly increasing: {endpoints:?}"
            )));
        }
        Ok(Self { n, endpoints })
    }

    /// The partition with no change points.
    pub fn single_block(n: usize) -> Self {
        assert!(n > 0, "series length must be positive");
        Self {
            n,
            endpoints: vec![0, n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn endpoints(&self) -> &[usize] {
        &self.endpoints
    }

    /// Interior end points, i.e. the last instant of every block but the final one.
    pub fn interior(&self) -> &[usize] {
        &self.endpoints[1..self.endpoints.len() - 1]
    }

    pub fn num_blocks(&self) -> usize {
        self.endpoints.len() - 1
    }

    pub fn num_changes(&self) -> usize {
        self.num_blocks() - 1
    }

    pub fn block(&self, j: usize) -> Range<usize> {
        self.endpoints[j]..self.endpoints[j + 1]
    }

    /// Blocks as 0-based half-open index ranges, in time order.
    pub fn blocks(&self) -> impl ExactSizeIterator<Item = Range<usize>> + '_ {
        self.endpoints.windows(2).map(|w| w[0]..w[1])
    }

    pub fn block_sizes(&self) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.endpoints.windows(2).map(|w| w[1] - w[0])
    }

    /// Index of the block holding 0-based position `t`.
    pub fn block_of(&self, t: usize) -> usize {
        debug_assert!(t < self.n);
        self.endpoints.partition_point(|&e| e <= t) - 1
    }

    pub fn to_indicators(&self) -> ChangeIndicators {
        let mut bits = vec![true; self.n - 1];
        for &e in self.interior() {
            bits[e - 1] = false;
        }
        ChangeIndicators { n: self.n, bits }
    }

    pub fn from_indicators(u: &ChangeIndicators) -> Self {
        let mut endpoints = Vec::with_capacity(u.num_changes() + 2);
        endpoints.push(0);
        endpoints.extend(
            u.bits
                .iter()
                .enumerate()
                .filter(|(_, &same)| !same)
                .map(|(i, _)| i + 1),
        );
        endpoints.push(u.n);
        Self { n: u.n, endpoints }
    }

    /// Expands one value per block into a length-`n` vector.
    pub fn expand(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.num_blocks());
        let mut out = Vec::with_capacity(self.n);
        for (range, &v) in self.blocks().zip(values) {
            out.extend(std::iter::repeat_n(v, range.len()));
        }
        out
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (j, e) in self.endpoints.iter().enumerate() {
            if j > 0 {
                f.write_str(",")?;
            }
            write!(f, "{e}")?;
        }
        f.write_str("}")
    }
}

/// Binary change indicators; `bits[i] == true` means no change between
/// 1-based instants `i+1` and `i+2`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ChangeIndicators {
    n: usize,
    bits: Vec<bool>,
}

impl ChangeIndicators {
    pub fn new(n: usize, bits: Vec<bool>) -> Result<Self> {
        if n == 0 || bits.len() != n - 1 {
            return Err(Error::InvalidPartition(format!(
                "indicator vector for n={n} must have length n-1, got {}",
                bits.len()
            )));
        }
        Ok(Self { n, bits })
    }

    /// All ones: a single block.
    pub fn none_changed(n: usize) -> Self {
        assert!(n > 0);
        Self {
            n,
            bits: vec![true; n - 1],
        }
    }

    /// All zeros: every instant is its own block.
    pub fn all_changed(n: usize) -> Self {
        assert!(n > 0);
        Self {
            n,
            bits: vec![false; n - 1],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, same: bool) {
        self.bits[i] = same;
    }

    pub fn num_changes(&self) -> usize {
        self.bits.iter().filter(|&&b| !b).count()
    }

    pub fn to_partition(&self) -> Partition {
        Partition::from_indicators(self)
    }
}

pub fn partition_from_indicators(u: &ChangeIndicators) -> Partition {
    Partition::from_indicators(u)
}

pub fn indicators_from_partition(p: &Partition) -> ChangeIndicators {
    p.to_indicators()
}

/// Beta(alpha, beta) hyperprior on a per-instant change probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct YaoPrior {
    pub alpha: f64,
    pub beta: f64,
}

impl YaoPrior {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let prior = Self { alpha, beta };
        prior.validate()?;
        Ok(prior)
    }

    pub fn uniform() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_beta_params(self.alpha, self.beta)
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }
}

impl Default for YaoPrior {
    fn default() -> Self {
        Self::uniform()
    }
}

fn check_beta_params(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0 && beta.is_finite() && beta > 0.0) {
        return Err(Error::domain(format!(
            "Beta parameters must be finite and positive, got ({alpha}, {beta})"
        )));
    }
    Ok(())
}

fn check_probability(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!(
            "change probability must lie in (0,1), got {p}"
        )));
    }
    Ok(())
}

/// `log[(1-p)^(size-1) p]`, dropping the trailing `p` for the last block.
pub fn log_cohesion_yao(block_size: usize, p: f64, is_last_block: bool) -> Result<f64> {
    check_probability(p)?;
    if block_size == 0 {
        return Err(Error::EmptyBlock);
    }
    let stay = (block_size - 1) as f64 * (-p).ln_1p();
    Ok(if is_last_block { stay } else { stay + p.ln() })
}

/// `(b-1) log p + (n-b) log(1-p)`.
pub fn log_partition_prior_given_p(rho: &Partition, p: f64) -> Result<f64> {
    check_probability(p)?;
    let b = rho.num_blocks() as f64;
    let n = rho.n() as f64;
    Ok((b - 1.0) * p.ln() + (n - b) * (-p).ln_1p())
}

/// Common refinement: the union of all end points.
pub fn induced_partition(rhos: &[Partition]) -> Result<Partition> {
    let first = rhos
        .first()
        .ok_or_else(|| Error::InvalidPartition("no partitions to combine".into()))?;
    let mut ends = BTreeSet::new();
    for rho in rhos {
        if rho.n() != first.n() {
            return Err(Error::LengthMismatch(first.n(), rho.n()));
        }
        ends.extend(rho.endpoints().iter().copied());
    }
    Ok(Partition {
        n: first.n(),
        endpoints: ends.into_iter().collect(),
    })
}

/// Beta-Binomial(n-1, alpha, beta) mass at `c`; zero outside `0..=n-1`.
pub fn beta_binomial_pmf(c: usize, n: usize, alpha: f64, beta: f64) -> Result<f64> {
    Ok(log_beta_binomial_pmf(c, n, alpha, beta)?.exp())
}

pub fn log_beta_binomial_pmf(c: usize, n: usize, alpha: f64, beta: f64) -> Result<f64> {
    check_beta_params(alpha, beta)?;
    if n == 0 {
        return Err(Error::domain("series length must be positive"));
    }
    let trials = (n - 1) as f64;
    if c > n - 1 {
        return Ok(f64::NEG_INFINITY);
    }
    let c = c as f64;
    let ln_choose = ln_gamma(trials + 1.0) - ln_gamma(c + 1.0) - ln_gamma(trials - c + 1.0);
    Ok(
        ln_choose + ln_gamma(alpha + beta) + ln_gamma(alpha + c) + ln_gamma(trials + beta - c)
            - ln_gamma(alpha)
            - ln_gamma(beta)
            - ln_gamma(alpha + beta + trials),
    )
}

/// Prior mean and variance of the number of changes `N = b - 1`.
pub fn prior_n_moments(n: usize, alpha: f64, beta: f64) -> Result<(f64, f64)> {
    check_beta_params(alpha, beta)?;
    if n < 2 {
        return Err(Error::domain(format!("need n >= 2, got {n}")));
    }
    let m = (n - 1) as f64;
    let s = alpha + beta;
    let mean = m * alpha / s;
    let var = m * alpha * beta * (s + m) / (s * s * (s + 1.0));
    Ok((mean, var))
}

/// `beta` such that the prior mean number of changes equals `expected_changes`.
pub fn elicit_beta(n: usize, expected_changes: f64, alpha: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain(format!("need n >= 2, got {n}")));
    }
    let m = (n - 1) as f64;
    if !(expected_changes > 0.0 && expected_changes < m) {
        return Err(Error::domain(format!(
            "expected number of changes must lie in (0, {m}), got {expected_changes}"
        )));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::domain(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    Ok(alpha * (m - expected_changes) / expected_changes)
}

/// Prior mean and variance of the number of changes in the induced partition
/// when each component partition has its own Beta-distributed change rate.
pub fn induced_changes_moments(n: usize, alphas: &[f64], betas: &[f64]) -> Result<(f64, f64)> {
    if alphas.len() != betas.len() || alphas.is_empty() {
        return Err(Error::domain(
            "need equal-length, non-empty hyperparameter lists",
        ));
    }
    if n < 2 {
        return Err(Error::domain(format!("need n >= 2, got {n}")));
    }
    let mut stay = 1.0;
    let mut stay_sq = 1.0;
    for (&a, &b) in alphas.iter().zip(betas) {
        check_beta_params(a, b)?;
        let s = a + b;
        let q = b / s;
        stay *= q;
        stay_sq *= q * q + a * b / (s * s * (s + 1.0));
    }
    let m = (n - 1) as f64;
    let nf = n as f64;
    let mean = m * (1.0 - stay);
    let var = m * stay - m * m * stay * stay + (nf * nf - 3.0 * nf + 2.0) * stay_sq;
    Ok((mean, var))
}
