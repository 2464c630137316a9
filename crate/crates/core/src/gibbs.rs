//! Partially collapsed Gibbs sampler for the two-partition Normal model.
//!
//! One iteration updates, in this order: the change probabilities `p1, p2`;
//! the mean indicators with the block means integrated out, then fresh block
//! means; the variance indicators with the block variances integrated out,
//! then fresh block variances. Each parameter vector is redrawn immediately
//! after its own scan and before the next scan starts. Reordering these steps
//! changes the stationary distribution.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal::{
    self, draw_inv_gamma, draw_normal, MeanClusterCache, NormalHyper, ThetaState, VarClusterCache,
};
use crate::partition::{ChangeIndicators, Partition, YaoPrior};
use crate::rng::chain_rng;
use crate::samples::{Draw, ModelKind, Param, PosteriorSamples};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// Indicators all ones: a single block per parameter.
    #[default]
    NoneChanged,
    /// Indicators all zeros: every instant its own block.
    AllChanged,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub iterations: usize,
    pub warmup: usize,
    pub thin: usize,
    pub seed: u64,
    #[serde(default)]
    pub init: InitMode,
}

impl McmcConfig {
    pub fn new(iterations: usize, warmup: usize, thin: usize, seed: u64) -> Result<Self> {
        let cfg = Self {
            iterations,
            warmup,
            thin,
            seed,
            init: InitMode::NoneChanged,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be positive".into()));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        self.iterations / self.thin
    }
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 5_000,
            warmup: 5_000,
            thin: 1,
            seed: 0,
            init: InitMode::NoneChanged,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    pub u1: ChangeIndicators,
    pub u2: ChangeIndicators,
    pub theta: ThetaState,
    pub p1: f64,
    pub p2: f64,
}

impl ModelState {
    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn indicators(&self, param: Param) -> &ChangeIndicators {
        match param {
            Param::Mean => &self.u1,
            Param::Variance => &self.u2,
        }
    }

    pub fn change_prob(&self, param: Param) -> f64 {
        match param {
            Param::Mean => self.p1,
            Param::Variance => self.p2,
        }
    }

    pub fn check_consistent(&self) -> Result<()> {
        let n = self.n();
        if self.u1.n() != n || self.u2.n() != n {
            return Err(Error::LengthMismatch(self.u1.n(), n));
        }
        for p in [self.p1, self.p2] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::domain(format!(
                    "change probability {p} outside (0,1)"
                )));
            }
        }
        self.theta
            .check_block_constant(&self.u1.to_partition(), &self.u2.to_partition())
    }

    pub fn to_draw(&self) -> Draw {
        let rho1 = self.u1.to_partition();
        let rho2 = self.u2.to_partition();
        let mean_values = rho1.blocks().map(|b| self.theta.mu[b.start]).collect();
        let var_values = rho2.blocks().map(|b| self.theta.sigma2[b.start]).collect();
        Draw {
            mean_partition: rho1,
            mean_values,
            var_partition: rho2,
            var_values,
            p1: self.p1,
            p2: Some(self.p2),
        }
    }

    /// Simulates one data series from the likelihood given this state.
    pub fn simulate_data<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.theta
            .mu
            .iter()
            .zip(&self.theta.sigma2)
            .map(|(&m, &v)| draw_normal(m, v.sqrt(), rng))
            .collect()
    }
}

/// Draws a complete state from the prior (partitions, block values, change probabilities).
pub fn prior_state<R: Rng + ?Sized>(
    n: usize,
    hyper: &NormalHyper,
    yao1: &YaoPrior,
    yao2: &YaoPrior,
    rng: &mut R,
) -> ModelState {
    let p1 = normal::draw_beta(yao1.alpha, yao1.beta, rng);
    let p2 = normal::draw_beta(yao2.alpha, yao2.beta, rng);
    let u1 = bernoulli_indicators(n, p1, rng);
    let u2 = bernoulli_indicators(n, p2, rng);
    let theta = prior_theta(&u1.to_partition(), &u2.to_partition(), hyper, rng);
    ModelState {
        u1,
        u2,
        theta,
        p1,
        p2,
    }
}

fn bernoulli_indicators<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> ChangeIndicators {
    let bits = (0..n - 1).map(|_| rng.random::<f64>() >= p).collect();
    ChangeIndicators::new(n, bits).expect("length n-1")
}

fn prior_theta<R: Rng + ?Sized>(
    rho1: &Partition,
    rho2: &Partition,
    hyper: &NormalHyper,
    rng: &mut R,
) -> ThetaState {
    let sd0 = hyper.sigma0sq.sqrt();
    let mu_star: Vec<f64> = (0..rho1.num_blocks())
        .map(|_| draw_normal(hyper.mu0, sd0, rng))
        .collect();
    let s2_star: Vec<f64> = (0..rho2.num_blocks())
        .map(|_| draw_inv_gamma(hyper.d / 2.0, hyper.a / 2.0, rng))
        .collect();
    ThetaState {
        mu: rho1.expand(&mu_star),
        sigma2: rho2.expand(&s2_star),
    }
}

/// Starting state: indicators per `init`, one prior draw per initial block,
/// change probabilities at their prior means.
pub fn initial_state<R: Rng + ?Sized>(
    n: usize,
    hyper: &NormalHyper,
    yao1: &YaoPrior,
    yao2: &YaoPrior,
    init: InitMode,
    rng: &mut R,
) -> ModelState {
    let make = |n| match init {
        InitMode::NoneChanged => ChangeIndicators::none_changed(n),
        InitMode::AllChanged => ChangeIndicators::all_changed(n),
    };
    let u1 = make(n);
    let u2 = make(n);
    let theta = prior_theta(&u1.to_partition(), &u2.to_partition(), hyper, rng);
    ModelState {
        u1,
        u2,
        theta,
        p1: yao1.mean(),
        p2: yao2.mean(),
    }
}

fn check_position(n: usize, i: usize) -> Result<()> {
    if i == 0 || i >= n {
        return Err(Error::domain(format!(
            "indicator position {i} outside 1..={}",
            n.saturating_sub(1)
        )));
    }
    Ok(())
}

/// Block around the 1-based split position `i` under the current indicators:
/// returns `(start, end)` of the merged block as a 0-based half-open range.
fn merged_block(u: &ChangeIndicators, i: usize) -> (usize, usize) {
    let bits = u.bits();
    let start = bits[..i - 1]
        .iter()
        .rposition(|&same| !same)
        .map_or(0, |j| j + 1);
    let end = bits[i..]
        .iter()
        .position(|&same| !same)
        .map_or(u.n(), |j| i + j + 1);
    (start, end)
}

/// `log R_{k,i}`: log posterior odds of "no change" against "change" at the
/// 1-based position `i`, with the block parameter of `param` integrated out.
///
/// Evaluated directly from the data; the scan uses cached prefix sums instead.
pub fn indicator_log_ratio(
    param: Param,
    i: usize,
    state: &ModelState,
    x: &[f64],
    hyper: &NormalHyper,
) -> Result<f64> {
    let n = x.len();
    if state.n() != n {
        return Err(Error::LengthMismatch(state.n(), n));
    }
    check_position(n, i)?;
    let (start, end) = merged_block(state.indicators(param), i);
    let marginal = |r: Range<usize>| match param {
        Param::Mean => normal::log_marginal_mean_cluster(x, r, &state.theta.sigma2, hyper),
        Param::Variance => normal::log_marginal_var_cluster(x, r, &state.theta.mu, hyper),
    };
    let p = state.change_prob(param);
    Ok(marginal(start..end)? - marginal(start..i)? - marginal(i..end)? + (-p).ln_1p() - p.ln())
}

/// Reusable per-chain workspace holding the prefix-sum caches for a series
/// of fixed length.
#[derive(Clone, Debug)]
pub struct GibbsSampler {
    n: usize,
    yao1: YaoPrior,
    yao2: YaoPrior,
    mean_cache: MeanClusterCache,
    var_cache: VarClusterCache,
    right_end: Vec<usize>,
}

impl GibbsSampler {
    pub fn new(n: usize, hyper: &NormalHyper, yao1: &YaoPrior, yao2: &YaoPrior) -> Result<Self> {
        hyper.validate()?;
        yao1.validate()?;
        yao2.validate()?;
        let zeros = vec![0.0; n];
        Ok(Self {
            n,
            yao1: *yao1,
            yao2: *yao2,
            mean_cache: MeanClusterCache::new(&zeros, &vec![1.0; n], hyper),
            var_cache: VarClusterCache::new(&zeros, &zeros, hyper),
            right_end: vec![n; n.saturating_sub(1)],
        })
    }

    /// Draws `p1` and `p2` from their Beta full conditionals.
    pub fn update_change_probs<R: Rng + ?Sized>(&self, state: &mut ModelState, rng: &mut R) {
        let n = self.n;
        let b1 = state.u1.num_changes() + 1;
        let b2 = state.u2.num_changes() + 1;
        state.p1 = normal::draw_beta(
            self.yao1.alpha + (b1 - 1) as f64,
            (n - b1) as f64 + self.yao1.beta,
            rng,
        );
        state.p2 = normal::draw_beta(
            self.yao2.alpha + (b2 - 1) as f64,
            (n - b2) as f64 + self.yao2.beta,
            rng,
        );
    }

    /// Sequential scan over positions `1..n-1`, each decision conditioned on
    /// the bits already updated to its left.
    pub fn scan<R: Rng + ?Sized>(
        &mut self,
        param: Param,
        x: &[f64],
        state: &mut ModelState,
        rng: &mut R,
    ) {
        let n = self.n;
        debug_assert_eq!(x.len(), n);
        match param {
            Param::Mean => self.mean_cache.rebuild(x, &state.theta.sigma2),
            Param::Variance => self.var_cache.rebuild(x, &state.theta.mu),
        }
        if n < 2 {
            return;
        }
        let p = state.change_prob(param);
        let prior_log_odds = (-p).ln_1p() - p.ln();
        match param {
            Param::Mean => {
                let c = &self.mean_cache;
                scan_indicators(
                    &mut state.u1,
                    &mut self.right_end,
                    prior_log_odds,
                    |r| c.log_marginal(r),
                    rng,
                )
            }
            Param::Variance => {
                let c = &self.var_cache;
                scan_indicators(
                    &mut state.u2,
                    &mut self.right_end,
                    prior_log_odds,
                    |r| c.log_marginal(r),
                    rng,
                )
            }
        }
    }

    /// Redraws one value per block of `param`'s partition from its full
    /// conditional and expands it over the block. Relies on the cache left
    /// current by the preceding scan or rebuild.
    fn redraw_cached<R: Rng + ?Sized>(&self, param: Param, state: &mut ModelState, rng: &mut R) {
        let rho = state.indicators(param).to_partition();
        match param {
            Param::Mean => {
                for block in rho.blocks() {
                    let (m, v) = self.mean_cache.posterior(block.clone());
                    let draw = draw_normal(m, v.sqrt(), rng);
                    state.theta.mu[block].fill(draw);
                }
            }
            Param::Variance => {
                for block in rho.blocks() {
                    let (shape, scale) = self.var_cache.posterior(block.clone());
                    let draw = draw_inv_gamma(shape, scale, rng);
                    state.theta.sigma2[block].fill(draw);
                }
            }
        }
    }

    pub fn redraw<R: Rng + ?Sized>(
        &mut self,
        param: Param,
        x: &[f64],
        state: &mut ModelState,
        rng: &mut R,
    ) {
        match param {
            Param::Mean => self.mean_cache.rebuild(x, &state.theta.sigma2),
            Param::Variance => self.var_cache.rebuild(x, &state.theta.mu),
        }
        self.redraw_cached(param, state, rng);
    }

    /// One full sweep `(p, U1, mu, U2, sigma2)`.
    pub fn step<R: Rng + ?Sized>(&mut self, x: &[f64], state: &mut ModelState, rng: &mut R) {
        self.update_change_probs(state, rng);
        for param in [Param::Mean, Param::Variance] {
            self.scan(param, x, state, rng);
            self.redraw_cached(param, state, rng);
        }
    }
}

/// `true` (no change) iff `log u - log(1-u) <= log_r` for `u ~ U(0,1)`.
#[inline]
/// Left-to-right Gibbs scan of one indicator vector. `log_marginal` gives the
/// collapsed log marginal of a 0-based half-open block; `prior_log_odds` is
/// the prior log odds of "no change" at any position. Every decision is
/// conditioned on the bits already updated to its left.
pub(crate) fn scan_indicators<R, F>(
    u: &mut ChangeIndicators,
    right_end: &mut Vec<usize>,
    prior_log_odds: f64,
    log_marginal: F,
    rng: &mut R,
) where
    R: Rng + ?Sized,
    F: Fn(Range<usize>) -> f64,
{
    let n = u.n();
    if n < 2 {
        return;
    }
    // Bits to the right of the current position still hold last sweep's
    // values, so the right block ends can be computed up front.
    right_end.resize(n - 1, n);
    right_end[n - 2] = n;
    for i in (0..n - 2).rev() {
        right_end[i] = if u.get(i + 1) {
            right_end[i + 1]
        } else {
            i + 2
        };
    }
    let mut start = 0;
    for i in 0..n - 1 {
        let end = right_end[i];
        let split = i + 1;
        let log_r =
            log_marginal(start..end) - log_marginal(start..split) - log_marginal(split..end)
                + prior_log_odds;
        let same = merge_decision(log_r, rng);
        u.set(i, same);
        if !same {
            start = split;
        }
    }
}

pub(crate) fn merge_decision<R: Rng + ?Sized>(log_r: f64, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    u.ln() - (-u).ln_1p() <= log_r
}

pub(crate) fn validate_data(x: &[f64]) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::InvalidData(format!(
            "need at least 2 observations, got {}",
            x.len()
        )));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidData(format!(
            "observation {} is not finite ({})",
            i + 1,
            x[i]
        )));
    }
    Ok(())
}

pub fn update_indicators_scan<R: Rng + ?Sized>(
    param: Param,
    state: &mut ModelState,
    x: &[f64],
    hyper: &NormalHyper,
    rng: &mut R,
) -> Result<()> {
    validate_data(x)?;
    let yao = YaoPrior::uniform();
    let mut sampler = GibbsSampler::new(x.len(), hyper, &yao, &yao)?;
    sampler.scan(param, x, state, rng);
    Ok(())
}

pub fn redraw_cluster_params<R: Rng + ?Sized>(
    param: Param,
    state: &mut ModelState,
    x: &[f64],
    hyper: &NormalHyper,
    rng: &mut R,
) -> Result<()> {
    validate_data(x)?;
    let yao = YaoPrior::uniform();
    let mut sampler = GibbsSampler::new(x.len(), hyper, &yao, &yao)?;
    sampler.redraw(param, x, state, rng);
    Ok(())
}

pub fn gibbs_iteration<R: Rng + ?Sized>(
    state: &mut ModelState,
    x: &[f64],
    hyper: &NormalHyper,
    yao1: &YaoPrior,
    yao2: &YaoPrior,
    rng: &mut R,
) -> Result<()> {
    validate_data(x)?;
    let mut sampler = GibbsSampler::new(x.len(), hyper, yao1, yao2)?;
    sampler.step(x, state, rng);
    Ok(())
}

/// Runs `warmup + iterations` sweeps and keeps every `thin`-th post-warm-up state.
pub fn run_chain(
    x: &[f64],
    hyper: &NormalHyper,
    yao1: &YaoPrior,
    yao2: &YaoPrior,
    config: &McmcConfig,
) -> Result<PosteriorSamples> {
    config.validate()?;
    validate_data(x)?;
    let mut sampler = GibbsSampler::new(x.len(), hyper, yao1, yao2)?;
    let mut rng = chain_rng(config.seed);
    let mut state = initial_state(x.len(), hyper, yao1, yao2, config.init, &mut rng);
    for _ in 0..config.warmup {
        sampler.step(x, &mut state, &mut rng);
    }
    let mut samples = PosteriorSamples::new(ModelKind::Bmcp, x.len());
    samples.draws.reserve(config.retained());
    for t in 1..=config.iterations {
        sampler.step(x, &mut state, &mut rng);
        if t % config.thin == 0 {
            samples.draws.push(state.to_draw());
        }
    }
    Ok(samples)
}
