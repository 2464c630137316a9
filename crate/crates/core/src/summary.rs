//! Posterior summaries computed from retained draws.
//!
//! Change probabilities are indexed by end point: entry `i` (0-based) is the
//! posterior probability that the 1-based instant `i + 1` closes a block,
//! i.e. that a new value starts at `i + 2`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{induced_partition, Partition};
use crate::samples::{ModelKind, Param, PosteriorSamples};

pub const SCHEMA_VERSION: u32 = 1;

fn require_draws(samples: &PosteriorSamples) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::domain("no retained draws"));
    }
    Ok(())
}

/// Per-instant posterior means of `mu` and `sigma2`.
pub fn product_estimates(samples: &PosteriorSamples) -> Result<(Vec<f64>, Vec<f64>)> {
    require_draws(samples)?;
    let n = samples.n;
    let mut mu = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    for d in &samples.draws {
        for (param, acc) in [(Param::Mean, &mut mu), (Param::Variance, &mut s2)] {
            for (block, &v) in d.partition(param).blocks().zip(d.values(param)) {
                for a in &mut acc[block] {
                    *a += v;
                }
            }
        }
    }
    let m = samples.len() as f64;
    for v in mu.iter_mut().chain(s2.iter_mut()) {
        *v /= m;
    }
    Ok((mu, s2))
}

/// Fraction of draws in which each instant `1..n-1` is an end point of `param`'s partition.
pub fn change_probabilities(samples: &PosteriorSamples, param: Param) -> Result<Vec<f64>> {
    require_draws(samples)?;
    let mut counts = vec![0usize; samples.n.saturating_sub(1)];
    for d in &samples.draws {
        for &e in d.partition(param).interior() {
            counts[e - 1] += 1;
        }
    }
    let m = samples.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / m).collect())
}

/// Empirical frequencies of distinct partitions, most frequent first; ties
/// are ordered lexicographically by end points.
pub fn most_likely_partition(
    samples: &PosteriorSamples,
    param: Param,
    top_k: usize,
) -> Result<Vec<(Partition, f64)>> {
    if top_k == 0 {
        return Err(Error::domain("top_k must be at least 1"));
    }
    let parts: Vec<&Partition> = samples.draws.iter().map(|d| d.partition(param)).collect();
    Ok(rank_partitions(parts, top_k))
}

fn rank_partitions<'a>(
    parts: impl IntoIterator<Item = &'a Partition>,
    top_k: usize,
) -> Vec<(Partition, f64)> {
    let mut counts: HashMap<&Partition, usize> = HashMap::new();
    let mut total = 0usize;
    for p in parts {
        *counts.entry(p).or_default() += 1;
        total += 1;
    }
    let mut ranked: Vec<(&Partition, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then_with(|| a.0.endpoints().cmp(b.0.endpoints()))
    });
    ranked
        .into_iter()
        .take(top_k)
        .map(|(p, c)| (p.clone(), c as f64 / total as f64))
        .collect()
}

/// Empirical pmf of the number of changes over `0..n`.
pub fn n_changes_posterior(samples: &PosteriorSamples, param: Param) -> Result<Vec<f64>> {
    require_draws(samples)?;
    Ok(pmf_of(
        samples
            .draws
            .iter()
            .map(|d| d.partition(param).num_changes()),
        samples.n,
    ))
}

fn pmf_of(values: impl Iterator<Item = usize>, n: usize) -> Vec<f64> {
    let mut counts = vec![0usize; n.max(1)];
    let mut total = 0usize;
    for v in values {
        counts[v] += 1;
        total += 1;
    }
    counts
        .into_iter()
        .map(|c| c as f64 / total as f64)
        .collect()
}

/// Index of the largest entry; the smallest index wins ties.
pub fn pmf_mode(pmf: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in pmf.iter().enumerate() {
        if p > pmf[best] {
            best = i;
        }
    }
    best
}

/// Shortest interval spanning `ceil(level * m)` of the `m` sorted draws.
pub fn hpd_interval(draws: &[f64], level: f64) -> Result<(f64, f64)> {
    if draws.is_empty() {
        return Err(Error::domain("HPD interval of an empty sample"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!(
            "HPD level must lie in (0, 1), got {level}"
        )));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(hpd_sorted(&sorted, level))
}

fn hpd_sorted(sorted: &[f64], level: f64) -> (f64, f64) {
    let m = sorted.len();
    let k = ((level * m as f64).ceil() as usize).clamp(1, m);
    let mut best = (sorted[0], sorted[k - 1]);
    for i in 1..=m - k {
        let (lo, hi) = (sorted[i], sorted[i + k - 1]);
        if hi - lo < best.1 - best.0 {
            best = (lo, hi);
        }
    }
    best
}

/// Per-instant HPD bounds of `param`'s value.
pub fn product_hpd(
    samples: &PosteriorSamples,
    param: Param,
    level: f64,
) -> Result<Vec<(f64, f64)>> {
    require_draws(samples)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!(
            "HPD level must lie in (0, 1), got {level}"
        )));
    }
    let m = samples.len();
    let mut column = vec![0.0; m];
    let mut out = Vec::with_capacity(samples.n);
    // Walk each draw's blocks alongside the instant to avoid a search per cell.
    let mut cursor = vec![0usize; m];
    for t in 0..samples.n {
        for (j, d) in samples.draws.iter().enumerate() {
            let ends = d.partition(param).endpoints();
            while ends[cursor[j] + 1] <= t {
                cursor[j] += 1;
            }
            column[j] = d.values(param)[cursor[j]];
        }
        column.sort_by(f64::total_cmp);
        out.push(hpd_sorted(&column, level));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankedPartition {
    pub endpoints: Vec<usize>,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSummary {
    /// Posterior pmf of the number of changes, indexed `0..n`.
    pub n_changes_pmf: Vec<f64>,
    pub n_changes_mode: usize,
    pub top_partitions: Vec<RankedPartition>,
    /// 1-based end points whose change probability exceeds the threshold.
    pub declared_changes: Vec<usize>,
    #[serde(skip)]
    pub change_probabilities: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductEstimates {
    pub mu_mean: Vec<f64>,
    pub mu_hpd: Vec<(f64, f64)>,
    pub sigma2_mean: Vec<f64>,
    pub sigma2_hpd: Vec<(f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryOptions {
    pub top_k: usize,
    pub hpd_level: f64,
    pub prob_threshold: f64,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        Self {
            top_k: 5,
            hpd_level: 0.9,
            prob_threshold: 0.5,
        }
    }
}

/// Everything written to `summary.json`, plus the vectors behind the CSV files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryReport {
    pub schema_version: u32,
    pub model: ModelKind,
    pub n: usize,
    pub draws: usize,
    pub options: SummaryOptions,
    pub mean: PartitionSummary,
    pub variance: PartitionSummary,
    /// Common refinement of the two partitions in each draw.
    pub induced: PartitionSummary,
    pub p1_mean: f64,
    pub p2_mean: Option<f64>,
    #[serde(skip)]
    pub product: Option<ProductEstimates>,
}

fn partition_summary(parts: &[Partition], n: usize, opts: &SummaryOptions) -> PartitionSummary {
    let n_changes_pmf = pmf_of(parts.iter().map(Partition::num_changes), n);
    let mut counts = vec![0usize; n.saturating_sub(1)];
    for p in parts {
        for &e in p.interior() {
            counts[e - 1] += 1;
        }
    }
    let m = parts.len() as f64;
    let change_probabilities: Vec<f64> = counts.into_iter().map(|c| c as f64 / m).collect();
    let declared_changes = change_probabilities
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > opts.prob_threshold)
        .map(|(i, _)| i + 1)
        .collect();
    PartitionSummary {
        n_changes_mode: pmf_mode(&n_changes_pmf),
        n_changes_pmf,
        top_partitions: rank_partitions(parts, opts.top_k)
            .into_iter()
            .map(|(p, probability)| RankedPartition {
                endpoints: p.endpoints().to_vec(),
                probability,
            })
            .collect(),
        declared_changes,
        change_probabilities,
    }
}

impl SummaryReport {
    pub fn from_samples(samples: &PosteriorSamples, opts: &SummaryOptions) -> Result<Self> {
        require_draws(samples)?;
        if opts.top_k == 0 {
            return Err(Error::domain("top_k must be at least 1"));
        }
        if !(0.0..=1.0).contains(&opts.prob_threshold) {
            return Err(Error::domain(format!(
                "probability threshold must lie in [0, 1], got {}",
                opts.prob_threshold
            )));
        }
        let n = samples.n;
        let collect = |param: Param| -> Vec<Partition> {
            samples
                .draws
                .iter()
                .map(|d| d.partition(param).clone())
                .collect()
        };
        let rho1 = collect(Param::Mean);
        let rho2 = collect(Param::Variance);
        let induced: Vec<Partition> = rho1
            .iter()
            .zip(&rho2)
            .map(|(a, b)| induced_partition(&[a.clone(), b.clone()]))
            .collect::<Result<_>>()?;
        let (mu_mean, sigma2_mean) = product_estimates(samples)?;
        let m = samples.len() as f64;
        let p2_mean = samples.draws[0].p2.map(|_| {
            samples
                .draws
                .iter()
                .map(|d| d.p2.unwrap_or(f64::NAN))
                .sum::<f64>()
                / m
        });
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            model: samples.model,
            n,
            draws: samples.len(),
            options: *opts,
            mean: partition_summary(&rho1, n, opts),
            variance: partition_summary(&rho2, n, opts),
            induced: partition_summary(&induced, n, opts),
            p1_mean: samples.draws.iter().map(|d| d.p1).sum::<f64>() / m,
            p2_mean,
            product: Some(ProductEstimates {
                mu_hpd: product_hpd(samples, Param::Mean, opts.hpd_level)?,
                sigma2_hpd: product_hpd(samples, Param::Variance, opts.hpd_level)?,
                mu_mean,
                sigma2_mean,
            }),
        })
    }

    pub fn partition(&self, param: Param) -> &PartitionSummary {
        match param {
            Param::Mean => &self.mean,
            Param::Variance => &self.variance,
        }
    }

    /// Checks the structural invariants of a report.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidData(format!("summary report: {msg}")));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let unit = |p: f64| (0.0..=1.0).contains(&p);
        for (name, s) in [
            ("mean", &self.mean),
            ("variance", &self.variance),
            ("induced", &self.induced),
        ] {
            if s.n_changes_pmf.len() != self.n {
                return bad(format!(
                    "{name} pmf has length {} (expected {})",
                    s.n_changes_pmf.len(),
                    self.n
                ));
            }
            if !s.n_changes_pmf.iter().all(|&p| unit(p)) {
                return bad(format!("{name} pmf entry outside [0, 1]"));
            }
            let total: f64 = s.n_changes_pmf.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return bad(format!("{name} pmf sums to {total}"));
            }
            if s.n_changes_mode >= self.n {
                return bad(format!("{name} mode {} out of range", s.n_changes_mode));
            }
            let mut cum = 0.0;
            for r in &s.top_partitions {
                if Partition::new(self.n, r.endpoints.clone()).is_err() || !unit(r.probability) {
                    return bad(format!(
                        "{name} ranked partition {:?} is invalid",
                        r.endpoints
                    ));
                }
                cum += r.probability;
            }
            if cum > 1.0 + 1e-9 {
                return bad(format!("{name} top partitions carry mass {cum}"));
            }
            if s.top_partitions
                .windows(2)
                .any(|w| w[0].probability < w[1].probability)
            {
                return bad(format!("{name} top partitions not in decreasing order"));
            }
            if s.declared_changes.iter().any(|&e| e == 0 || e >= self.n) {
                return bad(format!("{name} declared change outside 1..n-1"));
            }
            if !s.change_probabilities.iter().all(|&p| unit(p)) {
                return bad(format!("{name} change probability outside [0, 1]"));
            }
        }
        if !unit(self.p1_mean) || self.p2_mean.is_some_and(|p| !unit(p)) {
            return bad("change probability mean outside [0, 1]".into());
        }
        if let Some(pe) = &self.product {
            for (lo, hi) in pe.mu_hpd.iter().chain(&pe.sigma2_hpd) {
                if lo > hi {
                    return bad(format!("HPD bounds out of order ({lo} > {hi})"));
                }
            }
        }
        Ok(())
    }
}
