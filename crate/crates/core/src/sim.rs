//! Synthetic scenarios and Monte Carlo replication studies.
//!
//! Replication `r` of a study with master seed `s` draws its data and its
//! chain from the stream seeded with `s ^ splitmix64(r)`, so any single
//! replication can be rerun alone.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::FitModel;
use crate::gibbs::McmcConfig;
use crate::normal::{draw_normal, NormalHyper};
use crate::partition::Partition;
use crate::rng::{chain_rng, derive_seed};
use crate::samples::{ModelKind, Param};
use crate::summary::{
    change_probabilities, most_likely_partition, n_changes_posterior, pmf_mode, product_estimates,
};

/// Environment variable capping the number of replication workers.
pub const THREADS_ENV: &str = "MCPD_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub n: usize,
    pub rho1: Partition,
    pub rho2: Partition,
    pub mu_star: Vec<f64>,
    pub sigma2_star: Vec<f64>,
}

impl ScenarioSpec {
    pub fn new(
        name: impl Into<String>,
        rho1: Partition,
        rho2: Partition,
        mu_star: Vec<f64>,
        sigma2_star: Vec<f64>,
    ) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            n: rho1.n(),
            rho1,
            rho2,
            mu_star,
            sigma2_star,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho1.n() != self.n || self.rho2.n() != self.n {
            return Err(Error::LengthMismatch(self.rho1.n(), self.rho2.n()));
        }
        if self.mu_star.len() != self.rho1.num_blocks() {
            return Err(Error::Config(format!(
                "scenario {}: {} mean values for {} blocks",
                self.name,
                self.mu_star.len(),
                self.rho1.num_blocks()
            )));
        }
        if self.sigma2_star.len() != self.rho2.num_blocks() {
            return Err(Error::Config(format!(
                "scenario {}: {} variances for {} blocks",
                self.name,
                self.sigma2_star.len(),
                self.rho2.num_blocks()
            )));
        }
        if !self.mu_star.iter().all(|m| m.is_finite()) {
            return Err(Error::Config(format!(
                "scenario {}: non-finite mean",
                self.name
            )));
        }
        if let Some((j, &v)) = self
            .sigma2_star
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v > 0.0 && v.is_finite()))
        {
            return Err(Error::NonPositiveVariance { index: j, value: v });
        }
        Ok(())
    }

    pub fn mu(&self) -> Vec<f64> {
        self.rho1.expand(&self.mu_star)
    }

    pub fn sigma2(&self) -> Vec<f64> {
        self.rho2.expand(&self.sigma2_star)
    }
}

/// A generated series together with the per-instant truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatedSeries {
    pub x: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
}

pub fn generate_series<R: Rng + ?Sized>(
    spec: &ScenarioSpec,
    rng: &mut R,
) -> Result<SimulatedSeries> {
    spec.validate()?;
    let mu = spec.mu();
    let sigma2 = spec.sigma2();
    let x = mu
        .iter()
        .zip(&sigma2)
        .map(|(&m, &v)| draw_normal(m, v.sqrt(), rng))
        .collect();
    Ok(SimulatedSeries { x, mu, sigma2 })
}

fn part(n: usize, ends: &[usize]) -> Partition {
    Partition::new(n, ends.to_vec()).expect("preset partition")
}

/// The built-in scenarios: `scenario1`, `scenario2`, `scenario3`, `supplement`.
pub fn scenario_presets() -> Vec<ScenarioSpec> {
    let s = |name: &str, r1: Partition, r2: Partition, mu: &[f64], s2: &[f64]| {
        ScenarioSpec::new(name, r1, r2, mu.to_vec(), s2.to_vec()).expect("preset scenario")
    };
    vec![
        s(
            "scenario1",
            part(100, &[0, 25, 50, 75, 100]),
            part(100, &[0, 100]),
            &[1.0, 3.0, 0.0, 2.0],
            &[1.0],
        ),
        s(
            "scenario2",
            part(300, &[0, 300]),
            part(300, &[0, 75, 150, 225, 300]),
            &[1.0],
            &[1.0, 4.0, 1.0, 9.0],
        ),
        s(
            "scenario3",
            part(300, &[0, 60, 120, 180, 240, 300]),
            part(300, &[0, 150, 300]),
            &[0.0, 2.0, 4.0, 2.0, 0.0],
            &[1.0, 4.0],
        ),
        s(
            "supplement",
            part(400, &[0, 100, 200, 300, 400]),
            part(400, &[0, 122, 223, 325, 400]),
            &[0.5, 1.0, 0.25, 0.75],
            &[
                0.3f64.powi(2),
                0.6f64.powi(2),
                0.15f64.powi(2),
                0.45f64.powi(2),
            ],
        ),
    ]
}

pub fn scenario(name: &str) -> Result<ScenarioSpec> {
    scenario_presets()
        .into_iter()
        .find(|s| s.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| {
            Error::Config(format!(
                "unknown scenario `{name}` (expected scenario1, scenario2, scenario3 or supplement)"
            ))
        })
}

/// Named hyperparameter settings `(mu0, sigma0sq, a, d)` of the sensitivity study.
pub fn hyper_presets() -> Vec<(&'static str, NormalHyper)> {
    let h = |mu0, s0, a, d| NormalHyper {
        mu0,
        sigma0sq: s0,
        a,
        d,
    };
    vec![
        ("C1", h(0.0, 100.0, 0.05, 1.05)),
        ("C2", h(0.0, 1.0, 1.0, 1.0)),
        ("C3", h(0.0, 100.0, 1.0, 1.0)),
        ("C4", h(0.0, 1.0, 0.05, 1.05)),
    ]
}

pub fn hyper_preset(name: &str) -> Result<NormalHyper> {
    hyper_presets()
        .into_iter()
        .find(|(k, _)| k.eq_ignore_ascii_case(name))
        .map(|(_, h)| h)
        .ok_or_else(|| {
            Error::Config(format!(
                "unknown preset `{name}` (expected C1, C2, C3 or C4)"
            ))
        })
}

/// Centred rolling sample variance. Windows near the edges are shifted to
/// stay inside the series, so every entry uses exactly `window` points.
pub fn windowed_variance(x: &[f64], window: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if window < 3 || window % 2 == 0 {
        return Err(Error::domain(format!(
            "window must be odd and at least 3, got {window}"
        )));
    }
    if window > n {
        return Err(Error::domain(format!(
            "window {window} exceeds series length {n}"
        )));
    }
    let half = window / 2;
    let w = window as f64;
    Ok((0..n)
        .map(|i| {
            let start = i.saturating_sub(half).min(n - window);
            let xs = &x[start..start + window];
            let mean = xs.iter().sum::<f64>() / w;
            xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (w - 1.0)
        })
        .collect())
}

/// Summary of one replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub index: usize,
    pub mode_mean_partition: Partition,
    pub mode_var_partition: Partition,
    pub mode_n_mean: usize,
    pub mode_n_var: usize,
    pub change_prob_mean: Vec<f64>,
    pub change_prob_var: Vec<f64>,
    pub product_mu: Vec<f64>,
    pub product_sigma2: Vec<f64>,
}

/// Pointwise mean and 5%/95% quantiles across replications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub mean: Vec<f64>,
    pub q05: Vec<f64>,
    pub q95: Vec<f64>,
}

/// Linear-interpolation sample quantile of sorted data (Hyndman-Fan type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Band {
    fn from_rows(rows: &[&[f64]]) -> Self {
        let len = rows.first().map_or(0, |r| r.len());
        let m = rows.len() as f64;
        let mut band = Band {
            mean: Vec::with_capacity(len),
            q05: Vec::with_capacity(len),
            q95: Vec::with_capacity(len),
        };
        let mut col = vec![0.0; rows.len()];
        for t in 0..len {
            for (c, r) in col.iter_mut().zip(rows) {
                *c = r[t];
            }
            band.mean.push(col.iter().sum::<f64>() / m);
            col.sort_by(f64::total_cmp);
            band.q05.push(quantile_sorted(&col, 0.05));
            band.q95.push(quantile_sorted(&col, 0.95));
        }
        band
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub scenario: String,
    pub model: ModelKind,
    pub n: usize,
    pub seed: u64,
    /// Sorted by replication index.
    pub replications: Vec<ReplicationResult>,
    pub change_prob_mean: Band,
    pub change_prob_var: Band,
    pub product_mu: Band,
    pub product_sigma2: Band,
    /// Entry `c` counts replications whose posterior mode of the number of changes is `c`.
    pub n_mode_counts_mean: Vec<usize>,
    pub n_mode_counts_var: Vec<usize>,
}

impl McReport {
    /// Aggregates replication results; the input order does not matter.
    pub fn from_replications(
        scenario: &str,
        model: ModelKind,
        n: usize,
        seed: u64,
        mut replications: Vec<ReplicationResult>,
    ) -> Result<Self> {
        if replications.is_empty() {
            return Err(Error::domain("no replications"));
        }
        replications.sort_by_key(|r| r.index);
        let rows = |f: fn(&ReplicationResult) -> &Vec<f64>| -> Vec<&[f64]> {
            replications.iter().map(|r| f(r).as_slice()).collect()
        };
        let counts = |f: fn(&ReplicationResult) -> usize| {
            let mut c = vec![0usize; n];
            for r in &replications {
                c[f(r)] += 1;
            }
            c
        };
        Ok(Self {
            scenario: scenario.to_string(),
            model,
            n,
            seed,
            change_prob_mean: Band::from_rows(&rows(|r| &r.change_prob_mean)),
            change_prob_var: Band::from_rows(&rows(|r| &r.change_prob_var)),
            product_mu: Band::from_rows(&rows(|r| &r.product_mu)),
            product_sigma2: Band::from_rows(&rows(|r| &r.product_sigma2)),
            n_mode_counts_mean: counts(|r| r.mode_n_mean),
            n_mode_counts_var: counts(|r| r.mode_n_var),
            replications,
        })
    }

    /// Distinct posterior-mode partitions across replications with their counts,
    /// most frequent first.
    pub fn mode_partition_counts(&self, param: Param) -> Vec<(Partition, usize)> {
        let mut all: Vec<&Partition> = self
            .replications
            .iter()
            .map(|r| match param {
                Param::Mean => &r.mode_mean_partition,
                Param::Variance => &r.mode_var_partition,
            })
            .collect();
        all.sort_by(|a, b| a.endpoints().cmp(b.endpoints()));
        let mut out: Vec<(Partition, usize)> = Vec::new();
        for p in all {
            match out.last_mut() {
                Some((q, c)) if q == p => *c += 1,
                _ => out.push((p.clone(), 1)),
            }
        }
        out.sort_by(|a, b| {
            b.1.cmp(&a.1)
                .then_with(|| a.0.endpoints().cmp(b.0.endpoints()))
        });
        out
    }
}

/// Fits one synthetic replication and reduces it to its summary.
pub fn run_replication(
    model: &FitModel,
    spec: &ScenarioSpec,
    config: &McmcConfig,
    index: usize,
) -> Result<ReplicationResult> {
    let mut rng = chain_rng(derive_seed(config.seed, index as u64));
    let series = generate_series(spec, &mut rng)?;
    let chain = McmcConfig {
        seed: rng.random(),
        ..*config
    };
    let samples = model.fit(&series.x, &chain)?;
    let mode =
        |param| -> Result<Partition> { Ok(most_likely_partition(&samples, param, 1)?.remove(0).0) };
    let (product_mu, product_sigma2) = product_estimates(&samples)?;
    Ok(ReplicationResult {
        index,
        mode_mean_partition: mode(Param::Mean)?,
        mode_var_partition: mode(Param::Variance)?,
        mode_n_mean: pmf_mode(&n_changes_posterior(&samples, Param::Mean)?),
        mode_n_var: pmf_mode(&n_changes_posterior(&samples, Param::Variance)?),
        change_prob_mean: change_probabilities(&samples, Param::Mean)?,
        change_prob_var: change_probabilities(&samples, Param::Variance)?,
        product_mu,
        product_sigma2,
    })
}

/// Worker count from [`THREADS_ENV`], if set to a positive integer.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(Some(k)),
            _ => Err(Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs `replications` independent fits in parallel and aggregates them.
pub fn run_replications(
    model: &FitModel,
    spec: &ScenarioSpec,
    replications: usize,
    config: &McmcConfig,
) -> Result<McReport> {
    if replications == 0 {
        return Err(Error::Config("replications must be at least 1".into()));
    }
    spec.validate()?;
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = thread_cap()? {
        builder = builder.num_threads(k);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results = pool.install(|| {
        (0..replications)
            .into_par_iter()
            .map(|r| run_replication(model, spec, config, r))
            .collect::<Result<Vec<_>>>()
    })?;
    McReport::from_replications(&spec.name, model.kind(), spec.n, config.seed, results)
}
