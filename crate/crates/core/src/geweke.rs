//! Joint-distribution ("getting it right") check of the Gibbs transition.
//!
//! Two simulators target the same joint law of parameters and data:
//! marginal-conditional draws independent `(theta, X)` pairs from prior then
//! likelihood; successive-conditional alternates a Gibbs transition with a
//! fresh data draw. Any error in a full conditional shifts the second
//! simulator's moments. Standard errors of the autocorrelated sequence use
//! non-overlapping batch means.

use rand::Rng;

use crate::error::Result;
use crate::gibbs::{prior_state, GibbsSampler, ModelState};
use crate::normal::NormalHyper;
use crate::partition::YaoPrior;

pub const STATISTICS: [&str; 6] = [
    "n_changes_mean",
    "n_changes_var",
    "mean_mu",
    "mean_sigma2",
    "p1",
    "p2",
];

#[derive(Clone, Debug, PartialEq)]
pub struct GewekeStat {
    pub name: &'static str,
    pub marginal_mean: f64,
    pub successive_mean: f64,
    pub z: f64,
}

fn statistics(state: &ModelState) -> [f64; 6] {
    let n = state.n() as f64;
    [
        state.u1.num_changes() as f64,
        state.u2.num_changes() as f64,
        state.theta.mu.iter().sum::<f64>() / n,
        state.theta.sigma2.iter().sum::<f64>() / n,
        state.p1,
        state.p2,
    ]
}

fn mean_and_var(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, var)
}

/// Squared standard error of the mean by non-overlapping batch means.
fn batch_means_se2(xs: &[f64]) -> f64 {
    let batches = ((xs.len() as f64).sqrt() as usize).max(2);
    let size = xs.len() / batches;
    let means: Vec<f64> = xs
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let (_, var) = mean_and_var(&means);
    var / batches as f64
}

/// Runs the check with the production transition.
pub fn geweke_joint_check<R: Rng + ?Sized>(
    n: usize,
    hyper: &NormalHyper,
    yao1: &YaoPrior,
    yao2: &YaoPrior,
    draws: usize,
    rng: &mut R,
) -> Result<Vec<GewekeStat>> {
    let mut sampler = GibbsSampler::new(n, hyper, yao1, yao2)?;
    geweke_joint_check_with(n, hyper, yao1, yao2, draws, rng, |state, x, rng| {
        sampler.step(x, state, rng)
    })
}

/// Runs the check with a caller-supplied transition `(state, data, rng)`.
pub fn geweke_joint_check_with<R, F>(
    n: usize,
    hyper: &NormalHyper,
    yao1: &YaoPrior,
    yao2: &YaoPrior,
    draws: usize,
    rng: &mut R,
    mut transition: F,
) -> Result<Vec<GewekeStat>>
where
    R: Rng + ?Sized,
    F: FnMut(&mut ModelState, &[f64], &mut R),
{
    hyper.validate()?;
    yao1.validate()?;
    yao2.validate()?;
    let mut marginal: Vec<Vec<f64>> = vec![Vec::with_capacity(draws); 6];
    for _ in 0..draws {
        let state = prior_state(n, hyper, yao1, yao2, rng);
        for (col, v) in marginal.iter_mut().zip(statistics(&state)) {
            col.push(v);
        }
    }

    let mut successive: Vec<Vec<f64>> = vec![Vec::with_capacity(draws); 6];
    let mut state = prior_state(n, hyper, yao1, yao2, rng);
    for _ in 0..draws {
        let x = state.simulate_data(rng);
        transition(&mut state, &x, rng);
        for (col, v) in successive.iter_mut().zip(statistics(&state)) {
            col.push(v);
        }
    }

    Ok(STATISTICS
        .iter()
        .zip(marginal.iter().zip(&successive))
        .map(|(&name, (mc, sc))| {
            let (m1, v1) = mean_and_var(mc);
            let m2 = sc.iter().sum::<f64>() / sc.len() as f64;
            let se2 = v1 / mc.len() as f64 + batch_means_se2(sc);
            GewekeStat {
                name,
                marginal_mean: m1,
                successive_mean: m2,
                z: (m1 - m2) / se2.sqrt(),
            }
        })
        .collect())
}
