//! Brute-force numerical references for the test suites.
//!
//! Nothing here shares code with the library under test: every marginal
//! likelihood is obtained by integrating the raw joint density numerically,
//! and every posterior over partitions by enumerating all partitions.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

/// `log N(x; mean, var)`.
pub fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * PI * var).ln() - (x - mean).powi(2) / (2.0 * var)
}

/// Log density of the Inverse-Gamma law with shape `shape` and scale `scale`.
pub fn log_inv_gamma_pdf(v: f64, shape: f64, scale: f64) -> f64 {
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * v.ln() - scale / v
}

/// Log density of `Beta(a, b)`.
pub fn log_beta_pdf(p: f64, a: f64, b: f64) -> f64 {
    ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * p.ln() + (b - 1.0) * (-p).ln_1p()
}

/// `log ∫_lo^hi exp(g(t)) dt`.
///
/// The integrand is located on a fine grid, the interval is cut down to the
/// region within `e^-60` of the maximum, and that region is integrated
/// piecewise by tanh-sinh quadrature.
pub fn log_integrate(g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    log_integrate_with(g, lo, hi, 4001, 24)
}

pub fn log_integrate_with(
    g: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    grid: usize,
    pieces: usize,
) -> f64 {
    assert!(hi > lo);
    let step = (hi - lo) / (grid - 1) as f64;
    let vals: Vec<f64> = (0..grid).map(|k| g(lo + k as f64 * step)).collect();
    let gmax = vals
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(
        gmax.is_finite(),
        "integrand has no finite value on the grid"
    );
    let first = vals.iter().position(|&v| v >= gmax - 60.0).unwrap();
    let last = vals.iter().rposition(|&v| v >= gmax - 60.0).unwrap();
    let a = lo + first.saturating_sub(2) as f64 * step;
    let b = lo + (last + 2).min(grid - 1) as f64 * step;
    let width = (b - a) / pieces as f64;
    let f = |t: f64| {
        let v = (g(t) - gmax).exp();
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let mut total = 0.0;
    for k in 0..pieces {
        let (s, e) = (a + k as f64 * width, a + (k + 1) as f64 * width);
        total +=
            quadrature::double_exponential::integrate(f, s, e, 1e-14 * width.max(1e-300)).integral;
    }
    gmax + total.ln()
}

/// Normal-model hyperparameters: `mu* ~ N(mu0, sigma0sq)`,
/// `sigma2* ~ IG(shape d/2, scale a/2)`.
#[derive(Clone, Copy, Debug)]
pub struct Prior {
    pub mu0: f64,
    pub sigma0sq: f64,
    pub a: f64,
    pub d: f64,
}

impl Prior {
    fn log_prior_sigma2(&self, v: f64) -> f64 {
        log_inv_gamma_pdf(v, self.d / 2.0, self.a / 2.0)
    }
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// `log ∫ prod_i N(x_i; mu, sigma2_i) N(mu; mu0, sigma0sq) dmu`.
pub fn mean_block_marginal(x: &[f64], sigma2: &[f64], prior: &Prior) -> f64 {
    let sd = sigma2
        .iter()
        .copied()
        .chain([prior.sigma0sq])
        .fold(0.0, f64::max)
        .sqrt();
    let (lo, hi) = span(x.iter().copied().chain([prior.mu0]));
    let g = |mu: f64| {
        x.iter()
            .zip(sigma2)
            .map(|(&xi, &v)| log_normal_pdf(xi, mu, v))
            .sum::<f64>()
            + log_normal_pdf(mu, prior.mu0, prior.sigma0sq)
    };
    log_integrate(g, lo - 40.0 * sd, hi + 40.0 * sd)
}

/// `log ∫ prod_i N(x_i; mu_i, sigma2) IG(sigma2; d/2, a/2) dsigma2`,
/// integrated over `log sigma2`.
pub fn var_block_marginal(x: &[f64], mu: &[f64], prior: &Prior) -> f64 {
    let g = |u: f64| {
        let v = u.exp();
        x.iter()
            .zip(mu)
            .map(|(&xi, &m)| log_normal_pdf(xi, m, v))
            .sum::<f64>()
            + prior.log_prior_sigma2(v)
            + u
    };
    log_integrate(g, -200.0, 300.0)
}

/// `log ∫∫ prod_i N(x_i; mu, sigma2) N(mu; m, v sigma2) IG(sigma2; d/2, a/2) dmu dsigma2`.
pub fn nig_block_marginal(x: &[f64], m: f64, v: f64, a: f64, d: f64) -> f64 {
    let (lo, hi) = span(x.iter().copied().chain([m]));
    let outer = |u: f64| {
        let s2 = u.exp();
        let sd = (s2 * v.max(1.0)).sqrt();
        let inner = |mu: f64| {
            x.iter().map(|&xi| log_normal_pdf(xi, mu, s2)).sum::<f64>()
                + log_normal_pdf(mu, m, v * s2)
        };
        log_integrate_with(inner, lo - 40.0 * sd, hi + 40.0 * sd, 801, 8)
            + log_inv_gamma_pdf(s2, d / 2.0, a / 2.0)
            + u
    };
    log_integrate_with(outer, -60.0, 80.0, 1201, 16)
}

/// `log ∫ p^c (1-p)^(n-1-c) Beta(p; alpha, beta) dp`: the prior
/// probability of one particular partition with `c` changes once `p` is integrated out.
pub fn log_partition_prior(n: usize, changes: usize, alpha: f64, beta: f64) -> f64 {
    let c = changes as f64;
    let rest = (n - 1 - changes) as f64;
    let g = |t: f64| {
        // p = logistic(t), dp = p(1-p) dt
        let lp = -(-t).exp().ln_1p();
        let lq = -t.exp().ln_1p();
        c * lp + rest * lq + log_beta_pdf_logs(lp, lq, alpha, beta) + lp + lq
    };
    log_integrate(g, -800.0, 800.0)
}

fn log_beta_pdf_logs(lp: f64, lq: f64, a: f64, b: f64) -> f64 {
    ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * lp + (b - 1.0) * lq
}

/// All partitions of `{1..n}` as end-point lists `[0, ..., n]`.
pub fn all_partitions(n: usize) -> Vec<Vec<usize>> {
    assert!(n >= 1 && n <= 24);
    (0..1u32 << (n - 1))
        .map(|mask| {
            let mut ends = vec![0];
            ends.extend((1..n).filter(|&i| mask & (1 << (i - 1)) != 0));
            ends.push(n);
            ends
        })
        .collect()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Exact posterior over single partitions when each block's marginal
/// likelihood is available: returns `(end points, probability)` for every partition.
pub fn single_partition_posterior(
    x: &[f64],
    alpha: f64,
    beta: f64,
    block_marginal: impl Fn(&[f64]) -> f64,
) -> Vec<(Vec<usize>, f64)> {
    let n = x.len();
    let parts = all_partitions(n);
    let logs: Vec<f64> = parts
        .iter()
        .map(|e| {
            let like: f64 = e.windows(2).map(|w| block_marginal(&x[w[0]..w[1]])).sum();
            like + log_partition_prior(n, e.len() - 2, alpha, beta)
        })
        .collect();
    let z = log_sum_exp(&logs);
    parts
        .into_iter()
        .zip(logs)
        .map(|(e, l)| (e, (l - z).exp()))
        .collect()
}

/// Exact joint posterior of the (mean, variance) partition pair for a short
/// series under the two-partition Normal model with `p_k ~ Beta(alpha_k, beta_k)`.
///
/// Block variances are integrated on a trapezoid grid in `log sigma2` (exponentially
/// accurate for smooth integrands on the line), block means by the trapezoid rule
/// on a grid spanning 12 standard deviations either side of the data-weighted centre.
pub fn two_partition_posterior(
    x: &[f64],
    prior: &Prior,
    yao1: (f64, f64),
    yao2: (f64, f64),
) -> Vec<((Vec<usize>, Vec<usize>), f64)> {
    two_partition_posterior_with(x, prior, yao1, yao2, 0.2)
}

pub fn two_partition_posterior_with(
    x: &[f64],
    prior: &Prior,
    yao1: (f64, f64),
    yao2: (f64, f64),
    step: f64,
) -> Vec<((Vec<usize>, Vec<usize>), f64)> {
    let n = x.len();
    assert!(n <= 4, "enumeration grid is sized for n <= 4");
    let parts = all_partitions(n);
    let (u_lo, u_hi, h): (f64, f64, f64) = (-14.0, 12.0, step);
    let nodes: Vec<f64> = (0..=((u_hi - u_lo) / h).round() as usize)
        .map(|k| u_lo + k as f64 * h)
        .collect();
    // log prior weight of a log-variance node, including the Jacobian and the step
    let node_w: Vec<f64> = nodes
        .iter()
        .map(|&u| prior.log_prior_sigma2(u.exp()) + u + h.ln())
        .collect();

    let mut out = Vec::new();
    let mut logs = Vec::new();
    for r2 in &parts {
        let b2 = r2.len() - 1;
        for r1 in &parts {
            let mut terms = Vec::new();
            let mut idx = vec![0usize; b2];
            loop {
                let mut s2 = vec![0.0; n];
                let mut lw = 0.0;
                for (j, w) in r2.windows(2).enumerate() {
                    let v = nodes[idx[j]].exp();
                    s2[w[0]..w[1]].fill(v);
                    lw += node_w[idx[j]];
                }
                let like: f64 = r1
                    .windows(2)
                    .map(|w| mean_block_trapezoid(&x[w[0]..w[1]], &s2[w[0]..w[1]], prior))
                    .sum();
                terms.push(lw + like);
                // next multi-index
                let mut k = 0;
                while k < b2 {
                    idx[k] += 1;
                    if idx[k] < nodes.len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == b2 {
                    break;
                }
            }
            let log_like = log_sum_exp(&terms);
            let lp = log_partition_prior(n, r1.len() - 2, yao1.0, yao1.1)
                + log_partition_prior(n, r2.len() - 2, yao2.0, yao2.1);
            logs.push(log_like + lp);
            out.push((r1.clone(), r2.clone()));
        }
    }
    let z = log_sum_exp(&logs);
    out.into_iter()
        .zip(logs)
        .map(|(k, l)| (k, (l - z).exp()))
        .collect()
}

fn mean_block_trapezoid(x: &[f64], s2: &[f64], prior: &Prior) -> f64 {
    let w: f64 = s2.iter().map(|v| 1.0 / v).sum::<f64>() + 1.0 / prior.sigma0sq;
    let centre =
        (x.iter().zip(s2).map(|(xi, v)| xi / v).sum::<f64>() + prior.mu0 / prior.sigma0sq) / w;
    let sd = (1.0 / w).sqrt();
    let m = 24;
    let h = 24.0 * sd / m as f64;
    let terms: Vec<f64> = (0..=m)
        .map(|k| {
            let mu = centre - 12.0 * sd + k as f64 * h;
            x.iter()
                .zip(s2)
                .map(|(&xi, &v)| log_normal_pdf(xi, mu, v))
                .sum::<f64>()
                + log_normal_pdf(mu, prior.mu0, prior.sigma0sq)
        })
        .collect();
    log_sum_exp(&terms) + h.ln()
}

/// Marginal pmfs of the number of changes `(N1, N2)` from a joint posterior over partition pairs.
pub fn change_count_pmfs(
    n: usize,
    joint: &[((Vec<usize>, Vec<usize>), f64)],
) -> (Vec<f64>, Vec<f64>) {
    let mut p1 = vec![0.0; n];
    let mut p2 = vec![0.0; n];
    for ((r1, r2), p) in joint {
        p1[r1.len() - 2] += p;
        p2[r2.len() - 2] += p;
    }
    (p1, p2)
}

/// Total-variation distance between two pmfs on the same support.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
