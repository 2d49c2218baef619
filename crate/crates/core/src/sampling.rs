//! Random-walk Metropolis sampling of surrogate posteriors and propagation
//! of the samples through the surrogate.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statmodel::{PosteriorEval, Prior};
use crate::surrogate::Surrogate;

/// Prior draws tried before giving up on a starting point.
pub const MAX_START_DRAWS: usize = 10_000;

/// Adaptation window during burn-in.
const ADAPT_WINDOW: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McmcConfig {
    /// Total number of Metropolis steps, burn-in included.
    pub n_samples: usize,
    /// Defaults to 20% of `n_samples`.
    pub burn_in: Option<usize>,
    pub thinning: usize,
    /// Per-dimension proposal standard deviations; tuned during burn-in
    /// when absent.
    pub proposal_scale: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            n_samples: 20_000,
            burn_in: None,
            thinning: 1,
            proposal_scale: None,
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.n_samples / 5)
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.n_samples == 0 || self.thinning == 0 || self.burn_in() >= self.n_samples {
            return Err(Error::InvalidInput(format!(
                "mcmc needs n_samples > burn_in and thinning >= 1 (n_samples {}, burn_in {}, thinning {})",
                self.n_samples,
                self.burn_in(),
                self.thinning
            )));
        }
        if let Some(s) = &self.proposal_scale {
            if s.len() != d || s.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidInput(format!(
                    "proposal_scale needs {d} positive entries"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub samples: Vec<Vec<f64>>,
    /// accepted / proposed after burn-in.
    pub acceptance_rate: f64,
    pub accepted: usize,
    pub proposed: usize,
    pub proposal_scale: Vec<f64>,
    pub seed: u64,
    pub burn_in: usize,
    pub thinning: usize,
}

impl Chain {
    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn mean(&self, k: usize) -> f64 {
        self.samples.iter().map(|x| x[k]).sum::<f64>() / self.samples.len() as f64
    }

    /// Batch-means standard error of the mean of coordinate `k`.
    pub fn standard_error(&self, k: usize) -> f64 {
        let n = self.samples.len();
        let batches = (n as f64).sqrt().floor().max(2.0) as usize;
        let size = n / batches;
        let means: Vec<f64> = (0..batches)
            .map(|b| {
                self.samples[b * size..(b + 1) * size]
                    .iter()
                    .map(|x| x[k])
                    .sum::<f64>()
                    / size as f64
            })
            .collect();
        let m = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (batches - 1) as f64;
        (var / batches as f64).sqrt()
    }

    /// One sample per row, columns `x_1..x_d`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let header: Vec<String> = (1..=self.dim().max(1)).map(|k| format!("x_{k}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for x in &self.samples {
            let row: Vec<String> = x.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Metropolis rule: accept when `ln u < ln_ratio`.
pub fn metropolis_accept(ln_ratio: f64, u: f64) -> bool {
    ln_ratio >= 0.0 || u.ln() < ln_ratio
}

/// Samples the posterior of `pe`.
pub fn run_mcmc(pe: &PosteriorEval, cfg: &McmcConfig) -> Result<Chain> {
    run_mcmc_density(|x| pe.ln_density(x), pe.prior, cfg)
}

/// Samples an arbitrary log density whose support lies within the prior's.
pub fn run_mcmc_density(
    ln_density: impl Fn(&[f64]) -> f64,
    prior: &Prior,
    cfg: &McmcConfig,
) -> Result<Chain> {
    let d = prior.marginals.len();
    cfg.validate(d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = Vec::new();
    let mut lx = f64::NEG_INFINITY;
    for _ in 0..MAX_START_DRAWS {
        let cand = prior.sample(&mut rng);
        let l = if prior.ln_density(&cand) == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            ln_density(&cand)
        };
        if l > f64::NEG_INFINITY {
            x = cand;
            lx = l;
            break;
        }
    }
    if lx == f64::NEG_INFINITY {
        return Err(Error::ZeroDensityStart(MAX_START_DRAWS));
    }
    let adapt = cfg.proposal_scale.is_none();
    let mut scale = cfg
        .proposal_scale
        .clone()
        .unwrap_or_else(|| prior.marginals.iter().map(|m| 0.25 * m.std()).collect());
    let burn_in = cfg.burn_in();
    let mut samples = Vec::with_capacity((cfg.n_samples - burn_in) / cfg.thinning + 1);
    let (mut accepted, mut proposed) = (0usize, 0usize);
    let mut window_acc = 0usize;
    let mut y = vec![0.0; d];
    for step in 0..cfg.n_samples {
        for k in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            y[k] = x[k] + scale[k] * z;
        }
        let u: f64 = rng.random();
        let ly = if prior.ln_density(&y) == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            ln_density(&y)
        };
        let accept = ly > f64::NEG_INFINITY && metropolis_accept(ly - lx, u);
        if accept {
            x.copy_from_slice(&y);
            lx = ly;
        }
        if step < burn_in {
            window_acc += accept as usize;
            if adapt && (step + 1) % ADAPT_WINDOW == 0 {
                let rate = window_acc as f64 / ADAPT_WINDOW as f64;
                let f = if rate < 0.2 {
                    0.7
                } else if rate > 0.5 {
                    1.4
                } else {
                    1.0
                };
                scale.iter_mut().for_each(|s| *s *= f);
                window_acc = 0;
            }
        } else {
            proposed += 1;
            accepted += accept as usize;
            if (step - burn_in) % cfg.thinning == 0 {
                samples.push(x.clone());
            }
        }
    }
    Ok(Chain {
        samples,
        acceptance_rate: accepted as f64 / proposed as f64,
        accepted,
        proposed,
        proposal_scale: scale,
        seed: cfg.seed,
        burn_in,
        thinning: cfg.thinning,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationSummary {
    pub mean: f64,
    pub std: f64,
    /// (percent, value) for the 5, 25, 50, 75 and 95 percentiles.
    pub quantiles: Vec<(f64, f64)>,
}

/// Pushes every retained sample through `s`.
pub fn propagate(chain: &Chain, s: &Surrogate) -> PropagationSummary {
    propagate_with(chain, |x| s.evaluate(x))
}

/// Like [`propagate`] with an arbitrary map.
pub fn propagate_with(chain: &Chain, f: impl Fn(&[f64]) -> f64) -> PropagationSummary {
    assert!(
        !chain.samples.is_empty(),
        "propagate needs a nonempty chain"
    );
    let mut v: Vec<f64> = chain.samples.iter().map(|x| f(x)).collect();
    // Sorting first makes the result independent of sample order.
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
    let quantiles = [5.0, 25.0, 50.0, 75.0, 95.0]
        .iter()
        .map(|&p| (p, quantile(&v, p / 100.0)))
        .collect();
    PropagationSummary {
        mean,
        std: var.sqrt(),
        quantiles,
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let i = h.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (h - i as f64) * (sorted[j] - sorted[i])
}
