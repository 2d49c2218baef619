//! Sampling the surrogate posterior and pushing samples through the model.

use leja_bayes::calibrate::{run_calibration, CalibrationConfig};
use leja_bayes::domain::Interval;
use leja_bayes::sampling::{propagate, run_mcmc, McmcConfig};
use leja_bayes::statmodel::{Likelihood, Prior};
use leja_bayes::testmodels::{generate_data, sinc_model};

fn main() -> leja_bayes::error::Result<()> {
    let prior = Prior::uniform(&[Interval::new(-2.0, 2.0)])?;
    let z = generate_data(&sinc_model(), &[0.4], 0.05, 10, 7)?;
    let lik = Likelihood::gaussian(z, 0.05)?;
    let state = run_calibration(&sinc_model(), &prior, &lik, &CalibrationConfig::default())?;
    let pe = state.posterior(&prior, &lik);
    let chain = run_mcmc(
        &pe,
        &McmcConfig {
            n_samples: 20_000,
            seed: 3,
            ..McmcConfig::default()
        },
    )?;
    println!("acceptance rate {:.3}", chain.acceptance_rate);
    println!(
        "posterior mean {:.4} +- {:.4}",
        chain.mean(0),
        chain.standard_error(0)
    );
    let prop = propagate(&chain, &state.surrogate.components[0]);
    println!(
        "propagated output: mean {:.4}, std {:.4}",
        prop.mean, prop.std
    );
    for (q, v) in prop.quantiles {
        println!("  {q:>2}% {v:.4}");
    }
    Ok(())
}
