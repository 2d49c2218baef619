//! Adaptive calibration of the Gaussian test model, printing each iteration.

use leja_bayes::calibrate::{run_calibration_with, CalibrationConfig};
use leja_bayes::domain::Interval;
use leja_bayes::statmodel::{Likelihood, Prior};
use leja_bayes::testmodels::{gauss_model, generate_data, ForwardModel};

fn main() -> leja_bayes::error::Result<()> {
    let model = gauss_model(1);
    let prior = Prior::uniform(&[Interval::new(0.0, 1.0)])?;
    let z = generate_data(&gauss_model(1), &[0.25], 0.1, 20, 1)?;
    let lik = Likelihood::gaussian(z, 0.1)?;
    let cfg = CalibrationConfig {
        zeta0: 1e-3,
        budget: 20,
        ..CalibrationConfig::default()
    };
    let state = run_calibration_with(&model, &prior, &lik, &cfg, |r| {
        let change = r.change.map_or("-".to_string(), |c| format!("{c:.3e}"));
        println!(
            "n={:>2} node={:.6} u={:.6} change={change}",
            r.n, r.node[0], r.value[0]
        );
    })?;
    println!(
        "converged: {}, model evaluations: {}",
        state.converged,
        model.evaluations()
    );
    Ok(())
}
