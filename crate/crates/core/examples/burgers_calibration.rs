//! Calibrating the boundary perturbation of the viscous Burgers equation
//! from observed shock locations.

use leja_bayes::calibrate::{run_calibration, CalibrationConfig};
use leja_bayes::domain::Interval;
use leja_bayes::statmodel::{Likelihood, Prior, Quadrature};
use leja_bayes::testmodels::{
    burgers_tanh_crossing, generate_parameter_data, BurgersConfig, BurgersModel, ForwardModel,
};

fn main() -> leja_bayes::error::Result<()> {
    let iv = Interval::new(0.0, 0.1);
    let model = BurgersModel::new(BurgersConfig::default(), iv)?;
    let z = generate_parameter_data(
        &BurgersModel::new(BurgersConfig::default(), iv)?,
        0.05,
        0.05,
        iv,
        20,
        2024,
    )?;
    let prior = Prior::uniform(&[iv])?;
    let lik = Likelihood::gaussian(z, 0.05)?;
    let cfg = CalibrationConfig {
        zeta0: 1e-3,
        budget: 20,
        ..CalibrationConfig::default()
    };
    let state = run_calibration(&model, &prior, &lik, &cfg)?;
    println!(
        "{} Burgers solves, converged: {}",
        model.evaluations(),
        state.converged
    );
    let pe = state.posterior(&prior, &lik);
    let quad = Quadrature::gauss_legendre(&[iv], 400, 1);
    let table = pe.tabulate(&quad)?;
    let mean = quad.integrate(|x| x[0] * (pe.ln_density(x) - table.ln_gamma).exp());
    println!("posterior mean of delta: {mean:.5}");
    println!(
        "shock location at the mean: {:.5} (exact steady solution)",
        burgers_tanh_crossing(0.1, mean)
    );
    Ok(())
}
