//! Effect of the tempering parameter zeta on where nodes are placed for a
//! bimodal sinc posterior; the adaptive schedule is shown last.

use leja_bayes::calibrate::{run_calibration, CalibrationConfig};
use leja_bayes::domain::Interval;
use leja_bayes::statmodel::{Likelihood, Prior};
use leja_bayes::testmodels::sinc_model;

fn main() -> leja_bayes::error::Result<()> {
    let prior = Prior::uniform(&[Interval::new(-2.0, 2.0)])?;
    let lik = Likelihood::gaussian(vec![0.5], 0.05)?;
    for (zeta, schedule) in [
        (1e-4, false),
        (1e-2, false),
        (1.0, false),
        (1e2, false),
        (1e-3, true),
    ] {
        let cfg = CalibrationConfig {
            zeta0: zeta,
            schedule,
            budget: 15,
            exhaust_budget: true,
            ..CalibrationConfig::default()
        };
        let state = run_calibration(&sinc_model(), &prior, &lik, &cfg)?;
        let mut x: Vec<f64> = state.nodes().iter().map(|v| v[0]).collect();
        x.sort_by(f64::total_cmp);
        let pts: Vec<String> = x.iter().map(|t| format!("{t:+.2}")).collect();
        let tag = if schedule { " (schedule)" } else { "" };
        println!("zeta {zeta:>7.0e}{tag}: {}", pts.join(" "));
    }
    Ok(())
}
