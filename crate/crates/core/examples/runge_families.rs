//! Weighted Leja, prior Leja and Clenshaw-Curtis nodes on the Runge model.

use leja_bayes::calibrate::{study_family, NodalFamily, Reference, StudyConfig};
use leja_bayes::domain::Interval;
use leja_bayes::nodes::LejaSettings;
use leja_bayes::statmodel::{Likelihood, Prior};
use leja_bayes::testmodels::{generate_data, runge_model};

fn main() -> leja_bayes::error::Result<()> {
    let prior = Prior::uniform(&[Interval::new(0.0, 1.0)])?;
    let z = generate_data(&runge_model(1), &[0.25], 0.1, 20, 1)?;
    let lik = Likelihood::gaussian(z, 0.1)?;
    let truth_model = runge_model(1);
    let truth = move |x: &[f64]| vec![truth_model.value(x)];
    let reference = Reference::new(&truth, &prior);
    for family in [
        NodalFamily::WeightedLeja,
        NodalFamily::Leja,
        NodalFamily::ClenshawCurtis,
    ] {
        let cfg = StudyConfig {
            family,
            zeta: 1e-3,
            n_max: 40,
            seed: 0,
            leja: LejaSettings::default(),
        };
        let study = study_family(&runge_model(1), &prior, &lik, &reference, &cfg)?;
        for n in [10, 20, 40] {
            let r = study.at(n).expect("n <= n_max");
            println!(
                "{:>16} N={n:>2} model error {:.2e} KL {:.2e}",
                family.name(),
                r.sup_model_error,
                r.kl
            );
        }
    }
    Ok(())
}
