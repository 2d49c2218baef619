//! Weighted Lebesgue constants of Leja sequences stay below N.

use leja_bayes::diagnostics::lebesgue_constant_1d;
use leja_bayes::nodes::{generate_sequence, LejaSettings};
use leja_bayes::statmodel::{Marginal, Prior};

fn main() -> leja_bayes::error::Result<()> {
    let priors = [
        ("uniform", Marginal::Uniform { lo: 0.0, hi: 1.0 }),
        (
            "normal",
            Marginal::Normal {
                mean: 0.0,
                std: 1.0,
            },
        ),
        (
            "beta(2,5)",
            Marginal::Beta {
                alpha: 2.0,
                beta: 5.0,
                lo: 0.0,
                hi: 1.0,
            },
        ),
    ];
    println!("{:>10} {:>4} {:>10}", "weight", "N", "Lambda_N");
    for (name, m) in priors {
        let prior = Prior::new(vec![m])?;
        let x = generate_sequence(&prior, 101, &LejaSettings::default())?.points_1d();
        for n in [5usize, 10, 25, 50, 100] {
            let est = lebesgue_constant_1d(&x[..=n], &prior, 32);
            println!("{name:>10} {n:>4} {:>10.4}", est.value);
        }
    }
    Ok(())
}
