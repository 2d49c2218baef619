//! Weighted Leja sequences for uniform, normal and beta priors.

use leja_bayes::nodes::{generate_sequence, LejaSettings};
use leja_bayes::statmodel::{Marginal, Prior};

fn main() -> leja_bayes::error::Result<()> {
    let priors = [
        ("uniform[-1,1]", Marginal::Uniform { lo: -1.0, hi: 1.0 }),
        (
            "normal(0,1)",
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
    for (name, m) in priors {
        let prior = Prior::new(vec![m])?;
        let seq = generate_sequence(&prior, 8, &LejaSettings::default())?;
        let pts: Vec<String> = seq.points_1d().iter().map(|x| format!("{x:+.4}")).collect();
        println!("{name:>14}: {}", pts.join(" "));
    }
    Ok(())
}
