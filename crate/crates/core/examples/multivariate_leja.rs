//! Two-dimensional weighted Leja nodes for a product normal prior.

use leja_bayes::nodes::{generate_sequence, LejaSettings};
use leja_bayes::statmodel::{Marginal, Prior};

fn main() -> leja_bayes::error::Result<()> {
    let prior = Prior::new(vec![
        Marginal::Normal {
            mean: 0.0,
            std: 1.0,
        },
        Marginal::Uniform { lo: 0.0, hi: 1.0 },
    ])?;
    let settings = LejaSettings {
        n_candidates: 5000,
        ..LejaSettings::default()
    };
    let seq = generate_sequence(&prior, 15, &settings)?;
    for (i, x) in seq.nodes.iter().enumerate() {
        println!("{:>3} {:+.5} {:+.5}", i + 1, x[0], x[1]);
    }
    Ok(())
}
