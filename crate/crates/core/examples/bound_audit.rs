//! Audit of the radius bound, the leak bounds and the privacy sandwich over seeded runs.

use volpriv::harness::run_bound_audit;
use volpriv::{ExperimentConfig, Mechanism};

fn main() -> volpriv::Result<()> {
    for mechanism in Mechanism::ALL {
        let cfg = ExperimentConfig {
            runs: 10,
            mechanism,
            eps_x: vec![0.01, 0.1, 0.5],
            ..Default::default()
        };
        let (_, summary) = run_bound_audit(&cfg)?;
        println!("== {mechanism}\n{summary}\n");
    }
    Ok(())
}
