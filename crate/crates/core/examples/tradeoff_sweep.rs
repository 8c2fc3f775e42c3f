//! Privacy-utility sweep of all three mechanisms; prints the table as CSV.

use volpriv::harness::run_tradeoff;
use volpriv::ExperimentConfig;

fn main() -> volpriv::Result<()> {
    let cfg = ExperimentConfig {
        horizon: 40,
        runs: 10,
        eps_x: vec![0.01, 0.1, 0.25, 0.5],
        ..Default::default()
    };
    print!("{}", run_tradeoff(&cfg)?.to_csv()?);
    Ok(())
}
