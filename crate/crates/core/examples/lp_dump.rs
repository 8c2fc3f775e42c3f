//! Print the release LP solved at the first step, then solve it.

use volpriv::harness::lp_dump;
use volpriv::ExperimentConfig;

fn main() -> volpriv::Result<()> {
    let cfg = ExperimentConfig {
        eps_x: vec![0.5],
        ..Default::default()
    };
    print!("{}", lp_dump(&cfg)?);
    Ok(())
}
