//! The two baseline releases at the same budget: a static grid quantizer and a box
//! around the state plus truncated Gaussian noise.

use volpriv::filter::{quantizer_release, truncated_gaussian_release, QuantizerGrid, COVER_STEPS};
use volpriv::system::simulate;
use volpriv::{case_study_preset, InferenceModel, RngStream};

fn main() -> volpriv::Result<()> {
    let sys = case_study_preset();
    let model = InferenceModel::new(sys.clone())?;
    let traj = simulate(&sys, 8, &mut RngStream::new(5, 0))?;
    let eps_x = 0.2;
    let grid = QuantizerGrid::new(&model, eps_x, COVER_STEPS)?;
    let mut rng = RngStream::new(5, 1);

    println!(
        "quantizer bin width {} over cover {:?} .. {:?}",
        grid.width,
        grid.cover.lower().as_slice(),
        grid.cover.upper().as_slice()
    );
    for (k, x) in traj.xs.iter().enumerate() {
        let q = quantizer_release(x, &grid)?;
        let g = truncated_gaussian_release(x, eps_x, &mut rng)?;
        println!(
            "k={k} x={:.4?}  bin={:.4?}..{:.4?}  gauss={:.4?}..{:.4?} (contains x: {})",
            x.as_slice(),
            q.lower().as_slice(),
            q.upper().as_slice(),
            g.lower().as_slice(),
            g.upper().as_slice(),
            g.contains(x)?
        );
    }
    Ok(())
}
