//! The adversary's interval attack on the production-inventory example, with each
//! inventory observation released as a fixed box around the true value.

use nalgebra::DVector;
use volpriv::inference::measures;
use volpriv::system::simulate;
use volpriv::{case_study_preset, Adversary, InferenceModel, Interval, RngStream};

fn main() -> volpriv::Result<()> {
    let sys = case_study_preset();
    let model = InferenceModel::new(sys.clone())?;
    let traj = simulate(&sys, 20, &mut RngStream::new(7, 0))?;
    let half = DVector::from_element(2, 0.05);

    let mut adv = Adversary::start(&model, &Interval::from_center_radius(&traj.xs[0], &half)?)?;
    println!(" k   vol(Y|k)  width(Y|k)      leak   truth in Y");
    for k in 1..=traj.horizon() {
        let m = Interval::from_center_radius(&traj.xs[k], &half)?;
        let rep = adv.observe(&model, &m)?;
        let ms = measures(&adv.belief);
        println!(
            "{k:2}  {:9.5}  {:10.5}  {:8.5}   {}",
            ms.privacy_vol,
            ms.privacy_surrogate,
            rep.leak_surrogate,
            adv.belief.y_post.contains(&traj.ys[k])?
        );
        assert!(rep.all_hold());
    }
    println!(
        "final private set: {:?} .. {:?}",
        adv.belief.y_post.lower().as_slice(),
        adv.belief.y_post.upper().as_slice()
    );
    Ok(())
}
