//! Exact constrained-zonotope attack next to the interval attack on the same releases:
//! the CCG hull is never looser, at the price of geometric growth in size.

use nalgebra::DVector;
use volpriv::inference::{attack_step, attack_step_ccg, init_belief, init_ccg_belief};
use volpriv::system::simulate;
use volpriv::{case_study_preset, Ccg, InferenceModel, Interval, RngStream};

fn main() -> volpriv::Result<()> {
    let sys = case_study_preset();
    let model = InferenceModel::new(sys.clone())?;
    let traj = simulate(&sys, 4, &mut RngStream::new(3, 0))?;
    let half = DVector::from_element(2, 0.1);
    let cap = 4;

    let m0 = Interval::from_center_radius(&traj.xs[0], &half)?;
    let mut ib = init_belief(&model, &m0)?;
    let mut cb = init_ccg_belief(&model, &Ccg::from_interval(&m0))?;
    let mut rng = RngStream::new(3, 9);
    println!(" k  width(box)  width(ccg hull)  mc vol(ccg)   ng(Y)  nc(Y)");
    for k in 1..=cap {
        let m = Interval::from_center_radius(&traj.xs[k], &half)?;
        ib = attack_step(&ib, &model, &m)?.0;
        cb = attack_step_ccg(&cb, &model, &Ccg::from_interval(&m), cap)?;
        let hull = cb.y_post.interval_hull()?;
        let vol = if k <= 2 {
            format!("{:11.5}", cb.y_post.mc_volume(2000, &mut rng)?.estimate)
        } else {
            format!("{:>11}", "-")
        };
        let c = cb.counts.last().unwrap();
        println!(
            "{k:2}  {:10.5}  {:15.5}  {vol}  {:6} {:6}",
            ib.y_post.surrogate_volume(),
            hull.surrogate_volume(),
            c.y.0,
            c.y.1
        );
    }
    Ok(())
}
