//! The optimal privacy filter: each step draws a random seed box around the true
//! inventory and solves a linear program for the released box that leaks least.

use volpriv::filter::FilterState;
use volpriv::system::simulate;
use volpriv::{case_study_preset, Adversary, InferenceModel, RngStream};

fn main() -> volpriv::Result<()> {
    let sys = case_study_preset();
    let model = InferenceModel::new(sys.clone())?;
    let traj = simulate(&sys, 15, &mut RngStream::new(11, 0))?;
    let eps_x = 0.25;

    let mut filter = FilterState::new(eps_x, RngStream::new(11, 1))?;
    let r0 = filter.filter_step_k0(&model, &traj.xs[0])?;
    let mut adv = Adversary::start(&model, &r0.m_star)?;
    println!(" k  width(m*)  width(seed)  lp leak bound  realized leak  width(Y|k)");
    for k in 1..=traj.horizon() {
        let (rec, _) = filter.filter_step(&model, &traj.xs[k])?;
        let rep = adv.observe(&model, &rec.m_star)?;
        println!(
            "{k:2}  {:9.5}  {:11.5}  {:13.6}  {:13.6}  {:10.5}",
            rec.m_star.surrogate_volume(),
            rec.s_seed.surrogate_volume(),
            rec.eps_y_star.unwrap(),
            rep.leak_surrogate,
            adv.belief.y_post.surrogate_volume()
        );
    }
    Ok(())
}
