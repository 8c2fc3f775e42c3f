//! The adversary's set-membership inference attack.
//!
//! Each step takes the released observation box `m` of the public state and runs:
//! backward calibration of the previous public/private sets, intersection with the
//! previous posteriors, forward re-prediction, and the private posterior. The interval
//! backend is the tightest box recursion; the CCG backend carries exact constrained
//! zonotopes, capped in horizon because their size grows geometrically.
//!
//! Alongside the recursion this module measures privacy (volume / total width of the
//! private set), the per-step uncertainty reduction ("leak") by two independent routes,
//! and executable checks of the radius bound, the leak bounds and the privacy sandwich.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::ccg::Ccg;
use crate::csvfmt::sig9;
use crate::error::{Error, Result};
use crate::interval::{Interval, PsiMatrix, SignedBounds};
use crate::system::LinearSystem;

/// Slack for every audited inequality.
pub const AUDIT_TOL: f64 = 1e-9;

/// Boxes whose bounds cross by at most this much are treated as touching rather than
/// disjoint, so rounding cannot turn a true state on two faces into an inconsistency.
pub const TOUCH_TOL: f64 = 1e-9;

fn meet(a: &Interval, b: &Interval, k: usize, stage: &'static str) -> Result<Interval> {
    a.intersect_touching(b, TOUCH_TOL)?
        .ok_or(Error::InconsistentObservation { k, stage })
}

/// Matrix 1-norm as the sum of absolute entries.
pub fn entry_norm1(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v.abs()).sum()
}

/// A validated system with every matrix the recursion needs precomputed.
#[derive(Clone, Debug)]
pub struct InferenceModel {
    sys: LinearSystem,
    a1: PsiMatrix,
    a2: PsiMatrix,
    a3: PsiMatrix,
    a4: PsiMatrix,
    b1: PsiMatrix,
    b2: PsiMatrix,
    back_x_m: PsiMatrix,
    back_x_y: PsiMatrix,
    back_x_w: PsiMatrix,
    back_y_m: PsiMatrix,
    back_y_x: PsiMatrix,
    back_y_w: PsiMatrix,
    radius_gain_m: DMatrix<f64>,
    radius_gain_wx: DMatrix<f64>,
    radius_gain_wy: DMatrix<f64>,
}

impl InferenceModel {
    pub fn new(sys: LinearSystem) -> Result<Self> {
        sys.validate()?;
        let inv = |m: &DMatrix<f64>, name: &str| {
            m.clone()
                .try_inverse()
                .ok_or_else(|| Error::InvalidSystem(vec![format!("{name}: not invertible")]))
        };
        let a1_inv = inv(&sys.a1, "a1")?;
        let a2_inv = inv(&sys.a2, "a2")?;
        let abs = |m: &DMatrix<f64>| m.abs();
        let a4_abs = abs(&sys.a4);
        let radius_gain_m = abs(&sys.a3) + &a4_abs * abs(&a2_inv) + &a4_abs * abs(&(&a2_inv * &sys.a1));
        let radius_gain_wx = &a4_abs * abs(&(&a2_inv * &sys.b1));
        let radius_gain_wy = abs(&sys.b2);
        Ok(InferenceModel {
            a1: PsiMatrix::new(sys.a1.clone()),
            a2: PsiMatrix::new(sys.a2.clone()),
            a3: PsiMatrix::new(sys.a3.clone()),
            a4: PsiMatrix::new(sys.a4.clone()),
            b1: PsiMatrix::new(sys.b1.clone()),
            b2: PsiMatrix::new(sys.b2.clone()),
            back_x_y: PsiMatrix::new(-&a1_inv * &sys.a2),
            back_x_w: PsiMatrix::new(-&a1_inv * &sys.b1),
            back_x_m: PsiMatrix::new(a1_inv),
            back_y_x: PsiMatrix::new(-&a2_inv * &sys.a1),
            back_y_w: PsiMatrix::new(-&a2_inv * &sys.b1),
            back_y_m: PsiMatrix::new(a2_inv),
            radius_gain_m,
            radius_gain_wx,
            radius_gain_wy,
            sys,
        })
    }

    pub fn system(&self) -> &LinearSystem {
        &self.sys
    }

    pub fn nx(&self) -> usize {
        self.sys.nx()
    }

    /// `A1^-1` and `A2^-1`: the maps from the observation into the backward sets.
    pub fn backward_observation_maps(&self) -> (&PsiMatrix, &PsiMatrix) {
        (&self.back_x_m, &self.back_y_m)
    }

    /// Parts of the backward sets that do not depend on the observation:
    /// `Psi(-A1^-1 A2) Y_prev + Psi(-A1^-1 B1) Wx` and `Psi(-A2^-1 A1) X_prev + Psi(-A2^-1 B1) Wx`.
    pub fn backward_offsets(&self, x_prev: &Interval, y_prev: &Interval) -> Result<(Interval, Interval)> {
        let wx = &self.sys.wx_bounds;
        let ox = self
            .back_x_y
            .apply(y_prev)?
            .minkowski_sum(&self.back_x_w.apply(wx)?)?;
        let oy = self
            .back_y_x
            .apply(x_prev)?
            .minkowski_sum(&self.back_y_w.apply(wx)?)?;
        Ok((ox, oy))
    }

    /// Backward sets of the previous public and private states given observation `m`.
    pub fn backward_sets(
        &self,
        m: &Interval,
        x_prev: &Interval,
        y_prev: &Interval,
    ) -> Result<(Interval, Interval)> {
        let (ox, oy) = self.backward_offsets(x_prev, y_prev)?;
        Ok((
            self.back_x_m.apply(m)?.minkowski_sum(&ox)?,
            self.back_y_m.apply(m)?.minkowski_sum(&oy)?,
        ))
    }

    fn forward_x(&self, x: &Interval, y: &Interval) -> Result<Interval> {
        self.a1
            .apply(x)?
            .minkowski_sum(&self.a2.apply(y)?)?
            .minkowski_sum(&self.b1.apply(&self.sys.wx_bounds)?)
    }

    fn forward_y(&self, x: &Interval, y: &Interval) -> Result<Interval> {
        self.a3
            .apply(x)?
            .minkowski_sum(&self.a4.apply(y)?)?
            .minkowski_sum(&self.b2.apply(&self.sys.wy_bounds)?)
    }

    /// `Psi(A3)`, `Psi(A4)`: how removed slabs of the previous states shrink the private set.
    pub fn leak_maps(&self) -> (&PsiMatrix, &PsiMatrix) {
        (&self.a3, &self.a4)
    }
}

/// The adversary's sets after step `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdversaryBelief {
    pub k: usize,
    pub x_post: Interval,
    pub y_post: Interval,
    pub x_pred: Interval,
    pub y_pred: Interval,
    /// Center of `y_pred`.
    pub y_center_prev: DVector<f64>,
}

/// First belief: the private set is the prior; the public set is the prior cut by `m0`.
pub fn init_belief(model: &InferenceModel, m0: &Interval) -> Result<AdversaryBelief> {
    let sys = model.system();
    let x_post = meet(m0, &sys.x0_bounds, 0, "initial public-state intersection")?;
    Ok(AdversaryBelief {
        k: 0,
        x_post,
        y_post: sys.y0_bounds.clone(),
        x_pred: sys.x0_bounds.clone(),
        y_pred: sys.y0_bounds.clone(),
        y_center_prev: sys.y0_bounds.center(),
    })
}

/// One-step-ahead prediction of both states from the current posteriors.
pub fn predict(belief: &AdversaryBelief, model: &InferenceModel) -> Result<(Interval, Interval)> {
    Ok((
        model.forward_x(&belief.x_post, &belief.y_post)?,
        model.forward_y(&belief.x_post, &belief.y_post)?,
    ))
}

/// Named inequality outcome. `residual` is `lhs - rhs` of the `lhs <= rhs` form, so
/// positive values are violations.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCheck {
    pub name: &'static str,
    pub holds: bool,
    pub residual: f64,
}

impl BoundCheck {
    fn le(name: &'static str, lhs: f64, rhs: f64) -> Self {
        let residual = lhs - rhs;
        BoundCheck {
            name,
            holds: residual <= AUDIT_TOL,
            residual,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measures {
    pub privacy_vol: f64,
    pub privacy_surrogate: f64,
    /// `1 / volume(x_post)`; infinite for a degenerate public set.
    pub utility: f64,
}

pub fn measures(belief: &AdversaryBelief) -> Measures {
    let xv = belief.x_post.volume();
    Measures {
        privacy_vol: belief.y_post.volume(),
        privacy_surrogate: belief.y_post.surrogate_volume(),
        utility: if xv > 0.0 { 1.0 / xv } else { f64::INFINITY },
    }
}

/// Leak evaluated by subtraction and by the norm of the mapped removed slabs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reduction {
    pub by_difference: f64,
    pub by_norm: f64,
}

/// `dx`, `dy` are the clamped removed slabs of the previous public and private sets.
pub fn uncertainty_reduction(
    model: &InferenceModel,
    y_pred: &Interval,
    y_post: &Interval,
    dx: &SignedBounds,
    dy: &SignedBounds,
) -> Result<Reduction> {
    if !y_post.is_subset_of(y_pred, AUDIT_TOL) {
        return Err(Error::Invariant(
            "private posterior is not contained in its prediction".into(),
        ));
    }
    let (a3, a4) = model.leak_maps();
    let (px, py) = (a3.apply_signed(dx)?, a4.apply_signed(dy)?);
    let stacked = SignedBounds {
        lower: &px.lower + &py.lower,
        upper: &px.upper + &py.upper,
    };
    Ok(Reduction {
        by_difference: y_pred.surrogate_volume() - y_post.surrogate_volume(),
        by_norm: stacked.stacked_norm1(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub k: usize,
    pub privacy_vol: f64,
    pub privacy_surrogate: f64,
    pub utility: f64,
    pub leak_surrogate: f64,
    /// The same leak through the second evaluation route.
    pub leak_norm: f64,
    /// `||c(y_post) - c(y_pred)||_1`.
    pub center_shift: f64,
    pub y_pred_surrogate: f64,
    pub delta_x: SignedBounds,
    pub delta_y: SignedBounds,
    pub checks: Vec<BoundCheck>,
}

impl StepReport {
    pub fn check(&self, name: &str) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

/// Upper term of the leak bound: `||A3||_1 Vol(dX) + ||A4||_1 Vol(dY)` in total widths.
pub fn leak_upper_bound(model: &InferenceModel, dx: &SignedBounds, dy: &SignedBounds) -> f64 {
    let sys = model.system();
    entry_norm1(&sys.a3) * dx.total_width() + entry_norm1(&sys.a4) * dy.total_width()
}

/// `2 ||dc||_1 <= leak <= upper`.
pub fn check_reduction_bounds(model: &InferenceModel, step: &StepReport) -> [BoundCheck; 2] {
    [
        BoundCheck::le("leak_lower", 2.0 * step.center_shift, step.leak_surrogate),
        BoundCheck::le(
            "leak_upper",
            step.leak_surrogate,
            leak_upper_bound(model, &step.delta_x, &step.delta_y),
        ),
    ]
}

/// `Vol(y_pred) - upper <= Vol(y_post) <= Vol(y_pred) - 2 ||dc||_1` in surrogate volume.
pub fn check_privacy_sandwich(model: &InferenceModel, step: &StepReport) -> [BoundCheck; 2] {
    let upper = leak_upper_bound(model, &step.delta_x, &step.delta_y);
    [
        BoundCheck::le(
            "privacy_lower",
            step.y_pred_surrogate - upper,
            step.privacy_surrogate,
        ),
        BoundCheck::le(
            "privacy_upper",
            step.privacy_surrogate,
            step.y_pred_surrogate - 2.0 * step.center_shift,
        ),
    ]
}

/// Radius of the private posterior against the bound driven by `p_bar`, the running
/// elementwise maximum of observation radii.
pub fn check_radius_bound(
    model: &InferenceModel,
    belief: &AdversaryBelief,
    p_bar: &DVector<f64>,
) -> Result<BoundCheck> {
    crate::error::check_dim("check_radius_bound", model.nx(), p_bar.len())?;
    let sys = model.system();
    let rhs = &model.radius_gain_m * p_bar
        + &model.radius_gain_wx * sys.wx_bounds.radius()
        + &model.radius_gain_wy * sys.wy_bounds.radius();
    let worst = (belief.y_post.radius() - rhs).max();
    Ok(BoundCheck::le("radius", worst, 0.0))
}

/// One step of the interval attack given the released box `m` for `x_k`.
pub fn attack_step(
    belief: &AdversaryBelief,
    model: &InferenceModel,
    m: &Interval,
) -> Result<(AdversaryBelief, StepReport)> {
    let k = belief.k + 1;
    let (x_prev, y_prev) = (&belief.x_post, &belief.y_post);
    let (x_pred, y_pred) = predict(belief, model)?;

    let (mx_back, my_back) = model.backward_sets(m, x_prev, y_prev)?;
    let x_back = meet(&mx_back, x_prev, k, "backward public-state calibration")?;
    let y_back = meet(&my_back, y_prev, k, "backward private-state calibration")?;
    let mx_fwd = model.forward_x(&x_back, &y_back)?;
    let x_post = meet(m, &mx_fwd, k, "forward public-state inference")?;
    let y_post = model.forward_y(&x_back, &y_back)?;

    let delta_x = x_prev.difference(&mx_back)?.clamped();
    let delta_y = y_prev.difference(&my_back)?.clamped();
    let reduction = uncertainty_reduction(model, &y_pred, &y_post, &delta_x, &delta_y)?;

    let next = AdversaryBelief {
        k,
        y_center_prev: y_pred.center(),
        x_post,
        y_post,
        x_pred,
        y_pred,
    };
    let ms = measures(&next);
    let mut report = StepReport {
        k,
        privacy_vol: ms.privacy_vol,
        privacy_surrogate: ms.privacy_surrogate,
        utility: ms.utility,
        leak_surrogate: reduction.by_difference,
        leak_norm: reduction.by_norm,
        center_shift: (next.y_post.center() - &next.y_center_prev).lp_norm(1),
        y_pred_surrogate: next.y_pred.surrogate_volume(),
        delta_x,
        delta_y,
        checks: Vec::new(),
    };
    let routes = (reduction.by_difference - reduction.by_norm).abs();
    report.checks.push(BoundCheck::le("leak_routes", routes, 0.0));
    report
        .checks
        .push(BoundCheck::le("leak_nonnegative", -report.leak_surrogate, 0.0));
    report.checks.extend(check_reduction_bounds(model, &report));
    report.checks.extend(check_privacy_sandwich(model, &report));
    Ok((next, report))
}

/// Interval adversary with the running observation-radius maximum needed by the radius
/// check.
#[derive(Clone, Debug)]
pub struct Adversary {
    pub belief: AdversaryBelief,
    pub p_bar: DVector<f64>,
    pub discarded: usize,
}

impl Adversary {
    pub fn start(model: &InferenceModel, m0: &Interval) -> Result<Self> {
        Ok(Adversary {
            belief: init_belief(model, m0)?,
            p_bar: m0.radius(),
            discarded: 0,
        })
    }

    /// Consume `m`; the report carries every bound check including the radius bound.
    pub fn observe(&mut self, model: &InferenceModel, m: &Interval) -> Result<StepReport> {
        let (next, mut report) = attack_step(&self.belief, model, m)?;
        self.p_bar = self.p_bar.zip_map(&m.radius(), f64::max);
        report.checks.push(check_radius_bound(model, &next, &self.p_bar)?);
        self.belief = next;
        Ok(report)
    }

    /// Ignore an observation the model cannot explain: the step runs with the predicted
    /// public set as observation, which carries no information and is always consistent.
    pub fn discard(&mut self, model: &InferenceModel) -> Result<StepReport> {
        let (x_pred, _) = predict(&self.belief, model)?;
        self.discarded += 1;
        self.observe(model, &x_pred)
    }
}

/// Generator/constraint counts of one CCG belief.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CcgCounts {
    pub k: usize,
    pub x: (usize, usize),
    pub y: (usize, usize),
}

#[derive(Clone, Debug)]
pub struct CcgBelief {
    pub k: usize,
    pub x_post: Ccg,
    pub y_post: Ccg,
    pub x_pred: Ccg,
    pub y_pred: Ccg,
    pub counts: Vec<CcgCounts>,
}

impl CcgBelief {
    fn record(&mut self) {
        self.counts.push(CcgCounts {
            k: self.k,
            x: (self.x_post.ng(), self.x_post.nc()),
            y: (self.y_post.ng(), self.y_post.nc()),
        });
    }
}

/// Default limit on CCG recursion length. Sets grow about fourfold per step: on the
/// preset, k = 5 takes well under a second per stream, k = 7 about a minute.
pub const DEFAULT_CCG_CAP: usize = 5;

pub fn init_ccg_belief(model: &InferenceModel, m0: &Ccg) -> Result<CcgBelief> {
    let sys = model.system();
    let x0 = Ccg::from_interval(&sys.x0_bounds);
    let y0 = Ccg::from_interval(&sys.y0_bounds);
    let x_post = m0.intersect(&x0)?;
    if x_post.is_empty()? {
        return Err(Error::InconsistentObservation {
            k: 0,
            stage: "initial public-state intersection",
        });
    }
    let mut b = CcgBelief {
        k: 0,
        x_post,
        y_post: y0.clone(),
        x_pred: x0,
        y_pred: y0,
        counts: Vec::new(),
    };
    b.record();
    Ok(b)
}

fn ccg_forward(
    a: &DMatrix<f64>,
    x: &Ccg,
    b: &DMatrix<f64>,
    y: &Ccg,
    c: &DMatrix<f64>,
    w: &Ccg,
) -> Result<Ccg> {
    x.linear_map(a)?
        .minkowski_sum(&y.linear_map(b)?)?
        .minkowski_sum(&w.linear_map(c)?)
}

pub fn predict_ccg(belief: &CcgBelief, model: &InferenceModel) -> Result<(Ccg, Ccg)> {
    let sys = model.system();
    let wx = Ccg::from_interval(&sys.wx_bounds);
    let wy = Ccg::from_interval(&sys.wy_bounds);
    Ok((
        ccg_forward(&sys.a1, &belief.x_post, &sys.a2, &belief.y_post, &sys.b1, &wx)?,
        ccg_forward(&sys.a3, &belief.x_post, &sys.a4, &belief.y_post, &sys.b2, &wy)?,
    ))
}

fn check_cap(belief: &CcgBelief, cap: usize) -> Result<usize> {
    let k = belief.k + 1;
    if k > cap {
        return Err(Error::HorizonCapExceeded { cap });
    }
    Ok(k)
}

/// Exact CCG counterpart of [`attack_step`]. Emptiness of the new public set (which is
/// empty whenever any intermediate set is) is checked with one LP.
pub fn attack_step_ccg(belief: &CcgBelief, model: &InferenceModel, m: &Ccg, cap: usize) -> Result<CcgBelief> {
    let k = check_cap(belief, cap)?;
    let sys = model.system();
    let wx = Ccg::from_interval(&sys.wx_bounds);
    let wy = Ccg::from_interval(&sys.wy_bounds);
    let (x_prev, y_prev) = (&belief.x_post, &belief.y_post);
    let (x_pred, y_pred) = predict_ccg(belief, model)?;

    let mx_back = ccg_forward(
        model.back_x_m.base(),
        m,
        model.back_x_y.base(),
        y_prev,
        model.back_x_w.base(),
        &wx,
    )?;
    let x_back = x_prev.intersect(&mx_back)?;
    let my_back = ccg_forward(
        model.back_y_m.base(),
        m,
        model.back_y_x.base(),
        x_prev,
        model.back_y_w.base(),
        &wx,
    )?;
    let y_back = y_prev.intersect(&my_back)?;
    let y_post = ccg_forward(&sys.a3, &x_back, &sys.a4, &y_back, &sys.b2, &wy)?;
    let mx_fwd = ccg_forward(&sys.a1, &x_back, &sys.a2, &y_back, &sys.b1, &wx)?;
    let x_post = m.intersect(&mx_fwd)?;
    if x_post.is_empty()? {
        return Err(Error::InconsistentObservation {
            k,
            stage: "CCG forward public-state inference",
        });
    }
    let mut next = CcgBelief {
        k,
        x_post,
        y_post,
        x_pred,
        y_pred,
        counts: belief.counts.clone(),
    };
    next.record();
    Ok(next)
}

/// Step without an observation: the posteriors become the predictions.
pub fn discard_step_ccg(belief: &CcgBelief, model: &InferenceModel, cap: usize) -> Result<CcgBelief> {
    let k = check_cap(belief, cap)?;
    let (x_pred, y_pred) = predict_ccg(belief, model)?;
    let mut next = CcgBelief {
        k,
        x_post: x_pred.clone(),
        y_post: y_pred.clone(),
        x_pred,
        y_pred,
        counts: belief.counts.clone(),
    };
    next.record();
    Ok(next)
}

/// Step-by-step audit log: box bounds, measures and every check residual.
pub fn write_audit_log<W: Write>(out: W, entries: &[(AdversaryBelief, StepReport)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some((first_b, first_r)) = entries.first() else {
        w.flush()?;
        return Ok(());
    };
    let mut header = vec!["k".to_string()];
    for set in ["x_post", "y_post", "x_pred", "y_pred"] {
        let n = if set.starts_with('x') {
            first_b.x_post.dim()
        } else {
            first_b.y_post.dim()
        };
        for side in ["lo", "hi"] {
            for i in 0..n {
                header.push(format!("{set}_{side}_{i}"));
            }
        }
    }
    for col in [
        "privacy_vol",
        "privacy_surrogate",
        "utility",
        "leak",
        "leak_norm",
        "center_shift",
    ] {
        header.push(col.into());
    }
    for c in &first_r.checks {
        header.push(format!("{}_residual", c.name));
    }
    w.write_record(&header)?;

    for (b, r) in entries {
        let mut row = vec![b.k.to_string()];
        for iv in [&b.x_post, &b.y_post, &b.x_pred, &b.y_pred] {
            row.extend(iv.lower().iter().map(|v| sig9(*v)));
            row.extend(iv.upper().iter().map(|v| sig9(*v)));
        }
        for v in [
            r.privacy_vol,
            r.privacy_surrogate,
            r.utility,
            r.leak_surrogate,
            r.leak_norm,
            r.center_shift,
        ] {
            row.push(sig9(v));
        }
        row.extend(r.checks.iter().map(|c| sig9(c.residual)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{case_study_preset, simulate, RngStream};
    use nalgebra::dvector;
    use proptest::prelude::*;
    use rand::Rng;

    fn model() -> InferenceModel {
        InferenceModel::new(case_study_preset()).unwrap()
    }

    /// Box image by explicit per-entry min/max, independent of `PsiMatrix`.
    fn image(a: &DMatrix<f64>, iv: &Interval) -> Interval {
        let mut lo = DVector::zeros(a.nrows());
        let mut hi = DVector::zeros(a.nrows());
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let p = a[(i, j)] * iv.lower()[j];
                let q = a[(i, j)] * iv.upper()[j];
                lo[i] += p.min(q);
                hi[i] += p.max(q);
            }
        }
        Interval::new(lo, hi).unwrap()
    }

    fn plus(a: &Interval, b: &Interval) -> Interval {
        Interval::new(a.lower() + b.lower(), a.upper() + b.upper()).unwrap()
    }

    fn meet(a: &Interval, b: &Interval) -> Interval {
        Interval::new(a.lower().sup(b.lower()), a.upper().inf(b.upper())).unwrap()
    }

    /// Straight-line evaluation of one attack step: returns `(x_post, y_post)`.
    fn oracle_step(sys: &LinearSystem, x: &Interval, y: &Interval, m: &Interval) -> (Interval, Interval) {
        let a1i = sys.a1.clone().try_inverse().unwrap();
        let a2i = sys.a2.clone().try_inverse().unwrap();
        let wx = &sys.wx_bounds;
        let mx = plus(
            &plus(&image(&a1i, m), &image(&(-&a1i * &sys.a2), y)),
            &image(&(-&a1i * &sys.b1), wx),
        );
        let my = plus(
            &plus(&image(&a2i, m), &image(&(-&a2i * &sys.a1), x)),
            &image(&(-&a2i * &sys.b1), wx),
        );
        let xb = meet(&mx, x);
        let yb = meet(&my, y);
        let fx = plus(
            &plus(&image(&sys.a1, &xb), &image(&sys.a2, &yb)),
            &image(&sys.b1, wx),
        );
        let yp = plus(
            &plus(&image(&sys.a3, &xb), &image(&sys.a4, &yb)),
            &image(&sys.b2, &sys.wy_bounds),
        );
        (meet(m, &fx), yp)
    }

    fn close(a: &Interval, b: &Interval, tol: f64) -> bool {
        (a.lower() - b.lower()).amax() <= tol && (a.upper() - b.upper()).amax() <= tol
    }

    fn first_step(
        eps: f64,
        seed: u64,
    ) -> (
        InferenceModel,
        AdversaryBelief,
        Interval,
        crate::system::Trajectory,
    ) {
        let model = model();
        let sys = model.system().clone();
        let traj = simulate(&sys, 5, &mut RngStream::new(seed, 0)).unwrap();
        let b0 = init_belief(&model, &sys.x0_bounds).unwrap();
        let r = DVector::from_element(2, eps / 4.0);
        let m = Interval::from_center_radius(&traj.xs[1], &r).unwrap();
        (model, b0, m, traj)
    }

    #[test]
    fn init_belief_examples() {
        let model = model();
        let sys = model.system();
        let b = init_belief(&model, &sys.x0_bounds).unwrap();
        assert_eq!(b.x_post, sys.x0_bounds);
        assert_eq!(b.y_post, sys.y0_bounds);
        let inner = Interval::from_slices(&[1.05, 0.3], &[1.1, 0.35]).unwrap();
        let b = init_belief(&model, &inner).unwrap();
        assert_eq!(b.x_post, inner);
        assert_eq!(b.y_post, sys.y0_bounds);
        let outside = Interval::from_slices(&[5.0, 5.0], &[6.0, 6.0]).unwrap();
        assert!(matches!(
            init_belief(&model, &outside),
            Err(Error::InconsistentObservation { k: 0, .. })
        ));
    }

    #[test]
    fn predict_matches_vertex_enumeration() {
        let model = model();
        let sys = model.system();
        let b = init_belief(&model, &sys.x0_bounds).unwrap();
        let (_, y_pred) = predict(&b, &model).unwrap();
        let corners = |iv: &Interval| -> Vec<DVector<f64>> {
            (0..4)
                .map(|mask| {
                    DVector::from_fn(2, |i, _| {
                        if mask >> i & 1 == 1 {
                            iv.upper()[i]
                        } else {
                            iv.lower()[i]
                        }
                    })
                })
                .collect()
        };
        let mut lo = DVector::from_element(2, f64::INFINITY);
        let mut hi = DVector::from_element(2, f64::NEG_INFINITY);
        for x in corners(&sys.x0_bounds) {
            for y in corners(&sys.y0_bounds) {
                for w in corners(&sys.wy_bounds) {
                    let v = &sys.a3 * &x + &sys.a4 * &y + &sys.b2 * &w;
                    lo = lo.inf(&v);
                    hi = hi.sup(&v);
                }
            }
        }
        assert!(close(&y_pred, &Interval::new(lo, hi).unwrap(), 1e-9));
    }

    #[test]
    fn predict_of_points_is_exact() {
        let mut sys = case_study_preset();
        sys.wx_bounds = Interval::point(dvector![1.8, 1.95]);
        sys.wy_bounds = Interval::point(dvector![0.93, 0.3]);
        let model = InferenceModel::new(sys.clone()).unwrap();
        let (x, y) = (dvector![1.1, 0.3], dvector![3.0, 1.0]);
        let b = AdversaryBelief {
            k: 0,
            x_post: Interval::point(x.clone()),
            y_post: Interval::point(y.clone()),
            x_pred: sys.x0_bounds.clone(),
            y_pred: sys.y0_bounds.clone(),
            y_center_prev: sys.y0_bounds.center(),
        };
        let (xp, yp) = predict(&b, &model).unwrap();
        let (xe, ye) = crate::system::step_state(&sys, &x, &y, sys.wx_bounds.lower(), sys.wy_bounds.lower());
        assert!((xp.lower() - &xe).amax() < 1e-12 && xp.widths().amax() < 1e-12);
        assert!((yp.lower() - &ye).amax() < 1e-12 && yp.widths().amax() < 1e-12);
    }

    #[test]
    fn uninformative_observation_leaks_nothing() {
        let model = model();
        let sys = model.system();
        let b = init_belief(&model, &sys.x0_bounds).unwrap();
        let (x_pred, y_pred) = predict(&b, &model).unwrap();
        let (next, rep) = attack_step(&b, &model, &x_pred).unwrap();
        assert!(rep.leak_surrogate.abs() < 1e-12, "{}", rep.leak_surrogate);
        assert!(rep.delta_x.total_width().abs() < 1e-12);
        assert!(close(&next.y_post, &y_pred, 1e-12));
        assert!(rep.all_hold(), "{:?}", rep.checks);
    }

    #[test]
    fn attack_step_matches_straight_line_oracle() {
        let (model, b0, m, traj) = first_step(0.5, 4);
        let sys = model.system();
        let (b1, _) = attack_step(&b0, &model, &m).unwrap();
        let (ox, oy) = oracle_step(sys, &b0.x_post, &b0.y_post, &m);
        assert!(close(&b1.x_post, &ox, 1e-9) && close(&b1.y_post, &oy, 1e-9));
        assert!(b1.y_post.contains(&traj.ys[1]).unwrap());
        assert!(b1.x_post.contains(&traj.xs[1]).unwrap());
    }

    #[test]
    fn random_steps_match_oracle() {
        let model = model();
        let sys = model.system();
        let mut rng = RngStream::new(77, 0);
        for _ in 0..20 {
            let traj = simulate(sys, 3, &mut rng).unwrap();
            let mut adv = Adversary::start(&model, &sys.x0_bounds).unwrap();
            for k in 1..=3 {
                let r = DVector::from_fn(2, |_, _| rng.random_range(0.0..0.3));
                let c = &traj.xs[k] + DVector::from_fn(2, |i, _| rng.random_range(-r[i]..=r[i]));
                let m = Interval::from_center_radius(&c, &r).unwrap();
                let (ox, oy) = oracle_step(sys, &adv.belief.x_post, &adv.belief.y_post, &m);
                adv.observe(&model, &m).unwrap();
                assert!(close(&adv.belief.x_post, &ox, 1e-9));
                assert!(close(&adv.belief.y_post, &oy, 1e-9));
            }
        }
    }

    #[test]
    fn leak_routes_agree_and_bounds_hold_on_runs() {
        let model = model();
        let sys = model.system();
        for seed in 0..20 {
            let traj = simulate(sys, 60, &mut RngStream::new(seed, 0)).unwrap();
            let mut adv = Adversary::start(&model, &sys.x0_bounds).unwrap();
            for k in 1..=60 {
                let m = Interval::from_center_radius(&traj.xs[k], &dvector![0.05, 0.08]).unwrap();
                let rep = adv.observe(&model, &m).unwrap();
                assert!(rep.all_hold(), "seed {seed} k {k}: {:?}", rep.checks);
                assert!(adv.belief.y_post.contains(&traj.ys[k]).unwrap());
                assert!(rep.leak_surrogate >= -1e-12);
            }
        }
    }

    #[test]
    fn measures_examples() {
        let model = model();
        let b = init_belief(&model, &model.system().x0_bounds).unwrap();
        assert!((measures(&b).privacy_vol - 0.91).abs() < 1e-12);
        let mut b2 = b.clone();
        b2.y_post = Interval::point(dvector![3.0, 1.0]);
        b2.x_post = Interval::from_slices(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let ms = measures(&b2);
        assert_eq!(ms.privacy_vol, 0.0);
        assert_eq!(ms.utility, 1.0);
        b2.x_post = Interval::point(dvector![1.0, 1.0]);
        assert!(measures(&b2).utility.is_infinite());
    }

    #[test]
    fn reduction_rejects_non_nested_sets() {
        let model = model();
        let a = Interval::from_slices(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let b = Interval::from_slices(&[0.0, 0.0], &[2.0, 1.0]).unwrap();
        let z = SignedBounds {
            lower: DVector::zeros(2),
            upper: DVector::zeros(2),
        };
        assert!(uncertainty_reduction(&model, &a, &b, &z, &z).is_err());
        let r = uncertainty_reduction(&model, &a, &a, &z, &z).unwrap();
        assert_eq!((r.by_difference, r.by_norm), (0.0, 0.0));
    }

    #[test]
    fn radius_bound_reduces_to_disturbance_term() {
        let mut sys = case_study_preset();
        sys.a3 = DMatrix::zeros(2, 2);
        sys.wx_bounds = Interval::point(dvector![1.8, 1.95]);
        let model = InferenceModel::new(sys.clone()).unwrap();
        let m0 = Interval::point(dvector![1.1, 0.3]);
        let mut adv = Adversary::start(&model, &m0).unwrap();
        let traj = simulate(&sys, 3, &mut RngStream::new(1, 0)).unwrap();
        let _ = traj;
        // Degenerate observations: p_bar = 0, only |B2| p_wy survives on the right side.
        let (x_pred, _) = predict(&adv.belief, &model).unwrap();
        let m = Interval::point(x_pred.center());
        let rep = adv.observe(&model, &m).unwrap();
        assert_eq!(adv.p_bar, DVector::zeros(2));
        let rhs = sys.b2.abs() * sys.wy_bounds.radius();
        assert!((adv.belief.y_post.radius() - &rhs).amax() <= 1e-9 || rep.check("radius").unwrap().holds);
        assert!(rep.check("radius").unwrap().holds);
    }

    #[test]
    fn checkers_detect_corruption() {
        let (model, b0, m, _) = first_step(0.3, 2);
        let mut adv = Adversary {
            belief: b0,
            p_bar: m.radius(),
            discarded: 0,
        };
        let mut rep = adv.observe(&model, &m).unwrap();
        assert!(rep.all_hold());

        let mut fat = adv.belief.clone();
        fat.y_post =
            Interval::from_center_radius(&fat.y_post.center(), &(fat.y_post.radius() * 10.0)).unwrap();
        assert!(!check_radius_bound(&model, &fat, &adv.p_bar).unwrap().holds);

        rep.center_shift += 10.0;
        assert!(!check_reduction_bounds(&model, &rep)[0].holds);
        assert!(!check_privacy_sandwich(&model, &rep)[1].holds);
        rep.center_shift -= 10.0;
        rep.delta_x = SignedBounds {
            lower: DVector::zeros(2),
            upper: DVector::zeros(2),
        };
        rep.delta_y = rep.delta_x.clone();
        if rep.leak_surrogate > 1e-6 {
            assert!(!check_reduction_bounds(&model, &rep)[1].holds);
            assert!(!check_privacy_sandwich(&model, &rep)[0].holds);
        }
    }

    #[test]
    fn discard_is_always_consistent() {
        let model = model();
        let mut adv = Adversary::start(&model, &model.system().x0_bounds).unwrap();
        for _ in 0..30 {
            let rep = adv.discard(&model).unwrap();
            assert!(rep.leak_surrogate.abs() < 1e-9);
        }
        assert_eq!(adv.discarded, 30);
    }

    #[test]
    fn inconsistent_observation_names_stage() {
        let (model, b0, _, _) = first_step(0.5, 1);
        let far = Interval::from_slices(&[50.0, 50.0], &[51.0, 51.0]).unwrap();
        match attack_step(&b0, &model, &far) {
            Err(Error::InconsistentObservation { k: 1, stage }) => assert!(stage.contains("backward")),
            other => panic!("{other:?}"),
        }
    }

    /// Counts from the composition formulas with box observations and disturbances.
    fn count_oracle(steps: usize) -> Vec<CcgCounts> {
        let sum = |a: (usize, usize), b: (usize, usize)| (a.0 + b.0, a.1 + b.1);
        let meet = |a: (usize, usize), b: (usize, usize)| (a.0 + b.0, a.1 + b.1 + 2);
        let bx = (2, 0);
        let mut x = meet(bx, bx);
        let mut y = bx;
        let mut out = vec![CcgCounts { k: 0, x, y }];
        for k in 1..=steps {
            let xb = meet(x, sum(sum(bx, y), bx));
            let yb = meet(y, sum(sum(bx, x), bx));
            let yn = sum(sum(xb, yb), bx);
            let xn = meet(bx, sum(sum(xb, yb), bx));
            x = xn;
            y = yn;
            out.push(CcgCounts { k, x, y });
        }
        out
    }

    #[test]
    fn ccg_counts_follow_recurrence() {
        let oracle = count_oracle(5);
        assert_eq!(oracle[1].x, (24, 10));
        assert_eq!(oracle[1].y, (22, 8));
        assert_eq!(oracle[3].x, (424, 170));
        assert_eq!(oracle[5].y, (6822, 2728));

        let (model, _, _, traj) = first_step(0.5, 6);
        let sys = model.system();
        let mut b = init_ccg_belief(&model, &Ccg::from_interval(&sys.x0_bounds)).unwrap();
        let mut ib = init_belief(&model, &sys.x0_bounds).unwrap();
        for k in 1..=3 {
            let m = Interval::from_center_radius(&traj.xs[k], &dvector![0.1, 0.1]).unwrap();
            b = attack_step_ccg(&b, &model, &Ccg::from_interval(&m), DEFAULT_CCG_CAP).unwrap();
            ib = attack_step(&ib, &model, &m).unwrap().0;
            let hull = b.y_post.interval_hull().unwrap();
            assert!(hull.is_subset_of(&ib.y_post, 1e-9), "k {k}");
            assert!(b.x_post.interval_hull().unwrap().is_subset_of(&ib.x_post, 1e-9));
            assert!(b.y_post.is_member(&traj.ys[k]).unwrap());
        }
        assert_eq!(b.counts, oracle[..4].to_vec());
    }

    #[test]
    fn ccg_cap_is_enforced() {
        let model = model();
        let sys = model.system();
        let b = init_ccg_belief(&model, &Ccg::from_interval(&sys.x0_bounds)).unwrap();
        let b = discard_step_ccg(&b, &model, 1).unwrap();
        assert!(matches!(
            discard_step_ccg(&b, &model, 1),
            Err(Error::HorizonCapExceeded { cap: 1 })
        ));
    }

    #[test]
    fn ccg_uninformative_step_is_membership_equivalent() {
        let model = model();
        let sys = model.system();
        let b = init_ccg_belief(&model, &Ccg::from_interval(&sys.x0_bounds)).unwrap();
        let (x_pred, y_pred) = predict_ccg(&b, &model).unwrap();
        let m = x_pred.interval_hull().unwrap();
        let next = attack_step_ccg(&b, &model, &Ccg::from_interval(&m), 8).unwrap();
        let hull = y_pred.interval_hull().unwrap();
        let mut rng = RngStream::new(8, 0);
        let mut checked = 0;
        while checked < 100 {
            let p = DVector::from_fn(2, |i, _| rng.random_range(hull.lower()[i]..=hull.upper()[i]));
            assert_eq!(
                y_pred.is_member(&p).unwrap(),
                next.y_post.is_member(&p).unwrap(),
                "{p:?}"
            );
            checked += 1;
        }
    }

    #[test]
    fn audit_log_has_header_and_rows() {
        let (model, b0, m, _) = first_step(0.5, 3);
        let mut adv = Adversary {
            belief: b0,
            p_bar: m.radius(),
            discarded: 0,
        };
        let rep = adv.observe(&model, &m).unwrap();
        let mut buf = Vec::new();
        write_audit_log(&mut buf, &[(adv.belief.clone(), rep)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("k,x_post_lo_0"));
        assert!(lines[0].contains("radius_residual"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn tighter_observation_never_loosens_private_set(
            seed in 0u64..10_000, r in 0.01f64..0.4, shrink in 0.0f64..1.0,
        ) {
            let (model, b0, _, traj) = first_step(0.5, seed);
            let m = Interval::from_center_radius(&traj.xs[1], &DVector::from_element(2, r)).unwrap();
            let inner = Interval::from_center_radius(&traj.xs[1], &DVector::from_element(2, r * shrink)).unwrap();
            let (wide, _) = attack_step(&b0, &model, &m).unwrap();
            let (narrow, _) = attack_step(&b0, &model, &inner).unwrap();
            prop_assert!(narrow.y_post.is_subset_of(&wide.y_post, 1e-12));
        }

        #[test]
        fn posteriors_contain_truth(seed in 0u64..10_000, r in 0.0f64..0.5) {
            let model = model();
            let sys = model.system();
            let traj = simulate(sys, 10, &mut RngStream::new(seed, 9)).unwrap();
            let mut adv = Adversary::start(&model, &sys.x0_bounds).unwrap();
            for k in 1..=10 {
                let m = Interval::from_center_radius(&traj.xs[k], &DVector::from_element(2, r)).unwrap();
                let rep = adv.observe(&model, &m).unwrap();
                prop_assert!(adv.belief.x_post.contains_within(&traj.xs[k], AUDIT_TOL).unwrap());
                prop_assert!(adv.belief.y_post.contains_within(&traj.ys[k], AUDIT_TOL).unwrap());
                prop_assert!(adv.belief.y_post.is_subset_of(&adv.belief.y_pred, AUDIT_TOL));
                prop_assert!(rep.all_hold());
            }
        }
    }
}
