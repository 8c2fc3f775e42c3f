//! Defender mechanisms that release a box around the true public state.
//!
//! The optimal filter randomizes a seed box around `x_k`, then chooses the released box
//! between the seed and the prediction by a linear program that minimizes the
//! adversary's one-step uncertainty reduction under a total-width budget `eps_x`. Two
//! baselines are provided: a static quantizer and an additive truncated-Gaussian box.

use nalgebra::DVector;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};

use crate::error::{check_dim, Error, Result};
use crate::inference::{attack_step, init_belief, predict, AdversaryBelief, InferenceModel, StepReport};
use crate::interval::Interval;
use crate::lp::{self, LpProblem, LpStatus};
use crate::system::RngStream;

/// Slack on the release budget and containment audits.
pub const RELEASE_TOL: f64 = 1e-9;

/// Random box `[x - a (x - lo), x + b (hi - x)]` with `a`, `b` uniform on ranges chosen so the
/// total width stays within `eps_x` and the box stays inside `x_pred`.
pub fn make_seed_set<R: RngCore + ?Sized>(
    x: &DVector<f64>,
    x_pred: &Interval,
    eps_x: f64,
    rng: &mut R,
) -> Result<Interval> {
    check_dim("make_seed_set", x_pred.dim(), x.len())?;
    if eps_x.is_nan() || eps_x <= 0.0 {
        return Err(Error::Precondition("eps_x must be positive".into()));
    }
    if !x_pred.contains(x)? {
        return Err(Error::Precondition(
            "true public state lies outside the predicted set".into(),
        ));
    }
    let below = x - x_pred.lower();
    let above = x_pred.upper() - x;
    let alpha = draw_fraction(eps_x, below.lp_norm(1), rng);
    let beta = draw_fraction(eps_x, above.lp_norm(1), rng);
    let lower = (x - below * alpha).zip_map(x_pred.lower(), f64::max);
    let upper = (x + above * beta).zip_map(x_pred.upper(), f64::min);
    Interval::new(lower, upper)
}

fn draw_fraction<R: RngCore + ?Sized>(eps_x: f64, span: f64, rng: &mut R) -> f64 {
    if span == 0.0 {
        return 0.0;
    }
    let cap = (eps_x / (2.0 * span)).min(1.0);
    rng.random_range(0.0..=cap)
}

/// Compiled release problem with the layout of its decision vector
/// `(eps_y, m_lower, m_upper, p_dx, p_dy)`.
#[derive(Clone, Debug)]
pub struct P2 {
    pub problem: LpProblem,
    pub n: usize,
    m_lower_bounds: (DVector<f64>, DVector<f64>),
    m_upper_bounds: (DVector<f64>, DVector<f64>),
}

impl P2 {
    pub fn eps_y(&self) -> usize {
        0
    }

    pub fn m_lower(&self, i: usize) -> usize {
        1 + i
    }

    pub fn m_upper(&self, i: usize) -> usize {
        1 + self.n + i
    }

    pub fn p_dx(&self, i: usize) -> usize {
        1 + 2 * self.n + i
    }

    pub fn p_dy(&self, i: usize) -> usize {
        1 + 3 * self.n + i
    }

    /// Released box from a solution vector, snapped onto the seed/prediction bounds and
    /// pulled toward the seed if snapping pushed it over the budget.
    pub fn released_box(&self, values: &[f64], seed: &Interval, eps_x: f64) -> Result<Interval> {
        let n = self.n;
        let mut lo = DVector::from_fn(n, |i, _| {
            values[self.m_lower(i)].clamp(self.m_lower_bounds.0[i], self.m_lower_bounds.1[i])
        });
        let mut hi = DVector::from_fn(n, |i, _| {
            values[self.m_upper(i)].clamp(self.m_upper_bounds.0[i], self.m_upper_bounds.1[i])
        });
        let width = (&hi - &lo).sum();
        if width > eps_x {
            let seed_w = seed.surrogate_volume();
            let t = ((eps_x - seed_w) / (width - seed_w)).clamp(0.0, 1.0);
            lo = seed.lower() - (seed.lower() - lo) * t;
            hi = seed.upper() + (hi - seed.upper()) * t;
        }
        Interval::new(lo, hi)
    }
}

/// Release LP for step `k` given the previous posteriors in `belief`, the prediction
/// `x_pred`, and the seed box.
///
/// The backward sets are affine in `(m_lower, m_upper)`:
/// `M_lo = P+ m_lower + P- m_upper + o_lo` and `M_hi = P- m_lower + P+ m_upper + o_hi`.
/// `p_dz` upper-bounds the radius of the slab the observation removes from the previous
/// set, so `2 sum(|A3| p_dx + |A4| p_dy)` bounds the leak in total-width units.
pub fn build_p2(
    model: &InferenceModel,
    belief: &AdversaryBelief,
    x_pred: &Interval,
    seed: &Interval,
    eps_x: f64,
) -> Result<P2> {
    let n = model.nx();
    check_dim("build_p2 (seed)", n, seed.dim())?;
    check_dim("build_p2 (prediction)", n, x_pred.dim())?;
    if !seed.is_subset_of(x_pred, RELEASE_TOL) {
        return Err(Error::Precondition(
            "seed set is not inside the prediction".into(),
        ));
    }
    let (x_prev, y_prev) = (&belief.x_post, &belief.y_post);
    let (ox, oy) = model.backward_offsets(x_prev, y_prev)?;
    let (map_x, map_y) = model.backward_observation_maps();
    let (a3, a4) = model.leak_maps();
    let (a3_abs, a4_abs) = (a3.abs(), a4.abs());

    let mut p = LpProblem::new();
    p.add_var("eps_y", 1.0, 0.0, f64::INFINITY);
    let m_lower_bounds = (x_pred.lower().clone(), seed.lower().clone());
    let m_upper_bounds = (seed.upper().clone(), x_pred.upper().clone());
    for i in 0..n {
        p.add_var(
            format!("m_lower{i}"),
            0.0,
            m_lower_bounds.0[i],
            m_lower_bounds.1[i],
        );
    }
    for i in 0..n {
        p.add_var(
            format!("m_upper{i}"),
            0.0,
            m_upper_bounds.0[i],
            m_upper_bounds.1[i],
        );
    }
    for i in 0..n {
        p.add_var(format!("p_dx{i}"), 0.0, 0.0, f64::INFINITY);
    }
    for i in 0..n {
        p.add_var(format!("p_dy{i}"), 0.0, 0.0, f64::INFINITY);
    }
    let layout = P2 {
        problem: LpProblem::new(),
        n,
        m_lower_bounds,
        m_upper_bounds,
    };

    // (c1) 2 sum_i (|A3| p_dx + |A4| p_dy)_i <= eps_y
    let mut c1 = vec![(layout.eps_y(), -1.0)];
    for j in 0..n {
        let wx: f64 = a3_abs.column(j).sum();
        let wy: f64 = a4_abs.column(j).sum();
        c1.push((layout.p_dx(j), 2.0 * wx));
        c1.push((layout.p_dy(j), 2.0 * wy));
    }
    p.add_le(c1, 0.0);

    // (c2) total width within budget
    let mut c2 = Vec::with_capacity(2 * n);
    for i in 0..n {
        c2.push((layout.m_upper(i), 1.0));
        c2.push((layout.m_lower(i), -1.0));
    }
    p.add_le(c2, eps_x);

    // (c4) removed-slab radii for both previous sets
    for (map, offset, prev, pvar) in [(map_x, &ox, x_prev, 0usize), (map_y, &oy, y_prev, 1usize)] {
        let (pos, neg) = (map.pos(), map.neg());
        for i in 0..n {
            let pd = if pvar == 0 { layout.p_dx(i) } else { layout.p_dy(i) };
            // M_lo_i = sum_j pos_ij ml_j + neg_ij mu_j + o_lo_i
            let mut lo_terms = Vec::new();
            let mut hi_terms = Vec::new();
            for j in 0..n {
                lo_terms.push((layout.m_lower(j), pos[(i, j)]));
                lo_terms.push((layout.m_upper(j), neg[(i, j)]));
                hi_terms.push((layout.m_lower(j), neg[(i, j)]));
                hi_terms.push((layout.m_upper(j), pos[(i, j)]));
            }
            let (o_lo, o_hi) = (offset.lower()[i], offset.upper()[i]);
            let (z_lo, z_hi) = (prev.lower()[i], prev.upper()[i]);

            // p_d >= r_prev - (M_hi - M_lo)/2
            let mut r = vec![(pd, 1.0)];
            r.extend(hi_terms.iter().map(|&(v, c)| (v, 0.5 * c)));
            r.extend(lo_terms.iter().map(|&(v, c)| (v, -0.5 * c)));
            p.add_ge(r, 0.5 * (z_hi - z_lo) - 0.5 * (o_hi - o_lo));

            // 2 p_d >= Z_hi - M_hi
            let mut r = vec![(pd, 2.0)];
            r.extend(hi_terms.iter().copied());
            p.add_ge(r, z_hi - o_hi);

            // 2 p_d >= M_lo - Z_lo
            let mut r = vec![(pd, 2.0)];
            r.extend(lo_terms.iter().map(|&(v, c)| (v, -c)));
            p.add_ge(r, o_lo - z_lo);
        }
    }
    Ok(P2 { problem: p, ..layout })
}

/// What a mechanism released at one step.
#[derive(Clone, Debug, PartialEq)]
pub struct ReleaseRecord {
    pub k: usize,
    pub m_star: Interval,
    pub s_seed: Interval,
    /// LP optimum: minimized leak bound. `None` where no LP is solved.
    pub eps_y_star: Option<f64>,
    pub lp_status: Option<LpStatus>,
}

/// Optimal filter: mirrors the adversary's interval recursion and releases the LP box.
#[derive(Clone, Debug)]
pub struct FilterState {
    pub belief: Option<AdversaryBelief>,
    pub eps_x: f64,
    pub rng: RngStream,
}

impl FilterState {
    pub fn new(eps_x: f64, rng: RngStream) -> Result<Self> {
        if !(eps_x > 0.0 && eps_x.is_finite()) {
            return Err(Error::Precondition("eps_x must be positive and finite".into()));
        }
        Ok(FilterState {
            belief: None,
            eps_x,
            rng,
        })
    }

    /// First release: seed inside the prior, grown evenly to spend the remaining budget,
    /// clipped to the prior.
    pub fn filter_step_k0(&mut self, model: &InferenceModel, x0: &DVector<f64>) -> Result<ReleaseRecord> {
        let prior = &model.system().x0_bounds;
        let seed = make_seed_set(x0, prior, self.eps_x, &mut self.rng)?;
        let n = seed.dim() as f64;
        let slack = (self.eps_x - seed.surrogate_volume()).max(0.0) / (2.0 * n);
        let lower = seed.lower().add_scalar(-slack).zip_map(prior.lower(), f64::max);
        let upper = seed.upper().add_scalar(slack).zip_map(prior.upper(), f64::min);
        let m_star = Interval::new(lower, upper)?;
        self.belief = Some(init_belief(model, &m_star)?);
        Ok(ReleaseRecord {
            k: 0,
            m_star,
            s_seed: seed,
            eps_y_star: None,
            lp_status: None,
        })
    }

    /// Seed, solve the release LP, release, and advance the mirror belief. Returns the
    /// release together with the mirror's step report.
    pub fn filter_step(
        &mut self,
        model: &InferenceModel,
        x_k: &DVector<f64>,
    ) -> Result<(ReleaseRecord, StepReport)> {
        let belief = self
            .belief
            .as_ref()
            .ok_or_else(|| Error::Precondition("filter_step_k0 must run first".into()))?;
        let (x_pred, _) = predict(belief, model)?;
        // The mirror is sound, so x_k is in x_pred up to rounding; snap it in.
        let x_in = x_k.zip_zip_map(x_pred.lower(), x_pred.upper(), |v, lo, hi| v.clamp(lo, hi));
        if (&x_in - x_k).amax() > RELEASE_TOL {
            return Err(Error::Invariant(
                "true public state escaped the mirrored prediction".into(),
            ));
        }
        let seed = make_seed_set(&x_in, &x_pred, self.eps_x, &mut self.rng)?;
        let p2 = build_p2(model, belief, &x_pred, &seed, self.eps_x)?;
        let sol = lp::solve(&p2.problem)?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Solver {
                status: sol.status.to_string(),
                detail: format!(
                    "release LP at k = {} failed with a feasible seed\n{}",
                    belief.k + 1,
                    p2.problem
                ),
            });
        }
        let m_star = p2.released_box(&sol.values, &seed, self.eps_x)?;
        let (next, report) = attack_step(belief, model, &m_star)?;
        let record = ReleaseRecord {
            k: next.k,
            m_star,
            s_seed: seed,
            eps_y_star: Some(sol.values[p2.eps_y()]),
            lp_status: Some(sol.status),
        };
        self.belief = Some(next);
        Ok((record, report))
    }
}

/// Static grid of half-open bins of width `eps_x / n` per dimension over a fixed cover.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizerGrid {
    pub origin: DVector<f64>,
    pub width: f64,
    pub cover: Interval,
}

/// Steps of open-loop prediction used to build the quantizer cover.
pub const COVER_STEPS: usize = 60;

impl QuantizerGrid {
    /// Cover: hull of the public-state predictions over `steps` steps from the priors with
    /// no observations. Bins are anchored at the prior's lower corner so bins near the
    /// operating region are not affected by the (possibly huge) extent of the cover.
    pub fn new(model: &InferenceModel, eps_x: f64, steps: usize) -> Result<Self> {
        if eps_x.is_nan() || eps_x <= 0.0 {
            return Err(Error::Precondition("eps_x must be positive".into()));
        }
        let sys = model.system();
        let mut belief = init_belief(model, &sys.x0_bounds)?;
        let mut cover = sys.x0_bounds.clone();
        for k in 1..=steps {
            let (x_pred, y_pred) = predict(&belief, model)?;
            cover = cover.hull(&x_pred)?;
            belief = AdversaryBelief {
                k,
                y_center_prev: y_pred.center(),
                x_post: x_pred.clone(),
                y_post: y_pred.clone(),
                x_pred,
                y_pred,
            };
        }
        Ok(QuantizerGrid {
            origin: sys.x0_bounds.lower().clone(),
            width: eps_x / sys.nx() as f64,
            cover,
        })
    }

    pub fn bin_index(&self, x: &DVector<f64>) -> Result<Vec<i64>> {
        check_dim("QuantizerGrid::bin_index", self.origin.len(), x.len())?;
        if !self.cover.contains(x)? {
            return Err(Error::CoverMiss);
        }
        Ok((0..x.len())
            .map(|i| {
                let mut j = ((x[i] - self.origin[i]) / self.width).floor() as i64;
                // Rounding in the division can land one bin off on a boundary.
                if x[i] < self.edge(i, j) {
                    j -= 1;
                } else if x[i] >= self.edge(i, j + 1) {
                    j += 1;
                }
                j
            })
            .collect())
    }

    fn edge(&self, dim: usize, j: i64) -> f64 {
        self.origin[dim] + j as f64 * self.width
    }

    pub fn bin(&self, index: &[i64]) -> Result<Interval> {
        check_dim("QuantizerGrid::bin", self.origin.len(), index.len())?;
        let lo = DVector::from_fn(index.len(), |i, _| self.edge(i, index[i]));
        let hi = DVector::from_fn(index.len(), |i, _| self.edge(i, index[i] + 1));
        Interval::new(lo, hi)
    }
}

/// The closed bin `[lo, hi]` whose half-open version `[lo, hi)` contains `x`.
pub fn quantizer_release(x: &DVector<f64>, grid: &QuantizerGrid) -> Result<Interval> {
    grid.bin(&grid.bin_index(x)?)
}

/// Draw from `N(0, sigma^2)` conditioned on `[-half, half]` by rejection.
pub fn truncated_normal<R: RngCore + ?Sized>(sigma: f64, half: f64, rng: &mut R) -> f64 {
    let normal = Normal::new(0.0, sigma).expect("positive standard deviation");
    loop {
        let v: f64 = normal.sample(rng);
        if v.abs() <= half {
            return v;
        }
    }
}

/// Noise per coordinate with standard deviation `eps_x` truncated to `[-eps_x/2, eps_x/2]`;
/// releases the box of half-width `eps_x / (2n)` around the noisy state.
pub fn truncated_gaussian_release<R: RngCore + ?Sized>(
    x: &DVector<f64>,
    eps_x: f64,
    rng: &mut R,
) -> Result<Interval> {
    if !(eps_x > 0.0 && eps_x.is_finite()) {
        return Err(Error::Precondition("eps_x must be positive and finite".into()));
    }
    let n = x.len();
    let z = DVector::from_fn(n, |i, _| x[i] + truncated_normal(eps_x, eps_x / 2.0, rng));
    let r = DVector::from_element(n, eps_x / (2.0 * n as f64));
    Interval::from_center_radius(&z, &r)
}
