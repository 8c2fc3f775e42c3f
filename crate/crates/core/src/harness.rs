//! Experiment drivers: configuration, seeded episode runs, time series, privacy-utility
//! sweeps, bound audits and release-LP dumps, all emitted as CSV tables.
//!
//! Every run `r` draws its trajectory from stream `4r` and its mechanism noise from stream
//! `4r + 1` of the base seed, so all mechanisms and budgets see the same ground truth.
//! Work fans out over `(mechanism, eps_x, run)` and is merged in key order, which keeps the
//! output byte-identical across thread counts.

use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ccg::Ccg;
use crate::csvfmt::{bool01, sig9};
use crate::error::{Error, Result};
use crate::filter::{
    build_p2, make_seed_set, quantizer_release, truncated_gaussian_release, FilterState, QuantizerGrid,
    COVER_STEPS,
};
use crate::inference::{
    attack_step_ccg, discard_step_ccg, init_ccg_belief, predict, Adversary, AdversaryBelief, CcgCounts,
    InferenceModel, StepReport, AUDIT_TOL, DEFAULT_CCG_CAP,
};
use crate::interval::Interval;
use crate::system::{case_study_preset, simulate, LinearSystem, RngStream, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Optimal,
    Quantizer,
    Gaussian,
}

impl Mechanism {
    pub const ALL: [Mechanism; 3] = [Mechanism::Optimal, Mechanism::Quantizer, Mechanism::Gaussian];

    pub fn name(&self) -> &'static str {
        match self {
            Mechanism::Optimal => "optimal",
            Mechanism::Quantizer => "quantizer",
            Mechanism::Gaussian => "gaussian",
        }
    }

    /// Whether the released box always contains the true state, so that the adversary's
    /// sets are guaranteed to contain the truth.
    pub fn is_truthful(&self) -> bool {
        !matches!(self, Mechanism::Gaussian)
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Interval,
    Ccg,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Interval => "interval",
            Backend::Ccg => "ccg",
        })
    }
}

/// Experiment configuration. `system` is `"preset"` or a path to a system TOML file,
/// resolved relative to the config file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub system: String,
    pub horizon: usize,
    pub runs: usize,
    pub seed: u64,
    pub mechanism: Mechanism,
    pub eps_x: Vec<f64>,
    pub backend: Backend,
    pub ccg_cap: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            system: "preset".into(),
            horizon: 60,
            runs: 20,
            seed: 1,
            mechanism: Mechanism::Optimal,
            eps_x: vec![0.01, 0.05, 0.1, 0.25, 0.5],
            backend: Backend::Interval,
            ccg_cap: DEFAULT_CCG_CAP,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.horizon == 0 {
            out.push("horizon: must be at least 1".into());
        }
        if self.runs == 0 {
            out.push("runs: must be at least 1".into());
        }
        if self.eps_x.is_empty() {
            out.push("eps_x: at least one budget is required".into());
        }
        for (i, e) in self.eps_x.iter().enumerate() {
            if !(e.is_finite() && *e > 0.0) {
                out.push(format!("eps_x[{i}]: must be positive and finite, found {e}"));
            }
        }
        if self.ccg_cap == 0 {
            out.push("ccg_cap: must be at least 1".into());
        }
        if self.system.trim().is_empty() {
            out.push("system: must be \"preset\" or a file path".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(issues))
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load and validate; a relative `system` path is made relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        if cfg.system != "preset" {
            let p = PathBuf::from(&cfg.system);
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.system = dir.join(p).to_string_lossy().into_owned();
                }
            }
        }
        Ok(cfg)
    }

    pub fn load_system(&self) -> Result<LinearSystem> {
        if self.system == "preset" {
            Ok(case_study_preset())
        } else {
            LinearSystem::from_toml_str(&std::fs::read_to_string(&self.system)?)
        }
    }

    pub fn model(&self) -> Result<InferenceModel> {
        self.validate()?;
        InferenceModel::new(self.load_system()?)
    }
}

pub fn trajectory_stream(run: usize) -> u64 {
    4 * run as u64
}

pub fn mechanism_stream(run: usize) -> u64 {
    4 * run as u64 + 1
}

/// One step of an episode as seen by the adversary.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub k: usize,
    pub released: Interval,
    pub belief: AdversaryBelief,
    /// `None` at `k = 0`.
    pub report: Option<StepReport>,
    pub eps_y_star: Option<f64>,
    /// The release was inconsistent with the adversary's sets and was ignored.
    pub discarded: bool,
    pub x_sound: bool,
    pub y_sound: bool,
    pub nested: bool,
}

#[derive(Clone, Debug)]
pub struct Episode {
    pub mechanism: Mechanism,
    pub eps_x: f64,
    pub run: usize,
    pub trajectory: Trajectory,
    pub steps: Vec<StepRecord>,
}

impl Episode {
    /// Every release, starting at `k = 0`.
    pub fn releases(&self) -> impl Iterator<Item = &Interval> {
        self.steps.iter().map(|s| &s.released)
    }

    pub fn mean_privacy_surrogate(&self) -> f64 {
        mean(self.steps.iter().map(|s| s.belief.y_post.surrogate_volume()))
    }

    pub fn mean_privacy_vol(&self) -> f64 {
        mean(self.steps.iter().map(|s| s.belief.y_post.volume()))
    }

    /// Mean of `1 / surrogate_volume(x_post)`.
    pub fn mean_utility(&self) -> f64 {
        mean(
            self.steps
                .iter()
                .map(|s| 1.0 / s.belief.x_post.surrogate_volume()),
        )
    }

    /// Mean of `1 / volume(x_post)`; infinite if any public posterior is degenerate.
    pub fn mean_utility_vol(&self) -> f64 {
        mean(self.steps.iter().map(|s| 1.0 / s.belief.x_post.volume()))
    }

    /// Mean `||c(Y_post) - y||_1` and `||c(X_post) - x||_1`.
    pub fn mean_center_errors(&self) -> (f64, f64) {
        let t = &self.trajectory;
        (
            mean(
                self.steps
                    .iter()
                    .map(|s| (s.belief.y_post.center() - &t.ys[s.k]).lp_norm(1)),
            ),
            mean(
                self.steps
                    .iter()
                    .map(|s| (s.belief.x_post.center() - &t.xs[s.k]).lp_norm(1)),
            ),
        )
    }

    pub fn soundness_violations(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| !(s.x_sound && s.y_sound && s.nested))
            .count()
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (m, 0.0);
    }
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

// One per episode; boxing would buy nothing.
#[allow(clippy::large_enum_variant)]
enum Releaser {
    Optimal(FilterState),
    Quantizer(QuantizerGrid),
    Gaussian(RngStream),
}

fn record(
    k: usize,
    released: Interval,
    adv: &Adversary,
    report: Option<StepReport>,
    eps_y_star: Option<f64>,
    discarded: bool,
    traj: &Trajectory,
) -> Result<StepRecord> {
    let b = &adv.belief;
    Ok(StepRecord {
        k,
        x_sound: b.x_post.contains_within(&traj.xs[k], AUDIT_TOL)?,
        y_sound: b.y_post.contains_within(&traj.ys[k], AUDIT_TOL)?,
        nested: k == 0 || b.y_post.is_subset_of(&b.y_pred, AUDIT_TOL),
        released,
        belief: b.clone(),
        report,
        eps_y_star,
        discarded,
    })
}

fn is_inconsistent(e: &Error) -> bool {
    matches!(e, Error::InconsistentObservation { .. })
}

/// Run one mechanism against the interval adversary over the whole trajectory.
///
/// Only the Gaussian mechanism can release a box the model cannot explain; the adversary
/// then ignores that release. For the other mechanisms an inconsistency is an error.
pub fn run_episode(
    model: &InferenceModel,
    trajectory: Trajectory,
    mechanism: Mechanism,
    eps_x: f64,
    run: usize,
    rng: RngStream,
    grid: Option<&QuantizerGrid>,
) -> Result<Episode> {
    let traj = &trajectory;
    let mut releaser = match mechanism {
        Mechanism::Optimal => Releaser::Optimal(FilterState::new(eps_x, rng)?),
        Mechanism::Quantizer => Releaser::Quantizer(match grid {
            Some(g) => g.clone(),
            None => QuantizerGrid::new(model, eps_x, COVER_STEPS)?,
        }),
        Mechanism::Gaussian => Releaser::Gaussian(rng),
    };
    let prior = &model.system().x0_bounds;

    let m0 = match &mut releaser {
        Releaser::Optimal(fs) => fs.filter_step_k0(model, &traj.xs[0])?.m_star,
        Releaser::Quantizer(g) => quantizer_release(&traj.xs[0], g)?,
        Releaser::Gaussian(r) => truncated_gaussian_release(&traj.xs[0], eps_x, r)?,
    };
    let (mut adv, discarded0) = match Adversary::start(model, &m0) {
        Ok(a) => (a, false),
        Err(e) if mechanism == Mechanism::Gaussian && is_inconsistent(&e) => {
            (Adversary::start(model, prior)?, true)
        }
        Err(e) => return Err(e),
    };
    let mut steps = vec![record(0, m0, &adv, None, None, discarded0, traj)?];

    for k in 1..=traj.horizon() {
        let x = &traj.xs[k];
        let (m, eps_y) = match &mut releaser {
            Releaser::Optimal(fs) => {
                let (rec, _) = fs.filter_step(model, x)?;
                (rec.m_star, rec.eps_y_star)
            }
            Releaser::Quantizer(g) => (quantizer_release(x, g)?, None),
            Releaser::Gaussian(r) => (truncated_gaussian_release(x, eps_x, r)?, None),
        };
        let (report, discarded) = match adv.observe(model, &m) {
            Ok(rep) => (rep, false),
            Err(e) if mechanism == Mechanism::Gaussian && is_inconsistent(&e) => (adv.discard(model)?, true),
            Err(e) => return Err(e),
        };
        steps.push(record(k, m, &adv, Some(report), eps_y, discarded, traj)?);
    }
    Ok(Episode {
        mechanism,
        eps_x,
        run,
        trajectory,
        steps,
    })
}

/// One step of the CCG adversary replaying an episode's releases.
#[derive(Clone, Debug)]
pub struct CcgStep {
    pub k: usize,
    pub y_hull: Interval,
    pub x_hull: Interval,
    pub counts: CcgCounts,
    pub discarded: bool,
}

/// Replay the releases of `episode` through the exact CCG adversary for `k <= cap`.
pub fn replay_ccg(model: &InferenceModel, episode: &Episode, cap: usize) -> Result<Vec<CcgStep>> {
    let releases: Vec<&Interval> = episode.releases().collect();
    let prior = Ccg::from_interval(&model.system().x0_bounds);
    let gaussian = episode.mechanism == Mechanism::Gaussian;
    let (mut belief, mut discarded) = match init_ccg_belief(model, &Ccg::from_interval(releases[0])) {
        Ok(b) => (b, false),
        Err(e) if gaussian && is_inconsistent(&e) => (init_ccg_belief(model, &prior)?, true),
        Err(e) => return Err(e),
    };
    let mut out = Vec::new();
    let last = cap.min(releases.len() - 1);
    for (k, release) in releases.iter().enumerate().take(last + 1) {
        if k > 0 {
            let m = Ccg::from_interval(release);
            (belief, discarded) = match attack_step_ccg(&belief, model, &m, cap) {
                Ok(b) => (b, false),
                Err(e) if gaussian && is_inconsistent(&e) => (discard_step_ccg(&belief, model, cap)?, true),
                Err(e) => return Err(e),
            };
        }
        out.push(CcgStep {
            k,
            y_hull: belief.y_post.interval_hull()?,
            x_hull: belief.x_post.interval_hull()?,
            counts: *belief.counts.last().expect("counts recorded"),
            discarded,
        });
    }
    Ok(out)
}

/// Run every `(mechanism, eps_x, run)` job in parallel, returned in key order.
pub fn run_episodes(
    cfg: &ExperimentConfig,
    model: &InferenceModel,
    mechanisms: &[Mechanism],
) -> Result<Vec<Episode>> {
    cfg.validate()?;
    let trajectories: Vec<Trajectory> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| {
            simulate(
                model.system(),
                cfg.horizon,
                &mut RngStream::new(cfg.seed, trajectory_stream(r)),
            )
        })
        .collect::<Result<_>>()?;
    let grids: Vec<Option<QuantizerGrid>> = cfg
        .eps_x
        .iter()
        .map(|&e| {
            if mechanisms.contains(&Mechanism::Quantizer) {
                QuantizerGrid::new(model, e, COVER_STEPS).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_>>()?;
    let mut jobs = Vec::new();
    for &mech in mechanisms {
        for (ei, &eps) in cfg.eps_x.iter().enumerate() {
            for run in 0..cfg.runs {
                jobs.push((mech, ei, eps, run));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(mech, ei, eps, run)| {
            run_episode(
                model,
                trajectories[run].clone(),
                mech,
                eps,
                run,
                RngStream::new(cfg.seed, mechanism_stream(run)),
                grids[ei].as_ref(),
            )
        })
        .collect()
}

/// A CSV table: fixed header and formatted rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: Vec<String>) -> Self {
        Table {
            header,
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("CSV is UTF-8"))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

fn push_vec(row: &mut Vec<String>, v: &DVector<f64>) {
    row.extend(v.iter().map(|x| sig9(*x)));
}

fn push_box(row: &mut Vec<String>, b: &Interval) {
    push_vec(row, b.lower());
    push_vec(row, b.upper());
}

fn box_cols(h: &mut Vec<String>, name: &str, n: usize) {
    for side in ["lo", "hi"] {
        for i in 0..n {
            h.push(format!("{name}_{side}{i}"));
        }
    }
}

/// Names of the per-step bound checks, in report order.
pub const CHECK_NAMES: [&str; 7] = [
    "leak_routes",
    "leak_nonnegative",
    "leak_lower",
    "leak_upper",
    "privacy_lower",
    "privacy_upper",
    "radius",
];

fn check_residuals(row: &mut Vec<String>, report: Option<&StepReport>) {
    for name in CHECK_NAMES {
        row.push(match report.and_then(|r| r.check(name)) {
            Some(c) => sig9(c.residual),
            None => String::new(),
        });
    }
}

/// Per-step time series for the configured mechanism and every budget.
pub fn run_timeseries(cfg: &ExperimentConfig) -> Result<Table> {
    let model = cfg.model()?;
    let (nx, ny) = (model.nx(), model.system().ny());
    let episodes = run_episodes(cfg, &model, &[cfg.mechanism])?;
    let ccg: Vec<Option<Vec<CcgStep>>> = if cfg.backend == Backend::Ccg {
        episodes
            .par_iter()
            .map(|e| replay_ccg(&model, e, cfg.ccg_cap.min(cfg.horizon)).map(Some))
            .collect::<Result<_>>()?
    } else {
        vec![None; episodes.len()]
    };

    let mut h: Vec<String> = ["mechanism", "eps_x", "run", "k"].map(String::from).to_vec();
    h.extend((0..nx).map(|i| format!("x{i}")));
    h.extend((0..ny).map(|i| format!("y{i}")));
    box_cols(&mut h, "m", nx);
    box_cols(&mut h, "x_post", nx);
    box_cols(&mut h, "y_post", ny);
    h.extend((0..nx).map(|i| format!("x_est{i}")));
    h.extend((0..ny).map(|i| format!("y_est{i}")));
    for c in [
        "privacy_vol",
        "privacy_surrogate",
        "utility",
        "leak",
        "center_shift",
        "eps_y_star",
    ] {
        h.push(c.into());
    }
    h.extend(CHECK_NAMES.iter().map(|c| format!("{c}_residual")));
    for c in ["x_sound", "y_sound", "nested", "discarded"] {
        h.push(c.into());
    }
    if cfg.backend == Backend::Ccg {
        box_cols(&mut h, "ccg_y_hull", ny);
        for c in ["ccg_x_ng", "ccg_x_nc", "ccg_y_ng", "ccg_y_nc"] {
            h.push(c.into());
        }
    }
    let mut table = Table::new(h);

    for (ep, cs) in episodes.iter().zip(&ccg) {
        for s in &ep.steps {
            let t = &ep.trajectory;
            let mut row = vec![
                ep.mechanism.to_string(),
                sig9(ep.eps_x),
                ep.run.to_string(),
                s.k.to_string(),
            ];
            push_vec(&mut row, &t.xs[s.k]);
            push_vec(&mut row, &t.ys[s.k]);
            push_box(&mut row, &s.released);
            push_box(&mut row, &s.belief.x_post);
            push_box(&mut row, &s.belief.y_post);
            push_vec(&mut row, &s.belief.x_post.center());
            push_vec(&mut row, &s.belief.y_post.center());
            let x_vol = s.belief.x_post.volume();
            row.push(sig9(s.belief.y_post.volume()));
            row.push(sig9(s.belief.y_post.surrogate_volume()));
            row.push(sig9(if x_vol > 0.0 { 1.0 / x_vol } else { f64::INFINITY }));
            row.push(
                s.report
                    .as_ref()
                    .map_or(String::new(), |r| sig9(r.leak_surrogate)),
            );
            row.push(s.report.as_ref().map_or(String::new(), |r| sig9(r.center_shift)));
            row.push(s.eps_y_star.map_or(String::new(), sig9));
            check_residuals(&mut row, s.report.as_ref());
            for b in [s.x_sound, s.y_sound, s.nested, s.discarded] {
                row.push(bool01(b).into());
            }
            if let Some(cs) = cs {
                match cs.iter().find(|c| c.k == s.k) {
                    Some(c) => {
                        push_box(&mut row, &c.y_hull);
                        for v in [c.counts.x.0, c.counts.x.1, c.counts.y.0, c.counts.y.1] {
                            row.push(v.to_string());
                        }
                    }
                    None => row.extend(std::iter::repeat_n(String::new(), 2 * ny + 4)),
                }
            }
            table.rows.push(row);
        }
    }
    Ok(table)
}

/// Mean privacy and utility of one mechanism at one budget.
#[derive(Clone, Debug, PartialEq)]
pub struct TradeoffPoint {
    pub mechanism: Mechanism,
    pub backend: Backend,
    pub eps_x: f64,
    pub privacy_surrogate: f64,
    pub privacy_surrogate_se: f64,
    pub privacy_vol: f64,
    pub privacy_vol_se: f64,
    pub utility: f64,
    pub utility_se: f64,
    /// Normalized with the Gaussian sweep's range of the same backend; not clamped.
    pub privacy_norm: f64,
    pub utility_norm: f64,
}

fn per_run_stats(values: Vec<f64>) -> (f64, f64) {
    mean_se(&values)
}

fn ccg_means(steps: &[CcgStep]) -> (f64, f64) {
    (
        mean(steps.iter().map(|s| s.y_hull.surrogate_volume())),
        mean(steps.iter().map(|s| s.y_hull.volume())),
    )
}

/// Privacy-utility sweep over all three mechanisms for every budget, for the interval
/// backend and, when `cfg.backend` is `ccg`, also the CCG backend (averaged over
/// `k <= min(K, ccg_cap)`).
pub fn tradeoff_points(cfg: &ExperimentConfig) -> Result<Vec<TradeoffPoint>> {
    let model = cfg.model()?;
    if cfg.eps_x.len() < 3 {
        return Err(Error::Config(vec![
            "eps_x: the trade-off sweep needs at least three budgets".into(),
        ]));
    }
    let episodes = run_episodes(cfg, &model, &Mechanism::ALL)?;
    let mut backends = vec![Backend::Interval];
    let ccg: Vec<Vec<CcgStep>> = if cfg.backend == Backend::Ccg {
        backends.push(Backend::Ccg);
        let cap = cfg.ccg_cap.min(cfg.horizon);
        episodes
            .par_iter()
            .map(|e| replay_ccg(&model, e, cap))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let mut points = Vec::new();
    for &backend in &backends {
        let mut group = Vec::new();
        for &mech in &Mechanism::ALL {
            for &eps in &cfg.eps_x {
                let idx: Vec<usize> = episodes
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e.mechanism == mech && e.eps_x == eps)
                    .map(|(i, _)| i)
                    .collect();
                let (ps, pv): (Vec<f64>, Vec<f64>) = idx
                    .iter()
                    .map(|&i| match backend {
                        Backend::Interval => (
                            episodes[i].mean_privacy_surrogate(),
                            episodes[i].mean_privacy_vol(),
                        ),
                        Backend::Ccg => ccg_means(&ccg[i]),
                    })
                    .unzip();
                let us: Vec<f64> = idx.iter().map(|&i| episodes[i].mean_utility()).collect();
                let (privacy_surrogate, privacy_surrogate_se) = per_run_stats(ps);
                let (privacy_vol, privacy_vol_se) = per_run_stats(pv);
                let (utility, utility_se) = per_run_stats(us);
                group.push(TradeoffPoint {
                    mechanism: mech,
                    backend,
                    eps_x: eps,
                    privacy_surrogate,
                    privacy_surrogate_se,
                    privacy_vol,
                    privacy_vol_se,
                    utility,
                    utility_se,
                    privacy_norm: f64::NAN,
                    utility_norm: f64::NAN,
                });
            }
        }
        normalize(&mut group);
        points.extend(group);
    }
    Ok(points)
}

fn normalize(group: &mut [TradeoffPoint]) {
    let range = |f: &dyn Fn(&TradeoffPoint) -> f64| {
        group
            .iter()
            .filter(|p| p.mechanism == Mechanism::Gaussian)
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    };
    let (plo, phi) = range(&|p| p.privacy_surrogate);
    let (ulo, uhi) = range(&|p| p.utility);
    let scale = |v: f64, lo: f64, hi: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
    for p in group.iter_mut() {
        p.privacy_norm = scale(p.privacy_surrogate, plo, phi);
        p.utility_norm = scale(p.utility, ulo, uhi);
    }
}

pub fn tradeoff_table(points: &[TradeoffPoint]) -> Table {
    let mut t = Table::new(
        [
            "mechanism",
            "backend",
            "eps_x",
            "privacy_surrogate",
            "privacy_surrogate_se",
            "privacy_vol",
            "privacy_vol_se",
            "utility",
            "utility_se",
            // min-max scaled by the gaussian sweep of the same backend
            "privacy_norm_gaussian_scale",
            "utility_norm_gaussian_scale",
        ]
        .map(String::from)
        .to_vec(),
    );
    for p in points {
        let mut row = vec![p.mechanism.to_string(), p.backend.to_string()];
        for v in [
            p.eps_x,
            p.privacy_surrogate,
            p.privacy_surrogate_se,
            p.privacy_vol,
            p.privacy_vol_se,
            p.utility,
            p.utility_se,
            p.privacy_norm,
            p.utility_norm,
        ] {
            row.push(sig9(v));
        }
        t.rows.push(row);
    }
    t
}

pub fn run_tradeoff(cfg: &ExperimentConfig) -> Result<Table> {
    Ok(tradeoff_table(&tradeoff_points(cfg)?))
}

/// Violation counts per check over an audit.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AuditSummary {
    pub steps: usize,
    pub violations: Vec<(String, usize)>,
    /// Largest residual per check (positive values are violations).
    pub worst_residual: Vec<(String, f64)>,
}

impl AuditSummary {
    pub fn total_violations(&self) -> usize {
        self.violations.iter().map(|(_, v)| v).sum()
    }

    pub fn passed(&self) -> bool {
        self.total_violations() == 0
    }
}

impl fmt::Display for AuditSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "audited steps: {}", self.steps)?;
        for ((name, v), (_, w)) in self.violations.iter().zip(&self.worst_residual) {
            writeln!(f, "{name:>18}: {v} violations, worst residual {}", sig9(*w))?;
        }
        write!(f, "{}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// Bound checks on every step of every run and budget, for the configured mechanism.
/// Soundness columns are counted only for mechanisms that always release the true state.
pub fn run_bound_audit(cfg: &ExperimentConfig) -> Result<(Table, AuditSummary)> {
    let model = cfg.model()?;
    let episodes = run_episodes(cfg, &model, &[cfg.mechanism])?;
    let mut names: Vec<String> = CHECK_NAMES.iter().map(|s| s.to_string()).collect();
    if cfg.mechanism.is_truthful() {
        names.push("soundness".into());
    }
    let mut h: Vec<String> = ["mechanism", "eps_x", "run", "k"].map(String::from).to_vec();
    h.extend(CHECK_NAMES.iter().map(|c| format!("{c}_residual")));
    h.push("soundness".into());
    let mut table = Table::new(h);
    let mut violations = vec![0usize; names.len()];
    let mut worst = vec![f64::NEG_INFINITY; names.len()];
    let mut steps = 0;
    for ep in &episodes {
        for s in ep.steps.iter().filter(|s| s.k > 0) {
            let rep = s.report.as_ref().expect("report after k = 0");
            steps += 1;
            for (i, name) in CHECK_NAMES.iter().enumerate() {
                let c = rep.check(name).expect("check present");
                worst[i] = worst[i].max(c.residual);
                violations[i] += (!c.holds) as usize;
            }
            let sound = s.x_sound && s.y_sound && s.nested;
            if cfg.mechanism.is_truthful() {
                let i = names.len() - 1;
                worst[i] = worst[i].max(if sound { 0.0 } else { 1.0 });
                violations[i] += (!sound) as usize;
            }
            let mut row = vec![
                ep.mechanism.to_string(),
                sig9(ep.eps_x),
                ep.run.to_string(),
                s.k.to_string(),
            ];
            check_residuals(&mut row, Some(rep));
            row.push(bool01(sound).into());
            table.rows.push(row);
        }
    }
    let summary = AuditSummary {
        steps,
        violations: names.iter().cloned().zip(violations).collect(),
        worst_residual: names.into_iter().zip(worst).collect(),
    };
    Ok((table, summary))
}

/// The release LP at `k = 1` of run 0 with the first budget, as text.
pub fn lp_dump(cfg: &ExperimentConfig) -> Result<String> {
    let model = cfg.model()?;
    let eps = cfg.eps_x[0];
    let traj = simulate(
        model.system(),
        1,
        &mut RngStream::new(cfg.seed, trajectory_stream(0)),
    )?;
    let mut fs = FilterState::new(eps, RngStream::new(cfg.seed, mechanism_stream(0)))?;
    fs.filter_step_k0(&model, &traj.xs[0])?;
    let belief = fs.belief.clone().expect("initialized");
    let (x_pred, _) = predict(&belief, &model)?;
    let seed = make_seed_set(&traj.xs[1], &x_pred, eps, &mut fs.rng)?;
    let p2 = build_p2(&model, &belief, &x_pred, &seed, eps)?;
    Ok(format!(
        "# release LP, k = 1, eps_x = {}, seed = {}\n{}",
        sig9(eps),
        cfg.seed,
        p2.problem
    ))
}
