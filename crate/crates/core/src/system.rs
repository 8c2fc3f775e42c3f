//! The linear model, its disturbances, and ground-truth simulation.
//!
//! State update for public `x` and private `y`:
//!
//! ```text
//! x_k = A1 x_{k-1} + A2 y_{k-1} + B1 wx_k
//! y_k = A3 x_{k-1} + A4 y_{k-1} + B2 wy_k
//! ```

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;

/// Deterministic random stream addressed by `(seed, stream)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// How realized disturbances are drawn inside their bound boxes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceModel {
    /// Independent uniform draws per coordinate.
    #[default]
    Uniform,
    /// Periodic demand fluctuation of the production-inventory example (2-D only).
    CaseStudy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSystem {
    #[serde(with = "row_major")]
    pub a1: DMatrix<f64>,
    #[serde(with = "row_major")]
    pub a2: DMatrix<f64>,
    #[serde(with = "row_major")]
    pub a3: DMatrix<f64>,
    #[serde(with = "row_major")]
    pub a4: DMatrix<f64>,
    #[serde(with = "row_major")]
    pub b1: DMatrix<f64>,
    #[serde(with = "row_major")]
    pub b2: DMatrix<f64>,
    pub wx_bounds: Interval,
    pub wy_bounds: Interval,
    pub x0_bounds: Interval,
    pub y0_bounds: Interval,
    #[serde(default)]
    pub disturbance: DisturbanceModel,
}

/// Smallest `|det|` accepted for `A1` and `A2`.
pub const DET_TOL: f64 = 1e-12;

impl LinearSystem {
    pub fn nx(&self) -> usize {
        self.a1.nrows()
    }

    pub fn ny(&self) -> usize {
        self.a4.nrows()
    }

    /// Every violated invariant, by field name.
    pub fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        let nx = self.a1.nrows();
        let ny = self.a4.nrows();
        let mut shape = |name: &str, m: &DMatrix<f64>, r: usize, c: usize| {
            if m.nrows() != r || m.ncols() != c {
                out.push(format!(
                    "{name}: expected {r}x{c}, found {}x{}",
                    m.nrows(),
                    m.ncols()
                ));
                false
            } else {
                true
            }
        };
        let a1_ok = shape("a1", &self.a1, nx, nx);
        let a2_ok = shape("a2", &self.a2, nx, ny);
        shape("a3", &self.a3, ny, nx);
        shape("a4", &self.a4, ny, ny);
        let b1_ok = shape("b1", &self.b1, nx, self.b1.ncols());
        let b2_ok = shape("b2", &self.b2, ny, self.b2.ncols());

        for (name, m) in [
            ("a1", &self.a1),
            ("a2", &self.a2),
            ("a3", &self.a3),
            ("a4", &self.a4),
            ("b1", &self.b1),
            ("b2", &self.b2),
        ] {
            if m.iter().any(|v| !v.is_finite()) {
                out.push(format!("{name}: non-finite entry"));
            }
        }
        if a1_ok && self.a1.determinant().abs() <= DET_TOL {
            out.push("a1: singular (|det| <= 1e-12)".into());
        }
        if a2_ok {
            if nx != ny {
                out.push(format!("a2: must be square to be invertible, found {nx}x{ny}"));
            } else if self.a2.determinant().abs() <= DET_TOL {
                out.push("a2: singular (|det| <= 1e-12)".into());
            }
        }
        let mut dim = |name: &str, iv: &Interval, n: usize| {
            if iv.dim() != n {
                out.push(format!("{name}: expected dimension {n}, found {}", iv.dim()));
            }
        };
        if b1_ok {
            dim("wx_bounds", &self.wx_bounds, self.b1.ncols());
        }
        if b2_ok {
            dim("wy_bounds", &self.wy_bounds, self.b2.ncols());
        }
        dim("x0_bounds", &self.x0_bounds, nx);
        dim("y0_bounds", &self.y0_bounds, ny);
        if self.disturbance == DisturbanceModel::CaseStudy
            && (self.wx_bounds.dim() != 2 || self.wy_bounds.dim() != 2)
        {
            out.push("disturbance: case_study model needs 2-D disturbances".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSystem(issues))
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let sys: LinearSystem = toml::from_str(s)?;
        sys.validate()?;
        Ok(sys)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("system serializes")
    }
}

/// The production-inventory example: `x` is inventory (public), `y` the production
/// rate (private).
pub fn case_study_preset() -> LinearSystem {
    let m = |rows: &[[f64; 2]; 2]| DMatrix::from_fn(2, 2, |i, j| rows[i][j]);
    let iv = |lo: [f64; 2], hi: [f64; 2]| Interval::from_slices(&lo, &hi).expect("preset box");
    LinearSystem {
        a1: DMatrix::identity(2, 2),
        a2: m(&[[0.40, 0.80], [0.60, 0.20]]),
        a3: m(&[[0.50, -0.90], [-0.10, -0.10]]),
        a4: m(&[[-0.10, -0.90], [0.10, 0.00]]),
        b1: -DMatrix::identity(2, 2),
        b2: m(&[[4.20, 0.0], [0.0, 2.40]]),
        wx_bounds: iv([1.74, 1.91], [1.94, 2.01]),
        wy_bounds: iv([0.91, 0.23], [0.95, 0.43]),
        x0_bounds: iv([1.00, 0.24], [1.20, 0.40]),
        y0_bounds: iv([2.40, 0.60], [3.70, 1.30]),
        disturbance: DisturbanceModel::CaseStudy,
    }
}

fn uniform_in<R: RngCore + ?Sized>(iv: &Interval, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(iv.dim(), |i, _| {
        let (lo, hi) = (iv.lower()[i], iv.upper()[i]);
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..=hi)
        }
    })
}

/// Realized `(wx_k, wy_k)`.
pub fn sample_disturbance<R: RngCore + ?Sized>(
    sys: &LinearSystem,
    k: usize,
    rng: &mut R,
) -> (DVector<f64>, DVector<f64>) {
    match sys.disturbance {
        DisturbanceModel::Uniform => (uniform_in(&sys.wx_bounds, rng), uniform_in(&sys.wy_bounds, rng)),
        DisturbanceModel::CaseStudy => {
            let k = k as f64;
            let rho: f64 = rng.random();
            let gamma: f64 = rng.random();
            let tau: f64 = rng.random();
            let wx = DVector::from_vec(vec![
                1.88 + 0.03 * (2.0 * PI * k / (30.0 + 7.0 * rho)).cos(),
                1.94,
            ]);
            let wy = DVector::from_vec(vec![
                0.944 + 0.006 * (2.0 * PI * k / (7.0 + 2.0 * gamma)).cos(),
                0.33 + 0.094 * (2.0 * PI * k / (7.0 + 4.0 * tau)).sin(),
            ]);
            (wx, wy)
        }
    }
}

/// Ground truth over `k = 0..=K`. `wxs[k - 1]` and `wys[k - 1]` drive step `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub xs: Vec<DVector<f64>>,
    pub ys: Vec<DVector<f64>>,
    pub wxs: Vec<DVector<f64>>,
    pub wys: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.wxs.len()
    }
}

pub fn step_state(
    sys: &LinearSystem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    wx: &DVector<f64>,
    wy: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    (
        &sys.a1 * x + &sys.a2 * y + &sys.b1 * wx,
        &sys.a3 * x + &sys.a4 * y + &sys.b2 * wy,
    )
}

pub fn simulate<R: RngCore + ?Sized>(sys: &LinearSystem, horizon: usize, rng: &mut R) -> Result<Trajectory> {
    sys.validate()?;
    if horizon == 0 {
        return Err(Error::Precondition("horizon must be at least 1".into()));
    }
    let mut xs = vec![uniform_in(&sys.x0_bounds, rng)];
    let mut ys = vec![uniform_in(&sys.y0_bounds, rng)];
    let mut wxs = Vec::with_capacity(horizon);
    let mut wys = Vec::with_capacity(horizon);
    for k in 1..=horizon {
        let (wx, wy) = sample_disturbance(sys, k, rng);
        let (x, y) = step_state(sys, &xs[k - 1], &ys[k - 1], &wx, &wy);
        xs.push(x);
        ys.push(y);
        wxs.push(wx);
        wys.push(wy);
    }
    Ok(Trajectory { xs, ys, wxs, wys })
}

/// Matrices as lists of rows in config files.
mod row_major {
    use nalgebra::DMatrix;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if nrows == 0 || ncols == 0 {
            return Err(D::Error::custom("matrix must be non-empty"));
        }
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("matrix rows have unequal lengths"));
        }
        Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }
}
