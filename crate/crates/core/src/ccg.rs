//! Constrained convex generators restricted to infinity-norm generator blocks
//! (constrained zonotopes).
//!
//! A set is `{G xi + c : A xi = b, xi in C}` where every block of `C` is a unit
//! infinity-norm ball. Linear maps, Minkowski sums and intersections are exact and purely
//! structural; membership, emptiness and interval hulls each reduce to linear programs.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::interval::Interval;
use crate::lp::{self, LpProblem, LpStatus};

/// One block of the generator domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorBlock {
    /// `||xi_block||_inf <= 1` over `m` coordinates.
    InfBall(usize),
}

impl GeneratorBlock {
    pub fn len(&self) -> usize {
        match self {
            GeneratorBlock::InfBall(m) => *m,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Constraint matrix stored row by row, zero entries omitted.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseRows {
    cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn empty(cols: usize) -> Self {
        SparseRows {
            cols,
            rows: Vec::new(),
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let rows = (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .filter(|&j| m[(i, j)] != 0.0)
                    .map(|j| (j, m[(i, j)]))
                    .collect()
            })
            .collect();
        SparseRows {
            cols: m.ncols(),
            rows,
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows(), self.cols);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] += v;
            }
        }
        m
    }

    fn shifted(&self, offset: usize) -> impl Iterator<Item = Vec<(usize, f64)>> + '_ {
        self.rows
            .iter()
            .map(move |r| r.iter().map(|&(j, v)| (j + offset, v)).collect())
    }

    fn block_diag(a: &SparseRows, b: &SparseRows) -> SparseRows {
        let rows = a.shifted(0).chain(b.shifted(a.cols)).collect();
        SparseRows {
            cols: a.cols + b.cols,
            rows,
        }
    }

    fn push_dense_row(&mut self, coeffs: impl Iterator<Item = f64>) {
        self.rows
            .push(coeffs.enumerate().filter(|(_, v)| *v != 0.0).collect());
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ccg {
    g: DMatrix<f64>,
    c: DVector<f64>,
    a: SparseRows,
    b: DVector<f64>,
    blocks: Vec<GeneratorBlock>,
}

/// Hit-or-miss volume estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolumeEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub hits: usize,
    pub samples: usize,
}

impl Ccg {
    pub fn new(
        g: DMatrix<f64>,
        c: DVector<f64>,
        a: SparseRows,
        b: DVector<f64>,
        blocks: Vec<GeneratorBlock>,
    ) -> Result<Self> {
        let ng = g.ncols();
        check_dim("Ccg::new (center)", g.nrows(), c.len())?;
        check_dim("Ccg::new (constraint columns)", ng, a.ncols())?;
        check_dim("Ccg::new (constraint rows)", a.nrows(), b.len())?;
        let block_total: usize = blocks.iter().map(GeneratorBlock::len).sum();
        check_dim("Ccg::new (generator blocks)", ng, block_total)?;
        if ng > 0 && blocks.is_empty() {
            return Err(Error::InvalidSet("generators without a block".into()));
        }
        if a.rows.iter().flatten().any(|&(j, _)| j >= ng) {
            return Err(Error::InvalidSet("constraint entry out of range".into()));
        }
        Ok(Ccg { g, c, a, b, blocks })
    }

    /// Box as a zonotope: `G = diag(radius)`, `c = center`, one block, no constraints.
    pub fn from_interval(iv: &Interval) -> Ccg {
        let n = iv.dim();
        Ccg {
            g: DMatrix::from_diagonal(&iv.radius()),
            c: iv.center(),
            a: SparseRows::empty(n),
            b: DVector::zeros(0),
            blocks: vec![GeneratorBlock::InfBall(n)],
        }
    }

    /// Singleton `{p}` with no generators.
    pub fn point(p: DVector<f64>) -> Ccg {
        Ccg {
            g: DMatrix::zeros(p.len(), 0),
            c: p,
            a: SparseRows::empty(0),
            b: DVector::zeros(0),
            blocks: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    /// Number of generators.
    pub fn ng(&self) -> usize {
        self.g.ncols()
    }

    /// Number of equality constraints.
    pub fn nc(&self) -> usize {
        self.a.nrows()
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn constraints(&self) -> (&SparseRows, &DVector<f64>) {
        (&self.a, &self.b)
    }

    pub fn blocks(&self) -> &[GeneratorBlock] {
        &self.blocks
    }

    /// `R Z = (R G, R c, A, b, C)`.
    pub fn linear_map(&self, r: &DMatrix<f64>) -> Result<Ccg> {
        check_dim("Ccg::linear_map", r.ncols(), self.dim())?;
        Ok(Ccg {
            g: r * &self.g,
            c: r * &self.c,
            a: self.a.clone(),
            b: self.b.clone(),
            blocks: self.blocks.clone(),
        })
    }

    pub fn minkowski_sum(&self, other: &Ccg) -> Result<Ccg> {
        check_dim("Ccg::minkowski_sum", self.dim(), other.dim())?;
        let n = self.dim();
        let mut g = DMatrix::zeros(n, self.ng() + other.ng());
        g.columns_mut(0, self.ng()).copy_from(&self.g);
        g.columns_mut(self.ng(), other.ng()).copy_from(&other.g);
        let b = DVector::from_iterator(
            self.nc() + other.nc(),
            self.b.iter().chain(other.b.iter()).copied(),
        );
        Ok(Ccg {
            g,
            c: &self.c + &other.c,
            a: SparseRows::block_diag(&self.a, &other.a),
            b,
            blocks: self.blocks.iter().chain(&other.blocks).copied().collect(),
        })
    }

    /// Intersection: keeps `self`'s generators, appends `other`'s as constrained extras and
    /// ties the two parameterizations together with `G_x xi_x - G_y xi_y = c_y - c_x`.
    pub fn intersect(&self, other: &Ccg) -> Result<Ccg> {
        check_dim("Ccg::intersect", self.dim(), other.dim())?;
        let n = self.dim();
        let (nx, ny) = (self.ng(), other.ng());
        let mut g = DMatrix::zeros(n, nx + ny);
        g.columns_mut(0, nx).copy_from(&self.g);
        let mut a = SparseRows::block_diag(&self.a, &other.a);
        for i in 0..n {
            a.push_dense_row(
                self.g
                    .row(i)
                    .iter()
                    .copied()
                    .chain(other.g.row(i).iter().map(|v| -v)),
            );
        }
        let tie = &other.c - &self.c;
        let b = DVector::from_iterator(
            self.nc() + other.nc() + n,
            self.b.iter().chain(other.b.iter()).chain(tie.iter()).copied(),
        );
        Ok(Ccg {
            g,
            c: self.c.clone(),
            a,
            b,
            blocks: self.blocks.iter().chain(&other.blocks).copied().collect(),
        })
    }

    /// `xi` in the unit box with `A xi = b`, no objective.
    fn base_problem(&self) -> LpProblem {
        let mut p = LpProblem::new();
        for j in 0..self.ng() {
            p.add_var(format!("xi{j}"), 0.0, -1.0, 1.0);
        }
        for (row, &rhs) in self.a.rows.iter().zip(self.b.iter()) {
            p.add_eq(row.clone(), rhs);
        }
        p
    }

    fn g_row(&self, i: usize) -> Vec<(usize, f64)> {
        self.g
            .row(i)
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .collect()
    }

    /// Whether `point` belongs to the set, decided by one feasibility LP.
    pub fn is_member(&self, point: &DVector<f64>) -> Result<bool> {
        check_dim("Ccg::is_member", self.dim(), point.len())?;
        let mut p = self.base_problem();
        for i in 0..self.dim() {
            p.add_eq(self.g_row(i), point[i] - self.c[i]);
        }
        feasibility(&p)
    }

    pub fn is_empty(&self) -> Result<bool> {
        Ok(!feasibility(&self.base_problem())?)
    }

    /// Per-coordinate extremes of `G xi + c` over the feasible `xi`: `2n` LPs.
    pub fn interval_hull(&self) -> Result<Interval> {
        let n = self.dim();
        let mut lower = DVector::zeros(n);
        let mut upper = DVector::zeros(n);
        let base = self.base_problem();
        for i in 0..n {
            let row = self.g.row(i);
            for (sign, out) in [(1.0, &mut lower), (-1.0, &mut upper)] {
                let mut p = base.clone();
                for (j, v) in row.iter().enumerate() {
                    p.objective[j] = sign * v;
                }
                let sol = lp::solve(&p)?;
                match sol.status {
                    LpStatus::Optimal => out[i] = sign * sol.objective_value + self.c[i],
                    LpStatus::Infeasible => return Err(Error::EmptySet),
                    _ => {
                        return Err(Error::Solver {
                            status: sol.status.to_string(),
                            detail: sol.diagnostics.unwrap_or_default(),
                        })
                    }
                }
            }
        }
        // LP round-off can cross over on flat coordinates.
        for i in 0..n {
            if lower[i] > upper[i] {
                let mid = 0.5 * (lower[i] + upper[i]);
                lower[i] = mid;
                upper[i] = mid;
            }
        }
        Interval::new(lower, upper)
    }

    /// Hit-or-miss estimate: uniform samples in the interval hull, counted by membership.
    pub fn mc_volume<R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> Result<VolumeEstimate> {
        if samples == 0 {
            return Err(Error::Precondition("at least one sample is required".into()));
        }
        let hull = self.interval_hull()?;
        let hull_vol = hull.volume();
        if hull_vol == 0.0 {
            return Ok(VolumeEstimate {
                estimate: 0.0,
                std_error: 0.0,
                hits: 0,
                samples,
            });
        }
        let mut hits = 0usize;
        for _ in 0..samples {
            let p = DVector::from_fn(self.dim(), |i, _| {
                rng.random_range(hull.lower()[i]..=hull.upper()[i])
            });
            if self.is_member(&p)? {
                hits += 1;
            }
        }
        let frac = hits as f64 / samples as f64;
        Ok(VolumeEstimate {
            estimate: hull_vol * frac,
            std_error: hull_vol * (frac * (1.0 - frac) / samples as f64).sqrt(),
            hits,
            samples,
        })
    }
}

fn feasibility(p: &LpProblem) -> Result<bool> {
    if p.num_vars() == 0 {
        return Ok(p.eq.iter().all(|r| r.rhs.abs() <= lp::FEAS_TOL));
    }
    let sol = lp::solve(p)?;
    match sol.status {
        LpStatus::Optimal => Ok(true),
        LpStatus::Infeasible => Ok(false),
        status => Err(Error::Solver {
            status: status.to_string(),
            detail: sol.diagnostics.unwrap_or_default(),
        }),
    }
}
