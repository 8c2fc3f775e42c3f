//! Axis-aligned boxes and the interval arithmetic used by the inference recursion.
//!
//! An [`Interval`] is stored as a pair of bound vectors. It is never empty: an empty
//! intersection is reported as `None` by [`Interval::intersect`] instead of as a box with
//! inverted bounds.
//!
//! Images of boxes under linear maps are computed with [`PsiMatrix`], which splits a
//! matrix into its nonnegative and nonpositive parts so that the tightest enclosing box
//! of `{A v : v in X}` is a single linear map applied to the stacked bounds.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntervalRepr", into = "IntervalRepr")]
pub struct Interval {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct IntervalRepr {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<IntervalRepr> for Interval {
    type Error = Error;

    fn try_from(r: IntervalRepr) -> Result<Self> {
        Interval::from_slices(&r.lower, &r.upper)
    }
}

impl From<Interval> for IntervalRepr {
    fn from(iv: Interval) -> Self {
        IntervalRepr {
            lower: iv.lower.iter().copied().collect(),
            upper: iv.upper.iter().copied().collect(),
        }
    }
}

/// Bound pair produced by [`Interval::difference`]. The entries are signed and need not be
/// ordered, so this is deliberately not an [`Interval`].
#[derive(Clone, Debug, PartialEq)]
pub struct SignedBounds {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl SignedBounds {
    /// Clamp to the shape of a removed slab: lower entries to `min{., 0}` and upper
    /// entries to `max{., 0}`.
    pub fn clamped(&self) -> SignedBounds {
        SignedBounds {
            lower: self.lower.map(|v| v.min(0.0)),
            upper: self.upper.map(|v| v.max(0.0)),
        }
    }

    /// Sum of the absolute values of all stacked entries.
    pub fn stacked_norm1(&self) -> f64 {
        self.lower.iter().chain(self.upper.iter()).map(|v| v.abs()).sum()
    }

    /// Total width `sum(upper - lower)`.
    pub fn total_width(&self) -> f64 {
        (&self.upper - &self.lower).sum()
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }
}

impl Interval {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        check_dim("Interval::new", lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::InvalidInterval("dimension must be at least 1".into()));
        }
        for i in 0..lower.len() {
            let (lo, hi) = (lower[i], upper[i]);
            if lo.is_nan() || hi.is_nan() {
                return Err(Error::InvalidInterval(format!("NaN bound in coordinate {i}")));
            }
            if lo > hi {
                return Err(Error::InvalidInterval(format!(
                    "lower {lo} exceeds upper {hi} in coordinate {i}"
                )));
            }
        }
        Ok(Interval { lower, upper })
    }

    pub fn from_slices(lower: &[f64], upper: &[f64]) -> Result<Self> {
        Self::new(
            DVector::from_column_slice(lower),
            DVector::from_column_slice(upper),
        )
    }

    /// Degenerate box `{p}`.
    pub fn point(p: DVector<f64>) -> Self {
        Interval {
            lower: p.clone(),
            upper: p,
        }
    }

    pub fn from_center_radius(center: &DVector<f64>, radius: &DVector<f64>) -> Result<Self> {
        Self::new(center - radius, center + radius)
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.upper + &self.lower) / 2.0
    }

    pub fn radius(&self) -> DVector<f64> {
        (&self.upper - &self.lower) / 2.0
    }

    pub fn widths(&self) -> DVector<f64> {
        &self.upper - &self.lower
    }

    /// Lebesgue measure: product of the widths.
    pub fn volume(&self) -> f64 {
        self.widths().iter().product()
    }

    /// Total edge length: sum of the widths.
    pub fn surrogate_volume(&self) -> f64 {
        self.widths().sum()
    }

    pub fn minkowski_sum(&self, other: &Interval) -> Result<Interval> {
        check_dim("Interval::minkowski_sum", self.dim(), other.dim())?;
        Ok(Interval {
            lower: &self.lower + &other.lower,
            upper: &self.upper + &other.upper,
        })
    }

    /// Elementwise bound differences `(self.lower - other.lower, self.upper - other.upper)`.
    /// Only meaningful for volume bookkeeping.
    pub fn difference(&self, other: &Interval) -> Result<SignedBounds> {
        check_dim("Interval::difference", self.dim(), other.dim())?;
        Ok(SignedBounds {
            lower: &self.lower - &other.lower,
            upper: &self.upper - &other.upper,
        })
    }

    /// Intersection, or `None` when some coordinate comes out with lower > upper.
    pub fn intersect(&self, other: &Interval) -> Result<Option<Interval>> {
        check_dim("Interval::intersect", self.dim(), other.dim())?;
        let lower = self.lower.zip_map(&other.lower, f64::max);
        let upper = self.upper.zip_map(&other.upper, f64::min);
        if lower.iter().zip(upper.iter()).any(|(lo, hi)| lo > hi) {
            return Ok(None);
        }
        Ok(Some(Interval { lower, upper }))
    }

    pub fn contains(&self, point: &DVector<f64>) -> Result<bool> {
        check_dim("Interval::contains", self.dim(), point.len())?;
        Ok((0..self.dim()).all(|i| self.lower[i] <= point[i] && point[i] <= self.upper[i]))
    }

    /// Point containment with an absolute slack `tol` on every bound.
    pub fn contains_within(&self, point: &DVector<f64>, tol: f64) -> Result<bool> {
        check_dim("Interval::contains_within", self.dim(), point.len())?;
        Ok((0..self.dim()).all(|i| self.lower[i] - tol <= point[i] && point[i] <= self.upper[i] + tol))
    }

    /// Intersection that treats boxes overlapping by less than `-tol` in some coordinate
    /// as touching: such coordinates collapse to the midpoint of the crossed bounds.
    pub fn intersect_touching(&self, other: &Interval, tol: f64) -> Result<Option<Interval>> {
        check_dim("Interval::intersect_touching", self.dim(), other.dim())?;
        let mut lower = self.lower.zip_map(&other.lower, f64::max);
        let mut upper = self.upper.zip_map(&other.upper, f64::min);
        for i in 0..lower.len() {
            if lower[i] > upper[i] {
                if lower[i] - upper[i] > tol {
                    return Ok(None);
                }
                let mid = 0.5 * (lower[i] + upper[i]);
                lower[i] = mid;
                upper[i] = mid;
            }
        }
        Ok(Some(Interval { lower, upper }))
    }

    /// Containment up to an absolute slack `tol` on every bound.
    pub fn is_subset_of(&self, other: &Interval, tol: f64) -> bool {
        self.dim() == other.dim()
            && (0..self.dim())
                .all(|i| self.lower[i] >= other.lower[i] - tol && self.upper[i] <= other.upper[i] + tol)
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &Interval) -> Result<Interval> {
        check_dim("Interval::hull", self.dim(), other.dim())?;
        Ok(Interval {
            lower: self.lower.zip_map(&other.lower, f64::min),
            upper: self.upper.zip_map(&other.upper, f64::max),
        })
    }

    /// Image under `m` as the tightest enclosing box.
    pub fn mapped(&self, m: &DMatrix<f64>) -> Result<Interval> {
        PsiMatrix::new(m.clone()).apply(self)
    }
}

/// A matrix together with its positive/negative split, used to push boxes through linear
/// maps without loss beyond the enclosing box.
#[derive(Clone, Debug, PartialEq)]
pub struct PsiMatrix {
    base: DMatrix<f64>,
}

impl PsiMatrix {
    pub fn new(base: DMatrix<f64>) -> Self {
        PsiMatrix { base }
    }

    pub fn base(&self) -> &DMatrix<f64> {
        &self.base
    }

    /// `(base + |base|) / 2`
    pub fn pos(&self) -> DMatrix<f64> {
        self.base.map(|v| v.max(0.0))
    }

    /// `(base - |base|) / 2`
    pub fn neg(&self) -> DMatrix<f64> {
        self.base.map(|v| v.min(0.0))
    }

    pub fn abs(&self) -> DMatrix<f64> {
        self.base.abs()
    }

    pub fn apply(&self, iv: &Interval) -> Result<Interval> {
        let (lower, upper) = self.apply_bounds(iv.lower(), iv.upper())?;
        Ok(Interval { lower, upper })
    }

    /// Same stacked-bound map applied to a signed pair.
    pub fn apply_signed(&self, sb: &SignedBounds) -> Result<SignedBounds> {
        let (lower, upper) = self.apply_bounds(&sb.lower, &sb.upper)?;
        Ok(SignedBounds { lower, upper })
    }

    fn apply_bounds(
        &self,
        lower: &DVector<f64>,
        upper: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        check_dim("PsiMatrix::apply", self.base.ncols(), lower.len())?;
        let (pos, neg) = (self.pos(), self.neg());
        Ok((&pos * lower + &neg * upper, &neg * lower + &pos * upper))
    }
}
