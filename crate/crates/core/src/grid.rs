//! Regular grids on R^d, piecewise-constant densities and cell masks.
//!
//! Cell values are stored flat in row-major order with the last axis fastest.
//! Cells are half-open boxes `[lo + i*w, lo + (i+1)*w)` on every axis.

use crate::error::{Error, Result};
use crate::summation::{compensated_sum, NeumaierSum};

/// Tolerance on unit mass for anything flagged as a probability density.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Relative tolerance when comparing cell widths of two grids.
pub const CELL_WIDTH_TOLERANCE: f64 = 1e-9;

/// Points within this fraction of a cell width below a cell boundary are
/// assigned to the upper cell. Keeps lookups of lattice points stable.
const LOCATE_NUDGE: f64 = 1e-9;

/// Axis-aligned box partitioned into `counts[a]` equal cells along axis `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    extents: Vec<(f64, f64)>,
    counts: Vec<usize>,
    widths: Vec<f64>,
    cell_volume: f64,
    len: usize,
}

impl GridSpec {
    pub fn new(extents: Vec<(f64, f64)>, counts: Vec<usize>) -> Result<Self> {
        if extents.is_empty() {
            return Err(Error::InvalidGrid("dimension must be at least 1".into()));
        }
        if extents.len() != counts.len() {
            return Err(Error::InvalidGrid(format!(
                "{} extents but {} counts",
                extents.len(),
                counts.len()
            )));
        }
        let mut widths = Vec::with_capacity(counts.len());
        let mut len: usize = 1;
        for (axis, (&(lo, hi), &count)) in extents.iter().zip(&counts).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: need finite lo < hi, got [{lo}, {hi}]"
                )));
            }
            if count == 0 {
                return Err(Error::InvalidGrid(format!("axis {axis}: zero cells")));
            }
            len = len.checked_mul(count).ok_or_else(|| {
                Error::InvalidGrid("total cell count overflows the address space".into())
            })?;
            widths.push((hi - lo) / count as f64);
        }
        if len > isize::MAX as usize / std::mem::size_of::<f64>() {
            return Err(Error::InvalidGrid(format!(
                "{len} cells cannot be addressed"
            )));
        }
        let cell_volume: f64 = widths.iter().product();
        if !(cell_volume.is_finite() && cell_volume > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "cell volume {cell_volume} is not positive and finite"
            )));
        }
        Ok(Self {
            extents,
            counts,
            widths,
            cell_volume,
            len,
        })
    }

    /// Same interval and cell count on every axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, count: usize) -> Result<Self> {
        Self::new(vec![(lo, hi); dim], vec![count; dim])
    }

    /// Grid centred at `center` with the given cell width and counts per axis.
    pub fn with_cell_width(center: &[f64], width: f64, counts: &[usize]) -> Result<Self> {
        if center.len() != counts.len() {
            return Err(Error::InvalidGrid(
                "center and counts differ in length".into(),
            ));
        }
        let extents = center
            .iter()
            .zip(counts)
            .map(|(&c, &n)| {
                let half = 0.5 * width * n as f64;
                (c - half, c + half)
            })
            .collect();
        Self::new(extents, counts.to_vec())
    }

    /// Origin-centred grid with cell width `width` and `counts[a]` cells per axis.
    pub fn centered(width: f64, counts: &[usize]) -> Result<Self> {
        Self::with_cell_width(&vec![0.0; counts.len()], width, counts)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn extents(&self) -> &[(f64, f64)] {
        &self.extents
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn cell_widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn volume(&self) -> f64 {
        self.cell_volume * self.len as f64
    }

    pub fn midpoint(&self, axis: usize) -> f64 {
        let (lo, hi) = self.extents[axis];
        0.5 * (lo + hi)
    }

    pub fn is_origin_centered(&self) -> bool {
        self.extents
            .iter()
            .all(|&(lo, hi)| (lo + hi).abs() <= 1e-12 * (hi - lo))
    }

    pub fn require_origin_centered(&self) -> Result<()> {
        for (axis, &(lo, hi)) in self.extents.iter().enumerate() {
            if (lo + hi).abs() > 1e-12 * (hi - lo) {
                return Err(Error::NotOriginCentered { axis, lo, hi });
            }
        }
        Ok(())
    }

    /// True when both grids have the same dimension and matching cell widths.
    pub fn same_cell_widths(&self, other: &GridSpec) -> bool {
        self.dim() == other.dim()
            && self
                .widths
                .iter()
                .zip(&other.widths)
                .all(|(a, b)| (a - b).abs() <= CELL_WIDTH_TOLERANCE * a.abs().max(b.abs()))
    }

    /// Centre coordinate of cell `i` along `axis`.
    ///
    /// Computed as `mid + (i + 1/2 - n/2) * w` so that centres of an
    /// origin-centred grid are exactly symmetric.
    #[inline]
    pub fn axis_center(&self, axis: usize, i: usize) -> f64 {
        let n = self.counts[axis] as f64;
        self.midpoint(axis) + (i as f64 + 0.5 - 0.5 * n) * self.widths[axis]
    }

    /// Multi-index of a flat cell index (row-major, last axis fastest).
    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for axis in (0..self.dim()).rev() {
            let n = self.counts[axis];
            out[axis] = flat % n;
            flat /= n;
        }
    }

    pub fn ravel(&self, index: &[usize]) -> usize {
        index
            .iter()
            .zip(&self.counts)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn cell_center_into(&self, flat: usize, out: &mut [f64]) {
        let mut idx = vec![0; self.dim()];
        self.unravel(flat, &mut idx);
        for (axis, &i) in idx.iter().enumerate() {
            out[axis] = self.axis_center(axis, i);
        }
    }

    pub fn cell_center(&self, flat: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.cell_center_into(flat, &mut out);
        out
    }

    /// Per-axis table of cell-centre coordinates.
    pub fn center_table(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|a| {
                (0..self.counts[a])
                    .map(|i| self.axis_center(a, i))
                    .collect()
            })
            .collect()
    }

    /// Cell index along `axis` containing coordinate `x`, if any.
    #[inline]
    pub fn locate_axis(&self, axis: usize, x: f64) -> Option<usize> {
        let lo = self.extents[axis].0;
        let t = (x - lo) / self.widths[axis] + LOCATE_NUDGE;
        if !(t >= 0.0) {
            return None;
        }
        let i = t.floor() as usize;
        (i < self.counts[axis]).then_some(i)
    }

    /// Flat index of the cell containing `point`, or `None` outside the grid.
    pub fn locate(&self, point: &[f64]) -> Option<usize> {
        let mut flat = 0usize;
        for (axis, &x) in point.iter().enumerate() {
            let i = self.locate_axis(axis, x)?;
            flat = flat * self.counts[axis] + i;
        }
        Some(flat)
    }

    /// Cells ordered by distance of their centre from the origin, ties broken
    /// by row-major index. Requires an origin-centred grid.
    ///
    /// When every axis has the same cell width the distance is compared as an
    /// exact integer (squared distance in half-cell units), so geometrically
    /// equidistant centres always tie.
    pub fn radial_order(&self) -> Result<Vec<usize>> {
        self.require_origin_centered()?;
        let keys = self.radial_keys();
        let mut order: Vec<usize> = (0..self.len).collect();
        match keys {
            RadialKeys::Exact(k) => order.sort_by_key(|&i| k[i]),
            RadialKeys::Float(k) => order.sort_by(|&a, &b| k[a].total_cmp(&k[b])),
        }
        Ok(order)
    }

    fn radial_keys(&self) -> RadialKeys {
        let d = self.dim();
        let uniform = self.widths.iter().all(|&w| w == self.widths[0]);
        let mut idx = vec![0usize; d];
        if uniform {
            let keys = (0..self.len)
                .map(|flat| {
                    self.unravel(flat, &mut idx);
                    idx.iter()
                        .zip(&self.counts)
                        .map(|(&i, &n)| {
                            let m = 2 * i as i64 + 1 - n as i64;
                            m * m
                        })
                        .sum::<i64>()
                })
                .collect();
            RadialKeys::Exact(keys)
        } else {
            let keys = (0..self.len)
                .map(|flat| {
                    self.unravel(flat, &mut idx);
                    (0..d)
                        .map(|a| {
                            let c = self.axis_center(a, idx[a]);
                            c * c
                        })
                        .sum::<f64>()
                })
                .collect();
            RadialKeys::Float(keys)
        }
    }

    /// Squared distance keys used by [`GridSpec::radial_order`]; equal keys
    /// mean equidistant centres.
    pub(crate) fn radial_shell_keys(&self) -> Vec<f64> {
        match self.radial_keys() {
            RadialKeys::Exact(k) => k.into_iter().map(|v| v as f64).collect(),
            RadialKeys::Float(k) => k,
        }
    }
}

enum RadialKeys {
    Exact(Vec<i64>),
    Float(Vec<f64>),
}

/// Non-negative piecewise-constant function on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    spec: GridSpec,
    values: Vec<f64>,
}

impl GridDensity {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a grid of {} cells",
                values.len(),
                spec.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::InvalidDensity(format!(
                "cell {i} has value {v}; values must be finite and non-negative"
            )));
        }
        Ok(Self { spec, values })
    }

    /// Like [`GridDensity::new`] but additionally requires unit mass within
    /// [`MASS_TOLERANCE`]. Inputs are never rescaled silently.
    pub fn probability(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        let f = Self::new(spec, values)?;
        let mass = f.integral();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDensity(format!(
                "total mass {mass} is not within {MASS_TOLERANCE:e} of 1"
            )));
        }
        Ok(f)
    }

    pub fn zeros(spec: GridSpec) -> Self {
        let values = vec![0.0; spec.len()];
        Self { spec, values }
    }

    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let mut center = vec![0.0; spec.dim()];
        let values = (0..spec.len())
            .map(|i| {
                spec.cell_center_into(i, &mut center);
                f(&center)
            })
            .collect();
        Self::new(spec, values)
    }

    /// Skips validation; callers guarantee finite non-negative values.
    pub(crate) fn from_parts_unchecked(spec: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        Self { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Σ value × cell volume, compensated, in row-major order.
    pub fn integral(&self) -> f64 {
        compensated_sum(self.values.iter().copied()) * self.spec.cell_volume()
    }

    pub fn is_probability(&self) -> bool {
        (self.integral() - 1.0).abs() <= MASS_TOLERANCE
    }

    /// Essential supremum: the largest cell value, every cell having positive
    /// measure.
    pub fn ess_sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Mass of the density on the cells selected by `mask`.
    pub fn mass_on(&self, mask: &RegionMask) -> Result<f64> {
        if mask.spec() != &self.spec {
            return Err(Error::ShapeMismatch(
                "density and mask live on different grids".into(),
            ));
        }
        let mut acc = NeumaierSum::new();
        for (v, &inc) in self.values.iter().zip(mask.included()) {
            if inc {
                acc.add(*v);
            }
        }
        Ok(acc.value() * self.spec.cell_volume())
    }

    /// Number of cells with value `>= y` (or `> y` when `strict`).
    pub fn superlevel_count(&self, y: f64, strict: bool) -> usize {
        if strict {
            self.values.iter().filter(|&&v| v > y).count()
        } else {
            self.values.iter().filter(|&&v| v >= y).count()
        }
    }

    /// Lebesgue measure of `{f >= y}` (or `{f > y}` when `strict`).
    pub fn superlevel_measure(&self, y: f64, strict: bool) -> f64 {
        self.superlevel_count(y, strict) as f64 * self.spec.cell_volume()
    }

    pub fn superlevel_mask(&self, y: f64, strict: bool) -> RegionMask {
        let included = self
            .values
            .iter()
            .map(|&v| if strict { v > y } else { v >= y })
            .collect();
        RegionMask::from_parts_unchecked(self.spec.clone(), included)
    }

    /// Multiply every value by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.spec.clone(),
            self.values.iter().map(|v| v * c).collect(),
        )
    }

    /// Rescale to unit mass. Opt-in; constructors never do this implicitly.
    pub fn normalize(&self) -> Result<Self> {
        let mass = self.integral();
        if !(mass > 0.0) {
            return Err(Error::InvalidDensity("cannot normalize zero mass".into()));
        }
        self.scaled(1.0 / mass)
    }

    /// Cells with positive value.
    pub fn support(&self) -> RegionMask {
        self.superlevel_mask(0.0, true)
    }
}

/// Measurable set represented as a union of grid cells.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    spec: GridSpec,
    included: Vec<bool>,
}

impl RegionMask {
    pub fn new(spec: GridSpec, included: Vec<bool>) -> Result<Self> {
        if included.len() != spec.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} mask entries for a grid of {} cells",
                included.len(),
                spec.len()
            )));
        }
        Ok(Self { spec, included })
    }

    pub(crate) fn from_parts_unchecked(spec: GridSpec, included: Vec<bool>) -> Self {
        Self { spec, included }
    }

    pub fn empty(spec: GridSpec) -> Self {
        let included = vec![false; spec.len()];
        Self { spec, included }
    }

    pub fn full(spec: GridSpec) -> Self {
        let included = vec![true; spec.len()];
        Self { spec, included }
    }

    /// Cells whose centre satisfies the predicate.
    pub fn from_fn(spec: GridSpec, mut pred: impl FnMut(&[f64]) -> bool) -> Self {
        let mut center = vec![0.0; spec.dim()];
        let included = (0..spec.len())
            .map(|i| {
                spec.cell_center_into(i, &mut center);
                pred(&center)
            })
            .collect();
        Self { spec, included }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn included(&self) -> &[bool] {
        &self.included
    }

    pub fn count(&self) -> usize {
        self.included.iter().filter(|&&b| b).count()
    }

    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.spec.cell_volume()
    }

    pub fn union(&self, other: &RegionMask) -> Result<Self> {
        self.require_same_grid(other)?;
        let included = self
            .included
            .iter()
            .zip(&other.included)
            .map(|(a, b)| *a || *b)
            .collect();
        Ok(Self::from_parts_unchecked(self.spec.clone(), included))
    }

    pub fn is_disjoint(&self, other: &RegionMask) -> Result<bool> {
        self.require_same_grid(other)?;
        Ok(!self
            .included
            .iter()
            .zip(&other.included)
            .any(|(a, b)| *a && *b))
    }

    fn require_same_grid(&self, other: &RegionMask) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::ShapeMismatch("masks live on different grids".into()));
        }
        Ok(())
    }

    /// Transfer onto `target` by cell-centre membership: a target cell is
    /// included when its centre falls in an included cell of this mask.
    /// Cell widths must agree so the transferred set keeps its measure up to
    /// the cells cut by a lattice offset.
    pub fn resample_onto(&self, target: &GridSpec) -> Result<RegionMask> {
        if target == &self.spec {
            return Ok(self.clone());
        }
        if !self.spec.same_cell_widths(target) {
            return Err(Error::ShapeMismatch(
                "mask and target grid have different cell widths".into(),
            ));
        }
        let mut center = vec![0.0; target.dim()];
        let included = (0..target.len())
            .map(|i| {
                target.cell_center_into(i, &mut center);
                self.spec.locate(&center).is_some_and(|j| self.included[j])
            })
            .collect();
        Ok(Self::from_parts_unchecked(target.clone(), included))
    }
}

/// Volume of the unit ball in R^d, π^{d/2} / Γ(d/2 + 1), via the two-step
/// recursion V_d = V_{d-2} · 2π / d.
pub fn unit_ball_volume(d: usize) -> f64 {
    let (mut v, start) = if d.is_multiple_of(2) { (1.0, 2) } else { (2.0, 3) };
    let mut k = start;
    while k <= d {
        v *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    v
}

pub fn ball_volume(d: usize, r: f64) -> f64 {
    unit_ball_volume(d) * r.powi(d as i32)
}

/// Radius of the d-ball with volume `v`.
pub fn ball_radius_for_volume(d: usize, v: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::Precondition("dimension must be at least 1".into()));
    }
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Precondition(format!(
            "volume must be positive, got {v}"
        )));
    }
    Ok((v / unit_ball_volume(d)).powf(1.0 / d as f64))
}

/// The `k = round(v / cell_volume)` cells nearest the origin, ties broken by
/// row-major index. Its measure differs from `v` by at most half a cell.
pub fn centered_ball_mask(spec: &GridSpec, v: f64) -> Result<RegionMask> {
    spec.require_origin_centered()?;
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::Precondition(format!(
            "volume must be non-negative, got {v}"
        )));
    }
    let available = spec.volume();
    if v > available * (1.0 + 1e-12) {
        return Err(Error::VolumeTooLarge {
            requested: v,
            available,
        });
    }
    let k = ((v / spec.cell_volume()).round() as usize).min(spec.len());
    let mut included = vec![false; spec.len()];
    for &i in spec.radial_order()?.iter().take(k) {
        included[i] = true;
    }
    Ok(RegionMask::from_parts_unchecked(spec.clone(), included))
}
