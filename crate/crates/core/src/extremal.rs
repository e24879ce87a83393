//! Extremal uniform-ball densities and the bounds they produce.
//!
//! The extremal variable for a density bound `K` in `R^d` is uniform on the
//! centred ball of volume `1/K` (unit mass forces `K * V_d * r^d = 1`). The
//! grid versions built here carry explicit error budgets that bound the
//! distance between the computed numbers and the continuum values:
//!
//! - replacing the ball by the cells whose centres lie inside it changes the
//!   distribution by at most `K * shell(r, s)` in total variation, where `s`
//!   is half a cell diagonal and `shell(r, w)` the volume of the annulus
//!   `r - w <= |x| <= r + w`;
//! - replacing the centred ball of volume `v` by the cell mask of
//!   [`centered_ball_mask`] changes at most an annulus of half-width
//!   `2s + e` around the radius, `e` accounting for the half-cell rounding of
//!   the volume;
//! - the density of a sum is Lipschitz with constant `(d / r_i) * min K_j`.
//!
//! Every budget is a polynomial in the cell size with non-negative
//! coefficients and no constant term, so it at least halves when the
//! resolution doubles.

use crate::error::{Error, Result};
use crate::grid::{
    ball_radius_for_volume, ball_volume, centered_ball_mask, unit_ball_volume, GridDensity,
    GridSpec,
};
use crate::sumdist::sum_density_cell_exact;

/// Smallest accepted resolution (cells across the smallest ball's diameter).
pub const MIN_RESOLUTION: usize = 4;

/// Grid version of the uniform distribution on a centred ball.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformBall {
    pub density: GridDensity,
    /// Factor applied after setting the height to `K` so that the mass is 1.
    pub rescale: f64,
    pub radius: f64,
    /// Cells whose centre lies within half a cell diagonal of the sphere.
    pub surface_cells: usize,
}

/// A computed value and a bound on its distance to the exact value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub value: f64,
    pub budget: f64,
}

fn half_diagonal(spec: &GridSpec) -> f64 {
    0.5 * spec.cell_widths().iter().map(|w| w * w).sum::<f64>().sqrt()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Volume of `{x : r - w <= |x| <= r + w}` in `R^d`.
pub fn shell_volume(d: usize, r: f64, w: f64) -> f64 {
    let v = unit_ball_volume(d);
    if w >= r {
        return v * (r + w).powi(d as i32);
    }
    // (r+w)^d - (r-w)^d keeps only the odd powers of w
    let odd: f64 = (1..=d)
        .step_by(2)
        .map(|k| binomial(d, k) * r.powi((d - k) as i32) * w.powi(k as i32))
        .sum();
    2.0 * v * odd
}

/// Value `K` on the cells whose centres lie within the radius of the ball of
/// volume `1/K`, 0 elsewhere, then one scalar rescale to unit mass.
pub fn uniform_ball_density(d: usize, k: f64, spec: &GridSpec) -> Result<UniformBall> {
    if spec.dim() != d {
        return Err(Error::ShapeMismatch(format!(
            "grid is {}-dimensional, expected {d}",
            spec.dim()
        )));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Precondition(format!("K must be positive, got {k}")));
    }
    spec.require_origin_centered()?;
    let radius = ball_radius_for_volume(d, 1.0 / k)?;
    if let Some(&(_, hi)) = spec.extents().iter().find(|&&(_, hi)| hi < radius) {
        return Err(Error::Precondition(format!(
            "ball of radius {radius} does not fit in a grid reaching {hi}"
        )));
    }

    let s = half_diagonal(spec);
    let mut inside = vec![false; spec.len()];
    let mut count = 0usize;
    let mut surface_cells = 0usize;
    let mut center = vec![0.0; d];
    for (i, slot) in inside.iter_mut().enumerate() {
        spec.cell_center_into(i, &mut center);
        let dist = center.iter().map(|c| c * c).sum::<f64>().sqrt();
        if dist <= radius {
            *slot = true;
            count += 1;
        }
        if (dist - radius).abs() <= s {
            surface_cells += 1;
        }
    }
    let cv = spec.cell_volume();
    if count == 0 {
        return Err(Error::GridTooCoarse(format!(
            "no cell centre lies in the ball of radius {radius}; use cells narrower than {radius}"
        )));
    }
    let rescale = 1.0 / (k * count as f64 * cv);
    let allowed = 2.0 * surface_cells as f64 * cv * k;
    if (rescale - 1.0).abs() > allowed {
        let across = (2.0 * radius / spec.cell_widths()[0]).ceil();
        return Err(Error::GridTooCoarse(format!(
            "rescale factor {rescale} exceeds the boundary budget {allowed}; \
             use more than {across} cells across the ball"
        )));
    }
    let height = k * rescale;
    let values = inside
        .into_iter()
        .map(|b| if b { height } else { 0.0 })
        .collect();
    Ok(UniformBall {
        density: GridDensity::from_parts_unchecked(spec.clone(), values),
        rescale,
        radius,
        surface_cells,
    })
}

fn validate_ks(d: usize, ks: &[f64]) -> Result<()> {
    if d == 0 {
        return Err(Error::Precondition("dimension must be at least 1".into()));
    }
    if ks.is_empty() {
        return Err(Error::Precondition(
            "need at least one density bound K".into(),
        ));
    }
    if let Some(k) = ks.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
        return Err(Error::Precondition(format!("K must be positive, got {k}")));
    }
    Ok(())
}

/// Cell width of the extremal grids: `resolution` cells across the diameter
/// of the smallest ball.
pub fn extremal_cell_width(d: usize, ks: &[f64], resolution: usize) -> Result<f64> {
    validate_ks(d, ks)?;
    if resolution < MIN_RESOLUTION {
        return Err(Error::Precondition(format!(
            "resolution must be at least {MIN_RESOLUTION}, got {resolution}"
        )));
    }
    let kmax = ks.iter().copied().fold(0.0, f64::max);
    let r_min = ball_radius_for_volume(d, 1.0 / kmax)?;
    Ok(2.0 * r_min / resolution as f64)
}

/// Origin-centred grid with an odd number of cells of width `h` per axis,
/// just covering the ball of volume `1/k`.
pub fn extremal_grid(d: usize, k: f64, h: f64) -> Result<GridSpec> {
    let r = ball_radius_for_volume(d, 1.0 / k)?;
    let count = 2 * (r / h).ceil() as usize + 1;
    GridSpec::centered(h, &vec![count; d])
}

/// Distribution of `U_1 + ... + U_n` on a grid, with the per-variable data
/// needed for error budgets. Build once and query many set volumes.
#[derive(Debug, Clone)]
pub struct ExtremalSum {
    d: usize,
    ks: Vec<f64>,
    resolution: usize,
    balls: Vec<UniformBall>,
    cells: GridDensity,
}

impl ExtremalSum {
    pub fn new(d: usize, ks: &[f64], resolution: usize) -> Result<Self> {
        let h = extremal_cell_width(d, ks, resolution)?;
        let balls = ks
            .iter()
            .map(|&k| uniform_ball_density(d, k, &extremal_grid(d, k, h)?))
            .collect::<Result<Vec<_>>>()?;
        let densities: Vec<GridDensity> = balls.iter().map(|b| b.density.clone()).collect();
        let cells = sum_density_cell_exact(&densities)?;
        Ok(Self {
            d,
            ks: ks.to_vec(),
            resolution,
            balls,
            cells,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn ks(&self) -> &[f64] {
        &self.ks
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn balls(&self) -> &[UniformBall] {
        &self.balls
    }

    /// Exact cell masses of the sum of the grid variables.
    pub fn cells(&self) -> &GridDensity {
        &self.cells
    }

    fn half_diagonal(&self) -> f64 {
        half_diagonal(self.cells.spec())
    }

    /// Upper bound on each variable's rescale factor.
    fn rescale_bounds(&self) -> Vec<f64> {
        let s = self.half_diagonal();
        self.balls
            .iter()
            .map(|b| (b.radius / (b.radius - s)).powi(self.d as i32))
            .collect()
    }

    /// Bound on the density of any partial sum that omits variable `skip`.
    fn density_cap(&self, skip: Option<usize>) -> f64 {
        let caps = self.rescale_bounds();
        self.ks
            .iter()
            .zip(&caps)
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .map(|(_, (k, c))| k * c)
            .fold(f64::INFINITY, f64::min)
    }

    /// Total-variation distance between the grid and continuum sums.
    fn ball_budget(&self) -> f64 {
        let s = self.half_diagonal();
        self.ks
            .iter()
            .zip(&self.balls)
            .map(|(k, b)| k * shell_volume(self.d, b.radius, s))
            .sum()
    }

    /// `P(U_1 + ... + U_n ∈ B)` for the centred ball `B` of volume `v`.
    pub fn prob_bound(&self, v: f64) -> Result<Bound> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Precondition(format!(
                "set volume must be positive, got {v}"
            )));
        }
        let reach: f64 = self.balls.iter().map(|b| b.radius).sum();
        if v >= ball_volume(self.d, reach) {
            return Ok(Bound {
                value: 1.0,
                budget: 0.0,
            });
        }
        let spec = self.cells.spec();
        let mask = centered_ball_mask(spec, v)?;
        let value = self.cells.mass_on(&mask)?;

        let d = self.d;
        let unit = unit_ball_volume(d);
        let cv = spec.cell_volume();
        let s = self.half_diagonal();
        let rho = ball_radius_for_volume(d, v)?;
        let slack = cv / (2.0 * unit);
        let inner = if v > cv / 2.0 {
            ((v - cv / 2.0) / unit).powf(1.0 / d as f64)
        } else {
            0.0
        };
        let e = if inner > 0.0 {
            slack / (d as f64 * inner.powi(d as i32 - 1))
        } else {
            rho
        };
        let mask_budget = self.density_cap(None) * shell_volume(d, rho, 2.0 * s + e);
        Ok(Bound {
            value,
            budget: self.ball_budget() + mask_budget,
        })
    }

    /// `M(U_1 + ... + U_n)`, the maximum density of the sum.
    pub fn density_bound(&self) -> Bound {
        let value = self.cells.ess_sup();
        let d = self.d;
        let caps = self.rescale_bounds();
        if self.ks.len() == 1 {
            return Bound {
                value,
                budget: self.ks[0] * (caps[0] - 1.0),
            };
        }
        let s = self.half_diagonal();
        let smoothing: f64 = (0..self.ks.len())
            .map(|i| {
                2.0 * self.ks[i]
                    * shell_volume(d, self.balls[i].radius, s)
                    * self.density_cap(Some(i))
            })
            .sum();
        let lipschitz = (0..self.ks.len())
            .map(|i| {
                let rest = self
                    .ks
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, k)| *k)
                    .fold(f64::INFINITY, f64::min);
                d as f64 / self.balls[i].radius * rest
            })
            .fold(f64::INFINITY, f64::min);
        Bound {
            value,
            budget: smoothing + lipschitz * s,
        }
    }
}

/// Right side of the small-ball inequality for a set of volume `set_volume`.
pub fn rogozin_bound_prob(
    d: usize,
    ks: &[f64],
    set_volume: f64,
    resolution: usize,
) -> Result<Bound> {
    ExtremalSum::new(d, ks, resolution)?.prob_bound(set_volume)
}

/// Maximum density of the sum of the extremal uniform-ball variables.
pub fn rogozin_bound_density(d: usize, ks: &[f64], resolution: usize) -> Result<Bound> {
    Ok(ExtremalSum::new(d, ks, resolution)?.density_bound())
}
