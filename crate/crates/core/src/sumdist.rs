//! Distributions of sums of independent grid variables.
//!
//! Two discretizations of the sum `X_1 + ... + X_n` are provided:
//!
//! - [`sum_density`]: the *lattice* sum. Each variable is treated as point
//!   masses `value * cell_volume` at its cell centres; the n-fold discrete
//!   convolution is placed on a grid whose cell centres are the sums of
//!   input centres. This is what midpoint quadrature of the defining
//!   multiple integral computes, and it is the form [`bll_integral`] agrees
//!   with.
//! - [`sum_density_cell_exact`]: the exact cell averages of the true density
//!   of the sum of the piecewise-constant variables. Writing each variable as
//!   its cell centre plus an independent uniform offset inside one cell, the
//!   sum is the lattice sum plus a sum of `n` uniform offsets, whose mass per
//!   cell is a centred cardinal B-spline of order `n + 1` at the integers.
//!   Smoothing the lattice sum with that kernel gives the exact masses.
//!
//! Convolution is always linear (zero padded to the full extent, never
//! circular).

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{GridDensity, GridSpec, RegionMask};
use crate::summation::NeumaierSum;

/// Direct summation is used while `nonzeros(f) * len(g)` stays below this.
const DIRECT_WORK_LIMIT: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionMethod {
    Direct,
    Fft,
    #[default]
    Auto,
}

/// Grid holding the lattice convolution of densities on `f` and `g`: same
/// cell widths, `count_f + count_g - 1` cells per axis, centred at the sum of
/// the two grid midpoints. Its cell centres are exactly the pairwise sums of
/// input cell centres.
pub fn sum_grid(f: &GridSpec, g: &GridSpec) -> Result<GridSpec> {
    if f.dim() != g.dim() {
        return Err(Error::ShapeMismatch(format!(
            "cannot convolve {}-d with {}-d densities",
            f.dim(),
            g.dim()
        )));
    }
    if !f.same_cell_widths(g) {
        return Err(Error::ShapeMismatch(format!(
            "cell widths differ: {:?} vs {:?}",
            f.cell_widths(),
            g.cell_widths()
        )));
    }
    let center: Vec<f64> = (0..f.dim())
        .map(|a| f.midpoint(a) + g.midpoint(a))
        .collect();
    let counts: Vec<usize> = f
        .counts()
        .iter()
        .zip(g.counts())
        .map(|(a, b)| a + b - 1)
        .collect();
    let extents = center
        .iter()
        .zip(&counts)
        .zip(f.cell_widths())
        .map(|((&c, &n), &w)| {
            let half = 0.5 * w * n as f64;
            (c - half, c + half)
        })
        .collect();
    GridSpec::new(extents, counts)
}

pub fn convolve(f: &GridDensity, g: &GridDensity) -> Result<GridDensity> {
    convolve_with(f, g, ConvolutionMethod::Auto)
}

pub fn convolve_with(
    f: &GridDensity,
    g: &GridDensity,
    method: ConvolutionMethod,
) -> Result<GridDensity> {
    let spec = sum_grid(f.spec(), g.spec())?;
    let method = match method {
        ConvolutionMethod::Auto => {
            let nnz = f.values().iter().filter(|&&v| v != 0.0).count();
            if nnz.saturating_mul(g.values().len()) <= DIRECT_WORK_LIMIT {
                ConvolutionMethod::Direct
            } else {
                ConvolutionMethod::Fft
            }
        }
        m => m,
    };
    let raw = match method {
        ConvolutionMethod::Fft => fft_convolve(f, g, &spec),
        _ => direct_convolve(f, g, &spec),
    };
    let cv = f.spec().cell_volume();
    let values = raw.into_iter().map(|v| (v * cv).max(0.0)).collect();
    Ok(GridDensity::from_parts_unchecked(spec, values))
}

/// Offsets of every input cell inside the output array: the output index of
/// `i + j` is `offset_f[i] + offset_g[j]`.
fn output_offsets(input: &GridSpec, out: &GridSpec) -> Vec<usize> {
    let d = input.dim();
    let mut strides = vec![1usize; d];
    for a in (0..d.saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * out.counts()[a + 1];
    }
    let mut idx = vec![0usize; d];
    (0..input.len())
        .map(|flat| {
            input.unravel(flat, &mut idx);
            idx.iter().zip(&strides).map(|(i, s)| i * s).sum()
        })
        .collect()
}

fn direct_convolve(f: &GridDensity, g: &GridDensity, out: &GridSpec) -> Vec<f64> {
    let of = output_offsets(f.spec(), out);
    let og = output_offsets(g.spec(), out);
    let mut acc = vec![NeumaierSum::new(); out.len()];
    for (i, &fv) in f.values().iter().enumerate() {
        if fv == 0.0 {
            continue;
        }
        let base = of[i];
        for (j, &gv) in g.values().iter().enumerate() {
            if gv != 0.0 {
                acc[base + og[j]].add(fv * gv);
            }
        }
    }
    acc.into_iter().map(|s| s.value()).collect()
}

/// Smallest `m >= n` whose only prime factors are 2, 3 and 5.
fn next_fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

fn fft_nd(buf: &mut [Complex<f64>], dims: &[usize], planner: &mut FftPlanner<f64>, inverse: bool) {
    let total: usize = dims.iter().product();
    let mut stride = total;
    for &len in dims {
        stride /= len;
        let fft = if inverse {
            planner.plan_fft_inverse(len)
        } else {
            planner.plan_fft_forward(len)
        };
        let mut line = vec![Complex::new(0.0, 0.0); len];
        let block = len * stride;
        for start in (0..total).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = buf[base + k * stride];
                }
                fft.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    buf[base + k * stride] = *v;
                }
            }
        }
    }
}

fn fft_convolve(f: &GridDensity, g: &GridDensity, out: &GridSpec) -> Vec<f64> {
    let dims: Vec<usize> = out.counts().iter().map(|&n| next_fast_len(n)).collect();
    let total: usize = dims.iter().product();
    let padded = GridSpec::new(vec![(0.0, 1.0); dims.len()], dims.clone())
        .expect("padded FFT grid is valid");

    let embed = |src: &GridDensity| {
        let offsets = output_offsets(src.spec(), &padded);
        let mut buf = vec![Complex::new(0.0, 0.0); total];
        for (v, &o) in src.values().iter().zip(&offsets) {
            buf[o] = Complex::new(*v, 0.0);
        }
        buf
    };
    let mut planner = FftPlanner::new();
    let mut a = embed(f);
    let mut b = embed(g);
    fft_nd(&mut a, &dims, &mut planner, false);
    fft_nd(&mut b, &dims, &mut planner, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= *y;
    }
    fft_nd(&mut a, &dims, &mut planner, true);

    let scale = 1.0 / total as f64;
    let offsets = output_offsets(out, &padded);
    offsets.into_iter().map(|o| a[o].re * scale).collect()
}

/// Left fold of [`convolve`] in list order.
pub fn sum_density(fs: &[GridDensity]) -> Result<GridDensity> {
    sum_density_with(fs, ConvolutionMethod::Auto)
}

pub fn sum_density_with(fs: &[GridDensity], method: ConvolutionMethod) -> Result<GridDensity> {
    let (first, rest) = fs
        .split_first()
        .ok_or_else(|| Error::Precondition("need at least one density".into()))?;
    rest.iter()
        .try_fold(first.clone(), |acc, f| convolve_with(&acc, f, method))
}

/// Values of the centred cardinal B-spline of order `order` at the integers
/// `-j..=j`, where `j = (order - 1) / 2`. Entry `k` is the mass that a sum of
/// `order - 1` independent uniforms on `[-1/2, 1/2]` puts on `[k - 1/2, k + 1/2]`.
pub fn cell_kernel(order: usize) -> Vec<f64> {
    assert!(order >= 1);
    // values on the half-integer lattice x = (i - c) / 2
    let reach = order + 2;
    let c = reach as i64;
    let len = 2 * reach + 1;
    let at = |i: usize| (i as i64 - c) as f64 / 2.0;
    let mut m: Vec<f64> = (0..len)
        .map(|i| {
            let x = at(i).abs();
            if x < 0.5 {
                1.0
            } else if x == 0.5 {
                0.5
            } else {
                0.0
            }
        })
        .collect();
    for k in 2..=order {
        let half = k as f64 / 2.0;
        let prev = m.clone();
        for i in 0..len {
            let x = at(i);
            let right = if i + 1 < len { prev[i + 1] } else { 0.0 };
            let left = if i >= 1 { prev[i - 1] } else { 0.0 };
            let v = ((half + x) * right + (half - x) * left) / (k - 1) as f64;
            m[i] = if (x.abs()) < half { v.max(0.0) } else { 0.0 };
        }
    }
    let j = (order as i64 - 1) / 2;
    (-j..=j).map(|k| m[(2 * k + c) as usize]).collect()
}

/// Exact cell averages of the density of `X_1 + ... + X_n` for
/// piecewise-constant inputs sharing cell widths. The grid is the lattice sum
/// grid widened by `n / 2` cells on each side.
pub fn sum_density_cell_exact(fs: &[GridDensity]) -> Result<GridDensity> {
    let lattice = sum_density(fs)?;
    Ok(smooth_lattice(&lattice, fs.len()))
}

/// Spreads a lattice sum of `n` variables onto exact cell masses.
pub fn smooth_lattice(lattice: &GridDensity, n: usize) -> GridDensity {
    let kernel = cell_kernel(n + 1);
    let reach = kernel.len() / 2;
    if reach == 0 {
        return lattice.clone();
    }
    let spec = lattice.spec();
    let d = spec.dim();
    let mut counts = spec.counts().to_vec();
    let mut values = lattice.values().to_vec();
    for axis in 0..d {
        let n_in = counts[axis];
        let n_out = n_in + 2 * reach;
        let outer: usize = counts[..axis].iter().product();
        let inner: usize = counts[axis + 1..].iter().product();
        let mut next = vec![0.0; outer * n_out * inner];
        for o in 0..outer {
            for i in 0..n_in {
                let src = (o * n_in + i) * inner;
                for (k, &q) in kernel.iter().enumerate() {
                    let dst = (o * n_out + i + k) * inner;
                    for t in 0..inner {
                        next[dst + t] += q * values[src + t];
                    }
                }
            }
        }
        counts[axis] = n_out;
        values = next;
    }
    let center: Vec<f64> = (0..d).map(|a| spec.midpoint(a)).collect();
    let extents = center
        .iter()
        .zip(&counts)
        .zip(spec.cell_widths())
        .map(|((&c, &n), &w)| (c - 0.5 * w * n as f64, c + 0.5 * w * n as f64))
        .collect();
    let out = GridSpec::new(extents, counts).expect("widened grid is valid");
    GridDensity::from_parts_unchecked(out, values)
}

/// `P(X_1 + ... + X_n ∈ S)` on the lattice sum, with the mask moved onto the
/// sum grid by cell-centre membership.
pub fn small_ball_prob(fs: &[GridDensity], s: &RegionMask) -> Result<f64> {
    let sum = sum_density(fs)?;
    let mask = s.resample_onto(sum.spec())?;
    sum.mass_on(&mask)
}

/// Exact `P(X_1 + ... + X_n ∈ S)` for the piecewise-constant variables, `S`
/// being the union of cells of the exact-sum grid whose centres lie in `s`.
/// Also returns the measure of that set.
pub fn small_ball_prob_exact(fs: &[GridDensity], s: &RegionMask) -> Result<(f64, f64)> {
    let sum = sum_density_cell_exact(fs)?;
    let mask = s.resample_onto(sum.spec())?;
    Ok((sum.mass_on(&mask)?, mask.measure()))
}

/// Real `k × n` matrix of coefficients `a[j][m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl CoefficientMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Precondition(
                "coefficient matrix must be non-empty".into(),
            ));
        }
        if entries.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for a {rows}×{cols} matrix",
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("coefficients must be finite".into()));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("ragged coefficient rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, j: usize, m: usize) -> f64 {
        self.entries[j * self.cols + m]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.entries[j * self.cols..(j + 1) * self.cols]
    }

    /// Index `m` if row `j` is the unit vector `e_m`.
    pub fn unit_row(&self, j: usize) -> Option<usize> {
        let row = self.row(j);
        let mut hit = None;
        for (m, &v) in row.iter().enumerate() {
            if v == 1.0 && hit.is_none() {
                hit = Some(m);
            } else if v != 0.0 {
                return None;
            }
        }
        hit
    }

    /// Text form: `k n` on the first line, then `k` rows of `n` reals.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (ln, head) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty coefficient file".into(),
        })?;
        let dims: Vec<usize> = head
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse {
                line: ln + 1,
                message: "first line must be `k n`".into(),
            })?;
        let [k, n] = dims[..] else {
            return Err(Error::Parse {
                line: ln + 1,
                message: "first line must be `k n`".into(),
            });
        };
        let mut rows = Vec::with_capacity(k);
        for (ln, l) in lines {
            let row: Vec<f64> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse {
                    line: ln + 1,
                    message: format!("bad coefficient row {l:?}"),
                })?;
            if row.len() != n {
                return Err(Error::Parse {
                    line: ln + 1,
                    message: format!("expected {n} coefficients, found {}", row.len()),
                });
            }
            rows.push(row);
        }
        if rows.len() != k {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected {k} rows, found {}", rows.len()),
            });
        }
        Self::from_rows(&rows)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows, self.cols);
        for j in 0..self.rows {
            let row: Vec<String> = self.row(j).iter().map(|v| format!("{v}")).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// `(n+1) × n` matrix: identity on top, a row of ones at the bottom. With
/// functions `p_1, ..., p_n, 1_S` it turns the multilinear integral into
/// `P(X_1 + ... + X_n ∈ S)`.
pub fn small_ball_coefficients(n: usize) -> Result<CoefficientMatrix> {
    if n == 0 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    let mut entries = vec![0.0; (n + 1) * n];
    for m in 0..n {
        entries[m * n + m] = 1.0;
        entries[n * n + m] = 1.0;
    }
    CoefficientMatrix::new(n + 1, n, entries)
}

/// Largest `n * d` accepted by [`bll_integral`].
pub const BLL_MAX_TOTAL_DIM: usize = 6;
/// Largest per-axis cell count of an integration grid in [`bll_integral`].
pub const BLL_MAX_CELLS_PER_AXIS: usize = 64;

/// Midpoint-rule value of `∫_{R^{nd}} Π_j f_j(Σ_m a[j][m] x_m) dx`.
///
/// Each `x_m` runs over the cells of the grid of the first function whose
/// coefficient row is the unit vector `e_m`; a variable pinned by no such
/// row would make the domain unbounded and is rejected. Functions are
/// evaluated by nearest-cell lookup, zero outside their grid.
pub fn bll_integral(fs: &[GridDensity], a: &CoefficientMatrix) -> Result<f64> {
    let k = fs.len();
    if k != a.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{k} functions but {} coefficient rows",
            a.rows()
        )));
    }
    let n = a.cols();
    let d = fs[0].spec().dim();
    if fs.iter().any(|f| f.spec().dim() != d) {
        return Err(Error::ShapeMismatch("functions differ in dimension".into()));
    }

    let mut domains: Vec<Option<&GridSpec>> = vec![None; n];
    for (j, f) in fs.iter().enumerate().take(k) {
        if let Some(m) = a.unit_row(j) {
            domains[m].get_or_insert(f.spec());
        }
    }
    let domains: Vec<&GridSpec> = domains
        .into_iter()
        .enumerate()
        .map(|(m, dom)| {
            dom.ok_or_else(|| {
                Error::Precondition(format!(
                    "variable {m} is not pinned by a unit coefficient row; integration domain unbounded"
                ))
            })
        })
        .collect::<Result<_>>()?;

    let evaluations = domains.iter().map(|g| g.len() as f64).product::<f64>() * k as f64;
    if n * d > BLL_MAX_TOTAL_DIM {
        return Err(Error::GuardExceeded {
            reason: format!("n·d = {} exceeds {BLL_MAX_TOTAL_DIM}", n * d),
            evaluations,
        });
    }
    if let Some(c) = domains
        .iter()
        .flat_map(|g| g.counts().iter())
        .find(|&&c| c > BLL_MAX_CELLS_PER_AXIS)
    {
        return Err(Error::GuardExceeded {
            reason: format!("{c} cells on an axis exceeds {BLL_MAX_CELLS_PER_AXIS}"),
            evaluations,
        });
    }

    let centers: Vec<Vec<f64>> = domains
        .iter()
        .map(|g| (0..g.len()).flat_map(|i| g.cell_center(i)).collect())
        .collect();
    let weight: f64 = domains.iter().map(|g| g.cell_volume()).product();

    let mut walker = Walker {
        fs,
        a,
        d,
        centers: &centers,
        chosen: vec![0; n],
        point: vec![0.0; d],
        acc: NeumaierSum::new(),
    };
    walker.walk(0);
    Ok(walker.acc.value() * weight)
}

struct Walker<'a> {
    fs: &'a [GridDensity],
    a: &'a CoefficientMatrix,
    d: usize,
    centers: &'a [Vec<f64>],
    chosen: Vec<usize>,
    point: Vec<f64>,
    acc: NeumaierSum,
}

impl Walker<'_> {
    fn walk(&mut self, m: usize) {
        if m == self.chosen.len() {
            let product = self.integrand();
            if product != 0.0 {
                self.acc.add(product);
            }
            return;
        }
        let cells = self.centers[m].len() / self.d;
        for c in 0..cells {
            self.chosen[m] = c;
            self.walk(m + 1);
        }
    }

    fn integrand(&mut self) -> f64 {
        let mut product = 1.0;
        for (j, f) in self.fs.iter().enumerate() {
            let row = self.a.row(j);
            self.point.iter_mut().for_each(|p| *p = 0.0);
            for (m, &coef) in row.iter().enumerate() {
                if coef != 0.0 {
                    let base = self.chosen[m] * self.d;
                    for (p, x) in self
                        .point
                        .iter_mut()
                        .zip(&self.centers[m][base..base + self.d])
                    {
                        *p += coef * x;
                    }
                }
            }
            let v = match f.spec().locate(&self.point) {
                Some(i) => f.values()[i],
                None => 0.0,
            };
            if v == 0.0 {
                return 0.0;
            }
            product *= v;
        }
        product
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(cells: usize) -> GridDensity {
        let spec = GridSpec::cube(1, -0.5, 0.5, cells).unwrap();
        GridDensity::new(spec, vec![1.0; cells]).unwrap()
    }

    #[test]
    fn sum_grid_centers_are_center_sums() {
        let f = GridSpec::new(vec![(0.0, 1.0)], vec![4]).unwrap();
        let g = GridSpec::new(vec![(-0.5, 0.25)], vec![3]).unwrap();
        let s = sum_grid(&f, &g).unwrap();
        assert_eq!(s.counts(), &[6]);
        let expected = f.axis_center(0, 1) + g.axis_center(0, 2);
        assert!((s.axis_center(0, 3) - expected).abs() < 1e-15);
    }

    #[test]
    fn rejects_incompatible_grids() {
        let f = unit_box(4);
        let g = unit_box(5);
        assert!(convolve(&f, &g).is_err());
        let h = GridDensity::zeros(GridSpec::cube(2, -0.5, 0.5, 4).unwrap());
        assert!(convolve(&f, &h).is_err());
    }

    #[test]
    fn box_convolution_is_triangle_at_nodes() {
        let f = unit_box(64);
        let t = convolve(&f, &f).unwrap();
        assert_eq!(t.spec().counts(), &[127]);
        let spec = t.spec().clone();
        for (i, v) in t.values().iter().enumerate() {
            let x = spec.axis_center(0, i);
            assert!((v - (1.0 - x.abs())).abs() < 1e-12, "cell {i}");
        }
        assert!((t.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn delta_is_identity_up_to_reindexing() {
        let spec = GridSpec::cube(2, -1.0, 1.0, 8).unwrap();
        let f = GridDensity::from_fn(spec.clone(), |c| 1.0 + c[0] * c[0] + 0.3 * c[1]).unwrap();
        let dspec = GridSpec::centered(0.25, &[1, 1]).unwrap();
        let delta = GridDensity::new(dspec.clone(), vec![1.0 / dspec.cell_volume()]).unwrap();
        let g = convolve(&f, &delta).unwrap();
        assert_eq!(g.spec().counts(), spec.counts());
        for (a, b) in f.values().iter().zip(g.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fft_matches_direct() {
        let spec = GridSpec::cube(2, -1.0, 1.0, 13).unwrap();
        let f =
            GridDensity::from_fn(spec.clone(), |c| (3.0 * c[0]).cos().abs() + c[1].abs()).unwrap();
        let gspec = GridSpec::with_cell_width(&[0.3, -0.2], 2.0 / 13.0, &[7, 12]).unwrap();
        let g = GridDensity::from_fn(gspec, |c| c[0].abs() + 0.1 * c[1] * c[1]).unwrap();
        let a = convolve_with(&f, &g, ConvolutionMethod::Direct).unwrap();
        let b = convolve_with(&f, &g, ConvolutionMethod::Fft).unwrap();
        assert_eq!(a.spec(), b.spec());
        let sup = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-12, "sup = {sup}");
    }

    #[test]
    fn next_fast_len_values() {
        assert_eq!(next_fast_len(1), 1);
        assert_eq!(next_fast_len(7), 8);
        assert_eq!(next_fast_len(127), 128);
        assert_eq!(next_fast_len(121), 125);
    }

    #[test]
    fn cell_kernels() {
        assert_eq!(cell_kernel(1), vec![1.0]);
        assert_eq!(cell_kernel(2), vec![1.0]);
        assert_eq!(cell_kernel(3), vec![0.125, 0.75, 0.125]);
        let k4 = cell_kernel(4);
        let expected = [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0];
        for (a, b) in k4.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        for order in 1..12 {
            let s: f64 = cell_kernel(order).iter().sum();
            assert!((s - 1.0).abs() < 1e-14, "order {order}");
        }
    }

    #[test]
    fn exact_cells_of_two_single_cell_boxes() {
        let spec = GridSpec::new(vec![(0.0, 1.0)], vec![1]).unwrap();
        let f = GridDensity::new(spec, vec![1.0]).unwrap();
        let s = sum_density_cell_exact(&[f.clone(), f]).unwrap();
        assert_eq!(s.values(), &[0.125, 0.75, 0.125]);
        assert_eq!(s.spec().extents()[0], (-0.5, 2.5));
    }

    #[test]
    fn small_ball_of_two_boxes() {
        // odd cell counts put the edges of [-1/2, 1/2] on sum-grid cell edges
        let f = unit_box(63);
        let fs = [f.clone(), f];
        let lattice_spec = sum_density(&fs).unwrap().spec().clone();
        let s = RegionMask::from_fn(lattice_spec.clone(), |c| c[0].abs() < 0.5);
        assert_eq!(s.count(), 63);
        let (p, measure) = small_ball_prob_exact(&fs, &s).unwrap();
        assert!((p - 0.75).abs() < 1e-12, "p = {p}");
        assert!((measure - 1.0).abs() < 1e-12);

        let p = small_ball_prob(&fs, &s).unwrap();
        assert!((p - 0.75).abs() < 1e-3);
        let empty = RegionMask::empty(lattice_spec.clone());
        assert_eq!(small_ball_prob(&fs, &empty).unwrap(), 0.0);
        let full = RegionMask::full(lattice_spec);
        assert!((small_ball_prob(&fs, &full).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn coefficient_matrices() {
        let c1 = small_ball_coefficients(1).unwrap();
        assert_eq!(
            c1,
            CoefficientMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap()
        );
        let c2 = small_ball_coefficients(2).unwrap();
        let rows = [vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        assert_eq!(c2, CoefficientMatrix::from_rows(&rows).unwrap());
        let c3 = small_ball_coefficients(3).unwrap();
        let rows = [
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 1.0, 1.0],
        ];
        assert_eq!(c3, CoefficientMatrix::from_rows(&rows).unwrap());
        assert!(small_ball_coefficients(0).is_err());
        assert_eq!(c2.unit_row(1), Some(1));
        assert_eq!(c2.unit_row(2), None);
    }

    #[test]
    fn coefficient_text_round_trip() {
        let c = CoefficientMatrix::from_rows(&[vec![1.0, -1.0], vec![0.5, 0.0]]).unwrap();
        assert_eq!(CoefficientMatrix::parse(&c.to_text()).unwrap(), c);
        assert!(CoefficientMatrix::parse("2 2\n1 0\n").is_err());
        assert!(CoefficientMatrix::parse("1 2\n1 x\n").is_err());
    }

    #[test]
    fn bll_simple_cases() {
        let f = unit_box(16);
        let a = CoefficientMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert!((bll_integral(std::slice::from_ref(&f), &a).unwrap() - 1.0).abs() < 1e-9);
        let a = CoefficientMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        assert!((bll_integral(&[f.clone(), f.clone()], &a).unwrap() - 1.0).abs() < 1e-9);
        let unpinned = CoefficientMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        assert!(matches!(
            bll_integral(std::slice::from_ref(&f), &unpinned),
            Err(Error::Precondition(_))
        ));
        let big =
            GridDensity::new(GridSpec::cube(1, -1.0, 1.0, 65).unwrap(), vec![0.0; 65]).unwrap();
        let a = CoefficientMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(matches!(
            bll_integral(&[big], &a),
            Err(Error::GuardExceeded { .. })
        ));
    }
}
