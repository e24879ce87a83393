//! Seeded harnesses that check the small-ball inequalities numerically.
//!
//! Each check returns a [`VerificationReport`] whose budget is a sum of
//! explicit terms: the extremal-side budget from [`crate::extremal`], a fixed
//! convolution tolerance, and the defect `|Π ∫f_i - 1|` of the inputs' total
//! mass. The left sides are exact for piecewise-constant inputs: probabilities
//! and densities of sums are read off [`sum_density_cell_exact`], which holds
//! the exact cell averages of the sum's density.
//!
//! Random instances derive every sub-stream from the instance seed with
//! [`derive_seed`], so results never depend on scheduling.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extremal::{Bound, ExtremalSum};
use crate::grid::{centered_ball_mask, GridDensity, GridSpec, RegionMask};
use crate::rearrange::symmetric_decreasing_rearrangement;
use crate::report::VerificationReport;
use crate::rng::{derive_seed, stream, StreamRng};
use crate::sumdist::{
    bll_integral, small_ball_coefficients, small_ball_prob, small_ball_prob_exact, sum_density,
    sum_density_cell_exact, sum_grid, CoefficientMatrix,
};
use crate::summation::NeumaierSum;

/// Allowance for round-off in convolutions, added to every budget.
pub const CONVOLUTION_TOLERANCE: f64 = 1e-9;
/// Slack on the brute-force sides of the rearrangement inequality.
pub const QUADRATURE_TOLERANCE: f64 = 1e-9;
/// Round-off allowance on the decomposition's mass contract.
pub const DECOMPOSITION_SLACK: f64 = 1e-14;
/// Values of K drawn by the random sweeps.
pub const SWEEP_KS: [f64; 3] = [0.5, 1.0, 4.0];

const MAX_GENERATOR_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    MultiBump,
    RandomCells,
    IndicatorUnion,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::MultiBump, Shape::RandomCells, Shape::IndicatorUnion];

    pub fn name(self) -> &'static str {
        match self {
            Shape::MultiBump => "multi-bump",
            Shape::RandomCells => "random-cells",
            Shape::IndicatorUnion => "indicator-union",
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Shape::ALL
            .into_iter()
            .find(|shape| shape.name() == s)
            .ok_or_else(|| Error::Precondition(format!("unknown shape {s:?}")))
    }
}

/// Recipe for a random density bounded by `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomDensitySpec {
    pub k: f64,
    pub spec: GridSpec,
    pub seed: u64,
    pub shape: Shape,
}

impl RandomDensitySpec {
    pub fn dim(&self) -> usize {
        self.spec.dim()
    }
}

fn raw_weights(spec: &GridSpec, shape: Shape, rng: &mut StreamRng) -> Vec<f64> {
    let d = spec.dim();
    let ext = spec.extents();
    let centers: Vec<Vec<f64>> = (0..spec.len()).map(|i| spec.cell_center(i)).collect();
    match shape {
        Shape::MultiBump => {
            let bumps: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..rng.random_range(1..=4))
                .map(|_| {
                    let c = ext
                        .iter()
                        .map(|&(lo, hi)| rng.random_range(lo..hi))
                        .collect();
                    let s = ext
                        .iter()
                        .map(|&(lo, hi)| (hi - lo) * rng.random_range(0.05..0.3))
                        .collect();
                    (c, s, rng.random_range(0.2..1.0))
                })
                .collect();
            centers
                .iter()
                .map(|x| {
                    bumps
                        .iter()
                        .map(|(c, s, amp)| {
                            let q: f64 = (0..d).map(|a| ((x[a] - c[a]) / s[a]).powi(2)).sum();
                            amp * (-0.5 * q).exp()
                        })
                        .sum()
                })
                .collect()
        }
        Shape::RandomCells => (0..spec.len())
            .map(|_| {
                let u: f64 = rng.random();
                if rng.random_bool(0.2) {
                    0.0
                } else {
                    u * u * u
                }
            })
            .collect(),
        Shape::IndicatorUnion => {
            let boxes: Vec<Vec<(f64, f64)>> = (0..rng.random_range(1..=3))
                .map(|_| {
                    ext.iter()
                        .map(|&(lo, hi)| {
                            let len = (hi - lo) * rng.random_range(0.2..0.8);
                            let a = rng.random_range(lo..hi - len);
                            (a, a + len)
                        })
                        .collect()
                })
                .collect();
            centers
                .iter()
                .map(|x| {
                    let hit = boxes
                        .iter()
                        .any(|b| b.iter().zip(x).all(|(&(a, z), &xi)| a <= xi && xi < z));
                    if hit {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        }
    }
}

/// Values `min(k, λ w)` with `λ` chosen so the mass is 1, or `None` if even
/// saturating every positive weight falls short.
fn water_fill(weights: &[f64], k: f64, cell_volume: f64) -> Option<Vec<f64>> {
    let mut order: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    if (order.len() as f64) * k * cell_volume < 1.0 {
        return None;
    }
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let target = 1.0 / cell_volume;
    let mut suffix = vec![0.0; order.len() + 1];
    for i in (0..order.len()).rev() {
        suffix[i] = suffix[i + 1] + weights[order[i]];
    }
    let mut lambda = f64::INFINITY;
    for (t, &cell) in order.iter().enumerate() {
        let l = (target - t as f64 * k) / suffix[t];
        if l * weights[cell] <= k {
            lambda = l;
            break;
        }
    }
    Some(weights.iter().map(|&w| (lambda * w).min(k)).collect())
}

/// Random density with `ess_sup <= k` exactly and unit mass within 1e-9.
///
/// Non-negative weights of the requested shape are water-filled up to `k`
/// and then rescaled by a factor of at most 1, so the clamp survives. Draws
/// that cannot carry unit mass are redrawn; after
/// `MAX_GENERATOR_ATTEMPTS` failures the uniform weights are used.
pub fn generate_bounded_density(rds: &RandomDensitySpec) -> Result<GridDensity> {
    let k = rds.k;
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Precondition(format!("K must be positive, got {k}")));
    }
    let spec = &rds.spec;
    let capacity = k * spec.volume();
    if capacity < 1.0 {
        return Err(Error::Infeasible(format!(
            "K × grid volume = {capacity} < 1: no density bounded by {k} fits"
        )));
    }
    if capacity <= 1.0 + 1e-12 {
        let c = (1.0 / spec.volume()).min(k);
        return GridDensity::probability(spec.clone(), vec![c; spec.len()]);
    }

    let cv = spec.cell_volume();
    let mut rng = stream(rds.seed);
    for _ in 0..MAX_GENERATOR_ATTEMPTS {
        let weights = raw_weights(spec, rds.shape, &mut rng);
        if let Some(values) = water_fill(&weights, k, cv).and_then(|v| finish_mass(v, k, cv)) {
            return GridDensity::probability(spec.clone(), values);
        }
    }
    let values = water_fill(&vec![1.0; spec.len()], k, cv)
        .and_then(|v| finish_mass(v, k, cv))
        .ok_or_else(|| Error::Infeasible("uniform fallback failed".into()))?;
    GridDensity::probability(spec.clone(), values)
}

fn finish_mass(mut values: Vec<f64>, k: f64, cv: f64) -> Option<Vec<f64>> {
    let mass = values.iter().copied().collect::<NeumaierSum>().value() * cv;
    let factor = 1.0 / mass;
    let top = values.iter().copied().fold(0.0, f64::max);
    if factor <= 1.0 || top * factor <= k {
        values.iter_mut().for_each(|v| *v *= factor);
    } else if 1.0 - mass > 1e-12 {
        return None;
    }
    Some(values)
}

fn require_bounded(fs: &[GridDensity], ks: &[f64]) -> Result<()> {
    if fs.is_empty() {
        return Err(Error::Precondition("need at least one density".into()));
    }
    if fs.len() != ks.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} densities but {} bounds K",
            fs.len(),
            ks.len()
        )));
    }
    for (index, (f, &bound)) in fs.iter().zip(ks).enumerate() {
        let ess_sup = f.ess_sup();
        if ess_sup > bound {
            return Err(Error::HypothesisViolated {
                index,
                ess_sup,
                bound,
            });
        }
    }
    Ok(())
}

fn require_matching_extremal(fs: &[GridDensity], ks: &[f64], extremal: &ExtremalSum) -> Result<()> {
    let mut a = ks.to_vec();
    let mut b = extremal.ks().to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    if a != b {
        return Err(Error::Precondition(format!(
            "extremal sum was built for K = {:?}, check needs {:?}",
            extremal.ks(),
            ks
        )));
    }
    if fs[0].spec().dim() != extremal.dim() {
        return Err(Error::ShapeMismatch(
            "densities and extremal sum differ in dimension".into(),
        ));
    }
    Ok(())
}

fn mass_defect(fs: &[GridDensity]) -> f64 {
    (fs.iter().map(GridDensity::integral).product::<f64>() - 1.0).abs()
}

/// `P(X_1 + ... + X_n ∈ S) <= P(U_1 + ... + U_n ∈ B)` with `μ(B) = μ(S)`.
pub fn check_theorem1(
    fs: &[GridDensity],
    ks: &[f64],
    s: &RegionMask,
    resolution: usize,
) -> Result<VerificationReport> {
    require_bounded(fs, ks)?;
    let extremal = ExtremalSum::new(fs[0].spec().dim(), ks, resolution)?;
    check_theorem1_with(fs, ks, s, &extremal)
}

/// As [`check_theorem1`] with a prebuilt extremal sum for the same K values.
///
/// `S` is first moved onto the exact-sum grid by cell-centre membership; the
/// left side is the exact probability of that union of cells and the right
/// side is evaluated at its measure.
pub fn check_theorem1_with(
    fs: &[GridDensity],
    ks: &[f64],
    s: &RegionMask,
    extremal: &ExtremalSum,
) -> Result<VerificationReport> {
    require_bounded(fs, ks)?;
    require_matching_extremal(fs, ks, extremal)?;
    let (lhs, measure) = small_ball_prob_exact(fs, s)?;
    let bound = if measure > 0.0 {
        extremal.prob_bound(measure)?
    } else {
        Bound {
            value: 0.0,
            budget: 0.0,
        }
    };
    let budget = bound.budget + CONVOLUTION_TOLERANCE + mass_defect(fs);
    Ok(VerificationReport::new(
        "theorem1",
        lhs,
        bound.value,
        budget,
        format!(
            "n={} set volume {measure:.6e}; extremal budget {:.3e}",
            fs.len(),
            bound.budget
        ),
    ))
}

/// `M(X_1 + ... + X_n) <= M(U_1 + ... + U_n)`, the left side read as the
/// largest exact cell average of the sum's density.
pub fn check_corollary(
    fs: &[GridDensity],
    ks: &[f64],
    resolution: usize,
) -> Result<VerificationReport> {
    require_bounded(fs, ks)?;
    let extremal = ExtremalSum::new(fs[0].spec().dim(), ks, resolution)?;
    check_corollary_with(fs, ks, &extremal)
}

pub fn check_corollary_with(
    fs: &[GridDensity],
    ks: &[f64],
    extremal: &ExtremalSum,
) -> Result<VerificationReport> {
    require_bounded(fs, ks)?;
    require_matching_extremal(fs, ks, extremal)?;
    let lhs = sum_density_cell_exact(fs)?.ess_sup();
    let bound = extremal.density_bound();
    let budget = bound.budget + CONVOLUTION_TOLERANCE + mass_defect(fs) * lhs;
    Ok(VerificationReport::new(
        "corollary",
        lhs,
        bound.value,
        budget,
        format!("n={}; extremal budget {:.3e}", fs.len(), bound.budget),
    ))
}

/// Both sides of the small-ball inequality and of its density form at the
/// extremizer: the inputs are the grid uniform-ball variables themselves and
/// `S` the centred cell ball of volume `set_volume`. The two sides run through
/// the same pipeline, so they agree up to round-off, and the budget is the
/// one the extremal bound carries.
pub fn equality_case_reports(
    d: usize,
    ks: &[f64],
    set_volume: f64,
    resolution: usize,
) -> Result<[VerificationReport; 2]> {
    let extremal = ExtremalSum::new(d, ks, resolution)?;
    let fs: Vec<GridDensity> = extremal.balls().iter().map(|b| b.density.clone()).collect();
    let defect = mass_defect(&fs);

    let cells = sum_density_cell_exact(&fs)?;
    let mask = centered_ball_mask(cells.spec(), set_volume)?;
    let lhs = cells.mass_on(&mask)?;
    let bound = extremal.prob_bound(mask.measure())?;
    let prob = VerificationReport::two_sided(
        "equality-prob",
        lhs,
        bound.value,
        bound.budget + CONVOLUTION_TOLERANCE + defect,
        format!(
            "d={d} n={} resolution {resolution} set volume {:.6e}",
            ks.len(),
            mask.measure()
        ),
    );

    let lhs = cells.ess_sup();
    let bound = extremal.density_bound();
    let density = VerificationReport::two_sided(
        "equality-density",
        lhs,
        bound.value,
        bound.budget + CONVOLUTION_TOLERANCE + defect * lhs,
        format!("d={d} n={} resolution {resolution}", ks.len()),
    );
    Ok([prob, density])
}

/// Brute-force check that rearranging every function does not decrease the
/// multilinear integral.
pub fn check_bll(fs: &[GridDensity], a: &CoefficientMatrix) -> Result<VerificationReport> {
    let lhs = bll_integral(fs, a)?;
    let rearranged = fs
        .iter()
        .map(symmetric_decreasing_rearrangement)
        .collect::<Result<Vec<_>>>()?;
    let rhs = bll_integral(&rearranged, a)?;
    Ok(VerificationReport::new(
        "bll",
        lhs,
        rhs,
        QUADRATURE_TOLERANCE,
        format!("k={} n={}", a.rows(), a.cols()),
    ))
}

/// The multilinear integral with the small-ball coefficients against the
/// small-ball probability on the lattice sum.
pub fn check_bridge(fs: &[GridDensity], s: &RegionMask) -> Result<VerificationReport> {
    let spec = sum_density(fs)?.spec().clone();
    let mask = s.resample_onto(&spec)?;
    let indicator = GridDensity::new(
        spec,
        mask.included()
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect(),
    )?;
    let mut with_set = fs.to_vec();
    with_set.push(indicator);
    let lhs = bll_integral(&with_set, &small_ball_coefficients(fs.len())?)?;
    let rhs = small_ball_prob(fs, &mask)?;
    Ok(VerificationReport::two_sided(
        "bridge",
        lhs,
        rhs,
        QUADRATURE_TOLERANCE,
        format!("n={}", fs.len()),
    ))
}

/// Output of [`extreme_point_decompose`].
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub p1: GridDensity,
    pub p2: GridDensity,
    /// `|∫_{X1} f - ∫_{X2} f|` left by the cell-granular split.
    pub imbalance: f64,
    pub report: VerificationReport,
}

/// Writes a non-extremal `f` bounded by `k` as the midpoint of two distinct
/// densities bounded by `k`.
///
/// With `A_y = {f >= y}` and `X = support(f) \ A_y`, `X` is split greedily in
/// row-major order into `X1` (cells until half of the mass of `X` is reached)
/// and `X2`. `p1` is `(1 - δ) f` on `X1`, `(1 + δ) f` on `X2` and `f`
/// elsewhere; `p2 = 2f - p1`. Each grown value `(1 + δ) f` lies in
/// `[f, 2f]`, so `2f - (1 + δ) f` is exact and `(p1 + p2) / 2 = f` holds
/// bit for bit.
pub fn extreme_point_decompose(
    f: &GridDensity,
    k: f64,
    y: f64,
    delta: f64,
) -> Result<Decomposition> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Precondition(format!("K must be positive, got {k}")));
    }
    let sup = f.ess_sup();
    if sup > k {
        return Err(Error::HypothesisViolated {
            index: 0,
            ess_sup: sup,
            bound: k,
        });
    }
    if f.values().iter().all(|&v| v == 0.0 || v == k) {
        return Err(Error::Precondition(
            "f is extremal: it only takes the values 0 and K, so no decomposition exists".into(),
        ));
    }
    if !(y > 0.0 && y < k) {
        return Err(Error::Precondition(format!(
            "y = {y} must lie in (0, K = {k})"
        )));
    }
    let upper = (k / y - 1.0).min(1.0);
    if !(delta > 0.0 && delta < upper) {
        return Err(Error::Precondition(format!(
            "delta = {delta} must lie in (0, min(K/y - 1, 1) = {upper})"
        )));
    }
    let values = f.values();
    let below: Vec<usize> = (0..values.len())
        .filter(|&i| values[i] > 0.0 && values[i] < y)
        .collect();
    if below.is_empty() {
        return Err(Error::Precondition(format!(
            "support(f) minus {{f >= {y}}} has measure zero"
        )));
    }

    let total: f64 = below
        .iter()
        .map(|&i| values[i])
        .collect::<NeumaierSum>()
        .value();
    let mut first = NeumaierSum::new();
    let mut split = below.len();
    for (pos, &i) in below.iter().enumerate() {
        first.add(values[i]);
        if first.value() >= 0.5 * total {
            split = pos + 1;
            break;
        }
    }
    let m1 = first.value();
    let cv = f.spec().cell_volume();
    let imbalance = ((m1 - (total - m1)) * cv).abs();

    let mut p1 = values.to_vec();
    for (pos, &i) in below.iter().enumerate() {
        let grown = (1.0 + delta) * values[i];
        p1[i] = if pos < split {
            2.0 * values[i] - grown
        } else {
            grown
        };
    }
    let p2: Vec<f64> = values.iter().zip(&p1).map(|(v, p)| 2.0 * v - p).collect();

    let midpoint_exact = values
        .iter()
        .zip(p1.iter().zip(&p2))
        .all(|(v, (a, b))| (a + b) * 0.5 == *v);
    let bounded = p1.iter().chain(&p2).all(|&v| (0.0..=k).contains(&v));
    let p1 = GridDensity::new(f.spec().clone(), p1)?;
    let p2 = GridDensity::new(f.spec().clone(), p2)?;

    let mass = f.integral();
    let defect = (p1.integral() - mass)
        .abs()
        .max((p2.integral() - mass).abs());
    let lhs = if midpoint_exact && bounded {
        defect
    } else {
        f64::INFINITY
    };
    let report = VerificationReport::new(
        "lemma",
        lhs,
        delta * imbalance,
        DECOMPOSITION_SLACK,
        format!(
            "imbalance {imbalance:.6e}; |X1| = {split} cells, |X2| = {} cells; midpoint exact: {midpoint_exact}; bounded by K: {bounded}",
            below.len() - split
        ),
    );
    Ok(Decomposition {
        p1,
        p2,
        imbalance,
        report,
    })
}

/// Fraction of `samples` draws of `X_1 + ... + X_n` that land in a cell of
/// `s`, and its standard error. Each variable picks a cell with probability
/// proportional to its mass, then a uniform point inside it.
pub fn monte_carlo_sum_prob(
    fs: &[GridDensity],
    s: &RegionMask,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(Error::Precondition("samples must be at least 1".into()));
    }
    if fs.is_empty() {
        return Err(Error::Precondition("need at least one density".into()));
    }
    let d = s.spec().dim();
    if fs.iter().any(|f| f.spec().dim() != d) {
        return Err(Error::ShapeMismatch(
            "densities and mask differ in dimension".into(),
        ));
    }
    let pickers = fs
        .iter()
        .map(|f| {
            WeightedIndex::new(f.values())
                .map_err(|e| Error::InvalidDensity(format!("cannot sample: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rng = stream(seed);
    let mut index = vec![0usize; d];
    let mut point = vec![0.0; d];
    let mut hits = 0usize;
    for _ in 0..samples {
        point.iter_mut().for_each(|p| *p = 0.0);
        for (f, picker) in fs.iter().zip(&pickers) {
            let spec = f.spec();
            spec.unravel(picker.sample(&mut rng), &mut index);
            for a in 0..d {
                let (lo, _) = spec.extents()[a];
                let u: f64 = rng.random();
                point[a] += lo + (index[a] as f64 + u) * spec.cell_widths()[a];
            }
        }
        if s.spec().locate(&point).is_some_and(|i| s.included()[i]) {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    Ok((p, (p * (1.0 - p) / samples as f64).sqrt()))
}

/// Monte Carlo estimate against the lattice small-ball probability. The
/// budget is three standard errors plus the exact gap between the lattice
/// value and the exact probability of the same set of cells.
pub fn check_monte_carlo(
    fs: &[GridDensity],
    s: &RegionMask,
    samples: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let spec = sum_density(fs)?.spec().clone();
    let mask = s.resample_onto(&spec)?;
    let lattice = small_ball_prob(fs, &mask)?;
    let (exact, _) = small_ball_prob_exact(fs, &mask)?;
    let (estimate, stderr) = monte_carlo_sum_prob(fs, &mask, samples, seed)?;
    let grid = (lattice - exact).abs();
    Ok(VerificationReport::two_sided(
        "montecarlo",
        estimate,
        lattice,
        3.0 * stderr + grid + CONVOLUTION_TOLERANCE,
        format!("samples {samples}; stderr {stderr:.3e}; grid gap {grid:.3e}"),
    ))
}

// ---------------------------------------------------------------------------
// random instances and sweeps

/// Settings shared by the seeded sweeps. Instance `i` uses the seed
/// `derive_seed(base_seed, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub d: usize,
    pub n: usize,
    /// One K per variable, or `None` to draw each from [`SWEEP_KS`].
    pub ks: Option<Vec<f64>>,
    pub count: usize,
    pub base_seed: u64,
    pub resolution: usize,
}

/// Default extremal resolution per dimension.
pub fn default_resolution(d: usize) -> usize {
    match d {
        1 => 512,
        2 => 128,
        _ => 32,
    }
}

/// Random densities and a random set for one small-ball check.
#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    pub ks: Vec<f64>,
    pub fs: Vec<GridDensity>,
    pub mask: RegionMask,
}

fn pick_ks(rng: &mut StreamRng, n: usize, fixed: &Option<Vec<f64>>) -> Vec<f64> {
    match fixed {
        Some(ks) => ks.clone(),
        None => (0..n)
            .map(|_| SWEEP_KS[rng.random_range(0..SWEEP_KS.len())])
            .collect(),
    }
}

fn random_shape(rng: &mut StreamRng) -> Shape {
    Shape::ALL[rng.random_range(0..Shape::ALL.len())]
}

/// Random set on `spec`: a ball, a union of boxes, or scattered cells.
pub fn random_mask(spec: &GridSpec, rng: &mut StreamRng) -> RegionMask {
    let ext = spec.extents().to_vec();
    match rng.random_range(0..3) {
        0 => {
            let center: Vec<f64> = ext
                .iter()
                .map(|&(lo, hi)| {
                    let mid = 0.5 * (lo + hi);
                    mid + 0.3 * (hi - lo) * rng.random_range(-0.5..0.5)
                })
                .collect();
            let half = ext
                .iter()
                .map(|&(lo, hi)| 0.5 * (hi - lo))
                .fold(f64::INFINITY, f64::min);
            let r = half * rng.random_range(0.05..0.6);
            RegionMask::from_fn(spec.clone(), |x| {
                x.iter()
                    .zip(&center)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    <= r * r
            })
        }
        1 => {
            let boxes: Vec<Vec<(f64, f64)>> = (0..rng.random_range(1..=3))
                .map(|_| {
                    ext.iter()
                        .map(|&(lo, hi)| {
                            let len = (hi - lo) * rng.random_range(0.05..0.5);
                            let a = rng.random_range(lo..hi - len);
                            (a, a + len)
                        })
                        .collect()
                })
                .collect();
            RegionMask::from_fn(spec.clone(), |x| {
                boxes
                    .iter()
                    .any(|b| b.iter().zip(x).all(|(&(a, z), &xi)| a <= xi && xi < z))
            })
        }
        _ => {
            let p = rng.random_range(0.05..0.5);
            let included = (0..spec.len()).map(|_| rng.random_bool(p)).collect();
            RegionMask::new(spec.clone(), included).expect("mask length matches grid")
        }
    }
}

/// Cells per axis across the smallest input grid of a sweep instance.
pub fn sweep_input_cells(resolution: usize) -> usize {
    (resolution / 4).clamp(8, 128)
}

/// Builds instance `index` of a small-ball sweep: each `X_i` lives on a box
/// of volume `c_i / K_i` with `c_i ∈ [1.05, 3]` at a random offset, all
/// sharing one cell width; the set is drawn on the lattice sum grid.
pub fn sweep_instance(cfg: &SweepConfig, index: usize) -> Result<Instance> {
    if cfg.d == 0 || cfg.n == 0 {
        return Err(Error::Precondition("d and n must be at least 1".into()));
    }
    let seed = derive_seed(cfg.base_seed, index as u64);
    let mut rng = stream(seed);
    let ks = pick_ks(&mut rng, cfg.n, &cfg.ks);
    if ks.len() != cfg.n {
        return Err(Error::ShapeMismatch(format!(
            "{} values of K for n = {}",
            ks.len(),
            cfg.n
        )));
    }
    let d = cfg.d;
    let sides: Vec<f64> = ks
        .iter()
        .map(|k| (rng.random_range(1.05..3.0) / k).powf(1.0 / d as f64))
        .collect();
    let h = sides.iter().copied().fold(f64::INFINITY, f64::min)
        / sweep_input_cells(cfg.resolution) as f64;
    let fs = ks
        .iter()
        .zip(&sides)
        .enumerate()
        .map(|(i, (&k, &side))| {
            let count = (side / h).ceil() as usize;
            let center: Vec<f64> = (0..d).map(|_| rng.random_range(-side..side)).collect();
            let spec = GridSpec::with_cell_width(&center, h, &vec![count; d])?;
            generate_bounded_density(&RandomDensitySpec {
                k,
                spec,
                seed: derive_seed(seed, i as u64 + 1),
                shape: random_shape(&mut rng),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let lattice = fs[1..]
        .iter()
        .try_fold(fs[0].spec().clone(), |acc, f| sum_grid(&acc, f.spec()))?;
    let mask = random_mask(&lattice, &mut stream(derive_seed(seed, 0)));
    Ok(Instance { seed, ks, fs, mask })
}

fn sorted_key(ks: &[f64]) -> Vec<u64> {
    let mut sorted = ks.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.into_iter().map(f64::to_bits).collect()
}

fn extremal_cache(
    d: usize,
    instances: &[Instance],
    resolution: usize,
) -> Result<BTreeMap<Vec<u64>, ExtremalSum>> {
    let keys: Vec<Vec<u64>> = instances
        .iter()
        .map(|inst| sorted_key(&inst.ks))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    keys.into_par_iter()
        .map(|key| {
            let ks: Vec<f64> = key.iter().map(|&b| f64::from_bits(b)).collect();
            Ok((key, ExtremalSum::new(d, &ks, resolution)?))
        })
        .collect()
}

/// Which inequality a sweep checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepCheck {
    Theorem1,
    Corollary,
}

/// Runs `cfg.count` seeded instances; reports come back in instance order
/// whatever the thread count.
pub fn run_sweep(cfg: &SweepConfig, check: SweepCheck) -> Result<Vec<VerificationReport>> {
    let instances = (0..cfg.count)
        .into_par_iter()
        .map(|i| sweep_instance(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    let cache = extremal_cache(cfg.d, &instances, cfg.resolution)?;
    instances
        .par_iter()
        .map(|inst| {
            let extremal = &cache[&sorted_key(&inst.ks)];
            let report = match check {
                SweepCheck::Theorem1 => {
                    check_theorem1_with(&inst.fs, &inst.ks, &inst.mask, extremal)?
                }
                SweepCheck::Corollary => check_corollary_with(&inst.fs, &inst.ks, extremal)?,
            };
            Ok(report.with_seed(inst.seed))
        })
        .collect()
}

/// Functions and coefficients for one brute-force rearrangement check:
/// `n·d <= 4`, odd grids of at most 15 cells per axis centred at the origin
/// with a common cell width (so every lattice point is a cell centre), the
/// first `n` rows the identity and up to two extra rows with entries in
/// `{-1, 0, 1}`.
pub fn bll_instance(seed: u64) -> Result<(Vec<GridDensity>, CoefficientMatrix)> {
    let mut rng = stream(seed);
    let d = rng.random_range(1..=2usize);
    let n = rng.random_range(1..=4 / d);
    let extra = rng.random_range(1..=2usize);
    let h = 0.25;
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|m| (0..n).map(|j| if j == m { 1.0 } else { 0.0 }).collect())
        .collect();
    for _ in 0..extra {
        let mut row: Vec<f64>;
        loop {
            row = (0..n).map(|_| rng.random_range(-1..=1) as f64).collect();
            if row.iter().any(|&v| v != 0.0) {
                break;
            }
        }
        rows.push(row);
    }
    let fs = (0..rows.len())
        .map(|j| {
            let count = 2 * rng.random_range(1..=7usize) + 1;
            let spec = GridSpec::centered(h, &vec![count; d])?;
            let k = 1.5 / spec.volume() + rng.random_range(0.0..2.0);
            generate_bounded_density(&RandomDensitySpec {
                k,
                spec,
                seed: derive_seed(seed, j as u64 + 1),
                shape: random_shape(&mut rng),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((fs, CoefficientMatrix::from_rows(&rows)?))
}

pub fn run_bll_sweep(count: usize, base_seed: u64) -> Result<Vec<VerificationReport>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(base_seed, i as u64);
            let (fs, a) = bll_instance(seed)?;
            Ok(check_bll(&fs, &a)?.with_seed(seed))
        })
        .collect()
}

/// Densities and a set for one bridge check: `n·d <= 6`, at most 8 cells
/// per axis per density, random offsets.
pub fn bridge_instance(seed: u64) -> Result<(Vec<GridDensity>, RegionMask)> {
    let mut rng = stream(seed);
    let d = rng.random_range(1..=2usize);
    let n = rng.random_range(1..=(6 / d).min(3));
    let h = 0.2;
    let fs = (0..n)
        .map(|i| {
            let count = rng.random_range(2..=8usize);
            let center: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let spec = GridSpec::with_cell_width(&center, h, &vec![count; d])?;
            let k = 1.0 / spec.volume() * rng.random_range(1.05..3.0);
            generate_bounded_density(&RandomDensitySpec {
                k,
                spec,
                seed: derive_seed(seed, i as u64 + 1),
                shape: random_shape(&mut rng),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let lattice = fs[1..]
        .iter()
        .try_fold(fs[0].spec().clone(), |acc, f| sum_grid(&acc, f.spec()))?;
    let mask = random_mask(&lattice, &mut rng);
    Ok((fs, mask))
}

pub fn run_bridge_sweep(count: usize, base_seed: u64) -> Result<Vec<VerificationReport>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(base_seed, i as u64);
            let (fs, mask) = bridge_instance(seed)?;
            Ok(check_bridge(&fs, &mask)?.with_seed(seed))
        })
        .collect()
}

/// A non-extremal density with admissible `(K, y, δ)` for the decomposition.
pub fn lemma_instance(seed: u64) -> Result<(GridDensity, f64, f64, f64)> {
    for attempt in 0..MAX_GENERATOR_ATTEMPTS as u64 {
        let mut rng = stream(derive_seed(seed, attempt));
        let d = rng.random_range(1..=2usize);
        let cells = if d == 1 {
            rng.random_range(4..=64)
        } else {
            rng.random_range(2..=16)
        };
        let spec = GridSpec::cube(d, -1.0, 1.0, cells)?;
        let k = rng.random_range(1.05..4.0) / spec.volume();
        let f = generate_bounded_density(&RandomDensitySpec {
            k,
            spec,
            seed: rng.random(),
            shape: random_shape(&mut rng),
        })?;
        let mut levels: Vec<f64> = f
            .values()
            .iter()
            .copied()
            .filter(|&v| v > 0.0 && v < k)
            .collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        if levels.is_empty() {
            continue;
        }
        let below = levels[rng.random_range(0..levels.len())];
        let above = levels
            .iter()
            .copied()
            .find(|&v| v > below)
            .unwrap_or(k)
            .min(k);
        let y = below + (above - below) * rng.random_range(0.1..0.9);
        if !(y > below && y < k) {
            continue;
        }
        let delta = (k / y - 1.0).min(1.0) * rng.random_range(0.05..0.95);
        return Ok((f, k, y, delta));
    }
    Err(Error::Infeasible("no non-extremal density drawn".into()))
}

pub fn run_lemma_sweep(count: usize, base_seed: u64) -> Result<Vec<VerificationReport>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(base_seed, i as u64);
            let (f, k, y, delta) = lemma_instance(seed)?;
            Ok(extreme_point_decompose(&f, k, y, delta)?
                .report
                .with_seed(seed))
        })
        .collect()
}

/// Monte Carlo against the lattice value on sweep instances.
pub fn run_monte_carlo_sweep(cfg: &SweepConfig, samples: usize) -> Result<Vec<VerificationReport>> {
    (0..cfg.count)
        .into_par_iter()
        .map(|i| {
            let inst = sweep_instance(cfg, i)?;
            let r = check_monte_carlo(&inst.fs, &inst.mask, samples, derive_seed(inst.seed, 99))?;
            Ok(r.with_seed(inst.seed))
        })
        .collect()
}
