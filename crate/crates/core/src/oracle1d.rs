//! Exact densities of sums of independent symmetric uniforms on the line.
//!
//! A density is kept as polynomial pieces between breakpoints, each piece's
//! coefficients written in the local variable `t = x - lo`. Convolving with a
//! uniform of width `w` maps `p` to `(P(x + w/2) - P(x - w/2)) / w`, with `P`
//! the antiderivative of `p`; on every interval between the shifted
//! breakpoints that is again a polynomial, one degree higher.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::summation::NeumaierSum;

/// Breakpoints closer than this (relative to the support width) are merged.
const MERGE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePolynomial {
    breakpoints: Vec<f64>,
    pieces: Vec<Vec<f64>>,
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

/// Coefficients of `q(s0 + t)` in powers of `t`.
fn taylor_shift(coeffs: &[f64], s0: f64) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    let n = c.len();
    for i in 0..n {
        for j in (i..n - 1).rev() {
            c[j] += s0 * c[j + 1];
        }
    }
    c
}

fn antiderivative(coeffs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(coeffs.len() + 1);
    out.push(0.0);
    out.extend(coeffs.iter().enumerate().map(|(k, c)| c / (k + 1) as f64));
    out
}

impl PiecewisePolynomial {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Vec<f64>>) -> Result<Self> {
        if breakpoints.len() < 2 || pieces.len() != breakpoints.len() - 1 {
            return Err(Error::ShapeMismatch(format!(
                "{} breakpoints need {} pieces, found {}",
                breakpoints.len(),
                breakpoints.len().saturating_sub(1),
                pieces.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite())
            || breakpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidGrid(
                "breakpoints must be finite and strictly increasing".into(),
            ));
        }
        if pieces
            .iter()
            .any(|p| p.is_empty() || p.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::InvalidDensity(
                "every piece needs finite coefficients".into(),
            ));
        }
        Ok(Self {
            breakpoints,
            pieces,
        })
    }

    /// Constant `1 / width` on `[-width/2, width/2]`.
    pub fn uniform(width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::Precondition(format!(
                "width must be positive, got {width}"
            )));
        }
        Self::new(vec![-width / 2.0, width / 2.0], vec![vec![1.0 / width]])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Vec<f64>] {
        &self.pieces
    }

    pub fn support(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    fn piece_index(&self, x: f64) -> Option<usize> {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return None;
        }
        let i = self.breakpoints.partition_point(|&b| b <= x);
        Some(i.saturating_sub(1).min(self.pieces.len() - 1))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.piece_index(x) {
            Some(i) => horner(&self.pieces[i], x - self.breakpoints[i]),
            None => 0.0,
        }
    }

    /// `∫_{-∞}^{x}` of the density.
    pub fn cumulative(&self, x: f64) -> f64 {
        let (lo, _) = self.support();
        if x <= lo {
            return 0.0;
        }
        let mut acc = NeumaierSum::new();
        for (i, piece) in self.pieces.iter().enumerate() {
            let a = self.breakpoints[i];
            let b = self.breakpoints[i + 1];
            let upper = x.min(b);
            acc.add(horner(&antiderivative(piece), upper - a));
            if x <= b {
                break;
            }
        }
        acc.value()
    }

    pub fn integral(&self) -> f64 {
        self.cumulative(self.support().1)
    }

    pub fn integral_between(&self, a: f64, b: f64) -> f64 {
        self.cumulative(b) - self.cumulative(a)
    }

    /// Evaluation points: both endpoints of every piece plus `per_piece`
    /// interior points.
    pub fn sample_points(&self, per_piece: usize) -> Vec<f64> {
        let mut xs = Vec::with_capacity(self.pieces.len() * (per_piece + 2));
        for w in self.breakpoints.windows(2) {
            xs.push(w[0]);
            for k in 1..=per_piece {
                xs.push(w[0] + (w[1] - w[0]) * k as f64 / (per_piece + 1) as f64);
            }
        }
        xs.push(*self.breakpoints.last().unwrap());
        xs
    }

    pub fn min_sampled(&self, per_piece: usize) -> f64 {
        self.sample_points(per_piece)
            .into_iter()
            .map(|x| self.eval(x))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_sampled(&self, per_piece: usize) -> f64 {
        self.sample_points(per_piece)
            .into_iter()
            .map(|x| self.eval(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Exact density of `X + U` where `X` has this density and `U` is uniform
    /// on `[-width/2, width/2]`.
    pub fn convolve_uniform(&self, width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::Precondition(format!(
                "width must be positive, got {width}"
            )));
        }
        let half = width / 2.0;
        let (lo, hi) = self.support();
        let scale = (hi - lo + width) * MERGE_TOLERANCE;

        let mut points: Vec<f64> = self
            .breakpoints
            .iter()
            .flat_map(|&b| [b - half, b + half])
            .collect();
        points.sort_by(f64::total_cmp);
        let mut merged: Vec<f64> = Vec::with_capacity(points.len());
        for p in points {
            match merged.last() {
                Some(&q) if p - q <= scale => {}
                _ => merged.push(p),
            }
        }
        *merged.last_mut().unwrap() = hi + half;

        let antis: Vec<Vec<f64>> = self.pieces.iter().map(|p| antiderivative(p)).collect();
        let offsets: Vec<f64> = {
            let mut acc = NeumaierSum::new();
            let mut out = Vec::with_capacity(antis.len());
            for (i, a) in antis.iter().enumerate() {
                out.push(acc.value());
                acc.add(horner(a, self.breakpoints[i + 1] - self.breakpoints[i]));
            }
            out
        };
        let total = self.integral();

        // antiderivative of `self` on the interval [left, left + len] of the
        // y variable, as a polynomial in `t = y - left`
        let cumulative_poly = |y_mid: f64, left: f64| -> Vec<f64> {
            if y_mid <= lo {
                return vec![0.0];
            }
            if y_mid >= hi {
                return vec![total];
            }
            let i = self.piece_index(y_mid).unwrap();
            let mut c = taylor_shift(&antis[i], left - self.breakpoints[i]);
            c[0] += offsets[i];
            c
        };

        let mut pieces = Vec::with_capacity(merged.len() - 1);
        for w in merged.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mid = 0.5 * (a + b);
            let upper = cumulative_poly(mid + half, a + half);
            let lower = cumulative_poly(mid - half, a - half);
            let len = upper.len().max(lower.len());
            let coeffs: Vec<f64> = (0..len)
                .map(|k| {
                    let u = upper.get(k).copied().unwrap_or(0.0);
                    let l = lower.get(k).copied().unwrap_or(0.0);
                    (u - l) / width
                })
                .collect();
            pieces.push(coeffs);
        }
        Self::new(merged, pieces)
    }

    /// Text form: number of pieces, then `lo hi c0 ... ck` per piece.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.pieces.len());
        for (i, piece) in self.pieces.iter().enumerate() {
            let _ = write!(
                out,
                "{:.16e} {:.16e}",
                self.breakpoints[i],
                self.breakpoints[i + 1]
            );
            for c in piece {
                let _ = write!(out, " {c:.16e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let bad = |line: usize, message: &str| Error::Parse {
            line: line + 1,
            message: message.into(),
        };
        let (ln, head) = lines.next().ok_or_else(|| bad(0, "empty input"))?;
        let count: usize = head
            .trim()
            .parse()
            .map_err(|_| bad(ln, "bad piece count"))?;
        let mut breakpoints = Vec::with_capacity(count + 1);
        let mut pieces = Vec::with_capacity(count);
        for (ln, line) in lines {
            let nums: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(ln, "bad number"))?;
            if nums.len() < 3 {
                return Err(bad(ln, "piece line must be `lo hi c0 ...`"));
            }
            match breakpoints.last() {
                None => breakpoints.push(nums[0]),
                Some(&prev) if prev == nums[0] => {}
                Some(_) => return Err(bad(ln, "pieces must be contiguous")),
            }
            breakpoints.push(nums[1]);
            pieces.push(nums[2..].to_vec());
        }
        if pieces.len() != count {
            return Err(bad(0, "piece count does not match"));
        }
        Self::new(breakpoints, pieces)
    }
}

/// Exact density of the sum of independent uniforms on `[-w/2, w/2]`, one
/// per entry of `widths`.
pub fn oracle1d_sum_of_uniforms(widths: &[f64]) -> Result<PiecewisePolynomial> {
    let (first, rest) = widths
        .split_first()
        .ok_or_else(|| Error::Precondition("need at least one width".into()))?;
    rest.iter()
        .try_fold(PiecewisePolynomial::uniform(*first)?, |acc, &w| {
            acc.convolve_uniform(w)
        })
}
