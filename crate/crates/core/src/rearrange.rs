//! Spherically symmetric decreasing rearrangement of grid densities.
//!
//! On a piecewise-constant representative the rearrangement is a
//! sort-and-assign: the largest cell value goes to the cell nearest the
//! origin, the next largest to the next nearest cell, and so on. Distance ties
//! are broken by row-major index and value ties by a stable sort, so the
//! output is bit-reproducible. The multiset of values is unchanged, hence
//! every superlevel set keeps its exact cell count.

use crate::error::{Error, Result};
use crate::grid::GridDensity;
use crate::report::VerificationReport;

pub fn symmetric_decreasing_rearrangement(f: &GridDensity) -> Result<GridDensity> {
    let order = f.spec().radial_order()?;
    let mut sorted = f.values().to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut out = vec![0.0; sorted.len()];
    for (&cell, v) in order.iter().zip(sorted) {
        out[cell] = v;
    }
    Ok(GridDensity::from_parts_unchecked(f.spec().clone(), out))
}

/// Checks that `g` is a symmetric decreasing rearrangement of `f`:
///
/// - (a) along each shell of equidistant cell centres, taken in row-major
///   order, `g` does not increase;
/// - (b) `g` does not increase from one shell to the next farther one;
/// - (c) `f` and `g` have identical superlevel cell counts at every value
///   taken by either.
///
/// `lhs` of the report is the number of violations found; it passes only
/// with none.
pub fn verify_rearrangement_properties(
    f: &GridDensity,
    g: &GridDensity,
) -> Result<VerificationReport> {
    if f.spec() != g.spec() {
        return Err(Error::ShapeMismatch(
            "rearrangement check needs both functions on one grid".into(),
        ));
    }
    let spec = g.spec();
    let order = spec.radial_order()?;
    let shells = spec.radial_shell_keys();
    let gv = g.values();

    let mut shell_violations = 0usize;
    let mut radial_violations = 0usize;
    for pair in order.windows(2) {
        let (inner, outer) = (pair[0], pair[1]);
        if gv[outer] > gv[inner] {
            if shells[inner] == shells[outer] {
                shell_violations += 1;
            } else {
                radial_violations += 1;
            }
        }
    }

    let level_violations = superlevel_mismatches(f.values(), gv);

    let mut failed = Vec::new();
    if shell_violations > 0 {
        failed.push(format!(
            "(a) not constant-then-decreasing on {shell_violations} shell pairs"
        ));
    }
    if radial_violations > 0 {
        failed.push(format!(
            "(b) increases across {radial_violations} shell boundaries"
        ));
    }
    if level_violations > 0 {
        failed.push(format!(
            "(c) superlevel counts differ at {level_violations} thresholds"
        ));
    }
    let detail = if failed.is_empty() {
        "radial, non-increasing and equimeasurable".to_string()
    } else {
        failed.join("; ")
    };
    let violations = shell_violations + radial_violations + level_violations;
    Ok(VerificationReport::new(
        "rearrangement",
        violations as f64,
        0.0,
        0.0,
        detail,
    ))
}

/// Number of thresholds `y` (drawn from both value sets) at which
/// `#{a >= y}` and `#{b >= y}` differ.
fn superlevel_mismatches(a: &[f64], b: &[f64]) -> usize {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| y.total_cmp(x));
    sb.sort_by(|x, y| y.total_cmp(x));
    let count_ge = |s: &[f64], y: f64| s.partition_point(|&v| v >= y);
    let mut thresholds: Vec<f64> = sa.iter().chain(&sb).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds
        .into_iter()
        .filter(|&y| count_ge(&sa, y) != count_ge(&sb, y))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn density(spec: GridSpec, values: Vec<f64>) -> GridDensity {
        GridDensity::new(spec, values).unwrap()
    }

    #[test]
    fn indicator_moves_to_centered_interval() {
        let spec = GridSpec::cube(1, -1.0, 1.0, 8).unwrap();
        let f = GridDensity::from_fn(spec, |c| if c[0] > 0.0 { 1.0 } else { 0.0 }).unwrap();
        let g = symmetric_decreasing_rearrangement(&f).unwrap();
        assert_eq!(g.values(), &[0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn four_cell_example() {
        let spec = GridSpec::cube(1, -2.0, 2.0, 4).unwrap();
        let f = density(spec, vec![0.5, 0.0, 0.25, 0.25]);
        let g = symmetric_decreasing_rearrangement(&f).unwrap();
        assert_eq!(g.values(), &[0.25, 0.5, 0.25, 0.0]);
    }

    #[test]
    fn rearranged_input_is_fixed() {
        let spec = GridSpec::cube(2, -1.0, 1.0, 5).unwrap();
        let f = GridDensity::from_fn(spec, |c| (c[0] * 7.0).sin().abs() + c[1].abs()).unwrap();
        let g = symmetric_decreasing_rearrangement(&f).unwrap();
        let h = symmetric_decreasing_rearrangement(&g).unwrap();
        assert_eq!(g, h);
    }

    #[test]
    fn rejects_off_center_grid() {
        let spec = GridSpec::cube(1, 0.0, 1.0, 4).unwrap();
        let f = density(spec, vec![1.0; 4]);
        assert!(matches!(
            symmetric_decreasing_rearrangement(&f),
            Err(Error::NotOriginCentered { .. })
        ));
    }

    #[test]
    fn verify_accepts_rearrangement_and_rejects_asymmetric() {
        let spec = GridSpec::cube(1, -1.0, 1.0, 8).unwrap();
        let f = GridDensity::from_fn(spec.clone(), |c| if c[0] > 0.0 { 1.0 } else { 0.0 }).unwrap();
        let g = symmetric_decreasing_rearrangement(&f).unwrap();
        assert!(verify_rearrangement_properties(&f, &g).unwrap().passed);

        let r = verify_rearrangement_properties(&f, &f).unwrap();
        assert!(!r.passed);
        assert!(r.detail.contains("(a)"), "{}", r.detail);

        let box_centered =
            GridDensity::from_fn(spec, |c| if c[0].abs() < 0.5 { 1.0 } else { 0.0 }).unwrap();
        assert!(
            verify_rearrangement_properties(&f, &box_centered)
                .unwrap()
                .passed
        );
    }

    #[test]
    fn verify_flags_changed_distribution() {
        let spec = GridSpec::cube(1, -1.0, 1.0, 4).unwrap();
        let f = density(spec.clone(), vec![0.0, 1.0, 2.0, 0.0]);
        let g = density(spec, vec![0.0, 2.0, 2.0, 0.0]);
        let r = verify_rearrangement_properties(&f, &g).unwrap();
        assert!(!r.passed);
        assert!(r.detail.contains("(c)"));
    }

    #[test]
    fn verify_rejects_mismatched_grids() {
        let a = density(GridSpec::cube(1, -1.0, 1.0, 4).unwrap(), vec![0.0; 4]);
        let b = density(GridSpec::cube(1, -1.0, 1.0, 2).unwrap(), vec![0.0; 2]);
        assert!(verify_rearrangement_properties(&a, &b).is_err());
    }
}
