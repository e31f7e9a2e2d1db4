//! Piecewise-linear helpers over sampled, non-decreasing curves.

/// Linear interpolation of `ys` over strictly increasing `xs`, clamped to
/// the end values outside the grid.
pub(crate) fn lerp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    // first index with xs[i] > x
    let hi = xs.partition_point(|&g| g <= x);
    let lo = hi - 1;
    let t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    ys[lo] + t * (ys[hi] - ys[lo])
}

/// Largest `x` at which a non-decreasing curve is still at or below `level`.
///
/// This is where an increasing input leaves `level`; on a flat stretch at
/// `level` it returns the right end. `None` if the curve starts above `level`.
pub(crate) fn last_at_or_below(xs: &[f64], ys: &[f64], level: f64) -> Option<f64> {
    let n = xs.len();
    if ys[0] > level {
        return None;
    }
    let k = ys.partition_point(|&y| y <= level);
    if k == n {
        return Some(xs[n - 1]);
    }
    // ys[k-1] <= level < ys[k]
    let (x0, x1, y0, y1) = (xs[k - 1], xs[k], ys[k - 1], ys[k]);
    Some(x0 + (level - y0) / (y1 - y0) * (x1 - x0))
}

/// Smallest `x` at which a non-decreasing curve is at or above `level`.
///
/// This is where a decreasing input leaves `level`. `None` if the curve ends
/// below `level`.
pub(crate) fn first_at_or_above(xs: &[f64], ys: &[f64], level: f64) -> Option<f64> {
    let n = xs.len();
    if ys[n - 1] < level {
        return None;
    }
    let k = ys.partition_point(|&y| y < level);
    if k == 0 {
        return Some(xs[0]);
    }
    // ys[k-1] < level <= ys[k]
    let (x0, x1, y0, y1) = (xs[k - 1], xs[k], ys[k - 1], ys[k]);
    Some(x0 + (level - y0) / (y1 - y0) * (x1 - x0))
}

#[cfg(test)]
mod tests {
    use super::*;

    const XS: [f64; 4] = [0.0, 10.0, 20.0, 30.0];
    const YS: [f64; 4] = [0.0, 5.0, 5.0, 8.0];

    #[test]
    fn lerp_inside_and_clamped() {
        assert_eq!(lerp(&XS, &YS, 5.0), 2.5);
        assert_eq!(lerp(&XS, &YS, 25.0), 6.5);
        assert_eq!(lerp(&XS, &YS, -3.0), 0.0);
        assert_eq!(lerp(&XS, &YS, 99.0), 8.0);
        assert_eq!(lerp(&XS, &YS, 10.0), 5.0);
    }

    #[test]
    fn flat_stretch_resolves_by_travel_direction() {
        assert_eq!(last_at_or_below(&XS, &YS, 5.0), Some(20.0));
        assert_eq!(first_at_or_above(&XS, &YS, 5.0), Some(10.0));
        assert_eq!(last_at_or_below(&XS, &YS, 2.5), Some(5.0));
        assert_eq!(first_at_or_above(&XS, &YS, 6.5), Some(25.0));
    }

    #[test]
    fn out_of_range_levels() {
        assert_eq!(last_at_or_below(&XS, &YS, -1.0), None);
        assert_eq!(first_at_or_above(&XS, &YS, 9.0), None);
        assert_eq!(last_at_or_below(&XS, &YS, 9.0), Some(30.0));
        assert_eq!(first_at_or_above(&XS, &YS, -1.0), Some(0.0));
    }
}
