//! One-dimensional maximization helpers.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal function on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `tol`. Returns the best interior
/// probe and its value; endpoints are never evaluated.
pub fn golden_section_max<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    debug_assert!(lo <= hi);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Maximizes a concave function on `[lo, hi]`.
///
/// Golden-section search on the interior, then the two endpoints are compared
/// against the interior candidate. Ties (within a relative `1e-14`) resolve to
/// the smallest argument.
pub fn maximize_concave<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    if hi <= lo {
        return (lo, f(lo));
    }
    let (xm, fm) = golden_section_max(&mut f, lo, hi, tol);
    let candidates = [(lo, f(lo)), (xm, fm), (hi, f(hi))];
    pick_smallest_best(&candidates)
}

/// Picks the best `(x, f(x))` pair, preferring smaller `x` among near ties.
/// `candidates` must be sorted by `x`.
pub(crate) fn pick_smallest_best(candidates: &[(f64, f64)]) -> (f64, f64) {
    let best = candidates
        .iter()
        .map(|c| c.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let slack = 1e-14 * best.abs().max(1e-300);
    candidates
        .iter()
        .copied()
        .find(|c| c.1 >= best - slack)
        .unwrap_or(candidates[0])
}
